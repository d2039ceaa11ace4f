"""Name universe shared by the source and target calculi.

Names are ``str`` subclasses whose text *is* the display form, so equality,
hashing and ordering stay cheap during state-space exploration.  The kind of
a name is recovered from its spelling:

=============  ==================  =====================================
kind           display             example
=============  ==================  =====================================
source         verbatim            ``a``
reserved       ``<base>%0``        ``act%0`` (free reserved name)
policy         ``<src>#<slot>``    ``a#2``
variant        ``<core>%<n>``      ``l%7``, ``a#2%1`` (n >= 1)
bound          ``<core>^<n>``      ``r^3`` (binder below a guard)
=============  ==================  =====================================

Process-variable images are spelled ``x_<VAR>`` and count as reserved.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache

# Table of reserved names.  Subscripts are spelled as suffixes
# (l_l is the left lock, s_i a summand trigger, ...).
RESERVED_BASES = frozenset({
    "act", "act'", "c", "c_l", "c_r", "z",
    "l", "l_l", "l_r", "l'",
    "r", "r_l", "r_r",
    "s", "s_i", "s_l", "s_r",
    "next", "syn", "syn'", "v", "tau",
    "once", "mc", "rep", "t", "f",
})

SOURCE_RE = re.compile(r"^[a-z][a-z0-9_]*$")
VAR_RE = re.compile(r"^[A-Z][A-Za-z0-9_]*$")
_NAME_RE = re.compile(r"^(?P<core>[^%^]+?)(?:%(?P<inst>\d+))?(?:\^(?P<lvl>\d+))?$")


@dataclass(frozen=True)
class NameInfo:
    core: str
    base: str
    kind: str
    slot: int
    instance: int
    level: int


class NameError_(ValueError):
    pass


@lru_cache(maxsize=None)
def info(name: str) -> NameInfo:
    m = _NAME_RE.match(name)
    if not m:
        raise NameError_(f"malformed name {name!r}")
    core = m.group("core")
    inst = m.group("inst")
    lvl = m.group("lvl")
    instance = int(inst) if inst is not None else 0
    level = int(lvl) if lvl is not None else 0
    slot = 0
    if "#" in core:
        base, s = core.split("#", 1)
        slot = int(s)
        kind = "policy"
    elif core.startswith("x_") and VAR_RE.match(core[2:]):
        base, kind = core, "reserved"
    elif inst is not None and core in RESERVED_BASES:
        base, kind = core, "reserved"
    else:
        base, kind = core, "source"
    if lvl is not None:
        kind = "bound"
    elif instance > 0:
        kind = "variant"
    return NameInfo(core, base, kind, slot, instance, level)


class Name(str):
    """A target or source name.  See the module docstring for spellings."""

    __slots__ = ()

    @property
    def kind(self) -> str:
        return info(self).kind

    @property
    def base(self) -> str:
        return info(self).base

    @property
    def core(self) -> str:
        return info(self).core

    @property
    def slot(self) -> int:
        return info(self).slot

    @property
    def instance(self) -> int:
        return info(self).instance

    @staticmethod
    def source(text: str) -> "Name":
        if not SOURCE_RE.match(text):
            raise NameError_(f"not a source name: {text!r}")
        return Name(text)

    @staticmethod
    def reserved(base: str) -> "Name":
        if base not in RESERVED_BASES:
            raise NameError_(f"not a reserved name: {base!r}")
        return Name(base + "%0")

    @staticmethod
    def variant(core: str, instance: int) -> "Name":
        return Name(f"{core}%{instance}")

    @staticmethod
    def bound(core: str, level: int) -> "Name":
        return Name(f"{core}^{level}")


def core_of(name: str) -> str:
    return info(name).core


def kind_of(name: str) -> str:
    return info(name).kind


def reserved_core(base) -> str:
    """Accept either a bare base ('l') or a reserved Name ('l%0')."""
    if base in RESERVED_BASES:
        return base
    i = info(base)
    if i.kind != "reserved":
        raise NameError_(f"{base!r} is not reserved")
    return i.core


def is_variant_of(name: str, base) -> bool:
    """True if ``name`` is the reserved name ``base`` or one of its variants."""
    if base in RESERVED_BASES:
        target = base
    else:
        target = info(base).core
    return info(name).core == target


def is_var_image(name: str) -> bool:
    c = info(name).core
    return c.startswith("x_") and bool(VAR_RE.match(c[2:]))


TAU = Name.reserved("tau")
ACT = Name.reserved("act")


@dataclass
class RenamingPolicy:
    """Maps source names to target triples and variables to reserved names.

    Triples are produced by tagging (``a#1``, ``a#2``, ``a#3``), so they can
    never collide with reserved names or with each other.  Fresh variants come
    from one monotone counter, which keeps encodings deterministic.
    """

    triples: dict = field(default_factory=dict)
    variables: dict = field(default_factory=dict)
    counter: int = 0
    issued: dict = field(default_factory=dict)

    def policy_triple(self, n: str) -> tuple[Name, Name, Name]:
        if not isinstance(n, str) or info(n).kind != "source":
            raise NameError_(f"policy_triple expects a source name, got {n!r}")
        t = self.triples.get(n)
        if t is None:
            t = tuple(Name(f"{n}#{k}") for k in (1, 2, 3))
            self.triples[n] = t
        return t

    def var_name(self, X: str) -> Name:
        if not VAR_RE.match(X):
            raise NameError_(f"not a process variable: {X!r}")
        nm = self.variables.get(X)
        if nm is None:
            nm = Name("x_" + X)
            self.variables[X] = nm
        return nm

    def fresh_variant(self, base) -> Name:
        if is_var_image(base):
            core = info(base).core
        else:
            core = reserved_core(base)
        self.counter += 1
        nm = Name.variant(core, self.counter)
        self.issued[nm] = core
        return nm


def policy_triple(policy: RenamingPolicy, n: str):
    return policy.policy_triple(n)


def var_name(policy: RenamingPolicy, X: str) -> Name:
    return policy.var_name(X)


def fresh_variant(policy: RenamingPolicy, base) -> Name:
    return policy.fresh_variant(base)
