"""CSP source terms: AST, parser, printer and structural operational semantics."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterator

from .names import SOURCE_RE, VAR_RE

TAU = "τ"  # cannot clash with a source name, those are lowercase ASCII

_occ = itertools.count(1)


def _fresh_occ() -> int:
    return next(_occ)


class CspTerm:
    __slots__ = ()

    def __str__(self):
        return pretty(self)


@dataclass(frozen=True)
class Stop(CspTerm):
    pass


@dataclass(frozen=True)
class Div(CspTerm):
    pass


@dataclass(frozen=True)
class Success(CspTerm):
    pass


@dataclass(frozen=True)
class Var(CspTerm):
    name: str


@dataclass(frozen=True)
class Rec(CspTerm):
    var: str
    body: CspTerm


@dataclass(frozen=True)
class Parallel(CspTerm):
    left: CspTerm
    right: CspTerm
    sync: frozenset


@dataclass(frozen=True)
class IntChoice(CspTerm):
    left: CspTerm
    right: CspTerm


@dataclass(frozen=True)
class Conceal(CspTerm):
    body: CspTerm
    name: str


@dataclass(frozen=True)
class Rename(CspTerm):
    body: CspTerm
    mapping: tuple  # sorted ((old, new), ...)

    def apply(self, label):
        for old, new in self.mapping:
            if old == label:
                return new
        return label


@dataclass(frozen=True)
class Prefix:
    action: str
    cont: CspTerm
    occ: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ExtSum(CspTerm):
    branches: tuple  # of Prefix, never empty


STOP = Stop()
DIV = Div()
SUCCESS = Success()


def prefix(action: str, cont: CspTerm) -> ExtSum:
    return ExtSum((Prefix(action, cont, _fresh_occ()),))


def rename(body: CspTerm, mapping: dict) -> Rename:
    return Rename(body, tuple(sorted(mapping.items())))


def parallel(left, right, sync=()) -> Parallel:
    return Parallel(left, right, frozenset(sync))


# --------------------------------------------------------------------------
# parser


class CspSyntaxError(ValueError):
    def __init__(self, msg, pos):
        super().__init__(f"{msg} at position {pos}")
        self.pos = pos


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<sym>\[\||\|\]|\|~\||\[\]|\[\[|\]\]|->|:=|\\|[{}(),.])"
    r"|(?P<id>[A-Za-z][A-Za-z0-9_]*))"
)
_KEYWORDS = {"STOP", "DIV", "SUCCESS", "mu"}


def _tokenize(text: str):
    pos = 0
    out = []
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            raise CspSyntaxError(f"unexpected character {text[pos]!r}", pos)
        start = m.start("sym") if m.group("sym") else m.start("id")
        out.append((m.group("sym") or m.group("id"), start))
        pos = m.end()
    out.append(("<eof>", len(text)))
    return out


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i][0]

    def pos(self):
        return self.toks[self.i][1]

    def take(self, expected=None):
        tok, pos = self.toks[self.i]
        if expected is not None and tok != expected:
            raise CspSyntaxError(f"expected {expected!r}, found {tok!r}", pos)
        self.i += 1
        return tok

    def name(self):
        tok, pos = self.toks[self.i]
        if tok in _KEYWORDS or not SOURCE_RE.match(tok):
            raise CspSyntaxError(f"expected an action name, found {tok!r}", pos)
        self.i += 1
        return tok

    def par(self):
        left = self.choice()
        while self.peek() == "[|":
            self.take()
            self.take("{")
            names = []
            if self.peek() != "}":
                names.append(self.name())
                while self.peek() == ",":
                    self.take()
                    names.append(self.name())
            self.take("}")
            self.take("|]")
            right = self.choice()
            left = Parallel(left, right, frozenset(names))
        return left

    def choice(self):
        left = self.sum()
        while self.peek() == "|~|":
            self.take()
            left = IntChoice(left, self.sum())
        return left

    def sum(self):
        pos = self.pos()
        first = self.post()
        if self.peek() != "[]":
            return first
        parts = [(first, pos)]
        while self.peek() == "[]":
            self.take()
            pos = self.pos()
            parts.append((self.post(), pos))
        branches = []
        for p, at in parts:
            if not isinstance(p, ExtSum):
                raise CspSyntaxError("operands of [] must be prefixes or sums", at)
            branches.extend(p.branches)
        return ExtSum(tuple(branches))

    def post(self):
        body = self.prefix()
        while self.peek() in ("\\", "[["):
            if self.take() == "\\":
                body = Conceal(body, self.name())
            else:
                mapping = {}
                while True:
                    pos = self.pos()
                    old = self.name()
                    self.take(":=")
                    new = self.name()
                    if old in mapping:
                        raise CspSyntaxError(f"duplicate renaming of {old!r}", pos)
                    mapping[old] = new
                    if self.peek() == ",":
                        self.take()
                        continue
                    break
                self.take("]]")
                body = rename(body, mapping)
        return body

    def prefix(self):
        tok = self.peek()
        if (tok not in _KEYWORDS and SOURCE_RE.match(tok)
                and self.toks[self.i + 1][0] == "->"):
            action = self.name()
            occ = _fresh_occ()
            self.take("->")
            return ExtSum((Prefix(action, self.prefix(), occ),))
        return self.atom()

    def atom(self):
        tok, pos = self.toks[self.i]
        if tok == "STOP":
            self.take()
            return STOP
        if tok == "DIV":
            self.take()
            return DIV
        if tok == "SUCCESS":
            self.take()
            return SUCCESS
        if tok == "mu":
            self.take()
            var = self.take()
            if not VAR_RE.match(var) or var in _KEYWORDS:
                raise CspSyntaxError(f"expected a process variable, found {var!r}", pos)
            self.take(".")
            return Rec(var, self.par())
        if tok == "(":
            self.take()
            inner = self.par()
            self.take(")")
            return inner
        if tok not in _KEYWORDS and VAR_RE.match(tok):
            self.take()
            return Var(tok)
        raise CspSyntaxError(f"unexpected token {tok!r}", pos)


def parse_csp(text: str) -> CspTerm:
    p = _Parser(text)
    term = p.par()
    if p.peek() != "<eof>":
        raise CspSyntaxError(f"trailing input {p.peek()!r}", p.pos())
    return term


# --------------------------------------------------------------------------
# printer; levels: 0 parallel, 1 internal choice, 2 sum, 3 postfix, 4 prefix


def pretty(t: CspTerm, level: int = 0, top: bool = True) -> str:
    """Minimal-parenthesis printer; parse_csp(pretty(t)) == t."""
    def wrap(s, own):
        return s if own >= level else f"({s})"

    def pp(t, level):
        return pretty(t, level, top=False)

    match t:
        case Stop():
            return "STOP"
        case Div():
            return "DIV"
        case Success():
            return "SUCCESS"
        case Var(name):
            return name
        case Rec(var, body):
            s = f"mu {var} . {pretty(body, 0)}"
            return s if top else f"({s})"
        case Parallel(l, r, sync):
            names = ",".join(sorted(sync))
            return wrap(f"{pp(l, 0)} [|{{{names}}}|] {pp(r, 1)}", 0)
        case IntChoice(l, r):
            return wrap(f"{pp(l, 1)} |~| {pp(r, 2)}", 1)
        case ExtSum(branches) if len(branches) == 1:
            b = branches[0]
            return wrap(f"{b.action} -> {pp(b.cont, 4)}", 4)
        case ExtSum(branches):
            return wrap(" [] ".join(f"{b.action} -> {pp(b.cont, 4)}" for b in branches), 2)
        case Conceal(body, name):
            return wrap(f"{pp(body, 3)} \\ {name}", 3)
        case Rename(body, mapping):
            m = ", ".join(f"{a} := {b}" for a, b in mapping)
            return wrap(f"{pp(body, 3)} [[{m}]]", 3)
    raise TypeError(t)


# --------------------------------------------------------------------------
# substitution and free names


def free_vars(t: CspTerm) -> frozenset:
    match t:
        case Var(name):
            return frozenset({name})
        case Rec(var, body):
            return free_vars(body) - {var}
        case Parallel(l, r, _) | IntChoice(l, r):
            return free_vars(l) | free_vars(r)
        case Conceal(body, _) | Rename(body, _):
            return free_vars(body)
        case ExtSum(branches):
            out = frozenset()
            for b in branches:
                out |= free_vars(b.cont)
            return out
    return frozenset()


def names_of(t: CspTerm) -> frozenset:
    """Every source name occurring in t (actions, sync sets, maps, hidden names)."""
    match t:
        case Rec(_, body):
            return names_of(body)
        case Parallel(l, r, sync):
            return names_of(l) | names_of(r) | sync
        case IntChoice(l, r):
            return names_of(l) | names_of(r)
        case Conceal(body, name):
            return names_of(body) | {name}
        case Rename(body, mapping):
            out = names_of(body)
            for a, b in mapping:
                out |= {a, b}
            return out
        case ExtSum(branches):
            out = frozenset()
            for b in branches:
                out |= {b.action} | names_of(b.cont)
            return out
    return frozenset()


def clone(t: CspTerm) -> CspTerm:
    """Copy with fresh prefix occurrence ids."""
    match t:
        case Rec(var, body):
            return Rec(var, clone(body))
        case Parallel(l, r, sync):
            return Parallel(clone(l), clone(r), sync)
        case IntChoice(l, r):
            return IntChoice(clone(l), clone(r))
        case Conceal(body, name):
            return Conceal(clone(body), name)
        case Rename(body, mapping):
            return Rename(clone(body), mapping)
        case ExtSum(branches):
            return ExtSum(tuple(Prefix(b.action, clone(b.cont), _fresh_occ()) for b in branches))
    return t


def substitute(t: CspTerm, var: str, repl: CspTerm) -> CspTerm:
    """Capture-avoiding t[repl/var]; every inserted copy gets fresh occurrence ids."""
    repl_free = free_vars(repl)

    def go(t):
        match t:
            case Var(name):
                return clone(repl) if name == var else t
            case Rec(y, body):
                if y == var or var not in free_vars(body):
                    return t
                if y in repl_free:
                    used = repl_free | free_vars(body) | {var}
                    y2 = next(f"{y}{k}" for k in itertools.count(1) if f"{y}{k}" not in used)
                    body = substitute(body, y, Var(y2))
                    y = y2
                return Rec(y, go(body))
            case Parallel(l, r, sync):
                return Parallel(go(l), go(r), sync)
            case IntChoice(l, r):
                return IntChoice(go(l), go(r))
            case Conceal(body, name):
                return Conceal(go(body), name)
            case Rename(body, mapping):
                return Rename(go(body), mapping)
            case ExtSum(branches):
                return ExtSum(tuple(Prefix(b.action, go(b.cont), b.occ) for b in branches))
        return t

    return go(t)


# --------------------------------------------------------------------------
# semantics


def labelled_steps(t: CspTerm) -> list:
    """All (label, derivative, redex) triples; redex is the frozenset of
    prefix occurrence ids consumed by the step."""
    return list(_steps(t))


def _steps(t: CspTerm) -> Iterator:
    match t:
        case Div():
            yield TAU, t, frozenset()
        case IntChoice(l, r):
            yield TAU, l, frozenset()
            yield TAU, r, frozenset()
        case ExtSum(branches):
            for b in branches:
                yield b.action, b.cont, frozenset({b.occ})
        case Rec(var, body):
            yield TAU, substitute(body, var, t), frozenset()
        case Conceal(body, name):
            for a, p, rx in _steps(body):
                yield (TAU if a == name else a), Conceal(p, name), rx
        case Rename(body, _):
            for a, p, rx in _steps(body):
                yield (a if a == TAU else t.apply(a)), Rename(p, t.mapping), rx
        case Parallel(l, r, sync):
            ls = list(_steps(l))
            rs = list(_steps(r))
            for a, p, rx in ls:
                if a not in sync:
                    yield a, Parallel(p, r, sync), rx
            for a, q, rx in rs:
                if a not in sync:
                    yield a, Parallel(l, q, sync), rx
            for a, p, rx in ls:
                if a in sync:
                    for b, q, ry in rs:
                        if b == a:
                            yield a, Parallel(p, q, sync), rx | ry


def reductions(t: CspTerm) -> list:
    return [(p, rx) for _, p, rx in _steps(t)]


def barbs(t: CspTerm) -> frozenset:
    return frozenset(a for a, _, _ in _steps(t) if a != TAU)


def has_success(t: CspTerm) -> bool:
    """Unguarded success.  Prefixes, internal choice and recursion guard
    their operands, because their encodings do."""
    match t:
        case Success():
            return True
        case Parallel(l, r, _):
            return has_success(l) or has_success(r)
        case Conceal(body, _) | Rename(body, _):
            return has_success(body)
    return False


def conflicts_csp(r1: frozenset, r2: frozenset) -> bool:
    return bool(r1 & r2)


def sums_of(t: CspTerm) -> list:
    """Occurrence-id sets of every sum node in t, guarded or not."""
    out = []

    def go(t):
        match t:
            case ExtSum(branches):
                out.append(frozenset(b.occ for b in branches))
                for b in branches:
                    go(b.cont)
            case Rec(_, body) | Conceal(body, _) | Rename(body, _):
                go(body)
            case Parallel(l, r, _) | IntChoice(l, r):
                go(l)
                go(r)

    go(t)
    return out


def conflicts_same_sum(t: CspTerm, r1: frozenset, r2: frozenset) -> bool:
    """Steps that resolve a common sum (through different or equal prefixes)."""
    if r1 & r2:
        return True
    return any(s & r1 and s & r2 for s in sums_of(t))


def distributable_components(t: CspTerm) -> list:
    match t:
        case Parallel(l, r, _):
            return distributable_components(l) + distributable_components(r)
        case Conceal(body, _) | Rename(body, _):
            return distributable_components(body)
        case Rec(_, body):
            return [c for c in distributable_components(body) if not isinstance(c, Var)]
    return [t]


def occurrences(t: CspTerm) -> frozenset:
    """Prefix occurrence ids syntactically present in t."""
    out = set()

    def go(t):
        match t:
            case ExtSum(branches):
                for b in branches:
                    out.add(b.occ)
                    go(b.cont)
            case Rec(_, body) | Conceal(body, _) | Rename(body, _):
                go(body)
            case Parallel(l, r, _) | IntChoice(l, r):
                go(l)
                go(r)

    go(t)
    return frozenset(out)
