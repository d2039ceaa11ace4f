"""Asynchronous name-passing target calculus.

Raw terms are nested tuples::

    ('nil',)  ('succ',)  ('out', ch, args)  ('in', ch, params, body)
    ('rep', ch, params, body)  ('match', x, y, body)
    ('par', kids)  ('new', names, body)

Exploration never works on raw terms directly.  A term is brought into a
canonical form: a sorted tuple of restricted names plus a sorted multiset of
top-level threads.  Each thread is stored as ``(template id, names)`` where
the template is the thread with its free names abstracted into positional
placeholders.  Equal canonical forms mean structurally congruent terms (up to
alpha-conversion); the converse holds except for rare symmetric tie cases in
large states, which only cost duplicate states, never wrong answers.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import NamedTuple

from .names import Name, core_of, info

NIL = ("nil",)
SUCCESS = ("succ",)
_TEMP_BASE = 10 ** 9


def Out(ch, args=()):
    return ("out", ch, tuple(args))


def In(ch, params, body):
    return ("in", ch, tuple(params), body)


def Rep(ch, params, body):
    return ("rep", ch, tuple(params), body)


def Match(x, y, body):
    return ("match", x, y, body)


def Par(*kids):
    flat = []
    for k in kids:
        if k[0] == "par":
            flat.extend(k[1])
        elif k != NIL:
            flat.append(k)
    if not flat:
        return NIL
    if len(flat) == 1:
        return flat[0]
    return ("par", tuple(flat))


def New(names, body):
    names = tuple(names)
    if not names:
        return body
    return ("new", names, body)


def prod(kids):
    return Par(*kids)


# --------------------------------------------------------------------------
# free names, renaming


def free_names(P) -> set:
    out = set()

    def go(P, bound):
        tag = P[0]
        if tag == "out":
            for n in (P[1],) + P[2]:
                if n not in bound:
                    out.add(n)
        elif tag in ("in", "rep"):
            if P[1] not in bound:
                out.add(P[1])
            go(P[3], bound | set(P[2]))
        elif tag == "match":
            for n in (P[1], P[2]):
                if n not in bound:
                    out.add(n)
            go(P[3], bound)
        elif tag == "par":
            for k in P[1]:
                go(k, bound)
        elif tag == "new":
            go(P[2], bound | set(P[1]))

    go(P, frozenset())
    return out


def _rename(P, sigma):
    """Rename names by sigma; valid only when binders are disjoint from
    sigma's domain and range (true for canonical threads)."""
    tag = P[0]
    g = sigma.get
    if tag == "out":
        return ("out", g(P[1], P[1]), tuple(g(a, a) for a in P[2]))
    if tag in ("in", "rep"):
        return (tag, g(P[1], P[1]), P[2], _rename(P[3], sigma))
    if tag == "match":
        return ("match", g(P[1], P[1]), g(P[2], P[2]), _rename(P[3], sigma))
    if tag == "par":
        return ("par", tuple(_rename(k, sigma) for k in P[1]))
    if tag == "new":
        return ("new", P[1], _rename(P[2], sigma))
    return P


def substitute(P, sigma: dict):
    """Capture-avoiding simultaneous substitution on raw terms."""
    fresh = itertools.count(1)
    rng = set(sigma.values())

    def pick(n, avoid):
        c = core_of(n)
        while True:
            cand = Name.bound(c, _TEMP_BASE + next(fresh))
            if cand not in avoid:
                return cand

    def go(P, sigma):
        tag = P[0]
        g = sigma.get
        if tag == "out":
            return ("out", g(P[1], P[1]), tuple(g(a, a) for a in P[2]))
        if tag == "match":
            return ("match", g(P[1], P[1]), g(P[2], P[2]), go(P[3], sigma))
        if tag == "par":
            return ("par", tuple(go(k, sigma) for k in P[1]))
        if tag in ("in", "rep", "new"):
            binders = P[2] if tag != "new" else P[1]
            inner = dict(sigma)
            newb = []
            for b in binders:
                inner.pop(b, None)
                if b in rng:
                    nb = pick(b, rng)
                    inner[b] = nb
                    newb.append(nb)
                else:
                    newb.append(b)
            if tag == "new":
                return ("new", tuple(newb), go(P[2], inner))
            return (tag, g(P[1], P[1]), tuple(newb), go(P[3], inner))
        return P

    return go(P, dict(sigma))


def _uniquify(P, counter):
    """Rename every binder to a distinct temporary bound name."""

    def fresh(n):
        counter[0] += 1
        return Name.bound(core_of(n), _TEMP_BASE + counter[0])

    def go(P, env):
        tag = P[0]
        g = env.get
        if tag == "out":
            return ("out", g(P[1], P[1]), tuple(g(a, a) for a in P[2]))
        if tag == "match":
            return ("match", g(P[1], P[1]), g(P[2], P[2]), go(P[3], env))
        if tag == "par":
            return ("par", tuple(go(k, env) for k in P[1]))
        if tag == "new":
            inner = dict(env)
            nb = []
            for b in P[1]:
                inner[b] = fresh(b)
                nb.append(inner[b])
            return ("new", tuple(nb), go(P[2], inner))
        if tag in ("in", "rep"):
            inner = dict(env)
            nb = []
            for b in P[2]:
                inner[b] = fresh(b)
                nb.append(inner[b])
            return (tag, g(P[1], P[1]), tuple(nb), go(P[3], inner))
        return P

    return go(P, {})


# --------------------------------------------------------------------------
# structural normalisation of guarded bodies


def _flat(P, bound, names, kids):
    tag = P[0]
    if tag == "nil":
        return
    if tag == "par":
        for k in P[1]:
            _flat(k, bound, names, kids)
    elif tag == "new":
        names.extend(P[1])
        _flat(P[2], bound, names, kids)
    elif tag == "match":
        x, y = P[1], P[2]
        if x == y:
            _flat(P[3], bound, names, kids)
        elif x in bound or y in bound:
            body = _norm_body(P[3], bound)
            if body != NIL:
                kids.append(("match", x, y, body))
        # distinct constants never become equal: [x=y]P is inert
    elif tag in ("in", "rep"):
        kids.append((tag, P[1], P[2], _norm_body(P[3], bound | frozenset(P[2]))))
    else:
        kids.append(P)


def _norm_body(P, bound):
    names, kids = [], []
    _flat(P, bound, names, kids)
    if names:
        used = set()
        for k in kids:
            used |= free_names(k)
        names = [n for n in names if n in used]
    return _pack(names, kids)


def _pack(names, kids):
    if not kids:
        return NIL
    body = kids[0] if len(kids) == 1 else ("par", tuple(kids))
    return ("new", tuple(names), body) if names else body


def _unpack(B):
    names = ()
    if B[0] == "new":
        names, B = B[1], B[2]
    if B[0] == "nil":
        return names, []
    if B[0] == "par":
        return names, list(B[1])
    return names, [B]


def _anon(P, env):
    """Sort key: canonical names for already numbered binders, cores otherwise."""
    tag = P[0]
    if tag == "out":
        return ("out", _an(P[1], env), tuple(_an(a, env) for a in P[2]))
    if tag in ("in", "rep"):
        return (tag, _an(P[1], env), tuple(core_of(p) for p in P[2]), _anon(P[3], env))
    if tag == "match":
        return ("match", _an(P[1], env), _an(P[2], env), _anon(P[3], env))
    if tag == "par":
        return ("par", tuple(sorted(_anon(k, env) for k in P[1])))
    if tag == "new":
        return ("new", tuple(sorted(core_of(n) for n in P[1])), _anon(P[2], env))
    return P


def _an(n, env):
    c = env.get(n)
    return c if c is not None else core_of(n)


def _occurrence_order(P, wanted, out, seen):
    tag = P[0]
    if tag == "out":
        seq = (P[1],) + P[2]
    elif tag in ("in", "rep"):
        seq = (P[1],)
    elif tag == "match":
        seq = (P[1], P[2])
    else:
        seq = ()
    for n in seq:
        if n in wanted and n not in seen:
            seen.add(n)
            out.append(n)
    if tag in ("in", "rep", "match"):
        _occurrence_order(P[3], wanted, out, seen)
    elif tag == "par":
        for k in P[1]:
            _occurrence_order(k, wanted, out, seen)
    elif tag == "new":
        _occurrence_order(P[2], wanted, out, seen)


def _canon_node(P, env, ctr):
    tag = P[0]
    g = env.get
    if tag == "out":
        return ("out", g(P[1], P[1]), tuple(g(a, a) for a in P[2]))
    if tag in ("in", "rep"):
        inner = dict(env)
        params = []
        for p in P[2]:
            ctr[0] += 1
            nm = Name.bound(core_of(p), ctr[0])
            inner[p] = nm
            params.append(nm)
        return (tag, g(P[1], P[1]), tuple(params), _canon_body(P[3], inner, ctr))
    if tag == "match":
        return ("match", g(P[1], P[1]), g(P[2], P[2]), _canon_body(P[3], env, ctr))
    return P


def _canon_body(B, env, ctr):
    names, kids = _unpack(B)
    if len(kids) > 1:
        kids = sorted(kids, key=lambda k: _anon(k, env))
    inner = env
    newnames = []
    if names:
        order = []
        _occurrence_order(("par", tuple(kids)), set(names), order, set())
        inner = dict(env)
        for n in order:
            ctr[0] += 1
            nm = Name.bound(core_of(n), ctr[0])
            inner[n] = nm
            newnames.append(nm)
    return _pack(newnames, [_canon_node(k, inner, ctr) for k in kids])


def canon_thread(P):
    """Canonical binder numbering for one guarded thread (free names kept)."""
    return _canon_node(P, {}, [0])


# --------------------------------------------------------------------------
# thread templates


class _Meta(NamedTuple):
    kind: str          # out | in | rep | succ
    arity: int
    args: tuple        # out: placeholder index per argument
    boolinst: str      # 'pos' / 'neg' for l(t,f).t<> and l(t,f).f<> shapes
    roles: tuple       # per placeholder: frozenset of {'in', 'out', 'obj'}


_TEMPLATES: list = []
_TEMPLATE_IDS: dict = {}
_META: list = []


def _templatize(P):
    """Abstract free names of a canonical thread to integer placeholders."""
    order = []
    index = {}
    roles = []

    def ph(n, role):
        i = index.get(n)
        if i is None:
            i = len(order)
            index[n] = i
            order.append(n)
            roles.append(set())
        roles[i].add(role)
        return i

    def go(P, bound):
        tag = P[0]
        if tag == "out":
            ch = P[1] if P[1] in bound else ph(P[1], "out")
            args = tuple(a if a in bound else ph(a, "obj") for a in P[2])
            return ("out", ch, args)
        if tag in ("in", "rep"):
            ch = P[1] if P[1] in bound else ph(P[1], "in")
            return (tag, ch, P[2], go(P[3], bound | set(P[2])))
        if tag == "match":
            x = P[1] if P[1] in bound else ph(P[1], "obj")
            y = P[2] if P[2] in bound else ph(P[2], "obj")
            return ("match", x, y, go(P[3], bound))
        if tag == "par":
            return ("par", tuple(go(k, bound) for k in P[1]))
        if tag == "new":
            return ("new", P[1], go(P[2], bound | set(P[1])))
        return P

    tmpl = go(P, frozenset())
    tid = _TEMPLATE_IDS.get(tmpl)
    if tid is None:
        tid = len(_TEMPLATES)
        _TEMPLATES.append(tmpl)
        _TEMPLATE_IDS[tmpl] = tid
        kind = tmpl[0]
        arity = len(tmpl[2]) if kind in ("out", "in", "rep") else 0
        args = tmpl[2] if kind == "out" else ()
        boolinst = ""
        if kind == "in" and arity == 2:
            body = tmpl[3]
            if body[0] == "out" and not body[2]:
                if body[1] == tmpl[2][0]:
                    boolinst = "pos"
                elif body[1] == tmpl[2][1]:
                    boolinst = "neg"
        _META.append(_Meta(kind, arity, args, boolinst,
                           tuple(frozenset(r) for r in roles)))
    return tid, tuple(order)


def _instantiate_tmpl(T, names):
    tag = T[0]
    if tag == "out":
        ch = T[1] if isinstance(T[1], str) else names[T[1]]
        return ("out", ch, tuple(a if isinstance(a, str) else names[a] for a in T[2]))
    if tag in ("in", "rep"):
        ch = T[1] if isinstance(T[1], str) else names[T[1]]
        return (tag, ch, T[2], _instantiate_tmpl(T[3], names))
    if tag == "match":
        x = T[1] if isinstance(T[1], str) else names[T[1]]
        y = T[2] if isinstance(T[2], str) else names[T[2]]
        return ("match", x, y, _instantiate_tmpl(T[3], names))
    if tag == "par":
        return ("par", tuple(_instantiate_tmpl(k, names) for k in T[1]))
    if tag == "new":
        return ("new", T[1], _instantiate_tmpl(T[2], names))
    return T


def thread_term(thread):
    tid, names = thread
    return _instantiate_tmpl(_TEMPLATES[tid], names)


def thread_meta(thread) -> _Meta:
    return _META[thread[0]]


# --------------------------------------------------------------------------
# canonical forms


class CanonicalForm(NamedTuple):
    restricted: tuple
    threads: tuple

    def term(self):
        return New(self.restricted, Par(*[thread_term(t) for t in self.threads]))

    def __str__(self):
        return pretty(self.term())


_NAME_IDS: dict = {}


def _name_id(n):
    i = _NAME_IDS.get(n)
    if i is None:
        i = len(_NAME_IDS)
        _NAME_IDS[n] = i
    return i


def _refine(rnames, threads, colors):
    """Colour refinement of restricted names until stable.

    Colours are structural hashes.  A collision can only make two
    isomorphic states look different, never merge different ones, because
    the canonical form itself is the renamed thread list.
    """
    idx = {n: i for i, n in enumerate(rnames)}
    col = [colors[n] for n in rnames]
    enc = []
    occ = [[] for _ in rnames]
    for tid, names in threads:
        row = []
        k = len(enc)
        hit = False
        for pos, n in enumerate(names):
            i = idx.get(n)
            if i is None:
                row.append(-1 - _name_id(n))
            else:
                row.append(i)
                occ[i].append((k, pos))
                hit = True
        if hit:
            enc.append((tid, row))
    ncolors = len(set(col))
    while True:
        th = [hash((tid, tuple([col[x] if x >= 0 else x for x in row]))) for tid, row in enc]
        col = [hash((col[i], tuple(sorted([th[k] + pos for k, pos in occ[i]]))))
               for i in range(len(rnames))]
        c = len(set(col))
        if c == ncolors:
            return dict(zip(rnames, col))
        ncolors = c


def _finish(rnames, threads, colors, free_cores):
    ordered = sorted(rnames, key=lambda n: colors[n])
    counters = {}
    sigma = {}
    for n in ordered:
        c = core_of(n)
        k = counters.get(c, 0) + 1
        taken = free_cores.get(c)
        if taken:
            while k in taken:
                k += 1
        counters[c] = k
        sigma[n] = Name.variant(c, k)
    new_threads = tuple(sorted(
        (tid, tuple(sigma.get(n, n) for n in names)) for tid, names in threads))
    return CanonicalForm(tuple(sorted(sigma.values())), new_threads), sigma


_EXACT_LIMIT = 6


def _alpha(rnames, threads):
    return _alpha_sigma(rnames, threads)[0]


def _alpha_sigma(rnames, threads):
    """Canonical form plus the renaming of surviving restricted names."""
    used = set()
    for _, names in threads:
        used.update(names)
    rnames = [n for n in rnames if n in used]
    rset = set(rnames)
    free_cores = {}
    for n in used:
        if n not in rset:
            i = info(n)
            if i.instance:
                free_cores.setdefault(i.core, set()).add(i.instance)
    cores = sorted(set(core_of(n) for n in rnames))
    cidx = {c: i for i, c in enumerate(cores)}
    colors = {n: cidx[core_of(n)] for n in rnames}
    if not rnames:
        return _finish(rnames, threads, colors, free_cores)
    colors = _refine(rnames, threads, colors)
    exact = len(rnames) <= _EXACT_LIMIT
    return _search(rnames, threads, colors, free_cores, exact)


def _search(rnames, threads, colors, free_cores, exact):
    classes = {}
    for n in rnames:
        classes.setdefault(colors[n], []).append(n)
    tied = [c for c, ms in classes.items() if len(ms) > 1]
    if not tied:
        return _finish(rnames, threads, colors, free_cores)
    cell = min(tied)
    members = sorted(classes[cell]) if exact else [min(classes[cell])]
    best = None
    for m in members:
        # individualise m: give it a colour just below its class
        trial = {n: hash((c, n == m)) for n, c in colors.items()}
        trial = _refine(rnames, threads, trial)
        cf = _search(rnames, threads, trial, free_cores, exact)
        if best is None or cf[0] < best[0]:
            best = cf
    return best


def _split_top(P, counter):
    """Flatten a raw term at top level into (restricted temps, raw threads)."""
    names, kids = [], []
    _flat(P, frozenset(), names, kids)
    sigma = {}
    temps = []
    for n in names:
        counter[0] += 1
        t = Name.variant(core_of(n), _TEMP_BASE + counter[0])
        sigma[n] = t
        temps.append(t)
    return temps, [_rename(k, sigma) for k in kids]


def canonicalize(T) -> CanonicalForm:
    if isinstance(T, CanonicalForm):
        return T
    counter = [0]
    u = _uniquify(T, counter)
    temps, kids = _split_top(u, counter)
    threads = [_templatize(canon_thread(k)) for k in kids]
    return _alpha(temps, threads)


# --------------------------------------------------------------------------
# reductions


@dataclass
class StepInfo:
    channel: str
    output_occ: int
    input_occ: int
    replicated: bool
    values: tuple
    input_thread: tuple = field(repr=False, default=None)
    output_thread: tuple = field(repr=False, default=None)
    classification: str = ""
    reason: str = ""
    sigma: dict = field(repr=False, default=None, compare=False)

    def to_json(self):
        return {
            "channel": self.channel,
            "output_occ": self.output_occ,
            "input_occ": self.input_occ,
            "replicated": self.replicated,
            "values": list(self.values),
            "class": self.classification or None,
            "reason": self.reason or None,
        }


class ArityError(RuntimeError):
    pass


_REDUCT_CACHE: dict = {}


def _pattern(names):
    first = {}
    pat = []
    for n in names:
        i = first.setdefault(n, len(first))
        pat.append((i, core_of(n)))
    return tuple(pat)


def _fire(in_thread, args):
    """Threads and fresh restricted cores produced by firing an input with
    the given arguments, as index patterns over names_in + args."""
    tid, names = in_thread
    merged = names + args
    key = (tid, _pattern(merged))
    hit = _REDUCT_CACHE.get(key)
    if hit is None:
        term = thread_term(in_thread)
        params = term[2]
        body = _rename(term[3], dict(zip(params, args)))
        counter = [0]
        temps, kids = _split_top(body, counter)
        pos = {}
        for i, n in enumerate(merged):
            pos.setdefault(n, i)
        for j, t in enumerate(temps):
            pos[t] = len(merged) + j
        specs = []
        for k in kids:
            ktid, knames = _templatize(canon_thread(k))
            specs.append((ktid, tuple(pos[n] for n in knames)))
        hit = (tuple(core_of(t) for t in temps), tuple(specs))
        _REDUCT_CACHE[key] = hit
    cores, specs = hit
    return merged, cores, specs


_fresh_temp = itertools.count(1)


def reductions_target(T, gc: bool = False, channels=None, with_sigma: bool = False):
    """All one-step reducts of T with provenance, as (CanonicalForm, StepInfo).

    ``channels`` optionally restricts the steps to channels accepted by the
    predicate.  With ``with_sigma`` each StepInfo records how the restricted
    names of T are renamed in the reduct.
    """
    cf = canonicalize(T)
    threads = cf.threads
    outs = {}
    ins = {}
    for i, th in enumerate(threads):
        m = _META[th[0]]
        if m.kind == "out":
            outs.setdefault(th[1][0], []).append(i)
        elif m.kind in ("in", "rep"):
            ins.setdefault(th[1][0], []).append(i)
    result = []
    seen_pairs = set()
    for ch, olist in outs.items():
        ilist = ins.get(ch)
        if not ilist:
            continue
        if channels is not None and not channels(ch):
            continue
        for oi in olist:
            oth = threads[oi]
            om = _META[oth[0]]
            args = tuple(oth[1][a] for a in om.args)
            for ii in ilist:
                ith = threads[ii]
                im = _META[ith[0]]
                if im.arity != len(args):
                    raise ArityError(f"arity mismatch on {ch}: {len(args)} vs {im.arity}")
                pair = (oth, ith)
                if pair in seen_pairs:
                    continue  # identical copies give identical reducts
                seen_pairs.add(pair)
                merged, cores, specs = _fire(ith, args)
                temps = [Name.variant(c, _TEMP_BASE + next(_fresh_temp)) for c in cores]
                allnames = merged + tuple(temps)
                rest = [t for k, t in enumerate(threads)
                        if k != oi and (k != ii or im.kind == "rep")]
                rest.extend((t, tuple(allnames[p] for p in idx)) for t, idx in specs)
                rnames = list(cf.restricted) + temps
                if gc:
                    rnames, rest = gc_junk(rnames, rest)
                nxt, sigma = _alpha_sigma(rnames, rest)
                info_ = StepInfo(ch, oi, ii, im.kind == "rep", args, ith, oth)
                if with_sigma:
                    info_.sigma = {n: sigma[n] for n in cf.restricted if n in sigma}
                result.append((nxt, info_))
    return result


def gc_junk(rnames, threads):
    """Drop top-level threads that can never interact.

    An input on a restricted name is live only if that name is mentioned by
    some live thread other than as the subject of an input on it; other
    threads are live roots.  Outputs on restricted names that no live thread
    can receive on or pass along are dropped as well.  Both passes repeat
    until nothing changes.
    """
    threads = list(threads)
    rset = set(rnames)
    while True:
        subj = []
        for tid, names in threads:
            k = _META[tid].kind
            subj.append(names[0] if k in ("in", "rep") and names[0] in rset else None)
        mentioned = set()
        live = [x is None for x in subj]
        frontier = [i for i, ok in enumerate(live) if ok]
        waiting = {}
        for i, x in enumerate(subj):
            if x is not None:
                waiting.setdefault(x, []).append(i)
        while frontier:
            i = frontier.pop()
            for n in threads[i][1]:
                if n in rset and n != subj[i] and n not in mentioned:
                    mentioned.add(n)
                    for j in waiting.pop(n, ()):
                        if not live[j]:
                            live[j] = True
                            frontier.append(j)
        keep = [th for th, ok in zip(threads, live) if ok]
        # outputs nobody can ever receive
        recv = set()
        for tid, names in keep:
            m = _META[tid]
            for pos, n in enumerate(names):
                if n in rset and (m.roles[pos] - {"out"}):
                    recv.add(n)
        keep2 = []
        for th in keep:
            m = _META[th[0]]
            if m.kind == "out" and th[1][0] in rset and th[1][0] not in recv:
                continue
            keep2.append(th)
        if len(keep2) == len(threads):
            break
        threads = keep2
    used = set()
    for _, names in threads:
        used.update(names)
    return [n for n in rnames if n in used], threads


def has_success_target(T) -> bool:
    cf = canonicalize(T)
    return any(_META[t[0]].kind == "succ" for t in cf.threads)


def unguarded_outputs(T, filter=None, free_only: bool = False):
    """Top-level outputs as (channel, args, occurrence index)."""
    cf = canonicalize(T)
    rset = set(cf.restricted)
    out = []
    for i, th in enumerate(cf.threads):
        m = _META[th[0]]
        if m.kind != "out":
            continue
        ch = th[1][0]
        if free_only and ch in rset:
            continue
        if filter is not None and not filter(ch):
            continue
        out.append((ch, tuple(th[1][a] for a in m.args), i))
    return out


def conflicts_target(s1: StepInfo, s2: StepInfo) -> bool:
    if s1.input_occ == s2.input_occ and s1.values != s2.values:
        return True
    if s1.output_occ == s2.output_occ and s1.input_thread != s2.input_thread:
        return True
    return False


def distributable_components_target(T) -> list:
    cf = canonicalize(T)
    return [thread_term(t) for t in cf.threads]


# --------------------------------------------------------------------------
# concrete syntax


class TargetSyntaxError(ValueError):
    def __init__(self, msg, pos):
        super().__init__(f"{msg} at position {pos}")
        self.pos = pos


_TNAME = r"[A-Za-z_][A-Za-z0-9_']*(?:#\d+)?(?:%\d+)?(?:\^\d+)?"
_TTOK = re.compile(r"\s*(?:(?P<sym>[|()<>\[\]=.,!])|(?P<id>" + _TNAME + r")|(?P<zero>0))")


def _ttokens(text):
    pos = 0
    out = []
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TTOK.match(text, pos)
        if not m or m.end() == pos:
            raise TargetSyntaxError(f"unexpected character {text[pos]!r}", pos)
        for g in ("sym", "id", "zero"):
            if m.group(g) is not None:
                out.append((m.group(g), m.start(g), g))
                break
        pos = m.end()
    out.append(("<eof>", len(text), "eof"))
    return out


class _TParser:
    def __init__(self, text):
        self.toks = _ttokens(text)
        self.i = 0
        self.arity = {}

    def peek(self, k=0):
        return self.toks[self.i + k][0]

    def take(self, expected=None):
        tok, pos, _ = self.toks[self.i]
        if expected is not None and tok != expected:
            raise TargetSyntaxError(f"expected {expected!r}, found {tok!r}", pos)
        self.i += 1
        return tok

    def name(self):
        tok, pos, kind = self.toks[self.i]
        if kind != "id" or tok in ("new", "success"):
            raise TargetSyntaxError(f"expected a name, found {tok!r}", pos)
        self.i += 1
        return Name(tok)

    def names(self, close):
        out = []
        if self.peek() != close:
            out.append(self.name())
            while self.peek() == ",":
                self.take()
                out.append(self.name())
        self.take(close)
        return out

    def check_arity(self, ch, n, pos):
        old = self.arity.setdefault(ch, n)
        if old != n:
            raise TargetSyntaxError(f"channel {ch} used with arity {n} and {old}", pos)

    def par(self):
        kids = [self.prefix()]
        while self.peek() == "|":
            self.take()
            kids.append(self.prefix())
        return kids[0] if len(kids) == 1 else ("par", tuple(kids))

    def prefix(self):
        tok, pos, kind = self.toks[self.i]
        if tok == "0" and kind == "zero":
            self.take()
            return NIL
        if tok == "success":
            self.take()
            return SUCCESS
        if tok == "(":
            self.take()
            inner = self.par()
            self.take(")")
            return inner
        if tok == "new":
            self.take()
            self.take("(")
            names = self.names(")")
            return ("new", tuple(names), self.prefix())
        if tok == "[":
            self.take()
            x = self.name()
            self.take("=")
            y = self.name()
            self.take("]")
            return ("match", x, y, self.prefix())
        rep = False
        if tok == "!":
            self.take()
            rep = True
        pos = self.toks[self.i][1]
        ch = self.name()
        if self.peek() == "(":
            self.take()
            params = self.names(")")
            if len(set(params)) != len(params):
                raise TargetSyntaxError("repeated parameter", pos)
            self.check_arity(ch, len(params), pos)
            self.take(".")
            body = self.prefix()
            return ("rep" if rep else "in", ch, tuple(params), body)
        if rep:
            raise TargetSyntaxError("replication needs an input", pos)
        self.take("<")
        args = self.names(">")
        self.check_arity(ch, len(args), pos)
        return ("out", ch, tuple(args))


def parse_target(text: str):
    p = _TParser(text)
    t = p.par()
    if p.peek() != "<eof>":
        tok, pos, _ = p.toks[p.i]
        raise TargetSyntaxError(f"trailing input {tok!r}", pos)
    return t


def pretty(P, tight: bool = False) -> str:
    tag = P[0]
    if tag == "nil":
        return "0"
    if tag == "succ":
        return "success"
    if tag == "out":
        return f"{P[1]}<{','.join(P[2])}>"
    if tag in ("in", "rep"):
        bang = "!" if tag == "rep" else ""
        return f"{bang}{P[1]}({','.join(P[2])}).{pretty(P[3], True)}"
    if tag == "match":
        return f"[{P[1]}={P[2]}]{pretty(P[3], True)}"
    if tag == "new":
        return f"new({','.join(P[1])}) {pretty(P[2], True)}"
    if tag == "par":
        s = " | ".join(pretty(k, True) for k in P[1])
        return f"({s})" if tight else s
    raise TypeError(P)


def size(P) -> int:
    tag = P[0]
    if tag in ("in", "rep", "match"):
        return 1 + size(P[3])
    if tag == "par":
        return sum(size(k) for k in P[1])
    if tag == "new":
        return size(P[2])
    return 1
