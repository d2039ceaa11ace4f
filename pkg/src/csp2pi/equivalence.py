"""Behavioural equivalences over explored graphs and the composite checks
built on them (operational correspondence, sensitivity, divergence,
distributability, lock invariants)."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Any

from . import csp, encoder, lts as L
from .names import SOURCE_RE
from .target import conflicts_target


# --------------------------------------------------------------------------
# verdicts


@dataclass
class CheckVerdict:
    check: str
    status: str                      # holds | fails | inconclusive
    counterexample: Any = None
    witness: Any = None
    budgets: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.status == "holds"

    @property
    def exit_code(self) -> int:
        return {"holds": 0, "fails": 1}.get(self.status, 2)

    def witness_size(self) -> int:
        w = self.witness
        if w is None:
            return 0
        if isinstance(w, (list, tuple, set, frozenset, dict)):
            return len(w)
        return 1

    def to_json(self) -> dict:
        return {"check": self.check, "status": self.status,
                "witness-size": self.witness_size(),
                "counterexample": _jsonable(self.counterexample),
                "budgets": self.budgets, **({"details": _jsonable(self.details)} if self.details else {})}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (set, frozenset)):
        return sorted(_jsonable(v) for v in x)
    if x is None or isinstance(x, (bool, int, float, str)):
        return x
    return str(x)


# --------------------------------------------------------------------------
# joint graphs


class AlphabetError(ValueError):
    pass


class JointGraph:
    """Disjoint union of explored graphs; node ids are offsets into parts."""

    def __init__(self, *parts: L.Lts, kind: str | None = None):
        self.parts = list(parts)
        self.kind = kind
        self.offset = []
        self.succ: list = []
        self.obs: list = []
        self.truncated: set = set()
        off = 0
        for g in parts:
            if len(g.obs) != len(g.states):
                L.observe(g, kind)
            self.offset.append(off)
            for s in range(len(g.states)):
                self.succ.append([off + w for w in g.successors(s)])
                self.obs.append(g.obs[s])
            self.truncated.update(off + s for s in g.truncated)
            off += len(g.states)
        for _, barbs in self.obs:
            for b in barbs:
                if not SOURCE_RE.match(b):
                    raise AlphabetError(f"barb {b!r} is not a source name")
        self._ann = None
        self._part = None

    def __len__(self):
        return len(self.succ)

    def node(self, part: int, state: int) -> int:
        return self.offset[part] + state

    def locate(self, v: int) -> tuple[int, int]:
        for i in range(len(self.parts) - 1, -1, -1):
            if v >= self.offset[i]:
                return i, v - self.offset[i]
        raise IndexError(v)

    def pretty(self, v: int) -> str:
        i, s = self.locate(v)
        return str(self.parts[i].states[s])

    def annotations(self):
        if self._ann is None:
            self._ann = _reach(len(self.succ), self.succ, self.obs, self.truncated)
        return self._ann

    def depends_on_truncation(self, v: int) -> bool:
        return self.annotations()[v][2]

    def partition(self):
        if self._part is None:
            self._part = bisim_partition(self)
        return self._part

    def describe(self, v: int) -> dict:
        sr, br, part = self.annotations()[v]
        return {"id": v, "term": self.pretty(v), "success_reachable": sr,
                "barbs_reachable": sorted(br)}


def _reach(n, succ, obs, truncated):
    comps = L.sccs(n, lambda v: succ[v])
    comp_of = [0] * n
    for i, c in enumerate(comps):
        for v in c:
            comp_of[v] = i
    res = []
    for i, c in enumerate(comps):
        s_ok = False
        b = set()
        t = False
        for v in c:
            s_ok = s_ok or obs[v][0]
            b |= obs[v][1]
            t = t or v in truncated
            for w in succ[v]:
                j = comp_of[w]
                if j != i:
                    js, jb, jt = res[j]
                    s_ok = s_ok or js
                    b |= jb
                    t = t or jt
        res.append((s_ok, frozenset(b), t))
    return [res[comp_of[v]] for v in range(n)]


def _relabel(keys):
    ids = {}
    return [ids.setdefault(k, len(ids)) for k in keys], len(ids)


@dataclass
class Partition:
    block: list          # node -> block id
    count: int
    weak: list           # node -> bitset of blocks weakly reachable
    rounds: int


def bisim_partition(j: JointGraph) -> Partition:
    """Coarsest partition refining (success-reachable, barbs-reachable) in
    which related nodes weakly reach the same set of blocks."""
    n = len(j.succ)
    ann = j.annotations()
    block, count = _relabel([(a[0], a[1]) for a in ann])
    comps = L.sccs(n, lambda v: j.succ[v])
    comp_of = [0] * n
    for i, c in enumerate(comps):
        for v in c:
            comp_of[v] = i
    comp_succ = []
    for i, c in enumerate(comps):
        comp_succ.append({comp_of[w] for v in c for w in j.succ[v]} - {i})
    rounds = 0
    while True:
        rounds += 1
        wc = [0] * len(comps)
        for i, c in enumerate(comps):
            bits = 0
            for v in c:
                bits |= 1 << block[v]
            for k in comp_succ[i]:
                bits |= wc[k]
            wc[i] = bits
        weak = [wc[comp_of[v]] for v in range(n)]
        new, new_count = _relabel([(block[v], weak[v]) for v in range(n)])
        if new_count == count:
            return Partition(block, count, weak, rounds)
        block, count = new, new_count


def _shortest_path(succ, start, goal):
    prev = {start: None}
    q = deque([start])
    while q:
        v = q.popleft()
        if goal(v):
            path = []
            while v is not None:
                path.append(v)
                v = prev[v]
            return path[::-1]
        for w in succ[v]:
            if w not in prev:
                prev[w] = v
                q.append(w)
    return None


def _reachable(succ, start):
    seen = {start}
    todo = [start]
    while todo:
        v = todo.pop()
        for w in succ[v]:
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return seen


def _budgets(j: JointGraph) -> dict:
    return {"parts": [{"semantics": g.semantics, "states": len(g.states),
                       "edges": len(g.edges), "max_states": g.max_states,
                       "max_depth": g.max_depth, "complete": g.complete}
                      for g in j.parts]}


def unmatched_nodes(j: JointGraph, start: int, reference) -> list:
    """Nodes reachable from ``start`` whose block contains no node of the
    ``reference`` set (typically all source states)."""
    part = j.partition()
    ref_blocks = {part.block[v] for v in reference}
    return sorted(v for v in _reachable(j.succ, start) if part.block[v] not in ref_blocks)


def weak_bisim(j: JointGraph, p: int, q: int, reference=None) -> CheckVerdict:
    """Weak reduction bisimilarity of nodes p and q of the joint graph."""
    budgets = _budgets(j)
    if j.depends_on_truncation(p) or j.depends_on_truncation(q):
        return CheckVerdict("bisim", "inconclusive",
                            {"reason": "a truncated state is reachable"}, budgets=budgets)
    part = j.partition()
    if part.block[p] == part.block[q]:
        members = {part.block[v] for v in _reachable(j.succ, p) | _reachable(j.succ, q)}
        return CheckVerdict("bisim", "holds", witness=sorted(members), budgets=budgets,
                            details={"blocks": part.count, "rounds": part.rounds})
    return CheckVerdict("bisim", "fails", _bisim_counterexample(j, p, q, reference),
                        budgets=budgets, details={"blocks": part.count})


def _bisim_counterexample(j, p, q, reference):
    part = j.partition()
    ann = j.annotations()
    cx = {"p": j.describe(p), "q": j.describe(q)}
    if ann[p][:2] != ann[q][:2]:
        cx["clause"] = "success/barb reachability differs"
        return cx
    for a, b in ((p, q), (q, p)):
        for a2 in j.succ[a]:
            if not (part.weak[b] >> part.block[a2]) & 1:
                cx["clause"] = "unmatched step"
                cx["step"] = {"from": a, "to": j.describe(a2), "unmatched_by": b}
                break
        if "clause" in cx:
            break
    if "clause" not in cx:
        # the first refinement difference lies deeper: report a reachable
        # pair of derivatives that the partition separates
        cx["clause"] = "derivatives separated by refinement"
    if reference is not None:
        side = q if p in reference else p
        um = unmatched_nodes(j, side, reference)
        cx["unmatched_states"] = [
            {**j.describe(v), "path": _shortest_path(j.succ, side, lambda x, v=v: x == v)}
            for v in um[:5]]
        cx["unmatched_count"] = len(um)
    return cx


# --------------------------------------------------------------------------
# coupled simulation


def _bits(it) -> int:
    m = 0
    for i in it:
        m |= 1 << i
    return m


def _members(m: int):
    i = 0
    while m:
        if m & 1:
            yield i
        m >>= 1
        i += 1


@dataclass
class CoupledRelation:
    """Greatest coupled simulation restricted to the pairs that matter for
    (p, q): X = nodes reachable from p, Y = nodes reachable from q.
    ``fwd[y]`` is a bitset over X of the x with (x, y) in the relation and
    ``bwd[y]`` one of the x with (y, x) in it."""
    X: list
    Y: list
    fwd: list
    bwd: list
    rounds: int

    def __post_init__(self):
        self._xi = {v: i for i, v in enumerate(self.X)}
        self._yi = {v: i for i, v in enumerate(self.Y)}

    def __contains__(self, pair) -> bool:
        a, b = pair
        if a in self._xi and b in self._yi and (self.fwd[self._yi[b]] >> self._xi[a]) & 1:
            return True
        if a in self._yi and b in self._xi and (self.bwd[self._yi[a]] >> self._xi[b]) & 1:
            return True
        return False

    def size(self) -> int:
        return sum(bin(m).count("1") for m in self.fwd) + sum(bin(m).count("1") for m in self.bwd)


def coupled_relation(j: JointGraph, p: int, q: int, mode: str = "directional") -> CoupledRelation:
    """Pair-removal fixpoint on (X x Y) and (Y x X).

    Both pair sets only depend on each other, so the result is exactly the
    greatest coupled simulation restricted to them.  ``directional``
    requires the reachable observations of the left element to be included
    in those of the right one; ``literal`` requires equality.  The left side
    is kept as small bitsets, which suits a small source graph against a
    large target graph.
    """
    if mode not in ("directional", "literal"):
        raise ValueError(f"unknown mode {mode!r}")
    ann = j.annotations()

    def compatible(a, b):
        (sa, ba), (sb, bb) = ann[a][:2], ann[b][:2]
        if mode == "literal":
            return sa == sb and ba == bb
        return (not sa or sb) and ba <= bb

    X = sorted(_reachable(j.succ, p))
    Y = sorted(_reachable(j.succ, q))
    xi = {v: i for i, v in enumerate(X)}
    yi = {v: i for i, v in enumerate(Y)}
    nx, ny = len(X), len(Y)
    xsucc = [_bits(xi[w] for w in j.succ[v]) for v in X]
    xreach = [_bits(xi[w] for w in _reachable(j.succ, v)) for v in X]
    # pre[x] = nodes of X that can reach x
    pre = [0] * nx
    for a in range(nx):
        for b in _members(xreach[a]):
            pre[b] |= 1 << a
    ysucc = [[yi[w] for w in j.succ[v]] for v in Y]
    comps = L.sccs(ny, lambda i: ysucc[i])
    comp_succ = []
    comp_of = [0] * ny
    for c, members in enumerate(comps):
        for y in members:
            comp_of[y] = c
    for c, members in enumerate(comps):
        comp_succ.append({comp_of[z] for y in members for z in ysucc[y]} - {c})

    fwd = [_bits(x for x in range(nx) if compatible(X[x], Y[y])) for y in range(ny)]
    bwd = [_bits(x for x in range(nx) if compatible(Y[y], X[x])) for y in range(ny)]

    def closure(rel):
        """Per y: OR of rel over every node weakly reachable from y."""
        out = [0] * len(comps)
        for c, members in enumerate(comps):
            m = 0
            for y in members:
                m |= rel[y]
            for d in comp_succ[c]:
                m |= out[d]
            out[c] = m
        return [out[comp_of[y]] for y in range(ny)]

    def can_reach(rel_y: int) -> int:
        m = 0
        for x in _members(rel_y):
            m |= pre[x]
        return m

    rounds = 0
    changed = True
    while changed:
        rounds += 1
        changed = False
        uf, ub = closure(fwd), closure(bwd)
        for y in range(ny):
            ok = uf[y] & ub[y]
            keep = 0
            for x in _members(fwd[y]):
                if not xsucc[x] & ~ok:
                    keep |= 1 << x
            if keep != fwd[y]:
                fwd[y] = keep
                changed = True
        okf = [can_reach(m) for m in fwd]
        okb = [can_reach(m) for m in bwd]
        for y in range(ny):
            allowed = bwd[y]
            for z in ysucc[y]:
                allowed &= okf[z] & okb[z]
            if allowed != bwd[y]:
                bwd[y] = allowed
                changed = True
    return CoupledRelation(X, Y, fwd, bwd, rounds)


def coupled_sim(j: JointGraph, p: int, q: int, mode: str = "directional") -> CheckVerdict:
    budgets = _budgets(j)
    if j.depends_on_truncation(p) or j.depends_on_truncation(q):
        return CheckVerdict("coupled", "inconclusive",
                            {"reason": "a truncated state is reachable"}, budgets=budgets)
    rel = coupled_relation(j, p, q, mode)
    pq, qp = (p, q) in rel, (q, p) in rel
    size = rel.size()
    details = {"mode": mode, "relation_pairs": size, "rounds": rel.rounds}
    if pq and qp:
        return CheckVerdict("coupled", "holds", witness=list(range(size)), budgets=budgets,
                            details=details)
    return CheckVerdict("coupled", "fails",
                        {"p": j.describe(p), "q": j.describe(q),
                         "p_simulated_by_q": pq, "q_simulated_by_p": qp},
                        budgets=budgets, details=details)


# --------------------------------------------------------------------------
# graphs for a source term and its encodings


@dataclass
class Setup:
    term: Any
    kind: str
    source: L.Lts
    target: L.Lts
    roots: dict          # source state id -> target state id of its encoding
    joint: JointGraph
    classes: list

    def src(self, s: int) -> int:
        return self.joint.node(0, s)

    def tgt(self, t: int) -> int:
        return self.joint.node(1, t)

    @property
    def complete(self) -> bool:
        return self.source.complete and self.target.complete

    def source_nodes(self):
        return [self.src(s) for s in range(len(self.source.states))]


def build(S, kind: str, max_states=None, max_depth=None, gc=False, all_roots=True,
          source_states=None, probe_budget: int = encoder.DEFAULT_PROBE_BUDGET) -> Setup:
    """Explore S, then the encodings of S (and of every reachable source
    state when ``all_roots``) in one shared target graph."""
    if isinstance(S, str):
        S = csp.parse_csp(S)
    src = L.explore(S, "csp", max_states=source_states)
    tgt = L.new_lts("target", max_states, max_depth, gc)
    roots = {}
    ids = range(len(src.states)) if all_roots else [src.initial]
    for s in ids:
        term, _ = encoder.encode(src.states[s], kind)
        roots[s] = L.add_root(tgt, term)
    L.observe(src)
    L.observe(tgt, kind, probe_budget)
    classes = L.classify_edges(tgt, kind, probe_budget) if kind != "inner" else []
    joint = JointGraph(src, tgt, kind=kind)
    return Setup(S, kind, src, tgt, roots, joint, classes)


def check_bisim(S, kind: str = "central", **kw) -> CheckVerdict:
    st = kw.pop("setup", None) or build(S, kind, all_roots=False, **kw)
    v = weak_bisim(st.joint, st.src(st.source.initial), st.tgt(st.roots[st.source.initial]),
                   reference=set(st.source_nodes()))
    v.check = "bisim"
    return v


def check_coupled(S, kind: str = "decentral", mode: str = "directional", **kw) -> CheckVerdict:
    st = kw.pop("setup", None) or build(S, kind, all_roots=False, **kw)
    return coupled_sim(st.joint, st.src(st.source.initial), st.tgt(st.roots[st.source.initial]),
                       mode)


def _inconclusive(name, st, why="exploration truncated"):
    return CheckVerdict(name, "inconclusive", {"reason": why}, budgets=_budgets(st.joint))


def _tsucc(st: Setup):
    return [st.target.successors(x) for x in range(len(st.target.states))]


def _aux_sim_search(st: Setup, start: int, goal_block: int):
    """Shortest path aux* sim aux* from target state ``start`` into a state
    of ``goal_block``; returns (path, edge ids) or None.  Indeterminate
    edges are never used."""
    part = st.joint.partition()
    tg = st.target
    prev = {(start, 0): None}
    q = deque([(start, 0)])
    while q:
        v, k = q.popleft()
        if k == 1 and part.block[st.tgt(v)] == goal_block:
            edges = []
            node = (v, k)
            while prev[node] is not None:
                node, e = prev[node]
                edges.append(e)
            return edges[::-1]
        for e in tg.succ[v] or []:
            c = st.classes[e].cls
            if c == "simulation":
                nk = k + 1
            elif c == "auxiliary":
                nk = k
            else:
                continue
            if nk > 1:
                continue
            w = tg.edges[e][2]
            if (w, nk) not in prev:
                prev[(w, nk)] = ((v, k), e)
                q.append((w, nk))
    return None


def check_opcorr_strong(S, kind: str = "central", setup: Setup | None = None, **kw) -> CheckVerdict:
    """Completeness with exactly one simulation step per source step, and
    strong soundness (every reachable target state is equivalent to the
    encoding of a reachable source state)."""
    st = setup or build(S, kind, **kw)
    if not st.complete:
        return _inconclusive("opcorr-strong", st)
    part = st.joint.partition()
    enc_block = {s: part.block[st.tgt(t)] for s, t in st.roots.items()}
    witness = []
    for e, (s, lab, s2) in enumerate(st.source.edges):
        path = _aux_sim_search(st, st.roots[s], enc_block[s2])
        if path is None:
            indeterminate = any(c.cls == "indeterminate" for c in st.classes)
            return CheckVerdict(
                "opcorr-strong", "inconclusive" if indeterminate else "fails",
                {"clause": "completeness", "source_step": [s, lab[0], s2],
                 "from": str(st.source.states[s]), "to": str(st.source.states[s2])},
                budgets=_budgets(st.joint))
        sims = [x for x in path if st.classes[x].cls == "simulation"]
        witness.append({"source_step": [s, lab[0], s2], "target_path": path,
                        "simulation_edges": sims})
    ok_blocks = {enc_block[s] for s in L.weak_reach(st.source, st.source.initial)}
    for t in L.weak_reach(st.target, st.roots[st.source.initial]):
        if part.block[st.tgt(t)] not in ok_blocks:
            return CheckVerdict(
                "opcorr-strong", "fails",
                {"clause": "soundness", "state": st.joint.describe(st.tgt(t)),
                 "path": _shortest_path(_tsucc(st), st.roots[st.source.initial],
                                        lambda x: x == t)},
                budgets=_budgets(st.joint))
    return CheckVerdict("opcorr-strong", "holds", witness=witness, budgets=_budgets(st.joint))


def check_opcorr_weak(S, kind: str = "decentral", setup: Setup | None = None,
                      strong_soundness: bool = False, **kw) -> CheckVerdict:
    """Completeness via arbitrary target runs and weak soundness (every
    reachable target state can still reach an encoded source state)."""
    name = "opcorr-weak" + ("/strong-soundness" if strong_soundness else "")
    st = setup or build(S, kind, **kw)
    if not st.complete:
        return _inconclusive(name, st)
    part = st.joint.partition()
    enc_block = {s: part.block[st.tgt(t)] for s, t in st.roots.items()}
    tsucc = _tsucc(st)
    witness = []
    for s, lab, s2 in st.source.edges:
        goal = enc_block[s2]
        path = _shortest_path(tsucc, st.roots[s], lambda x: part.block[st.tgt(x)] == goal)
        if path is None:
            return CheckVerdict(name, "fails",
                                {"clause": "completeness", "source_step": [s, lab[0], s2]},
                                budgets=_budgets(st.joint))
        witness.append({"source_step": [s, lab[0], s2], "target_path": path})
    reach_src = L.weak_reach(st.source, st.source.initial)
    ok_bits = 0
    for s in reach_src:
        ok_bits |= 1 << enc_block[s]
    for t in L.weak_reach(st.target, st.roots[st.source.initial]):
        v = st.tgt(t)
        fine = ((ok_bits >> part.block[v]) & 1) if strong_soundness else (part.weak[v] & ok_bits)
        if not fine:
            return CheckVerdict(
                name, "fails",
                {"clause": "soundness", "state": st.joint.describe(v),
                 "path": _shortest_path(tsucc, st.roots[st.source.initial], lambda x: x == t)},
                budgets=_budgets(st.joint))
    return CheckVerdict(name, "holds", witness=witness, budgets=_budgets(st.joint))


def check_sensitivity(S, kind: str = "central", setup: Setup | None = None, **kw) -> CheckVerdict:
    st = setup or build(S, kind, all_roots=False, **kw)
    ann = st.joint.annotations()
    p, q = st.src(st.source.initial), st.tgt(st.roots[st.source.initial])
    if ann[p][2] or ann[q][2]:
        return _inconclusive("sensitivity", st)
    src = {"success": ann[p][0], "barbs": sorted(ann[p][1])}
    tgt = {"success": ann[q][0], "barbs": sorted(ann[q][1])}
    status = "holds" if src == tgt else "fails"
    return CheckVerdict("sensitivity", status, None if status == "holds" else
                        {"source": src, "target": tgt},
                        witness=[src, tgt], budgets=_budgets(st.joint))


def check_divergence(S, kind: str = "central", setup: Setup | None = None, **kw) -> CheckVerdict:
    """Source graph has a cycle iff target graph has one, and no cycle of
    the target graph is made of auxiliary steps only."""
    st = setup or build(S, kind, all_roots=False, **kw)
    sd = L.divergence_check(st.source)
    td = L.divergence_check(st.target)
    aux = L.auxiliary_termination_check(st.target, st.classes) if st.classes else {"status": "ok"}
    info = {"source": sd, "target": td, "auxiliary": aux}
    if not st.complete:
        if sd["divergent"] and td["divergent"] and aux["status"] == "ok":
            pass
        else:
            return CheckVerdict("divergence", "inconclusive", info, budgets=_budgets(st.joint))
    if sd["divergent"] != td["divergent"] or aux["status"] != "ok":
        return CheckVerdict("divergence", "fails", info, budgets=_budgets(st.joint))
    return CheckVerdict("divergence", "holds", witness=info, budgets=_budgets(st.joint))


def check_lock_invariants(S, kind: str = "decentral", setup: Setup | None = None,
                          **kw) -> CheckVerdict:
    """Per-state lock and request clauses, plus: a lock that was negative
    on some run never becomes positive later on that run."""
    st = setup or build(S, kind, all_roots=False, **kw)
    return lock_invariants(st.target, name="locks", budgets=_budgets(st.joint))


def lock_invariants(g: L.Lts, name="locks", budgets=None) -> CheckVerdict:
    for s, state in enumerate(g.states):
        bad = encoder.lock_state_violations(state)
        if bad:
            return CheckVerdict(name, "fails", {"state": s, "term": str(state), "violations": bad},
                                budgets=budgets or {})
    neg_here = [encoder.negative_locks(x) for x in g.states]
    pos_here = [encoder.positive_locks(x) for x in g.states]
    carried = [set() for _ in g.states]
    work = deque(range(len(g.states)))
    queued = set(work)
    while work:
        s = work.popleft()
        queued.discard(s)
        neg = carried[s] | neg_here[s]
        for e in g.succ[s] or []:
            _, info, d = g.edges[e]
            mapped = {info.sigma[n] for n in neg if info.sigma and n in info.sigma}
            if mapped & pos_here[d]:
                return CheckVerdict(name, "fails",
                                    {"clause": "negative lock turned positive", "edge": e,
                                     "locks": sorted(mapped & pos_here[d])},
                                    budgets=budgets or {})
            if not mapped <= carried[d]:
                carried[d] |= mapped
                if d not in queued:
                    queued.add(d)
                    work.append(d)
    status = "holds" if g.complete else "inconclusive"
    return CheckVerdict(name, status, None, witness=list(range(len(g.states))),
                        budgets=budgets or {})


# --------------------------------------------------------------------------
# distributability


def source_diamonds(X) -> list:
    """Pairs of non-conflicting steps of X that can be taken in either order
    and reach the same term: [(step1, step2, X1, X2, X12)]."""
    steps = csp.labelled_steps(X)
    out = []
    for i, (a1, x1, r1) in enumerate(steps):
        for a2, x2, r2 in steps[i + 1:]:
            if csp.conflicts_csp(r1, r2):
                continue
            after1 = {y for b, y, ry in csp.labelled_steps(x1) if b == a2 and ry == r2}
            after2 = {y for b, y, ry in csp.labelled_steps(x2) if b == a1 and ry == r1}
            common = after1 & after2
            if common:
                out.append(((a1, r1), (a2, r2), x1, x2, min(common, key=str)))
    return out


def _can_reach(weak: int, *blocks) -> bool:
    return any((weak >> b) & 1 for b in blocks)


def check_distributability(S, kind: str = "decentral", max_states=None, max_depth=None,
                           gc=False, probe_budget: int = encoder.DEFAULT_PROBE_BUDGET) -> CheckVerdict:
    """For every pair of distributable steps of a reachable source state,
    look for a target state reachable from that state's encoding with two
    enabled simulation steps, one committing to each source step, that do
    not conflict and commute into the same state."""
    if isinstance(S, str):
        S = csp.parse_csp(S)
    src = L.explore(S, "csp")
    jobs = []
    extra = []
    for s in L.weak_reach(src, src.initial):
        X = src.states[s]
        for d in source_diamonds(X):
            jobs.append((s, d))
            extra.extend(d[2:])
    tgt = L.new_lts("target", max_states, max_depth, gc)
    roots = {}
    for s in range(len(src.states)):
        roots[src.states[s]] = L.add_root(tgt, encoder.encode(src.states[s], kind)[0])
    for X in extra:
        if X not in roots:
            roots[X] = L.add_root(tgt, encoder.encode(X, kind)[0])
    L.observe(src)
    L.observe(tgt, kind, probe_budget)
    classes = L.classify_edges(tgt, kind, probe_budget)
    joint = JointGraph(src, tgt, kind=kind)
    st = Setup(S, kind, src, tgt, {}, joint, classes)
    if not st.complete:
        return _inconclusive("distributability", st)
    part = joint.partition()

    def blk(X):
        return part.block[st.tgt(roots[X])]

    witnesses = []
    for s, (st1, st2, x1, x2, x12) in jobs:
        X = src.states[s]
        b1, b2, b12 = blk(x1), blk(x2), blk(x12)
        found = _diamond(st, roots[X], b1, b2, b12)
        if found is None:
            return CheckVerdict(
                "distributability", "fails",
                {"source_state": str(X), "steps": [st1[0], st2[0]],
                 "reason": "no state with commuting non-conflicting simulation steps"},
                budgets=_budgets(joint))
        witnesses.append({"source_state": str(X), "steps": [st1[0], st2[0]], **found})
    return CheckVerdict("distributability", "holds", witness=witnesses, budgets=_budgets(joint),
                        details={"pairs": len(jobs)})


def _diamond(st: Setup, root: int, b1: int, b2: int, b12: int):
    """A reachable state with two enabled simulation steps on different
    channels that do not conflict and close a diamond of simulation steps.
    Reductions are identified up to canonical renaming only, so symmetric
    continuations may map both branches to one state; each branch must
    still be able to complete its own source step."""
    tg = st.target
    part = st.joint.partition()
    cls = st.classes

    def weak(t):
        return part.weak[st.tgt(t)]

    for t in sorted(L.weak_reach(tg, root)):
        sims = [e for e in tg.succ[t] or [] if cls[e].cls == "simulation"]
        if len(sims) < 2:
            continue
        c1 = [e for e in sims if _can_reach(weak(tg.edges[e][2]), b1, b12)]
        c2 = [e for e in sims if _can_reach(weak(tg.edges[e][2]), b2, b12)]
        for e1 in c1:
            for e2 in c2:
                s1, s2 = tg.edges[e1][1], tg.edges[e2][1]
                if e1 == e2 or s1.channel == s2.channel or conflicts_target(s1, s2):
                    continue
                t1, t2 = tg.edges[e1][2], tg.edges[e2][2]
                joins1 = {tg.edges[x][2]: x for x in tg.succ[t1] or []
                          if cls[x].cls == "simulation"}
                for y in tg.succ[t2] or []:
                    t12 = tg.edges[y][2]
                    if cls[y].cls == "simulation" and t12 in joins1 and \
                            _can_reach(weak(t12), b12):
                        return {"state": t, "edges": [e1, e2], "join": t12,
                                "closing_edges": [joins1[t12], y]}
    return None


def futures(st: Setup, node: int, candidates) -> set:
    """The subset of source states (ids) whose encodings' blocks are weakly
    reachable from the joint-graph node."""
    part = st.joint.partition()
    w = part.weak[node]
    return {s for s in candidates if (w >> part.block[st.tgt(st.roots[s])]) & 1}


def partial_commitments(st: Setup, source_state: int | None = None) -> list:
    """Target states matching no source state, each with the derivatives of
    ``source_state`` (default: initial) that remain reachable from it.  A
    state that keeps some but not all of them is a partial commitment."""
    s0 = st.source.initial if source_state is None else source_state
    derivs = sorted({st.source.edges[e][2] for e in st.source.succ[s0]})
    start = st.tgt(st.roots[s0])
    out = []
    for v in unmatched_nodes(st.joint, start, set(st.source_nodes())):
        out.append((v, futures(st, v, derivs)))
    return out
