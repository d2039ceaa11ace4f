"""Bounded exploration of reduction graphs for both calculi."""

from __future__ import annotations

import json
import os
from collections import deque
from dataclasses import dataclass, field

from . import csp, encoder
from .names import core_of
from .target import canonicalize, has_success_target, reductions_target

DEFAULT_TARGET_STATES = 50_000
DEFAULT_TARGET_DEPTH = 200
DEFAULT_SOURCE_STATES = 5_000
DEFAULT_SOURCE_DEPTH = 10_000


def budget_scale() -> float:
    try:
        return float(os.environ.get("CSP2PI_BUDGET_SCALE", "1"))
    except ValueError:
        return 1.0


def default_budget(semantics: str) -> tuple[int, int]:
    k = budget_scale()
    if semantics == "csp":
        return int(DEFAULT_SOURCE_STATES * k), int(DEFAULT_SOURCE_DEPTH * k)
    return int(DEFAULT_TARGET_STATES * k), int(DEFAULT_TARGET_DEPTH * k)


@dataclass
class Lts:
    semantics: str                      # csp | target
    states: list = field(default_factory=list)
    index: dict = field(default_factory=dict)
    edges: list = field(default_factory=list)      # (src, label, dst)
    succ: list = field(default_factory=list)       # per state: edge indices
    depth: list = field(default_factory=list)
    roots: list = field(default_factory=list)
    truncated: set = field(default_factory=set)
    max_states: int = 0
    max_depth: int = 0
    gc: bool = False
    edge_class: list = field(default_factory=list)  # StepClass per edge (target)
    obs: list = field(default_factory=list)        # (success, barbs) per state

    @property
    def initial(self) -> int:
        return self.roots[0]

    @property
    def complete(self) -> bool:
        return not self.truncated

    def __len__(self):
        return len(self.states)

    def successors(self, s: int):
        return [self.edges[e][2] for e in self.succ[s] or ()]

    def label(self, e: int) -> str:
        lab = self.edges[e][1]
        if self.semantics == "csp":
            return lab[0]
        return lab.channel

    def pretty(self, s: int) -> str:
        st = self.states[s]
        return str(st)


_LOCK_CORES = frozenset({"l", "l_l", "l_r", "l'"})


def _steps(semantics, state, gc):
    if semantics == "csp":
        return [((a, rx), p) for a, p, rx in csp.labelled_steps(state)]
    out = []
    for nxt, info in reductions_target(state, gc=gc, with_sigma=True):
        # only lock renamings are needed later (path clause of the lock check)
        info.sigma = {k: v for k, v in info.sigma.items() if core_of(k) in _LOCK_CORES}
        out.append((info, nxt))
    return out


def new_lts(semantics: str, max_states=None, max_depth=None, gc=False) -> Lts:
    ds, dd = default_budget(semantics)
    return Lts(semantics, max_states=max_states or ds, max_depth=max_depth or dd, gc=gc)


def add_root(lts: Lts, initial) -> int:
    """Add a root and explore everything reachable from it within budget."""
    if lts.semantics == "target":
        initial = canonicalize(initial)
    sid = _intern(lts, initial, 0)
    lts.roots.append(sid)
    _bfs(lts, [sid])
    return sid


def _intern(lts, state, depth):
    sid = lts.index.get(state)
    if sid is None:
        sid = len(lts.states)
        lts.index[state] = sid
        lts.states.append(state)
        lts.succ.append(None)      # None marks "not expanded"
        lts.depth.append(depth)
    return sid


def _bfs(lts, start):
    queue = deque(s for s in start if lts.succ[s] is None)
    while queue:
        s = queue.popleft()
        if lts.succ[s] is not None:
            continue
        if lts.depth[s] >= lts.max_depth:
            lts.truncated.add(s)
            continue
        steps = _steps(lts.semantics, lts.states[s], lts.gc)
        fresh = [nxt for _, nxt in steps if nxt not in lts.index]
        if len(lts.states) + len(set(fresh)) > lts.max_states:
            lts.truncated.add(s)
            continue
        lts.truncated.discard(s)
        out = []
        for label, nxt in steps:
            d = _intern(lts, nxt, lts.depth[s] + 1)
            if lts.succ[d] is None and d not in lts.truncated:
                queue.append(d)
            out.append(len(lts.edges))
            lts.edges.append((s, label, d))
        lts.succ[s] = out
    for s in range(len(lts.states)):
        if lts.succ[s] is None:
            lts.truncated.add(s)


def explore(initial, semantics: str, max_states=None, max_depth=None, gc=False) -> Lts:
    """Breadth-first exploration of the reduction graph of ``initial``.

    States whose expansion would exceed the state budget, or that sit at the
    depth bound, are marked truncated and have no recorded edges.
    """
    if (max_states is not None and max_states <= 0) or (max_depth is not None and max_depth <= 0):
        raise ValueError("budgets must be positive")
    lts = new_lts(semantics, max_states, max_depth, gc)
    add_root(lts, initial)
    return lts


def edges_from(lts: Lts, s: int):
    return lts.succ[s] or []


# --------------------------------------------------------------------------
# observations


def observe(lts: Lts, kind: str | None = None, budget: int = encoder.DEFAULT_PROBE_BUDGET):
    """Immediate (success, barbs) per state; barbs are translated for target
    graphs of the given encoding kind."""
    if len(lts.obs) == len(lts.states):
        return lts.obs
    obs = list(lts.obs)
    for s in range(len(obs), len(lts.states)):
        st = lts.states[s]
        if lts.semantics == "csp":
            obs.append((csp.has_success(st), csp.barbs(st)))
        else:
            b = encoder.translated_barbs(st, kind or "inner", budget, saturate=False)
            if b.unknown:
                raise RuntimeError(f"lock probe budget exhausted in state {s}")
            obs.append((has_success_target(st), frozenset(b)))
    lts.obs = obs
    return obs


def classify_edges(lts: Lts, kind: str, budget: int = encoder.DEFAULT_PROBE_BUDGET):
    cls = list(lts.edge_class)
    for e in range(len(cls), len(lts.edges)):
        s, info, _ = lts.edges[e]
        cls.append(encoder.classify_step(kind, lts.states[s], info, budget))
    lts.edge_class = cls
    return cls


def sccs(n: int, succ) -> list:
    """Tarjan's algorithm, iterative; returns SCCs in reverse topological
    order (every SCC comes after the SCCs it can reach)."""
    index = [-1] * n
    low = [0] * n
    on = [False] * n
    stack = []
    out = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, iter(succ(root)))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on[root] = True
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on[w] = True
                    work.append((w, iter(succ(w))))
                    advanced = True
                    break
                if on[w]:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on[w] = False
                    comp.append(w)
                    if w == v:
                        break
                out.append(comp)
    return out


def reach_annotations(lts: Lts, obs=None):
    """Per state: (success-reachable, barbs-reachable, partial).

    success-reachable is True, False or None (unknown: not found but a
    truncated state is reachable); partial flags barb sets that may miss
    barbs behind truncation.
    """
    obs = obs if obs is not None else lts.obs
    n = len(lts.states)
    comps = sccs(n, lts.successors)
    comp_of = [0] * n
    for i, c in enumerate(comps):
        for v in c:
            comp_of[v] = i
    succ_r = [False] * len(comps)
    barbs_r = [frozenset()] * len(comps)
    trunc_r = [False] * len(comps)
    for i, c in enumerate(comps):
        s_ok = any(obs[v][0] for v in c)
        b = set()
        t = any(v in lts.truncated for v in c)
        for v in c:
            b |= obs[v][1]
            for w in lts.successors(v):
                j = comp_of[w]
                if j != i:
                    s_ok = s_ok or succ_r[j]
                    b |= barbs_r[j]
                    t = t or trunc_r[j]
        succ_r[i], barbs_r[i], trunc_r[i] = s_ok, frozenset(b), t
    out = []
    for v in range(n):
        i = comp_of[v]
        sr = True if succ_r[i] else (None if trunc_r[i] else False)
        out.append((sr, barbs_r[i], trunc_r[i]))
    return out


def weak_reach(lts: Lts, start: int) -> set:
    seen = {start}
    todo = [start]
    while todo:
        v = todo.pop()
        for w in lts.successors(v):
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return seen


def _find_cycle(n, succ, allowed_edge=None):
    """A reachable cycle as a list of state ids, or None."""
    color = [0] * n
    parent = {}
    for root in range(n):
        if color[root]:
            continue
        stack = [(root, iter(succ(root)))]
        color[root] = 1
        while stack:
            v, it = stack[-1]
            pushed = False
            for w in it:
                if color[w] == 1:
                    cyc = [w]
                    x = v
                    while x != w:
                        cyc.append(x)
                        x = parent[x]
                    cyc.reverse()
                    return [w] + cyc[:-1] if cyc[0] != w else cyc
                if color[w] == 0:
                    color[w] = 1
                    parent[w] = v
                    stack.append((w, iter(succ(w))))
                    pushed = True
                    break
            if not pushed:
                color[v] = 2
                stack.pop()
    return None


def divergence_check(lts: Lts) -> dict:
    """Report a cycle of reductions if the explored graph has one.  Without a
    cycle the verdict is a proof of convergence only if nothing was cut off."""
    cyc = _find_cycle(len(lts.states), lts.successors)
    if cyc is not None:
        return {"divergent": True, "cycle": cyc, "complete": lts.complete}
    return {"divergent": False, "cycle": None, "complete": lts.complete,
            "status": "convergent" if lts.complete else "none-within-bound"}


def auxiliary_termination_check(lts: Lts, classes=None) -> dict:
    """No cycle made only of auxiliary edges."""
    classes = classes if classes is not None else lts.edge_class
    n = len(lts.states)
    aux_succ = [[] for _ in range(n)]
    for e, (s, _, d) in enumerate(lts.edges):
        if classes[e].cls == "auxiliary":
            aux_succ[s].append(d)
    cyc = _find_cycle(n, lambda v: aux_succ[v])
    if cyc is None:
        return {"status": "ok", "complete": lts.complete}
    return {"status": "counterexample", "cycle": cyc, "complete": lts.complete}


# --------------------------------------------------------------------------
# dumps


def _label_text(lts, e):
    lab = lts.edges[e][1]
    if lts.semantics == "csp":
        return lab[0]
    return f"{lab.channel}<{','.join(lab.values)}>"


def to_json(lts: Lts, pretty_states: bool = True) -> dict:
    ann = reach_annotations(lts) if len(lts.obs) == len(lts.states) else None
    states = []
    for s, st in enumerate(lts.states):
        d = {"id": s, "depth": lts.depth[s], "truncated": s in lts.truncated}
        if pretty_states:
            d["term"] = str(st)
        if ann is not None:
            sr, br, part = ann[s]
            d["success"] = lts.obs[s][0]
            d["barbs"] = sorted(lts.obs[s][1])
            d["success_reachable"] = sr
            d["barbs_reachable"] = sorted(br)
            d["barbs_partial"] = part
        states.append(d)
    edges = []
    for e, (s, lab, d) in enumerate(lts.edges):
        rec = {"src": s, "dst": d, "label": _label_text(lts, e)}
        if lts.semantics == "target":
            rec.update(lab.to_json())
            if e < len(lts.edge_class):
                rec["class"] = lts.edge_class[e].cls
                rec["reason"] = lts.edge_class[e].reason
        else:
            rec["redex"] = sorted(lab[1])
        edges.append(rec)
    return {"semantics": lts.semantics, "roots": lts.roots, "states": states,
            "edges": edges, "complete": lts.complete,
            "budgets": {"max_states": lts.max_states, "max_depth": lts.max_depth}}


_DOT_COLOURS = {"simulation": "red", "auxiliary": "gray40", "indeterminate": "orange"}


def to_dot(lts: Lts, terms: bool = False) -> str:
    lines = ["digraph lts {", "  node [shape=circle];"]
    for s in range(len(lts.states)):
        label = str(lts.states[s]).replace('"', '\\"') if terms else str(s)
        attrs = [f'label="{label}"']
        if s in lts.roots:
            attrs.append("penwidth=2")
        if s in lts.truncated:
            attrs.append("style=dashed")
        lines.append(f"  s{s} [{', '.join(attrs)}];")
    for e, (s, _, d) in enumerate(lts.edges):
        lab = _label_text(lts, e).replace('"', '\\"')
        colour = "black"
        if e < len(lts.edge_class):
            colour = _DOT_COLOURS.get(lts.edge_class[e].cls, "black")
        lines.append(f'  s{s} -> s{d} [label="{lab}", color={colour}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def dumps(lts: Lts, fmt: str = "json") -> str:
    if fmt == "dot":
        return to_dot(lts)
    return json.dumps(to_json(lts), indent=2, ensure_ascii=False)
