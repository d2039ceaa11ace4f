"""Explicit graphs for checker tests."""

from csp2pi import encoder, lts as L
from csp2pi.csp import TAU


def make_lts(n, edges, obs=None, classes=None, roots=(0,)):
    """An Lts over states 0..n-1 with τ-labelled edges (src, dst).  ``obs``
    gives (success, barbs) per state; ``classes`` a class name per edge."""
    g = L.Lts("csp", states=[f"s{i}" for i in range(n)], max_states=n, max_depth=n)
    g.index = {s: i for i, s in enumerate(g.states)}
    g.succ = [[] for _ in range(n)]
    g.depth = [0] * n
    g.roots = list(roots)
    for e, (s, d) in enumerate(edges):
        g.edges.append((s, (TAU, frozenset()), d))
        g.succ[s].append(e)
    g.obs = list(obs) if obs is not None else [(False, frozenset())] * n
    if classes is not None:
        g.edge_class = [encoder.StepClass(c, "test") for c in classes]
    return g


def random_graph(rng, n, density=0.25, barbs=("a", "b")):
    edges = [(s, d) for s in range(n) for d in range(n) if rng.random() < density / 2 + 0.05]
    obs = [(rng.random() < 0.2, frozenset(b for b in barbs if rng.random() < 0.25))
           for _ in range(n)]
    return edges, obs
