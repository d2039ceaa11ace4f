"""Brute-force structural congruence for small target terms.

Terms use their own tuple encoding, independent of the package:

    ("0",) ("ok",) ("out", x, args) ("in", x, params, P) ("rep", x, params, P)
    ("m", x, y, P) ("par", kids) ("nu", x, P)

Parallel composition is kept flat and sorted (associativity and
commutativity); every other axiom is applied explicitly at every position:
unit of parallel, scope garbage and scope extrusion in both directions,
swapping of binders, match resolution and alpha-conversion.  Names are
sorted by their base spelling (``l``, ``l%1``, ``l%2`` share a sort) and
alpha-conversion stays within a sort, as the package's name universe does.
Two terms are congruent when the sets reachable from them intersect.
"""

from __future__ import annotations

def alpha_pool(x):
    """Binders are sorted by their base spelling; alpha-conversion picks
    another name of the same sort."""
    core = x.split("%")[0]
    return (core, core + "%1", core + "%2")


NIL = ("0",)


def par(*kids):
    flat = []
    for k in kids:
        if k[0] == "par":
            flat.extend(k[1])
        else:
            flat.append(k)
    if not flat:
        return NIL
    if len(flat) == 1:
        return flat[0]
    return ("par", tuple(sorted(flat, key=repr)))


def norm(P):
    tag = P[0]
    if tag in ("in", "rep"):
        return (tag, P[1], P[2], norm(P[3]))
    if tag == "m":
        return ("m", P[1], P[2], norm(P[3]))
    if tag == "nu":
        return ("nu", P[1], norm(P[2]))
    if tag == "par":
        return par(*(norm(k) for k in P[1]))
    return P


def fn(P) -> frozenset:
    tag = P[0]
    if tag == "out":
        return frozenset((P[1], *P[2]))
    if tag in ("in", "rep"):
        return frozenset({P[1]}) | (fn(P[3]) - set(P[2]))
    if tag == "m":
        return frozenset({P[1], P[2]}) | fn(P[3])
    if tag == "nu":
        return fn(P[2]) - {P[1]}
    if tag == "par":
        return frozenset().union(*(fn(k) for k in P[1]))
    return frozenset()


def names(P) -> frozenset:
    """Every name occurring in P, free or bound."""
    tag = P[0]
    if tag == "out":
        return frozenset((P[1], *P[2]))
    if tag in ("in", "rep"):
        return frozenset({P[1], *P[2]}) | names(P[3])
    if tag == "m":
        return frozenset({P[1], P[2]}) | names(P[3])
    if tag == "nu":
        return frozenset({P[1]}) | names(P[2])
    if tag == "par":
        return frozenset().union(*(names(k) for k in P[1]))
    return frozenset()


def size(P) -> int:
    tag = P[0]
    if tag in ("in", "rep", "m"):
        return 1 + size(P[3])
    if tag == "par":
        return sum(size(k) for k in P[1])
    if tag == "nu":
        return size(P[2])
    return 1


def rename(P, old, new):
    """Replace free occurrences of old by new; callers pick a new name that
    occurs nowhere in P, so nothing is captured."""
    tag = P[0]
    r = (lambda n: new if n == old else n)
    if tag == "out":
        return ("out", r(P[1]), tuple(r(a) for a in P[2]))
    if tag in ("in", "rep"):
        body = P[3] if old in P[2] else rename(P[3], old, new)
        return (tag, r(P[1]), P[2], body)
    if tag == "m":
        return ("m", r(P[1]), r(P[2]), rename(P[3], old, new))
    if tag == "nu":
        if P[1] == old:
            return P
        return ("nu", P[1], rename(P[2], old, new))
    if tag == "par":
        return ("par", tuple(rename(k, old, new) for k in P[1]))
    return P


def _root_rewrites(P, variables):
    """Axiom instances at the root of P."""
    tag = P[0]
    if tag == "par":
        kids = list(P[1])
        if NIL in kids and len(kids) > 1:
            rest = list(kids)
            rest.remove(NIL)
            yield par(*rest)
        for i, k in enumerate(kids):
            if k[0] != "nu":
                continue
            x, body = k[1], k[2]
            others = kids[:i] + kids[i + 1:]
            for j, o in enumerate(others):
                if x not in fn(o):
                    outside = others[:j] + others[j + 1:]
                    yield par(("nu", x, par(o, body)), *outside)
    if tag == "nu":
        x, body = P[1], P[2]
        if x not in fn(body):
            yield body
        if body == NIL:
            yield NIL
        if body[0] == "nu" and body[1] != x:
            yield ("nu", body[1], ("nu", x, body[2]))
        if body[0] == "par":
            kids = list(body[1])
            for i, k in enumerate(kids):
                if x not in fn(k):
                    rest = kids[:i] + kids[i + 1:]
                    yield par(k, ("nu", x, par(*rest)))
        for z in alpha_pool(x):
            if z != x and z not in names(body):
                yield ("nu", z, rename(body, x, z))
    if tag == "m":
        x, y, body = P[1], P[2], P[3]
        if x == y:
            yield body
        elif x not in variables and y not in variables:
            yield NIL
    if tag in ("in", "rep"):
        params, body = P[2], P[3]
        for i, x in enumerate(params):
            for z in alpha_pool(x):
                if z not in params and z not in names(body):
                    ps = params[:i] + (z,) + params[i + 1:]
                    yield (tag, P[1], ps, rename(body, x, z))


def rewrites(P, variables=frozenset()):
    """One axiom application anywhere in P (congruence closure of the axioms)."""
    for Q in _root_rewrites(P, variables):
        yield norm(Q)
    tag = P[0]
    if tag in ("in", "rep"):
        inner = (variables - set()) | set(P[2])
        for B in rewrites(P[3], frozenset(inner)):
            yield (tag, P[1], P[2], B)
    elif tag == "m":
        for B in rewrites(P[3], variables):
            yield ("m", P[1], P[2], B)
    elif tag == "nu":
        for B in rewrites(P[2], variables - {P[1]}):
            yield norm(("nu", P[1], B))
    elif tag == "par":
        kids = P[1]
        for i, k in enumerate(kids):
            for K in rewrites(k, variables):
                yield par(*kids[:i], K, *kids[i + 1:])


def closure(P, cap: int = 200_000) -> set:
    start = norm(P)
    seen = {start}
    todo = [start]
    while todo:
        cur = todo.pop()
        for nxt in rewrites(cur):
            if nxt not in seen:
                seen.add(nxt)
                if len(seen) > cap:
                    raise RuntimeError("closure cap exceeded")
                todo.append(nxt)
    return seen


def congruent(P, Q) -> bool:
    return bool(closure(P) & closure(Q))


def to_text(P) -> str:
    tag = P[0]
    if tag == "0":
        return "0"
    if tag == "ok":
        return "success"
    if tag == "out":
        return f"{P[1]}<{','.join(P[2])}>"
    if tag in ("in", "rep"):
        bang = "!" if tag == "rep" else ""
        return f"{bang}{P[1]}({','.join(P[2])}).({to_text(P[3])})"
    if tag == "m":
        return f"[{P[1]}={P[2]}]({to_text(P[3])})"
    if tag == "nu":
        return f"new({P[1]}) ({to_text(P[2])})"
    if tag == "par":
        return "(" + " | ".join(to_text(k) for k in P[1]) + ")"
    raise TypeError(P)


# --------------------------------------------------------------------------
# enumeration


NAMES = ("a", "b", "c")


def leaves():
    yield NIL
    yield ("ok",)
    for x in NAMES:
        yield ("out", x, ())
        for y in NAMES:
            yield ("out", x, (y,))


def enumerate_terms(max_size: int, names=NAMES, max_nu: int = 1, unary_out=True):
    """All terms of size <= max_size (as sets per size), restriction depth
    bounded by max_nu."""
    by_size = {}

    def leaf_set():
        out = {NIL, ("ok",)}
        for x in names:
            out.add(("out", x, ()))
            if unary_out:
                for y in names:
                    out.add(("out", x, (y,)))
        return out

    def wrap_nu(terms, depth):
        res = set(terms)
        frontier = set(terms)
        for _ in range(depth):
            nxt = {("nu", x, t) for t in frontier for x in names}
            res |= nxt
            frontier = nxt
        return res

    for n in range(1, max_size + 1):
        cur = set()
        if n == 1:
            cur |= leaf_set()
        else:
            for body in by_size[n - 1]:
                for x in names:
                    cur.add(("in", x, (), body))
                    cur.add(("rep", x, (), body))
                    for p in names:
                        cur.add(("in", x, (p,), body))
                    for y in names:
                        if x <= y:
                            cur.add(("m", x, y, body))
            for k in range(1, n):
                for left in by_size[k]:
                    for right in by_size[n - k]:
                        if repr(left) <= repr(right):
                            cur.add(par(left, right))
        by_size[n] = {norm(t) for t in wrap_nu(cur, max_nu)}
    return by_size


def count(by_size) -> int:
    return sum(len(v) for v in by_size.values())




def to_target(P):
    """The same term built with the package's constructors."""
    from csp2pi import target as T
    tag = P[0]
    if tag == "0":
        return T.NIL
    if tag == "ok":
        return T.SUCCESS
    if tag == "out":
        return T.Out(P[1], P[2])
    if tag == "in":
        return T.In(P[1], P[2], to_target(P[3]))
    if tag == "rep":
        return T.Rep(P[1], P[2], to_target(P[3]))
    if tag == "m":
        return T.Match(P[1], P[2], to_target(P[3]))
    if tag == "nu":
        return T.New((P[1],), to_target(P[2]))
    if tag == "par":
        return T.Par(*(to_target(k) for k in P[1]))
    raise TypeError(P)


def components(universe):
    """Union-find over one-step rewrites from every term of the universe;
    returns (component-of, all terms seen, edges)."""
    parent = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y):
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[rx] = ry

    todo = []
    for P in universe:
        P = norm(P)
        if P not in parent:
            parent[P] = P
            todo.append(P)
    edges = 0
    while todo:
        cur = todo.pop()
        for nxt in rewrites(cur):
            if nxt not in parent:
                parent[nxt] = nxt
                todo.append(nxt)
            union(cur, nxt)
            edges += 1
    return {x: find(x) for x in parent}, edges


def random_term(rng, size: int, names=NAMES, nu_prob: float = 0.3):
    """A random term of exactly ``size`` prefix/leaf nodes."""
    if size <= 1:
        x = rng.choice(names)
        t = rng.choice([NIL, ("ok",), ("out", x, ()), ("out", x, (rng.choice(names),))])
    else:
        shape = rng.choice(["in", "rep", "m", "par", "par"])
        if shape == "par":
            k = rng.randint(1, size - 1)
            t = par(random_term(rng, k, names, nu_prob), random_term(rng, size - k, names, nu_prob))
        else:
            body = random_term(rng, size - 1, names, nu_prob)
            x = rng.choice(names)
            if shape == "m":
                t = ("m", x, rng.choice(names), body)
            else:
                params = rng.choice([(), (rng.choice(names),)])
                t = (shape, x, params, body)
    if rng.random() < nu_prob:
        t = ("nu", rng.choice(names), t)
    return norm(t)
