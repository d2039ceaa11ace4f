"""Direct transcription of the CSP transition rules, one function per rule,
used to cross-check the package's step enumeration."""

from collections import Counter

from csp2pi.csp import (Conceal, Div, ExtSum, IntChoice, Parallel, Prefix, Rec, Rename,
                        Stop, Success, Var)

TAU = "τ"


def subst(t, var, repl):
    """t[repl/var] for closed repl (no capture is possible)."""
    if isinstance(t, Var):
        return repl if t.name == var else t
    if isinstance(t, Rec):
        return t if t.var == var else Rec(t.var, subst(t.body, var, repl))
    if isinstance(t, Parallel):
        return Parallel(subst(t.left, var, repl), subst(t.right, var, repl), t.sync)
    if isinstance(t, IntChoice):
        return IntChoice(subst(t.left, var, repl), subst(t.right, var, repl))
    if isinstance(t, Conceal):
        return Conceal(subst(t.body, var, repl), t.name)
    if isinstance(t, Rename):
        return Rename(subst(t.body, var, repl), t.mapping)
    if isinstance(t, ExtSum):
        return ExtSum(tuple(Prefix(b.action, subst(b.cont, var, repl), b.occ)
                            for b in t.branches))
    return t


def rule_prefix_sum(t):
    return [(b.action, b.cont) for b in t.branches]


def rule_internal(t):
    return [(TAU, t.left), (TAU, t.right)]


def rule_div(t):
    return [(TAU, t)]


def rule_rec(t):
    return [(TAU, subst(t.body, t.var, t))]


def rule_hide(t):
    out = []
    for a, p in steps(t.body):
        out.append((TAU if a == t.name else a, Conceal(p, t.name)))
    return out


def rule_rename(t):
    m = dict(t.mapping)
    return [(a if a == TAU else m.get(a, a), Rename(p, t.mapping)) for a, p in steps(t.body)]


def rule_par(t):
    A = t.sync
    left, right = steps(t.left), steps(t.right)
    out = []
    for a, p in left:
        if a not in A:
            out.append((a, Parallel(p, t.right, A)))
    for a, q in right:
        if a not in A:
            out.append((a, Parallel(t.left, q, A)))
    for a, p in left:
        for b, q in right:
            if a == b and a in A:
                out.append((a, Parallel(p, q, A)))
    return out


RULES = {ExtSum: rule_prefix_sum, IntChoice: rule_internal, Div: rule_div, Rec: rule_rec,
         Conceal: rule_hide, Rename: rule_rename, Parallel: rule_par,
         Stop: lambda t: [], Success: lambda t: [], Var: lambda t: []}


def steps(t):
    return RULES[type(t)](t)


def step_multiset(t) -> Counter:
    return Counter(steps(t))
