"""Translation of CSP terms into the target calculus.

The inner encoding turns every action prefix into an announcement
``act<c, r, l, s>`` carrying the translated action, a request channel, a
Boolean lock and a simulation trigger.  Parallel composition forwards
announcements upwards and combines the ones that must synchronise.  The two
outer encodings put a coordinator on top that consumes announcements and asks
for their locks: the central one handles one announcement at a time (guarded
by ``once``), the de-central one handles all of them concurrently.

Boolean abbreviations are expanded on construction:

* ``l<T>`` is the input ``l(t,f).t<>`` and ``l<F>`` is ``l(t,f).f<>``;
* ``l(v).if v then P else Q`` is ``new(t,f)(l<t,f> | t().P | f().Q)``;
* a replicated receiver ``!s(v).P`` re-arms its request after each use.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

from . import csp
from .csp import (Conceal, CspTerm, Div, ExtSum, IntChoice, Parallel, Rec,
                  Rename, Stop, Success, Var)
from .names import ACT, TAU, Name, RenamingPolicy, core_of, info, is_var_image
from .target import (NIL, SUCCESS, CanonicalForm, In, Match, New, Out, Par,
                     Rep, _alpha, _META, _templatize, _TEMP_BASE,
                     canon_thread, canonicalize, reductions_target,
                     thread_meta, thread_term)

KINDS = ("inner", "central", "decentral")

# channels of the lock-computation protocol (requests, locks, triggers, t/f)
PROTOCOL_CORES = frozenset({"r", "r_l", "r_r", "l", "l_l", "l_r", "l'",
                            "t", "f", "s", "s_i", "s_l", "s_r"})
# channels that only move announcements upwards
FORWARD_CORES = frozenset({"act", "act'", "next", "syn", "syn'"})

PROBE_YES = Name("Probe_T")
PROBE_NO = Name("Probe_F")

DEFAULT_PROBE_BUDGET = 5000


class Announcement(NamedTuple):
    channel: str
    req: str
    lock: str
    sim: str


class StepClass(NamedTuple):
    cls: str       # auxiliary | simulation | indeterminate
    reason: str


# --------------------------------------------------------------------------
# Boolean abbreviations

_default_policy = RenamingPolicy()


def expand_bool_out(l, value: bool, policy: RenamingPolicy | None = None):
    """``l<T>`` / ``l<F>``: an input waiting for a (t, f) pair."""
    pol = policy or _default_policy
    t, f = pol.fresh_variant("t"), pol.fresh_variant("f")
    return In(l, (t, f), Out(t if value else f))


def expand_if(l, then_b, else_b, policy: RenamingPolicy | None = None):
    """``l(v).if v then then_b else else_b``."""
    pol = policy or _default_policy
    t, f = pol.fresh_variant("t"), pol.fresh_variant("f")
    return New((t, f), Par(Out(l, (t, f)), In(t, (), then_b), In(f, (), else_b)))


def bool_receive(l, branch: Callable[[bool], tuple], policy=None):
    """``l(v).P(v)`` where P may use v as a value; resolved per branch."""
    return expand_if(l, branch(True), branch(False), policy)


def rep_bool_receive(s, branch: Callable[[bool], tuple], policy=None):
    """``!s(v).P(v)``.  The receiver offers one (t, f) pair at a time and
    offers it again after each use."""
    pol = policy or _default_policy
    t, f = pol.fresh_variant("t"), pol.fresh_variant("f")
    arm = Out(s, (t, f))
    return New((t, f), Par(arm,
                           Rep(t, (), Par(branch(True), arm)),
                           Rep(f, (), Par(branch(False), arm))))


# --------------------------------------------------------------------------
# the encodings


class Encoder:
    def __init__(self, policy: RenamingPolicy | None = None):
        self.policy = policy or RenamingPolicy()
        self.name_map: dict = {}

    def fresh(self, base):
        return self.policy.fresh_variant(base)

    def triple(self, n):
        return self.policy.policy_triple(n)

    def _bout(self, l, v):
        return expand_bool_out(l, v, self.policy)

    def _if(self, l, a, b):
        return expand_if(l, a, b, self.policy)

    # ---------------------------------------------------------------- inner

    def inner(self, S: CspTerm, act):
        match S:
            case Stop():
                return NIL
            case Success():
                return SUCCESS
            case Div():
                rep = self.fresh("rep")
                return New((rep,), Par(Out(rep), Rep(rep, (), Out(rep))))
            case Var(X):
                return Out(self.policy.var_name(X))
            case Rec(X, body):
                x = self.policy.var_name(X)
                return New((x,), Par(Out(x), Rep(x, (), self.inner(body, act))))
            case IntChoice(left, right):
                mc = self.fresh("mc")
                return New((mc,), Par(In(mc, (), self.inner(left, act)),
                                      In(mc, (), self.inner(right, act)),
                                      Out(mc)))
            case ExtSum(branches):
                return self._sum(branches, act)
            case Parallel(left, right, sync):
                return self._parallel(left, right, sync, act)
            case Conceal(body, name):
                return self._conceal(body, name, act)
            case Rename(body, mapping):
                return self._rename(body, mapping, act)
        raise TypeError(f"not a CSP term: {S!r}")

    def _sum(self, branches, act):
        r, l = self.fresh("r"), self.fresh("l")
        triggers = [self.fresh("s_i") for _ in branches]
        parts = [In(r, (), self._bout(l, True))]
        for b, s in zip(branches, triggers):
            c1 = self.triple(b.action)[0]
            cont = self.inner(b.cont, act)
            self.name_map[b.occ] = {"action": b.action, "channel": c1, "req": r,
                                    "lock": l, "sim": s}
            parts.append(Out(act, (c1, r, l, s)))

            def branch(v, cont=cont):
                if v:
                    return Par(cont, Rep(r, (), self._bout(l, False)))
                return In(r, (), self._bout(l, True))

            parts.append(rep_bool_receive(s, branch, self.policy))
        return New((r, l, *triggers), Par(*parts))

    def _forwarder(self, act_in, cases):
        """``!act_in(c, x).(prod of matches)``; cases map c to an output."""
        c = self.fresh("c")
        xs = (self.fresh("r"), self.fresh("l"), self.fresh("s"))
        kids = [Match(c, val, make(c, xs)) for val, make in cases]
        return Rep(act_in, (c, *xs), Par(*kids))

    def _bridge(self, act_p, act):
        ys = (self.fresh("c"), self.fresh("r"), self.fresh("l"), self.fresh("s"))
        return Rep(act_p, ys, Out(act, ys))

    def _passing(self, act_p):
        return lambda c, xs: Out(act_p, (c, *xs))

    def _parallel(self, left, right, sync, act):
        act_p = self.fresh("act'")
        names = csp.names_of(left) | csp.names_of(right)
        A = sorted(sync)
        rest = sorted(set(names) - set(sync))

        def arm(P, slot):
            act_i = self.fresh("act")
            cases = [(self.triple(a)[0], (lambda c, xs, a=a: Out(self.triple(a)[slot], xs)))
                     for a in A]
            cases += [(self.triple(n)[0], self._passing(act_p)) for n in rest]
            cases.append((TAU, self._passing(act_p)))
            return New((act_i,), Par(self.inner(P, act_i), self._forwarder(act_i, cases)))

        body = Par(arm(left, 1), arm(right, 2),
                   *[self.synch(a, act) for a in A],
                   self._bridge(act_p, act))
        restricted = (act_p, *[self.triple(a)[1] for a in A], *[self.triple(a)[2] for a in A])
        return New(restricted, body)

    def _conceal(self, body, name, act):
        act_p, act_i = self.fresh("act'"), self.fresh("act")
        z = self.triple(name)[0]
        cases = [(z, lambda c, xs: Out(act_p, (TAU, *xs)))]
        cases += [(self.triple(n)[0], self._passing(act_p))
                  for n in sorted(csp.names_of(body) - {name})]
        cases.append((TAU, self._passing(act_p)))
        inner = New((act_i, z), Par(self.inner(body, act_i), self._forwarder(act_i, cases)))
        return New((act_p,), Par(inner, self._bridge(act_p, act)))

    def _rename(self, body, mapping, act):
        act_p, act_i = self.fresh("act'"), self.fresh("act")
        dom = {x for x, _ in mapping}
        cases = [(self.triple(x)[0],
                  (lambda c, xs, z=z: Out(act_p, (self.triple(z)[0], *xs))))
                 for x, z in mapping]
        cases += [(self.triple(n)[0], self._passing(act_p))
                  for n in sorted(csp.names_of(body) - dom)]
        cases.append((TAU, self._passing(act_p)))
        inner = New((act_i,), Par(self.inner(body, act_i), self._forwarder(act_i, cases)))
        return New((act_p,), Par(inner, self._bridge(act_p, act)))

    def synch(self, c, act):
        """Combine every left announcement for c with every right one."""
        c1, c2, c3 = self.triple(c)
        nxt = self.fresh("next")
        syn_param, syn_new, syn_fwd = self.fresh("syn"), self.fresh("syn"), self.fresh("syn'")
        rl, ll, sl = self.fresh("r_l"), self.fresh("l_l"), self.fresh("s_l")
        rr, lr, sr = self.fresh("r_r"), self.fresh("l_r"), self.fresh("s_r")
        r, l, s = self.fresh("r"), self.fresh("l"), self.fresh("s")
        xs = (self.fresh("r"), self.fresh("l"), self.fresh("s"))
        combined = New((r, l, s), Par(Out(act, (c1, r, l, s)),
                                      self.sim(r, l, s, rl, ll, sl, rr, lr, sr)))
        per_right = Rep(syn_param, (rr, lr, sr), Par(combined, Out(syn_fwd, (rr, lr, sr))))
        relay = New((syn_new,), Par(Out(nxt, (syn_new,)), Rep(syn_fwd, xs, Out(syn_new, xs))))
        per_left = In(c2, (rl, ll, sl), New((syn_fwd,), Par(per_right, relay)))
        return New((nxt,), Par(Out(nxt, (c3,)), Rep(nxt, (syn_param,), per_left)))

    def sim(self, r, l, s, rl, ll, sl, rr, lr, sr):
        """Lock of a combined announcement: ask the left lock, then the right
        one, and propagate the coordinator's verdict back down."""
        lp = self.fresh("l'")
        bout = self._bout

        def dead():
            return Rep(r, (), bout(l, False))

        def verdict(v):
            return Par(bout(sl, v), bout(sr, v), dead() if v else Out(lp))

        both = Par(bout(l, True), bool_receive(s, verdict, self.policy))
        right_false = Par(bout(l, False), bout(sl, False), dead())
        left_true = Par(Out(rr), self._if(lr, both, right_false))
        left_false = Par(bout(l, False), dead())
        attempt = In(r, (), Par(Out(rl), self._if(ll, left_true, left_false)))
        return New((lp,), Par(Out(lp), Rep(lp, (), attempt)))

    # ---------------------------------------------------------------- outer

    def central(self, S: CspTerm):
        a, once = self.fresh("act"), self.fresh("once")
        c, r, l, s = self.fresh("c"), self.fresh("r"), self.fresh("l"), self.fresh("s")
        test = bool_receive(l, lambda v: Par(Out(once), self._bout(s, True)) if v else Out(once),
                            self.policy)
        coord = Rep(once, (), In(a, (c, r, l, s), Par(Out(r), test)))
        return New((a, once), Par(self.inner(S, a), Out(once), coord))

    def decentral(self, S: CspTerm):
        a = self.fresh("act")
        c, r, l, s = self.fresh("c"), self.fresh("r"), self.fresh("l"), self.fresh("s")
        coord = Rep(a, (c, r, l, s), Par(Out(r), self._if(l, self._bout(s, True), NIL)))
        return New((a,), Par(self.inner(S, a), coord))


def encode_inner(S: CspTerm, policy: RenamingPolicy | None = None):
    return Encoder(policy).inner(S, ACT)


def encode_central(S: CspTerm, policy: RenamingPolicy | None = None):
    return Encoder(policy).central(S)


def encode_decentral(S: CspTerm, policy: RenamingPolicy | None = None):
    return Encoder(policy).decentral(S)


def encode(S: CspTerm, kind: str, policy: RenamingPolicy | None = None):
    """Encode with a fresh policy; returns (term, name map)."""
    enc = Encoder(policy)
    if kind == "inner":
        term = enc.inner(S, ACT)
    elif kind == "central":
        term = enc.central(S)
    elif kind == "decentral":
        term = enc.decentral(S)
    else:
        raise ValueError(f"unknown encoding kind {kind!r}")
    return term, enc.name_map


# --------------------------------------------------------------------------
# analysis of encoded states


def _coordinator_channel(term):
    tag = term[0]
    if tag in ("in", "rep") and core_of(term[1]) == "act" and len(term[2]) == 4:
        body = term[3]
        while body[0] == "new":
            body = body[2]
        kids = body[1] if body[0] == "par" else (body,)
        req = term[2][1]
        if any(k[0] == "out" and k[1] == req and not k[2] for k in kids):
            return term[1]
    if tag == "rep" and core_of(term[1]) == "once" and not term[2]:
        return _coordinator_channel(term[3])
    return None


def outermost_act(state):
    """Channel the coordinator of an outer encoding listens on, if present."""
    cf = canonicalize(state)
    for th in cf.threads:
        m = thread_meta(th)
        if m.kind in ("in", "rep") and m.arity in (0, 4):
            ch = _coordinator_channel(thread_term(th))
            if ch is not None:
                return ch
    return None


def announcement_channel(state, kind: str):
    if kind == "inner":
        return ACT
    return outermost_act(state)


def announcements(state, channel) -> list:
    """Unguarded announcements on ``channel`` (any first value)."""
    cf = canonicalize(state)
    out = []
    for th in cf.threads:
        m = thread_meta(th)
        if m.kind == "out" and m.arity == 4 and th[1][0] == channel:
            out.append(Announcement(*(th[1][a] for a in m.args)))
    return out


def _is_protocol(ch) -> bool:
    return core_of(ch) in PROTOCOL_CORES


def _protocol_slice(cf: CanonicalForm, seeds):
    """Protocol threads connected to the seed names through protocol names."""
    names = set(seeds)
    chosen = set()
    candidates = [i for i, th in enumerate(cf.threads)
                  if thread_meta(th).kind != "succ" and _is_protocol(th[1][0])]
    changed = True
    while changed:
        changed = False
        for i in candidates:
            if i in chosen:
                continue
            th_names = cf.threads[i][1]
            if any(n in names for n in th_names):
                chosen.add(i)
                names.update(n for n in th_names if core_of(n) in PROTOCOL_CORES)
                changed = True
    return [cf.threads[i] for i in sorted(chosen)]


_PROBE_CACHE: dict = {}


def lock_probe(state, ann: Announcement, budget: int = DEFAULT_PROBE_BUDGET):
    """Evaluate the lock of ``ann`` in a sandbox copy of ``state``.

    A request on ann.req and a tester on ann.lock are added, then every
    interleaving of lock-protocol steps is explored.  Returns True if every
    maximal interleaving answers the tester with T, False if some interleaving
    does not, and None when the budget runs out first.
    """
    if budget <= 0:
        return None
    cf = canonicalize(state)
    tt = Name.variant("t", _TEMP_BASE + 1)
    ff = Name.variant("f", _TEMP_BASE + 2)
    extra = [Out(ann.req), Out(ann.lock, (tt, ff)),
             In(tt, (), Out(PROBE_YES)), In(ff, (), Out(PROBE_NO))]
    threads = _protocol_slice(cf, (ann.req, ann.lock))
    threads += [_templatize(canon_thread(k)) for k in extra]
    start = _alpha(list(cf.restricted) + [tt, ff], threads)
    key = (start, budget)
    hit = _PROBE_CACHE.get(key)
    if hit is not None or key in _PROBE_CACHE:
        return hit
    result = _run_probe(start, budget)
    _PROBE_CACHE[key] = result
    return result


def _answer(cf):
    for th in cf.threads:
        m = _META[th[0]]
        if m.kind == "out" and not m.arity:
            if th[1][0] == PROBE_YES:
                return True
            if th[1][0] == PROBE_NO:
                return False
    return None


def _run_probe(start, budget):
    seen = {start}
    stack = [start]
    while stack:
        cur = stack.pop()
        succ = reductions_target(cur, channels=_is_protocol)
        if not succ:
            if _answer(cur) is not True:
                return False
            continue
        for nxt, _ in succ:
            if nxt not in seen:
                if len(seen) >= budget:
                    return None
                seen.add(nxt)
                stack.append(nxt)
    return True


class Barbs(frozenset):
    """A set of translated barbs; ``unknown`` lists announcements whose lock
    probe ran out of budget."""

    unknown: tuple = ()


def _is_translated_action(n) -> bool:
    i = info(n)
    return i.kind == "policy" and i.slot == 1


def _snapshot_barbs(cf, channel, budget):
    found, unknown = set(), []
    if channel is None:
        return found, unknown
    for ann in announcements(cf, channel):
        if not _is_translated_action(ann.channel):
            continue
        v = lock_probe(cf, ann, budget)
        if v is True:
            found.add(info(ann.channel).base)
        elif v is None:
            unknown.append(ann)
    return found, unknown


def _is_forwarding(ch) -> bool:
    i = info(ch)
    if i.core in FORWARD_CORES:
        return True
    return "#" in i.core and i.slot in (2, 3)


def translated_barbs(state, kind: str = "inner", budget: int = DEFAULT_PROBE_BUDGET,
                     saturate: bool | None = None, max_states: int = 20000) -> Barbs:
    """Announcements on the free (inner) or outermost (outer) act channel
    whose first value is a translated source name and whose lock is T.

    With ``saturate`` (default for the inner kind) announcements still on
    their way up are forwarded first; the outermost channel itself is left
    alone.  Forwarding steps never consume an
    announcement that reached the top and commute with each other, so one
    maximal forwarding run collects all of them.
    """
    cf = canonicalize(state)
    if saturate is None:
        saturate = kind == "inner"
    channel = announcement_channel(cf, kind)
    unknown = []
    if saturate:
        for _ in range(max_states):
            top = channel if kind == "inner" else announcement_channel(cf, kind)
            succ = reductions_target(cf, channels=lambda ch: _is_forwarding(ch) and ch != top)
            if not succ:
                break
            cf = min(s for s, _ in succ)
        else:
            unknown.append(None)
        channel = announcement_channel(cf, kind)
    found, u = _snapshot_barbs(cf, channel, budget)
    unknown += u
    out = Barbs(found)
    out.unknown = tuple(unknown)
    return out


def classify_step(kind: str, state, step, budget: int = DEFAULT_PROBE_BUDGET) -> StepClass:
    core = core_of(step.channel)
    if core == "mc":
        return StepClass("simulation", "much-variant")
    if core == "rep":
        return StepClass("simulation", "rep-variant")
    if is_var_image(step.channel):
        return StepClass("simulation", "recvar-variant")
    if kind == "central":
        if step.channel == outermost_act(state) and len(step.values) == 4:
            v = lock_probe(state, Announcement(*step.values), budget)
            if v is True:
                return StepClass("simulation", "outermost-announcement-with-true-lock")
            if v is None:
                return StepClass("indeterminate", "probe-budget-exhausted")
        return StepClass("auxiliary", "other-auxiliary")
    if kind == "decentral":
        if core == "l" and thread_meta(step.input_thread).boolinst == "pos":
            return StepClass("simulation", "positive-lock-consumption")
        return StepClass("auxiliary", "other-auxiliary")
    raise ValueError(f"steps are classified for outer encodings only, not {kind!r}")


def lock_state_violations(state) -> list:
    """Per-state lock and request clauses.

    * at most one positive instantiation of each lock;
    * no positive and negative instantiation of the same lock together;
    * at most one (replicated) input on each request channel.
    """
    cf = canonicalize(state)
    pos, neg, req_inputs = {}, {}, {}
    for th in cf.threads:
        m = thread_meta(th)
        if m.kind == "succ":
            continue
        ch = th[1][0]
        core = core_of(ch)
        if core == "l" and m.boolinst:
            (pos if m.boolinst == "pos" else neg)[ch] = \
                (pos if m.boolinst == "pos" else neg).get(ch, 0) + 1
        elif core == "r" and m.kind in ("in", "rep"):
            req_inputs[ch] = req_inputs.get(ch, 0) + 1
    out = []
    for l, k in pos.items():
        if k > 1:
            out.append(f"lock {l}: {k} positive instantiations")
        if l in neg:
            out.append(f"lock {l}: positive and negative instantiation coexist")
    for r, k in req_inputs.items():
        if k > 1:
            out.append(f"request {r}: {k} inputs")
    return out


def negative_locks(state) -> set:
    cf = canonicalize(state)
    return {th[1][0] for th in cf.threads
            if thread_meta(th).boolinst == "neg" and core_of(th[1][0]) == "l"}


def positive_locks(state) -> set:
    cf = canonicalize(state)
    return {th[1][0] for th in cf.threads
            if thread_meta(th).boolinst == "pos" and core_of(th[1][0]) == "l"}
