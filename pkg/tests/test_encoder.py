import pytest

from csp2pi import csp, encoder as E, lts as L, target as T
from csp2pi.names import RenamingPolicy, core_of, kind_of
from csp2pi.target import canonicalize, parse_target, reductions_target
from corpus import CURATED, EXAMPLE_E


def enc(text, kind):
    return E.encode(csp.parse_csp(text), kind)[0]


def run_to_end(term, max_steps=50):
    """Follow the unique reduction sequence of a deterministic term."""
    cur = canonicalize(term)
    for _ in range(max_steps):
        succ = reductions_target(cur)
        if not succ:
            return cur
        assert len({s for s, _ in succ}) == 1
        cur = succ[0][0]
    raise AssertionError("did not terminate")


def test_bool_out_shapes():
    pol = RenamingPolicy()
    t_out = E.expand_bool_out("l", True, pol)
    f_out = E.expand_bool_out("l", False, pol)
    assert t_out[0] == "in" and t_out[1] == "l" and t_out[3] == T.Out(t_out[2][0])
    assert f_out[3] == T.Out(f_out[2][1])
    for P in (t_out, f_out):
        assert not any(core_of(n) == "v" for n in T.free_names(P) | set(P[2]))


def test_if_shapes_and_reductions():
    pol = RenamingPolicy()
    cond = E.expand_if("l", T.SUCCESS, T.NIL, pol)
    assert cond[0] == "new" and len(cond[1]) == 2
    cur = canonicalize(T.Par(cond, E.expand_bool_out("l", True, pol)))
    steps = 0
    while True:
        succ = reductions_target(cur)
        if not succ:
            break
        cur = succ[0][0]
        steps += 1
    assert steps == 2 and T.has_success_target(cur)
    end = run_to_end(T.Par(E.expand_if("l", T.NIL, T.SUCCESS, pol),
                           E.expand_bool_out("l", False, pol)))
    assert T.has_success_target(end)


def test_inner_basic_clauses():
    assert enc("STOP", "inner") == T.NIL
    assert enc("SUCCESS", "inner") == T.SUCCESS
    pol = RenamingPolicy()
    x = E.encode_inner(csp.Var("X"), pol)
    assert x == T.Out(pol.var_name("X"))


def test_inner_internal_choice_shape():
    P = enc("STOP |~| SUCCESS", "inner")
    assert P[0] == "new" and core_of(P[1][0]) == "mc"
    kids = P[2][1]
    mc = P[1][0]
    assert sorted(k[0] for k in kids) == ["in", "in", "out"]
    assert {k[3] for k in kids if k[0] == "in"} == {T.NIL, T.SUCCESS}
    assert T.Out(mc) in kids


def test_inner_prefix_has_one_announcement():
    P = enc("a -> STOP", "inner")
    anns = E.announcements(P, E.ACT)
    assert len(anns) == 1
    assert anns[0].channel == RenamingPolicy().policy_triple("a")[0]


def test_inner_output_parses_back():
    for text in CURATED:
        P = enc(text, "inner")
        assert canonicalize(parse_target(T.pretty(P))) == canonicalize(P)


@pytest.mark.parametrize("kind", ["central", "decentral"])
def test_outer_output_parses_back(kind):
    P = enc(EXAMPLE_E, kind)
    assert canonicalize(parse_target(T.pretty(P))) == canonicalize(P)


def test_central_stop():
    g = L.explore(enc("STOP", "central"), "target")
    assert g.complete
    L.observe(g, "central")
    assert all(obs == (False, frozenset()) for obs in g.obs)


def test_central_success_unguarded():
    assert T.has_success_target(enc("SUCCESS", "central"))


def test_central_restriction_list():
    P = enc("a -> STOP", "central")
    assert P[0] == "new"
    assert sorted(core_of(n) for n in P[1]) == ["act", "once"]
    assert all(kind_of(n) == "variant" for n in P[1])


def _cores(P) -> set:
    cf = canonicalize(P)
    return {core_of(n) for th in cf.threads for n in th[1]} | {core_of(n) for n in cf.restricted}


def test_decentral_differs_only_by_once():
    for text in ["a -> STOP", "STOP |~| a -> SUCCESS", EXAMPLE_E]:
        c, d = enc(text, "central"), enc(text, "decentral")
        assert "once" in _cores(c) and "once" not in _cores(d)
        assert _cores(c) - {"once"} == _cores(d)


def test_decentral_stop_is_coordinator_only():
    cf = canonicalize(enc("STOP", "decentral"))
    assert len(cf.restricted) == 1 and core_of(cf.restricted[0]) == "act"
    [th] = cf.threads
    assert T.thread_meta(th).kind == "rep"


def test_lock_probe_initial_sum_is_true():
    P = enc("a -> STOP", "inner")
    [ann] = E.announcements(P, E.ACT)
    assert E.lock_probe(P, ann) is True
    assert E.lock_probe(P, ann, budget=0) is None


def test_lock_probe_after_simulation_is_false():
    pol = RenamingPolicy()
    r, l = pol.fresh_variant("r"), pol.fresh_variant("l")
    residue = T.New((r, l), T.Rep(r, (), E.expand_bool_out(l, False, pol)))
    ann = E.Announcement(pol.policy_triple("a")[0], r, l, pol.fresh_variant("s_i"))
    assert E.lock_probe(residue, ann) is False


def test_translated_barbs_inner():
    assert E.translated_barbs(enc("a -> STOP", "inner")) == {"a"}
    assert E.translated_barbs(enc("STOP", "inner")) == frozenset()
    assert E.translated_barbs(enc("(a -> STOP) \\ a", "inner")) == frozenset()
    assert E.translated_barbs(enc("(a -> STOP) [[a := b]]", "inner")) == {"b"}


def test_translated_barbs_of_example_decentral():
    P = enc(EXAMPLE_E, "decentral")
    assert E.translated_barbs(P, "decentral", saturate=True) == {"o", "p", "q"}
    # before forwarding nothing has reached the coordinator yet
    assert E.translated_barbs(P, "decentral") == frozenset()


def test_barbs_vanish_after_decentral_simulation():
    g = L.explore(enc("a -> STOP", "decentral"), "target")
    L.observe(g, "decentral")
    classes = L.classify_edges(g, "decentral")
    sims = [e for e, c in enumerate(classes) if c.cls == "simulation"]
    assert len(sims) == 1
    for e in sims:
        assert g.obs[g.edges[e][2]][1] == frozenset()


def _first_step(P, pred):
    for nxt, info in reductions_target(P):
        if pred(info):
            return info
    raise AssertionError("no such step")


def test_classify_much_variant():
    P = enc("STOP |~| a -> STOP", "central")
    info = _first_step(P, lambda i: core_of(i.channel) == "mc")
    assert E.classify_step("central", P, info).cls == "simulation"
    assert E.classify_step("decentral", enc("STOP |~| a -> STOP", "decentral"),
                           _first_step(enc("STOP |~| a -> STOP", "decentral"),
                                       lambda i: core_of(i.channel) == "mc")).cls == "simulation"


def test_classify_forwarder_is_auxiliary():
    P = enc("(a -> STOP) \\ a", "central")
    g = L.explore(P, "target")
    classes = L.classify_edges(g, "central")
    fwd = [c for e, c in enumerate(classes) if core_of(g.edges[e][1].channel) in ("act", "act'")
           and g.edges[e][1].channel != E.outermost_act(g.states[g.edges[e][0]])]
    assert fwd and all(c.cls == "auxiliary" for c in fwd)


def test_classify_central_false_lock_is_auxiliary():
    g = L.explore(enc("a -> STOP [] b -> STOP", "central"), "target")
    classes = L.classify_edges(g, "central")
    top = {}
    for e, c in enumerate(classes):
        src, info, _ = g.edges[e]
        if info.channel == E.outermost_act(g.states[src]) and len(info.values) == 4:
            top.setdefault(c.cls, []).append(info.values[0])
    pol = RenamingPolicy()
    a1, b1 = pol.policy_triple("a")[0], pol.policy_triple("b")[0]
    # one winning consumption per summand; the loser is consumed with a false lock
    assert sorted(top["simulation"]) == [a1, b1]
    assert a1 in top["auxiliary"] and b1 in top["auxiliary"]
    assert "indeterminate" not in top


def test_classify_rejects_inner():
    P = enc("a -> STOP", "inner")
    info = reductions_target(T.Par(P, parse_target("act%0(c, r, l, s).0")))[0][1]
    with pytest.raises(ValueError):
        E.classify_step("inner", P, info)


def test_name_map_records_announcements():
    _, m = E.encode(csp.parse_csp("a -> STOP [] b -> SUCCESS"), "inner")
    assert sorted(v["action"] for v in m.values()) == ["a", "b"]
    assert all(core_of(v["lock"]) == "l" for v in m.values())


def test_encoding_is_deterministic():
    for text in CURATED[:10]:
        assert enc(text, "decentral") == enc(text, "decentral")
