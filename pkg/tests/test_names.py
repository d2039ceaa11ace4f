import itertools

import pytest
from hypothesis import given, strategies as st

from csp2pi.names import (RESERVED_BASES, Name, NameError_, RenamingPolicy, core_of,
                          is_variant_of, kind_of)

source_names = st.from_regex(r"[a-z][a-z0-9_]{0,5}", fullmatch=True)
variables = st.from_regex(r"[A-Z][A-Za-z0-9_]{0,4}", fullmatch=True)


def test_policy_triple_distinct():
    pol = RenamingPolicy()
    t = pol.policy_triple("a")
    assert len(set(t)) == 3
    assert all(kind_of(n) == "policy" for n in t)


def test_policy_triples_disjoint():
    pol = RenamingPolicy()
    assert not set(pol.policy_triple("a")) & set(pol.policy_triple("b"))


def test_source_spelled_like_reserved_name():
    pol = RenamingPolicy()
    reserved = {Name.reserved(b) for b in RESERVED_BASES}
    for b in ("once", "l", "act", "t", "f", "z"):
        assert not set(pol.policy_triple(b)) & reserved
        assert kind_of(b) == "source"


def test_policy_triple_rejects_non_source():
    with pytest.raises(NameError_):
        RenamingPolicy().policy_triple("act%0")


def test_var_name_memoised_and_injective():
    pol = RenamingPolicy()
    assert pol.var_name("X") == pol.var_name("X")
    assert pol.var_name("X") != pol.var_name("Y")
    with pytest.raises(NameError_):
        pol.var_name("x")


def test_var_name_not_a_policy_name():
    pol = RenamingPolicy()
    srcs = ["a", "b", "x", "x_x", "once", "q1"]
    triples = set().union(*(pol.policy_triple(a) for a in srcs))
    for X in ("X", "Y", "Loop", "A1"):
        assert pol.var_name(X) not in triples


def test_fresh_variant_instances():
    pol = RenamingPolicy()
    a, b = pol.fresh_variant("l"), pol.fresh_variant("l")
    assert a != b and core_of(a) == core_of(b) == "l"
    assert Name(a).instance != Name(b).instance
    assert is_variant_of(pol.fresh_variant("s"), "s")
    assert not is_variant_of(pol.fresh_variant("s_i"), "s")


def test_fresh_variant_thousand_distinct():
    pol = RenamingPolicy()
    issued = [pol.fresh_variant("l") for _ in range(1000)]
    assert len(set(issued)) == 1000


def test_fresh_variant_rejects_source_base():
    with pytest.raises(NameError_):
        RenamingPolicy().fresh_variant("a")


def test_kinds_by_spelling():
    assert kind_of("a") == "source"
    assert kind_of("act%0") == "reserved"
    assert kind_of("a#2") == "policy"
    assert kind_of("l%7") == "variant"
    assert kind_of("r^3") == "bound"
    assert kind_of("x_X") == "reserved"


@given(st.sets(source_names, max_size=6), st.sets(variables, max_size=4),
       st.lists(st.sampled_from(sorted(RESERVED_BASES)), max_size=10))
def test_all_issued_names_pairwise_distinct(srcs, vars_, bases):
    pol = RenamingPolicy()
    names = [n for a in sorted(srcs) for n in pol.policy_triple(a)]
    names += [pol.var_name(X) for X in sorted(vars_)]
    names += [Name.reserved(b) for b in sorted(RESERVED_BASES)]
    names += [pol.fresh_variant(b) for b in bases]
    assert len(names) == len(set(names))
    for x, y in itertools.combinations(names, 2):
        assert x != y
