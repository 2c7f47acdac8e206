import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fellweyl.groupoid import (
    FiniteGroupoid,
    GroupoidFunctor,
    InvalidParams,
    TwoCocycle,
    bicharacter,
    disjoint_union,
    generate,
    is_slice,
    is_star_bijective,
    klein,
    named_group,
    pair,
    product,
    random_groupoid,
    star_bijectivity_report,
    validate_cocycle,
    validate_functor,
    validate_groupoid,
)

seeds = st.integers(0, 2**32 - 1)


def rand_g(seed):
    return random_groupoid(np.random.Generator(np.random.Philox(seed)))


def brute_force_axioms(g):
    """Independent scan: composability iff s(a) = r(b), associativity, units, inverses."""
    bad = []
    for a, b in itertools.product(range(g.n), repeat=2):
        if ((a, b) in g.product) != (g.source[a] == g.range[b]):
            bad.append(("composable", a, b))
    for a, b, c in itertools.product(range(g.n), repeat=3):
        if (a, b) in g.product and (b, c) in g.product:
            if g.product[(g.product[(a, b)], c)] != g.product[(a, g.product[(b, c)])]:
                bad.append(("assoc", a, b, c))
    for a in range(g.n):
        if g.product.get((a, g.inverse[a])) != g.range[a] or g.product.get((g.inverse[a], a)) != g.source[a]:
            bad.append(("inverse", a))
    return bad


# ------------------------------------------------------------------ axioms


def test_pair_groupoid_is_valid():
    g = pair(2)
    assert validate_groupoid(g).ok
    assert g.n == 4 and g.units == (0, 3)


def test_corrupted_product_names_triple():
    d = pair(2).to_dict()
    # (0,1)·(1,0) should be (0,0); send it to (0,1) instead
    d["product"] = [[a, b, 1 if (a, b) == (1, 2) else c] for a, b, c in d["product"]]
    rep = validate_groupoid(FiniteGroupoid.from_dict(d))
    assert not rep.ok
    triples = [v.location for v in rep.violations if v.check == "associativity"]
    assert (2, 1, 2) in triples


def test_z2_is_valid():
    g = named_group("z2")
    assert validate_groupoid(g).ok and g.n == 2 and len(g.units) == 1


@given(seeds)
def test_random_groupoids_pass_both_checkers(seed):
    g = rand_g(seed)
    assert validate_groupoid(g).ok
    assert brute_force_axioms(g) == []
    assert len(g.units) <= 4 and g.n <= 16


def test_generate_counts():
    assert (generate("pair", (2,)).n, len(generate("pair", (2,)).units)) == (4, 2)
    assert (generate("group", ("z2",)).n, len(generate("group", ("z2",)).units)) == (2, 1)
    g = generate("disjoint_union", [("pair", (2,)), ("group", ("z2",))])
    assert (g.n, len(g.units)) == (6, 3)


def test_generate_rejects_unknown():
    with pytest.raises(InvalidParams):
        generate("torus", ())
    with pytest.raises(InvalidParams):
        named_group("s3")


@given(seeds, seeds)
def test_union_and_product_counts(s1, s2):
    g, h = rand_g(s1), rand_g(s2)
    u = disjoint_union(g, h)
    assert u.n == g.n + h.n and len(u.units) == len(g.units) + len(h.units)
    if g.n * h.n <= 64:
        p = product(g, h)
        assert p.n == g.n * h.n and validate_groupoid(p).ok


@given(seeds)
def test_serialization_roundtrip(seed):
    g = rand_g(seed)
    assert FiniteGroupoid.from_dict(g.to_dict()) == g


# ------------------------------------------------------------------ slices


def test_slice_examples():
    g = pair(2)
    assert is_slice(g, {0, 3})
    assert not is_slice(g, range(4))
    assert is_slice(g, {1})


@given(seeds, st.data())
def test_slices_closed_under_subsets(seed, data):
    g = rand_g(seed)
    subset = data.draw(st.sets(st.integers(0, g.n - 1)))
    if is_slice(g, subset):
        for a in subset:
            assert is_slice(g, subset - {a})


# ---------------------------------------------------------------- functors


def test_star_bijectivity_examples():
    g = pair(2)
    assert is_star_bijective(GroupoidFunctor.identity(g))
    gg = disjoint_union(g, g)
    assert is_star_bijective(GroupoidFunctor(gg, g, {a: a % 4 for a in range(8)}))
    collapse = GroupoidFunctor(g, named_group("trivial"), {a: 0 for a in range(4)})
    rep = star_bijectivity_report(collapse)
    assert not rep.ok and rep.violations[0].check == "star_bijective"


@given(seeds)
def test_identity_functor_laws(seed):
    g = rand_g(seed)
    i = GroupoidFunctor.identity(g)
    assert validate_functor(i).ok
    assert i.compose(i).mapping == i.mapping


# ---------------------------------------------------------------- cocycles


def test_cocycle_examples():
    g = klein()
    assert validate_cocycle(g, TwoCocycle.trivial(g)).ok
    sig = bicharacter(g)
    assert validate_cocycle(g, sig).ok
    # (a,b)·(c,d) picks up (−1)^{b·c}: ids are 2a + b
    assert sig(1, 2) == -1 and sig(2, 1) == 1
    broken = sig.with_entry(1, 1, -sig(1, 1))
    rep = validate_cocycle(g, broken)
    assert rep.checks() >= {"cocycle_identity"}


def test_cocycle_unit_modulus_is_located():
    g = named_group("z2")
    rep = validate_cocycle(g, TwoCocycle(g, {(1, 1): 2.0}))
    assert ("unit_modulus", (1, 1)) in [(v.check, v.location) for v in rep.violations]


@given(seeds, st.sampled_from([((0, 0), (1, 0)), ((1, 0), (0, 1)), ((1, 1), (0, 1))]))
def test_bicharacters_are_cocycles(seed, form):
    g = rand_g(seed)
    if g.grading is None:
        return
    assert validate_cocycle(g, bicharacter(g, form)).ok
