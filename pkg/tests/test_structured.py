import numpy as np
import pytest
from hypothesis import given, settings
from strategies import bundles, philox, seeds

from fellweyl.bundle import FellBundle
from fellweyl.groupoid import named_group, pair
from fellweyl.sections import BundleAlgebra
from fellweyl.structured import (
    AlgebraMismatch,
    PreconditionViolated,
    StructuredAlgebra,
    cartan_pair,
    check_bistable,
    check_binormal,
    check_faithful,
    check_normal,
    check_productive,
    check_shiftable,
    classify,
    compare_expectations,
    kadison,
    n_kadison,
    unfaithful_example,
    validate_axioms,
)

M2 = cartan_pair(2)
E11, E12, E21, E22 = (M2.basis_element(i) for i in range(4))


def test_cartan_pair_satisfies_axioms():
    assert validate_axioms(M2).ok
    assert validate_axioms(cartan_pair(3)).ok


def test_dropping_the_diagonal_pattern_breaks_z_in_s():
    bad = StructuredAlgebra((2,), M2.s_patterns[1:], M2.z_coords, M2.phi_matrix)
    assert "z_in_s" in validate_axioms(bad).checks()


def test_cartan_pair_is_normal_and_productive():
    for check in (check_normal(M2), check_shiftable(M2), check_binormal(M2), check_productive(M2, "z")):
        assert check.ok and check.residual <= 1e-12
    assert check_bistable(M2, "z").ok and check_bistable(M2, "phi").ok


def test_corrupted_phi_is_not_normal():
    v = np.full(4, 0.5)
    skew = StructuredAlgebra((2,), M2.s_patterns, M2.z_coords, np.outer(v, v))
    c = check_normal(skew)
    assert not c.ok and c.counterexample


def test_corrupted_z_is_not_productive():
    thin = StructuredAlgebra((2,), M2.s_patterns, [M2.z_coords[0]], M2.phi_matrix)
    assert validate_axioms(thin).ok
    assert not check_productive(thin, "z").ok


def test_group_view_is_normal():
    assert check_normal(BundleAlgebra(FellBundle(named_group("z2"), {0: 1}))).ok


def test_classification_examples():
    assert classify(M2).level == "faithfully-structured"
    assert classify(BundleAlgebra(FellBundle(pair(2), {0: 1, 3: 1}))).level == "faithfully-structured"
    u = classify(unfaithful_example())
    assert u.level != "faithfully-structured" and not u.faithful.ok


def test_faithfulness_locates_the_kernel():
    f = check_faithful(unfaithful_example())
    assert not f.ok and f.block == 1


@settings(max_examples=15)
@given(bundles(small=True))
def test_bundle_views_are_faithfully_structured(fb):
    ba = BundleAlgebra(fb)
    assert validate_axioms(ba).ok
    assert classify(ba).level == "faithfully-structured"


# ------------------------------------------------------------- Kadison


def test_kadison_examples():
    ones = M2.from_coords(np.ones(4))
    assert kadison(M2, ones)
    assert n_kadison(M2, ones, [E12, E21])
    assert n_kadison(M2, M2.zero, [E12, E21])
    with pytest.raises(PreconditionViolated):
        n_kadison(M2, ones, [E12, E12])


def test_n_kadison_rejects_long_vectors():
    with pytest.raises(PreconditionViolated):
        n_kadison(M2, E11, [2 * E12])


@given(seeds)
def test_kadison_on_random_elements(seed):
    rng = philox(seed)
    for sa in (M2, cartan_pair(3)):
        a = sa.random_element(rng)
        assert kadison(sa, a)
        # matrix units from one column have mutually orthogonal Φ(u_j u_k*)
        n = sa.sizes[0]
        us = [sa.basis_element(i * n + 0) for i in range(n)]
        assert n_kadison(sa, a, us)


def test_foreign_elements_are_rejected():
    with pytest.raises(AlgebraMismatch):
        M2.lift(cartan_pair(2).zero)


def test_expectation_comparison():
    same = compare_expectations(M2, M2.phi_matrix)
    assert same["equal"] and same["same_range"]
    other = compare_expectations(M2, np.eye(4))
    assert not other["equal"]
