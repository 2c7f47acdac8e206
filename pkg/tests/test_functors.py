import numpy as np
import pytest
from hypothesis import given, settings
from strategies import bundle_and_sections, bundles, philox, seeds

from fellweyl.bundle import FellBundle
from fellweyl.functors import (
    FellMorphism,
    NotComposable,
    NotStarBijective,
    NotUnital,
    StructuredMorphism,
    ab_functor,
    canonical_morphisms,
    compose_fell,
    identity_morphism,
    omega_isomorphism,
    pullback_bundle,
    pullback_sections,
    pushforward_sections,
    random_morphism,
    sp_functor,
    structured_view,
    validate_fell_morphism,
    validate_structured_morphism,
    verify_adjunction,
)
from fellweyl.groupoid import GroupoidFunctor, pair, star_bijectivity_report
from fellweyl.sections import Section, convolve
from fellweyl.structured import cartan_pair, unfaithful_example

P2 = FellBundle(pair(2), {0: 1, 3: 1}, None, "pair(2)")


def collapse():
    """pair(2) → pair(1): every arrow to the single unit."""
    g, one = pair(2), pair(1)
    phi = GroupoidFunctor(g, one, {a: 0 for a in range(4)})
    tgt = FellBundle(g, {0: 1, 3: 1})
    src = FellBundle(one, {0: 1})
    return FellMorphism(src, tgt, phi, {a: np.eye(1) for a in range(4)}, True, "collapse")


# ------------------------------------------------------------ Fell morphisms


@pytest.mark.parametrize("name", ["identity", "swap", "fold"])
def test_canonical_morphisms_validate(name):
    m = canonical_morphisms()[name]
    assert validate_fell_morphism(m).ok


def test_collapse_is_rejected_by_star_bijectivity():
    m = collapse()
    rep = star_bijectivity_report(m.phi)
    assert not rep.ok
    assert not validate_fell_morphism(m).ok
    with pytest.raises(NotStarBijective):
        pullback_bundle(m.source, m.phi)


@settings(max_examples=15)
@given(bundle_and_sections(k=2, small=True), seeds)
def test_pullback_is_a_star_homomorphism(fbab, seed):
    fb, a, b = fbab
    m = random_morphism(fb, seed)
    pa, pb = pullback_sections(fb, m.phi, a), pullback_sections(fb, m.phi, b)
    pab = pullback_sections(fb, m.phi, convolve(a, b))
    assert np.allclose(pab.to_vector(), convolve(pa, pb).to_vector(), atol=1e-10)
    assert np.allclose(pullback_sections(fb, m.phi, a.star()).to_vector(), pa.star().to_vector(), atol=1e-10)


@settings(max_examples=15)
@given(bundle_and_sections(k=1, small=True), seeds)
def test_ab_is_pushforward_after_pullback(fba, seed):
    fb, a = fba
    m = random_morphism(fb, seed)
    assert validate_fell_morphism(m, seed=seed).ok
    pi = ab_functor(m)
    want = pushforward_sections(m, pullback_sections(fb, m.phi, a))
    got = pi(structured_view(fb).encode(a))
    assert np.allclose(got.coords, structured_view(m.target).encode(want).coords, atol=1e-10)
    assert validate_structured_morphism(pi, seed=seed).ok


def test_non_unital_morphism_has_no_ab():
    m = identity_morphism(P2)
    m.unital = False
    with pytest.raises(NotUnital):
        ab_functor(m)


def test_compose_rejects_mismatched_ends():
    fold = canonical_morphisms()["fold"]
    with pytest.raises(NotComposable):
        compose_fell(fold, fold)


# ---------------------------------------------------------- functor laws


@settings(max_examples=10)
@given(bundles(small=True), seeds)
def test_ab_and_sp_preserve_composition(fb, seed):
    m1 = random_morphism(fb, seed)
    # keep the composite under the default test-set cap
    m2 = random_morphism(m1.target, seed + 1, kind="iso" if m1.target.base.n > 12 else None)
    pi1, pi2 = ab_functor(m1), ab_functor(m2)
    pi = ab_functor(compose_fell(m2, m1))
    assert np.allclose(pi.matrix, pi2.matrix @ pi1.matrix, atol=1e-10)
    sp1, sp2, sp = sp_functor(pi1), sp_functor(pi2), sp_functor(pi)
    assert sp.ok and sp1.ok and sp2.ok
    # contravariant on ultrafilters
    want = {v: sp1.under.mapping[u] for v, u in sp2.under.mapping.items() if u in sp1.under.mapping}
    assert sp.under.mapping == want
    for v in want:
        u = sp2.under.mapping[v]
        assert np.allclose(sp.fibre_maps[v], sp2.fibre_maps[v] @ sp1.fibre_maps[u], atol=1e-8)


@settings(max_examples=10)
@given(bundles(small=True))
def test_identity_laws(fb):
    pi = ab_functor(identity_morphism(fb))
    assert np.allclose(pi.matrix, np.eye(pi.source.dim))
    sp = sp_functor(pi)
    assert sp.ok
    assert sp.under.mapping == {v: v for v in range(fb.base.n)}
    for m in sp.fibre_maps.values():
        assert np.allclose(m, np.eye(len(m)), atol=1e-10)


# ------------------------------------------------------------- adjunction


@pytest.mark.parametrize("name", ["identity", "swap", "fold"])
def test_adjunction_on_canonical_family(name):
    m = canonical_morphisms()[name]
    rep = verify_adjunction(m.source, fell_morphism=m, structured_morphism=ab_functor(m))
    assert rep.ok, [(e.name, e.residual, e.detail) for e in rep.entries if not e.ok]


@settings(max_examples=8)
@given(bundles(small=True), seeds)
def test_adjunction_on_random_morphisms(fb, seed):
    m = random_morphism(fb, seed)
    rep = verify_adjunction(fb, fell_morphism=m, structured_morphism=ab_functor(m))
    assert rep.ok
    assert max(e.residual for e in rep.entries) <= 1e-8


def test_structured_side_on_cartan():
    sa = cartan_pair(2)
    rep = verify_adjunction(FellBundle(pair(2), {0: 1, 3: 1}), sa=sa, structured_morphism=StructuredMorphism.identity(sa))
    assert rep.ok


def test_unfaithful_algebra_is_not_isomorphic_to_its_weyl_sections():
    res = omega_isomorphism(unfaithful_example())
    assert not res.ok
    assert "kernel dimension" in res.detail
