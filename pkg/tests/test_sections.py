import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from strategies import bundle_and_sections, bundles, philox, seeds

from fellweyl.bundle import FellBundle, generate_bundle
from fellweyl.groupoid import TwoCocycle, cyclic, klein, named_group, pair
from fellweyl.numeric import psd_leq
from fellweyl.sections import (
    BundleMismatch,
    InvalidBundle,
    Section,
    convolve,
    expectation,
    extract_structured,
    inner_product,
    is_slice_supported,
    norm_2,
    norm_b,
    norm_inf,
    norms,
    restrict,
    slice_decomposition,
)

LINE = FellBundle(pair(2), {0: 1, 3: 1}, None, "pair(2)")


def e(fb, arrow, value=1.0):
    return Section.from_map(fb, {arrow: np.full(fb.shape(arrow), value, dtype=complex)})


def as_matrix(a, n):
    # pair(n) line bundle ≅ M_n: arrow (i, j) has id i·n + j
    return np.array([[a[i * n + j][0, 0] for j in range(n)] for i in range(n)])


# ----------------------------------------------------------- convolution


def test_matrix_units_multiply():
    assert np.allclose((e(LINE, 1) @ e(LINE, 2)).to_vector(), e(LINE, 0).to_vector())


def test_group_convolution():
    fb = FellBundle(named_group("z2"), {0: 1})
    assert np.allclose((e(fb, 1) @ e(fb, 1)).to_vector(), e(fb, 0).to_vector())


def test_bicharacter_sign_in_convolution():
    fb = generate_bundle(klein(), 1, "bicharacter")
    # ids are 2a + b: (0,1) = 1, (1,0) = 2, (1,1) = 3
    assert np.allclose((e(fb, 1) @ e(fb, 2)).to_vector(), -e(fb, 3).to_vector())


def test_convolution_rejects_other_bundle():
    with pytest.raises(BundleMismatch):
        convolve(e(LINE, 0), e(FellBundle(pair(2), {0: 2, 3: 2}), 0))


@given(seeds, st.integers(1, 4))
def test_pair_line_bundle_is_matrix_algebra(seed, n):
    fb = FellBundle(pair(n), {i * n + i: 1 for i in range(n)})
    rng = philox(seed)
    a, b = Section.random(fb, rng), Section.random(fb, rng)
    assert np.allclose(as_matrix(a @ b, n), as_matrix(a, n) @ as_matrix(b, n))
    # independent oracle for the reduced norm
    assert norm_b(a) == pytest.approx(np.linalg.norm(as_matrix(a, n), 2), rel=1e-9)


@given(seeds, st.integers(2, 5))
def test_cyclic_group_norm_is_fourier_max(seed, k):
    fb = FellBundle(cyclic(k), {0: 1})
    a = Section.random(fb, philox(seed))
    coeffs = np.array([a[j][0, 0] for j in range(k)])
    # C*(Z_k) ≅ C^k through the characters
    fourier = [abs(sum(coeffs[j] * np.exp(2j * np.pi * j * m / k) for j in range(k))) for m in range(k)]
    assert norm_b(a) == pytest.approx(max(fourier), rel=1e-9)


@given(bundle_and_sections(3, small=True))
def test_convolution_associative_and_bilinear(args):
    fb, a, b, c = args
    assert np.allclose(((a @ b) @ c).to_vector(), (a @ (b @ c)).to_vector())
    assert np.allclose((a @ (b + 2j * c)).to_vector(), (a @ b + 2j * (a @ c)).to_vector())


# ------------------------------------------------------------- involution


def test_involution_examples():
    a = e(LINE, 1, 2j)
    assert np.allclose(a.star().to_vector(), e(LINE, 2, -2j).to_vector())
    d = Section.from_map(LINE, {0: [[1.0]], 3: [[5.0]]})
    assert np.allclose(d.star().to_vector(), d.to_vector())


@given(bundle_and_sections(2))
def test_involution_antimultiplicative_and_isometric(args):
    fb, a, b = args
    scale = max(1.0, norm_inf(a) * norm_inf(b))
    assert np.abs(((a @ b).star() - b.star() @ a.star()).to_vector()).max() <= 1e-12 * scale
    assert np.allclose(a.star().star().to_vector(), a.to_vector())
    assert norm_inf(a.star()) == pytest.approx(norm_inf(a))
    assert norm_b(a.star()) == pytest.approx(norm_b(a))


def test_two_norm_is_not_star_invariant():
    # column norm versus row norm of [[1, 1], [0, 0]]
    a = Section.from_map(LINE, {0: [[1.0]], 1: [[1.0]]})
    assert norm_2(a) == pytest.approx(1.0)
    assert norm_2(a.star()) == pytest.approx(np.sqrt(2))


# ---------------------------------------------------------------- norms


def test_norm_examples():
    ones = Section.from_map(LINE, {a: [[1.0]] for a in range(4)})
    assert norms(ones) == pytest.approx((1.0, np.sqrt(2), 2.0))
    diag = Section.from_map(LINE, {0: [[3.0]], 3: [[4j]]})
    assert norms(diag) == pytest.approx((4.0, 4.0, 4.0))
    assert norms(Section.zeros(LINE)) == (0.0, 0.0, 0.0)


@given(bundle_and_sections(1))
def test_norm_order_and_cstar_identity(args):
    fb, a = args
    ni, n2, nb = norms(a)
    assert ni <= n2 + 1e-9 and n2 <= nb + 1e-9
    assert norm_b(a.star() @ a) == pytest.approx(nb**2, rel=1e-8)


@given(bundles(), seeds)
def test_slice_supported_norms_agree(fb, seed):
    rng = philox(seed)
    for piece in slice_decomposition(Section.random(fb, rng)):
        assert is_slice_supported(piece)
        ni, n2, nb = norms(piece)
        assert n2 == pytest.approx(ni, abs=1e-9) and nb == pytest.approx(ni, abs=1e-9)


@given(bundle_and_sections(1))
def test_slice_decomposition_sums_back(args):
    fb, a = args
    total = Section.zeros(fb)
    for p in slice_decomposition(a):
        total = total + p
    assert np.allclose(total.to_vector(), a.to_vector())


# ----------------------------------------------------------- expectation


def test_expectation_examples():
    ones = Section.from_map(LINE, {a: [[1.0]] for a in range(4)})
    assert np.allclose(expectation(ones).to_vector(), [1, 0, 0, 1])
    assert not restrict(ones, []).to_vector().any()


@given(bundle_and_sections(1))
def test_expectation_idempotent_and_contractive(args):
    fb, a = args
    p = expectation(a)
    assert np.allclose(expectation(p).to_vector(), p.to_vector())
    for x, y in zip(norms(p), norms(a)):
        assert x <= y + 1e-9


# --------------------------------------------------------- inner product


def test_inner_product_examples():
    assert np.allclose(inner_product(e(LINE, 1), e(LINE, 1)).to_vector(), e(LINE, 3).to_vector())
    assert not inner_product(e(LINE, 1), e(LINE, 0)).to_vector().any()


@given(bundle_and_sections(2))
def test_inner_product_positive_and_cauchy_schwarz(args):
    fb, a, b = args
    aa = inner_product(a, a)
    assert norm_2(a) ** 2 == pytest.approx(norm_inf(aa), rel=1e-9, abs=1e-12)
    ab, bb = inner_product(a, b), inner_product(b, b)
    for x in fb.base.units:
        assert psd_leq(np.zeros_like(aa[x]), aa[x])
        # ⟨a,b⟩*⟨a,b⟩ ≤ ‖⟨a,a⟩‖·⟨b,b⟩ on every unit fibre
        lhs = ab[x].conj().T @ ab[x]
        assert psd_leq(lhs, norm_inf(aa) * bb[x] + 1e-9 * np.eye(len(lhs)))


# -------------------------------------------------------- structured view


def test_view_of_line_bundle_is_m2():
    ba = extract_structured(LINE)
    assert ba.dim == 4 and ba.sizes == (2, 2)
    assert len(ba.s_patterns) == 2  # diagonal and anti-diagonal


def test_view_of_z2():
    ba = extract_structured(FellBundle(named_group("z2"), {0: 1}))
    assert ba.dim == 2 and len(ba.z_coords) == 1


def test_view_rejects_invalid_bundle():
    g = klein()
    with pytest.raises(InvalidBundle):
        extract_structured(FellBundle(g, {0: 1}, TwoCocycle(g, {(1, 2): -1.0})))


@given(bundle_and_sections(2, small=True))
def test_view_is_faithful_star_homomorphism(args):
    fb, a, b = args
    ba = extract_structured(fb)
    x, y = ba.encode(a), ba.encode(b)
    assert np.allclose(ba.decode(x @ y).to_vector(), (a @ b).to_vector())
    assert np.allclose(ba.decode(x.star()).to_vector(), a.star().to_vector())
    assert x.norm() == pytest.approx(norm_b(a), rel=1e-9)
