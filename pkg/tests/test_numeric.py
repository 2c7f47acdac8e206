import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fellweyl.numeric import (
    DimensionMismatch,
    NotHermitian,
    Tolerance,
    apply_spectral,
    catalog,
    herm_eig,
    is_invertible,
    op_norm,
    pinv_threshold,
    psd_leq,
)

floats = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def complex_matrices(n=st.integers(1, 6)):
    return n.flatmap(
        lambda k: st.tuples(arrays(float, (k, k), elements=floats), arrays(float, (k, k), elements=floats)).map(
            lambda p: p[0] + 1j * p[1]
        )
    )


def hermitian_matrices():
    return complex_matrices().map(lambda m: (m + m.conj().T) / 2)


# ---------------------------------------------------------------- op_norm


@pytest.mark.parametrize(
    "m, expected",
    [(np.eye(2), 1.0), (np.ones((2, 2)), 2.0), (np.zeros((2, 2)), 0.0)],
)
def test_op_norm_examples(m, expected):
    assert op_norm(m) == pytest.approx(expected, abs=1e-12)


@given(complex_matrices())
def test_op_norm_matches_gram_eigenvalue(m):
    # independent oracle: ‖m‖² is the top eigenvalue of mᴴm
    top = np.linalg.eigvalsh(m.conj().T @ m).max()
    assert op_norm(m) == pytest.approx(np.sqrt(max(top, 0.0)), rel=1e-9, abs=1e-9)


# --------------------------------------------------------------- herm_eig


def test_herm_eig_diagonal():
    spec = herm_eig(np.diag([3.0, 1.0]))
    assert np.allclose(spec.eigenvalues, [1, 3])
    assert np.allclose(np.abs(spec.eigenvectors), [[0, 1], [1, 0]])


def test_herm_eig_swap():
    assert np.allclose(herm_eig(np.array([[0, 1], [1, 0]])).eigenvalues, [-1, 1])


def test_herm_eig_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        herm_eig(np.array([[0, 1], [0, 0]]))


@given(hermitian_matrices())
def test_jacobi_agrees_with_lapack(m):
    spec = herm_eig(m)
    scale = max(1.0, np.abs(m).max())
    assert np.allclose(spec.eigenvalues, np.linalg.eigvalsh(m), atol=1e-10 * scale)
    v = spec.eigenvectors
    assert np.allclose(v.conj().T @ v, np.eye(len(m)), atol=1e-10)
    assert np.allclose(spec.reconstruct(), m, atol=1e-9 * scale)


# ---------------------------------------------------------- apply_spectral


def test_spectral_examples():
    assert np.allclose(apply_spectral(catalog.g, np.diag([0.25, 1.0])), np.diag([0, 1]))
    m = np.array([[2.0, 1j], [-1j, 3.0]])
    assert np.allclose(apply_spectral(catalog.identity, m), m)
    assert np.allclose(apply_spectral(catalog.h(2), np.diag([4.0])), [[0.5]])


@given(hermitian_matrices())
def test_spectral_square_root_squares_back(m):
    p = m @ m.conj().T  # PSD
    r = apply_spectral(catalog.sqrt, p)
    assert np.allclose(r @ r, p, atol=1e-8 * max(1.0, np.abs(p).max()))


@given(st.integers(1, 6), st.floats(0, 5))
def test_g_n_is_clamped(n, x):
    y = catalog.g_n(n)(np.array([x]))[0]
    assert 0.0 <= y <= 1.0


# -------------------------------------------------------------- psd order


@pytest.mark.parametrize(
    "x, y, expected",
    [
        (np.zeros((2, 2)), np.eye(2), True),
        (np.eye(2), np.diag([2.0, 2.0]), True),
        (np.diag([1.0, 3.0]), np.diag([2.0, 2.0]), False),
    ],
)
def test_psd_leq_examples(x, y, expected):
    assert psd_leq(x, y) is expected


def test_psd_leq_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        psd_leq(np.eye(2), np.eye(3))


@given(hermitian_matrices())
def test_psd_leq_reflexive_and_adds_squares(m):
    assert psd_leq(m, m)
    assert psd_leq(m, m + m @ m.conj().T)


# ----------------------------------------------------- pseudo-inverse, invertibility


def test_pinv_examples():
    assert np.allclose(pinv_threshold(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))
    assert np.allclose(pinv_threshold(np.array([[3.0]])), [[1 / 3]])
    assert np.allclose(pinv_threshold(np.zeros((2, 2))), 0)


def test_is_invertible_examples():
    assert is_invertible(np.eye(2))
    assert not is_invertible(np.ones((1, 2)))
    assert not is_invertible(np.diag([1.0, 1e-15]), Tolerance(inv_threshold=1e-9))


@given(complex_matrices())
def test_pinv_penrose_identity(m):
    p = pinv_threshold(m, Tolerance(inv_threshold=1e-6))
    # mpm = m up to the dropped singular values
    s = np.linalg.svd(m, compute_uv=False)
    dropped = s[s < 1e-6].max(initial=0.0)
    assert np.abs(m @ p @ m - m).max() <= 1e-8 * max(1.0, s.max()) + 2 * dropped


def test_tolerance_rejects_negative():
    with pytest.raises(ValueError):
        Tolerance(-1.0)
