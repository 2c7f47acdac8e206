"""Dense complex linear algebra with explicit tolerances.

Everything downstream measures fiber elements with the operator norm and
orders Hermitian matrices through ``psd_leq``.  Eigendecompositions use a
cyclic Jacobi sweep so results do not depend on the LAPACK build.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "Tolerance",
    "HermitianSpectrum",
    "NotHermitian",
    "DimensionMismatch",
    "NotPSD",
    "SpectralFunction",
    "op_norm",
    "herm_eig",
    "apply_spectral",
    "psd_leq",
    "pinv_threshold",
    "is_invertible",
    "is_hermitian",
    "min_eig",
    "catalog",
]


class NotHermitian(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class NotPSD(ValueError):
    pass


@dataclass(frozen=True)
class Tolerance:
    absolute: float = 1e-9
    relative: float = 1e-9
    inv_threshold: float = 1e-9

    def __post_init__(self) -> None:
        for name in ("absolute", "relative", "inv_threshold"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"tolerance {name} must be finite and nonnegative, got {value}")
        if self.inv_threshold <= 0:
            raise ValueError("inv_threshold must be positive")

    def close(self, residual: float, scale: float = 0.0) -> bool:
        return residual <= self.absolute + self.relative * scale

    def scaled(self, factor: float) -> "Tolerance":
        return Tolerance(self.absolute * factor, self.relative * factor, self.inv_threshold * factor)


DEFAULT_TOL = Tolerance()


def as_matrix(m) -> np.ndarray:
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    return arr


def op_norm(m) -> float:
    """Largest singular value; 0 for empty or zero matrices."""
    arr = np.asarray(m, dtype=complex)
    if arr.size == 0:
        return 0.0
    return float(np.linalg.norm(arr, 2))


def is_hermitian(m, tol: Tolerance = DEFAULT_TOL) -> bool:
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        return False
    if arr.size == 0:
        return True
    return op_norm(arr - arr.conj().T) <= tol.absolute * (1.0 + op_norm(arr))


def _require_hermitian(m, tol: Tolerance) -> np.ndarray:
    arr = as_matrix(m)
    if arr.shape[0] != arr.shape[1]:
        raise NotHermitian(f"matrix of shape {arr.shape} is not square")
    if not is_hermitian(arr, tol):
        skew = op_norm(arr - arr.conj().T)
        raise NotHermitian(f"‖m − m*‖ = {skew:.3e} exceeds tolerance")
    return arr


@dataclass(frozen=True)
class HermitianSpectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int = 0

    def reconstruct(self, values: np.ndarray | None = None) -> np.ndarray:
        lam = self.eigenvalues if values is None else values
        v = self.eigenvectors
        return (v * lam) @ v.conj().T


def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.linalg.norm(off))


def _sweep(a: np.ndarray, v: np.ndarray) -> None:
    n = a.shape[0]
    for p in range(n - 1):
        for q in range(p + 1, n):
            apq = a[p, q]
            r = abs(apq)
            if r <= 1e-300:
                continue
            phase = apq / r
            app, aqq = a[p, p].real, a[q, q].real
            tau = (aqq - app) / (2.0 * r)
            t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + math.hypot(1.0, tau))
            c = 1.0 / math.hypot(1.0, t)
            s = t * c
            # unitary acting on columns p, q that annihilates a[p, q]
            cp, cq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = c * cp - s * np.conj(phase) * cq
            a[:, q] = s * phase * cp + c * cq
            rp, rq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c * rp - s * phase * rq
            a[q, :] = s * np.conj(phase) * rp + c * rq
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = c * vp - s * np.conj(phase) * vq
            v[:, q] = s * phase * vp + c * vq


def _jacobi(a: np.ndarray, rel_stop: float = 1e-12, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray, int]:
    n = a.shape[0]
    a = a.copy()
    v = np.eye(n, dtype=complex)
    scale = float(np.linalg.norm(a))
    if n < 2 or scale == 0.0:
        return np.real(np.diag(a)).copy(), v, 0
    stop = rel_stop * scale
    sweeps = 0
    while _off_norm(a) > stop and sweeps < max_sweeps:
        sweeps += 1
        _sweep(a, v)
    if sweeps:
        # convergence is quadratic, so one extra sweep removes the residue left at the stop rule
        _sweep(a, v)
    lam = np.real(np.diag(a)).copy()
    order = np.argsort(lam, kind="stable")
    return lam[order], v[:, order], sweeps


def herm_eig(m, tol: Tolerance = DEFAULT_TOL) -> HermitianSpectrum:
    """Eigenvalues ascending with a unitary eigenvector matrix."""
    arr = _require_hermitian(m, tol)
    herm = 0.5 * (arr + arr.conj().T)
    lam, v, sweeps = _jacobi(herm)
    return HermitianSpectrum(lam, v, sweeps)


def min_eig(m, tol: Tolerance = DEFAULT_TOL) -> float:
    arr = np.asarray(m, dtype=complex)
    if arr.size == 0:
        return 0.0
    return float(herm_eig(arr, tol).eigenvalues[0])


@dataclass(frozen=True)
class SpectralFunction:
    """A named real function from the fixed catalog.

    ``params`` carries the index for parametrised families (``h_n``, ``g_n``)
    and the coefficients for polynomials.
    """

    name: str
    params: tuple = ()
    _fn: Callable[[np.ndarray], np.ndarray] = field(default=None, compare=False, repr=False)

    def __call__(self, x):
        return self._fn(np.asarray(x, dtype=float))

    def compose(self, inner: "SpectralFunction") -> "SpectralFunction":
        return SpectralFunction(f"{self.name}∘{inner.name}", (self, inner), lambda x: self(inner(x)))


def _h_n(n: float) -> Callable[[np.ndarray], np.ndarray]:
    def fn(x: np.ndarray) -> np.ndarray:
        x = np.clip(x, 0.0, None)
        out = n * x
        pos = x > 0
        out[pos] = np.minimum(1.0 / np.sqrt(x[pos]), n * x[pos])
        return out

    return fn


def _h_n_sq(n: float) -> Callable[[np.ndarray], np.ndarray]:
    base = _h_n(n)
    return lambda x: base(x) ** 2


def _g_n(n: int) -> Callable[[np.ndarray], np.ndarray]:
    return lambda x: np.clip(2.0**n * np.asarray(x, dtype=float) - 1.0, 0.0, 1.0)


def _wedge_inverse(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, None)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.minimum(x[pos], 1.0 / x[pos])
    return out


def _poly(coeffs: tuple[float, ...]) -> Callable[[np.ndarray], np.ndarray]:
    return lambda x: np.polynomial.polynomial.polyval(x, np.asarray(coeffs, dtype=float))


class catalog:
    """The spectral functions used by the witness constructions."""

    identity = SpectralFunction("identity", (), lambda x: np.asarray(x, dtype=float).copy())
    g = SpectralFunction("g", (), lambda x: np.maximum(2.0 * np.asarray(x, dtype=float) - 1.0, 0.0))
    sqrt = SpectralFunction("sqrt", (), lambda x: np.sqrt(np.clip(x, 0.0, None)))
    absolute = SpectralFunction("abs", (), lambda x: np.abs(x))
    positive_part = SpectralFunction("pos", (), lambda x: np.clip(x, 0.0, None))
    wedge_inverse = SpectralFunction("x∧1/x", (), _wedge_inverse)

    @staticmethod
    def h(n: float) -> SpectralFunction:
        """x^{-1/2} ∧ n·x, with value 0 at 0."""
        return SpectralFunction("h", (float(n),), _h_n(float(n)))

    @staticmethod
    def h_sq(n: float) -> SpectralFunction:
        return SpectralFunction("h²", (float(n),), _h_n_sq(float(n)))

    @staticmethod
    def g_n(n: int) -> SpectralFunction:
        """0 ∨ (2^n·x − 1) ∧ 1."""
        return SpectralFunction("g_n", (int(n),), _g_n(int(n)))

    @staticmethod
    def polynomial(*coeffs: float) -> SpectralFunction:
        """Coefficients in increasing degree."""
        return SpectralFunction("poly", tuple(float(c) for c in coeffs), _poly(tuple(coeffs)))


def apply_spectral(f: SpectralFunction, m, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """V diag(f(λ)) V* for Hermitian m."""
    if not isinstance(f, SpectralFunction):
        raise TypeError("apply_spectral takes a catalog SpectralFunction")
    arr = np.asarray(m, dtype=complex)
    if arr.size == 0:
        return arr.copy()
    spec = herm_eig(arr, tol)
    out = spec.reconstruct(np.asarray(f(spec.eigenvalues), dtype=float))
    return 0.5 * (out + out.conj().T)


def psd_leq(x, y, tol: Tolerance = DEFAULT_TOL) -> bool:
    """x ≤ y in the C*-order, with slack tol.absolute·(1 + ‖y − x‖)."""
    xa, ya = np.asarray(x, dtype=complex), np.asarray(y, dtype=complex)
    if xa.shape != ya.shape:
        raise DimensionMismatch(f"shapes {xa.shape} and {ya.shape} differ")
    _require_hermitian(xa, tol)
    _require_hermitian(ya, tol)
    if xa.size == 0:
        return True
    diff = ya - xa
    return min_eig(diff, tol) >= -tol.absolute * (1.0 + op_norm(diff))


def pinv_threshold(m, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    arr = np.asarray(m, dtype=complex)
    if arr.size == 0:
        return arr.T.copy()
    u, s, vh = np.linalg.svd(arr, full_matrices=False)
    keep = s >= tol.inv_threshold
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (vh.conj().T * inv) @ u.conj().T


def is_invertible(m, tol: Tolerance = DEFAULT_TOL) -> bool:
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        return False
    if arr.size == 0:
        return True
    return float(np.linalg.svd(arr, compute_uv=False)[-1]) > tol.inv_threshold
