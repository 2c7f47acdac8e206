"""Finite-dimensional structured C*-algebras (A, S, Z, Φ).

A is a *-subalgebra of a block-diagonal matrix algebra ⊕ M_{n_i}, given by a
basis of ambient vectors.  Elements are ``BlockElement`` values; internally
most work happens on A-coordinates.  S is a finite union of pattern
subspaces, Z the span of mutually orthogonal projections, and Φ a matrix on
A-coordinates.

Membership tests project in coordinates and measure the residual with the
C*-norm.  Closure conditions that are multilinear are checked at random
generic points: a polynomial identity that holds at a generic point holds
everywhere with probability one, which makes these checks exact in practice
at a fraction of the cost of enumerating basis tuples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

from .groupoid import ValidationReport
from .numeric import (
    DEFAULT_TOL,
    NotHermitian,
    SpectralFunction,
    Tolerance,
    apply_spectral,
    catalog,
    is_hermitian,
    min_eig,
    op_norm,
    psd_leq,
)

__all__ = [
    "AlgebraMismatch",
    "PreconditionViolated",
    "BlockElement",
    "StructuredAlgebra",
    "PropertyReport",
    "validate_axioms",
    "check_normal",
    "check_shiftable",
    "check_bistable",
    "check_binormal",
    "check_productive",
    "check_faithful",
    "kadison",
    "n_kadison",
    "property_report",
    "classify",
    "compare_expectations",
    "cartan_pair",
    "unfaithful_example",
    "orthonormal_rows",
]


class AlgebraMismatch(ValueError):
    pass


class PreconditionViolated(ValueError):
    pass


def orthonormal_rows(rows: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (as columns) for the span of the given rows."""
    rows = np.atleast_2d(np.asarray(rows, dtype=complex))
    if rows.size == 0:
        return np.zeros((rows.shape[1] if rows.ndim == 2 else 0, 0), dtype=complex)
    u, s, _ = np.linalg.svd(rows.T, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((rows.shape[1], 0), dtype=complex)
    rank = int(np.sum(s > rtol * s[0]))
    return u[:, :rank]


class BlockElement:
    """An element of a block-diagonal algebra; supports +, -, scalar *, @ and star()."""

    __slots__ = ("algebra", "blocks", "_coords")

    def __init__(self, algebra: "StructuredAlgebra", blocks: Sequence[np.ndarray]):
        self.algebra = algebra
        self.blocks = tuple(np.asarray(b, dtype=complex) for b in blocks)
        self._coords = None

    def _check(self, other: "BlockElement") -> None:
        if not isinstance(other, BlockElement) or other.algebra is not self.algebra:
            raise AlgebraMismatch("elements belong to different algebras")

    def __add__(self, other: "BlockElement") -> "BlockElement":
        self._check(other)
        return BlockElement(self.algebra, [x + y for x, y in zip(self.blocks, other.blocks)])

    def __sub__(self, other: "BlockElement") -> "BlockElement":
        self._check(other)
        return BlockElement(self.algebra, [x - y for x, y in zip(self.blocks, other.blocks)])

    def __neg__(self) -> "BlockElement":
        return BlockElement(self.algebra, [-x for x in self.blocks])

    def __mul__(self, scalar) -> "BlockElement":
        if isinstance(scalar, BlockElement):
            raise TypeError("use @ for the algebra product")
        return BlockElement(self.algebra, [scalar * x for x in self.blocks])

    __rmul__ = __mul__

    def __matmul__(self, other: "BlockElement") -> "BlockElement":
        self._check(other)
        return BlockElement(self.algebra, [x @ y for x, y in zip(self.blocks, other.blocks)])

    def star(self) -> "BlockElement":
        return BlockElement(self.algebra, [x.conj().T for x in self.blocks])

    def norm(self) -> float:
        blocks = self.blocks
        if not blocks:
            return 0.0
        if len(blocks) == 1:
            return op_norm(blocks[0])
        # one batched SVD per block shape instead of a call per block
        groups: dict[tuple[int, int], list[np.ndarray]] = {}
        for b in blocks:
            if b.size:
                groups.setdefault(b.shape, []).append(b)
        best = 0.0
        for shape, bs in groups.items():
            if shape == (1, 1):
                best = max(best, float(np.abs(np.concatenate([b.ravel() for b in bs])).max()))
            else:
                best = max(best, float(np.linalg.svd(np.stack(bs), compute_uv=False)[:, 0].max()))
        return best

    @property
    def coords(self) -> np.ndarray:
        if self._coords is None:
            self._coords = self.algebra.coords(self)
        return self._coords

    def __repr__(self) -> str:
        return f"BlockElement({self.algebra.name}, norm={self.norm():.4g})"


class StructuredAlgebra:
    """(A, S, Z, Φ) on a block-diagonal ambient algebra.

    ``basis``: rows are ambient vectors (blocks raveled row-major and
    concatenated) spanning A; ``None`` means A is the whole ambient algebra.
    ``s_patterns``: list of (k × N) arrays of A-coordinates.
    ``z_projections``: list of A-coordinate vectors.
    ``phi``: N × N matrix on A-coordinates.
    """

    def __init__(
        self,
        sizes: Sequence[int],
        s_patterns: Sequence[np.ndarray],
        z_projections: Sequence[np.ndarray],
        phi: np.ndarray,
        basis: np.ndarray | None = None,
        name: str = "",
        tol: Tolerance = DEFAULT_TOL,
    ):
        self.sizes = tuple(int(n) for n in sizes)
        self.offsets = np.cumsum([0] + [n * n for n in self.sizes])
        self.ambient_dim = int(self.offsets[-1])
        if basis is None:
            self.basis = None
            self.dim = self.ambient_dim
        else:
            self.basis = np.atleast_2d(np.asarray(basis, dtype=complex))
            if self.basis.shape[1] != self.ambient_dim:
                raise ValueError("basis vectors do not match the block sizes")
            self.dim = self.basis.shape[0]
        self.name = name
        self.tol = tol
        self.phi_matrix = np.asarray(phi, dtype=complex)
        if self.phi_matrix.shape != (self.dim, self.dim):
            raise ValueError(f"Φ must be {self.dim}×{self.dim}")
        self.s_patterns = [np.atleast_2d(np.asarray(p, dtype=complex)) for p in s_patterns]
        self.z_coords = [np.asarray(z, dtype=complex).ravel() for z in z_projections]

    # ---------------------------------------------------------------- elements

    def from_coords(self, c: np.ndarray) -> BlockElement:
        c = np.asarray(c, dtype=complex)
        vec = c if self.basis is None else c @ self.basis
        blocks = [
            vec[self.offsets[i] : self.offsets[i + 1]].reshape(n, n) for i, n in enumerate(self.sizes)
        ]
        out = BlockElement(self, blocks)
        out._coords = c
        return out

    @cached_property
    def _coord_map(self) -> np.ndarray:
        return np.linalg.pinv(self.basis.T)

    def stack_from_coords(self, c: np.ndarray) -> list[np.ndarray]:
        """Rows of ``c`` as elements: one (K, n, n) array per block."""
        c = np.atleast_2d(np.asarray(c, dtype=complex))
        vec = c if self.basis is None else c @ self.basis
        return [
            vec[:, self.offsets[i] : self.offsets[i + 1]].reshape(-1, n, n) for i, n in enumerate(self.sizes)
        ]

    def stack_coords(self, blocks: Sequence[np.ndarray]) -> np.ndarray:
        """Inverse of :meth:`stack_from_coords`."""
        vec = np.concatenate([b.reshape(b.shape[0], -1) for b in blocks], axis=1)
        return vec if self.basis is None else vec @ self._coord_map.T

    def ambient_vector(self, x: BlockElement) -> np.ndarray:
        return np.concatenate([b.ravel() for b in x.blocks]) if x.blocks else np.zeros(0, complex)

    def coords(self, x: BlockElement) -> np.ndarray:
        vec = self.ambient_vector(x)
        return vec if self.basis is None else self._coord_map @ vec

    def element(self, blocks: Sequence) -> BlockElement:
        blocks = [np.asarray(b, dtype=complex) for b in blocks]
        if [b.shape for b in blocks] != [(n, n) for n in self.sizes]:
            raise ValueError("block shapes do not match the algebra")
        return BlockElement(self, blocks)

    def lift(self, x) -> BlockElement:
        if isinstance(x, BlockElement):
            if x.algebra is not self:
                raise AlgebraMismatch("element belongs to a different algebra")
            return x
        return self.element(x)

    @cached_property
    def zero(self) -> BlockElement:
        return self.from_coords(np.zeros(self.dim, dtype=complex))

    def basis_element(self, i: int) -> BlockElement:
        c = np.zeros(self.dim, dtype=complex)
        c[i] = 1.0
        return self.from_coords(c)

    def random_element(self, rng: np.random.Generator) -> BlockElement:
        return self.from_coords(rng.normal(size=self.dim) + 1j * rng.normal(size=self.dim))

    def random_in_pattern(self, rng: np.random.Generator, i: int) -> BlockElement:
        p = self.s_patterns[i]
        c = rng.normal(size=p.shape[0]) + 1j * rng.normal(size=p.shape[0])
        return self.from_coords(c @ p)

    def pattern_elements(self, i: int) -> list[BlockElement]:
        return [self.from_coords(row) for row in self.s_patterns[i]]

    @cached_property
    def z_elements(self) -> list[BlockElement]:
        return [self.from_coords(z) for z in self.z_coords]

    def in_algebra_residual(self, x: BlockElement) -> float:
        """Distance from an ambient element to A (0 when A is everything)."""
        if self.basis is None:
            return 0.0
        vec = self.ambient_vector(x)
        back = self.coords(x) @ self.basis
        return float(np.linalg.norm(vec - back))

    # -------------------------------------------------------------- structure

    def norm(self, x: BlockElement) -> float:
        return x.norm()

    def phi(self, x: BlockElement) -> BlockElement:
        return self.from_coords(self.phi_matrix @ x.coords)

    @cached_property
    def _pattern_bases(self) -> list[np.ndarray]:
        return [orthonormal_rows(p) for p in self.s_patterns]

    @cached_property
    def _phi_s_bases(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for p in self.s_patterns:
            q = orthonormal_rows((self.phi_matrix @ p.T).T)
            if q.shape[1] == 0:
                continue
            if not any(_same_span(q, r) for r in out):
                out.append(q)
        if not out:
            out.append(np.zeros((self.dim, 0), dtype=complex))
        return out

    @cached_property
    def _z_basis(self) -> np.ndarray:
        if not self.z_coords:
            return np.zeros((self.dim, 0), dtype=complex)
        return orthonormal_rows(np.array(self.z_coords))

    @cached_property
    def _phi_range(self) -> np.ndarray:
        return orthonormal_rows(self.phi_matrix.T)

    def _residual(self, x: BlockElement, q: np.ndarray) -> BlockElement:
        c = x.coords
        return self.from_coords(c - q @ (q.conj().T @ c))

    def _min_residual(self, x: BlockElement, bases: Sequence[np.ndarray]) -> tuple[float, int]:
        c = x.coords
        best = None
        for i, q in enumerate(bases):
            r = np.linalg.norm(c - q @ (q.conj().T @ c))
            if best is None or r < best[0]:
                best = (r, i)
        if best is None:
            return x.norm(), -1
        i = best[1]
        return self._residual(x, bases[i]).norm(), i

    def dist_s(self, x: BlockElement) -> tuple[float, int]:
        """(residual, pattern index) for the closest pattern."""
        return self._min_residual(x, self._pattern_bases)

    def in_s(self, x: BlockElement, tol: Tolerance | None = None) -> bool:
        tol = tol or self.tol
        return self.dist_s(x)[0] <= tol.absolute + tol.relative * x.norm()

    def dist_phi_s(self, x: BlockElement) -> float:
        return self._min_residual(x, self._phi_s_bases)[0]

    def dist_z(self, x: BlockElement) -> float:
        return self._residual(x, self._z_basis).norm()

    def project_z(self, x: BlockElement) -> BlockElement:
        q = self._z_basis
        return self.from_coords(q @ (q.conj().T @ x.coords))

    def in_z(self, x: BlockElement, tol: Tolerance | None = None) -> bool:
        tol = tol or self.tol
        return self.dist_z(x) <= tol.absolute + tol.relative * x.norm()

    def spectral(self, f: SpectralFunction, x: BlockElement) -> BlockElement:
        """Functional calculus for Hermitian x; f must vanish at 0 off the unital case."""
        return BlockElement(self, [apply_spectral(f, b, self.tol) for b in x.blocks])

    def sup(self, x: BlockElement, y: BlockElement) -> BlockElement:
        """(x + y + |x − y|)/2 for commuting Hermitian x, y."""
        return 0.5 * (x + y + self.spectral(catalog.absolute, x - y))

    def is_hermitian(self, x: BlockElement) -> bool:
        return all(is_hermitian(b, self.tol) for b in x.blocks)

    def is_positive(self, x: BlockElement) -> bool:
        if not self.is_hermitian(x):
            return False
        return all(min_eig(b, self.tol) >= -self.tol.absolute * (1 + op_norm(b)) for b in x.blocks)

    def __repr__(self) -> str:
        return f"StructuredAlgebra({self.name!r}, sizes={self.sizes}, dim={self.dim}, patterns={len(self.s_patterns)})"


def _same_span(q1: np.ndarray, q2: np.ndarray, rtol: float = 1e-9) -> bool:
    if q1.shape[1] != q2.shape[1]:
        return False
    return np.linalg.norm(q1 - q2 @ (q2.conj().T @ q1)) <= rtol * max(1, q1.shape[1])


def _generic(rng: np.random.Generator, k: int) -> np.ndarray:
    return rng.normal(size=k) + 1j * rng.normal(size=k)


def _find_pattern(sa: StructuredAlgebra, xs: list[BlockElement], bases: Sequence[np.ndarray], tol: Tolerance):
    """Index of a single subspace containing every x, or (None, best residual).

    Candidates are ranked by coordinate residual; only the best one is
    measured in the C*-norm.
    """
    if not bases:
        return None, max(x.norm() for x in xs)
    cs = np.array([x.coords for x in xs]).T
    stack = _stacked(bases)
    # ‖c − QQ*c‖² = ‖c‖² − ‖Q*c‖² for orthonormal Q
    inner = stack @ cs
    best_i = int(np.argmax((inner.real**2 + inner.imag**2).sum(axis=(1, 2))))
    scale = 1.0 + max(x.norm() for x in xs)
    q = bases[best_i]
    res = max(sa._residual(x, q).norm() for x in xs) / scale
    return (best_i, res) if res <= tol.absolute else (None, res)


_STACKS: dict[int, tuple[Sequence[np.ndarray], np.ndarray]] = {}


def _stacked(bases: Sequence[np.ndarray]) -> np.ndarray:
    """Zero-padded (p, k, N) array of the adjoint bases Q*, cached per list."""
    hit = _STACKS.get(id(bases))
    if hit is not None and hit[0] is bases:
        return hit[1]
    k = max((q.shape[1] for q in bases), default=0)
    out = np.zeros((len(bases), k, bases[0].shape[0]), dtype=complex)
    for i, q in enumerate(bases):
        out[i, : q.shape[1], :] = q.conj().T
    if len(_STACKS) > 64:
        _STACKS.clear()
    _STACKS[id(bases)] = (bases, out)
    return out


def _pattern_pairs(rng: np.random.Generator, n: int, cap: int) -> tuple[list[tuple[int, int]], str]:
    """All ordered pattern pairs, or a seeded sample of ``cap`` of them."""
    if n * n <= cap:
        return [(i, j) for i in range(n) for j in range(n)], "generic"
    flat = rng.choice(n * n, size=cap, replace=False)
    return [(int(k) // n, int(k) % n) for k in sorted(flat)], "sampled"


def _pattern_indices(rng: np.random.Generator, n: int, cap: int) -> list[int]:
    if n <= cap:
        return list(range(n))
    return sorted(int(k) for k in rng.choice(n, size=cap, replace=False))


# -------------------------------------------------------------------- axioms


def validate_axioms(
    sa: StructuredAlgebra, tol: Tolerance | None = None, seed: int = 0, max_pairs: int = 256
) -> ValidationReport:
    """The four structured C*-algebra axioms.

    Subspace containments are tested at generic points per pattern pair
    (a seeded sample of ``max_pairs`` pairs when there are more), and
    contractivity and positivity of Φ on basis elements plus a seeded sample.
    """
    tol = tol or sa.tol
    rep = ValidationReport(f"structured axioms ({sa.name})")
    rng = np.random.Generator(np.random.Philox(seed))
    phi = sa.phi_matrix
    # (1) expectation
    if np.linalg.norm(phi @ phi - phi) > tol.absolute * (1 + np.linalg.norm(phi)):
        rep.add("phi_idempotent", (), "Φ∘Φ ≠ Φ")
    samples = [sa.basis_element(i) for i in range(sa.dim)] + [sa.random_element(rng) for _ in range(8)]
    for k, x in enumerate(samples):
        px = sa.phi(x)
        if px.norm() > x.norm() * (1 + tol.relative) + tol.absolute:
            rep.add("phi_contractive", (k,), f"‖Φ(x)‖ = {px.norm():.6g} > ‖x‖ = {x.norm():.6g}")
        if not sa.is_positive(sa.phi(x.star() @ x)):
            rep.add("phi_positive", (k,), "Φ(x*x) is not positive")
    for i, x in enumerate(samples[: sa.dim]):
        if sa.in_algebra_residual(x.star()) > tol.absolute:
            rep.add("algebra_star_closed", (i,), "basis element adjoint leaves A")
    # (2) S is a *-subsemigroup: every pattern star and every pattern product lands in one pattern
    bases = sa._pattern_bases
    gen = [[sa.random_in_pattern(rng, i) for _ in range(2)] for i in range(len(sa.s_patterns))]
    for i, pts in enumerate(gen):
        j, r = _find_pattern(sa, [p.star() for p in pts], bases, tol)
        if j is None:
            rep.add("star_closed", (i,), f"pattern {i} adjoint is not inside any pattern (residual {r:.3g})")
    pairs, _ = _pattern_pairs(rng, len(gen), max_pairs)
    for i, j in pairs:
        pi, pj = gen[i], gen[j]
        prods = [pi[0] @ pj[0], pi[1] @ pj[1], pi[0] @ pj[1]]
        if any(sa.in_algebra_residual(x) > tol.absolute * (1 + x.norm()) for x in prods):
            rep.add("product_closed", (i, j), f"product of patterns {i}, {j} leaves A")
            continue
        k, r = _find_pattern(sa, prods, bases, tol)
        if k is None:
            rep.add("product_closed", (i, j), f"patterns {i}·{j} not inside any pattern (residual {r:.3g})")
    # (3) Z ⊆ S is a C*-subalgebra of the centre of Φ[A]
    zs = sa.z_elements
    if zs:
        k, r = _find_pattern(sa, zs, bases, tol)
        if k is None:
            rep.add("z_in_s", (), f"span of Z is not inside a single pattern (residual {r:.3g})")
    for i, p in enumerate(zs):
        if (p - p.star()).norm() > tol.absolute or (p @ p - p).norm() > tol.absolute:
            rep.add("z_projections", (i,), f"Z generator {i} is not a projection")
        for j, q in enumerate(zs[i + 1 :], start=i + 1):
            if (p @ q).norm() > tol.absolute:
                rep.add("z_projections", (i, j), f"Z generators {i}, {j} are not orthogonal")
        if sa.dist_z(sa.phi(p) - p) > tol.absolute or (sa.phi(p) - p).norm() > tol.absolute:
            rep.add("z_in_phi_a", (i,), f"Z generator {i} is not fixed by Φ")
    phi_range = [sa.from_coords(sa._phi_range[:, k]) for k in range(sa._phi_range.shape[1])]
    for i, p in enumerate(zs):
        for k, y in enumerate(phi_range):
            if (p @ y - y @ p).norm() > tol.absolute * (1 + y.norm()):
                rep.add("z_central", (i, k), f"Z generator {i} does not commute with Φ[A]")
                break
    # (4) S_+ ⊆ Φ[S] ⊆ S and Φ[S] an ideal of Φ[A]
    phi_bases = sa._phi_s_bases
    for i, pts in enumerate(gen):
        images = [sa.phi(p) for p in pts]
        if max(x.norm() for x in images) > tol.absolute:
            k, r = _find_pattern(sa, images, bases, tol)
            if k is None:
                rep.add("phi_s_in_s", (i,), f"Φ of pattern {i} is not inside S (residual {r:.3g})")
        squares = [pts[0].star() @ pts[0], pts[1].star() @ pts[1], pts[0].star() @ pts[1] + pts[1].star() @ pts[0]]
        k, r = _find_pattern(sa, squares, phi_bases, tol)
        if k is None:
            rep.add("squares_in_phi_s", (i,), f"s*s for s in pattern {i} is not inside Φ[S] (residual {r:.3g})")
    ys = [sa.from_coords(_generic(rng, sa._phi_range.shape[1]) @ sa._phi_range.T) for _ in range(2)]
    for i, q in enumerate(phi_bases):
        pts = [sa.from_coords(q @ _generic(rng, q.shape[1])) for _ in range(2)]
        prods = [pts[0] @ ys[0], ys[1] @ pts[1], pts[1] @ ys[0]]
        k, r = _find_pattern(sa, prods, phi_bases, tol)
        if k is None:
            rep.add("phi_s_ideal", (i,), f"Φ[S] component {i} is not an ideal of Φ[A] (residual {r:.3g})")
    return rep


# ----------------------------------------------------------------- properties


@dataclass
class Check:
    name: str
    ok: bool
    residual: float
    mode: str
    counterexample: str = ""


@dataclass
class PropertyReport:
    checks: dict[str, Check] = field(default_factory=dict)

    def add(self, c: Check) -> None:
        self.checks[c.name] = c

    def __getitem__(self, name: str) -> bool:
        return self.checks[name].ok

    @property
    def well_structured(self) -> bool:
        need = ("normal", "bistable_phi", "binormal_z", "bistable_z")
        return all(self.checks[n].ok for n in need if n in self.checks)


def _rel(x: BlockElement, scale: float) -> float:
    return x.norm() / (1.0 + scale)


def check_normal(
    sa: StructuredAlgebra, tol: Tolerance | None = None, samples: int = 2, seed: int = 0, max_patterns: int = 64
) -> Check:
    """Φ(s*as) = s*Φ(a)s at generic (a, s) for every pattern."""
    tol = tol or sa.tol
    rng = np.random.Generator(np.random.Philox(seed))
    worst, where = 0.0, ""
    for i in _pattern_indices(rng, len(sa.s_patterns), max_patterns):
        for _ in range(samples):
            a, s = sa.random_element(rng), sa.random_in_pattern(rng, i)
            r = _rel(sa.phi(s.star() @ a @ s) - s.star() @ sa.phi(a) @ s, a.norm() * s.norm() ** 2)
            if r > worst:
                worst, where = r, f"pattern {i}"
    mode = "generic" if len(sa.s_patterns) <= max_patterns else "sampled"
    return Check("normal", worst <= tol.absolute, worst, mode, where if worst > tol.absolute else "")


def check_shiftable(
    sa: StructuredAlgebra, tol: Tolerance | None = None, samples: int = 2, seed: int = 0, max_patterns: int = 64
) -> Check:
    """Φ(sa)s = sΦ(as) at generic (a, s) for every pattern."""
    tol = tol or sa.tol
    rng = np.random.Generator(np.random.Philox(seed + 1))
    worst, where = 0.0, ""
    for i in _pattern_indices(rng, len(sa.s_patterns), max_patterns):
        for _ in range(samples):
            a, s = sa.random_element(rng), sa.random_in_pattern(rng, i)
            r = _rel(sa.phi(s @ a) @ s - s @ sa.phi(a @ s), a.norm() * s.norm() ** 2)
            if r > worst:
                worst, where = r, f"pattern {i}"
    mode = "generic" if len(sa.s_patterns) <= max_patterns else "sampled"
    return Check("shiftable", worst <= tol.absolute, worst, mode, where if worst > tol.absolute else "")


def _left_products(sa: StructuredAlgebra, a: BlockElement, rows: np.ndarray) -> np.ndarray:
    """Coordinates of a·x for every row x of ``rows``, one row each."""
    xs = sa.stack_from_coords(rows)
    return sa.stack_coords([ab[None] @ x for ab, x in zip(a.blocks, xs)])


def _right_products(sa: StructuredAlgebra, a: BlockElement, rows: np.ndarray) -> np.ndarray:
    xs = sa.stack_from_coords(rows)
    return sa.stack_coords([x @ ab[None] for ab, x in zip(a.blocks, xs)])


def _constrained_pairs(sa: StructuredAlgebra, target: np.ndarray, rng, samples: int, max_pairs: int = 64):
    """Sample (a, b) with a, b in patterns and ab inside the subspace ``target``."""
    proj = np.eye(sa.dim) - target @ target.conj().T
    pairs, _ = _pattern_pairs(rng, len(sa.s_patterns), max_pairs)
    for i, j in pairs:
        for _ in range(samples):
            a = sa.random_in_pattern(rng, i)
            pb = sa.s_patterns[j]
            # columns: coordinates of a·p_k projected off the target
            cols = _left_products(sa, a, pb).T
            m = proj @ cols
            # vh must be square to carry the whole null space
            _, s, vh = np.linalg.svd(m, full_matrices=m.shape[0] < m.shape[1])
            rank = int(np.sum(s > 1e-10 * max(1.0, s[0] if s.size else 1.0)))
            null = vh[rank:].conj().T
            if null.shape[1] == 0:
                continue
            y = null @ _generic(rng, null.shape[1])
            b = sa.from_coords(y @ pb)
            yield i, j, a, b


def check_bistable(sa: StructuredAlgebra, which: str = "z", tol: Tolerance | None = None, samples: int = 2, seed: int = 0) -> Check:
    """ab ∈ B ⟹ Φ(a)b, aΦ(b) ∈ B for B = Z (``"z"``) or Φ[S] (``"phi"``)."""
    tol = tol or sa.tol
    rng = np.random.Generator(np.random.Philox(seed + 2))
    targets = [sa._z_basis] if which == "z" else sa._phi_s_bases
    worst, where = 0.0, ""
    for t_idx, target in enumerate(targets):
        for i, j, a, b in _constrained_pairs(sa, target, rng, samples):
            scale = a.norm() * b.norm()
            r = max(
                _rel(sa._residual(sa.phi(a) @ b, target), scale),
                _rel(sa._residual(a @ sa.phi(b), target), scale),
            )
            if which == "phi":
                r = max(r, _rel(sa.phi(a) @ b - sa.phi(a) @ sa.phi(b), scale))
            if r > worst:
                worst, where = r, f"patterns ({i}, {j}) into component {t_idx}"
    name = "bistable_z" if which == "z" else "bistable_phi"
    return Check(name, worst <= tol.absolute, worst, "sampled", where if worst > tol.absolute else "")


def check_binormal(sa: StructuredAlgebra, tol: Tolerance | None = None, samples: int = 2, seed: int = 0) -> Check:
    """ab ∈ Z ⟹ aZb ⊆ Z, sampled over constrained pattern pairs."""
    tol = tol or sa.tol
    rng = np.random.Generator(np.random.Philox(seed + 3))
    worst, where = 0.0, ""
    for i, j, a, b in _constrained_pairs(sa, sa._z_basis, rng, samples):
        for k, z in enumerate(sa.z_elements):
            r = _rel(sa._residual(a @ z @ b, sa._z_basis), a.norm() * b.norm())
            if r > worst:
                worst, where = r, f"patterns ({i}, {j}), projection {k}"
    return Check("binormal_z", worst <= tol.absolute, worst, "sampled", where if worst > tol.absolute else "")


def check_productive(
    sa: StructuredAlgebra, which: str = "z", tol: Tolerance | None = None, seed: int = 0, max_patterns: int = 8
) -> Check:
    """Φ(a) ∈ aP ∩ Pa for pattern basis elements and a generic point per pattern."""
    tol = tol or sa.tol
    rng = np.random.Generator(np.random.Philox(seed + 4))
    if which == "z":
        gens = [sa.z_elements]
    else:
        gens = [[sa.from_coords(q[:, k]) for k in range(q.shape[1])] for q in sa._phi_s_bases]
    worst, where = 0.0, ""
    for i in _pattern_indices(rng, len(sa.s_patterns), max_patterns):
        cands = sa.pattern_elements(i) + [sa.random_in_pattern(rng, i)]
        for k, a in enumerate(cands):
            target = sa.phi(a).coords
            best = np.inf
            for g in gens:
                if not g:
                    continue
                rows = np.array([p.coords for p in g])
                left = _left_products(sa, a, rows).T
                right = _right_products(sa, a, rows).T
                rs = []
                for m in (left, right):
                    coef, *_ = np.linalg.lstsq(m, target, rcond=None)
                    rs.append(target - m @ coef)
                if max(np.linalg.norm(r) for r in rs) > 1e-6:
                    # far outside in coordinates already, skip the C*-norm
                    best = min(best, max(np.linalg.norm(r) for r in rs))
                    continue
                best = min(best, max(sa.from_coords(r).norm() for r in rs))
            if not gens or all(not g for g in gens):
                best = sa.phi(a).norm()
            best /= 1.0 + a.norm()
            if best > worst:
                worst, where = best, f"pattern {i}, element {k}"
    name = "productive_z" if which == "z" else "productive_phi"
    mode = "exact" if len(sa.s_patterns) <= max_patterns else "sampled"
    return Check(name, worst <= tol.absolute, worst, mode, where if worst > tol.absolute else "")


def check_diagonal(sa: StructuredAlgebra, tol: Tolerance | None = None, seed: int = 0) -> Check:
    """Φ[S] is closed under products and adjoints, so it is diagonal."""
    tol = tol or sa.tol
    rng = np.random.Generator(np.random.Philox(seed + 5))
    worst, where = 0.0, ""
    bases = sa._phi_s_bases
    for i, q in enumerate(bases):
        for j, r in enumerate(bases):
            x = sa.from_coords(q @ _generic(rng, q.shape[1]))
            y = sa.from_coords(r @ _generic(rng, r.shape[1]))
            _, res = _find_pattern(sa, [x @ y, x.star()], bases, tol)
            if res > worst:
                worst, where = res, f"components ({i}, {j})"
    return Check("diagonal_phi_s", worst <= tol.absolute, worst, "generic", where if worst > tol.absolute else "")


@dataclass
class FaithfulCheck:
    ok: bool
    residual: float
    block: int | None = None
    basis_index: int | None = None
    message: str = ""


def check_faithful(sa: StructuredAlgebra, tol: Tolerance | None = None, seed: int = 0) -> FaithfulCheck:
    """Φ(a*a) = 0 ⟹ a = 0 over a basis of A and a seeded sample.

    On failure the report names the block where the offending element lives
    and its basis index.
    """
    tol = tol or sa.tol
    rng = np.random.Generator(np.random.Philox(seed + 6))
    cands = [(i, sa.basis_element(i)) for i in range(sa.dim)] + [(None, sa.random_element(rng)) for _ in range(4)]
    # kernel of Φ intersected with A: elements there are candidates too
    _, s, vh = np.linalg.svd(sa.phi_matrix)
    rank = int(np.sum(s > 1e-10))
    for k, row in enumerate(vh[rank:]):
        cands.append((None, sa.from_coords(row.conj())))
    worst = 0.0
    for idx, a in cands:
        pa = sa.phi(a.star() @ a).norm()
        na = a.norm()
        if pa <= tol.absolute and na > tol.absolute + tol.relative:
            block = next(b for b, blk in enumerate(a.blocks) if op_norm(blk) > tol.absolute)
            return FaithfulCheck(
                False, na, block, idx,
                f"Φ(a*a) = 0 for a nonzero element supported in block {block}"
                + (f" (basis element {idx})" if idx is not None else ""),
            )
        if na > 0:
            worst = max(worst, na**2 / max(pa, 1e-300) if pa > 0 else 0.0)
    return FaithfulCheck(True, 0.0)


def kadison(sa: StructuredAlgebra, a, tol: Tolerance | None = None) -> bool:
    """Φ(a*)Φ(a) ≤ Φ(a*a)."""
    tol = tol or sa.tol
    a = sa.lift(a)
    pa = sa.phi(a)
    lhs, rhs = pa.star() @ pa, sa.phi(a.star() @ a)
    return all(psd_leq(x, y, tol) for x, y in zip(lhs.blocks, rhs.blocks))


def n_kadison(sa: StructuredAlgebra, a, us: Sequence, tol: Tolerance | None = None) -> bool:
    """Σ Φ(a*u_k*)Φ(u_k a) ≤ Φ(a*a) for u_k in the unit ball with Φ(u_j u_k*) = 0."""
    tol = tol or sa.tol
    a = sa.lift(a)
    us = [sa.lift(u) for u in us]
    problems = []
    for k, u in enumerate(us):
        if u.norm() > 1.0 + tol.absolute + tol.relative:
            problems.append(f"‖u_{k}‖ = {u.norm():.6g} > 1")
    for j, uj in enumerate(us):
        for k, uk in enumerate(us):
            if j != k:
                v = sa.phi(uj @ uk.star()).norm()
                if v > tol.absolute:
                    problems.append(f"Φ(u_{j} u_{k}*) has norm {v:.6g}")
    if problems:
        raise PreconditionViolated("; ".join(problems))
    lhs = sa.zero
    for u in us:
        lhs = lhs + sa.phi(a.star() @ u.star()) @ sa.phi(u @ a)
    rhs = sa.phi(a.star() @ a)
    return all(psd_leq(x, y, tol) for x, y in zip(lhs.blocks, rhs.blocks))


def property_report(sa: StructuredAlgebra, tol: Tolerance | None = None, seed: int = 0) -> PropertyReport:
    rep = PropertyReport()
    rep.add(check_diagonal(sa, tol, seed))
    rep.add(check_normal(sa, tol, seed=seed))
    rep.add(check_shiftable(sa, tol, seed=seed))
    rep.add(check_bistable(sa, "z", tol, seed=seed))
    rep.add(check_bistable(sa, "phi", tol, seed=seed))
    rep.add(check_binormal(sa, tol, seed=seed))
    rep.add(check_productive(sa, "z", tol, seed=seed))
    rep.add(check_productive(sa, "phi", tol, seed=seed))
    return rep


@dataclass
class Classification:
    level: str
    axioms: ValidationReport
    properties: PropertyReport | None = None
    sum_structured: bool = False
    faithful: FaithfulCheck | None = None
    compatible_sums: bool = False
    notes: list[str] = field(default_factory=list)


LEVELS = ("not-structured", "structured", "well-structured", "sum-structured", "faithfully-structured")


def classify(sa: StructuredAlgebra, tol: Tolerance | None = None, seed: int = 0) -> Classification:
    """Highest applicable class in the chain structured ⊂ well ⊂ sum ⊂ faithfully."""
    from .domination import sum_structure_report

    tol = tol or sa.tol
    ax = validate_axioms(sa, tol, seed)
    if not ax.ok:
        return Classification("not-structured", ax)
    props = property_report(sa, tol, seed)
    out = Classification("structured", ax, props)
    if not props.well_structured:
        return out
    out.level = "well-structured"
    summ = sum_structure_report(sa, tol, seed)
    out.sum_structured = summ.sum_structured
    out.compatible_sums = summ.compatible_sums
    out.notes.extend(summ.notes)
    out.faithful = check_faithful(sa, tol, seed)
    if not out.sum_structured:
        return out
    out.level = "sum-structured"
    if out.faithful.ok and out.compatible_sums:
        out.level = "faithfully-structured"
    elif not out.faithful.ok:
        out.notes.append(out.faithful.message)
    return out


def compare_expectations(sa: StructuredAlgebra, other_phi: np.ndarray, tol: Tolerance | None = None, seed: int = 0) -> dict:
    """Compare Φ with a second candidate expectation on the same (A, S, Z).

    Both must be productive with the same range for the comparison to say
    anything; the report gives the basis-wise difference.
    """
    tol = tol or sa.tol
    alt = StructuredAlgebra(sa.sizes, sa.s_patterns, sa.z_coords, other_phi, sa.basis, sa.name + "′", tol)
    p1 = check_productive(sa, "phi", tol, seed)
    p2 = check_productive(alt, "phi", tol, seed)
    same_range = _same_span(sa._phi_range, alt._phi_range)
    delta = sa.phi_matrix - alt.phi_matrix
    diff = max((sa.from_coords(delta[:, i]).norm() for i in range(sa.dim)), default=0.0)
    return {
        "productive_first": p1.ok,
        "productive_second": p2.ok,
        "same_range": bool(same_range),
        "max_difference": float(diff),
        "equal": bool(diff <= tol.absolute),
    }


# ------------------------------------------------------------------ examples


def _unit_vec(n: int, i: int, j: int) -> np.ndarray:
    v = np.zeros(n * n, dtype=complex)
    v[i * n + j] = 1.0
    return v


def cartan_pair(n: int = 2) -> StructuredAlgebra:
    """(M_n, monomial patterns, diagonal matrices, diagonal projection)."""
    from itertools import permutations

    patterns = []
    for perm in permutations(range(n)):
        patterns.append(np.array([_unit_vec(n, perm[i], i) for i in range(n)]))
    zs = [_unit_vec(n, i, i) for i in range(n)]
    phi = np.zeros((n * n, n * n), dtype=complex)
    for i in range(n):
        phi[i * n + i, i * n + i] = 1.0
    return StructuredAlgebra((n,), patterns, zs, phi, None, f"cartan(M{n})")


def unfaithful_example() -> StructuredAlgebra:
    """M2 ⊕ ℂ with the Cartan structure on M2 and Φ vanishing on the ℂ block.

    Axioms and the well-structured properties hold, but Φ is not faithful:
    the unit of the ℂ block has Φ(a*a) = 0.
    """
    amb = 5
    def vec(i: int, j: int) -> np.ndarray:
        v = np.zeros(amb, dtype=complex)
        v[i * 2 + j] = 1.0
        return v

    patterns = [np.array([vec(0, 0), vec(1, 1)]), np.array([vec(0, 1), vec(1, 0)])]
    zs = [vec(0, 0), vec(1, 1)]
    phi = np.zeros((amb, amb), dtype=complex)
    phi[0, 0] = phi[3, 3] = 1.0
    return StructuredAlgebra((2, 1), patterns, zs, phi, None, "M2⊕ℂ, Φ=diag⊕0")
