"""Sections of a finite Fell bundle and the structured C*-algebra they form.

A section stores one fiber matrix per arrow.  Convolution sums over
factorisations with the twist folded into the fiber product.  At finite
scale every section is continuous and compactly supported, so the reduced
algebra is the whole section space with the b-norm.

``BundleAlgebra`` turns a bundle into a ``StructuredAlgebra`` through the
left regular representation: for each unit x, a section acts on
⊕_{β ∈ Γx} B_β by a block matrix L^x.  Section coordinates are the A
coordinates, so converting between the two views is a gather/scatter.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from .bundle import FellBundle, validate_fell_bundle
from .groupoid import is_slice
from .numeric import DEFAULT_TOL, Tolerance, op_norm
from .structured import BlockElement, StructuredAlgebra

__all__ = [
    "BundleMismatch",
    "InvalidBundle",
    "NotSliceSupported",
    "Section",
    "convolve",
    "involute",
    "restrict",
    "expectation",
    "norm_inf",
    "norm_2",
    "norm_b",
    "norms",
    "inner_product",
    "is_slice_supported",
    "support",
    "regular_blocks",
    "slice_decomposition",
    "BundleAlgebra",
    "StructuredView",
    "extract_structured",
]


class BundleMismatch(ValueError):
    pass


class InvalidBundle(ValueError):
    pass


class NotSliceSupported(ValueError):
    pass


@dataclass(frozen=True)
class _Layout:
    offsets: tuple[int, ...]
    total: int


def _layout(fb: FellBundle) -> _Layout:
    cached = getattr(fb, "_layout_cache", None)
    if cached is not None:
        return cached
    offs = [0]
    for r, c in fb.shapes:
        offs.append(offs[-1] + r * c)
    lay = _Layout(tuple(offs), offs[-1])
    object.__setattr__(fb, "_layout_cache", lay)
    return lay


class Section:
    """A fiber-valued function on the arrows; ``@`` is convolution."""

    __slots__ = ("bundle", "values")

    def __init__(self, bundle: FellBundle, values: Iterable[np.ndarray]):
        self.bundle = bundle
        vals = tuple(np.asarray(v, dtype=complex) for v in values)
        if len(vals) != bundle.base.n:
            raise ValueError(f"expected {bundle.base.n} fiber values, got {len(vals)}")
        for a, v in enumerate(vals):
            if v.shape != bundle.shape(a):
                raise ValueError(f"value at arrow {a} has shape {v.shape}, expected {bundle.shape(a)}")
        self.values = vals

    # constructors

    @classmethod
    def zeros(cls, fb: FellBundle) -> "Section":
        return cls(fb, [fb.zero(a) for a in range(fb.base.n)])

    @classmethod
    def from_map(cls, fb: FellBundle, values: Mapping[int, object]) -> "Section":
        vals = [fb.zero(a) for a in range(fb.base.n)]
        for a, v in values.items():
            arr = np.asarray(v, dtype=complex)
            vals[a] = arr.reshape(fb.shape(a)) if arr.size == fb.fiber_dim(a) else arr
        return cls(fb, vals)

    @classmethod
    def indicator(cls, fb: FellBundle, arrows: Iterable[int], scale: complex = 1.0) -> "Section":
        """scale · I on each listed arrow (fibers must be square there)."""
        vals = {}
        for a in arrows:
            r, c = fb.shape(a)
            if r != c:
                raise ValueError(f"arrow {a} has a non-square fiber")
            vals[a] = scale * np.eye(r)
        return cls.from_map(fb, vals)

    @classmethod
    def from_vector(cls, fb: FellBundle, vec) -> "Section":
        lay = _layout(fb)
        vec = np.asarray(vec, dtype=complex)
        return cls(fb, [vec[lay.offsets[a] : lay.offsets[a + 1]].reshape(fb.shape(a)) for a in range(fb.base.n)])

    @classmethod
    def random(cls, fb: FellBundle, rng: np.random.Generator, arrows: Iterable[int] | None = None) -> "Section":
        keep = set(range(fb.base.n)) if arrows is None else set(arrows)
        vals = []
        for a in range(fb.base.n):
            shape = fb.shape(a)
            if a in keep:
                vals.append(rng.normal(size=shape) + 1j * rng.normal(size=shape))
            else:
                vals.append(np.zeros(shape, dtype=complex))
        return cls(fb, vals)

    def to_vector(self) -> np.ndarray:
        if not self.values:
            return np.zeros(0, dtype=complex)
        return np.concatenate([v.ravel() for v in self.values])

    # arithmetic

    def _check(self, other: "Section") -> None:
        if not isinstance(other, Section) or other.bundle != self.bundle:
            raise BundleMismatch("sections live over different bundles")

    def __add__(self, other: "Section") -> "Section":
        self._check(other)
        return Section(self.bundle, [x + y for x, y in zip(self.values, other.values)])

    def __sub__(self, other: "Section") -> "Section":
        self._check(other)
        return Section(self.bundle, [x - y for x, y in zip(self.values, other.values)])

    def __neg__(self) -> "Section":
        return Section(self.bundle, [-x for x in self.values])

    def __mul__(self, scalar) -> "Section":
        if isinstance(scalar, Section):
            raise TypeError("use @ for convolution")
        return Section(self.bundle, [scalar * x for x in self.values])

    __rmul__ = __mul__

    def __matmul__(self, other: "Section") -> "Section":
        return convolve(self, other)

    def star(self) -> "Section":
        return involute(self)

    def __getitem__(self, a: int) -> np.ndarray:
        return self.values[a]

    def __repr__(self) -> str:
        supp = sorted(support(self))
        return f"Section(support={supp})"


def convolve(a: Section, b: Section) -> Section:
    """(ab)(γ) = Σ_{γ=αβ} σ(α,β) a(α) b(β)."""
    a._check(b)
    fb = a.bundle
    out = [fb.zero(c) for c in range(fb.base.n)]
    sigma = fb.twist
    for (x, y), c in fb.base.product.items():
        ax, by = a.values[x], b.values[y]
        if not ax.any() or not by.any():
            continue
        out[c] = out[c] + sigma(x, y) * (ax @ by)
    return Section(fb, out)


def involute(a: Section) -> Section:
    """a*(γ) = a(γ⁻¹)* with the twisted fiber involution."""
    fb = a.bundle
    inv = fb.base.inverse
    return Section(fb, [fb.star(inv[g], a.values[inv[g]]) for g in range(fb.base.n)])


def restrict(a: Section, arrows: Iterable[int]) -> Section:
    keep = set(arrows)
    fb = a.bundle
    return Section(fb, [v if g in keep else fb.zero(g) for g, v in enumerate(a.values)])


def expectation(a: Section) -> Section:
    """Φ(a) = restriction to the unit space."""
    return restrict(a, a.bundle.base.units)


def support(a: Section, tol: Tolerance = DEFAULT_TOL) -> frozenset[int]:
    return frozenset(g for g, v in enumerate(a.values) if v.size and op_norm(v) > tol.inv_threshold)


def norm_inf(a: Section) -> float:
    return max((op_norm(v) for v in a.values), default=0.0)


def norm_2(a: Section) -> float:
    """max over units x of √‖Φ(a*a)(x)‖ = ‖column of a over Γx‖."""
    fb = a.bundle
    best = 0.0
    for x in fb.base.units:
        col = [a.values[g] for g in fb.base.star[x]]
        if col:
            best = max(best, op_norm(np.vstack(col)))
    return best


def regular_blocks(a: Section) -> dict[int, np.ndarray]:
    """L^x for each unit x: block (γ, β) = σ(γβ⁻¹, β) a(γβ⁻¹) over γ, β ∈ Γx."""
    fb = a.bundle
    g = fb.base
    out = {}
    for x in g.units:
        arrows = g.star[x]
        sizes = [fb.dims[g.range[b]] for b in arrows]
        offs = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        m = np.zeros((offs[-1], offs[-1]), dtype=complex)
        for j, beta in enumerate(arrows):
            binv = g.inverse[beta]
            for i, gam in enumerate(arrows):
                h = g.mul(gam, binv)
                m[offs[i] : offs[i + 1], offs[j] : offs[j + 1]] = fb.twist(h, beta) * a.values[h]
        out[x] = m
    return out


def norm_b(a: Section) -> float:
    """The reduced C*-norm: max over units of the left-regular block operator norm."""
    return max((op_norm(m) for m in regular_blocks(a).values()), default=0.0)


def norms(a: Section) -> tuple[float, float, float]:
    return norm_inf(a), norm_2(a), norm_b(a)


def inner_product(a: Section, b: Section) -> Section:
    """⟨a, b⟩ = Φ(a*b)."""
    a._check(b)
    return expectation(convolve(involute(a), b))


def is_slice_supported(a: Section, tol: Tolerance = DEFAULT_TOL) -> bool:
    return is_slice(a.bundle.base, support(a, tol))


def slice_decomposition(a: Section, tol: Tolerance = DEFAULT_TOL) -> list[Section]:
    """Slice-supported pieces summing to a: one piece per greedy slice cover of supp(a)."""
    g = a.bundle.base
    remaining = sorted(support(a, tol))
    pieces = []
    while remaining:
        chosen, rs, ss = [], set(), set()
        rest = []
        for e in remaining:
            if g.range[e] in rs or g.source[e] in ss:
                rest.append(e)
            else:
                chosen.append(e)
                rs.add(g.range[e])
                ss.add(g.source[e])
        pieces.append(restrict(a, chosen))
        remaining = rest
    return pieces


# ----------------------------------------------------------- structured view


class BundleAlgebra(StructuredAlgebra):
    """⟨ρ⟩_r: sections in the left regular representation.

    A = all sections, S = slice-supported sections (one pattern per maximal
    slice), Z = unit-supported sections with scalar values, Φ = restriction
    to the units.
    """

    def __init__(self, fb: FellBundle, tol: Tolerance = DEFAULT_TOL, name: str = ""):
        self.bundle = fb
        g = fb.base
        lay = _layout(fb)
        self.layout = lay
        units = list(g.units)
        self.unit_order = units
        sizes, scatter, gather_pos = [], [], np.zeros(lay.total, dtype=int)
        block_start = 0
        self._block_offsets = {}
        for x in units:
            arrows = g.star[x]
            bsz = [fb.dims[g.range[b]] for b in arrows]
            offs = dict(zip(arrows, np.concatenate([[0], np.cumsum(bsz)])[:-1].astype(int)))
            m = int(sum(bsz))
            self._block_offsets[x] = offs
            pos, idx, coef = [], [], []
            for beta in arrows:
                for gam in g.star[g.range[beta]]:
                    # γ with s(γ) = r(β), so γβ ∈ Γx
                    delta = g.mul(gam, beta)
                    r, c = fb.shape(gam)
                    sig = fb.twist(gam, beta)
                    base = lay.offsets[gam]
                    for i in range(r):
                        row = offs[delta] + i
                        for j in range(c):
                            pos.append(block_start + row * m + offs[beta] + j)
                            idx.append(base + i * c + j)
                            coef.append(sig)
            scatter.append((np.array(pos, dtype=int), np.array(idx, dtype=int), np.array(coef, dtype=complex)))
            for gam in arrows:
                # a(γ) sits in block (γ, x) of L^x with σ(γ, x) = 1
                r, c = fb.shape(gam)
                for i in range(r):
                    for j in range(c):
                        gather_pos[lay.offsets[gam] + i * c + j] = block_start + (offs[gam] + i) * m + offs[x] + j
            sizes.append(m)
            block_start += m * m
        self._scatter = scatter
        self._gather = gather_pos
        n = lay.total
        ambient = block_start
        basis = np.zeros((n, ambient), dtype=complex)
        for pos, idx, coef in scatter:
            basis[idx, pos] = coef
        slices = g.maximal_slices()
        self.slices = slices
        patterns = []
        for t in slices:
            rows = [np.eye(n)[k] for a in sorted(t) for k in range(lay.offsets[a], lay.offsets[a + 1])]
            patterns.append(np.array(rows, dtype=complex) if rows else np.zeros((0, n), dtype=complex))
        zs = []
        for x in units:
            z = np.zeros(n, dtype=complex)
            z[lay.offsets[x] : lay.offsets[x + 1]] = np.eye(fb.dims[x]).ravel()
            zs.append(z)
        phi = np.zeros((n, n), dtype=complex)
        for x in units:
            for k in range(lay.offsets[x], lay.offsets[x + 1]):
                phi[k, k] = 1.0
        self._unit_coords = np.concatenate([np.arange(lay.offsets[x], lay.offsets[x + 1]) for x in units])
        super().__init__(sizes, patterns, zs, phi, basis, name or f"⟨{fb.name or g.name}⟩", tol)

    # fast conversions

    def from_coords(self, c: np.ndarray) -> BlockElement:
        c = np.asarray(c, dtype=complex)
        flat = np.zeros(self.ambient_dim, dtype=complex)
        for pos, idx, coef in self._scatter:
            flat[pos] = coef * c[idx]
        blocks = [flat[self.offsets[i] : self.offsets[i + 1]].reshape(m, m) for i, m in enumerate(self.sizes)]
        out = BlockElement(self, blocks)
        out._coords = c
        return out

    def coords(self, x: BlockElement) -> np.ndarray:
        return self.ambient_vector(x)[self._gather]

    def stack_from_coords(self, c) -> list[np.ndarray]:
        c = np.atleast_2d(np.asarray(c, dtype=complex))
        flat = np.zeros((c.shape[0], self.ambient_dim), dtype=complex)
        for pos, idx, coef in self._scatter:
            flat[:, pos] = coef * c[:, idx]
        return [flat[:, self.offsets[i] : self.offsets[i + 1]].reshape(-1, m, m) for i, m in enumerate(self.sizes)]

    def stack_coords(self, blocks) -> np.ndarray:
        vec = np.concatenate([b.reshape(b.shape[0], -1) for b in blocks], axis=1)
        return vec[:, self._gather]

    def phi(self, x: BlockElement) -> BlockElement:
        c = np.zeros(self.dim, dtype=complex)
        c[self._unit_coords] = x.coords[self._unit_coords]
        return self.from_coords(c)

    def dist_phi_s(self, x: BlockElement) -> float:
        return (x - self.phi(x)).norm()

    def dist_s(self, x: BlockElement) -> tuple[float, int]:
        supp = self.support(x)
        if is_slice(self.bundle.base, supp):
            for i, t in enumerate(self.slices):
                if supp <= t:
                    return self._residual(x, self._pattern_bases[i]).norm(), i
        return super().dist_s(x)

    # bridges

    def encode(self, a: Section) -> BlockElement:
        if a.bundle != self.bundle:
            raise BundleMismatch("section lives over a different bundle")
        return self.from_coords(a.to_vector())

    def decode(self, x: BlockElement) -> Section:
        return Section.from_vector(self.bundle, x.coords)

    def lift(self, x) -> BlockElement:
        if isinstance(x, Section):
            return self.encode(x)
        return super().lift(x)

    def value(self, x: BlockElement, arrow: int) -> np.ndarray:
        lay = self.layout
        return x.coords[lay.offsets[arrow] : lay.offsets[arrow + 1]].reshape(self.bundle.shape(arrow))

    @cached_property
    def _shape_groups(self) -> list[tuple[np.ndarray, np.ndarray, tuple[int, int]]]:
        groups: dict[tuple[int, int], list[int]] = {}
        for a in range(self.bundle.base.n):
            groups.setdefault(self.bundle.shape(a), []).append(a)
        out = []
        offs = self.layout.offsets
        for shape, arrows in groups.items():
            idx = np.array([np.arange(offs[a], offs[a + 1]) for a in arrows], dtype=int)
            out.append((np.array(arrows, dtype=int), idx, shape))
        return out

    def fiber_norms(self, x: BlockElement) -> np.ndarray:
        """‖x(γ)‖ for every arrow γ."""
        out = np.zeros(self.bundle.base.n)
        c = x.coords
        for arrows, idx, shape in self._shape_groups:
            vals = c[idx].reshape(len(arrows), *shape)
            out[arrows] = np.linalg.svd(vals, compute_uv=False)[:, 0] if shape[0] and shape[1] else 0.0
        return out

    def support(self, x: BlockElement, tol: Tolerance | None = None) -> frozenset[int]:
        tol = tol or self.tol
        return frozenset(int(a) for a in np.flatnonzero(self.fiber_norms(x) > tol.inv_threshold))

    def indicator(self, arrows: Iterable[int], scale: complex = 1.0) -> BlockElement:
        return self.encode(Section.indicator(self.bundle, arrows, scale))

    @cached_property
    def unit_indicators(self) -> dict[int, BlockElement]:
        return {x: self.indicator([x]) for x in self.bundle.base.units}


StructuredView = BundleAlgebra


def extract_structured(fb: FellBundle, tol: Tolerance = DEFAULT_TOL) -> BundleAlgebra:
    rep = validate_fell_bundle(fb, tol)
    if not rep.ok:
        raise InvalidBundle("; ".join(rep.lines()))
    return BundleAlgebra(fb, tol)
