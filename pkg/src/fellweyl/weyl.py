"""Ultrafilters of the domination order and the Weyl bundle.

Points are represented two ways.  A :class:`FiniteFilter` is a maximal
proper filter of the domination order restricted to a finite test set; this
works for any structured algebra.  A :class:`GermPoint` is the set of
sections invertible at one arrow and only exists for bundle views.  For a
corical bundle view with the indicator test set the two agree, and the
checks below run on both.

The Weyl fibre at U is A/0_U where 0_U is the null space of the seminorm
a ↦ inf ‖Φ(as)b‖ over chains u <_s b inside U.  Every chain gives a linear
map a ↦ Φ(as)b; the chain of smallest rank is the canonical one and its
image holds the reduced representatives.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .bundle import FellBundle, coricality, validate_fell_bundle
from .domination import (
    DominationWitness,
    InvalidWitness,
    NotDominated,
    NotSliceSupported,
    are_compatible,
    dominates,
    interpolate,
    normalize,
)
from .groupoid import FiniteGroupoid, TwoCocycle, ValidationReport, is_slice, validate_groupoid
from .numeric import DEFAULT_TOL, Tolerance, is_invertible
from .sections import BundleAlgebra, Section, norm_b
from .structured import BlockElement, StructuredAlgebra

__all__ = [
    "TestSetTooLarge",
    "RepresentationMismatch",
    "NonComposable",
    "NotCorical",
    "NotWellStructured",
    "TestSet",
    "build_test_set",
    "indicator_test_set",
    "default_test_set",
    "FiniteFilter",
    "GermPoint",
    "enumerate_ultrafilters",
    "filter_product",
    "filter_inverse",
    "is_unit_filter",
    "prime_violations",
    "basic_open_violations",
    "UltrafilterGroupoid",
    "ultrafilter_groupoid",
    "WeylFiber",
    "WeylPair",
    "WeylBundle",
    "weyl_bundle",
    "weyl_seminorm",
    "weyl_fiber",
    "weyl_product",
    "weyl_core_membership",
    "weyl_representation",
    "representation_report",
    "chart",
    "chart_kind",
    "represent_section",
    "reconstructed_bundle",
    "validate_weyl_bundle",
    "RoundTripReport",
    "roundtrip",
]

DEFAULT_CAP = 24


class TestSetTooLarge(ValueError):
    pass


class RepresentationMismatch(ValueError):
    pass


class NonComposable(ValueError):
    pass


class NotCorical(ValueError):
    pass


class NotWellStructured(ValueError):
    pass


# ------------------------------------------------------------------ test sets


class TestSet:
    """Finite family of S elements with the domination relation precomputed.

    ``relation[i, j]`` is t_i < t_j; ``witnesses[(i, j)]`` the verified
    witness.  ``arrows[i]`` names the arrow when t_i is an indicator.
    """

    __test__ = False  # not a pytest class

    def __init__(
        self,
        sa: StructuredAlgebra,
        elements: Sequence[BlockElement],
        labels: Sequence[str] | None = None,
        arrows: Sequence[int | None] | None = None,
        tol: Tolerance | None = None,
        cap: int = DEFAULT_CAP,
    ):
        if len(elements) > cap:
            raise TestSetTooLarge(f"{len(elements)} elements exceed the cap of {cap}")
        self.sa = sa
        self.tol = tol or sa.tol
        self.cap = cap
        self.elements = tuple(sa.lift(x) for x in elements)
        self.labels = tuple(labels) if labels is not None else tuple(f"t{i}" for i in range(len(elements)))
        self.arrows = tuple(arrows) if arrows is not None else (None,) * len(elements)
        self.notes: list[str] = []
        k = len(self.elements)
        self.relation = np.zeros((k, k), dtype=bool)
        self.witnesses: dict[tuple[int, int], DominationWitness] = {}
        for i, a in enumerate(self.elements):
            for j, b in enumerate(self.elements):
                v = dominates(sa, a, b, self.tol)
                if v.dominated:
                    self.relation[i, j] = True
                    self.witnesses[(i, j)] = v.witness
        self._coords = np.array([x.coords for x in self.elements]) if k else np.zeros((0, sa.dim), complex)
        self._norms2 = np.einsum("ij,ij->i", self._coords.conj(), self._coords).real

    def __len__(self) -> int:
        return len(self.elements)

    def up(self, i: int) -> frozenset[int]:
        return frozenset(int(j) for j in np.flatnonzero(self.relation[i]))

    def lookup(self, x: BlockElement) -> int:
        """Index k with x a nonzero multiple of t_k, or -1.

        Domination is insensitive to nonzero scalars on either side, so such
        an x has the same up-set as t_k.
        """
        if not len(self):
            return -1
        c = x.coords
        scale = float(np.linalg.norm(c))
        if scale <= self.tol.absolute:
            return -1
        lam = (self._coords.conj() @ c) / np.where(self._norms2 > 0, self._norms2, 1.0)
        res = np.linalg.norm(c[None, :] - lam[:, None] * self._coords, axis=1)
        thr = 10 * (self.tol.absolute + self.tol.relative * scale)
        ok = (res <= thr) & (np.abs(lam) > self.tol.absolute) & (self._norms2 > 0)
        if not ok.any():
            return -1
        return int(np.argmin(np.where(ok, res, np.inf)))

    def up_closure(self, x: BlockElement) -> frozenset[int]:
        """{j : x < t_j}."""
        k = self.lookup(x)
        if k >= 0:
            return self.up(k)
        return frozenset(j for j, t in enumerate(self.elements) if dominates(self.sa, x, t, self.tol).dominated)


def build_test_set(
    sa: StructuredAlgebra,
    elements: Sequence[BlockElement],
    labels=None,
    arrows=None,
    tol: Tolerance | None = None,
    cap: int = DEFAULT_CAP,
    close: bool = True,
) -> TestSet:
    """Test set, closed under canonical interpolants while the cap allows."""
    ts = TestSet(sa, elements, labels, arrows, tol, cap)
    if not close:
        ts.notes.append("not closed under interpolants")
        return ts
    added: list[BlockElement] = []
    hit_cap = False
    for (i, j), w in sorted(ts.witnesses.items()):
        try:
            c, _ = interpolate(sa, w, ts.tol)
        except (InvalidWitness, NotDominated, NotSliceSupported):
            continue
        if c.norm() <= ts.tol.absolute or ts.lookup(c) >= 0:
            continue
        if any(_proportional(c, y, ts.tol) for y in added):
            continue
        if len(ts) + len(added) >= cap:
            hit_cap = True
            break
        added.append(c)
    if not added:
        ts.notes.append("closed under canonical interpolants")
        return ts
    out = TestSet(
        sa,
        list(ts.elements) + added,
        list(ts.labels) + [f"interp{k}" for k in range(len(added))],
        list(ts.arrows) + [None] * len(added),
        ts.tol,
        cap,
    )
    out.notes.append(f"added {len(added)} interpolants")
    if hit_cap:
        out.notes.append(f"interpolant closure stopped at the cap of {cap}")
    return out


def _proportional(x: BlockElement, y: BlockElement, tol: Tolerance) -> bool:
    cx, cy = x.coords, y.coords
    ny = np.vdot(cy, cy).real
    if ny == 0:
        return False
    lam = np.vdot(cy, cx) / ny
    return bool(np.linalg.norm(cx - lam * cy) <= 10 * (tol.absolute + tol.relative * np.linalg.norm(cx)))


def indicator_test_set(
    ba: BundleAlgebra, tol: Tolerance | None = None, slices: bool = False, cap: int = DEFAULT_CAP, close: bool = True
) -> TestSet:
    """{1_γ} for every arrow, optionally followed by maximal-slice indicators up to the cap."""
    g = ba.bundle.base
    if g.n > cap:
        raise TestSetTooLarge(f"{g.n} indicators exceed the cap of {cap}")
    elems = [ba.indicator([a]) for a in range(g.n)]
    labels = [f"1_{{{a}}}" for a in range(g.n)]
    arrows: list[int | None] = list(range(g.n))
    if slices:
        for t in ba.slices:
            if len(t) < 2 or len(elems) >= cap:
                continue
            elems.append(ba.indicator(sorted(t)))
            labels.append("1_{" + ",".join(map(str, sorted(t))) + "}")
            arrows.append(None)
    return build_test_set(ba, elems, labels, arrows, tol, cap, close)


def default_test_set(sa: StructuredAlgebra, tol: Tolerance | None = None, cap: int = DEFAULT_CAP) -> TestSet:
    """Indicators for bundle views; pattern basis elements and pattern sums otherwise."""
    if isinstance(sa, BundleAlgebra):
        return indicator_test_set(sa, tol, cap=cap)
    tol = tol or sa.tol
    elems: list[BlockElement] = []
    labels: list[str] = []

    def push(x: BlockElement, label: str) -> None:
        if x.norm() > tol.absolute and not any(_proportional(x, y, tol) for y in elems):
            elems.append(x)
            labels.append(label)

    for i, _ in enumerate(sa.s_patterns):
        for k, x in enumerate(sa.pattern_elements(i)):
            push(x, f"p{i}[{k}]")
    for i, _ in enumerate(sa.s_patterns):
        xs = sa.pattern_elements(i)
        if len(xs) > 1:
            total = xs[0]
            for x in xs[1:]:
                total = total + x
            push(total, f"Σp{i}")
    if len(elems) > cap:
        raise TestSetTooLarge(f"{len(elems)} pattern elements exceed the cap of {cap}")
    return build_test_set(sa, elems, labels, None, tol, cap)


# -------------------------------------------------------------- ultrafilters


@dataclass(frozen=True)
class FiniteFilter:
    test_set: TestSet = field(compare=False, hash=False, repr=False)
    members: frozenset
    generator: int = -1

    def contains(self, x: BlockElement) -> bool:
        """x ∈ U ⟺ some member is dominated by x; the generator suffices."""
        ts = self.test_set
        if x.norm() <= ts.tol.absolute:
            return False
        k = ts.lookup(x)
        if k >= 0:
            return k in self.members
        cands = [self.generator] if self.generator >= 0 else sorted(self.members)
        return any(dominates(ts.sa, ts.elements[m], x, ts.tol).dominated for m in cands)

    @property
    def labels(self) -> list[str]:
        return [self.test_set.labels[i] for i in sorted(self.members)]


@dataclass(frozen=True)
class GermPoint:
    """S_γ = {a ∈ S : a(γ) invertible}."""

    algebra: BundleAlgebra = field(compare=False, hash=False, repr=False)
    gamma: int

    def contains(self, x: BlockElement) -> bool:
        return is_invertible(self.algebra.value(x, self.gamma), self.algebra.tol)


def _generator_of(ts: TestSet, members: frozenset) -> int:
    for k in sorted(members):
        if ts.relation[k, k] and ts.up(k) == members:
            return k
    return -1


def enumerate_ultrafilters(ts: TestSet, tol: Tolerance | None = None) -> list[FiniteFilter]:
    """Maximal proper filters of (test set, <).

    In a finite set every filter is c^< for some c < c: a down-directed finite
    set has a member below all members, and following that chain downward
    must cycle, which with transitivity gives such a c.  So the candidates
    are the up-sets of self-dominated elements; proper means no member is 0.
    """
    tol = tol or ts.tol
    cands: dict[frozenset, int] = {}
    for c in range(len(ts)):
        if not ts.relation[c, c]:
            continue
        members = ts.up(c)
        if any(ts.elements[m].norm() <= tol.absolute for m in members):
            continue
        cands.setdefault(members, c)
    sets = list(cands)
    maximal = [m for m in sets if not any(m < other for other in sets)]
    maximal.sort(key=lambda m: (cands[m], sorted(m)))
    return [FiniteFilter(ts, m, cands[m]) for m in maximal]


def filter_product(u, v, tol: Tolerance | None = None):
    """(UV)^< or None when 0 ∈ UV."""
    if isinstance(u, GermPoint) and isinstance(v, GermPoint):
        if u.algebra is not v.algebra:
            raise RepresentationMismatch("germs over different algebras")
        gam = u.algebra.bundle.base.mul(u.gamma, v.gamma)
        return None if gam is None else GermPoint(u.algebra, gam)
    if not (isinstance(u, FiniteFilter) and isinstance(v, FiniteFilter)) or u.test_set is not v.test_set:
        raise RepresentationMismatch("filters must share one test set")
    ts = u.test_set
    tol = tol or ts.tol
    for i in u.members:
        for j in v.members:
            if (ts.elements[i] @ ts.elements[j]).norm() <= tol.absolute:
                return None
    if u.generator >= 0 and v.generator >= 0:
        # c_U c_V < uv for all members, so its up-set is the whole closure
        members = ts.up_closure(ts.elements[u.generator] @ ts.elements[v.generator])
    else:
        members = frozenset()
        for i in u.members:
            for j in v.members:
                members |= ts.up_closure(ts.elements[i] @ ts.elements[j])
    return FiniteFilter(ts, members, _generator_of(ts, members))


def filter_inverse(u):
    """U* = {u* : u ∈ U}, up-closed."""
    if isinstance(u, GermPoint):
        return GermPoint(u.algebra, u.algebra.bundle.base.inverse[u.gamma])
    ts = u.test_set
    if u.generator >= 0:
        members = ts.up_closure(ts.elements[u.generator].star())
    else:
        members = frozenset()
        for i in u.members:
            members |= ts.up_closure(ts.elements[i].star())
    return FiniteFilter(ts, members, _generator_of(ts, members))


def is_unit_filter(u, tol: Tolerance | None = None) -> bool:
    """Φ[U] ⊆ U."""
    if isinstance(u, GermPoint):
        return u.algebra.bundle.base.is_unit(u.gamma)
    ts = u.test_set
    return all(u.contains(ts.sa.phi(ts.elements[m])) for m in u.members)


def prime_violations(u: FiniteFilter) -> list[tuple[int, int]]:
    """Pairs (i, j) with t_i + t_j ∈ U but neither t_i^< nor t_j^< inside U."""
    ts = u.test_set
    out = []
    for i in range(len(ts)):
        for j in range(i, len(ts)):
            x = ts.elements[i] + ts.elements[j]
            if not u.contains(x):
                continue
            if not (ts.up(i) <= u.members or ts.up(j) <= u.members):
                out.append((i, j))
    return out


@dataclass
class UltrafilterGroupoid:
    test_set: TestSet
    filters: list[FiniteFilter]
    table: dict[tuple[int, int], int]
    inverse: list[int]
    units: list[int]
    groupoid: FiniteGroupoid | None
    report: ValidationReport

    @property
    def ok(self) -> bool:
        return self.groupoid is not None and self.report.ok

    def index(self, f: FiniteFilter) -> int:
        for k, g in enumerate(self.filters):
            if g.members == f.members:
                return k
        return -1

    def mul(self, i: int, j: int) -> int | None:
        return self.table.get((i, j))


def ultrafilter_groupoid(ts: TestSet, tol: Tolerance | None = None) -> UltrafilterGroupoid:
    """Enumerate the ultrafilters and assemble their groupoid, reporting any law that fails."""
    tol = tol or ts.tol
    filters = enumerate_ultrafilters(ts, tol)
    rep = ValidationReport("ultrafilter groupoid")
    index = {f.members: k for k, f in enumerate(filters)}
    n = len(filters)
    table: dict[tuple[int, int], int] = {}
    for i, fi in enumerate(filters):
        for j, fj in enumerate(filters):
            p = filter_product(fi, fj, tol)
            if p is None:
                continue
            k = index.get(p.members)
            if k is None:
                rep.add("closure", (i, j), f"product filter {sorted(p.members)} is not an enumerated ultrafilter")
                continue
            table[(i, j)] = k
    inverse = []
    for i, f in enumerate(filters):
        k = index.get(filter_inverse(f).members)
        if k is None:
            rep.add("inverse", (i,), "inverse filter is not an enumerated ultrafilter")
        inverse.append(-1 if k is None else k)
    units = [i for i, f in enumerate(filters) if is_unit_filter(f, tol)]
    source = [table.get((inverse[i], i), -1) if inverse[i] >= 0 else -1 for i in range(n)]
    rng_ = [table.get((i, inverse[i]), -1) if inverse[i] >= 0 else -1 for i in range(n)]
    for i in range(n):
        if source[i] not in units or rng_[i] not in units:
            rep.add("unit_map", (i,), "U*U or UU* is not a unit filter")
    if not rep.ok:
        return UltrafilterGroupoid(ts, filters, table, inverse, units, None, rep)
    g = FiniteGroupoid.from_triples(
        n, units, source, rng_, inverse, [(a, b, c) for (a, b), c in table.items()], name="ultrafilters"
    )
    rep.extend(validate_groupoid(g))
    for i in range(n):
        ii = inverse[i]
        if table.get((table.get((i, ii), -1), i)) != i:
            rep.add("UU*U", (i,), "U·U*·U ≠ U")
    return UltrafilterGroupoid(ts, filters, table, inverse, units, g, rep)


def basic_open_violations(ug: UltrafilterGroupoid) -> list[str]:
    """a^> ⊆ b^> ⟺ 𝒰_a ⊆ 𝒰_b, and 𝒰_a ∪ 𝒰_b a slice ⟺ a^> ∼ b^>, over the test set."""
    ts = ug.test_set
    k = len(ts)
    lower = [frozenset(int(i) for i in np.flatnonzero(ts.relation[:, j])) for j in range(k)]
    holders = [frozenset(u for u, f in enumerate(ug.filters) if j in f.members) for j in range(k)]
    out = []
    compat: dict[tuple[int, int], bool] = {}

    def comp(i: int, j: int) -> bool:
        key = (min(i, j), max(i, j))
        if key not in compat:
            compat[key] = are_compatible(ts.sa, ts.elements[i], ts.elements[j], ts.tol)
        return compat[key]

    for a in range(k):
        for b in range(k):
            if (lower[a] <= lower[b]) != (holders[a] <= holders[b]):
                out.append(f"up-set inclusion and ultrafilter-set inclusion disagree for ({ts.labels[a]}, {ts.labels[b]})")
            if ug.groupoid is None:
                continue
            union = holders[a] | holders[b]
            sl = is_slice(ug.groupoid, union)
            cm = all(comp(i, j) for i in lower[a] for j in lower[b])
            if sl != cm:
                out.append(f"slice test and compatibility disagree for ({ts.labels[a]}, {ts.labels[b]})")
    return out


# -------------------------------------------------------------------- Weyl


@dataclass
class _Chain:
    lower: int
    upper: int
    s: BlockElement
    b: BlockElement
    matrix: np.ndarray  # coords a ↦ coords Φ(as)b
    rank: int


@dataclass
class WeylFiber:
    index: int
    dim: int
    representatives: np.ndarray  # columns: coords spanning the reduced representatives
    kernel: np.ndarray  # columns: coords spanning 0_U
    stable: bool
    chain: int


@dataclass
class WeylPair:
    bundle: "WeylBundle"
    rep: BlockElement
    filt: int

    def norm(self) -> float:
        return self.bundle.seminorm(self.rep, self.filt)

    def star(self) -> "WeylPair":
        return WeylPair(self.bundle, self.rep.star(), self.bundle.ugroupoid.inverse[self.filt])

    def reduced(self) -> "WeylPair":
        return WeylPair(self.bundle, self.bundle.reduce(self.rep, self.filt), self.filt)

    def distance(self, other: "WeylPair") -> float:
        if self.filt != other.filt:
            return math.inf
        return self.bundle.seminorm(self.rep - other.rep, self.filt)


def _rank(sv: np.ndarray, thr: float) -> int:
    return int(np.sum(sv > thr))


class WeylBundle:
    """Fibres, chains and products of the Weyl bundle over enumerated ultrafilters."""

    def __init__(self, sa: StructuredAlgebra, ts: TestSet, tol: Tolerance | None = None, max_chains: int = 8):
        self.sa = sa
        self.tol = tol or sa.tol
        self.test_set = ts
        self.ugroupoid = ultrafilter_groupoid(ts, self.tol)
        self.notes: list[str] = list(ts.notes)
        self.chains: list[list[_Chain]] = []
        self.fibers: list[WeylFiber] = []
        basis = sa.stack_from_coords(np.eye(sa.dim, dtype=complex))
        for u, f in enumerate(self.ugroupoid.filters):
            chains = self._chains_for(f, basis, max_chains)
            if not chains:
                raise InvalidWitness(f"no normalized chain inside ultrafilter {u}")
            self.chains.append(chains)
            self.fibers.append(self._fiber(u, chains))

    # chains

    def _chain_matrix(self, basis: list[np.ndarray], s: BlockElement, b: BlockElement) -> np.ndarray:
        sa = self.sa
        as_ = sa.stack_coords([e @ sb for e, sb in zip(basis, s.blocks)])
        phi = as_ @ sa.phi_matrix.T
        blocks = sa.stack_from_coords(phi)
        out = sa.stack_coords([x @ bb for x, bb in zip(blocks, b.blocks)])
        return out.T

    def _chains_for(self, f: FiniteFilter, basis, max_chains: int) -> list[_Chain]:
        ts = self.test_set
        gen = f.generator
        pairs = [(i, j) for i in sorted(f.members) for j in sorted(f.members) if ts.relation[i, j]]
        # chains starting at the generator first: they are the most refined
        pairs.sort(key=lambda p: (p[0] != gen, p[1] != gen, p))
        out = []
        for i, j in pairs[:max_chains]:
            w = ts.witnesses[(i, j)]
            try:
                w = normalize(self.sa, w, self.tol)
            except InvalidWitness:
                self.notes.append(f"chain ({ts.labels[i]}, {ts.labels[j]}) kept unnormalized")
            m = self._chain_matrix(basis, w.s, w.b)
            sv = np.linalg.svd(m, compute_uv=False)
            out.append(_Chain(i, j, w.s, w.b, m, _rank(sv, self._rank_threshold(sv))))
        return out

    def _rank_threshold(self, sv: np.ndarray) -> float:
        top = float(sv[0]) if sv.size else 0.0
        return self.tol.absolute + self.tol.relative * top

    def _fiber(self, u: int, chains: list[_Chain]) -> WeylFiber:
        k = min(range(len(chains)), key=lambda c: (chains[c].rank, c))
        m = chains[k].matrix
        uu, sv, vh = np.linalg.svd(m)
        thr = self._rank_threshold(sv)
        r = _rank(sv, thr)
        # a rank that moves when the threshold shrinks sits on the tolerance boundary
        stable = r == _rank(sv, thr / 10)
        if not stable:
            self.notes.append(f"fibre {u}: rank unstable at the tolerance boundary")
        return WeylFiber(u, r, uu[:, :r], vh[r:].conj().T, stable, k)

    # seminorm and representatives

    def chain_images(self, a: BlockElement, u: int) -> list[BlockElement]:
        c = a.coords
        return [self.sa.from_coords(ch.matrix @ c) for ch in self.chains[u]]

    def seminorm(self, a: BlockElement, u: int) -> float:
        """min ‖Φ(as)b‖ over the chain family of U (an upper bound for the infimum)."""
        a = self.sa.lift(a)
        return min(x.norm() for x in self.chain_images(a, u))

    def reduce(self, a: BlockElement, u: int) -> BlockElement:
        """Canonical reduced representative Φ(as)b ∈ a_U ∩ U^>."""
        ch = self.chains[u][self.fibers[u].chain]
        return self.sa.from_coords(ch.matrix @ self.sa.lift(a).coords)

    def reduce_coords(self, c: np.ndarray, u: int) -> np.ndarray:
        return self.chains[u][self.fibers[u].chain].matrix @ c

    def pair(self, a, u: int) -> WeylPair:
        return WeylPair(self, self.sa.lift(a), u)

    @property
    def n(self) -> int:
        return len(self.ugroupoid.filters)

    # germ bridge (bundle views with indicator test sets)

    @cached_property
    def germ_of(self) -> list[int | None]:
        """Arrow γ with 1_γ in the filter, when exactly one exists."""
        ts = self.test_set
        out: list[int | None] = []
        for f in self.ugroupoid.filters:
            arrows = {ts.arrows[m] for m in f.members if ts.arrows[m] is not None}
            out.append(arrows.pop() if len(arrows) == 1 else None)
        return out

    @cached_property
    def filter_of(self) -> dict[int, int]:
        return {g: u for u, g in enumerate(self.germ_of) if g is not None}


def weyl_bundle(
    sa: StructuredAlgebra, test_set: TestSet | None = None, tol: Tolerance | None = None, cap: int = DEFAULT_CAP
) -> WeylBundle:
    tol = tol or sa.tol
    ts = test_set or default_test_set(sa, tol, cap)
    return WeylBundle(sa, ts, tol)


def _resolve(wb: WeylBundle, u) -> int:
    if isinstance(u, (int, np.integer)):
        return int(u)
    if isinstance(u, FiniteFilter):
        k = wb.ugroupoid.index(u)
        if k < 0:
            raise RepresentationMismatch("filter is not one of the enumerated ultrafilters")
        return k
    if isinstance(u, GermPoint):
        if u.gamma not in wb.filter_of:
            raise RepresentationMismatch(f"no enumerated ultrafilter for the germ at {u.gamma}")
        return wb.filter_of[u.gamma]
    raise RepresentationMismatch(f"unsupported point {u!r}")


def weyl_seminorm(wb: WeylBundle, a, u) -> float:
    """‖a‖_U.  At a germ the witness value is cross-checked against ‖a(γ)‖."""
    a = wb.sa.lift(a)
    k = _resolve(wb, u)
    val = wb.seminorm(a, k)
    if isinstance(u, GermPoint):
        germ = float(np.linalg.norm(wb.sa.value(a, u.gamma), 2)) if a.norm() else 0.0
        if abs(germ - val) > wb.tol.absolute + wb.tol.relative * max(1.0, germ):
            raise RepresentationMismatch(f"germ value {germ:.6g} and witness value {val:.6g} disagree")
        return germ
    return val


def weyl_fiber(wb: WeylBundle, u) -> WeylFiber:
    return wb.fibers[_resolve(wb, u)]


def weyl_product(p: WeylPair, q: WeylPair) -> WeylPair:
    """[a,U][b,V] = [R_U(a) R_V(b), UV]."""
    wb = p.bundle
    w = wb.ugroupoid.mul(p.filt, q.filt)
    if w is None:
        raise NonComposable(f"ultrafilters {p.filt} and {q.filt} do not compose")
    return WeylPair(wb, wb.reduce(p.rep, p.filt) @ wb.reduce(q.rep, q.filt), w)


def weyl_core_membership(p: WeylPair) -> bool:
    """[a,U] is in the core iff a reduced representative lies in U."""
    wb = p.bundle
    if p.norm() <= wb.tol.absolute:
        return False
    return wb.ugroupoid.filters[p.filt].contains(wb.reduce(p.rep, p.filt))


def weyl_representation(wb: WeylBundle, a) -> list[WeylPair]:
    """â(U) = [a, U] for every enumerated U, as reduced pairs."""
    a = wb.sa.lift(a)
    return [WeylPair(wb, wb.reduce(a, u), u) for u in range(wb.n)]


# ----------------------------------------------------------- bundle charts


def chart_kind(wb: WeylBundle) -> str | None:
    """``"germ"`` for bundle views, ``"line"`` when every fibre is one-dimensional."""
    if isinstance(wb.sa, BundleAlgebra) and wb.n and all(g is not None for g in wb.germ_of):
        return "germ"
    if wb.n and all(f.dim == 1 for f in wb.fibers):
        return "line"
    return None


def chart(wb: WeylBundle, x: BlockElement, u: int) -> np.ndarray:
    """Fibre chart at U: [a, U_γ] ↦ a(γ) on bundle views, a scalar coordinate on line fibres."""
    kind = chart_kind(wb)
    if kind == "germ":
        return wb.sa.value(x, wb.germ_of[u])
    if kind == "line":
        v = wb.fibers[u].representatives[:, 0]
        scale = wb.sa.from_coords(v).norm()
        return np.array([[np.vdot(v, wb.reduce_coords(x.coords, u)) * scale]])
    raise RepresentationMismatch("no fibre charts: fibres are neither germ-indexed nor one-dimensional")


def _chart_units(wb: WeylBundle) -> list[BlockElement]:
    """Per fibre an element whose chart is the identity matrix."""
    if chart_kind(wb) == "germ":
        return [wb.reduce(wb.sa.indicator([wb.germ_of[u]]), u) for u in range(wb.n)]
    out = []
    for u in range(wb.n):
        v = wb.fibers[u].representatives[:, 0]
        out.append(wb.sa.from_coords(v / chart(wb, wb.sa.from_coords(v), u)[0, 0]))
    return out


def reconstructed_bundle(wb: WeylBundle) -> FellBundle:
    """The Weyl bundle as a matrix bundle over the ultrafilter groupoid.

    Fibre dimensions come from the unit fibre ranks; the twist is read off
    Weyl products of chart identities.
    """
    ug = wb.ugroupoid
    if ug.groupoid is None:
        raise RepresentationMismatch("ultrafilter groupoid failed validation")
    if chart_kind(wb) is None:
        raise RepresentationMismatch("reconstruction needs fibre charts")
    dims = {}
    for u in ug.units:
        d = math.isqrt(wb.fibers[u].dim)
        if d * d != wb.fibers[u].dim:
            raise RepresentationMismatch(f"unit fibre {u} has non-square dimension {wb.fibers[u].dim}")
        dims[u] = d
    ind = _chart_units(wb)
    entries = {}
    for (u, v), w in ug.table.items():
        x = chart(wb, wb.reduce(ind[u], u) @ wb.reduce(ind[v], v), w)
        y = chart(wb, ind[u], u) @ chart(wb, ind[v], v)
        sig = np.vdot(y, x) / np.vdot(y, y)
        if abs(sig - 1) > 1e-12:
            entries[(u, v)] = complex(sig)
    return FellBundle(ug.groupoid, dims, TwoCocycle(ug.groupoid, entries), "weyl")


def represent_section(wb: WeylBundle, fb: FellBundle, a) -> Section:
    """â as a section of the reconstructed bundle ``fb``."""
    a = wb.sa.lift(a)
    return Section.from_map(fb, {u: chart(wb, a, u) for u in range(wb.n)})


# ---------------------------------------------------------------- reports


@dataclass
class CheckResult:
    name: str
    ok: bool
    residual: float = 0.0
    detail: str = ""


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _s_sample(sa: StructuredAlgebra, rng: np.random.Generator, terms: int = 2) -> BlockElement:
    """Random sum of pattern elements, so a sample from C*(S^>) at finite scale."""
    if not sa.s_patterns:
        return sa.zero
    x = sa.zero
    for _ in range(terms):
        x = x + sa.random_in_pattern(rng, int(rng.integers(len(sa.s_patterns))))
    return x


def validate_weyl_bundle(wb: WeylBundle, samples: int = 4, seed: int = 0) -> list[CheckResult]:
    """Fell-bundle identities on Weyl pairs: C*-identity, submultiplicativity,
    associativity, involution, plus a core element in every fibre."""
    sa, ug, tol = wb.sa, wb.ugroupoid, wb.tol
    rng = _rng(seed)
    out: list[CheckResult] = []
    res = {"c*-identity": 0.0, "submultiplicative": 0.0, "associative": 0.0, "involution": 0.0}
    for _ in range(samples):
        a, b, c = (sa.random_element(rng) for _ in range(3))
        for u in range(wb.n):
            p = wb.pair(a, u)
            na = p.norm()
            ps = weyl_product(p.star(), p)
            res["c*-identity"] = max(res["c*-identity"], abs(ps.norm() - na * na) / max(1.0, na * na))
        for (u, v), w in ug.table.items():
            p, q = wb.pair(a, u), wb.pair(b, v)
            pq = weyl_product(p, q)
            res["submultiplicative"] = max(res["submultiplicative"], pq.norm() - p.norm() * q.norm())
            pqs = pq.star()
            qsps = weyl_product(q.star(), p.star())
            res["involution"] = max(res["involution"], pqs.distance(qsps))
        for (u, v), uv in list(ug.table.items())[: 4 * wb.n]:
            for t in range(wb.n):
                if (v, t) not in ug.table:
                    continue
                p, q, r = wb.pair(a, u), wb.pair(b, v), wb.pair(c, t)
                left = weyl_product(weyl_product(p, q), r)
                right = weyl_product(p, weyl_product(q, r))
                res["associative"] = max(res["associative"], left.distance(right))
    scale = tol.absolute * 100 + tol.relative
    for name, val in res.items():
        out.append(CheckResult(name, val <= max(scale, 1e-8), float(max(val, 0.0))))
    missing = [
        u for u, f in enumerate(ug.filters)
        if f.generator < 0 or not weyl_core_membership(wb.pair(f.test_set.elements[f.generator], u))
    ]
    out.append(CheckResult("core", not missing, 0.0, f"fibres without a core element: {missing}" if missing else ""))
    return out


@dataclass
class RepresentationReport:
    checks: list[CheckResult]
    injective: bool
    kernel_dim: int

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        return next(c for c in self.checks if c.name == name)


def representation_report(
    wb: WeylBundle, samples: int = 8, seed: int = 0, mult_tol: float = 1e-8, phi_tol: float = 1e-9, iso_tol: float = 1e-8
) -> RepresentationReport:
    """Multiplicativity on C*(S^>), Φ-compatibility, contractivity and isometry of a ↦ â."""
    sa, ug = wb.sa, wb.ugroupoid
    rng = _rng(seed)
    mult = phi = contract = 0.0
    iso = 0.0
    rec = reconstructed_bundle(wb) if ug.groupoid is not None and chart_kind(wb) else None
    for _ in range(samples):
        a, b = _s_sample(sa, rng), _s_sample(sa, rng)
        ab = a @ b
        ra = [wb.reduce(a, u) for u in range(wb.n)]
        rb = [wb.reduce(b, u) for u in range(wb.n)]
        conv = [sa.zero for _ in range(wb.n)]
        for (u, v), w in ug.table.items():
            conv[w] = conv[w] + ra[u] @ rb[v]
        for w in range(wb.n):
            mult = max(mult, wb.seminorm(ab - conv[w], w) / max(1.0, a.norm() * b.norm()))
        x = sa.random_element(rng)
        px = sa.phi(x)
        for u in range(wb.n):
            d = wb.seminorm(px - x, u) if u in ug.units else wb.seminorm(px, u)
            phi = max(phi, d / max(1.0, x.norm()))
            contract = max(contract, wb.seminorm(x, u) - x.norm())
        if rec is not None:
            nx = x.norm()
            iso = max(iso, abs(norm_b(represent_section(wb, rec, x)) - nx) / max(1.0, nx))
    stack = np.vstack([wb.chains[u][wb.fibers[u].chain].matrix for u in range(wb.n)]) if wb.n else np.zeros((0, sa.dim))
    _, sv, vh = np.linalg.svd(stack) if stack.size else (None, np.zeros(0), np.eye(sa.dim))
    rank = int(np.sum(sv > wb.tol.absolute + wb.tol.relative * (sv[0] if sv.size else 0)))
    kernel_dim = sa.dim - rank
    # a kernel element has â = 0, so it is as far from isometric as its norm
    for z in vh[rank:]:
        iso = max(iso, sa.from_coords(z.conj()).norm())
    checks = [
        CheckResult("multiplicative", mult <= mult_tol, mult),
        CheckResult("phi-preserving", phi <= phi_tol, phi),
        CheckResult("contractive", contract <= iso_tol, max(contract, 0.0)),
        CheckResult("isometric", iso <= iso_tol, iso, f"kernel dimension {kernel_dim}"),
    ]
    return RepresentationReport(checks, kernel_dim == 0, kernel_dim)


@dataclass
class RoundTripReport:
    checks: list[CheckResult]
    n_arrows: int
    n_ultrafilters: int
    fiber_dims: dict[int, int]
    reconstructed: FellBundle | None
    timings: dict[str, float]
    notes: list[str]
    tolerance: float

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def max_residual(self) -> float:
        return max((c.residual for c in self.checks), default=0.0)

    def __getitem__(self, name: str) -> CheckResult:
        return next(c for c in self.checks if c.name == name)

    def to_dict(self) -> dict:
        return {
            "pass": self.ok,
            "arrows": self.n_arrows,
            "ultrafilters": self.n_ultrafilters,
            "fiber_dims": {str(k): v for k, v in sorted(self.fiber_dims.items())},
            "max_residual": self.max_residual,
            "checks": [
                {"name": c.name, "pass": c.ok, "residual": c.residual, "detail": c.detail} for c in self.checks
            ],
            "timings": self.timings,
            "notes": self.notes,
        }


def roundtrip(
    fb: FellBundle,
    tol: Tolerance = DEFAULT_TOL,
    samples: int = 4,
    seed: int = 0,
    residual_tol: float = 1e-8,
    cap: int = DEFAULT_CAP,
) -> RoundTripReport:
    """Rebuild ρ from ⟨ρ⟩_r and compare through ι_ρ (groupoid) and ι^ρ (fibres)."""
    cor = coricality(fb, tol)
    if not cor.is_corical:
        raise NotCorical("; ".join(m for kind, _, m in cor.failures if kind == "corical"))
    times: dict[str, float] = {}
    t0 = time.perf_counter()
    ba = BundleAlgebra(fb, tol)
    ts = indicator_test_set(ba, tol, cap=cap)
    times["test_set"] = time.perf_counter() - t0
    t1 = time.perf_counter()
    wb = WeylBundle(ba, ts, tol)
    times["weyl"] = time.perf_counter() - t1
    t2 = time.perf_counter()
    g, ug = fb.base, wb.ugroupoid
    checks: list[CheckResult] = []
    germs = wb.germ_of
    bij = ug.groupoid is not None and sorted(x for x in germs if x is not None) == list(range(g.n)) and len(germs) == g.n
    checks.append(
        CheckResult("groupoid-bijective", bij, 0.0, f"{len(germs)} ultrafilters for {g.n} arrows; {ug.report.lines()[:3]}")
    )
    if not bij:
        return RoundTripReport(checks, g.n, len(germs), {}, None, times, wb.notes, residual_tol)
    iota = wb.filter_of
    bad = [
        (a, b) for a in range(g.n) for b in range(g.n)
        if (None if g.mul(a, b) is None else iota[g.mul(a, b)]) != ug.mul(iota[a], iota[b])
    ]
    bad += [(a,) for a in range(g.n) if ug.inverse[iota[a]] != iota[g.inverse[a]]]
    bad += [(a, "unit") for a in range(g.n) if (iota[a] in ug.units) != g.is_unit(a)]
    checks.append(CheckResult("groupoid-products", not bad, 0.0, f"mismatches: {bad[:5]}" if bad else ""))
    # fibres: dimension, and the chart on the basis of coordinates
    dims_bad = [u for u in range(wb.n) if wb.fibers[u].dim != fb.fiber_dim(germs[u])]
    unstable = [u for u in range(wb.n) if not wb.fibers[u].stable]
    checks.append(CheckResult("fiber-dims", not dims_bad and not unstable, 0.0, f"bad {dims_bad} unstable {unstable}"))
    lay = ba.layout
    chart_res = 0.0
    for u in range(wb.n):
        gam = germs[u]
        rows = np.arange(lay.offsets[gam], lay.offsets[gam + 1])
        m = wb.chains[u][wb.fibers[u].chain].matrix
        target = np.zeros((len(rows), ba.dim), dtype=complex)
        target[np.arange(len(rows)), rows] = 1.0
        # ι^ρ(R_U(e_k)) = e_k(γ) for every basis section e_k
        chart_res = max(chart_res, float(np.abs(m[rows] - target).max()) if rows.size else 0.0)
        # R_U(e_k) lives on γ alone
        off = np.delete(m, rows, axis=0)
        chart_res = max(chart_res, float(np.abs(off).max()) if off.size else 0.0)
    checks.append(CheckResult("chart-basis", chart_res <= residual_tol, chart_res))
    rng = _rng(seed)
    iso_res = prod_res = 0.0
    for _ in range(samples):
        a = ba.random_element(rng)
        b = ba.random_element(rng)
        for u in range(wb.n):
            val = float(np.linalg.norm(ba.value(a, germs[u]), 2))
            iso_res = max(iso_res, abs(weyl_seminorm(wb, a, GermPoint(ba, germs[u])) - val) / max(1.0, val))
        for (u, v), w in ug.table.items():
            pq = weyl_product(wb.pair(a, u), wb.pair(b, v))
            lhs = chart(wb, pq.rep, w)
            rhs = fb.mul(germs[u], germs[v], ba.value(a, germs[u]), ba.value(b, germs[v]))
            prod_res = max(prod_res, float(np.abs(lhs - rhs).max()) / max(1.0, a.norm() * b.norm()))
    checks.append(CheckResult("chart-isometric", iso_res <= residual_tol, iso_res))
    checks.append(CheckResult("chart-multiplicative", prod_res <= residual_tol, prod_res))
    rec = reconstructed_bundle(wb)
    twist_res = 0.0
    for (a, b) in g.product:
        twist_res = max(twist_res, abs(rec.twist(iota[a], iota[b]) - fb.twist(a, b)))
    dims_res = max(abs(rec.dims[iota[x]] - fb.dims[x]) for x in g.units)
    checks.append(CheckResult("twist-recovered", twist_res <= residual_tol and dims_res == 0, twist_res))
    vrep = validate_fell_bundle(rec, tol)
    rcor = coricality(rec, tol)
    checks.append(CheckResult("reconstructed-fell", vrep.ok and rcor.is_corical, 0.0, "; ".join(vrep.lines()[:3])))
    times["checks"] = time.perf_counter() - t2
    fdims = {germs[u]: wb.fibers[u].dim for u in range(wb.n)}
    return RoundTripReport(checks, g.n, wb.n, fdims, rec, times, wb.notes, residual_tol)
