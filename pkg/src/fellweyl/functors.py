"""Morphisms, the functors Ab and Sp, and the adjunction checks.

A Fell morphism (ρ′, β, φ, ρ) has φ going backwards, from an open
subgroupoid of the new base Γ′ to the old base Γ, and β acting fibrewise
from the pullback bundle ρ_φ into ρ′.  β is stored as one matrix per arrow
of dom(φ), acting on row-major vectorised fibre values.

Ab sends it to the structured morphism pushforward ∘ pullback between the
section algebras.  Sp sends a structured morphism π to the map on Weyl
bundles: π̲ pulls ultrafilters back and π̄ pushes pairs forward.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

import numpy as np

from .bundle import FellBundle, coricality, validate_fell_bundle
from .groupoid import (
    FiniteGroupoid,
    GroupoidFunctor,
    InvalidFunctor,
    TwoCocycle,
    ValidationReport,
    disjoint_union,
    pair,
    random_groupoid,
    star_bijectivity_report,
    validate_functor,
)
from .numeric import DEFAULT_TOL, Tolerance, is_invertible
from .sections import BundleAlgebra, Section
from .structured import BlockElement, StructuredAlgebra
from .weyl import (
    CheckResult,
    RepresentationMismatch,
    WeylBundle,
    chart,
    chart_kind,
    indicator_test_set,
    reconstructed_bundle,
    represent_section,
    representation_report,
    weyl_bundle,
)

__all__ = [
    "InvalidMorphism",
    "NotStarBijective",
    "NotComposable",
    "NotUnital",
    "NotCorical",
    "EmptyDomain",
    "FellMorphism",
    "validate_fell_morphism",
    "domain_groupoid",
    "pullback_bundle",
    "pullback_sections",
    "pushforward_sections",
    "compose_fell",
    "StructuredMorphism",
    "validate_structured_morphism",
    "ab_functor",
    "SpMorphism",
    "sp_functor",
    "AdjunctionReport",
    "verify_adjunction",
    "identity_morphism",
    "swap_morphism",
    "fold_morphism",
    "canonical_morphisms",
    "random_morphism",
    "structured_view",
    "weyl_of",
]


class InvalidMorphism(ValueError):
    pass


class NotStarBijective(InvalidMorphism):
    pass


class NotComposable(ValueError):
    pass


class NotUnital(ValueError):
    pass


class NotCorical(ValueError):
    pass


class EmptyDomain(ValueError):
    pass


# ------------------------------------------------------------ Fell morphisms


@dataclass
class FellMorphism:
    source: FellBundle
    target: FellBundle
    phi: GroupoidFunctor
    beta: Mapping[int, np.ndarray]
    unital: bool = True
    name: str = ""

    def apply(self, arrow: int, x: np.ndarray) -> np.ndarray:
        """β(γ′, x) for x in the fibre of ρ at φ(γ′)."""
        return (self.beta[arrow] @ np.asarray(x, dtype=complex).ravel()).reshape(self.target.shape(arrow))


def validate_fell_morphism(m: FellMorphism, tol: Tolerance = DEFAULT_TOL, seed: int = 0) -> ValidationReport:
    """Fibre shapes, multiplicativity, involution and (if flagged) unitality of β; star-bijectivity of φ."""
    rep = ValidationReport(f"fell morphism{(' ' + m.name) if m.name else ''}")
    src, tgt, phi = m.source, m.target, m.phi
    if phi.source_groupoid != tgt.base or phi.target != src.base:
        rep.add("bases", (), "φ must run from the target base to the source base")
        return rep
    frep = validate_functor(phi)
    if not frep.ok:
        rep.extend(frep)
        return rep
    rep.extend(star_bijectivity_report(phi))
    dom = phi.domain
    if set(m.beta) != set(dom):
        rep.add("fiber", (), "β must be given exactly on dom(φ)")
        return rep
    for a in sorted(dom):
        want = (tgt.fiber_dim(a), src.fiber_dim(phi(a)))
        if np.shape(m.beta[a]) != want:
            rep.add("fiber", (a,), f"β at {a} has shape {np.shape(m.beta[a])}, expected {want}")
    if not rep.ok:
        return rep
    rng = np.random.Generator(np.random.Philox(seed))

    def rand(a: int) -> np.ndarray:
        r, c = src.shape(a)
        return rng.normal(size=(r, c)) + 1j * rng.normal(size=(r, c))

    g2 = tgt.base
    scale = tol.absolute * 100 + tol.relative
    for (a, b), c in g2.product.items():
        if a not in dom or b not in dom:
            continue
        fa, fb_ = phi(a), phi(b)
        x, y = rand(fa), rand(fb_)
        lhs = m.apply(c, src.mul(fa, fb_, x, y))
        rhs = tgt.mul(a, b, m.apply(a, x), m.apply(b, y))
        if np.abs(lhs - rhs).max() > scale * max(1.0, np.abs(rhs).max()):
            rep.add("multiplicative", (a, b), f"β(xy) ≠ β(x)β(y) at ({a}, {b})")
    for a in sorted(dom):
        x = rand(phi(a))
        ai = g2.inverse[a]
        lhs = m.apply(ai, src.star(phi(a), x))
        rhs = tgt.star(a, m.apply(a, x))
        if np.abs(lhs - rhs).max() > scale * max(1.0, np.abs(rhs).max()):
            rep.add("involution", (a,), f"β(x*) ≠ β(x)* at {a}")
        if m.unital:
            r, c = src.shape(phi(a))
            if r == c and not is_invertible(m.apply(a, x), tol):
                rep.add("unital", (a,), f"β does not keep invertible elements invertible at {a}")
    return rep


def domain_groupoid(phi: GroupoidFunctor) -> tuple[FiniteGroupoid, list[int]]:
    """dom(φ) as a groupoid on 0..k-1, plus the original ids in order."""
    g = phi.source_groupoid
    ids = sorted(phi.domain)
    if len(ids) == g.n:
        return g, ids
    new = {a: i for i, a in enumerate(ids)}
    triples = [(new[a], new[b], new[c]) for (a, b), c in g.product.items() if a in new and b in new]
    grading = None if g.grading is None else [g.grading[a] for a in ids]
    sub = FiniteGroupoid.from_triples(
        len(ids),
        [new[u] for u in g.units if u in new],
        [new[g.source[a]] for a in ids],
        [new[g.range[a]] for a in ids],
        [new[g.inverse[a]] for a in ids],
        triples,
        grading,
        f"dom({g.name})",
    )
    return sub, ids


def pullback_bundle(rho: FellBundle, phi: GroupoidFunctor) -> FellBundle:
    """ρ_φ over dom(φ): fibre B_{φ(γ)} at γ, twist σ(φ·, φ·)."""
    if phi.target != rho.base:
        raise InvalidMorphism("φ does not land in the bundle's base")
    rep = star_bijectivity_report(phi)
    if not rep.ok:
        raise NotStarBijective("; ".join(rep.lines()))
    sub, ids = domain_groupoid(phi)
    dims = {u: rho.dims[phi(ids[u])] for u in sub.units}
    entries = {}
    for (a, b) in sub.product:
        s = rho.twist(phi(ids[a]), phi(ids[b]))
        if s != 1:
            entries[(a, b)] = s
    return FellBundle(sub, dims, TwoCocycle(sub, entries), f"{rho.name}∘φ")


def pullback_sections(rho: FellBundle, phi: GroupoidFunctor, a: Section) -> Section:
    """φ^ρ(a)(γ) = a(φ(γ)) as a section of ρ_φ."""
    if a.bundle != rho:
        raise InvalidMorphism("section lives over a different bundle")
    pb = pullback_bundle(rho, phi)
    _, ids = domain_groupoid(phi)
    return Section.from_map(pb, {k: a[phi(ids[k])] for k in range(len(ids))})


def pushforward_sections(m: FellMorphism, a: Section) -> Section:
    """β applied fibrewise, zero off dom(φ)."""
    _, ids = domain_groupoid(m.phi)
    if a.bundle.base.n != len(ids):
        raise InvalidMorphism("section is not over dom(φ)")
    return Section.from_map(m.target, {ids[k]: m.apply(ids[k], a[k]) for k in range(len(ids))})


def compose_fell(m2: FellMorphism, m1: FellMorphism) -> FellMorphism:
    """m2 ∘ m1 for m1: ρ → ρ′, m2: ρ′ → ρ″; base map φ1 ∘ φ2."""
    if m1.target != m2.source:
        raise NotComposable("target of the first morphism is not the source of the second")
    phi = m1.phi.compose(m2.phi)
    beta = {a: m2.beta[a] @ m1.beta[m2.phi(a)] for a in phi.domain}
    return FellMorphism(m1.source, m2.target, phi, beta, m1.unital and m2.unital, f"{m2.name}∘{m1.name}")


# ------------------------------------------------------- structured morphisms


@dataclass
class StructuredMorphism:
    source: StructuredAlgebra
    target: StructuredAlgebra
    matrix: np.ndarray  # target coords × source coords

    def __call__(self, x) -> BlockElement:
        x = self.source.lift(x)
        return self.target.from_coords(self.matrix @ x.coords)

    def compose(self, inner: "StructuredMorphism") -> "StructuredMorphism":
        """self ∘ inner."""
        if inner.target is not self.source:
            raise NotComposable("structured morphisms are not composable")
        return StructuredMorphism(inner.source, self.target, self.matrix @ inner.matrix)

    @classmethod
    def identity(cls, sa: StructuredAlgebra) -> "StructuredMorphism":
        return cls(sa, sa, np.eye(sa.dim, dtype=complex))


def validate_structured_morphism(
    pi: StructuredMorphism, tol: Tolerance | None = None, samples: int = 4, seed: int = 0
) -> ValidationReport:
    """*-homomorphism on samples; π[S] ⊆ S′ per pattern; π[Z] ⊆ Z′; Φ′π = πΦ."""
    a_src, a_tgt = pi.source, pi.target
    tol = tol or a_tgt.tol
    rep = ValidationReport("structured morphism")
    if np.shape(pi.matrix) != (a_tgt.dim, a_src.dim):
        rep.add("shape", (), f"matrix is {np.shape(pi.matrix)}, expected {(a_tgt.dim, a_src.dim)}")
        return rep
    rng = np.random.Generator(np.random.Philox(seed))
    thr = lambda x: 100 * tol.absolute + tol.relative * x  # noqa: E731
    for k in range(samples):
        x, y = a_src.random_element(rng), a_src.random_element(rng)
        d = (pi(x @ y) - pi(x) @ pi(y)).norm()
        if d > thr(x.norm() * y.norm()):
            rep.add("multiplicative", (k,), f"π(xy) − π(x)π(y) has norm {d:.3g}")
        d = (pi(x.star()) - pi(x).star()).norm()
        if d > thr(x.norm()):
            rep.add("involution", (k,), f"π(x*) − π(x)* has norm {d:.3g}")
    for i in range(len(a_src.s_patterns)):
        x = pi(a_src.random_in_pattern(rng, i))
        if not a_tgt.in_s(x, tol) and x.norm() > tol.absolute:
            rep.add("S", (i,), f"image of pattern {i} leaves S′")
    for i, z in enumerate(a_src.z_elements):
        if not a_tgt.in_z(pi(z), tol):
            rep.add("Z", (i,), f"image of Z generator {i} leaves Z′")
    diff = a_tgt.phi_matrix @ pi.matrix - pi.matrix @ a_src.phi_matrix
    worst = max((a_tgt.from_coords(diff[:, j]).norm() for j in range(a_src.dim)), default=0.0)
    if worst > thr(1.0):
        rep.add("Phi", (), f"Φ′π − πΦ has norm {worst:.3g} on a basis element")
    return rep


@lru_cache(maxsize=128)
def structured_view(fb: FellBundle) -> BundleAlgebra:
    """Shared ⟨ρ⟩_r per bundle, so morphisms and Weyl bundles agree on objects."""
    return BundleAlgebra(fb, DEFAULT_TOL)


_WEYL: dict[int, tuple[StructuredAlgebra, WeylBundle]] = {}


def weyl_of(sa: StructuredAlgebra) -> WeylBundle:
    hit = _WEYL.get(id(sa))
    if hit is not None and hit[0] is sa:
        return hit[1]
    wb = weyl_bundle(sa)
    _WEYL[id(sa)] = (sa, wb)
    return wb


def ab_functor(m: FellMorphism) -> StructuredMorphism:
    """𝖠𝖻(m) = pushforward ∘ pullback on ⟨ρ⟩_r → ⟨ρ′⟩_r."""
    if not m.unital:
        raise NotUnital("𝖠𝖻 is defined on unital morphisms")
    for fb in (m.source, m.target):
        if not coricality(fb).is_corical:
            raise NotCorical(f"bundle {fb.name!r} is not corical")
    src, tgt = structured_view(m.source), structured_view(m.target)
    mat = np.zeros((tgt.dim, src.dim), dtype=complex)
    lo, lt = src.layout.offsets, tgt.layout.offsets
    for a in m.phi.domain:
        b = m.phi(a)
        mat[lt[a] : lt[a + 1], lo[b] : lo[b + 1]] = m.beta[a]
    return StructuredMorphism(src, tgt, mat)


# ------------------------------------------------------------------------ Sp


@dataclass
class SpMorphism:
    pi: StructuredMorphism
    source: WeylBundle  # of pi.source
    target: WeylBundle  # of pi.target
    under: GroupoidFunctor | None  # π̲: target ultrafilters → source ultrafilters
    fibre_maps: dict[int, np.ndarray]  # U′ ↦ matrix between representative bases
    report: ValidationReport
    diagnostics: list[str] = field(default_factory=list)
    residuals: dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.under is not None and self.report.ok


def _pull_back_filter(pi: StructuredMorphism, ws: WeylBundle, f) -> frozenset[int]:
    """π⁻¹[U′] within the source test set, up-closed there."""
    ts = ws.test_set
    pre = [i for i, t in enumerate(ts.elements) if f.contains(pi(t))]
    out: frozenset[int] = frozenset()
    for i in pre:
        out |= ts.up(i) | {i}
    return out


def sp_functor(
    pi: StructuredMorphism,
    source: WeylBundle | None = None,
    target: WeylBundle | None = None,
    samples: int = 3,
    seed: int = 0,
) -> SpMorphism:
    """𝖲𝗉(π) = (π̄, π̲) between the Weyl bundles of the target and source algebras."""
    ws = source or weyl_of(pi.source)
    wt = target or weyl_of(pi.target)
    if ws.sa is not pi.source or wt.sa is not pi.target:
        raise RepresentationMismatch("Weyl bundles are not built on the morphism's algebras")
    rep = ValidationReport("𝖲𝗉 morphism")
    diags: list[str] = []
    ugs, ugt = ws.ugroupoid, wt.ugroupoid
    if ugs.groupoid is None or ugt.groupoid is None:
        rep.add("ultrafilters", (), "an ultrafilter groupoid failed validation")
        return SpMorphism(pi, ws, wt, None, {}, rep, diags)
    index = {f.members: k for k, f in enumerate(ugs.filters)}
    mapping: dict[int, int] = {}
    for v, f in enumerate(ugt.filters):
        members = _pull_back_filter(pi, ws, f)
        if not members:
            continue
        k = index.get(members)
        if k is None:
            diags.append(f"preimage of ultrafilter {v} is not maximal in the test set; left outside the domain")
            continue
        mapping[v] = k
    if not mapping and ugt.filters:
        diags.append("empty domain")
    if chart_kind(wt) != "germ":
        diags.append("domain computed on a non-indicator test set; it may under-approximate")
    under = GroupoidFunctor(ugt.groupoid, ugs.groupoid, mapping)
    frep = validate_functor(under)
    rep.extend(frep)
    if frep.ok:
        rep.extend(star_bijectivity_report(under))
    # fibre maps: [a, π̲U′] ↦ [π(a), U′] in representative bases
    fibre_maps = {}
    well = 0.0
    for v, u in mapping.items():
        rs, ks = ws.fibers[u].representatives, ws.fibers[u].kernel
        rt = wt.fibers[v].representatives
        mt = wt.chains[v][wt.fibers[v].chain].matrix
        fibre_maps[v] = rt.conj().T @ mt @ pi.matrix @ rs
        if ks.size:
            # π(0_U) ⊆ 0_U′ makes the map well defined
            well = max(well, max(wt.seminorm(pi.target.from_coords(pi.matrix @ z), v) for z in ks.T))
    if well > 1e-8:
        rep.add("well_defined", (), f"π does not carry 0_U into 0_U′ (residual {well:.3g})")
    rng = np.random.Generator(np.random.Philox(seed))
    mult = 0.0
    for _ in range(samples):
        a, b = pi.source.random_element(rng), pi.source.random_element(rng)
        for (v1, v2), w in ugt.table.items():
            if v1 not in mapping or v2 not in mapping:
                continue
            u1, u2 = mapping[v1], mapping[v2]
            left = pi(ws.reduce(a, u1) @ ws.reduce(b, u2))
            right = wt.reduce(pi(a), v1) @ wt.reduce(pi(b), v2)
            mult = max(mult, wt.seminorm(left - right, w) / max(1.0, a.norm() * b.norm()))
    if mult > 1e-8:
        rep.add("multiplicative", (), f"π̄ is not multiplicative (residual {mult:.3g})")
    core_bad = []
    for v, u in mapping.items():
        f = ugs.filters[u]
        if f.generator >= 0:
            x = wt.reduce(pi(ws.test_set.elements[f.generator]), v)
            if not ugt.filters[v].contains(x):
                core_bad.append(v)
    if core_bad:
        rep.add("unital", tuple(core_bad), "π̄ sends a core element outside the core")
    return SpMorphism(pi, ws, wt, under, fibre_maps, rep, diags, {"well_defined": well, "multiplicative": mult})


# ------------------------------------------------------------------ adjunction


@dataclass
class AdjunctionReport:
    entries: list[CheckResult]
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(e.ok for e in self.entries)

    def __getitem__(self, name: str) -> CheckResult:
        return next(e for e in self.entries if e.name == name)

    def to_dict(self) -> dict:
        return {
            "pass": self.ok,
            "checks": [{"name": e.name, "pass": e.ok, "residual": e.residual, "detail": e.detail} for e in self.entries],
            "notes": self.notes,
        }


def _germ_filters(wb: WeylBundle) -> dict[int, int]:
    if chart_kind(wb) != "germ":
        raise RepresentationMismatch("expected a bundle view with indicator germs")
    return wb.filter_of


def iota_naturality(m: FellMorphism, tol: float = 1e-8) -> CheckResult:
    """𝖲𝗉𝖠𝖻(m) ∘ ι_ρ = ι_ρ′ ∘ m on arrows and on fibres."""
    pi = ab_functor(m)
    ws, wt = weyl_of(pi.source), weyl_of(pi.target)
    sp = sp_functor(pi, ws, wt)
    if sp.under is None:
        return CheckResult("iota-naturality", False, np.inf, "; ".join(sp.report.lines()))
    it, is_ = _germ_filters(wt), _germ_filters(ws)
    bad = []
    for a in range(m.target.base.n):
        v = it[a]
        if a in m.phi.domain:
            if sp.under.mapping.get(v) != is_[m.phi(a)]:
                bad.append(a)
        elif v in sp.under.mapping:
            bad.append(a)
    res = 0.0
    src = pi.source
    lay = src.layout
    for a in m.phi.domain:
        b = m.phi(a)
        u, v = is_[b], it[a]
        for k in range(lay.offsets[b], lay.offsets[b + 1]):
            e = src.basis_element(k)
            lhs = chart(wt, pi(ws.reduce(e, u)), v)
            rhs = m.apply(a, chart(ws, e, u))
            res = max(res, float(np.abs(lhs - rhs).max()))
    ok = not bad and res <= tol and sp.report.ok
    return CheckResult("iota-naturality", ok, res, f"arrow mismatches {bad}" if bad else "")


def omega_naturality(pi: StructuredMorphism, samples: int = 4, seed: int = 0, tol: float = 1e-8) -> CheckResult:
    """ω_{A′} ∘ π = 𝖠𝖻𝖲𝗉(π) ∘ ω_A, fibre by fibre."""
    ws, wt = weyl_of(pi.source), weyl_of(pi.target)
    sp = sp_functor(pi, ws, wt)
    if sp.under is None:
        return CheckResult("omega-naturality", False, np.inf, "; ".join(sp.report.lines()))
    rng = np.random.Generator(np.random.Philox(seed))
    res = 0.0
    for _ in range(samples):
        a = pi.source.random_element(rng)
        pa = pi(a)
        for v in range(wt.n):
            if v in sp.under.mapping:
                d = wt.seminorm(pa - pi(ws.reduce(a, sp.under.mapping[v])), v)
            else:
                d = wt.seminorm(pa, v)
            res = max(res, d / max(1.0, a.norm()))
    ok = res <= tol and sp.report.ok
    return CheckResult("omega-naturality", ok, res, "; ".join(sp.diagnostics))


def zigzag_bundle(fb: FellBundle, tol: float = 1e-8) -> CheckResult:
    """𝖠𝖻(ι_ρ) ∘ ω_{𝖠𝖻ρ} = id: every basis section is recovered from its Weyl transform."""
    ba = structured_view(fb)
    wb = weyl_of(ba)
    germs = _germ_filters(wb)
    res = 0.0
    lay = ba.layout
    for k in range(ba.dim):
        e = ba.basis_element(k)
        for a in range(fb.base.n):
            back = chart(wb, wb.reduce(e, germs[a]), germs[a])
            want = ba.value(e, a)
            res = max(res, float(np.abs(back - want).max()) if want.size else 0.0)
    return CheckResult("zigzag-ab", res <= tol, res)


def zigzag_algebra(sa: StructuredAlgebra, tol: float = 1e-8) -> CheckResult:
    """𝖲𝗉(ω_A) ∘ ι_{𝖲𝗉A} = id on the Weyl bundle of A, checked on arrows and on unit fibres."""
    wa = weyl_of(sa)
    if chart_kind(wa) is None:
        return CheckResult("zigzag-sp", False, np.inf, "no fibre charts for this algebra; not evaluated")
    rec = reconstructed_bundle(wa)
    view = structured_view(rec)
    ww = weyl_of(view)
    cols = [view.encode(represent_section(wa, rec, sa.basis_element(k))).coords for k in range(sa.dim)]
    omega = StructuredMorphism(sa, view, np.array(cols).T)
    sp = sp_functor(omega, wa, ww)
    if sp.under is None:
        return CheckResult("zigzag-sp", False, np.inf, "; ".join(sp.report.lines()))
    germs = _germ_filters(ww)
    bad = [u for u in range(wa.n) if sp.under.mapping.get(germs[u]) != u]
    res = 0.0
    for u in wa.ugroupoid.units:
        for k in range(sa.dim):
            e = sa.basis_element(k)
            lhs = chart(ww, omega(wa.reduce(e, u)), germs[u])
            rhs = chart(wa, e, u)
            res = max(res, float(np.abs(lhs - rhs).max()))
    return CheckResult("zigzag-sp", not bad and res <= tol, res, f"arrow mismatches {bad}" if bad else "")


def omega_isomorphism(sa: StructuredAlgebra, tol: float = 1e-8) -> CheckResult:
    """ω_A is an isomorphism: isometric and onto the sections of the Weyl bundle."""
    wa = weyl_of(sa)
    rr = representation_report(wa, iso_tol=tol)
    total = sum(f.dim for f in wa.fibers)
    iso = rr["isometric"]
    onto = total == sa.dim - rr.kernel_dim
    ok = iso.ok and rr.kernel_dim == 0 and onto
    return CheckResult(
        "omega-isomorphism", ok, iso.residual, f"kernel dimension {rr.kernel_dim}, Σ fibre dims {total}, dim A {sa.dim}"
    )


def verify_adjunction(
    fb: FellBundle,
    sa: StructuredAlgebra | None = None,
    fell_morphism: FellMorphism | None = None,
    structured_morphism: StructuredMorphism | None = None,
    tol: float = 1e-8,
) -> AdjunctionReport:
    """(i) ι natural, (ii) ω natural, (iii) both zigzags, (iv) ω an isomorphism."""
    sa = sa or structured_view(fb)
    m = fell_morphism or identity_morphism(fb)
    pi = structured_morphism or StructuredMorphism.identity(sa)
    notes = []
    entries = [iota_naturality(m, tol), omega_naturality(pi, tol=tol), zigzag_bundle(fb, tol)]
    z = zigzag_algebra(sa, tol)
    if z.residual == np.inf and "not evaluated" in z.detail:
        notes.append(z.detail)
    entries.append(z)
    entries.append(omega_isomorphism(sa, tol))
    return AdjunctionReport(entries, notes)


# ------------------------------------------------------------ morphism family


def _pullback_target(
    rho: FellBundle,
    g2: FiniteGroupoid,
    mapping: Mapping[int, int],
    chi: Mapping[int, complex] | None = None,
    unitaries: Mapping[int, np.ndarray] | None = None,
    name: str = "",
) -> FellMorphism:
    """ρ′ over g2 equal to ρ∘φ on dom (twisted by the coboundary of χ), dims 1 elsewhere,
    and β(γ′, b) = χ(γ′)·V_{rγ′} b V_{sγ′}*."""
    chi = chi or {}
    phi = GroupoidFunctor(g2, rho.base, dict(mapping))
    dims = {x: (rho.dims[mapping[x]] if x in mapping else 1) for x in g2.units}
    ch = lambda a: chi.get(a, 1.0)  # noqa: E731
    entries = {}
    for (a, b), c in g2.product.items():
        if a in mapping and b in mapping:
            s = rho.twist(mapping[a], mapping[b]) * ch(c) / (ch(a) * ch(b))
            if abs(s - 1) > 1e-15:
                entries[(a, b)] = complex(s)
    tgt = FellBundle(g2, dims, TwoCocycle(g2, entries), name or f"{rho.name}′")
    beta = {}
    for a in mapping:
        vr = unitaries[g2.range[a]] if unitaries else np.eye(dims[g2.range[a]])
        vs = unitaries[g2.source[a]] if unitaries else np.eye(dims[g2.source[a]])
        beta[a] = ch(a) * np.kron(vr, vs.conj())
    return FellMorphism(rho, tgt, phi, beta, True, name)


def identity_morphism(fb: FellBundle) -> FellMorphism:
    g = fb.base
    beta = {a: np.eye(fb.fiber_dim(a), dtype=complex) for a in range(g.n)}
    return FellMorphism(fb, fb, GroupoidFunctor.identity(g), beta, True, "identity")


def swap_morphism(fb: FellBundle | None = None) -> FellMorphism:
    """Relabelling of pair(2) exchanging the two units, on a constant-dimension bundle."""
    g = pair(2)
    fb = fb or FellBundle(g, {0: 1, 3: 1}, None, "pair(2)")
    if fb.base != g:
        raise InvalidMorphism("swap is defined on bundles over pair(2)")
    mapping = {a: 3 - a for a in range(4)}
    beta = {a: np.eye(fb.fiber_dim(a), dtype=complex) for a in range(4)}
    m = FellMorphism(fb, fb, GroupoidFunctor(g, g, mapping), beta, True, "swap")
    return m


def fold_morphism(fb: FellBundle | None = None) -> FellMorphism:
    """Γ ⊔ Γ → Γ folding both copies onto one."""
    fb = fb or FellBundle(pair(2), {0: 1, 3: 1}, None, "pair(2)")
    g = fb.base
    g2 = disjoint_union(g, g)
    return _pullback_target(fb, g2, {a: a % g.n for a in range(g2.n)}, name="fold")


def canonical_morphisms(fb: FellBundle | None = None) -> dict[str, FellMorphism]:
    fb = fb or FellBundle(pair(2), {0: 1, 3: 1}, None, "pair(2)")
    return {"identity": identity_morphism(fb), "swap": swap_morphism(fb), "fold": fold_morphism(fb)}


def _relabel(g: FiniteGroupoid, perm: np.ndarray) -> FiniteGroupoid:
    """Same groupoid with arrow a renamed perm[a]."""
    n = g.n
    inv = np.argsort(perm)
    src = [int(perm[g.source[inv[k]]]) for k in range(n)]
    rng = [int(perm[g.range[inv[k]]]) for k in range(n)]
    inverse = [int(perm[g.inverse[inv[k]]]) for k in range(n)]
    triples = [(int(perm[a]), int(perm[b]), int(perm[c])) for (a, b), c in g.product.items()]
    grading = None if g.grading is None else [g.grading[inv[k]] for k in range(n)]
    return FiniteGroupoid.from_triples(n, [int(perm[u]) for u in g.units], src, rng, inverse, triples, grading, f"{g.name}'")


def _random_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _random_chi(rng: np.random.Generator, g: FiniteGroupoid) -> dict[int, complex]:
    """Unit-modulus χ with χ(units) = 1 and χ(γ⁻¹) = conj χ(γ)."""
    chi = {}
    for a in range(g.n):
        if a in chi:
            continue
        ai = g.inverse[a]
        if g.is_unit(a):
            chi[a] = 1.0
        elif ai == a:
            chi[a] = float(rng.choice([-1.0, 1.0]))
        else:
            z = complex(np.exp(2j * np.pi * rng.random()))
            chi[a], chi[ai] = z, z.conjugate()
    return chi


KINDS = ("iso", "fold", "partial_fold", "inclusion")


def random_morphism(fb: FellBundle, seed: int = 0, kind: str | None = None) -> FellMorphism:
    """Seeded Fell morphism out of ``fb``: a twisted relabelling, a fold, a partial fold or an inclusion."""
    rng = np.random.Generator(np.random.Philox(seed))
    kind = kind or KINDS[int(rng.integers(len(KINDS)))]
    g = fb.base
    n = g.n
    extra = pair(1)
    if kind == "iso":
        perm = rng.permutation(n)
        g2 = _relabel(g, perm)
        mapping = {int(perm[a]): a for a in range(n)}
    elif kind == "fold":
        g2 = disjoint_union(g, g)
        mapping = {a: a % n for a in range(2 * n)}
    elif kind == "partial_fold":
        g2 = disjoint_union(g, g, extra)
        mapping = {a: a % n for a in range(2 * n)}
    elif kind == "inclusion":
        g2 = disjoint_union(g, extra)
        mapping = {a: a for a in range(n)}
    else:
        raise InvalidMorphism(f"unknown morphism kind {kind!r}")
    dom_units = [x for x in g2.units if x in mapping]
    unitaries = {x: _random_unitary(rng, fb.dims[mapping[x]]) for x in dom_units}
    unitaries.update({x: np.eye(1) for x in g2.units if x not in mapping})
    chi = {a: c for a, c in _random_chi(rng, g2).items() if a in mapping}
    return _pullback_target(fb, g2, mapping, chi, unitaries, f"{kind}[{seed}]")
