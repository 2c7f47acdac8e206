"""Acceptance criteria 1 to 10, one test each.

Every test prints a single ``criterion N: PASS|FAIL`` line with its measured
worst case, then asserts.  Instances are seeded so the run is reproducible.
"""

import time

import numpy as np
import pytest
from strategies import corical_bundle, philox, small_corical_bundle

from fellweyl.bundle import FellBundle, coricality
from fellweyl.domination import common_upper, dominates, interpolate, interpolate_unit, synthesize_witness
from fellweyl.functors import (
    FellMorphism,
    ab_functor,
    canonical_morphisms,
    compose_fell,
    identity_morphism,
    random_morphism,
    sp_functor,
    validate_fell_morphism,
    verify_adjunction,
)
from fellweyl.groupoid import (
    GroupoidFunctor,
    TwoCocycle,
    bicharacter,
    klein,
    pair,
    star_bijectivity_report,
    validate_cocycle,
    validate_functor,
    validate_groupoid,
)
from fellweyl.sections import BundleAlgebra, Section, involute, norm_2, norm_b, norm_inf, convolve
from fellweyl.structured import (
    PreconditionViolated,
    StructuredAlgebra,
    cartan_pair,
    check_faithful,
    kadison,
    n_kadison,
    unfaithful_example,
    validate_axioms,
)
from fellweyl.weyl import (
    indicator_test_set,
    representation_report,
    roundtrip,
    prime_violations,
    ultrafilter_groupoid,
    weyl_bundle,
)

N_BUNDLES = 100


def verdict(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def corpus():
    """The 100 seeded random corical bundles shared by criteria 1, 2, 5 and 6."""
    out = [corical_bundle(seed) for seed in range(N_BUNDLES)]
    for fb in out:
        assert fb.base.n <= 16 and len(fb.base.units) <= 4
        assert max(fb.dims.values()) <= 3
        assert coricality(fb).is_corical
    return out


def families():
    """Instance families for the domination and Kadison criteria."""
    return {
        "pair3-line": FellBundle(pair(3), {0: 1, 4: 1, 8: 1}),
        "pair2-d2": FellBundle(pair(2), {0: 2, 3: 2}),
        "klein-bicharacter": FellBundle(klein(), {0: 1}, bicharacter(klein())),
        "random-corical": corical_bundle(2024, 3, 12),
    }


def support_dominated(ba, a, b):
    # every arrow carrying a carries an invertible value of b
    for gam in range(ba.bundle.base.n):
        if np.linalg.norm(ba.value(a, gam)) > 1e-9:
            v = ba.value(b, gam)
            if abs(np.linalg.det(v)) < 1e-12:
                return False
    return True


def slice_element(ba, rng, inside=None, singular=0.15):
    """Random values on part of a random maximal slice, or on part of ``inside``."""
    arrows = sorted(inside) if inside is not None else sorted(ba.slices[int(rng.integers(len(ba.slices)))])
    vals = {}
    for gam in arrows:
        if rng.random() < 0.7:
            d = ba.bundle.shape(gam)
            v = rng.normal(size=d) + 1j * rng.normal(size=d)
            if rng.random() < singular and d[0] > 1:
                v[:, -1] = 0.0
            vals[gam] = v
    return ba.encode(Section.from_map(ba.bundle, vals))


# ------------------------------------------------------------------ 1


def test_criterion_01_roundtrip(corpus, capsys):
    t0 = time.perf_counter()
    failed, worst = [], 0.0
    for seed, fb in enumerate(corpus):
        rep = roundtrip(fb, seed=seed)
        worst = max(worst, rep.max_residual)
        if not rep.ok:
            failed.append((seed, [c.name for c in rep.checks if not c.ok]))
    elapsed = time.perf_counter() - t0
    ok = not failed and worst <= 1e-8 and elapsed <= 60
    verdict(capsys, 1, ok, f"{N_BUNDLES} bundles, max residual {worst:.2e}, {elapsed:.1f} s, failures {failed[:3]}")


# ------------------------------------------------------------------ 2


def test_criterion_02_norm_laws(corpus, capsys):
    rng = philox(2)
    order = agree = cstar = 0.0
    count = 0
    for fb in corpus:
        ba = BundleAlgebra(fb)
        for k in range(10):
            if k % 2:
                a = ba.decode(slice_element(ba, rng))
            else:
                a = Section.random(fb, rng)
            ni, n2, nb = norm_inf(a), norm_2(a), norm_b(a)
            order = max(order, ni - n2, n2 - nb)
            if k % 2:
                agree = max(agree, nb - ni, abs(n2 - ni))
            nss = norm_b(convolve(involute(a), a))
            cstar = max(cstar, abs(nss - nb * nb) / max(nb * nb, 1e-300))
            count += 1
    ok = order <= 1e-9 and agree <= 1e-9 and cstar <= 1e-8
    verdict(
        capsys, 2, ok,
        f"{count} sections, order slack {order:.2e}, slice agreement {agree:.2e}, C*-identity rel {cstar:.2e}",
    )


# ------------------------------------------------------------------ 3 and 4


@pytest.fixture(scope="module")
def domination_samples():
    """1000 (a, b) pairs per family with both verdicts; dominated pairs are kept for criterion 4."""
    out = {}
    for name, fb in families().items():
        ba = BundleAlgebra(fb)
        rng = philox(len(name))
        pairs = []
        for k in range(1000):
            b = slice_element(ba, rng)
            a = slice_element(ba, rng, inside=ba.support(b)) if k % 2 else slice_element(ba, rng)
            pairs.append((a, b))
        out[name] = (ba, pairs)
    return out


def test_criterion_03_domination_verdicts(domination_samples, capsys):
    disagreements, dominated, total = [], 0, 0
    for name, (ba, pairs) in domination_samples.items():
        for i, (a, b) in enumerate(pairs):
            v = dominates(ba, a, b)
            total += 1
            dominated += v.dominated
            if v.dominated != support_dominated(ba, a, b) or not v.agree:
                disagreements.append((name, i))
    ok = not disagreements and 0 < dominated < total
    verdict(capsys, 3, ok, f"{total} pairs, {dominated} dominated, disagreements {len(disagreements)} {disagreements[:3]}")


def test_criterion_04_interpolation(domination_samples, capsys):
    worst, failures, chains = 0.0, [], 0
    for name, (ba, pairs) in domination_samples.items():
        rng = philox(4)
        for i, (a, b) in enumerate(pairs):
            if not support_dominated(ba, a, b):
                continue
            live = {g for g in ba.support(b) if abs(np.linalg.det(ba.value(b, g))) >= 1e-12}
            second = slice_element(ba, rng, inside=live, singular=0.0)
            try:
                w = synthesize_witness(ba, a, b)
                _, links = interpolate(ba, w)
                s, unit_links = interpolate_unit(ba, a, b)
                up = common_upper(ba, a, second, b)
                ws = [*links, *unit_links, up.a_d, up.b_d, up.d_c]
                res = max(x.max_residual for x in ws)
                if not all(x.valid for x in ws) or s.norm() > 1 + 1e-9:
                    failures.append((name, i, "invalid"))
            except Exception as exc:  # any raised construction is a failure of the criterion
                failures.append((name, i, type(exc).__name__))
                continue
            worst = max(worst, res)
            chains += 1
    ok = not failures and worst <= 1e-8
    verdict(capsys, 4, ok, f"{chains} dominated pairs, max residual {worst:.2e}, failures {failures[:3]}")


# ------------------------------------------------------------------ 5


def test_criterion_05_ultrafilters(corpus, capsys):
    bad = []
    plus = 0
    for seed, fb in enumerate(corpus):
        ts = indicator_test_set(BundleAlgebra(fb))
        ug = ultrafilter_groupoid(ts)
        if not ug.ok or len(ug.filters) != fb.base.n or not validate_groupoid(ug.groupoid).ok:
            bad.append((seed, "groupoid"))
            continue
        v = sum(len(prime_violations(f)) for f in ug.filters)
        plus += v
        if v:
            bad.append((seed, "prime"))
    ok = not bad
    verdict(capsys, 5, ok, f"{len(corpus)} instances, ultrafilter count = |Γ| and laws hold; prime-filter violations on in-set sums {plus}; bad {bad[:3]}")


# ------------------------------------------------------------------ 6


def test_criterion_06_weyl_seminorm(corpus, capsys):
    rng = philox(6)
    germ_gap = attain_gap = 0.0
    samples = 0
    for fb in corpus:
        ba = BundleAlgebra(fb)
        wb = weyl_bundle(ba)
        for _ in range(3):
            a = ba.random_element(rng)
            for gam in range(fb.base.n):
                germ = float(np.linalg.norm(ba.value(a, gam), 2))
                germ_gap = max(germ_gap, abs(germ - wb.seminorm(a, wb.filter_of[gam])))
                samples += 1
            s = slice_element(ba, rng)
            top = max(wb.seminorm(s, u) for u in range(wb.n))
            attain_gap = max(attain_gap, abs(top - s.norm()))
    ok = germ_gap <= 1e-9 and attain_gap <= 1e-8
    verdict(capsys, 6, ok, f"{samples} (a, γ) samples, germ vs witness {germ_gap:.2e}, norm attainment {attain_gap:.2e}")


# ------------------------------------------------------------------ 7


def _kadison_instances():
    out = {name: BundleAlgebra(fb) for name, fb in families().items()}
    out["cartan3"] = cartan_pair(3)
    return out


def _atoms(sa):
    """Coordinate groups whose disjoint unions give Φ(u_j u_k*) = 0.

    For a bundle view Φ(u v*) at a unit x sums u(γ)v(γ)* over arrows with range
    x, so whole arrows must be kept apart.  For the Cartan pair the diagonal of
    u v* pairs entries with themselves, so single coordinates suffice.
    """
    if isinstance(sa, BundleAlgebra):
        off = sa.layout.offsets
        return [np.arange(off[g], off[g + 1]) for g in range(sa.bundle.base.n)]
    return [np.array([i]) for i in range(sa.dim)]


def _disjoint_units(sa, rng, k):
    """k elements on disjoint unions of atoms, scaled into the unit ball."""
    atoms = _atoms(sa)
    order = rng.permutation(len(atoms))
    us = []
    for chunk in np.array_split(order, k):
        part = np.concatenate([atoms[i] for i in chunk]) if len(chunk) else np.zeros(0, int)
        c = np.zeros(sa.dim, dtype=complex)
        c[part] = rng.normal(size=len(part)) + 1j * rng.normal(size=len(part))
        u = sa.from_coords(c)
        us.append(u * (rng.uniform(0.2, 1.0) / max(u.norm(), 1e-12)))
    return us


def test_criterion_07_kadison(capsys):
    worst = np.inf
    verdict_fail, reject_fail, configs = [], [], 0
    for name, sa in _kadison_instances().items():
        rng = philox(7)
        for i in range(500):
            a = sa.random_element(rng)
            pa = sa.phi(a)
            gap = sa.phi(a.star() @ a) - pa.star() @ pa
            k = int(rng.integers(1, 4))
            us = _disjoint_units(sa, rng, k)
            lhs = sa.zero
            for u in us:
                lhs = lhs + sa.phi(a.star() @ u.star()) @ sa.phi(u @ a)
            ngap = sa.phi(a.star() @ a) - lhs
            mins = [np.linalg.eigvalsh(0.5 * (x + x.conj().T)).min() for x in (*gap.blocks, *ngap.blocks) if x.size]
            worst = min(worst, min(mins))
            if not (kadison(sa, a) and n_kadison(sa, a, us)):
                verdict_fail.append((name, i))
            # precondition violations: an oversized u, or two u sharing coordinates
            bad_us = [us[0] * (2.0 / us[0].norm())] if i % 2 else [us[0], us[0] * 0.5]
            try:
                n_kadison(sa, a, bad_us)
                reject_fail.append((name, i))
            except PreconditionViolated:
                pass
            configs += 1
    ok = worst >= -1e-9 and not verdict_fail and not reject_fail
    verdict(
        capsys, 7, ok,
        f"{configs} configurations, min eigenvalue {worst:.2e}, verdict failures {verdict_fail[:3]}, "
        f"unrejected preconditions {reject_fail[:3]}",
    )


# ------------------------------------------------------------------ 8


def test_criterion_08_representation(capsys):
    cases = {
        "cartan2": cartan_pair(2),
        "cartan3": cartan_pair(3),
        "pair2-line": BundleAlgebra(FellBundle(pair(2), {0: 1, 3: 1})),
        "klein-bicharacter": BundleAlgebra(FellBundle(klein(), {0: 1}, bicharacter(klein()))),
        **{f"random{s}": BundleAlgebra(small_corical_bundle(800 + s)) for s in range(6)},
    }
    mult = phi = iso = 0.0
    bad = []
    for name, sa in cases.items():
        assert check_faithful(sa).ok, name
        rep = representation_report(weyl_bundle(sa), samples=8, seed=8)
        mult = max(mult, rep["multiplicative"].residual)
        phi = max(phi, rep["phi-preserving"].residual)
        iso = max(iso, rep["isometric"].residual)
        if not rep.ok:
            bad.append(name)
    ok = not bad and mult <= 1e-8 and phi <= 1e-9 and iso <= 1e-8
    verdict(capsys, 8, ok, f"{len(cases)} faithful instances, multiplicative {mult:.2e}, Φ {phi:.2e}, isometry {iso:.2e}, bad {bad}")


# ------------------------------------------------------------------ 9


def _functor_laws(m: FellMorphism, seed: int) -> tuple[list[str], float]:
    bad, worst = [], 0.0
    if not validate_fell_morphism(m, seed=seed).ok:
        return ["fell-morphism"], np.inf
    pi = ab_functor(m)
    ident = ab_functor(identity_morphism(m.source))
    if not np.allclose(ident.matrix, np.eye(ident.source.dim)):
        bad.append("ab-identity")
    # composition with a follow-up morphism that keeps the target under the cap
    m2 = random_morphism(m.target, seed + 101, kind="iso" if 2 * m.target.base.n + 1 > 24 else None)
    pi2 = ab_functor(m2)
    comp = ab_functor(compose_fell(m2, m)).matrix
    worst = max(worst, float(np.abs(comp - pi2.matrix @ pi.matrix).max()))
    sp, sp2, spc = sp_functor(pi), sp_functor(pi2), sp_functor(ab_functor(compose_fell(m2, m)))
    if not (sp.ok and sp2.ok and spc.ok):
        bad.append("sp")
    elif not (star_bijectivity_report(sp.under).ok and star_bijectivity_report(spc.under).ok):
        bad.append("sp-star-bijective")
    else:
        want = {v: sp.under.mapping[u] for v, u in sp2.under.mapping.items() if u in sp.under.mapping}
        if spc.under.mapping != want:
            bad.append("sp-composition")
        for v in want:
            diff = spc.fibre_maps[v] - sp2.fibre_maps[v] @ sp.fibre_maps[sp2.under.mapping[v]]
            worst = max(worst, float(np.abs(diff).max()) if diff.size else 0.0)
    spi = sp_functor(ident)
    if spi.under is None or spi.under.mapping != {v: v for v in range(m.source.base.n)}:
        bad.append("sp-identity")
    adj = verify_adjunction(m.source, fell_morphism=m, structured_morphism=pi)
    for e in adj.entries:
        worst = max(worst, e.residual)
        if not e.ok:
            bad.append(e.name)
    return bad, worst


def test_criterion_09_functors(capsys):
    t0 = time.perf_counter()
    morphisms = list(canonical_morphisms().values())
    morphisms += [random_morphism(small_corical_bundle(900 + s), s) for s in range(20)]
    failures, worst = [], 0.0
    for k, m in enumerate(morphisms):
        bad, w = _functor_laws(m, k)
        worst = max(worst, w)
        if bad:
            failures.append((m.name, bad))
    elapsed = time.perf_counter() - t0
    ok = not failures and worst <= 1e-8 and elapsed <= 30
    verdict(capsys, 9, ok, f"{len(morphisms)} morphisms, max residual {worst:.2e}, {elapsed:.1f} s, failures {failures[:3]}")


# ------------------------------------------------------------------ 10


def _broken_cocycle():
    g = pair(2)
    return g, TwoCocycle(g, {(1, 2): 1j})


def _non_slice_pattern():
    base = cartan_pair(2)
    e11, e12 = np.eye(4)[0], np.eye(4)[1]
    patterns = list(base.s_patterns) + [np.array([e11, e12])]
    return StructuredAlgebra(base.sizes, patterns, base.z_coords, base.phi_matrix, None, "cartan + {e11, e12}")


def _collapse():
    return GroupoidFunctor(pair(2), pair(1), {a: 0 for a in range(4)})


def test_criterion_10_negative_controls(capsys):
    results = {}
    g, sigma = _broken_cocycle()
    rep = validate_cocycle(g, sigma)
    results["broken cocycle"] = (
        validate_groupoid(g).ok and not rep.ok and all(v.location for v in rep.violations),
        rep.lines()[:1],
    )
    sa = _non_slice_pattern()
    rep = validate_axioms(sa)
    located = [v for v in rep.violations if v.check == "squares_in_phi_s" and v.location == (len(sa.s_patterns) - 1,)]
    results["non-slice pattern"] = (bool(located) and check_faithful(sa).ok, [v.message for v in located][:1])
    ue = unfaithful_example()
    fc = check_faithful(ue)
    results["unfaithful Φ"] = (validate_axioms(ue).ok and not fc.ok and fc.basis_index is not None, [fc.message])
    phi = _collapse()
    rep = star_bijectivity_report(phi)
    results["collapse functor"] = (
        validate_functor(phi).ok and not rep.ok and all(v.location for v in rep.violations),
        rep.lines()[:1],
    )
    ok = all(r[0] for r in results.values())
    detail = "; ".join(f"{k}: {'rejected' if v[0] else 'NOT rejected'} {v[1]}" for k, v in results.items())
    verdict(capsys, 10, ok, detail)
