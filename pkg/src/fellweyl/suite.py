"""Suite orchestration: run the module checks on loaded instances and collect a report."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .bundle import coricality, validate_fell_bundle
from .domination import are_compatible
from .functors import (
    FellMorphism,
    InvalidMorphism,
    StructuredMorphism,
    ab_functor,
    compose_fell,
    identity_morphism,
    random_morphism,
    sp_functor,
    structured_view,
    validate_fell_morphism,
    validate_structured_morphism,
    verify_adjunction,
    weyl_of,
)
from .groupoid import validate_cocycle, validate_groupoid
from .instance import Instance
from .numeric import DEFAULT_TOL, Tolerance
from .sections import BundleAlgebra, Section, is_slice_supported, norm_2, norm_b, norm_inf
from .structured import StructuredAlgebra, classify, validate_axioms
from .weyl import (
    DEFAULT_CAP,
    TestSetTooLarge,
    default_test_set,
    representation_report,
    roundtrip,
    prime_violations,
    basic_open_violations,
    validate_weyl_bundle,
    weyl_bundle,
)

__all__ = ["SUITES", "SuiteNotApplicable", "SuiteEntry", "SuiteReport", "run_suite"]

SUITES = ("validate", "props", "relations", "reconstruct", "roundtrip", "functors")


class SuiteNotApplicable(ValueError):
    pass


@dataclass
class SuiteEntry:
    suite: str
    name: str
    ok: bool
    residual: float = 0.0
    runtime: float = 0.0
    detail: str = ""
    skipped: bool = False

    def to_dict(self, timings: bool = True) -> dict:
        out = {
            "suite": self.suite,
            "name": self.name,
            "pass": self.ok,
            "residual": _finite(self.residual),
            "detail": self.detail,
            "skipped": self.skipped,
        }
        if timings:
            out["runtime"] = round(self.runtime, 6)
        return out


def _finite(x: float) -> float | None:
    # JSON has no inf; a residual that could not be computed is reported as null
    return float(x) if np.isfinite(x) else None


@dataclass
class SuiteReport:
    seed: int
    tolerance: Tolerance
    max_test_set: int = DEFAULT_CAP
    entries: list[SuiteEntry] = field(default_factory=list)
    data: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(e.ok for e in self.entries if not e.skipped)

    @property
    def max_residual(self) -> float:
        return max((e.residual for e in self.entries if not e.skipped and np.isfinite(e.residual)), default=0.0)

    def add(self, suite: str, name: str, ok: bool, residual: float = 0.0, detail: str = "", runtime: float = 0.0):
        self.entries.append(SuiteEntry(suite, name, bool(ok), float(residual), runtime, detail))

    def skip(self, suite: str, reason: str) -> None:
        self.entries.append(SuiteEntry(suite, "skipped", True, 0.0, 0.0, reason, True))

    def to_dict(self, timings: bool = True) -> dict:
        return {
            "pass": self.ok,
            "seed": self.seed,
            "rng": "philox",
            "tolerance": {
                "abs": self.tolerance.absolute,
                "rel": self.tolerance.relative,
                "inv_threshold": self.tolerance.inv_threshold,
            },
            "max_test_set": self.max_test_set,
            "max_residual": self.max_residual,
            "checks": [e.to_dict(timings) for e in self.entries],
            "data": self.data,
            "notes": list(dict.fromkeys(self.notes)),
        }

    def human(self) -> str:
        t = self.tolerance
        lines = [
            f"seed {self.seed} (philox)  tol abs={t.absolute:g} rel={t.relative:g} inv={t.inv_threshold:g}"
            f"  max test set {self.max_test_set}"
        ]
        for e in self.entries:
            if e.skipped:
                lines.append(f"SKIP  {e.suite}: {e.detail}")
                continue
            tag = "PASS" if e.ok else "FAIL"
            res = f"{e.residual:.2e}" if np.isfinite(e.residual) else "n/a"
            tail = f"  {e.detail}" if e.detail and not e.ok else ""
            lines.append(f"{tag}  {e.suite}/{e.name}  residual {res}  {e.runtime * 1e3:.1f} ms{tail}")
        lines.extend(f"note: {n}" for n in dict.fromkeys(self.notes))
        lines.append(f"overall: {'PASS' if self.ok else 'FAIL'}")
        return "\n".join(lines)


# ------------------------------------------------------------------ suites


def _timed(fn: Callable, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def _report_entry(rep, suite: str, name: str, out: SuiteReport, dt: float) -> None:
    out.add(suite, name, rep.ok, 0.0, "; ".join(rep.lines()[:3]), dt)


def _validate(inst: Instance, tol: Tolerance, seed: int, cap: int, out: SuiteReport) -> None:
    if inst.bundle is None and inst.structured is None and inst.morphism is None:
        raise SuiteNotApplicable("nothing to validate")
    if inst.bundle is not None:
        fb = inst.bundle
        rep, dt = _timed(validate_groupoid, fb.base)
        _report_entry(rep, "validate", "groupoid", out, dt)
        rep, dt = _timed(validate_cocycle, fb.base, fb.twist)
        _report_entry(rep, "validate", "cocycle", out, dt)
        rep, dt = _timed(validate_fell_bundle, fb, tol)
        _report_entry(rep, "validate", "fell-bundle", out, dt)
        cor = coricality(fb, tol)
        out.data["coricality"] = {
            "categorical": cor.is_categorical,
            "corical": cor.is_corical,
            "saturated": cor.is_saturated,
        }
    if inst.structured is not None:
        rep, dt = _timed(validate_axioms, inst.structured, tol, seed)
        _report_entry(rep, "validate", "structured-axioms", out, dt)
    if inst.morphism is not None:
        rep, dt = _timed(validate_fell_morphism, inst.morphism, tol, seed)
        _report_entry(rep, "validate", "fell-morphism", out, dt)


def _norm_laws(fb, tol: Tolerance, seed: int, samples: int, out: SuiteReport) -> None:
    rng = np.random.Generator(np.random.Philox(seed))
    g = fb.base
    t0 = time.perf_counter()
    order = cstar = agree = 0.0
    for k in range(samples):
        # every other sample lives on a single arrow, hence on a slice
        a = Section.random(fb, rng, None if k % 2 else [int(rng.integers(g.n))])
        ni, n2, nb = norm_inf(a), norm_2(a), norm_b(a)
        order = max(order, ni - n2, n2 - nb)
        cstar = max(cstar, abs(norm_b(a.star() @ a) - nb**2) / max(1.0, nb**2))
        if is_slice_supported(a, tol):
            agree = max(agree, nb - ni, n2 - ni)
    dt = time.perf_counter() - t0
    out.add("props", "norm-order", order <= 1e-9, max(order, 0.0), runtime=dt)
    out.add("props", "norm-cstar", cstar <= 1e-8, cstar)
    out.add("props", "norm-slice-agree", agree <= 1e-9, max(agree, 0.0))


def _properties(sa: StructuredAlgebra, label: str, tol: Tolerance, seed: int, out: SuiteReport) -> None:
    cl, dt = _timed(classify, sa, tol, seed)
    out.data.setdefault("classification", {})[label] = cl.level
    if not cl.axioms.ok:
        out.add("props", f"{label}:axioms", False, 0.0, "; ".join(cl.axioms.lines()[:3]), dt)
        return
    for name, c in cl.properties.checks.items():
        out.add("props", f"{label}:{name}", c.ok, c.residual, c.counterexample or c.mode)
    if cl.faithful is not None:
        out.add("props", f"{label}:faithful", cl.faithful.ok, cl.faithful.residual, cl.faithful.message)
    out.entries[-1].runtime = dt
    out.notes.extend(cl.notes)


def _props(inst: Instance, tol: Tolerance, seed: int, cap: int, out: SuiteReport) -> None:
    if inst.bundle is None and inst.structured is None:
        raise SuiteNotApplicable("props needs a bundle or a structured algebra")
    if inst.bundle is not None:
        _norm_laws(inst.bundle, tol, seed, 16, out)
        if coricality(inst.bundle, tol).is_corical:
            _properties(BundleAlgebra(inst.bundle, tol), "view", tol, seed, out)
        else:
            out.notes.append("structured view skipped: the bundle is not corical")
    if inst.structured is not None:
        _properties(inst.structured, "structured", tol, seed, out)


def _algebras(inst: Instance, tol: Tolerance, notes: list[str]) -> list[tuple[str, StructuredAlgebra]]:
    """The structured view of a corical bundle and the structured block, whichever are present."""
    out = []
    if inst.bundle is not None and not coricality(inst.bundle, tol).is_corical:
        notes.append("bundle view skipped: the bundle is not corical, so indicators are not all in S")
    elif inst.bundle is not None:
        out.append(("view", structured_view(inst.bundle) if tol == DEFAULT_TOL else BundleAlgebra(inst.bundle, tol)))
    if inst.structured is not None:
        out.append(("structured", inst.structured))
    return out


def _relations(inst: Instance, tol: Tolerance, seed: int, cap: int, out: SuiteReport) -> None:
    algs = _algebras(inst, tol, out.notes)
    if not algs:
        raise SuiteNotApplicable("relations needs a corical bundle or a structured algebra")
    tables = out.data.setdefault("relations", {})
    for label, sa in algs:
        t0 = time.perf_counter()
        try:
            ts = default_test_set(sa, tol, cap)
        except TestSetTooLarge as exc:
            out.add("relations", f"{label}:test-set", False, np.inf, str(exc))
            continue
        k = len(ts)
        worst = max((w.max_residual for w in ts.witnesses.values()), default=0.0)
        out.add("relations", f"{label}:witnesses", worst <= 1e-8, worst, f"{len(ts.witnesses)} dominated pairs")
        if isinstance(sa, BundleAlgebra):
            from .domination import support_verdict

            bad = [
                (i, j)
                for i in range(k)
                for j in range(k)
                if support_verdict(sa, ts.elements[i], ts.elements[j], tol) != bool(ts.relation[i, j])
            ]
            out.add("relations", f"{label}:support-agreement", not bad, float(len(bad)), f"disagreements {bad[:5]}")
        compat = [[bool(are_compatible(sa, ts.elements[i], ts.elements[j], tol)) for j in range(k)] for i in range(k)]
        out.entries[-1].runtime = time.perf_counter() - t0
        tables[label] = {
            "labels": list(ts.labels),
            "dominates": ts.relation.astype(int).tolist(),
            "compatible": [[int(x) for x in row] for row in compat],
        }
        out.notes.extend(ts.notes)


def _reconstruct(inst: Instance, tol: Tolerance, seed: int, cap: int, out: SuiteReport) -> None:
    algs = _algebras(inst, tol, out.notes)
    if not algs:
        raise SuiteNotApplicable("reconstruct needs a corical bundle or a structured algebra")
    data = out.data.setdefault("reconstruct", {})
    for label, sa in algs:
        try:
            wb, dt = _timed(weyl_bundle, sa, None, tol, cap)
        except TestSetTooLarge as exc:
            out.add("reconstruct", f"{label}:test-set", False, np.inf, str(exc))
            continue
        ug = wb.ugroupoid
        out.add("reconstruct", f"{label}:ultrafilter-groupoid", ug.ok, 0.0, "; ".join(ug.report.lines()[:3]), dt)
        if isinstance(sa, BundleAlgebra):
            n = sa.bundle.base.n
            out.add("reconstruct", f"{label}:ultrafilter-count", len(ug.filters) == n, 0.0, f"{len(ug.filters)} vs {n}")
        plus = sum(len(prime_violations(f)) for f in ug.filters)
        out.add("reconstruct", f"{label}:prime-sums", plus == 0, float(plus))
        if ug.ok:
            bad_open = basic_open_violations(ug)
            out.add("reconstruct", f"{label}:slice-correspondence", not bad_open, float(len(bad_open)), "; ".join(bad_open[:3]))
            for c in validate_weyl_bundle(wb, 4, seed):
                out.add("reconstruct", f"{label}:{c.name}", c.ok, c.residual, c.detail)
            rr = representation_report(wb, 4, seed)
            for c in rr.checks:
                out.add("reconstruct", f"{label}:representation-{c.name}", c.ok, c.residual, c.detail)
        data[label] = {
            "groupoid": ug.groupoid.to_dict() if ug.groupoid is not None else None,
            "filters": [list(f.labels) for f in ug.filters],
            "fiber_dims": [f.dim for f in wb.fibers],
        }
        out.notes.extend(wb.notes)


def _roundtrip(inst: Instance, tol: Tolerance, seed: int, cap: int, out: SuiteReport) -> None:
    if inst.bundle is None:
        raise SuiteNotApplicable("roundtrip needs a bundle")
    if not coricality(inst.bundle, tol).is_corical:
        raise SuiteNotApplicable("roundtrip needs a corical bundle")
    rep, dt = _timed(roundtrip, inst.bundle, tol, 4, seed, 1e-8, cap)
    for c in rep.checks:
        out.add("roundtrip", c.name, c.ok, c.residual, c.detail)
    out.entries[-1].runtime = dt
    out.data["roundtrip"] = {
        "arrows": rep.n_arrows,
        "ultrafilters": rep.n_ultrafilters,
        "fiber_dims": {str(k): v for k, v in sorted(rep.fiber_dims.items())},
    }
    out.notes.extend(rep.notes)


def _morphisms(inst: Instance, seed: int, cap: int) -> list[FellMorphism]:
    if inst.morphism is not None:
        return [inst.morphism]
    n = inst.bundle.base.n
    # folds double the arrow count; pick a kind whose target stays under the cap
    kind = None if 2 * n + 1 <= cap else ("inclusion" if n + 1 <= cap and seed % 2 else "iso")
    return [identity_morphism(inst.bundle), random_morphism(inst.bundle, seed, kind)]


def _functors(inst: Instance, tol: Tolerance, seed: int, cap: int, out: SuiteReport) -> None:
    if inst.bundle is None and inst.structured is None:
        raise SuiteNotApplicable("functors needs a bundle or a structured algebra")
    if inst.bundle is not None and not coricality(inst.bundle, tol).is_corical:
        raise SuiteNotApplicable("the functor layer needs a corical bundle")
    for m in _morphisms(inst, seed, cap) if inst.bundle is not None else []:
        tag = m.name or "morphism"
        t0 = time.perf_counter()
        rep = validate_fell_morphism(m, tol, seed)
        out.add("functors", f"{tag}:fell-morphism", rep.ok, 0.0, "; ".join(rep.lines()[:3]))
        if not rep.ok:
            continue
        try:
            pi = ab_functor(m)
        except (InvalidMorphism, ValueError) as exc:
            out.add("functors", f"{tag}:ab", False, np.inf, str(exc))
            continue
        prep = validate_structured_morphism(pi, tol, seed=seed)
        out.add("functors", f"{tag}:ab-structured", prep.ok, 0.0, "; ".join(prep.lines()[:3]))
        ident = ab_functor(identity_morphism(m.source)).matrix
        law = float(np.abs(ab_functor(compose_fell(m, identity_morphism(m.source))).matrix - pi.matrix).max())
        out.add("functors", f"{tag}:ab-laws", law <= 1e-8 and np.allclose(ident, np.eye(len(ident))), law)
        try:
            sp = sp_functor(pi, seed=seed)
            adj = verify_adjunction(m.source, fell_morphism=m, structured_morphism=pi)
        except TestSetTooLarge as exc:
            out.skip("functors", f"{tag}: {exc}")
            continue
        out.add("functors", f"{tag}:sp", sp.ok, max(sp.residuals.values(), default=0.0), "; ".join(sp.diagnostics[:3]))
        for e in adj.entries:
            out.add("functors", f"{tag}:{e.name}", e.ok, e.residual, e.detail)
        out.notes.extend(adj.notes)
        out.entries[-1].runtime = time.perf_counter() - t0
    if inst.structured is not None:
        sa = inst.structured
        ident = StructuredMorphism.identity(sa)
        rep = validate_structured_morphism(ident, tol, seed=seed)
        out.add("functors", "structured:identity", rep.ok, 0.0, "; ".join(rep.lines()[:3]))
        try:
            weyl_of(sa)
        except (ValueError, TestSetTooLarge) as exc:
            out.add("functors", "structured:weyl", False, np.inf, str(exc))
            return
        from .functors import omega_isomorphism, omega_naturality, zigzag_algebra

        for e in (omega_naturality(ident, seed=seed), zigzag_algebra(sa), omega_isomorphism(sa)):
            out.add("functors", f"structured:{e.name}", e.ok, e.residual, e.detail)


_RUNNERS = {
    "validate": _validate,
    "props": _props,
    "relations": _relations,
    "reconstruct": _reconstruct,
    "roundtrip": _roundtrip,
    "functors": _functors,
}


def run_suite(
    instances: Iterable[Instance] | Instance,
    suites: Iterable[str],
    tol: Tolerance = DEFAULT_TOL,
    seed: int = 0,
    cap: int = DEFAULT_CAP,
) -> SuiteReport:
    """Run the requested suites on every instance.

    A suite that does not apply to an instance is recorded as skipped with its
    reason; SuiteNotApplicable is raised only when nothing requested applies.
    """
    if isinstance(instances, Instance):
        instances = [instances]
    instances = list(instances)
    suites = list(suites)
    for s in suites:
        if s not in _RUNNERS:
            raise SuiteNotApplicable(f"unknown suite {s!r}; known: {', '.join(SUITES)}")
    out = SuiteReport(seed, tol, cap)
    ran = 0
    for k, inst in enumerate(instances):
        prefix = f"{inst.name or k}: " if len(instances) > 1 else ""
        for s in suites:
            before = len(out.entries)
            try:
                _RUNNERS[s](inst, tol, seed, cap, out)
                ran += 1
            except SuiteNotApplicable as exc:
                out.skip(s, f"{prefix}{exc}")
            if prefix:
                for e in out.entries[before:]:
                    e.name = prefix + e.name
    if suites and instances and not ran:
        raise SuiteNotApplicable("; ".join(e.detail for e in out.entries if e.skipped))
    return out
