"""Finite groupoids stored by explicit product table, with slices, functors and 2-cocycles.

Arrows are the integers ``0..n-1``.  A finite discrete groupoid is
automatically étale, so "open subgroupoid" below just means a subset closed
under products, inverses and the units of its arrows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Violation",
    "ValidationReport",
    "FiniteGroupoid",
    "GroupoidFunctor",
    "TwoCocycle",
    "InvalidParams",
    "InvalidFunctor",
    "validate_groupoid",
    "validate_cocycle",
    "is_slice",
    "is_star_bijective",
    "star_bijectivity_report",
    "validate_functor",
    "pair",
    "group",
    "cyclic",
    "klein",
    "disjoint_union",
    "group_bundle",
    "product",
    "generate",
    "bicharacter",
]


class InvalidParams(ValueError):
    pass


class InvalidFunctor(ValueError):
    pass


@dataclass(frozen=True)
class Violation:
    check: str
    location: tuple
    message: str

    def __str__(self) -> str:
        return f"{self.check} at {self.location}: {self.message}"


@dataclass
class ValidationReport:
    subject: str
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, check: str, location: tuple, message: str) -> None:
        self.violations.append(Violation(check, tuple(location), message))

    def extend(self, other: "ValidationReport") -> None:
        self.violations.extend(other.violations)

    def checks(self) -> set[str]:
        return {v.check for v in self.violations}

    def lines(self) -> list[str]:
        if self.ok:
            return [f"{self.subject}: ok"]
        return [f"{self.subject}: {v}" for v in self.violations]


@dataclass(frozen=True)
class FiniteGroupoid:
    """A finite groupoid given by its structure maps and product table.

    ``grading`` optionally labels each arrow by an element of Z2×Z2 so that
    the labelling is a functor; bicharacter twists are pulled back along it.
    """

    n: int
    units: tuple[int, ...]
    source: tuple[int, ...]
    range: tuple[int, ...]
    inverse: tuple[int, ...]
    product: Mapping[tuple[int, int], int]
    grading: tuple[tuple[int, int], ...] | None = None
    name: str = ""

    @classmethod
    def from_triples(
        cls,
        n: int,
        units: Iterable[int],
        source: Sequence[int],
        range: Sequence[int],
        inverse: Sequence[int],
        triples: Iterable[Sequence[int]],
        grading=None,
        name: str = "",
    ) -> "FiniteGroupoid":
        table = {(int(a), int(b)): int(c) for a, b, c in triples}
        return cls(
            int(n),
            tuple(sorted(int(u) for u in units)),
            tuple(int(x) for x in source),
            tuple(int(x) for x in range),
            tuple(int(x) for x in inverse),
            table,
            None if grading is None else tuple((int(a), int(b)) for a, b in grading),
            name,
        )

    def __hash__(self) -> int:
        return hash((self.n, self.units, self.source, self.range, self.inverse, self.name))

    def __eq__(self, other) -> bool:
        if not isinstance(other, FiniteGroupoid):
            return NotImplemented
        return (
            self.n == other.n
            and self.units == other.units
            and self.source == other.source
            and self.range == other.range
            and self.inverse == other.inverse
            and dict(self.product) == dict(other.product)
        )

    @property
    def elements(self) -> range:
        return range(self.n)

    @cached_property
    def unit_set(self) -> frozenset[int]:
        return frozenset(self.units)

    @cached_property
    def table(self) -> np.ndarray:
        """n×n array of products, −1 where undefined."""
        t = -np.ones((self.n, self.n), dtype=int)
        for (a, b), c in self.product.items():
            t[a, b] = c
        return t

    def mul(self, a: int, b: int) -> int | None:
        return self.product.get((a, b))

    def is_unit(self, a: int) -> bool:
        return a in self.unit_set

    @cached_property
    def composable(self) -> tuple[tuple[int, int], ...]:
        return tuple(sorted(self.product))

    @cached_property
    def star(self) -> dict[int, tuple[int, ...]]:
        """Arrows with source x, for each unit x."""
        out: dict[int, list[int]] = {x: [] for x in self.units}
        for a in range(self.n):
            out.setdefault(self.source[a], []).append(a)
        return {x: tuple(v) for x, v in out.items()}

    @cached_property
    def costar(self) -> dict[int, tuple[int, ...]]:
        """Arrows with range x, for each unit x."""
        out: dict[int, list[int]] = {x: [] for x in self.units}
        for a in range(self.n):
            out.setdefault(self.range[a], []).append(a)
        return {x: tuple(v) for x, v in out.items()}

    @cached_property
    def right_factors(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """For each α, the pairs (β, αβ) with αβ defined."""
        out: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for (a, b), c in sorted(self.product.items()):
            out[a].append((b, c))
        return tuple(tuple(v) for v in out)

    def maximal_slices(self, limit: int = 10_000) -> list[frozenset[int]]:
        """All slices that are maximal under inclusion (capped at ``limit``)."""
        units = list(self.units)
        found: list[frozenset[int]] = []

        def extend(i: int, chosen: list[int], used_ranges: set[int]) -> None:
            if len(found) >= limit:
                return
            if i == len(units):
                cand = frozenset(chosen)
                if _is_maximal_slice(self, cand):
                    found.append(cand)
                return
            x = units[i]
            options = [a for a in self.star[x] if self.range[a] not in used_ranges]
            for a in options:
                chosen.append(a)
                used_ranges.add(self.range[a])
                extend(i + 1, chosen, used_ranges)
                used_ranges.discard(self.range[a])
                chosen.pop()
            extend(i + 1, chosen, used_ranges)

        extend(0, [], set())
        return found

    def to_dict(self) -> dict:
        out = {
            "elements": self.n,
            "units": list(self.units),
            "source": list(self.source),
            "range": list(self.range),
            "inverse": list(self.inverse),
            "product": [[a, b, c] for (a, b), c in sorted(self.product.items())],
        }
        if self.grading is not None:
            out["grading"] = [list(g) for g in self.grading]
        if self.name:
            out["name"] = self.name
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "FiniteGroupoid":
        return cls.from_triples(
            data["elements"],
            data["units"],
            data["source"],
            data["range"],
            data["inverse"],
            data["product"],
            data.get("grading"),
            data.get("name", ""),
        )


def _is_maximal_slice(g: FiniteGroupoid, subset: frozenset[int]) -> bool:
    srcs = {g.source[a] for a in subset}
    rngs = {g.range[a] for a in subset}
    return not any(g.source[a] not in srcs and g.range[a] not in rngs for a in range(g.n))


def validate_groupoid(g: FiniteGroupoid) -> ValidationReport:
    rep = ValidationReport(f"groupoid{(' ' + g.name) if g.name else ''}")
    n = g.n
    for name, arr in (("source", g.source), ("range", g.range), ("inverse", g.inverse)):
        if len(arr) != n:
            rep.add("shape", (name,), f"{name} has length {len(arr)}, expected {n}")
    if not rep.ok:
        return rep
    for arr_name, arr in (("source", g.source), ("range", g.range)):
        for a in range(n):
            if arr[a] not in g.unit_set:
                rep.add("unit_map", (arr_name, a), f"{arr_name}({a}) = {arr[a]} is not a unit")
    for u in g.units:
        if not (0 <= u < n):
            rep.add("shape", ("unit", u), "unit id out of range")
            continue
        if g.source[u] != u or g.range[u] != u or g.inverse[u] != u:
            rep.add("unit_fixed", (u,), "units must be their own source, range and inverse")
    for (a, b), c in g.product.items():
        if not all(0 <= x < n for x in (a, b, c)):
            rep.add("shape", (a, b, c), "product entry out of range")
    if not rep.ok:
        return rep
    for a in range(n):
        for b in range(n):
            defined = (a, b) in g.product
            if defined != (g.source[a] == g.range[b]):
                rep.add(
                    "composability",
                    (a, b),
                    ("product defined" if defined else "product missing") + " against source/range",
                )
    for (a, b), c in g.product.items():
        if g.source[c] != g.source[b] or g.range[c] != g.range[a]:
            rep.add("source_range", (a, b, c), f"s/r of {a}·{b} = {c} do not match")
    for a in range(n):
        ai = g.inverse[a]
        if g.product.get((a, ai)) != g.range[a]:
            rep.add("inverse", (a,), f"{a}·{a}⁻¹ ≠ r({a})")
        if g.product.get((ai, a)) != g.source[a]:
            rep.add("inverse", (a,), f"{a}⁻¹·{a} ≠ s({a})")
        if g.product.get((g.range[a], a)) != a or g.product.get((a, g.source[a])) != a:
            rep.add("identity", (a,), f"units do not act as identities on {a}")
    for (a, b), ab in g.product.items():
        for c, _ in g.right_factors[b]:
            bc = g.product[(b, c)]
            left = g.product.get((ab, c))
            right = g.product.get((a, bc))
            if left != right:
                rep.add("associativity", (a, b, c), f"({a}·{b})·{c} = {left} but {a}·({b}·{c}) = {right}")
    if g.grading is not None:
        if len(g.grading) != n:
            rep.add("grading", (), "grading has wrong length")
        else:
            for (a, b), c in g.product.items():
                ga, gb, gc = g.grading[a], g.grading[b], g.grading[c]
                if ((ga[0] + gb[0]) % 2, (ga[1] + gb[1]) % 2) != tuple(gc):
                    rep.add("grading", (a, b), "grading is not multiplicative")
    return rep


def is_slice(g: FiniteGroupoid, subset: Iterable[int]) -> bool:
    items = list(subset)
    srcs = [g.source[a] for a in items]
    rngs = [g.range[a] for a in items]
    return len(set(items)) == len(items) and len(set(srcs)) == len(srcs) and len(set(rngs)) == len(rngs)


# ---------------------------------------------------------------- functors


@dataclass(frozen=True)
class GroupoidFunctor:
    """φ from an open subgroupoid ``domain`` of ``source_groupoid`` into ``target``.

    Note the direction used by Fell morphisms: φ goes from the new base Γ′
    back to the old base Γ.
    """

    source_groupoid: FiniteGroupoid
    target: FiniteGroupoid
    mapping: Mapping[int, int]

    @property
    def domain(self) -> frozenset[int]:
        return frozenset(self.mapping)

    def __call__(self, a: int) -> int:
        return self.mapping[a]

    def compose(self, inner: "GroupoidFunctor") -> "GroupoidFunctor":
        """self ∘ inner, defined where inner lands in self's domain."""
        if inner.target != self.source_groupoid:
            raise InvalidFunctor("functors are not composable")
        mapping = {a: self.mapping[b] for a, b in inner.mapping.items() if b in self.mapping}
        return GroupoidFunctor(inner.source_groupoid, self.target, mapping)

    @classmethod
    def identity(cls, g: FiniteGroupoid) -> "GroupoidFunctor":
        return cls(g, g, {a: a for a in range(g.n)})


def validate_functor(f: GroupoidFunctor) -> ValidationReport:
    rep = ValidationReport("functor")
    g, h = f.source_groupoid, f.target
    dom = f.domain
    for a, b in f.mapping.items():
        if not (0 <= a < g.n) or not (0 <= b < h.n):
            rep.add("range", (a, b), "arrow id out of range")
    if not rep.ok:
        return rep
    for a in dom:
        for needed in (g.source[a], g.range[a], g.inverse[a]):
            if needed not in dom:
                rep.add("open_subgroupoid", (a, needed), "domain not closed under s, r and inverse")
    for (a, b), c in g.product.items():
        if a in dom and b in dom:
            if c not in dom:
                rep.add("open_subgroupoid", (a, b), "domain not closed under products")
                continue
            fab = h.mul(f(a), f(b))
            if fab != f(c):
                rep.add("multiplicative", (a, b), f"φ({a}·{b}) = {f(c)} but φ({a})·φ({b}) = {fab}")
    for a in dom:
        if g.is_unit(a) and not h.is_unit(f(a)):
            rep.add("units", (a,), f"unit {a} maps to non-unit {f(a)}")
        if f(g.inverse[a]) != h.inverse[f(a)]:
            rep.add("inverse", (a,), "φ does not preserve inverses")
    return rep


def star_bijectivity_report(f: GroupoidFunctor) -> ValidationReport:
    """For each unit x of the domain and γ with s(γ) = φ(x): exactly one preimage from x."""
    base = validate_functor(f)
    if not base.ok:
        raise InvalidFunctor("; ".join(str(v) for v in base.violations))
    rep = ValidationReport("star-bijectivity")
    g, h = f.source_groupoid, f.target
    dom = f.domain
    for x in g.units:
        if x not in dom:
            continue
        counts: dict[int, list[int]] = {gam: [] for gam in h.star.get(f(x), ())}
        for a in g.star[x]:
            if a in dom:
                counts.setdefault(f(a), []).append(a)
        for gam, pre in sorted(counts.items()):
            if len(pre) != 1:
                rep.add(
                    "star_bijective",
                    (x, gam),
                    f"{len(pre)} arrows from unit {x} map to {gam}: {pre}",
                )
    return rep


def is_star_bijective(f: GroupoidFunctor) -> bool:
    return star_bijectivity_report(f).ok


# ---------------------------------------------------------------- cocycles


@dataclass(frozen=True)
class TwoCocycle:
    """Unit-modulus function on composable pairs; missing entries are 1."""

    groupoid: FiniteGroupoid
    entries: Mapping[tuple[int, int], complex] = field(default_factory=dict)

    def __call__(self, a: int, b: int) -> complex:
        return self.entries.get((a, b), 1.0 + 0.0j)

    def __hash__(self) -> int:
        return hash((self.groupoid, tuple(sorted(self.entries.items(), key=lambda kv: kv[0]))))

    @cached_property
    def array(self) -> np.ndarray:
        t = np.ones((self.groupoid.n, self.groupoid.n), dtype=complex)
        for (a, b), v in self.entries.items():
            t[a, b] = v
        return t

    @classmethod
    def trivial(cls, g: FiniteGroupoid) -> "TwoCocycle":
        return cls(g, {})

    def with_entry(self, a: int, b: int, value: complex) -> "TwoCocycle":
        entries = dict(self.entries)
        entries[(a, b)] = complex(value)
        return TwoCocycle(self.groupoid, entries)

    def to_list(self) -> list[list]:
        return [[a, b, float(v.real), float(v.imag)] for (a, b), v in sorted(self.entries.items()) if v != 1]


def validate_cocycle(g: FiniteGroupoid, sigma: TwoCocycle, atol: float = 1e-12) -> ValidationReport:
    rep = ValidationReport("cocycle")
    for (a, b), v in sigma.entries.items():
        if (a, b) not in g.product:
            rep.add("domain", (a, b), "twist entry on a non-composable pair")
        elif abs(abs(v) - 1.0) > atol:
            rep.add("unit_modulus", (a, b), f"|σ({a},{b})| = {abs(v):.6g} ≠ 1")
    for a in range(g.n):
        if abs(sigma(g.range[a], a) - 1) > atol:
            rep.add("normalized", (g.range[a], a), "σ(r(γ), γ) ≠ 1")
        if abs(sigma(a, g.source[a]) - 1) > atol:
            rep.add("normalized", (a, g.source[a]), "σ(γ, s(γ)) ≠ 1")
    for (a, b), ab in g.product.items():
        for c, bc in g.right_factors[b]:
            lhs = sigma(a, b) * sigma(ab, c)
            rhs = sigma(b, c) * sigma(a, bc)
            if abs(lhs - rhs) > atol:
                rep.add("cocycle_identity", (a, b, c), f"σ(α,β)σ(αβ,γ) − σ(β,γ)σ(α,βγ) = {lhs - rhs:.3g}")
    return rep


def bicharacter(g: FiniteGroupoid, form: Sequence[Sequence[int]] = ((0, 0), (1, 0))) -> TwoCocycle:
    """σ(α,β) = (−1)^{x_α·M·y_β} pulled back along the Z2×Z2 grading.

    The default form gives σ((a,b),(c,d)) = (−1)^{b·c}.
    """
    if g.grading is None:
        raise InvalidParams("bicharacter twist needs a Z2×Z2 grading on the groupoid")
    m = np.asarray(form, dtype=int) % 2
    entries: dict[tuple[int, int], complex] = {}
    for (a, b) in g.product:
        x = np.asarray(g.grading[a])
        y = np.asarray(g.grading[b])
        if int(x @ m @ y) % 2:
            entries[(a, b)] = -1.0 + 0.0j
    return TwoCocycle(g, entries)


# ---------------------------------------------------------------- generators


def pair(n: int) -> FiniteGroupoid:
    """Pair groupoid on n points; arrow (i, j) has id i·n + j, range i, source j."""
    if n < 1:
        raise InvalidParams("pair groupoid needs n ≥ 1")
    idx = lambda i, j: i * n + j  # noqa: E731
    src, rng, inv = [], [], []
    for i in range(n):
        for j in range(n):
            src.append(idx(j, j))
            rng.append(idx(i, i))
            inv.append(idx(j, i))
    triples = [(idx(i, j), idx(j, k), idx(i, k)) for i in range(n) for j in range(n) for k in range(n)]
    return FiniteGroupoid.from_triples(
        n * n, [idx(i, i) for i in range(n)], src, rng, inv, triples, [(0, 0)] * (n * n), f"pair({n})"
    )


def group(table: Sequence[Sequence[int]], grading=None, name: str = "group") -> FiniteGroupoid:
    """One-unit groupoid from a Cayley table; the identity is detected from the table."""
    t = np.asarray(table, dtype=int)
    k = t.shape[0]
    if t.shape != (k, k) or t.min() < 0 or t.max() >= k:
        raise InvalidParams("group table must be a k×k table of ids in 0..k-1")
    ids = [e for e in range(k) if all(t[e, a] == a and t[a, e] == a for a in range(k))]
    if len(ids) != 1:
        raise InvalidParams("group table has no two-sided identity")
    e = ids[0]
    inv = []
    for a in range(k):
        cands = [b for b in range(k) if t[a, b] == e]
        if len(cands) != 1:
            raise InvalidParams(f"element {a} has no unique inverse")
        inv.append(cands[0])
    triples = [(a, b, int(t[a, b])) for a in range(k) for b in range(k)]
    return FiniteGroupoid.from_triples(k, [e], [e] * k, [e] * k, inv, triples, grading, name)


def cyclic(k: int) -> FiniteGroupoid:
    if k < 1:
        raise InvalidParams("cyclic group needs k ≥ 1")
    grading = [(0, a % 2) for a in range(k)] if k % 2 == 0 else [(0, 0)] * k
    return group([[(a + b) % k for b in range(k)] for a in range(k)], grading, f"Z{k}")


def klein() -> FiniteGroupoid:
    """Z2×Z2 with (a, b) stored at id 2a + b and graded by itself."""
    elems = [(a, b) for a in range(2) for b in range(2)]
    table = [[2 * ((x[0] + y[0]) % 2) + (x[1] + y[1]) % 2 for y in elems] for x in elems]
    return group(table, elems, "Z2xZ2")


def disjoint_union(*parts: FiniteGroupoid) -> FiniteGroupoid:
    offset = 0
    units, src, rng, inv, triples, grading = [], [], [], [], [], []
    for g in parts:
        units += [u + offset for u in g.units]
        src += [x + offset for x in g.source]
        rng += [x + offset for x in g.range]
        inv += [x + offset for x in g.inverse]
        triples += [(a + offset, b + offset, c + offset) for (a, b), c in g.product.items()]
        grading += list(g.grading) if g.grading is not None else [(0, 0)] * g.n
        offset += g.n
    name = " ⊔ ".join(g.name or "?" for g in parts)
    return FiniteGroupoid.from_triples(offset, units, src, rng, inv, triples, grading, name)


def product(left: FiniteGroupoid, right: FiniteGroupoid) -> FiniteGroupoid:
    """Direct product; arrow (a, b) has id a·|right| + b."""
    m = right.n
    idx = lambda a, b: a * m + b  # noqa: E731
    n = left.n * m
    src = [0] * n
    rng = [0] * n
    inv = [0] * n
    grading = []
    lg = left.grading or [(0, 0)] * left.n
    rg = right.grading or [(0, 0)] * right.n
    for a in range(left.n):
        for b in range(m):
            i = idx(a, b)
            src[i] = idx(left.source[a], right.source[b])
            rng[i] = idx(left.range[a], right.range[b])
            inv[i] = idx(left.inverse[a], right.inverse[b])
            grading.append(((lg[a][0] + rg[b][0]) % 2, (lg[a][1] + rg[b][1]) % 2))
    triples = [
        (idx(a1, b1), idx(a2, b2), idx(c1, c2))
        for (a1, a2), c1 in left.product.items()
        for (b1, b2), c2 in right.product.items()
    ]
    units = [idx(u, v) for u in left.units for v in right.units]
    return FiniteGroupoid.from_triples(n, units, src, rng, inv, triples, grading, f"{left.name}×{right.name}")


def group_bundle(units: int, grp: FiniteGroupoid) -> FiniteGroupoid:
    """``units`` disjoint copies of a group."""
    if units < 1:
        raise InvalidParams("group bundle needs at least one unit")
    if len(grp.units) != 1:
        raise InvalidParams("group bundle fibre must be a group")
    g = disjoint_union(*([grp] * units))
    return FiniteGroupoid(g.n, g.units, g.source, g.range, g.inverse, g.product, g.grading, f"{units}×{grp.name}")


_NAMED_GROUPS = {
    "trivial": lambda: cyclic(1),
    "z2": lambda: cyclic(2),
    "z3": lambda: cyclic(3),
    "z4": lambda: cyclic(4),
    "z2xz2": klein,
}


def named_group(name: str) -> FiniteGroupoid:
    try:
        return _NAMED_GROUPS[name.lower()]()
    except KeyError:
        raise InvalidParams(f"unknown group {name!r}; known: {sorted(_NAMED_GROUPS)}") from None


def generate(family: str, params=(), seed: int = 0) -> FiniteGroupoid:
    """Deterministic groupoid from a family name.

    Families: ``pair`` (n), ``group`` (name or Cayley table), ``group_bundle``
    (units, name), ``disjoint_union`` (list of (family, params)), ``product``
    ((family, params), (family, params)), ``random`` (uses ``seed``).
    """
    if family == "pair":
        (n,) = params
        return pair(int(n))
    if family == "group":
        (spec,) = params
        return named_group(spec) if isinstance(spec, str) else group(spec)
    if family == "group_bundle":
        k, name = params
        return group_bundle(int(k), named_group(name))
    if family == "disjoint_union":
        return disjoint_union(*(generate(f, p, seed) for f, p in params))
    if family == "product":
        (f1, p1), (f2, p2) = params
        return product(generate(f1, p1, seed), generate(f2, p2, seed))
    if family == "random":
        return random_groupoid(np.random.Generator(np.random.Philox(seed)), *params)
    raise InvalidParams(f"unknown groupoid family {family!r}")


def random_groupoid(rng: np.random.Generator, max_units: int = 4, max_arrows: int = 16) -> FiniteGroupoid:
    """A disjoint union of pair groupoids, groups, and pair×group products within the size caps."""
    parts: list[FiniteGroupoid] = []
    units_left, arrows_left = max_units, max_arrows
    while units_left > 0 and arrows_left > 0:
        choices = []
        for n in range(1, units_left + 1):
            for gname in ("trivial", "z2", "z3", "z2xz2"):
                size = n * n * len(named_group(gname).elements)
                if size <= arrows_left and not (n == 1 and gname == "trivial" and parts):
                    choices.append((n, gname))
        if not choices:
            break
        n, gname = choices[int(rng.integers(len(choices)))]
        grp = named_group(gname)
        part = pair(n) if gname == "trivial" else (grp if n == 1 else product(pair(n), grp))
        parts.append(part)
        units_left -= n
        arrows_left -= part.n
        if rng.random() < 0.5:
            break
    return parts[0] if len(parts) == 1 else disjoint_union(*parts)
