"""Instance files: JSON in, validated objects out, and deterministic generators.

Complex numbers are ``[re, im]`` pairs and matrices are row-major nested
lists.  Arrow ids are 0-based.  Every file carries ``schema_version``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .bundle import FellBundle, generate_bundle, validate_fell_bundle
from .functors import FellMorphism, validate_fell_morphism
from .groupoid import (
    FiniteGroupoid,
    GroupoidFunctor,
    InvalidParams,
    TwoCocycle,
    disjoint_union,
    named_group,
    pair,
    product,
    random_groupoid,
    validate_cocycle,
    validate_groupoid,
)
from .sections import Section
from .structured import StructuredAlgebra, cartan_pair, unfaithful_example

SCHEMA_VERSION = "1"

__all__ = [
    "SCHEMA_VERSION",
    "ParseError",
    "ValidationError",
    "Instance",
    "load_instance",
    "parse_instance",
    "instance_to_dict",
    "dumps",
    "generate",
]


class ParseError(ValueError):
    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line, self.column, self.message = line, column, message


class ValidationError(ValueError):
    def __init__(self, obj: str, axiom: str, detail: str = ""):
        super().__init__(f"{obj} fails {axiom}" + (f": {detail}" if detail else ""))
        self.object, self.axiom, self.detail = obj, axiom, detail


@dataclass
class Instance:
    bundle: FellBundle | None = None
    sections: dict[str, Section] = field(default_factory=dict)
    structured: StructuredAlgebra | None = None
    morphism: FellMorphism | None = None
    name: str = ""
    raw: dict = field(default_factory=dict, repr=False)


# ----------------------------------------------------------------- encoding


def _cx(v) -> list[float]:
    v = complex(v)
    return [float(v.real), float(v.imag)]


def _matrix_out(m: np.ndarray) -> list:
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    return [[_cx(x) for x in row] for row in m]


def _matrix_in(data, where: str) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(where, "matrix", "entries must be [re, im] pairs") from None
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ValidationError(where, "matrix", f"expected rows of [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def _vector_in(data, where: str) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2 or arr.shape[-1] != 2:
        raise ValidationError(where, "vector", "expected a list of [re, im] pairs")
    return arr[:, 0] + 1j * arr[:, 1]


def _twist_out(sigma: TwoCocycle) -> list:
    return [[a, b, _cx(v)] for (a, b), v in sorted(sigma.entries.items()) if v != 1]


def _twist_in(g: FiniteGroupoid, data) -> TwoCocycle:
    entries = {}
    for item in data or []:
        if len(item) == 3:
            a, b, (re, im) = item
        elif len(item) == 4:
            a, b, re, im = item
        else:
            raise ValidationError("twist", "entry", f"cannot read {item!r}")
        entries[(int(a), int(b))] = complex(re, im)
    return TwoCocycle(g, entries)


def _bundle_out(fb: FellBundle) -> dict:
    return {
        "groupoid": fb.base.to_dict(),
        "bundle": {"dims": {str(k): v for k, v in sorted(fb.dims.items())}, "twist": _twist_out(fb.twist)},
    }


def _bundle_in(data: Mapping, where: str = "") -> FellBundle:
    gdata = data.get("groupoid")
    if gdata is None:
        raise ValidationError(where + "groupoid", "presence", "missing groupoid block")
    try:
        g = FiniteGroupoid.from_dict(gdata)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(where + "groupoid", "schema", str(exc)) from None
    rep = validate_groupoid(g)
    if not rep.ok:
        v = rep.violations[0]
        raise ValidationError(where + "groupoid", v.check, f"at {v.location}: {v.message}")
    bdata = data.get("bundle", {"dims": 1})
    dims = bdata.get("dims", 1)
    dmap = {x: int(dims) for x in g.units} if isinstance(dims, int) else {int(k): int(v) for k, v in dims.items()}
    sigma = _twist_in(g, bdata.get("twist"))
    crep = validate_cocycle(g, sigma)
    if not crep.ok:
        v = crep.violations[0]
        raise ValidationError(where + "twist", v.check, f"arrow pair {v.location}: {v.message}")
    fb = FellBundle(g, dmap, sigma, gdata.get("name", ""))
    brep = validate_fell_bundle(fb)
    if not brep.ok:
        v = brep.violations[0]
        raise ValidationError(where + "bundle", v.check, f"at {v.location}: {v.message}")
    return fb


def instance_to_dict(
    fb: FellBundle | None = None,
    sections: Mapping[str, Section] | None = None,
    structured: StructuredAlgebra | None = None,
    morphism: FellMorphism | None = None,
    name: str = "",
) -> dict:
    out: dict[str, Any] = {"schema_version": SCHEMA_VERSION}
    if name:
        out["name"] = name
    if fb is not None:
        out.update(_bundle_out(fb))
    if sections:
        out["sections"] = {
            k: {str(a): _matrix_out(s[a]) for a in range(fb.base.n) if np.any(s[a])} for k, s in sections.items()
        }
    if structured is not None:
        out["structured"] = {
            "sizes": list(structured.sizes),
            "patterns": [[[_cx(x) for x in row] for row in p] for p in structured.s_patterns],
            "z": [[_cx(x) for x in z] for z in structured.z_coords],
            "phi": _matrix_out(structured.phi_matrix),
            "name": structured.name,
        }
        if structured.basis is not None:
            out["structured"]["basis"] = _matrix_out(structured.basis)
    if morphism is not None:
        out["morphism"] = {
            "target": _bundle_out(morphism.target),
            "phi": {str(k): v for k, v in sorted(morphism.phi.mapping.items())},
            "beta": {str(k): _matrix_out(v) for k, v in sorted(morphism.beta.items())},
            "unital": morphism.unital,
            "name": morphism.name,
        }
    return out


def dumps(data: Mapping) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


# ----------------------------------------------------------------- decoding


def _structured_in(data: Mapping) -> StructuredAlgebra:
    ex = data.get("example")
    if ex is not None:
        kind, _, arg = str(ex).partition(":")
        if kind == "cartan":
            return cartan_pair(int(arg or 2))
        if kind == "unfaithful":
            return unfaithful_example()
        raise ValidationError("structured", "example", f"unknown example {ex!r}")
    try:
        sizes = [int(n) for n in data["sizes"]]
        patterns = [np.array([_vector_in(r, "structured.patterns") for r in p]) for p in data["patterns"]]
        zs = [_vector_in(z, "structured.z") for z in data.get("z", [])]
        phi = _matrix_in(data["phi"], "structured.phi")
        basis = _matrix_in(data["basis"], "structured.basis") if "basis" in data else None
        return StructuredAlgebra(sizes, patterns, zs, phi, basis, data.get("name", "structured"))
    except KeyError as exc:
        raise ValidationError("structured", "presence", f"missing {exc.args[0]!r}") from None
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError("structured", "shape", str(exc)) from None


def parse_instance(data: Mapping) -> Instance:
    if not isinstance(data, Mapping):
        raise ValidationError("instance", "schema", "top level must be an object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValidationError("instance", "schema_version", f"expected {SCHEMA_VERSION!r}, got {version!r}")
    inst = Instance(name=data.get("name", ""), raw=dict(data))
    if "groupoid" in data:
        inst.bundle = _bundle_in(data)
    for key, values in (data.get("sections") or {}).items():
        if inst.bundle is None:
            raise ValidationError(f"sections.{key}", "presence", "sections need a bundle")
        fb = inst.bundle
        vals = {}
        for a, m in values.items():
            arr = _matrix_in(m, f"sections.{key}[{a}]")
            if arr.shape != fb.shape(int(a)):
                raise ValidationError(f"sections.{key}[{a}]", "shape", f"{arr.shape} ≠ {fb.shape(int(a))}")
            vals[int(a)] = arr
        inst.sections[key] = Section.from_map(fb, vals)
    if "structured" in data:
        inst.structured = _structured_in(data["structured"])
    if "morphism" in data:
        if inst.bundle is None:
            raise ValidationError("morphism", "presence", "a morphism needs a source bundle")
        md = data["morphism"]
        tgt = _bundle_in(md.get("target", {}), "morphism.target.")
        phi = GroupoidFunctor(tgt.base, inst.bundle.base, {int(k): int(v) for k, v in md.get("phi", {}).items()})
        beta = {int(k): _matrix_in(v, f"morphism.beta[{k}]") for k, v in md.get("beta", {}).items()}
        m = FellMorphism(inst.bundle, tgt, phi, beta, bool(md.get("unital", True)), md.get("name", ""))
        try:
            rep = validate_fell_morphism(m)
        except ValueError as exc:
            raise ValidationError("morphism", "functor", str(exc)) from None
        if not rep.ok:
            v = rep.violations[0]
            raise ValidationError("morphism", v.check, f"at {v.location}: {v.message}")
        inst.morphism = m
    return inst


def load_instance(path) -> Instance:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.lineno, exc.colno, exc.msg) from None
    return parse_instance(data)


# --------------------------------------------------------------- generators


def _groupoid_part(tok: str) -> FiniteGroupoid:
    if tok.startswith("p") and tok[1:].isdigit():
        return pair(int(tok[1:]))
    return named_group(tok)


def _dims_arg(tok: str | None):
    if tok is None or tok == "":
        return 1
    return int(tok) if tok.isdigit() else tok


def generate(spec: str, seed: int = 0) -> dict:
    """Instance dict for a family string.

    ``pair:n[:d]``, ``group:name[:twist]``, ``bundle:random[:dims[:twist]]``,
    ``bundle:product:n:group[:dims[:twist]]`` and ``disjoint:part,part,...``
    with parts ``p<n>`` or a group name.  ``d``/``dims`` is an integer,
    ``orbit`` or ``any``; twists are ``trivial``, ``bicharacter`` or
    ``random_bicharacter``.
    """
    parts = spec.split(":")
    fam = parts[0]
    try:
        if fam == "pair":
            g = pair(int(parts[1]))
            fb = generate_bundle(g, _dims_arg(parts[2] if len(parts) > 2 else None), "trivial", seed)
        elif fam == "group":
            g = named_group(parts[1])
            fb = generate_bundle(g, 1, parts[2] if len(parts) > 2 else "trivial", seed)
        elif fam == "bundle" and len(parts) > 1 and parts[1] == "random":
            g = random_groupoid(np.random.Generator(np.random.Philox(seed)))
            dims = _dims_arg(parts[2] if len(parts) > 2 else "orbit")
            fb = generate_bundle(g, dims, parts[3] if len(parts) > 3 else "random_bicharacter", seed)
        elif fam == "bundle" and len(parts) > 3 and parts[1] == "product":
            g = product(pair(int(parts[2])), named_group(parts[3]))
            dims = _dims_arg(parts[4] if len(parts) > 4 else None)
            fb = generate_bundle(g, dims, parts[5] if len(parts) > 5 else "trivial", seed)
        elif fam == "disjoint" and len(parts) > 1:
            g = disjoint_union(*(_groupoid_part(t) for t in parts[1].split(",")))
            fb = generate_bundle(g, _dims_arg(parts[2] if len(parts) > 2 else None), "trivial", seed)
        else:
            raise InvalidParams(f"unknown family string {spec!r}")
    except (IndexError, ValueError) as exc:
        if isinstance(exc, InvalidParams):
            raise
        raise InvalidParams(f"bad family string {spec!r}: {exc}") from None
    out = instance_to_dict(fb, name=spec)
    out["seed"] = seed
    return out
