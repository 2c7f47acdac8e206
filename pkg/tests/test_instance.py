import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from strategies import bundle_and_sections, seeds

import fellweyl
from fellweyl.functors import canonical_morphisms, random_morphism
from fellweyl.groupoid import InvalidParams
from fellweyl.instance import (
    ParseError,
    ValidationError,
    dumps,
    generate,
    instance_to_dict,
    load_instance,
    parse_instance,
)
from fellweyl.structured import cartan_pair

DATA = Path(fellweyl.__file__).parent / "data"


@pytest.mark.parametrize("path", sorted(DATA.glob("*.json")), ids=lambda p: p.stem)
def test_bundled_examples_load(path):
    inst = load_instance(path)
    assert inst.bundle is not None or inst.structured is not None


def test_pair_line_example():
    inst = load_instance(DATA / "pair2_line.json")
    assert inst.bundle.base.n == 4
    assert inst.bundle.dims == {0: 1, 3: 1}


def test_broken_cocycle_is_located():
    d = generate("pair:2")
    d["bundle"]["twist"] = [[1, 2, [2.0, 0.0]]]
    with pytest.raises(ValidationError) as err:
        parse_instance(d)
    assert (err.value.object, err.value.axiom) == ("twist", "unit_modulus")
    assert "(1, 2)" in err.value.detail


def test_truncated_file_reports_position(tmp_path):
    text = (DATA / "pair2_line.json").read_text()
    bad = tmp_path / "cut.json"
    bad.write_text(text[: len(text) // 2])
    with pytest.raises(ParseError) as err:
        load_instance(bad)
    assert err.value.line > 1 and err.value.column >= 1


@pytest.mark.parametrize("version", [None, "2", 1])
def test_schema_version_is_required(version):
    d = generate("pair:2")
    d["schema_version"] = version
    with pytest.raises(ValidationError, match="schema_version"):
        parse_instance(d)


def test_groupoid_axiom_failure_is_reported():
    d = generate("pair:2")
    d["groupoid"]["inverse"] = [0, 1, 2, 3]
    with pytest.raises(ValidationError) as err:
        parse_instance(d)
    assert err.value.object == "groupoid"


def test_section_shape_is_checked():
    d = generate("pair:2:2")
    d["sections"] = {"a": {"1": [[[1, 0]]]}}
    with pytest.raises(ValidationError, match="shape"):
        parse_instance(d)


@pytest.mark.parametrize(
    "spec",
    ["pair:3", "pair:3:2", "group:z3", "group:z2xz2:bicharacter", "bundle:random", "bundle:product:2:z2", "disjoint:p2,z3"],
)
def test_generate_is_deterministic(spec):
    assert dumps(generate(spec, 5)) == dumps(generate(spec, 5))
    parse_instance(generate(spec, 5))


def test_generate_pair_with_matrix_fibres():
    inst = parse_instance(generate("pair:3:2"))
    assert inst.bundle.base.n == 9
    assert all(inst.bundle.shape(a) == (2, 2) for a in range(9))


def test_random_family_depends_on_seed():
    outs = {dumps({k: v for k, v in generate("bundle:random", s).items() if k != "seed"}) for s in range(6)}
    assert len(outs) > 1


@pytest.mark.parametrize("spec", ["pair", "pair:x", "group:nope", "bundle:weird", "widget:3", "pair:2:0"])
def test_bad_family_strings(spec):
    with pytest.raises(InvalidParams):
        generate(spec)


@settings(max_examples=20)
@given(bundle_and_sections(k=2), seeds)
def test_dict_roundtrip(fbab, seed):
    fb, a, b = fbab
    m = random_morphism(fb, seed)
    d = json.loads(dumps(instance_to_dict(fb, {"a": a, "b": b}, morphism=m, name="x")))
    inst = parse_instance(d)
    assert inst.bundle == fb
    assert np.allclose(inst.sections["a"].to_vector(), a.to_vector())
    assert np.allclose(inst.sections["b"].to_vector(), b.to_vector())
    assert inst.morphism.target == m.target
    assert all(np.allclose(inst.morphism.beta[k], m.beta[k]) for k in m.beta)


def test_structured_roundtrip():
    sa = cartan_pair(2)
    inst = parse_instance(json.loads(dumps(instance_to_dict(structured=sa))))
    assert inst.structured.dim == sa.dim
    assert np.allclose(inst.structured.phi_matrix, sa.phi_matrix)


def test_canonical_fold_survives_serialisation():
    m = canonical_morphisms()["fold"]
    inst = parse_instance(instance_to_dict(m.source, morphism=m))
    assert inst.morphism.phi.mapping == m.phi.mapping
