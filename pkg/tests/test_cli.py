import json
from pathlib import Path

import pytest
from click.testing import CliRunner

import fellweyl
from fellweyl.cli import main
from fellweyl.instance import generate

DATA = Path(fellweyl.__file__).parent / "data"


@pytest.fixture
def run():
    runner = CliRunner()

    def _run(*args):
        return runner.invoke(main, [str(a) for a in args], catch_exceptions=False)

    return _run


def test_version(run):
    res = run("--version")
    assert res.exit_code == 0 and fellweyl.__version__ in res.output


@pytest.mark.parametrize("cmd", ["validate", "props", "relations", "reconstruct", "roundtrip"])
def test_subcommands_pass_on_pair_line(run, cmd):
    res = run(cmd, DATA / "pair2_line.json")
    assert res.exit_code == 0, res.output
    assert "overall" in res.output


def test_functors_pass_on_pair_line(run):
    res = run("functors", DATA / "pair2_line.json")
    assert res.exit_code == 0, res.output


def test_json_report(run):
    res = run("roundtrip", DATA / "klein_twisted.json", "--format", "json", "--seed", 3)
    assert res.exit_code == 0
    rep = json.loads(res.output)
    assert rep["pass"] is True and rep["seed"] == 3 and rep["rng"] == "philox"
    assert rep["tolerance"]["abs"] == 1e-9
    assert all(c["pass"] for c in rep["checks"])


def test_unfaithful_instance_fails(run):
    res = run("report", DATA / "unfaithful.json", "--format", "json")
    assert res.exit_code == 1
    failed = {c["name"] for c in json.loads(res.output)["checks"] if not c["pass"]}
    assert any("isometric" in n for n in failed)


def test_non_corical_bundle_skips_with_reason(run):
    res = run("report", DATA / "pair2_mixed.json", "--format", "json")
    assert res.exit_code == 0
    skipped = [c for c in json.loads(res.output)["checks"] if c.get("skipped")]
    assert skipped and all(c["detail"] for c in skipped)


def test_only_inapplicable_suites_is_an_input_error(run):
    res = run("roundtrip", DATA / "pair2_mixed.json")
    assert res.exit_code == 2


def test_missing_and_malformed_inputs(run, tmp_path):
    assert run("validate", tmp_path / "nope.json").exit_code == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema_version": "1", ')
    res = run("validate", bad)
    assert res.exit_code == 2 and "line" in res.output
    twisted = generate("pair:2")
    twisted["bundle"]["twist"] = [[1, 2, [0.5, 0.0]]]
    tw = tmp_path / "tw.json"
    tw.write_text(json.dumps(twisted))
    res = run("validate", tw)
    assert res.exit_code == 2 and "unit_modulus" in res.output


def test_bad_tolerance_is_an_input_error(run):
    assert run("validate", DATA / "pair2_line.json", "--tol-abs", -1).exit_code == 2


def test_gen_writes_loadable_json(run, tmp_path):
    out = tmp_path / "g.json"
    res = run("gen", "pair:3:2", "--seed", 4, "--out", out)
    assert res.exit_code == 0
    data = json.loads(out.read_text())
    assert data["groupoid"]["elements"] == 9
    assert run("validate", out).exit_code == 0


def test_gen_is_deterministic_on_stdout(run):
    a = run("gen", "bundle:random", "--seed", 9, "--format", "json").output
    b = run("gen", "bundle:random", "--seed", 9, "--format", "json").output
    assert a == b and json.loads(a)["seed"] == 9


def test_gen_rejects_bad_family(run):
    assert run("gen", "widget:3").exit_code == 2


def test_out_file(run, tmp_path):
    out = tmp_path / "r.json"
    res = run("validate", DATA / "pair2_line.json", "--format", "json", "--out", out)
    assert res.exit_code == 0 and res.output == ""
    assert json.loads(out.read_text())["pass"] is True


def test_morphism_from_second_file(run, tmp_path):
    from fellweyl.functors import canonical_morphisms
    from fellweyl.instance import dumps, instance_to_dict

    m = canonical_morphisms()["swap"]
    mf = tmp_path / "m.json"
    mf.write_text(dumps(instance_to_dict(m.source, morphism=m)))
    res = run("functors", DATA / "pair2_line.json", "--morphism", mf, "--format", "json")
    assert res.exit_code == 0, res.output
    names = [c["name"] for c in json.loads(res.output)["checks"]]
    assert any(n.startswith("swap:") for n in names)
    empty = tmp_path / "e.json"
    empty.write_text("{}")
    assert run("functors", DATA / "pair2_line.json", "--morphism", empty).exit_code == 2


def test_multiple_files_are_prefixed(run):
    res = run("validate", DATA / "pair2_line.json", DATA / "klein_twisted.json", "--format", "json")
    assert res.exit_code == 0
    names = [c["name"] for c in json.loads(res.output)["checks"]]
    assert any(n.startswith("pair:2:1: ") for n in names)
    assert any(n.startswith("group:z2xz2:bicharacter: ") for n in names)


def test_empty_suite_list_is_an_empty_pass():
    from fellweyl.instance import load_instance
    from fellweyl.suite import SuiteNotApplicable, run_suite

    rep = run_suite(load_instance(DATA / "pair2_line.json"), [])
    assert rep.ok and not rep.entries
    with pytest.raises(SuiteNotApplicable):
        run_suite(load_instance(DATA / "pair2_line.json"), ["nonsense"])
