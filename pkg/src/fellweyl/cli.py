"""Command line entry point: ``fellweyl <subcommand> [options] FILES``.

Exit status is 0 when every check passes, 1 when any check fails and 2 on
input errors (unreadable or invalid files, bad family strings, suites that
do not apply to anything supplied).
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from .groupoid import InvalidParams
from .instance import ParseError, ValidationError, dumps, generate, load_instance, parse_instance
from .numeric import Tolerance
from .suite import SUITES, SuiteNotApplicable, SuiteReport, run_suite
from .weyl import DEFAULT_CAP

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(click.ClickException):
    exit_code = EXIT_INPUT


def _common(fn):
    @click.option("--tol-abs", type=float, default=1e-9, show_default=True, help="Absolute tolerance.")
    @click.option("--tol-rel", type=float, default=1e-9, show_default=True, help="Relative tolerance.")
    @click.option("--inv-threshold", type=float, default=1e-9, show_default=True, help="Invertibility threshold.")
    @click.option("--seed", type=int, default=0, show_default=True, help="Seed for the Philox generator.")
    @click.option("--max-test-set", type=int, default=DEFAULT_CAP, show_default=True, help="Test-set cap.")
    @click.option("--out", type=click.Path(dir_okay=False, writable=True), default=None, help="Write here instead of stdout.")
    @click.option("--format", "fmt", type=click.Choice(["human", "json"]), default="human", show_default=True)
    @functools.wraps(fn)
    def wrapper(*args, tol_abs, tol_rel, inv_threshold, **kwargs):
        try:
            tol = Tolerance(tol_abs, tol_rel, inv_threshold)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        return fn(*args, tol=tol, **kwargs)

    return wrapper


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        click.echo(text)


def _load(paths) -> list:
    insts = []
    for p in paths:
        try:
            insts.append(load_instance(p))
        except ParseError as exc:
            raise InputError(f"{p}: parse error at {exc}") from None
        except ValidationError as exc:
            raise InputError(f"{p}: {exc}") from None
        except OSError as exc:
            raise InputError(f"{p}: {exc.strerror or exc}") from None
        if not insts[-1].name:
            insts[-1].name = Path(p).stem
    return insts


def _finish(report: SuiteReport, fmt: str, out: str | None) -> None:
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True) if fmt == "json" else report.human()
    _emit(text, out)
    sys.exit(EXIT_OK if report.ok else EXIT_FAIL)


def _run(paths, suites, tol, seed, max_test_set, fmt, out, instances=None) -> None:
    insts = instances if instances is not None else _load(paths)
    try:
        report = run_suite(insts, suites, tol, seed, max_test_set)
    except SuiteNotApplicable as exc:
        raise InputError(str(exc)) from None
    _finish(report, fmt, out)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(package_name="artifact")
def main() -> None:
    """Fell bundles, structured algebras and their Weyl reconstruction at finite scale."""


def _suite_command(name: str, suites: tuple[str, ...], help_text: str):
    @main.command(name, help=help_text)
    @click.argument("files", nargs=-1, required=True, type=click.Path())
    @_common
    def cmd(files, tol, seed, max_test_set, fmt, out):
        _run(files, list(suites), tol, seed, max_test_set, fmt, out)

    return cmd


_suite_command("validate", ("validate",), "Check every object in the files against its axioms.")
_suite_command("relations", ("relations",), "Domination and compatibility tables over the default test set.")
_suite_command("reconstruct", ("reconstruct",), "Ultrafilter groupoid, Weyl fibres and representation checks.")
_suite_command("roundtrip", ("roundtrip",), "Rebuild each bundle from its structured view and compare.")
_suite_command("report", SUITES, "Run every suite that applies.")


@main.command("props")
@click.argument("files", nargs=-1, required=True, type=click.Path())
@click.option("--relations", "with_relations", is_flag=True, help="Also dump the domination and compatibility tables.")
@_common
def props(files, with_relations, tol, seed, max_test_set, fmt, out):
    """Norm laws and structured-algebra properties."""
    _run(files, ["props"] + (["relations"] if with_relations else []), tol, seed, max_test_set, fmt, out)


@main.command("functors")
@click.argument("files", nargs=-1, required=True, type=click.Path())
@click.option(
    "--morphism",
    "morphism_file",
    type=click.Path(),
    default=None,
    help="File whose morphism block is read against the first file's bundle.",
)
@_common
def functors(files, morphism_file, tol, seed, max_test_set, fmt, out):
    """Fell morphisms, the Ab and Sp functors and the adjunction checks.

    Without a morphism block the identity and a seeded random morphism are used.
    """
    insts = _load(files)
    if morphism_file is not None:
        try:
            raw = json.loads(Path(morphism_file).read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"{morphism_file}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}")
        except OSError as exc:
            raise InputError(f"{morphism_file}: {exc.strerror or exc}") from None
        if "morphism" not in raw:
            raise InputError(f"{morphism_file}: no morphism block")
        merged = dict(insts[0].raw)
        merged["morphism"] = raw["morphism"]
        try:
            insts[0] = parse_instance(merged)
        except ValidationError as exc:
            raise InputError(f"{morphism_file}: {exc}") from None
    _run(files, ["functors"], tol, seed, max_test_set, fmt, out, instances=insts)


@main.command("gen")
@click.argument("family")
@_common
def gen(family, tol, seed, max_test_set, fmt, out):
    """Emit a generated instance file for FAMILY (a summary goes to stderr).

    Families: pair:n[:d], group:name[:twist], bundle:random[:dims[:twist]],
    bundle:product:n:group[:dims[:twist]], disjoint:p2,z3[:d].
    """
    try:
        data = generate(family, seed)
    except InvalidParams as exc:
        raise InputError(str(exc)) from None
    _emit(dumps(data).rstrip("\n"), out)
    if fmt == "human":
        g = data["groupoid"]
        click.echo(
            f"{family} seed {seed}: {g['elements']} arrows, {len(g['units'])} units, "
            f"dims {data['bundle']['dims']}, {len(data['bundle']['twist'])} nontrivial twist entries",
            err=True,
        )


if __name__ == "__main__":  # pragma: no cover
    main()
