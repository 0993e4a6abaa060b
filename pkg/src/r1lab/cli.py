"""Command line front door: build towers, run sweeps, verify identities.

Recipes are JSON files (schema below); towers round-trip through a JSON
snapshot that embeds the recipe, the derived stage data and, for random
spacers, the raw draws, so published runs replay without the generator.
Sweep output is CSV with a versioned header comment; single verdicts are
JSON.  All emitted numerics are exact ``p/q`` strings unless a decimal
column is requested, in which case the digit count is part of the column
name.

Recipe schema::

    {
      "name": "staircase",
      "cuts": {"kind": "affine", "a": 1, "b": 2},
      "spacers": {"kind": "staircase"},
      "depth": 8
    }

cut kinds: explicit {values}, constant {value}, affine {a, b},
doubling-minus-two {}.  spacer kinds: explicit {values | pattern},
staircase {}, zero {}, example52 {}, ornstein {ranges, seed} (ranges is a
cut-rule object; seed is mandatory).  Unknown fields are rejected.

Exit codes: 0 success, 1 verification failure, 2 invalid recipe/snapshot,
3 height budget exceeded, 4 parameter out of range.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from fractions import Fraction
from typing import Optional, Sequence

from . import analysis
from .constructions import Recipe, SpacerRule
from .dynseq import CutRule
from .numeric import Enclosure, as_rational, decimal_approx, render_rational
from .tower import BudgetExceededError, IdentityCheckError, LevelSet, Tower

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_SCHEMA = 2
EXIT_BUDGET = 3
EXIT_PARAMETER = 4

CSV_HEADER = "# r1lab v1"
SNAPSHOT_FORMAT = "r1lab-tower"
SNAPSHOT_VERSION = 1


class SchemaError(Exception):
    """Invalid recipe or snapshot; message names the offending field."""


def _require(condition: bool, where: str, message: str) -> None:
    if not condition:
        raise SchemaError(f"{where}: {message}")


def _only_fields(data: dict, where: str, allowed: set[str]) -> None:
    unknown = set(data) - allowed
    _require(not unknown, where, f"unknown fields {sorted(unknown)}")


def _int_field(data: dict, where: str, name: str) -> int:
    _require(name in data, where, f"missing field {name!r}")
    value = data[name]
    _require(isinstance(value, int) and not isinstance(value, bool), f"{where}.{name}",
             "must be an integer")
    return value


def parse_cut_rule(data: object, where: str) -> CutRule:
    _require(isinstance(data, dict), where, "must be an object")
    assert isinstance(data, dict)
    kind = data.get("kind")
    _require(isinstance(kind, str), f"{where}.kind", "must be a string")
    try:
        if kind == "explicit":
            _only_fields(data, where, {"kind", "values"})
            values = data.get("values")
            _require(
                isinstance(values, list) and values
                and all(isinstance(v, int) and not isinstance(v, bool) for v in values),
                f"{where}.values", "must be a nonempty list of integers")
            return CutRule.explicit(values)
        if kind == "constant":
            _only_fields(data, where, {"kind", "value"})
            return CutRule.constant(_int_field(data, where, "value"))
        if kind == "affine":
            _only_fields(data, where, {"kind", "a", "b"})
            return CutRule.affine(_int_field(data, where, "a"), _int_field(data, where, "b"))
        if kind == "doubling-minus-two":
            _only_fields(data, where, {"kind"})
            return CutRule.doubling_minus_two()
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}") from exc
    raise SchemaError(f"{where}.kind: unknown kind {kind!r}")


def parse_spacer_rule(data: object, where: str) -> SpacerRule:
    _require(isinstance(data, dict), where, "must be an object")
    assert isinstance(data, dict)
    kind = data.get("kind")
    _require(isinstance(kind, str), f"{where}.kind", "must be a string")
    try:
        if kind == "explicit":
            _only_fields(data, where, {"kind", "values", "pattern"})
            _require(("values" in data) != ("pattern" in data), where,
                     "explicit spacers need exactly one of values/pattern")
            if "values" in data:
                values = data["values"]
                _require(isinstance(values, list)
                         and all(isinstance(s, list) for s in values),
                         f"{where}.values", "must be a list of stage lists")
                return SpacerRule.explicit(values)
            pattern = data["pattern"]
            _require(isinstance(pattern, list) and pattern,
                     f"{where}.pattern", "must be a nonempty list of integers")
            return SpacerRule.from_pattern(pattern)
        if kind in ("staircase", "zero", "example52"):
            _only_fields(data, where, {"kind"})
            return SpacerRule(kind)
        if kind == "ornstein":
            _only_fields(data, where, {"kind", "ranges", "seed"})
            _require("seed" in data, f"{where}.seed", "seed is mandatory for ornstein")
            seed = _int_field(data, where, "seed")
            _require("ranges" in data, f"{where}.ranges", "missing ranges rule")
            ranges = parse_cut_rule(data["ranges"], f"{where}.ranges")
            return SpacerRule.ornstein(ranges, seed)
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}") from exc
    raise SchemaError(f"{where}.kind: unknown kind {kind!r}")


def parse_recipe(data: object, where: str = "recipe") -> Recipe:
    _require(isinstance(data, dict), where, "must be an object")
    assert isinstance(data, dict)
    _only_fields(data, where, {"name", "cuts", "spacers", "depth"})
    name = data.get("name")
    _require(isinstance(name, str) and name, f"{where}.name", "must be a nonempty string")
    depth = _int_field(data, where, "depth")
    _require(depth >= 0, f"{where}.depth", "must be nonnegative")
    cuts = parse_cut_rule(data.get("cuts"), f"{where}.cuts")
    spacers = parse_spacer_rule(data.get("spacers"), f"{where}.spacers")
    return Recipe(name, cuts, spacers, depth)


def load_recipe(path: str) -> Recipe:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise SchemaError(f"cannot read recipe {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return parse_recipe(data)


# -- tower snapshots ---------------------------------------------------------


def tower_snapshot(tower: Tower) -> dict:
    snap = {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "recipe": tower.recipe.to_json(),
        "depth": tower.depth,
        "heights": list(tower.heights),
        "window_heights": list(tower.window_heights),
        "level_widths": [render_rational(w) for w in tower.widths],
        "column_length": render_rational(tower.column_length()),
        "spacer_levels": [
            {"stage": ls.stage, "runs": [list(run) for run in ls.runs()]}
            for ls in tower.spacer_sets
        ],
        "warnings": list(tower.warnings),
    }
    if tower.sample is not None:
        snap["ornstein_sample"] = tower.sample.to_json()
    return snap


def save_snapshot(tower: Tower, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(tower_snapshot(tower), fh, indent=1, sort_keys=False)
        fh.write("\n")


def load_tower(path: str, max_height: Optional[int] = None) -> Tower:
    """Load a snapshot by rebuilding its recipe, then cross-check the data."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise SchemaError(f"cannot read tower {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    _require(isinstance(data, dict), path, "snapshot must be an object")
    _require(data.get("format") == SNAPSHOT_FORMAT, f"{path}.format",
             f"expected {SNAPSHOT_FORMAT!r}")
    _require(data.get("version") == SNAPSHOT_VERSION, f"{path}.version",
             f"expected {SNAPSHOT_VERSION}")
    recipe = parse_recipe(data.get("recipe"), f"{path}.recipe")
    tower = Tower.build(recipe, depth=data.get("depth"), max_height=max_height)
    _require(list(tower.heights) == data.get("heights"), f"{path}.heights",
             "snapshot does not match the rebuilt tower")
    if tower.sample is not None and "ornstein_sample" in data:
        _require(tower.sample.to_json() == data["ornstein_sample"],
                 f"{path}.ornstein_sample",
                 "stored draws do not match the rebuilt sample")
    return tower


# -- argument helpers --------------------------------------------------------


def parse_level_set_arg(tower: Tower, text: str) -> LevelSet:
    """Parse ``all`` or ``stage<N>:<indices>`` with ranges like ``0-5,8``."""
    if text == "all":
        return tower.full_level_set()
    if not text.startswith("stage") or ":" not in text:
        raise ValueError(f"level set {text!r} must be 'all' or 'stageN:indices'")
    stage_part, _, spec = text.partition(":")
    try:
        stage = int(stage_part[len("stage"):])
    except ValueError as exc:
        raise ValueError(f"bad stage in level set {text!r}") from exc
    indices: list[int] = []
    for chunk in spec.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "-" in chunk:
            first, _, last = chunk.partition("-")
            indices.extend(range(int(first), int(last) + 1))
        else:
            indices.append(int(chunk))
    if not indices:
        raise ValueError(f"level set {text!r} selects no levels")
    return tower.level_set(stage, indices)


def _parse_int_list(text: str) -> list[int]:
    return [int(chunk) for chunk in text.split(",") if chunk.strip()]


def _parse_fraction_list(text: str) -> list[Fraction]:
    return [Fraction(chunk) for chunk in text.split(",") if chunk.strip()]


class _CsvSink:
    """Fixed-column CSV with the versioned header comment."""

    COLUMNS = ("parameter", "lo", "hi", "width", "leb_CN", "depth")

    def __init__(self, tower: Tower, out, digits: Optional[int] = None,
                 notes: Sequence[str] = ()):
        self.tower = tower
        self.out = out
        self.digits = digits
        print(CSV_HEADER, file=out)
        for note in notes:
            print(f"# {note}", file=out)
        columns = list(self.COLUMNS)
        if digits is not None:
            columns += [f"approx{digits}_lo", f"approx{digits}_hi"]
        print(",".join(columns), file=out)

    def row(self, parameter, enclosure: Enclosure) -> None:
        leb = render_rational(self.tower.column_length())
        cells = [
            str(parameter),
            render_rational(enclosure.lo),
            render_rational(enclosure.hi),
            render_rational(enclosure.width),
            leb,
            str(self.tower.depth),
        ]
        if self.digits is not None:
            cells += [
                decimal_approx(enclosure.lo, self.digits),
                decimal_approx(enclosure.hi, self.digits),
            ]
        print(",".join(cells), file=self.out)


def _enclosure_json(enc: Enclosure) -> dict:
    return {"lo": render_rational(enc.lo), "hi": render_rational(enc.hi)}


def _emit_json(payload: dict, out) -> None:
    json.dump(payload, out, indent=1, sort_keys=False)
    out.write("\n")


# -- subcommands --------------------------------------------------------------


def cmd_build(args, out) -> int:
    recipe = load_recipe(args.recipe)
    tower = Tower.build(recipe, depth=args.depth)
    if args.out:
        save_snapshot(tower, args.out)
    summary = {
        "name": recipe.name,
        "depth": tower.depth,
        "heights": list(tower.heights),
        "window_heights": list(tower.window_heights),
        "column_lengths": [
            render_rational(tower.column_length(n)) for n in range(tower.depth + 1)
        ],
        "spacer_measures": [
            render_rational(tower.spacer_measure(n)) for n in range(tower.depth)
        ],
        "warnings": list(tower.warnings),
    }
    _emit_json(summary, out)
    return EXIT_OK


def cmd_analyze(args, out) -> int:
    tower = load_tower(args.tower)
    digits = args.digits
    sub = args.analysis

    if sub == "mix":
        a = parse_level_set_arg(tower, args.A)
        b = parse_level_set_arg(tower, args.B)
        sink = _CsvSink(tower, out, digits, notes=[f"mix A={args.A} B={args.B}"])
        for m, enc in analysis.mixing_profile(tower, a, b, _parse_int_list(args.m)):
            sink.row(m, enc)
    elif sub == "cesaro":
        b = parse_level_set_arg(tower, args.B)
        if (args.offsets is None) == (args.stage is None):
            raise ValueError("cesaro needs exactly one of --offsets/--stage")
        if args.stage is not None:
            offsets = tower.spacers.values[args.stage]
            label = f"stage{args.stage}"
        else:
            offsets = _parse_int_list(args.offsets)
            label = "offsets"
        target = as_rational(args.target) if args.target else tower.measure(b)
        profile = analysis.level_profile(tower, b, offsets)
        moment = analysis.functional_moment(profile, args.q, target)
        sink = _CsvSink(tower, out, digits,
                        notes=[f"cesaro B={args.B} q={args.q} target={target}"])
        sink.row(label, moment)
    elif sub == "uniform":
        b = parse_level_set_arg(tower, args.B)
        r = tower.cuts[args.stage]
        k_list = sorted({int(f * r) for f in _parse_fraction_list(args.fractions)})
        rows = analysis.uniform_ergodicity_sweep(tower, args.stage, b, k_list)
        sink = _CsvSink(
            tower, out, digits,
            notes=[f"uniform stage={args.stage} cuts={r} B={args.B}"
                   " (parameter is the window k; fraction = k/cuts)"])
        for row in rows:
            sink.row(row.window, row.value)
    elif sub == "growth":
        kappa = Fraction(args.kappa)
        stats = analysis.restricted_growth_stat(tower.stats, tower.heights, kappa)
        sink = _CsvSink(tower, out, digits, notes=[f"growth kappa={kappa}"])
        for n, value in enumerate(stats):
            sink.row(n, Enclosure.exact(value))
    elif sub == "umix":
        b = parse_level_set_arg(tower, args.B)
        enc = analysis.uniform_mixing_sum(tower, b, args.m, margin=args.margin)
        sink = _CsvSink(tower, out, digits, notes=[f"umix B={args.B} margin={args.margin}"])
        sink.row(args.m, enc)
    elif sub == "thm5":
        a = parse_level_set_arg(tower, args.A)
        b = parse_level_set_arg(tower, args.B)
        report = analysis.height_mixing_residual(
            tower, args.stage, a, b, windowed=args.windowed
        )
        _emit_json({
            "stage": args.stage,
            "windowed": args.windowed,
            "residual": _enclosure_json(report.residual),
            "bound": render_rational(report.bound),
            "passed": report.passed,
        }, out)
    elif sub == "blocklemma":
        b = parse_level_set_arg(tower, args.B)
        check = analysis.block_average_check(tower, b, args.R, args.L, args.step)
        _emit_json({
            "lhs": _enclosure_json(check.lhs),
            "rhs": _enclosure_json(check.rhs),
            "slack": render_rational(check.slack),
            "passed": check.passed,
        }, out)
    elif sub == "doubleerg":
        a = parse_level_set_arg(tower, args.A)
        b = parse_level_set_arg(tower, args.B)
        found = analysis.double_ergodicity_search(tower, a, b, args.nmax)
        _emit_json({"found": found, "examined_up_to": args.nmax}, out)
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(f"unknown analysis {sub!r}")
    return EXIT_OK


def _random_level_sets(tower: Tower, stage: int, rng: random.Random) -> LevelSet:
    h = tower.heights[stage]
    count = rng.randint(1, h)
    indices = rng.sample(range(h), count)
    return tower.level_set(stage, indices)


def cmd_verify(args, out) -> int:
    tower = load_tower(args.tower)
    suite = args.suite
    rng = random.Random(args.seed)

    if suite == "lemma52":
        try:
            report = tower.stacking_identities()
        except IdentityCheckError as exc:
            print(f"FAIL: {exc}", file=out)
            return EXIT_VERIFY_FAILED
        print(
            f"{report.shift_identities}/{report.shift_identities} identities pass; "
            f"{report.embedding_identities}/{report.embedding_identities} "
            "embedding identities pass",
            file=out,
        )
        return EXIT_OK

    if suite == "thm5":
        checked = 0
        for n in range(max(tower.depth - 1, 0)):
            for _ in range(args.pairs):
                a = _random_level_sets(tower, n, rng)
                b = _random_level_sets(tower, n, rng)
                for windowed in (False, True):
                    report = analysis.height_mixing_residual(
                        tower, n, a, b, windowed=windowed
                    )
                    checked += 1
                    if not report.passed:
                        print(
                            f"FAIL: stage {n}, windowed={windowed}, "
                            f"A={a.indices()}, B={b.indices()}: residual "
                            f"{report.residual} exceeds bound {report.bound}",
                            file=out,
                        )
                        return EXIT_VERIFY_FAILED
        print(f"{checked}/{checked} residual checks pass", file=out)
        return EXIT_OK

    if suite == "expansion":
        checked = 0
        stage = min(2, tower.depth)
        for _ in range(args.pairs):
            b = _random_level_sets(tower, stage, rng)
            count = rng.randint(1, 5)
            bound = max(tower.heights[min(stage + 1, tower.depth)] - 1, 1)
            offsets = [rng.randint(-bound, bound) for _ in range(count)]
            profile = analysis.level_profile(tower, b, offsets)
            direct = analysis.functional_moment(profile, 2, tower.measure(b))
            paired = analysis.pairwise_moment(tower, b, offsets)
            checked += 1
            overlap = direct.lo <= paired.hi and paired.lo <= direct.hi
            if not overlap:
                print(
                    f"FAIL: B={b.indices()} offsets={offsets}: "
                    f"profile {direct} and pairwise {paired} do not overlap",
                    file=out,
                )
                return EXIT_VERIFY_FAILED
            if direct.is_exact and paired.is_exact and direct != paired:
                print(
                    f"FAIL: B={b.indices()} offsets={offsets}: resolved values "
                    f"differ: {direct} vs {paired}",
                    file=out,
                )
                return EXIT_VERIFY_FAILED
        print(f"{checked}/{checked} expansion checks pass", file=out)
        return EXIT_OK

    if suite == "ornstein-invariants":
        if tower.sample is None:
            raise ValueError("ornstein-invariants needs a tower built from "
                             "an ornstein recipe")
        sample = tower.sample
        checked = 0
        for n, stage in enumerate(sample.spacers.values):
            spread = sample.ranges[n]
            r = len(stage)
            if sum(stage) != r * spread:
                print(f"FAIL: stage {n} sums to {sum(stage)}, want {r * spread}",
                      file=out)
                return EXIT_VERIFY_FAILED
            if not all(0 <= v <= 2 * spread for v in stage):
                print(f"FAIL: stage {n} value out of [0, {2 * spread}]", file=out)
                return EXIT_VERIFY_FAILED
            rep = tower.stats.representative.values[n]
            for k in range(1, r):
                for i in range(r - k):
                    if abs(sum(rep[i : i + k])) > spread:
                        print(f"FAIL: stage {n} window ({i},{k}) exceeds {spread}",
                              file=out)
                        return EXIT_VERIFY_FAILED
                    checked += 1
            checked += 2
        print(f"{checked}/{checked} sample invariants pass", file=out)
        return EXIT_OK

    raise ValueError(f"unknown suite {suite!r}")  # pragma: no cover


# -- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="r1lab",
        description="exact rank one cutting-and-stacking laboratory",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    p_build = commands.add_parser("build", help="build a tower from a recipe")
    p_build.add_argument("recipe", help="path to a recipe JSON file")
    p_build.add_argument("--depth", type=int, default=None, help="override recipe depth")
    p_build.add_argument("--out", default=None, help="write a tower snapshot here")

    p_an = commands.add_parser("analyze", help="run an analysis over a tower snapshot")
    p_an.add_argument("tower", help="path to a tower snapshot")
    p_an.add_argument("--digits", type=int, default=None,
                      help="add decimal approximation columns with this many digits")
    analyses = p_an.add_subparsers(dest="analysis", required=True)

    p_mix = analyses.add_parser("mix", help="mixing values over shifts")
    p_mix.add_argument("--A", required=True)
    p_mix.add_argument("--B", required=True)
    p_mix.add_argument("--m", required=True, help="comma separated shifts")

    p_ces = analyses.add_parser("cesaro", help="moment of the moving average")
    p_ces.add_argument("--B", required=True)
    p_ces.add_argument("--offsets", default=None, help="comma separated offsets")
    p_ces.add_argument("--stage", type=int, default=None,
                       help="use this stage's spacer values as offsets")
    p_ces.add_argument("--q", type=int, default=2, choices=(1, 2))
    p_ces.add_argument("--target", default=None, help="rational target, default mu(B)")

    p_uni = analyses.add_parser("uniform", help="windowed moment sweep")
    p_uni.add_argument("--B", required=True)
    p_uni.add_argument("--stage", type=int, required=True)
    p_uni.add_argument("--fractions", default="1/4,1/2,3/4",
                       help="window fractions k/r to sweep")

    p_gro = analyses.add_parser("growth", help="restricted growth statistic")
    p_gro.add_argument("--kappa", required=True, help="window fraction bound in (0,1)")

    p_umx = analyses.add_parser("umix", help="level sum of absolute mixing values")
    p_umx.add_argument("--B", required=True)
    p_umx.add_argument("--m", type=int, required=True)
    p_umx.add_argument("--margin", type=int, default=2)

    p_t5 = analyses.add_parser("thm5", help="height mixing residual vs spacer average")
    p_t5.add_argument("--stage", type=int, required=True)
    p_t5.add_argument("--A", required=True)
    p_t5.add_argument("--B", required=True)
    p_t5.add_argument("--windowed", action="store_true",
                      help="use the window height and recentred spacers")

    p_blk = analyses.add_parser("blocklemma", help="block average comparison")
    p_blk.add_argument("--B", required=True)
    p_blk.add_argument("--R", type=int, required=True)
    p_blk.add_argument("--L", type=int, required=True)
    p_blk.add_argument("--step", type=int, required=True)

    p_de = analyses.add_parser("doubleerg", help="double ergodicity search")
    p_de.add_argument("--A", required=True)
    p_de.add_argument("--B", required=True)
    p_de.add_argument("--nmax", type=int, required=True)

    p_ver = commands.add_parser("verify", help="run an identity suite")
    p_ver.add_argument("tower", help="path to a tower snapshot")
    p_ver.add_argument("suite", choices=("lemma52", "thm5", "expansion",
                                         "ornstein-invariants"))
    p_ver.add_argument("--pairs", type=int, default=20,
                       help="seeded random cases per stage where applicable")
    p_ver.add_argument("--seed", type=int, default=20260809)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = sys.stdout
    try:
        if args.command == "build":
            return cmd_build(args, out)
        if args.command == "analyze":
            return cmd_analyze(args, out)
        return cmd_verify(args, out)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ValueError, IndexError) as exc:
        print(f"error: parameter out of range: {exc}", file=sys.stderr)
        return EXIT_PARAMETER


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
