"""riskscout command line: run, suite, analyze, predict, enumerate, validate.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import reports
from .analytics import EmptyArchive, SchemaMismatch
from .harness import (
    ConfigError,
    RunConfig,
    _atomic_write,
    archive_path,
    enumerate_space,
    load_archives,
    resolve_config,
    run,
    run_suite,
)
from .oracle import LandscapeProfile, MissingStats, ProfileError
from .predictor import ForestParams, InsufficientData, prediction_report
from .schema import SchemaError, bits_to_str, build_schema, space_size
from .solvers import SolverSpec
from .solvers.base import CLI_NAMES, SolverError

log = logging.getLogger("riskscout")

EXIT_CONFIG = 2
EXIT_RUNTIME = 3

CONFIG_ERRORS = (
    ConfigError, SchemaError, ProfileError, SolverError, SchemaMismatch,
    MissingStats, InsufficientData, EmptyArchive, FileNotFoundError,
)

ANALYSES = ("summary", "exclusivity", "overlap", "modes", "signatures")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _param(text: str):
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, json.loads(raw)
    except json.JSONDecodeError:
        return key, raw


def _solver_names(text: str) -> list[str]:
    if text == "all":
        return list(CLI_NAMES)
    return [s.strip() for s in text.split(",") if s.strip()]


def _spec(name: str, params: dict, qaoa_m: int | None) -> SolverSpec:
    params = dict(params)
    if qaoa_m is not None and name.lower().startswith("qaoa"):
        params.setdefault("m", qaoa_m)
    return SolverSpec(name, params=params)


def _add_landscape(p):
    p.add_argument("--schema", default="single_page_24", help="built-in schema name or file path")
    p.add_argument("--profile", default="idp-sim-v1", help="built-in profile name or file path")
    p.add_argument("--noise-sigma", type=float, default=None, help="override render-noise half-width")


def _add_run_common(p):
    _add_landscape(p)
    p.add_argument("--budget", type=int, default=1000)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--no-cache", action="store_true", help="evaluate repeats afresh")
    p.add_argument("--param", type=_param, action="append", default=[],
                   help="solver parameter override key=value (repeatable)")
    p.add_argument("--qaoa-m", type=int, default=None, help="QAOA subproblem size for qaoa solvers")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="riskscout", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"riskscout {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="one solver, one or more seeds")
    _add_run_common(p)
    p.add_argument("--solver", required=True)
    p.add_argument("--seed", type=_int_list, default=[0], help="seed or comma-separated seeds")

    p = sub.add_parser("suite", help="solvers x seeds cross product plus summary.csv")
    _add_run_common(p)
    p.add_argument("--solvers", default="all", help="'all' or comma-separated solver names")
    p.add_argument("--seeds", type=_int_list, default=[0, 1, 2])

    p = sub.add_parser("analyze", help="analytics CSVs and a markdown report from archives")
    p.add_argument("--kind", choices=ANALYSES + ("all",), default="all")
    p.add_argument("--archives", type=Path, default=Path("out"))
    p.add_argument("--out", type=Path, default=None, help="defaults to the archives directory")
    p.add_argument("--fix", default="qaoa-corr", help="overlap: method frozen at snapshots")
    p.add_argument("--against", default="reinforce", help="overlap: method grown along t")
    p.add_argument("--step", type=int, default=50, help="exclusivity grid step")

    p = sub.add_parser("predict", help="random-forest learnability report")
    p.add_argument("--archives", type=Path, default=Path("out"))
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--seed", type=int, default=None, help="archive seed to use (default: lowest)")
    p.add_argument("--trees", type=int, default=200)
    p.add_argument("--forest-seed", type=int, default=0)
    p.add_argument("--n-train", type=int, default=700, help="training rows per model")

    p = sub.add_parser("enumerate", help="exhaustive evaluation of a small schema")
    _add_landscape(p)
    p.set_defaults(schema="mini_8")
    p.add_argument("--out", type=Path, default=Path("out"))

    p = sub.add_parser("validate", help="check a schema/profile pair or an archive tree")
    _add_landscape(p)
    p.add_argument("--archives", type=Path, default=None)
    return ap


def cmd_run(args) -> int:
    schema, profile = resolve_config(args.schema, args.profile, args.noise_sigma)
    spec = _spec(args.solver, dict(args.param), args.qaoa_m)
    config = RunConfig(schema, profile, spec, budget=args.budget, seeds=tuple(args.seed),
                       parallelism=args.parallelism, cache_enabled=not args.no_cache, output=args.out)
    for arc in run(config):
        print(f"{arc.solver} seed {arc.seed}: {len(arc)} records, max risk {arc.risks.max():.4f} "
              f"-> {archive_path(args.out, arc.solver, arc.seed)}")
    return 0


def cmd_suite(args) -> int:
    schema, profile = resolve_config(args.schema, args.profile, args.noise_sigma)
    specs = [_spec(n, dict(args.param), args.qaoa_m) for n in _solver_names(args.solvers)]
    for s in specs:
        RunConfig(schema, profile, s, budget=args.budget, seeds=tuple(args.seeds))  # validate up front
    archives, errors = run_suite(schema, profile, specs, budget=args.budget, seeds=args.seeds,
                                 out=args.out, parallelism=args.parallelism,
                                 cache_enabled=not args.no_cache)
    if archives:
        reports.write_table(args.out / "summary.csv", *reports.summary_table(archives, schema))
    print(f"{len(archives)} archives written under {args.out}")
    if errors:
        print(f"{len(errors)} run(s) failed; see {args.out / 'suite_errors.txt'}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


def _load_consistent(root: Path):
    """Archives under root plus the shared schema and profile from their manifests."""
    if not Path(root).is_dir():
        raise ConfigError(f"archive directory {root} does not exist")
    archives = load_archives(root)
    if not archives:
        raise ConfigError(f"no seed_*.jsonl archives under {root}")
    schemas = {json.dumps(a.manifest.get("schema"), sort_keys=True) for a in archives.values()}
    widths = {len(a.records[0].z) for a in archives.values()}
    if len(schemas) > 1 or len(widths) > 1:
        raise SchemaMismatch(f"archives under {root} were produced with different schemas")
    first = next(iter(archives.values())).manifest
    if not first.get("schema") or not first.get("profile"):
        raise ConfigError(f"archives under {root} lack manifest.json files")
    return archives, build_schema(first["schema"]), LandscapeProfile.from_dict(first["profile"])


def cmd_analyze(args) -> int:
    archives, schema, profile = _load_consistent(args.archives)
    out = args.out or args.archives
    kinds = ANALYSES if args.kind == "all" else (args.kind,)
    sections = []
    for kind in kinds:
        if kind == "summary":
            table = reports.summary_table(archives, schema)
            reports.write_table(out / "summary.csv", *table)
            sections.append(("Summary", *table))
        elif kind == "exclusivity":
            table = reports.exclusivity_table(archives, step=args.step)
            reports.write_table(out / "exclusivity.csv", *table)
            sections.append(("Exclusivity", *table))
        elif kind == "overlap":
            names = {n for (n, _) in archives}
            if args.kind == "all" and not {args.fix, args.against} <= names:
                log.warning("skipping overlap: %s or %s has no archives", args.fix, args.against)
                continue
            table = reports.overlap_table(archives, args.fix, args.against)
            reports.write_table(out / "overlap.csv", *table)
            sections.append((f"Cross-temporal overlap: {args.fix} vs {args.against}", *table))
        elif kind == "modes":
            matrix, wins, census = reports.modes_tables(archives)
            reports.write_table(out / "modes_matrix.csv", *matrix)
            reports.write_table(out / "modes_winrates.csv", *wins)
            reports.write_table(out / "modes_census.csv", *census)
            sections += [("Core risk modes: pairwise", *matrix), ("Core risk modes: win rates", *wins)]
        elif kind == "signatures":
            table = reports.signature_table(archives, profile.component_names)
            reports.write_table(out / "signature_census.csv", *table)
            sections.append(("Risk signature census", *table))
    _atomic_write(out / "report.md", reports.markdown_report(sections))
    print(f"wrote {', '.join(kinds)} tables and report.md to {out}")
    return 0


def cmd_predict(args) -> int:
    archives, _, _ = _load_consistent(args.archives)
    seeds = sorted({s for (_, s) in archives})
    seed = seeds[0] if args.seed is None else args.seed
    by_name = {n: a for (n, s), a in archives.items() if s == seed}
    if not by_name:
        raise ConfigError(f"no archives for seed {seed} (available: {seeds})")
    params = ForestParams(n_trees=args.trees, seed=args.forest_seed)
    rows = prediction_report(by_name, params, methods=reports.solver_order(by_name),
                             seed=args.forest_seed, n_train=args.n_train)
    out = args.out or args.archives
    header, table = reports.prediction_table(rows)
    reports.write_table(out / "prediction_report.csv", header, table)
    print(reports.to_markdown(header, table), end="")
    return 0


def cmd_enumerate(args) -> int:
    schema, profile = resolve_config(args.schema, args.profile, args.noise_sigma)
    arc = enumerate_space(schema, profile)
    _atomic_write(args.out / "enumerate" / "manifest.json",
                  json.dumps(arc.manifest, indent=2, sort_keys=True) + "\n")
    path = archive_path(args.out, "enumerate", 0)
    _atomic_write(path, arc.to_jsonl())
    best = int(np.argmax(arc.risks))
    top = arc.records[best]
    print(f"{len(arc)} configurations -> {path}")
    print(f"global max risk {top.risk:.6f} at {bits_to_str(top.z)} {json.dumps(top.features, sort_keys=True)}")
    return 0


def cmd_validate(args) -> int:
    schema, profile = resolve_config(args.schema, args.profile, args.noise_sigma)
    n_bits, n_sem = space_size(schema)
    print(f"schema {schema.name}: {schema.total_bits} bits, {len(schema.features)} features, "
          f"{n_bits} bitstrings, {n_sem} distinct configurations")
    print(f"profile {profile.name}: {len(profile.component_names)} components, "
          f"lambda={profile.lam}, noise_sigma={profile.noise_sigma}")
    if args.archives is not None:
        archives, _, _ = _load_consistent(args.archives)
        for (name, seed), arc in sorted(archives.items()):
            iters = [r.iteration for r in arc.records]
            if iters != list(range(len(iters))):
                raise ConfigError(f"{name} seed {seed}: iteration indices are not contiguous")
            budget = arc.manifest.get("budget")
            if budget is not None and budget != len(arc):
                raise ConfigError(f"{name} seed {seed}: {len(arc)} records, manifest budget {budget}")
        print(f"{len(archives)} archives under {args.archives} are complete")
    return 0


COMMANDS = {
    "run": cmd_run,
    "suite": cmd_suite,
    "analyze": cmd_analyze,
    "predict": cmd_predict,
    "enumerate": cmd_enumerate,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.verb](args)
    except CONFIG_ERRORS as exc:
        print(f"riskscout: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # anything else is a runtime failure
        log.debug("runtime failure", exc_info=True)
        print(f"riskscout: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
