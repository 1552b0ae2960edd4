"""Budgeted propose/evaluate/observe loop with per-run caching and JSONL archives."""
from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .oracle import (
    CoreRiskMode,
    Evaluation,
    LandscapeProfile,
    Oracle,
    ReferenceStats,
    load_profile,
    uniform_stats,
)
from .schema import FeatureSchema, bits_to_str, load_schema, str_to_bits
from .seeding import derive_int
from .solvers import SolverSpec, init_solver

log = logging.getLogger(__name__)

MAX_ENUMERATE_BITS = 16


class ConfigError(ValueError):
    pass


def thread_cap(requested: int) -> int:
    cap = os.environ.get("RISKSCOUT_THREADS")
    if cap:
        try:
            return max(1, min(requested, int(cap)))
        except ValueError:
            raise ConfigError(f"RISKSCOUT_THREADS must be an integer, got {cap!r}") from None
    return max(1, requested)


@dataclass
class RunConfig:
    schema: FeatureSchema
    profile: LandscapeProfile
    solver: SolverSpec
    budget: int = 1000
    seeds: Sequence[int] = (0, 1, 2)
    parallelism: int = 1
    cache_enabled: bool = True
    output: Path | None = None
    stats: ReferenceStats | None = None

    def __post_init__(self):
        if self.stats is None:
            self.stats = uniform_stats(self.schema)
        b = self.solver.batch_size
        if self.budget < self.solver.n_init:
            raise ConfigError(f"budget {self.budget} is below n_init {self.solver.n_init}")
        if self.budget % b:
            raise ConfigError(f"budget {self.budget} is not a multiple of batch size {b}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")

    def manifest(self) -> dict:
        """Everything that determines the archive bytes (parallelism does not)."""
        return {
            "riskscout_version": __version__,
            "schema": self.schema.to_dict(),
            "profile": self.profile.to_dict(),
            "reference_stats": self.stats.to_dict(),
            "solver": self.solver.to_dict(),
            "budget": self.budget,
            "seeds": list(self.seeds),
            "cache_enabled": self.cache_enabled,
            "render_seed_policy": "first evaluation of a configuration fixes its render seed",
        }


@dataclass
class RunArchive:
    solver: str
    seed: int
    records: list
    manifest: dict = field(default_factory=dict)
    cache_hits: int = 0
    cache_misses: int = 0

    def __len__(self):
        return len(self.records)

    @property
    def bits(self) -> np.ndarray:
        return np.array([r.z for r in self.records], dtype=np.uint8)

    @property
    def risks(self) -> np.ndarray:
        return np.array([r.risk for r in self.records], dtype=float)

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(r.to_record(), separators=(",", ":")) + "\n" for r in self.records
        )


class EvalCache:
    """Per-run map from bitstring to its first evaluation."""

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self._store: dict[str, Evaluation] = {}
        self.hits = 0
        self.misses = 0

    def get(self, key):
        return self._store.get(key) if self.enabled else None

    def put(self, key, ev):
        if self.enabled:
            self._store.setdefault(key, ev)


def evaluate_batch(batch, cache: EvalCache, oracle: Oracle, render_seeds, parallelism=1):
    """Evaluate a batch in proposal order; repeats (in cache or in-batch) reuse the first result."""
    keys = [bits_to_str(z) for z in batch]
    todo = {}
    for i, k in enumerate(keys):
        if cache.get(k) is None and k not in todo:
            todo[k] = i
    miss_idx = list(todo.values())
    work = lambda i: oracle.evaluate(batch[i], render_seeds[i])  # noqa: E731
    workers = thread_cap(parallelism)
    if workers > 1 and len(miss_idx) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fresh = list(pool.map(work, miss_idx))
    else:
        fresh = [work(i) for i in miss_idx]
    first_at = {}
    for i, ev in zip(miss_idx, fresh):
        first_at[i] = ev
        cache.put(keys[i], ev)
    local = {keys[i]: ev for i, ev in first_at.items()}
    out = []
    for i, k in enumerate(keys):
        if i in first_at:
            cache.misses += 1
            out.append(replace(first_at[i], cached=False))
        else:
            cache.hits += 1
            src = cache.get(k) or local[k]
            out.append(replace(src, cached=True))
    return out


def _run_seed(config: RunConfig, seed: int) -> RunArchive:
    spec = config.solver
    oracle = Oracle(config.schema, config.profile, config.stats)
    solver = init_solver(spec, config.schema, seed, budget=config.budget)
    cache = EvalCache(config.cache_enabled)
    records = []
    b = spec.batch_size
    for it in range(config.budget // b):
        seeds = [derive_int(seed, spec.kind, "render", it, slot) for slot in range(b)]
        if solver.sequential:
            evs = []
            for slot in range(b):
                z = solver.propose(1)
                ev = evaluate_batch(z, cache, oracle, seeds[slot : slot + 1])[0]
                solver.observe([ev])
                evs.append(ev)
        else:
            batch = solver.propose(b)
            evs = evaluate_batch(batch, cache, oracle, seeds, config.parallelism)
            solver.observe(evs)
        for ev in evs:
            ev.iteration = len(records)
            ev.solver = spec.name
            ev.seed = seed
            records.append(ev)
    return RunArchive(
        solver=spec.name, seed=seed, records=records, manifest=config.manifest(),
        cache_hits=cache.hits, cache_misses=cache.misses,
    )


def archive_path(out: Path, solver: str, seed: int) -> Path:
    return Path(out) / solver / f"seed_{seed}.jsonl"


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_manifest(config: RunConfig, out: Path):
    path = Path(out) / config.solver.name / "manifest.json"
    _atomic_write(path, json.dumps(config.manifest(), indent=2, sort_keys=True) + "\n")


def run(config: RunConfig) -> list[RunArchive]:
    """One archive per seed; written (manifest first) when config.output is set."""
    if config.output is not None:
        write_manifest(config, config.output)
    archives = []
    for seed in config.seeds:
        arc = _run_seed(config, seed)
        if config.output is not None:
            _atomic_write(archive_path(config.output, arc.solver, seed), arc.to_jsonl())
        log.info(
            "%s seed %d: max risk %.3f, cache %d hit / %d miss",
            arc.solver, seed, arc.risks.max(), arc.cache_hits, arc.cache_misses,
        )
        archives.append(arc)
    return archives


def _suite_cell(args):
    config, seed = args
    single = replace(config, seeds=(seed,), output=None)
    return _run_seed(single, seed)


def run_suite(schema, profile, solvers: Sequence[SolverSpec], budget=1000, seeds=(0, 1, 2),
              out: Path | None = None, parallelism=1, cache_enabled=True, stats=None):
    """Cross product of solvers x seeds. Returns (archives by (solver, seed), errors)."""
    if not solvers:
        raise ConfigError("run_suite needs at least one solver")
    configs = [
        RunConfig(schema, profile, s, budget=budget, seeds=tuple(seeds),
                  cache_enabled=cache_enabled, output=out, stats=stats)
        for s in solvers
    ]
    if out is not None:
        for c in configs:
            write_manifest(c, out)
    cells = [(c, seed) for c in configs for seed in seeds]
    archives, errors = {}, {}
    workers = thread_cap(parallelism)

    def collect(cell, result):
        config, seed = cell
        if isinstance(result, Exception):
            errors[(config.solver.name, seed)] = f"{type(result).__name__}: {result}"
            log.error("%s seed %d failed: %s", config.solver.name, seed, result)
            return
        archives[(config.solver.name, seed)] = result
        if out is not None:
            _atomic_write(archive_path(out, result.solver, seed), result.to_jsonl())

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_suite_cell, cell) for cell in cells]
            for cell, fut in zip(cells, futures):
                try:
                    collect(cell, fut.result())
                except Exception as exc:  # reported per cell; the suite continues
                    collect(cell, exc)
    else:
        for cell in cells:
            try:
                collect(cell, _suite_cell(cell))
            except Exception as exc:
                collect(cell, exc)
    if out is not None and errors:
        lines = [f"{name}\tseed {seed}\t{msg}" for (name, seed), msg in sorted(errors.items())]
        _atomic_write(Path(out) / "suite_errors.txt", "\n".join(lines) + "\n")
    return archives, errors


def enumerate_space(schema: FeatureSchema, profile: LandscapeProfile, stats=None) -> RunArchive:
    """Every bitstring once, in counting order, with render noise disabled."""
    if schema.total_bits > MAX_ENUMERATE_BITS:
        raise ConfigError(
            f"refusing to enumerate 2^{schema.total_bits} configurations "
            f"(limit 2^{MAX_ENUMERATE_BITS})"
        )
    oracle = Oracle(schema, profile.with_noise(0.0), stats)
    n = schema.total_bits
    records = []
    for v in range(2**n):
        z = np.array([(v >> (n - 1 - i)) & 1 for i in range(n)], dtype=np.uint8)
        ev = oracle.evaluate(z, 0)
        ev.iteration, ev.solver, ev.seed = v, "enumerate", 0
        records.append(ev)
    manifest = {
        "riskscout_version": __version__,
        "schema": schema.to_dict(),
        "profile": profile.with_noise(0.0).to_dict(),
        "reference_stats": oracle.stats.to_dict(),
        "solver": {"kind": "enumerate"},
        "budget": 2**n,
    }
    return RunArchive("enumerate", 0, records, manifest)


def record_to_evaluation(rec: dict) -> Evaluation:
    return Evaluation(
        z=str_to_bits(rec["bits"]),
        features=rec["features"],
        r=tuple(rec["r"]),
        base_risk=rec["base_risk"],
        rarity=rec["rarity"],
        risk=rec["risk"],
        signature=tuple(c == "1" for c in rec["signature"]),
        core_mode=CoreRiskMode.parse(rec["core_mode"]),
        render_seed=rec["render_seed"],
        iteration=rec["iter"],
        solver=rec["solver"],
        seed=rec["seed"],
        cached=rec["cached"],
    )


def read_archive(path: Path, manifest: dict | None = None) -> RunArchive:
    records = [
        record_to_evaluation(json.loads(line))
        for line in Path(path).read_text().splitlines()
        if line.strip()
    ]
    if not records:
        raise ConfigError(f"empty archive {path}")
    return RunArchive(records[0].solver, records[0].seed, records, manifest or {})


def load_archives(root: Path) -> dict[tuple[str, int], RunArchive]:
    """Every seed_*.jsonl under root, keyed by (solver, seed)."""
    out = {}
    for path in sorted(Path(root).rglob("seed_*.jsonl")):
        mpath = path.parent / "manifest.json"
        manifest = json.loads(mpath.read_text()) if mpath.exists() else {}
        arc = read_archive(path, manifest)
        out[(arc.solver, arc.seed)] = arc
    return out


def resolve_config(schema: str, profile: str, noise_sigma: float | None = None):
    """Schema and profile from names or paths, optionally overriding render noise."""
    sch = load_schema(schema)
    prof = load_profile(profile)
    if noise_sigma is not None:
        prof = prof.with_noise(noise_sigma)
    return sch, prof
