import json

import numpy as np
import pytest

from riskscout import harness
from riskscout.harness import (
    ConfigError,
    EvalCache,
    RunConfig,
    archive_path,
    enumerate_space,
    evaluate_batch,
    load_archives,
    read_archive,
    run,
    run_suite,
    thread_cap,
)
from riskscout.oracle import Oracle
from riskscout.schema import bits_to_str, build_schema, random_configs
from riskscout.solvers import SolverSpec

FIELDS = {"iter", "solver", "seed", "bits", "features", "r", "base_risk", "rarity", "risk",
          "signature", "core_mode", "render_seed", "cached"}


def cfg(schema, profile, kind="Random", **kw):
    kw.setdefault("budget", 200)
    kw.setdefault("seeds", (0,))
    return RunConfig(schema, profile, SolverSpec(kind), **kw)


def test_config_validation(schema24, profile):
    with pytest.raises(ConfigError):
        cfg(schema24, profile, budget=50, kind="TPE")
    with pytest.raises(ConfigError):
        cfg(schema24, profile, budget=1010)
    with pytest.raises(ConfigError):
        cfg(schema24, profile, seeds=())


def test_budget_exact_and_contiguous(schema24, profile):
    for kind in ("Random", "SA", "TPE"):
        arc = run(cfg(schema24, profile, kind=kind, budget=300))[0]
        assert len(arc) == 300
        assert [r.iteration for r in arc.records] == list(range(300))
        assert np.all(np.diff(np.maximum.accumulate(arc.risks)) >= 0)


def test_warmup_then_solver_iterations(schema24, profile):
    arc = run(cfg(schema24, profile, kind="Reinforce", budget=1000))[0]
    assert len(arc) == 1000
    assert arc.manifest["solver"]["n_init"] == 100


def test_byte_identical_reruns(tmp_path, schema24, profile):
    a = run(cfg(schema24, profile, kind="GAExplore", output=tmp_path / "a"))[0]
    b = run(cfg(schema24, profile, kind="GAExplore", output=tmp_path / "b"))[0]
    pa = archive_path(tmp_path / "a", a.solver, 0)
    pb = archive_path(tmp_path / "b", b.solver, 0)
    assert pa.read_bytes() == pb.read_bytes()
    ma = (tmp_path / "a" / "ga-explore" / "manifest.json").read_bytes()
    assert ma == (tmp_path / "b" / "ga-explore" / "manifest.json").read_bytes()


def test_parallelism_does_not_change_output(schema24, profile):
    a = run(cfg(schema24, profile, kind="PSO", parallelism=1))[0]
    b = run(cfg(schema24, profile, kind="PSO", parallelism=4))[0]
    assert a.to_jsonl() == b.to_jsonl()


def test_evaluate_batch_cache(schema24, profile):
    oracle = Oracle(schema24, profile)
    z = random_configs(1, 24, np.random.default_rng(0))[0]
    cache = EvalCache()
    evs = evaluate_batch([z] * 50, cache, oracle, list(range(50)))
    assert (cache.misses, cache.hits) == (1, 49)
    assert len({e.risk for e in evs}) == 1
    assert [e.cached for e in evs] == [False] + [True] * 49
    assert all(e.render_seed == 0 for e in evs)

    cache = EvalCache()
    Z = random_configs(50, 24, np.random.default_rng(1))
    assert len({bits_to_str(z) for z in Z}) == 50
    evaluate_batch(Z, cache, oracle, list(range(50)))
    assert (cache.misses, cache.hits) == (50, 0)


def test_evaluate_batch_order_and_parallel(schema24, profile):
    oracle = Oracle(schema24, profile)
    Z = random_configs(50, 24, np.random.default_rng(2))
    a = evaluate_batch(Z, EvalCache(), oracle, list(range(50)), parallelism=1)
    b = evaluate_batch(Z, EvalCache(), oracle, list(range(50)), parallelism=8)
    assert [e.to_record() for e in a] == [e.to_record() for e in b]
    assert all(np.array_equal(e.z, z) for e, z in zip(a, Z))


def test_cache_disabled(schema24, profile):
    oracle = Oracle(schema24, profile)
    z = np.zeros(24, dtype=np.uint8)
    cache = EvalCache(enabled=False)
    evaluate_batch([z, z], cache, oracle, [1, 2])
    assert cache.misses == 1 and cache.hits == 1  # in-batch repeat still reuses the first render


def test_cache_coherence_in_archive(schema24, profile):
    arc = run(cfg(schema24, profile, kind="GAExploit", budget=500))[0]
    seen = {}
    for r in arc.records:
        k = bits_to_str(r.z)
        if k in seen:
            assert (r.r, r.risk, r.signature) == seen[k] and r.cached
        seen[k] = (r.r, r.risk, r.signature)
    assert arc.cache_hits > 0


def test_jsonl_fields_and_roundtrip(tmp_path, schema24, profile):
    arc = run(cfg(schema24, profile, output=tmp_path))[0]
    path = archive_path(tmp_path, "random", 0)
    lines = path.read_text().splitlines()
    assert len(lines) == 200
    rec = json.loads(lines[0])
    assert set(rec) == FIELDS
    assert set(rec["bits"]) <= {"0", "1"} and len(rec["bits"]) == 24
    back = read_archive(path)
    assert back.to_jsonl() == arc.to_jsonl()


def test_manifest_written_first(tmp_path, schema24, profile, monkeypatch):
    calls = {"n": 0}
    real = Oracle.evaluate

    def flaky(self, z, render_seed):
        calls["n"] += 1
        if calls["n"] > 120:
            raise RuntimeError("oracle crashed")
        return real(self, z, render_seed)

    monkeypatch.setattr(Oracle, "evaluate", flaky)
    with pytest.raises(RuntimeError):
        run(cfg(schema24, profile, output=tmp_path))
    assert (tmp_path / "random" / "manifest.json").exists()
    assert not archive_path(tmp_path, "random", 0).exists()
    assert not list(tmp_path.rglob("*.tmp"))


def test_run_suite(tmp_path, schema24, profile):
    specs = [SolverSpec("Random"), SolverSpec("SA")]
    archives, errors = run_suite(schema24, profile, specs, budget=100, seeds=(0, 1), out=tmp_path)
    assert not errors
    assert sorted(archives) == [("random", 0), ("random", 1), ("sa", 0), ("sa", 1)]
    assert sum(len(a) for a in archives.values()) == 400
    assert not np.array_equal(archives[("random", 0)].bits, archives[("random", 1)].bits)
    loaded = load_archives(tmp_path)
    assert sorted(loaded) == sorted(archives)
    with pytest.raises(ConfigError):
        run_suite(schema24, profile, [], budget=100)


def test_run_suite_reports_failed_cells(tmp_path, schema24, profile, monkeypatch):
    real = harness._run_seed

    def boom(config, seed):
        if config.solver.kind == "SA":
            raise RuntimeError("solver exploded")
        return real(config, seed)

    monkeypatch.setattr(harness, "_run_seed", boom)
    archives, errors = run_suite(schema24, profile, [SolverSpec("Random"), SolverSpec("SA")],
                                 budget=100, seeds=(0,), out=tmp_path)
    assert list(archives) == [("random", 0)]
    assert list(errors) == [("sa", 0)]
    assert "solver exploded" in (tmp_path / "suite_errors.txt").read_text()


def test_enumerate(mini, profile):
    arc = enumerate_space(mini, profile)
    assert len(arc) == 256
    assert len({bits_to_str(r.z) for r in arc.records}) == 256
    assert bits_to_str(arc.records[5].z) == "00000101"
    big = build_schema({"name": "wide", "features": [{"name": f"F{i}", "cardinality": 2, "bits": 1} for i in range(20)]})
    with pytest.raises(ConfigError):
        enumerate_space(big, profile)


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("RISKSCOUT_THREADS", "2")
    assert thread_cap(8) == 2
    monkeypatch.setenv("RISKSCOUT_THREADS", "lots")
    with pytest.raises(ConfigError):
        thread_cap(4)
    monkeypatch.delenv("RISKSCOUT_THREADS")
    assert thread_cap(0) == 1
