import math

import numpy as np
import pytest

from riskscout.solvers import BadParam, BatchMismatch, SolverSpec, UnknownKind, init_solver
from riskscout.solvers.base import KINDS, WARMUP_KINDS
from riskscout.solvers.bayesian import (
    TPE,
    GaussianProcessBO,
    acquisition,
    bernoulli_densities,
    expected_improvement,
    gp_fit,
    tpe_propose,
    tpe_scores,
    upper_confidence_bound,
)
from riskscout.solvers.evolutionary import (
    BinaryPSO,
    GeneticAlgorithm,
    MapElites,
    ga_step,
    grid_cell,
    map_elites_insert,
    pso_update,
    sigmoid,
    tournament_select,
)
from riskscout.solvers.local import RandomSearch, SimulatedAnnealing, anneal_accept, sa_temperature
from riskscout.solvers.policy import (
    PPO,
    Reinforce,
    log_prob,
    ppo_objective,
    ppo_update,
    reinforce_update,
)

from riskscout.schema import decode

from conftest import drive, fake_eval

CLASSIC = [k for k in KINDS if not k.startswith("Qaoa")]


def make(kind, n_bits=24, seed=0, budget=1000, schema=None, **params):
    from riskscout.seeding import stream
    from riskscout.solvers import _registry

    spec = SolverSpec(kind, params)
    return _registry()[kind](spec, n_bits, stream(seed, kind, "proposals"), budget=budget, schema=schema)


# --- spec -------------------------------------------------------------------

def test_spec_validation():
    with pytest.raises(BadParam):
        SolverSpec("GpEi", n_init=75)
    with pytest.raises(UnknownKind):
        SolverSpec("hill-climb")
    with pytest.raises(BadParam):
        SolverSpec("SA", {"temperature": 1.0})
    assert SolverSpec("ga-exploit").kind == "GAExploit"
    assert SolverSpec("gpucb").name == "gp-ucb"


def test_batch_mismatch():
    s = make("Random")
    s.propose(50)
    with pytest.raises(BatchMismatch):
        s.observe([fake_eval(np.zeros(24), 0.0)] * 3)


@pytest.mark.parametrize("kind", CLASSIC)
def test_proposals_are_binary_and_deterministic(kind, schema24):
    f = lambda z: float(z.sum())  # noqa: E731
    a = drive(make(kind, schema=schema24), f, 4)
    b = drive(make(kind, schema=schema24), f, 4)
    assert np.array_equal(a, b)
    s = make(kind, schema=schema24)
    Z = s.propose(1 if s.sequential else 50)
    assert Z.dtype == np.uint8 and set(np.unique(Z)) <= {0, 1}


@pytest.mark.parametrize("kind", sorted(WARMUP_KINDS - {"Qaoa", "QaoaCorr"}))
def test_warmup_is_uniform(kind):
    s = make(kind)
    Z = []
    for _ in range(2):
        b = s.propose(50)
        Z.append(b)
        s.observe([fake_eval(z, float(z[0])) for z in b])
    ones = np.vstack(Z).mean()
    assert 0.45 < ones < 0.55


def test_init_solver_seeds_by_kind(schema24):
    a = init_solver(SolverSpec("Random"), schema24, 0).propose(5)
    b = init_solver(SolverSpec("Random"), schema24, 0).propose(5)
    c = init_solver(SolverSpec("Random"), schema24, 1).propose(5)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


# --- simulated annealing ---------------------------------------------------

def test_sa_schedule():
    assert sa_temperature(0, 1000) == pytest.approx(3.0)
    assert sa_temperature(999, 1000) == pytest.approx(0.05)
    ts = [sa_temperature(t, 1000) for t in range(1000)]
    assert all(a > b for a, b in zip(ts, ts[1:]))


def test_anneal_accept():
    rng = np.random.default_rng(0)
    assert anneal_accept(0.0, 1.0, rng) and anneal_accept(0.3, 1.0, rng)
    T = 0.8
    hits = sum(anneal_accept(-T * math.log(2), T, rng) for _ in range(20000))
    assert abs(hits / 20000 - 0.5) < 0.02
    with pytest.raises(ValueError):
        anneal_accept(-1.0, 0.0, rng)


def test_sa_chain_is_local():
    s = make("SA")
    drive(s, lambda z: float(z.sum()), 4)
    assert len(s.trace) == 200
    for prop, parent in s.trace[1:]:
        assert int(np.abs(prop.astype(int) - parent).sum()) == 1


# --- GA -----------------------------------------------------------------

def test_tournament_prefers_fitter():
    rng = np.random.default_rng(0)
    idx = tournament_select(np.arange(10.0), 5000, 7, rng)
    assert idx.mean() > 8


def test_ga_full_mutation_complements():
    rng = np.random.default_rng(1)
    pop = np.zeros((4, 6), dtype=np.uint8)
    out = ga_step(pop, np.zeros(4), p_c=0.0, p_m=1.0, tournament=2, rng=rng, elitism=0)
    assert (out == 1).all()


def test_ga_selection_only_resamples():
    rng = np.random.default_rng(2)
    pop = rng.integers(0, 2, size=(20, 10)).astype(np.uint8)
    fit = rng.random(20)
    out = ga_step(pop, fit, p_c=0.0, p_m=0.0, tournament=3, rng=rng, elitism=1)
    rows = {r.tobytes() for r in pop}
    assert all(r.tobytes() in rows for r in out)
    assert np.array_equal(out[0], pop[np.argmax(fit)])


def test_ga_population_size():
    s = make("GAExplore")
    drive(s, lambda z: float(z.sum()), 3)
    assert s.population.shape == (50, 24)


# --- PSO -----------------------------------------------------------------

def test_sigmoid_values():
    assert sigmoid(0.0) == 0.5
    assert sigmoid(6.0) == pytest.approx(0.99753, abs=1e-5)
    assert sigmoid(-6.0) == pytest.approx(0.00247, abs=1e-5)


def test_pso_zero_velocity_at_optimum():
    rng = np.random.default_rng(0)
    x = np.ones((3, 5), dtype=np.uint8)
    _, v = pso_update(x, np.zeros((3, 5)), x.astype(float), x[0].astype(float), 0.7, 1.5, 1.5, rng)
    assert np.all(v == 0)


def test_pso_velocity_clamped():
    rng = np.random.default_rng(0)
    x = np.zeros((3, 5), dtype=np.uint8)
    _, v = pso_update(x, np.full((3, 5), 100.0), np.ones((3, 5)), np.ones(5), 1.0, 1.5, 1.5, rng, v_max=6.0)
    assert v.max() == 6.0


# --- MAP-Elites -------------------------------------------------------------

def test_grid_cell_edges():
    assert grid_cell((0.0, 0.0)) == (0, 0)
    assert grid_cell((1.0, 1.0)) == (24, 24)
    assert grid_cell((0.5, 0.999)) == (12, 24)


def test_map_elites_insert_rules():
    grid = {}
    z = np.zeros(4)
    _, ok = map_elites_insert(grid, fake_eval(z, 1.0), (0.1, 0.1))
    assert ok
    _, ok = map_elites_insert(grid, fake_eval(z, 1.0), (0.1, 0.1))
    assert not ok
    _, ok = map_elites_insert(grid, fake_eval(z, 0.5), (0.1, 0.1))
    assert not ok
    _, ok = map_elites_insert(grid, fake_eval(z, 1.5), (0.1, 0.1))
    assert ok and grid[(2, 2)]["risk"] == 1.5


def test_map_elites_elites_monotone(schema24):
    s = make("MapElites", schema=schema24)
    rng = np.random.default_rng(0)
    prev = {}
    for _ in range(6):
        Z = s.propose(50)
        s.observe([fake_eval(z, float(rng.random()), decode(z, schema24)) for z in Z])
        for cell, e in prev.items():
            assert s.grid[cell]["risk"] >= e
        prev = {c: e["risk"] for c, e in s.grid.items()}
    assert s.use_structural


# --- GP ------------------------------------------------------------------

def test_gp_interpolates():
    rng = np.random.default_rng(0)
    X = np.unique(rng.integers(0, 2, size=(30, 12)), axis=0).astype(np.uint8)
    y = rng.random(len(X))
    post = gp_fit(X, y, length_scale=2.0, noise=1e-10)
    mu, var = post.predict(X)
    assert np.abs(mu - y).max() < 1e-6
    assert var.max() < 1e-6


def test_gp_far_point_reverts_to_prior():
    X = np.zeros((3, 24), dtype=np.uint8)
    X[1, 0] = X[2, 1] = 1
    post = gp_fit(X, [1.0, 2.0, 3.0], length_scale=1.0)
    mu, var = post.predict(np.ones((1, 24), dtype=np.uint8))
    # k = exp(-23/2) ~ 1e-5 against every training point
    assert mu[0] == pytest.approx(2.0, abs=1e-3)
    assert var[0] == pytest.approx(post.signal_var, rel=1e-3)


def test_expected_improvement_cases():
    assert expected_improvement(0.0, 1.0, 0.0) == pytest.approx(0.39894, abs=1e-5)
    assert expected_improvement(1.0, 0.0, 2.0) == 0.0
    assert expected_improvement(3.0, 0.0, 2.0) == 1.0
    assert upper_confidence_bound(1.0, 0.5, 2.0) == 2.0


def test_acquisition_kinds():
    X = np.eye(4, dtype=np.uint8)
    post = gp_fit(X, [0.0, 1.0, 2.0, 3.0])
    ei = acquisition(post, X, "EI", incumbent=3.0)
    ucb = acquisition(post, X, "UCB", kappa=2.0)
    assert ei.shape == ucb.shape == (4,)
    with pytest.raises(ValueError):
        acquisition(post, X, "EI")
    with pytest.raises(ValueError):
        acquisition(post, X, "PI", incumbent=0.0)


def test_gp_proposals_unique_after_warmup():
    s = make("GpEi", n_bits=16)
    risks = drive(s, lambda z: float(z[:8].sum()), 4)
    assert len(risks) == 200


# --- TPE -----------------------------------------------------------------

def test_bernoulli_densities_smoothing():
    good = np.ones((10, 3), dtype=np.uint8)
    bad = np.zeros((30, 3), dtype=np.uint8)
    l, g = bernoulli_densities(good, bad, 1.0)
    assert l == pytest.approx([11 / 12] * 3)
    assert g == pytest.approx([1 / 32] * 3)


def test_tpe_scores_zero_when_equal():
    l = np.full(5, 0.3)
    C = np.random.default_rng(0).integers(0, 2, size=(10, 5))
    assert np.allclose(tpe_scores(C, l, l), 0.0)


def test_tpe_planted_bit():
    rng = np.random.default_rng(0)
    X = rng.integers(0, 2, size=(200, 10)).astype(np.uint8)
    y = X[:, 3].astype(float) + 0.01 * rng.random(200)
    batch = tpe_propose(X, y, 50, rng)
    assert batch[:, 3].mean() >= 0.9


# --- policy gradient ------------------------------------------------------

def test_reinforce_single_step():
    logits = np.zeros(3)
    X = np.array([[1, 0, 1]])
    out = reinforce_update(logits, X, [2.0], baseline=1.0, alpha=0.1)
    assert out == pytest.approx([0.05, -0.05, 0.05])
    same = reinforce_update(logits, X, [1.0], baseline=1.0, alpha=0.1)
    assert np.array_equal(same, logits)


def test_logits_clamped():
    X = np.ones((50, 4))
    out = reinforce_update(np.zeros(4), X, np.full(50, 100.0), 0.0, alpha=1.0)
    assert np.all(out == 10.0)
    assert np.all((sigmoid(out) > 0) & (sigmoid(out) < 1))


def test_log_prob_normalised():
    logits = np.array([0.3, -1.2, 2.0])
    allx = np.array([[(v >> i) & 1 for i in range(3)] for v in range(8)])
    assert np.exp(log_prob(logits, allx)).sum() == pytest.approx(1.0, abs=1e-12)


def test_ppo_objective_inside_clip():
    rng = np.random.default_rng(0)
    old = rng.normal(size=6)
    new = old + 1e-3 * rng.normal(size=6)
    X = rng.integers(0, 2, size=(20, 6))
    A = rng.normal(size=20)
    ratio = np.exp(log_prob(new, X) - log_prob(old, X))
    assert ppo_objective(new, old, X, A, 0.2) == pytest.approx(float((ratio * A).sum()), abs=1e-12)


def test_ppo_update_increases_objective():
    rng = np.random.default_rng(1)
    X = rng.integers(0, 2, size=(50, 8))
    A = X[:, 0] - X[:, 0].mean()
    theta = ppo_update(np.zeros(8), X, A, lr=0.02)
    assert ppo_objective(theta, np.zeros(8), X, A) > ppo_objective(np.zeros(8), np.zeros(8), X, A)
    assert theta[0] > 0


def test_ppo_entropy_pulls_to_centre():
    X = np.zeros((50, 4))
    theta = ppo_update(np.full(4, 3.0), X, np.zeros(50), lr=0.02, entropy_coef=0.03)
    assert np.all(theta < 3.0)


# --- planted optimum ------------------------------------------------------

def _planted_best(kind, seed, **params):
    f = lambda z: float(z.mean())  # noqa: E731
    return drive(make(kind, n_bits=16, seed=seed, budget=500, **params), f, 10).max()


@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("kind", [k for k in KINDS if k not in ("Random", "MapElites", "Qaoa", "QaoaCorr")])
def test_planted_optimum_floor(kind, seed):
    """Separable landscape (risk = fraction of bits set), N=16, B=500: best >= 0.9."""
    assert _planted_best(kind, seed) >= 0.9


@pytest.mark.slow
@pytest.mark.parametrize("kind", ["Qaoa", "QaoaCorr"])
def test_planted_optimum_floor_qaoa(kind):
    for seed in (0, 1, 2):
        assert _planted_best(kind, seed) >= 0.9


@pytest.mark.xfail(reason="uniform sampling reaches >=15/16 ones with p=17/65536 per draw, ~12% over 500 draws",
                   strict=False)
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_planted_optimum_floor_random(seed):
    assert _planted_best("Random", seed) >= 0.9


@pytest.mark.xfail(reason="uniform archive selection without risk pressure: best 13-14/16 on most seeds at B=500",
                   strict=False)
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_planted_optimum_floor_map_elites(seed):
    assert _planted_best("MapElites", seed) >= 0.9


def test_map_elites_improves_on_planted():
    assert np.mean([_planted_best("MapElites", s) for s in range(3)]) >= 0.8


def test_random_floor_probability():
    p = 17 / 2**16
    assert 1 - (1 - p) ** 500 < 0.15
