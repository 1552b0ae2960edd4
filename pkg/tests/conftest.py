from __future__ import annotations

import numpy as np
import pytest

from riskscout.oracle import Evaluation, CoreRiskMode, load_profile
from riskscout.schema import decode, load_schema


@pytest.fixture(scope="session")
def schema24():
    return load_schema("single_page_24")


@pytest.fixture(scope="session")
def schema27():
    return load_schema("multi_page_27")


@pytest.fixture(scope="session")
def mini():
    return load_schema("mini_8")


@pytest.fixture(scope="session")
def profile():
    return load_profile("idp-sim-v1")


def fake_eval(z, risk, features=None):
    """Minimal Evaluation for solver unit tests."""
    z = np.asarray(z, dtype=np.uint8)
    return Evaluation(
        z=z, features=features or {}, r=(), base_risk=float(risk), rarity=0.0,
        risk=float(risk), signature=(), core_mode=CoreRiskMode("LOW", (), "NO_SPLIT"),
        render_seed=0,
    )


def drive(solver, fn, iterations, batch=50):
    """Run a solver against a plain function of the bits; returns all risks in order."""
    out = []
    feats = (lambda z: decode(z, solver.schema)) if solver.schema is not None else (lambda z: None)
    for _ in range(iterations):
        if solver.sequential:
            for _ in range(batch):
                z = solver.propose(1)[0]
                r = fn(z)
                solver.observe([fake_eval(z, r, feats(z))])
                out.append(r)
        else:
            Z = solver.propose(batch)
            evs = [fake_eval(z, fn(z), feats(z)) for z in Z]
            solver.observe(evs)
            out.extend(e.risk for e in evs)
    return np.array(out)


# One verdict line per acceptance criterion, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
