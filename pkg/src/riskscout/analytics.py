"""Summary statistics, exclusivity, cross-temporal overlap and risk-mode comparisons."""
from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .schema import FeatureSchema, bits_to_str


class EmptyArchive(ValueError):
    pass


class SchemaMismatch(ValueError):
    pass


@dataclass
class SummaryRow:
    max: float
    mean: float
    std: float
    rare: float
    t10_mu: float
    t10_sd: float
    unique_layouts: float
    auc: float
    hamming: float
    entropy: float

    def as_dict(self) -> dict:
        return asdict(self)


SUMMARY_COLUMNS = ("max", "mean", "std", "rare", "t10_mu", "t10_sd", "unique_layouts", "auc", "hamming", "entropy")


def cumulative_max_auc(risks: Sequence[float]) -> float:
    """(1/B) sum_t runmax(t) / runmax(B); 1.0 for an all-zero sequence."""
    r = np.asarray(risks, dtype=float)
    if len(r) == 0:
        raise EmptyArchive("no records")
    runmax = np.maximum.accumulate(r)
    final = runmax[-1]
    if final <= 0 or runmax[0] == final:
        return 1.0
    return float(min(runmax.mean() / final, 1.0))


def hamming_diversity(bits) -> float:
    """Mean normalised Hamming distance over all unordered record pairs, via per-bit counts."""
    Z = np.asarray(bits, dtype=np.int64)
    B, N = Z.shape
    if B < 2:
        return 0.0
    ones = Z.sum(axis=0)
    return float((ones * (B - ones)).sum() / (B * (B - 1) / 2) / N)


def hamming_diversity_direct(bits) -> float:
    Z = np.asarray(bits, dtype=np.int64)
    B, N = Z.shape
    if B < 2:
        return 0.0
    total = 0
    for i in range(B):
        total += np.abs(Z[i + 1 :] - Z[i]).sum()
    return float(total / (B * (B - 1) / 2) / N)


def feature_entropy(feature_values: Mapping[str, Sequence[int]], schema: FeatureSchema) -> float:
    """Mean Shannon entropy (nats) of each free feature's empirical value distribution."""
    ents = []
    for f in schema.features:
        if f.is_fixed:
            continue
        counts = np.bincount(np.asarray(feature_values[f.name]), minlength=f.cardinality)
        p = counts[counts > 0] / counts.sum()
        ents.append(float(-(p * np.log(p)).sum()) + 0.0)
    return float(np.mean(ents))


def summary_stats(archive, schema: FeatureSchema) -> SummaryRow:
    records = archive.records
    if not records:
        raise EmptyArchive("cannot summarise an empty archive")
    risk = np.array([r.risk for r in records])
    bits = np.array([r.z for r in records], dtype=np.uint8)
    k = math.ceil(len(risk) / 10)
    top = np.sort(risk)[::-1][:k]
    values = {f.name: [r.features[f.name] for r in records] for f in schema.features}
    return SummaryRow(
        max=float(risk.max()),
        mean=float(risk.mean()),
        std=float(risk.std()),
        rare=float(np.mean([r.rarity for r in records])),
        t10_mu=float(top.mean()),
        t10_sd=float(top.std()),
        unique_layouts=len({bits_to_str(z) for z in bits}),
        auc=cumulative_max_auc(risk),
        hamming=hamming_diversity(bits),
        entropy=feature_entropy(values, schema),
    )


def average_rows(rows: Sequence[SummaryRow]) -> SummaryRow:
    return SummaryRow(**{c: float(np.mean([getattr(r, c) for r in rows])) for c in SUMMARY_COLUMNS})


def _prefix_sets(bits_seq: Sequence[str], ts: Iterable[int]) -> dict[int, set]:
    out = {}
    seen = set()
    pos = 0
    for t in sorted(ts):
        while pos < min(t, len(bits_seq)):
            seen.add(bits_seq[pos])
            pos += 1
        out[t] = set(seen)
    return out


def _keys(archive) -> list[str]:
    if isinstance(archive, (list, tuple)) and archive and isinstance(archive[0], str):
        return list(archive)
    return [bits_to_str(r.z) for r in archive.records]


def _check_widths(*archives):
    widths = {len(k[0]) for k in archives if k}
    if len(widths) > 1:
        raise SchemaMismatch(f"archives have different bit widths {sorted(widths)}")


def exclusivity(target: set, others: set) -> float:
    union = target | others
    if not union:
        return 0.0
    return len(target - others) / len(union)


def exclusivity_curve(target, others: Sequence, step=50, budget=None) -> list[tuple[int, float]]:
    """Excl(A, t) at t = step, 2*step, ..., comparing equal-length prefixes of every archive.

    Archives may be RunArchive objects or plain sequences of bitstrings.
    """
    tk = _keys(target)
    ok = [_keys(o) for o in others]
    _check_widths(tk, *ok)
    budget = budget or len(tk)
    ts = list(range(step, budget + 1, step))
    tsets = _prefix_sets(tk, ts)
    osets = [_prefix_sets(o, ts) for o in ok]
    out = []
    for t in ts:
        other = set().union(*(s[t] for s in osets)) if osets else set()
        out.append((t, exclusivity(tsets[t], other)))
    return out


@dataclass
class OverlapCell:
    shared: int
    row_exclusive: int
    col_exclusive: int


def cross_temporal_overlap(a, b, snapshots=(100, 500, 1000), step=100, budget=None):
    """Rows of (snapshot, t, exclusive_a, common, exclusive_b) with A frozen at each snapshot."""
    ak, bk = _keys(a), _keys(b)
    _check_widths(ak, bk)
    budget = budget or max(len(ak), len(bk))
    ts = list(range(step, budget + 1, step))
    asets = _prefix_sets(ak, snapshots)
    bsets = _prefix_sets(bk, ts)
    rows = []
    for s in snapshots:
        A = asets[s]
        for t in ts:
            B = bsets[t]
            common = len(A & B)
            rows.append((s, t, len(A) - common, common, len(B) - common))
    return rows


def mode_sets(archives_by_solver: Mapping[str, Iterable]) -> dict[str, set]:
    """Distinct core-mode labels per solver, unioned over all its archives."""
    out = {}
    for solver, archives in archives_by_solver.items():
        modes = set()
        for arc in archives:
            if isinstance(arc, (set, frozenset, list, tuple)):
                modes |= {m if isinstance(m, str) else m.label() for m in arc}
            else:
                modes |= {r.core_mode.label() for r in arc.records}
        out[solver] = modes
    return out


def core_mode_matrix(sets: Mapping[str, set]):
    """Pairwise Shared/Row/Col counts and win rates over per-solver mode sets.

    A solver's win rate is the fraction of other solvers that hold strictly
    fewer modes exclusive against it than it holds against them.
    """
    names = list(sets)
    if len(names) < 2:
        raise ValueError("need at least two solvers")
    matrix = {}
    for r in names:
        for c in names:
            if r == c:
                continue
            S, T = sets[r], sets[c]
            matrix[(r, c)] = OverlapCell(len(S & T), len(S - T), len(T - S))
    wins = {}
    for r in names:
        opp = [c for c in names if c != r]
        wins[r] = sum(matrix[(r, c)].col_exclusive < matrix[(r, c)].row_exclusive for c in opp) / len(opp)
    return matrix, wins


def mode_census(archives_by_solver: Mapping[str, Iterable]):
    """(count of evaluations per mode, fraction of all known modes each solver found)."""
    counts = Counter()
    for archives in archives_by_solver.values():
        for arc in archives:
            counts.update(r.core_mode.label() for r in arc.records)
    sets = mode_sets(archives_by_solver)
    total = len(counts)
    fractions = {s: (len(m) / total if total else 0.0) for s, m in sets.items()}
    return counts, fractions


def signature_census(archives_by_solver: Mapping[str, Iterable], component_names: Sequence[str]):
    """Per solver, how many evaluations activate each signature component."""
    out = {}
    for solver, archives in archives_by_solver.items():
        c = np.zeros(len(component_names), dtype=np.int64)
        for arc in archives:
            for r in arc.records:
                c += np.asarray(r.signature, dtype=np.int64)
        out[solver] = dict(zip(component_names, (int(x) for x in c)))
    return out


def group_by_solver(archives: Mapping[tuple[str, int], object]) -> dict[str, list]:
    out = defaultdict(list)
    for (solver, seed) in sorted(archives):
        out[solver].append(archives[(solver, seed)])
    return dict(out)


def top_decile_mean(risks: Sequence[float]) -> float:
    r = np.sort(np.asarray(risks, dtype=float))[::-1]
    return float(r[: math.ceil(len(r) / 10)].mean())
