"""CSV and markdown renderings of the analytics tables.

Every writer formats floats with a fixed precision and iterates in a fixed
order, so identical archives always give identical bytes.
"""
from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import analytics as an
from .harness import _atomic_write
from .solvers.base import CLI_NAMES

FLOAT_FMT = "{:.6f}"


def solver_order(names) -> list[str]:
    """Canonical method order first, unknown names after, alphabetically."""
    known = [n for n in CLI_NAMES if n in names]
    return known + sorted(set(names) - set(known))


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT.format(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def to_csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def to_markdown(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for row in rows:
        lines.append("| " + " | ".join(_fmt(v) for v in row) + " |")
    return "\n".join(lines) + "\n"


def _seeds(archives) -> list[int]:
    return sorted({seed for (_, seed) in archives})


def summary_table(archives: Mapping[tuple[str, int], object], schema):
    """One row per solver: each column computed per seed, then averaged."""
    by = an.group_by_solver(archives)
    header = ("solver", "seeds") + an.SUMMARY_COLUMNS
    rows = []
    for name in solver_order(by):
        avg = an.average_rows([an.summary_stats(a, schema) for a in by[name]])
        rows.append((name, len(by[name])) + tuple(getattr(avg, c) for c in an.SUMMARY_COLUMNS))
    return header, rows


def exclusivity_table(archives, step=50):
    """Excl(A, t) averaged over seeds, with A's own top-decile mean risk at each prefix."""
    seeds = _seeds(archives)
    names = solver_order({n for (n, _) in archives})
    header = ("solver", "t", "excl", "t10_mu")
    rows = []
    for name in names:
        curves, tops = [], []
        for s in seeds:
            if (name, s) not in archives:
                continue
            target = archives[(name, s)]
            others = [archives[(o, s)] for o in names if o != name and (o, s) in archives]
            curves.append(an.exclusivity_curve(target, others, step=step))
            r = target.risks
            tops.append([an.top_decile_mean(r[:t]) for t, _ in curves[-1]])
        ts = [t for t, _ in curves[0]]
        excl = np.mean([[e for _, e in c] for c in curves], axis=0)
        top = np.mean(tops, axis=0)
        rows.extend((name, t, float(e), float(m)) for t, e, m in zip(ts, excl, top))
    return header, rows


def overlap_table(archives, fix: str, against: str, snapshots=(100, 500, 1000), step=100):
    """Cross-temporal overlap per seed: fix frozen at each snapshot, against grows along t."""
    header = ("seed", "snapshot", "t", f"exclusive_{fix}", "common", f"exclusive_{against}")
    rows = []
    for s in _seeds(archives):
        if (fix, s) not in archives or (against, s) not in archives:
            continue
        a, b = archives[(fix, s)], archives[(against, s)]
        snaps = [x for x in snapshots if x <= len(a)]
        for snap, t, ea, c, eb in an.cross_temporal_overlap(a, b, snaps, step):
            rows.append((s, snap, t, ea, c, eb))
    if not rows:
        raise an.EmptyArchive(f"no seed has archives for both {fix!r} and {against!r}")
    return header, rows


def modes_tables(archives):
    """(matrix header/rows, win-rate header/rows, census header/rows) over seed-union mode sets."""
    by = an.group_by_solver(archives)
    names = solver_order(by)
    sets = an.mode_sets({n: by[n] for n in names})
    matrix, wins = an.core_mode_matrix(sets)
    m_rows = []
    for r in names:
        for c in names:
            if r == c:
                continue
            cell = matrix[(r, c)]
            m_rows.append((r, c, cell.shared, cell.row_exclusive, cell.col_exclusive))
    counts, fractions = an.mode_census({n: by[n] for n in names})
    w_rows = [(n, len(sets[n]), wins[n], fractions[n]) for n in names]
    c_rows = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return (
        (("row", "col", "shared", "row_exclusive", "col_exclusive"), m_rows),
        (("solver", "modes", "win_rate", "discovery_fraction"), w_rows),
        (("core_mode", "evaluations"), c_rows),
    )


def signature_table(archives, component_names: Sequence[str]):
    by = an.group_by_solver(archives)
    names = solver_order(by)
    census = an.signature_census({n: by[n] for n in names}, component_names)
    header = ("solver",) + tuple(component_names)
    return header, [(n,) + tuple(census[n][c] for c in component_names) for n in names]


def prediction_table(report_rows: Sequence[Mapping]):
    header = ("category", "method", "train_size", "holdout_size", "holdout_dropped", "r2", "mae", "rmse")
    return header, [tuple(r[h] for h in header) for r in report_rows]


def write_table(path: Path, header, rows) -> Path:
    _atomic_write(Path(path), to_csv(header, rows))
    return Path(path)


def markdown_report(sections: Sequence[tuple[str, Sequence[str], Sequence]]) -> str:
    parts = ["# Risk discovery report\n"]
    for title, header, rows in sections:
        parts.append(f"\n## {title}\n\n")
        parts.append(to_markdown(header, rows))
    return "".join(parts)
