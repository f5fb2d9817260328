"""Baseline-versus-RDLN cross-entropy curves.

Curve table: header ``epoch baseline_valid_ce rdln_valid_ce diff`` where
``diff = rdln - baseline``, one row per epoch present in both metric files,
then a summary line ``# crossover <epoch|none>``.
"""

from dataclasses import dataclass

CURVES_HEADER = "epoch baseline_valid_ce rdln_valid_ce diff"


@dataclass
class CurveRow:
    epoch: int
    baseline: float
    rdln: float

    @property
    def diff(self):
        return self.rdln - self.baseline


def merge_curves(baseline_rows, rdln_rows):
    base = {r.epoch: r.valid_ce for r in baseline_rows}
    other = {r.epoch: r.valid_ce for r in rdln_rows}
    return [CurveRow(e, base[e], other[e]) for e in sorted(set(base) & set(other))]


def crossover_epoch(rows, max_outliers=1):
    """First epoch from which RDLN stays below baseline, tolerating ``max_outliers`` misses.

    The crossover epoch itself must be a strict win.  Returns None when no
    such epoch exists.
    """
    losses = [not (r.rdln < r.baseline) for r in rows]
    for k, r in enumerate(rows):
        if not losses[k] and sum(losses[k:]) <= max_outliers:
            return r.epoch
    return None


def dumps_curves(rows):
    lines = [CURVES_HEADER]
    lines += [f"{r.epoch} {r.baseline:.9g} {r.rdln:.9g} {r.diff:.9g}" for r in rows]
    cross = crossover_epoch(rows)
    lines.append(f"# crossover {cross if cross is not None else 'none'}")
    return "\n".join(lines) + "\n"
