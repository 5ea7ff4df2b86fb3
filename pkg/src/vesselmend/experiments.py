"""Ablation and convergence harnesses over a corpus of connected masks.

The ablation grid crosses operators tuned for a "train" disconnection
size against corpora disconnected at each "test" size, one single
operator application per image, and tabulates mean +- std of dsc, assd
and eps_beta0 per cell next to the undamaged-baseline ("before") values.

The convergence harness applies one operator iteratively to a damaged
corpus and records the per-iteration voxel difference and metrics until
the fixed point (or the iteration cap).

Every cell derives its own seed from the plan seed, so re-running a plan
reproduces its tables byte for byte.
"""

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .disconnect import DisconnectionSpec, generate_pair
from .errors import MissingOperatorError
from .metrics import report
from .reconnect import iterate

# seed spacing between cells; anything > corpus size keeps streams disjoint
_CELL_SEED_STRIDE = 1_000_003


@dataclass(frozen=True)
class ExperimentPlan:
    """Grid of (train size, test size) cells plus deterministic seeding."""

    train_sizes: tuple
    test_sizes: tuple
    size_std: float = 4.0
    n_disconnections: int = 15
    n_artifacts: int = 0
    seed: int = 0

    def __post_init__(self):
        if not self.train_sizes or not self.test_sizes:
            raise ValueError("plan needs at least one train and one test size")
        if any(s <= 0 for s in self.train_sizes + self.test_sizes):
            raise ValueError("train/test sizes must be positive")

    def cells(self):
        out = []
        for i, s_train in enumerate(self.train_sizes):
            for j, s_test in enumerate(self.test_sizes):
                cell_seed = self.seed + _CELL_SEED_STRIDE * (
                    1 + i * len(self.test_sizes) + j
                )
                out.append((s_train, s_test, cell_seed))
        return out

    def spec_for(self, s_test, cell_seed, image_index):
        return DisconnectionSpec(
            size_mean=s_test,
            size_std=self.size_std,
            n_disconnections=self.n_disconnections,
            n_artifacts=self.n_artifacts,
            seed=cell_seed + image_index,
        )


@dataclass
class CellResult:
    s_train: float
    s_test: float
    before: list = field(default_factory=list)
    after: list = field(default_factory=list)


def _mean_std(reports, key):
    vals = [getattr(r, key) for r in reports if getattr(r, key) is not None]
    if not vals:
        return float("nan"), float("nan")
    return float(np.mean(vals)), float(np.std(vals))


def _ablation_cell(args):
    plan, op, masks, s_train, s_test, cell_seed = args
    cell = CellResult(s_train=s_train, s_test=s_test)
    for idx, mask in enumerate(masks):
        pair = generate_pair(mask, plan.spec_for(s_test, cell_seed, idx))
        cell.before.append(report(pair.disconnected, mask))
        fixed = op.apply(pair.disconnected)
        cell.after.append(report(fixed, mask))
    return cell


def run_ablation(plan, operators, masks, jobs=1):
    """Evaluate one operator per train size on per-cell damaged corpora.

    ``operators`` maps each train size in the plan to a Reconnector; the
    operator is applied exactly once per image.  Returns the list of
    :class:`CellResult` (before/after per-image reports per cell), in
    plan cell order regardless of ``jobs``.
    """
    for s_train in plan.train_sizes:
        if s_train not in operators:
            raise MissingOperatorError(f"no operator for train size {s_train}")
    work = [
        (plan, operators[s_train], masks, s_train, s_test, cell_seed)
        for s_train, s_test, cell_seed in plan.cells()
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_ablation_cell, work))
    return [_ablation_cell(w) for w in work]


def ablation_to_csv(plan, results):
    """Table-shaped CSV: one "before" row, one row per train size.

    Columns are (dsc, assd, eps_beta0) x test sizes, each as mean and
    std.  The before row aggregates the damaged corpora of all cells in
    that test-size column.
    """
    by_cell = {(c.s_train, c.s_test): c for c in results}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["row"]
    for s_test in plan.test_sizes:
        for m in ("dsc", "assd", "eps_beta0"):
            header += [f"s{s_test:g}_{m}_mean", f"s{s_test:g}_{m}_std"]
    writer.writerow(header)

    row = ["before"]
    for s_test in plan.test_sizes:
        col_reports = []
        for s_train in plan.train_sizes:
            col_reports.extend(by_cell[(s_train, s_test)].before)
        for m in ("dsc", "assd", "eps_beta0"):
            mean, std = _mean_std(col_reports, m)
            row += [f"{mean:.9g}", f"{std:.9g}"]
    writer.writerow(row)

    for s_train in plan.train_sizes:
        row = [f"train_s{s_train:g}"]
        for s_test in plan.test_sizes:
            cell = by_cell[(s_train, s_test)]
            for m in ("dsc", "assd", "eps_beta0"):
                mean, std = _mean_std(cell.after, m)
                row += [f"{mean:.9g}", f"{std:.9g}"]
        writer.writerow(row)
    return buf.getvalue()


@dataclass
class ConvergenceRun:
    image: str
    s_test: float
    trace: object
    final_report: object


def _convergence_one(args):
    op, name, damaged, reference, s_test, max_iter, tol = args
    final, trace = iterate(op, damaged, max_iter=max_iter, tol=tol,
                           reference=reference)
    return ConvergenceRun(
        image=name, s_test=s_test, trace=trace,
        final_report=report(final, reference),
    )


def run_convergence(op, pairs, max_iter=20, tol=0, jobs=1):
    """Iterate ``op`` on (name, damaged, reference, s_test) corpora.

    Returns one :class:`ConvergenceRun` per image with the full trace
    (diffs and per-iteration metrics against the reference), in input
    order regardless of ``jobs``.
    """
    work = [
        (op, name, damaged, reference, s_test, max_iter, tol)
        for name, damaged, reference, s_test in pairs
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_convergence_one, work))
    return [_convergence_one(w) for w in work]


def convergence_to_csv(runs):
    """Per-image per-iteration rows: diff plus metrics at each step."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["image", "s_test", "iteration", "diff", "dsc", "assd",
         "eps_beta0", "converged"]
    )
    for run in runs:
        tr = run.trace
        for k, d in enumerate(tr.diffs):
            rep = tr.metrics[k] if tr.metrics else None
            writer.writerow([
                run.image,
                f"{run.s_test:g}",
                k + 1,
                d,
                f"{rep.dsc:.9g}" if rep else "",
                f"{rep.assd:.9g}" if rep and rep.assd is not None else "",
                f"{rep.eps_beta0:.9g}" if rep else "",
                tr.converged,
            ])
    return buf.getvalue()
