"""Evaluation metrics between a segmentation and a reference annotation.

Conventions fixed here so results are reproducible bit-for-bit:

* Dice of two empty masks is 1.0.
* ASSD boundaries are foreground voxels with at least one face-adjacent
  background voxel; voxels on the grid border count as boundary (the
  outside of the grid is treated as background, the usual reference
  implementation convention).  Distances are exact Euclidean between the
  two boundary point sets, and the symmetric average is weighted by the
  boundary sizes.  ASSD is undefined (raises) when either mask is empty.
* AUC is the Mann-Whitney statistic of the soft map against the binary
  reference, ties counted half; it is only reported for soft inputs,
  binary segmentations get none.
* Component counts use full connectivity (8/26).

Distances are in voxel units; grids are assumed isotropic.
"""

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi
from scipy.stats import rankdata

from .errors import (
    DegenerateReferenceError,
    EmptyMaskError,
    ZeroReferenceComponentsError,
)
from .grids import ensure_grid, ensure_mask, same_shape
from .morphology import connected_components

CSV_COLUMNS = ("dsc", "assd", "beta0", "beta0_gt", "eps_beta0", "auc")


@dataclass(frozen=True)
class MetricsReport:
    dsc: float
    assd: float | None
    beta0: int
    beta0_gt: int
    eps_beta0: float
    auc: float | None = None
    notes: str = ""

    def as_dict(self):
        return {
            "dsc": self.dsc,
            "assd": self.assd,
            "beta0": self.beta0,
            "beta0_gt": self.beta0_gt,
            "eps_beta0": self.eps_beta0,
            "auc": self.auc,
        }


def dice(seg, ref):
    """Dice-Sorensen overlap; 1.0 when both masks are empty."""
    s, r = ensure_mask(seg), ensure_mask(ref)
    same_shape(s, r)
    denom = int(s.sum()) + int(r.sum())
    if denom == 0:
        return 1.0
    inter = int(np.count_nonzero((s > 0) & (r > 0)))
    return 2.0 * inter / denom


def _boundary(mask):
    face = ndi.generate_binary_structure(mask.ndim, 1)
    m = mask.astype(bool)
    return m & ~ndi.binary_erosion(m, structure=face, border_value=0)


def assd(seg, ref):
    """Average symmetric surface distance between boundary voxel sets."""
    s, r = ensure_mask(seg), ensure_mask(ref)
    same_shape(s, r)
    if not s.any() or not r.any():
        raise EmptyMaskError("ASSD undefined for an empty mask")
    bs, br = _boundary(s), _boundary(r)
    # exact distance of every voxel to the nearest boundary voxel of the
    # other mask, read off at this mask's boundary voxels
    d_to_ref = ndi.distance_transform_edt(~br)
    d_to_seg = ndi.distance_transform_edt(~bs)
    d_sr = d_to_ref[bs]
    d_rs = d_to_seg[br]
    return float((d_sr.sum() + d_rs.sum()) / (d_sr.size + d_rs.size))


def beta0_error(seg, ref):
    """Component counts of both masks and their relative error ratio."""
    s, r = ensure_mask(seg), ensure_mask(ref)
    same_shape(s, r)
    b0 = connected_components(s).count
    b0_gt = connected_components(r).count
    if b0_gt == 0:
        raise ZeroReferenceComponentsError("reference has no components")
    return b0, b0_gt, abs(b0 - b0_gt) / b0_gt


def auc(prob, ref):
    """Area under the ROC curve of a soft map against a binary reference.

    Computed as the Mann-Whitney statistic (probability that a random
    foreground voxel outranks a random background voxel, ties counted
    half), which equals trapezoidal integration over the unique
    thresholds.
    """
    g = ensure_grid(prob)
    r = ensure_mask(ref)
    same_shape(g, r)
    if g.size and float(g.max()) > 1.0:
        raise ValueError("probability values must lie in [0, 1]")
    y = r.ravel() > 0
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateReferenceError("reference holds a single class")
    ranks = rankdata(g.ravel(), method="average")
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def report(seg, ref, prob=None):
    """All metrics for one (segmentation, reference) pair.

    An empty segmentation against a non-empty reference yields dsc 0.0
    and no ASSD (the reason lands in ``notes``).
    """
    s, r = ensure_mask(seg), ensure_mask(ref)
    same_shape(s, r)
    d = dice(s, r)
    b0, b0_gt, eps = beta0_error(s, r)
    try:
        a = assd(s, r)
        notes = ""
    except EmptyMaskError as exc:
        a = None
        notes = str(exc)
    auc_val = auc(prob, r) if prob is not None else None
    return MetricsReport(
        dsc=d, assd=a, beta0=b0, beta0_gt=b0_gt, eps_beta0=eps,
        auc=auc_val, notes=notes,
    )


# ---------------------------------------------------------------------------
# serialization


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def reports_to_csv(reports, ids=None, summary=False):
    """Fixed-column CSV; optional mean/std summary rows for batches.

    Column order is dsc, assd, beta0, beta0_gt, eps_beta0, auc, preceded
    by an ``image`` identifier column when ids are given or a summary is
    requested (row indices are used as ids then).
    """
    if summary and ids is None:
        ids = list(range(len(reports)))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = list(CSV_COLUMNS)
    if ids is not None:
        header = ["image"] + header
    writer.writerow(header)
    for k, rep in enumerate(reports):
        row = [_fmt(rep.as_dict()[c]) for c in CSV_COLUMNS]
        if ids is not None:
            row = [str(ids[k])] + row
        writer.writerow(row)
    if summary:
        stats = summarize(reports)
        for pos, stat in ((0, "mean"), (1, "std")):
            row = [stat]
            for c in CSV_COLUMNS:
                v = stats[c][pos]
                row.append("" if math.isnan(v) else _fmt(v))
            writer.writerow(row)
    return buf.getvalue()


def reports_to_json(reports, ids=None):
    out = []
    for k, rep in enumerate(reports):
        entry = rep.as_dict()
        if ids is not None:
            entry = {"image": str(ids[k]), **entry}
        if rep.notes:
            entry["notes"] = rep.notes
        out.append(entry)
    return json.dumps(out, indent=2)


def summarize(reports):
    """Mean and std per metric over a batch, skipping absent values."""
    out = {}
    for c in CSV_COLUMNS:
        vals = [rep.as_dict()[c] for rep in reports]
        vals = [float(v) for v in vals if v is not None]
        if vals:
            out[c] = (float(np.mean(vals)), float(np.std(vals)))
        else:
            out[c] = (math.nan, math.nan)
    return out
