"""Reconnection operators and the fixed-point post-processing driver.

An operator maps a binary mask to a binary mask of the same dims and is
deterministic.  :func:`iterate` applies one repeatedly until the voxel
difference between consecutive results drops to the tolerance (the l2
norm squared of a binary difference is exactly that voxel count).

Two operators ship here:

* :func:`bridge_endpoints` - a deterministic geometric baseline that
  joins skeleton endpoint pairs whose tangents face each other across a
  gap, stamping tubes of the local radius.  Needs no training.
* :func:`model_reconnector` - tiles the mask into overlapping patches,
  runs an ONNX model on each, blends by averaging, thresholds, and
  unions with the input so reconnection never deletes voxels.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import onnxlite
from .errors import (
    OperatorFailureError,
    ShapeContractViolationError,
)
from .grids import ensure_mask, voxel_diff_count
from .metrics import MetricsReport, report
from .morphology import centerline_radii, endpoints

DEFAULT_MAX_ITER = 20
DEFAULT_D_MAX = 12.0
DEFAULT_ANGLE_TOL = 35.0


class Reconnector:
    """A named deterministic mask -> mask operator."""

    name = "base"

    def apply(self, mask):
        raise NotImplementedError


class IdentityReconnector(Reconnector):
    name = "identity"

    def apply(self, mask):
        return ensure_mask(mask).copy()


@dataclass
class IterationTrace:
    iterations: int
    diffs: list
    converged: bool
    metrics: list | None = None

    def as_dict(self):
        out = {
            "iterations": self.iterations,
            "diffs": list(self.diffs),
            "converged": self.converged,
        }
        if self.metrics is not None:
            out["metrics"] = [m.as_dict() for m in self.metrics]
        return out


def iterate(op, mask, max_iter=DEFAULT_MAX_ITER, tol=0, reference=None):
    """Apply ``op`` until the step difference is <= tol or max_iter hits.

    Returns the final mask and the full trace.  When a reference mask is
    supplied, per-step metrics land in the trace.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if tol < 0:
        raise ValueError("tol must be >= 0")
    cur = ensure_mask(mask)
    diffs = []
    reps: list[MetricsReport] | None = [] if reference is not None else None
    converged = False
    for k in range(max_iter):
        try:
            nxt = ensure_mask(op.apply(cur))
        except Exception as exc:
            raise OperatorFailureError(
                f"operator {op.name!r} failed at iteration {k + 1}: {exc}"
            ) from exc
        if nxt.shape != cur.shape:
            raise OperatorFailureError(
                f"operator {op.name!r} changed dims at iteration {k + 1}: "
                f"{cur.shape} -> {nxt.shape}"
            )
        d = voxel_diff_count(nxt, cur)
        diffs.append(d)
        if reps is not None:
            reps.append(report(nxt, reference))
        cur = nxt
        if d <= tol:
            converged = True
            break
    return cur, IterationTrace(len(diffs), diffs, converged, reps)


# ---------------------------------------------------------------------------
# geometric baseline


_BALL_CACHE = {}


def _ball_offsets(radius, ndim):
    key = (round(float(radius), 3), ndim)
    offs = _BALL_CACHE.get(key)
    if offs is None:
        r = key[0]
        n = int(math.ceil(r))
        grids = np.meshgrid(*([np.arange(-n, n + 1)] * ndim), indexing="ij")
        keep = sum(g * g for g in grids) <= r * r + 1e-12
        offs = np.stack([g[keep] for g in grids], axis=-1)
        _BALL_CACHE[key] = offs
    return offs


def _branch_tangent(skeleton, tip, n_fit=5):
    """Outward unit tangent at a skeleton tip, from a short branch walk.

    Least-squares line through the ``n_fit`` skeleton voxels nearest the
    tip along its branch.  Branches shorter than ``n_fit`` voxels (noise
    crumbs, mostly) have no reliable direction; None is returned and the
    caller treats the endpoint as unconstrained.
    """
    visited = [tuple(tip)]
    seen = {tuple(tip)}
    frontier = [tuple(tip)]
    shape = skeleton.shape
    while frontier and len(visited) < n_fit:
        nxt = []
        for v in frontier:
            for off in itertools.product((-1, 0, 1), repeat=len(shape)):
                if all(o == 0 for o in off):
                    continue
                w = tuple(a + o for a, o in zip(v, off))
                if any(not 0 <= c < s for c, s in zip(w, shape)):
                    continue
                if w in seen or not skeleton[w]:
                    continue
                seen.add(w)
                visited.append(w)
                nxt.append(w)
                if len(visited) >= n_fit:
                    break
            if len(visited) >= n_fit:
                break
        frontier = nxt
    if len(visited) < n_fit:
        return None
    pts = np.asarray(visited, dtype=np.float64)
    centroid = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - centroid)
    direction = vt[0]
    outward = np.asarray(tip, dtype=np.float64) - centroid
    if np.dot(direction, outward) < 0:
        direction = -direction
    norm = np.linalg.norm(direction)
    return direction / norm if norm > 0 else None


def _stamp_segment(out, a, b, radius):
    dist = float(np.linalg.norm(np.asarray(b, float) - np.asarray(a, float)))
    n = max(2, int(math.ceil(dist / 0.5)) + 1)
    t = np.linspace(0.0, 1.0, n)[:, None]
    points = np.asarray(a, float)[None, :] * (1 - t) + np.asarray(b, float)[None, :] * t
    centers = np.rint(points).astype(np.int64)
    offs = _ball_offsets(radius, out.ndim)
    coords = (centers[:, None, :] + offs[None, :, :]).reshape(-1, out.ndim)
    for axis, size in enumerate(out.shape):
        coords = coords[(coords[:, axis] >= 0) & (coords[:, axis] < size)]
    out[tuple(coords.T)] = 1


def bridge_endpoints(mask, d_max=DEFAULT_D_MAX, angle_tol=DEFAULT_ANGLE_TOL):
    """Join facing skeleton endpoints with straight tubes.

    Endpoint pairs within ``d_max`` whose outward tangents both point
    within ``angle_tol`` degrees of the joining segment are bridged with
    a tube of radius min(local radius at either end).  Pairs are taken
    nearest first and every endpoint is used at most once per call; the
    output is a superset of the input.
    """
    m = ensure_mask(mask)
    if not m.any():
        return m.copy()
    cl = centerline_radii(m)
    tips = endpoints(cl.skeleton)
    if len(tips) < 2:
        return m.copy()

    skel = cl.skeleton.astype(bool)
    tangents = [_branch_tangent(skel, tip) for tip in tips]
    radii = [float(cl.radii[tip]) for tip in tips]
    cos_tol = math.cos(math.radians(angle_tol))

    pairs = []
    for i in range(len(tips)):
        for j in range(i + 1, len(tips)):
            delta = np.asarray(tips[j], float) - np.asarray(tips[i], float)
            dist = float(np.linalg.norm(delta))
            if dist == 0.0 or dist > d_max:
                continue
            u = delta / dist
            if tangents[i] is not None and float(np.dot(tangents[i], u)) < cos_tol:
                continue
            if tangents[j] is not None and float(np.dot(tangents[j], -u)) < cos_tol:
                continue
            pairs.append((dist, i, j))
    pairs.sort()

    out = m.copy()
    used = set()
    for dist, i, j in pairs:
        if i in used or j in used:
            continue
        used.add(i)
        used.add(j)
        radius = max(1.0, min(radii[i], radii[j]))
        _stamp_segment(out, tips[i], tips[j], radius)
    return out


class BridgeReconnector(Reconnector):
    """Reconnector wrapper around :func:`bridge_endpoints`."""

    name = "baseline"

    def __init__(self, d_max=DEFAULT_D_MAX, angle_tol=DEFAULT_ANGLE_TOL):
        self.d_max = float(d_max)
        self.angle_tol = float(angle_tol)

    def apply(self, mask):
        return bridge_endpoints(mask, self.d_max, self.angle_tol)


# ---------------------------------------------------------------------------
# model adapter


@dataclass
class ModelReconnector(Reconnector):
    """Patch-wise ONNX inference with overlap-average blending.

    The model must map a (1, 1, *patch) float32 tensor in [0, 1] to a
    same-shape tensor in [0, 1].  The thresholded output is unioned with
    the input, so the operator only ever adds voxels.
    """

    model: onnxlite.OnnxModel
    patch: tuple | None = None
    overlap: tuple | None = None
    threshold: float = 0.5
    name: str = field(default="model", init=False)

    def predict(self, mask):
        """Blended soft output over the whole mask, values in [0, 1]."""
        m = ensure_mask(mask)
        patch = self.patch or ((64, 64) if m.ndim == 2 else (32, 32, 32))
        if isinstance(patch, int):
            patch = (patch,) * m.ndim
        overlap = self.overlap or tuple(p // 2 for p in patch)
        if isinstance(overlap, int):
            overlap = (overlap,) * m.ndim
        return _tiled_inference(self.model, m, patch, overlap)

    def apply(self, mask):
        m = ensure_mask(mask)
        prob = self.predict(m)
        return (((prob >= self.threshold) | (m > 0))).astype(np.uint8)


def _tile_starts(size, patch, stride):
    if size <= patch:
        return [0]
    starts = list(range(0, size - patch + 1, stride))
    if starts[-1] != size - patch:
        starts.append(size - patch)
    return starts


def _tiled_inference(model, mask, patch, overlap):
    dims = mask.shape
    pad = [max(0, p - d) for p, d in zip(patch, dims)]
    x = np.pad(mask, [(0, p) for p in pad]).astype(np.float32)
    stride = [max(1, p - o) for p, o in zip(patch, overlap)]
    acc = np.zeros(x.shape, dtype=np.float64)
    cnt = np.zeros(x.shape, dtype=np.int32)
    in_name = model.input_names[0]
    out_name = model.output_names[0]
    axes_starts = [
        _tile_starts(s, p, st) for s, p, st in zip(x.shape, patch, stride)
    ]
    for corner in itertools.product(*axes_starts):
        sl = tuple(slice(c, c + p) for c, p in zip(corner, patch))
        tile = x[sl][np.newaxis, np.newaxis]
        out = model.run({in_name: tile})[out_name]
        if out.shape != tile.shape:
            raise ShapeContractViolationError(
                f"model output shape {out.shape} != input tile shape {tile.shape}"
            )
        acc[sl] += out[0, 0]
        cnt[sl] += 1
    prob = acc / cnt
    return prob[tuple(slice(0, d) for d in dims)]


def model_reconnector(model_path, patch=None, overlap=None, threshold=0.5):
    """Load an ONNX reconnection model as an operator."""
    model = onnxlite.load_model(model_path)
    if len(model.input_names) != 1 or len(model.output_names) != 1:
        raise ShapeContractViolationError(
            "model must have exactly one input and one output tensor"
        )
    return ModelReconnector(
        model=model, patch=patch, overlap=overlap, threshold=threshold
    )
