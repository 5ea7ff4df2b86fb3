"""Core raster geometry on binary masks.

Exact Euclidean distance transform, topology-preserving thinning,
connected-component labeling, skeleton endpoint detection and disk/ball
rasterization.  Foreground connectivity is *full* (8-connected in 2D,
26-connected in 3D); background implicitly uses the complementary face
connectivity.

Thinning is Guo-Hall two-subiteration thinning in 2D (implemented here,
vectorized) and Lee-Kashyap-Chu thinning in 3D (scikit-image); either is
iterated until a full pass deletes nothing, so ``skeletonize`` is a fixed
point of itself by construction.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi
from skimage.morphology import skeletonize as _sk_skeletonize

from .errors import AllForegroundError
from .grids import ensure_mask


@dataclass(frozen=True)
class CenterlineMap:
    """Thinned skeleton plus the local vessel radius at each skeleton voxel.

    ``radii`` holds the distance-map value (distance to the nearest
    background voxel) on skeleton voxels and 0 elsewhere.
    """

    skeleton: np.ndarray
    radii: np.ndarray


@dataclass(frozen=True)
class LabelMap:
    """Connected component labels, 0 = background, labels 1..count.

    Labels are assigned in raster-scan order of each component's first
    voxel, so labeling is deterministic.
    """

    labels: np.ndarray
    count: int


def distance_transform(mask):
    """Exact Euclidean distance to the nearest background voxel.

    Zero on background.  Raises :class:`AllForegroundError` when no
    background voxel exists (all distances would be infinite).
    """
    m = ensure_mask(mask)
    if m.all():
        raise AllForegroundError("mask has no background voxel")
    return ndi.distance_transform_edt(m).astype(np.float64, copy=False)


# ---------------------------------------------------------------------------
# thinning


def _guo_hall_subiteration(img, phase):
    """One Guo-Hall subiteration; deletes in place, returns True if changed."""
    p = np.pad(img, 1).astype(bool)
    # neighborhood of the center pixel, P2 = north then clockwise
    p2 = p[:-2, 1:-1]
    p3 = p[:-2, 2:]
    p4 = p[1:-1, 2:]
    p5 = p[2:, 2:]
    p6 = p[2:, 1:-1]
    p7 = p[2:, :-2]
    p8 = p[1:-1, :-2]
    p9 = p[:-2, :-2]

    c = (
        (~p2 & (p3 | p4)).astype(np.uint8)
        + (~p4 & (p5 | p6))
        + (~p6 & (p7 | p8))
        + (~p8 & (p9 | p2))
    )
    n1 = (p9 | p2).astype(np.uint8) + (p3 | p4) + (p5 | p6) + (p7 | p8)
    n2 = (p2 | p3).astype(np.uint8) + (p4 | p5) + (p6 | p7) + (p8 | p9)
    n = np.minimum(n1, n2)
    if phase == 0:
        m = (p6 | p7 | ~p9) & p8
    else:
        m = (p2 | p3 | ~p5) & p4

    delete = (img > 0) & (c == 1) & (n >= 2) & (n <= 3) & ~m
    if not delete.any():
        return False
    img[delete] = 0
    return True


def _thin_2d(mask):
    img = mask.copy()
    changed = True
    while changed:
        changed = _guo_hall_subiteration(img, 0)
        changed = _guo_hall_subiteration(img, 1) or changed
    return img


def _thin_3d(mask):
    cur = mask.astype(bool)
    while True:
        nxt = _sk_skeletonize(cur, method="lee").astype(bool)
        if (nxt == cur).all():
            return cur.astype(np.uint8)
        cur = nxt


def skeletonize(mask):
    """Topology-preserving thinning to a 1-voxel-wide centerline.

    The result is a subset of the input foreground with the same number
    of connected components, and is idempotent: re-thinning the skeleton
    changes nothing.
    """
    m = ensure_mask(mask)
    if not m.any():
        return m.copy()
    if m.ndim == 2:
        return _thin_2d(m)
    return _thin_3d(m)


def centerline_radii(mask):
    """Skeleton annotated with the local vessel radius (distance map value)."""
    m = ensure_mask(mask)
    skel = skeletonize(m)
    if not m.any():
        return CenterlineMap(skel, np.zeros(m.shape, dtype=np.float64))
    dt = distance_transform(m)
    radii = np.where(skel > 0, dt, 0.0)
    return CenterlineMap(skel, radii)


# ---------------------------------------------------------------------------
# components & endpoints


def _structure(ndim, connectivity):
    if connectivity == "face":
        return ndi.generate_binary_structure(ndim, 1)
    if connectivity == "full":
        return ndi.generate_binary_structure(ndim, ndim)
    raise ValueError(f"connectivity must be 'face' or 'full', got {connectivity!r}")


def connected_components(mask, connectivity="full"):
    """Label connected components; labels follow raster-scan first encounter."""
    m = ensure_mask(mask)
    raw, count = ndi.label(m, structure=_structure(m.ndim, connectivity))
    if count == 0:
        return LabelMap(raw.astype(np.int32), 0)
    # scipy's labels already tend to follow raster order, but pin it explicitly
    flat = raw.ravel()
    first = np.full(count + 1, flat.size, dtype=np.int64)
    nz = np.flatnonzero(flat)
    # reversed so earlier indices overwrite later ones
    first[flat[nz[::-1]]] = nz[::-1]
    order = np.argsort(first[1:], kind="stable")
    remap = np.zeros(count + 1, dtype=np.int32)
    remap[1 + order] = np.arange(1, count + 1, dtype=np.int32)
    return LabelMap(remap[raw], count)


def beta0(mask, connectivity="full"):
    """Number of connected components."""
    return connected_components(mask, connectivity).count


_NEIGHBOR_KERNELS = {}


def _neighbor_counts(mask):
    # full-connectivity neighbor count, cached kernel per ndim
    kern = _NEIGHBOR_KERNELS.get(mask.ndim)
    if kern is None:
        kern = np.ones((3,) * mask.ndim, dtype=np.uint8)
        kern[(1,) * mask.ndim] = 0
        _NEIGHBOR_KERNELS[mask.ndim] = kern
    return ndi.convolve(mask.astype(np.uint8), kern, mode="constant", cval=0)


def endpoints(skeleton):
    """Skeleton voxels with at most one full-connectivity neighbor.

    Returned as coordinate tuples in raster order.  Isolated voxels count
    as endpoints (zero neighbors).
    """
    s = ensure_mask(skeleton)
    counts = _neighbor_counts(s)
    pts = np.argwhere((s > 0) & (counts <= 1))
    return [tuple(int(v) for v in p) for p in pts]


def rasterize_ball(center, radius, dims):
    """In-bounds voxels within Euclidean distance ``radius`` of ``center``.

    Returns an (n, ndim) int array in raster order; always contains the
    center, and is clipped at the grid borders.
    """
    if len(center) != len(dims):
        raise ValueError("center and dims dimensionality differ")
    if any(not 0 <= c < d for c, d in zip(center, dims)):
        raise ValueError(f"center {tuple(center)} out of bounds for dims {tuple(dims)}")
    r = float(max(radius, 0.0))
    lo = [max(0, int(np.ceil(c - r))) for c in center]
    hi = [min(d - 1, int(np.floor(c + r))) for c, d in zip(center, dims)]
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    grids = np.meshgrid(*axes, indexing="ij")
    sq = sum((g - c) ** 2 for g, c in zip(grids, center))
    keep = sq <= r * r + 1e-12
    coords = np.stack([g[keep] for g in grids], axis=-1)
    return coords.astype(np.int64)
