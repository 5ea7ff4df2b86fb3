"""Shared fixtures and independent brute-force oracles.

The oracles here deliberately avoid the library's own code paths (no
scipy EDT, no scipy labeling): exhaustive pairwise scans and stack-based
flood fill only, so they stay valid as cross-checks.
"""

import numpy as np
import pytest


def random_mask(seed, shape, density=None):
    rng = np.random.default_rng(seed)
    if density is None:
        density = rng.uniform(0.15, 0.85)
    m = (rng.random(shape) < density).astype(np.uint8)
    # force both classes so EDT/ASSD stay defined
    m.flat[0] = 0
    m.flat[-1] = 1
    return m


def brute_force_edt(mask):
    """Exhaustive nearest-background scan at every voxel."""
    m = np.asarray(mask)
    out = np.zeros(m.shape, dtype=np.float64)
    bg = np.argwhere(m == 0).astype(np.float64)
    fg = np.argwhere(m > 0)
    if len(fg) == 0:
        return out
    fgf = fg.astype(np.float64)
    d2 = ((fgf[:, None, :] - bg[None, :, :]) ** 2).sum(axis=-1)
    out[tuple(fg.T)] = np.sqrt(d2.min(axis=1))
    return out


_OFFSETS = {}


def _neighbor_offsets(ndim, connectivity):
    key = (ndim, connectivity)
    if key not in _OFFSETS:
        import itertools

        offs = []
        for off in itertools.product((-1, 0, 1), repeat=ndim):
            if all(o == 0 for o in off):
                continue
            if connectivity == "face" and sum(abs(o) for o in off) != 1:
                continue
            offs.append(off)
        _OFFSETS[key] = offs
    return _OFFSETS[key]


def flood_fill_count(mask, connectivity="full"):
    """Stack-based component count, independent of scipy labeling."""
    m = np.asarray(mask)
    offs = _neighbor_offsets(m.ndim, connectivity)
    seen = np.zeros(m.shape, dtype=bool)
    count = 0
    for start in map(tuple, np.argwhere(m > 0)):
        if seen[start]:
            continue
        count += 1
        stack = [start]
        seen[start] = True
        while stack:
            v = stack.pop()
            for off in offs:
                w = tuple(a + o for a, o in zip(v, off))
                if any(not 0 <= c < s for c, s in zip(w, m.shape)):
                    continue
                if m[w] and not seen[w]:
                    seen[w] = True
                    stack.append(w)
    return count


def boundary_voxels(mask):
    """Foreground voxels with a face-adjacent background or grid-border side."""
    m = np.asarray(mask)
    offs = _neighbor_offsets(m.ndim, "face")
    out = []
    for v in map(tuple, np.argwhere(m > 0)):
        for off in offs:
            w = tuple(a + o for a, o in zip(v, off))
            if any(not 0 <= c < s for c, s in zip(w, m.shape)) or not m[w]:
                out.append(v)
                break
    return np.asarray(out, dtype=np.float64).reshape(-1, m.ndim)


def brute_force_assd(seg, ref):
    """Pairwise-distance ASSD between explicit boundary point sets."""
    bs = boundary_voxels(seg)
    br = boundary_voxels(ref)
    d = np.sqrt(((bs[:, None, :] - br[None, :, :]) ** 2).sum(axis=-1))
    return (d.min(axis=1).sum() + d.min(axis=0).sum()) / (len(bs) + len(br))


def brute_force_auc(prob, ref):
    """All (foreground, background) pair comparisons, ties count half."""
    p = np.asarray(prob, dtype=np.float64).ravel()
    y = np.asarray(ref).ravel() > 0
    pos, neg = p[y], p[~y]
    cmp = (pos[:, None] > neg[None, :]).astype(np.float64)
    cmp += 0.5 * (pos[:, None] == neg[None, :])
    return float(cmp.mean())


def brute_force_ball(center, radius, dims):
    coords = []
    for v in np.ndindex(*dims):
        if sum((a - b) ** 2 for a, b in zip(v, center)) <= radius * radius + 1e-12:
            coords.append(v)
    return set(coords)


@pytest.fixture(scope="session")
def small_tree():
    from vesselmend.synthtree import TreeParams, generate_tree

    return generate_tree(TreeParams(dims=(128, 128), root_radius=4.0, depth=5,
                                    branch_length=(18.0, 30.0), seed=7))
