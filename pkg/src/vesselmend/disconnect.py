"""Stochastic, radius-aware disconnection and artifact generation.

Produces (connected, disconnected) mask pairs for training and evaluating
reconnection operators.  Disconnections preferentially hit thin vessels:
the target radius class i is drawn from P(i) = 2**(p-i) / (2**p - 1) over
i in [1, p] where p is the rounded maximum centerline radius, then a
random centerline voxel of that radius class is damaged inside a disk
whose size scales like 1/(i+1), so the thinner the vessel the longer the
disconnection.

All randomness flows through a single PCG64 stream per pair, consumed in
a fixed documented order, so pairs are exactly reproducible from
(mask, spec).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyMaskError,
    ExhaustedRetriesError,
    InvalidMaxRadiusError,
    NoBackgroundError,
)
from .grids import ensure_mask, same_shape
from .morphology import centerline_radii, rasterize_ball


@dataclass(frozen=True)
class DisconnectionSpec:
    """Parameters of pair generation.

    size_mean / size_std are the Gaussian law of the raw disconnection
    size; the realized disk radius for a vessel of radius class i is
    max(1, size / (i + 1)).
    """

    size_mean: float = 8.0
    size_std: float = 4.0
    n_disconnections: int = 15
    n_artifacts: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.size_mean <= 0:
            raise ValueError("size_mean must be > 0")
        if self.size_std < 0:
            raise ValueError("size_std must be >= 0")
        if self.n_disconnections < 0 or self.n_artifacts < 0:
            raise ValueError("counts must be >= 0")


@dataclass(frozen=True)
class DisconnectedSample:
    connected: np.ndarray
    disconnected: np.ndarray
    removed: list = field(default_factory=list)
    added: list = field(default_factory=list)


def radius_probabilities(p):
    """The sampling law P(i) = 2**(p-i) / (2**p - 1) for i in [1, p]."""
    if p < 1:
        raise InvalidMaxRadiusError(f"max radius must be >= 1, got {p}")
    i = np.arange(1, p + 1, dtype=np.float64)
    return 2.0 ** (p - i) / (2.0**p - 1.0)


_CDF_CACHE = {}


def sample_radius(p, rng):
    """Draw a radius class i in [1, p]; thin classes are most likely.

    Consumes exactly one uniform variate per call.
    """
    if p < 1:
        raise InvalidMaxRadiusError(f"max radius must be >= 1, got {p}")
    cdf = _CDF_CACHE.get(p)
    if cdf is None:
        cdf = np.cumsum(radius_probabilities(p))
        cdf[-1] = 1.0  # guard against float round-off at the tail
        _CDF_CACHE[p] = cdf
    u = rng.random()
    return int(np.searchsorted(cdf, u, side="right")) + 1


def _round_half_up(x):
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5).astype(np.int64)


def _clipped_count(rng, n_available):
    # n ~ Normal(N/2, N/4) clamped to [0, N]; one normal variate always drawn
    raw = rng.normal(n_available / 2.0, n_available / 4.0)
    return int(np.clip(np.rint(raw), 0, n_available))


def make_disconnections(mask, spec, rng):
    """Remove vessel fragments per the radius-aware law.

    Per disconnection the stream is consumed in this order: radius class
    draws (one uniform each, repeated while the class has no centerline
    voxel), centerline voxel index, raw size normal, removal count
    normal, removal subset choice.

    Returns the damaged mask and the list of removed coordinates.
    """
    m = ensure_mask(mask)
    if not m.any():
        raise EmptyMaskError("mask has no foreground voxel")
    if m.all():
        raise NoBackgroundError("mask has no background voxel")
    out = m.copy()
    removed = []
    if spec.n_disconnections == 0:
        return out, removed

    cl = centerline_radii(m)
    skel_coords = np.argwhere(cl.skeleton > 0)
    skel_radii = _round_half_up(cl.radii[cl.skeleton > 0])
    p = int(skel_radii.max())
    by_class = {
        int(i): skel_coords[skel_radii == i] for i in np.unique(skel_radii)
    }

    budget = 100 * spec.n_disconnections
    for _ in range(spec.n_disconnections):
        while True:
            i = sample_radius(p, rng)
            candidates = by_class.get(i)
            if candidates is not None:
                break
            budget -= 1
            if budget <= 0:
                raise ExhaustedRetriesError(
                    f"no centerline voxel matches any sampled radius "
                    f"(p={p}, classes={sorted(by_class)})"
                )
        x = candidates[int(rng.integers(len(candidates)))]
        size = rng.normal(spec.size_mean, spec.size_std)
        d = max(1.0, size / (i + 1.0))
        ball = rasterize_ball(tuple(x), d, m.shape)
        inside = out[tuple(ball.T)] > 0
        disk = ball[inside]
        n = _clipped_count(rng, len(disk))
        if n > 0:
            pick = rng.choice(len(disk), size=n, replace=False)
            chosen = disk[pick]
            out[tuple(chosen.T)] = 0
            removed.extend(tuple(int(v) for v in c) for c in chosen)
    return out, removed


def add_artifacts(mask, original, spec, rng):
    """Inject small foreground clusters into the *original* background.

    Per artifact the stream order is: center index, radius normal,
    addition count normal, addition subset choice.  Artifact voxels never
    overlap the original foreground (and therefore never refill removed
    voxels).
    """
    m = ensure_mask(mask)
    orig = ensure_mask(original)
    same_shape(m, orig)
    out = m.copy()
    added = []
    if spec.n_artifacts == 0:
        return out, added

    background = np.argwhere(orig == 0)
    if len(background) == 0:
        raise NoBackgroundError("original mask has no background voxel")

    seen = set()
    for _ in range(spec.n_artifacts):
        c = background[int(rng.integers(len(background)))]
        r = max(0.5, rng.normal(3.0, 1.0))
        ball = rasterize_ball(tuple(c), r, m.shape)
        outside = orig[tuple(ball.T)] == 0
        disk = ball[outside]
        n = _clipped_count(rng, len(disk))
        if n > 0:
            pick = rng.choice(len(disk), size=n, replace=False)
            for coord in disk[pick]:
                t = tuple(int(v) for v in coord)
                out[t] = 1
                if t not in seen:
                    seen.add(t)
                    added.append(t)
    return out, added


def generate_pair(mask, spec):
    """Full Appendix-style pair: disconnections then artifacts, one stream.

    Deterministic per (mask, spec): the PCG64 stream is seeded with
    spec.seed and consumed by :func:`make_disconnections` first,
    :func:`add_artifacts` second.
    """
    m = ensure_mask(mask)
    rng = np.random.default_rng(spec.seed)
    damaged, removed = make_disconnections(m, spec, rng)
    out, added = add_artifacts(damaged, m, spec, rng)
    return DisconnectedSample(
        connected=m.copy(), disconnected=out, removed=removed, added=added
    )
