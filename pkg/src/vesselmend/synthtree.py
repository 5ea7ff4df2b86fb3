"""Connected synthetic 2D vascular trees.

Recursive stochastic bifurcation: each branch is a sinusoidally perturbed
segment rasterized by stamping disks of the local radius along the
centerline at sub-pixel steps, which makes every branch (and therefore
the whole tree) connected by construction.  Child radii follow a
Murray-style decay r_child = r_parent * 2**(-1/gamma), floored at 1 px.

Only 2D generation is provided; suitable 3D synthetic networks are out
of reach of this kind of simple recursive generator.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import CanvasTooSmallError

# per-level shrink of the sampled branch length, keeps deep trees on canvas
_LENGTH_DECAY = 0.85


@dataclass(frozen=True)
class TreeParams:
    dims: tuple = (256, 256)
    root_radius: float = 5.0
    depth: int = 6
    branch_length: tuple = (28.0, 44.0)
    branch_angle: tuple = (18.0, 42.0)  # degrees, per child, away from parent
    radius_decay: float = 3.0  # Murray exponent gamma
    tortuosity: float = 2.0  # perpendicular sine amplitude, px
    seed: int = 0

    def __post_init__(self):
        if len(self.dims) != 2 or any(d < 1 for d in self.dims):
            raise ValueError(f"dims must be two positive extents, got {self.dims}")
        if self.root_radius < 1:
            raise ValueError("root_radius must be >= 1")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if not 0 < self.branch_length[0] <= self.branch_length[1]:
            raise ValueError(f"bad branch_length range {self.branch_length}")
        if self.radius_decay <= 0:
            raise ValueError("radius_decay must be > 0")


def child_radius(parent_radius, gamma):
    """Murray-style radius decay, floored at one pixel."""
    return max(1.0, parent_radius * 2.0 ** (-1.0 / gamma))


_DISK_CACHE = {}


def _disk_offsets(radius):
    r = round(float(radius), 3)
    offs = _DISK_CACHE.get(r)
    if offs is None:
        n = int(math.ceil(r))
        dy, dx = np.mgrid[-n : n + 1, -n : n + 1]
        keep = dy * dy + dx * dx <= r * r + 1e-12
        offs = np.stack([dy[keep], dx[keep]], axis=-1)
        _DISK_CACHE[r] = offs
    return offs


def _stamp(canvas, points, radius):
    h, w = canvas.shape
    offs = _disk_offsets(radius)
    centers = np.rint(points).astype(np.int64)
    coords = (centers[:, None, :] + offs[None, :, :]).reshape(-1, 2)
    keep = (
        (coords[:, 0] >= 0)
        & (coords[:, 0] < h)
        & (coords[:, 1] >= 0)
        & (coords[:, 1] < w)
    )
    coords = coords[keep]
    canvas[coords[:, 0], coords[:, 1]] = 1


def _grow(canvas, rng, params, pos, direction, radius, depth_left, scale):
    length = rng.uniform(*params.branch_length) * scale
    wavelength = rng.uniform(0.8, 1.6) * max(length, 1.0)
    phase = rng.uniform(0.0, 2.0 * math.pi)

    n = max(2, int(math.ceil(length / 0.5)) + 1)
    t = np.linspace(0.0, length, n)
    perp = np.array([-direction[1], direction[0]])
    # zero perturbation at t = 0 so the branch starts exactly at pos
    wobble = params.tortuosity * (
        np.sin(2.0 * math.pi * t / wavelength + phase) - math.sin(phase)
    )
    points = pos[None, :] + t[:, None] * direction[None, :] + wobble[:, None] * perp[None, :]
    _stamp(canvas, points, radius)

    end = points[-1]
    if depth_left > 1:
        r_child = child_radius(radius, params.radius_decay)
        for sign in (-1.0, 1.0):
            ang = math.radians(rng.uniform(*params.branch_angle)) * sign
            ca, sa = math.cos(ang), math.sin(ang)
            child_dir = np.array(
                [
                    ca * direction[0] - sa * direction[1],
                    sa * direction[0] + ca * direction[1],
                ]
            )
            _grow(canvas, rng, params, end, child_dir, r_child, depth_left - 1,
                  scale * _LENGTH_DECAY)


def generate_tree(params):
    """Generate one connected tree mask; deterministic for a fixed seed."""
    margin = int(math.ceil(params.root_radius)) + 1
    h, w = params.dims
    if h <= 2 * margin or w <= 2 * margin:
        raise CanvasTooSmallError(
            f"root radius {params.root_radius} does not fit canvas {params.dims}"
        )
    rng = np.random.default_rng(params.seed)
    canvas = np.zeros(params.dims, dtype=np.uint8)
    root = np.array([float(h - 1 - margin), float(w // 2)])
    tilt = math.radians(rng.uniform(-10.0, 10.0))
    direction = np.array([-math.cos(tilt), math.sin(tilt)])  # roughly upward
    _grow(canvas, rng, params, root, direction, float(params.root_radius),
          params.depth, 1.0)
    return canvas
