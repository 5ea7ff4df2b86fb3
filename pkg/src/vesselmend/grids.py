"""Binary masks and scalar grids on 2D/3D rasters, and their file formats.

Every image in this package is a plain numpy array:

* binary masks are ``uint8`` arrays with values in {0, 1},
* scalar grids (distance maps, soft probability maps) are ``float64``
  arrays of finite, non-negative values.

2D arrays are indexed ``[y, x]`` and 3D arrays ``[z, y, x]``, so x is
always the fastest-varying axis, both in memory (C order) and on disk.
Coordinates are tuples in the same index order.

On-disk formats
---------------
2D masks
    binary PGM ("P5"), maxval 255, foreground stored as 255.  Any nonzero
    byte decodes to foreground 1.
3D masks
    VMSK: magic ``b"VMSK1\\n"`` (bytes 0-5), then nx, ny, nz as
    little-endian uint32 (bytes 6-17), then nx*ny*nz payload bytes,
    each 0 or 1, x fastest.
scalar grids
    VMSF: identical header with magic ``b"VMSF1\\n"`` and a little-endian
    float32 payload.  A grid saved with nz == 1 decodes back as 2D, which
    is how 2D probability maps are exchanged with the trainer.
    :func:`export_grid_pgm` additionally writes a lossy PGM preview of a
    2D grid with values in [0, 1].

All loaders dispatch on the file's magic bytes, all savers on the array's
dimensionality, so file extensions are purely cosmetic.
"""

import numpy as np

from .errors import (
    MalformedHeaderError,
    ShapeMismatchError,
    TruncatedPayloadError,
)

_VMSK_MAGIC = b"VMSK1\n"
_VMSF_MAGIC = b"VMSF1\n"


def ensure_mask(arr):
    """Validate and return ``arr`` as a {0,1} uint8 mask of dim 2 or 3."""
    a = np.asarray(arr)
    if a.ndim not in (2, 3):
        raise ValueError(f"mask must be 2D or 3D, got ndim={a.ndim}")
    if any(s < 1 for s in a.shape):
        raise ValueError(f"mask extents must be positive, got {a.shape}")
    if a.dtype != np.uint8:
        if not ((a == 0) | (a == 1)).all():
            raise ValueError("mask values must be exactly 0 or 1")
        a = a.astype(np.uint8)
    elif a.size and int(a.max()) > 1:
        raise ValueError("mask values must be exactly 0 or 1")
    return a


def ensure_grid(arr):
    """Validate and return ``arr`` as a finite non-negative float64 grid."""
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim not in (2, 3):
        raise ValueError(f"grid must be 2D or 3D, got ndim={a.ndim}")
    if not np.isfinite(a).all():
        raise ValueError("grid values must be finite")
    if a.size and float(a.min()) < 0:
        raise ValueError("grid values must be non-negative")
    return a


def same_shape(a, b):
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")


# ---------------------------------------------------------------------------
# PGM (2D)


def _read_pgm_tokens(data, count):
    # Whitespace-separated header tokens; '#' starts a comment to end of line.
    tokens = []
    i = 0
    while len(tokens) < count:
        if i >= len(data):
            raise MalformedHeaderError("unexpected end of PGM header")
        c = data[i : i + 1]
        if c.isspace():
            i += 1
        elif c == b"#":
            j = data.find(b"\n", i)
            i = len(data) if j < 0 else j + 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace():
                j += 1
            tokens.append(data[i:j])
            i = j
    return tokens, i


def _load_pgm(data):
    tokens, pos = _read_pgm_tokens(data, 4)
    if tokens[0] != b"P5":
        raise MalformedHeaderError(f"not a binary PGM: magic {tokens[0]!r}")
    try:
        w, h, maxval = (int(t) for t in tokens[1:4])
    except ValueError:
        raise MalformedHeaderError(f"non-numeric PGM dimensions: {tokens[1:4]}")
    if w < 1 or h < 1:
        raise MalformedHeaderError(f"PGM dims must be positive, got {w}x{h}")
    if not 0 < maxval < 256:
        raise MalformedHeaderError(f"PGM maxval out of range: {maxval}")
    payload = data[pos + 1 :]  # single whitespace byte after maxval
    if len(payload) != w * h:
        raise TruncatedPayloadError(
            f"PGM payload has {len(payload)} bytes, expected {w * h}"
        )
    raw = np.frombuffer(payload, dtype=np.uint8).reshape(h, w)
    return (raw > 0).astype(np.uint8)


def _save_pgm(mask, path):
    h, w = mask.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write((mask * np.uint8(255)).tobytes())


# ---------------------------------------------------------------------------
# VMSK / VMSF (3D containers)


def _read_vm_header(data, magic, kind):
    if len(data) < 18:
        raise MalformedHeaderError(f"{kind} file shorter than its header")
    if data[:6] != magic:
        raise MalformedHeaderError(f"bad {kind} magic: {data[:6]!r}")
    nx, ny, nz = np.frombuffer(data[6:18], dtype="<u4")
    if nx < 1 or ny < 1 or nz < 1:
        raise MalformedHeaderError(f"{kind} dims must be positive, got {(nx, ny, nz)}")
    return int(nx), int(ny), int(nz)


def _load_vmsk(data):
    nx, ny, nz = _read_vm_header(data, _VMSK_MAGIC, "VMSK")
    payload = data[18:]
    if len(payload) != nx * ny * nz:
        raise TruncatedPayloadError(
            f"VMSK payload has {len(payload)} bytes, expected {nx * ny * nz}"
        )
    raw = np.frombuffer(payload, dtype=np.uint8).reshape(nz, ny, nx)
    return (raw > 0).astype(np.uint8)


def _save_vmsk(mask, path):
    nz, ny, nx = mask.shape
    with open(path, "wb") as f:
        f.write(_VMSK_MAGIC)
        f.write(np.asarray([nx, ny, nz], dtype="<u4").tobytes())
        f.write(np.ascontiguousarray(mask, dtype=np.uint8).tobytes())


def _load_vmsf(data):
    nx, ny, nz = _read_vm_header(data, _VMSF_MAGIC, "VMSF")
    payload = data[18:]
    if len(payload) != 4 * nx * ny * nz:
        raise TruncatedPayloadError(
            f"VMSF payload has {len(payload)} bytes, expected {4 * nx * ny * nz}"
        )
    raw = np.frombuffer(payload, dtype="<f4").reshape(nz, ny, nx)
    grid = raw.astype(np.float64)
    return grid[0] if nz == 1 else grid


def _save_vmsf(grid, path):
    vol = grid[np.newaxis] if grid.ndim == 2 else grid
    nz, ny, nx = vol.shape
    with open(path, "wb") as f:
        f.write(_VMSF_MAGIC)
        f.write(np.asarray([nx, ny, nz], dtype="<u4").tobytes())
        f.write(np.ascontiguousarray(vol, dtype="<f4").tobytes())


# ---------------------------------------------------------------------------
# public API


def load_mask(path):
    """Load a binary mask from a PGM (2D) or VMSK (3D) file."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:6] == _VMSK_MAGIC:
        return _load_vmsk(data)
    if data[:2] == b"P5":
        return _load_pgm(data)
    raise MalformedHeaderError(f"unrecognized mask file magic: {data[:6]!r}")


def save_mask(mask, path):
    """Save a binary mask, PGM for 2D and VMSK for 3D. Round-trips bit-exactly."""
    m = ensure_mask(mask)
    if m.ndim == 2:
        _save_pgm(m, path)
    else:
        _save_vmsk(m, path)


def load_grid(path):
    """Load a scalar grid from a VMSF file (or a PGM, rescaled to [0, 1])."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:6] == _VMSF_MAGIC:
        return ensure_grid(_load_vmsf(data))
    if data[:2] == b"P5":
        tokens, pos = _read_pgm_tokens(data, 4)
        grid = _load_pgm_gray(data, tokens, pos)
        return ensure_grid(grid)
    raise MalformedHeaderError(f"unrecognized grid file magic: {data[:6]!r}")


def _load_pgm_gray(data, tokens, pos):
    if tokens[0] != b"P5":
        raise MalformedHeaderError(f"not a binary PGM: magic {tokens[0]!r}")
    w, h, maxval = (int(t) for t in tokens[1:4])
    payload = data[pos + 1 :]
    if len(payload) != w * h:
        raise TruncatedPayloadError(
            f"PGM payload has {len(payload)} bytes, expected {w * h}"
        )
    raw = np.frombuffer(payload, dtype=np.uint8).reshape(h, w)
    return raw.astype(np.float64) / float(maxval)


def save_grid(grid, path):
    """Save a scalar grid as VMSF (exact float32 exchange format)."""
    _save_vmsf(ensure_grid(grid), path)


def export_grid_pgm(grid, path):
    """Write a lossy PGM preview of a 2D grid with values in [0, 1]."""
    g = ensure_grid(grid)
    if g.ndim != 2:
        raise ValueError("PGM preview only supports 2D grids")
    scaled = np.rint(np.clip(g, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w = scaled.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(scaled.tobytes())


def voxel_diff_count(a, b):
    """Number of voxels where two masks disagree (Hamming distance).

    For binary masks this equals the squared l2 norm of their difference,
    which is what the iteration driver uses as its convergence measure.
    """
    ma, mb = ensure_mask(a), ensure_mask(b)
    same_shape(ma, mb)
    return int(np.count_nonzero(ma != mb))
