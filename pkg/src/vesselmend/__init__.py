"""Toolkit for breaking, measuring and restoring vascular connectivity.

Binary vascular segmentations come out of most pipelines fragmented.
This package generates realistic synthetic disconnections from connected
masks, measures connectivity-aware segmentation quality, and repairs
masks by iterating a pluggable reconnection operator to a fixed point.
"""

from .disconnect import (
    DisconnectedSample,
    DisconnectionSpec,
    add_artifacts,
    generate_pair,
    make_disconnections,
    sample_radius,
)
from .grids import (
    ensure_grid,
    ensure_mask,
    export_grid_pgm,
    load_grid,
    load_mask,
    save_grid,
    save_mask,
    voxel_diff_count,
)
from .metrics import MetricsReport, assd, auc, beta0_error, dice, report
from .morphology import (
    CenterlineMap,
    LabelMap,
    beta0,
    centerline_radii,
    connected_components,
    distance_transform,
    endpoints,
    rasterize_ball,
    skeletonize,
)
from .reconnect import (
    BridgeReconnector,
    IdentityReconnector,
    IterationTrace,
    Reconnector,
    bridge_endpoints,
    iterate,
    model_reconnector,
)
from .synthtree import TreeParams, generate_tree

__version__ = "0.1.0"

__all__ = [
    "BridgeReconnector",
    "CenterlineMap",
    "DisconnectedSample",
    "DisconnectionSpec",
    "IdentityReconnector",
    "IterationTrace",
    "LabelMap",
    "MetricsReport",
    "Reconnector",
    "TreeParams",
    "add_artifacts",
    "assd",
    "auc",
    "beta0",
    "beta0_error",
    "bridge_endpoints",
    "centerline_radii",
    "connected_components",
    "dice",
    "distance_transform",
    "endpoints",
    "ensure_grid",
    "ensure_mask",
    "export_grid_pgm",
    "generate_pair",
    "generate_tree",
    "iterate",
    "load_grid",
    "load_mask",
    "make_disconnections",
    "model_reconnector",
    "rasterize_ball",
    "report",
    "sample_radius",
    "save_grid",
    "save_mask",
    "skeletonize",
    "voxel_diff_count",
]
