"""Damage a connected tree with radius-aware disconnections + artifacts.

Disconnection sites are drawn from P(i) = 2^(p-i)/(2^p-1) over the
centerline radius classes, so thin vessels break more often and with
longer gaps (the realized disk radius scales like 1/(i+1)).  Artifacts
are small clusters injected into the background.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from vesselmend import DisconnectionSpec, TreeParams, beta0, generate_pair, generate_tree

out = Path("demo_out")
out.mkdir(exist_ok=True)

tree = generate_tree(TreeParams(seed=1))
spec = DisconnectionSpec(size_mean=8, size_std=4, n_disconnections=15,
                         n_artifacts=5, seed=42)
sample = generate_pair(tree, spec)

print(f"connected beta0    = {beta0(sample.connected)}")
print(f"disconnected beta0 = {beta0(sample.disconnected)}")
print(f"removed {len(sample.removed)} voxels, added {len(sample.added)}")

# paint removals red and additions blue on top of the damaged mask
rgb = np.stack([1 - sample.disconnected * 0.85] * 3, axis=-1)
for y, x in sample.removed:
    rgb[y, x] = (1.0, 0.45, 0.45)
for y, x in sample.added:
    rgb[y, x] = (0.25, 0.35, 1.0)

fig, axes = plt.subplots(1, 2, figsize=(10, 5))
axes[0].imshow(sample.connected, cmap="gray_r")
axes[0].set_title("connected")
axes[1].imshow(rgb)
axes[1].set_title("disconnected (removed=red, artifacts=blue)")
for ax in axes:
    ax.axis("off")
fig.tight_layout()
fig.savefig(out / "disconnections.png", dpi=120)
print(f"wrote {out}/disconnections.png")
