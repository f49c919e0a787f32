"""Tensor operations walkthrough: the three products and patch extraction.

Everything downstream is built from four small pieces: a full contraction
(frobenius), a batched contraction (square_product), an outer product
(bias_product), and zero-padded moving-window patch extraction.  This script
shows each one on inputs small enough to verify by eye, then reassembles a
shallow convolution from them and checks it against a naive loop.
"""

import numpy as np

import stableconv as sc

rng = np.random.default_rng(0)

# --- the three products -----------------------------------------------------
a = sc.Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]), ("row", "col"))
v = sc.Tensor(np.array([5.0, 6.0]), ("col",))

print("frobenius([1,2,3],[4,5,6]) =", sc.frobenius(
    sc.Tensor(np.array([1.0, 2.0, 3.0]), ("i",)),
    sc.Tensor(np.array([4.0, 5.0, 6.0]), ("i",)),
))
print("square_product([[1,2],[3,4]], [5,6]) =", sc.square_product(a, v).data)
print("bias_product([1,2], [3]) =", sc.bias_product(
    sc.Tensor(np.array([1.0, 2.0]), ("c",)),
    sc.Tensor(np.array([3.0]), ("e",)),
).data)

# --- patch extraction with zero padding --------------------------------------
x = sc.Tensor(np.array([[1.0, 2.0, 3.0]]), ("channel", "spatial"))
cfg = sc.ConvLayerConfig(spatial_in=3, filter_shape=3, stride=1, padding=1)
patches = sc.extract_patches(x, sc.patch_map_for(cfg))
print("\npatches of [1,2,3] with a width-3 window and one-slot padding:")
for p in range(3):
    print(f"  position {p}: {patches.data[0, :, p]}")

# --- a shallow convolution assembled from the pieces --------------------------
spatial = (6,)
x = sc.Tensor(rng.standard_normal((2, *spatial)), ("channel", "spatial"))
cfg = sc.ConvLayerConfig(spatial_in=spatial, filter_shape=3, stride=1, padding=1)
w = rng.standard_normal((1, 2, 3))
b = rng.standard_normal(1)

patches = sc.extract_patches(x, sc.patch_map_for(cfg)).data  # (C, G, P)
via_ops = np.array([
    sc.frobenius(
        sc.Tensor(w[0], ("channel", "filter")),
        sc.Tensor(patches[:, :, p], ("channel", "filter")),
    )
    + b[0]
    for p in range(cfg.n_positions_out)
])

naive = np.zeros(cfg.n_positions_out)
for p in range(cfg.n_positions_out):
    acc = b[0]
    for ci in range(2):
        for g in range(3):
            i = p - 1 + g
            if 0 <= i < spatial[0]:
                acc += w[0, ci, g] * x.data[ci, i]
    naive[p] = acc

print("\nconvolution via operators:", np.round(via_ops, 6))
print("convolution via naive loop:", np.round(naive, 6))
print("max |difference|:", np.abs(via_ops - naive).max())
