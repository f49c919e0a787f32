"""Dense tensors with named axis roles, plus the contraction, outer-product
and patch-extraction operations used by the convolutional stack.

Axis roles tell the channel, spatial, filter-offset, output-position and
input-index axes apart.  Everything in this package flattens arrays in
row-major (C) order over the declared axes; in particular a field over output
positions and inputs embeds into flat coordinates position-major,
input-minor.  All modules share that single convention.

Patch extraction is precomputed: a :class:`PatchMap` turns a layer
configuration into an index table from (output position, filter offset) to a
flat input position, with out-of-bounds slots marked.  Extraction itself is a
gather; out-of-bounds slots read as zero (zero padding).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import prod

import numpy as np

OUT_OF_BOUNDS = -1

ROLE_CHANNEL = "channel"
ROLE_SPATIAL = "spatial"
ROLE_FILTER = "filter"
ROLE_POSITION = "position"
ROLE_INPUT = "input"


@dataclass(frozen=True)
class Tensor:
    """A dense real tensor carrying one named role per axis."""

    data: np.ndarray
    roles: tuple[str, ...]

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        roles = tuple(self.roles)
        if arr.ndim != len(roles):
            raise ValueError(
                f"got {len(roles)} roles for a {arr.ndim}-axis tensor"
            )
        if any(e < 1 for e in arr.shape):
            raise ValueError("all extents must be >= 1")
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "roles", roles)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def axes(self) -> tuple[tuple[str, int], ...]:
        """(role, extent) pairs in declaration order."""
        return tuple(zip(self.roles, self.data.shape))

    @property
    def flat(self) -> np.ndarray:
        """Row-major flat view of the entries."""
        return self.data.reshape(-1)


def input_tensor(data) -> Tensor:
    """Wrap an input array of shape (channels, *spatial, inputs)."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim < 3:
        raise ValueError("inputs need at least (channel, spatial, input) axes")
    roles = (ROLE_CHANNEL,) + (ROLE_SPATIAL,) * (arr.ndim - 2) + (ROLE_INPUT,)
    return Tensor(arr, roles)


def frobenius(a: Tensor, b: Tensor) -> float:
    """Entrywise product summed over all axes of two same-shape tensors."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sum(a.data * b.data))


def square_product(a: Tensor, b: Tensor, contracted_axes=None) -> Tensor:
    """Batched contraction: free axes of ``a`` index independent full
    contractions against ``b``.

    ``contracted_axes`` names the axes of ``a`` (by position) that must match
    ``b``'s shape exactly, in order; it defaults to the trailing axes.  With a
    single free axis and a single contracted axis this is the ordinary
    matrix-vector product.
    """
    nb = b.data.ndim
    if contracted_axes is None:
        contracted_axes = tuple(range(a.data.ndim - nb, a.data.ndim))
    contracted_axes = tuple(int(i) for i in contracted_axes)
    if (
        len(contracted_axes) != nb
        or any(i < 0 or i >= a.data.ndim for i in contracted_axes)
        or tuple(a.shape[i] for i in contracted_axes) != b.shape
    ):
        raise ValueError(
            "contracted axes of the left tensor must match the right tensor's shape"
        )
    keep = set(contracted_axes)
    free_axes = tuple(i for i in range(a.data.ndim) if i not in keep)
    free_shape = tuple(a.shape[i] for i in free_axes)
    # row-major reduction over the flattened contracted axes, kept deterministic
    moved = np.transpose(a.data, free_axes + contracted_axes)
    prods = moved.reshape(-1, b.data.size) * b.flat
    out = prods.sum(axis=1).reshape(free_shape)
    roles = tuple(a.roles[i] for i in free_axes)
    return Tensor(out, roles)


def bias_product(a: Tensor, b: Tensor) -> Tensor:
    """Outer product: entry at (d, e) is ``a_d * b_e``."""
    return Tensor(np.multiply.outer(a.data, b.data), a.roles + b.roles)


def _as_axis_tuple(value, ndim: int, name: str) -> tuple[int, ...]:
    if np.isscalar(value):
        return (int(value),) * ndim
    t = tuple(int(v) for v in value)
    if len(t) != ndim:
        raise ValueError(f"{name} must have one entry per spatial axis")
    return t


@dataclass(frozen=True)
class ConvLayerConfig:
    """Spatial geometry of one convolutional transform.

    ``spatial_out`` is fully determined by the input extents, filter extents,
    stride and zero padding; passing an inconsistent value is rejected.
    Channel counts are optional here and only used by the finite simulator.
    """

    spatial_in: tuple[int, ...]
    filter_shape: tuple[int, ...]
    stride: tuple[int, ...] = 1
    padding: tuple[int, ...] = 0
    spatial_out: tuple[int, ...] | None = None
    channels_in: int | None = None
    channels_out: int | None = None

    def __post_init__(self):
        if np.isscalar(self.spatial_in):
            p_in = (int(self.spatial_in),)
        else:
            p_in = tuple(int(v) for v in self.spatial_in)
        ndim = len(p_in)
        filt = _as_axis_tuple(self.filter_shape, ndim, "filter_shape")
        stride = _as_axis_tuple(self.stride, ndim, "stride")
        pad = _as_axis_tuple(self.padding, ndim, "padding")
        if any(p < 1 for p in p_in) or any(g < 1 for g in filt):
            raise ValueError("extents must be >= 1")
        if any(s < 1 for s in stride):
            raise ValueError("stride must be positive")
        if any(q < 0 for q in pad):
            raise ValueError("padding must be non-negative")
        if any(g > p + 2 * q for g, p, q in zip(filt, p_in, pad)):
            raise ValueError("filter does not fit the padded input")
        expected = tuple(
            (p + 2 * q - g) // s + 1 for p, g, s, q in zip(p_in, filt, stride, pad)
        )
        if any(e < 1 for e in expected):
            raise ValueError("configuration produces an empty output")
        if self.spatial_out is not None:
            given = _as_axis_tuple(self.spatial_out, ndim, "spatial_out")
            if given != expected:
                raise ValueError(
                    f"spatial_out {given} inconsistent with derived {expected}"
                )
        object.__setattr__(self, "spatial_in", p_in)
        object.__setattr__(self, "filter_shape", filt)
        object.__setattr__(self, "stride", stride)
        object.__setattr__(self, "padding", pad)
        object.__setattr__(self, "spatial_out", expected)

    @property
    def n_positions_in(self) -> int:
        return prod(self.spatial_in)

    @property
    def n_positions_out(self) -> int:
        return prod(self.spatial_out)

    @property
    def n_offsets(self) -> int:
        return prod(self.filter_shape)


@dataclass(frozen=True)
class PatchMap:
    """Precomputed gather table for one layer configuration.

    ``indices[p, g]`` is the flat (row-major) input position read by output
    position ``p`` at filter offset ``g``, or ``OUT_OF_BOUNDS`` when the
    moving window falls outside the input; those slots read as zero.
    """

    config: ConvLayerConfig
    indices: np.ndarray

    def gather(self, values: np.ndarray, axis: int) -> np.ndarray:
        """Gather patch slices along a flattened-spatial axis.

        ``values`` must have extent ``n_positions_in`` at ``axis``; the result
        replaces that axis with two axes (filter offset, output position),
        with out-of-bounds slots exactly zero.
        """
        axis = axis % values.ndim
        n_in = self.config.n_positions_in
        if values.shape[axis] != n_in:
            raise ValueError(
                f"expected extent {n_in} at axis {axis}, got {values.shape[axis]}"
            )
        pad_shape = list(values.shape)
        pad_shape[axis] = 1
        padded = np.concatenate(
            [values, np.zeros(pad_shape, dtype=values.dtype)], axis=axis
        )
        safe = np.where(self.indices == OUT_OF_BOUNDS, n_in, self.indices)
        # transpose to offset-major so no axis swap is needed afterwards
        took = np.take(padded, safe.T.reshape(-1), axis=axis)
        new_shape = (
            values.shape[:axis]
            + (self.config.n_offsets, self.config.n_positions_out)
            + values.shape[axis + 1 :]
        )
        return took.reshape(new_shape)


def build_patch_map(config: ConvLayerConfig) -> PatchMap:
    """Index table of the moving window; a deterministic function of the
    configuration."""
    p_out = config.spatial_out
    n_pos = config.n_positions_out
    n_off = config.n_offsets
    pos = np.stack(
        np.unravel_index(np.arange(n_pos), p_out), axis=1
    )  # (n_pos, S)
    off = np.stack(
        np.unravel_index(np.arange(n_off), config.filter_shape), axis=1
    )  # (n_off, S)
    stride = np.asarray(config.stride)
    pad = np.asarray(config.padding)
    extents = np.asarray(config.spatial_in)
    coords = pos[:, None, :] * stride - pad + off[None, :, :]  # (n_pos, n_off, S)
    oob = ((coords < 0) | (coords >= extents)).any(axis=2)
    clipped = np.clip(coords, 0, extents - 1)
    flat = np.ravel_multi_index(
        tuple(clipped[..., s] for s in range(len(p_out))), config.spatial_in
    ).astype(np.int64)
    flat[oob] = OUT_OF_BOUNDS
    flat.setflags(write=False)
    return PatchMap(config=config, indices=flat)


@lru_cache(maxsize=128)
def patch_map_for(config: ConvLayerConfig) -> PatchMap:
    """Cached :func:`build_patch_map`; layer configs are reused heavily."""
    return build_patch_map(config)


def extract_patches(x: Tensor, pmap: PatchMap) -> Tensor:
    """Extract all moving-window patches of ``x``.

    ``x`` has axes (channel, *spatial) or (channel, *spatial, input); the
    result has axes (channel, *filter offset, *output position[, input]).
    """
    cfg = pmap.config
    s_dim = len(cfg.spatial_in)
    if x.data.ndim == s_dim + 1:
        has_input = False
    elif x.data.ndim == s_dim + 2:
        has_input = True
    else:
        raise ValueError(
            f"expected {s_dim + 1} or {s_dim + 2} axes, got {x.data.ndim}"
        )
    if x.shape[1 : 1 + s_dim] != cfg.spatial_in:
        raise ValueError(
            f"spatial extents {x.shape[1:1 + s_dim]} do not match {cfg.spatial_in}"
        )
    channels = x.shape[0]
    k = x.shape[-1] if has_input else 1
    flat = x.data.reshape(channels, cfg.n_positions_in, k)
    gathered = pmap.gather(flat, axis=1)  # (C, n_off, n_pos, K)
    out_shape = (channels,) + cfg.filter_shape + cfg.spatial_out
    roles = (
        (ROLE_CHANNEL,)
        + (ROLE_FILTER,) * s_dim
        + (ROLE_POSITION,) * s_dim
    )
    if has_input:
        out_shape = out_shape + (k,)
        roles = roles + (ROLE_INPUT,)
    return Tensor(gathered.reshape(out_shape), roles)
