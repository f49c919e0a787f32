"""Finite-channel convolutional networks with symmetric stable parameters,
simulated jointly over several inputs.

Weights and biases are drawn iid symmetric stable with scales sigma_w and
sigma_b.  The first layer applies the convolution as-is; deeper layers divide
the weight term by C^(1/alpha), where C is the channel count shared by all
hidden layers.  The activation is applied to extracted patches, so padding
slots feed phi(0) into the next contraction.

Replica sampling derives one independent generator per replica from
(seed, replica index); replica sets are therefore order-independent and can
be produced by a worker pool without changing any draw.
"""

from __future__ import annotations

import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from math import prod
from typing import Callable

import numpy as np

from .stable import sample_standard
from .tensors import (
    ConvLayerConfig,
    ROLE_INPUT,
    ROLE_POSITION,
    Tensor,
    patch_map_for,
)

# spawn-key domains keep replica, limit-recursion and probe streams disjoint
RNG_DOMAIN_REPLICA = 1
RNG_DOMAIN_LIMIT = 2
RNG_DOMAIN_PROBES = 3
RNG_DOMAIN_INPUTS = 4

_ENVELOPE_GRID = None


def _envelope_grid() -> np.ndarray:
    global _ENVELOPE_GRID
    if _ENVELOPE_GRID is None:
        pos = np.logspace(-6.0, 6.0, 121)
        _ENVELOPE_GRID = np.concatenate([[0.0], pos, -pos])
    return _ENVELOPE_GRID


@dataclass(frozen=True)
class ActivationSpec:
    """A pointwise nonlinearity together with its growth envelope.

    The envelope |phi(s)| <= a + b * |s|^beta is checked empirically on a
    log-spaced grid over [-1e6, 1e6] at construction.  beta < 1 is what the
    heavy-tailed limit theory needs for alpha < 2; that gate is enforced by
    :class:`NetworkSpec`, not here, so the Gaussian case can use beta = 1
    activations.
    """

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    a: float
    b: float
    beta: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0 or self.beta < 0:
            raise ValueError("envelope requires a > 0, b > 0, beta >= 0")
        s = _envelope_grid()
        bound = self.a + self.b * np.abs(s) ** self.beta
        values = np.abs(self.fn(s))
        if np.any(values > bound + 1e-9):
            worst = s[np.argmax(values - bound)]
            raise ValueError(
                f"activation {self.name!r} violates its envelope near s={worst:g}"
            )

    def __call__(self, s: np.ndarray) -> np.ndarray:
        return self.fn(np.asarray(s, dtype=np.float64))


def _tanh(s):
    return np.tanh(s)


def _hard_clip(s):
    return np.clip(s, -1.0, 1.0)


def _signed_power(s):
    return np.sign(s) * np.abs(s) ** 0.9


def _relu(s):
    return np.maximum(s, 0.0)


ACTIVATIONS = {
    "tanh": ActivationSpec("tanh", _tanh, a=1.0, b=1.0, beta=0.0),
    "hard_clip": ActivationSpec("hard_clip", _hard_clip, a=1.0, b=1.0, beta=0.0),
    "signed_power": ActivationSpec("signed_power", _signed_power, a=1.0, b=1.0, beta=0.9),
    # beta = 1 sits outside the heavy-tailed envelope; usable only at alpha = 2
    "relu": ActivationSpec("relu", _relu, a=1.0, b=1.0, beta=1.0),
}


def get_activation(name: str) -> ActivationSpec:
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise KeyError(
            f"unknown activation {name!r}; shipped: {sorted(ACTIVATIONS)}"
        ) from None


@dataclass(frozen=True)
class NetworkSpec:
    """Configuration of one stable-parameter network over K inputs.

    ``inputs`` has axes (input channels, *spatial, K).  Layer configs must
    chain spatially, and all hidden layers share the channel count
    ``channels``.  ``sigma_w`` and ``sigma_b`` may be zero (degenerate draws).
    """

    alpha: float
    sigma_w: float
    sigma_b: float
    layers: tuple[ConvLayerConfig, ...]
    activation: ActivationSpec
    channels: int
    inputs: Tensor
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 2.0:
            raise ValueError(f"alpha must be in (0, 2], got {self.alpha}")
        if self.sigma_w < 0 or self.sigma_b < 0:
            raise ValueError("scales must be non-negative")
        layers = tuple(self.layers)
        if len(layers) < 1:
            raise ValueError("at least one layer required")
        if self.channels < 1:
            raise ValueError("channel count must be >= 1")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.spatial_out != nxt.spatial_in:
                raise ValueError(
                    f"layers do not chain: {prev.spatial_out} -> {nxt.spatial_in}"
                )
        for i, cfg in enumerate(layers):
            expect_in = self.inputs.shape[0] if i == 0 else self.channels
            if cfg.channels_in is not None and cfg.channels_in != expect_in:
                raise ValueError(
                    f"layer {i + 1} declares {cfg.channels_in} input channels, "
                    f"network provides {expect_in}"
                )
            if (
                cfg.channels_out is not None
                and i < len(layers) - 1
                and cfg.channels_out != self.channels
            ):
                raise ValueError(
                    f"hidden layer {i + 1} declares {cfg.channels_out} output "
                    f"channels, network uses {self.channels}"
                )
        s_dim = len(layers[0].spatial_in)
        if self.inputs.data.ndim != s_dim + 2:
            raise ValueError("inputs must have (channel, *spatial, input) axes")
        if self.inputs.shape[1 : 1 + s_dim] != layers[0].spatial_in:
            raise ValueError("input spatial extents do not match the first layer")
        if self.alpha < 2.0 and self.activation.beta >= 1.0:
            raise ValueError(
                f"activation {self.activation.name!r} has envelope exponent "
                f"{self.activation.beta} >= 1, not admissible for alpha < 2"
            )
        object.__setattr__(self, "layers", layers)

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def n_inputs(self) -> int:
        return self.inputs.shape[-1]

    @property
    def in_channels(self) -> int:
        return self.inputs.shape[0]

    @property
    def out_spatial(self) -> tuple[int, ...]:
        return self.layers[-1].spatial_out

    @property
    def out_dim(self) -> int:
        """Flat dimension of one output channel: positions times inputs."""
        return prod(self.out_spatial) * self.n_inputs

    def with_channels(self, channels: int) -> "NetworkSpec":
        return replace(self, channels=channels)


@dataclass(frozen=True)
class FiniteOutputs:
    """Output channels of one network realization.

    ``fields`` has shape (n_channels_out, *spatial_out, K); ``last_biases``
    holds the realized final-layer bias draws, needed to form bias-stripped
    channel mixtures.
    """

    fields: np.ndarray
    last_biases: np.ndarray

    @property
    def n_channels(self) -> int:
        return self.fields.shape[0]

    @property
    def flat(self) -> np.ndarray:
        """(n_channels_out, positions*K), row-major position-major layout."""
        return self.fields.reshape(self.n_channels, -1)

    def channel(self, c: int) -> Tensor:
        s_dim = self.fields.ndim - 2
        roles = (ROLE_POSITION,) * s_dim + (ROLE_INPUT,)
        return Tensor(self.fields[c], roles)


def forward_finite(
    spec: NetworkSpec, n_channels_out: int, rng: np.random.Generator
) -> FiniteOutputs:
    """Run one fresh network realization and return its output channels.

    Only the channels actually consumed are materialized: C at hidden layers,
    ``n_channels_out`` at the last.  Draw order is fixed (weights then bias,
    layer by layer), so equal seeds give bit-identical outputs.
    """
    if n_channels_out < 1:
        raise ValueError("n_channels_out must be >= 1")
    scale = spec.channels ** (-1.0 / spec.alpha)
    k = spec.n_inputs
    field = spec.inputs.data.reshape(spec.in_channels, -1, k)
    biases = None
    for l, cfg in enumerate(spec.layers):
        pm = patch_map_for(cfg)
        patches = pm.gather(field, axis=1)  # (C_in, n_off, n_pos, K)
        if l > 0:
            patches = spec.activation(patches)
        c_in = patches.shape[0]
        n_pos = cfg.n_positions_out
        m_out = n_channels_out if l == spec.n_layers - 1 else spec.channels
        w = spec.sigma_w * sample_standard(
            spec.alpha, (m_out, c_in * cfg.n_offsets), rng
        )
        biases = spec.sigma_b * sample_standard(spec.alpha, m_out, rng)
        field = w @ patches.reshape(c_in * cfg.n_offsets, n_pos * k)
        if l > 0:
            field *= scale
        field += biases[:, None]
        field = field.reshape(m_out, n_pos, k)
    out_shape = (field.shape[0],) + spec.layers[-1].spatial_out + (k,)
    return FiniteOutputs(fields=field.reshape(out_shape), last_biases=biases)


def replica_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for one replica, keyed by (seed, index)."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(RNG_DOMAIN_REPLICA, index))
    )


@dataclass(frozen=True)
class ReplicaSet:
    """Independent network realizations collected for law estimation."""

    outputs: np.ndarray  # (n_replicas, n_channels, out_dim)
    biases: np.ndarray  # (n_replicas, n_channels)
    alpha: float
    seed: int

    @property
    def n_replicas(self) -> int:
        return self.outputs.shape[0]

    def channel_samples(self, c: int = 0) -> np.ndarray:
        return self.outputs[:, c, :]


def _replica_block(args) -> tuple[np.ndarray, np.ndarray]:
    spec, seed, start, stop, n_channels = args
    out = np.empty((stop - start, n_channels, spec.out_dim))
    bias = np.empty((stop - start, n_channels))
    for i in range(start, stop):
        res = forward_finite(spec, n_channels, replica_rng(seed, i))
        out[i - start] = res.flat
        bias[i - start] = res.last_biases
    return out, bias


def sample_replicas(
    spec: NetworkSpec,
    n_replicas: int,
    n_channels: int = 1,
    seed: int | None = None,
    workers: int = 1,
) -> ReplicaSet:
    """Independent forward runs with per-replica generator streams.

    Channels within one replica come from the same network realization (they
    are exchangeable, not independent, at finite C); across replicas
    everything is independent.  ``workers`` > 1 distributes replica blocks
    over a process pool; the results do not depend on the worker count.
    """
    if n_replicas < 1:
        raise ValueError("n_replicas must be >= 1")
    seed = spec.seed if seed is None else int(seed)
    if workers <= 1:
        out, bias = _replica_block((spec, seed, 0, n_replicas, n_channels))
    else:
        bounds = np.linspace(0, n_replicas, workers + 1).astype(int)
        jobs = [
            (spec, seed, int(a), int(b), n_channels)
            for a, b in zip(bounds[:-1], bounds[1:])
            if b > a
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_replica_block, jobs))
        out = np.concatenate([p[0] for p in parts])
        bias = np.concatenate([p[1] for p in parts])
    return ReplicaSet(outputs=out, biases=bias, alpha=spec.alpha, seed=seed)


def channel_mixture(outputs, z, biases, channels=None) -> np.ndarray:
    """Weighted sum of bias-stripped channels: sum_c z_c (f_c - b_c * 1).

    ``outputs`` has channels on the second-to-last axis and flat output
    coordinates on the last; ``biases`` matches the leading axes.  Works for
    a single realization (n_channels, d) or a replica batch (N, n_channels,
    d).  ``channels`` selects which channels enter; default the first len(z).
    """
    outputs = np.asarray(outputs, dtype=np.float64)
    biases = np.asarray(biases, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if channels is None:
        channels = np.arange(z.shape[0])
    channels = np.asarray(channels, dtype=int)
    if channels.shape != z.shape:
        raise ValueError("channel index set and z must align")
    n_ch = outputs.shape[-2]
    if np.any(channels < 0) or np.any(channels >= n_ch):
        raise IndexError(f"channel index out of range [0, {n_ch})")
    stripped = outputs[..., channels, :] - biases[..., channels, None]
    return np.einsum("c,...cd->...d", z, stripped)


_CACHE_MAGIC = b"SCREPL1\x00"


def save_replicas(path, reps: ReplicaSet) -> None:
    """Binary replica cache: magic, alpha, seed, shape, then little-endian
    float64 output and bias blocks in replica-major order."""
    n, c, d = reps.outputs.shape
    with open(path, "wb") as fh:
        fh.write(_CACHE_MAGIC)
        fh.write(struct.pack("<dqQQQ", reps.alpha, reps.seed, n, c, d))
        fh.write(reps.outputs.astype("<f8").tobytes())
        fh.write(reps.biases.astype("<f8").tobytes())


def load_replicas(path) -> ReplicaSet:
    with open(path, "rb") as fh:
        magic = fh.read(len(_CACHE_MAGIC))
        if magic != _CACHE_MAGIC:
            raise ValueError(f"{path}: not a replica cache file")
        alpha, seed, n, c, d = struct.unpack("<dqQQQ", fh.read(8 * 5))
        out = np.frombuffer(fh.read(8 * n * c * d), dtype="<f8").reshape(n, c, d)
        bias = np.frombuffer(fh.read(8 * n * c), dtype="<f8").reshape(n, c)
    return ReplicaSet(
        outputs=out.astype(np.float64),
        biases=bias.astype(np.float64),
        alpha=alpha,
        seed=seed,
    )
