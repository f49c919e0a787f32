import numpy as np
import pytest

import stableconv as sc


def toy_layer():
    return sc.ConvLayerConfig(spatial_in=4, filter_shape=3, stride=1, padding=1)


def toy_inputs(seed=0, in_channels=1, spatial=(4,), k=2):
    rng = np.random.default_rng(seed)
    return sc.input_tensor(rng.standard_normal((in_channels, *spatial, k)))


def toy_spec(alpha=1.5, channels=64, n_layers=2, seed=11, activation="tanh",
             sigma_w=1.0, sigma_b=1.0):
    return sc.NetworkSpec(
        alpha=alpha,
        sigma_w=sigma_w,
        sigma_b=sigma_b,
        layers=tuple(toy_layer() for _ in range(n_layers)),
        activation=sc.get_activation(activation),
        channels=channels,
        inputs=toy_inputs(),
        seed=seed,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_conv_case(rng, two_d=False, k=None):
    """A small random geometry plus matching random inputs."""
    if two_d:
        spatial = (int(rng.integers(3, 6)), int(rng.integers(3, 6)))
        filt = tuple(int(rng.integers(1, min(4, s + 1))) for s in spatial)
        stride = tuple(int(rng.integers(1, 3)) for _ in spatial)
        pad = tuple(int(rng.integers(0, 2)) for _ in spatial)
    else:
        spatial = (int(rng.integers(3, 8)),)
        filt = (int(rng.integers(1, spatial[0] + 1)),)
        stride = (int(rng.integers(1, 3)),)
        pad = (int(rng.integers(0, 3)),)
    filt = tuple(min(f, s + 2 * q) for f, s, q in zip(filt, spatial, pad))
    cfg = sc.ConvLayerConfig(spatial_in=spatial, filter_shape=filt, stride=stride, padding=pad)
    c0 = int(rng.integers(1, 3))
    k = int(rng.integers(1, 4)) if k is None else k
    x = sc.input_tensor(rng.standard_normal((c0, *spatial, k)))
    return cfg, x
