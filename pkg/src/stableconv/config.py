"""Run configuration: a single INI-style text file with nested sections.

One file carries the network, its inputs, the layer geometry, the Monte
Carlo budget of the limit recursion, and the verification settings.  The
parsed configuration re-renders to a canonical resolved form whose SHA-256
prefix keys the run directory, so identical configurations land in the same
place and re-runs are comparable byte for byte.

Synthetic inputs (kind = gaussian) are generated from the configured seed on
a dedicated stream; kind = file loads a .npy array of shape
(channels, *spatial, n_inputs).
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass

import numpy as np

from .limits import LimitConfig
from .network import (
    NetworkSpec,
    RNG_DOMAIN_INPUTS,
    get_activation,
)
from .tensors import ConvLayerConfig, input_tensor


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.split())


@dataclass(frozen=True)
class LayerGeometry:
    filter_shape: tuple[int, ...]
    stride: tuple[int, ...]
    padding: tuple[int, ...]


@dataclass(frozen=True)
class RunConfig:
    alpha: float
    sigma_w: float
    sigma_b: float
    channels: int
    activation: str
    seed: int
    in_channels: int
    spatial: tuple[int, ...]
    n_inputs: int
    input_kind: str
    input_path: str
    layers: tuple[LayerGeometry, ...]
    mc_samples: int
    atom_cap: int | None
    limit_seed: int
    channel_counts: tuple[int, ...]
    n_replicas: int
    n_probes: int
    max_sup_dist: float
    require_decreasing: bool
    timing_in_csv: bool
    workers: int
    max_factorization_defect: float
    max_mixture_dist: float
    oracle_mc_samples: int
    oracle_max_diag_rel_err: float

    def resolved_text(self) -> str:
        """Canonical rendering; the basis of the configuration hash."""
        lines = [
            "[network]",
            f"alpha = {self.alpha:.17g}",
            f"sigma_w = {self.sigma_w:.17g}",
            f"sigma_b = {self.sigma_b:.17g}",
            f"channels = {self.channels}",
            f"activation = {self.activation}",
            f"seed = {self.seed}",
            "",
            "[input]",
            f"channels = {self.in_channels}",
            f"spatial = {' '.join(map(str, self.spatial))}",
            f"num_inputs = {self.n_inputs}",
            f"kind = {self.input_kind}",
            f"path = {self.input_path}",
        ]
        for i, layer in enumerate(self.layers, start=1):
            lines += [
                "",
                f"[layer.{i}]",
                f"filter = {' '.join(map(str, layer.filter_shape))}",
                f"stride = {' '.join(map(str, layer.stride))}",
                f"padding = {' '.join(map(str, layer.padding))}",
            ]
        lines += [
            "",
            "[limit]",
            f"mc_samples = {self.mc_samples}",
            f"atom_cap = {'' if self.atom_cap is None else self.atom_cap}",
            f"seed = {self.limit_seed}",
            "",
            "[verify]",
            f"channel_counts = {' '.join(map(str, self.channel_counts))}",
            f"n_replicas = {self.n_replicas}",
            f"n_probes = {self.n_probes}",
            f"max_sup_dist = {self.max_sup_dist:.17g}",
            f"require_decreasing = {str(self.require_decreasing).lower()}",
            f"timing_in_csv = {str(self.timing_in_csv).lower()}",
            f"workers = {self.workers}",
            f"max_factorization_defect = {self.max_factorization_defect:.17g}",
            f"max_mixture_dist = {self.max_mixture_dist:.17g}",
            "",
            "[oracle]",
            f"mc_samples = {self.oracle_mc_samples}",
            f"max_diag_rel_err = {self.oracle_max_diag_rel_err:.17g}",
        ]
        return "\n".join(lines) + "\n"

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.resolved_text().encode()).hexdigest()[:16]

    def layer_configs(self) -> tuple[ConvLayerConfig, ...]:
        configs = []
        spatial = self.spatial
        for layer in self.layers:
            cfg = ConvLayerConfig(
                spatial_in=spatial,
                filter_shape=layer.filter_shape,
                stride=layer.stride,
                padding=layer.padding,
            )
            configs.append(cfg)
            spatial = cfg.spatial_out
        return tuple(configs)

    def make_inputs(self):
        shape = (self.in_channels, *self.spatial, self.n_inputs)
        if self.input_kind == "gaussian":
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=self.seed, spawn_key=(RNG_DOMAIN_INPUTS,))
            )
            return input_tensor(rng.standard_normal(shape))
        if self.input_kind == "file":
            arr = np.load(self.input_path)
            if arr.shape != shape:
                raise ValueError(
                    f"input file shape {arr.shape} does not match configured {shape}"
                )
            return input_tensor(arr)
        raise ValueError(f"unknown input kind {self.input_kind!r}")

    def build_spec(self, channels: int | None = None) -> NetworkSpec:
        return NetworkSpec(
            alpha=self.alpha,
            sigma_w=self.sigma_w,
            sigma_b=self.sigma_b,
            layers=self.layer_configs(),
            activation=get_activation(self.activation),
            channels=self.channels if channels is None else int(channels),
            inputs=self.make_inputs(),
            seed=self.seed,
        )

    def limit_config(self, mc_samples: int | None = None) -> LimitConfig:
        return LimitConfig(
            mc_samples=self.mc_samples if mc_samples is None else int(mc_samples),
            atom_cap=self.atom_cap,
            seed=self.limit_seed,
        )


def load_config(path) -> RunConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(path)
    net = parser["network"]
    inp = parser["input"]
    layer_sections = sorted(
        (s for s in parser.sections() if s.startswith("layer.")),
        key=lambda s: int(s.split(".", 1)[1]),
    )
    if not layer_sections:
        raise ValueError("at least one [layer.N] section is required")
    spatial = _ints(inp.get("spatial"))
    layers = []
    for section in layer_sections:
        sec = parser[section]
        n = len(spatial)

        def axis_vals(key, default):
            raw = sec.get(key, fallback=None)
            if raw is None:
                return (default,) * n
            vals = _ints(raw)
            return vals * n if len(vals) == 1 and n > 1 else vals

        layers.append(
            LayerGeometry(
                filter_shape=axis_vals("filter", 1),
                stride=axis_vals("stride", 1),
                padding=axis_vals("padding", 0),
            )
        )
    lim = parser["limit"] if parser.has_section("limit") else {}
    ver = parser["verify"] if parser.has_section("verify") else {}
    ora = parser["oracle"] if parser.has_section("oracle") else {}
    atom_cap_raw = lim.get("atom_cap", "") if lim else ""
    return RunConfig(
        alpha=net.getfloat("alpha"),
        sigma_w=net.getfloat("sigma_w", fallback=1.0),
        sigma_b=net.getfloat("sigma_b", fallback=1.0),
        channels=net.getint("channels", fallback=64),
        activation=net.get("activation", fallback="tanh"),
        seed=net.getint("seed", fallback=0),
        in_channels=inp.getint("channels", fallback=1),
        spatial=spatial,
        n_inputs=inp.getint("num_inputs", fallback=1),
        input_kind=inp.get("kind", fallback="gaussian"),
        input_path=inp.get("path", fallback=""),
        layers=tuple(layers),
        mc_samples=int(lim.get("mc_samples", 10_000)) if lim else 10_000,
        atom_cap=int(atom_cap_raw) if str(atom_cap_raw).strip() else None,
        limit_seed=int(lim.get("seed", 0)) if lim else 0,
        channel_counts=_ints(ver.get("channel_counts", "4 16 64")) if ver else (4, 16, 64),
        n_replicas=int(ver.get("n_replicas", 2000)) if ver else 2000,
        n_probes=int(ver.get("n_probes", 20)) if ver else 20,
        max_sup_dist=float(ver.get("max_sup_dist", 0.05)) if ver else 0.05,
        require_decreasing=str(ver.get("require_decreasing", "true")).lower() == "true"
        if ver
        else True,
        timing_in_csv=str(ver.get("timing_in_csv", "false")).lower() == "true"
        if ver
        else False,
        workers=int(ver.get("workers", 1)) if ver else 1,
        max_factorization_defect=float(ver.get("max_factorization_defect", 0.07))
        if ver
        else 0.07,
        max_mixture_dist=float(ver.get("max_mixture_dist", 0.05)) if ver else 0.05,
        oracle_mc_samples=int(ora.get("mc_samples", 10_000)) if ora else 10_000,
        oracle_max_diag_rel_err=float(ora.get("max_diag_rel_err", 0.05)) if ora else 0.05,
    )
