"""Empirical characteristic-function verification of the limit laws.

Convergence of the finite-channel network to its limiting stable law is
checked in the only metric that is cheap on both sides: pointwise
characteristic functions over a finite probe set.  Probes are drawn
isotropically at radii {0.25, 0.5, 1, 2} times a base radius calibrated so
the theoretical CF at the median probe is about one half; a probe set is
regenerated until it contains at least one clearly small (< 0.2) and one
clearly large (> 0.8) theoretical CF value, so the comparison has power.
The zero probe is always included (both CFs are exactly 1 there).

The estimator mean_n exp(i <t, X_n>) has standard error about 1/sqrt(N) per
probe, which sets the tolerances used by the acceptance suite.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .limits import LimitConfig, limit_measures, mixture_measure
from .network import (
    NetworkSpec,
    RNG_DOMAIN_PROBES,
    channel_mixture,
    sample_replicas,
)
from .stable import SpectralMeasure, cf_multivariate
from .tensors import patch_map_for

RADIUS_FACTORS = (0.25, 0.5, 1.0, 2.0)


@dataclass(frozen=True)
class ProbeSet:
    """Flat probe vectors for CF comparison; row 0 is the zero probe."""

    probes: np.ndarray
    base_radius: float
    seed: int

    def __post_init__(self):
        p = np.asarray(self.probes, dtype=np.float64)
        if p.ndim != 2 or not np.all(p[0] == 0.0):
            raise ValueError("probes must be (n, d) with a leading zero probe")
        if len(np.unique(p, axis=0)) != p.shape[0]:
            raise ValueError("probes must be deduplicated")
        p.setflags(write=False)
        object.__setattr__(self, "probes", p)

    @property
    def n_probes(self) -> int:
        return self.probes.shape[0]


def _probe_rng(seed: int, attempt: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(RNG_DOMAIN_PROBES, attempt))
    )


def generate_probes(
    measure: SpectralMeasure,
    n_probes: int = 20,
    seed: int = 0,
    radius_factors: tuple[float, ...] = RADIUS_FACTORS,
    max_attempts: int = 32,
) -> ProbeSet:
    """Isotropic probes scaled to the law described by ``measure``.

    The base radius solves CF = 1/2 at the median random direction; the
    factors then spread probes across the informative range of the CF.
    """
    if measure.n_atoms == 0:
        raise ValueError("cannot calibrate probes against an empty measure")
    d = measure.dimension
    for attempt in range(max_attempts):
        rng = _probe_rng(seed, attempt)
        dirs = rng.standard_normal((n_probes, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        unit_expo = (
            np.abs(dirs @ measure.directions.T) ** measure.alpha @ measure.weights
        )
        base = (np.log(2.0) / np.median(unit_expo)) ** (1.0 / measure.alpha)
        radii = base * np.asarray(radius_factors)[np.arange(n_probes) % len(radius_factors)]
        probes = dirs * radii[:, None]
        theo = cf_multivariate(measure, probes)
        if theo.min() < 0.2 and theo.max() > 0.8:
            probes = np.vstack([np.zeros(d), probes])
            if len(np.unique(probes, axis=0)) == probes.shape[0]:
                return ProbeSet(probes=probes, base_radius=float(base), seed=seed)
    raise RuntimeError("failed to generate a discriminative probe set")


def empirical_cf(samples: np.ndarray, probes: np.ndarray) -> np.ndarray:
    """Empirical characteristic function of flat samples at each probe.

    Returns mean_n exp(i <t, X_n>) as a complex array; the standard error of
    each entry is about 1/sqrt(len(samples)).
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise ValueError("samples must be a non-empty (N, d) array")
    arr = np.asarray(probes, dtype=np.float64)
    single = arr.ndim == 1
    t = np.atleast_2d(arr)
    if t.shape[1] != samples.shape[1]:
        raise ValueError("probe dimension does not match the samples")
    phases = samples @ t.T
    out = np.exp(1j * phases).mean(axis=0)
    return complex(out[0]) if single else out


def cf_standard_error(n_samples: int) -> float:
    return 1.0 / np.sqrt(n_samples)


def cf_distance(empirical: np.ndarray, theoretical: np.ndarray) -> tuple[float, float]:
    """Sup and mean absolute CF difference over an aligned probe set."""
    emp = np.atleast_1d(np.asarray(empirical))
    theo = np.atleast_1d(np.asarray(theoretical))
    if emp.shape != theo.shape:
        raise ValueError("probe sets are misaligned")
    diff = np.abs(emp - theo)
    return float(diff.max()), float(diff.mean())


@dataclass(frozen=True)
class SweepRow:
    channels: int
    n_replicas: int
    mc_samples: int
    sup_cf_dist: float
    mean_cf_dist: float
    seconds: float

    def __post_init__(self):
        if not 0.0 <= self.sup_cf_dist <= 2.0 or not 0.0 <= self.mean_cf_dist <= 2.0:
            raise ValueError("CF distances must lie in [0, 2]")


CSV_HEADER = "C,n_replicas,M,sup_cf_dist,mean_cf_dist,seconds"


@dataclass
class ConvergenceReport:
    """Sweep results over increasing channel counts, plus run metadata."""

    rows: list[SweepRow]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        cs = [r.channels for r in self.rows]
        if cs != sorted(cs):
            raise ValueError("rows must be sorted by channel count")

    def to_csv(self, timing: bool = False) -> str:
        """Render the frozen CSV schema.

        Wall-clock values are nondeterministic, so by default the seconds
        column is written as 0.000 and measured times stay in the in-memory
        rows and the run log; pass timing=True to write them out (this gives
        up byte-identical re-runs).
        """
        lines = [CSV_HEADER]
        for r in self.rows:
            secs = r.seconds if timing else 0.0
            lines.append(
                f"{r.channels},{r.n_replicas},{r.mc_samples},"
                f"{r.sup_cf_dist:.12g},{r.mean_cf_dist:.12g},{secs:.3f}"
            )
        return "\n".join(lines) + "\n"


def _sweep_point(args) -> SweepRow:
    spec, c, n_replicas, mc_samples, probes, theo, workers = args
    t0 = time.perf_counter()
    reps = sample_replicas(spec.with_channels(c), n_replicas, workers=workers)
    emp = empirical_cf(reps.channel_samples(0), probes)
    sup, mean = cf_distance(emp, theo)
    return SweepRow(
        channels=c,
        n_replicas=n_replicas,
        mc_samples=mc_samples,
        sup_cf_dist=sup,
        mean_cf_dist=mean,
        seconds=time.perf_counter() - t0,
    )


def convergence_sweep(
    spec: NetworkSpec,
    channel_counts,
    n_replicas: int,
    limit_cfg: LimitConfig,
    probes: ProbeSet | None = None,
    n_probes: int = 20,
    workers: int = 1,
    parallel_points: bool = False,
    target: SpectralMeasure | None = None,
    metadata: dict | None = None,
) -> ConvergenceReport:
    """Empirical-vs-limit CF distances for each channel count.

    The limiting measure of the last layer is computed once (or supplied as
    ``target``, e.g. from a cache); every channel count then contributes one
    row with the sup and mean CF distance of its replica estimate against
    that fixed target.  Sweep points run sequentially by default to bound
    memory; ``parallel_points`` fans them out over processes instead
    (replica streams are keyed by index, so the distances do not change).
    """
    counts = [int(c) for c in channel_counts]
    if any(b <= a for a, b in zip(counts, counts[1:])) or not counts:
        raise ValueError("channel counts must be strictly increasing")
    if target is None:
        target = limit_measures(spec, limit_cfg)[-1]
    if probes is None:
        probes = generate_probes(target, n_probes=n_probes, seed=spec.seed)
    theo = cf_multivariate(target, probes.probes)
    jobs = [
        (spec, c, n_replicas, limit_cfg.mc_samples, probes.probes, theo, workers)
        for c in counts
    ]
    if parallel_points:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=len(jobs)) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(job) for job in jobs]
    rows.sort(key=lambda r: r.channels)
    meta = {
        "seed": spec.seed,
        "alpha": spec.alpha,
        "activation": spec.activation.name,
    }
    if metadata:
        meta.update(metadata)
    return ConvergenceReport(rows=rows, metadata=meta)


def cross_factorization_defect(
    samples_a: np.ndarray,
    samples_b: np.ndarray,
    probes_a: np.ndarray,
    probes_b: np.ndarray,
) -> np.ndarray:
    """|joint CF - product of marginal CFs| at each probe pair.

    Vanishing defects (up to estimator noise) are what independence of the
    two sample streams looks like through characteristic functions.
    """
    if samples_a.shape != samples_b.shape:
        raise ValueError("paired samples required")
    if probes_a.shape != probes_b.shape:
        raise ValueError("probe pairs are misaligned")
    pa = samples_a @ probes_a.T
    pb = samples_b @ probes_b.T
    joint = np.exp(1j * (pa + pb)).mean(axis=0)
    prod_ = np.exp(1j * pa).mean(axis=0) * np.exp(1j * pb).mean(axis=0)
    return np.abs(joint - prod_)


@dataclass(frozen=True)
class IndependenceReport:
    factorization_defects: np.ndarray
    control_defects: np.ndarray
    mixture_sup: float
    mixture_mean: float

    @property
    def max_defect(self) -> float:
        return float(self.factorization_defects.max())

    @property
    def max_control_defect(self) -> float:
        return float(self.control_defects.max())


def independence_check(
    outputs: np.ndarray,
    biases: np.ndarray,
    limit_measure: SpectralMeasure,
    z,
    probes_a: np.ndarray,
    probes_b: np.ndarray,
    mixture_probes: np.ndarray | None = None,
) -> IndependenceReport:
    """Two-channel independence diagnostics against the joint limit law.

    ``outputs`` is a replica batch (N, 2, d) of the same network; the check
    reports (i) the cross-factorization defect of the two channels over the
    probe pairs, with the dependent pairing (channel 1 against itself) as a
    negative control, and (ii) the CF distance between the bias-stripped
    channel mixture with weights z and the mixture form of the limit law.
    """
    outputs = np.asarray(outputs, dtype=np.float64)
    if outputs.ndim != 3 or outputs.shape[1] < 2:
        raise ValueError("need paired channel outputs (N, 2, d)")
    f1 = outputs[:, 0, :]
    f2 = outputs[:, 1, :]
    defects = cross_factorization_defect(f1, f2, probes_a, probes_b)
    control = cross_factorization_defect(f1, f1, probes_a, probes_b)
    delta = mixture_measure(limit_measure, z)
    mix_samples = channel_mixture(outputs, z, biases)
    probes = probes_a if mixture_probes is None else mixture_probes
    emp = empirical_cf(mix_samples, probes)
    theo = cf_multivariate(delta, probes)
    sup, mean = cf_distance(emp, theo)
    return IndependenceReport(
        factorization_defects=defects,
        control_defects=control,
        mixture_sup=sup,
        mixture_mean=mean,
    )


def implied_covariance(measure: SpectralMeasure) -> np.ndarray:
    """Covariance of the Gaussian law a spectral measure describes at
    alpha = 2: twice the weighted sum of direction outer products."""
    if measure.alpha != 2.0:
        raise ValueError("covariance is only defined at alpha = 2")
    return 2.0 * (measure.directions.T * measure.weights) @ measure.directions


def _first_layer_covariance(spec: NetworkSpec) -> np.ndarray:
    """Exact Gaussian field covariance after the first layer at alpha = 2."""
    cfg = spec.layers[0]
    k = spec.n_inputs
    pm = patch_map_for(cfg)
    patches = pm.gather(spec.inputs.data.reshape(spec.in_channels, -1, k), axis=1)
    slices = patches.reshape(spec.in_channels * cfg.n_offsets, -1)
    dim = slices.shape[1]
    return 2.0 * spec.sigma_b**2 * np.ones((dim, dim)) + 2.0 * spec.sigma_w**2 * (
        slices.T @ slices
    )


def gaussian_kernel_recursion(
    spec: NetworkSpec, mc_samples: int, rng: np.random.Generator
) -> np.ndarray:
    """Direct Gaussian covariance recursion for alpha = 2 networks.

    Layer 1 is the exact closed form; each deeper layer samples Gaussian
    fields with the previous covariance, pushes activated patch slices
    through, and averages their outer products.  This path never touches the
    spectral-measure machinery.
    """
    if spec.alpha != 2.0:
        raise ValueError("the Gaussian recursion requires alpha = 2")
    cov = _first_layer_covariance(spec)
    k = spec.n_inputs
    for cfg in spec.layers[1:]:
        evals, evecs = np.linalg.eigh(cov)
        evals = np.clip(evals, 0.0, None)
        draws = rng.standard_normal((mc_samples, cov.shape[0]))
        fields = (draws * np.sqrt(evals)) @ evecs.T
        pm = patch_map_for(cfg)
        acts = spec.activation(
            pm.gather(fields.reshape(mc_samples, cfg.n_positions_in, k), axis=1)
        )
        slices = acts.reshape(mc_samples * cfg.n_offsets, cfg.n_positions_out * k)
        dim = slices.shape[1]
        cov = 2.0 * spec.sigma_b**2 * np.ones((dim, dim)) + (
            2.0 * spec.sigma_w**2 / mc_samples
        ) * (slices.T @ slices)
    return cov


@dataclass(frozen=True)
class GaussianOracleReport:
    implied: np.ndarray
    direct: np.ndarray
    max_diag_rel_err: float
    max_offdiag_abs_err: float


def gaussian_oracle_check(
    spec: NetworkSpec, limit_cfg: LimitConfig, oracle_seed: int = 321
) -> GaussianOracleReport:
    """Compare the covariance implied by the alpha = 2 limit measure with an
    independent Gaussian Monte Carlo covariance recursion."""
    if spec.alpha != 2.0:
        raise ValueError("the Gaussian oracle applies only at alpha = 2")
    implied = implied_covariance(limit_measures(spec, limit_cfg)[-1])
    direct = gaussian_kernel_recursion(
        spec, limit_cfg.mc_samples, np.random.default_rng(oracle_seed)
    )
    diag_i = np.diag(implied)
    diag_d = np.diag(direct)
    rel = np.abs(diag_i - diag_d) / np.abs(diag_d)
    off = ~np.eye(implied.shape[0], dtype=bool)
    off_err = np.abs(implied - direct)[off].max() if off.any() else 0.0
    return GaussianOracleReport(
        implied=implied,
        direct=direct,
        max_diag_rel_err=float(rel.max()),
        max_offdiag_abs_err=float(off_err),
    )
