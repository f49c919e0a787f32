"""Symmetric alpha-stable laws: univariate sampling and characteristic
functions, multivariate laws given by discrete spectral measures on the unit
sphere, one-dimensional projections and measure utilities.

A finite measure on the sphere determines a symmetric multivariate stable law
through the exponent of its characteristic function; see Samorodnitsky &
Taqqu, "Stable Non-Gaussian Random Processes" (1994), ch. 2.  Discrete
measures are stored under a symmetric-pair convention: one stored atom
(weight, direction) stands for the pair of Dirac masses at +/-direction
carrying half the weight each.  Directions are unit vectors in the Euclidean
norm of the flattened coordinates, and the flattening order is the package's
row-major convention (see :mod:`stableconv.tensors`).

Univariate sampling uses the Chambers-Mallows-Stuck transform (Chambers,
Mallows & Stuck 1976; Weron 1996), with the Gaussian and Cauchy endpoints
special-cased to avoid the trigonometric singularities there.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StableParams:
    """Parameters of a univariate stable law.

    ``alpha`` is the stability index in (0, 2], ``sigma`` the scale,
    ``tau`` the skewness in [-1, 1] and ``mu`` the shift.  Only the symmetric
    case (tau = mu = 0) is ever sampled from; the characteristic function is
    evaluated for all parameter values.
    """

    alpha: float
    sigma: float
    tau: float = 0.0
    mu: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 2.0:
            raise ValueError(f"alpha must be in (0, 2], got {self.alpha}")
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not -1.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must be in [-1, 1], got {self.tau}")


def _cf_exponent(alpha, sigma, tau, mu, t):
    t = np.asarray(t, dtype=np.float64)
    at = np.abs(t)
    if alpha == 1.0:
        with np.errstate(divide="ignore"):
            logterm = np.where(at > 0.0, np.log(np.where(at > 0.0, at, 1.0)), 0.0)
        skew = 1.0 + 1j * tau * (2.0 / np.pi) * np.sign(t) * logterm
        psi = -sigma * at * skew + 1j * mu * t
    else:
        tan_half = 0.0 if alpha == 2.0 else np.tan(np.pi * alpha / 2.0)
        skew = 1.0 + 1j * tau * tan_half * np.sign(t)
        psi = -(sigma**alpha) * at**alpha * skew + 1j * mu * t
    return psi


def cf_univariate(params: StableParams, t):
    """Characteristic function of a univariate stable law.

    Real-valued when tau = mu = 0; always 1 at t = 0.  ``t`` may be a scalar
    or an array.
    """
    psi = _cf_exponent(params.alpha, params.sigma, params.tau, params.mu, t)
    out = np.exp(psi)
    return complex(out) if np.isscalar(t) else out


def sample_standard(alpha: float, size, rng: np.random.Generator) -> np.ndarray:
    """Draws with characteristic function exp(-|t|^alpha), i.e. symmetric
    stable with unit scale.

    Gaussian (alpha = 2) and Cauchy (alpha = 1) use their closed forms; other
    indices use the Chambers-Mallows-Stuck transform.
    """
    if not 0.0 < alpha <= 2.0:
        raise ValueError(f"alpha must be in (0, 2], got {alpha}")
    if alpha == 2.0:
        return np.sqrt(2.0) * rng.standard_normal(size)
    if alpha == 1.0:
        return rng.standard_cauchy(size)
    v = rng.uniform(-np.pi / 2.0, np.pi / 2.0, size)
    w = rng.standard_exponential(size)
    w = np.where(w == 0.0, np.finfo(np.float64).tiny, w)
    return (
        np.sin(alpha * v)
        / np.cos(v) ** (1.0 / alpha)
        * (np.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha)
    )


def sample_univariate(params: StableParams, rng: np.random.Generator, size=None):
    """Sample a symmetric stable law (tau must be 0; mu shifts the draw)."""
    if params.tau != 0.0:
        raise NotImplementedError("only symmetric laws are sampled")
    draws = params.mu + params.sigma * sample_standard(params.alpha, size, rng)
    return float(draws) if size is None else draws


@dataclass(frozen=True)
class SpectralMeasure:
    """Discrete spectral measure of a symmetric multivariate stable law.

    ``weights[j]`` is the total mass of the symmetric atom pair at
    ``+/- directions[j]`` (half on each sign).  All directions are unit
    vectors; all weights are positive.  ``bias_index``, when set, marks the
    atom contributed by the bias term of a network layer so that downstream
    transforms can strip it exactly.
    """

    alpha: float
    weights: np.ndarray
    directions: np.ndarray
    bias_index: int | None = None

    _UNIT_TOL = 1e-12

    def __post_init__(self):
        if not 0.0 < self.alpha <= 2.0:
            raise ValueError(f"alpha must be in (0, 2], got {self.alpha}")
        w = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        d = np.asarray(self.directions, dtype=np.float64)
        if d.ndim != 2:
            raise ValueError("directions must be a (n_atoms, dimension) array")
        if w.shape != (d.shape[0],):
            raise ValueError("one weight per direction required")
        if w.size and not np.all(w > 0.0):
            raise ValueError("atom weights must be positive")
        if d.size:
            norms = np.linalg.norm(d, axis=1)
            if np.max(np.abs(norms - 1.0)) > self._UNIT_TOL:
                raise ValueError("atom directions must be unit vectors")
        if self.bias_index is not None and not 0 <= self.bias_index < w.shape[0]:
            raise ValueError("bias_index out of range")
        w.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "directions", d)

    @property
    def dimension(self) -> int:
        return self.directions.shape[1]

    @property
    def n_atoms(self) -> int:
        return self.weights.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def bias_mass(self) -> float:
        return 0.0 if self.bias_index is None else float(self.weights[self.bias_index])


def empty_measure(alpha: float, dimension: int) -> SpectralMeasure:
    """The null measure; its law is degenerate at zero."""
    return SpectralMeasure(
        alpha, np.zeros(0), np.zeros((0, dimension)), bias_index=None
    )


def cf_multivariate(measure: SpectralMeasure, t):
    """Characteristic function of the stable law with the given spectral
    measure, evaluated at one probe (d,) or a batch of probes (n, d).

    Returns exp(-sum_j w_j |<t, s_j>|^alpha); real because the measure is
    symmetric.
    """
    arr = np.asarray(t, dtype=np.float64)
    single = arr.ndim == 1
    probes = np.atleast_2d(arr)
    if probes.shape[1] != measure.dimension:
        raise ValueError(
            f"probe dimension {probes.shape[1]} != measure dimension {measure.dimension}"
        )
    if measure.n_atoms == 0:
        out = np.ones(probes.shape[0])
    else:
        expo = np.abs(probes @ measure.directions.T) ** measure.alpha @ measure.weights
        out = np.exp(-expo)
    return float(out[0]) if single else out


def sample_multivariate(
    measure: SpectralMeasure, rng: np.random.Generator, size: int | None = None
) -> np.ndarray:
    """Exact draws from the stable law of a discrete spectral measure.

    Each atom pair contributes an independent symmetric stable coefficient
    scaled by weight^(1/alpha) along its direction; the characteristic
    function of the sum telescopes to :func:`cf_multivariate`.
    """
    n = 1 if size is None else int(size)
    if measure.n_atoms == 0:
        warnings.warn("sampling an empty spectral measure: draws are all zero")
        out = np.zeros((n, measure.dimension))
        return out[0] if size is None else out
    z = sample_standard(measure.alpha, (n, measure.n_atoms), rng)
    scales = measure.weights ** (1.0 / measure.alpha)
    out = (z * scales) @ measure.directions
    return out[0] if size is None else out


def psi_atom(z) -> tuple[np.ndarray, float] | None:
    """Normalize a vector to the unit sphere, returning (direction, norm);
    the zero vector contributes nothing and returns None."""
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    norm = float(np.linalg.norm(z))
    if norm == 0.0:
        return None
    return z / norm, norm


@dataclass(frozen=True)
class ProjectedStableParams:
    """Univariate stable parameters of a one-dimensional projection <u, X>."""

    alpha: float
    sigma: float
    tau: float
    mu: float

    def cf(self, t):
        """Characteristic function; handles the degenerate sigma = 0 case."""
        if self.sigma == 0.0:
            t = np.asarray(t, dtype=np.float64)
            out = np.exp(1j * self.mu * t)
            return complex(out) if out.ndim == 0 else out
        return cf_univariate(
            StableParams(self.alpha, self.sigma, self.tau, self.mu), t
        )


def project_1d(measure: SpectralMeasure, u, alpha: float | None = None) -> ProjectedStableParams:
    """Parameters of the univariate law of <u, X> for X with the given
    spectral measure.

    The skewness and shift functionals are evaluated per symmetric atom pair,
    so they cancel to exactly zero for the pair convention used here; the
    scale is (sum over +/- atoms of mass * |<u, s>|^alpha)^(1/alpha).
    """
    alpha = measure.alpha if alpha is None else float(alpha)
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    if u.shape[0] != measure.dimension:
        raise ValueError(
            f"projection dimension {u.shape[0]} != measure dimension {measure.dimension}"
        )
    if measure.n_atoms == 0:
        return ProjectedStableParams(alpha, 0.0, 0.0, 0.0)
    dots = measure.directions @ u
    half = measure.weights / 2.0
    mag_pos = np.abs(dots) ** alpha
    mag_neg = np.abs(-dots) ** alpha
    sigma_a = float(np.sum(half * (mag_pos + mag_neg)))
    sigma = sigma_a ** (1.0 / alpha)
    if sigma_a == 0.0:
        return ProjectedStableParams(alpha, 0.0, 0.0, 0.0)
    # each pair's two signed terms are identical floats, so they cancel exactly
    tau_num = np.sum(half * (mag_pos * np.sign(dots) + mag_neg * np.sign(-dots)))
    tau = float(tau_num) / sigma_a
    if alpha == 1.0:
        with np.errstate(divide="ignore"):
            logs = np.where(dots != 0.0, np.log(np.abs(np.where(dots != 0.0, dots, 1.0))), 0.0)
        mu = -(2.0 / np.pi) * float(np.sum(half * (dots * logs + (-dots) * logs)))
    else:
        mu = 0.0
    return ProjectedStableParams(alpha, sigma, tau, mu)


def compress_measure(
    measure: SpectralMeasure, target: int, rng: np.random.Generator
) -> SpectralMeasure:
    """Mass-preserving systematic resampling down to ``target`` atoms.

    Atoms are drawn proportionally to weight with a single uniform offset;
    every surviving atom carries total_mass / target, so the expected
    characteristic function is preserved.  A measure with at most ``target``
    atoms is returned unchanged.  The bias tag does not survive resampling.
    """
    if target < 1:
        raise ValueError("target must be >= 1")
    if measure.n_atoms <= target:
        return measure
    total = measure.total_mass
    cum = np.cumsum(measure.weights)
    cum[-1] = total
    points = (np.arange(target) + rng.uniform()) / target * total
    idx = np.minimum(np.searchsorted(cum, points, side="left"), measure.n_atoms - 1)
    weights = np.full(target, total / target)
    return SpectralMeasure(measure.alpha, weights, measure.directions[idx])


def dump_measure(measure: SpectralMeasure) -> str:
    """Serialize to the flat text format: a header with dimension, alpha and
    total mass (plus the bias tag when present), then one atom per line as
    weight followed by the direction components, 17 significant digits."""
    header = (
        f"dimension={measure.dimension} alpha={measure.alpha:.17g} "
        f"total_mass={measure.total_mass:.17g}"
    )
    if measure.bias_index is not None:
        header += f" bias_index={measure.bias_index}"
    lines = [header]
    for w, s in zip(measure.weights, measure.directions):
        lines.append(" ".join(f"{v:.17g}" for v in (w, *s)))
    return "\n".join(lines) + "\n"


def load_measure(text: str) -> SpectralMeasure:
    """Parse the text format written by :func:`dump_measure`."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty measure file")
    fields = dict(tok.split("=", 1) for tok in lines[0].split())
    dimension = int(fields["dimension"])
    alpha = float(fields["alpha"])
    bias_index = int(fields["bias_index"]) if "bias_index" in fields else None
    rows = [np.fromstring(ln, sep=" ") for ln in lines[1:]]
    if rows:
        body = np.vstack(rows)
        if body.shape[1] != dimension + 1:
            raise ValueError("atom line length does not match the header dimension")
        weights, directions = body[:, 0], body[:, 1:]
    else:
        weights, directions = np.zeros(0), np.zeros((0, dimension))
    measure = SpectralMeasure(alpha, weights, directions, bias_index=bias_index)
    total = float(fields["total_mass"])
    if not np.isclose(measure.total_mass, total, rtol=1e-9, atol=1e-12):
        raise ValueError("total mass in header does not match the atom weights")
    return measure


def save_measure(measure: SpectralMeasure, path) -> None:
    with open(path, "w") as fh:
        fh.write(dump_measure(measure))


def read_measure(path) -> SpectralMeasure:
    with open(path) as fh:
        return load_measure(fh.read())
