"""Batch command-line entry points.

Subcommands::

    limit      compute and cache the per-layer limit measures
    simulate   finite-channel replica generation into a binary cache
    verify     channel sweep with CF distances and pass/fail checks
    oracle     alpha = 2 Gaussian covariance cross-check
    report     re-emit CSV/plot data from a finished run directory

Every command resolves the configuration file, hashes it, and works inside
``<out>/<hash>/`` so distinct configurations never collide.  The resolved
configuration and the hash are written next to the outputs, wall-clock
timings go to ``run.log``, and CSV files are byte-identical across re-runs
with the same configuration and seed.  The exit code is nonzero iff an
enabled check fails.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .limits import limit_measures, mixture_measure
from .network import load_replicas, sample_replicas, save_replicas
from .stable import cf_multivariate, read_measure, save_measure
from .verify import (
    CSV_HEADER,
    convergence_sweep,
    gaussian_oracle_check,
    generate_probes,
    independence_check,
)

log = logging.getLogger("stableconv.cli")


def _run_dir(cfg: RunConfig, out: str) -> Path:
    run = Path(out) / cfg.config_hash
    run.mkdir(parents=True, exist_ok=True)
    (run / "resolved.ini").write_text(cfg.resolved_text())
    (run / "config_hash.txt").write_text(cfg.config_hash + "\n")
    return run


def _setup_logging(run: Path) -> None:
    root = logging.getLogger("stableconv")
    root.setLevel(logging.INFO)
    for h in list(root.handlers):
        root.removeHandler(h)
    stream = logging.StreamHandler(sys.stderr)
    stream.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root.addHandler(stream)
    fileh = logging.FileHandler(run / "run.log")
    fileh.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root.addHandler(fileh)


def _measure_path(run: Path, layer: int) -> Path:
    d = run / "measures"
    d.mkdir(exist_ok=True)
    return d / f"layer_{layer:02d}.txt"


def cmd_limit(cfg: RunConfig, run: Path) -> int:
    spec = cfg.build_spec()
    measures = limit_measures(spec, cfg.limit_config())
    for layer, measure in enumerate(measures, start=1):
        save_measure(measure, _measure_path(run, layer))
    log.info("cached %d layer measures under %s", len(measures), run / "measures")
    return 0


def cmd_simulate(cfg: RunConfig, run: Path, channels: int | None, replicas: int | None) -> int:
    spec = cfg.build_spec(channels=channels)
    n = cfg.n_replicas if replicas is None else replicas
    reps = sample_replicas(spec, n, n_channels=2, workers=cfg.workers)
    path = run / f"replicas_C{spec.channels}.bin"
    save_replicas(path, reps)
    log.info("wrote %d replicas at C=%d to %s", n, spec.channels, path)
    return 0


def _load_or_compute_target(cfg: RunConfig, run: Path):
    last = _measure_path(run, len(cfg.layers))
    if last.exists():
        log.info("using cached limit measure %s", last)
        return read_measure(last)
    spec = cfg.build_spec()
    measures = limit_measures(spec, cfg.limit_config())
    for layer, measure in enumerate(measures, start=1):
        save_measure(measure, _measure_path(run, layer))
    return measures[-1]


def _write_probe_csv(run: Path, probes, theo) -> None:
    lines = ["probe_index,radius,theoretical_cf"]
    radii = np.linalg.norm(probes.probes, axis=1)
    for i, (r, c) in enumerate(zip(radii, theo)):
        lines.append(f"{i},{r:.12g},{c:.12g}")
    (run / "probes.csv").write_text("\n".join(lines) + "\n")


def cmd_verify(cfg: RunConfig, run: Path) -> int:
    target = _load_or_compute_target(cfg, run)
    spec = cfg.build_spec()
    probes = generate_probes(target, n_probes=cfg.n_probes, seed=cfg.seed)
    theo = cf_multivariate(target, probes.probes)
    _write_probe_csv(run, probes, theo)
    report = convergence_sweep(
        spec,
        cfg.channel_counts,
        cfg.n_replicas,
        cfg.limit_config(),
        probes=probes,
        workers=cfg.workers,
        target=target,
        metadata={"config_hash": cfg.config_hash},
    )
    (run / "sweep.csv").write_text(report.to_csv(timing=cfg.timing_in_csv))
    for row in report.rows:
        log.info(
            "C=%d sup=%.4f mean=%.4f (%.1fs)",
            row.channels,
            row.sup_cf_dist,
            row.mean_cf_dist,
            row.seconds,
        )
    failures = []
    final = report.rows[-1]
    if final.sup_cf_dist >= cfg.max_sup_dist:
        failures.append(
            f"final sup CF distance {final.sup_cf_dist:.4f} >= {cfg.max_sup_dist}"
        )
    if cfg.require_decreasing and len(report.rows) > 1:
        if final.sup_cf_dist >= report.rows[0].sup_cf_dist:
            failures.append("sup CF distance did not decrease over the sweep")
    failures += _independence_from_cache(cfg, run, target)
    for msg in failures:
        log.error("check failed: %s", msg)
    return 1 if failures else 0


def _independence_from_cache(cfg: RunConfig, run: Path, target) -> list[str]:
    """Joint-law checks against a `simulate` replica cache, when one exists
    for the largest swept channel count."""
    cache = run / f"replicas_C{max(cfg.channel_counts)}.bin"
    if not cache.exists():
        return []
    reps = load_replicas(cache)
    if reps.outputs.shape[1] < 2:
        log.warning("%s has a single channel; skipping independence checks", cache)
        return []
    z = [1.0, 1.0]
    pa = generate_probes(target, n_probes=cfg.n_probes, seed=cfg.seed + 1).probes[1:]
    pb = generate_probes(target, n_probes=cfg.n_probes, seed=cfg.seed + 2).probes[1:]
    mix_probes = generate_probes(
        mixture_measure(target, z), n_probes=cfg.n_probes, seed=cfg.seed + 3
    ).probes
    rep = independence_check(
        reps.outputs, reps.biases, target, z, pa, pb, mixture_probes=mix_probes
    )
    lines = [
        "metric,value",
        f"max_factorization_defect,{rep.max_defect:.12g}",
        f"max_control_defect,{rep.max_control_defect:.12g}",
        f"mixture_sup_dist,{rep.mixture_sup:.12g}",
        f"mixture_mean_dist,{rep.mixture_mean:.12g}",
    ]
    (run / "independence.csv").write_text("\n".join(lines) + "\n")
    log.info(
        "independence: factorization=%.4g control=%.4g mixture=%.4g",
        rep.max_defect,
        rep.max_control_defect,
        rep.mixture_sup,
    )
    failures = []
    if rep.max_defect >= cfg.max_factorization_defect:
        failures.append(
            f"factorization defect {rep.max_defect:.4f} >= {cfg.max_factorization_defect}"
        )
    if rep.mixture_sup >= cfg.max_mixture_dist:
        failures.append(
            f"mixture CF distance {rep.mixture_sup:.4f} >= {cfg.max_mixture_dist}"
        )
    return failures


def cmd_oracle(cfg: RunConfig, run: Path) -> int:
    if cfg.alpha != 2.0:
        log.error("the oracle command requires alpha = 2 in the configuration")
        return 2
    spec = cfg.build_spec()
    result = gaussian_oracle_check(spec, cfg.limit_config(cfg.oracle_mc_samples))
    lines = [
        "metric,value",
        f"max_diag_rel_err,{result.max_diag_rel_err:.12g}",
        f"max_offdiag_abs_err,{result.max_offdiag_abs_err:.12g}",
    ]
    (run / "oracle.csv").write_text("\n".join(lines) + "\n")
    log.info("oracle diag rel err %.4g", result.max_diag_rel_err)
    if result.max_diag_rel_err >= cfg.oracle_max_diag_rel_err:
        log.error(
            "check failed: diagonal relative error %.4g >= %.4g",
            result.max_diag_rel_err,
            cfg.oracle_max_diag_rel_err,
        )
        return 1
    return 0


def cmd_report(cfg: RunConfig, run: Path) -> int:
    sweep = run / "sweep.csv"
    if not sweep.exists():
        log.error("no sweep.csv in %s; run `verify` first", run)
        return 2
    lines = sweep.read_text().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        log.error("unexpected sweep.csv schema in %s", run)
        return 2
    plot_lines = ["C,sup_cf_dist,mean_cf_dist"]
    for row in lines[1:]:
        cells = row.split(",")
        plot_lines.append(f"{cells[0]},{cells[3]},{cells[4]}")
    (run / "plot_sweep.csv").write_text("\n".join(plot_lines) + "\n")
    # replica caches round-trip through here so stale files surface early
    for cache in sorted(run.glob("replicas_C*.bin")):
        reps = load_replicas(cache)
        log.info("cache %s: %d replicas", cache.name, reps.n_replicas)
    log.info("wrote %s", run / "plot_sweep.csv")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stableconv",
        description="stable-weight convolutional networks and their infinite-channel limits",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("limit", "compute and cache limit measures layer by layer"),
        ("simulate", "generate finite-channel replicas into a binary cache"),
        ("verify", "channel sweep with CF-distance checks"),
        ("oracle", "alpha=2 Gaussian covariance cross-check"),
        ("report", "emit plot data from a finished run directory"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", "-c", required=True, help="INI configuration file")
        p.add_argument("--out", "-o", default="runs", help="output root directory")
        if name == "simulate":
            p.add_argument("--channels", type=int, default=None)
            p.add_argument("--replicas", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except Exception as exc:  # bad config is a usage error, not a crash
        print(f"error: {exc}", file=sys.stderr)
        return 2
    run = _run_dir(cfg, args.out)
    _setup_logging(run)
    if args.command == "limit":
        return cmd_limit(cfg, run)
    if args.command == "simulate":
        return cmd_simulate(cfg, run, args.channels, args.replicas)
    if args.command == "verify":
        return cmd_verify(cfg, run)
    if args.command == "oracle":
        return cmd_oracle(cfg, run)
    if args.command == "report":
        return cmd_report(cfg, run)
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
