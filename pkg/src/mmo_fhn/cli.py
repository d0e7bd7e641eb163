"""Command-line front end: ``mmo-fhn <command> --config FILE [--seed S] [--out DIR] [--threads N]``.

Exit codes: 0 success, 2 configuration error, 3 simulation error,
4 failed oracle check.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from . import _kernels as K
from .config import ExperimentConfig, check_positive, load_config
from .core import first_integral, original_to_scaled, scaled_to_original
from .errors import ConfigError, FhnError, InsufficientTail
from .markov import estimate_kernel
from .oracle import mc_checks
from .poincare import default_chart, n_histogram, run_spike_train
from .sde import SimConfig, simulate_original, simulate_scaled
from .stats import (
    SweepPoint,
    mgf_pole_lambda0,
    n_distribution,
    phi_spike_prob,
    summary_curves,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CHECK = 0, 2, 3, 4


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _threads(args, cfg: ExperimentConfig) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("MMO_FHN_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"MMO_FHN_THREADS must be an integer, got {env!r}") from None
    return max(1, int(cfg.get("threads", 1)))


def _seed(args, cfg):
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    if seed < 0 or seed >= 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return seed


def _chart(cfg: ExperimentConfig):
    return default_chart(cfg.derived, **cfg.chart_kwargs())


# ---------------------------------------------------------------- simulate

def cmd_simulate(cfg: ExperimentConfig, seed: int, out: Path, threads: int) -> int:
    d = cfg.derived
    p = cfg.model
    frame = cfg.get("frame", "original")
    t_max = check_positive(cfg, "t_max", 10.0)
    every = int(cfg.get("record_every", 8))
    if frame == "original":
        dt = check_positive(cfg, "dt_original", p.eps / 20.0)
        x0, y0 = cfg.get("x0", -1.0), cfg.get("y0", 0.0)
        path = simulate_original(p, x0, y0, SimConfig(dt=dt, t_max=t_max, seed=seed, frame="original",
                                                      record_every=every))
        x, y = path.states[:, 0], path.states[:, 1]
        xi, z = original_to_scaled(x, y, d)
        t = path.times
    elif frame == "scaled":
        dt = check_positive(cfg, "dt", 1e-4)
        xi0, z0 = cfg.get("xi0", -1.0), cfg.get("z0", 0.3)
        path = simulate_scaled(d, xi0, z0, SimConfig(dt=dt, t_max=t_max, seed=seed, frame="scaled",
                                                     record_every=every))
        xi, z = path.states[:, 0], path.states[:, 1]
        x, y = scaled_to_original(xi, z, d)
        t = path.times
    else:
        raise ConfigError("frame must be 'original' or 'scaled'")
    q = first_integral(xi, z)
    write_csv(out / "path.csv", ["t", "x", "y", "xi", "z", "Q"], zip(t, x, y, xi, z, q))

    chart = _chart(cfg)
    S = np.zeros(K.N_SF)
    I = np.zeros(K.N_SI, dtype=np.int64)
    pts = np.column_stack([xi, z])
    # a start outside D is treated as a post-spike state
    I[K.I_ARMED] = 1
    I[K.I_PHASE] = K.PH_WAIT_F if chart.inside(pts[0, 0], pts[0, 1]) else K.PH_EXCURSION
    idx, evs, rs = K.scan_scaled_events(pts, np.ascontiguousarray(x), S, I, chart.to_array())
    write_csv(out / "events.csv", ["t", "event", "r"],
              ((t[i], K.EVENT_NAMES[int(e)], r) for i, e, r in zip(idx, evs, rs)))
    return EXIT_OK


# ---------------------------------------------------------------- histogram / sweep

def _train(cfg: ExperimentConfig, seed: int, threads: int):
    n_spikes = cfg.get("n_spikes", 1000)
    if n_spikes < 1:
        raise ConfigError("n_spikes must be >= 1")
    d = cfg.derived
    return run_spike_train(d, _chart(cfg), n_spikes, seed, dt_scaled=cfg.get("dt", 1e-4),
                           dt_original=cfg.get("dt_original"), n_chains=cfg.get("n_chains", 1),
                           max_saos=cfg.get("max_saos"), threads=threads)


def _kernel(cfg: ExperimentConfig, seed: int, threads: int):
    return estimate_kernel(cfg.derived, _chart(cfg), n_bins=cfg.get("n_bins", 64),
                           samples_per_bin=cfg.get("samples_per_bin", 500), master_seed=seed,
                           dt=cfg.get("dt", 1e-4), t_max=cfg.get("t_max_once", 1000.0),
                           n_boot=cfg.get("n_boot", 100), threads=threads)


def cmd_histogram(cfg: ExperimentConfig, seed: int, out: Path, threads: int) -> int:
    if cfg.get("n_spikes", 1000) < 1:
        raise ConfigError("n_spikes must be >= 1")
    d = cfg.derived
    train = _train(cfg, seed, threads)
    ns = train.N
    dist = n_distribution(ns)
    total = dist.total
    write_csv(out / "histogram.csv", ["N", "count", "fraction"],
              ((n, c, c / total) for n, c in n_histogram(ns).items()))
    try:
        lam_mgf = mgf_pole_lambda0(dist)
    except InsufficientTail:
        lam_mgf = float("nan")
    rows = [
        ("n_spikes", total),
        ("censored", int(train.censored.sum())),
        ("p_n1", dist.p1),
        ("p_n1_se", dist.p1_se),
        ("mean_n", dist.mean),
        ("mean_n_se", dist.mean_se),
        ("lambda0_mgf", lam_mgf),
    ]
    if cfg.get("kernel", False):
        k = _kernel(cfg, seed, threads)
        rows += [("lambda0_kernel", k.lambda0), ("lambda0_kernel_se", k.lambda0_se)]
    rows += [("phi_prediction", phi_spike_prob(d) if d.sigma_t > 0 else float("nan")),
             ("mu_t", d.mu_t), ("sigma_t", d.sigma_t), ("eps", d.eps)]
    write_csv(out / "summary.csv", ["quantity", "value"], rows)
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig, seed: int, out: Path, threads: int) -> int:
    mus = cfg.get("mu_t_list")
    if not mus:
        raise ConfigError("sweep needs mu_t_list")
    points = []
    for i, mu in enumerate(mus):
        c = cfg.with_mu_t(mu)
        train = _train(c, seed + i, threads)
        lam = lam_se = None
        if cfg.get("kernel", False):
            k = _kernel(c, seed + i, threads)
            lam, lam_se = k.lambda0, k.lambda0_se
        points.append(SweepPoint(c.derived, train.N, lam, lam_se))
    rows = summary_curves(points, min_spikes=min(200, cfg.get("n_spikes", 1000)))
    write_csv(out / "sweep.csv",
              ["mu_t", "mu_over_sigma", "p_n1", "p_n1_se", "inv_mean_n", "inv_mean_n_se",
               "one_minus_lambda0", "one_minus_lambda0_se", "phi_prediction"],
              ((mu, r.ratio, r.p1, r.p1_se, r.inv_mean, r.inv_mean_se, r.one_minus_lambda0,
                r.one_minus_lambda0_se, r.phi) for mu, r in zip(mus, rows)))
    return EXIT_OK


# ---------------------------------------------------------------- kernel

def cmd_kernel(cfg: ExperimentConfig, seed: int, out: Path, threads: int) -> int:
    k = _kernel(cfg, seed, threads)
    n = k.n_bins
    e = k.bin_edges
    write_csv(out / "kernel.csv", ["bin", "r_lo", "r_hi"] + [f"to_{j}" for j in range(n)],
              ([i, e[i], e[i + 1], *k.matrix[i]] for i in range(n)))
    write_csv(out / "eigen.csv", ["bin", "r_lo", "r_hi", "pi0", "h0", "row_mass", "samples", "horizon"],
              ((i, e[i], e[i + 1], k.pi0[i], k.h0[i], k.row_mass[i], k.counts[i], k.horizon_counts[i])
               for i in range(n)))
    write_csv(out / "lambda0.csv", ["lambda0", "lambda0_se"], [(k.lambda0, k.lambda0_se)])
    return EXIT_OK


# ---------------------------------------------------------------- oracle-check

def cmd_oracle_check(cfg: ExperimentConfig, seed: int, out: Path, threads: int) -> int:
    d = cfg.derived
    if not d.sigma_t > 0:
        raise ConfigError("oracle-check needs sigma_t > 0")
    res = mc_checks(d, L=check_positive(cfg, "L", 1.5), z0=cfg.get("z_lin", 0.0),
                    H_values=tuple(cfg.get("H_list", [0.0, 0.01])), n_paths=cfg.get("n_paths", 100_000),
                    dt=cfg.get("dt_linear", 1e-3), master_seed=seed)
    write_csv(out / "oracle_report.csv", ["check", "observed", "expected", "tolerance", "passed"],
              ((r.name, r.observed, r.expected, r.tolerance, r.passed) for r in res))
    failed = [r for r in res if not r.passed]
    if failed:
        for r in failed:
            print(f"FAILED {r.name}: observed {r.observed:.6g}, expected {r.expected:.6g} "
                  f"(tolerance {r.tolerance:.3g})", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "histogram": cmd_histogram,
    "sweep": cmd_sweep,
    "kernel": cmd_kernel,
    "oracle-check": cmd_oracle_check,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mmo-fhn", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="flat key = value configuration file")
        sp.add_argument("--seed", type=int, default=None, help="master seed (unsigned 64-bit)")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--threads", type=int, default=None, help="worker threads (default: MMO_FHN_THREADS or 1)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = _seed(args, cfg)
        threads = _threads(args, cfg)
        out = Path(args.out if args.out is not None else cfg.get("out", "."))
        out.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, seed, out, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FhnError, FloatingPointError) as exc:
        print(f"simulation error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
