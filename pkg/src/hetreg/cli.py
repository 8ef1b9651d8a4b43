"""Command line interface: estimate one dataset, simulate data, run studies."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .basis import DesignGrid
from .experiments import (
    ExperimentConfig,
    efficiency_study,
    lower_bound_study,
    oracle_study,
    resolve_scale,
    resolve_test_function,
    risk_study,
    write_csv,
)
from .models import NoiseSpec, generate_observations, substream
from .selection import EstimatorOutput, estimate

_STUDIES = {
    "risk": risk_study,
    "oracle": oracle_study,
    "efficiency": efficiency_study,
    "lower-bound": lower_bound_study,
}


def _estimator_output_json(out: EstimatorOutput, grid: DesignGrid) -> dict:
    return {
        "n": grid.n,
        "selected": {"beta": out.selected.beta, "t": out.selected.t},
        "varsigma_hat": out.varsigma_hat,
        "theta_hat": out.coeffs.theta_hat.tolist(),
        "lambda_hat": out.lambda_hat.tolist(),
        "costs": [
            {"beta": a.beta, "t": a.t, "cost": c} for a, c in out.costs.items()
        ],
        "estimate_at_grid": out.estimate(grid.points).tolist(),
    }


def _cmd_estimate(args) -> int:
    data = np.genfromtxt(args.data, delimiter=",", names=True)
    if data.dtype.names is None or "y" not in data.dtype.names:
        raise SystemExit("dataset must be a CSV with a 'y' column")
    y = np.asarray(data["y"], dtype=float)
    grid = DesignGrid(len(y))
    cfg_rho = args.rho
    from .weights import default_sequences

    seqs = default_sequences(grid.n, rho=cfg_rho)
    out = estimate(y, grid, seqs)
    payload = _estimator_output_json(out, grid)
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_simulate(args) -> int:
    cfg = _load_config(args)
    S, ball, _ = resolve_test_function(cfg)
    scale = resolve_scale(cfg.scale)
    noise = NoiseSpec(**cfg.noise_menu[0])
    n = cfg.n_grid[0]
    grid = DesignGrid(n)
    rng = substream(cfg.seed, 1, n, 0, 0)
    y = generate_observations(S, scale, noise, grid, rng)
    s_true = S.on_grid(grid)
    out = args.out or "dataset.csv"
    with open(out, "w", newline="\n") as fh:
        fh.write("x,y,s_true\n")
        for x, yy, ss in zip(grid.points, y, s_true):
            fh.write(f"{float(x)!r},{float(yy)!r},{float(ss)!r}\n")
    print(f"wrote {n} observations to {out}")
    return 0


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    env_seed = os.environ.get("HETREG_SEED")
    env_workers = os.environ.get("HETREG_WORKERS")
    if env_seed is not None:
        cfg.seed = int(env_seed)
    if env_workers is not None:
        cfg.workers = int(env_workers)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "reps", None) is not None:
        cfg.reps = args.reps
    if getattr(args, "workers", None) is not None:
        cfg.workers = args.workers
    if getattr(args, "out", None):
        cfg.output_path = args.out
    return cfg


def _cmd_study(name: str, args) -> int:
    cfg = _load_config(args)
    rows, summary, losses = _STUDIES[name](cfg)
    out_dir = Path(cfg.output_path)
    stem = name.replace("-", "_")
    write_csv(rows, out_dir / f"{stem}.csv")
    with open(out_dir / f"{stem}.json", "w", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if losses is not None:
        with open(out_dir / f"{stem}_losses.csv", "w", newline="\n") as fh:
            fh.write("estimator,noise,n,rep,loss_empiric,loss_l2\n")
            for est, noise, n, rep, l_n, l_2 in losses:
                fh.write(f"{est},{noise},{n},{rep},{float(l_n)!r},{float(l_2)!r}\n")
    print(f"wrote {out_dir / (stem + '.csv')} and {out_dir / (stem + '.json')}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hetreg",
        description="Adaptive estimation for heteroscedastic nonparametric regression",
    )
    sub = p.add_subparsers(dest="command", required=True)

    pe = sub.add_parser("estimate", help="run the adaptive estimator on one CSV dataset")
    pe.add_argument("--data", required=True, help="CSV with a 'y' column (odd length)")
    pe.add_argument("--out", help="output JSON path (default stdout)")
    pe.add_argument("--rho", type=float, help="force the penalty coefficient")

    ps = sub.add_parser("simulate", help="emit a synthetic dataset CSV")
    ps.add_argument("--config", help="experiment config JSON")
    ps.add_argument("--out", help="output CSV path")
    ps.add_argument("--seed", type=int)
    ps.add_argument("--reps", type=int)
    ps.add_argument("--workers", type=int)

    for name in _STUDIES:
        q = sub.add_parser(name, help=f"run the {name} study (config JSON -> CSV + JSON)")
        q.add_argument("--config", help="experiment config JSON")
        q.add_argument("--out", help="output directory")
        q.add_argument("--seed", type=int)
        q.add_argument("--reps", type=int)
        q.add_argument("--workers", type=int)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "estimate":
        return _cmd_estimate(args)
    if args.command == "simulate":
        return _cmd_simulate(args)
    return _cmd_study(args.command, args)


if __name__ == "__main__":
    raise SystemExit(main())
