"""Command-line entry point: ``nyv <command> [--config FILE] [--set key=value ...]``.

Exit codes: 0 success, 2 invalid configuration, 3 numerical divergence, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import experiments as ex
from .averaged import write_regularity
from .config import COMMANDS, ConfigError, load_config, parse_assignments
from .feasibility import feasibility_report
from .noise import ensemble_quantiles, sample_lfsm_batch, write_ensemble_csv
from .solver import BlowUpError, DivergenceError, InvarianceError, residuals, write_solution

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 2, 3, 4

FLAG_KEYS = {"alpha": "alpha", "hurst": "hurst", "nt": "n_t", "seed": "seed_base",
             "samples": "samples"}


def _rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                         for v in r])


def _summary(path, d):
    with open(path, "w") as fh:
        for k, v in d.items():
            fh.write(f"{k} = {v}\n")


# Each runner writes its artefacts into ``out`` and returns (file names, summary dict).

def run_simulate(cfg, out):
    pb, sol = ex.simulate(cfg)
    write_solution(sol, out)
    res = residuals(pb, sol)
    summ = {"status": sol.status, "windows": len(sol.windows),
            "max_contraction": max(d.contraction_max for d in sol.diagnostics),
            "max_glue_gap": max(sol.glue_gaps, default=0.0),
            "max_residual": float(res.max())}
    _summary(out / "summary.txt", summ)
    names = ["solution_manifest.csv", "diagnostics.csv", "summary.txt"]
    names += [f"u_{k:03d}.nyvf" for k in range(len(sol.out_index))]
    return names, summ


def run_regularity(cfg, out):
    r = ex.regularity_ensemble(cfg)
    summ = {"gamma_hat": r.gamma_hat, "gain_hat": r.gain_hat, "kappa_eval": r.kappa_eval,
            "samples": cfg.samples}
    write_regularity(out / "regularity.csv", out / "summary.txt",
                     zip(r.gaps, r.mean_norms), summ)
    return ["regularity.csv", "summary.txt"], summ


def run_tails(cfg, out):
    rep = ex.tails(cfg)
    xs = np.sort(rep.ratios)
    surv = 1.0 - np.arange(xs.size) / xs.size
    _rows(out / "tails.csv", ["ratio", "survival"], zip(xs, surv))
    summ = {"slope": rep.slope, "intercept": rep.intercept, "r2": rep.r2,
            **{f"q{q}": v for q, v in rep.quantiles.items()}}
    _summary(out / "summary.txt", summ)
    return ["tails.csv", "summary.txt"], summ


def run_convergence(cfg, out):
    _, rep = ex.sewing_convergence(cfg)
    rep.to_csv(out / "convergence.csv")
    summ = {"rate": rep.rate, "levels": len(rep.increments)}
    _summary(out / "summary.txt", summ)
    return ["convergence.csv", "summary.txt"], summ


def run_stability(cfg, out):
    rows = ex.stability(cfg)
    _rows(out / "stability.csv", ["width", "averaged_error", "solution_error", "ratio"],
          [(r.width, r.averaged_error, r.solution_error, r.ratio) for r in rows])
    ratios = np.array([r.ratio for r in rows])
    spread = ratios / np.median(ratios)
    summ = {"spread_min": float(spread.min()), "spread_max": float(spread.max())}
    _summary(out / "summary.txt", summ)
    return ["stability.csv", "summary.txt"], summ


def run_verify_ops(cfg, out):
    ns = (256, 512, 1024)
    reports, stab = ex.kernel_refinement(ns, cfg.beta, cfg.vartheta, cfg.samples,
                                         cfg.seeds()["noise"])
    names = []
    for n, rep in zip(ns, reports):
        rep.to_csv(out / f"kernel_n{n}.csv")
        names.append(f"kernel_n{n}.csv")
    summ = {"worst_max_over_median": max(stab.values())}
    _summary(out / "summary.txt", summ)
    return names + ["summary.txt"], summ


def run_feasibility(cfg, out):
    v = feasibility_report(cfg.vartheta, cfg.hurst, cfg.kappa_in)
    summ = {"threshold": v.threshold, "admissible": v.admissible, "regime": v.regime}
    (out / "feasibility.txt").write_text(v.describe() + "\n")
    return ["feasibility.txt"], summ


def run_lfsm(cfg, out):
    paths = sample_lfsm_batch(cfg.alpha, cfg.hurst, cfg.horizon_t, cfg.n_t, cfg.samples,
                              cfg.seeds()["path"], cfg.tail_vmax or None)
    t = np.linspace(0.0, cfg.horizon_t, cfg.n_t)
    idx = [(cfg.n_t - 1) >> k for k in range(4, -1, -1)]
    rows = ensemble_quantiles({t[i]: np.abs(paths[:, i]) for i in idx}, (0.5, 0.9, 0.99))
    write_ensemble_csv(out / "ensemble.csv", rows)
    q90 = np.array([np.quantile(np.abs(paths[:, i]), 0.9) for i in idx])
    slope = float(np.polyfit(np.log(t[idx]), np.log(q90), 1)[0])
    summ = {"quantile_exponent": slope, "hurst": cfg.hurst}
    _summary(out / "summary.txt", summ)
    return ["ensemble.csv", "summary.txt"], summ


RUNNERS = {"simulate": run_simulate, "regularity": run_regularity, "tails": run_tails,
           "convergence": run_convergence, "stability": run_stability,
           "verify-ops": run_verify_ops, "feasibility": run_feasibility, "lfsm": run_lfsm}


def build_parser():
    p = argparse.ArgumentParser(prog="nyv", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="key = value file, or a manifest.json to replay")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--alpha", type=float)
    p.add_argument("--hurst", type=float)
    p.add_argument("--nt", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int)
    return p


def resolve_config(args):
    cfg = ex.config_for(args.command)
    if args.config:
        cfg = load_config(args.config, cfg)
    cfg = parse_assignments(args.set, cfg)
    for flag, key in FLAG_KEYS.items():
        v = getattr(args, flag)
        if v is not None:
            setattr(cfg, key, v)
    cfg.command = args.command
    return cfg.validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.txt").write_text(cfg.to_text())
        names, summ = RUNNERS[cfg.command](cfg, out)
        manifest = {"command": cfg.command, "version": __version__, "config": cfg.as_dict(),
                    "seeds": cfg.seeds(), "config_hash": cfg.digest(),
                    "artifacts": ["config.txt"] + names,
                    "summary": {k: (v if isinstance(v, (str, bool, int)) else float(v))
                                for k, v in summ.items()}}
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except (DivergenceError, InvarianceError, BlowUpError) as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for k, v in summ.items():
        print(f"{k} = {v}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
