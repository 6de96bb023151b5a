"""Command-line entry point: ``asymspec run|quadbench|audit|inspect|convert``.

Exit codes: 0 success, 1 configuration or input error, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from ..exceptions import AsymSpecError, ConfigError, DomainError, NumericError
from ..model import GNNObjective
from ..optim import TrainResult
from .. import hessian, quadbench
from .checkpoint import load_checkpoint, save_checkpoint
from .convert import FORMATS, convert
from .datasets import load_dataset, save_dataset
from .experiment import ExperimentConfig, delta, grid_configs, load_config, search_grid, prepare, run_experiment
from .report import emit_report

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

logger = logging.getLogger("asymspec")


def _build_config(args) -> tuple[ExperimentConfig, dict | None]:
    grid = None
    if args.config:
        cfg, grid = load_config(args.config)
        d = cfg.to_dict()
    else:
        d = ExperimentConfig().to_dict()
    if args.model:
        d["model"] = args.model
    if args.optimizer:
        d["optimizer"] = args.optimizer
    if args.seeds is not None:
        if args.seeds < 1:
            raise ConfigError("--seeds must be >= 1")
        d["seeds"] = list(range(args.seeds))
    if args.asym:
        d["arms"] = {"on": ["AS"], "off": ["S"], "both": ["S", "AS"]}[args.asym]
    if args.t_max is not None:
        d["t_max"] = args.t_max
    if args.diagnostics_every is not None:
        d["diagnostics_every"] = args.diagnostics_every
    cfg = ExperimentConfig.from_dict(d)
    if args.grid:
        grid = search_grid(cfg.model)
    return cfg, grid


def _run_one(cfg, data, out: Path, save_ckpt: bool) -> int:
    reports = run_experiment(cfg, data)
    emit_report(reports, out, cfg, data.stats())
    if save_ckpt:
        for rep in reports.values():
            for r in rep.seeds:
                if r.params is not None and r.best_iteration >= 0:
                    save_checkpoint(out / "checkpoints" / f"seed{r.seed}_{r.arm}.npz", r, cfg, data.name)
    for arm, rep in reports.items():
        print(f"{data.name}\t{cfg.model}\t{arm}\t{rep.cell()}\tdiverged={rep.n_diverged}")
    if len(reports) == 2:
        print(f"delta\t{delta(reports):+.2f}")
    if any(not rep.accuracies for rep in reports.values()):
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_run(args) -> int:
    cfg, grid = _build_config(args)
    data = load_dataset(args.dataset)
    out = Path(args.out)
    if not grid:
        return _run_one(cfg, data, out, args.save_checkpoints)
    configs = grid_configs(cfg, grid)
    print(f"grid: {len(configs)} configurations")
    index, status = [], EXIT_OK
    for i, c in enumerate(configs):
        sub = out / f"grid_{i:05d}"
        status = max(status, _run_one(c, data, sub, args.save_checkpoints))
        summary = json.loads((sub / "summary.json").read_text())
        index.append({"dir": sub.name, "config": c.to_dict(), "arms": summary["arms"], "delta": summary["delta"]})
    (out / "grid_index.json").write_text(json.dumps(index, indent=2) + "\n")
    return status


def cmd_quadbench(args) -> int:
    rng = np.random.default_rng(args.seed)
    trials = quadbench.random_theorem_trials(args.trials, seed=args.seed)
    its = [it for t in trials for it in t.iterations]
    met = [it for it in its if it.mild_scaling and it.proportional_gpnr]
    holds = sum(it.theorem_holds for it in met)
    idents = [it.identity_error for it in its if it.identity_error is not None]
    n_valid = n_ok = 0
    for i in range(max(1, args.trials // 100)):
        q = quadbench.synth_quadratic(
            int(rng.integers(1, 13)), int(rng.integers(1, 37)), *(10.0 ** rng.uniform(-2, 2, size=2)),
            float(rng.uniform(0, 0.9)), seed=int(rng.integers(2**31)),
        )
        rep = quadbench.gpnr_bound_trial(q, 0.01 * float(np.linalg.norm(q.psi_star)), 100, seed=i)
        n_valid += rep.n_valid
        n_ok += rep.n_satisfied
    summary = {
        "trials": args.trials,
        "iterations": len(its),
        "hypotheses_met": len(met),
        "theorem_holds_when_met": holds,
        "diverged_trials": sum(t.diverged for t in trials),
        "max_identity_error": max(idents) if idents else None,
        "gpnr_bound_points": n_valid,
        "gpnr_bound_satisfied": n_ok,
        "hypothesis_pairing": "dominant block against the other block at the same iterate",
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "quadbench.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    return EXIT_OK if holds == len(met) and n_ok == n_valid else EXIT_NUMERIC


def cmd_audit(args) -> int:
    ck = load_checkpoint(args.checkpoint)
    data = load_dataset(args.dataset)
    cfg = ck.config
    spec, m, x = prepare(cfg, data)
    obj = GNNObjective(spec, m, x, data.graph.labels, ck.split.train, ck.split.val)
    trained = TrainResult(ck.params, ck.best_val_loss, ck.best_iteration, ck.records)
    rep = hessian.assumption_audit(
        trained, obj.loss_and_grad, noise_scale=args.noise_scale, seed=args.seed,
        eps=cfg.hvp_eps, tol=args.tol, max_iter=args.max_iter,
    )
    text = json.dumps(rep.as_dict(), indent=2, default=float)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_inspect(args) -> int:
    data = load_dataset(args.dataset)
    print(data.stats_row())
    return EXIT_OK


def cmd_convert(args) -> int:
    bundle = convert(args.format, args.src, args.name)
    save_dataset(bundle, args.out)
    print(bundle.stats_row())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="asymspec", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="train S and/or AS arms over seeds")
    r.add_argument("--dataset", required=True)
    r.add_argument("--model")
    r.add_argument("--optimizer", choices=("gd", "adam"))
    r.add_argument("--asym", choices=("on", "off", "both"))
    r.add_argument("--seeds", type=int)
    r.add_argument("--config")
    r.add_argument("--out", required=True)
    r.add_argument("--grid", action="store_true", help="enumerate the built-in hyperparameter search ranges")
    r.add_argument("--t-max", type=int, dest="t_max")
    r.add_argument("--diagnostics-every", type=int, dest="diagnostics_every")
    r.add_argument("--save-checkpoints", action="store_true")
    r.set_defaults(func=cmd_run)

    q = sub.add_parser("quadbench", help="theorem and GPNR-bound trials on synthetic quadratics")
    q.add_argument("--trials", type=int, default=1000)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_quadbench)

    a = sub.add_parser("audit", help="assumption audit at a saved checkpoint")
    a.add_argument("--checkpoint", required=True)
    a.add_argument("--dataset", required=True)
    a.add_argument("--noise-scale", type=float, default=0.1, dest="noise_scale")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--tol", type=float, default=1e-4)
    a.add_argument("--max-iter", type=int, default=500, dest="max_iter")
    a.add_argument("--out")
    a.set_defaults(func=cmd_audit)

    i = sub.add_parser("inspect", help="print dataset statistics")
    i.add_argument("--dataset", required=True)
    i.set_defaults(func=cmd_inspect)

    c = sub.add_parser("convert", help="convert a public dataset dump to the bundle format")
    c.add_argument("--format", required=True, choices=FORMATS)
    c.add_argument("--src", required=True)
    c.add_argument("--name", required=True)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_convert)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (NumericError, DomainError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (AsymSpecError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
