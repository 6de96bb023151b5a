"""Persisting experiment results: CSV rows, a JSON summary, SVG traces."""

from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import math
from pathlib import Path

import numpy as np

from .. import __version__
from ..exceptions import AsymSpecError
from .experiment import ExperimentConfig, RunReport, delta
from .svg import line_chart

CSV_FIELDS = ("seed", "arm", "test_acc", "best_val_loss", "best_iteration", "n_iterations", "diverged")


class ReportError(AsymSpecError, OSError):
    pass


def _json_num(v):
    return v if v is None or math.isfinite(v) else None


def results_csv(reports: dict[str, RunReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for rep in reports.values():
        for r in rep.seeds:
            w.writerow([
                r.seed,
                r.arm,
                "" if r.test_acc is None else f"{r.test_acc:.2f}",
                f"{r.best_val_loss:.10g}",
                r.best_iteration,
                r.n_iterations,
                int(r.diverged),
            ])
    return buf.getvalue()


def summary_dict(reports: dict[str, RunReport], cfg: ExperimentConfig | None = None, dataset: dict | None = None) -> dict:
    arms = {
        arm: {
            "mean": _json_num(rep.mean),
            "std": _json_num(rep.std),
            "cell": rep.cell(),
            "n_seeds": len(rep.seeds),
            "n_diverged": rep.n_diverged,
            "accuracies": rep.accuracies,
            "wall_clock_s": rep.wall_clock,
        }
        for arm, rep in reports.items()
    }
    return {
        "arms": arms,
        "delta": _json_num(delta(reports)),
        "std_estimator": "unbiased (ddof=1)",
        "accuracy_units": "percent",
        "split_note": "splits are re-drawn per seed; both arms of a seed share splits, initial parameters and dropout draws",
        "config": cfg.to_dict() if cfg is not None else None,
        "dataset": dataset,
        "code_version": __version__,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }


def _mean_trace(rep: RunReport, attr: str) -> tuple[list[float], list[float]]:
    per_it: dict[int, list[float]] = {}
    for r in rep.seeds:
        for rec in r.records:
            v = getattr(rec, attr)
            if v is not None and math.isfinite(v):
                per_it.setdefault(rec.iteration, []).append(v)
    its = sorted(per_it)
    return [float(i) for i in its], [float(np.mean(per_it[i])) for i in its]


def _alpha_trace(rep: RunReport) -> tuple[list[float], list[float]]:
    per_it: dict[int, list[float]] = {}
    for r in rep.seeds:
        for rec in r.records:
            if rec.lambda_theta is not None and rec.lambda_w not in (None, 0.0):
                per_it.setdefault(rec.iteration, []).append(rec.lambda_theta / rec.lambda_w)
    its = sorted(per_it)
    return [float(i) for i in its], [float(np.mean(per_it[i])) for i in its]


def emit_report(
    reports: dict[str, RunReport],
    out_dir,
    cfg: ExperimentConfig | None = None,
    dataset: dict | None = None,
) -> list[Path]:
    """Write ``results.csv``, ``summary.json`` and, when traces exist, SVG plots."""
    out = Path(out_dir)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        p = out / "results.csv"
        p.write_text(results_csv(reports))
        written.append(p)
        p = out / "summary.json"
        p.write_text(json.dumps(summary_dict(reports, cfg, dataset), indent=2) + "\n")
        written.append(p)

        has_records = any(r.records for rep in reports.values() for r in rep.seeds)
        if has_records:
            series = {}
            for arm, rep in reports.items():
                series[f"{arm} rho_theta"] = _mean_trace(rep, "rho_theta")
                series[f"{arm} rho_w"] = _mean_trace(rep, "rho_w")
            p = out / "gpnr_trace.svg"
            p.write_text(line_chart(series, "GPNR (mean over seeds)", "iteration", "rho", log_y=True))
            written.append(p)
        alpha = {f"{arm} alpha": _alpha_trace(rep) for arm, rep in reports.items()}
        alpha = {k: v for k, v in alpha.items() if v[0]}
        if alpha:
            p = out / "eigen_ratio_trace.svg"
            p.write_text(line_chart(alpha, "lambda_theta / lambda_w (mean over seeds)", "iteration", "alpha", log_y=True))
            written.append(p)
    except OSError as exc:
        raise ReportError(f"cannot write report to {exc.filename or out}: {exc.strerror}") from exc
    return written
