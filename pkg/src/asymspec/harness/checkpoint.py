"""Best-validation checkpoints as ``.npz`` archives."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..exceptions import LoadError
from ..model import ModelParams
from ..optim import DiagnosticsRecord
from .experiment import ExperimentConfig, SeedResult
from .splits import SplitMasks


@dataclass
class Checkpoint:
    params: ModelParams
    split: SplitMasks
    config: ExperimentConfig
    records: list[DiagnosticsRecord]
    seed: int
    arm: str
    dataset: str
    best_val_loss: float
    best_iteration: int


def save_checkpoint(path, result: SeedResult, cfg: ExperimentConfig, dataset: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    p = result.params
    meta = {
        "config": cfg.to_dict(),
        "records": [dataclasses.asdict(r) for r in result.records],
        "seed": result.seed,
        "arm": result.arm,
        "dataset": dataset,
        "best_val_loss": result.best_val_loss,
        "best_iteration": result.best_iteration,
    }
    np.savez(
        path,
        theta=p.theta, w1=p.w1, b1=p.b1, w2=p.w2, b2=p.b2,
        train=result.split.train, val=result.split.val, test=result.split.test,
        meta=np.array(json.dumps(meta)),
    )
    return path


def load_checkpoint(path) -> Checkpoint:
    try:
        with np.load(path, allow_pickle=False) as z:
            arrays = {k: z[k] for k in z.files}
    except (OSError, ValueError) as exc:
        raise LoadError(f"{path}: not a readable checkpoint ({exc})") from exc
    required = {"theta", "w1", "b1", "w2", "b2", "train", "val", "test", "meta"}
    missing = required - set(arrays)
    if missing:
        raise LoadError(f"{path}: checkpoint lacks {sorted(missing)}")
    meta = json.loads(str(arrays["meta"]))
    params = ModelParams(*(arrays[k] for k in ("theta", "w1", "b1", "w2", "b2")))
    split = SplitMasks(arrays["train"], arrays["val"], arrays["test"], meta["seed"])
    records = [DiagnosticsRecord(**r) for r in meta["records"]]
    return Checkpoint(
        params, split, ExperimentConfig.from_dict(meta["config"]), records,
        meta["seed"], meta["arm"], meta["dataset"], meta["best_val_loss"], meta["best_iteration"],
    )
