from .datasets import DatasetBundle, load_dataset, make_csbm, save_dataset, toy_bundle
from .experiment import ExperimentConfig, RunReport, run_experiment
from .report import emit_report
from .splits import FractionalPolicy, PerClassPolicy, SplitMasks, make_splits

__all__ = [
    "DatasetBundle",
    "ExperimentConfig",
    "FractionalPolicy",
    "PerClassPolicy",
    "RunReport",
    "SplitMasks",
    "emit_report",
    "load_dataset",
    "make_csbm",
    "make_splits",
    "run_experiment",
    "save_dataset",
    "toy_bundle",
]
