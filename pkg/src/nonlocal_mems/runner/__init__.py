"""Command-line experiment runner: configs, result records, plots."""
from .config import EXPERIMENTS, ExperimentConfig, load_config
from .record import ResultRecord

__all__ = ["EXPERIMENTS", "ExperimentConfig", "ResultRecord", "load_config", "run"]


def run(cfg):
    from .experiments import run as _run

    return _run(cfg)
