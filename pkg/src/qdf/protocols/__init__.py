"""Simulations of coherent channel-construction, decoupling and stabilization protocols."""
from .feedback_dd import FbddConfig, fbdd_check, fbdd_run
from .lloyd_viola import (
    AveragingSchedule,
    RankTwoTarget,
    lv_nested_rank3,
    lv_noisy_ancilla,
    lv_polar_extract,
    lv_simulate,
)
from .splitting import SplitConfig, split_build, split_run

__all__ = [
    "AveragingSchedule",
    "FbddConfig",
    "RankTwoTarget",
    "SplitConfig",
    "fbdd_check",
    "fbdd_run",
    "lv_nested_rank3",
    "lv_noisy_ancilla",
    "lv_polar_extract",
    "lv_simulate",
    "split_build",
    "split_run",
]
