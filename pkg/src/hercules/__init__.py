"""Hyperbolic temporal knowledge-graph embeddings on the Poincare ball.

Implements relation-specific curvature scoring (AttH-style) plus
relation x time curvature variants, with a pure-numpy reverse-mode
gradient engine, filtered link-prediction evaluation, and CLI workflows
for training, probing, and analysis.
"""

__version__ = "0.1.0"

from .data import Dataset, load_dataset
from .evaluation import RankReport, evaluate, temporal_probe
from .params import (CurvatureSpec, ModelParams, VocabSizes, count_params,
                     init_params, load_checkpoint, save_checkpoint)
from .training import TrainConfig, TrainResult, train

__all__ = [
    "CurvatureSpec", "Dataset", "ModelParams", "RankReport", "TrainConfig",
    "TrainResult", "VocabSizes", "count_params", "evaluate", "init_params",
    "load_checkpoint", "load_dataset", "save_checkpoint", "temporal_probe",
    "train",
]
