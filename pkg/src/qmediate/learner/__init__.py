"""Data preparation and variational training for one architecture arm."""

from .data import Dataset, PreprocessPipeline, fit_preprocess, load_csv, pca_reduce, standardize, stratified_split
from .evaluate import ArmEvaluation, evaluate_arm
from .model import TrainConfig, TrainedModel, adam_step, bce_loss, parameter_shift_gradient, predict_prob, train

__all__ = [
    "ArmEvaluation", "Dataset", "PreprocessPipeline", "TrainConfig", "TrainedModel", "adam_step", "bce_loss",
    "evaluate_arm", "fit_preprocess", "load_csv", "parameter_shift_gradient", "pca_reduce", "predict_prob",
    "standardize", "stratified_split", "train",
]
