"""Toy-scale learned predictors that plug into the reconstruction harness."""

__version__ = "0.1.0"

from .nets import DirectNet, NormalNet, SparseNet, dual_normal_loss
from .train import NetSpec, train_direct, train_normal, train_sparsenet

__all__ = [
    "DirectNet",
    "NormalNet",
    "SparseNet",
    "NetSpec",
    "dual_normal_loss",
    "train_direct",
    "train_normal",
    "train_sparsenet",
]
