"""waveanom: anomaly detection toolkit for windowed medical waveform data.

Subsystems:
  tensor / optim   float64 autograd tensors, layer primitives, update rules
  recurrent        LSTM and ConvLSTM cells, sequence unrolling, BPTT
  resampling       exact kNN, SMOTE, Borderline-SMOTE
  features         feature scoring/ranking, window augmentation, scaling
  lockgan          conditional GAN with lock-alternating training
  evaluation       stratified k-fold, confusion matrices, metrics
  stats            one-way ANOVA, F p-values, studentized range, Tukey HSD
  datasets         file formats and synthetic generators
  config/pipeline  run configuration and the end-to-end driver
  cli              command-line entry point
"""

__version__ = "0.1.0"

from .backend import backend_name
from .features import FeatureMatrix
from .lockgan import (LganConfig, LganModel, RecordLayout, classify,
                      load_model, save_model, train_lgan)
from .tensor import Tensor, parameter

__all__ = [
    "FeatureMatrix", "LganConfig", "LganModel", "RecordLayout", "Tensor",
    "backend_name", "classify", "load_model", "parameter", "save_model",
    "train_lgan", "__version__",
]
