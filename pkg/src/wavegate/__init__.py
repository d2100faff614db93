"""Wavelet sub-signal gating for denoising quasi-periodic physiological signals.

A noisy window is split by a multi-level fast wavelet transform into one
sub-signal per coefficient band; a small feedforward network predicts a
weight in (0, 1) for each band and the denoised window is their weighted sum.
"""

__version__ = "0.1.0"

from .denoiser import (DenoiserModel, TrainConfig, TrainReport, binary_oracle,
                       denoise, loss_grad_wrt_a, mse_loss, reconstruct,
                       relaxed_oracle, train)
from .errors import DataError, MaxLevelWarning, NumericError
from .metrics import EvalSummary, evaluate, mse, psnr
from .noise import NoiseSpec, corrupt
from .wavelet import (CoefficientSet, FilterBank, SubsignalMatrix,
                      daubechies_filters, dwt_step, idwt_step, max_level,
                      subsignal_matrix, wavedec, waverec)

__all__ = [
    "CoefficientSet", "DataError", "DenoiserModel", "EvalSummary", "FilterBank",
    "MaxLevelWarning", "NoiseSpec", "NumericError", "SubsignalMatrix",
    "TrainConfig", "TrainReport", "binary_oracle", "corrupt",
    "daubechies_filters", "denoise", "dwt_step", "evaluate", "idwt_step",
    "loss_grad_wrt_a", "max_level", "mse", "mse_loss", "psnr", "reconstruct",
    "relaxed_oracle", "subsignal_matrix", "train", "wavedec", "waverec",
]
