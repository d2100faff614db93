"""MSE / PSNR and test-set evaluation.

PSNR uses a unit peak, ``10*log10(1/mse)``, which is meaningful because all
windows are normalized to [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .denoiser import DenoiserModel, reconstruct

CONSISTENCY_TOL = 1e-9


def mse(x, xhat) -> float:
    x = np.asarray(x, dtype=np.float64)
    xhat = np.asarray(xhat, dtype=np.float64)
    if x.shape != xhat.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {xhat.shape}")
    return float(np.mean((x - xhat) ** 2))


def psnr(mse_value: float) -> float:
    """Unit-peak PSNR in dB; ``inf`` for a perfect match."""
    if mse_value < 0:
        raise ValueError(f"MSE cannot be negative, got {mse_value}")
    if mse_value == 0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse_value)


def reduction_percent(mse_noisy: float, mse_denoised: float) -> float:
    if mse_noisy == 0:
        return 0.0 if mse_denoised == 0 else -math.inf
    return 100.0 * (1.0 - mse_denoised / mse_noisy)


@dataclass
class EvalRow:
    n_windows: int
    mse_noisy: float
    mse_denoised: float
    mse_baseline: float
    psnr_noisy: float = 0.0
    psnr_denoised: float = 0.0
    reduction_percent: float = 0.0

    def __post_init__(self):
        self.psnr_noisy = psnr(self.mse_noisy)
        self.psnr_denoised = psnr(self.mse_denoised)
        self.reduction_percent = reduction_percent(self.mse_noisy, self.mse_denoised)


@dataclass
class EvalSummary(EvalRow):
    breakdown: dict = field(default_factory=dict)

    def check(self) -> None:
        """Raise ``AssertionError`` if any recorded figure is inconsistent."""
        for name, row in [("all", self), *self.breakdown.items()]:
            for m, p in ((row.mse_noisy, row.psnr_noisy),
                         (row.mse_denoised, row.psnr_denoised)):
                assert (m == 0 and p == math.inf) or \
                    abs(p - 10.0 * math.log10(1.0 / m)) <= CONSISTENCY_TOL, name
            if row.mse_noisy > 0:
                expect = 100.0 * (1.0 - row.mse_denoised / row.mse_noisy)
                assert abs(row.reduction_percent - expect) <= CONSISTENCY_TOL, name

    def to_dict(self) -> dict:
        out = asdict(self)
        out["breakdown"] = {k: asdict(v) for k, v in self.breakdown.items()}
        return out

    def table(self) -> list:
        """Long-format rows ``(noise_kind, method, mse, psnr)``."""
        rows = []
        for name, row in [("all", self), *sorted(self.breakdown.items())]:
            rows.append((name, "noisy", row.mse_noisy, row.psnr_noisy))
            rows.append((name, "all_ones_baseline", row.mse_baseline,
                         psnr(row.mse_baseline)))
            rows.append((name, "denoised", row.mse_denoised, row.psnr_denoised))
        return rows


def _row(clean, noisy, denoised, baseline) -> EvalRow:
    # per-window means in a fixed order, then averaged
    per = lambda a: float(np.mean(np.mean((a - clean) ** 2, axis=1)))
    return EvalRow(clean.shape[0], per(noisy), per(denoised), per(baseline))


def evaluate(model: DenoiserModel, test_set) -> EvalSummary:
    """Score ``model`` on ``test_set`` overall and per noise kind.

    The all-ones baseline keeps every sub-signal, i.e. returns the noisy
    input up to reconstruction round-off.
    """
    clean = np.atleast_2d(np.asarray(test_set.clean, dtype=np.float64))
    noisy = np.atleast_2d(np.asarray(test_set.noisy, dtype=np.float64))
    if clean.size == 0:
        raise ValueError("test set is empty")
    S = model.subsignals(noisy)
    a = model.weights(noisy)
    denoised = reconstruct(S, a)
    baseline = reconstruct(S, np.ones_like(a))
    overall = _row(clean, noisy, denoised, baseline)
    kinds = np.asarray(getattr(test_set, "kinds", None) or ["unknown"] * clean.shape[0])
    breakdown = {}
    for kind in sorted(set(kinds.tolist())):
        sel = kinds == kind
        breakdown[kind] = _row(clean[sel], noisy[sel], denoised[sel], baseline[sel])
    summary = EvalSummary(**asdict(overall), breakdown=breakdown)
    summary.check()
    return summary
