"""Report figures written next to the CSV/JSON outputs of the CLI."""

from __future__ import annotations

from collections import defaultdict
from contextlib import contextmanager

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

REPORT_STYLE = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.fontsize": 8,
    "font.size": 10,
}

NOISE_COLORS = {
    "gaussian": "tab:blue",
    "poisson": "tab:orange",
    "uniform": "tab:green",
    "salt_pepper": "tab:red",
}


@contextmanager
def _figure(path, **kw):
    with plt.rc_context(REPORT_STYLE):
        fig, ax = plt.subplots(**kw)
        try:
            yield fig, ax
            fig.tight_layout()
            fig.savefig(path)
        finally:
            plt.close(fig)


def plot_training(report, path):
    epochs = np.arange(1, len(report.train_mse) + 1)
    with _figure(path) as (fig, ax):
        ax.semilogy(epochs, report.train_mse, label="train")
        ax.semilogy(epochs, report.val_mse, label="validation")
        if report.best_epoch:
            ax.axvline(report.best_epoch, color="k", ls=":", lw=1, label="best")
        ax.set_xlabel("epoch")
        ax.set_ylabel("MSE")
        ax.legend()
    return path


def plot_sweep(rows, axis: str, path):
    """``rows`` are dicts with ``value``, ``noise_kind``, ``mse_noisy``, ``mse_denoised``."""
    series = defaultdict(list)
    for r in rows:
        series[r["noise_kind"]].append(r)
    with _figure(path) as (fig, ax):
        for kind, rs in sorted(series.items()):
            labels = [str(r["value"]) for r in rs]
            xs = np.arange(len(rs))
            color = NOISE_COLORS.get(kind)
            ax.plot(xs, [r["mse_denoised"] for r in rs], "o-", color=color,
                    label=f"{kind} denoised")
            ax.plot(xs, [r["mse_noisy"] for r in rs], "--", color=color, alpha=0.5,
                    label=f"{kind} noisy")
            ax.set_xticks(xs, labels)
        ax.set_yscale("log")
        ax.set_xlabel("decomposition level" if axis == "level" else "mother wavelet")
        ax.set_ylabel("test MSE")
        ax.legend(ncol=2)
    return path


def plot_eval(summary, path):
    kinds = sorted(summary.breakdown) or ["all"]
    rows = [summary.breakdown.get(k, summary) for k in kinds]
    xs = np.arange(len(kinds))
    with _figure(path) as (fig, ax):
        ax.bar(xs - 0.2, [r.mse_noisy for r in rows], 0.4, label="noisy", color="0.6")
        ax.bar(xs + 0.2, [r.mse_denoised for r in rows], 0.4, label="denoised")
        for x, r in zip(xs, rows):
            ax.annotate(f"-{r.reduction_percent:.1f}%", (x + 0.2, r.mse_denoised),
                        ha="center", va="bottom", fontsize=8)
        ax.set_xticks(xs, kinds)
        ax.set_ylabel("MSE")
        ax.legend()
    return path


def plot_denoised(noisy, denoised, path, clean=None, sample_rate=None):
    t = np.arange(len(noisy))
    if sample_rate:
        t = t / sample_rate
    with _figure(path) as (fig, ax):
        ax.plot(t, noisy, color="0.7", lw=0.8, label="input")
        if clean is not None:
            ax.plot(t, clean, color="k", lw=1.0, label="clean")
        ax.plot(t, denoised, lw=1.2, label="denoised")
        ax.set_xlabel("time [s]" if sample_rate else "sample")
        ax.legend()
    return path


def plot_subsignals(S, path, sample_rate=None):
    """Stacked view of each sub-signal column."""
    S = np.asarray(S)
    k = S.shape[1]
    t = np.arange(S.shape[0]) / (sample_rate or 1)
    with _figure(path, nrows=k, sharex=True,
                 figsize=(6.4, 1.0 + 0.8 * k)) as (fig, axes):
        for i, ax in enumerate(np.atleast_1d(axes)):
            ax.plot(t, S[:, i], lw=0.8)
            label = f"s{i + 1}" + (" (cA)" if i == k - 1 else f" (cD{i + 1})")
            ax.set_ylabel(label, rotation=0, ha="right", fontsize=8)
    return path
