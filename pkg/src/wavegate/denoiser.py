"""Wavelet sub-signal gating: reconstruction, loss, training and oracles."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DataError, NumericError
from .network import (AdamState, NetworkParams, adam_step, backward, forward,
                      init_network)
from .wavelet import BOUNDARY_MODES, SubsignalMatrix, get_wavelet, subsignal_matrix

log = logging.getLogger(__name__)

MAX_ORACLE_COLUMNS = 20


def _as_matrix(s) -> np.ndarray:
    return s.matrix if isinstance(s, SubsignalMatrix) else np.asarray(s, dtype=np.float64)


def reconstruct(s, a) -> np.ndarray:
    """Weighted sum of sub-signals, ``S @ a``; broadcasts over leading batch axes."""
    S = _as_matrix(s)
    a = np.asarray(a, dtype=np.float64)
    if S.shape[-1] != a.shape[-1]:
        raise ValueError(
            f"{S.shape[-1]} sub-signals but weight vector has {a.shape[-1]} entries"
        )
    return np.einsum("...nk,...k->...n", S, a)


def mse_loss(xhat, x) -> float:
    """Mean squared error over every entry of the batch."""
    xhat = np.asarray(xhat, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if xhat.shape != x.shape:
        raise ValueError(f"shape mismatch: {xhat.shape} vs {x.shape}")
    return float(np.mean((xhat - x) ** 2))


def loss_grad_wrt_a(s, a, x) -> np.ndarray:
    """Gradient of ``mean((S a - x)**2)`` with respect to ``a``: ``(2/N) S^T (S a - x)``."""
    S = _as_matrix(s)
    a = np.asarray(a, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if S.ndim != 2 or S.shape[1] != a.size or S.shape[0] != x.size:
        raise ValueError(
            f"inconsistent shapes: S {S.shape}, a {a.shape}, x {x.shape}"
        )
    return 2.0 / x.size * (S.T @ (S @ a - x))


def batch_loss_and_grad(S, a, x):
    """Batch MSE and its gradient with respect to each row of ``a``.

    ``S`` is ``(M, N, K)``, ``a`` is ``(M, K)`` and ``x`` is ``(M, N)``.
    """
    resid = reconstruct(S, a) - x
    m, n = x.shape
    loss = float(np.mean(resid ** 2))
    grad = 2.0 / (m * n) * np.einsum("mnk,mn->mk", S, resid)
    return loss, grad


@dataclass
class TrainConfig:
    wavelet: str = "db10"
    level: int = 8
    boundary: str = "symmetric"
    lr: float = 1e-3
    batch_size: int = 100
    val_batch_size: int = 100
    max_epochs: int = 500
    patience: int = 20
    seed: int = 0

    def __post_init__(self):
        get_wavelet(self.wavelet)
        if self.boundary not in BOUNDARY_MODES:
            raise ValueError(f"unknown boundary mode {self.boundary!r}")
        if self.level < 1:
            raise ValueError("level must be >= 1")
        if self.batch_size < 2 or self.val_batch_size < 2:
            raise ValueError("batch sizes must be >= 2")
        if self.max_epochs < 1 or self.patience < 1:
            raise ValueError("max_epochs and patience must be >= 1")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainReport:
    train_mse: list = field(default_factory=list)
    val_mse: list = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0
    best_val_mse: float = float("inf")
    wall_time: float = 0.0
    beyond_max_level: bool = False

    def rows(self):
        for epoch, (tr, va) in enumerate(zip(self.train_mse, self.val_mse), start=1):
            yield epoch, tr, va


@dataclass
class DenoiserModel:
    """Trained network plus the wavelet settings it was trained with."""

    params: NetworkParams
    wavelet: str
    level: int
    boundary: str = "symmetric"

    @property
    def window_len(self) -> int:
        return self.params.n_in

    def subsignals(self, y) -> np.ndarray:
        return subsignal_matrix(y, self.wavelet, self.level, self.boundary).matrix

    def weights(self, y) -> np.ndarray:
        return forward(self.params, np.atleast_2d(y), mode="infer")[0]

    def denoise(self, y):
        return denoise(self.params, y, self.wavelet, self.level, self.boundary)


def _pairs(ds):
    if hasattr(ds, "noisy") and hasattr(ds, "clean"):
        noisy, clean = ds.noisy, ds.clean
    else:
        noisy, clean = ds
    noisy = np.atleast_2d(np.asarray(noisy, dtype=np.float64))
    clean = np.atleast_2d(np.asarray(clean, dtype=np.float64))
    if noisy.shape != clean.shape:
        raise DataError(f"noisy {noisy.shape} and clean {clean.shape} differ")
    if noisy.size == 0:
        raise DataError("empty dataset")
    return noisy, clean


def train(train_set, val_set, config: TrainConfig | None = None, *, log_every: int = 0):
    """Fit the gating network; returns ``(params, report)``.

    ``train_set`` and ``val_set`` are datasets with ``noisy``/``clean``
    arrays or plain ``(noisy, clean)`` tuples. An empty or missing
    validation set falls back to the training set for early stopping.
    The parameters with the lowest validation MSE are returned.
    """
    cfg = config or TrainConfig()
    y_tr, x_tr = _pairs(train_set)
    try:
        y_va, x_va = _pairs(val_set) if val_set is not None else (y_tr, x_tr)
    except DataError:
        y_va, x_va = y_tr, x_tr
    if y_va.shape[1] != y_tr.shape[1]:
        raise DataError("train and validation windows differ in length")
    m_tr, n = y_tr.shape
    if m_tr < 2:
        raise DataError("need at least two training windows")

    start = time.perf_counter()
    # S depends only on the noisy input, so it is built once per window
    sub_tr = subsignal_matrix(y_tr, cfg.wavelet, cfg.level, cfg.boundary)
    S_tr = sub_tr.matrix
    S_va = subsignal_matrix(y_va, cfg.wavelet, cfg.level, cfg.boundary).matrix
    k = S_tr.shape[-1]

    params = init_network(n, k, seed=cfg.seed)
    state = AdamState()
    rng = np.random.default_rng(cfg.seed)
    report = TrainReport(beyond_max_level=sub_tr.beyond_max_level)
    best = params.copy()
    bs = min(cfg.batch_size, m_tr)
    since_best = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(m_tr)
        total, seen = 0.0, 0
        for lo in range(0, m_tr, bs):
            idx = order[lo:lo + bs]
            if idx.size < 2:
                continue
            a, cache = forward(params, y_tr[idx], mode="train")
            loss, grad_a = batch_loss_and_grad(S_tr[idx], a, x_tr[idx])
            if not np.isfinite(loss):
                raise NumericError(f"non-finite training loss at epoch {epoch}")
            grads = backward(params, cache, grad_a)
            adam_step(params, grads, state, cfg.lr)
            total += loss * idx.size
            seen += idx.size
        val = _eval_mse(params, y_va, x_va, S_va, cfg.val_batch_size)
        if not np.isfinite(val):
            raise NumericError(f"non-finite validation loss at epoch {epoch}")
        report.train_mse.append(total / seen)
        report.val_mse.append(val)
        report.stopped_epoch = epoch
        if val < report.best_val_mse:
            report.best_val_mse = val
            report.best_epoch = epoch
            best = params.copy()
            since_best = 0
        else:
            since_best += 1
        if log_every and epoch % log_every == 0:
            log.info("epoch %d train %.6g val %.6g", epoch, total / seen, val)
        if since_best >= cfg.patience:
            break
    report.wall_time = time.perf_counter() - start
    return best, report


def _eval_mse(params, y, x, S, batch_size) -> float:
    sq = 0.0
    for lo in range(0, y.shape[0], batch_size):
        a = forward(params, y[lo:lo + batch_size], mode="infer")[0]
        sq += float(np.sum((reconstruct(S[lo:lo + batch_size], a) - x[lo:lo + batch_size]) ** 2))
    return sq / x.size


def denoise(params: NetworkParams, y, wavelet="db10", level: int = 8,
            boundary: str = "symmetric"):
    """Denoise one window (or a stack); returns ``(xhat, a)``."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-1] != params.n_in:
        raise ValueError(
            f"signal length {y.shape[-1]} does not match model input {params.n_in}"
        )
    if params.n_out != level + 1:
        raise ValueError(f"model emits {params.n_out} weights, level {level} needs {level + 1}")
    a = forward(params, np.atleast_2d(y), mode="infer")[0]
    S = subsignal_matrix(y, wavelet, level, boundary)
    if y.ndim == 1:
        a = a[0]
    return reconstruct(S, a), a


def _objective(S, x, A) -> np.ndarray:
    r = A @ S.T - x
    return np.einsum("ij,ij->i", r, r) / x.size


def binary_oracle(s, x, chunk: int = 4096):
    """Exhaustive search over ``a`` in {0,1}^K minimizing ``||S a - x||^2 / N``.

    Ties go to the vector with fewest ones, then the lexicographically
    smallest. Returns ``(a, mse)``.
    """
    S = _as_matrix(s)
    x = np.asarray(x, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != x.size:
        raise ValueError(f"inconsistent shapes: S {S.shape}, x {x.shape}")
    k = S.shape[1]
    if k > MAX_ORACLE_COLUMNS:
        raise ValueError(
            f"exhaustive search limited to {MAX_ORACLE_COLUMNS} columns, got {k}"
        )
    codes = np.arange(2 ** k)
    # bit k-1-i of the code is a_i, so integer order is lexicographic order
    popcount = np.zeros(codes.size, dtype=int)
    for i in range(k):
        popcount += (codes >> i) & 1
    order = np.lexsort((codes, popcount))
    best_val, best_code = np.inf, None
    for lo in range(0, order.size, chunk):
        block = order[lo:lo + chunk]
        A = ((block[:, None] >> (k - 1 - np.arange(k))) & 1).astype(np.float64)
        vals = _objective(S, x, A)
        j = int(np.argmin(vals))  # first minimum within the block
        if vals[j] < best_val:
            best_val, best_code = vals[j], block[j]
    a = ((best_code >> (k - 1 - np.arange(k))) & 1).astype(np.float64)
    return a, float(best_val)


def relaxed_oracle(s, x, iters: int = 5000, step: float | None = None,
                   a0=None, tol: float = 1e-15, return_history: bool = False):
    """Projected gradient descent for ``min ||S a - x||^2 / N`` over ``[0, 1]^K``.

    The gradient is scaled by the inverse Gram diagonal (sub-signals are
    close to orthogonal, so this is nearly Newton). A step that raises the
    objective is halved until it does not, so the objective never increases.
    Returns ``(a, mse)`` or ``(a, mse, history)``.
    """
    S = _as_matrix(s)
    x = np.asarray(x, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != x.size:
        raise ValueError(f"inconsistent shapes: S {S.shape}, x {x.shape}")
    if not (np.all(np.isfinite(S)) and np.all(np.isfinite(x))):
        raise NumericError("non-finite values in relaxed_oracle input")
    n, k = S.shape
    G = S.T @ S / n
    b = S.T @ x / n
    c = float(x @ x) / n
    diag = np.diag(G).copy()
    scale = np.where(diag > 1e-300, 1.0 / np.maximum(diag, 1e-300), 0.0)

    def f(a):
        return float(a @ G @ a - 2.0 * b @ a + c)

    a = np.ones(k) if a0 is None else np.clip(np.asarray(a0, dtype=np.float64), 0.0, 1.0)
    if step is None:
        # 1/lambda_max of the scaled Hessian keeps plain steps monotone
        d = np.sqrt(scale)
        lam = float(np.linalg.eigvalsh(d[:, None] * G * d[None, :]).max()) if k else 0.0
        step = 1.0 / lam if lam > 0 else 1.0
    fa = f(a)
    history = [fa]
    for _ in range(iters):
        g = 2.0 * (G @ a - b)
        t = step
        while True:
            cand = np.clip(a - t * 0.5 * scale * g, 0.0, 1.0)
            fc = f(cand)
            if fc <= fa or t < 1e-12:
                break
            t *= 0.5
        if fc > fa:
            break
        moved = np.max(np.abs(cand - a)) if k else 0.0
        a, improve, fa = cand, fa - fc, fc
        history.append(fa)
        if not np.isfinite(fa):
            raise NumericError("objective became non-finite")
        if moved == 0.0 or improve <= tol * max(1.0, abs(fa)):
            break
    # evaluate with the direct residual so the value is comparable to binary_oracle
    mse = float(np.mean((S @ a - x) ** 2))
    if return_history:
        return a, mse, history
    return a, mse

