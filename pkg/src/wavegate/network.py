"""Feedforward gating network written directly in numpy.

Architecture: ``N -> N/2 -> N/4 -> N/8 -> K`` where every hidden layer is
dense -> batch norm -> ReLU and the head is dense -> sigmoid, so each output
lies strictly inside (0, 1). Weight matrices are stored ``(fan_in, fan_out)``
and a layer computes ``z = x @ W + b``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NumericError

BN_MOMENTUM = 0.9
BN_EPS = 1e-5
N_HIDDEN = 3
CHECKPOINT_VERSION = 1


@dataclass
class NetworkParams:
    widths: list
    tensors: dict
    step: int = 0

    @property
    def n_in(self) -> int:
        return self.widths[0]

    @property
    def n_out(self) -> int:
        return self.widths[-1]

    def trainable_names(self) -> list:
        names = []
        for h in range(1, N_HIDDEN + 1):
            names += [f"W{h}", f"b{h}", f"gamma{h}", f"beta{h}"]
        return names + ["W_out", "b_out"]

    def copy(self) -> "NetworkParams":
        return NetworkParams(list(self.widths),
                             {k: v.copy() for k, v in self.tensors.items()},
                             self.step)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]


def layer_widths(n: int, l_plus_1: int) -> list:
    return [n] + [n // 2 ** h for h in range(1, N_HIDDEN + 1)] + [l_plus_1]


def init_network(n: int, l_plus_1: int, seed: int = 0) -> NetworkParams:
    """Xavier-uniform weights, zero biases, unit BN scale, fresh running stats."""
    if n < 2 ** N_HIDDEN:
        raise ValueError(f"input width {n} too small; need n >= {2 ** N_HIDDEN}")
    if l_plus_1 < 1:
        raise ValueError("output width must be positive")
    widths = layer_widths(n, l_plus_1)
    rng = np.random.default_rng(seed)
    tensors = {}
    for h in range(1, N_HIDDEN + 1):
        fan_in, fan_out = widths[h - 1], widths[h]
        tensors[f"W{h}"] = _xavier(rng, fan_in, fan_out)
        tensors[f"b{h}"] = np.zeros(fan_out)
        tensors[f"gamma{h}"] = np.ones(fan_out)
        tensors[f"beta{h}"] = np.zeros(fan_out)
        tensors[f"running_mean{h}"] = np.zeros(fan_out)
        tensors[f"running_var{h}"] = np.ones(fan_out)
    tensors["W_out"] = _xavier(rng, widths[-2], widths[-1])
    tensors["b_out"] = np.zeros(widths[-1])
    return NetworkParams(widths, tensors)


def _xavier(rng, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


@dataclass
class ForwardCache:
    mode: str
    step: int
    inputs: list = field(default_factory=list)     # layer inputs
    xhat: list = field(default_factory=list)       # BN-normalized values
    inv_std: list = field(default_factory=list)
    batch_mean: list = field(default_factory=list)
    batch_var: list = field(default_factory=list)
    bn_out: list = field(default_factory=list)     # pre-ReLU values
    output: np.ndarray | None = None


def forward(params: NetworkParams, batch, mode: str = "train",
            update_stats: bool = True):
    """Run the network on an ``(M, N)`` batch; returns ``(weights, cache)``.

    In ``train`` mode batch norm uses the batch statistics and, unless
    ``update_stats`` is false, folds them into the running estimates held in
    ``params`` (unbiased variance, momentum 0.9). ``infer`` mode uses the
    running estimates and leaves ``params`` untouched.
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.n_in:
        raise ValueError(
            f"batch shape {x.shape} does not match input width {params.n_in}"
        )
    m = x.shape[0]
    if mode == "train" and m < 2:
        raise ValueError("train mode needs a batch of at least 2 rows")
    t = params.tensors
    cache = ForwardCache(mode, params.step)
    for h in range(1, N_HIDDEN + 1):
        cache.inputs.append(x)
        z = x @ t[f"W{h}"] + t[f"b{h}"]
        if mode == "train":
            mu = z.mean(axis=0)
            var = z.var(axis=0)
            if update_stats:
                unbiased = var * m / (m - 1)
                t[f"running_mean{h}"] *= BN_MOMENTUM
                t[f"running_mean{h}"] += (1 - BN_MOMENTUM) * mu
                t[f"running_var{h}"] *= BN_MOMENTUM
                t[f"running_var{h}"] += (1 - BN_MOMENTUM) * unbiased
        else:
            mu = t[f"running_mean{h}"]
            var = t[f"running_var{h}"]
        inv_std = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (z - mu) * inv_std
        y = t[f"gamma{h}"] * xhat + t[f"beta{h}"]
        cache.batch_mean.append(mu)
        cache.batch_var.append(var)
        cache.inv_std.append(inv_std)
        cache.xhat.append(xhat)
        cache.bn_out.append(y)
        x = np.maximum(y, 0.0)
    cache.inputs.append(x)
    out = sigmoid(x @ t["W_out"] + t["b_out"])
    cache.output = out
    return out, cache


def backward(params: NetworkParams, cache: ForwardCache, grad_weights) -> dict:
    """Reverse-mode gradients of every trainable tensor.

    ``grad_weights`` is dLoss/dOutput with the shape of the forward output.
    """
    if cache.mode != "train":
        raise ValueError("backward needs a cache from a train-mode forward")
    if cache.step != params.step:
        raise ValueError(
            f"stale cache: built at step {cache.step}, params at step {params.step}"
        )
    g = np.asarray(grad_weights, dtype=np.float64)
    if cache.output is None or g.shape != cache.output.shape:
        raise ValueError(
            f"upstream gradient shape {g.shape} does not match output "
            f"{None if cache.output is None else cache.output.shape}"
        )
    if len(cache.inputs) != N_HIDDEN + 1 or cache.inputs[0].shape[1] != params.n_in:
        raise ValueError("cache does not belong to this network")
    t = params.tensors
    out = cache.output
    grads = {}
    dz = g * out * (1.0 - out)
    a = cache.inputs[N_HIDDEN]
    grads["W_out"] = a.T @ dz
    grads["b_out"] = dz.sum(axis=0)
    da = dz @ t["W_out"].T
    m = out.shape[0]
    for h in range(N_HIDDEN, 0, -1):
        dy = da * (cache.bn_out[h - 1] > 0)
        xhat = cache.xhat[h - 1]
        grads[f"gamma{h}"] = (dy * xhat).sum(axis=0)
        grads[f"beta{h}"] = dy.sum(axis=0)
        dxhat = dy * t[f"gamma{h}"]
        dz = cache.inv_std[h - 1] / m * (
            m * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0)
        )
        x_in = cache.inputs[h - 1]
        grads[f"W{h}"] = x_in.T @ dz
        grads[f"b{h}"] = dz.sum(axis=0)
        if h > 1:
            da = dz @ t[f"W{h}"].T
    return grads


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def copy(self) -> "AdamState":
        return AdamState({k: a.copy() for k, a in self.m.items()},
                         {k: a.copy() for k, a in self.v.items()},
                         self.t, self.beta1, self.beta2, self.eps)


def adam_step(params: NetworkParams, grads: dict, state: AdamState,
              lr: float = 1e-3):
    """Bias-corrected Adam update applied in place; returns ``(params, state)``."""
    for name in params.trainable_names():
        if name not in grads:
            raise ValueError(f"missing gradient for {name}")
        gi = np.asarray(grads[name])
        if gi.shape != params.tensors[name].shape:
            raise ValueError(
                f"gradient {name} has shape {gi.shape}, "
                f"expected {params.tensors[name].shape}"
            )
        if not np.all(np.isfinite(gi)):
            raise NumericError(f"non-finite entries in gradient of {name}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** state.t
    corr2 = 1.0 - b2 ** state.t
    for name in params.trainable_names():
        gi = grads[name]
        m = state.m.setdefault(name, np.zeros_like(gi, dtype=np.float64))
        v = state.v.setdefault(name, np.zeros_like(gi, dtype=np.float64))
        m *= b1
        m += (1 - b1) * gi
        v *= b2
        v += (1 - b2) * gi * gi
        params.tensors[name] -= lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps)
    params.step += 1
    return params, state


def save_checkpoint(path, params: NetworkParams, meta: dict | None = None) -> Path:
    """Write widths, tensors and metadata into one ``.npz`` archive."""
    path = Path(path)
    header = {
        "version": CHECKPOINT_VERSION,
        "widths": list(map(int, params.widths)),
        "step": int(params.step),
        "meta": meta or {},
    }
    arrays = {f"t_{k}": np.ascontiguousarray(v) for k, v in params.tensors.items()}
    with open(path, "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header, sort_keys=True)), **arrays)
    return path


def load_checkpoint(path):
    """Inverse of :func:`save_checkpoint`; returns ``(params, meta)``."""
    with np.load(Path(path), allow_pickle=False) as data:
        if "header" not in data.files:
            raise ValueError(f"{path}: not a checkpoint (no header)")
        header = json.loads(str(data["header"]))
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(
                f"{path}: unsupported checkpoint version {header.get('version')!r}"
            )
        tensors = {k[2:]: data[k].astype(np.float64) for k in data.files
                   if k.startswith("t_")}
    params = NetworkParams(header["widths"], tensors, header.get("step", 0))
    for k, shape in _tensor_shapes(params.widths).items():
        if k not in tensors or tensors[k].shape != shape:
            raise ValueError(f"{path}: tensor {k} missing or mis-shaped")
    return params, header["meta"]


def _tensor_shapes(widths) -> dict:
    shapes = {}
    for h in range(1, N_HIDDEN + 1):
        shapes[f"W{h}"] = (widths[h - 1], widths[h])
        for k in ("b", "gamma", "beta", "running_mean", "running_var"):
            shapes[f"{k}{h}"] = (widths[h],)
    shapes["W_out"] = (widths[-2], widths[-1])
    shapes["b_out"] = (widths[-1],)
    return shapes
