"""Fast wavelet transform (Mallat cascade) with Daubechies filter banks.

All transforms act on the last axis, so a stack of equal-length windows can
be processed in one call. Two boundary modes are supported:

``symmetric``
    half-sample symmetric extension; a level maps ``n`` samples to
    ``(n + F - 1) // 2`` coefficients where ``F`` is the filter length.
``periodic``
    periodization; a level maps ``n`` samples to ``ceil(n / 2)``
    coefficients and the transform is orthogonal for even lengths.

Analysis follows ``c[i] = sum_j h[j] * x[2i + 1 - j]`` with ``x`` extended
outside ``[0, n)`` according to the boundary mode. Synthesis is the adjoint
of that sum without extension, which reconstructs exactly because the filter
pair is orthonormal.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ._daubechies import LO_DEC
from .errors import MaxLevelWarning

BOUNDARY_MODES = ("symmetric", "periodic")
WAVELET_NAMES = tuple(f"db{p}" for p in sorted(LO_DEC))


@dataclass(frozen=True, eq=False)
class FilterBank:
    """Orthonormal two-channel filter bank of a Daubechies wavelet."""

    order: int
    lo_dec: np.ndarray
    hi_dec: np.ndarray
    lo_rec: np.ndarray
    hi_rec: np.ndarray

    @property
    def name(self) -> str:
        return f"db{self.order}"

    @property
    def filter_len(self) -> int:
        return 2 * self.order

    def __repr__(self) -> str:
        return f"FilterBank({self.name})"


def daubechies_filters(order: int) -> FilterBank:
    """Return the db``order`` filter bank (``1 <= order <= 10``).

    The high-pass analysis filter uses ``hi_dec[k] = (-1)**k * lo_dec[F-1-k]``;
    synthesis filters are the time reverses of the analysis filters.
    """
    if isinstance(order, bool) or not isinstance(order, (int, np.integer)):
        raise ValueError(f"wavelet order must be an integer, got {order!r}")
    if order not in LO_DEC:
        raise ValueError(f"wavelet order must be in 1..10, got {order}")
    lo = np.array(LO_DEC[int(order)], dtype=np.float64)
    flen = lo.size
    signs = np.where(np.arange(flen) % 2 == 0, 1.0, -1.0)
    hi = signs * lo[::-1]
    for arr in (lo, hi):
        arr.setflags(write=False)
    lo_rec = lo[::-1].copy()
    hi_rec = hi[::-1].copy()
    lo_rec.setflags(write=False)
    hi_rec.setflags(write=False)
    return FilterBank(int(order), lo, hi, lo_rec, hi_rec)


def get_wavelet(name: str | int | FilterBank) -> FilterBank:
    """Resolve ``'db4'``, ``4`` or an existing bank into a :class:`FilterBank`."""
    if isinstance(name, FilterBank):
        return name
    if isinstance(name, str):
        key = name.strip().lower()
        if key not in WAVELET_NAMES:
            raise ValueError(
                f"unknown wavelet {name!r}; valid names: {', '.join(WAVELET_NAMES)}"
            )
        return daubechies_filters(int(key[2:]))
    return daubechies_filters(name)


def _check_mode(boundary: str) -> str:
    if boundary not in BOUNDARY_MODES:
        raise ValueError(
            f"unknown boundary mode {boundary!r}; expected one of {BOUNDARY_MODES}"
        )
    return boundary


def coeff_len(n: int, filter_len: int, boundary: str = "symmetric") -> int:
    """Number of coefficients one analysis step produces from ``n`` samples."""
    if _check_mode(boundary) == "periodic":
        return (n + 1) // 2
    return (n + filter_len - 1) // 2


def _reflect(idx: np.ndarray, n: int) -> np.ndarray:
    # half-sample symmetric: ... x1 x0 | x0 x1 ... x_{n-1} | x_{n-1} ...
    r = np.mod(idx, 2 * n)
    return np.where(r >= n, 2 * n - 1 - r, r)


def dwt_step(signal, bank: FilterBank, boundary: str = "symmetric"):
    """One analysis level: returns ``(approx, detail)`` along the last axis."""
    _check_mode(boundary)
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise ValueError("dwt_step needs a non-empty signal")
    n = x.shape[-1]
    flen = bank.filter_len
    if boundary == "periodic":
        if n % 2:
            x = np.concatenate([x, x[..., -1:]], axis=-1)
            n += 1
        out = n // 2
    else:
        out = (n + flen - 1) // 2
    base = 2 * np.arange(out) + 1
    approx = np.zeros(x.shape[:-1] + (out,))
    detail = np.zeros_like(approx)
    for j in range(flen):
        idx = base - j
        idx = np.mod(idx, n) if boundary == "periodic" else _reflect(idx, n)
        taps = x[..., idx]
        approx += bank.lo_dec[j] * taps
        detail += bank.hi_dec[j] * taps
    return approx, detail


def _valid_targets(out: int, flen: int, boundary: str) -> tuple[int, ...]:
    if boundary == "periodic":
        return (2 * out - 1, 2 * out)
    return (2 * out - flen + 1, 2 * out - flen + 2)


def idwt_step(approx, detail, bank: FilterBank, boundary: str = "symmetric",
              target_len: int | None = None) -> np.ndarray:
    """One synthesis level, trimmed to ``target_len`` samples.

    Either input may be ``None`` to stand for an all-zero band. When
    ``target_len`` is omitted the longer admissible length is used.
    """
    _check_mode(boundary)
    if approx is None and detail is None:
        raise ValueError("idwt_step needs at least one coefficient band")
    a = None if approx is None else np.asarray(approx, dtype=np.float64)
    d = None if detail is None else np.asarray(detail, dtype=np.float64)
    if a is not None and d is not None and a.shape != d.shape:
        raise ValueError(
            f"approx and detail shapes differ: {a.shape} vs {d.shape}"
        )
    ref = a if a is not None else d
    out = ref.shape[-1]
    flen = bank.filter_len
    allowed = [t for t in _valid_targets(out, flen, boundary) if t >= 1]
    if target_len is None:
        target_len = allowed[-1]
    if target_len not in allowed:
        raise ValueError(
            f"target_len {target_len} inconsistent with {out} coefficients "
            f"(expected one of {allowed})"
        )
    if boundary == "periodic":
        n = 2 * out
    else:
        n = target_len
    x = np.zeros(ref.shape[:-1] + (n,))
    base = 2 * np.arange(out) + 1
    for j in range(flen):
        idx = base - j
        if boundary == "periodic":
            # 2i + 1 - j hits distinct residues mod 2*out for fixed j
            x[..., np.mod(idx, n)] += _tap(a, d, bank, j)
        else:
            keep = (idx >= 0) & (idx < n)
            x[..., idx[keep]] += _tap(a, d, bank, j)[..., keep]
    return x[..., :target_len]


def _tap(a, d, bank: FilterBank, j: int):
    if a is None:
        return bank.hi_dec[j] * d
    if d is None:
        return bank.lo_dec[j] * a
    return bank.lo_dec[j] * a + bank.hi_dec[j] * d


def max_level(n: int, order: int) -> int:
    """Conservative level bound ``floor(log2(n / (2*order - 1)))``; 0 if too short."""
    span = 2 * order - 1
    if n < 2 * order:
        return 0
    level = 0
    while span * 2 ** (level + 1) <= n:
        level += 1
    return level


@dataclass
class CoefficientSet:
    """Multi-level decomposition: ``approx`` is cA_L, ``details`` runs cD_L .. cD_1."""

    approx: np.ndarray
    details: list
    level: int
    original_len: int
    wavelet: str
    boundary: str
    lengths: list = field(default_factory=list)
    beyond_max_level: bool = False

    def __post_init__(self):
        if len(self.details) != self.level:
            raise ValueError(
                f"expected {self.level} detail arrays, got {len(self.details)}"
            )

    def detail(self, k: int) -> np.ndarray:
        """Detail band cD_k (``k = 1`` is the finest)."""
        return self.details[self.level - k]


def wavedec(signal, bank: FilterBank | str, level: int,
            boundary: str = "symmetric") -> CoefficientSet:
    """Decompose ``signal`` over ``level`` cascade stages."""
    bank = get_wavelet(bank)
    _check_mode(boundary)
    if isinstance(level, bool) or int(level) != level or level < 1:
        raise ValueError(f"level must be a positive integer, got {level!r}")
    level = int(level)
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise ValueError("cannot decompose an empty signal")
    n = x.shape[-1]
    lengths = [n]
    for _ in range(level):
        nxt = coeff_len(lengths[-1], bank.filter_len, boundary)
        if nxt < 1:
            raise ValueError(f"level {level} empties an intermediate array")
        lengths.append(nxt)
    beyond = level > max_level(n, bank.order)
    if beyond:
        warnings.warn(
            f"level {level} exceeds max_level({n}, {bank.order}) = "
            f"{max_level(n, bank.order)}",
            MaxLevelWarning,
            stacklevel=2,
        )
    details = []
    approx = x
    for _ in range(level):
        approx, det = dwt_step(approx, bank, boundary)
        details.append(det)
    details.reverse()
    return CoefficientSet(approx, details, level, n, bank.name, boundary,
                          lengths, beyond)


def waverec(coeffs: CoefficientSet) -> np.ndarray:
    """Invert :func:`wavedec`. ``None`` entries act as all-zero bands."""
    bank = get_wavelet(coeffs.wavelet)
    lengths = coeffs.lengths or _lengths_for(coeffs, bank)
    if len(lengths) != coeffs.level + 1 or lengths[0] != coeffs.original_len:
        raise ValueError("coefficient set carries inconsistent length records")
    x = coeffs.approx
    for k in range(coeffs.level, 0, -1):
        det = coeffs.details[coeffs.level - k]
        for band in (x, det):
            if band is not None and np.shape(band)[-1] != lengths[k]:
                raise ValueError(
                    f"level {k} expects {lengths[k]} coefficients, "
                    f"got {np.shape(band)[-1]}"
                )
        if x is None and det is None:
            x = None
            continue
        x = idwt_step(x, det, bank, coeffs.boundary, lengths[k - 1])
    if x is None:
        ref = next(c for c in [coeffs.approx, *coeffs.details] if c is not None)
        x = np.zeros(np.shape(ref)[:-1] + (coeffs.original_len,))
    return x


def _lengths_for(coeffs: CoefficientSet, bank: FilterBank) -> list:
    lengths = [coeffs.original_len]
    for _ in range(coeffs.level):
        lengths.append(coeff_len(lengths[-1], bank.filter_len, coeffs.boundary))
    return lengths


@dataclass
class SubsignalMatrix:
    """Sub-signal bank ``S``; ``matrix[..., :, i]`` is column ``s_{i+1}``.

    Columns ``0 .. L-1`` are rebuilt from detail cD_1 .. cD_L alone (finest
    first); the last column comes from the approximation cA_L alone.
    """

    matrix: np.ndarray
    level: int
    original_len: int
    wavelet: str
    boundary: str
    beyond_max_level: bool = False

    @property
    def n_columns(self) -> int:
        return self.matrix.shape[-1]

    @property
    def columns(self) -> list:
        return [self.matrix[..., i] for i in range(self.n_columns)]


def subsignal_matrix(signal, bank: FilterBank | str, level: int,
                     boundary: str = "symmetric") -> SubsignalMatrix:
    """Reconstruct each band in isolation; the columns sum back to ``signal``."""
    coeffs = wavedec(signal, bank, level, boundary)
    L = coeffs.level
    cols = []
    for k in range(1, L + 1):
        only = [None] * L
        only[L - k] = coeffs.detail(k)
        cols.append(waverec(_replace(coeffs, None, only)))
    cols.append(waverec(_replace(coeffs, coeffs.approx, [None] * L)))
    return SubsignalMatrix(np.stack(cols, axis=-1), L, coeffs.original_len,
                           coeffs.wavelet, coeffs.boundary,
                           coeffs.beyond_max_level)


def _replace(coeffs: CoefficientSet, approx, details) -> CoefficientSet:
    return CoefficientSet(approx, details, coeffs.level, coeffs.original_len,
                          coeffs.wavelet, coeffs.boundary, coeffs.lengths,
                          coeffs.beyond_max_level)
