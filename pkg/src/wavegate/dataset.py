"""Record ingestion, windowing, normalization and corpus assembly."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .noise import NoiseSpec, corrupt

DEFAULT_SAMPLE_RATE = 125.0
DEFAULT_WINDOW_SECONDS = 8.0
REFERENCE_SPLIT = {"train": 3873, "val": 0, "test": 240}
DESK_SPLIT = {"train": 512, "val": 64, "test": 64}


@dataclass
class Record:
    samples: np.ndarray
    sample_rate: float
    subject: str = ""
    channel: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.samples.size == 0:
            raise DataError("record has no samples")


def load_record(path, channel: str, sample_rate: float = DEFAULT_SAMPLE_RATE,
                subject: str | None = None) -> Record:
    """Read one column of a comma-separated table with a header row.

    Header names are matched after stripping whitespace and case-folding, so
    ``" PLETH"`` matches ``pleth``.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if not header:
            raise DataError(f"{path}: empty file")
        names = [h.strip() for h in header]
        folded = [h.lower() for h in names]
        if channel.strip().lower() not in folded:
            raise DataError(
                f"{path}: no column {channel!r}; available: {', '.join(names)}"
            )
        col = folded.index(channel.strip().lower())
        values = []
        for lineno, row in enumerate(rows, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                values.append(float(row[col]))
            except (IndexError, ValueError):
                cell = row[col] if col < len(row) else "<missing>"
                raise DataError(
                    f"{path}: row {lineno}: non-numeric value {cell!r} "
                    f"in column {names[col]!r}"
                ) from None
    if not values:
        raise DataError(f"{path}: no data rows")
    return Record(np.array(values), sample_rate, subject or path.stem, names[col])


def window(record: Record, window_seconds: float = DEFAULT_WINDOW_SECONDS) -> list:
    """Non-overlapping consecutive windows; the trailing remainder is dropped."""
    width = int(round(window_seconds * record.sample_rate))
    if width < 1:
        raise ValueError("window must span at least one sample")
    count = record.samples.size // width
    return [record.samples[k * width:(k + 1) * width].copy() for k in range(count)]


def normalize(x):
    """Min-max scale to [0, 1]; returns ``(scaled, min, max)``."""
    x = np.asarray(x, dtype=np.float64)
    lo, hi = float(x.min()), float(x.max())
    if not hi > lo:
        raise ValueError("cannot normalize a constant signal")
    return (x - lo) / (hi - lo), lo, hi


def denormalize(x, lo: float, hi: float) -> np.ndarray:
    return np.asarray(x) * (hi - lo) + lo


@dataclass
class PulseConfig:
    """Synthetic pulse-wave parameters.

    Each beat is a systolic Gaussian bump followed by a smaller dicrotic
    bump. ``amp_jitter`` and ``period_jitter`` are relative standard
    deviations applied per beat; ``beats`` overrides ``duration`` when set.
    """

    duration: float = DEFAULT_WINDOW_SECONDS
    bpm: float = 75.0
    sample_rate: float = DEFAULT_SAMPLE_RATE
    beats: int | None = None
    systolic_width: float = 0.08      # seconds
    dicrotic_delay: float = 0.30      # seconds after the systolic peak
    dicrotic_amp: float = 0.45
    dicrotic_width: float = 0.12
    amp_jitter: float = 0.05
    period_jitter: float = 0.03
    baseline_amp: float = 0.0         # respiratory-like drift, relative
    baseline_hz: float = 0.25


def synth_pulse(config: PulseConfig | None = None, seed: int | None = 0) -> np.ndarray:
    """Quasi-periodic pulse window normalized to [0, 1]."""
    cfg = config or PulseConfig()
    if not cfg.bpm > 0:
        raise ValueError("bpm must be positive")
    period = 60.0 / cfg.bpm
    duration = cfg.beats * period if cfg.beats else cfg.duration
    n = int(round(duration * cfg.sample_rate))
    if n < 2:
        raise ValueError("pulse window shorter than two samples")
    rng = np.random.default_rng(seed)
    t = np.arange(n) / cfg.sample_rate
    # beats starting before t=0 and after the end keep edges consistent
    onset = -2 * period + rng.uniform(0, period) * (cfg.period_jitter > 0)
    x = np.zeros(n)
    while onset < duration + 2 * period:
        amp = 1.0 + cfg.amp_jitter * rng.standard_normal() if cfg.amp_jitter else 1.0
        x += amp * np.exp(-0.5 * ((t - onset) / cfg.systolic_width) ** 2)
        x += amp * cfg.dicrotic_amp * np.exp(
            -0.5 * ((t - onset - cfg.dicrotic_delay) / cfg.dicrotic_width) ** 2)
        step = period * (1.0 + cfg.period_jitter * rng.standard_normal()) \
            if cfg.period_jitter else period
        onset += max(step, 0.2 * period)
    if cfg.baseline_amp:
        phase = rng.uniform(0, 2 * np.pi)
        x += cfg.baseline_amp * np.sin(2 * np.pi * cfg.baseline_hz * t + phase)
    return normalize(x)[0]


def synthetic_windows(count: int, seed: int = 0, bpm_range=(55.0, 110.0),
                      **overrides) -> list:
    """``count`` independent synthetic windows with heart rates drawn from ``bpm_range``."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        cfg = PulseConfig(bpm=float(rng.uniform(*bpm_range)),
                          baseline_amp=float(rng.uniform(0.0, 0.15)), **overrides)
        out.append(synth_pulse(cfg, seed=int(rng.integers(2 ** 63))))
    return out


@dataclass
class WindowedDataset:
    """Aligned ``(clean, noisy)`` windows plus per-window metadata."""

    clean: np.ndarray
    noisy: np.ndarray
    kinds: list = field(default_factory=list)
    norm_min: np.ndarray | None = None
    norm_max: np.ndarray | None = None
    provenance: list = field(default_factory=list)

    def __post_init__(self):
        self.clean = np.atleast_2d(np.asarray(self.clean, dtype=np.float64))
        self.noisy = np.atleast_2d(np.asarray(self.noisy, dtype=np.float64))
        if self.clean.shape != self.noisy.shape:
            raise DataError(
                f"clean {self.clean.shape} and noisy {self.noisy.shape} differ"
            )
        m = len(self)
        if not self.kinds:
            self.kinds = ["unknown"] * m
        if self.norm_min is None:
            self.norm_min = np.zeros(m)
        if self.norm_max is None:
            self.norm_max = np.ones(m)
        if not self.provenance:
            self.provenance = [("", -1)] * m

    def __len__(self) -> int:
        return self.clean.shape[0] if self.clean.size else 0

    @property
    def window_len(self) -> int:
        return self.clean.shape[1]

    def subset(self, idx) -> "WindowedDataset":
        idx = list(idx)
        return WindowedDataset(self.clean[idx], self.noisy[idx],
                               [self.kinds[i] for i in idx],
                               self.norm_min[idx], self.norm_max[idx],
                               [self.provenance[i] for i in idx])

    def save(self, path) -> Path:
        path = Path(path)
        prov = json.dumps([list(p) for p in self.provenance])
        with open(path, "wb") as fh:
            np.savez(fh, clean=self.clean, noisy=self.noisy,
                     kinds=np.array(self.kinds, dtype=str),
                     norm_min=self.norm_min, norm_max=self.norm_max,
                     provenance=np.array(prov))
        return path

    @classmethod
    def load(cls, path) -> "WindowedDataset":
        path = Path(path)
        if not path.is_file():
            raise DataError(f"{path}: no such dataset file")
        try:
            with np.load(path, allow_pickle=False) as d:
                prov = [tuple(p) for p in json.loads(str(d["provenance"]))]
                return cls(d["clean"], d["noisy"], [str(k) for k in d["kinds"]],
                           d["norm_min"], d["norm_max"], prov)
        except (KeyError, ValueError, OSError) as exc:
            raise DataError(f"{path}: unreadable dataset ({exc})") from None


def fit_split(split: dict, available: int) -> tuple:
    """Shrink ``split`` proportionally so it needs at most ``available`` windows.

    Returns ``(split, scaled)``; the input is returned unchanged if it fits.
    """
    need = sum(split.values())
    if need <= available:
        return dict(split), False
    scale = available / need
    out = {k: int(v * scale) for k, v in split.items()}
    return out, True


def make_corpus(clean_signals, noise_specs, split=None, seed: int = 0,
                provenance=None):
    """Pair clean windows with corrupted copies and split them.

    Windows are min-max normalized, shuffled with ``seed`` and cut into
    ``train``/``val``/``test`` (in that order). Noise specs are cycled over
    the shuffled order so every split sees every kind; each window gets its
    own noise stream derived from ``seed`` and its source index.
    """
    split = dict(DESK_SPLIT if split is None else split)
    for key in ("train", "val", "test"):
        split.setdefault(key, 0)
        if split[key] < 0:
            raise ValueError(f"split count {key} must be non-negative")
    specs = [s if isinstance(s, NoiseSpec) else NoiseSpec.parse(s) for s in noise_specs]
    if not specs:
        raise ValueError("need at least one noise spec")
    signals = [np.asarray(s, dtype=np.float64) for s in clean_signals]
    need = split["train"] + split["val"] + split["test"]
    if need > len(signals):
        raise DataError(
            f"split needs {need} windows but only {len(signals)} are available"
        )
    if len({s.size for s in signals}) > 1:
        raise DataError("all windows must have the same length")
    provenance = list(provenance) if provenance else [("", i) for i in range(len(signals))]
    order = np.random.default_rng(seed).permutation(len(signals))[:need]
    clean, noisy, kinds, mins, maxs, prov = [], [], [], [], [], []
    for pos, src in enumerate(order):
        x, lo, hi = normalize(signals[src])
        spec = specs[pos % len(specs)]
        stream = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(src),)))
        clean.append(x)
        noisy.append(corrupt(x, spec, rng=stream))
        kinds.append(spec.kind)
        mins.append(lo)
        maxs.append(hi)
        prov.append(tuple(provenance[src]))
    full = WindowedDataset(np.array(clean), np.array(noisy), kinds,
                           np.array(mins), np.array(maxs), prov)
    a = split["train"]
    b = a + split["val"]
    return (full.subset(range(0, a)), full.subset(range(a, b)),
            full.subset(range(b, need)))


def fingerprint(path) -> str:
    """SHA-256 of a file's bytes."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
