"""Command-line interface: ``wavegate {prepare,train,denoise,eval,sweep}``.

Every command writes into a fresh output directory (``--out``, default
``$WAVEGATE_OUT/<command>`` or ``runs/<command>``) containing delimited
tables, a ``manifest.json`` and PNG figures. Existing outputs are only
replaced with ``--force``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import platform
import shutil
import sys
import tempfile
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, plotting
from .dataset import (DEFAULT_SAMPLE_RATE, DEFAULT_WINDOW_SECONDS, REFERENCE_SPLIT,
                      WindowedDataset, denormalize, fingerprint, fit_split, load_record,
                      make_corpus, normalize, synthetic_windows, window)
from .denoiser import DenoiserModel, TrainConfig, train
from .errors import DataError, MaxLevelWarning, NumericError
from .metrics import evaluate
from .network import load_checkpoint, save_checkpoint
from .noise import DEFAULT_SPECS, NoiseSpec
from .wavelet import WAVELET_NAMES, max_level, subsignal_matrix

log = logging.getLogger("wavegate")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
OUT_ENV = "WAVEGATE_OUT"
SPLIT_FILES = ("train", "val", "test")


class UsageError(ValueError):
    pass


def code_hash() -> str:
    """Git-style blob hash of the tool version string."""
    blob = __version__.encode()
    return hashlib.sha1(b"blob %d\0" % len(blob) + blob).hexdigest()


# -- output handling ---------------------------------------------------------

def _default_out(command: str) -> Path:
    return Path(os.environ.get(OUT_ENV, "runs")) / command


@contextmanager
def staged_output(out: Path, force: bool):
    """Yield a scratch directory that replaces ``out`` only on success."""
    out = Path(out)
    if out.exists() and (out.is_file() or any(out.iterdir())) and not force:
        raise UsageError(f"{out} already exists; pass --force to overwrite")
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}-", dir=out.parent))
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if out.exists():
        shutil.rmtree(out) if out.is_dir() else out.unlink()
    tmp.rename(out)


def write_manifest(path: Path, command: str, config: dict, inputs: dict,
                   started: float, **extra) -> Path:
    manifest = {
        "command": command,
        "config": config,
        "inputs": inputs,
        "tool_version": __version__,
        "code_hash": code_hash(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "started": time.strftime("%Y-%m-%dT%H:%M:%S%z", time.localtime(started)),
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        **extra,
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable))
    return path


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def read_signal(path, column: str | None = None) -> np.ndarray:
    """One sample per line, or a single-column CSV with a header row."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such signal file")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty signal file")
    header = None
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        header = [c.strip() for c in rows.pop(0)]
    if not rows:
        raise DataError(f"{path}: header but no samples")
    col = 0
    if column is not None:
        if header is None or column not in header:
            raise DataError(f"{path}: no column {column!r}")
        col = header.index(column)
    elif len(rows[0]) > 1:
        raise DataError(f"{path}: expected a single column; use --column")
    try:
        return np.array([float(r[col]) for r in rows])
    except (ValueError, IndexError):
        raise DataError(f"{path}: non-numeric sample") from None


def load_split(data_dir, name: str) -> WindowedDataset:
    return WindowedDataset.load(Path(data_dir) / f"{name}.npz")


def _require_dir(path, what="dataset directory") -> Path:
    path = Path(path)
    if not path.is_dir():
        raise DataError(f"{path}: {what} does not exist")
    return path


def _parse_split(text: str) -> dict:
    try:
        parts = [int(p) for p in text.split(",")]
    except ValueError:
        raise UsageError(f"split must be three integers, got {text!r}") from None
    if len(parts) != 3 or min(parts) < 0:
        raise UsageError(f"split must be train,val,test counts, got {text!r}")
    return dict(zip(SPLIT_FILES, parts))


# -- commands ----------------------------------------------------------------

def cmd_prepare(args) -> int:
    started = time.time()
    specs = [NoiseSpec.parse(s) for s in args.noise] if args.noise else list(DEFAULT_SPECS)
    inputs, provenance = {}, []
    if args.synthetic:
        signals = synthetic_windows(args.windows, seed=args.seed,
                                    sample_rate=args.sample_rate,
                                    duration=args.window_seconds)
        provenance = [("synthetic", i) for i in range(len(signals))]
        default_split = _desk_split(len(signals))
    else:
        if args.input_dir is None:
            raise UsageError("pass --input-dir or --synthetic")
        src = _require_dir(args.input_dir, "input directory")
        files = sorted(src.glob(args.pattern))
        if not files:
            raise DataError(f"{src}: no files match {args.pattern!r}")
        signals = []
        for f in files:
            rec = load_record(f, args.channel, args.sample_rate)
            inputs[str(f)] = fingerprint(f)
            width = int(round(args.window_seconds * rec.sample_rate))
            for k, w in enumerate(window(rec, args.window_seconds)):
                if np.ptp(w) > 0:
                    signals.append(w)
                    provenance.append((rec.subject, k * width))
        default_split = dict(REFERENCE_SPLIT)
    split_scaled = False
    if args.split:
        split = _parse_split(args.split)
    else:
        split, split_scaled = fit_split(default_split, len(signals))
        if split_scaled:
            log.warning("only %d windows available; default split scaled to %s",
                        len(signals), split)
    parts = make_corpus(signals, specs, split, seed=args.seed, provenance=provenance)
    out = Path(args.out or _default_out("prepare"))
    with staged_output(out, args.force) as tmp:
        counts = {}
        for name, ds in zip(SPLIT_FILES, parts):
            ds.save(tmp / f"{name}.npz")
            counts[name] = len(ds)
        _plot_examples(parts[0], tmp / "examples.png")
        config = {
            "source": "synthetic" if args.synthetic else "records",
            "windows_available": len(signals),
            "window_seconds": args.window_seconds,
            "sample_rate": args.sample_rate,
            "channel": None if args.synthetic else args.channel,
            "noise": [s.to_dict() for s in specs],
            "split": split,
            "split_scaled_to_fit": split_scaled,
            "seed": args.seed,
            "scale": "desk" if args.synthetic else "records",
        }
        write_manifest(tmp / "manifest.json", "prepare", config, inputs, started,
                       counts=counts,
                       outputs={n: fingerprint(tmp / f"{n}.npz") for n in SPLIT_FILES})
    print(f"prepared {counts} -> {out}")
    return EXIT_OK


def _desk_split(n: int) -> dict:
    val = test = n // 10
    return {"train": n - val - test, "val": val, "test": test}


def _plot_examples(ds: WindowedDataset, path):
    if len(ds) == 0:
        return
    first = {}
    for i, k in enumerate(ds.kinds):
        first.setdefault(k, i)
    import matplotlib.pyplot as plt
    with plt.rc_context(plotting.REPORT_STYLE):
        fig, axes = plt.subplots(len(first), 1, sharex=True, squeeze=False,
                                 figsize=(6.4, 1.6 * len(first) + 0.6))
        for ax, (kind, i) in zip(axes[:, 0], sorted(first.items())):
            ax.plot(ds.noisy[i], color="0.6", lw=0.7)
            ax.plot(ds.clean[i], color="k", lw=1.0)
            ax.set_ylabel(kind, fontsize=8)
        axes[-1, 0].set_xlabel("sample")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def _train_config(args) -> TrainConfig:
    if args.wavelet not in WAVELET_NAMES:
        raise UsageError(
            f"invalid wavelet {args.wavelet!r}; valid names: {', '.join(WAVELET_NAMES)}"
        )
    return TrainConfig(wavelet=args.wavelet, level=args.level, boundary=args.boundary,
                       lr=args.lr, batch_size=args.batch, val_batch_size=args.val_batch,
                       max_epochs=args.epochs, patience=args.patience, seed=args.seed)


def _load_train_val(data_dir, seed: int):
    tr = load_split(data_dir, "train")
    try:
        va = load_split(data_dir, "val")
    except DataError:
        va = None
    held_out = False
    if va is None or len(va) == 0:
        # hold out a tenth of training windows for early stopping
        n_val = max(2, len(tr) // 10)
        if len(tr) - n_val < 2:
            raise DataError("training split too small to hold out validation windows")
        perm = np.random.default_rng(seed).permutation(len(tr))
        va, tr = tr.subset(perm[:n_val]), tr.subset(perm[n_val:])
        held_out = True
    return tr, va, held_out


def _fit(cfg: TrainConfig, tr, va):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", MaxLevelWarning)
        params, report = train(tr, va, cfg)
    notes = sorted({str(w.message) for w in caught
                    if issubclass(w.category, MaxLevelWarning)})
    return params, report, notes


def _checkpoint_meta(cfg: TrainConfig, n: int) -> dict:
    return {"wavelet": cfg.wavelet, "level": cfg.level, "boundary": cfg.boundary,
            "window_len": n, "normalization": "minmax", "train_config": cfg.to_dict()}


def cmd_train(args) -> int:
    started = time.time()
    cfg = _train_config(args)
    data = _require_dir(args.data)
    tr, va, held_out = _load_train_val(data, cfg.seed)
    params, report, notes = _fit(cfg, tr, va)
    out = Path(args.out or _default_out("train"))
    with staged_output(out, args.force) as tmp:
        save_checkpoint(tmp / "model.npz", params, _checkpoint_meta(cfg, tr.window_len))
        write_csv(tmp / "metrics.csv", ("epoch", "train_mse", "val_mse"), report.rows())
        plotting.plot_training(report, tmp / "training.png")
        write_manifest(
            tmp / "manifest.json", "train", cfg.to_dict(), _data_inputs(data), started,
            report={"stopped_epoch": report.stopped_epoch, "best_epoch": report.best_epoch,
                    "best_val_mse": report.best_val_mse, "wall_time": report.wall_time},
            validation_held_out_from_train=held_out,
            max_level=max_level(tr.window_len, int(cfg.wavelet[2:])),
            warnings=notes,
        )
    for n in notes:
        log.warning(n)
    print(f"best val MSE {report.best_val_mse:.6g} at epoch {report.best_epoch} -> {out}")
    return EXIT_OK


def _data_inputs(data: Path) -> dict:
    return {str(p): fingerprint(p) for p in sorted(data.glob("*.npz"))}


def _load_model(path) -> tuple:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: checkpoint not found")
    try:
        params, meta = load_checkpoint(path)
    except (ValueError, OSError, KeyError) as exc:
        raise DataError(f"{path}: unreadable checkpoint ({exc})") from None
    model = DenoiserModel(params, meta["wavelet"], int(meta["level"]),
                          meta.get("boundary", "symmetric"))
    return model, meta


def cmd_denoise(args) -> int:
    started = time.time()
    model, meta = _load_model(args.checkpoint)
    y = read_signal(args.input, args.column)
    if not np.all(np.isfinite(y)):
        raise NumericError(f"{args.input}: input contains non-finite samples")
    if y.size != model.window_len:
        raise DataError(
            f"input has {y.size} samples but the model expects {model.window_len}"
        )
    lo, hi = 0.0, 1.0
    y_in = y
    if not args.no_normalize:
        y_in, lo, hi = normalize(y)
    xhat, a = model.denoise(y_in)
    if not np.all(np.isfinite(xhat)):
        raise NumericError("denoised output is not finite")
    out_signal = denormalize(xhat, lo, hi)
    out = Path(args.out or _default_out("denoise"))
    with staged_output(out, args.force) as tmp:
        write_csv(tmp / "denoised.csv", ("denoised",), ((float(v),) for v in out_signal))
        write_csv(tmp / "weights.csv", ("subsignal", "weight"),
                  ((f"s{i + 1}", float(w)) for i, w in enumerate(a)))
        plotting.plot_denoised(y, out_signal, tmp / "denoised.png")
        S = subsignal_matrix(y_in, model.wavelet, model.level, model.boundary).matrix
        plotting.plot_subsignals(S, tmp / "subsignals.png")
        write_manifest(tmp / "manifest.json", "denoise",
                       {"checkpoint": str(args.checkpoint), "normalize": not args.no_normalize,
                        "wavelet": model.wavelet, "level": model.level,
                        "boundary": model.boundary},
                       {str(args.input): fingerprint(args.input),
                        str(args.checkpoint): fingerprint(args.checkpoint)},
                       started, normalization={"min": lo, "max": hi})
    print(f"denoised {y.size} samples -> {out}")
    return EXIT_OK


def _summary_outputs(summary, tmp: Path) -> None:
    write_csv(tmp / "summary.csv", ("noise_kind", "method", "mse", "psnr_db"),
              summary.table())
    (tmp / "summary.json").write_text(
        json.dumps(summary.to_dict(), indent=2, sort_keys=True, default=_jsonable))
    plotting.plot_eval(summary, tmp / "eval.png")


def cmd_eval(args) -> int:
    started = time.time()
    model, meta = _load_model(args.checkpoint)
    if args.test:
        test = WindowedDataset.load(args.test)
        inputs = {str(args.test): fingerprint(args.test)}
    else:
        data = _require_dir(args.data)
        test = load_split(data, "test")
        inputs = {str(data / "test.npz"): fingerprint(data / "test.npz")}
    if len(test) == 0:
        raise DataError("test split is empty")
    if test.window_len != model.window_len:
        raise DataError(
            f"test windows have {test.window_len} samples, model expects {model.window_len}"
        )
    inputs[str(args.checkpoint)] = fingerprint(args.checkpoint)
    summary = evaluate(model, test)
    out = Path(args.out or _default_out("eval"))
    with staged_output(out, args.force) as tmp:
        _summary_outputs(summary, tmp)
        write_manifest(tmp / "manifest.json", "eval",
                       {"checkpoint": str(args.checkpoint), **meta}, inputs, started)
    print(f"MSE noisy {summary.mse_noisy:.6g} denoised {summary.mse_denoised:.6g} "
          f"({summary.reduction_percent:.2f}% reduction) -> {out}")
    return EXIT_OK


SWEEP_AXES = {
    "level": [str(v) for v in range(1, 9)],
    "wavelet": list(WAVELET_NAMES),
}
SWEEP_HEADER = ("axis", "value", "noise_kind", "mse_noisy", "mse_denoised",
                "psnr_denoised", "reduction_percent", "best_epoch")


def sweep_one(axis: str, value: str, base: dict, data_dir: str) -> list:
    """Train and score one sweep configuration; returns long-format rows."""
    cfg = dict(base)
    if axis == "level":
        cfg["level"] = int(value)
    else:
        cfg["wavelet"] = value
    cfg = TrainConfig(**cfg)
    tr, va, _ = _load_train_val(Path(data_dir), cfg.seed)
    test = load_split(data_dir, "test")
    params, report, _ = _fit(cfg, tr, va)
    summary = evaluate(DenoiserModel(params, cfg.wavelet, cfg.level, cfg.boundary), test)
    rows = []
    for kind, row in sorted(summary.breakdown.items()):
        rows.append({"axis": axis, "value": value, "noise_kind": kind,
                     "mse_noisy": row.mse_noisy, "mse_denoised": row.mse_denoised,
                     "psnr_denoised": row.psnr_denoised,
                     "reduction_percent": row.reduction_percent,
                     "best_epoch": report.best_epoch})
    return rows


def run_sweep(axis: str, values, base: TrainConfig, data_dir, jobs: int = 1) -> list:
    base_d = asdict(base)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(sweep_one, axis, v, base_d, str(data_dir)) for v in values]
            parts = [f.result() for f in futures]
    else:
        parts = [sweep_one(axis, v, base_d, str(data_dir)) for v in values]
    return [row for part in parts for row in part]


def cmd_sweep(args) -> int:
    started = time.time()
    base = _train_config(args)
    data = _require_dir(args.data)
    values = args.values.split(",") if args.values else SWEEP_AXES[args.axis]
    values = [v.strip() for v in values if v.strip()]
    for v in values:
        if args.axis == "wavelet" and v not in WAVELET_NAMES:
            raise UsageError(f"invalid wavelet {v!r}; valid names: {', '.join(WAVELET_NAMES)}")
        if args.axis == "level" and (not v.isdigit() or int(v) < 1):
            raise UsageError(f"invalid level {v!r}")
    if len(load_split(data, "test")) == 0:
        raise DataError("sweep needs a non-empty test split")
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    rows = run_sweep(args.axis, values, base, data, args.jobs)
    out = Path(args.out or _default_out("sweep"))
    with staged_output(out, args.force) as tmp:
        write_csv(tmp / "sweep.csv", SWEEP_HEADER,
                  ([r[k] for k in SWEEP_HEADER] for r in rows))
        plotting.plot_sweep(rows, args.axis, tmp / "sweep.png")
        write_manifest(tmp / "manifest.json", "sweep",
                       {**base.to_dict(), "axis": args.axis, "values": values,
                        "jobs": args.jobs},
                       _data_inputs(data), started)
    print(f"sweep over {args.axis} ({len(values)} configurations, {len(rows)} rows) -> {out}")
    return EXIT_OK


# -- argument parsing --------------------------------------------------------

def _add_common(p):
    p.add_argument("--out", type=Path, help=f"output directory (default ${OUT_ENV}/<command>)")
    p.add_argument("--force", action="store_true", help="replace an existing output directory")


def _add_train_flags(p):
    p.add_argument("--data", required=True, type=Path, help="directory written by `prepare`")
    p.add_argument("--wavelet", default="db10", help="db1 .. db10 (default db10)")
    p.add_argument("--level", type=int, default=8)
    p.add_argument("--boundary", choices=("symmetric", "periodic"), default="symmetric")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=int, default=100)
    p.add_argument("--val-batch", type=int, default=100)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--patience", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavegate", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="build a (clean, noisy) corpus")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--input-dir", type=Path, help="directory of CSV records")
    src.add_argument("--synthetic", action="store_true", help="generate synthetic pulse windows")
    p.add_argument("--pattern", default="*.csv", help="record file glob (default *.csv)")
    p.add_argument("--channel", default="PLETH", help="record column to use")
    p.add_argument("--sample-rate", type=float, default=DEFAULT_SAMPLE_RATE)
    p.add_argument("--window-seconds", type=float, default=DEFAULT_WINDOW_SECONDS)
    p.add_argument("--windows", type=int, default=640, help="synthetic window count")
    p.add_argument("--noise", action="append",
                   help="noise spec, repeatable (default: the four standard models)")
    p.add_argument("--split", help="train,val,test counts")
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train a gating network")
    _add_train_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("denoise", help="denoise one signal window")
    p.add_argument("--checkpoint", required=True, type=Path)
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--column", help="column name when the input has several")
    p.add_argument("--no-normalize", action="store_true",
                   help="input is already scaled to [0, 1]")
    _add_common(p)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("eval", help="score a checkpoint on a test split")
    p.add_argument("--checkpoint", required=True, type=Path)
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--data", type=Path, help="directory written by `prepare`")
    grp.add_argument("--test", type=Path, help="a single split file")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="retrain across decomposition levels or wavelets")
    p.add_argument("--axis", choices=tuple(SWEEP_AXES), required=True)
    p.add_argument("--values", help="comma-separated subset of the axis values")
    p.add_argument("--jobs", type=int, default=1)
    _add_train_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DataError, FileNotFoundError) as exc:
        print(f"wavegate: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"wavegate: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"wavegate: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
