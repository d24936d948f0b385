"""MNIST 3-vs-6 experiment: IDX ingestion, 4x4 binarization and QNN training."""
from __future__ import annotations

import gzip
import json
import struct
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

from .core import StateVector, init_basis_state
from .errors import ConfigError, FormatError, InvalidArgument
from .qnn import GRAD_MODES, EpochStats, QnnModel, TrainConfig, layered_model, qnn_forward, train_sgd, write_training_log

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049
DOWNSCALE_METHODS = ("bilinear", "block")
SIDE = 4


@dataclass(frozen=True, eq=False)
class RawImage:
    width: int
    height: int
    intensities: np.ndarray  # shape (height, width), values in [0, 1]

    def __post_init__(self):
        a = np.array(self.intensities, dtype=float)
        if int(self.width) < 1 or int(self.height) < 1:
            raise InvalidArgument("image dimensions must be positive")
        if a.shape != (int(self.height), int(self.width)):
            raise InvalidArgument(f"intensities shape {a.shape} != ({self.height}, {self.width})")
        if a.size and (a.min() < 0.0 or a.max() > 1.0):
            raise InvalidArgument("intensities must lie in [0, 1]")
        a.setflags(write=False)
        object.__setattr__(self, "intensities", a)

    @classmethod
    def from_array(cls, a) -> "RawImage":
        a = np.asarray(a, dtype=float)
        return cls(a.shape[1], a.shape[0], a)


@dataclass(frozen=True, eq=False)
class BinaryExample:
    pixels: np.ndarray  # +-1 entries, row-major 4x4
    label: int

    def __post_init__(self):
        p = np.array(self.pixels, dtype=np.int8).reshape(-1)
        if not np.all((p == 1) | (p == -1)):
            raise InvalidArgument("pixels must be +1 or -1")
        if self.label not in (1, -1):
            raise InvalidArgument(f"label must be +1 or -1, got {self.label!r}")
        p.setflags(write=False)
        object.__setattr__(self, "pixels", p)
        object.__setattr__(self, "label", int(self.label))

    def key(self) -> bytes:
        return self.pixels.tobytes()


# ---------------------------------------------------------------------------
# IDX files
# ---------------------------------------------------------------------------


def _read_bytes(path) -> bytes:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        try:
            raw = gzip.decompress(raw)
        except (OSError, EOFError) as exc:
            raise FormatError(f"{path}: corrupt gzip stream ({exc})", 0) from None
    return raw


def read_idx(path, magic: int) -> np.ndarray:
    """Unsigned-byte IDX tensor from ``path`` (optionally gzipped)."""
    raw = _read_bytes(path)
    if len(raw) < 4:
        raise FormatError(f"{path}: file too short for an IDX header", len(raw))
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise FormatError(f"{path}: bad magic {found}, expected {magic}", 0)
    ndim = raw[3]
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise FormatError(f"{path}: truncated header", len(raw))
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    count = int(np.prod(dims, dtype=np.int64))
    if len(raw) - header < count:
        raise FormatError(f"{path}: truncated data, expected {count} bytes after header", len(raw))
    if len(raw) - header > count:
        raise FormatError(f"{path}: {len(raw) - header - count} trailing bytes", header + count)
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=header).reshape(dims)


def load_idx_arrays(images_path, labels_path) -> tuple[np.ndarray, np.ndarray]:
    """Images scaled to [0, 1] (shape (N, rows, cols)) and integer labels."""
    images = read_idx(images_path, IMAGE_MAGIC)
    labels = read_idx(labels_path, LABEL_MAGIC)
    if images.ndim != 3 or labels.ndim != 1:
        raise FormatError(f"unexpected IDX ranks {images.ndim} and {labels.ndim}", 3)
    if images.shape[0] != labels.shape[0]:
        raise FormatError(f"{images.shape[0]} images but {labels.shape[0]} labels", 4)
    return images.astype(float) / 255.0, labels.astype(int)


def load_idx(images_path, labels_path) -> list[tuple[RawImage, int]]:
    images, labels = load_idx_arrays(images_path, labels_path)
    return [(RawImage.from_array(im), int(d)) for im, d in zip(images, labels)]


def filter_digits(data: Iterable[tuple[RawImage, int]], keep: Sequence[int] = (3, 6)) -> list[tuple[RawImage, int]]:
    """Keep two digit classes; the first maps to label +1, the second to -1."""
    pos, neg = keep
    return [(im, 1 if d == pos else -1) for im, d in data if d in (pos, neg)]


# ---------------------------------------------------------------------------
# Downscaling and binarization
# ---------------------------------------------------------------------------


def _bilinear_weights(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) interpolation matrix with half-pixel centres, edge-clamped."""
    W = np.zeros((n_out, n_in))
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(int)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    rows = np.arange(n_out)
    np.add.at(W, (rows, lo), 1.0 - frac)
    np.add.at(W, (rows, hi), frac)
    return W


def downscale(image: np.ndarray, size: int = SIDE, method: str = "bilinear") -> np.ndarray:
    """Resize a 2-D intensity array to ``size x size``.

    ``bilinear`` uses half-pixel-centred sampling (for 28 -> 4 it reads the
    pixels at rows/columns 3, 10, 17, 24); ``block`` averages disjoint
    blocks and needs the side to be a multiple of ``size``.
    """
    a = np.asarray(image, dtype=float)
    if a.ndim != 2:
        raise InvalidArgument("downscale expects a 2-D image")
    h, w = a.shape
    if method == "bilinear":
        return _bilinear_weights(h, size) @ a @ _bilinear_weights(w, size).T
    if method == "block":
        if h % size or w % size:
            raise InvalidArgument(f"block averaging needs sides divisible by {size}, got {a.shape}")
        return a.reshape(size, h // size, size, w // size).mean(axis=(1, 3))
    raise InvalidArgument(f"unknown downscale method {method!r}; use one of {DOWNSCALE_METHODS}")


def binarize(a: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """+1 where intensity > threshold, else -1."""
    return np.where(np.asarray(a) > threshold, 1, -1).astype(np.int8)


def remove_contradictions(examples: Sequence[BinaryExample]) -> list[BinaryExample]:
    """Drop images whose pixel pattern carries both labels.

    Each pattern keeps only the examples carrying its majority label; patterns
    with a label tie are removed. Order is preserved.
    """
    votes: dict[bytes, Counter] = {}
    for ex in examples:
        votes.setdefault(ex.key(), Counter())[ex.label] += 1
    winner = {}
    for key, c in votes.items():
        if c[1] != c[-1]:
            winner[key] = 1 if c[1] > c[-1] else -1
    return [ex for ex in examples if winner.get(ex.key()) == ex.label]


def _as_intensities(item) -> np.ndarray:
    if isinstance(item, BinaryExample):
        return (item.pixels.reshape(SIDE, SIDE) > 0).astype(float)
    if isinstance(item, RawImage):
        return item.intensities
    return np.asarray(item, dtype=float)


def preprocess(
    data,
    threshold: float = 0.5,
    remove_conflicts: bool = True,
    method: str = "bilinear",
) -> list[BinaryExample]:
    """Downscale to 4x4, binarize, and optionally remove contradictions.

    ``data`` holds ``(RawImage, label)`` pairs or :class:`BinaryExample`
    items; the latter pass through unchanged apart from contradiction removal.
    """
    out = []
    for item in data:
        if isinstance(item, BinaryExample):
            image, label = item, item.label
        else:
            image, label = item
        a = _as_intensities(image)
        small = a if a.shape == (SIDE, SIDE) else downscale(a, SIDE, method)
        out.append(BinaryExample(binarize(small, threshold).reshape(-1), label))
    return remove_contradictions(out) if remove_conflicts else out


def example_to_state(ex: BinaryExample) -> StateVector:
    """17-qubit basis state: data qubit j is |1> iff pixel j is +1, readout |1>."""
    if ex.pixels.size != SIDE * SIDE:
        raise InvalidArgument("expected 16 pixels")
    bits = [1 if p == 1 else 0 for p in ex.pixels] + [1]
    return init_basis_state(len(bits), bits)


# ---------------------------------------------------------------------------
# Logistic-regression baseline
# ---------------------------------------------------------------------------


def logistic_baseline(train: Sequence[BinaryExample], test: Sequence[BinaryExample], l2: float = 1e-3) -> float:
    """Test accuracy of L2-regularized logistic regression on the 16 +-1 pixels."""
    X = np.array([np.append(ex.pixels, 1.0) for ex in train], dtype=float)
    y = np.array([ex.label for ex in train], dtype=float)

    def objective(w):
        m = y * (X @ w)
        loss = np.logaddexp(0.0, -m).mean() + 0.5 * l2 * w[:-1] @ w[:-1]
        grad = -(X * (y * 0.5 * (1.0 - np.tanh(0.5 * m)))[:, None]).mean(axis=0)
        grad[:-1] += l2 * w[:-1]
        return loss, grad

    w = minimize(objective, np.zeros(X.shape[1]), jac=True, method="L-BFGS-B").x
    Xt = np.array([np.append(ex.pixels, 1.0) for ex in test], dtype=float)
    pred = np.where(Xt @ w >= 0, 1, -1)
    return float(np.mean(pred == np.array([ex.label for ex in test])))


# ---------------------------------------------------------------------------
# Experiment driver
# ---------------------------------------------------------------------------


def bundled_data_dir() -> Path:
    return Path(str(resources.files("qbayes") / "data" / "mnist36"))


@dataclass
class ExperimentConfig:
    data_dir: str | None = None  # directory with the four IDX files; None = bundled subset
    train_size: int | None = 500
    test_size: int | None = 500
    full_split: bool = False
    digits: tuple[int, int] = (3, 6)
    threshold: float = 0.5
    downscale: str = "bilinear"
    remove_contradictions: bool = True
    sweeps: tuple[str, ...] = ("XX", "ZX")
    learning_rate: float = 0.003
    epochs: int = 8
    batch: int = 1
    grad_mode: str = "analytic"
    shots: int = 1000
    epsilon: float = 1e-4
    seed: int = 7
    baseline: bool = True
    threads: int = 1

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        for key in ("digits", "sweeps"):
            if key in d and d[key] is not None:
                d[key] = tuple(d[key])
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["digits"] = list(self.digits)
        d["sweeps"] = list(self.sweeps)
        return d

    def paths(self) -> dict[str, Path]:
        base = Path(self.data_dir) if self.data_dir else bundled_data_dir()
        out = {}
        for split in ("train", "t10k"):
            for kind, tag in (("images", "idx3"), ("labels", "idx1")):
                plain = base / f"{split}-{kind}-{tag}-ubyte"
                gz = plain.with_name(plain.name + ".gz")
                out[f"{split}_{kind}"] = plain if plain.exists() or not gz.exists() else gz
        return out

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            self.learning_rate, self.epochs, self.batch, self.grad_mode, self.shots, self.epsilon, self.seed
        )

    def validate(self) -> None:
        """Raise :class:`ConfigError` for any setting that cannot run."""

        def positive(name, value):
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")

        if not self.full_split:
            positive("train_size", self.train_size)
            positive("test_size", self.test_size)
        if isinstance(self.epochs, bool) or not isinstance(self.epochs, int) or self.epochs < 0:
            raise ConfigError(f"epochs must be a nonnegative integer, got {self.epochs!r}")
        positive("batch", self.batch)
        positive("shots", self.shots)
        positive("threads", self.threads)
        if not (isinstance(self.learning_rate, (int, float)) and self.learning_rate >= 0):
            raise ConfigError("learning_rate must be >= 0")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be > 0")
        if self.grad_mode not in GRAD_MODES:
            raise ConfigError(f"grad_mode must be one of {GRAD_MODES}, got {self.grad_mode!r}")
        if self.downscale not in DOWNSCALE_METHODS:
            raise ConfigError(f"downscale must be one of {DOWNSCALE_METHODS}, got {self.downscale!r}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError("threshold must lie in [0, 1]")
        if len(self.digits) != 2 or self.digits[0] == self.digits[1] or not all(0 <= d <= 9 for d in self.digits):
            raise ConfigError(f"digits must be two distinct values in 0..9, got {self.digits!r}")
        try:
            layered_model(SIDE * SIDE, self.sweeps)
        except InvalidArgument as exc:
            raise ConfigError(f"bad sweeps: {exc}") from None
        missing = [str(p) for p in self.paths().values() if not p.is_file()]
        if missing:
            raise ConfigError(f"missing data files: {missing}")


def _subsample(items: list, size: int | None, rng: np.random.Generator, what: str) -> list:
    if size is None:
        return items
    if size > len(items):
        raise ConfigError(f"{what} size {size} exceeds the {len(items)} available examples")
    idx = np.sort(rng.choice(len(items), size=size, replace=False))
    return [items[i] for i in idx]


def evaluate(model: QnnModel, examples: Sequence[BinaryExample], threads: int = 1) -> float:
    """Accuracy of the sign rule (ties -> +1) on ``examples``."""
    if not examples:
        raise InvalidArgument("cannot evaluate on an empty set")

    def hit(ex):
        return (1 if qnn_forward(model, ex.pixels) >= 0 else -1) == ex.label

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            hits = list(pool.map(hit, examples))
    else:
        hits = [hit(ex) for ex in examples]
    return float(np.mean(hits))


@dataclass
class ExperimentResult:
    report: dict
    model: QnnModel
    curve: list[EpochStats] = field(default_factory=list)


def prepare_data(cfg: ExperimentConfig) -> tuple[list[BinaryExample], list[BinaryExample], int]:
    """(train, test, number of sampled training images before contradiction removal)."""
    rng = np.random.default_rng(cfg.seed)
    p = cfg.paths()
    train_raw = filter_digits(load_idx(p["train_images"], p["train_labels"]), cfg.digits)
    test_raw = filter_digits(load_idx(p["t10k_images"], p["t10k_labels"]), cfg.digits)
    if cfg.full_split:
        sizes = (None, None)
    else:
        sizes = (cfg.train_size, cfg.test_size)
    train_raw = _subsample(train_raw, sizes[0], rng, "train")
    test_raw = _subsample(test_raw, sizes[1], rng, "test")
    train = preprocess(train_raw, cfg.threshold, cfg.remove_contradictions, cfg.downscale)
    test = preprocess(test_raw, cfg.threshold, False, cfg.downscale)
    if not train:
        raise ConfigError("no training examples left after preprocessing")
    return train, test, len(train_raw)


def run_experiment(cfg: ExperimentConfig | dict, out_dir=None) -> ExperimentResult:
    """Train the QNN on the train split and score the sign rule on the test split.

    With ``out_dir`` set, writes ``report.json`` (deterministic for a fixed
    seed in analytic mode), ``timing.json`` (wall time), ``curve.csv``
    (epoch, mean_loss, running accuracy) and ``model.json``.
    """
    if isinstance(cfg, dict):
        cfg = ExperimentConfig.from_dict(cfg)
    cfg.validate()
    start = time.perf_counter()
    train, test, sampled = prepare_data(cfg)

    model = layered_model(SIDE * SIDE, cfg.sweeps)
    curve: list[EpochStats] = []
    model, losses = train_sgd(model, [(ex.pixels, ex.label) for ex in train], cfg.train_config(), curve.append)
    acc = evaluate(model, test, cfg.threads)

    report = {
        "train_size": len(train),
        "train_sampled": sampled,
        "test_size": len(test),
        "epochs": cfg.epochs,
        "final_loss": losses[-1] if losses else None,
        "accuracy": acc,
        "seed": cfg.seed,
        "config": {k: v for k, v in cfg.to_dict().items() if k not in ("data_dir", "threads")},
    }
    if cfg.baseline:
        report["baseline_accuracy"] = logistic_baseline(train, test)
    wall = time.perf_counter() - start

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        (out / "timing.json").write_text(json.dumps({"wall_time": wall}, indent=2) + "\n")
        write_training_log(out / "curve.csv", curve)
        model.save(out / "model.json")
    report = dict(report, wall_time=wall)
    return ExperimentResult(report, model, curve)
