"""Build the bundled 3-vs-6 MNIST subset as gzipped IDX files.

Source: the 5000-sample MNIST excerpt shipped with mlxtend
(``mlxtend/data/data/mnist_5k.csv.gz``, 500 images per digit, 784 pixel
columns then the label). The first 250 threes and 250 sixes form the
training split, the remaining 250 + 250 the test split.

    python3 scripts/make_mnist36.py [--src CSV] [--out DIR]
"""
import argparse
import gzip
import struct
from pathlib import Path

import numpy as np


def default_source() -> Path:
    import mlxtend

    return Path(mlxtend.__file__).parent / "data" / "data" / "mnist_5k.csv.gz"


def write_idx(path: Path, array: np.ndarray, magic: int) -> None:
    header = struct.pack(">I", magic) + b"".join(struct.pack(">I", d) for d in array.shape)
    # mtime=0 keeps the archives byte-reproducible
    with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0, filename="") as fh:
        fh.write(header + array.astype(np.uint8).tobytes())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--src", type=Path, default=None)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "src" / "qbayes" / "data" / "mnist36")
    ap.add_argument("--per-class-train", type=int, default=250)
    args = ap.parse_args(argv)

    table = np.loadtxt(args.src or default_source(), delimiter=",", dtype=np.int64)
    pixels, digits = table[:, :-1], table[:, -1]
    train, test = [], []
    for d in (3, 6):
        idx = np.flatnonzero(digits == d)
        train.append(idx[: args.per_class_train])
        test.append(idx[args.per_class_train :])
    args.out.mkdir(parents=True, exist_ok=True)
    for name, parts in (("train", train), ("t10k", test)):
        idx = np.sort(np.concatenate(parts))
        write_idx(args.out / f"{name}-images-idx3-ubyte.gz", pixels[idx].reshape(-1, 28, 28), 2051)
        write_idx(args.out / f"{name}-labels-idx1-ubyte.gz", digits[idx], 2049)
        print(f"{name}: {idx.size} images")


if __name__ == "__main__":
    main()
