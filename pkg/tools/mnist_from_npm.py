"""Convert the digits bundled in the npm ``mnist`` package to IDX files.

The package ships 10 000 MNIST digits as JSON (one file per class, pixel
values stored as ``round(byte / 255, 3)``).  Bytes are recovered exactly by
``round(v * 255)``.  Usage::

    npm pack mnist
    python tools/mnist_from_npm.py mnist-1.1.0.tgz data/mnist

The first 90 % of every class goes to the train split, the rest to the test
split.  Within a split the classes are interleaved (sample 0 of every class,
then sample 1, ...) so that truncating the file keeps the classes balanced.
"""
import argparse
import gzip
import json
import struct
import tarfile
from pathlib import Path

import numpy as np


def read_digits(source):
    source = Path(source)
    digits = {}
    if source.is_file():
        with tarfile.open(source) as tar:
            for k in range(10):
                member = tar.getmember(f"package/src/digits/{k}.json")
                digits[k] = json.load(tar.extractfile(member))["data"]
    else:
        for k in range(10):
            with open(source / "src" / "digits" / f"{k}.json") as fh:
                digits[k] = json.load(fh)["data"]
    out = {}
    for k, flat in digits.items():
        values = np.asarray(flat, dtype=np.float64).reshape(-1, 28, 28)
        out[k] = np.rint(values * 255.0).astype(np.uint8)
    return out


def interleave(per_class):
    images, labels = [], []
    longest = max(len(v) for v in per_class.values())
    for i in range(longest):
        for k in sorted(per_class):
            if i < len(per_class[k]):
                images.append(per_class[k][i])
                labels.append(k)
    return np.stack(images), np.asarray(labels, dtype=np.uint8)


def write_idx(path, array, magic):
    header = struct.pack(">I", magic) + b"".join(struct.pack(">I", d) for d in array.shape)
    with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as fh:
        fh.write(header + array.tobytes())


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("source", help="npm tarball or extracted package directory")
    parser.add_argument("dest", help="output directory")
    parser.add_argument("--train-fraction", type=float, default=0.9)
    args = parser.parse_args()

    digits = read_digits(args.source)
    train, test = {}, {}
    for k, imgs in digits.items():
        cut = int(round(len(imgs) * args.train_fraction))
        train[k], test[k] = imgs[:cut], imgs[cut:]

    dest = Path(args.dest)
    dest.mkdir(parents=True, exist_ok=True)
    for prefix, split in (("train", train), ("t10k", test)):
        images, labels = interleave(split)
        write_idx(dest / f"{prefix}-images-idx3-ubyte.gz", images, 2051)
        write_idx(dest / f"{prefix}-labels-idx1-ubyte.gz", labels, 2049)
        print(f"{prefix}: {len(labels)} images")


if __name__ == "__main__":
    main()
