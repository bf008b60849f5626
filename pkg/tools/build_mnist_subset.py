"""Rebuild data/mnist_subset from the `mnist` npm package.

Usage:
    python tools/build_mnist_subset.py <path to node_modules/mnist> [outdir]

The package stores each digit's images as pixel floats normalized by an
exact /255, so multiplying back and rounding recovers the original
bytes losslessly. A fixed seed makes the rebuild reproduce the
committed files byte for byte.
"""

import json
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from fedsim.data import load_idx, write_idx  # noqa: E402

SEED = 20260816
PER_CLASS = 300


def main() -> int:
    if len(sys.argv) < 2:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    pkg = sys.argv[1]
    outdir = sys.argv[2] if len(sys.argv) > 2 else "data/mnist_subset"
    os.makedirs(outdir, exist_ok=True)

    rng = np.random.default_rng(SEED)
    images, labels = [], []
    for digit in range(10):
        path = os.path.join(pkg, "src", "digits", f"{digit}.json")
        with open(path) as f:
            arr = np.array(json.load(f)["data"],
                           dtype=np.float64).reshape(-1, 784)
        pick = rng.choice(arr.shape[0], PER_CLASS, replace=False)
        pick.sort()
        images.append(arr[pick])
        labels.append(np.full(PER_CLASS, digit, dtype=np.uint8))

    X = np.concatenate(images)
    y = np.concatenate(labels)
    order = rng.permutation(X.shape[0])
    X, y = X[order], y[order]
    raw = np.rint(X * 255).astype(np.uint8).reshape(-1, 28, 28)

    images_path = os.path.join(outdir, "images-idx3-ubyte.gz")
    labels_path = os.path.join(outdir, "labels-idx1-ubyte.gz")
    write_idx(raw, y, images_path, labels_path)

    ds = load_idx(images_path, labels_path)
    assert ds.num_samples == 10 * PER_CLASS
    assert np.array_equal(np.rint(ds.features * 255).astype(np.uint8),
                          raw.reshape(-1, 784))
    print(f"wrote {images_path} and {labels_path} "
          f"({ds.num_samples} samples, classes balanced)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
