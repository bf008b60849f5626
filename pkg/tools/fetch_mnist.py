"""Download the full official MNIST IDX files (gzipped).

Usage:
    python tools/fetch_mnist.py [outdir]

Grabs train and test pairs from a stable public mirror into outdir
(default ./mnist). Point data.images / data.labels at the results to
run experiments on the full corpus.
"""

import os
import sys
import urllib.request

MIRROR = "https://ossci-datasets.s3.amazonaws.com/mnist/"
FILES = (
    "train-images-idx3-ubyte.gz",
    "train-labels-idx1-ubyte.gz",
    "t10k-images-idx3-ubyte.gz",
    "t10k-labels-idx1-ubyte.gz",
)


def main() -> int:
    outdir = sys.argv[1] if len(sys.argv) > 1 else "mnist"
    os.makedirs(outdir, exist_ok=True)
    for name in FILES:
        dest = os.path.join(outdir, name)
        if os.path.exists(dest):
            print(f"{dest} already present, skipping")
            continue
        print(f"fetching {MIRROR}{name}")
        urllib.request.urlretrieve(MIRROR + name, dest)
    print(f"done, files in {outdir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
