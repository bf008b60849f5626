"""The poisoning experiment again, on real digits.

Loads the bundled 3,000-image MNIST subset (gzipped IDX, same layout
as the official files), caps it to 2,000 samples stratified by digit,
hands each of ten clients a small non-IID shard (2 to 4 digits each),
and lets two clients upload noise.  Takes a few seconds.

    python3 demos/05_mnist_subset.py [--seed N]
"""

import argparse
import os

from fedsim import (Architecture, Behavior, SimConfig, TrainConfig,
                    derive_seed, load_idx, run_simulation, stratified_subset)

DATA_DIR = os.path.join(os.path.dirname(__file__), "..", "data",
                        "mnist_subset")


def build_config(method, seed):
    behaviors = tuple([Behavior()] * 8
                      + [Behavior("random_weights", scale=1.0)] * 2)
    return SimConfig(
        method=method,
        num_clients=10,
        rounds=30,
        arch=Architecture((784, 32, 10)),
        train=TrainConfig(epochs=2, batch_size=8, learning_rate=0.1),
        behaviors=behaviors,
        seed=seed,
        classes_per_client=(2, 4),
        samples_per_class=(10, 30),
        num_testers=3,
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()

    full = load_idx(os.path.join(DATA_DIR, "images-idx3-ubyte.gz"),
                    os.path.join(DATA_DIR, "labels-idx1-ubyte.gz"))
    dataset = stratified_subset(full, 2000, derive_seed(args.seed, "subset"))
    print(f"{dataset.num_samples} samples, {dataset.num_classes} digits, "
          f"{dataset.dim} pixels each\n")

    finals = {}
    for method in ("fedavg", "accuracy_based", "fedtest"):
        reports = run_simulation(build_config(method, args.seed), dataset)
        finals[method] = reports[-1].global_accuracy
        curve = " ".join(f"{r.global_accuracy:.2f}"
                         for r in reports[::5])
        print(f"{method:>14}: every 5th round {curve} "
              f"-> final {finals[method]:.4f}")

    print("\nthe accuracy baseline only downweights the noise uploads "
          "linearly (chance accuracy on ten digits still earns a tenth "
          "of an honest weight); the score weighting sharpens with the "
          "fourth power and locks them out almost entirely.")


if __name__ == "__main__":
    main()
