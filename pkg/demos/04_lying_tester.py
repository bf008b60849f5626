"""One tester reports inverted accuracies; the mean fusion shrugs.

Client 9 trains honestly but, whenever the rotation makes it a tester,
reports 1 - accuracy for every model it evaluates.  Because each
evaluated model's score is the mean over all testers of the round and
the liar holds one vote among several honest ones each time it serves,
the distortion washes out: final accuracy lands within a whisker of
the all-honest run.

The run prints both trajectories side by side plus the worst per-round
accuracy difference.
"""

from fedsim import (Architecture, Behavior, SimConfig, TrainConfig,
                    derive_seed, generate_synthetic, run_simulation)

SEED = 1


def build_config(lying):
    behaviors = [Behavior() for _ in range(10)]
    if lying:
        behaviors[9] = Behavior("lying_tester", policy="invert")
    return SimConfig(
        method="fedtest",
        num_clients=10,
        rounds=30,
        arch=Architecture((8, 32, 8)),
        train=TrainConfig(epochs=2, batch_size=16, learning_rate=0.04),
        behaviors=tuple(behaviors),
        seed=SEED,
        classes_per_client=(2, 4),
        samples_per_class=(10, 40),
        num_testers=2,
    )


def main():
    dataset = generate_synthetic(C=8, dim=8, per_class=800,
                                 spread=0.6, seed=derive_seed(SEED, "data"))
    honest = run_simulation(build_config(lying=False), dataset)
    lying = run_simulation(build_config(lying=True), dataset)

    print("round  all honest  one liar   difference")
    worst = 0.0
    for h, l in zip(honest, lying):
        diff = h.global_accuracy - l.global_accuracy
        worst = max(worst, abs(diff))
        print(f"{h.round_index:5d}  {h.global_accuracy:10.4f}  "
              f"{l.global_accuracy:9.4f}  {diff:+.4f}")

    drop = honest[-1].global_accuracy - lying[-1].global_accuracy
    print(f"\nfinal accuracy drop from the lying tester: {drop:+.4f} "
          f"(worst per-round gap {worst:.4f})")


if __name__ == "__main__":
    main()
