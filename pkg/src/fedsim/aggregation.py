"""Model aggregation strategies and the peer-score engine.

Three ways to weight client models before averaging:

  * sample counts (classic federated averaging),
  * accuracies measured by the server on a held-out set,
  * smoothed peer-test scores raised to a sharpening power.

Peer scores are exponentially smoothed accuracies: each round the mean
of the testers' reports for a client is folded into that client's
running score, and clients that were not measured keep their score
unchanged.  Raising scores to a power > 1 at weight time emphasizes
well-performing models and crushes the weight of poor ones, which is
what makes the scheme resistant to clients that upload junk.

All functions are pure value-in/value-out and thread-safe.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .learner import ModelParams

WEIGHT_SUM_TOL = 1e-9


@dataclass(frozen=True)
class AggregationWeights:
    """Nonnegative weights over contributing clients, summing to 1.

    `uniform_fallback` is set when the inputs gave no usable signal
    (all-zero accuracies or scores) and uniform weights were substituted.
    """

    w: np.ndarray
    uniform_fallback: bool = False

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        object.__setattr__(self, "w", w)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty vector")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(float(w.sum()) - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights must sum to 1, got {w.sum()!r}")


@dataclass(frozen=True)
class ScoreBoard:
    """Per-client running scores in [0, 1] with their smoothing factor
    and the sharpening power used at weight time."""

    scores: np.ndarray
    beta: float = 0.5
    power: float = 4.0

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        object.__setattr__(self, "scores", scores)
        if scores.ndim != 1 or scores.size == 0:
            raise ValueError("scores must be a non-empty vector")
        if np.any(scores < 0) or np.any(scores > 1):
            raise ValueError("scores must lie in [0, 1]")
        if not (0 < self.beta <= 1):
            raise ValueError("beta must lie in (0, 1]")
        if self.power <= 0:
            raise ValueError("power must be positive")

    @classmethod
    def initial(cls, num_clients: int, num_classes: int, beta: float = 0.5,
                power: float = 4.0) -> "ScoreBoard":
        """Neutral prior: every client starts at chance accuracy 1/C."""
        return cls(np.full(num_clients, 1.0 / num_classes), beta, power)


def weighted_aggregate(models: list, weights: AggregationWeights) -> ModelParams:
    """Convex combination of models: theta_out = sum_i w_i * theta_i.

    Computed anchored on the first model, theta_0 + sum_i w_i * (theta_i
    - theta_0), which is algebraically identical but returns a model
    exactly (bit for bit) when all inputs are equal or when one weight
    is 1 — the fixed points the round loop relies on.
    """
    if not models:
        raise ValueError("need at least one model")
    if len(models) != weights.w.size:
        raise ValueError(
            f"{len(models)} models but {weights.w.size} weights"
        )
    arch = models[0].arch
    for m in models[1:]:
        if m.arch != arch:
            raise ValueError(
                f"architecture mismatch: {m.arch.layer_sizes} vs {arch.layer_sizes}"
            )
    theta = models[0].theta.copy()
    for m, w in zip(models[1:], weights.w[1:]):
        theta += w * (m.theta - models[0].theta)
    return ModelParams(arch, theta)


def fedavg_weights(sample_counts) -> AggregationWeights:
    """Weights proportional to each client's sample count."""
    counts = np.asarray(sample_counts, dtype=np.float64)
    if counts.size == 0:
        raise ValueError("need at least one sample count")
    if np.any(counts < 1):
        raise ValueError("sample counts must be >= 1")
    return AggregationWeights(counts / counts.sum())


def accuracy_weights(server_accuracies) -> AggregationWeights:
    """Weights proportional to server-measured accuracy per model.

    All-zero accuracies carry no signal; fall back to uniform weights
    and flag it rather than dividing by zero.
    """
    acc = np.asarray(server_accuracies, dtype=np.float64)
    if acc.size == 0:
        raise ValueError("need at least one accuracy")
    if np.any(acc < 0) or np.any(acc > 1):
        raise ValueError("accuracies must lie in [0, 1]")
    total = acc.sum()
    if total == 0:
        return AggregationWeights(np.full(acc.size, 1.0 / acc.size),
                                  uniform_fallback=True)
    return AggregationWeights(acc / total)


def update_scores(board: ScoreBoard, round_accuracies) -> ScoreBoard:
    """Fold one round of fused accuracy measurements into the scores.

    `round_accuracies` holds, per client, the mean accuracy this round's
    testers reported for that client, or None for clients that were not
    measured (the round's own testers), whose scores carry over.
    s_i <- (1 - beta) * s_i + beta * a_i keeps every score inside [0, 1].
    """
    if len(round_accuracies) != board.scores.size:
        raise ValueError(
            f"{len(round_accuracies)} measurements for {board.scores.size} clients"
        )
    scores = board.scores.copy()
    for i, a in enumerate(round_accuracies):
        if a is None:
            continue
        a = float(a)
        if not (0.0 <= a <= 1.0):
            raise ValueError(f"accuracy {a} for client {i} outside [0, 1]")
        scores[i] = (1.0 - board.beta) * scores[i] + board.beta * a
    return replace(board, scores=scores)


def fedtest_weights(board: ScoreBoard, participants) -> AggregationWeights:
    """Sharpened score weights over the given clients.

    w_i = s_i^p / sum_j s_j^p restricted to `participants` (client ids
    into the board).  All-zero scores fall back to uniform with a flag.
    """
    idx = np.asarray(participants, dtype=np.intp)
    if idx.size == 0:
        raise ValueError("participants must be non-empty")
    powered = board.scores[idx] ** board.power
    total = powered.sum()
    if total == 0:
        return AggregationWeights(np.full(idx.size, 1.0 / idx.size),
                                  uniform_fallback=True)
    return AggregationWeights(powered / total)
