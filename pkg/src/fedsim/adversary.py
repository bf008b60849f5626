"""Client misbehavior models.

Two attack surfaces exist in the round loop: the model a client uploads
and the accuracy reports it files when serving as a tester.  Both are
covered here as pure functions of a seed so that runs stay replayable.

`random_weights` clients upload noise instead of a trained model.
`lying_tester` clients train honestly but distort their reports.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .learner import Architecture, ModelParams

BEHAVIOR_KINDS = ("honest", "random_weights", "lying_tester")
LIE_POLICIES = ("invert", "constant_high", "random")


@dataclass(frozen=True)
class Behavior:
    """What a client actually does each round.

    Args:
        kind: one of BEHAVIOR_KINDS.
        scale: stddev of the noise uploaded by random_weights clients.
        policy: report distortion used by lying_tester clients, one of
            LIE_POLICIES.
    """

    kind: str = "honest"
    scale: float = 1.0
    policy: str = "invert"

    def __post_init__(self):
        if self.kind not in BEHAVIOR_KINDS:
            raise ValueError(f"unknown behavior kind {self.kind!r}")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if self.policy not in LIE_POLICIES:
            raise ValueError(f"unknown lie policy {self.policy!r}")


def malicious_update(arch: Architecture, scale: float, seed: int) -> ModelParams:
    """Pure-noise parameter vector, theta ~ Normal(0, scale^2)."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    rng = np.random.default_rng(seed)
    theta = scale * rng.standard_normal(arch.param_count)
    return ModelParams(arch, theta)


def lying_report(accuracies, policy: str, seed: int) -> np.ndarray:
    """Distorted accuracy reports in place of the measured ones.

    invert flips each accuracy to 1 - a, constant_high reports 1.0 for
    everyone, random replaces reports with Uniform(0, 1) draws.  Output
    stays inside [0, 1] whatever the policy.
    """
    acc = np.asarray(accuracies, dtype=np.float64)
    if acc.ndim != 1:
        raise ValueError("accuracies must be a vector")
    if acc.size and (np.any(acc < 0) or np.any(acc > 1)):
        raise ValueError("accuracies must lie in [0, 1]")
    if policy == "invert":
        return 1.0 - acc
    if policy == "constant_high":
        return np.ones_like(acc)
    if policy == "random":
        rng = np.random.default_rng(seed)
        return rng.uniform(0.0, 1.0, acc.size)
    raise ValueError(f"unknown lie policy {policy!r}")
