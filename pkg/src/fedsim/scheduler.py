"""Tester rotation, transmission-slot layout, and communication accounting.

Every round, K of the N clients act as testers.  All N clients upload a
model, one per logical transmission slot; testers transmit last because
their payload also carries the accuracies they measured for the N - K
models under test.  Slots are purely logical here: the simulator only
accounts bytes, it does not model rates or channels.

Accuracy reports travel as 8-byte floats, so a tester's uplink payload
is one model plus (N - K) * 8 bytes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ACCURACY_REPORT_BYTES = 8
SELECTION_POLICIES = ("round_robin", "random")


@dataclass(frozen=True)
class RoundSchedule:
    """One round's tester set, slot assignment, and byte budget.

    `slot_of[i]` is the transmission slot of client i.  Slots form a
    permutation of 0..N-1 with the testers occupying the last K.
    """

    round_index: int
    testers: tuple
    slot_of: tuple
    bytes_per_model: int

    def __post_init__(self):
        n = len(self.slot_of)
        k = len(self.testers)
        if self.round_index < 0:
            raise ValueError("round index must be nonnegative")
        if not 1 <= k < n:
            raise ValueError(f"need 1 <= testers < clients, got {k} of {n}")
        if len(set(self.testers)) != k or not all(0 <= t < n for t in self.testers):
            raise ValueError("testers must be distinct client ids")
        if sorted(self.slot_of) != list(range(n)):
            raise ValueError("slots must be a permutation of 0..N-1")
        if {self.slot_of[t] for t in self.testers} != set(range(n - k, n)):
            raise ValueError("testers must hold the last K slots")
        if self.bytes_per_model < 1:
            raise ValueError("bytes_per_model must be positive")

    @property
    def num_clients(self) -> int:
        return len(self.slot_of)

    @property
    def trainers(self) -> tuple:
        """Non-tester client ids in ascending order."""
        return tuple(i for i in range(self.num_clients) if i not in set(self.testers))

    @property
    def bytes_uplink(self) -> int:
        """N model sends plus K report bundles of N-K entries each."""
        n, k = self.num_clients, len(self.testers)
        return n * self.bytes_per_model + k * (n - k) * ACCURACY_REPORT_BYTES

    @property
    def bytes_downlink(self) -> int:
        """One broadcast of the aggregated model."""
        return self.bytes_per_model


def _check_selection_args(round_index, num_clients, num_testers, policy):
    if round_index < 0:
        raise ValueError("round index must be nonnegative")
    if not 1 <= num_testers < num_clients:
        raise ValueError(
            f"need 1 <= K < N, got K={num_testers}, N={num_clients}"
        )
    if policy not in SELECTION_POLICIES:
        raise ValueError(f"unknown selection policy {policy!r}")


def select_testers(round_index: int, num_clients: int, num_testers: int,
                   policy: str, seed: int) -> tuple:
    """The tester ids for one round, in ascending order.

    round_robin walks K consecutive ids per round, (round*K + j) mod N,
    so all N clients serve within ceil(N/K) rounds.  random draws K ids
    without replacement from a stream seeded once at round 0, redrawing
    whenever a draw repeats the previous round's set; replaying the
    stream makes the result a pure function of (round, seed).
    """
    _check_selection_args(round_index, num_clients, num_testers, policy)
    if policy == "round_robin":
        start = round_index * num_testers
        return tuple(sorted((start + j) % num_clients
                            for j in range(num_testers)))
    rng = np.random.default_rng(seed)
    previous = None
    for _ in range(round_index + 1):
        draw = tuple(sorted(rng.choice(num_clients, num_testers, replace=False)))
        while draw == previous:
            draw = tuple(sorted(rng.choice(num_clients, num_testers,
                                           replace=False)))
        previous = draw
    return tuple(int(t) for t in previous)


def build_schedule(round_index: int, num_clients: int, num_testers: int,
                   policy: str, seed: int, model_bytes: int,
                   testers=None) -> RoundSchedule:
    """Assemble the round's full schedule.

    Trainers fill slots 0..N-K-1 in id order and testers the final K
    slots, mirroring a round where testing happens before the testers'
    own uplink.  Pass `testers` to schedule an externally chosen set
    (e.g. one rotated over a restricted pool) instead of selecting here.
    """
    if testers is None:
        testers = select_testers(round_index, num_clients, num_testers,
                                 policy, seed)
    else:
        _check_selection_args(round_index, num_clients, num_testers, policy)
        testers = tuple(sorted(int(t) for t in testers))
        if len(testers) != num_testers:
            raise ValueError(
                f"expected {num_testers} testers, got {len(testers)}"
            )
    tester_set = set(testers)
    slot_of = [0] * num_clients
    slot = 0
    for i in range(num_clients):
        if i not in tester_set:
            slot_of[i] = slot
            slot += 1
    for j, t in enumerate(testers):
        slot_of[t] = num_clients - num_testers + j
    return RoundSchedule(round_index, testers, tuple(slot_of), model_bytes)
