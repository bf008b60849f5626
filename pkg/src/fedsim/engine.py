"""The round state machine and multi-round experiment driver.

One simulated round, for any of the three methods:

  1. every client produces an update from the broadcast global model —
     honest and lying-tester clients train on their shard, random-weights
     clients upload seeded noise;
  2. the method assigns weights: sample counts (fedavg), accuracies the
     server measures on its held-out set (accuracy_based), or sharpened
     peer scores (fedtest) after this round's testers have evaluated all
     non-tester models and the score board absorbed the fused reports;
  3. the server aggregates and broadcasts one shared global model;
  4. the next tester set is chosen.

Every random decision is drawn from a seed derived from the experiment
seed plus a purpose label, so methods sharing a seed see identical data,
partitions, initial models, and honest updates.  Training seeds key on
shard content rather than client id: clients holding equal data compute
equal updates, which pins down the degenerate all-shards-identical case
exactly.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np

from .adversary import Behavior, lying_report, malicious_update
from .aggregation import (ScoreBoard, accuracy_weights, fedavg_weights,
                          fedtest_weights, update_scores, weighted_aggregate)
from .data import Dataset, partition_non_iid, stratified_holdout
from .learner import (Architecture, DivergenceError, ModelParams, TrainConfig,
                      evaluate, init_model, local_train, serialized_size)
from .scheduler import build_schedule, select_testers

METHODS = ("fedavg", "accuracy_based", "fedtest")
TESTER_POOLS = ("exclude_malicious", "all")


class RoundDivergenceError(DivergenceError):
    """Divergence during a simulation round; names the round and client."""

    def __init__(self, round_index: int, client: int, step: int, loss: float):
        self.round_index = round_index
        self.client = client
        self.step = step
        self.loss = loss
        RuntimeError.__init__(
            self,
            f"round {round_index}, client {client}: "
            f"non-finite loss {loss} at gradient step {step}",
        )


@dataclass(frozen=True)
class SimConfig:
    """Everything that determines a run except the dataset itself.

    Args:
        method: one of METHODS.
        num_clients: N, the number of participating clients.
        rounds: number of aggregation rounds to simulate.
        arch: shared model architecture.
        train: local training recipe; its seed field is ignored, the
            engine derives one per client and round.
        behaviors: per-client conduct, length N.
        seed: master seed from which all randomness is derived.
        classes_per_client: inclusive class-count range per shard.
        samples_per_class: inclusive per-class sample-count range.
        eval_fraction: share of data held out for the global metric.
        server_fraction: share held out as the server's test set.
        num_testers: K, testers per round (fedtest).
        beta: score smoothing factor (fedtest).
        power: score sharpening exponent (fedtest).
        tester_policy: rotation scheme, see scheduler.SELECTION_POLICIES.
        tester_pool: exclude_malicious keeps random-weights clients out
            of the tester rotation; all rotates everyone.
    """

    method: str
    num_clients: int
    rounds: int
    arch: Architecture
    train: TrainConfig
    behaviors: tuple
    seed: int
    classes_per_client: tuple = (1, 3)
    samples_per_class: tuple = (10, 30)
    eval_fraction: float = 0.2
    server_fraction: float = 0.1
    num_testers: int = 2
    beta: float = 0.5
    power: float = 4.0
    tester_policy: str = "round_robin"
    tester_pool: str = "exclude_malicious"

    def __post_init__(self):
        object.__setattr__(self, "behaviors", tuple(self.behaviors))
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.num_clients < 2:
            raise ValueError("need at least two clients")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if len(self.behaviors) != self.num_clients:
            raise ValueError(
                f"{len(self.behaviors)} behaviors for {self.num_clients} clients"
            )
        if not all(isinstance(b, Behavior) for b in self.behaviors):
            raise ValueError("behaviors must be Behavior values")
        if sum(b.kind != "honest" for b in self.behaviors) >= self.num_clients:
            raise ValueError("at least one client must stay honest")
        if not 0 < self.eval_fraction < 1:
            raise ValueError("eval_fraction must lie in (0, 1)")
        if not 0 < self.server_fraction < 1:
            raise ValueError("server_fraction must lie in (0, 1)")
        if self.eval_fraction + self.server_fraction >= 1:
            raise ValueError("holdout fractions must leave training data")
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")
        if self.power <= 0:
            raise ValueError("power must be positive")
        if self.tester_pool not in TESTER_POOLS:
            raise ValueError(f"unknown tester pool {self.tester_pool!r}")
        if self.method == "fedtest":
            pool = self._tester_ids()
            if not 1 <= self.num_testers < self.num_clients:
                raise ValueError(
                    f"need 1 <= K < N, got K={self.num_testers}, "
                    f"N={self.num_clients}"
                )
            if self.num_testers >= len(pool):
                raise ValueError(
                    f"tester pool holds {len(pool)} clients, cannot rotate "
                    f"K={self.num_testers} testers through it"
                )

    def _tester_ids(self) -> tuple:
        """Client ids eligible to serve as testers, ascending."""
        if self.tester_pool == "all":
            return tuple(range(self.num_clients))
        return tuple(i for i, b in enumerate(self.behaviors)
                     if b.kind != "random_weights")


@dataclass(frozen=True, eq=False)
class RoundState:
    """Inputs to the next round: the data plan, the broadcast model, the
    score board, and the tester set already chosen for this round."""

    dataset: Dataset
    shards: tuple
    eval_idx: np.ndarray
    server_idx: np.ndarray
    shard_keys: tuple
    global_model: ModelParams
    board: ScoreBoard
    testers: tuple
    round_index: int


@dataclass(frozen=True, eq=False)
class RoundReport:
    """What one round produced, as written to the metrics CSV.

    acc_matrix is the K x (N-K) tester-by-tested accuracy table as
    reported (lies included); None for methods without testers.  scores
    are NaN for fedavg, the server's measured accuracies for
    accuracy_based, and the smoothed board for fedtest.
    """

    round_index: int
    acc_matrix: object
    scores: np.ndarray
    weights: np.ndarray
    global_accuracy: float
    global_loss: float
    bytes_up: int
    bytes_down: int

    def __post_init__(self):
        if self.round_index < 0:
            raise ValueError("round index must be nonnegative")
        if abs(float(self.weights.sum()) - 1.0) > 1e-9 or np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative and sum to 1")
        measured = self.scores[np.isfinite(self.scores)]
        if measured.size and (np.any(measured < 0) or np.any(measured > 1)):
            raise ValueError("scores must lie in [0, 1] where defined")
        if self.acc_matrix is not None and self.acc_matrix.size:
            if np.any(self.acc_matrix < 0) or np.any(self.acc_matrix > 1):
                raise ValueError("reported accuracies must lie in [0, 1]")
        if not 0 <= self.global_accuracy <= 1:
            raise ValueError("global accuracy must lie in [0, 1]")
        if self.bytes_up < 0 or self.bytes_down < 0:
            raise ValueError("byte counts must be nonnegative")


def derive_seed(base: int, *parts) -> int:
    """A child seed for one purpose, stable across runs and platforms.

    Parts may be ints or strings; strings are hashed so that purpose
    labels like "partition" never collide with numeric indices.
    """
    words = [int(base)]
    for p in parts:
        if isinstance(p, str):
            digest = hashlib.sha256(p.encode("utf-8")).digest()
            words.append(int.from_bytes(digest[:8], "big"))
        else:
            words.append(int(p))
    seq = np.random.SeedSequence(words)
    return int(seq.generate_state(1, np.uint64)[0])


def _content_key(dataset: Dataset, idx: np.ndarray) -> int:
    """Fingerprint of a shard's actual samples, not its indices."""
    h = hashlib.sha256()
    h.update(dataset.features[idx].tobytes())
    h.update(dataset.labels[idx].tobytes())
    return int.from_bytes(h.digest()[:8], "big")


def build_state(cfg: SimConfig, dataset: Dataset, shards, eval_idx,
                server_idx) -> RoundState:
    """Assemble round-0 state from an already carved data plan."""
    if cfg.arch.input_dim != dataset.dim:
        raise ValueError(
            f"architecture expects dim {cfg.arch.input_dim}, "
            f"dataset has {dataset.dim}"
        )
    if cfg.arch.num_classes != dataset.num_classes:
        raise ValueError(
            f"architecture expects {cfg.arch.num_classes} classes, "
            f"dataset has {dataset.num_classes}"
        )
    shards = tuple(np.asarray(s, dtype=np.intp) for s in shards)
    if len(shards) != cfg.num_clients:
        raise ValueError(f"{len(shards)} shards for {cfg.num_clients} clients")
    keys = tuple(_content_key(dataset, s) for s in shards)
    model = init_model(cfg.arch, derive_seed(cfg.seed, "init"))
    board = ScoreBoard.initial(cfg.num_clients, dataset.num_classes,
                               cfg.beta, cfg.power)
    testers = _pick_testers(cfg, 0) if cfg.method == "fedtest" else ()
    return RoundState(dataset, shards, np.asarray(eval_idx, dtype=np.intp),
                      np.asarray(server_idx, dtype=np.intp), keys, model,
                      board, testers, 0)


def init_state(cfg: SimConfig, dataset: Dataset) -> RoundState:
    """Carve the holdout sets, partition the rest, and build round 0.

    The evaluation and server sets come off the top, stratified, before
    partitioning, so no shard ever overlaps either one.
    """
    eval_idx, server_idx, rest = stratified_holdout(
        dataset, (cfg.eval_fraction, cfg.server_fraction),
        derive_seed(cfg.seed, "holdout"))
    sub = dataset.select(rest)
    local = partition_non_iid(sub, cfg.num_clients, cfg.classes_per_client,
                              cfg.samples_per_class,
                              derive_seed(cfg.seed, "partition"))
    shards = tuple(np.sort(rest[s]) for s in local.shards)
    return build_state(cfg, dataset, shards, eval_idx, server_idx)


def _pick_testers(cfg: SimConfig, round_index: int) -> tuple:
    """Rotate the tester selection over the eligible pool."""
    pool = cfg._tester_ids()
    picked = select_testers(round_index, len(pool), cfg.num_testers,
                            cfg.tester_policy,
                            derive_seed(cfg.seed, "testers"))
    return tuple(pool[j] for j in picked)


def _client_updates(state: RoundState, cfg: SimConfig) -> list:
    """Each client's uploaded model for this round, in id order."""
    updates = []
    for i, behavior in enumerate(cfg.behaviors):
        if behavior.kind == "random_weights":
            updates.append(malicious_update(
                cfg.arch, behavior.scale,
                derive_seed(cfg.seed, "malicious", state.round_index, i)))
            continue
        shard = state.shards[i]
        recipe = replace(cfg.train, seed=derive_seed(
            cfg.seed, "update", state.round_index, state.shard_keys[i]))
        try:
            updates.append(local_train(
                state.global_model, state.dataset.features[shard],
                state.dataset.labels[shard], recipe))
        except DivergenceError as err:
            raise RoundDivergenceError(state.round_index, i, err.step,
                                       err.loss) from err
    return updates


def _peer_testing(state: RoundState, cfg: SimConfig, updates):
    """Testers measure every non-tester model; reports are fused by mean.

    Returns the reported K x (N-K) accuracy matrix, the fused per-client
    accuracies (None for this round's unmeasured testers), and the
    updated score board.  Lying testers distort their own row only.
    """
    testers = state.testers
    trainers = [i for i in range(cfg.num_clients) if i not in set(testers)]
    matrix = np.zeros((len(testers), len(trainers)))
    for row, t in enumerate(testers):
        shard = state.shards[t]
        X, y = state.dataset.features[shard], state.dataset.labels[shard]
        for col, j in enumerate(trainers):
            matrix[row, col] = evaluate(updates[j], X, y)["accuracy"]
        if cfg.behaviors[t].kind == "lying_tester":
            matrix[row] = lying_report(
                matrix[row], cfg.behaviors[t].policy,
                derive_seed(cfg.seed, "lie", state.round_index, t))
    fused = [None] * cfg.num_clients
    for col, j in enumerate(trainers):
        fused[j] = float(matrix[:, col].mean())
    return matrix, fused, update_scores(state.board, fused)


def run_round(state: RoundState, cfg: SimConfig):
    """Advance the simulation by one round.

    Returns (next state, report).  The report's global metrics are
    measured on the held-out evaluation set after aggregation.
    """
    n = cfg.num_clients
    updates = _client_updates(state, cfg)
    model_bytes = serialized_size(cfg.arch)
    board = state.board
    next_testers = ()
    acc_matrix = None

    if cfg.method == "fedavg":
        weights = fedavg_weights([len(s) for s in state.shards])
        scores = np.full(n, np.nan)
        bytes_up, bytes_down = n * model_bytes, model_bytes
    elif cfg.method == "accuracy_based":
        X = state.dataset.features[state.server_idx]
        y = state.dataset.labels[state.server_idx]
        measured = np.array([evaluate(m, X, y)["accuracy"] for m in updates])
        weights = accuracy_weights(measured)
        scores = measured
        bytes_up, bytes_down = n * model_bytes, model_bytes
    else:
        acc_matrix, _, board = _peer_testing(state, cfg, updates)
        weights = fedtest_weights(board, np.arange(n))
        scores = board.scores
        schedule = build_schedule(state.round_index, n, cfg.num_testers,
                                  cfg.tester_policy,
                                  derive_seed(cfg.seed, "testers"),
                                  model_bytes, testers=state.testers)
        bytes_up, bytes_down = schedule.bytes_uplink, schedule.bytes_downlink
        next_testers = _pick_testers(cfg, state.round_index + 1)

    aggregated = weighted_aggregate(updates, weights)
    metrics = evaluate(aggregated, state.dataset.features[state.eval_idx],
                       state.dataset.labels[state.eval_idx])
    report = RoundReport(state.round_index, acc_matrix, scores, weights.w,
                         metrics["accuracy"], metrics["loss"],
                         bytes_up, bytes_down)
    next_state = replace(state, global_model=aggregated, board=board,
                         testers=next_testers,
                         round_index=state.round_index + 1)
    return next_state, report


def run_rounds(state: RoundState, cfg: SimConfig) -> list:
    """Drive run_round for cfg.rounds rounds from the given state."""
    reports = []
    for _ in range(cfg.rounds):
        state, report = run_round(state, cfg)
        reports.append(report)
    return reports


def run_simulation(cfg: SimConfig, dataset: Dataset) -> list:
    """Full experiment: carve, partition, simulate, report per round."""
    return run_rounds(init_state(cfg, dataset), cfg)


def rounds_to_target(reports, target_accuracy: float):
    """Index of the first round at or above the target, or None."""
    for report in reports:
        if report.global_accuracy >= target_accuracy:
            return report.round_index
    return None


def partition_digest(state: RoundState) -> str:
    """Hex fingerprint of the data plan: corpus, holdouts, and shards.

    Two runs share a digest exactly when every client sees the same
    samples and the metrics are measured on the same evaluation set.
    """
    h = hashlib.sha256()
    h.update(state.dataset.features.tobytes())
    h.update(state.dataset.labels.tobytes())
    for idx in (state.eval_idx, state.server_idx, *state.shards):
        h.update(b"|")
        h.update(np.asarray(idx, dtype=np.int64).tobytes())
    return h.hexdigest()
