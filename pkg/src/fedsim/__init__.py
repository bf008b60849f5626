"""Deterministic desk-scale simulator for federated learning, comparing
sample-count, server-accuracy, and peer-testing score aggregation."""

from .adversary import Behavior, lying_report, malicious_update
from .aggregation import (AggregationWeights, ScoreBoard, accuracy_weights,
                          fedavg_weights, fedtest_weights, update_scores,
                          weighted_aggregate)
from .config import (ConfigError, ExperimentSpec, echo_config, load_dataset,
                     parse_config, parse_config_text, sim_config,
                     validate_against_dataset)
from .data import (ClassExhaustedError, Dataset, IdxFormatError, Partition,
                   generate_synthetic, load_idx, partition_non_iid,
                   stratified_holdout, stratified_subset, write_idx)
from .engine import (METHODS, RoundDivergenceError, RoundReport, RoundState,
                     SimConfig, build_state, derive_seed, init_state,
                     partition_digest, rounds_to_target, run_round,
                     run_rounds, run_simulation)
from .learner import (Architecture, DivergenceError, ModelParams, TrainConfig,
                      evaluate, forward, init_model, load_model, local_train,
                      loss_gradient, predict_proba, save_model,
                      serialized_size)
from .scheduler import (ACCURACY_REPORT_BYTES, RoundSchedule, build_schedule,
                        select_testers)

__version__ = "0.1.0"
