"""Experiment configuration files and their translation into run configs.

The format is flat text, one `key = value` per line, dotted keys for
grouping, `#` lines as comments.  Every key has a default; a config file
only states what differs.  Parsing resolves all defaults, so echoing a
parsed spec produces a complete, re-parseable file — the provenance
record written next to every run's artifacts.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace

from .adversary import LIE_POLICIES, Behavior
from .data import (Dataset, generate_synthetic, load_idx, stratified_subset)
from .engine import METHODS, TESTER_POOLS, SimConfig, derive_seed
from .learner import ACTIVATIONS, Architecture, TrainConfig
from .scheduler import SELECTION_POLICIES

ADVERSARY_KINDS = ("random_weights", "lying_tester")
DATA_KINDS = ("synthetic", "idx")


class ConfigError(ValueError):
    """A config problem, carrying the offending key and line if known."""

    def __init__(self, message: str, key: str = None, line: int = None):
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(key)
        prefix = ": ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


@dataclass(frozen=True)
class ExperimentSpec:
    """A fully resolved experiment: every knob explicit.

    Field names mirror the config keys; see DEFAULTS for the key list.
    """

    methods: tuple = ("fedtest",)
    seed: int = 0
    rounds: int = 30
    data_kind: str = "synthetic"
    data_classes: int = 3
    data_dim: int = 8
    data_per_class: int = 400
    data_spread: float = 1.0
    data_images: str = ""
    data_labels: str = ""
    data_limit: int = 0
    eval_fraction: float = 0.2
    server_fraction: float = 0.1
    num_clients: int = 10
    num_malicious: int = 0
    adversary_kind: str = "random_weights"
    adversary_scale: float = 1.0
    adversary_policy: str = "invert"
    classes_min: int = 1
    classes_max: int = 3
    samples_min: int = 10
    samples_max: int = 30
    hidden: tuple = (16,)
    activation: str = "relu"
    epochs: int = 1
    batch_size: int = 32
    learning_rate: float = 0.05
    testers: int = 0
    beta: float = 0.5
    power: float = 4.0
    selection: str = "round_robin"
    tester_pool: str = "exclude_malicious"
    targets: tuple = (0.5, 0.8)


# config key -> (spec field, parser); order defines the echo layout.
_KEYS = {
    "methods": ("methods", "str_list"),
    "seed": ("seed", "int"),
    "rounds": ("rounds", "int"),
    "data.kind": ("data_kind", "str"),
    "data.classes": ("data_classes", "int"),
    "data.dim": ("data_dim", "int"),
    "data.per_class": ("data_per_class", "int"),
    "data.spread": ("data_spread", "float"),
    "data.images": ("data_images", "str"),
    "data.labels": ("data_labels", "str"),
    "data.limit": ("data_limit", "int"),
    "holdout.eval_fraction": ("eval_fraction", "float"),
    "holdout.server_fraction": ("server_fraction", "float"),
    "clients.count": ("num_clients", "int"),
    "clients.malicious": ("num_malicious", "int"),
    "adversary.kind": ("adversary_kind", "str"),
    "adversary.scale": ("adversary_scale", "float"),
    "adversary.policy": ("adversary_policy", "str"),
    "partition.classes_min": ("classes_min", "int"),
    "partition.classes_max": ("classes_max", "int"),
    "partition.samples_min": ("samples_min", "int"),
    "partition.samples_max": ("samples_max", "int"),
    "model.hidden": ("hidden", "int_list"),
    "model.activation": ("activation", "str"),
    "train.epochs": ("epochs", "int"),
    "train.batch_size": ("batch_size", "int"),
    "train.learning_rate": ("learning_rate", "float"),
    "fedtest.testers": ("testers", "int"),
    "fedtest.beta": ("beta", "float"),
    "fedtest.power": ("power", "float"),
    "fedtest.selection": ("selection", "str"),
    "fedtest.tester_pool": ("tester_pool", "str"),
    "report.targets": ("targets", "float_list"),
}


def _parse_value(raw: str, kind: str, key: str, line):
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "str":
            return raw
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        if kind == "int_list":
            return tuple(int(p) for p in parts)
        if kind == "float_list":
            return tuple(float(p) for p in parts)
        return tuple(parts)  # str_list
    except ValueError:
        raise ConfigError(f"expected {kind.replace('_', ' of ')}, "
                          f"got {raw!r}", key, line) from None


def _read_pairs(text: str):
    """Raw key/value pairs with their line numbers, duplicates rejected."""
    pairs = {}
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        stripped = rawline.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if not key:
            raise ConfigError("empty key", line=lineno)
        if key in pairs:
            raise ConfigError("duplicate key", key, lineno)
        pairs[key] = (value, lineno)
    return pairs


def _require(cond: bool, message: str, key: str, line=None):
    if not cond:
        raise ConfigError(message, key, line)


def parse_config_text(text: str) -> ExperimentSpec:
    """Parse config text into a validated spec with defaults resolved."""
    pairs = _read_pairs(text)
    if "method" in pairs:
        if "methods" in pairs:
            raise ConfigError("give either 'method' or 'methods', not both",
                              "method", pairs["method"][1])
        pairs["methods"] = pairs.pop("method")
    values = {}
    lines = {}
    for key, (raw, lineno) in pairs.items():
        if key not in _KEYS:
            raise ConfigError("unknown key", key, lineno)
        field_name, kind = _KEYS[key]
        values[field_name] = _parse_value(raw, kind, key, lineno)
        lines[field_name] = lineno
    spec = replace(ExperimentSpec(), **values)
    return _validate(spec, lines)


def parse_config(path) -> ExperimentSpec:
    """Parse a config file; all errors surface as ConfigError."""
    try:
        with open(path) as f:
            text = f.read()
    except OSError as err:
        raise ConfigError(f"cannot read config file: {err}") from err
    return _validate_paths(parse_config_text(text))


def _validate(spec: ExperimentSpec, lines: dict) -> ExperimentSpec:
    def where(field_name):
        return lines.get(field_name)

    _require(len(spec.methods) >= 1, "at least one method required",
             "methods", where("methods"))
    for m in spec.methods:
        _require(m in METHODS, f"unknown method {m!r}, expected one of "
                 f"{', '.join(METHODS)}", "methods", where("methods"))
    _require(len(set(spec.methods)) == len(spec.methods),
             "methods must be distinct", "methods", where("methods"))
    _require(spec.seed >= 0, "seed must be nonnegative", "seed", where("seed"))
    _require(spec.rounds >= 1, "rounds must be >= 1", "rounds",
             where("rounds"))
    _require(spec.data_kind in DATA_KINDS,
             f"expected one of {', '.join(DATA_KINDS)}", "data.kind",
             where("data_kind"))
    _require(spec.data_classes >= 2, "need at least two classes",
             "data.classes", where("data_classes"))
    _require(spec.data_dim >= 1, "dimension must be >= 1", "data.dim",
             where("data_dim"))
    _require(spec.data_per_class >= 1, "need at least one sample per class",
             "data.per_class", where("data_per_class"))
    _require(spec.data_spread > 0, "spread must be positive", "data.spread",
             where("data_spread"))
    _require(spec.data_limit >= 0, "limit must be >= 0 (0 = use all)",
             "data.limit", where("data_limit"))
    for key, field_name in (("holdout.eval_fraction", "eval_fraction"),
                            ("holdout.server_fraction", "server_fraction")):
        _require(0 < getattr(spec, field_name) < 1,
                 "fraction must lie in (0, 1)", key, where(field_name))
    _require(spec.eval_fraction + spec.server_fraction < 1,
             "holdout fractions must sum to < 1", "holdout.eval_fraction",
             where("eval_fraction"))
    n, m = spec.num_clients, spec.num_malicious
    _require(n >= 2, "need at least two clients", "clients.count",
             where("num_clients"))
    _require(m >= 0, "malicious count must be >= 0", "clients.malicious",
             where("num_malicious"))
    _require(m < n, f"clients.malicious must be < clients.count, "
             f"got M={m}, N={n}", "clients.malicious", where("num_malicious"))
    _require(spec.adversary_kind in ADVERSARY_KINDS,
             f"expected one of {', '.join(ADVERSARY_KINDS)}",
             "adversary.kind", where("adversary_kind"))
    _require(spec.adversary_scale > 0, "scale must be positive",
             "adversary.scale", where("adversary_scale"))
    _require(spec.adversary_policy in LIE_POLICIES,
             f"expected one of {', '.join(LIE_POLICIES)}", "adversary.policy",
             where("adversary_policy"))
    _require(1 <= spec.classes_min <= spec.classes_max,
             "need 1 <= classes_min <= classes_max", "partition.classes_min",
             where("classes_min"))
    _require(1 <= spec.samples_min <= spec.samples_max,
             "need 1 <= samples_min <= samples_max", "partition.samples_min",
             where("samples_min"))
    for h in spec.hidden:
        _require(h >= 1, "hidden sizes must be >= 1", "model.hidden",
                 where("hidden"))
    _require(spec.activation in ACTIVATIONS,
             f"expected one of {', '.join(ACTIVATIONS)}", "model.activation",
             where("activation"))
    _require(spec.epochs >= 1, "epochs must be >= 1", "train.epochs",
             where("epochs"))
    _require(spec.batch_size >= 1, "batch size must be >= 1",
             "train.batch_size", where("batch_size"))
    _require(spec.learning_rate > 0, "learning rate must be positive",
             "train.learning_rate", where("learning_rate"))
    _require(spec.testers >= 0, "testers must be >= 0 (0 = default)",
             "fedtest.testers", where("testers"))
    k = spec.testers if spec.testers else math.ceil(n / 5)
    if "fedtest" in spec.methods:
        _require(k < n, f"fedtest.testers must be < clients.count "
                 f"(K < N), got K={k}, N={n}", "fedtest.testers",
                 where("testers"))
        pool = n - m if (spec.tester_pool == "exclude_malicious"
                         and spec.adversary_kind == "random_weights"
                         and m > 0) else n
        _require(k < pool, f"tester pool holds {pool} clients after "
                 f"excluding malicious ones; needs more than K={k}",
                 "fedtest.testers", where("testers"))
    _require(0 < spec.beta <= 1, "beta must lie in (0, 1]", "fedtest.beta",
             where("beta"))
    _require(spec.power > 0, "power must be positive", "fedtest.power",
             where("power"))
    _require(spec.selection in SELECTION_POLICIES,
             f"expected one of {', '.join(SELECTION_POLICIES)}",
             "fedtest.selection", where("selection"))
    _require(spec.tester_pool in TESTER_POOLS,
             f"expected one of {', '.join(TESTER_POOLS)}",
             "fedtest.tester_pool", where("tester_pool"))
    _require(len(spec.targets) >= 1, "need at least one target",
             "report.targets", where("targets"))
    for t in spec.targets:
        _require(0 < t <= 1, "targets must lie in (0, 1]", "report.targets",
                 where("targets"))
    if spec.data_kind == "idx":
        _require(bool(spec.data_images), "required when data.kind = idx",
                 "data.images", where("data_kind"))
        _require(bool(spec.data_labels), "required when data.kind = idx",
                 "data.labels", where("data_kind"))
    return replace(spec, testers=k)


def _validate_paths(spec: ExperimentSpec) -> ExperimentSpec:
    if spec.data_kind == "idx":
        for key, path in (("data.images", spec.data_images),
                          ("data.labels", spec.data_labels)):
            if not os.path.exists(path):
                raise ConfigError(f"dataset file not found: {path}", key)
    return spec


def validate_against_dataset(spec: ExperimentSpec, dataset: Dataset) -> None:
    """Cross-checks that need the loaded data: class and size bounds."""
    if spec.classes_max > dataset.num_classes:
        raise ConfigError(
            f"dataset has {dataset.num_classes} classes, cannot assign "
            f"{spec.classes_max} per client", "partition.classes_max")
    if dataset.dim < 1 or dataset.num_samples < spec.num_clients:
        raise ConfigError(
            f"dataset too small: {dataset.num_samples} samples for "
            f"{spec.num_clients} clients", "clients.count")


def load_dataset(spec: ExperimentSpec) -> Dataset:
    """Build or load the corpus the spec describes, limit applied."""
    if spec.data_kind == "synthetic":
        ds = generate_synthetic(spec.data_classes, spec.data_dim,
                                spec.data_per_class, spec.data_spread,
                                derive_seed(spec.seed, "data"))
    else:
        ds = load_idx(spec.data_images, spec.data_labels)
    if spec.data_limit:
        if spec.data_limit > ds.num_samples:
            raise ConfigError(
                f"limit {spec.data_limit} exceeds the {ds.num_samples} "
                f"samples available", "data.limit")
        ds = stratified_subset(ds, spec.data_limit,
                               derive_seed(spec.seed, "subset"))
    return ds


def sim_config(spec: ExperimentSpec, method: str, dataset: Dataset) -> SimConfig:
    """The engine config for one method under this spec and corpus.

    The last `clients.malicious` ids get the adversarial behavior; the
    architecture is input and class counts from the data around the
    configured hidden sizes.
    """
    honest = spec.num_clients - spec.num_malicious
    behaviors = tuple(
        Behavior() if i < honest else Behavior(spec.adversary_kind,
                                               spec.adversary_scale,
                                               spec.adversary_policy)
        for i in range(spec.num_clients))
    arch = Architecture((dataset.dim, *spec.hidden, dataset.num_classes),
                        spec.activation)
    return SimConfig(
        method=method,
        num_clients=spec.num_clients,
        rounds=spec.rounds,
        arch=arch,
        train=TrainConfig(spec.epochs, spec.batch_size, spec.learning_rate),
        behaviors=behaviors,
        seed=spec.seed,
        classes_per_client=(spec.classes_min, spec.classes_max),
        samples_per_class=(spec.samples_min, spec.samples_max),
        eval_fraction=spec.eval_fraction,
        server_fraction=spec.server_fraction,
        num_testers=spec.testers,
        beta=spec.beta,
        power=spec.power,
        tester_policy=spec.selection,
        tester_pool=spec.tester_pool,
    )


def _echo_value(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_echo_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def echo_config(spec: ExperimentSpec) -> str:
    """The spec as a complete config file; parses back to an equal spec."""
    out = ["# canonical configuration echo"]
    for key, (field_name, _) in _KEYS.items():
        out.append(f"{key} = {_echo_value(getattr(spec, field_name))}")
    return "\n".join(out) + "\n"


def echo_pairs(spec: ExperimentSpec):
    """(key, value-string) pairs of the echo, for the run summary."""
    return [(key, _echo_value(getattr(spec, field_name)))
            for key, (field_name, _) in _KEYS.items()]
