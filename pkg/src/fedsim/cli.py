"""Command-line front end: run experiments, compare methods, check math.

Subcommands:
    run        simulate the single configured method, write artifacts
    compare    simulate every configured method on the identical data
               plan, write artifacts, print a rounds-to-target table
    gradcheck  verify analytic gradients against central differences

Artifacts land in --out (default: $FEDSIM_OUT, else ./out): one metrics
CSV per method, a summary.txt key/value tree, and config_echo.cfg — the
fully resolved configuration, itself a valid config file.

Exit codes: 0 success, 1 runtime failure (divergence, gradcheck over
tolerance, I/O), 2 configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import replace

import numpy as np

from .config import (ConfigError, echo_pairs, load_dataset, parse_config,
                     sim_config, validate_against_dataset)
from .engine import (init_state, partition_digest, rounds_to_target,
                     run_rounds)
from .learner import (Architecture, DivergenceError, ModelParams, evaluate,
                      loss_gradient)
from .reports import write_round_csv, write_summary

GRADCHECK_TOLERANCE = 1e-4
OUT_DIR_ENV = "FEDSIM_OUT"


def gradient_check(seed: int = 0, cases: int = 10, step: float = 1e-5) -> float:
    """Max relative deviation between analytic and numeric gradients.

    Each case draws a small random model (2 to 6 inputs, up to two
    hidden layers, alternating nonlinearities) and a batch of at most 8
    samples, then compares loss_gradient against central differences
    coordinate by coordinate.  Parameters are drawn fully at random
    rather than taken from init_model: zero-initialized biases can park
    a rectifier unit exactly on its corner, where the one-sided slope
    and the subgradient legitimately differ.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for case in range(cases):
        dim = int(rng.integers(2, 7))
        num_classes = int(rng.integers(2, 5))
        hidden = tuple(int(rng.integers(2, 6))
                       for _ in range(int(rng.integers(0, 3))))
        arch = Architecture((dim, *hidden, num_classes),
                            "tanh" if case % 2 else "relu")
        model = ModelParams(arch, 0.6 * rng.standard_normal(arch.param_count))
        n = int(rng.integers(2, 9))
        X = rng.standard_normal((n, dim))
        y = rng.integers(0, num_classes, n)
        analytic = loss_gradient(model, X, y)
        numeric = np.empty_like(analytic)
        for i in range(analytic.size):
            bumped = model.theta.copy()
            bumped[i] += step
            up = evaluate(ModelParams(arch, bumped), X, y)["loss"]
            bumped[i] -= 2 * step
            down = evaluate(ModelParams(arch, bumped), X, y)["loss"]
            numeric[i] = (up - down) / (2 * step)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
        worst = max(worst, float((np.abs(analytic - numeric) / denom).max()))
    return worst


def _out_dir(args) -> str:
    return args.out or os.environ.get(OUT_DIR_ENV) or "out"


def _execute(spec, dataset, methods):
    """Simulate each method on the shared corpus; same data plan for all."""
    results = []
    for method in methods:
        cfg = sim_config(spec, method, dataset)
        state = init_state(cfg, dataset)
        reports = run_rounds(state, cfg)
        results.append({"method": method, "reports": reports,
                        "digest": partition_digest(state)})
    return results


def _write_artifacts(out_dir, spec, results) -> None:
    os.makedirs(out_dir, exist_ok=True)
    pairs = [("config." + key, value) for key, value in echo_pairs(spec)]
    for res in results:
        method, reports = res["method"], res["reports"]
        write_round_csv(os.path.join(out_dir, f"{method}.csv"),
                        method, reports)
        prefix = f"result.{method}."
        final = reports[-1]
        pairs.append((prefix + "final_accuracy",
                      float(final.global_accuracy)))
        pairs.append((prefix + "final_loss", float(final.global_loss)))
        for target in spec.targets:
            reached = rounds_to_target(reports, target)
            pairs.append((prefix + f"rounds_to_target.{target!r}",
                          "none" if reached is None else reached))
        pairs.append((prefix + "bytes_up_total",
                      sum(r.bytes_up for r in reports)))
        pairs.append((prefix + "bytes_down_total",
                      sum(r.bytes_down for r in reports)))
        pairs.append((prefix + "partition_digest", res["digest"]))
    with open(os.path.join(out_dir, "config_echo.cfg"), "w") as f:
        for key, value in echo_pairs(spec):
            f.write(f"{key} = {value}\n")
    write_summary(os.path.join(out_dir, "summary.txt"), pairs)


def _print_target_table(spec, results) -> None:
    methods = [res["method"] for res in results]
    header = ["target"] + methods
    rows = [header]
    for target in spec.targets:
        row = [repr(target)]
        for res in results:
            reached = rounds_to_target(res["reports"], target)
            row.append("none" if reached is None else str(reached))
        rows.append(row)
    widths = [max(len(r[c]) for r in rows) for c in range(len(header))]
    print("rounds_to_target (round index, none = never reached)")
    for row in rows:
        print("  " + "  ".join(cell.ljust(w) for cell, w in zip(row, widths)))


def _prepare(args):
    spec = parse_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("seed must be nonnegative", "seed")
        spec = replace(spec, seed=args.seed)
    dataset = load_dataset(spec)
    validate_against_dataset(spec, dataset)
    return spec, dataset


def _cmd_run(args) -> int:
    spec, dataset = _prepare(args)
    if len(spec.methods) != 1:
        raise ConfigError(
            f"run takes exactly one method, config lists "
            f"{len(spec.methods)}; use compare for several", "methods")
    results = _execute(spec, dataset, spec.methods)
    out = _out_dir(args)
    _write_artifacts(out, spec, results)
    final = results[0]["reports"][-1]
    print(f"{spec.methods[0]}: final_accuracy={final.global_accuracy!r} "
          f"final_loss={final.global_loss!r} rounds={spec.rounds}")
    _print_target_table(spec, results)
    print(f"artifacts: {out}")
    return 0


def _cmd_compare(args) -> int:
    spec, dataset = _prepare(args)
    results = _execute(spec, dataset, spec.methods)
    digests = {res["digest"] for res in results}
    if len(digests) != 1:
        raise RuntimeError("methods diverged on the shared data plan")
    out = _out_dir(args)
    _write_artifacts(out, spec, results)
    for res in results:
        final = res["reports"][-1]
        print(f"{res['method']}: final_accuracy={final.global_accuracy!r} "
              f"final_loss={final.global_loss!r}")
    _print_target_table(spec, results)
    print(f"partition digest: {results[0]['digest'][:16]}")
    print(f"artifacts: {out}")
    return 0


def _cmd_gradcheck(args) -> int:
    started = time.perf_counter()
    worst = gradient_check(args.seed, args.cases)
    elapsed = time.perf_counter() - started
    verdict = "ok" if worst < GRADCHECK_TOLERANCE else "FAILED"
    print(f"gradcheck: {args.cases} models, max relative error {worst:.3e} "
          f"(tolerance {GRADCHECK_TOLERANCE:g}) in {elapsed:.2f}s - {verdict}")
    return 0 if worst < GRADCHECK_TOLERANCE else 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedsim",
        description="Deterministic desk-scale federated learning simulator "
                    "with peer-testing score aggregation.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("run", "simulate the configured method"),
                       ("compare", "simulate all configured methods on "
                                   "the identical data plan")):
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("--config", required=True,
                         help="experiment config file")
        cmd.add_argument("--out",
                         help=f"output directory (default ${OUT_DIR_ENV} "
                              f"or ./out)")
        cmd.add_argument("--seed", type=int,
                         help="override the config seed")
    grad = sub.add_parser("gradcheck",
                          help="compare analytic gradients with central "
                               "finite differences")
    grad.add_argument("--seed", type=int, default=0)
    grad.add_argument("--cases", type=int, default=10)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "compare": _cmd_compare,
               "gradcheck": _cmd_gradcheck}[args.command]
    try:
        return handler(args)
    except ConfigError as err:
        print(f"fedsim: config error: {err}", file=sys.stderr)
        return 2
    except DivergenceError as err:
        print(f"fedsim: diverged: {err}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as err:
        print(f"fedsim: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
