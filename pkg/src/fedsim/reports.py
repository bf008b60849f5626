"""Artifact emission: the per-round metrics CSV and the run summary.

The CSV is the plotting contract.  One row per round:

    round,method,global_accuracy,global_loss,bytes_up,bytes_down,
    w_0..w_{N-1},s_0..s_{N-1}

Floats are written with repr so rereading them recovers the exact
values and reruns of the same config are byte-identical.  Score columns
are `nan` where a method keeps no scores.

The summary is a flat key/value tree, one dotted key per line, holding
the full config echo and the per-method results.
"""

from __future__ import annotations

import csv


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def csv_header(num_clients: int) -> list:
    return (["round", "method", "global_accuracy", "global_loss",
             "bytes_up", "bytes_down"]
            + [f"w_{i}" for i in range(num_clients)]
            + [f"s_{i}" for i in range(num_clients)])


def write_round_csv(path, method: str, reports) -> None:
    """One row per RoundReport, schema as in the module docstring."""
    if not reports:
        raise ValueError("no reports to write")
    n = reports[0].weights.size
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(csv_header(n))
        for r in reports:
            row = [r.round_index, method, _fmt(float(r.global_accuracy)),
                   _fmt(float(r.global_loss)), r.bytes_up, r.bytes_down]
            row += [_fmt(float(w)) for w in r.weights]
            row += [_fmt(float(s)) for s in r.scores]
            writer.writerow(row)


def write_summary(path, pairs) -> None:
    """Write (key, value) pairs as `key = value` lines, in order."""
    with open(path, "w") as f:
        for key, value in pairs:
            f.write(f"{key} = {_fmt(value)}\n")
