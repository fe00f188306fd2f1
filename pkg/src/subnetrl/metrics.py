"""Metric sinks and figure-ready table helpers.

Every artifact row carries the experiment's config hash; appending records
with a different hash to an existing sink is refused so replays from
mismatched configurations never merge silently.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

DEFAULT_PERCENTILES = (1, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50,
                       55, 60, 65, 70, 75, 80, 85, 90, 95, 99)


class SinkMismatchError(RuntimeError):
    """Existing artifact was produced under a different config hash."""


class MetricsSink:
    """Append-only JSONL record stream stamped with the config hash."""

    def __init__(self, path, config_hash: str):
        self.path = Path(path)
        self.config_hash = config_hash
        if self.path.exists():
            with open(self.path) as f:
                first = f.readline().strip()
            if first:
                existing = json.loads(first).get("config_hash")
                if existing != config_hash:
                    raise SinkMismatchError(
                        f"{self.path} was written under config {existing}, "
                        f"refusing to append records from {config_hash}"
                    )

    def write(self, record: dict) -> None:
        record = dict(record, config_hash=self.config_hash)
        with open(self.path, "a") as f:
            f.write(json.dumps(record) + "\n")

    def write_many(self, records) -> None:
        for rec in records:
            self.write(rec)


def percentile_table(values, percentiles=DEFAULT_PERCENTILES):
    """Empirical percentiles of a sample, as (percentile, value) rows."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("no samples")
    return [(int(p), float(np.percentile(v, p))) for p in percentiles]


def write_csv(path, rows, fieldnames=None) -> None:
    rows = list(rows)
    if fieldnames is None:
        fieldnames = list(rows[0].keys())
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)


def episodes_to_fraction(
    rewards, fraction: float = 0.9, final_window: int = 50, smooth_window: int = 20
) -> int:
    """First episode whose smoothed reward covers `fraction` of the total rise.

    The rise is measured from the initial smoothed level to the mean of the
    last `final_window` episodes, which keeps the metric meaningful when
    early rewards are negative. Returns the last episode index if the
    threshold is never reached.
    """
    r = np.asarray(rewards, dtype=float)
    if r.size == 0:
        raise ValueError("empty reward series")
    smoothed = np.array(
        [r[max(0, i - smooth_window + 1) : i + 1].mean() for i in range(len(r))]
    )
    final = r[-final_window:].mean()
    start = smoothed[0]
    threshold = start + fraction * (final - start)
    hits = np.nonzero(smoothed >= threshold)[0]
    return int(hits[0]) if hits.size else len(r) - 1
