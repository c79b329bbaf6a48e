"""Confusion counts, precision/recall/F1, per-mood reports and threshold sweeps.

Zero denominators give 0 for precision, recall and F1.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .errors import ConfigError, CoverageError

ZERO_DIVISION = 0.0


class Verdict(str, Enum):
    POSITIVE = "Positive"
    NEGATIVE = "Negative"
    UNINFORMATIVE = "Uninformative"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0
    uninformative: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn + self.uninformative

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.tn + other.tn, self.fp + other.fp,
                               self.fn + other.fn, self.uninformative + other.uninformative)


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float

    def percent(self) -> tuple[float, float, float]:
        return (round(100 * self.precision, 2), round(100 * self.recall, 2), round(100 * self.f1, 2))


def confusion(predictions: Mapping, truth: Mapping) -> ConfusionCounts:
    """2x2 counts over truth pairs; Uninformative truth only bumps its own counter."""
    missing = [k for k in truth if k not in predictions]
    if missing:
        raise CoverageError(f"{len(missing)} truth pairs have no prediction, e.g. {sorted(missing)[0]!r}",
                            sorted(missing))
    tp = tn = fp = fn = unk = 0
    for key, t in truth.items():
        t = Verdict(t)
        if t is Verdict.UNINFORMATIVE:
            unk += 1
            continue
        pos_pred = Verdict(predictions[key]) is Verdict.POSITIVE
        if t is Verdict.POSITIVE:
            if pos_pred:
                tp += 1
            else:
                fn += 1
        elif pos_pred:
            fp += 1
        else:
            tn += 1
    return ConfusionCounts(tp, tn, fp, fn, unk)


def metrics(c: ConfusionCounts) -> Metrics:
    p = c.tp / (c.tp + c.fp) if c.tp + c.fp else ZERO_DIVISION
    r = c.tp / (c.tp + c.fn) if c.tp + c.fn else ZERO_DIVISION
    f1 = 2 * p * r / (p + r) if p + r > 0 else ZERO_DIVISION
    return Metrics(p, r, f1)


@dataclass(frozen=True)
class ReportRow:
    scope: str
    metrics: Metrics
    counts: ConfusionCounts
    empty: bool = False


def per_mood_report(predictions: Mapping, truth: Mapping, moods: Sequence[str]) -> list[ReportRow]:
    """One row per mood on that mood's (song, mood) pairs, plus a micro-averaged 'total'."""
    rows = []
    total = ConfusionCounts()
    for mood in moods:
        sub = {k: v for k, v in truth.items() if k[1] == mood}
        c = confusion(predictions, sub)
        total = total + c
        rows.append(ReportRow(mood, metrics(c), c, empty=not sub))
    rows.append(ReportRow("total", metrics(total), total, empty=total.total == 0))
    return rows


METRICS_HEADER = ["scope", "precision", "recall", "f1", "tp", "tn", "fp", "fn", "uninformative"]


def write_report(rows: Iterable[ReportRow], path) -> None:
    """Metrics CSV with percentages at 2 decimals; a JSON sidecar records conventions."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for row in rows:
            p, r, f = row.metrics.percent()
            c = row.counts
            writer.writerow([row.scope, f"{p:.2f}", f"{r:.2f}", f"{f:.2f}",
                             c.tp, c.tn, c.fp, c.fn, c.uninformative])
    with open(f"{path}.meta.json", "w", encoding="utf-8") as fh:
        json.dump({"units": "percent", "decimals": 2, "zero_division": ZERO_DIVISION},
                  fh, sort_keys=True, indent=2)
        fh.write("\n")


@dataclass(frozen=True)
class SweepPoint:
    tau: float
    precision: float
    recall: float

    @property
    def f1(self) -> float:
        s = self.precision + self.recall
        return 2 * self.precision * self.recall / s if s > 0 else ZERO_DIVISION


def threshold_sweep(scores: Mapping, truth: Mapping, taus: Sequence[float]) -> list[SweepPoint]:
    """Precision and recall of ``score >= tau`` predictions at each threshold."""
    taus = list(taus)
    if any(not 0.0 < t < 1.0 for t in taus):
        raise ConfigError("sweep thresholds must lie in (0, 1)")
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise ConfigError("sweep thresholds must be strictly increasing")
    missing = [k for k in truth if k not in scores]
    if missing:
        raise CoverageError(f"{len(missing)} truth pairs have no score", sorted(missing))
    points = []
    for tau in taus:
        preds = {k: Verdict.POSITIVE if scores[k] >= tau else Verdict.NEGATIVE for k in truth}
        m = metrics(confusion(preds, truth))
        points.append(SweepPoint(tau, m.precision, m.recall))
    return points


def best_f1(points: Sequence[SweepPoint]) -> SweepPoint:
    return max(points, key=lambda p: (p.f1, -p.tau))


def write_sweep(points: Iterable[SweepPoint], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["tau", "precision", "recall"])
        for p in points:
            writer.writerow([f"{p.tau:.9g}", f"{p.precision:.9g}", f"{p.recall:.9g}"])
