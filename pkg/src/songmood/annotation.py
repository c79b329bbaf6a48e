"""Human-judgment processing: majority votes, consensus, Fleiss' kappa."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Hashable, Iterable, Sequence

import numpy as np

from .errors import DataError, InsufficientDataError, ParseError, UnresolvedDisagreementError
from .evaluation import Verdict


class Judgment(str, Enum):
    YES = "Yes"
    NO = "No"
    UNINFORMATIVE = "Uninformative"

    @classmethod
    def from_code(cls, code: str) -> "Judgment":
        return _CODES[code.strip().upper()]

    @property
    def code(self) -> str:
        return self.value[0]

    def to_verdict(self) -> Verdict:
        return {Judgment.YES: Verdict.POSITIVE, Judgment.NO: Verdict.NEGATIVE,
                Judgment.UNINFORMATIVE: Verdict.UNINFORMATIVE}[self]


_CODES = {"Y": Judgment.YES, "N": Judgment.NO, "U": Judgment.UNINFORMATIVE}


class Source(str, Enum):
    LYRICS = "Lyrics"
    ACOUSTICS = "Acoustics"


@dataclass(frozen=True)
class AnnotationRecord:
    song_id: str
    mood_term: str
    source: Source
    judgments: tuple[Judgment, Judgment, Judgment]
    tiebreak: Judgment | None = None

    def __post_init__(self):
        if len(self.judgments) != 3:
            raise ValueError("an annotation record needs exactly 3 primary judgments")
        if self.tiebreak is not None and len(set(self.judgments)) != 3:
            raise ValueError("a tiebreak judgment is only allowed when all three primary judgments differ")


def majority_vote(record: AnnotationRecord) -> Judgment:
    """Value held by at least two of three judges, else the fourth judge's call."""
    value, n = Counter(record.judgments).most_common(1)[0]
    if n >= 2:
        return value
    if record.tiebreak is None:
        raise UnresolvedDisagreementError(
            f"three-way disagreement without a tiebreak for ({record.song_id!r}, {record.mood_term!r}, "
            f"{record.source.value})")
    return record.tiebreak


def consensus(lyrics_verdict: Judgment, acoustics_verdict: Judgment) -> Judgment:
    """Any Yes wins; otherwise any No; otherwise Uninformative."""
    pair = {lyrics_verdict, acoustics_verdict}
    if Judgment.YES in pair:
        return Judgment.YES
    if Judgment.NO in pair:
        return Judgment.NO
    return Judgment.UNINFORMATIVE


@dataclass(frozen=True)
class AgreementReport:
    kappa: float
    interpretation: str
    n_items: int
    n_raters: int
    n_categories: int
    gap_flag: bool = False


KAPPA_BANDS = (
    (0.20, "Slight agreement"),
    (0.40, "Fair agreement"),
    (0.60, "Moderate agreement"),
    (0.80, "Substantial agreement"),
    (1.00, "Almost perfect agreement"),
)


def interpret_kappa_flagged(kappa: float) -> tuple[str, bool]:
    """Landis-Koch band and whether kappa fell in the table's uncovered [0, 0.01]."""
    if not -1.0 <= kappa <= 1.0:
        raise ValueError(f"kappa must lie in [-1, 1], got {kappa}")
    if kappa < 0:
        return "Poor agreement", False
    if kappa <= 0.01:
        return "Slight agreement", True
    for upper, label in KAPPA_BANDS:
        if kappa <= upper:
            return label, False
    raise AssertionError("unreachable")


def interpret_kappa(kappa: float) -> str:
    return interpret_kappa_flagged(kappa)[0]


def fleiss_kappa(ratings: Sequence[Sequence[Hashable]]) -> AgreementReport:
    """Fleiss' kappa for items x raters labels (same number of raters per item)."""
    if len(ratings) < 2:
        raise InsufficientDataError("Fleiss' kappa needs at least 2 items")
    n = len(ratings[0])
    if any(len(row) != n for row in ratings):
        raise DataError("every item must have the same number of ratings")
    if n < 2:
        raise InsufficientDataError("Fleiss' kappa needs at least 2 raters per item")
    categories = sorted({c for row in ratings for c in row}, key=repr)
    col = {c: j for j, c in enumerate(categories)}
    counts = np.zeros((len(ratings), len(categories)))
    for i, row in enumerate(ratings):
        for c in row:
            counts[i, col[c]] += 1
    N = counts.shape[0]
    p_j = counts.sum(axis=0) / (N * n)
    P_i = (np.sum(counts * counts, axis=1) - n) / (n * (n - 1))
    P_bar = float(P_i.mean())
    P_e = float(np.sum(p_j * p_j))
    if abs(1.0 - P_e) < 1e-15:
        kappa = 1.0 if abs(1.0 - P_bar) < 1e-15 else 0.0
    else:
        kappa = (P_bar - P_e) / (1.0 - P_e)
    kappa = min(1.0, max(-1.0, kappa))
    label, gap = interpret_kappa_flagged(kappa)
    return AgreementReport(kappa, label, N, n, len(categories), gap)


ANNOTATION_HEADER = ["song_id", "mood", "source", "judge1", "judge2", "judge3", "judge4"]


def read_annotations(path) -> list[AnnotationRecord]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ANNOTATION_HEADER:
            raise ParseError(f"expected header {','.join(ANNOTATION_HEADER)}", str(path), 1)
        for row in reader:
            try:
                judges = tuple(Judgment.from_code(row[f"judge{i}"]) for i in (1, 2, 3))
                tb = row["judge4"].strip() if row["judge4"] else ""
                out.append(AnnotationRecord(row["song_id"], row["mood"], Source(row["source"]),
                                            judges, Judgment.from_code(tb) if tb else None))
            except (KeyError, ValueError) as exc:
                raise ParseError(f"bad annotation row: {exc}", str(path), reader.line_num) from None
    return out


def write_annotations(records: Iterable[AnnotationRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ANNOTATION_HEADER)
        for r in records:
            writer.writerow([r.song_id, r.mood_term, r.source.value, *(j.code for j in r.judgments),
                             r.tiebreak.code if r.tiebreak else ""])


@dataclass
class Verdicts:
    lyrics: dict[tuple[str, str], Judgment]
    acoustics: dict[tuple[str, str], Judgment]
    consensus: dict[tuple[str, str], Judgment]


def resolve(records: Iterable[AnnotationRecord]) -> Verdicts:
    """Majority verdict per (pair, source), and consensus where both sources exist."""
    by_source: dict[Source, dict] = {Source.LYRICS: {}, Source.ACOUSTICS: {}}
    for r in records:
        key = (r.song_id, r.mood_term)
        if key in by_source[r.source]:
            raise DataError(f"duplicate {r.source.value} annotation for {key!r}")
        by_source[r.source][key] = majority_vote(r)
    lyr, ac = by_source[Source.LYRICS], by_source[Source.ACOUSTICS]
    both = sorted(set(lyr) & set(ac))
    return Verdicts(lyr, ac, {k: consensus(lyr[k], ac[k]) for k in both})


def agreement_by_source(records: Iterable[AnnotationRecord]) -> dict[Source, AgreementReport]:
    grouped: dict[Source, list] = {Source.LYRICS: [], Source.ACOUSTICS: []}
    for r in records:
        grouped[r.source].append([j.value for j in r.judgments])
    return {s: fleiss_kappa(rows) for s, rows in grouped.items() if len(rows) >= 2}
