"""Playlist co-occurrence counts and song-mood association scores.

Scores are PMI, normalized PMI and its Bayesian variant (BNPMI), where the
conditional p(song | mood) is replaced by a Beta posterior whose prior is
fit per mood by the method of moments. Natural logs throughout; NPMI and
BNPMI are ratios of logs and so base-free, PMI is in nats.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DegenerateDenominatorError,
    InsufficientDataError,
    InvariantError,
    ParseError,
    UndefinedMarginalError,
    UnsupportedVersionError,
)
from .ingest import MoodMatcher, PlaylistRecord
from .lexicon import MoodLexicon

logger = logging.getLogger(__name__)

COUNTS_FORMAT_VERSION = 1
DENOMINATOR_EPS = 1e-12
CLAMP_REPORT_EPS = 1e-6


@dataclass
class CooccurrenceCounts:
    n_playlists: int = 0
    song_playlists: Counter = field(default_factory=Counter)
    mood_playlists: Counter = field(default_factory=Counter)
    joint: Counter = field(default_factory=Counter)  # (song_id, mood_term) -> count

    def __eq__(self, other):
        if not isinstance(other, CooccurrenceCounts):
            return NotImplemented
        return (self.n_playlists == other.n_playlists
                and +self.song_playlists == +other.song_playlists
                and +self.mood_playlists == +other.mood_playlists
                and +self.joint == +other.joint)

    def validate(self) -> None:
        """Raise InvariantError if any count invariant fails."""
        n = self.n_playlists
        if n < 0:
            raise InvariantError("negative playlist count")
        for name, table in (("song", self.song_playlists), ("mood", self.mood_playlists)):
            for key, c in table.items():
                if not 0 <= c <= n:
                    raise InvariantError(f"{name} count for {key!r} is {c}, outside [0, {n}]")
        for (s, m), c in self.joint.items():
            if s not in self.song_playlists or m not in self.mood_playlists:
                raise InvariantError(f"joint key ({s!r}, {m!r}) missing from a marginal")
            if not 0 <= c <= min(self.song_playlists[s], self.mood_playlists[m]):
                raise InvariantError(f"joint count for ({s!r}, {m!r}) exceeds a marginal")

    def scaled(self, k: int) -> "CooccurrenceCounts":
        """Every count multiplied by ``k`` (the corpus replicated k times)."""
        return CooccurrenceCounts(
            self.n_playlists * k,
            Counter({key: c * k for key, c in self.song_playlists.items()}),
            Counter({key: c * k for key, c in self.mood_playlists.items()}),
            Counter({key: c * k for key, c in self.joint.items()}),
        )

    def joints_for_mood(self, mood: str) -> dict[str, int]:
        return {s: c for (s, m), c in self.joint.items() if m == mood}


def count(playlists: Iterable[PlaylistRecord], lexicon: MoodLexicon) -> CooccurrenceCounts:
    """Count playlists per song, per mood and per (song, mood).

    Repeated tracks or repeated mood mentions inside one playlist count once.
    """
    matcher = MoodMatcher(lexicon)
    out = CooccurrenceCounts()
    for p in playlists:
        out.n_playlists += 1
        tracks = set(p.track_ids)
        moods = {m.term for m in matcher(p)}
        out.song_playlists.update(tracks)
        out.mood_playlists.update(moods)
        if moods and tracks:
            out.joint.update((s, m) for s in tracks for m in moods)
    return out


def merge_counts(a: CooccurrenceCounts, b: CooccurrenceCounts) -> CooccurrenceCounts:
    return CooccurrenceCounts(
        a.n_playlists + b.n_playlists,
        a.song_playlists + b.song_playlists,
        a.mood_playlists + b.mood_playlists,
        a.joint + b.joint,
    )


def count_sharded(playlists: Sequence[PlaylistRecord], lexicon: MoodLexicon,
                  n_shards: int = 4, threads: int = 1) -> CooccurrenceCounts:
    """Count contiguous shards independently and merge them in shard order."""
    n_shards = max(1, min(n_shards, len(playlists) or 1))
    bounds = np.linspace(0, len(playlists), n_shards + 1).astype(int)
    shards = [playlists[bounds[i]:bounds[i + 1]] for i in range(n_shards)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda sh: count(sh, lexicon), shards))
    else:
        parts = [count(sh, lexicon) for sh in shards]
    total = CooccurrenceCounts()
    for part in parts:
        total = merge_counts(total, part)
    return total


def save_counts(counts: CooccurrenceCounts, path) -> None:
    """Versioned JSONL snapshot: meta line, then song, mood and joint sections."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps({"section": "meta", "version": COUNTS_FORMAT_VERSION,
                             "n_playlists": counts.n_playlists}, sort_keys=True) + "\n")
        for s in sorted(counts.song_playlists):
            fh.write(json.dumps({"section": "songs", "id": s, "count": counts.song_playlists[s]},
                                sort_keys=True, ensure_ascii=False) + "\n")
        for m in sorted(counts.mood_playlists):
            fh.write(json.dumps({"section": "moods", "id": m, "count": counts.mood_playlists[m]},
                                sort_keys=True, ensure_ascii=False) + "\n")
        for (s, m) in sorted(counts.joint):
            fh.write(json.dumps({"section": "joints", "song": s, "mood": m,
                                 "count": counts.joint[(s, m)]}, sort_keys=True, ensure_ascii=False) + "\n")


def load_counts(path) -> CooccurrenceCounts:
    out = CooccurrenceCounts()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                section = obj["section"]
                if lineno == 1:
                    if section != "meta":
                        raise ParseError("first line must be the meta section", str(path), 1)
                    if obj.get("version") != COUNTS_FORMAT_VERSION:
                        raise UnsupportedVersionError(
                            f"counts snapshot version {obj.get('version')!r} not supported", str(path), 1)
                    out.n_playlists = int(obj["n_playlists"])
                elif section == "songs":
                    out.song_playlists[obj["id"]] = int(obj["count"])
                elif section == "moods":
                    out.mood_playlists[obj["id"]] = int(obj["count"])
                elif section == "joints":
                    out.joint[(obj["song"], obj["mood"])] = int(obj["count"])
                else:
                    raise ParseError(f"unknown section {section!r}", str(path), lineno)
            except (KeyError, ValueError, TypeError) as exc:
                raise ParseError(f"bad counts record: {exc}", str(path), lineno) from None
    return out


# -- empirical scores ---------------------------------------------------------

def _marginals(counts: CooccurrenceCounts, s: str, m: str) -> tuple[int, int, int, int]:
    n = counts.n_playlists
    cs = counts.song_playlists.get(s, 0)
    cm = counts.mood_playlists.get(m, 0)
    if cs <= 0 or cm <= 0 or n <= 0:
        raise UndefinedMarginalError(f"zero marginal for pair ({s!r}, {m!r})")
    return n, cs, cm, counts.joint.get((s, m), 0)


def pmi(counts: CooccurrenceCounts, s: str, m: str) -> float:
    """ln(p(s,m) / (p(s) p(m))); ``-inf`` when the pair never co-occurs."""
    n, cs, cm, j = _marginals(counts, s, m)
    if j == 0:
        return -math.inf
    return math.log(j) + math.log(n) - math.log(cs) - math.log(cm)


def _normalized(log_ps: float, log_pm: float, log_psm: float, s: str, m: str) -> float:
    den = log_pm + log_psm
    if abs(den) < DENOMINATOR_EPS:
        raise DegenerateDenominatorError(s, m)
    return (log_ps - log_psm) / den


def npmi(counts: CooccurrenceCounts, s: str, m: str) -> float:
    """(log p(s) - log p(s|m)) / (log p(m) + log p(s|m)), -1 for a zero joint count."""
    n, cs, cm, j = _marginals(counts, s, m)
    if j == 0:
        return -1.0
    return _normalized(math.log(cs / n), math.log(cm / n), math.log(j / cm), s, m)


# -- Beta prior and BNPMI -----------------------------------------------------

@dataclass(frozen=True)
class BetaPrior:
    mood: str
    p_bar: float
    v_bar: float
    alpha_hat: float
    beta_hat: float
    n_songs_used: int
    fallback: bool = False

    @property
    def mean(self) -> float:
        return self.alpha_hat / (self.alpha_hat + self.beta_hat)


def moments_prior(p_values: Sequence[float], mood: str = "") -> BetaPrior:
    """Method-of-moments Beta fit to per-song conditionals of one mood.

    Uses the unbiased variance. When the moments cannot come from a Beta
    (zero variance, variance >= p(1-p), or mean at 0 or 1) the prior falls
    back to Beta(1, 1) and ``fallback`` is set.
    """
    p = np.asarray(p_values, dtype=np.float64)
    if p.size < 2:
        raise InsufficientDataError("need at least 2 songs to fit a prior")
    p_bar = float(p.mean())
    # a constant vector has zero variance; float rounding would otherwise leave ~1e-33
    v_bar = 0.0 if np.ptp(p) == 0 else float(p.var(ddof=1))
    spread = p_bar * (1.0 - p_bar)
    if 0.0 < p_bar < 1.0 and 0.0 < v_bar < spread:
        common = spread / v_bar - 1.0
        alpha, beta = p_bar * common, (1.0 - p_bar) * common
        if alpha > 0 and beta > 0 and math.isfinite(alpha) and math.isfinite(beta):
            return BetaPrior(mood, p_bar, v_bar, alpha, beta, int(p.size))
    logger.warning("degenerate prior for mood %r (mean=%g, var=%g); using Beta(1, 1)", mood, p_bar, v_bar)
    return BetaPrior(mood, p_bar, v_bar, 1.0, 1.0, int(p.size), fallback=True)


def conditionals(counts: CooccurrenceCounts, m: str, song_universe: Iterable[str],
                 joints: dict[str, int] | None = None) -> np.ndarray:
    """Empirical p(s|m) for every song in the universe (zeros included), sorted by id."""
    cm = counts.mood_playlists.get(m, 0)
    if cm <= 0:
        raise UndefinedMarginalError(f"mood {m!r} occurs in no playlist")
    if joints is None:
        joints = counts.joints_for_mood(m)
    songs = sorted(song_universe)
    return np.array([joints.get(s, 0) for s in songs], dtype=np.float64) / cm


def fit_beta_prior(counts: CooccurrenceCounts, m: str, song_universe: Iterable[str],
                   joints: dict[str, int] | None = None) -> BetaPrior:
    return moments_prior(conditionals(counts, m, song_universe, joints), m)


def posterior_prob(counts: CooccurrenceCounts, prior: BetaPrior, s: str, m: str) -> float:
    cm = counts.mood_playlists.get(m, 0)
    if cm <= 0:
        raise UndefinedMarginalError(f"mood {m!r} occurs in no playlist")
    j = counts.joint.get((s, m), 0)
    return (j + prior.alpha_hat) / (cm + prior.alpha_hat + prior.beta_hat)


@dataclass(frozen=True)
class Diagnostic:
    song_id: str
    mood: str
    kind: str
    detail: str = ""


def bnpmi(counts: CooccurrenceCounts, prior: BetaPrior, s: str, m: str,
          diagnostics: list | None = None) -> float:
    """NPMI with p(s|m) replaced by the Beta posterior mean.

    Clamped to [-1, 1]; clamps larger than 1e-6 are appended to
    ``diagnostics`` when a list is given.
    """
    n, cs, cm, j = _marginals(counts, s, m)
    post = (j + prior.alpha_hat) / (cm + prior.alpha_hat + prior.beta_hat)
    raw = _normalized(math.log(cs / n), math.log(cm / n), math.log(post), s, m)
    value = min(1.0, max(-1.0, raw))
    if abs(raw - value) > CLAMP_REPORT_EPS and diagnostics is not None:
        diagnostics.append(Diagnostic(s, m, "clamped", f"{raw:.9g}"))
    return value


# -- labels -------------------------------------------------------------------

class AssociationLabel(str, Enum):
    NEGATIVE = "Negative"
    NEUTRAL = "Neutral"
    POSITIVE = "Positive"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class BinningConfig:
    tau: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ConfigError(f"tau must be in (0, 1), got {self.tau}")


def bin_label(score: float, config: BinningConfig | float = BinningConfig()) -> AssociationLabel:
    """Positive for score >= tau, Negative for score <= -tau, else Neutral."""
    tau = config.tau if isinstance(config, BinningConfig) else float(config)
    if score >= tau:
        return AssociationLabel.POSITIVE
    if score <= -tau:
        return AssociationLabel.NEGATIVE
    return AssociationLabel.NEUTRAL


# -- batch scoring ------------------------------------------------------------

@dataclass(frozen=True)
class AssociationScore:
    song_id: str
    mood_term: str
    pmi: float
    npmi: float
    bnpmi: float
    label: AssociationLabel
    prior_fallback: bool = False


@dataclass
class ScoreTable:
    rows: list[AssociationScore]
    priors: dict[str, BetaPrior]
    diagnostics: list[Diagnostic]

    def bnpmi_map(self) -> dict[tuple[str, str], float]:
        return {(r.song_id, r.mood_term): r.bnpmi for r in self.rows}


def _score_mood(counts, m, prior, songs, joints, include_zero_joint, config):
    rows, diags = [], []
    targets = songs if include_zero_joint else sorted(s for s in joints if s in songs)
    for s in targets:
        if counts.song_playlists.get(s, 0) <= 0:
            continue
        try:
            b = bnpmi(counts, prior, s, m, diags)
            rows.append(AssociationScore(s, m, pmi(counts, s, m), npmi(counts, s, m), b,
                                         bin_label(b, config), prior.fallback))
        except DegenerateDenominatorError as exc:
            diags.append(Diagnostic(s, m, "degenerate_denominator", str(exc)))
    return rows, diags


def score_all(counts: CooccurrenceCounts, song_universe: Iterable[str] | None = None,
              lexicon: MoodLexicon | None = None, config: BinningConfig = BinningConfig(),
              include_zero_joint: bool = False, threads: int = 1) -> ScoreTable:
    """Score every co-occurring (song, mood) pair, optionally all pairs.

    Priors are fit once per mood over ``song_universe`` (default: every song
    seen in a playlist). Rows come back sorted by (song_id, mood).
    """
    if counts.n_playlists <= 0:
        raise InsufficientDataError("no playlists counted")
    universe = sorted(set(song_universe) if song_universe is not None else set(counts.song_playlists))
    if lexicon is not None:
        moods = [t for t in lexicon.terms if counts.mood_playlists.get(t, 0) > 0]
    else:
        moods = sorted(m for m, c in counts.mood_playlists.items() if c > 0)

    by_mood: dict[str, dict[str, int]] = {m: {} for m in moods}
    for (s, m), c in counts.joint.items():
        if m in by_mood and c > 0:
            by_mood[m][s] = c

    priors = {m: fit_beta_prior(counts, m, universe, by_mood[m]) for m in moods}
    songs = set(universe)
    scored_songs = universe if include_zero_joint else songs

    def work(m):
        return _score_mood(counts, m, priors[m], scored_songs, by_mood[m], include_zero_joint, config)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, moods))
    else:
        parts = [work(m) for m in moods]

    rows = [r for part, _ in parts for r in part]
    diags = [d for _, part in parts for d in part]
    rows.sort(key=lambda r: (r.song_id, r.mood_term))
    diags.sort(key=lambda d: (d.song_id, d.mood, d.kind))
    return ScoreTable(rows, priors, diags)


def fmt_real(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.9g}"


SCORES_HEADER = ["song_id", "mood", "pmi", "npmi", "bnpmi", "label", "prior_fallback"]


def write_scores(rows: Iterable[AssociationScore], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SCORES_HEADER)
        for r in sorted(rows, key=lambda r: (r.song_id, r.mood_term)):
            writer.writerow([r.song_id, r.mood_term, fmt_real(r.pmi), fmt_real(r.npmi),
                             fmt_real(r.bnpmi), r.label.value, int(r.prior_fallback)])


def read_scores(path) -> list[AssociationScore]:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != SCORES_HEADER:
            raise ParseError(f"expected header {','.join(SCORES_HEADER)}", str(path), 1)
        for rec in reader:
            try:
                rows.append(AssociationScore(
                    rec["song_id"], rec["mood"], float(rec["pmi"]), float(rec["npmi"]),
                    float(rec["bnpmi"]), AssociationLabel(rec["label"]), rec["prior_fallback"] == "1"))
            except ValueError as exc:
                raise ParseError(str(exc), str(path), reader.line_num) from None
    return rows


def write_priors(priors: dict[str, BetaPrior], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["mood", "p_bar", "v_bar", "alpha_hat", "beta_hat", "n_songs_used", "fallback"])
        for m in sorted(priors):
            p = priors[m]
            writer.writerow([m, fmt_real(p.p_bar), fmt_real(p.v_bar), fmt_real(p.alpha_hat),
                             fmt_real(p.beta_hat), p.n_songs_used, int(p.fallback)])


def write_diagnostics(diags: Iterable[Diagnostic], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["song_id", "mood", "kind", "detail"])
        for d in diags:
            writer.writerow([d.song_id, d.mood, d.kind, d.detail])


# -- summaries ----------------------------------------------------------------

@dataclass(frozen=True)
class DistributionStats:
    mean: float
    std: float
    bin_edges: np.ndarray
    counts: np.ndarray

    def as_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "n": int(self.counts.sum()),
                "bin_edges": [float(e) for e in self.bin_edges],
                "counts": [int(c) for c in self.counts]}


def distribution_stats(scores: Iterable[float], bins: int = 40) -> DistributionStats:
    x = np.asarray(list(scores), dtype=np.float64)
    if x.size < 2:
        raise InsufficientDataError("need at least 2 scores")
    counts, edges = np.histogram(x, bins=bins, range=(-1.0, 1.0))
    return DistributionStats(float(x.mean()), float(x.std(ddof=1)), edges, counts)


def top_positive_moods(scores: Iterable[AssociationScore], k: int = 20) -> list[tuple[str, int]]:
    """Moods ranked by number of Positive labels; ties by term."""
    c = Counter(r.mood_term for r in scores if r.label == AssociationLabel.POSITIVE)
    return sorted(c.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
