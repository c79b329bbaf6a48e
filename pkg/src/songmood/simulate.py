"""Synthetic playlist corpora with a known song-mood affinity.

Each song has an affinity row on the simplex over moods. Themed playlists
pick one mood, usually put its term in the title, and draw tracks in
proportion to the songs' affinity for that mood; noise playlists draw
tracks uniformly and carry no mood term. Every mood is flagged as driven by
lyrics, by acoustics, or by neither: lyric-driven moods plant indicative
tokens in lyrics, acoustic-driven moods shift two acoustic dimensions.
Randomness is counter-based (one Philox stream per playlist / song) so the
output depends only on the seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import spearmanr

from .annotation import AnnotationRecord, Judgment, Source
from .errors import ConfigError
from .features import AcousticFeatures, Embeddings, N_ACOUSTIC
from .ingest import PlaylistRecord, SongRecord
from .lexicon import MoodLexicon, default_lexicon
from .text import tokenize

FILLER_WORDS = ("mix", "playlist", "tunes", "songs", "hits", "radio", "collection",
                "favorites", "selection", "jams", "tracks", "rotation")

# (mean, sd) per acoustic feature, in field order.
ACOUSTIC_BASE = (
    (0.3, 0.15), (0.5, 0.15), (0.5, 0.15), (0.6, 0.15), (0.6, 0.18), (0.4, 0.12),
    (0.1, 0.08), (0.2, 0.1), (-8.0, 3.0), (0.05, 0.03), (0.5, 0.15), (0.5, 0.15),
    (0.4, 0.15), (0.08, 0.05), (120.0, 25.0), (0.5, 0.2), (8.0, 2.5),
)

DRIVER_NONE, DRIVER_LYRICS, DRIVER_ACOUSTICS = "none", "lyrics", "acoustics"

# stream ids for named substreams
_S_AFFINITY, _S_PLAYLIST, _S_SONG, _S_EMBED, _S_ANNOT = 1, 2, 3, 4, 5


@dataclass(frozen=True)
class SimConfig:
    n_songs: int = 200
    n_moods: int = 10
    n_playlists: int = 50_000
    tracks_per_playlist: tuple[int, int] = (5, 20)
    mood_title_probability: float = 0.9
    affinity_concentration: float = 0.3
    noise_playlist_fraction: float = 0.1
    lyric_vocab_size: int = 500
    seed: int = 0
    lyric_length: int = 80
    lyric_signal: float = 80.0
    indicative_tokens: int = 5
    acoustic_shift: float = 10.0
    embedding_dim: int = 16
    embedding_noise: float = 0.05
    drivers: tuple[str, ...] | None = None

    def __post_init__(self):
        for name in ("n_songs", "n_moods", "n_playlists", "lyric_vocab_size", "embedding_dim",
                     "indicative_tokens"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        lo, hi = self.tracks_per_playlist
        if not 1 <= lo <= hi:
            raise ConfigError("tracks_per_playlist must be a range 1 <= lo <= hi")
        if hi > self.n_songs:
            raise ConfigError(f"tracks_per_playlist upper bound {hi} exceeds n_songs {self.n_songs}")
        if not 0.0 < self.mood_title_probability <= 1.0:
            raise ConfigError("mood_title_probability must be in (0, 1]")
        if not self.affinity_concentration > 0:
            raise ConfigError("affinity_concentration must be positive")
        if not 0.0 <= self.noise_playlist_fraction < 1.0:
            raise ConfigError("noise_playlist_fraction must be in [0, 1)")
        if self.drivers is not None:
            if len(self.drivers) != self.n_moods:
                raise ConfigError("drivers must name one driver per mood")
            bad = set(self.drivers) - {DRIVER_NONE, DRIVER_LYRICS, DRIVER_ACOUSTICS}
            if bad:
                raise ConfigError(f"unknown drivers {sorted(bad)}")

    def mood_drivers(self) -> tuple[str, ...]:
        if self.drivers is not None:
            return tuple(self.drivers)
        cycle = (DRIVER_ACOUSTICS, DRIVER_LYRICS, DRIVER_NONE)
        return tuple(cycle[i % 3] for i in range(self.n_moods))


@dataclass
class GroundTruth:
    song_ids: list[str]
    moods: list[str]
    affinity: np.ndarray
    drivers: tuple[str, ...]

    @property
    def lyric_driver(self) -> np.ndarray:
        return np.array([d == DRIVER_LYRICS for d in self.drivers])

    @property
    def acoustic_driver(self) -> np.ndarray:
        return np.array([d == DRIVER_ACOUSTICS for d in self.drivers])

    def affinity_of(self, song_id: str, mood: str) -> float:
        return float(self.affinity[self._song_index()[song_id], self.moods.index(mood)])

    def _song_index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.song_ids)}

    def is_associated(self, song_id: str, mood: str) -> bool:
        """Affinity above the uniform share 1/n_moods."""
        return self.affinity_of(song_id, mood) > 1.0 / len(self.moods)


@dataclass
class SimCorpus:
    playlists: list[PlaylistRecord]
    songs: list[SongRecord]
    truth: GroundTruth
    lexicon: MoodLexicon
    embeddings: Embeddings
    cooccurring: set = field(default_factory=set)


def _rng(seed: int, stream: int, index: int) -> np.random.Generator:
    key = (int(seed) & 0xFFFFFFFFFFFFFFFF) * 16 + stream
    return np.random.Generator(np.random.Philox(key=key & ((1 << 128) - 1), counter=[0, index, 0, 0]))


def pick_moods(n: int, lexicon: MoodLexicon | None = None) -> MoodLexicon:
    """First ``n`` lexicon moods whose tokens don't overlap with an earlier pick."""
    lexicon = lexicon or default_lexicon()
    chosen, used = [], set()
    for mood in lexicon:
        toks = set(mood.tokens)
        if toks & used or toks & set(FILLER_WORDS):
            continue
        chosen.append(mood)
        used |= toks
        if len(chosen) == n:
            return MoodLexicon(tuple(chosen))
    raise ConfigError(f"lexicon has only {len(chosen)} non-overlapping moods, {n} requested")


def _weighted_sample(rng: np.random.Generator, weights: np.ndarray, k: int) -> np.ndarray:
    """k distinct indices, drawn without replacement proportional to weights."""
    u = rng.random(weights.size)
    with np.errstate(divide="ignore"):
        keys = np.log(u) / weights
    top = np.argpartition(-keys, k - 1)[:k]
    return top[np.argsort(-keys[top], kind="stable")]


def _slug(term: str) -> str:
    return "".join(tokenize(term))


def generate(config: SimConfig = SimConfig(), lexicon: MoodLexicon | None = None) -> SimCorpus:
    lex = pick_moods(config.n_moods, lexicon)
    terms = list(lex.terms)
    drivers = config.mood_drivers()
    n_s, n_m = config.n_songs, config.n_moods
    width = len(str(n_s))
    song_ids = [f"s{i:0{width}d}" for i in range(n_s)]

    aff_rng = _rng(config.seed, _S_AFFINITY, 0)
    affinity = aff_rng.dirichlet(np.full(n_m, config.affinity_concentration), size=n_s)
    affinity = np.maximum(affinity, 1e-300)
    affinity /= affinity.sum(axis=1, keepdims=True)
    truth = GroundTruth(song_ids, terms, affinity, drivers)

    playlists, cooccurring = [], set()
    lo, hi = config.tracks_per_playlist
    pwidth = len(str(config.n_playlists))
    uniform = np.ones(n_s)
    for i in range(config.n_playlists):
        rng = _rng(config.seed, _S_PLAYLIST, i)
        k = int(rng.integers(lo, hi + 1))
        filler = FILLER_WORDS[int(rng.integers(len(FILLER_WORDS)))]
        pid = f"p{i:0{pwidth}d}"
        if rng.random() < config.noise_playlist_fraction:
            tracks = _weighted_sample(rng, uniform, k)
            title, mood = f"my {filler}", None
        else:
            m = int(rng.integers(n_m))
            tracks = _weighted_sample(rng, affinity[:, m], k)
            if rng.random() < config.mood_title_probability:
                mood = terms[m]
                title = f"{mood} {filler}" if rng.random() < 0.5 else f"{filler} {mood}"
            else:
                title, mood = f"{filler} {i % 97}", None
        track_ids = tuple(song_ids[t] for t in tracks)
        playlists.append(PlaylistRecord(pid, title, None, track_ids))
        if mood is not None:
            cooccurring.update((s, mood) for s in track_ids)

    songs, indicators = _songs(config, song_ids, terms, drivers, affinity)
    emb = _embeddings(config, song_ids, indicators)
    return SimCorpus(playlists, songs, truth, lex, emb, cooccurring)


def _songs(config, song_ids, terms, drivers, affinity):
    vocab = [f"w{i}" for i in range(config.lyric_vocab_size)]
    zipf = 1.0 / np.arange(1, len(vocab) + 1)
    zipf /= zipf.sum()
    indicative = {m: [f"{_slug(t)}{j}" for j in range(config.indicative_tokens)]
                  for m, t in enumerate(terms) if drivers[m] == DRIVER_LYRICS}
    acoustic_dims = {m: ((2 * m) % N_ACOUSTIC, (2 * m + 1) % N_ACOUSTIC)
                     for m in range(len(terms)) if drivers[m] == DRIVER_ACOUSTICS}
    base = np.array(ACOUSTIC_BASE)

    songs, indicators = [], np.zeros((len(song_ids), len(terms)))
    for i, sid in enumerate(song_ids):
        rng = _rng(config.seed, _S_SONG, i)
        words = [vocab[j] for j in rng.choice(len(vocab), size=config.lyric_length, p=zipf)]
        for m, toks in indicative.items():
            n = int(rng.poisson(config.lyric_signal * affinity[i, m]))
            words.extend(toks[j] for j in rng.integers(len(toks), size=n))
            indicators[i, m] = n / config.lyric_signal
        order = rng.permutation(len(words))
        lyrics = " ".join(words[j] for j in order)
        values = base[:, 0] + base[:, 1] * rng.standard_normal(N_ACOUSTIC)
        for m, dims in acoustic_dims.items():
            for d in dims:
                values[d] += config.acoustic_shift * base[d, 1] * affinity[i, m]
        songs.append(SongRecord(sid, lyrics, AcousticFeatures.from_array(values)))
    return songs, indicators


def _embeddings(config, song_ids, indicators) -> Embeddings:
    rng = _rng(config.seed, _S_EMBED, 0)
    n_m = indicators.shape[1]
    proj = rng.standard_normal((config.embedding_dim, n_m)) / np.sqrt(n_m)
    vectors = {}
    for i, sid in enumerate(song_ids):
        r = _rng(config.seed, _S_EMBED, i + 1)
        vectors[sid] = proj @ indicators[i] + config.embedding_noise * r.standard_normal(config.embedding_dim)
    return Embeddings(vectors, config.embedding_dim)


def simulate_annotations(corpus: SimCorpus, n_pairs: int = 300, accuracy: float = 0.8,
                         seed: int = 0) -> list[AnnotationRecord]:
    """Three noisy judges per (pair, source) over co-occurring pairs.

    A source's true verdict is Yes/No (affinity above 1/n_moods) when the
    mood is driven by that modality and Uninformative otherwise. Each judge
    reports it with probability ``accuracy``; a fourth judge gives the true
    verdict when all three disagree.
    """
    pairs = sorted(corpus.cooccurring)
    rng = _rng(seed, _S_ANNOT, 0)
    picks = sorted(rng.choice(len(pairs), size=min(n_pairs, len(pairs)), replace=False))
    truth = corpus.truth
    values = list(Judgment)
    records = []
    for idx in picks:
        s, m = pairs[idx]
        driver = truth.drivers[truth.moods.index(m)]
        hit = Judgment.YES if truth.is_associated(s, m) else Judgment.NO
        for source, wanted in ((Source.LYRICS, DRIVER_LYRICS), (Source.ACOUSTICS, DRIVER_ACOUSTICS)):
            true = hit if driver == wanted else Judgment.UNINFORMATIVE
            judges = []
            for _ in range(3):
                if rng.random() < accuracy:
                    judges.append(true)
                else:
                    others = [v for v in values if v != true]
                    judges.append(others[int(rng.integers(2))])
            tiebreak = true if len(set(judges)) == 3 else None
            records.append(AnnotationRecord(s, m, source, tuple(judges), tiebreak))
    return records


def write_ground_truth(truth: GroundTruth, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["song_id", "mood", "affinity", "driver"])
        for i, s in enumerate(truth.song_ids):
            for j, m in enumerate(truth.moods):
                writer.writerow([s, m, repr(float(truth.affinity[i, j])), truth.drivers[j]])


def read_ground_truth(path) -> GroundTruth:
    songs, moods, drivers, values = [], [], {}, {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            s, m = row["song_id"], row["mood"]
            if s not in values:
                songs.append(s)
                values[s] = {}
            if m not in drivers:
                moods.append(m)
                drivers[m] = row["driver"]
            values[s][m] = float(row["affinity"])
    aff = np.array([[values[s][m] for m in moods] for s in songs])
    return GroundTruth(songs, moods, aff, tuple(drivers[m] for m in moods))


@dataclass
class RecoveryReport:
    per_mood: dict[str, float]
    excluded: list[str]
    median: float


def validate_recovery(scores, truth: GroundTruth, min_songs: int = 3) -> RecoveryReport:
    """Spearman correlation between BNPMI and affinity per mood over scored songs."""
    by_mood: dict[str, list[tuple[str, float]]] = {}
    for r in scores:
        by_mood.setdefault(r.mood_term, []).append((r.song_id, r.bnpmi))
    index = truth._song_index()
    per_mood, excluded = {}, []
    for j, m in enumerate(truth.moods):
        rows = by_mood.get(m, [])
        if len(rows) < min_songs:
            excluded.append(m)
            continue
        b = np.array([v for _, v in rows])
        a = np.array([truth.affinity[index[s], j] for s, _ in rows])
        if np.ptp(a) == 0 or np.ptp(b) == 0:
            excluded.append(m)
            continue
        per_mood[m] = float(spearmanr(b, a).statistic)
    median = float(np.median(list(per_mood.values()))) if per_mood else float("nan")
    return RecoveryReport(per_mood, excluded, median)
