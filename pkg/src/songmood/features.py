"""Song representations: tf.idf over lyrics, acoustic vectors, hybrids, embeddings."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, fields
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import CoverageError, DataError, InsufficientDataError, LeakageError, ParseError
from .text import tokenize


@dataclass(frozen=True)
class AcousticFeatures:
    acousticness: float
    bounciness: float
    beat_strength: float
    danceability: float
    energy: float
    flatness: float
    instrumentalness: float
    liveness: float
    loudness: float
    longest_silence_ratio: float
    mechanism: float
    organism: float
    runnability: float
    speechiness: float
    tempo: float
    valence: float
    mean_dynamic_range: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValueError(f"acoustic feature {f.name} must be a finite number, got {v!r}")

    @classmethod
    def names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    @classmethod
    def from_mapping(cls, obj: Mapping) -> "AcousticFeatures":
        if not isinstance(obj, Mapping):
            raise ValueError("'acoustic' must be an object")
        missing = [n for n in cls.names() if n not in obj]
        if missing:
            raise ValueError(f"acoustic features missing {', '.join(missing)}")
        return cls(**{n: float(obj[n]) for n in cls.names()})

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "AcousticFeatures":
        return cls(*(float(v) for v in values))

    def as_dict(self) -> dict[str, float]:
        return {n: getattr(self, n) for n in self.names()}

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in self.names()], dtype=np.float64)


N_ACOUSTIC = len(AcousticFeatures.names())


def _check_no_leakage(ids, split) -> None:
    if split is None:
        return
    if ids is None:
        raise LeakageError("a split was supplied but fit ids were not")
    leaked = sorted(set(ids) & set(split.test_ids))
    if leaked:
        raise LeakageError(f"fit data contains {len(leaked)} test ids, e.g. {leaked[0]!r}")


@dataclass(frozen=True)
class Vocabulary:
    term_index: dict[str, int]
    doc_freq: dict[str, int]
    n_docs: int
    fitted_on: str = "train"

    def __len__(self) -> int:
        return len(self.term_index)

    def idf(self) -> np.ndarray:
        out = np.empty(len(self.term_index))
        for term, i in self.term_index.items():
            out[i] = math.log((1 + self.n_docs) / (1 + self.doc_freq[term])) + 1.0
        return out


def fit_vocabulary(train_lyrics: Iterable[str], min_df: int = 2, *, ids=None, split=None) -> Vocabulary:
    """Unigram vocabulary of terms with document frequency >= min_df.

    Columns are assigned in lexicographic term order. Passing ``split`` (with
    the ``ids`` of ``train_lyrics``) turns any test id into a LeakageError.
    """
    _check_no_leakage(ids, split)
    df: Counter[str] = Counter()
    n_docs = 0
    for doc in train_lyrics:
        n_docs += 1
        df.update(set(tokenize(doc)))
    if n_docs == 0:
        raise InsufficientDataError("cannot fit a vocabulary on an empty corpus")
    kept = sorted(t for t, c in df.items() if c >= min_df)
    return Vocabulary({t: i for i, t in enumerate(kept)}, {t: df[t] for t in kept}, n_docs)


def write_vocabulary(vocab: Vocabulary, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# n_docs={vocab.n_docs},fitted_on={vocab.fitted_on}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["term", "index", "df"])
        for term, i in sorted(vocab.term_index.items(), key=lambda kv: kv[1]):
            writer.writerow([term, i, vocab.doc_freq[term]])


def read_vocabulary(path) -> Vocabulary:
    with open(path, encoding="utf-8", newline="") as fh:
        meta_line = fh.readline()
        if not meta_line.startswith("# "):
            raise ParseError("missing vocabulary meta line", str(path), 1)
        meta = dict(kv.split("=", 1) for kv in meta_line[2:].strip().split(","))
        reader = csv.DictReader(fh)
        term_index, doc_freq = {}, {}
        for row in reader:
            term_index[row["term"]] = int(row["index"])
            doc_freq[row["term"]] = int(row["df"])
    return Vocabulary(term_index, doc_freq, int(meta["n_docs"]), meta.get("fitted_on", "train"))


@dataclass(frozen=True)
class SparseVector:
    dims: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values differ in length")
        if len(self.indices) and (np.any(np.diff(self.indices) <= 0) or self.indices[0] < 0
                                  or self.indices[-1] >= self.dims):
            raise ValueError("indices must be strictly increasing and within dims")

    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.values, self.values)))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dims)
        out[self.indices] = self.values
        return out

    @classmethod
    def zeros(cls, dims: int) -> "SparseVector":
        return cls(dims, np.zeros(0, dtype=np.int64), np.zeros(0))


def tfidf_transform(vocab: Vocabulary, lyrics: str, idf: np.ndarray | None = None) -> SparseVector:
    """L2-normalized raw-count tf times smoothed idf, ``ln((1+N)/(1+df)) + 1``.

    Out-of-vocabulary tokens are dropped. ``idf`` may be passed to avoid
    recomputing it per document.
    """
    if idf is None:
        idf = vocab.idf()
    counts = Counter(t for t in tokenize(lyrics) if t in vocab.term_index)
    if not counts:
        return SparseVector.zeros(len(vocab))
    idx = np.array(sorted(vocab.term_index[t] for t in counts), dtype=np.int64)
    inv = {i: t for t, i in vocab.term_index.items() if t in counts}
    vals = np.array([counts[inv[i]] * idf[i] for i in idx])
    vals /= np.sqrt(np.dot(vals, vals))
    return SparseVector(len(vocab), idx, vals)


def tfidf_matrix(vocab: Vocabulary, docs: Sequence[str]) -> sp.csr_matrix:
    idf = vocab.idf()
    indptr, indices, data = [0], [], []
    for doc in docs:
        v = tfidf_transform(vocab, doc, idf)
        indices.extend(v.indices.tolist())
        data.extend(v.values.tolist())
        indptr.append(len(indices))
    return sp.csr_matrix((np.array(data, dtype=np.float64), np.array(indices, dtype=np.int64),
                          np.array(indptr, dtype=np.int64)), shape=(len(docs), len(vocab)))


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray  # bool mask; these dims are centred but not divided

    @property
    def dims(self) -> int:
        return len(self.mean)

    def as_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "constant": self.constant.tolist()}

    @classmethod
    def from_dict(cls, obj) -> "Scaler":
        return cls(np.array(obj["mean"], dtype=np.float64), np.array(obj["std"], dtype=np.float64),
                   np.array(obj["constant"], dtype=bool))


def fit_scaler(train_vectors, *, ids=None, split=None) -> Scaler:
    _check_no_leakage(ids, split)
    X = np.asarray(train_vectors, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise InsufficientDataError("fit_scaler needs at least 2 vectors")
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite value in scaler input")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    constant = ~(std > 1e-12 * np.maximum(1.0, np.abs(mean)))
    std = np.where(constant, 1.0, std)
    return Scaler(mean, std, constant)


def scale(scaler: Scaler, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != scaler.dims:
        raise DataError(f"dimension mismatch: scaler has {scaler.dims}, vector has {v.shape[-1]}")
    return (v - scaler.mean) / scaler.std


def hybrid_concat(lyric_part, acoustic_part):
    """Append acoustic dimensions after lyric dimensions."""
    acoustic_part = np.asarray(acoustic_part, dtype=np.float64)
    if isinstance(lyric_part, SparseVector):
        nz = np.flatnonzero(acoustic_part)
        return SparseVector(
            lyric_part.dims + len(acoustic_part),
            np.concatenate([lyric_part.indices, nz + lyric_part.dims]).astype(np.int64),
            np.concatenate([lyric_part.values, acoustic_part[nz]]),
        )
    return np.concatenate([np.asarray(lyric_part, dtype=np.float64), acoustic_part])


def hybrid_matrix(lyric_matrix, acoustic_matrix):
    if sp.issparse(lyric_matrix):
        return sp.hstack([lyric_matrix, sp.csr_matrix(acoustic_matrix)], format="csr")
    return np.hstack([lyric_matrix, acoustic_matrix])


@dataclass(frozen=True)
class Embeddings:
    vectors: dict[str, np.ndarray]
    dim: int

    def __len__(self) -> int:
        return len(self.vectors)

    def lookup(self, song_ids: Sequence[str]) -> tuple[np.ndarray, list[str], list[str]]:
        """Stack vectors for known ids; returns (matrix, found_ids, missing_ids)."""
        found = [s for s in song_ids if s in self.vectors]
        missing = [s for s in song_ids if s not in self.vectors]
        if found:
            mat = np.vstack([self.vectors[s] for s in found])
        else:
            mat = np.zeros((0, self.dim))
        return mat, found, missing


def load_embeddings(path) -> Embeddings:
    """Read ``song_id,v0,...,v{d-1}``; the header fixes the dimension."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty embeddings file", str(path), 1) from None
        if not header or header[0] != "song_id" or len(header) < 2:
            raise ParseError("header must be song_id,v0,v1,...", str(path), 1)
        dim = len(header) - 1
        vectors = {}
        for row in reader:
            if not row:
                continue
            sid = row[0]
            if len(row) - 1 != dim:
                raise DataError(f"song {sid!r} has {len(row) - 1} values, expected {dim}",
                                str(path), reader.line_num)
            try:
                vec = np.array([float(x) for x in row[1:]])
            except ValueError:
                raise ParseError(f"non-numeric value for song {sid!r}", str(path), reader.line_num) from None
            if not np.all(np.isfinite(vec)):
                raise DataError(f"non-finite value for song {sid!r}", str(path), reader.line_num)
            vectors[sid] = vec
    return Embeddings(vectors, dim)


def write_embeddings(emb: Embeddings, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["song_id"] + [f"v{i}" for i in range(emb.dim)])
        for sid in sorted(emb.vectors):
            writer.writerow([sid] + [repr(float(x)) for x in emb.vectors[sid]])


def require_coverage(missing: Sequence[str], what: str, strict: bool = False) -> None:
    if missing and strict:
        raise CoverageError(f"{len(missing)} songs lack {what}", missing)
