"""In-memory experiment drivers over simulated corpora (used by scripts/ and tests)."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .association import AssociationLabel, BinningConfig, count, score_all
from .evaluation import Verdict, confusion, metrics
from .features import fit_scaler, fit_vocabulary, hybrid_matrix, scale, tfidf_matrix
from .ingest import split_train_test
from .models import TrainConfig, classify, train_hybrid_head, train_logistic
from .simulate import DRIVER_ACOUSTICS, DRIVER_LYRICS, SimConfig, generate, validate_recovery

KINDS = ("bow", "acoustic", "hybrid-bow", "hybrid-embed")


def recovery_medians(config: SimConfig, seeds) -> list[float]:
    out = []
    for seed in seeds:
        corpus = generate(replace(config, seed=seed))
        table = score_all(count(corpus.playlists, corpus.lexicon), lexicon=corpus.lexicon)
        out.append(validate_recovery(table.rows, corpus.truth).median)
    return out


def modality_config(seed: int = 0) -> SimConfig:
    """One acoustic-driven and one lyric-driven mood among four."""
    return SimConfig(n_songs=2000, n_moods=4, n_playlists=60_000, seed=seed,
                     drivers=(DRIVER_ACOUSTICS, DRIVER_LYRICS, "none", "none"))


@dataclass
class ModalityResult:
    f1: dict[tuple[str, str], float]   # (mood, kind) -> F1 on the test split
    n_test: dict[str, int]
    drivers: dict[str, str]


def modality_f1(config: SimConfig, tau: float = 0.1, train_fraction: float = 0.75,
                train: TrainConfig = TrainConfig()) -> ModalityResult:
    """Train every model kind per driven mood on BNPMI labels and score the test split."""
    corpus = generate(config)
    table = score_all(count(corpus.playlists, corpus.lexicon), lexicon=corpus.lexicon,
                      config=BinningConfig(tau))
    split = split_train_test([s.song_id for s in corpus.songs], train_fraction, config.seed)
    songs = {s.song_id: s for s in corpus.songs}
    train_ids = sorted(split.train_ids)

    vocab = fit_vocabulary([songs[s].lyrics for s in train_ids], 2, ids=train_ids, split=split)
    ac_scaler = fit_scaler([songs[s].acoustic.to_array() for s in train_ids], ids=train_ids, split=split)
    emb_scaler = fit_scaler([corpus.embeddings.vectors[s] for s in train_ids], ids=train_ids, split=split)

    def feats(kind, ids):
        lyr = [songs[s].lyrics for s in ids]
        ac = scale(ac_scaler, np.array([songs[s].acoustic.to_array() for s in ids]))
        if kind == "bow":
            return tfidf_matrix(vocab, lyr)
        if kind == "acoustic":
            return ac
        if kind == "hybrid-bow":
            return hybrid_matrix(tfidf_matrix(vocab, lyr), ac)
        return scale(emb_scaler, np.array([corpus.embeddings.vectors[s] for s in ids])), ac

    labels = {(r.song_id, r.mood_term): r.label for r in table.rows
              if r.label is not AssociationLabel.NEUTRAL}
    drivers = dict(zip(corpus.truth.moods, corpus.truth.drivers))
    f1, n_test = {}, {}
    for mood, driver in drivers.items():
        if driver not in (DRIVER_LYRICS, DRIVER_ACOUSTICS):
            continue
        tr = sorted(s for (s, m) in labels if m == mood and s in split.train_ids)
        te = sorted(s for (s, m) in labels if m == mood and s in split.test_ids)
        y = np.array([labels[(s, mood)] is AssociationLabel.POSITIVE for s in tr], dtype=float)
        truth = {(s, mood): Verdict(labels[(s, mood)].value) for s in te}
        n_test[mood] = len(te)
        for kind in KINDS:
            if kind == "hybrid-embed":
                model = train_hybrid_head(*feats(kind, tr), y, train, mood=mood)
                probs = model.predict_proba(*feats(kind, te))
            else:
                model = train_logistic(feats(kind, tr), y, train, mood=mood)
                probs = model.predict_proba(feats(kind, te))
            preds = {(s, mood): classify(p) for s, p in zip(te, probs)}
            f1[(mood, kind)] = metrics(confusion(preds, truth)).f1
    return ModalityResult(f1, n_test, drivers)
