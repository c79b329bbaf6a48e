"""Pipeline steps behind the CLI subcommands.

Each step reads its inputs from the config (falling back to the files an
earlier step wrote under the output directory) and writes only below it.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .annotation import Source, agreement_by_source, read_annotations, resolve, write_annotations
from .association import (
    AssociationLabel,
    BinningConfig,
    count_sharded,
    distribution_stats,
    read_scores,
    save_counts,
    score_all,
    top_positive_moods,
    write_diagnostics,
    write_priors,
    write_scores,
)
from .config import PipelineConfig
from .errors import ConfigError, CoverageError
from .evaluation import (
    METRICS_HEADER,
    Verdict,
    best_f1,
    confusion,
    metrics,
    per_mood_report,
    threshold_sweep,
    write_report,
    write_sweep,
)
from .features import (
    N_ACOUSTIC,
    Scaler,
    fit_scaler,
    fit_vocabulary,
    hybrid_matrix,
    load_embeddings,
    read_vocabulary,
    scale,
    tfidf_matrix,
    write_embeddings,
    write_vocabulary,
)
from .ingest import (
    dedupe_songs,
    playlist_to_json,
    read_playlists,
    read_songs,
    read_split,
    song_to_json,
    split_train_test,
    write_error_report,
    write_jsonl,
    write_split,
)
from .lexicon import default_lexicon, load_lexicon, write_lexicon
from .models import classify, load_model, save_model, train_hybrid_head, train_logistic
from .simulate import generate, simulate_annotations, write_ground_truth

logger = logging.getLogger(__name__)

MODEL_KINDS = ("bow", "acoustic", "hybrid-bow", "hybrid-embed")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """Output-directory bookkeeping for one subcommand invocation."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.root = Path(cfg.out)
        self.root.mkdir(parents=True, exist_ok=True)
        self.inputs: dict[str, str] = {}
        self.outputs: list[Path] = []

    def path(self, *parts: str) -> Path:
        p = self.root.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def wrote(self, p: Path) -> Path:
        self.outputs.append(p)
        return p

    def read(self, p) -> Path:
        p = Path(p)
        self.inputs[self._rel(p)] = sha256_file(p)
        return p

    def _rel(self, p: Path) -> str:
        try:
            return p.resolve().relative_to(self.root.resolve()).as_posix()
        except ValueError:
            return str(p)

    def manifest(self, command: str, sources: dict[str, str]) -> Path:
        cfg = self.cfg
        doc = {
            "command": command,
            "config": cfg.recorded(),
            "config_hash": cfg.digest(),
            "config_sources": {k: v for k, v in sorted(sources.items()) if k != "out"},
            "seed": cfg.seed,
            "substream_seeds": {n: cfg.substream_seed(n) for n in ("split", "init", "simulate")},
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": {self._rel(p): sha256_file(p) for p in sorted(set(self.outputs))},
            "versions": {"songmood": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "scipy": scipy.__version__},
        }
        p = self.path("manifests", f"{command}.json")
        p.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        return p


def _lexicon(run: Run):
    if run.cfg.lexicon:
        return load_lexicon(run.read(run.cfg.lexicon))
    return default_lexicon()


def _default(run: Run, value: str, *fallback: str) -> Path:
    p = Path(value) if value else run.root.joinpath(*fallback)
    if not p.exists():
        raise ConfigError(f"missing input {p} (set it in the config or run the producing step first)")
    return run.read(p)


# -- simulate -----------------------------------------------------------------

def step_simulate(run: Run) -> dict[str, str]:
    cfg = run.cfg
    corpus = generate(cfg.sim_config())
    paths = {
        "playlists": run.path("sim", "playlists.jsonl"),
        "songs": run.path("sim", "songs.jsonl"),
        "lexicon": run.path("sim", "lexicon.csv"),
        "embeddings": run.path("sim", "embeddings.csv"),
        "ground_truth": run.path("sim", "ground_truth.csv"),
        "annotations": run.path("sim", "annotations.csv"),
    }
    write_jsonl((playlist_to_json(p) for p in corpus.playlists), paths["playlists"])
    write_jsonl((song_to_json(s) for s in corpus.songs), paths["songs"])
    write_lexicon(corpus.lexicon, paths["lexicon"])
    write_embeddings(corpus.embeddings, paths["embeddings"])
    write_ground_truth(corpus.truth, paths["ground_truth"])
    write_annotations(simulate_annotations(corpus, cfg.sim_annotation_pairs, seed=cfg.substream_seed("annotate")),
                      paths["annotations"])
    for p in paths.values():
        run.wrote(p)
    return {k: str(v) for k, v in paths.items()}


# -- ingest -------------------------------------------------------------------

def step_ingest(run: Run) -> None:
    cfg = run.cfg
    cfg.require("playlists", "songs")
    plist = read_playlists(run.read(cfg.playlists), strict=cfg.strict)
    songs = read_songs(run.read(cfg.songs), strict=cfg.strict)
    unique = dedupe_songs(songs.records)
    logger.info("ingest: %d playlists, %d songs (%d after dedup)", len(plist.records),
                len(songs.records), len(unique))
    write_error_report(plist.errors, run.wrote(run.path("ingest", "playlist_errors.csv")))
    write_error_report(songs.errors, run.wrote(run.path("ingest", "song_errors.csv")))
    write_jsonl((song_to_json(s) for s in unique), run.wrote(run.path("ingest", "songs.jsonl")))
    split = split_train_test([s.song_id for s in unique], cfg.train_fraction, cfg.substream_seed("split"))
    write_split(split, run.wrote(run.path("ingest", "split.csv")))


# -- score --------------------------------------------------------------------

def step_score(run: Run) -> None:
    cfg = run.cfg
    cfg.require("playlists")
    lexicon = _lexicon(run)
    plist = read_playlists(run.read(cfg.playlists), strict=cfg.strict)
    counts = count_sharded(plist.records, lexicon, n_shards=max(1, cfg.threads), threads=cfg.threads)
    counts.validate()
    table = score_all(counts, lexicon=lexicon, config=BinningConfig(cfg.tau),
                      include_zero_joint=cfg.include_zero_joint, threads=cfg.threads)
    save_counts(counts, run.wrote(run.path("score", "counts.jsonl")))
    write_scores(table.rows, run.wrote(run.path("score", "scores.csv")))
    write_priors(table.priors, run.wrote(run.path("score", "priors.csv")))
    write_diagnostics(table.diagnostics, run.wrote(run.path("score", "diagnostics.csv")))
    scored = [r.bnpmi for r in table.rows]
    if len(scored) >= 2:
        stats = distribution_stats(scored, bins=cfg.hist_bins).as_dict()
    else:
        stats = {"n": len(scored), "insufficient_data": True}
    p = run.wrote(run.path("score", "distribution.json"))
    p.write_text(json.dumps(stats, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    with open(run.wrote(run.path("score", "top_moods.csv")), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "mood", "positive_count"])
        for i, (m, c) in enumerate(top_positive_moods(table.rows, cfg.top_k), start=1):
            w.writerow([i, m, c])


# -- features shared by train / predict ----------------------------------------

@dataclass
class SongTable:
    ids: list[str]
    lyrics: dict[str, str]
    acoustic: dict[str, np.ndarray]


def _song_table(run: Run) -> SongTable:
    p = run.root / "ingest" / "songs.jsonl"
    p = run.read(p) if p.exists() else _default(run, run.cfg.songs)
    recs = dedupe_songs(read_songs(p, strict=run.cfg.strict).records)
    return SongTable([s.song_id for s in recs], {s.song_id: s.lyrics for s in recs},
                     {s.song_id: s.acoustic.to_array() for s in recs if s.acoustic is not None})


def _labels(run: Run):
    rows = read_scores(_default(run, "", "score", "scores.csv"))
    return {(r.song_id, r.mood_term): r.label for r in rows
            if r.label in (AssociationLabel.POSITIVE, AssociationLabel.NEGATIVE)}


def _embeddings(run: Run):
    return load_embeddings(run.read(run.cfg.embeddings)) if run.cfg.embeddings else None


class FeatureBuilder:
    def __init__(self, vocab, scaler: Scaler, songs: SongTable, embeddings, emb_scaler: Scaler | None = None):
        self.vocab, self.scaler, self.songs, self.embeddings = vocab, scaler, songs, embeddings
        self.emb_scaler = emb_scaler

    def usable(self, kind: str, ids):
        if kind in ("acoustic", "hybrid-bow"):
            return [s for s in ids if s in self.songs.acoustic]
        if kind == "hybrid-embed":
            if self.embeddings is None:
                return []
            return [s for s in ids if s in self.songs.acoustic and s in self.embeddings.vectors]
        return list(ids)

    def matrix(self, kind: str, ids):
        if kind == "bow":
            return tfidf_matrix(self.vocab, [self.songs.lyrics[s] for s in ids])
        ac = scale(self.scaler, np.array([self.songs.acoustic[s] for s in ids]).reshape(-1, N_ACOUSTIC))
        if kind == "acoustic":
            return ac
        if kind == "hybrid-bow":
            return hybrid_matrix(tfidf_matrix(self.vocab, [self.songs.lyrics[s] for s in ids]), ac)
        E, _, _ = self.embeddings.lookup(ids)
        return scale(self.emb_scaler, E), ac


def _mood_seed(base: int, mood: str) -> int:
    return int.from_bytes(hashlib.blake2b(f"{base}/{mood}".encode(), digest_size=8).digest(), "little") >> 1


def _model_name(mood: str) -> str:
    return mood.replace(" ", "_").replace("/", "_")


# -- train --------------------------------------------------------------------

def step_train(run: Run) -> None:
    cfg = run.cfg
    songs = _song_table(run)
    split = read_split(_default(run, "", "ingest", "split.csv"))
    labels = _labels(run)
    emb = _embeddings(run)
    train_ids = [s for s in songs.ids if s in split.train_ids]

    vocab = fit_vocabulary([songs.lyrics[s] for s in train_ids], cfg.min_df, ids=train_ids, split=split)
    write_vocabulary(vocab, run.wrote(run.path("models", "vocabulary.csv")))
    ac_ids = [s for s in train_ids if s in songs.acoustic]
    scaler = fit_scaler(np.array([songs.acoustic[s] for s in ac_ids]), ids=ac_ids, split=split)
    p = run.wrote(run.path("models", "scaler.json"))
    p.write_text(json.dumps(scaler.as_dict(), sort_keys=True) + "\n", encoding="utf-8")
    emb_scaler = None
    if emb is not None:
        emb_ids = [s for s in train_ids if s in emb.vectors]
        emb_scaler = fit_scaler(emb.lookup(emb_ids)[0], ids=emb_ids, split=split)
        p = run.wrote(run.path("models", "embedding_scaler.json"))
        p.write_text(json.dumps(emb_scaler.as_dict(), sort_keys=True) + "\n", encoding="utf-8")
    fb = FeatureBuilder(vocab, scaler, songs, emb, emb_scaler)

    moods = sorted({m for _, m in labels})
    train_set = set(train_ids)
    init_seed = cfg.substream_seed("init")
    jobs = [(kind, mood) for kind in MODEL_KINDS for mood in moods
            if not (kind == "hybrid-embed" and emb is None)]

    def fit(job):
        kind, mood = job
        pairs = sorted(s for (s, m) in labels if m == mood and s in train_set)
        ids = fb.usable(kind, pairs)
        y = np.array([1.0 if labels[(s, mood)] == AssociationLabel.POSITIVE else 0.0 for s in ids])
        if y.size == 0 or y.min() == y.max():
            return job, None, f"single-class or empty training labels ({y.size} examples)"
        tc = cfg.train_config(_mood_seed(init_seed, mood))
        if kind == "hybrid-embed":
            E, A = fb.matrix(kind, ids)
            return job, train_hybrid_head(E, A, y, tc, mood=mood), ""
        return job, train_logistic(fb.matrix(kind, ids), y, tc, mood=mood, features=kind), ""

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(fit, jobs))
    else:
        results = [fit(j) for j in jobs]

    ext = "bin" if cfg.binary_models else "json"
    coverage = []
    for (kind, mood), model, reason in results:
        if model is None:
            coverage.append((kind, mood, "skipped", reason))
            continue
        p = run.wrote(run.path("models", kind, f"{_model_name(mood)}.{ext}"))
        save_model(model, p, binary=cfg.binary_models)
        coverage.append((kind, mood, "trained", f"{model.train_meta['n_pos']}+/{model.train_meta['n_neg']}-"))
    with open(run.wrote(run.path("models", "coverage.csv")), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "mood", "status", "detail"])
        w.writerows(coverage)


# -- predict ------------------------------------------------------------------

def _load_models(run: Run, kind: str) -> dict[str, object]:
    d = run.root / "models" / kind
    out = {}
    if d.is_dir():
        for p in sorted(d.iterdir()):
            if p.suffix in (".json", ".bin"):
                model = load_model(run.read(p))
                out[model.mood_term] = model
    return out


def step_predict(run: Run) -> None:
    songs = _song_table(run)
    split = read_split(_default(run, "", "ingest", "split.csv"))
    vocab = read_vocabulary(_default(run, "", "models", "vocabulary.csv"))
    scaler = Scaler.from_dict(json.loads(_default(run, "", "models", "scaler.json").read_text(encoding="utf-8")))
    emb = _embeddings(run)
    emb_scaler = None
    if emb is not None:
        emb_scaler = Scaler.from_dict(json.loads(
            _default(run, "", "models", "embedding_scaler.json").read_text(encoding="utf-8")))
    fb = FeatureBuilder(vocab, scaler, songs, emb, emb_scaler)
    test_ids = [s for s in songs.ids if s in split.test_ids]
    for kind in MODEL_KINDS:
        models = _load_models(run, kind)
        if not models:
            continue
        ids = fb.usable(kind, test_ids)
        rows = []
        if ids:
            X = fb.matrix(kind, ids)
            for mood in sorted(models):
                model = models[mood]
                probs = model.predict_proba(*X) if kind == "hybrid-embed" else model.predict_proba(X)
                rows.extend((s, mood, float(pr)) for s, pr in zip(ids, probs))
        rows.sort()
        with open(run.wrote(run.path("predictions", f"{kind}.csv")), "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["song_id", "mood", "prob", "label"])
            for s, m, pr in rows:
                w.writerow([s, m, f"{pr:.9g}", classify(pr).value])


def _read_predictions(p) -> dict[tuple[str, str], Verdict]:
    with open(p, encoding="utf-8", newline="") as fh:
        return {(r["song_id"], r["mood"]): Verdict(r["label"]) for r in csv.DictReader(fh)}


# -- evaluate -----------------------------------------------------------------

def step_evaluate(run: Run) -> None:
    split = read_split(_default(run, "", "ingest", "split.csv"))
    labels = _labels(run)
    wrote_any = False
    for kind in MODEL_KINDS:
        p = run.root / "predictions" / f"{kind}.csv"
        if not p.exists():
            continue
        preds = _read_predictions(run.read(p))
        moods = sorted({m for _, m in preds})
        truth = {k: Verdict(v.value) for k, v in labels.items()
                 if k[0] in split.test_ids and k[1] in moods and k in preds}
        rows = per_mood_report(preds, truth, moods)
        write_report(rows, run.wrote(run.path("reports", f"metrics_{kind}.csv")))
        run.wrote(run.root / "reports" / f"metrics_{kind}.csv.meta.json")
        wrote_any = True
    if not wrote_any:
        raise ConfigError("no predictions found; run `predict` first")


# -- sweep / agree ------------------------------------------------------------

def _bnpmi_scores(run: Run) -> dict[tuple[str, str], float]:
    return {(r.song_id, r.mood_term): r.bnpmi for r in read_scores(_default(run, "", "score", "scores.csv"))}


def _truth_for_sweep(run: Run) -> dict[tuple[str, str], Verdict]:
    cfg = run.cfg
    if cfg.annotations:
        verdicts = resolve(read_annotations(run.read(cfg.annotations)))
        return {k: v.to_verdict() for k, v in verdicts.consensus.items()}
    if cfg.ground_truth:
        from .simulate import read_ground_truth
        gt = read_ground_truth(run.read(cfg.ground_truth))
        return {(s, m): Verdict.POSITIVE if gt.is_associated(s, m) else Verdict.NEGATIVE
                for s in gt.song_ids for m in gt.moods}
    raise ConfigError("sweep needs annotations or ground_truth")


def step_sweep(run: Run) -> None:
    scores = _bnpmi_scores(run)
    truth = _truth_for_sweep(run)
    uncovered = [k for k in truth if k not in scores]
    if uncovered and run.cfg.ground_truth and not run.cfg.annotations:
        truth = {k: v for k, v in truth.items() if k in scores}
    points = threshold_sweep(scores, truth, run.cfg.taus())
    write_sweep(points, run.wrote(run.path("reports", "sweep.csv")))
    best = best_f1(points)
    p = run.wrote(run.path("reports", "sweep_best.json"))
    p.write_text(json.dumps({"tau": best.tau, "precision": best.precision, "recall": best.recall,
                             "f1": best.f1, "n_pairs": len(truth)}, sort_keys=True, indent=2) + "\n",
                 encoding="utf-8")


def step_agree(run: Run) -> None:
    cfg = run.cfg
    cfg.require("annotations")
    records = read_annotations(run.read(cfg.annotations))
    reports = agreement_by_source(records)
    with open(run.wrote(run.path("reports", "agreement.csv")), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source", "kappa", "interpretation", "n_items", "n_raters", "n_categories", "gap_flag"])
        for src in Source:
            if src in reports:
                r = reports[src]
                w.writerow([src.value, f"{r.kappa:.4f}", r.interpretation, r.n_items, r.n_raters,
                            r.n_categories, int(r.gap_flag)])

    verdicts = resolve(records)
    scores = _bnpmi_scores(run)
    with open(run.wrote(run.path("reports", "consensus.csv")), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["song_id", "mood", "lyrics", "acoustics", "consensus"])
        for k in sorted(verdicts.consensus):
            w.writerow([*k, verdicts.lyrics[k].value, verdicts.acoustics[k].value, verdicts.consensus[k].value])

    table = [("Lyrics Annotation", verdicts.lyrics), ("Acoustics Annotation", verdicts.acoustics),
             ("Lyrics & Acoustics Consensus", verdicts.consensus)]
    with open(run.wrote(run.path("reports", "bnpmi_vs_annotation.csv")), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source"] + METRICS_HEADER[1:])
        for name, judged in table:
            truth = {k: v.to_verdict() for k, v in judged.items()}
            missing = [k for k in truth if k not in scores]
            if missing:
                raise CoverageError(f"{len(missing)} annotated pairs have no BNPMI score", missing)
            preds = {k: Verdict.POSITIVE if scores[k] >= cfg.tau else Verdict.NEGATIVE for k in truth}
            c = confusion(preds, truth)
            p, r, f = metrics(c).percent()
            w.writerow([name, f"{p:.2f}", f"{r:.2f}", f"{f:.2f}", c.tp, c.tn, c.fp, c.fn, c.uninformative])


# -- pipeline -----------------------------------------------------------------

def step_pipeline(run: Run) -> PipelineConfig:
    """simulate -> ingest -> score -> train -> predict -> evaluate -> sweep -> agree."""
    from dataclasses import replace

    paths = step_simulate(run)
    run.cfg = replace(run.cfg, **paths)
    for step in (step_ingest, step_score, step_train, step_predict, step_evaluate, step_sweep, step_agree):
        logger.info("pipeline: %s", step.__name__.removeprefix("step_"))
        step(run)
    return run.cfg


STEPS = {
    "simulate": step_simulate,
    "ingest": step_ingest,
    "score": step_score,
    "train": step_train,
    "predict": step_predict,
    "evaluate": step_evaluate,
    "sweep": step_sweep,
    "agree": step_agree,
    "pipeline": step_pipeline,
}

