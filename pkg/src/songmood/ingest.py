"""Playlist and song corpora: parsing, mood matching, dedup, train/test split."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

from .errors import ConfigError, ParseError
from .features import AcousticFeatures
from .lexicon import Mood, MoodLexicon
from .text import tokenize


@dataclass(frozen=True)
class PlaylistRecord:
    playlist_id: str
    title: str
    description: str | None = None
    track_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class SongRecord:
    song_id: str
    lyrics: str
    acoustic: AcousticFeatures | None = None


@dataclass(frozen=True)
class CorpusSplit:
    train_ids: frozenset[str]
    test_ids: frozenset[str]

    def __post_init__(self):
        if self.train_ids & self.test_ids:
            raise ValueError("train and test ids overlap")

    def assignment(self, song_id: str) -> str:
        if song_id in self.train_ids:
            return "train"
        if song_id in self.test_ids:
            return "test"
        raise KeyError(song_id)


@dataclass
class ParseResult:
    records: list = field(default_factory=list)
    errors: list[tuple[int, str]] = field(default_factory=list)


def _lines(stream: IO | Iterable) -> Iterable[tuple[int, str]]:
    for lineno, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        yield lineno, raw


def _playlist_from_obj(obj) -> PlaylistRecord:
    if not isinstance(obj, dict):
        raise ValueError("line is not a JSON object")
    pid = obj.get("id")
    if not isinstance(pid, str) or not pid:
        raise ValueError("missing or empty 'id'")
    title = obj.get("title")
    if not isinstance(title, str):
        raise ValueError("missing 'title'")
    description = obj.get("description")
    if description is not None and not isinstance(description, str):
        raise ValueError("'description' must be a string")
    tracks = obj.get("tracks")
    if not isinstance(tracks, list) or not all(isinstance(t, str) and t for t in tracks):
        raise ValueError("'tracks' must be a list of song ids")
    return PlaylistRecord(pid, title, description, tuple(tracks))


def _song_from_obj(obj) -> SongRecord:
    if not isinstance(obj, dict):
        raise ValueError("line is not a JSON object")
    sid = obj.get("id")
    if not isinstance(sid, str) or not sid:
        raise ValueError("missing or empty 'id'")
    lyrics = obj.get("lyrics", "")
    if not isinstance(lyrics, str):
        raise ValueError("'lyrics' must be a string")
    acoustic = obj.get("acoustic")
    if acoustic is not None:
        acoustic = AcousticFeatures.from_mapping(acoustic)
    return SongRecord(sid, lyrics, acoustic)


def _parse_jsonl(stream, build, strict: bool, path: str | None) -> ParseResult:
    result = ParseResult()
    for lineno, line in _lines(stream):
        if not line.strip():
            continue
        try:
            result.records.append(build(json.loads(line)))
        except (ValueError, TypeError) as exc:
            reason = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
            if strict:
                raise ParseError(reason, path, lineno) from None
            result.errors.append((lineno, reason))
    return result


def parse_playlists(stream, strict: bool = False, path: str | None = None) -> ParseResult:
    """Parse JSONL playlists (keys id, title, description?, tracks).

    Malformed lines land in ``result.errors`` as ``(line, reason)``; with
    ``strict`` the first one raises ParseError instead.
    """
    return _parse_jsonl(stream, _playlist_from_obj, strict, path)


def parse_songs(stream, strict: bool = False, path: str | None = None) -> ParseResult:
    return _parse_jsonl(stream, _song_from_obj, strict, path)


def read_playlists(path, strict: bool = False) -> ParseResult:
    with open(path, "rb") as fh:
        return parse_playlists(fh, strict=strict, path=str(path))


def read_songs(path, strict: bool = False) -> ParseResult:
    with open(path, "rb") as fh:
        return parse_songs(fh, strict=strict, path=str(path))


def playlist_to_json(p: PlaylistRecord) -> str:
    obj = {"id": p.playlist_id, "title": p.title}
    if p.description is not None:
        obj["description"] = p.description
    obj["tracks"] = list(p.track_ids)
    return json.dumps(obj, ensure_ascii=False)


def song_to_json(s: SongRecord) -> str:
    obj = {"id": s.song_id, "lyrics": s.lyrics}
    if s.acoustic is not None:
        obj["acoustic"] = s.acoustic.as_dict()
    return json.dumps(obj, ensure_ascii=False)


def write_jsonl(lines: Iterable[str], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")


def write_error_report(errors: Sequence[tuple[int, str]], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["line", "reason"])
        writer.writerows(errors)


class MoodMatcher:
    """Whole-token phrase matcher for a fixed lexicon."""

    def __init__(self, lexicon: MoodLexicon):
        self.lexicon = lexicon
        self._by_tokens: dict[tuple[str, ...], Mood] = {}
        for mood in lexicon:
            toks = mood.tokens
            if toks:
                self._by_tokens[toks] = mood
        self._lengths = sorted({len(t) for t in self._by_tokens})

    def _match_text(self, text: str, found: set[Mood]) -> None:
        toks = tokenize(text)
        for n in self._lengths:
            for i in range(len(toks) - n + 1):
                mood = self._by_tokens.get(tuple(toks[i:i + n]))
                if mood is not None:
                    found.add(mood)

    def __call__(self, playlist: PlaylistRecord) -> set[Mood]:
        found: set[Mood] = set()
        self._match_text(playlist.title, found)
        if playlist.description:
            self._match_text(playlist.description, found)
        return found


def match_moods(playlist: PlaylistRecord, lexicon: MoodLexicon) -> set[Mood]:
    """Moods whose term occurs as a whole-token phrase in title or description.

    Title and description are matched separately, so a phrase never spans the
    boundary between them.
    """
    return MoodMatcher(lexicon)(playlist)


def dedupe_songs(records: Iterable[SongRecord]) -> list[SongRecord]:
    """Keep the first record seen for each song id."""
    seen: set[str] = set()
    out = []
    for rec in records:
        if rec.song_id not in seen:
            seen.add(rec.song_id)
            out.append(rec)
    return out


def _unit_hash(song_id: str, seed: int) -> float:
    digest = hashlib.blake2b(f"{seed}\x1f{song_id}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") / 2.0**64


def split_train_test(song_ids: Iterable[str], train_fraction: float = 0.75, seed: int = 0) -> CorpusSplit:
    """Hash-based split; a song's side depends only on (song_id, seed)."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction must be in (0, 1), got {train_fraction}")
    ids = set(song_ids)
    if not ids:
        raise ConfigError("cannot split an empty set of songs")
    train = frozenset(s for s in ids if _unit_hash(s, seed) < train_fraction)
    return CorpusSplit(train, frozenset(ids - train))


def write_split(split: CorpusSplit, path) -> None:
    rows = [(s, "train") for s in split.train_ids] + [(s, "test") for s in split.test_ids]
    rows.sort()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["song_id", "split"])
        writer.writerows(rows)


def read_split(path) -> CorpusSplit:
    train, test = set(), set()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            side = row["split"]
            if side == "train":
                train.add(row["song_id"])
            elif side == "test":
                test.add(row["song_id"])
            else:
                raise ParseError(f"unknown split {side!r}", str(path), reader.line_num)
    return CorpusSplit(frozenset(train), frozenset(test))
