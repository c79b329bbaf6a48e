"""Mood vocabulary and hypothesis-sentence templates."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterator, Sequence

from .errors import DuplicateTermError, EmptyLexiconError, ParseError
from .text import normalize, tokenize

PLACEHOLDER = "{term}"
PARTS_OF_SPEECH = ("adjective", "noun", "verb")

DEFAULT_TEMPLATES = {
    "adjective": "This is a {term} song.",
    "noun": "This song is about {term}.",
    "verb": "This song makes you {term}.",
}

LEXICON_HEADER = ["term", "pos", "template_override"]


def normalize_term(term: str) -> str:
    return " ".join(normalize(term).split())


@dataclass(frozen=True)
class Mood:
    term: str
    pos: str
    template_override: str | None = None

    def __post_init__(self):
        if not self.term or "\n" in self.term or "\r" in self.term:
            raise ValueError(f"invalid mood term {self.term!r}")
        if self.pos not in PARTS_OF_SPEECH:
            raise ValueError(f"unknown part of speech {self.pos!r} for {self.term!r}")
        if self.template_override is not None and self.template_override.count(PLACEHOLDER) != 1:
            raise ValueError(f"template for {self.term!r} must contain {PLACEHOLDER} exactly once")

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(tokenize(self.term))


@dataclass(frozen=True)
class MoodLexicon:
    moods: tuple[Mood, ...]

    def __post_init__(self):
        if not self.moods:
            raise EmptyLexiconError("lexicon is empty")
        seen = set()
        for mood in self.moods:
            key = normalize_term(mood.term)
            if key in seen:
                raise DuplicateTermError(key)
            seen.add(key)

    def __len__(self) -> int:
        return len(self.moods)

    def __iter__(self) -> Iterator[Mood]:
        return iter(self.moods)

    def __contains__(self, term: object) -> bool:
        return isinstance(term, str) and normalize_term(term) in self.terms

    @property
    def terms(self) -> tuple[str, ...]:
        return tuple(m.term for m in self.moods)

    def get(self, term: str) -> Mood:
        key = normalize_term(term)
        for mood in self.moods:
            if mood.term == key:
                return mood
        raise KeyError(term)

    def subset(self, terms: Sequence[str]) -> "MoodLexicon":
        return MoodLexicon(tuple(self.get(t) for t in terms))


def parse_lexicon(text: str, path: str | None = None) -> MoodLexicon:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("missing header", path, 1) from None
    if [h.strip() for h in header] != LEXICON_HEADER:
        raise ParseError(f"expected header {','.join(LEXICON_HEADER)}", path, 1)

    moods: list[Mood] = []
    seen: dict[str, int] = {}
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) == 2:
            row = row + [""]
        if len(row) != 3:
            raise ParseError(f"expected 3 columns, got {len(row)}", path, line)
        term = normalize_term(row[0])
        pos = row[1].strip().lower()
        override = row[2].strip() or None
        if term in seen:
            raise DuplicateTermError(term, path, line)
        try:
            moods.append(Mood(term, pos, override))
        except ValueError as exc:
            raise ParseError(str(exc), path, line) from None
        seen[term] = line
    if not moods:
        raise EmptyLexiconError("lexicon has no rows", path)
    return MoodLexicon(tuple(moods))


def load_lexicon(path: str | Path) -> MoodLexicon:
    """Read a UTF-8 lexicon CSV with header ``term,pos,template_override``."""
    path = Path(path)
    return parse_lexicon(path.read_text(encoding="utf-8"), str(path))


def default_lexicon() -> MoodLexicon:
    """The bundled representative mood lexicon."""
    text = resources.files("songmood").joinpath("data/moods.csv").read_text(encoding="utf-8")
    return parse_lexicon(text, "moods.csv")


def write_lexicon(lexicon: MoodLexicon, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LEXICON_HEADER)
        for m in lexicon:
            writer.writerow([m.term, m.pos, m.template_override or ""])


def cast_to_sentence(mood: Mood) -> str:
    template = mood.template_override or DEFAULT_TEMPLATES[mood.pos]
    return template.replace(PLACEHOLDER, mood.term)
