"""Text normalization and tokenization shared by lexicon matching and tf.idf."""

from __future__ import annotations

import re
import unicodedata

# Letters and digits; whitespace, punctuation and underscores all separate tokens.
_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)


def normalize(text: str) -> str:
    """NFKC, lowercase, trimmed."""
    return unicodedata.normalize("NFKC", text).lower().strip()


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(normalize(text))
