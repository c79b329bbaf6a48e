"""Exception hierarchy.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
InvariantError -> 3.
"""

from __future__ import annotations


class SongMoodError(Exception):
    pass


class ConfigError(SongMoodError, ValueError):
    """Bad argument or configuration value."""


class DataError(SongMoodError):
    """Input data is malformed or inconsistent."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where = f"{where}{line}:" if where else f"line {line}: "
        super().__init__(f"{where} {message}".strip() if where else message)


class InvariantError(SongMoodError):
    """An internal invariant was violated."""


class ParseError(DataError):
    pass


class DuplicateTermError(DataError):
    def __init__(self, term: str, path: str | None = None, line: int | None = None):
        self.term = term
        super().__init__(f"duplicate mood term {term!r}", path, line)


class EmptyLexiconError(DataError):
    pass


class UndefinedMarginalError(DataError):
    pass


class DegenerateDenominatorError(DataError):
    def __init__(self, song_id: str, mood: str):
        self.song_id = song_id
        self.mood = mood
        super().__init__(f"degenerate denominator for pair ({song_id!r}, {mood!r})")


class InsufficientDataError(DataError):
    pass


class DegenerateLabelsError(DataError):
    pass


class LeakageError(DataError):
    """A fit step saw ids from the test split."""


class CoverageError(DataError):
    def __init__(self, message: str, missing=()):
        self.missing = list(missing)
        super().__init__(message)


class UnresolvedDisagreementError(DataError):
    pass


class UnsupportedVersionError(DataError):
    pass
