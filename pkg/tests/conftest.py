import sys
from collections import Counter

import pytest

from songmood.association import CooccurrenceCounts
from songmood.lexicon import Mood, MoodLexicon


def pair_counts(n, song, mood, joint, s="s1", m="sad"):
    """Counts for one song/mood pair with the given marginals."""
    return CooccurrenceCounts(
        n,
        Counter({s: song}),
        Counter({m: mood}),
        Counter({(s, m): joint}) if joint else Counter(),
    )


def random_counts(rng, n_songs=6, n_moods=3, n_playlists=None):
    """Counts of a random small corpus built playlist by playlist."""
    n_playlists = n_playlists or int(rng.integers(5, 40))
    songs = [f"s{i}" for i in range(n_songs)]
    moods = [f"m{j}" for j in range(n_moods)]
    c = CooccurrenceCounts()
    for _ in range(n_playlists):
        c.n_playlists += 1
        tracks = {songs[i] for i in rng.choice(n_songs, size=int(rng.integers(0, n_songs + 1)), replace=False)}
        ms = {moods[j] for j in range(n_moods) if rng.random() < 0.4}
        c.song_playlists.update(tracks)
        c.mood_playlists.update(ms)
        c.joint.update((s, m) for s in tracks for m in ms)
    return c


@pytest.fixture(scope="session")
def small_lexicon():
    return MoodLexicon((Mood("chill", "adjective"), Mood("sad", "adjective"),
                        Mood("good vibes", "noun"), Mood("love", "noun")))


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance PASS/FAIL lines at the end of the run."""
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
