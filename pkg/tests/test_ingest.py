import io
import json

import pytest
from hypothesis import given, strategies as st

from songmood.errors import ConfigError, ParseError
from songmood.ingest import (
    PlaylistRecord,
    SongRecord,
    dedupe_songs,
    match_moods,
    parse_playlists,
    parse_songs,
    read_split,
    split_train_test,
    write_split,
)
from songmood.text import tokenize


def stream(*lines):
    return io.BytesIO("".join(l + "\n" for l in lines).encode("utf-8"))


def test_parse_one_playlist():
    res = parse_playlists(stream('{"id":"p1","title":"sad vibes","tracks":["s1","s2"]}'))
    assert res.records == [PlaylistRecord("p1", "sad vibes", None, ("s1", "s2"))]
    assert res.errors == []


def test_missing_id_is_recorded_and_stream_continues():
    res = parse_playlists(stream('{"title":"x","tracks":[]}', '{"id":"p2","title":"y","tracks":[]}', "not json"))
    assert [r.playlist_id for r in res.records] == ["p2"]
    assert [line for line, _ in res.errors] == [1, 3]


def test_strict_raises_on_first_bad_line():
    with pytest.raises(ParseError) as exc:
        parse_playlists(stream('{"id":"p1","title":"a","tracks":[]}', '{"id":"p2"}'), strict=True)
    assert exc.value.line == 2


def test_empty_stream():
    assert parse_playlists(io.BytesIO(b"")).records == []


def test_parse_songs_with_acoustics():
    ac = {n: 0.5 for n in ("acousticness bounciness beat_strength danceability energy flatness "
                           "instrumentalness liveness loudness longest_silence_ratio mechanism organism "
                           "runnability speechiness tempo valence mean_dynamic_range").split()}
    res = parse_songs(stream(json.dumps({"id": "s1", "lyrics": "la la", "acoustic": ac}),
                             json.dumps({"id": "s2", "lyrics": "x", "acoustic": {"tempo": 1}})))
    assert res.records[0].acoustic.tempo == 0.5
    assert len(res.errors) == 1 and res.errors[0][0] == 2


@pytest.mark.parametrize("title,expected", [
    ("chill study beats", {"chill"}),
    ("Chilling out", set()),
    ("good vibes playlist", {"good vibes"}),
    ("SAD, sad & chill!", {"sad", "chill"}),
    ("good times, vibes", set()),
])
def test_match_moods(small_lexicon, title, expected):
    got = match_moods(PlaylistRecord("p", title), small_lexicon)
    assert {m.term for m in got} == expected


def ngram_oracle(text, lexicon):
    """Brute force: every token n-gram of every length compared to every term."""
    toks = tokenize(text)
    grams = {" ".join(toks[i:j]) for i in range(len(toks)) for j in range(i + 1, len(toks) + 1)}
    return {m.term for m in lexicon if " ".join(m.tokens) in grams}


words = st.sampled_from(["chill", "good", "vibes", "sad", "love", "song", "mix", "Chill!", "chilling", "LOVE,"])
texts = st.lists(words, max_size=8).map(" ".join)


@given(texts, texts)
def test_match_agrees_with_ngram_oracle_and_is_symmetric(small_lexicon, title, desc):
    got = {m.term for m in match_moods(PlaylistRecord("p", title, desc), small_lexicon)}
    assert got == ngram_oracle(title, small_lexicon) | ngram_oracle(desc, small_lexicon)
    swapped = {m.term for m in match_moods(PlaylistRecord("p", desc, title), small_lexicon)}
    assert got == swapped
    assert got <= set(small_lexicon.terms)


def test_dedupe_keeps_first():
    a, b, c = SongRecord("s1", "a"), SongRecord("s1", "b"), SongRecord("s2", "c")
    assert dedupe_songs([a, b, c]) == [a, c]
    assert dedupe_songs([a, c]) == [a, c]
    assert dedupe_songs([]) == []


@given(st.lists(st.tuples(st.sampled_from("abcde"), st.text(max_size=3))))
def test_dedupe_idempotent(pairs):
    recs = [SongRecord(s, l) for s, l in pairs]
    once = dedupe_songs(recs)
    assert dedupe_songs(once) == once
    assert len({r.song_id for r in once}) == len(once)


def test_split_fraction_on_100k():
    ids = {f"song{i}" for i in range(100_000)}
    split = split_train_test(ids, 0.75, seed=7)
    assert 74_000 <= len(split.train_ids) <= 76_000
    assert split.train_ids.isdisjoint(split.test_ids)
    assert split.train_ids | split.test_ids == ids


def test_split_deterministic_and_stable_under_growth():
    ids = [f"s{i}" for i in range(2000)]
    a = split_train_test(ids, 0.75, 3)
    assert a == split_train_test(list(reversed(ids)), 0.75, 3)
    grown = split_train_test(ids + [f"t{i}" for i in range(500)], 0.75, 3)
    assert a.train_ids <= grown.train_ids and a.test_ids <= grown.test_ids


@pytest.mark.parametrize("frac", [0.0, 1.0, 1.5, -0.1])
def test_split_rejects_bad_fraction(frac):
    with pytest.raises(ConfigError):
        split_train_test({"a"}, frac, 0)


def test_split_roundtrip(tmp_path):
    split = split_train_test([f"s{i}" for i in range(50)], 0.5, 1)
    write_split(split, tmp_path / "split.csv")
    assert read_split(tmp_path / "split.csv") == split
