import json
import subprocess
import sys

import pytest

from songmood.cli import run
from songmood.config import read_config_file, resolve
from songmood.errors import ConfigError

TINY = ["--sim-n-songs", "60", "--sim-n-moods", "4", "--sim-n-playlists", "3000",
        "--sim-annotation-pairs", "40", "--max-iters", "100", "--hidden-width", "4"]


def test_bad_tau_exits_1(tmp_path, capsys):
    assert run(["score", "--out", str(tmp_path), "--tau", "1.5"]) == 1
    assert "tau" in capsys.readouterr().err


def test_unknown_flag_and_missing_command(tmp_path):
    assert run(["score", "--bogus", "1"]) == 1
    assert run([]) == 1


def test_missing_input_is_config_error(tmp_path):
    assert run(["score", "--out", str(tmp_path)]) == 1


def test_malformed_data_exits_2(tmp_path, capsys):
    bad = tmp_path / "p.jsonl"
    bad.write_text('{"id": "p1", "title": "x", "tracks": ["s1"]}\nnot json\n')
    songs = tmp_path / "s.jsonl"
    songs.write_text('{"id": "s1", "lyrics": "la la"}\n')
    code = run(["ingest", "--out", str(tmp_path / "o"), "--playlists", str(bad), "--songs", str(songs),
                "--strict", "true"])
    assert code == 2
    assert "p.jsonl" in capsys.readouterr().err


def test_config_precedence(tmp_path):
    f = tmp_path / "c.cfg"
    f.write_text("# comment\ntau = 0.2\nseed=4\n")
    cfg, sources = resolve(read_config_file(f), {"seed": 9})
    assert (cfg.tau, cfg.seed) == (0.2, 9)
    assert sources["tau"] == "file" and sources["seed"] == "flag" and sources["min_df"] == "default"
    f.write_text("nope = 1\n")
    with pytest.raises(ConfigError):
        read_config_file(f)


@pytest.mark.slow
def test_pipeline_smoke(tmp_path):
    out = tmp_path / "run"
    assert run(["pipeline", "--out", str(out), *TINY]) == 0
    for rel in ("score/scores.csv", "score/priors.csv", "reports/sweep.csv", "reports/agreement.csv",
                "reports/metrics_bow.csv", "models/vocabulary.csv", "manifests/pipeline.json"):
        assert (out / rel).exists(), rel
    manifest = json.loads((out / "manifests/pipeline.json").read_text())
    assert {"config", "config_hash", "seed", "inputs", "outputs", "versions"} <= set(manifest)
    assert all(not k.startswith("/") for k in manifest["outputs"])


def test_module_entry_point_help():
    res = subprocess.run([sys.executable, "-m", "songmood.cli", "score", "--help"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "--tau" in res.stdout
