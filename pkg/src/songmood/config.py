"""Pipeline configuration: defaults < key=value file < command-line flags."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .models import TrainConfig
from .simulate import SimConfig


@dataclass(frozen=True)
class PipelineConfig:
    out: str = "out"
    playlists: str = ""
    songs: str = ""
    lexicon: str = ""
    embeddings: str = ""
    annotations: str = ""
    ground_truth: str = ""
    tau: float = 0.1
    train_fraction: float = 0.75
    seed: int = 0
    min_df: int = 2
    l2_lambda: float = 1e-4
    max_iters: int = 500
    tol: float = 1e-7
    hidden_width: int = 32
    class_weighting: bool = False
    strict: bool = False
    include_zero_joint: bool = False
    binary_models: bool = False
    threads: int = 1
    hist_bins: int = 40
    top_k: int = 20
    sweep_start: float = 0.02
    sweep_stop: float = 0.5
    sweep_step: float = 0.02
    sim_n_songs: int = 200
    sim_n_moods: int = 10
    sim_n_playlists: int = 50_000
    sim_annotation_pairs: int = 300

    def validate(self) -> "PipelineConfig":
        if not 0.0 < self.tau < 1.0:
            raise ConfigError(f"tau must be in (0, 1), got {self.tau}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.min_df < 1:
            raise ConfigError("min_df must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if not 0.0 < self.sweep_start < self.sweep_stop < 1.0 or self.sweep_step <= 0:
            raise ConfigError("sweep range must satisfy 0 < sweep_start < sweep_stop < 1 with sweep_step > 0")
        self.train_config()
        return self

    def require(self, *names: str) -> None:
        for name in names:
            value = getattr(self, name)
            if not value:
                raise ConfigError(f"{name} is required for this subcommand")
            if not Path(value).exists():
                raise ConfigError(f"{name}: no such file {value!r}")

    def substream_seed(self, name: str) -> int:
        digest = hashlib.blake2b(f"{self.seed}/{name}".encode(), digest_size=8).digest()
        return int.from_bytes(digest, "little") >> 1

    def train_config(self, seed: int = 0) -> TrainConfig:
        return TrainConfig(l2_lambda=self.l2_lambda, max_iters=self.max_iters, tol=self.tol,
                           hidden_width=self.hidden_width, class_weighting=self.class_weighting, seed=seed)

    def sim_config(self) -> SimConfig:
        return SimConfig(n_songs=self.sim_n_songs, n_moods=self.sim_n_moods,
                         n_playlists=self.sim_n_playlists, seed=self.substream_seed("simulate"))

    def taus(self) -> list[float]:
        n = int(round((self.sweep_stop - self.sweep_start) / self.sweep_step))
        return [round(self.sweep_start + i * self.sweep_step, 12) for i in range(n + 1)]

    def recorded(self) -> dict:
        """Config as recorded in manifests (the output root is implicit)."""
        d = asdict(self)
        root = Path(d.pop("out")).resolve()
        for key in PATH_FIELDS:
            if d[key]:
                try:
                    d[key] = "<out>/" + Path(d[key]).resolve().relative_to(root).as_posix()
                except ValueError:
                    pass
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.recorded(), sort_keys=True).encode()).hexdigest()


PATH_FIELDS = ("playlists", "songs", "lexicon", "embeddings", "annotations", "ground_truth")
FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def coerce(name: str, raw: str):
    if name not in FIELD_TYPES:
        raise ConfigError(f"unknown config key {name!r}")
    kind = FIELD_TYPES[name]
    try:
        if kind == "bool":
            low = raw.strip().lower()
            if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(raw)
            return low in ("1", "true", "yes", "on")
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw.strip()
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind}") from None


def read_config_file(path) -> dict:
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, raw = line.split("=", 1)
        key = key.strip().replace("-", "_")
        values[key] = coerce(key, raw)
    return values


def resolve(file_values: dict, flag_values: dict) -> tuple[PipelineConfig, dict[str, str]]:
    """Merge sources and report where each non-default value came from."""
    merged, sources = {}, {}
    for key, value in file_values.items():
        merged[key], sources[key] = value, "file"
    for key, value in flag_values.items():
        merged[key], sources[key] = value, "flag"
    cfg = PipelineConfig(**merged)
    for f in fields(PipelineConfig):
        sources.setdefault(f.name, "default")
    return cfg, sources
