"""Per-mood binary classifiers trained by full-batch gradient descent.

Two model kinds share one optimizer: logistic regression over any feature
matrix (dense or scipy sparse), and a hybrid head that runs acoustic
features through a one-hidden-layer ReLU MLP, concatenates the result with
a fixed lyric embedding, and classifies the concatenation.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .errors import ConfigError, DataError, DegenerateLabelsError, ParseError, UnsupportedVersionError
from .evaluation import Verdict

MODEL_FORMAT_VERSION = 1
_MAGIC = b"SMDL"


@dataclass(frozen=True)
class TrainConfig:
    l2_lambda: float = 1e-4
    max_iters: int = 500
    tol: float = 1e-7
    step0: float = 1.0
    shrink: float = 0.5
    grow: float = 2.0
    armijo: float = 1e-4
    min_step: float = 1e-12
    hidden_width: int = 32
    class_weighting: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.l2_lambda < 0:
            raise ConfigError("l2_lambda must be >= 0")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if self.hidden_width < 0:
            raise ConfigError("hidden_width must be >= 0")
        for name in ("tol", "step0", "armijo", "min_step", "grow"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0 < self.shrink < 1:
            raise ConfigError("shrink must be in (0, 1)")


@dataclass
class OptimResult:
    theta: np.ndarray
    loss: float
    n_iters: int
    history: list[float] = field(default_factory=list)


def minimize(fun: Callable[[np.ndarray], tuple[float, np.ndarray]], theta0: np.ndarray,
             config: TrainConfig) -> OptimResult:
    """Gradient descent with Armijo backtracking.

    The trial step grows by ``grow`` after each accepted step. Stops when the
    relative loss decrease drops below ``tol``, at ``max_iters``, or when no
    step above ``min_step`` satisfies the Armijo condition.
    """
    theta = np.array(theta0, dtype=np.float64)
    loss, grad = fun(theta)
    history = [loss]
    step = config.step0
    it = 0
    while it < config.max_iters:
        gg = float(grad @ grad)
        if gg == 0.0:
            break
        while True:
            cand = theta - step * grad
            c_loss, c_grad = fun(cand)
            if c_loss <= loss - config.armijo * step * gg:
                break
            step *= config.shrink
            if step < config.min_step:
                return OptimResult(theta, loss, it, history)
        it += 1
        rel = (loss - c_loss) / max(abs(loss), 1e-300)
        theta, loss, grad = cand, c_loss, c_grad
        history.append(loss)
        step *= config.grow
        if rel < config.tol:
            break
    return OptimResult(theta, loss, it, history)


def _check_inputs(X, y) -> tuple[np.ndarray, int, int]:
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] != y.shape[0]:
        raise DataError(f"{X.shape[0]} rows but {y.shape[0]} labels")
    if not np.all((y == 0) | (y == 1)):
        raise DataError("labels must be 0 or 1")
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabelsError("training labels contain a single class")
    data = X.data if sp.issparse(X) else np.asarray(X)
    if not np.all(np.isfinite(data)):
        if sp.issparse(X):
            rows = np.repeat(np.arange(X.shape[0]), np.diff(X.tocsr().indptr))
            bad = int(rows[~np.isfinite(X.tocsr().data)][0])
        else:
            bad = int(np.flatnonzero(~np.all(np.isfinite(data), axis=1))[0])
        raise DataError(f"non-finite feature in row {bad}")
    return y, n_pos, n_neg


def _sample_weights(y: np.ndarray, config: TrainConfig) -> np.ndarray:
    if not config.class_weighting:
        return np.ones_like(y)
    n = y.size
    n_pos = y.sum()
    return np.where(y == 1, n / (2 * n_pos), n / (2 * (n - n_pos)))


def _bce(z: np.ndarray, y: np.ndarray, sw: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean weighted binary cross-entropy on logits and d(loss)/dz."""
    n = y.size
    loss = float(np.sum(sw * (np.logaddexp(0.0, z) - y * z)) / n)
    return loss, sw * (expit(z) - y) / n


# -- logistic regression ------------------------------------------------------

@dataclass
class LogisticModel:
    mood_term: str
    weights: np.ndarray
    bias: float
    l2_lambda: float
    train_meta: dict = field(default_factory=dict)

    kind = "logistic"

    @property
    def dims(self) -> int:
        return int(self.weights.size)

    def decision(self, X) -> np.ndarray:
        if X.shape[-1] != self.dims:
            raise DataError(f"model expects {self.dims} features, got {X.shape[-1]}")
        return np.asarray(X @ self.weights).ravel() + self.bias

    def predict_proba(self, X) -> np.ndarray:
        if not sp.issparse(X):
            X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return expit(self.decision(X))


def logistic_loss(theta: np.ndarray, X, y: np.ndarray, l2: float,
                  sw: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Loss and gradient for packed parameters ``[w..., b]``."""
    if sw is None:
        sw = np.ones_like(y)
    w, b = theta[:-1], theta[-1]
    z = np.asarray(X @ w).ravel() + b
    loss, dz = _bce(z, y, sw)
    loss += 0.5 * l2 * float(w @ w)
    grad = np.empty_like(theta)
    grad[:-1] = np.asarray(X.T @ dz).ravel() + l2 * w
    grad[-1] = dz.sum()
    return loss, grad


def train_logistic(X, y, config: TrainConfig = TrainConfig(), mood: str = "",
                   features: str = "") -> LogisticModel:
    """Minimise mean BCE + (lambda/2)||w||^2 from a zero start."""
    if not sp.issparse(X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    else:
        X = X.tocsr()
    y, n_pos, n_neg = _check_inputs(X, y)
    sw = _sample_weights(y, config)
    res = minimize(lambda t: logistic_loss(t, X, y, config.l2_lambda, sw),
                   np.zeros(X.shape[1] + 1), config)
    meta = {"n_pos": n_pos, "n_neg": n_neg, "final_loss": res.loss, "n_iters": res.n_iters,
            "seed": config.seed, "features": features}
    return LogisticModel(mood, res.theta[:-1].copy(), float(res.theta[-1]), config.l2_lambda, meta)


def predict(model, x, acoustic=None) -> float:
    """Probability of a positive association for a single example."""
    if isinstance(model, HybridHead):
        return float(model.predict_proba(np.atleast_2d(x), np.atleast_2d(acoustic))[0])
    x = np.asarray(x, dtype=np.float64).ravel() if not sp.issparse(x) else x
    if x.shape[-1] != model.dims:
        raise DataError(f"model expects {model.dims} features, got {x.shape[-1]}")
    return float(model.predict_proba(x.reshape(1, -1) if not sp.issparse(x) else x)[0])


def classify(prob: float, threshold: float = 0.5) -> Verdict:
    return Verdict.POSITIVE if prob >= threshold else Verdict.NEGATIVE


# -- hybrid head --------------------------------------------------------------

@dataclass
class HybridHead:
    mood_term: str
    W1: np.ndarray          # (hidden, acoustic_dim)
    b1: np.ndarray          # (hidden,)
    w_emb: np.ndarray       # (embedding_dim,)
    w_hid: np.ndarray       # (hidden,)
    b2: float
    l2_lambda: float
    train_meta: dict = field(default_factory=dict)

    kind = "hybrid_head"

    @property
    def hidden_width(self) -> int:
        return int(self.b1.size)

    @property
    def dims(self) -> tuple[int, int]:
        return int(self.w_emb.size), int(self.W1.shape[1])

    def predict_proba(self, E, A) -> np.ndarray:
        E = np.atleast_2d(np.asarray(E, dtype=np.float64))
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        if E.shape[1] != self.w_emb.size or A.shape[1] != self.W1.shape[1]:
            raise DataError(f"hybrid head expects dims {self.dims}, got {(E.shape[1], A.shape[1])}")
        return expit(_hybrid_forward(self._pack(), E, A, self.hidden_width)[0])

    def _pack(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.w_emb, self.w_hid, [self.b2]])


def _unpack(theta: np.ndarray, emb_dim: int, ac_dim: int, hidden: int):
    i = hidden * ac_dim
    W1 = theta[:i].reshape(hidden, ac_dim)
    b1 = theta[i:i + hidden]
    i += hidden
    w_emb = theta[i:i + emb_dim]
    i += emb_dim
    w_hid = theta[i:i + hidden]
    return W1, b1, w_emb, w_hid, theta[-1]


def _hybrid_forward(theta, E, A, hidden):
    W1, b1, w_emb, w_hid, b2 = _unpack(theta, E.shape[1], A.shape[1], hidden)
    pre = A @ W1.T + b1
    h = np.maximum(pre, 0.0)
    z = E @ w_emb + h @ w_hid + b2
    return z, pre, h


def hybrid_loss(theta: np.ndarray, E: np.ndarray, A: np.ndarray, y: np.ndarray, hidden: int,
                l2: float, sw: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Loss and gradient for the packed hybrid parameters (biases unregularised)."""
    if sw is None:
        sw = np.ones_like(y)
    W1, b1, w_emb, w_hid, b2 = _unpack(theta, E.shape[1], A.shape[1], hidden)
    z, pre, h = _hybrid_forward(theta, E, A, hidden)
    loss, dz = _bce(z, y, sw)
    loss += 0.5 * l2 * float(np.sum(W1 * W1) + w_emb @ w_emb + w_hid @ w_hid)
    dh = np.outer(dz, w_hid) * (pre > 0)
    return loss, np.concatenate([
        (dh.T @ A + l2 * W1).ravel(),
        dh.sum(axis=0),
        E.T @ dz + l2 * w_emb,
        h.T @ dz + l2 * w_hid,
        [dz.sum()],
    ])


def init_hybrid(emb_dim: int, ac_dim: int, hidden: int, seed: int) -> np.ndarray:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every layer, biases included."""
    rng = np.random.default_rng([seed, 0x1A17])
    r1 = 1.0 / math.sqrt(ac_dim)
    r2 = 1.0 / math.sqrt(emb_dim + hidden)
    return np.concatenate([
        rng.uniform(-r1, r1, hidden * ac_dim),
        rng.uniform(-r1, r1, hidden),
        rng.uniform(-r2, r2, emb_dim + hidden + 1),
    ])


def train_hybrid_head(embeddings, acoustics, y, config: TrainConfig = TrainConfig(),
                      mood: str = "") -> HybridHead:
    E = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    A = np.atleast_2d(np.asarray(acoustics, dtype=np.float64))
    if E.shape[0] != A.shape[0]:
        raise DataError(f"{E.shape[0]} embeddings but {A.shape[0]} acoustic rows")
    y, n_pos, n_neg = _check_inputs(np.hstack([E, A]), y)
    sw = _sample_weights(y, config)
    hidden = config.hidden_width
    theta0 = init_hybrid(E.shape[1], A.shape[1], hidden, config.seed)
    res = minimize(lambda t: hybrid_loss(t, E, A, y, hidden, config.l2_lambda, sw), theta0, config)
    W1, b1, w_emb, w_hid, b2 = _unpack(res.theta, E.shape[1], A.shape[1], hidden)
    meta = {"n_pos": n_pos, "n_neg": n_neg, "final_loss": res.loss, "n_iters": res.n_iters,
            "seed": config.seed, "features": "hybrid-embed"}
    return HybridHead(mood, W1.copy(), b1.copy(), w_emb.copy(), w_hid.copy(), float(b2),
                      config.l2_lambda, meta)


# -- persistence --------------------------------------------------------------

def _arrays(model) -> dict[str, np.ndarray]:
    if isinstance(model, HybridHead):
        return {"W1": model.W1, "b1": model.b1, "w_emb": model.w_emb, "w_hid": model.w_hid,
                "b2": np.array([model.b2])}
    return {"weights": model.weights, "bias": np.array([model.bias])}


def _header(model) -> dict:
    return {"version": MODEL_FORMAT_VERSION, "kind": model.kind, "mood": model.mood_term,
            "dims": list(model.dims) if isinstance(model.dims, tuple) else model.dims,
            "l2_lambda": model.l2_lambda, "train_meta": model.train_meta,
            "shapes": {k: list(v.shape) for k, v in _arrays(model).items()}}


def _build(header: dict, arrays: dict[str, np.ndarray]):
    kind = header["kind"]
    if kind == "logistic":
        return LogisticModel(header["mood"], arrays["weights"], float(arrays["bias"][0]),
                             header["l2_lambda"], header.get("train_meta", {}))
    if kind == "hybrid_head":
        return HybridHead(header["mood"], arrays["W1"], arrays["b1"], arrays["w_emb"], arrays["w_hid"],
                          float(arrays["b2"][0]), header["l2_lambda"], header.get("train_meta", {}))
    raise ParseError(f"unknown model kind {kind!r}")


def save_model(model, path, binary: bool = False) -> None:
    """JSON by default; ``binary`` writes a JSON header then little-endian float64 arrays."""
    header = _header(model)
    if binary:
        head = json.dumps(header, sort_keys=True).encode("utf-8")
        arrays = _arrays(model)
        # body order follows the header's sorted shape keys
        body = b"".join(np.ascontiguousarray(arrays[k], dtype="<f8").tobytes() for k in sorted(arrays))
        Path(path).write_bytes(_MAGIC + struct.pack("<I", len(head)) + head + body)
        return
    doc = dict(header)
    doc["params"] = {k: [float(x) for x in v.ravel()] for k, v in _arrays(model).items()}
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


def _check_version(header: dict, path) -> None:
    if header.get("version") != MODEL_FORMAT_VERSION:
        raise UnsupportedVersionError(f"unsupported model format version {header.get('version')!r}", str(path))


def load_model(path):
    raw = Path(path).read_bytes()
    try:
        if raw.startswith(_MAGIC):
            (n,) = struct.unpack("<I", raw[4:8])
            header = json.loads(raw[8:8 + n].decode("utf-8"))
            _check_version(header, path)
            arrays, offset = {}, 8 + n
            for name, shape in sorted(header["shapes"].items()):
                size = int(np.prod(shape)) if shape else 1
                chunk = raw[offset:offset + 8 * size]
                if len(chunk) != 8 * size:
                    raise ParseError("truncated model file", str(path))
                arrays[name] = np.frombuffer(chunk, dtype="<f8").astype(np.float64).reshape(shape)
                offset += 8 * size
            if offset != len(raw):
                raise ParseError("trailing bytes in model file", str(path))
        else:
            doc = json.loads(raw.decode("utf-8"))
            header = doc
            _check_version(header, path)
            arrays = {k: np.array(v, dtype=np.float64).reshape(header["shapes"][k])
                      for k, v in doc["params"].items()}
        return _build(header, arrays)
    except (ValueError, KeyError, struct.error, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot read model: {exc}", str(path)) from None
