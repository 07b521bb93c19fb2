"""Graph-convolutional point-process network.

Each window passes through ``layers`` graph convolutions
``H <- relu(A @ H @ W)`` (no biases, ``H_0 = X``).  The readout ``r`` is either
the row-major flatten of ``[H_L : A]`` (``flatten_concat``) or the row mean of
``H_L`` (``mean_pool``).  Two heads read ``r``:

* time head -> softplus -> expected next interarrival ``tau_hat``;
* mark head -> log_softmax -> next-mark log-probabilities.

With ``head_depth > 1`` each head gets ``head_depth - 1`` hidden ReLU layers of
width ``hidden`` before its output layer.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from gchp import diffmath as dm
from gchp.errors import IoFailure, ShapeMismatch, ValidationError
from gchp.graph import GraphSpec, WindowBatch, WindowSample

READOUTS = ("flatten_concat", "mean_pool")
CHECKPOINT_FORMAT = "gchp-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class GchpConfig:
    layers: int = 2
    hidden: int = 32
    m: int = 10
    p_feat: int = 11
    K: int = 10
    activation: str = "relu"
    readout: str = "flatten_concat"
    head_depth: int = 1

    def __post_init__(self):
        for name in ("layers", "hidden", "m", "p_feat", "K", "head_depth"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ValidationError(f"{name} must be a positive integer, got {v!r}")
        if self.activation != "relu":
            raise ValidationError(f"only relu activation is supported, got {self.activation!r}")
        if self.readout not in READOUTS:
            raise ValidationError(f"readout must be one of {READOUTS}, got {self.readout!r}")

    @property
    def readout_width(self) -> int:
        if self.readout == "flatten_concat":
            return self.m * (self.hidden + self.m)
        return self.hidden


def _head_shapes(cfg: GchpConfig, prefix: str, out: int) -> list[tuple[str, tuple]]:
    shapes = []
    width = cfg.readout_width
    for d in range(cfg.head_depth - 1):
        shapes += [(f"{prefix}_W{d}", (width, cfg.hidden)), (f"{prefix}_b{d}", (cfg.hidden,))]
        width = cfg.hidden
    shapes += [(f"{prefix}_W", (width, out)), (f"{prefix}_b", (out,))]
    return shapes


def param_shapes(cfg: GchpConfig) -> list[tuple[str, tuple]]:
    """Parameter names and shapes in canonical order."""
    shapes = [("W0", (cfg.p_feat, cfg.hidden))]
    shapes += [(f"W{i}", (cfg.hidden, cfg.hidden)) for i in range(1, cfg.layers)]
    return shapes + _head_shapes(cfg, "time", 1) + _head_shapes(cfg, "mark", cfg.K)


def param_count(cfg: GchpConfig) -> int:
    """Number of free scalar parameters."""
    return int(sum(np.prod(s) for _, s in param_shapes(cfg)))


@dataclass
class GchpModel:
    config: GchpConfig
    params: dict  # name -> ndarray, in param_shapes order
    graph: GraphSpec = field(default_factory=GraphSpec)

    def __post_init__(self):
        expected = param_shapes(self.config)
        if list(self.params) != [n for n, _ in expected]:
            raise ShapeMismatch(f"parameter names {list(self.params)} do not match the config")
        for name, shape in expected:
            arr = np.asarray(self.params[name], dtype=np.float64)
            if arr.shape != shape:
                raise ShapeMismatch(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} has non-finite entries")
            self.params[name] = arr
        if self.graph.m != self.config.m:
            raise ShapeMismatch(f"graph window m={self.graph.m} but model m={self.config.m}")

    @property
    def n_params(self) -> int:
        return param_count(self.config)

    def with_params(self, params: dict) -> "GchpModel":
        return GchpModel(self.config, {k: np.asarray(v) for k, v in params.items()}, self.graph)


def init_params(config: GchpConfig, seed, graph: GraphSpec | None = None) -> GchpModel:
    """Glorot-uniform weights, zero biases; deterministic per seed."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(config):
        if len(shape) == 1:
            params[name] = np.zeros(shape)
        else:
            bound = np.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = rng.uniform(-bound, bound, size=shape)
    return GchpModel(config, params, graph or GraphSpec(m=config.m))


def zero_model(config: GchpConfig, graph: GraphSpec | None = None) -> GchpModel:
    return GchpModel(config, {n: np.zeros(s) for n, s in param_shapes(config)}, graph or GraphSpec(m=config.m))


# ---------------------------------------------------------------- forward


def _head(params, prefix: str, r, depth: int):
    for d in range(depth - 1):
        r = dm.relu(dm.add(dm.matmul(r, params[f"{prefix}_W{d}"]), params[f"{prefix}_b{d}"]))
    return dm.add(dm.matmul(r, params[f"{prefix}_W"]), params[f"{prefix}_b"])


def forward_arrays(config: GchpConfig, params: dict, X, A):
    """Batch forward on ``X (B, m, p_feat)`` and ``A (B, m, m)``.

    ``params`` values may be :class:`~gchp.diffmath.Tensor` objects, in which
    case the outputs are tensors recorded on the active tape.  Returns
    ``(tau_hat (B,), mark_logprobs (B, K))``.
    """
    X = np.asarray(X, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    m = config.m
    if X.ndim != 3 or X.shape[1:] != (m, config.p_feat):
        raise ShapeMismatch(f"X must be (B, {m}, {config.p_feat}), got {X.shape}")
    if A.shape != (X.shape[0], m, m):
        raise ShapeMismatch(f"A must be ({X.shape[0]}, {m}, {m}), got {A.shape}")
    H = X
    for i in range(config.layers):
        H = dm.relu(dm.matmul(A, dm.matmul(H, params[f"W{i}"])))
    if config.readout == "flatten_concat":
        r = dm.flatten_rows(dm.concat_cols(H, A))
    else:
        r = dm.mean_pool_rows(H)
    z = _head(params, "time", r, config.head_depth)
    tau_hat = dm.softplus(dm.reshape(z, (X.shape[0],)))
    logp = dm.log_softmax(_head(params, "mark", r, config.head_depth))
    return tau_hat, logp


def forward_batch(model: GchpModel, batch: WindowBatch):
    return forward_arrays(model.config, model.params, batch.X, batch.A)


def forward(model: GchpModel, sample: WindowSample) -> tuple[float, np.ndarray]:
    tau, logp = forward_arrays(model.config, model.params, sample.X[None], sample.PhiNorm[None])
    return float(tau[0]), logp[0]


def predict_next(model: GchpModel, sample: WindowSample) -> tuple[float, int]:
    """Point prediction; ties in the mark go to the lowest class index."""
    tau, logp = forward(model, sample)
    return tau, int(np.argmax(logp))


def predict_batch(model: GchpModel, batch: WindowBatch, chunk: int = 4096) -> tuple[np.ndarray, np.ndarray]:
    """``(tau_hat, mark_logprobs)`` for every window, evaluated in chunks."""
    taus, logps = [], []
    for lo in range(0, len(batch), chunk):
        t, lp = forward_arrays(model.config, model.params, batch.X[lo : lo + chunk], batch.A[lo : lo + chunk])
        taus.append(t)
        logps.append(lp)
    if not taus:
        return np.zeros(0), np.zeros((0, model.config.K))
    return np.concatenate(taus), np.concatenate(logps)


# --------------------------------------------------------------- widening


def widen(model: GchpModel, hidden: int) -> GchpModel:
    """Embed ``model`` into width ``hidden`` with zero extra rows/columns.

    The widened network computes exactly the same outputs.
    """
    cfg = model.config
    if hidden < cfg.hidden:
        raise ValidationError(f"cannot narrow width {cfg.hidden} to {hidden}")
    new_cfg = GchpConfig(**{**asdict(cfg), "hidden": hidden})
    h, m = cfg.hidden, cfg.m
    out = {}
    for name, shape in param_shapes(new_cfg):
        old = model.params[name]
        new = np.zeros(shape)
        if name == "W0":
            new[:, :h] = old
        elif name.startswith("W"):
            new[:h, :h] = old
        elif name.endswith(("_W", "_W0")) and cfg.readout == "flatten_concat":
            # readout rows are laid out as m blocks of (hidden + m)
            for i in range(m):
                src, dst = i * (h + m), i * (hidden + m)
                new[dst : dst + h, : old.shape[1]] = old[src : src + h]
                new[dst + hidden : dst + hidden + m, : old.shape[1]] = old[src + h : src + h + m]
        else:
            new[tuple(slice(0, n) for n in old.shape)] = old
        out[name] = new
    return GchpModel(new_cfg, out, model.graph)


# ------------------------------------------------------------- checkpoints


def model_to_dict(model: GchpModel) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "graph": asdict(model.graph),
        "params": {
            name: {"shape": list(arr.shape), "data": arr.reshape(-1).tolist()} for name, arr in model.params.items()
        },
    }


def model_from_dict(doc: dict) -> GchpModel:
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValidationError("not a model checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValidationError(f"unsupported checkpoint version {doc.get('version')}")
    params = {n: np.array(p["data"], dtype=np.float64).reshape(p["shape"]) for n, p in doc["params"].items()}
    return GchpModel(GchpConfig(**doc["config"]), params, GraphSpec(**doc["graph"]))


def save_model(model: GchpModel, path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(model_to_dict(model), fh)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from None


def load_model(path) -> GchpModel:
    if not os.path.exists(path):
        raise IoFailure(f"checkpoint {path} does not exist")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except ValueError as exc:
            raise ValidationError(f"checkpoint {path} is not valid JSON: {exc}") from None
    return model_from_dict(doc)
