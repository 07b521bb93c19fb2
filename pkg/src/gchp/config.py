"""TOML run configuration.

Every key has a default, so an empty file is a valid configuration.  Unknown
sections or keys, wrong types and out-of-range values are rejected with an
error naming the dotted key.  Relative paths resolve against the config
file's directory.

Example::

    [sim]
    horizon = 30.0

    [model]
    hidden = 64

    [loss]
    family = "gamma"
    theta = 0.5
"""

from __future__ import annotations

import math
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Callable

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from gchp.errors import ConfigTypeError, MissingFile, RangeError, UnknownKey, UnknownValue
from gchp.graph import ADJACENCIES
from gchp.losses import FAMILIES
from gchp.model import READOUTS


@dataclass(frozen=True)
class Key:
    kind: type | tuple
    default: Any
    check: Callable[[Any], bool] | None = None
    rule: str = ""
    choices: tuple | None = None


def _pos(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _open01(x):
    return 0 < x < 1


def _widths(xs):
    return len(xs) > 0 and all(isinstance(w, int) and w > 0 for w in xs) and all(b > a for a, b in zip(xs, xs[1:]))


def _seeds(xs):
    return len(xs) >= 1 and all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in xs)


def _structures(xs):
    ok = len(xs) > 0
    for s in xs:
        ok = ok and isinstance(s, dict) and set(s) <= {"layers", "hidden", "readout", "head_depth"}
        ok = ok and all(isinstance(s.get(k, 1), int) and s.get(k, 1) > 0 for k in ("layers", "hidden", "head_depth"))
        ok = ok and s.get("readout", READOUTS[0]) in READOUTS
    return ok


def _families(xs):
    return len(xs) > 0 and all(f in FAMILIES for f in xs)


NUM = (int, float)

SCHEMA: dict[str, dict[str, Key]] = {
    "sim": {
        "K": Key(int, 10, lambda k: k >= 2, ">= 2"),
        "structure": Key(str, "paired", choices=("paired", "dense")),
        "n_sequences": Key(int, 140, lambda n: n >= 2, ">= 2"),
        "horizon": Key(NUM, 30.0, _pos, "> 0"),
        "beta": Key(NUM, 1.0, _pos, "> 0"),
        "branching": Key(NUM, 0.9, _open01, "in (0, 1)"),
        "feedback": Key(NUM, 0.02, _nonneg, ">= 0"),
        "mu_low": Key(NUM, 0.05, _nonneg, ">= 0"),
        "mu_high": Key(NUM, 0.15, _pos, "> 0"),
        "alpha_high": Key(NUM, 0.08, _pos, "> 0"),
        "workers": Key(int, 1, _pos, ">= 1"),
    },
    "io": {
        "data": Key(str, ""),  # empty: <out>/events.jsonl
        "checkpoint": Key(str, ""),  # empty: <out>/model.json
        "record_timing": Key(bool, False),
    },
    "history": {"m": Key(int, 10, _pos, ">= 1")},
    "kernel": {
        "family": Key(str, "gaussian-rbf", choices=("gaussian-rbf",)),
        "bandwidth": Key((str, int, float), "median", lambda b: b == "median" or (not isinstance(b, str) and b > 0),
                         '"median" or > 0'),
    },
    "graph": {
        "adjacency": Key(str, "phi", choices=ADJACENCIES),
        "mark_bandwidth": Key(NUM, 1.0, _pos, "> 0"),
    },
    "model": {
        "layers": Key(int, 2, _pos, ">= 1"),
        "hidden": Key(int, 32, _pos, ">= 1"),
        "readout": Key(str, "flatten_concat", choices=READOUTS),
        "head_depth": Key(int, 1, _pos, ">= 1"),
        "activation": Key(str, "relu", choices=("relu",)),
    },
    "loss": {
        "family": Key(str, "exponential", choices=FAMILIES),
        "sigma": Key(NUM, 1.0, _pos, "> 0"),
        "theta": Key(NUM, 1.0, _pos, "> 0"),
        "c": Key(NUM, 1.0, _nonneg, ">= 0"),
    },
    "train": {
        "epochs": Key(int, 20, _nonneg, ">= 0"),
        "batch_size": Key(int, 64, _pos, ">= 1"),
        "lr": Key(NUM, 1e-3, _pos, "> 0"),
        "patience": Key(int, 0, _nonneg, ">= 0 (0 disables early stopping)"),
        "train_fraction": Key(NUM, 5 / 7, _open01, "in (0, 1)"),
    },
    "lr_test": {"alpha": Key(NUM, 0.95, _open01, "in (0, 1)")},
    "select": {
        "structures": Key(list, [{"layers": 1, "hidden": 16}, {"layers": 2, "hidden": 16}], _structures,
                          "a list of {layers, hidden, readout, head_depth} tables"),
        "families": Key(list, ["exponential"], _families, f"a list drawn from {FAMILIES}"),
    },
    "saturate": {
        "widths": Key(list, [4, 8, 16, 32, 64, 128], _widths, "positive and strictly increasing"),
        "seeds": Key(list, [0, 1], _seeds, "a nonempty list of nonnegative integers"),
        # pooled readout: parameter count then grows with the swept width
        "readout": Key(str, "mean_pool", choices=READOUTS),
        "workers": Key(int, 1, _pos, ">= 1"),
    },
}


@dataclass(frozen=True)
class RunConfig:
    values: dict = field(default_factory=dict)  # section -> key -> value
    base_dir: str = "."

    def __getitem__(self, dotted: str):
        section, key = dotted.split(".", 1)
        return self.values[section][key]

    def section(self, name: str) -> dict:
        return dict(self.values[name])

    def path(self, dotted: str, default: str) -> str:
        raw = self[dotted] or default
        return raw if os.path.isabs(raw) else os.path.normpath(os.path.join(self.base_dir, raw))


def _type_ok(value, kind) -> bool:
    kinds = kind if isinstance(kind, tuple) else (kind,)
    if isinstance(value, bool) and bool not in kinds:
        return False
    if isinstance(value, float) and not math.isfinite(value):
        return False
    return isinstance(value, kinds)


def _type_name(kind) -> str:
    kinds = kind if isinstance(kind, tuple) else (kind,)
    names = {int: "integer", float: "number", str: "string", bool: "boolean", list: "array"}
    return " or ".join(dict.fromkeys(names[k] for k in kinds))


def validate(doc: dict, base_dir: str = ".") -> RunConfig:
    values = {s: {k: spec.default for k, spec in keys.items()} for s, keys in SCHEMA.items()}
    for section, body in doc.items():
        if section not in SCHEMA:
            raise UnknownKey(section)
        if not isinstance(body, dict):
            raise ConfigTypeError(section, "must be a table")
        for key, value in body.items():
            dotted = f"{section}.{key}"
            spec = SCHEMA[section].get(key)
            if spec is None:
                raise UnknownKey(dotted)
            if not _type_ok(value, spec.kind):
                raise ConfigTypeError(dotted, f"expected {_type_name(spec.kind)}, got {type(value).__name__}")
            if spec.choices is not None and value not in spec.choices:
                raise UnknownValue(dotted, f"{value!r} is not one of {', '.join(spec.choices)}")
            if spec.check is not None and not spec.check(value):
                raise RangeError(dotted, f"{value!r} must be {spec.rule}")
            values[section][key] = float(value) if spec.kind == NUM else value
    if values["sim"]["mu_low"] > values["sim"]["mu_high"]:
        raise RangeError("sim.mu_low", "must not exceed sim.mu_high")
    return RunConfig(values, base_dir)


def parse_config(path: str | None) -> RunConfig:
    """Load and validate a TOML config; ``None`` gives all defaults."""
    if path is None:
        return validate({}, os.getcwd())
    if not os.path.isfile(path):
        raise MissingFile("--config", str(path))
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigTypeError("<file>", f"invalid TOML: {exc}") from None
    return validate(doc, os.path.dirname(os.path.abspath(path)))


def require_file(cfg: RunConfig, dotted: str, path: str) -> str:
    if not os.path.isfile(path):
        raise MissingFile(dotted, path)
    return path
