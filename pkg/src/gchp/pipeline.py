"""Glue between a :class:`RunConfig` and the library.

Seed fan-out: a run seed ``S`` yields independent integer seeds through
``derive_seed(S, stream, *extra)``, i.e. the first 32-bit word of
``SeedSequence([S, stream, *extra])``.  Streams:

* 0 -- generator parameters
* 1 -- corpus simulation (one further substream per sequence)
* 2 -- train/test split
* 3 -- training (sweep replicate ``r`` uses ``derive_seed(S, 3, r)``)
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from gchp.config import RunConfig
from gchp.events import Dataset, MarkKind, parse_jsonl, split
from gchp.hawkes import HawkesParams, sample_params, simulate_corpus
from gchp.losses import LossSpec
from gchp.model import GchpConfig
from gchp.train import TrainConfig

PARAMS_STREAM, CORPUS_STREAM, SPLIT_STREAM, TRAIN_STREAM = range(4)


def derive_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(1)[0])


def hawkes_params(cfg: RunConfig, seed: int) -> HawkesParams:
    s = cfg.section("sim")
    return sample_params(
        s["K"],
        derive_seed(seed, PARAMS_STREAM),
        structure=s["structure"],
        beta=s["beta"],
        branching=s["branching"],
        mu_range=(s["mu_low"], s["mu_high"]),
        alpha_high=s["alpha_high"],
        feedback=s["feedback"],
    )


def simulate(cfg: RunConfig, seed: int) -> tuple[HawkesParams, Dataset]:
    s = cfg.section("sim")
    params = hawkes_params(cfg, seed)
    data = simulate_corpus(params, s["horizon"], s["n_sequences"], derive_seed(seed, CORPUS_STREAM), s["workers"])
    return params, data


def mark_kind(cfg: RunConfig) -> MarkKind:
    return MarkKind.categorical(cfg["sim.K"])


def load(cfg: RunConfig, path: str) -> Dataset:
    return parse_jsonl(path, mark_kind(cfg))


def split_data(cfg: RunConfig, data: Dataset, seed: int) -> tuple[Dataset, Dataset]:
    return split(data, cfg["train.train_fraction"], derive_seed(seed, SPLIT_STREAM))


def model_config(cfg: RunConfig, **overrides) -> GchpConfig:
    m = cfg.section("model")
    K = cfg["sim.K"]
    fields = dict(
        layers=m["layers"], hidden=m["hidden"], m=cfg["history.m"], p_feat=K + 1, K=K,
        activation=m["activation"], readout=m["readout"], head_depth=m["head_depth"],
    )
    fields.update(overrides)
    return GchpConfig(**fields)


def loss_spec(cfg: RunConfig, family: str | None = None) -> LossSpec:
    s = cfg.section("loss")
    return LossSpec(family or s["family"], s["sigma"], s["theta"], s["c"])


def train_config(cfg: RunConfig, seed: int, **model_overrides) -> TrainConfig:
    t = cfg.section("train")
    bw = cfg["kernel.bandwidth"]
    return TrainConfig(
        model=model_config(cfg, **model_overrides),
        loss=loss_spec(cfg),
        epochs=t["epochs"],
        batch_size=t["batch_size"],
        lr=t["lr"],
        seed=derive_seed(seed, TRAIN_STREAM),
        patience=t["patience"] or None,
        bandwidth=None if bw == "median" else float(bw),
        adjacency=cfg["graph.adjacency"],
        mark_bandwidth=cfg["graph.mark_bandwidth"],
        alpha=cfg["lr_test.alpha"],
    )


def sweep_seeds(cfg: RunConfig, seed: int) -> list[int]:
    return [derive_seed(seed, TRAIN_STREAM, r) for r in cfg["saturate.seeds"]]


def with_family(tc: TrainConfig, family: str) -> TrainConfig:
    return replace(tc, loss=replace(tc.loss, family=family))
