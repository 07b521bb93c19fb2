"""Mini-batch training, evaluation metrics and the width-saturation sweep.

Randomness: ``TrainConfig.seed`` is expanded with ``SeedSequence(seed).spawn(2)``;
child 0 initializes the weights and child 1 drives the per-epoch shuffles.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from gchp import diffmath as dm
from gchp.errors import EmptyData, NoWindows, OverparameterizedModel, ValidationError
from gchp.events import Dataset
from gchp.graph import GraphSpec, WindowBatch, build_batch, median_interarrival
from gchp.losses import LossSpec, LRScore, combined_loss, lr_score, model_loglik, null_loglik
from gchp.model import GchpConfig, GchpModel, forward_arrays, init_params, param_count, predict_batch

METRICS_HEADER = ("epoch", "train_loss", "test_rmse", "test_accuracy", "seconds")
SWEEP_HEADER = ("width", "d_xi", "mean_accuracy", "std_accuracy", "mean_rmse")


@dataclass(frozen=True)
class TrainConfig:
    model: GchpConfig = field(default_factory=GchpConfig)
    loss: LossSpec = field(default_factory=LossSpec)
    epochs: int = 30
    batch_size: int = 64
    lr: float = 1e-3
    seed: int = 0
    patience: int | None = None  # stop after this many epochs without train-loss improvement
    bandwidth: float | None = None  # None: median train interarrival
    adjacency: str = "phi"
    mark_bandwidth: float = 1.0
    alpha: float = 0.95

    def __post_init__(self):
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if not self.lr > 0:
            raise ValidationError("lr must be positive")
        if self.patience is not None and self.patience < 1:
            raise ValidationError("patience must be >= 1")

    def graph_for(self, train: Dataset) -> GraphSpec:
        bw = self.bandwidth if self.bandwidth is not None else median_interarrival(train)
        return GraphSpec(self.model.m, bw, self.adjacency, self.mark_bandwidth)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float  # mean per-event combined loss over the epoch (initial evaluation at epoch 0)
    test_rmse: float
    test_accuracy: float
    seconds: float


@dataclass
class TrainReport:
    records: list
    model: GchpModel
    lr: LRScore | None  # None when the structure is overparameterized for the train split
    checkpoint: str | None = None

    def final(self) -> EpochRecord:
        return self.records[-1]


def evaluate_predictions(tau, tau_hat, marks, mark_pred) -> tuple[float, float]:
    tau = np.asarray(tau, dtype=np.float64)
    if tau.size == 0:
        raise EmptyData("cannot evaluate on zero events")
    rmse = float(np.sqrt(np.mean((np.asarray(tau_hat) - tau) ** 2)))
    acc = float(np.mean(np.asarray(mark_pred) == np.asarray(marks)))
    return rmse, acc


def evaluate(model: GchpModel, dataset: Dataset | WindowBatch, spec: LossSpec | None = None) -> tuple[float, float]:
    """(RMSE of tau_hat, accuracy of the argmax mark) over every event."""
    batch = dataset if isinstance(dataset, WindowBatch) else build_batch(dataset, model.graph)
    if len(batch) == 0:
        raise EmptyData("cannot evaluate on zero events")
    tau_hat, logp = predict_batch(model, batch)
    return evaluate_predictions(batch.tau, tau_hat, batch.marks, np.argmax(logp, axis=1))


def baseline_metrics(train: Dataset, test: Dataset) -> tuple[float, float]:
    """Constant mean-interarrival RMSE and majority-class accuracy, fitted on ``train``."""
    tr_tau = np.concatenate([s.interarrivals() for s in train])
    tr_marks = np.concatenate([s.marks for s in train])
    te_tau = np.concatenate([s.interarrivals() for s in test])
    te_marks = np.concatenate([s.marks for s in test])
    majority = int(np.argmax(np.bincount(tr_marks)))
    return evaluate_predictions(te_tau, np.full(len(te_tau), tr_tau.mean()), te_marks, np.full(len(te_marks), majority))


def _loss_fn(config: TrainConfig, X, A, tau, marks):
    def fn(params):
        tau_hat, logp = forward_arrays(config.model, params, X, A)
        return combined_loss(tau, tau_hat, logp, marks, config.loss)

    return fn


def train(train_set: Dataset, test_set: Dataset, config: TrainConfig, *, graph: GraphSpec | None = None) -> TrainReport:
    if not train_set.mark_kind.is_categorical or train_set.mark_kind.size != config.model.K:
        raise ValidationError(f"model expects {config.model.K} categorical marks, data has {train_set.mark_kind}")
    if config.model.p_feat != config.model.K + 1:
        raise ValidationError(f"p_feat must be K + 1 = {config.model.K + 1}")
    graph = graph or config.graph_for(train_set)
    tr = build_batch(train_set, graph)
    te = build_batch(test_set, graph)
    if len(tr) == 0:
        raise NoWindows("training split has no events")
    if len(te) == 0:
        raise EmptyData("test split has no events")

    init_seq, shuffle_seq = np.random.SeedSequence(config.seed).spawn(2)
    model = init_params(config.model, np.random.default_rng(init_seq), graph)
    shuffle_rng = np.random.default_rng(shuffle_seq)
    adam_cfg = dm.AdamConfig(lr=config.lr)
    state = dm.AdamState()
    params = model.params

    def record(epoch, loss, seconds):
        rmse, acc = evaluate(model, te)
        return EpochRecord(epoch, float(loss), rmse, acc, seconds)

    start = time.perf_counter()
    init_loss = sum(
        combined_loss(tr.tau[lo : lo + 4096], *predict_batch(model, tr.take(slice(lo, lo + 4096))),
                      tr.marks[lo : lo + 4096], config.loss)
        for lo in range(0, len(tr), 4096)
    ) / len(tr)
    records = [record(0, init_loss, time.perf_counter() - start)]

    best, stale = math.inf, 0
    for epoch in range(1, config.epochs + 1):
        start = time.perf_counter()
        order = shuffle_rng.permutation(len(tr))
        total = 0.0
        for lo in range(0, len(tr), config.batch_size):
            idx = order[lo : lo + config.batch_size]
            fn = _loss_fn(config, tr.X[idx], tr.A[idx], tr.tau[idx], tr.marks[idx])
            value, grads = dm.gradients(fn, params)
            params, state = dm.adam_step(params, grads, state, adam_cfg)
            total += value
        model = model.with_params(params)
        mean_loss = total / len(tr)
        records.append(record(epoch, mean_loss, time.perf_counter() - start))
        if config.patience is not None:
            if mean_loss < best - 1e-12:
                best, stale = mean_loss, 0
            else:
                stale += 1
                if stale >= config.patience:
                    break

    try:
        l1 = model_loglik(model, train_set, config.loss, batch=tr)
        score = lr_score(l1, null_loglik(train_set), len(tr), param_count(config.model), config.alpha)
    except OverparameterizedModel:
        score = None
    return TrainReport(records, model, score)


# ---------------------------------------------------------------- sweep


@dataclass(frozen=True)
class SweepRow:
    width: int
    d_xi: int
    mean_accuracy: float
    std_accuracy: float
    mean_rmse: float


def _sweep_job(args):
    train_set, test_set, config, graph = args
    report = train(train_set, test_set, config, graph=graph)
    final = report.final()
    return final.test_accuracy, final.test_rmse


def saturation_sweep(
    train_set: Dataset, test_set: Dataset, base: TrainConfig, widths, seeds, *, workers: int = 1
) -> list[SweepRow]:
    """Train one model per (width, seed); rows come back in width order."""
    widths = [int(w) for w in widths]
    seeds = [int(s) for s in seeds]
    if not widths or any(w < 1 for w in widths) or any(b <= a for a, b in zip(widths, widths[1:])):
        raise ValidationError("widths must be positive and strictly increasing")
    if len(seeds) < 1:
        raise ValidationError("need at least one seed")
    graph = base.graph_for(train_set)
    jobs = [
        (train_set, test_set, replace(base, seed=s, model=replace(base.model, hidden=w)), graph)
        for w in widths
        for s in seeds
    ]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    rows = []
    for i, w in enumerate(widths):
        chunk = results[i * len(seeds) : (i + 1) * len(seeds)]
        acc = np.array([a for a, _ in chunk])
        rmse = np.array([r for _, r in chunk])
        rows.append(
            SweepRow(w, param_count(replace(base.model, hidden=w)), float(acc.mean()), float(acc.std()), float(rmse.mean()))
        )
    return rows


# ------------------------------------------------------------------ CSV


def _fmt(x: float) -> str:
    return repr(float(x))


def metrics_csv(records, *, include_seconds: bool = False) -> str:
    """Per-epoch metrics; the seconds column stays empty unless asked for so reruns are byte-identical."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    for r in records:
        w.writerow([r.epoch, _fmt(r.train_loss), _fmt(r.test_rmse), _fmt(r.test_accuracy),
                    _fmt(r.seconds) if include_seconds else ""])
    return buf.getvalue()


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in rows:
        w.writerow([r.width, r.d_xi, _fmt(r.mean_accuracy), _fmt(r.std_accuracy), _fmt(r.mean_rmse)])
    return buf.getvalue()
