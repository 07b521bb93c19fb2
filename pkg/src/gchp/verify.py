"""Built-in invariant suite behind ``gchp verify``.

Each check is fast (the whole suite runs in seconds) and returns a
:class:`Check`; an exception inside a check counts as a failure.
"""

from __future__ import annotations

import math
import os
import tempfile
import traceback
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from gchp import diffmath as dm
from gchp.events import Dataset, EventSequence, MarkKind, parse_jsonl, write_jsonl
from gchp.graph import GraphSpec, build_batch, build_samples, symmetric_normalize
from gchp.hawkes import HawkesParams, compensator, intensity_at, rescaled_interarrivals, sample_params, simulate_corpus, simulate_hawkes
from gchp.losses import (
    FAMILIES, LossSpec, combined_loss, implied_intensity, intensity_to_density, lr_score, time_loss, truncated_density,
)
from gchp.model import GchpConfig, forward_arrays, init_params, load_model, param_count, predict_batch, save_model, widen, zero_model
from gchp.train import TrainConfig, metrics_csv, train


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str = ""


def _events_roundtrip(seed):
    data = simulate_corpus(sample_params(4, seed), 10.0, 3, seed)
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "x.jsonl")
        write_jsonl(data, path)
        back = parse_jsonl(path, data.mark_kind)
    return back == data, f"{data.n_events} events"


def _poisson_count(seed):
    n = len(simulate_hawkes(HawkesParams([1.0], [[0.0]], 1.0), 1000.0, seed))
    return abs(n - 1000) <= 4 * math.sqrt(1000), f"count {n}"


def _compensator_quadrature(seed):
    p = sample_params(3, seed, structure="dense", branching=0.7)
    seq = simulate_hawkes(p, 20.0, seed)
    edges = np.concatenate([[0.0], seq.times, [seq.horizon]])
    num = sum(
        quad(lambda t, h=seq.prefix(i): intensity_at(p, h, t), edges[i], edges[i + 1], epsabs=1e-13, epsrel=1e-13)[0]
        for i in range(len(edges) - 1)
    )
    closed = compensator(p, seq, seq.horizon)
    err = abs(num - closed) / closed
    return err < 1e-8, f"relative error {err:.2e}"


def _ks_residuals(seed):
    p = HawkesParams([0.5], [[0.8]], 1.6)
    seq = simulate_hawkes(p, 5200.0, seed)
    pv = stats.kstest(rescaled_interarrivals(p, seq), "expon").pvalue
    return pv > 0.01, f"n={len(seq)} p={pv:.3f}"


def _normalized_spectrum(seed):
    seq = simulate_hawkes(sample_params(4, seed), 15.0, seed)
    samples = build_samples(seq, GraphSpec(m=6, bandwidth=0.5), MarkKind.categorical(4))
    worst = max(np.max(np.abs(np.linalg.eigvalsh(s.PhiNorm))) for s in samples)
    sym = all(np.allclose(s.PhiNorm, s.PhiNorm.T) for s in samples)
    return sym and worst <= 1 + 1e-12, f"max |eig| {worst:.6f}"


def _chi2_values(seed):
    a, b = dm.chi2_quantile(0.95, 1), dm.chi2_quantile(0.95, 10)
    return abs(a - 3.841459) < 1e-4 and abs(b - 18.30704) < 1e-4, f"{a:.6f}, {b:.5f}"


def _lgamma_recurrence(seed):
    xs = np.linspace(0.1, 100, 1000)
    err = np.max(np.abs(dm.log_gamma(xs + 1) - dm.log_gamma(xs) - np.log(xs)))
    return err < 1e-10, f"max error {err:.1e}"


def _tiny_batch(seed, n=8):
    seq = simulate_hawkes(sample_params(3, seed), 30.0, seed)
    data = Dataset([seq], MarkKind.categorical(3))
    return build_batch(data, GraphSpec(m=4, bandwidth=0.7)).take(slice(0, n))


def _model_gradients(seed):
    cfg = GchpConfig(layers=2, hidden=3, m=4, p_feat=4, K=3)
    model = init_params(cfg, seed)
    b = _tiny_batch(seed)
    spec = LossSpec("exponential")

    def fn(params):
        tau_hat, logp = forward_arrays(cfg, params, b.X, b.A)
        return combined_loss(b.tau, tau_hat, logp, b.marks, spec)

    errs = dm.check_gradients(fn, model.params, 1e-5)
    worst = max(errs.values())
    return worst < 1e-4, f"max relative error {worst:.1e}"


def _zero_model(seed):
    cfg = GchpConfig(hidden=5, m=4, p_feat=4, K=3)
    b = _tiny_batch(seed, 3)
    tau, logp = predict_batch(zero_model(cfg, GraphSpec(m=4)), b)
    ok = np.allclose(tau, math.log(2.0), atol=1e-15) and np.allclose(np.exp(logp), 1 / 3, atol=1e-15)
    return ok, f"tau_hat {tau[0]:.6f}"


def _param_count(seed):
    n = param_count(GchpConfig(layers=2, hidden=8, m=5, p_feat=4, K=3))
    return n == 360, f"d = {n}"


def _widening(seed):
    cfg = GchpConfig(hidden=3, m=4, p_feat=4, K=3)
    model = init_params(cfg, seed)
    b = _tiny_batch(seed)
    t1, l1 = predict_batch(model, b)
    t2, l2 = predict_batch(widen(model, 7), b)
    err = max(np.max(np.abs(t1 - t2)), np.max(np.abs(l1 - l2)))
    return err < 1e-12, f"max difference {err:.1e}"


def _checkpoint(seed):
    model = init_params(GchpConfig(hidden=3, m=4, p_feat=4, K=3), seed, GraphSpec(m=4, bandwidth=0.3))
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "m.json")
        save_model(model, path)
        back = load_model(path)
    same = all(np.array_equal(model.params[k], back.params[k]) for k in model.params)
    return same and back.config == model.config and back.graph == model.graph, "bitwise"


def _minimizers(seed):
    tau = 1.7
    worst = 0.0
    for fam in ("exponential", "gaussian", "laplacian"):
        spec = LossSpec(fam, sigma=0.8)
        r = minimize_scalar(lambda x: time_loss(tau, x, spec), bounds=(tau / 10, 10 * tau), method="bounded",
                            options={"xatol": 1e-9})
        worst = max(worst, abs(r.x - tau))
    theta = 0.5
    r = minimize_scalar(lambda x: time_loss(tau, x, LossSpec("gamma", theta=theta)), bounds=(1e-3, 20),
                        method="bounded", options={"xatol": 1e-12})
    g = abs(dm.digamma(r.x / theta) - math.log(tau / theta))
    return worst < 1e-3 and g < 1e-6, f"max |argmin - tau| {worst:.1e}, digamma gap {g:.1e}"


def _hazard_density(seed):
    worst = 0.0
    for fam in FAMILIES:
        spec = LossSpec(fam, sigma=0.4, theta=0.25)
        tau_hat = 2.0
        for tau in np.linspace(0.3, 3.5, 7):
            got = intensity_to_density(lambda s: implied_intensity(s, tau_hat, spec), 0.0, tau, points=[tau_hat])
            worst = max(worst, abs(got - truncated_density(tau, tau_hat, spec)))
    return worst < 1e-6, f"max error {worst:.1e}"


def _lr_example(seed):
    s = lr_score(0.0, 0.0, 2, 1, 0.95).score
    return abs(s + 1.3458522) < 1e-6, f"score {s:.6f}"


def _train_determinism(seed):
    data = simulate_corpus(sample_params(3, seed), 15.0, 4, seed)
    tr, te = Dataset(data.sequences[:3], data.mark_kind), Dataset(data.sequences[3:], data.mark_kind)
    cfg = TrainConfig(GchpConfig(hidden=4, m=4, p_feat=4, K=3), epochs=2, seed=seed)
    a, b = metrics_csv(train(tr, te, cfg).records), metrics_csv(train(tr, te, cfg).records)
    return a == b, "byte-identical metrics"


CHECKS = [
    ("events: JSONL round trip", _events_roundtrip),
    ("hawkes: Poisson event count", _poisson_count),
    ("hawkes: compensator matches quadrature", _compensator_quadrature),
    ("hawkes: rescaled residuals are Exp(1)", _ks_residuals),
    ("graph: normalized graph symmetric, spectrum in [-1, 1]", _normalized_spectrum),
    ("diffmath: chi-squared quantiles", _chi2_values),
    ("diffmath: log-gamma recurrence", _lgamma_recurrence),
    ("model: gradients match finite differences", _model_gradients),
    ("model: zero weights give ln 2 and uniform marks", _zero_model),
    ("model: parameter count", _param_count),
    ("model: widening preserves outputs", _widening),
    ("model: checkpoint round trip", _checkpoint),
    ("losses: per-event minimizers", _minimizers),
    ("losses: hazard reproduces density", _hazard_density),
    ("losses: likelihood-ratio score", _lr_example),
    ("train: deterministic metrics", _train_determinism),
]


def run_suite(seed: int = 0) -> list[Check]:
    out = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn(seed)
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}".splitlines()[0]
            if os.environ.get("GCHP_VERIFY_TRACE"):
                traceback.print_exc()
        out.append(Check(name, bool(ok), detail))
    return out
