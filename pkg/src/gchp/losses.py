"""Interarrival loss families, mark loss, hazard/density conversions and the
likelihood-ratio selection score.

Each family pairs a trimmed training loss with an exact interarrival density
whose mean is the network output ``tau_hat``:

=============  =====================================  ==============================
family         training loss                          density
=============  =====================================  ==============================
exponential    tau/tau_hat + log tau_hat              Exp(mean tau_hat)
gaussian       (tau_hat - tau)^2 / sigma - 2 log sigma  Normal(tau_hat, sigma^2)
gamma          lgamma(k) + tau/theta - k log(tau/theta) Gamma(shape k = tau_hat/theta, scale theta)
laplacian      |tau_hat - tau| / sigma                Laplace(tau_hat, sigma)
=============  =====================================  ==============================

Hazards are always computed as density / survival.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special as sp
from scipy.integrate import quad

from gchp import diffmath as dm
from gchp.errors import (
    ClassOutOfRange,
    EmptyData,
    InvalidAlpha,
    NegativeIntensitySample,
    NonPositiveTau,
    NonPositiveTauHat,
    OverparameterizedModel,
    ValidationError,
    VanishingSurvival,
)
from gchp.events import Dataset

FAMILIES = ("exponential", "gaussian", "gamma", "laplacian")
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class LossSpec:
    family: str = "exponential"
    sigma: float = 1.0  # gaussian / laplacian scale
    theta: float = 1.0  # gamma scale
    c: float = 1.0  # weight of the time loss

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        if not (self.theta > 0 and math.isfinite(self.theta)):
            raise ValidationError(f"theta must be positive, got {self.theta}")
        if not (self.c >= 0 and math.isfinite(self.c)):
            raise ValidationError(f"c must be nonnegative, got {self.c}")


def _check_positive(tau, tau_hat):
    if np.any(~(np.asarray(tau) > 0)):
        raise NonPositiveTau("observed interarrival must be > 0")
    if np.any(~(np.asarray(dm.value(tau_hat)) > 0)):
        raise NonPositiveTauHat("predicted interarrival must be > 0")


def _scalar_out(out, *inputs):
    if isinstance(out, dm.Tensor) or any(np.ndim(dm.value(x)) for x in inputs):
        return out
    return float(out)


def time_loss(tau, tau_hat, spec: LossSpec):
    """Per-event training loss; ``tau_hat`` may be a tensor on a tape."""
    _check_positive(tau, tau_hat)
    tau = np.asarray(tau, dtype=np.float64) if np.ndim(tau) else float(tau)
    f = spec.family
    if f == "exponential":
        out = dm.add(dm.div(tau, tau_hat), dm.log(tau_hat))
    elif f == "gaussian":
        out = dm.sub(dm.div(dm.square(dm.sub(tau_hat, tau)), spec.sigma), 2.0 * math.log(spec.sigma))
    elif f == "gamma":
        k = dm.div(tau_hat, spec.theta)
        log_ratio = np.log(np.divide(tau, spec.theta))
        out = dm.sub(dm.add(dm.lgamma(k), np.divide(tau, spec.theta)), dm.mul(k, log_ratio))
    else:
        out = dm.div(dm.absolute(dm.sub(tau_hat, tau)), spec.sigma)
    return _scalar_out(out, tau, tau_hat)


def mark_loss(mark_logprobs, observed):
    """Negative log-probability of the observed class (row-wise for batches)."""
    lp = dm.value(mark_logprobs)
    obs = np.asarray(observed)
    K = np.shape(lp)[-1]
    if not np.issubdtype(obs.dtype, np.integer) or np.any((obs < 0) | (obs >= K)):
        raise ClassOutOfRange(f"class id outside [0, {K})")
    if np.ndim(lp) == 1:
        if isinstance(mark_logprobs, dm.Tensor):
            return dm.neg(dm.pick(dm.reshape(mark_logprobs, (1, K)), obs.reshape(1)))
        return float(-lp[int(obs)])
    return dm.neg(dm.pick(mark_logprobs, obs))


def combined_loss(tau, tau_hat, mark_logprobs, marks, spec: LossSpec):
    """Sum over events of ``mark_loss + c * time_loss``."""
    if np.size(tau) == 0:
        raise EmptyData("empty batch")
    per_event = dm.add(mark_loss(mark_logprobs, marks), dm.mul(spec.c, time_loss(tau, tau_hat, spec)))
    out = dm.total(per_event)
    return out if isinstance(out, dm.Tensor) else float(out)


# -------------------------------------------------------- exact densities


def log_density(tau, tau_hat, spec: LossSpec):
    """log f(tau) of the family with mean ``tau_hat`` (untruncated)."""
    tau = np.asarray(tau, dtype=np.float64)
    tau_hat = np.asarray(tau_hat, dtype=np.float64)
    if np.any(~(tau_hat > 0)):
        raise NonPositiveTauHat("predicted interarrival must be > 0")
    f, s, th = spec.family, spec.sigma, spec.theta
    if f == "exponential":
        out = np.where(tau >= 0, -np.log(tau_hat) - tau / tau_hat, -np.inf)
    elif f == "gaussian":
        z = (tau - tau_hat) / s
        out = -0.5 * z * z - math.log(s) - LOG_SQRT_2PI
    elif f == "gamma":
        k = tau_hat / th
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(
                tau > 0, -sp.gammaln(k) - k * math.log(th) + (k - 1.0) * np.log(tau) - tau / th, -np.inf
            )
    else:
        out = -np.abs(tau - tau_hat) / s - math.log(2.0 * s)
    return float(out) if out.ndim == 0 else out


def density(tau, tau_hat, spec: LossSpec):
    return np.exp(log_density(tau, tau_hat, spec))


def log_survival(tau, tau_hat, spec: LossSpec):
    """log P(T > tau)."""
    tau = np.asarray(tau, dtype=np.float64)
    tau_hat = np.asarray(tau_hat, dtype=np.float64)
    f, s, th = spec.family, spec.sigma, spec.theta
    if f == "exponential":
        out = -np.maximum(tau, 0.0) / tau_hat
    elif f == "gaussian":
        out = sp.log_ndtr((tau_hat - tau) / s)
    elif f == "gamma":
        with np.errstate(divide="ignore"):
            out = np.log(sp.gammaincc(tau_hat / th, np.maximum(tau, 0.0) / th))
    else:
        d = (tau - tau_hat) / s
        out = np.where(d >= 0, math.log(0.5) - d, np.log1p(-0.5 * np.exp(np.minimum(d, 0.0))))
    return float(out) if out.ndim == 0 else out


def survival(tau, tau_hat, spec: LossSpec):
    return np.exp(log_survival(tau, tau_hat, spec))


def truncated_density(tau, tau_hat, spec: LossSpec):
    """Density conditioned on ``tau > 0``: ``f(tau) / S(0)``."""
    return np.exp(log_density(tau, tau_hat, spec) - log_survival(0.0, tau_hat, spec))


def implied_intensity(tau, tau_hat, spec: LossSpec):
    """Hazard ``f(tau) / S(tau)`` of the family, computed in log space."""
    if np.any(np.asarray(tau) < 0):
        raise NonPositiveTau("elapsed time must be >= 0")
    ls = log_survival(tau, tau_hat, spec)
    if np.any(np.isneginf(ls)):
        raise VanishingSurvival(f"survival underflows at tau={tau} for the {spec.family} family")
    if spec.family == "exponential":
        out = np.broadcast_to(1.0 / np.asarray(tau_hat, dtype=np.float64), np.shape(ls)).copy()
    elif spec.family == "laplacian":
        # the right tail is exactly memoryless
        d = np.asarray(tau, dtype=np.float64) - tau_hat
        out = np.where(d >= 0, 1.0 / spec.sigma, np.exp(log_density(tau, tau_hat, spec) - ls))
    else:
        out = np.exp(log_density(tau, tau_hat, spec) - ls)
    return float(out) if np.ndim(out) == 0 else out


def intensity_to_density(
    intensity: Callable[[float], float], t_prev: float, tau: float, *, tol: float = 1e-10, points=None
) -> float:
    """``lambda(t) * exp(-int_{t_prev}^{t} lambda)`` at ``t = t_prev + tau``."""
    if tau < 0:
        raise NonPositiveTau("tau must be >= 0")

    def checked(s):
        v = float(intensity(s))
        if v < 0 or not math.isfinite(v):
            raise NegativeIntensitySample(f"intensity {v} at t={s}")
        return v

    t = t_prev + tau
    lam = checked(t)
    if tau == 0:
        return lam
    inner = None
    if points is not None:
        inner = [p for p in np.atleast_1d(points) if t_prev < p < t] or None
    integral, _ = quad(checked, t_prev, t, epsabs=tol, epsrel=tol, limit=500, points=inner)
    return lam * math.exp(-integral)


# ----------------------------------------------------- likelihood ratio


@dataclass(frozen=True)
class LRScore:
    loglik_model: float
    loglik_null: float
    N: int
    d_xi: int
    alpha: float
    score: float


def null_loglik(dataset: Dataset, T_total: float | None = None) -> float:
    """Homogeneous Poisson with i.i.d. empirical marks, both at their MLE."""
    N = dataset.n_events
    if N == 0:
        raise EmptyData("null log-likelihood needs at least one event")
    T = dataset.total_horizon if T_total is None else float(T_total)
    if not T > 0:
        raise ValidationError("total horizon must be positive")
    marks = np.concatenate([s.marks for s in dataset])
    if dataset.mark_kind.is_categorical:
        counts = np.bincount(marks, minlength=dataset.mark_kind.size)
        counts = counts[counts > 0]
        mark_term = float(np.sum(counts * np.log(counts / N)))
    else:
        mark_term = 0.0
    return N * math.log(N / T) - N + mark_term


def lr_score(loglik_model: float, loglik_null: float, N: int, d_xi: int, alpha: float = 0.95) -> LRScore:
    """``l0 - l1 - log chi2_alpha(N - d)``; lower is better."""
    if not 0.0 < alpha < 1.0:
        raise InvalidAlpha(f"alpha must lie in (0, 1), got {alpha}")
    if N <= d_xi:
        raise OverparameterizedModel(f"N={N} events do not exceed d={d_xi} parameters")
    q = dm.chi2_quantile(alpha, N - d_xi)
    return LRScore(
        float(loglik_model), float(loglik_null), int(N), int(d_xi), float(alpha),
        float(loglik_null - loglik_model - math.log(q)),
    )


def model_loglik(model, dataset: Dataset, spec: LossSpec, *, batch=None, warn_mass: float = 1e-3) -> float:
    """Exact log-likelihood of the observed interarrivals and marks."""
    from gchp.graph import build_batch
    from gchp.model import predict_batch

    if batch is None:
        batch = build_batch(dataset, model.graph)
    if len(batch) == 0:
        raise EmptyData("dataset has no events")
    tau_hat, logp = predict_batch(model, batch)
    if spec.family in ("gaussian", "laplacian"):
        neg_mass = 1.0 - survival(0.0, tau_hat, spec)
        if np.max(neg_mass) > warn_mass:
            warnings.warn(
                f"{spec.family} density puts up to {np.max(neg_mass):.3g} mass on tau <= 0",
                RuntimeWarning,
                stacklevel=2,
            )
    time_part = float(np.sum(log_density(batch.tau, tau_hat, spec)))
    mark_part = float(np.sum(logp[np.arange(len(batch)), batch.marks]))
    return time_part + mark_part
