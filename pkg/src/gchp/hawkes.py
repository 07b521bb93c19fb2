"""Multivariate exponential-kernel Hawkes processes and the nonlinear
multiplicative-kernel marked Hawkes intensity.

Type ``k`` has intensity::

    lambda_k(t) = mu_k + sum_{t_j < t} alpha[k, k_j] * exp(-beta (t - t_j))

Random streams: a sequence simulated with integer ``seed`` uses
``np.random.default_rng(seed)`` (PCG64).  A corpus simulated with ``seed``
gives sequence ``i`` the ``i``-th child of ``SeedSequence(seed).spawn(n)``,
so each sequence is reproducible on its own and independent of the order in
which sequences are generated.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from gchp.errors import (
    NonPositiveHorizon,
    SupercriticalParams,
    TimeBeforeHistory,
    ValidationError,
    ZeroIntensityAtEvent,
)
from gchp.events import Dataset, EventSequence, MarkKind
from gchp.graph import KernelSpec, temporal_kernel

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]


@dataclass(frozen=True)
class HawkesParams:
    mu: np.ndarray
    alpha: np.ndarray
    beta: float

    def __post_init__(self):
        mu = np.array(self.mu, dtype=np.float64).reshape(-1)
        alpha = np.array(self.alpha, dtype=np.float64)
        if alpha.ndim == 0 and len(mu) == 1:
            alpha = alpha.reshape(1, 1)
        K = len(mu)
        if K == 0 or alpha.shape != (K, K):
            raise ValidationError(f"alpha must be {K}x{K}, got shape {alpha.shape}")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(alpha))):
            raise ValidationError("Hawkes parameters must be finite")
        if np.any(mu < 0) or np.any(alpha < 0):
            raise ValidationError("mu and alpha must be nonnegative")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValidationError(f"beta must be positive, got {self.beta}")
        mu.setflags(write=False)
        alpha.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def K(self) -> int:
        return len(self.mu)

    @property
    def branching_ratio(self) -> float:
        """Spectral radius of alpha / beta."""
        return float(np.max(np.abs(np.linalg.eigvals(self.alpha / self.beta))))

    @property
    def stationary_rate(self) -> float:
        """Long-run total event rate sum((I - alpha/beta)^-1 mu)."""
        return float(np.linalg.solve(np.eye(self.K) - self.alpha / self.beta, self.mu).sum())

    def to_dict(self) -> dict:
        return {"mu": self.mu.tolist(), "alpha": self.alpha.tolist(), "beta": self.beta}

    @classmethod
    def from_dict(cls, d: dict) -> "HawkesParams":
        return cls(np.array(d["mu"]), np.array(d["alpha"]), float(d["beta"]))


def _rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_params(
    K: int = 10,
    seed: SeedLike = 0,
    *,
    structure: str = "paired",
    beta: float = 1.0,
    branching: float = 0.9,
    mu_range: tuple[float, float] = (0.05, 0.15),
    alpha_high: float = 0.08,
    dominant_range: tuple[float, float] = (0.5, 1.0),
    feedback: float = 0.02,
) -> HawkesParams:
    """Draw a random generator with every entry uniformly sampled.

    ``dense``: ``alpha ~ U[0, alpha_high]`` everywhere.
    ``paired``: the first ``K // 2`` types are triggers, the rest responses.
    Each trigger excites one distinct response with weight
    ``U[dominant_range]``; each response feeds back into one trigger with
    ``feedback * U[dominant_range]``; all other entries are zero.  This keeps
    the next mark and the next gap learnable from the recent history.

    Either way alpha is rescaled so the spectral radius of alpha/beta equals
    ``branching``.
    """
    if K < 1:
        raise ValidationError("K must be positive")
    if not 0 < branching < 1:
        raise ValidationError(f"branching must lie in (0, 1), got {branching}")
    rng = _rng(seed)
    mu = rng.uniform(*mu_range, size=K)
    if structure == "dense":
        alpha = rng.uniform(0.0, alpha_high, size=(K, K))
    elif structure == "paired":
        if K < 2:
            raise ValidationError("paired structure needs K >= 2")
        h = K // 2
        alpha = np.zeros((K, K))
        responses = h + rng.permutation(K - h)[:h]
        triggers = rng.permutation(h)
        for j in range(h):
            alpha[responses[j], j] = rng.uniform(*dominant_range)
        for i in range(K - h):
            alpha[triggers[i % h], h + i] = feedback * rng.uniform(*dominant_range)
    else:
        raise ValidationError(f"unknown structure {structure!r}")
    radius = np.max(np.abs(np.linalg.eigvals(alpha / beta)))
    if radius > 0:
        alpha = alpha * (branching / radius)
    return HawkesParams(mu, alpha, beta)


def simulate_hawkes(params: HawkesParams, T: float, seed: SeedLike, seq_id: str | None = None) -> EventSequence:
    """Ogata thinning on (0, T].

    The dominating rate is the total intensity just after the last candidate
    (including any jump); it is valid because intensities only decay between
    events.  One uniform draw decides acceptance and the event type.
    """
    if not (T > 0 and math.isfinite(T)):
        raise NonPositiveHorizon(f"horizon must be positive, got {T}")
    if params.branching_ratio >= 1.0:
        raise SupercriticalParams(f"spectral radius {params.branching_ratio:.4f} >= 1")
    rng = _rng(seed)
    mu, alpha, beta = params.mu, params.alpha, params.beta
    mu_total = float(mu.sum())
    excite = np.zeros(params.K)  # per-type excitation at time `last`
    t = last = 0.0
    times, marks = [], []
    if mu_total == 0.0:
        return EventSequence(seq_id or _seq_id(seed), T, times, np.zeros(0, dtype=np.int64))
    while True:
        bound = mu_total + excite.sum()
        t += rng.exponential(1.0 / bound)
        if t > T:
            break
        excite *= math.exp(-beta * (t - last))
        last = t
        lam = mu + excite
        u = rng.uniform(0.0, bound)
        cum = np.cumsum(lam)
        if u < cum[-1]:
            k = int(np.searchsorted(cum, u, side="right"))
            k = min(k, params.K - 1)
            times.append(t)
            marks.append(k)
            excite += alpha[:, k]
    return EventSequence(seq_id or _seq_id(seed), T, times, np.array(marks, dtype=np.int64))


def _seq_id(seed) -> str:
    return f"seed-{seed}" if isinstance(seed, (int, np.integer)) else "sim"


def simulate_corpus(
    params: HawkesParams, T: float, n_sequences: int, seed: int, workers: int = 1
) -> Dataset:
    """``n_sequences`` independent sequences, each on its own seed substream."""
    children = np.random.SeedSequence(seed).spawn(n_sequences)

    def one(i):
        return simulate_hawkes(params, T, np.random.default_rng(children[i]), seq_id=f"s{i:04d}")

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            seqs = list(pool.map(one, range(n_sequences)))
    else:
        seqs = [one(i) for i in range(n_sequences)]
    return Dataset(seqs, MarkKind.categorical(params.K))


# ----------------------------------------------------------- oracles


def intensity_at(params: HawkesParams, history: EventSequence, t: float, k: int | None = None) -> float:
    """lambda_k(t) given the events of ``history`` strictly before ``t``; ``k=None`` gives the ground intensity."""
    times = history.times
    if len(times) and t < times[-1]:
        raise TimeBeforeHistory(f"query time {t} precedes history event at {times[-1]}")
    before = times < t
    decay = np.exp(-params.beta * (t - times[before]))
    src = history.marks[before]
    if k is None:
        return float(params.mu.sum() + np.dot(params.alpha[:, src].sum(axis=0), decay))
    return float(params.mu[k] + np.dot(params.alpha[k, src], decay))


@dataclass(frozen=True)
class LogLikelihood:
    ground: float  # sum log lambda_g(t_i) - integral of lambda_g over [0, T]
    mark: float  # sum log p(m_i | t_i)

    @property
    def total(self) -> float:
        return self.ground + self.mark


def _event_intensities(params: HawkesParams, seq: EventSequence):
    """Per-event type intensity, ground intensity and post-event total excitation."""
    K, beta = params.K, params.beta
    excite = np.zeros(K)
    lam_k = np.empty(len(seq))
    lam_g = np.empty(len(seq))
    after = np.empty(len(seq))
    prev = 0.0
    for i, (t, k) in enumerate(zip(seq.times, seq.marks)):
        excite *= math.exp(-beta * (t - prev))
        lam = params.mu + excite
        lam_k[i] = lam[k]
        lam_g[i] = lam.sum()
        excite += params.alpha[:, k]
        after[i] = excite.sum()
        prev = t
    return lam_k, lam_g, after


def log_likelihood_terms(params: HawkesParams, seq: EventSequence) -> LogLikelihood:
    lam_k, lam_g, _ = _event_intensities(params, seq)
    if np.any(lam_k <= 0):
        i = int(np.flatnonzero(lam_k <= 0)[0])
        raise ZeroIntensityAtEvent(f"sequence {seq.id!r}: zero intensity at event {i}")
    return LogLikelihood(
        ground=float(np.sum(np.log(lam_g)) - compensator(params, seq, seq.horizon)),
        mark=float(np.sum(np.log(lam_k) - np.log(lam_g))),
    )


def log_likelihood(params: HawkesParams, seq: EventSequence) -> float:
    return log_likelihood_terms(params, seq).total


def compensator(params: HawkesParams, seq: EventSequence, t: float) -> float:
    """Closed-form integral of the ground intensity over [0, t]."""
    times = seq.times[seq.times < t]
    jumps = params.alpha[:, seq.marks[: len(times)]].sum(axis=0)
    return float(
        params.mu.sum() * t + np.sum(jumps / params.beta * (1.0 - np.exp(-params.beta * (t - times))))
    )


def rescaled_interarrivals(params: HawkesParams, seq: EventSequence) -> np.ndarray:
    """Compensator increments between consecutive events (t_0 = 0)."""
    lam_k, _, after = _event_intensities(params, seq)
    if np.any(lam_k <= 0):
        i = int(np.flatnonzero(lam_k <= 0)[0])
        raise ZeroIntensityAtEvent(f"sequence {seq.id!r}: zero intensity at event {i}")
    gaps = seq.interarrivals()
    carried = np.concatenate([[0.0], after[:-1]])  # excitation right after the previous event
    return params.mu.sum() * gaps + carried / params.beta * (-np.expm1(-params.beta * gaps))


# ----------------------------------------- nonlinear multiplicative kernel


_LINKS: dict[str, Callable[[float, float], float]] = {
    "identity": lambda x, s: x,
    "relu": lambda x, s: max(x, 0.0),
    "softplus": lambda x, s: float(np.logaddexp(0.0, x)),
    "sigmoid-scaled": lambda x, s: s / (1.0 + math.exp(-x)) if x >= 0 else s * math.exp(x) / (1.0 + math.exp(x)),
}


@dataclass(frozen=True)
class NmhpParams:
    """lambda(t, m) = h(mu p(m) + sum_{t_j < t} phi(t - t_j) kappa(m, m_j)).

    ``mark_density`` is a probability vector over class ids or a callable;
    ``phi`` a :class:`KernelSpec` or callable of the lag; ``kappa`` a
    callable of two marks (defaults to the identity kernel on class ids).
    """

    mu: float
    mark_density: object
    phi: object = KernelSpec(1.0)
    kappa: Callable | None = None
    h: str = "identity"
    h_scale: float = 1.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValidationError("mu must be positive")
        if self.h not in _LINKS:
            raise ValidationError(f"h must be one of {sorted(_LINKS)}")
        if not callable(self.mark_density):
            p = np.asarray(self.mark_density, dtype=np.float64)
            if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
                raise ValidationError("categorical mark density must be a probability vector")

    def density(self, m) -> float:
        if callable(self.mark_density):
            return float(self.mark_density(m))
        return float(np.asarray(self.mark_density)[int(m)])

    def temporal(self, lag: float) -> float:
        if isinstance(self.phi, KernelSpec):
            return temporal_kernel(self.phi, lag)
        return float(self.phi(lag))

    def mark_kernel(self, a, b) -> float:
        if self.kappa is None:
            return 1.0 if a == b else 0.0
        return float(self.kappa(a, b))


def nmhp_intensity(params: NmhpParams, history: EventSequence, t: float, m) -> float:
    times = history.times
    if len(times) and t < times[-1]:
        raise TimeBeforeHistory(f"query time {t} precedes history event at {times[-1]}")
    drive = params.mu * params.density(m)
    for tj, mj in zip(times, history.marks):
        if tj < t:
            mj = tuple(mj) if np.ndim(mj) else int(mj)
            drive += params.temporal(t - tj) * params.mark_kernel(m, mj)
    value = _LINKS[params.h](drive, params.h_scale)
    if value < 0:
        raise ValidationError("identity link produced a negative intensity; use a nonnegative link")
    return float(value)


def nmhp_log_likelihood(params: NmhpParams, seq: EventSequence, K: int) -> float:
    """Log-likelihood for categorical marks, integrating the ground intensity numerically."""
    from scipy.integrate import quad

    ll = 0.0
    for i in range(len(seq)):
        lam = nmhp_intensity(params, seq.prefix(i), float(seq.times[i]), int(seq.marks[i]))
        if lam <= 0:
            raise ZeroIntensityAtEvent(f"sequence {seq.id!r}: zero intensity at event {i}")
        ll += math.log(lam)
    edges = np.concatenate([[0.0], seq.times, [seq.horizon]])
    for i in range(len(edges) - 1):
        hist = seq.prefix(i)

        def ground(s, hist=hist):
            return sum(nmhp_intensity(params, hist, s, k) for k in range(K))

        ll -= quad(ground, edges[i], edges[i + 1], epsabs=1e-10, epsrel=1e-10, limit=200)[0]
    return ll
