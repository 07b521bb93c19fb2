"""Trimmed histories and their attributed graphs.

Each event gets a window of the ``m`` most recent prior events, front-padded
when the history is shorter.  Padded nodes carry a unit self-loop and no
other edges, so degrees stay positive and real nodes are unaffected.

Feature rows are ``one_hot(mark) + [log(1 + dt)]`` where ``dt`` is measured
from the most recent history event (the moment the prediction is made), not
from the target event, so the target interarrival never leaks into X.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gchp.errors import ValidationError, ZeroDegreeRow
from gchp.events import Dataset, EventSequence, MarkKind

ADJACENCIES = ("phi", "phi_hadamard_gram")


@dataclass(frozen=True)
class KernelSpec:
    bandwidth: float = 1.0
    family: str = "gaussian-rbf"

    def __post_init__(self):
        if self.family != "gaussian-rbf":
            raise ValidationError(f"unsupported kernel family {self.family!r}")
        if not (self.bandwidth > 0 and np.isfinite(self.bandwidth)):
            raise ValidationError(f"kernel bandwidth must be positive, got {self.bandwidth}")


@dataclass(frozen=True)
class GraphSpec:
    """Everything needed to turn a trimmed history into model inputs."""

    m: int = 10
    bandwidth: float = 1.0
    adjacency: str = "phi"
    mark_bandwidth: float = 1.0

    def __post_init__(self):
        if int(self.m) < 1:
            raise ValidationError(f"window length m must be >= 1, got {self.m}")
        if self.adjacency not in ADJACENCIES:
            raise ValidationError(f"adjacency must be one of {ADJACENCIES}, got {self.adjacency!r}")
        KernelSpec(self.bandwidth)
        if not self.mark_bandwidth > 0:
            raise ValidationError("mark_bandwidth must be positive")

    @property
    def kernel(self) -> KernelSpec:
        return KernelSpec(self.bandwidth)


@dataclass(frozen=True)
class Window:
    """Trimmed history of one event plus its prediction target."""

    times: np.ndarray  # real history times, oldest first, len <= m
    marks: np.ndarray
    m: int
    target_tau: float
    target_mark: object
    ref_time: float  # time of the latest history event (0 when empty)

    @property
    def pad_count(self) -> int:
        return self.m - len(self.times)


@dataclass(frozen=True)
class WindowSample:
    m: int
    X: np.ndarray
    Phi: np.ndarray
    PhiNorm: np.ndarray
    pad_count: int
    target_tau: float
    target_mark: object


def temporal_kernel(spec: KernelSpec, delta):
    """Gaussian RBF exp(-delta^2 / (2 h^2)); 1 at delta = 0."""
    d = np.asarray(delta, dtype=np.float64)
    out = np.exp(-(d * d) / (2.0 * spec.bandwidth**2))
    return float(out) if np.ndim(delta) == 0 else out


def extract_windows(seq: EventSequence, m: int) -> list[Window]:
    if m < 1:
        raise ValidationError(f"window length m must be >= 1, got {m}")
    taus = seq.interarrivals()
    out = []
    for i in range(len(seq)):
        lo = max(0, i - m)
        times = seq.times[lo:i]
        out.append(
            Window(
                times=times,
                marks=seq.marks[lo:i],
                m=m,
                target_tau=float(taus[i]),
                target_mark=seq.marks[i] if seq.marks.ndim == 2 else int(seq.marks[i]),
                ref_time=float(times[-1]) if len(times) else 0.0,
            )
        )
    return out


def build_similarity_graph(times, spec: KernelSpec, m: int) -> np.ndarray:
    """m x m similarity graph over (front-padded) window times."""
    times = np.asarray(times, dtype=np.float64)
    n = len(times)
    if n > m:
        raise ValidationError(f"window has {n} events but m = {m}")
    Phi = np.eye(m)
    if n:
        Phi[m - n :, m - n :] = temporal_kernel(spec, times[:, None] - times[None, :])
    return Phi


def symmetric_normalize(Phi: np.ndarray) -> np.ndarray:
    """D^{-1/2} Phi D^{-1/2} with D the row-sum degree matrix; works on stacks too."""
    Phi = np.asarray(Phi, dtype=np.float64)
    deg = Phi.sum(axis=-1)
    if np.any(~(deg > 0)):
        raise ZeroDegreeRow("graph has a row with non-positive degree")
    s = 1.0 / np.sqrt(deg)
    return Phi * s[..., :, None] * s[..., None, :]


def mark_rows(marks, mark_kind: MarkKind, m: int) -> np.ndarray:
    """Front-padded mark encodings (one-hot or raw vectors); padded rows are zero."""
    marks = np.asarray(marks)
    n = len(marks)
    out = np.zeros((m, mark_kind.size))
    if n:
        if mark_kind.is_categorical:
            out[np.arange(m - n, m), marks.astype(np.int64)] = 1.0
        else:
            out[m - n :] = marks
    return out


def encode_features(times, marks, ref_time: float, mark_kind: MarkKind, m: int) -> np.ndarray:
    """Rows ``[mark encoding ; log(1 + (ref_time - t_j))]``; padded rows all zero."""
    times = np.asarray(times, dtype=np.float64)
    X = np.zeros((m, mark_kind.size + 1))
    X[:, :-1] = mark_rows(marks, mark_kind, m)
    n = len(times)
    if n:
        X[m - n :, -1] = np.log1p(ref_time - times)
    return X


def mark_gram(X_marks: np.ndarray, bandwidth: float) -> np.ndarray:
    """Gaussian RBF Gram matrix of mark rows; stacks of windows are fine too."""
    if not bandwidth > 0:
        raise ValidationError("mark bandwidth must be positive")
    X = np.asarray(X_marks, dtype=np.float64)
    sq = np.sum(X * X, axis=-1)
    d2 = sq[..., :, None] + sq[..., None, :] - 2.0 * X @ np.swapaxes(X, -1, -2)
    np.maximum(d2, 0.0, out=d2)
    K = np.exp(-d2 / (2.0 * bandwidth**2))
    idx = np.arange(X.shape[-2])
    K[..., idx, idx] = 1.0
    return K


def adjacency_matrix(Phi, marks_enc, spec: GraphSpec) -> np.ndarray:
    """Normalized adjacency used by the GCN layers (Phi or Phi * Gram)."""
    if spec.adjacency == "phi_hadamard_gram":
        Phi = Phi * mark_gram(marks_enc, spec.mark_bandwidth)
    return symmetric_normalize(Phi)


def build_sample(window: Window, spec: GraphSpec, mark_kind: MarkKind) -> WindowSample:
    Phi = build_similarity_graph(window.times, spec.kernel, window.m)
    enc = mark_rows(window.marks, mark_kind, window.m)
    return WindowSample(
        m=window.m,
        X=encode_features(window.times, window.marks, window.ref_time, mark_kind, window.m),
        Phi=Phi,
        PhiNorm=adjacency_matrix(Phi, enc, spec),
        pad_count=window.pad_count,
        target_tau=window.target_tau,
        target_mark=window.target_mark,
    )


def build_samples(seq: EventSequence, spec: GraphSpec, mark_kind: MarkKind) -> list[WindowSample]:
    return [build_sample(w, spec, mark_kind) for w in extract_windows(seq, spec.m)]


# ------------------------------------------------------------ batched path


@dataclass(frozen=True)
class WindowBatch:
    """All windows of a dataset stacked for vectorized forward passes."""

    X: np.ndarray  # (n, m, p_feat)
    A: np.ndarray  # (n, m, m) normalized adjacency
    tau: np.ndarray  # (n,)
    marks: np.ndarray  # (n,) class ids, or (n, p) for vector marks
    seq_index: np.ndarray  # (n,) owning sequence
    event_index: np.ndarray  # (n,) position inside the sequence

    def __len__(self) -> int:
        return len(self.tau)

    def take(self, idx) -> "WindowBatch":
        return WindowBatch(
            self.X[idx], self.A[idx], self.tau[idx], self.marks[idx], self.seq_index[idx], self.event_index[idx]
        )


def build_batch(dataset: Dataset, spec: GraphSpec) -> WindowBatch:
    """Vectorized equivalent of ``build_samples`` over every sequence."""
    m, kind = spec.m, dataset.mark_kind
    p_feat = kind.size + 1
    Xs, As, taus, marks, sidx, eidx = [], [], [], [], [], []
    for s, seq in enumerate(dataset):
        n = len(seq)
        if n == 0:
            continue
        # history slot j (0..m-1) of event i holds event i - m + j, invalid when negative
        hist = np.arange(n)[:, None] - m + np.arange(m)[None, :]
        valid = hist >= 0
        safe = np.where(valid, hist, 0)
        t = np.where(valid, seq.times[safe], 0.0)
        last = np.arange(n) - 1
        ref = np.where(last >= 0, seq.times[np.maximum(last, 0)], 0.0)

        X = np.zeros((n, m, p_feat))
        if kind.is_categorical:
            onehot = np.eye(kind.size)[seq.marks[safe]]
            X[..., :-1] = onehot * valid[..., None]
        else:
            X[..., :-1] = seq.marks[safe] * valid[..., None]
        X[..., -1] = np.where(valid, np.log1p(np.maximum(ref[:, None] - t, 0.0)), 0.0)

        d = t[:, :, None] - t[:, None, :]
        Phi = np.exp(-(d * d) / (2.0 * spec.bandwidth**2))
        both = valid[:, :, None] & valid[:, None, :]
        Phi = np.where(both, Phi, 0.0)
        diag = np.arange(m)
        Phi[:, diag, diag] = 1.0
        A = adjacency_matrix(Phi, X[..., :-1], spec)

        Xs.append(X)
        As.append(A)
        taus.append(seq.interarrivals())
        marks.append(seq.marks)
        sidx.append(np.full(n, s))
        eidx.append(np.arange(n))
    if not Xs:
        empty_marks = np.zeros(0, dtype=np.int64) if kind.is_categorical else np.zeros((0, kind.size))
        return WindowBatch(
            np.zeros((0, m, p_feat)), np.zeros((0, m, m)), np.zeros(0), empty_marks,
            np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64),
        )
    return WindowBatch(
        np.concatenate(Xs), np.concatenate(As), np.concatenate(taus), np.concatenate(marks),
        np.concatenate(sidx), np.concatenate(eidx),
    )


def median_interarrival(dataset: Dataset) -> float:
    taus = np.concatenate([s.interarrivals() for s in dataset] or [np.zeros(0)])
    if len(taus) == 0:
        raise ValidationError("cannot take the median interarrival of an empty dataset")
    return float(np.median(taus))
