"""Event-sequence data model, JSONL ingestion/emission and dataset splitting."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

import numpy as np

from gchp.errors import (
    HorizonViolation,
    IoFailure,
    MalformedLine,
    MarkOutOfRange,
    NonMonotoneTimes,
    TooFewSequences,
    ValidationError,
)

Mark = Union[int, tuple]


@dataclass(frozen=True)
class MarkKind:
    """Declared mark space: ``categorical`` with ``size`` classes or ``vector`` of length ``size``."""

    kind: str
    size: int

    def __post_init__(self):
        if self.kind not in ("categorical", "vector"):
            raise ValidationError(f"unknown mark kind {self.kind!r}")
        if int(self.size) < 1:
            raise ValidationError(f"mark size must be positive, got {self.size}")

    @classmethod
    def categorical(cls, K: int) -> "MarkKind":
        return cls("categorical", int(K))

    @classmethod
    def vector(cls, p: int) -> "MarkKind":
        return cls("vector", int(p))

    @property
    def is_categorical(self) -> bool:
        return self.kind == "categorical"


@dataclass(frozen=True)
class Event:
    t: float
    mark: Mark


class EventSequence:
    """Strictly increasing event times on ``[0, horizon]`` with their marks.

    Times and marks are kept as read-only numpy arrays: ``marks`` is an int
    vector for categorical data and an ``(N, p)`` float matrix for vector marks.
    """

    __slots__ = ("id", "horizon", "times", "marks")

    def __init__(self, id: str, horizon: float, times, marks, *, validate: bool = True):
        times = np.array(times, dtype=np.float64).reshape(-1)
        marks = np.array(marks)
        if marks.ndim == 2:
            marks = marks.astype(np.float64)
        else:
            marks = marks.astype(np.int64).reshape(-1)
        if len(marks) != len(times):
            raise ValidationError(f"sequence {id!r}: {len(times)} times but {len(marks)} marks")
        times.setflags(write=False)
        marks.setflags(write=False)
        object.__setattr__(self, "id", str(id))
        object.__setattr__(self, "horizon", float(horizon))
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "marks", marks)
        if validate:
            self._check_times()

    def __setattr__(self, name, value):
        raise AttributeError("EventSequence is immutable")

    def _check_times(self):
        T = self.horizon
        if not (math.isfinite(T) and T > 0):
            raise HorizonViolation(self.id, f"horizon must be positive and finite, got {T}")
        t = self.times
        if len(t) == 0:
            return
        if not np.all(np.isfinite(t)):
            bad = int(np.flatnonzero(~np.isfinite(t))[0])
            raise HorizonViolation(self.id, f"event {bad} has a non-finite time")
        if t[0] < 0:
            raise HorizonViolation(self.id, "event 0 precedes time 0")
        steps = np.diff(t)
        if np.any(steps <= 0):
            raise NonMonotoneTimes(self.id, int(np.flatnonzero(steps <= 0)[0]) + 1)
        if t[-1] > T:
            raise HorizonViolation(self.id, f"last event at {t[-1]} exceeds horizon {T}")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def events(self) -> list[Event]:
        return list(self)

    def __iter__(self) -> Iterator[Event]:
        vector = self.marks.ndim == 2
        for t, mk in zip(self.times, self.marks):
            yield Event(float(t), tuple(float(v) for v in mk) if vector else int(mk))

    def interarrivals(self) -> np.ndarray:
        """Gaps ``t_i - t_{i-1}`` with ``t_0 = 0``."""
        return np.diff(self.times, prepend=0.0)

    def prefix(self, n: int) -> "EventSequence":
        return EventSequence(self.id, self.horizon, self.times[:n], self.marks[:n], validate=False)

    def __eq__(self, other):
        if not isinstance(other, EventSequence):
            return NotImplemented
        return (
            self.id == other.id
            and self.horizon == other.horizon
            and self.marks.shape == other.marks.shape
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.marks, other.marks)
        )

    def __repr__(self):
        return f"EventSequence(id={self.id!r}, horizon={self.horizon}, n={len(self)})"


class Dataset:
    """A collection of sequences sharing one declared mark space."""

    __slots__ = ("sequences", "mark_kind")

    def __init__(self, sequences: Sequence[EventSequence], mark_kind: MarkKind):
        seqs = tuple(sequences)
        for seq in seqs:
            _check_marks(seq, mark_kind)
        object.__setattr__(self, "sequences", seqs)
        object.__setattr__(self, "mark_kind", mark_kind)

    def __setattr__(self, name, value):
        raise AttributeError("Dataset is immutable")

    def __len__(self) -> int:
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)

    def __getitem__(self, i):
        return self.sequences[i]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.mark_kind == other.mark_kind and self.sequences == other.sequences

    @property
    def n_events(self) -> int:
        return sum(len(s) for s in self.sequences)

    @property
    def total_horizon(self) -> float:
        return float(sum(s.horizon for s in self.sequences))

    def __repr__(self):
        return f"Dataset({len(self)} sequences, {self.n_events} events, {self.mark_kind})"


def _check_marks(seq: EventSequence, kind: MarkKind) -> None:
    m = seq.marks
    if kind.is_categorical:
        if m.ndim != 1:
            raise MarkOutOfRange(seq.id, 0, "vector mark in a categorical dataset")
        bad = np.flatnonzero((m < 0) | (m >= kind.size))
        if len(bad):
            raise MarkOutOfRange(seq.id, int(bad[0]), f"class id {int(m[bad[0]])} not in [0, {kind.size})")
    else:
        if len(m) == 0:
            return
        if m.ndim != 2 or m.shape[1] != kind.size:
            raise MarkOutOfRange(seq.id, 0, f"vector marks must have length {kind.size}")
        if not np.all(np.isfinite(m)):
            raise MarkOutOfRange(seq.id, int(np.flatnonzero(~np.isfinite(m).all(axis=1))[0]), "non-finite entry")


# ---------------------------------------------------------------- JSONL


def _reject_constant(name):
    raise ValueError(f"non-finite number {name}")


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _parse_record(line: str, line_no: int, kind: MarkKind) -> EventSequence:
    try:
        rec = json.loads(line, parse_constant=_reject_constant)
    except ValueError as exc:
        raise MalformedLine(line_no, f"invalid JSON ({exc})") from None
    if not isinstance(rec, dict):
        raise MalformedLine(line_no, "record is not an object")
    if set(rec) != {"id", "T", "events"}:
        extra = sorted(set(rec) - {"id", "T", "events"})
        missing = sorted({"id", "T", "events"} - set(rec))
        raise MalformedLine(line_no, f"unknown keys {extra}" if extra else f"missing keys {missing}")
    seq_id, T, events = rec["id"], rec["T"], rec["events"]
    if not isinstance(seq_id, str):
        raise MalformedLine(line_no, "'id' must be a string")
    if not _is_number(T):
        raise MalformedLine(line_no, "'T' must be a number")
    if not isinstance(events, list):
        raise MalformedLine(line_no, "'events' must be a list")

    mark_key = "k" if kind.is_categorical else "x"
    times, marks = [], []
    for j, ev in enumerate(events):
        if not isinstance(ev, dict) or set(ev) != {"t", mark_key}:
            raise MalformedLine(line_no, f"event {j} must have exactly keys 't' and {mark_key!r}")
        t, mk = ev["t"], ev[mark_key]
        if not _is_number(t):
            raise MalformedLine(line_no, f"event {j}: 't' must be a number")
        if kind.is_categorical:
            if not isinstance(mk, int) or isinstance(mk, bool):
                raise MalformedLine(line_no, f"event {j}: 'k' must be an integer")
            if not 0 <= mk < kind.size:
                raise MarkOutOfRange(seq_id, j, f"class id {mk} not in [0, {kind.size})")
        else:
            if not isinstance(mk, list) or not all(_is_number(v) for v in mk):
                raise MalformedLine(line_no, f"event {j}: 'x' must be a list of numbers")
            if len(mk) != kind.size:
                raise MarkOutOfRange(seq_id, j, f"vector length {len(mk)} != {kind.size}")
        times.append(float(t))
        marks.append(mk)
    if kind.is_categorical:
        mark_arr = np.array(marks, dtype=np.int64)
    else:
        mark_arr = np.array(marks, dtype=np.float64).reshape(len(marks), kind.size)
    return EventSequence(seq_id, float(T), times, mark_arr)


def parse_jsonl(path: str | os.PathLike, mark_kind: MarkKind) -> Dataset:
    """Read one sequence per line; blank lines are skipped."""
    sequences = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot open {path}: {exc}") from None
    with fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            sequences.append(_parse_record(line, line_no, mark_kind))
    return Dataset(sequences, mark_kind)


def sequence_to_json(seq: EventSequence) -> str:
    if seq.marks.ndim == 1:
        events = [{"t": float(t), "k": int(k)} for t, k in zip(seq.times, seq.marks)]
    else:
        events = [{"t": float(t), "x": [float(v) for v in x]} for t, x in zip(seq.times, seq.marks)]
    # json emits floats via repr, which round-trips doubles exactly
    return json.dumps({"id": seq.id, "T": seq.horizon, "events": events}, allow_nan=False)


def write_jsonl(dataset: Dataset, path: str | os.PathLike) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for seq in dataset:
                fh.write(sequence_to_json(seq))
                fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from None


def split(dataset: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Partition whole sequences into (train, test); original order is kept inside each part."""
    n = len(dataset)
    if n < 2:
        raise TooFewSequences(f"need at least 2 sequences to split, got {n}")
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n_train = min(max(int(round(train_fraction * n)), 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return (
        Dataset([dataset[i] for i in train_idx], dataset.mark_kind),
        Dataset([dataset[i] for i in test_idx], dataset.mark_kind),
    )
