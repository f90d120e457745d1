"""Sparse user x event rating matrix: construction, CSV I/O, holdout splits.

A zero value means "never engaged", so zero-valued triplets are dropped at
construction and every stored observation carries a strictly positive value.
Matrices are immutable once built; all mutation-looking operations return a
new matrix.
"""

from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DuplicateEntryError,
    EmptyInputError,
    IndexOutOfRangeError,
    InvalidParameterError,
    InvalidValueError,
    ParseError,
)

_HEADER_RE = re.compile(r"^#\s*users\s*=\s*(\d+)\s+events\s*=\s*(\d+)\s*$")


@dataclass(frozen=True)
class Rating:
    """One observed engagement: user row, event column, positive strength."""

    user: int
    event: int
    value: float


@dataclass(frozen=True)
class RatingMatrix:
    """Immutable sparse matrix of observations, sorted by (user, event).

    Build instances through :func:`from_triplets` or :func:`load_csv`; the
    raw constructor skips validation and is reserved for internal callers
    that already hold a sorted, deduplicated observation tuple.
    """

    n_users: int
    n_events: int
    observations: tuple[Rating, ...]

    @property
    def density(self) -> float:
        cells = self.n_users * self.n_events
        return len(self.observations) / cells if cells else 0.0

    def __len__(self) -> int:
        return len(self.observations)

    @cached_property
    def events_by_user(self) -> dict[int, frozenset[int]]:
        """Observed event indices keyed by user (absent user: no events)."""
        seen: dict[int, set[int]] = {}
        for obs in self.observations:
            seen.setdefault(obs.user, set()).add(obs.event)
        return {u: frozenset(evs) for u, evs in seen.items()}

    @cached_property
    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(users, events, values) as parallel numpy arrays, sorted order."""
        users = np.fromiter((o.user for o in self.observations), dtype=np.int64, count=len(self))
        events = np.fromiter((o.event for o in self.observations), dtype=np.int64, count=len(self))
        values = np.fromiter((o.value for o in self.observations), dtype=np.float64, count=len(self))
        return users, events, values


def from_triplets(
    triplets: Iterable[tuple[int, int, float]], n_users: int, n_events: int
) -> RatingMatrix:
    """Build a matrix from (user, event, value) triplets.

    Zero-valued triplets are dropped (unobserved). Exact duplicate triplets
    collapse to one observation; the same (user, event) with differing
    values is an error. Input order does not matter.
    """
    if n_users < 0 or n_events < 0:
        raise InvalidParameterError("matrix dimensions must be non-negative")
    seen: dict[tuple[int, int], float] = {}
    for user, event, value in triplets:
        user = int(user)
        event = int(event)
        if not 0 <= user < n_users:
            raise IndexOutOfRangeError(f"user index {user} outside [0, {n_users})")
        if not 0 <= event < n_events:
            raise IndexOutOfRangeError(f"event index {event} outside [0, {n_events})")
        value = float(value)
        if not math.isfinite(value) or value < 0:
            raise InvalidValueError(f"rating value must be finite and >= 0, got {value}")
        key = (user, event)
        if key in seen and seen[key] != value:
            raise DuplicateEntryError(
                f"duplicate entry for user {user}, event {event}: {seen[key]} vs {value}"
            )
        seen[key] = value
    obs = tuple(
        Rating(u, e, v) for (u, e), v in sorted(seen.items()) if v != 0.0
    )
    return RatingMatrix(n_users=n_users, n_events=n_events, observations=obs)


def load_csv(path: str | Path) -> RatingMatrix:
    """Read a matrix from a `user,event,value` CSV file.

    Lines starting with `#` are comments; a `# users=N events=M` line pins
    the dimensions, which are otherwise inferred as max index + 1. A file
    with neither data rows nor a dimension header is rejected as empty.
    """
    path = Path(path)
    triplets: list[tuple[int, int, float]] = []
    header_dims: tuple[int, int] | None = None
    max_user = -1
    max_event = -1
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = _HEADER_RE.match(line)
            if m:
                header_dims = (int(m.group(1)), int(m.group(2)))
            continue
        fields = line.split(",")
        if len(fields) != 3:
            raise ParseError(f"expected 3 comma-separated fields, got {len(fields)}", lineno)
        try:
            user = int(fields[0])
            event = int(fields[1])
            value = float(fields[2])
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from exc
        triplets.append((user, event, value))
        max_user = max(max_user, user)
        max_event = max(max_event, event)
    if not triplets and header_dims is None:
        raise EmptyInputError(f"{path}: no observations and no dimension header")
    if header_dims is not None:
        n_users, n_events = header_dims
    else:
        n_users, n_events = max_user + 1, max_event + 1
    return from_triplets(triplets, n_users, n_events)


def write_csv(matrix: RatingMatrix, path: str | Path) -> None:
    """Write the matrix in the format load_csv reads, dimensions included."""
    lines = [f"# users={matrix.n_users} events={matrix.n_events}"]
    lines.extend(f"{o.user},{o.event},{o.value!r}" for o in matrix.observations)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def split_holdout(
    matrix: RatingMatrix, fraction: float, seed: int
) -> tuple[RatingMatrix, RatingMatrix]:
    """Split observations into disjoint (train, test) matrices.

    The test set holds round(fraction * |observations|) entries sampled
    without replacement; both halves keep the original dimensions. The
    split is deterministic given the seed.
    """
    if not 0 <= fraction < 1:
        raise InvalidParameterError(f"holdout fraction must be in [0, 1), got {fraction}")
    n = len(matrix.observations)
    n_test = int(round(fraction * n))
    rng = random.Random(seed)
    test_idx = frozenset(rng.sample(range(n), n_test))
    train_obs = tuple(o for i, o in enumerate(matrix.observations) if i not in test_idx)
    test_obs = tuple(o for i, o in enumerate(matrix.observations) if i in test_idx)
    train = RatingMatrix(matrix.n_users, matrix.n_events, train_obs)
    test = RatingMatrix(matrix.n_users, matrix.n_events, test_obs)
    return train, test


def filter_users(matrix: RatingMatrix, keep: Sequence[int] | frozenset[int]) -> RatingMatrix:
    """Matrix restricted to observations of the given users, same shape."""
    keep = frozenset(keep)
    obs = tuple(o for o in matrix.observations if o.user in keep)
    return RatingMatrix(matrix.n_users, matrix.n_events, obs)
