"""Top-K recommendation plus the synthetic filter-bubble demonstration.

The fragmentation index measures how strongly recommendations stay inside a
user's own community: 1.0 means total segregation, about 1/C means none for
C equally sized communities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyInputError,
    IndexOutOfRangeError,
    InvalidParameterError,
)
from .model import FactorModel, check_dimensions
from .ratings import Rating, RatingMatrix


@dataclass(frozen=True)
class CommunityLabels:
    """Community id per user and per event; ids are 0..n_communities-1."""

    labels: tuple[int, ...]
    n_communities: int
    event_labels: tuple[int, ...]


@dataclass(frozen=True)
class RecommendationList:
    """Events for one user, ranked by descending predicted score."""

    user: int
    events: tuple[int, ...]
    scores: tuple[float, ...]


def top_k(
    model: FactorModel,
    matrix: RatingMatrix,
    u: int,
    k_recs: int,
    exclude_observed: bool = True,
) -> RecommendationList:
    """The k_recs highest-scoring events for user u.

    Ties break toward the lower event index. If fewer candidates exist than
    requested, all of them are returned.
    """
    check_dimensions(model, matrix)
    if not 0 <= u < model.n_users:
        raise IndexOutOfRangeError(f"user index {u} outside [0, {model.n_users})")
    if k_recs < 1:
        raise InvalidParameterError(f"k_recs must be >= 1, got {k_recs}")
    # per-event dots rather than one matvec so scores agree bit-for-bit
    # with predict()
    x = model.user_factors[u]
    scores = [float(row @ x) for row in model.event_factors]
    if exclude_observed:
        seen = matrix.events_by_user.get(u, frozenset())
        candidates = [i for i in range(model.n_events) if i not in seen]
    else:
        candidates = list(range(model.n_events))
    ranked = sorted(candidates, key=lambda i: (-scores[i], i))[:k_recs]
    return RecommendationList(
        user=u,
        events=tuple(ranked),
        scores=tuple(scores[i] for i in ranked),
    )


def synth_community_matrix(
    n_users: int,
    n_events: int,
    n_communities: int,
    in_rate: float,
    cross_rate: float,
    seed: int,
) -> tuple[RatingMatrix, CommunityLabels]:
    """Planted-community synthetic data.

    Users and events are assigned to communities round-robin. A matching
    (user, event) pair is observed with probability in_rate at a value
    uniform in [3, 5]; a non-matching pair with probability cross_rate at a
    value uniform in [1, 2]. Deterministic given the seed.
    """
    if n_users < 1 or n_events < 1 or n_communities < 1:
        raise InvalidParameterError("n_users, n_events, n_communities must all be >= 1")
    if not 0 <= cross_rate <= in_rate <= 1:
        raise InvalidParameterError(
            f"need 0 <= cross_rate <= in_rate <= 1, got cross={cross_rate}, in={in_rate}"
        )
    user_labels = np.arange(n_users) % n_communities
    event_labels = np.arange(n_events) % n_communities
    same = user_labels[:, None] == event_labels[None, :]

    rng = np.random.default_rng(seed)
    observed = rng.random((n_users, n_events)) < np.where(same, in_rate, cross_rate)
    values = np.where(
        same,
        rng.uniform(3.0, 5.0, size=same.shape),
        rng.uniform(1.0, 2.0, size=same.shape),
    )
    obs = tuple(
        Rating(int(u), int(i), float(values[u, i]))
        for u, i in zip(*np.nonzero(observed))
    )
    matrix = RatingMatrix(n_users=n_users, n_events=n_events, observations=obs)
    labels = CommunityLabels(
        labels=tuple(int(c) for c in user_labels),
        n_communities=n_communities,
        event_labels=tuple(int(c) for c in event_labels),
    )
    return matrix, labels


def fragmentation_index(recs: list[RecommendationList], labels: CommunityLabels) -> float:
    """Fraction of (user, recommended event) pairs inside one community."""
    total = 0
    matches = 0
    for rl in recs:
        if not 0 <= rl.user < len(labels.labels):
            raise IndexOutOfRangeError(f"user {rl.user} has no community label")
        own = labels.labels[rl.user]
        for ev in rl.events:
            if not 0 <= ev < len(labels.event_labels):
                raise IndexOutOfRangeError(f"event {ev} has no community label")
            total += 1
            if labels.event_labels[ev] == own:
                matches += 1
    if total == 0:
        raise EmptyInputError("no recommendation pairs to score")
    return matches / total


def engagement_round(
    matrix: RatingMatrix,
    model: FactorModel,
    accept_top: int,
    accept_value: float,
    seed: int | None = None,
) -> RatingMatrix:
    """Users engage with what they are shown: append each user's top
    accept_top unobserved recommendations as new observations.

    Existing observations are never altered. The acceptance rule is
    deterministic; `seed` is accepted for interface stability and unused.
    """
    check_dimensions(model, matrix)
    if accept_top < 1:
        raise InvalidParameterError(f"accept_top must be >= 1, got {accept_top}")
    if accept_value <= 0:
        raise InvalidParameterError(f"accept_value must be > 0, got {accept_value}")
    new_obs: list[Rating] = []
    for u in range(matrix.n_users):
        recs = top_k(model, matrix, u, accept_top, exclude_observed=True)
        new_obs.extend(Rating(u, ev, float(accept_value)) for ev in recs.events)
    merged = tuple(sorted(
        matrix.observations + tuple(new_obs), key=lambda o: (o.user, o.event)
    ))
    return RatingMatrix(matrix.n_users, matrix.n_events, merged)
