"""Latent-factor model: per-user and per-event vectors whose dot products
approximate observed ratings, plus the regularized squared-error objective.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatchError,
    IndexOutOfRangeError,
    InvalidDimensionError,
    InvalidParameterError,
    ParseError,
)
from .ratings import RatingMatrix


@dataclass(eq=False)
class FactorModel:
    """k-dimensional factors for every user row and event column.

    Mutable by design: the trainer updates the factor arrays in place on its
    private copy. Everything else treats a model as read-only.
    """

    k: int
    gamma: float
    user_factors: np.ndarray = field(repr=False)
    event_factors: np.ndarray = field(repr=False)

    @property
    def n_users(self) -> int:
        return self.user_factors.shape[0]

    @property
    def n_events(self) -> int:
        return self.event_factors.shape[0]

    def copy(self) -> "FactorModel":
        return FactorModel(
            k=self.k,
            gamma=self.gamma,
            user_factors=self.user_factors.copy(),
            event_factors=self.event_factors.copy(),
        )


def init_model(
    n_users: int, n_events: int, k: int, gamma: float, seed: int, scale: float = 0.1
) -> FactorModel:
    """Fresh model with entries drawn uniformly from [-scale, +scale]."""
    if n_users < 1 or n_events < 1 or k < 1:
        raise InvalidDimensionError(
            f"need n_users, n_events, k >= 1, got ({n_users}, {n_events}, {k})"
        )
    if gamma < 0:
        raise InvalidParameterError(f"gamma must be >= 0, got {gamma}")
    if scale <= 0:
        raise InvalidParameterError(f"init scale must be > 0, got {scale}")
    rng = np.random.default_rng(seed)
    return FactorModel(
        k=k,
        gamma=float(gamma),
        user_factors=rng.uniform(-scale, scale, size=(n_users, k)),
        event_factors=rng.uniform(-scale, scale, size=(n_events, k)),
    )


def check_dimensions(model: FactorModel, matrix: RatingMatrix) -> None:
    if model.n_users != matrix.n_users or model.n_events != matrix.n_events:
        raise DimensionMismatchError(
            f"model is {model.n_users}x{model.n_events}, "
            f"matrix is {matrix.n_users}x{matrix.n_events}"
        )


def predict(model: FactorModel, u: int, i: int) -> float:
    """Predicted engagement for (user u, event i): the factor dot product."""
    if not 0 <= u < model.n_users:
        raise IndexOutOfRangeError(f"user index {u} outside [0, {model.n_users})")
    if not 0 <= i < model.n_events:
        raise IndexOutOfRangeError(f"event index {i} outside [0, {model.n_events})")
    return float(model.user_factors[u] @ model.event_factors[i])


def l2_penalty(model: FactorModel) -> float:
    """Sum of squared factor entries over all rows (gamma not applied)."""
    uf = model.user_factors
    ef = model.event_factors
    return float(np.sum(uf * uf) + np.sum(ef * ef))


def objective(model: FactorModel, matrix: RatingMatrix) -> float:
    """Squared error over observed cells plus gamma times the L2 penalty.

    The penalty covers every user and event row, observed or not.
    Observations are accumulated in ascending (user, event) order so the
    value is reproducible run to run.
    """
    check_dimensions(model, matrix)
    users, events, values = matrix.arrays
    preds = np.einsum("ij,ij->i", model.user_factors[users], model.event_factors[events])
    resid = values - preds
    return float(resid @ resid) + model.gamma * l2_penalty(model)


def save_model(model: FactorModel, path: str | Path) -> None:
    """Serialize to JSON; float round-trip is exact."""
    doc = {
        "k": model.k,
        "gamma": model.gamma,
        "user_factors": model.user_factors.tolist(),
        "event_factors": model.event_factors.tolist(),
    }
    Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> FactorModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        k = int(doc["k"])
        gamma = float(doc["gamma"])
        uf = np.array(doc["user_factors"], dtype=np.float64)
        ef = np.array(doc["event_factors"], dtype=np.float64)
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: not a valid model file ({exc})") from exc
    if uf.ndim != 2 or ef.ndim != 2 or uf.shape[1] != k or ef.shape[1] != k:
        raise DimensionMismatchError(
            f"{path}: factor shapes {uf.shape}/{ef.shape} inconsistent with k={k}"
        )
    if k < 1:
        raise InvalidDimensionError(f"{path}: k must be >= 1, got {k}")
    if gamma < 0 or not math.isfinite(gamma):
        raise InvalidParameterError(f"{path}: gamma must be finite and >= 0, got {gamma}")
    if not (np.isfinite(uf).all() and np.isfinite(ef).all()):
        raise ParseError(f"{path}: factor entries must be finite")
    return FactorModel(k=k, gamma=gamma, user_factors=uf, event_factors=ef)
