"""Information-theoretic primitives behind candidate selection.

All quantities are computed in nats (natural log).  The selection score for
a candidate document labeled by m classifiers with output distributions
P_1 ... P_m is

    score = (prod_i (1 - Hhat(P_i)) + alpha) / (GJS(P_1 ... P_m) + alpha)

where Hhat is entropy normalized by its maximum log(n), GJS is the
generalized Jensen-Shannon distance H(mean_i P_i) - mean_i H(P_i), and
alpha > 0 is a smoothing factor.  The numerator grows with classifier
confidence, the denominator with disagreement between the classifiers, so
the score is high exactly when independently trained classifiers are
confident *and* consistent.  The formula never inspects the class count, so
binary and multi-class problems share one code path.

All functions are pure; they can be called from any number of workers with
no shared state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from ._kernels import (
    BACKEND,
    entropy_rows,
    gjs_rows,
    normalized_entropy_rows,
    score_rows,
)
from .errors import ValidationError

__all__ = [
    "BACKEND",
    "ScoreParams",
    "validate_distribution",
    "shannon_entropy",
    "normalized_entropy",
    "gjs",
    "score",
    "entropy_rows",
    "normalized_entropy_rows",
    "gjs_rows",
    "score_rows",
]

#: Absolute tolerance on the probability sum; softmax outputs carry rounding error.
SUM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ScoreParams:
    """Smoothing factor for the selection score; must be positive."""

    alpha: float = 1e-4

    def __post_init__(self):
        if not self.alpha > 0.0:
            raise ValidationError(f"alpha must be > 0, got {self.alpha}")


def validate_distribution(p, *, min_classes: int = 2) -> np.ndarray:
    """Check that ``p`` is a probability vector and return it as float64.

    Raises ValidationError for non-1D input, fewer than ``min_classes``
    entries, negative entries, or a sum off 1 by more than ``SUM_TOLERANCE``.
    """
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"distribution must be 1-D, got shape {arr.shape}")
    if arr.shape[0] < min_classes:
        raise ValidationError(
            f"distribution needs at least {min_classes} classes, got {arr.shape[0]}"
        )
    if np.any(arr < 0.0):
        raise ValidationError(f"distribution has negative entries: {arr}")
    total = float(arr.sum())
    if abs(total - 1.0) > SUM_TOLERANCE:
        raise ValidationError(f"distribution sums to {total!r}, expected 1 +/- {SUM_TOLERANCE}")
    return arr


def _validate_stack(dists: Sequence) -> np.ndarray:
    """Validate m >= 2 equal-length distributions and stack them as (m, 1, n)."""
    if len(dists) < 2:
        raise ValidationError(f"need at least 2 distributions, got {len(dists)}")
    rows = [validate_distribution(d) for d in dists]
    n = rows[0].shape[0]
    for i, row in enumerate(rows[1:], start=1):
        if row.shape[0] != n:
            raise ValidationError(
                f"distribution lengths differ: index 0 has {n}, index {i} has {row.shape[0]}"
            )
    return np.stack(rows)[:, None, :]


def shannon_entropy(p) -> float:
    """Shannon entropy -sum(p * ln p) in nats, with 0*ln(0) = 0."""
    arr = validate_distribution(p)
    return float(entropy_rows(arr[None, :])[0])


def normalized_entropy(p) -> float:
    """Entropy divided by its maximum ln(n); lies in [0, 1] and is base-invariant.

    0 exactly on a one-hot vector, 1 on the uniform distribution.
    """
    arr = validate_distribution(p)
    return float(normalized_entropy_rows(arr[None, :])[0])


def gjs(dists: Sequence) -> float:
    """Generalized Jensen-Shannon distance of m >= 2 distributions.

    H(mean) - mean(H); zero iff all inputs coincide, and invariant under
    permutation of the input list.
    """
    return float(gjs_rows(_validate_stack(dists))[0])


def score(dists: Sequence, params: ScoreParams | None = None) -> float:
    """Selection score of a candidate given m >= 2 classifier distributions.

    Always positive: bounded below by alpha / (ln(n) + alpha) and above by
    (1 + alpha) / alpha, the value attained when all classifiers emit the
    same one-hot vector.
    """
    if params is None:
        params = ScoreParams()
    return float(score_rows(_validate_stack(dists), params.alpha)[0])
