"""Point estimators over realized walk samples."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError
from .graph_core import NodeFeature
from .referral_tree import ReferralForest

__all__ = [
    "WalkSample",
    "sample_mean",
    "vh_estimator",
    "ht_estimator",
    "pi_transform",
]


@dataclass(frozen=True, eq=False)
class WalkSample:
    """One realized tree-indexed sample.

    `assignment[tau]` is the graph node observed at tree node tau (in the
    tree's internal order), `y_values` the feature there.  Degree arrays
    are present when the walk came from a graph; kernel-only walks leave
    them as None.  `budget_met` is False when a without-replacement run
    exhausted the graph before filling its budget.
    """

    assignment: np.ndarray
    tree: ReferralForest
    y_values: np.ndarray | None = None
    degrees: np.ndarray | None = None
    weighted_degrees: np.ndarray | None = None
    budget_met: bool = True

    def __post_init__(self):
        object.__setattr__(
            self, "assignment", np.asarray(self.assignment, dtype=np.int64)
        )
        if len(self.assignment) != self.tree.n:
            raise ValidationError("assignment length must equal tree size")

    @property
    def n(self) -> int:
        return len(self.assignment)

    def with_feature(self, feature: NodeFeature) -> "WalkSample":
        """The same sample, re-read through another node feature."""
        return replace(self, y_values=feature.values[self.assignment])


def _require_y(ws: WalkSample) -> np.ndarray:
    if ws.y_values is None:
        raise ValidationError("sample carries no feature values")
    return ws.y_values


def sample_mean(ws: WalkSample) -> float:
    """Plain average of the observed feature values."""
    return float(np.mean(_require_y(ws)))


def vh_estimator(
    ws: WalkSample, weighted: bool = False, mean_inverse_degree: float | None = None
) -> float:
    """Degree-reweighted (self-normalized) mean: sum(Y/deg) / sum(1/deg).

    Uses unweighted degrees unless `weighted` is set.  When the population
    value of E_pi[1/deg] is known, passing it as `mean_inverse_degree`
    replaces the data-driven denominator by n times that value, which turns
    the estimator into its idealized inverse-probability form.
    """
    y = _require_y(ws)
    deg = ws.weighted_degrees if weighted else ws.degrees
    if deg is None:
        raise ValidationError("sample carries no degree information")
    deg = np.asarray(deg, dtype=np.float64)
    if np.any(deg <= 0):
        raise ValidationError("sampled degree of zero; estimator undefined")
    numer = np.sum(y / deg)
    if mean_inverse_degree is not None:
        if mean_inverse_degree <= 0:
            raise ValidationError("mean inverse degree must be positive")
        denom = ws.n * mean_inverse_degree
    else:
        denom = np.sum(1.0 / deg)
    return float(numer / denom)


def ht_estimator(ws: WalkSample, pi: np.ndarray, n_population: int) -> float:
    """Idealized inverse-probability mean: (1/n) sum Y / (pi_X * N)."""
    y = _require_y(ws)
    pi = np.asarray(pi, dtype=np.float64)
    probs = pi[ws.assignment]
    if np.any(probs <= 0):
        raise ValidationError("zero stationary probability at a sampled node")
    return float(np.mean(y / (probs * n_population)))


def pi_transform(y: NodeFeature, pi: np.ndarray, n_population: int) -> NodeFeature:
    """The reweighted feature y(i) / (pi_i N).

    Its plain sample mean over any walk equals the inverse-probability
    estimator of the original feature, by construction.
    """
    pi = np.asarray(pi, dtype=np.float64)
    if len(pi) != len(y.values):
        raise ValidationError("pi length does not match feature")
    if np.any(pi <= 0):
        raise ValidationError("pi must be strictly positive")
    return NodeFeature(values=y.values / (pi * n_population), name=y.name + "_pi")
