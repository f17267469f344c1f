r"""Exact sampling variance, design effects, and plug-in estimators.

For a tree-indexed walk with reversible kernel spectrum (lambda_l, f_l) and
tree distance generating function G, the variance of the plain mean is the
finite sum

    Var(mean) = sum_{l>=2} <y, f_l>_pi^2  G(lambda_l),

conditioned on the tree and started from pi.  Everything here is exact
given the spectrum and the distance counts; the only estimation happens in
the two plug-in routines at the bottom, which replace population quantities
by sample versions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csgraph

from .errors import NumericError, ValidationError
from .graph_core import NodeFeature
from .markov_spectral import Kernel, SpectralKernel, spectral_decompose
from .referral_tree import DistanceSpectrum, ReferralForest, distance_spectrum, g_eval
from .estimators import WalkSample

__all__ = [
    "VarianceReport",
    "variance_exact",
    "cov_pair",
    "de_bounds",
    "AutocorrEstimate",
    "autocorr_lambda_estimate",
    "plug_in_variance_example1",
    "sbm_plug_in_variance",
]


@dataclass(frozen=True, eq=False)
class VarianceReport:
    """Per-eigenvalue variance decomposition for one (kernel, y, tree) triple.

    ``contributions`` has one row (ell, lambda, coeff_sq, g_value, product)
    per eigenvalue index ell = 2..N.  ``design_effect`` is None for a
    constant feature (sigma2 = 0); the sandwich bounds are present only
    when lambda2 > 0.
    """

    contributions: np.ndarray
    var_rds: float
    sigma2: float
    var_iid: float
    design_effect: float | None
    de_lower: float | None
    de_upper: float | None
    rho2: float | None
    n: int

    def contribution_rows(self):
        """Iterate (ell, lambda, coeff_sq, g_value, product) tuples."""
        for row in self.contributions:
            yield (int(row[0]), row[1], row[2], row[3], row[4])


def variance_exact(
    s: SpectralKernel, y: NodeFeature, ds: DistanceSpectrum
) -> VarianceReport:
    """Exact conditional variance of the plain mean, with design effect.

    sigma2 is the stationary feature variance sum_{l>=2} <y, f_l>_pi^2;
    the iid reference is sigma2 / n and the design effect their ratio.
    A constant feature yields var_rds = 0 with the design effect flagged
    undefined (None).
    """
    if s.n > 1 and s.eigenvalues[1] >= 1.0 - 1e-10:
        raise NumericError("second eigenvalue is 1; variance formula refused")
    coeffs = s.feature_coefficients(y.values)
    coeff_sq = coeffs[1:] ** 2
    # a feature that is constant up to rounding has no variance to explain
    total_sq = float(np.sum(coeffs**2))
    if float(coeff_sq.sum()) <= 1e-20 * max(total_sq, 1e-300):
        coeff_sq = np.zeros_like(coeff_sq)
    lams = s.eigenvalues[1:]
    gvals = g_eval(ds, lams) if len(lams) else np.empty(0)
    products = coeff_sq * gvals
    var_rds = float(products.sum())
    sigma2 = float(coeff_sq.sum())
    n = ds.n
    contributions = np.column_stack(
        [np.arange(2, s.n + 1, dtype=np.float64), lams, coeff_sq, gvals, products]
    )
    if sigma2 > 0:
        var_iid = sigma2 / n
        de = var_rds / var_iid
        rho2 = float(coeff_sq[0] / sigma2)
    else:
        var_iid = 0.0
        de = None
        rho2 = None
    lower = upper = None
    if sigma2 > 0 and s.lambda2 > 0:
        n_g = n * g_eval(ds, s.lambda2)
        lower, upper = rho2 * n_g, n_g
    return VarianceReport(
        contributions=contributions,
        var_rds=var_rds,
        sigma2=sigma2,
        var_iid=var_iid,
        design_effect=de,
        de_lower=lower,
        de_upper=upper,
        rho2=rho2,
        n=n,
    )


def cov_pair(s: SpectralKernel, y: NodeFeature, d: int) -> float:
    """Covariance of feature values at two tree nodes a distance d apart."""
    if d < 0 or d != int(d):
        raise ValidationError("distance must be a nonnegative integer")
    coeffs = s.feature_coefficients(y.values)
    return float(np.sum(s.eigenvalues[1:] ** int(d) * coeffs[1:] ** 2))


def de_bounds(report: VarianceReport) -> tuple[float, float] | None:
    """The sandwich (rho2 * n G(lambda2), n G(lambda2)), or None.

    None signals that the bounds are unavailable: either lambda2 <= 0 (the
    sandwich argument needs a positive second eigenvalue) or the feature
    was constant.
    """
    if report.de_lower is None or report.de_upper is None:
        return None
    return report.de_lower, report.de_upper


@dataclass(frozen=True)
class AutocorrEstimate:
    """Lag-one autocorrelation along referral edges, with a clamp flag."""

    value: float
    clamped: bool

    def __float__(self) -> float:
        return self.value


def autocorr_lambda_estimate(ws: WalkSample) -> AutocorrEstimate:
    """Estimate the leading eigenvalue from parent-child covariation.

    lambda_hat = sum over edges of (Y_parent - Ybar)(Y_child - Ybar),
    divided by (edge count) * (plain sample variance over all n
    observations).  The plain-variance normalizer matches the population
    identity Cov = lambda * sigma^2.  The estimate is clamped to
    (-1, 1) with the flag set when clamping was applied.
    """
    y = ws.y_values
    if y is None:
        raise ValidationError("sample carries no feature values")
    parents, children = ws.tree.edges()
    if len(children) == 0:
        raise ValidationError("autocorrelation needs at least one referral edge")
    centered = y - y.mean()
    sigma2_hat = float(np.mean(centered**2))
    if sigma2_hat <= 0:
        raise ValidationError("sample variance is zero; autocorrelation undefined")
    raw = float(np.sum(centered[parents] * centered[children]) / (len(children) * sigma2_hat))
    limit = 1.0 - 1e-9
    clamped = not (-limit <= raw <= limit)
    return AutocorrEstimate(value=float(np.clip(raw, -limit, limit)), clamped=clamped)


def plug_in_variance_example1(ws: WalkSample, ds: DistanceSpectrum) -> float:
    """Variance plug-in for a feature aligned with one eigenfunction.

    Replaces sigma^2 by the sample variance and lambda2 by the edge
    autocorrelation, returning sigma2_hat * G(lambda_hat).
    """
    lam_hat = autocorr_lambda_estimate(ws)
    y = ws.y_values
    sigma2_hat = float(np.var(y))
    return sigma2_hat * float(g_eval(ds, lam_hat.value))


def sbm_plug_in_variance(
    labels_by_tree_node, y_values, forest: ReferralForest, k: int
) -> float:
    """Block-level variance plug-in from observed labels only.

    Builds the block kernel estimate from parent-child label pairs counted
    in both directions (symmetrized joint counts row-normalize to a kernel
    that is reversible w.r.t. its implied stationary law), takes block
    means as the feature, pools the within-block variance with denominator
    n - K, and evaluates

        sum_{l=2..K} <y_hat, f_hat_l>^2 G(lambda_hat_l)  +  sigma2_hat / n.
    """
    labels = np.asarray(labels_by_tree_node, dtype=np.int64)
    y = np.asarray(y_values, dtype=np.float64)
    if k < 2:
        raise ValidationError("need at least two blocks")
    if len(labels) != forest.n or len(y) != forest.n:
        raise ValidationError("labels and y must align with the tree")
    if np.any((labels < 0) | (labels >= k)):
        raise ValidationError("block label out of range")
    observed = np.bincount(labels, minlength=k)
    if np.any(observed == 0):
        missing = int(np.argmin(observed))
        raise ValidationError(f"block {missing} was never observed")
    parents, children = forest.edges()
    if len(children) == 0:
        raise ValidationError("need at least one referral edge")
    joint = np.zeros((k, k))
    np.add.at(joint, (labels[parents], labels[children]), 1.0)
    joint = joint + joint.T
    row_mass = joint.sum(axis=1)
    if np.any(row_mass == 0):
        bad = int(np.argmin(row_mass))
        raise ValidationError(f"block {bad} appears in no referral edge")
    n_comp = csgraph.connected_components(
        (joint > 0).astype(np.int8), directed=False, return_labels=False
    )
    if n_comp != 1:
        raise ValidationError("estimated block kernel is reducible")
    b_hat = joint / row_mass[:, None]
    pi_hat = row_mass / row_mass.sum()
    kernel = Kernel(p=b_hat, pi=pi_hat, graph=None)
    spec = spectral_decompose(kernel)
    y_block = np.bincount(labels, weights=y, minlength=k) / observed
    resid = y - y_block[labels]
    if forest.n <= k:
        raise ValidationError("pooled variance needs more observations than blocks")
    sigma2_hat = float(np.sum(resid**2) / (forest.n - k))
    ds = distance_spectrum(forest)
    coeffs = spec.feature_coefficients(y_block)
    gvals = g_eval(ds, spec.eigenvalues[1:])
    total = float(np.sum(coeffs[1:] ** 2 * gvals))
    return total + sigma2_hat / forest.n
