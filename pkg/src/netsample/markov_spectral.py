r"""Reversible referral kernels and their weighted spectral decomposition.

A kernel is a row-stochastic matrix P with stationary distribution pi
satisfying detailed balance, pi_i P_ij = pi_j P_ji.  Reversibility makes P
self-adjoint in the pi-weighted inner product

    <f, g>_pi = sum_i f(i) g(i) pi_i,

so P admits a real spectrum and a pi-orthonormal eigenbasis f_1, ..., f_N
with f_1 constant.  Every exact variance computation in this package runs
through that basis, via the t-step expansion

    P^t_ij = pi_j (1 + sum_{l>=2} lambda_l^t f_l(i) f_l(j)).

The decomposition is computed densely on the symmetric conjugate
S_ij = sqrt(pi_i / pi_j) P_ij and is limited to N <= 5000 nodes; larger
systems should use the simulation paths instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import csgraph

from .errors import NumericError, ValidationError
from .graph_core import Graph, NodeFeature

__all__ = [
    "Kernel",
    "SpectralKernel",
    "srw_kernel",
    "custom_kernel",
    "spectral_decompose",
    "inner_product_pi",
    "transition_power_prob",
    "rho_correlation",
]

DENSE_LIMIT = 5000
REVERSIBILITY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Kernel:
    """A validated reversible transition kernel.

    Parameters
    ----------
    p : (N, N) ndarray or scipy.sparse.csr_matrix
        Row-stochastic transition matrix.
    pi : (N,) ndarray
        Stationary distribution; strictly positive, sums to 1.
    graph : Graph or None
        Source graph when the kernel came from `srw_kernel`; lets samples
        report node degrees.  Custom kernels have no graph.
    """

    p: object
    pi: np.ndarray
    graph: Graph | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self) -> int:
        return len(self.pi)

    @property
    def is_sparse(self) -> bool:
        return sparse.issparse(self.p)

    def dense_p(self) -> np.ndarray:
        return self.p.toarray() if self.is_sparse else np.asarray(self.p)

    def row(self, i: int) -> np.ndarray:
        if self.is_sparse:
            return self.p[i].toarray().ravel()
        return np.asarray(self.p)[i]


def _check_kernel(p, pi, tol: float = REVERSIBILITY_TOL) -> None:
    """Validate row sums, positivity of pi, and detailed balance.

    Raises
    ------
    ValidationError
        If rows do not sum to 1 within 1e-12 or pi is not a positive
        distribution.
    NumericError
        If detailed balance is violated beyond `tol`; the message carries
        the maximum violation.
    """
    n = len(pi)
    row_sums = np.asarray(p.sum(axis=1)).ravel()
    if np.max(np.abs(row_sums - 1.0)) > 1e-12:
        raise ValidationError(
            f"rows must sum to 1; worst deviation {np.max(np.abs(row_sums - 1)):.3e}"
        )
    if np.any(pi <= 0) or abs(pi.sum() - 1.0) > 1e-12:
        raise ValidationError("pi must be strictly positive and sum to 1")
    if sparse.issparse(p):
        flux = sparse.diags(pi) @ p
        gap = abs(flux - flux.T)
        violation = gap.max() if gap.nnz else 0.0
    else:
        flux = pi[:, None] * np.asarray(p)
        violation = np.max(np.abs(flux - flux.T)) if n else 0.0
    if violation > tol:
        raise NumericError(
            f"kernel is not reversible: max detailed-balance violation "
            f"{violation:.3e} exceeds tolerance {tol:.1e}"
        )


def srw_kernel(g: Graph) -> Kernel:
    """Simple-random-walk kernel of a connected weighted graph.

    P_ij = w_ij / deg(i) and pi_j = deg(j) / sum_k deg(k).  Reversibility
    holds analytically; the numeric check still runs as a safety net.

    Raises
    ------
    ValidationError
        If the graph is disconnected (the kernel would have |lambda_2| = 1)
        or has an isolated node.
    """
    if g.n == 0:
        raise ValidationError("cannot build a kernel on an empty graph")
    deg = g.degrees
    if np.any(deg <= 0):
        raise ValidationError("graph has an isolated node; kernel undefined")
    n_comp = csgraph.connected_components(g.adj, directed=False, return_labels=False)
    if n_comp != 1:
        raise ValidationError(
            f"graph has {n_comp} components; kernel would have |lambda_2| = 1"
        )
    inv_deg = sparse.diags(1.0 / deg)
    p = (inv_deg @ g.adj).tocsr()
    p.sort_indices()
    pi = deg / deg.sum()
    _check_kernel(p, pi)
    return Kernel(p=p, pi=pi, graph=g)


def custom_kernel(p, tol: float = REVERSIBILITY_TOL) -> Kernel:
    """Validate an arbitrary row-stochastic matrix as a reversible kernel.

    The stationary distribution is found by power iteration on the left
    eigenproblem to residual < 1e-12, after an irreducibility check on the
    support pattern.

    Parameters
    ----------
    p : (N, N) array_like or sparse matrix
        Candidate transition matrix.
    tol : float
        Detailed-balance tolerance; violations beyond it raise
        NumericError with the maximum violation.
    """
    p = p.tocsr() if sparse.issparse(p) else np.asarray(p, dtype=np.float64)
    n = p.shape[0]
    if p.shape != (n, n):
        raise ValidationError("kernel must be square")
    row_sums = np.asarray(p.sum(axis=1)).ravel()
    if np.max(np.abs(row_sums - 1.0)) > max(tol, 1e-12):
        raise ValidationError("rows must sum to 1")
    support = sparse.csr_matrix(p) if not sparse.issparse(p) else p
    n_comp = csgraph.connected_components(support, directed=True, connection="strong",
                                          return_labels=False)
    if n_comp != 1:
        raise ValidationError(
            "kernel support is reducible; stationary distribution not unique"
        )
    # Damped power iteration: averaging with the previous iterate keeps the
    # scheme convergent for periodic chains while preserving the fixed point.
    pi = np.full(n, 1.0 / n)
    converged = False
    for _ in range(500_000):
        stepped = np.asarray(pi @ p).ravel()
        if np.max(np.abs(stepped - pi)) < 1e-12:
            converged = True
            break
        pi = 0.5 * (pi + stepped)
        pi /= pi.sum()
    if not converged:
        raise NumericError("power iteration for pi did not converge to 1e-12")
    _check_kernel(p, pi, tol=tol)
    return Kernel(p=p, pi=pi, graph=None)


@dataclass(frozen=True, eq=False)
class SpectralKernel:
    """Full pi-orthonormal eigensystem of a reversible kernel.

    Attributes
    ----------
    kernel : Kernel
    eigenvalues : (N,) ndarray
        Ordered by |lambda| descending; ties between +lambda and -lambda
        put the positive one first, then ascending original index.
        eigenvalues[0] == 1 exactly.
    eigenfunctions : (N, N) ndarray
        Column l is f_{l+1}; column 0 is the exact constant 1.  Columns are
        pi-orthonormal and sign-fixed (largest-magnitude coordinate
        positive) so decompositions are deterministic.
    """

    kernel: Kernel
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray

    @property
    def n(self) -> int:
        return self.kernel.n

    @property
    def pi(self) -> np.ndarray:
        return self.kernel.pi

    @property
    def lambda2(self) -> float:
        """Second eigenvalue in the modulus ordering (signed value)."""
        return float(self.eigenvalues[1])

    def feature_coefficients(self, y: np.ndarray) -> np.ndarray:
        """All inner products <y, f_l>_pi as a length-N vector (l = 1..N)."""
        y = np.asarray(y, dtype=np.float64)
        if len(y) != self.n:
            raise ValidationError("feature length does not match kernel size")
        return self.eigenfunctions.T @ (self.pi * y)


def spectral_decompose(k: Kernel, dense_limit: int = DENSE_LIMIT) -> SpectralKernel:
    """Dense symmetric eigendecomposition in the pi-weighted geometry.

    Conjugates P to S_ij = sqrt(pi_i/pi_j) P_ij, which reversibility makes
    symmetric, then runs a full symmetric eigensolve and maps eigenvectors
    back by f_l(i) = v_l(i) / sqrt(pi_i).

    Raises
    ------
    ValidationError
        If N exceeds `dense_limit` (use the simulation paths instead), or
        the eigenvalue 1 is not simple (reducible kernel).
    """
    n = k.n
    if n > dense_limit:
        raise ValidationError(
            f"N = {n} exceeds the dense decomposition limit {dense_limit}; "
            "use the Monte-Carlo paths for larger systems"
        )
    sqrt_pi = np.sqrt(k.pi)
    s = (sqrt_pi[:, None] * k.dense_p()) / sqrt_pi[None, :]
    s = 0.5 * (s + s.T)
    w, v = linalg.eigh(s)
    order = sorted(range(n), key=lambda i: (-abs(w[i]), -w[i], i))
    w = w[order]
    v = v[:, order]
    if abs(w[0] - 1.0) > 1e-8:
        raise NumericError(f"leading eigenvalue is {w[0]:.12f}, expected 1")
    if n > 1 and w[1] >= 1.0 - 1e-10:
        raise ValidationError(
            "eigenvalue 1 is not simple (reducible kernel); decomposition refused"
        )
    f = v / sqrt_pi[:, None]
    # exact leading pair, then deterministic signs and exact pi-normalization
    w[0] = 1.0
    f[:, 0] = 1.0
    if n > 1:
        cols = np.arange(1, n)
        peak = np.argmax(np.abs(f[:, 1:]), axis=0)
        signs = np.where(f[peak, cols] < 0, -1.0, 1.0)
        f[:, 1:] *= signs
        norms = np.sqrt((k.pi[:, None] * f[:, 1:] ** 2).sum(axis=0))
        f[:, 1:] /= norms
    return SpectralKernel(kernel=k, eigenvalues=w, eigenfunctions=f)


def inner_product_pi(f, g, pi) -> float:
    """The pi-weighted inner product sum_i f(i) g(i) pi_i."""
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    pi = np.asarray(pi, dtype=np.float64)
    if not (len(f) == len(g) == len(pi)):
        raise ValidationError("inner product requires equal lengths")
    return float(np.sum(f * g * pi))


def transition_power_prob(s: SpectralKernel, i: int, j: int, t: int) -> float:
    """t-step transition probability from the spectral expansion.

    Evaluates pi_j (1 + sum_{l>=2} lambda_l^t f_l(i) f_l(j)).  Exact for
    every t >= 0, including periodic kernels, because it is an algebraic
    identity in the eigenbasis.
    """
    if t < 0 or t != int(t):
        raise ValidationError("t must be a nonnegative integer")
    n = s.n
    if not (0 <= i < n and 0 <= j < n):
        raise ValidationError("node index out of range")
    lam_t = s.eigenvalues[1:] ** int(t)
    bulk = np.sum(lam_t * s.eigenfunctions[i, 1:] * s.eigenfunctions[j, 1:])
    return float(s.pi[j] * (1.0 + bulk))


def rho_correlation(s: SpectralKernel, y: NodeFeature, ell: int) -> float:
    """Correlation of a feature with eigenfunction f_ell, ell >= 2.

    Returns <y, f_ell>_pi / sigma with sigma^2 = sum_{j>=2} <y, f_j>_pi^2,
    the stationary variance of the feature.

    Raises
    ------
    ValidationError
        If ell < 2 or the feature is constant (sigma = 0).
    """
    if ell < 2 or ell > s.n:
        raise ValidationError("ell must lie in 2..N")
    coeffs = s.feature_coefficients(y.values)
    sigma2 = float(np.sum(coeffs[1:] ** 2))
    total = sigma2 + float(coeffs[0] ** 2)
    if sigma2 <= 1e-20 * max(total, 1e-300):
        raise ValidationError("constant feature: sigma = 0, correlation undefined")
    return float(coeffs[ell - 1] / np.sqrt(sigma2))
