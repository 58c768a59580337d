"""Geometry of the Sigma inner product and differentials of the maximin map.

Everything here lives in the metric <x, y> = x^T Sigma y. The maximin
point M of an active column set B is characterized by Sigma-
orthogonality of M to every difference of active columns, and near a
well-separated configuration the map (B, Sigma) -> M is differentiable.
Its two closed-form differentials are implemented below:

* dmagging_dB: the p x p Jacobian of M with respect to one active
  column b_g,

      J_g = -u_g (Sigma M)^T / |u_g|^2  +  (|w_g| / |u_g|) Pi_B,

  where u_g is the residual of b_g after affine projection onto the
  remaining active columns, w_g the same residual of M, |.| the Sigma
  norm, and Pi_B the Sigma-orthogonal projector onto the complement of
  the difference span. Derivatives with respect to inactive columns
  vanish.

* dmagging_dSigma: the response of M to a symmetric perturbation Delta
  of the metric, -D (D^T Sigma D)^{ -1} D^T Delta M with D the matrix
  of active-column differences.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DefinitenessError, DegenerateGeometryError, RankError

# Relative cutoff for pseudo-inverse pivots and rank decisions.
_RANK_RTOL = 1e-12

# Residual norms below this mean the configuration is degenerate.
_DEGENERACY_TOL = 1e-10


@dataclass(frozen=True)
class SigmaMetric:
    """A positive definite Sigma with a cached Cholesky factorization."""

    Sigma: np.ndarray

    def __post_init__(self):
        Sigma = np.asarray(self.Sigma, dtype=float)
        if Sigma.ndim != 2 or Sigma.shape[0] != Sigma.shape[1]:
            raise DefinitenessError("Sigma must be square")
        scale = float(np.max(np.abs(Sigma))) or 1.0
        if np.max(np.abs(Sigma - Sigma.T)) > 1e-10 * scale:
            raise DefinitenessError("Sigma is not symmetric")
        Sigma = (Sigma + Sigma.T) / 2.0
        try:
            factor = scipy.linalg.cho_factor(Sigma, lower=True)
        except scipy.linalg.LinAlgError:
            raise DefinitenessError("Sigma is not positive definite") from None
        object.__setattr__(self, "Sigma", Sigma)
        object.__setattr__(self, "_factor", factor)

    @classmethod
    def ensure(cls, sigma):
        """Wrap a raw matrix, passing an existing metric through."""
        if isinstance(sigma, cls):
            return sigma
        return cls(sigma)

    @property
    def p(self):
        return self.Sigma.shape[0]

    def inner(self, x, y):
        return float(np.asarray(x) @ self.Sigma @ np.asarray(y))

    def norm(self, x):
        v = self.inner(x, x)
        return float(np.sqrt(max(v, 0.0)))

    def solve(self, rhs):
        """Sigma^{-1} rhs via the cached factorization."""
        return scipy.linalg.cho_solve(self._factor, np.asarray(rhs, dtype=float))

    def inverse(self):
        return self.solve(np.eye(self.p))


def affine_project(x, points, metric):
    """Project x onto the affine hull of the given points, Sigma-orthogonally.

    points is a sequence of p-vectors (or a (k, p) array). Rank-deficient
    spans are handled by the pseudo-inverse; the result is idempotent and
    its residual is Sigma-orthogonal to every difference of points.
    """
    metric = SigmaMetric.ensure(metric)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x = np.asarray(x, dtype=float)
    base = pts[0]
    if pts.shape[0] == 1:
        return base.copy()
    D = (pts[1:] - base).T
    gram = D.T @ metric.Sigma @ D
    coef = np.linalg.pinv(gram, rcond=_RANK_RTOL, hermitian=True)
    return base + D @ (coef @ (D.T @ (metric.Sigma @ (x - base))))


def _complement_projector(B, metric):
    """Matrix of the Sigma-orthogonal projector onto span(b_g - b_1)^perp."""
    metric = SigmaMetric.ensure(metric)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    p = B.shape[0]
    if B.shape[1] <= 1:
        return np.eye(p)
    D = B[:, 1:] - B[:, :1]
    gram = D.T @ metric.Sigma @ D
    coef = np.linalg.pinv(gram, rcond=_RANK_RTOL, hermitian=True)
    return np.eye(p) - D @ coef @ D.T @ metric.Sigma


def complement_project(v, B, metric):
    """Apply the projector onto the Sigma-complement of the difference span."""
    v = np.asarray(v, dtype=float)
    return _complement_projector(B, metric) @ v


def dmagging_dB(B_active, Sigma, g, M):
    """Jacobian of the maximin point with respect to active column g.

    Parameters
    ----------
    B_active : ndarray, shape (p, G')
        The active columns only, G' >= 2.
    Sigma : ndarray or SigmaMetric
    g : int
        Column index into B_active.
    M : ndarray
        The maximin point of B_active under Sigma.

    Returns
    -------
    ndarray, shape (p, p)
        Acts on a direction v (a perturbation of column g) from the right.

    Raises
    ------
    DegenerateGeometryError
        For vertex solutions (G' < 2) or when column g lies in the
        affine hull of the others, where no derivative exists.
    """
    metric = SigmaMetric.ensure(Sigma)
    B = np.atleast_2d(np.asarray(B_active, dtype=float))
    p, Gp = B.shape
    if Gp < 2:
        raise DegenerateGeometryError(
            "vertex solution: the maximin map is not differentiable for a"
            " single active column"
        )
    if not 0 <= g < Gp:
        raise IndexError(f"column index {g} outside 0..{Gp - 1}")
    M = np.asarray(M, dtype=float)
    others = np.delete(B, g, axis=1).T
    u = B[:, g] - affine_project(B[:, g], others, metric)
    nu = metric.norm(u)
    if nu < _DEGENERACY_TOL:
        raise DegenerateGeometryError(
            f"active column {g} lies in the affine hull of the others"
        )
    w = M - affine_project(M, others, metric)
    proj = _complement_projector(B, metric)
    term1 = -np.outer(u, metric.Sigma @ M) / nu**2
    term2 = (metric.norm(w) / nu) * proj
    return term1 + term2


def _difference_matrix(B):
    B = np.atleast_2d(np.asarray(B, dtype=float))
    return B[:, 1:] - B[:, :1]


def dmagging_dSigma(B_active, Sigma, M, Delta):
    """Response of the maximin point to a metric perturbation Delta.

    Evaluates -D (D^T Sigma D)^{-1} D^T Delta M for the active-column
    difference matrix D. Returns the zero vector for a single active
    column (a vertex is locally constant in Sigma).

    Raises
    ------
    RankError
        If D is not of full column rank.
    """
    metric = SigmaMetric.ensure(Sigma)
    B = np.atleast_2d(np.asarray(B_active, dtype=float))
    p, Gp = B.shape
    M = np.asarray(M, dtype=float)
    Delta = np.asarray(Delta, dtype=float)
    if Delta.shape != (p, p):
        raise RankError(f"Delta must be {p} x {p}")
    scale = float(np.max(np.abs(Delta))) or 1.0
    if np.max(np.abs(Delta - Delta.T)) > 1e-8 * scale:
        raise ValueError("Delta must be symmetric")
    if Gp == 1:
        return np.zeros(p)
    D = _difference_matrix(B)
    s = np.linalg.svd(D, compute_uv=False)
    if s[-1] <= _RANK_RTOL * s[0]:
        raise RankError("active-column differences are rank deficient")
    gram = D.T @ metric.Sigma @ D
    return -D @ np.linalg.solve(gram, D.T @ (Delta @ M))


@dataclass(frozen=True)
class MaggingDifferential:
    """Differentials of the maximin map at one solution.

    dB holds the Jacobian for each active column, ordered like active.
    dSigma maps a symmetric p x p direction to the induced movement of
    the maximin point.
    """

    active: tuple
    dB: tuple
    dSigma: object

    def apply_dB(self, g, v):
        """Movement of M when active column g moves along v."""
        return self.dB[self.active.index(g)] @ np.asarray(v, dtype=float)


def magging_differential(B, Sigma, solution):
    """Bundle both differentials of the maximin map at a solution.

    B is the full p x G matrix; differentials are taken with respect to
    the active columns recorded on the solution (inactive columns have
    zero derivative and are omitted).
    """
    metric = SigmaMetric.ensure(Sigma)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    sub = B[:, list(solution.active)]
    jacobians = tuple(
        dmagging_dB(sub, metric, i, solution.M) for i in range(sub.shape[1])
    )

    def dsigma(Delta):
        return dmagging_dSigma(sub, metric, solution.M, Delta)

    return MaggingDifferential(active=solution.active, dB=jacobians, dSigma=dsigma)
