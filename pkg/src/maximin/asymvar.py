"""Plug-in asymptotic covariance of the scaled maximin estimate.

The covariance of sqrt(n) (M_hat - M) splits into two parts:

* a coefficient-fluctuation term: per-group least-squares noise with
  covariance sigma^2 Sigma^{-1} pushed through the maximin Jacobians,
  summed over active groups;

* a metric-fluctuation term V: the pooled covariance estimate wiggles
  by a fourth-moment CLT, and the maximin point responds through the
  dSigma differential. V compresses to a sandwich of the empirical
  covariance C of the vectors (1/sqrt(G)) x_k (x_k . M) between hull
  projectors, so the fourth-moment tensor never has to be materialized.

When the design covariance is known exactly (so nothing is plugged in
for it), V is identically zero and only the first term remains.
"""

from dataclasses import dataclass

import numpy as np

from .confidence import chi2_quantile
from .errors import DimensionError, RankError
from .geometry import SigmaMetric, affine_project, dmagging_dB

_RANK_RTOL = 1e-12

# Probe level for the vertex tie test below. This classifies columns as
# statistically indistinguishable; it is not a user-facing inference level.
TIE_PROBE_LEVEL = 0.95


@dataclass(frozen=True)
class AsymptoticCovariance:
    """W and its two summands, plus the ingredients used to build them."""

    W: np.ndarray
    term_B: np.ndarray
    term_V: np.ndarray
    C_hat: np.ndarray
    sigma2_used: float
    active_used: tuple
    vertex_mode: bool = False
    known_sigma: bool = False


def empirical_C(X, M, G):
    """Empirical covariance of the scaled quadratic-form vectors.

    Args:
        X: stacked design rows, shape (nG, p).
        M: the maximin point the forms are taken against.
        G: number of groups (sets the 1/sqrt(G) scaling).

    Returns:
        The p x p sample covariance (divisor nG) of the vectors
        (1/sqrt(G)) x_k (x_k . M) over all rows x_k.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] < 2:
        raise DimensionError("empirical_C needs at least two rows")
    M = np.asarray(M, dtype=float)
    V = X * (X @ M)[:, None] / np.sqrt(G)
    Vc = V - V.mean(axis=0)
    return (Vc.T @ Vc) / X.shape[0]


def gaussian_population_C(Sigma, M, G):
    """Closed form of C for centered Gaussian designs with covariance Sigma."""
    Sigma = np.asarray(Sigma, dtype=float)
    M = np.asarray(M, dtype=float)
    s = Sigma @ M
    return (np.outer(s, s) + float(M @ s) * Sigma) / G


def fourth_moment_reference(X, G):
    """Rank-4 empirical tensor c[i, j, k, l], for validation only (p <= 4).

    c[i, j, k, l] is the sample covariance of X_i X_j with X_k X_l over
    the rows, divided by G. Contracting with M in j and l reproduces
    empirical_C; the production path never builds this tensor.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    p = X.shape[1]
    if p > 4:
        raise DimensionError("reference tensor limited to p <= 4")
    prods = X[:, :, None] * X[:, None, :]
    flat = prods.reshape(X.shape[0], p * p)
    flat = flat - flat.mean(axis=0)
    cov = (flat.T @ flat) / X.shape[0]
    return cov.reshape(p, p, p, p) / G


def sigma_term_V(B_active, Sigma, C_hat):
    """Metric-fluctuation summand of W.

    Args:
        B_active: active columns, shape (p, G').
        Sigma: the metric the maximin point was computed under.
        C_hat: p x p fourth-moment covariance from empirical_C.

    Returns:
        D (D^T Sigma D)^{-1} D^T C_hat D (D^T Sigma D)^{-1} D^T for the
        difference matrix D; the zero matrix when G' == 1.
    """
    metric = SigmaMetric.ensure(Sigma)
    B = np.atleast_2d(np.asarray(B_active, dtype=float))
    p, Gp = B.shape
    if Gp == 1:
        return np.zeros((p, p))
    C_hat = np.asarray(C_hat, dtype=float)
    D = B[:, 1:] - B[:, :1]
    s = np.linalg.svd(D, compute_uv=False)
    if s[-1] <= _RANK_RTOL * s[0]:
        raise RankError("active-column differences are rank deficient")
    gram = D.T @ metric.Sigma @ D
    P = D @ np.linalg.solve(gram, D.T)
    V = P @ C_hat @ P
    return (V + V.T) / 2.0


def tied_neighbors(Bhat, active, Sigma, sigma2, n, Sigma_g=None):
    """Inactive columns the data cannot separate from the active face.

    A column whose squared metric distance to the affine hull of the
    active columns is within the noise of the coefficient estimates
    could have taken part in the maximin combination; the fit has not
    resolved its exclusion. Column h is tied when

        dist_Sigma^2(b_h, face) <= (s_h^2 + max_{g active} s_g^2)
                                   * chi2_p(TIE_PROBE_LEVEL) / p

    where s_g^2 is the expected squared metric error of column g. With
    the per-group design grams ``Sigma_g`` (as fitted, ridge included)
    the exact fixed-design value s_g^2 = sigma^2 tr(Sigma Sigma_g^{-1})/n
    is used; without them the large-sample value sigma^2 p / n stands
    in. Either way the bound shrinks like 1/n, so ties vanish for
    separated columns as the sample grows.

    Returns:
        Sorted tuple of tied column indices, disjoint from ``active``.
    """
    metric = SigmaMetric.ensure(Sigma)
    B = np.atleast_2d(np.asarray(Bhat, dtype=float))
    p, G = B.shape
    n = int(n)
    sigma2 = float(sigma2)
    if n <= 0 or sigma2 <= 0.0:
        return ()
    active = tuple(active)
    face = B[:, list(active)].T
    if Sigma_g is None:
        scales = np.full(G, sigma2 * p / n)
    else:
        scales = np.empty(G)
        for g in range(G):
            gram = np.asarray(Sigma_g[g], dtype=float)
            scales[g] = sigma2 * float(np.trace(
                np.linalg.solve(gram, metric.Sigma))) / n
    quant = chi2_quantile(p, TIE_PROBE_LEVEL) / p
    s_face = max(scales[g] for g in active)
    out = []
    for h in range(G):
        if h in active:
            continue
        d = B[:, h] - affine_project(B[:, h], face, metric)
        if float(d @ (metric.Sigma @ d)) <= (scales[h] + s_face) * quant:
            out.append(h)
    return tuple(out)


def assemble_W(estimates, solution, differential, C_hat, Sigma=None):
    """Assemble the plug-in covariance of sqrt(n) (M_hat - M).

    Args:
        estimates: GroupEstimates from the fit.
        solution: MaggingSolution for the maximin point.
        differential: MaggingDifferential at the solution.
        C_hat: output of empirical_C, or None for the known-covariance
            mode where the metric term vanishes.
        Sigma: metric actually used for the solve; defaults to the
            pooled estimate on ``estimates``.

    Returns:
        AsymptoticCovariance. A single-column active set has no
        Jacobian. When ``tied_neighbors`` finds columns the data cannot
        separate from the winner, the winner and its ties are treated
        as jointly active and the assembly differentiates through that
        enlarged face; the near ties carry small hull distances into
        the Jacobians and inflate W along the ambiguous directions. A
        cleanly isolated vertex means the estimate equals one group's
        least squares and W falls back to sigma^2 Sigma^{-1} with the
        vertex_mode flag raised. Interior solutions always use the
        provided differential as is.
    """
    if Sigma is None:
        Sigma = estimates.Sigma_hat
    metric = SigmaMetric.ensure(Sigma)
    p = metric.p
    sigma2 = float(estimates.sigma2_hat)
    active = tuple(solution.active)
    known = C_hat is None
    C_used = np.zeros((p, p)) if known else np.asarray(C_hat, dtype=float)
    sigma_inv = metric.inverse()
    sigma_inv = (sigma_inv + sigma_inv.T) / 2.0
    Bhat = np.atleast_2d(np.asarray(estimates.Bhat, dtype=float))
    vertex = len(active) == 1
    tied = ()
    if vertex:
        tied = tied_neighbors(
            Bhat, active, metric, sigma2, estimates.n,
            Sigma_g=estimates.Sigma_g_hat,
        )
    if vertex and not tied:
        W = sigma2 * sigma_inv
        return AsymptoticCovariance(
            W=W,
            term_B=W.copy(),
            term_V=np.zeros((p, p)),
            C_hat=C_used,
            sigma2_used=sigma2,
            active_used=active,
            vertex_mode=True,
            known_sigma=known,
        )
    if tied:
        used = tuple(sorted(set(active).union(tied)))
        B_used = Bhat[:, list(used)]
        jacobians = [
            dmagging_dB(B_used, metric, j, solution.M) for j in range(len(used))
        ]
    else:
        used = active
        B_used = Bhat[:, list(used)]
        jacobians = differential.dB
    term_B = np.zeros((p, p))
    for J in jacobians:
        term_B += J @ sigma_inv @ J.T
    term_B *= sigma2
    term_B = (term_B + term_B.T) / 2.0
    if known:
        term_V = np.zeros((p, p))
    else:
        term_V = sigma_term_V(B_used, metric, C_used)
    W = term_B + term_V
    return AsymptoticCovariance(
        W=(W + W.T) / 2.0,
        term_B=term_B,
        term_V=term_V,
        C_hat=C_used,
        sigma2_used=sigma2,
        active_used=used,
        vertex_mode=vertex,
        known_sigma=known,
    )
