"""End-to-end flow shared by the estimator class, the CLI and the simulator.

One replicate of the full analysis is: fit per-group least squares,
solve the maximin weight program under the pooled (or supplied) metric,
differentiate the maximin map at the solution, assemble the plug-in
covariance and build the confidence ellipsoid. Supplying known_sigma
switches every step onto the exact metric and drops the metric-
fluctuation term of the covariance.
"""

from dataclasses import dataclass

import numpy as np

from . import asymvar, confidence, geometry, linmodel, magging


@dataclass(frozen=True)
class Analysis:
    """Everything one full pass over a dataset produces."""

    estimates: object
    solution: object
    covariance: object
    region: object
    sigma_used: np.ndarray


def estimate_dataset(dataset, ridge_jitter=0.0, known_sigma=None,
                     activity_threshold=magging.DEFAULT_ACTIVITY_THRESHOLD):
    """Fit and solve the maximin program; no covariance assembly.

    Returns (estimates, solution, sigma_used).
    """
    estimates = linmodel.fit(dataset, ridge_jitter)
    sigma = estimates.Sigma_hat if known_sigma is None else np.asarray(
        known_sigma, dtype=float)
    solution = magging.maximin_point(estimates.Bhat, sigma, activity_threshold)
    return estimates, solution, sigma


def analyze_dataset(dataset, alpha=0.05, ridge_jitter=0.0, known_sigma=None,
                    activity_threshold=magging.DEFAULT_ACTIVITY_THRESHOLD):
    """Full pass from raw dataset to confidence region.

    Returns an Analysis bundle. Degeneracy, rank, conditioning and
    convergence problems propagate as their specific exception types so
    callers can count or surface them.
    """
    estimates, solution, sigma = estimate_dataset(
        dataset, ridge_jitter, known_sigma, activity_threshold)
    if len(solution.active) > 1:
        differential = geometry.magging_differential(
            estimates.Bhat, sigma, solution)
    else:
        differential = None
    if known_sigma is None:
        C_hat = asymvar.empirical_C(dataset.design_stack(), solution.M, dataset.G)
    else:
        C_hat = None
    covariance = asymvar.assemble_W(
        estimates, solution, differential, C_hat, Sigma=sigma)
    region = confidence.build_region(solution.M, covariance, dataset.n, alpha)
    region.flags["sigma2_approximate"] = bool(estimates.sigma2_approximate)
    return Analysis(
        estimates=estimates,
        solution=solution,
        covariance=covariance,
        region=region,
        sigma_used=sigma,
    )
