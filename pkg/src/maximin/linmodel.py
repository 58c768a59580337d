"""Grouped linear-regression data: synthetic generation, fitting, CSV input.

The data model is Y_g = X_g b_g + eps_g for groups g = 1..G, each group
carrying its own n x p design and length-n response, with eps_g drawn
i.i.d. normal(0, sigma^2 Id). All groups share n and p. Fitting yields
per-group least-squares coefficients (optionally with a ridge jitter on
the covariance diagonal), the pooled design covariance X^T X / (nG),
per-group covariances, and a pooled residual variance.

All randomness flows through counter-based Philox streams keyed by
(seed, purpose, group), so datasets are bit-reproducible for a given
seed and groups can be generated independently and in any order.
"""

import csv
import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import CsvFormatError, DimensionError, SingularFitError

COEFFICIENT_RULES = ("basis-vectors", "shared-plus-noise", "identical", "custom")
DESIGN_RULES = ("iid-normal", "per-group-scaled-normal")

# Relative pivot threshold for the factorization-based rank check.
_PIVOT_RTOL = 1e-12


def _stream(*key):
    """Independent generator for a namespaced integer key."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


@dataclass(frozen=True)
class GroupedDataset:
    """Per-group (design, response) pairs with shared dimensions.

    groups is a tuple of (X_g, y_g) arrays, X_g of shape (n, p) and y_g
    of shape (n,). labels names the groups; it defaults to g1, g2, ...
    """

    groups: tuple
    labels: tuple = ()

    def __post_init__(self):
        if len(self.groups) < 1:
            raise DimensionError("need at least one group")
        cleaned = []
        for g, pair in enumerate(self.groups):
            X, y = pair
            X = np.asarray(X, dtype=float)
            y = np.asarray(y, dtype=float)
            if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
                raise DimensionError(
                    f"group {g + 1}: design must be 2-d with one response per row"
                )
            cleaned.append((X, y))
        n, p = cleaned[0][0].shape
        if n < 1 or p < 1:
            raise DimensionError("need n >= 1 and p >= 1")
        for g, (X, _) in enumerate(cleaned):
            if X.shape != (n, p):
                raise DimensionError(
                    f"group {g + 1}: shape {X.shape} differs from {(n, p)};"
                    " all groups must share n and p"
                )
        object.__setattr__(self, "groups", tuple(cleaned))
        if not self.labels:
            object.__setattr__(
                self, "labels", tuple(f"g{g + 1}" for g in range(len(cleaned)))
            )
        elif len(self.labels) != len(cleaned):
            raise DimensionError("labels must match the number of groups")

    @property
    def G(self):
        return len(self.groups)

    @property
    def n(self):
        return self.groups[0][0].shape[0]

    @property
    def p(self):
        return self.groups[0][0].shape[1]

    def design_stack(self):
        """All designs stacked row-wise into an (nG) x p matrix."""
        return np.vstack([X for X, _ in self.groups])


@dataclass(frozen=True)
class ScenarioSpec:
    """Recipe for a synthetic grouped dataset.

    coefficient_rule fixes the true p x G coefficient matrix given
    (p, G, seed): "basis-vectors" takes b_g = e_g, "identical" takes
    b_g = e_1, "shared-plus-noise" takes b_g = e_1 + z_g e_2 with z_g
    standard normal, and "custom" uses the coefficients field verbatim.
    design_rule "iid-normal" draws every design entry from one shared
    standard normal (the common-distribution scenario the asymptotics
    assume); "per-group-scaled-normal" gives each group its own scale.
    """

    p: int
    G: int
    n: int
    coefficient_rule: str = "basis-vectors"
    design_rule: str = "iid-normal"
    noise_sd: float = 1.0
    seed: int = 0
    ridge_jitter: float = 0.0
    coefficients: object = None

    def __post_init__(self):
        if self.p < 1 or self.G < 1 or self.n < 1:
            raise DimensionError("p, G and n must all be >= 1")
        if self.coefficient_rule not in COEFFICIENT_RULES:
            raise ValueError(f"unknown coefficient_rule {self.coefficient_rule!r}")
        if self.design_rule not in DESIGN_RULES:
            raise ValueError(f"unknown design_rule {self.design_rule!r}")
        if not self.noise_sd > 0:
            raise ValueError("noise_sd must be > 0")
        if self.ridge_jitter < 0:
            raise ValueError("ridge_jitter must be >= 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.coefficient_rule == "basis-vectors" and self.G > self.p:
            raise DimensionError("basis-vectors needs G <= p")
        if self.coefficient_rule == "shared-plus-noise" and self.p < 2:
            raise DimensionError("shared-plus-noise needs p >= 2")
        if self.coefficient_rule == "custom":
            B = np.asarray(self.coefficients, dtype=float)
            if B.shape != (self.p, self.G):
                raise DimensionError("custom coefficients must be p x G")
            object.__setattr__(self, "coefficients", B)


def true_coefficients(spec):
    """The p x G coefficient matrix a ScenarioSpec generates from."""
    p, G = spec.p, spec.G
    if spec.coefficient_rule == "basis-vectors":
        return np.eye(p)[:, :G].copy()
    if spec.coefficient_rule == "identical":
        B = np.zeros((p, G))
        B[0, :] = 1.0
        return B
    if spec.coefficient_rule == "shared-plus-noise":
        z = _stream(spec.seed, 0).standard_normal(G)
        B = np.zeros((p, G))
        B[0, :] = 1.0
        B[1, :] = z
        return B
    return spec.coefficients.copy()


def generate(spec):
    """Draw a synthetic grouped dataset.

    Parameters
    ----------
    spec : ScenarioSpec

    Returns
    -------
    (GroupedDataset, ndarray)
        The dataset and the true p x G coefficient matrix used.
    """
    B0 = true_coefficients(spec)
    groups = []
    for g in range(spec.G):
        X = _stream(spec.seed, 1, g).standard_normal((spec.n, spec.p))
        if spec.design_rule == "per-group-scaled-normal":
            X = X * (1.0 + (g + 1) / (2.0 * spec.G))
        eps = _stream(spec.seed, 2, g).standard_normal(spec.n)
        y = X @ B0[:, g] + spec.noise_sd * eps
        groups.append((X, y))
    return GroupedDataset(tuple(groups)), B0


@dataclass(frozen=True)
class GroupEstimates:
    """Per-group fits plus pooled covariance and noise variance.

    Bhat stacks the fitted coefficient vectors as columns. Sigma_hat is
    the pooled design covariance X^T X / (nG) plus the jitter diagonal;
    Sigma_g_hat holds the per-group analogues. sigma2_approximate is
    True when p >= n forced the residual variance onto G*n degrees of
    freedom instead of the unbiased G*(n - p).
    """

    Bhat: np.ndarray
    Sigma_hat: np.ndarray
    Sigma_g_hat: tuple
    sigma2_hat: float
    ridge_jitter_used: float
    n: int
    sigma2_approximate: bool = False
    labels: tuple = ()

    @property
    def p(self):
        return self.Bhat.shape[0]

    @property
    def G(self):
        return self.Bhat.shape[1]


def fit(dataset, ridge_jitter=0.0):
    """Per-group least squares with an optional ridge jitter.

    Each coefficient vector solves (X_g^T X_g / n + jitter Id) b =
    X_g^T y_g / n. With jitter 0 a singular (or numerically rank-
    deficient) scatter raises SingularFitError naming the group.

    Parameters
    ----------
    dataset : GroupedDataset
    ridge_jitter : float
        Nonnegative diagonal loading applied to all covariances.

    Returns
    -------
    GroupEstimates
    """
    if ridge_jitter < 0:
        raise ValueError("ridge_jitter must be >= 0")
    n, p, G = dataset.n, dataset.p, dataset.G
    Bhat = np.empty((p, G))
    Sigma_g = []
    rss = 0.0
    for g, (X, y) in enumerate(dataset.groups):
        S = (X.T @ X) / n + ridge_jitter * np.eye(p)
        try:
            factor = scipy.linalg.cho_factor(S, lower=True)
        except scipy.linalg.LinAlgError:
            raise SingularFitError(
                f"group {dataset.labels[g]}: design scatter is singular;"
                " a positive ridge_jitter is required",
                group=dataset.labels[g],
            ) from None
        pivots = np.abs(np.diag(factor[0])) ** 2
        if pivots.min() <= _PIVOT_RTOL * pivots.max():
            raise SingularFitError(
                f"group {dataset.labels[g]}: design scatter is numerically"
                " rank-deficient",
                group=dataset.labels[g],
            )
        b = scipy.linalg.cho_solve(factor, (X.T @ y) / n)
        Bhat[:, g] = b
        Sigma_g.append(S)
        r = y - X @ b
        rss += float(r @ r)
    X_all = dataset.design_stack()
    Sigma_hat = (X_all.T @ X_all) / (n * G) + ridge_jitter * np.eye(p)
    approximate = p >= n
    dof = G * n if approximate else G * (n - p)
    sigma2 = rss / dof
    return GroupEstimates(
        Bhat=Bhat,
        Sigma_hat=Sigma_hat,
        Sigma_g_hat=tuple(Sigma_g),
        sigma2_hat=sigma2,
        ridge_jitter_used=float(ridge_jitter),
        n=n,
        sigma2_approximate=approximate,
        labels=dataset.labels,
    )


def bagging(estimates):
    """Plain average of the per-group coefficient vectors."""
    return estimates.Bhat.mean(axis=1)


def _parse_cell(raw, line_no, column):
    try:
        return float(raw)
    except ValueError:
        raise CsvFormatError(
            f"line {line_no}, column {column!r}: cannot parse {raw!r} as a number",
            line=line_no,
            column=column,
        ) from None


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    if not rows or not any(rows):
        raise CsvFormatError(f"{path}: empty file", line=1)
    return rows


def _check_equal_sizes(order, buckets):
    sizes = {label: len(buckets[label]) for label in order}
    if len(set(sizes.values())) > 1:
        detail = ", ".join(f"{k}={v}" for k, v in sizes.items())
        raise CsvFormatError(f"groups must have equal sizes, got {detail}")


def load_grouped_csv(path):
    """Read one CSV holding every group, tagged by a ``group`` column.

    The header row is required. The response column must be named ``y``;
    every remaining non-group column is a predictor, in header order.
    """
    rows = _read_rows(path)
    header = rows[0]
    if "group" not in header:
        raise CsvFormatError(f"{path}: header must contain a 'group' column", line=1)
    if "y" not in header:
        raise CsvFormatError(f"{path}: header must contain a 'y' column", line=1)
    g_idx = header.index("group")
    y_idx = header.index("y")
    predictors = [c for c in header if c not in ("group", "y")]
    if not predictors:
        raise CsvFormatError(f"{path}: no predictor columns found", line=1)
    pred_idx = [header.index(c) for c in predictors]
    order = []
    buckets = {}
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise CsvFormatError(
                f"line {line_no}: expected {len(header)} fields, got {len(row)}",
                line=line_no,
            )
        label = row[g_idx]
        if label not in buckets:
            order.append(label)
            buckets[label] = []
        x = [_parse_cell(row[j], line_no, header[j]) for j in pred_idx]
        y = _parse_cell(row[y_idx], line_no, "y")
        buckets[label].append((x, y))
    if not order:
        raise CsvFormatError(f"{path}: no data rows", line=2)
    _check_equal_sizes(order, buckets)
    groups = []
    for label in order:
        X = np.array([x for x, _ in buckets[label]], dtype=float)
        y = np.array([v for _, v in buckets[label]], dtype=float)
        groups.append((X, y))
    return GroupedDataset(tuple(groups), labels=tuple(order))


def load_group_csvs(paths):
    """Read one CSV per group; files share the same predictor header."""
    expected = None
    groups = []
    labels = []
    for path in paths:
        rows = _read_rows(path)
        header = rows[0]
        if "group" in header:
            raise CsvFormatError(
                f"{path}: per-group files must not contain a 'group' column", line=1
            )
        if "y" not in header:
            raise CsvFormatError(f"{path}: header must contain a 'y' column", line=1)
        predictors = [c for c in header if c != "y"]
        if not predictors:
            raise CsvFormatError(f"{path}: no predictor columns found", line=1)
        if expected is None:
            expected = predictors
        elif predictors != expected:
            raise CsvFormatError(
                f"{path}: predictor columns {predictors} differ from {expected}",
                line=1,
            )
        y_idx = header.index("y")
        pred_idx = [header.index(c) for c in predictors]
        X_rows, y_vals = [], []
        for line_no, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvFormatError(
                    f"line {line_no}: expected {len(header)} fields, got {len(row)}",
                    line=line_no,
                )
            X_rows.append([_parse_cell(row[j], line_no, header[j]) for j in pred_idx])
            y_vals.append(_parse_cell(row[y_idx], line_no, "y"))
        if not X_rows:
            raise CsvFormatError(f"{path}: no data rows", line=2)
        groups.append((np.array(X_rows), np.array(y_vals)))
        labels.append(os.path.splitext(os.path.basename(path))[0])
    sizes = {lab: g[0].shape[0] for lab, g in zip(labels, groups)}
    if len(set(sizes.values())) > 1:
        detail = ", ".join(f"{k}={v}" for k, v in sizes.items())
        raise CsvFormatError(f"groups must have equal sizes, got {detail}")
    return GroupedDataset(tuple(groups), labels=tuple(labels))
