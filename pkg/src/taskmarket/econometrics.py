"""Linear panel estimation: multi-way fixed effects, OLS, 2SLS and
cluster-robust standard errors.

Fixed effects are absorbed by alternating within-group demeaning, so the
estimated models never carry an intercept or dummy columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd
from scipy import stats

from . import kernels

ID_COLUMNS = ("firm", "year", "city", "industry", "province")
DEMEAN_TOL = 1e-10
DEMEAN_MAXITER = 1000
RANK_TOL = 1e-10


class EstimationError(RuntimeError):
    pass


class SpecError(ValueError):
    """A design refers to something the panel does not have."""


class RankDeficient(EstimationError):
    def __init__(self, column: int, name: str | None = None):
        self.column = column
        self.name = name
        label = f"{column} ({name})" if name else str(column)
        super().__init__(f"design matrix is rank deficient at column {label}")


class NotConverged(EstimationError):
    def __init__(self, iterations: int):
        self.iterations = iterations
        super().__init__(f"within transform did not converge in {iterations} sweeps")


@dataclass
class PanelDataset:
    """Firm-year rows with id columns and named numeric columns."""

    frame: pd.DataFrame

    def __post_init__(self):
        missing = [c for c in ("firm", "year") if c not in self.frame.columns]
        if missing:
            raise SpecError(f"panel lacks id column(s): {', '.join(missing)}")
        if self.frame.duplicated(["firm", "year"]).any():
            raise SpecError("panel has duplicate (firm, year) rows")

    @property
    def columns(self) -> list[str]:
        return list(self.frame.columns)

    def __len__(self):
        return len(self.frame)

    @classmethod
    def read_csv(cls, path) -> "PanelDataset":
        return cls(pd.read_csv(path))


@dataclass(frozen=True)
class DesignSpec:
    """One regression. Regressors may be interactions written ``a*b``.

    ``endogenous`` must be one of the regressors; ``instruments`` are
    excluded instruments for it.
    """

    outcome: str
    regressors: tuple[str, ...]
    fe_factors: tuple[str, ...] = ()
    cluster: tuple[str, ...] = ()
    endogenous: str | None = None
    instruments: tuple[str, ...] = ()
    name: str = ""

    def __post_init__(self):
        for attr in ("regressors", "fe_factors", "cluster", "instruments"):
            v = getattr(self, attr)
            object.__setattr__(self, attr, (v,) if isinstance(v, str) else tuple(v))
        if not self.regressors:
            raise SpecError("design needs at least one regressor")
        if self.outcome in self.regressors:
            raise SpecError(f"outcome {self.outcome!r} is also a regressor")
        if self.endogenous is not None:
            if self.endogenous not in self.regressors:
                raise SpecError(f"endogenous column {self.endogenous!r} is not a regressor")
            if not self.instruments:
                raise SpecError("an endogenous regressor needs at least one instrument")
        elif self.instruments:
            raise SpecError("instruments given without an endogenous regressor")
        if len(self.cluster) > 2:
            raise SpecError("at most two-way clustering is supported")

    def base_columns(self) -> list[str]:
        cols = [self.outcome]
        for term in self.regressors + self.instruments:
            cols.extend(term.split("*"))
        cols.extend(self.fe_factors)
        cols.extend(self.cluster)
        return list(dict.fromkeys(c.strip() for c in cols))


@dataclass
class EstimateResult:
    terms: list[str]
    coef: np.ndarray
    se: np.ndarray
    n: int
    r2_within: float
    method: str = "ols"
    dropped_rows: int = 0
    demean_iterations: int = 0
    first_stage_f: float | None = None
    weak_instrument: bool = False
    dof_resid: int = 0
    name: str = ""
    extra: dict = field(default_factory=dict)

    def __getitem__(self, term: str) -> tuple[float, float]:
        i = self.terms.index(term)
        return float(self.coef[i]), float(self.se[i])

    def pvalues(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.abs(self.coef / self.se)
        return 2.0 * stats.t.sf(t, max(self.dof_resid, 1))


def significance_stars(p: float) -> str:
    """``*`` p<0.05, ``**`` p<0.01, ``***`` p<0.001."""
    if not math.isfinite(p):
        return ""
    return "***" if p < 0.001 else "**" if p < 0.01 else "*" if p < 0.05 else ""


# --- building blocks ---------------------------------------------------------

def factor_codes(frame: pd.DataFrame, factors: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    codes = np.empty((len(frame), len(factors)), dtype=np.int64)
    levels = np.empty(len(factors), dtype=np.int64)
    for j, f in enumerate(factors):
        c, uniq = pd.factorize(frame[f], sort=True)
        codes[:, j] = c
        levels[j] = len(uniq)
    return codes, levels


def within_transform(matrix: np.ndarray, codes: np.ndarray, levels: np.ndarray,
                     tol: float = DEMEAN_TOL, maxiter: int = DEMEAN_MAXITER) -> tuple[np.ndarray, int]:
    """Demean every column of ``matrix`` within the groups of every factor.

    Returns ``(demeaned copy, sweeps)``. One factor needs a single sweep;
    several are iterated until the largest group mean removed in a sweep is
    at most ``tol``.
    """
    X = np.array(matrix, dtype=np.float64, order="C", copy=True)
    if X.ndim == 1:
        X = X[:, None]
    codes = np.ascontiguousarray(codes, dtype=np.int64).reshape(len(X), -1)
    levels = np.ascontiguousarray(levels, dtype=np.int64)
    if codes.shape[1] == 0:
        return X, 0
    sweeps, converged = kernels.demean_alternating(X, codes, levels, tol, maxiter)
    if not converged:
        raise NotConverged(sweeps)
    return X, sweeps


def ols(X: np.ndarray, y: np.ndarray, names: Sequence[str] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Least squares by Householder QR. Returns ``(beta, residuals)``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    if n < k:
        raise EstimationError(f"{n} rows for {k} columns")
    q, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    scale = np.linalg.norm(X, axis=0)
    for j in range(k):
        if scale[j] == 0.0 or diag[j] <= RANK_TOL * max(scale[j], 1.0):
            raise RankDeficient(j, names[j] if names else None)
    beta = np.linalg.solve(r, q.T @ y)
    return beta, y - X @ beta


def _cluster_meat(scores: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, int]:
    codes, uniq = pd.factorize(labels)
    g = len(uniq)
    sums = np.zeros((g, scores.shape[1]))
    np.add.at(sums, codes, scores)
    return sums.T @ sums, g


def cluster_robust_se(X: np.ndarray, residuals: np.ndarray, clusters, k: int | None = None,
                      bread: np.ndarray | None = None) -> np.ndarray:
    """CR1 cluster-robust standard errors.

    ``clusters`` is one label array, or a pair for two-way clustering by
    inclusion-exclusion. Each component gets its own ``G/(G-1)`` factor;
    the ``(n-1)/(n-k)`` factor is common. ``bread`` overrides ``(X'X)^-1``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    k = X.shape[1] if k is None else k
    if bread is None:
        bread = np.linalg.inv(X.T @ X)
    scores = X * np.asarray(residuals, dtype=float)[:, None]

    if isinstance(clusters, (tuple, list)) and len(clusters) == 2 and np.ndim(clusters[0]) == 1:
        a, _ = pd.factorize(np.asarray(clusters[0]))
        b, b_levels = pd.factorize(np.asarray(clusters[1]))
        parts = [(a, 1.0), (b, 1.0), (a.astype(np.int64) * len(b_levels) + b, -1.0)]
    else:
        parts = [(np.asarray(clusters), 1.0)]

    V = np.zeros((X.shape[1], X.shape[1]))
    for labels, sign in parts:
        meat, g = _cluster_meat(scores, labels)
        if g < 2:
            raise EstimationError("cluster-robust errors need at least two clusters")
        V += sign * (g / (g - 1.0)) * (bread @ meat @ bread)
    V *= (n - 1.0) / (n - k)
    diag = np.diag(V)
    if np.any(diag < 0):
        # two-way variance is not guaranteed PSD; clamp as is customary
        diag = np.clip(diag, 0.0, None)
    return np.sqrt(diag)


def classical_se(X: np.ndarray, residuals: np.ndarray, dof: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    sigma2 = float(residuals @ residuals) / dof
    return np.sqrt(np.diag(sigma2 * np.linalg.inv(X.T @ X)))


@dataclass
class TwoSLSFit:
    coef: np.ndarray
    residuals: np.ndarray
    fitted_design: np.ndarray  # endogenous column replaced by first-stage fit
    first_stage_f: float
    weak_instrument: bool


def two_sls(y: np.ndarray, endogenous: np.ndarray, exogenous: np.ndarray | None,
            instruments: np.ndarray, names: Sequence[str] | None = None) -> TwoSLSFit:
    """Two-stage least squares for one endogenous regressor.

    Coefficients are ordered ``[endogenous, *exogenous]``. Residuals use the
    actual endogenous values. The first-stage F tests the excluded
    instruments jointly; F < 10 sets ``weak_instrument``.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    x = np.asarray(endogenous, dtype=float).reshape(n)
    W = np.zeros((n, 0)) if exogenous is None else np.asarray(exogenous, dtype=float).reshape(n, -1)
    Z = np.asarray(instruments, dtype=float).reshape(n, -1)
    m, p = Z.shape[1], W.shape[1]
    if m < 1:
        raise EstimationError("2SLS needs at least one instrument")

    first = np.hstack([Z, W])
    pi, v = ols(first, x)
    x_hat = first @ pi
    if p:
        _, v_r = ols(W, x)
    else:
        v_r = x
    rss_u, rss_r = float(v @ v), float(v_r @ v_r)
    dof = n - m - p
    f_stat = ((rss_r - rss_u) / m) / (rss_u / dof) if rss_u > 0 and dof > 0 else math.inf

    design_hat = np.hstack([x_hat[:, None], W])
    beta, _ = ols(design_hat, y, names)
    resid = y - np.hstack([x[:, None], W]) @ beta
    return TwoSLSFit(beta, resid, design_hat, f_stat, f_stat < 10.0)


# --- full specification ------------------------------------------------------

def _term_values(frame: pd.DataFrame, term: str) -> np.ndarray:
    parts = [p.strip() for p in term.split("*")]
    out = frame[parts[0]].to_numpy(dtype=float)
    for p in parts[1:]:
        out = out * frame[p].to_numpy(dtype=float)
    return out


def estimate_spec(panel: PanelDataset, spec: DesignSpec) -> EstimateResult:
    """Listwise-delete, absorb fixed effects, fit OLS or 2SLS, attach SEs.

    Standard errors are CR1 when ``spec.cluster`` is set and classical
    otherwise, with residual degrees of freedom reduced by the absorbed
    levels.
    """
    frame = panel.frame
    missing = [c for c in spec.base_columns() if c not in frame.columns]
    if missing:
        raise SpecError(f"unknown column(s): {', '.join(missing)}")
    numeric = [c for c in dict.fromkeys(
        p.strip() for t in (spec.outcome,) + spec.regressors + spec.instruments for p in t.split("*"))]
    for c in numeric:
        if not pd.api.types.is_numeric_dtype(frame[c]):
            raise SpecError(f"column {c!r} is not numeric")

    used = frame[spec.base_columns()]
    keep = used.notna().all(axis=1).to_numpy()
    data = frame.loc[keep]
    dropped = int((~keep).sum())
    n = len(data)
    if n == 0:
        raise EstimationError("no complete rows left after dropping missing values")

    terms = list(spec.regressors)
    exog_terms = [t for t in terms if t != spec.endogenous]
    cols = [spec.outcome] + terms + list(spec.instruments)
    raw = np.column_stack([_term_values(data, t) for t in cols])
    codes, levels = factor_codes(data, spec.fe_factors)
    if not spec.fe_factors:
        # no fixed effects: demeaning by one all-sample group is the intercept
        codes, levels = np.zeros((n, 1), dtype=np.int64), np.ones(1, dtype=np.int64)
    M, sweeps = within_transform(raw, codes, levels)
    y = M[:, 0]
    X = M[:, 1:1 + len(terms)]
    Z = M[:, 1 + len(terms):]

    # group means absorbed: one intercept plus levels-1 per factor
    absorbed = 1 + int(sum(levels - 1))
    if spec.endogenous is None:
        beta, resid = ols(X, y, terms)
        design = X
        method = "ols"
        f_stat, weak = None, False
        order = terms
    else:
        j = terms.index(spec.endogenous)
        W = np.delete(X, j, axis=1)
        fit = two_sls(y, X[:, j], W, Z, [spec.endogenous] + exog_terms)
        beta, resid, design = fit.coef, fit.residuals, fit.fitted_design
        method = "2sls"
        f_stat, weak = fit.first_stage_f, fit.weak_instrument
        order = [spec.endogenous] + exog_terms
    k = design.shape[1]
    dof = n - k - absorbed

    if spec.cluster:
        labels = [data[c].to_numpy() for c in spec.cluster]
        se = cluster_robust_se(design, resid, labels[0] if len(labels) == 1 else tuple(labels))
    else:
        if dof <= 0:
            raise EstimationError("no residual degrees of freedom")
        se = classical_se(design, resid, dof)

    tss = float(y @ y)
    r2 = 1.0 - float(resid @ resid) / tss if tss > 0 else 0.0
    # report in the spec's regressor order
    idx = [order.index(t) for t in terms]
    return EstimateResult(
        terms=terms, coef=np.asarray(beta)[idx], se=np.asarray(se)[idx], n=n, r2_within=r2,
        method=method, dropped_rows=dropped, demean_iterations=sweeps, first_stage_f=f_stat,
        weak_instrument=weak, dof_resid=max(dof, 1), name=spec.name,
    )
