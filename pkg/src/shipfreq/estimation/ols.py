"""Least squares with absorbed fixed effects."""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

from .absorb import absorb_fixed_effects
from .design import Design
from .spec import AllRowsDroppedError, EstimateResult, EstimationSpec
from .vcov import cluster_vcov

COLLINEAR_RTOL = 1e-9


class CollinearityWarning(UserWarning):
    """Regressors were dropped as linearly dependent."""


def independent_columns(X: np.ndarray, rtol: float = COLLINEAR_RTOL) -> np.ndarray:
    """Indices (ascending) of a maximal independent column set by pivoted QR.

    A column is dependent when its pivot falls below ``rtol`` times the leading one.
    """
    k = X.shape[1]
    if k == 0:
        return np.arange(0)
    _, R, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        return np.arange(0)
    rank = int(np.sum(diag > rtol * diag[0]))
    return np.sort(piv[:rank])


def prune(X, names, rtol=COLLINEAR_RTOL):
    """Drop dependent columns, warning with their names. Returns ``(cols, dropped)``."""
    cols = independent_columns(X, rtol)
    dropped = [n for i, n in enumerate(names) if i not in set(cols.tolist())]
    if dropped:
        warnings.warn(f"dropped collinear regressors: {', '.join(dropped)}", CollinearityWarning, stacklevel=3)
    return cols, dropped


def wls(X, y, weights=None):
    """Weighted least squares by QR; returns coefficients."""
    if weights is not None:
        sw = np.sqrt(weights)
        X = X * sw[:, None]
        y = y * sw
    if X.shape[1] == 0:
        return np.zeros(0)
    Q, R = np.linalg.qr(X, mode="reduced")
    return scipy.linalg.solve_triangular(R, Q.T @ y)


def fit_ols(design: Design, spec: EstimationSpec | None = None) -> EstimateResult:
    """OLS of the design's outcome on its regressors, FEs absorbed.

    Singleton FE groups are removed first. R-squared is measured against the
    original outcome, so it counts the variation the fixed effects explain.
    """
    y, X = design.y, design.X
    n_all = len(y)
    if n_all == 0:
        raise AllRowsDroppedError("no rows to estimate on")
    data = np.column_stack([y, X])
    if design.fe_codes.shape[0]:
        absorbed = absorb_fixed_effects(data, design.fe_codes)
        keep, n_single = absorbed.keep, absorbed.n_dropped_singleton
        tilde = absorbed.data
    else:
        keep, n_single = np.ones(n_all, dtype=bool), 0
        tilde = data
    yt, Xt = tilde[:, 0], tilde[:, 1:]

    cols, dropped = prune(Xt, design.names)
    Xt = Xt[:, cols]
    beta = wls(Xt, yt)
    resid = yt - Xt @ beta
    y_used = y[keep]
    fitted = y_used - resid
    sst = float(np.sum((y_used - y_used.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / sst if sst > 0 else 1.0

    cluster = None if design.cluster_codes is None else design.cluster_codes[keep]
    V, G, factor = cluster_vcov(Xt, resid, None, cluster)
    return EstimateResult(
        names=[design.names[i] for i in cols],
        coefficients=beta,
        vcov_clustered=V,
        n_obs_used=int(keep.sum()),
        n_dropped_separation=0,
        n_dropped_singleton=n_single,
        fit=r2,
        fit_label="r_squared",
        iterations=1,
        deviance_change=0.0,
        estimator="ols",
        dropped_collinear=dropped,
        n_dropped_nonpositive=design.n_dropped_nonpositive,
        n_clusters=G,
        small_sample_factor=factor,
        kept=design.row_ids[keep],
        fitted=fitted,
        spec=spec,
    )


__all__ = ["CollinearityWarning", "fit_ols", "independent_columns", "prune", "wls"]
