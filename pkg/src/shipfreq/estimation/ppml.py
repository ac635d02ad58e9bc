"""Poisson pseudo-maximum likelihood by IRLS with absorbed fixed effects."""

from __future__ import annotations

import math

import numpy as np

from .absorb import demean, singleton_mask
from .design import Design
from .ols import prune, wls
from .spec import AllRowsDroppedError, EstimateResult, EstimationConvergenceError, EstimationSpec, SpecError
from .vcov import cluster_vcov

__all__ = ["deviance", "fit_ppml", "fe_separation_mask", "relu_separation", "sample_mask"]

DEVIANCE_RTOL = 1e-9
MAX_ITER = 100
MAX_HALVINGS = 30
_ETA_CAP = 700.0


def deviance(y, mu):
    """Poisson deviance ``2 sum(y log(y/mu) - (y - mu))`` with ``0 log 0 = 0``."""
    pos = y > 0
    term = mu - y
    term[pos] += y[pos] * np.log(y[pos] / mu[pos])
    return 2.0 * float(term.sum())


def fe_separation_mask(y, fe_codes, keep):
    """Rows outside FE groups whose outcomes are all zero."""
    out = keep.copy()
    for row in fe_codes:
        totals = np.bincount(row[out], weights=y[out], minlength=int(row.max()) + 1)
        out &= totals[row] > 0
    return out


def sample_mask(y, fe_codes, keep=None):
    """Iterate singleton and all-zero-group removal to a fixed point.

    Returns ``(keep, n_singleton, n_separated)``.
    """
    keep = np.ones(len(y), dtype=bool) if keep is None else keep.copy()
    n_single = n_sep = 0
    while True:
        before = int(keep.sum())
        k1 = singleton_mask(fe_codes, keep)
        n_single += before - int(k1.sum())
        k2 = fe_separation_mask(y, fe_codes, k1) if k1.any() else k1
        n_sep += int(k1.sum()) - int(k2.sum())
        keep = k2
        if int(keep.sum()) == before or not keep.any():
            return keep, n_single, n_sep


def _fit_linear(u, X, fe_codes, weights):
    """Fitted values (FE part included) of a weighted regression of ``u`` on ``X`` and FEs."""
    if fe_codes.shape[0]:
        data, _ = demean(np.column_stack([u, X]), fe_codes, weights)
        ut, Xt = data[:, 0], data[:, 1:]
    else:
        ut, Xt = u, X
    beta = wls(Xt, ut, weights)
    return u - (ut - Xt @ beta)


def relu_separation(y, X, fe_codes, tol=1e-7, maxiter=100):
    """Certify separated observations with the iterated ReLU regression.

    Looks for a direction ``z`` in the span of the regressors and fixed
    effects with ``z = 0`` where ``y > 0`` and ``z >= 0`` where ``y = 0``;
    rows with ``z > 0`` are separated. Returns a boolean mask of them.
    """
    zero = y == 0
    sep = np.zeros(len(y), dtype=bool)
    if not zero.any() or zero.all():
        return sep
    weights = np.where(zero, 1.0, 1e8)
    u = zero.astype(float)
    for _ in range(maxiter):
        xb = _fit_linear(u, X, fe_codes, weights)
        xb[np.abs(xb) < tol] = 0.0
        if np.all(xb[zero] >= 0.0):
            return zero & (xb > 0.0)
        u = np.where(zero, np.maximum(xb, 0.0), 0.0)
        if not u.any():
            return sep
    return sep


def fit_ppml(design: Design, spec: EstimationSpec | None = None, separation: bool = True) -> EstimateResult:
    """Poisson PML with FEs absorbed inside each IRLS step.

    Each iteration forms the working response ``z = eta + (y - mu)/mu``,
    sweeps the FEs out of ``z`` and the regressors with weights ``mu`` and
    solves the weighted least squares problem. Steps that raise the deviance
    are halved. Iteration stops once the relative deviance change is at most
    1e-9, followed by one polishing step.
    """
    y = np.asarray(design.y, dtype=float)
    if np.any(y < 0) or not np.all(np.isfinite(y)):
        raise SpecError("ppml needs finite nonnegative counts")
    fe = design.fe_codes
    n_all = len(y)
    if fe.shape[0]:
        keep, n_single, n_sep = sample_mask(y, fe)
    else:
        keep, n_single, n_sep = np.ones(n_all, dtype=bool), 0, 0
    if not keep.any():
        raise AllRowsDroppedError(f"singleton and separation drops removed all {n_all} rows")

    X_all = design.X
    if separation:
        sep = relu_separation(y[keep], X_all[keep], fe[:, keep])
        if sep.any():
            idx = np.flatnonzero(keep)[sep]
            keep[idx] = False
            n_sep += int(sep.sum())
            if fe.shape[0] and keep.any():
                keep, s2, p2 = sample_mask(y, fe, keep)
                n_single += s2
                n_sep += p2
    if not keep.any():
        raise AllRowsDroppedError(f"singleton and separation drops removed all {n_all} rows")

    y = y[keep]
    X = X_all[keep]
    fe = fe[:, keep]
    n = len(y)

    mu = 0.5 * (y + y.mean())
    eta = np.log(mu)
    dev = deviance(y, mu)
    cols = None
    beta = np.zeros(0)
    z_prev = z_tilde = X_tilde = None
    trace = []
    change = math.inf
    converged = False
    for it in range(1, MAX_ITER + 1):
        z = eta + (y - mu) / mu
        if fe.shape[0]:
            if X_tilde is None:
                data = np.column_stack([z, X])
            else:
                # FE-span parts of the previous residuals vanish under any weights
                data = np.column_stack([z_tilde + (z - z_prev), X_tilde])
            data, _ = demean(data, fe, mu)
            zt, Xt_full = data[:, 0], data[:, 1:]
            z_tilde, X_tilde, z_prev = zt, Xt_full, z
        else:
            zt, Xt_full = z, X
        if cols is None:
            cols, dropped = prune(Xt_full * np.sqrt(mu)[:, None], design.names)
        Xt = Xt_full[:, cols]
        beta_full = wls(Xt, zt, mu)
        eta_new = np.minimum(z - (zt - Xt @ beta_full), _ETA_CAP)
        mu_new = np.exp(eta_new)
        dev_new = deviance(y, mu_new)
        halvings = 0
        while not dev_new <= dev * (1.0 + 1e-12) and halvings < MAX_HALVINGS and it > 1:
            eta_new = 0.5 * (eta + eta_new)
            mu_new = np.exp(eta_new)
            dev_new = deviance(y, mu_new)
            halvings += 1
        beta = beta_full if beta.size != beta_full.size else beta + 0.5**halvings * (beta_full - beta)
        change = abs(dev_new - dev) / max(min(dev, dev_new), 0.1)
        trace.append((it, dev_new, change))
        eta, mu, dev = eta_new, mu_new, dev_new
        if change <= DEVIANCE_RTOL:
            if converged:
                break
            # one extra polishing step; Newton convergence makes it nearly free
            converged = True
    if not converged:
        raise EstimationConvergenceError(
            f"IRLS did not reach relative deviance change {DEVIANCE_RTOL} in {MAX_ITER} iterations",
            trace,
        )

    # refresh the absorbed design at the final weights for the sandwich
    if fe.shape[0]:
        Xt, _ = demean(X[:, cols], fe, mu)
    else:
        Xt = X[:, cols]
    cluster = None if design.cluster_codes is None else design.cluster_codes[keep]
    V, G, factor = cluster_vcov(Xt, y - mu, mu, cluster)

    null_dev = deviance(y, np.full(n, y.mean()))
    fit = 1.0 - dev / null_dev if null_dev > 0 else 1.0
    return EstimateResult(
        names=[design.names[i] for i in cols],
        coefficients=beta,
        vcov_clustered=V,
        n_obs_used=n,
        n_dropped_separation=n_sep,
        n_dropped_singleton=n_single,
        fit=fit,
        fit_label="pseudo_r_squared",
        iterations=it,
        deviance_change=change,
        estimator="ppml",
        dropped_collinear=dropped,
        n_dropped_nonpositive=design.n_dropped_nonpositive,
        n_clusters=G,
        small_sample_factor=factor,
        kept=design.row_ids[keep],
        fitted=mu,
        spec=spec,
    )
