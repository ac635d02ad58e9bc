"""Pure-Python/numpy versions of the hot kernels.

Same signatures and semantics as the compiled ``_kernels`` module, which is
preferred when it is importable.
"""

import math

import numpy as np
import scipy.sparse

BRANCH_POINT = -math.exp(-1.0)
_SNAP = 1e-12
_MAX_HALLEY = 50


def _seed(x, branch):
    if x < BRANCH_POINT + 0.25 and x < 0.0:
        # series about the branch point, p -> -p selects the lower branch
        p = math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
        if branch == -1:
            p = -p
        return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    if branch == -1:
        l1 = math.log(-x)
        return l1 - math.log(-l1)
    if x < 3.0:
        lx = math.log1p(x)
        return lx * (1.0 - math.log1p(lx) / (2.0 + lx))
    l1 = math.log(x)
    return l1 - math.log(l1)


def lambert_w(x, branch=0):
    """Real Lambert W on branch 0 (principal) or -1 (lower) by Halley iteration."""
    x = float(x)
    if branch not in (0, -1):
        raise ValueError(f"branch must be 0 or -1, got {branch}")
    if math.isnan(x):
        raise ValueError("argument is NaN")
    if abs(x - BRANCH_POINT) <= _SNAP:
        return -1.0
    if x < BRANCH_POINT:
        raise ValueError(f"argument {x!r} is below -1/e")
    if branch == -1 and x >= 0.0:
        raise ValueError(f"lower branch requires -1/e <= x < 0, got {x!r}")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.inf

    w = _seed(x, branch)
    for _ in range(_MAX_HALLEY):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= dw
        if abs(dw) <= 1e-15 * (1.0 + abs(w)):
            break
    # keep the iterate on the requested side of the branch point
    if branch == 0 and w < -1.0:
        w = -1.0
    elif branch == -1 and w > -1.0:
        w = -1.0
    return w


def demean(data, codes, n_groups, weights, tol=1e-10, maxiter=10_000):
    """Weighted alternating projections, in place.

    Parameters
    ----------
    data : ndarray, shape (n, k), float64, C-contiguous
        Columns to residualize; overwritten.
    codes : ndarray, shape (L, n), int64
        Dense group codes per fixed-effect level.
    n_groups : ndarray, shape (L,), int64
    weights : ndarray, shape (n,), float64
    tol : float
        Stop when no entry moves more than ``tol * (1 + max|column|)`` in a sweep.

    Returns
    -------
    sweeps : int
    max_change : float
        Largest scaled change in the final sweep.
    """
    n, k = data.shape
    if n == 0 or k == 0:
        return 0, 0.0
    scale = 1.0 + np.abs(data).max(axis=0)
    rows = np.arange(n)
    projectors = []
    for level in range(codes.shape[0]):
        g = codes[level]
        m = scipy.sparse.csr_matrix((weights, (g, rows)), shape=(int(n_groups[level]), n))
        wsum = np.asarray(m.sum(axis=1)).ravel()
        projectors.append((g, m, wsum))

    if len(projectors) == 1:
        g, m, wsum = projectors[0]
        data -= ((m @ data) / wsum[:, None])[g]
        return 1, 0.0

    change = math.inf
    sweep = 0
    while sweep < maxiter:
        sweep += 1
        before = data.copy()
        for g, m, wsum in projectors:
            means = (m @ data) / wsum[:, None]
            data -= means[g]
        change = float((np.abs(data - before) / scale).max())
        if change <= tol:
            break
    return sweep, change
