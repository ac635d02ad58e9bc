"""Fixed-effect absorption by weighted alternating projections."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from .spec import AllRowsDroppedError

DEMEAN_TOL = 1e-10


def recode(fe_codes: np.ndarray):
    """Re-densify each FE level's codes; returns ``(codes, n_groups)``."""
    fe_codes = np.asarray(fe_codes, dtype=np.int64)
    out = np.empty_like(fe_codes)
    sizes = np.empty(fe_codes.shape[0], dtype=np.int64)
    for lev, row in enumerate(fe_codes):
        _, inv = np.unique(row, return_inverse=True)
        out[lev] = inv.ravel()
        sizes[lev] = int(out[lev].max()) + 1 if row.size else 0
    return np.ascontiguousarray(out), sizes


def singleton_mask(fe_codes: np.ndarray, keep: np.ndarray | None = None) -> np.ndarray:
    """Rows that survive iterative removal of one-observation FE groups."""
    fe_codes = np.asarray(fe_codes)
    n = fe_codes.shape[1]
    keep = np.ones(n, dtype=bool) if keep is None else keep.copy()
    changed = True
    while changed and keep.any():
        changed = False
        for row in fe_codes:
            counts = np.bincount(row[keep], minlength=int(row.max()) + 1)
            lone = keep & (counts[row] == 1)
            if lone.any():
                keep &= ~lone
                changed = True
    return keep


def demean(data, fe_codes, weights=None, tol=DEMEAN_TOL, backend=None):
    """Return a demeaned copy of ``data`` (n, k) and the ``(sweeps, change)`` trace.

    ``fe_codes`` must already be dense per level (see :func:`recode`).
    """
    data = np.array(data, dtype=float, order="C", copy=True)
    if data.ndim == 1:
        data = data[:, None]
    n = data.shape[0]
    if fe_codes.shape[0] == 0:
        return data, (0, 0.0)
    codes, sizes = recode(fe_codes)
    w = np.ones(n) if weights is None else np.ascontiguousarray(weights, dtype=float)
    impl = kernels.get_backend(backend)
    sweeps, change = impl.demean(data, codes, sizes, w, tol)
    return data, (int(sweeps), float(change))


@dataclass
class Absorbed:
    data: np.ndarray
    keep: np.ndarray
    n_dropped_singleton: int
    sweeps: int
    change: float


def absorb_fixed_effects(data, fe_codes, weights=None, tol=DEMEAN_TOL, drop_singletons=True):
    """Drop singleton groups, then sweep out every FE level from ``data``.

    Parameters
    ----------
    data : ndarray, shape (n, k)
        Outcome and regressor columns.
    fe_codes : ndarray, shape (L, n)
        Integer group code per row for each FE level, L >= 1.
    weights : ndarray, optional
        Positive row weights.

    Returns
    -------
    Absorbed
        Demeaned retained rows, the retention mask and the number dropped.

    Raises
    ------
    AllRowsDroppedError
        If the singleton cascade removes every row.
    """
    fe_codes = np.asarray(fe_codes, dtype=np.int64)
    if fe_codes.ndim != 2 or fe_codes.shape[0] < 1:
        raise ValueError("need at least one fixed-effect level")
    data = np.asarray(data, dtype=float)
    n = data.shape[0]
    keep = singleton_mask(fe_codes) if drop_singletons else np.ones(n, dtype=bool)
    if not keep.any():
        raise AllRowsDroppedError(f"singleton removal dropped all {n} rows")
    w = None if weights is None else np.asarray(weights, dtype=float)[keep]
    out, (sweeps, change) = demean(data[keep], fe_codes[:, keep], w, tol)
    return Absorbed(out, keep, int(n - keep.sum()), sweeps, change)
