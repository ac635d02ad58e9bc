"""Design matrices from a panel: regressor terms, distance splines, group codes."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .spec import EstimationSpec, SpecError

__all__ = [
    "Design",
    "DesignRow",
    "FE_KEYS",
    "SPLINE1_KM",
    "SPLINE2_KM",
    "build_design",
    "spline_band",
    "group_codes",
    "term_values",
]

# distance bands: <= 3970 km, (3970, 9283] km, and the omitted band beyond
SPLINE1_KM = 3970.0
SPLINE2_KM = 9283.0

FE_KEYS = ("firm", "product", "hs6", "hs4", "hs2", "mode", "destination", "year")
_PREFIX = {"hs6": 6, "hs4": 4, "hs2": 2}
_LOG = re.compile(r"log\((\w+)\)")
_OUTCOME_COLUMN = {
    "count": "n_shipments",
    "ln_count": "n_shipments",
    "ln_pershipment_value": "ln_pershipment_value",
    "ln_export_value": "ln_export_value",
    "ln_export_weight": "ln_export_weight",
}


class DesignRow(NamedTuple):
    y: float
    x: np.ndarray
    fe_codes: tuple
    cluster_code: int
    weight: float


@dataclass
class Design:
    y: np.ndarray
    X: np.ndarray
    names: list
    fe_codes: np.ndarray  # (L, n) int64
    fe_names: list
    cluster_codes: np.ndarray | None
    row_ids: np.ndarray
    n_dropped_nonpositive: int = 0

    def __len__(self):
        return len(self.y)

    def row(self, i, weight=1.0):
        cluster = -1 if self.cluster_codes is None else int(self.cluster_codes[i])
        return DesignRow(
            float(self.y[i]), self.X[i], tuple(int(c) for c in self.fe_codes[:, i]), cluster, weight
        )

    def subset(self, mask):
        return Design(
            y=self.y[mask],
            X=self.X[mask],
            names=list(self.names),
            fe_codes=self.fe_codes[:, mask],
            fe_names=list(self.fe_names),
            cluster_codes=None if self.cluster_codes is None else self.cluster_codes[mask],
            row_ids=self.row_ids[mask],
            n_dropped_nonpositive=self.n_dropped_nonpositive,
        )


def _nrows(panel):
    if isinstance(panel, dict):
        return len(next(iter(panel.values()))) if panel else 0
    return len(panel)


def _column(panel, name, term):
    try:
        return panel[name]
    except KeyError:
        raise SpecError(f"term {term!r} needs field {name!r}, which the panel lacks") from None


def _factor(panel, token, term):
    if token in ("spline1", "spline2"):
        # compare in logs so log(9283) itself sits inside the band
        ld = np.asarray(_column(panel, "ln_distance", term), dtype=float)
        cut1, cut2 = math.log(SPLINE1_KM), math.log(SPLINE2_KM)
        if token == "spline1":
            return (ld <= cut1).astype(float)
        return ((ld > cut1) & (ld <= cut2)).astype(float)
    m = _LOG.fullmatch(token)
    if m:
        values = np.asarray(_column(panel, m.group(1), term), dtype=float)
        bad = np.flatnonzero(~(values > 0))
        if bad.size:
            raise SpecError(
                f"term {term!r}: nonpositive value {values[bad[0]]!r} under log at row {bad[0]}"
            )
        return np.log(values)
    values = _column(panel, token, term)
    try:
        return np.asarray(values, dtype=float)
    except ValueError:
        raise SpecError(f"term {term!r}: field {token!r} is not numeric") from None


def term_values(panel, term: str) -> np.ndarray:
    """Evaluate one regressor term (factors joined by ``:``) on every panel row."""
    out = np.ones(_nrows(panel))
    for token in term.split(":"):
        out = out * _factor(panel, token.strip(), term)
    return out


def _key_column(panel, key):
    if key not in FE_KEYS:
        raise SpecError(f"unknown grouping key {key!r}; expected one of {FE_KEYS}")
    if key in _PREFIX:
        products = _column(panel, "product", key)
        n = _PREFIX[key]
        return np.array([p[:n] for p in products], dtype=object)
    return _column(panel, key, key)


def group_codes(panel, key: str):
    """Dense integer codes for a grouping like ``product*mode*year``.

    Returns ``(codes, n_groups)``; codes follow the sorted order of the keys.
    """
    parts = [p.strip() for p in key.split("*")]
    inverse = []
    for p in parts:
        values = np.asarray(_key_column(panel, p))
        if values.dtype == object:
            values = values.astype(str)
        _, inv = np.unique(values, return_inverse=True)
        inverse.append(inv.astype(np.int64))
    if len(inverse) == 1:
        codes = inverse[0]
    else:
        _, codes = np.unique(np.column_stack(inverse), axis=0, return_inverse=True)
    codes = np.asarray(codes, dtype=np.int64).ravel()
    return codes, int(codes.max()) + 1 if codes.size else 0


def _outcome(panel, spec):
    column = _OUTCOME_COLUMN[spec.outcome]
    y = np.asarray(_column(panel, column, spec.outcome), dtype=float)
    if spec.outcome == "ln_count":
        keep = y > 0
        return np.where(keep, np.log(np.where(keep, y, 1.0)), np.nan), keep
    if spec.outcome == "count":
        return y, np.ones(len(y), dtype=bool)
    return y, np.isfinite(y)


def build_design(panel, spec: EstimationSpec) -> Design:
    """Assemble outcome, regressors, FE codes and cluster codes.

    Without fixed effects a ``const`` column is prepended. For log outcomes,
    rows whose outcome is zero or missing are left out and counted in
    ``n_dropped_nonpositive``.
    """
    n = _nrows(panel)
    y, keep = _outcome(panel, spec)
    if spec.outcome == "count" and np.any(y < 0):
        bad = int(np.flatnonzero(y < 0)[0])
        raise SpecError(f"negative count {y[bad]!r} at row {bad}")

    columns, names = [], []
    if not spec.fe_levels:
        columns.append(np.ones(n))
        names.append("const")
    for term in spec.regressors:
        values = term_values(panel, term)
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise SpecError(f"term {term!r} is not finite at row {bad[0]}")
        columns.append(values)
        names.append(term)
    X = np.column_stack(columns) if columns else np.empty((n, 0))

    fe = [group_codes(panel, level)[0] for level in spec.fe_levels]
    fe_codes = np.vstack(fe) if fe else np.empty((0, n), dtype=np.int64)
    cluster = group_codes(panel, spec.cluster)[0] if spec.cluster else None

    design = Design(
        y=y,
        X=np.ascontiguousarray(X, dtype=float),
        names=names,
        fe_codes=np.ascontiguousarray(fe_codes, dtype=np.int64),
        fe_names=list(spec.fe_levels),
        cluster_codes=cluster,
        row_ids=np.arange(n),
    )
    if not keep.all():
        design = design.subset(keep)
        design.n_dropped_nonpositive = int(n - keep.sum())
    return design


def spline_band(distance_km: float) -> tuple[int, int]:
    """``(spline1, spline2)`` dummies for a distance in km."""
    return int(distance_km <= SPLINE1_KM), int(SPLINE1_KM < distance_km <= SPLINE2_KM)
