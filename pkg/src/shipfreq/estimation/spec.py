"""Specification and result containers shared by the estimators."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

OUTCOMES = ("count", "ln_count", "ln_pershipment_value", "ln_export_value", "ln_export_weight")
LOG_OUTCOMES = OUTCOMES[1:]
ESTIMATORS = ("ols", "ppml")


class SpecError(ValueError):
    """Invalid estimation specification or missing panel field."""


class AllRowsDroppedError(ValueError):
    """Singleton or separation drops emptied the estimation sample."""


class EstimationConvergenceError(ArithmeticError):
    """IRLS failed to converge; ``trace`` lists (iteration, deviance, relative change)."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


@dataclass(frozen=True)
class EstimationSpec:
    """What to regress on what.

    Parameters
    ----------
    outcome : str
        One of ``count`` (PPML) or a log outcome (OLS).
    regressors : tuple of str
        Term descriptors. A term is one or more factors joined by ``:``; a
        factor is a panel column, ``log(column)``, ``spline1`` or ``spline2``.
    fe_levels : tuple of str
        Fixed-effect groupings; each is keys joined by ``*`` from firm,
        product, hs6, hs4, hs2, mode, destination, year.
    cluster : str or None
        Grouping key for clustered standard errors, same grammar as FEs.
    estimator : {'ols', 'ppml'}
    """

    outcome: str
    regressors: tuple = ()
    fe_levels: tuple = ()
    cluster: str | None = None
    estimator: str = "ppml"

    def __post_init__(self):
        object.__setattr__(self, "regressors", tuple(self.regressors))
        object.__setattr__(self, "fe_levels", tuple(self.fe_levels))
        if self.estimator not in ESTIMATORS:
            raise SpecError(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")
        if self.outcome not in OUTCOMES:
            raise SpecError(f"outcome must be one of {OUTCOMES}, got {self.outcome!r}")
        if self.estimator == "ppml" and self.outcome != "count":
            raise SpecError("ppml requires outcome = count")
        if self.estimator == "ols" and self.outcome not in LOG_OUTCOMES:
            raise SpecError("ols requires a log outcome")
        if len(set(self.regressors)) != len(self.regressors):
            raise SpecError("duplicate regressor terms")

    def describe(self):
        return (
            f"estimator={self.estimator} outcome={self.outcome} "
            f"regressors={','.join(self.regressors)} fe={','.join(self.fe_levels) or '-'} "
            f"cluster={self.cluster or '-'}"
        )


@dataclass
class EstimateResult:
    """Fitted coefficients with clustered covariance.

    ``fit`` is R-squared for OLS and ``1 - deviance / null deviance`` for
    PPML; ``fit_label`` says which.
    """

    names: list
    coefficients: np.ndarray
    vcov_clustered: np.ndarray
    n_obs_used: int
    n_dropped_separation: int
    n_dropped_singleton: int
    fit: float
    fit_label: str
    iterations: int
    deviance_change: float
    estimator: str
    dropped_collinear: list = field(default_factory=list)
    n_dropped_nonpositive: int = 0
    n_clusters: int = 0
    small_sample_factor: float = 1.0
    kept: np.ndarray | None = None
    fitted: np.ndarray | None = None
    spec: EstimationSpec | None = None

    @property
    def se(self):
        return np.sqrt(np.clip(np.diag(self.vcov_clustered), 0.0, None))

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown coefficient {name!r}; have {self.names}") from None

    def coef(self, name):
        return float(self.coefficients[self.index(name)])

    def stderr(self, name):
        return float(self.se[self.index(name)])

    def as_dict(self):
        return dict(zip(self.names, map(float, self.coefficients)))

    def metadata(self):
        """Run metadata as ordered ``key: value`` lines."""
        lines = []
        if self.spec is not None:
            lines.append(f"spec: {self.spec.describe()}")
        lines += [
            f"estimator: {self.estimator}",
            f"n_obs_used: {self.n_obs_used}",
            f"n_dropped_singleton: {self.n_dropped_singleton}",
            f"n_dropped_separation: {self.n_dropped_separation}",
            f"n_dropped_nonpositive_outcome: {self.n_dropped_nonpositive}",
            f"dropped_collinear: {','.join(self.dropped_collinear) or '-'}",
            f"n_clusters: {self.n_clusters}",
            f"small_sample_factor: G/(G-1)*(N-1)/(N-K) = {self.small_sample_factor!r}",
            f"{self.fit_label}: {self.fit!r}",
            f"iterations: {self.iterations}",
            f"final_deviance_change: {self.deviance_change!r}",
        ]
        return "\n".join(lines) + "\n"

    def to_csv(self, effects=None):
        """Coefficient table: term, coefficient, clustered_se, effect_per_10pct_or_unit."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["term", "coefficient", "clustered_se", "effect_per_10pct_or_unit"])
        eff = {} if effects is None else {e.term: e.effect_pct for e in effects}
        for name, b, s in zip(self.names, self.coefficients, self.se):
            e = eff.get(name)
            w.writerow([name, repr(float(b)), repr(float(s)), "" if e is None else repr(e)])
        return buf.getvalue()

