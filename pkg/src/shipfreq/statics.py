"""Comparative statics of the baseline procurement model.

Derivatives of the optimal size ``x_star``, frequency ``n``, financing demand
and minimized cost with respect to ``r``, ``r1``, ``delta`` and ``f`` are
computed by 5-point finite differences of the solver and, where a closed
expression exists, analytically. Each derivative is checked against the sign
the theory claims for it.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams, solve

__all__ = [
    "CLAIMS",
    "CrossPartialReport",
    "Sign",
    "StaticsGrid",
    "StaticsReport",
    "SweepSummary",
    "Verdict",
    "analytic_first_order",
    "cross_partials",
    "draw_params",
    "first_order_statics",
    "numeric_cross_partial",
    "numeric_derivative",
    "statics_sweep",
]

PARAMETERS = ("r", "r1", "delta", "f")
TARGETS = ("x_star", "n", "demand", "cost")
H_FIRST = 1e-5
H_SECOND = 1e-4
BAND = 1e-12
# c x e^(delta r) >> f, read as a factor-of-ten dominance
DOMINANCE = 10.0


class Sign(str, enum.Enum):
    NONNEG = "nonneg"
    NONPOS = "nonpos"
    POS = "pos"
    NEG = "neg"
    AMBIGUOUS = "ambiguous"


class Verdict(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    CONDITION_NOT_MET = "condition_not_met"


# (target, parameter) -> (claim id, claimed sign, condition name or None)
CLAIMS = {
    ("x_star", "r"): ("x_star.r", Sign.NONPOS, None),
    ("x_star", "r1"): ("x_star.r1", Sign.NONPOS, None),
    ("x_star", "delta"): ("x_star.delta", Sign.NONPOS, None),
    ("x_star", "f"): ("x_star.f", Sign.NONNEG, None),
    ("n", "r"): ("n.r", Sign.NONNEG, None),
    ("n", "r1"): ("n.r1", Sign.NONNEG, None),
    ("n", "delta"): ("n.delta", Sign.NONNEG, None),
    ("n", "f"): ("n.f", Sign.NONPOS, None),
    ("demand", "r"): ("demand.r", Sign.NONPOS, None),
    ("demand", "r1"): ("demand.r1", Sign.NONPOS, None),
    ("demand", "delta"): ("demand.delta", Sign.NONPOS, None),
    ("demand", "f"): ("demand.f", Sign.NONNEG, None),
    ("cost", "r"): ("cost.r", Sign.NONNEG, None),
    ("cost", "delta"): ("cost.delta", Sign.NONNEG, "r>r1,cxe^(delta r)>=10f"),
    ("cost", "f"): ("cost.f", Sign.POS, None),
    ("cost", "r1"): ("cost.r1", Sign.NONPOS, None),
    ("demand", "r*f"): ("demand.r*f", Sign.NONPOS, None),
    ("demand", "r1*f"): ("demand.r1*f", Sign.NONPOS, None),
    ("demand", "delta*f"): ("demand.delta*f", Sign.NONPOS, None),
    ("cost", "r*f"): ("cost.r*f", Sign.NONNEG, None),
    ("cost", "delta*f"): ("cost.delta*f", Sign.NONNEG, "0<r1x/q<1,r>r1"),
    ("cost", "r1*f"): ("cost.r1*f", Sign.NEG, "r1*dx/dr1+x>0"),
}


@dataclass(frozen=True)
class StaticsReport:
    parameter: str
    target: str
    analytic_value: float | None
    numeric_value: float
    claimed_sign: Sign
    verdict: Verdict
    claim: str
    band: float


@dataclass(frozen=True)
class CrossPartialReport:
    """Second derivative of ``target`` in ``pair[0]`` and ``f``.

    ``numeric_value`` is the total derivative (nested differences through the
    solver). ``analytic_value`` is the closed expression from the theory,
    which for the demand cross-partials differentiates only the explicit
    ``exp(-delta r)`` factor of dx/df and can differ in magnitude.
    """

    pair: tuple[str, str]
    target: str
    analytic_value: float | None
    numeric_value: float
    claimed_sign: Sign
    verdict: Verdict
    claim: str
    band: float


def _targets(params):
    sol = solve(params)
    return np.array([sol.x_star, sol.n, sol.demand, sol.cost])


def _valid_lower(name, value):
    # r and delta may touch zero, f and r1 must stay positive
    return value >= 0.0 if name in ("r", "delta") else value > 0.0


def _stencil(name, value, h):
    """Offsets and weights of a 5-point first-derivative stencil (central or forward)."""
    if _valid_lower(name, value - 2.0 * h):
        return (-2, -1, 1, 2), np.array([1.0, -8.0, 8.0, -1.0]) / (12.0 * h)
    return (0, 1, 2, 3, 4), np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12.0 * h)


def numeric_derivative(params: ModelParams, parameter: str, fn=_targets, h=None):
    """Five-point derivative of ``fn(params)`` in ``parameter``.

    Returns ``(derivative, scale)`` where ``scale = max|fn| / h`` is the
    round-off scale of the stencil.
    """
    value = getattr(params, parameter)
    if h is None:
        h = H_FIRST * max(1.0, abs(value))
    offsets, weights = _stencil(parameter, value, h)
    evals = [np.asarray(fn(params.replace(**{parameter: value + k * h}))) for k in offsets]
    deriv = sum(w * e for w, e in zip(weights, evals))
    scale = np.max(np.abs(evals), axis=0) / h
    return deriv, scale


def numeric_cross_partial(params: ModelParams, parameter: str, fn=_targets):
    """Nested 5-point differences for the mixed derivative in ``parameter`` and ``f``."""
    h_outer = H_SECOND * max(1.0, abs(getattr(params, parameter)))
    h_inner = H_SECOND * max(1.0, abs(params.f))

    def inner(p):
        d, _ = numeric_derivative(p, "f", fn, h=h_inner)
        return d

    deriv, _ = numeric_derivative(params, parameter, inner, h=h_outer)
    # round-off scale of the nested stencil
    value = np.abs(np.asarray(fn(params)))
    return deriv, value / (h_outer * h_inner)


def _check(value, sign, band):
    if sign is Sign.NONNEG:
        return value >= -band
    if sign is Sign.NONPOS:
        return value <= band
    if sign is Sign.POS:
        return value > 0.0
    if sign is Sign.NEG:
        return value < 0.0
    return True


def _verdict(value, sign, band, condition_met=True):
    if not condition_met:
        return Verdict.CONDITION_NOT_MET
    return Verdict.PASS if _check(value, sign, band) else Verdict.FAIL


def _pieces(params, x):
    c, q, f, d, r, r1 = params.c, params.q, params.f, params.delta, params.r, params.r1
    y = r1 * x / q
    return c, q, f, d, r, r1, y, math.expm1(y), -math.expm1(-y)


def analytic_first_order(params: ModelParams, x: float) -> dict:
    """Closed-form first derivatives at the optimum ``x``.

    Keys are ``(target, parameter)``. Size derivatives come from the
    implicit function theorem with the simplified SOC; cost derivatives from
    the envelope theorem. ``(x_star, r1)`` is omitted (no closed form is used).
    """
    c, q, f, d, r, r1, y, em1, denom = _pieces(params, x)
    dx_df = math.exp(-d * r) / (c * em1)
    soc_ = c * r1 * math.exp(d * (r - r1)) / (q * denom)
    foc_r = c * d * q * (em1 - y) * math.exp(d * r + y - d * r1) / (q * em1 * em1)
    foc_delta = f * r * r1 * math.exp(y - d * r1) / (q * em1 * em1)
    dx = {"f": dx_df, "r": -foc_r / soc_, "delta": -foc_delta / soc_}

    out = {}
    for p, v in dx.items():
        out[("x_star", p)] = v
        out[("n", p)] = -q / (x * x) * v
        out[("demand", p)] = c * v
    e = math.exp(-d * r1)
    out[("cost", "r")] = c * x * d * math.exp(d * (r - r1)) / denom
    out[("cost", "delta")] = (c * x * (r - r1) * math.exp(d * (r - r1)) - f * r1 * e) / denom
    out[("cost", "f")] = e / denom
    out[("cost", "r1")] = -(c * math.exp(d * r) * x + f) * e * (
        d * denom + x / q * math.exp(-y)
    ) / (denom * denom)
    return out


def _dx_dr1(params, x):
    """Implicit derivative of the optimal size in ``r1``, from the FOC itself."""
    _, q, _, _, _, r1, y, em1, _ = _pieces(params, x)
    return -(q / r1**2) * (y * math.exp(y) - em1) / em1


def first_order_statics(params: ModelParams) -> list[StaticsReport]:
    """16 sign reports: four parameters by four targets."""
    sol = solve(params)
    analytic = analytic_first_order(params, sol.x_star)
    c, _, f, d, r, r1 = params.c, params.q, params.f, params.delta, params.r, params.r1
    dominance = r > r1 and c * sol.x_star * math.exp(d * r) >= DOMINANCE * f
    reports = []
    for p in PARAMETERS:
        deriv, scale = numeric_derivative(params, p)
        for i, t in enumerate(TARGETS):
            claim, sign, condition = CLAIMS[(t, p)]
            band = BAND * float(scale[i])
            met = dominance if condition else True
            reports.append(
                StaticsReport(
                    parameter=p,
                    target=t,
                    analytic_value=analytic.get((t, p)),
                    numeric_value=float(deriv[i]),
                    claimed_sign=sign,
                    verdict=_verdict(float(deriv[i]), sign, band, met),
                    claim=claim,
                    band=band,
                )
            )
    return reports


def _analytic_cross(params, x):
    c, q, f, d, r, r1, y, em1, denom = _pieces(params, x)
    dx_df = math.exp(-d * r) / (c * em1)
    dx_dr = -d * f * dx_df
    dx_dr1 = _dx_dr1(params, x)
    e = math.exp(-d * r1)
    ey = math.exp(-y)
    bracket1 = 1.0 - ey - y * ey
    bracket2 = ey * (f * r1 / q * dx_df + 1.0) - 1.0
    return {
        ("demand", "r"): c * (-d * math.exp(-d * r) / (c * em1)),
        ("demand", "r1"): c * (-x * math.exp(y - d * r) / (q * c * em1 * em1)),
        ("demand", "delta"): c * (-r * math.exp(-d * r) / (c * em1)),
        ("cost", "r"): -dx_dr * math.exp(-d * r1 - y) / denom**2,
        ("cost", "delta"): (
            c * (r - r1) * math.exp(d * (r - r1)) * dx_df * bracket1 + r1 * e * bracket2
        ) / denom**2,
        ("cost", "r1"): -(
            (r1 * dx_dr1 + x) / q * math.exp(-d * r1 - y) + d * e * denom
        ) / denom**2,
    }


def cross_partials(params: ModelParams) -> list[CrossPartialReport]:
    """Mixed derivatives of demand and cost in (r, r1, delta) and f."""
    sol = solve(params)
    x = sol.x_star
    analytic = _analytic_cross(params, x)
    y = params.r1 * x / params.q
    conditions = {
        "0<r1x/q<1,r>r1": 0.0 < y < 1.0 and params.r > params.r1,
        "r1*dx/dr1+x>0": params.r1 * _dx_dr1(params, x) + x > 0.0,
    }
    reports = []
    for p in ("r", "r1", "delta"):
        deriv, scale = numeric_cross_partial(params, p)
        for i, t in ((2, "demand"), (3, "cost")):
            claim, sign, condition = CLAIMS[(t, f"{p}*f")]
            band = BAND * float(scale[i])
            met = conditions[condition] if condition else True
            reports.append(
                CrossPartialReport(
                    pair=(p, "f"),
                    target=t,
                    analytic_value=analytic[(t, p)],
                    numeric_value=float(deriv[i]),
                    claimed_sign=sign,
                    verdict=_verdict(float(deriv[i]), sign, band, met),
                    claim=claim,
                    band=band,
                )
            )
    return reports


@dataclass(frozen=True)
class StaticsGrid:
    """Parameter ranges for random draws; ``log`` ranges are sampled log-uniformly."""

    c: tuple = (0.1, 10.0, "log")
    q: tuple = (10.0, 1e4, "log")
    f: tuple = (0.01, 1e3, "log")
    delta: tuple = (0.0, 1.0, "lin")
    r: tuple = (0.0, 0.3, "lin")
    r1: tuple = (0.005, 0.3, "log")

    def __post_init__(self):
        for name in ("c", "q", "f", "delta", "r", "r1"):
            lo, hi, kind = getattr(self, name)
            if kind not in ("log", "lin") or not lo <= hi or (kind == "log" and lo <= 0):
                raise ValueError(f"invalid range for {name}: {getattr(self, name)!r}")


def draw_params(grid: StaticsGrid, draws: int, seed: int) -> list[ModelParams]:
    """Deterministic parameter draws from ``grid``."""
    rng = np.random.default_rng(seed)
    cols = {}
    for name in ("c", "q", "f", "delta", "r", "r1"):
        lo, hi, kind = getattr(grid, name)
        if kind == "log":
            cols[name] = np.exp(rng.uniform(math.log(lo), math.log(hi), draws))
        else:
            cols[name] = rng.uniform(lo, hi, draws)
    return [ModelParams(**{k: float(v[i]) for k, v in cols.items()}) for i in range(draws)]


@dataclass
class SweepSummary:
    """Per-claim verdict counts over a sweep; ``errors`` holds (draw index, message)."""

    counts: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)
    draws: int = 0

    def add(self, claim, verdict):
        row = self.counts.setdefault(claim, {v: 0 for v in Verdict})
        row[Verdict(verdict)] += 1

    def rows(self):
        out = []
        for claim in sorted(self.counts):
            row = self.counts[claim]
            out.append(
                {
                    "claim": claim,
                    "draws": sum(row.values()),
                    "pass": row[Verdict.PASS],
                    "fail": row[Verdict.FAIL],
                    "condition_not_met": row[Verdict.CONDITION_NOT_MET],
                }
            )
        return out

    def failures(self, prefix=""):
        return {r["claim"]: r["fail"] for r in self.rows() if r["claim"].startswith(prefix) and r["fail"]}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(
            buf, ["claim", "draws", "pass", "fail", "condition_not_met"], lineterminator="\n"
        )
        w.writeheader()
        w.writerows(self.rows())
        return buf.getvalue()


def statics_sweep(grid: StaticsGrid | None = None, draws: int = 1000, seed: int = 0) -> SweepSummary:
    """Run first-order and cross-partial checks over ``draws`` random parameter sets.

    A solver error on one draw is recorded in ``errors`` and the sweep continues.
    """
    if draws < 0:
        raise ValueError("draws must be >= 0")
    grid = grid or StaticsGrid()
    summary = SweepSummary(draws=draws)
    for i, params in enumerate(draw_params(grid, draws, seed)):
        try:
            reports = first_order_statics(params) + cross_partials(params)
        except (ArithmeticError, ValueError) as exc:
            summary.errors.append((i, f"{type(exc).__name__}: {exc}"))
            continue
        for rep in reports:
            summary.add(rep.claim, rep.verdict)
    return summary
