"""Importer procurement cost and the optimal shipment size.

An importer buys ``q`` units a year in equally spaced shipments of size
``x`` (so ``n = q / x`` shipments a year). The exporter pre-finances
production ``c * x`` at rate ``r`` for the delivery time ``delta`` and is
paid ``c * x * exp(delta * r) + f`` on delivery; the importer discounts at
``r1``. All rates are annual and continuously compounded, ``delta`` is in
years.

Two variants are supported:

``baseline``
    ``f`` is paid at shipment and needs no financing.
``upfront_f``
    ``f`` is borrowed together with working capital when the order arrives.

Both first-order conditions reduce to ``expm1(u) - u = s`` in the scaled size
``u = r1 * x / q``, whose positive root is available in closed form through
the lower Lambert W branch. The closed form seeds a bracketed Newton polish.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass

from .lambert_w import Branch, lambert_w

__all__ = [
    "ConvergenceError",
    "DegenerateDenominatorError",
    "ModelParams",
    "ModelSolution",
    "ModelVariant",
    "NoPositiveRootError",
    "ParameterError",
    "SolverPath",
    "financing_demand",
    "foc",
    "foc_scale",
    "payment",
    "soc",
    "solve",
    "total_cost",
]

_EPS = 2.220446049250313e-16
FOC_RTOL = 1e-10


class ParameterError(ValueError):
    """Invalid model parameter; ``field`` names the offending parameter."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class NoPositiveRootError(ValueError):
    """The first-order condition has no strictly positive root (f = 0)."""


class ConvergenceError(ArithmeticError):
    """The polished root misses the residual tolerance."""


class DegenerateDenominatorError(ZeroDivisionError):
    """``1 - exp(-r1 * x / q)`` is too close to zero to evaluate the cost."""


class ModelVariant(str, enum.Enum):
    BASELINE = "baseline"
    UPFRONT_F = "upfront_f"


class SolverPath(str, enum.Enum):
    CLOSED_FORM = "closed_form"
    NEWTON = "newton"
    BISECTION_FALLBACK = "bisection_fallback"


@dataclass(frozen=True)
class ModelParams:
    """Structural parameters of the procurement problem.

    Attributes
    ----------
    c : float
        Marginal production cost per unit, > 0.
    q : float
        Annual quantity procured, > 0.
    f : float
        Fixed cost per shipment, >= 0.
    delta : float
        Delivery time in years, >= 0.
    r : float
        Exporter's borrowing rate, >= 0.
    r1 : float
        Importer's discount rate, > 0.
    """

    c: float
    q: float
    f: float
    delta: float
    r: float
    r1: float

    def __post_init__(self):
        for name in ("c", "q", "f", "delta", "r", "r1"):
            value = getattr(self, name)
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise ParameterError(name, f"not a number: {value!r}") from None
            if not math.isfinite(value):
                raise ParameterError(name, f"must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        for name in ("c", "q", "r1"):
            if getattr(self, name) <= 0.0:
                raise ParameterError(name, f"must be > 0, got {getattr(self, name)!r}")
        for name in ("f", "delta", "r"):
            if getattr(self, name) < 0.0:
                raise ParameterError(name, f"must be >= 0, got {getattr(self, name)!r}")

    @property
    def finance_factor(self):
        """``exp(delta * r)``, the exporter's working-capital markup."""
        return math.exp(self.delta * self.r)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class ModelSolution:
    """Optimal shipment size and derived quantities.

    ``n`` is kept continuous; round it only for display.
    """

    params: ModelParams
    variant: ModelVariant
    x_star: float
    n: float
    demand: float
    cost: float
    foc_residual: float
    foc_scale: float
    soc_value: float
    solver_path: SolverPath
    iterations: int

    @property
    def relative_residual(self):
        return abs(self.foc_residual) / self.foc_scale


def _variant(variant):
    return ModelVariant(variant)


def _expm1_minus(u):
    """``exp(u) - 1 - u`` without cancellation for small ``u``."""
    if abs(u) < 0.1:
        term = u * u / 2.0
        total = term
        k = 2
        while abs(term) > 1e-18 * abs(total):
            k += 1
            term *= u / k
            total += term
        return total
    if u > 709.0:
        return math.inf
    return math.expm1(u) - u


def _foc_weight(params, variant):
    # FOC is weight * q * (expm1(u) - u) - f * r1
    return params.c * params.finance_factor if variant is ModelVariant.BASELINE else params.c


def _check_size(x):
    if not x > 0.0:
        raise ValueError(f"shipment size must be > 0, got {x!r}")


def payment(params: ModelParams, x: float) -> float:
    """Exporter's break-even payment for one shipment, ``c x e^(delta r) + f``."""
    _check_size(x)
    return params.c * x * params.finance_factor + params.f


def total_cost(params: ModelParams, x: float, variant=ModelVariant.BASELINE) -> float:
    """Present value of the importer's cost of the infinite shipment stream."""
    _check_size(x)
    variant = _variant(variant)
    u = params.r1 * x / params.q
    if u < 1e-300:
        raise DegenerateDenominatorError(f"r1*x/q = {u!r} leaves a degenerate denominator")
    denom = -math.expm1(-u)
    if variant is ModelVariant.BASELINE:
        return payment(params, x) * math.exp(-params.delta * params.r1) / denom
    return params.finance_factor * (params.c * x + params.f) / denom


def foc(params: ModelParams, x: float, variant=ModelVariant.BASELINE) -> float:
    """First-order condition in root form; negative below the optimum, positive above.

    baseline:  ``q c e^(delta r) (e^(r1 x/q) - 1) - c e^(delta r) r1 x - f r1``
    upfront_f: ``c q e^(r1 x/q) - c r1 x - f r1 - c q``
    """
    _check_size(x)
    variant = _variant(variant)
    u = params.r1 * x / params.q
    return _foc_weight(params, variant) * params.q * _expm1_minus(u) - params.f * params.r1


def foc_scale(params: ModelParams, x: float, variant=ModelVariant.BASELINE) -> float:
    """Sum of absolute values of the FOC's three terms, the residual's natural scale."""
    variant = _variant(variant)
    u = params.r1 * x / params.q
    k = _foc_weight(params, variant)
    if u > 709.0:
        return math.inf
    return k * params.q * math.expm1(u) + k * params.r1 * x + params.f * params.r1


def soc(params: ModelParams, x: float, variant=ModelVariant.BASELINE) -> float:
    """Second derivative of the cost, simplified with the FOC; exact at the optimum.

    baseline: ``c r1 e^(r1 x/q - delta r1 + delta r) / (q (e^(r1 x/q) - 1))``
    """
    _check_size(x)
    variant = _variant(variant)
    u = params.r1 * x / params.q
    scale = params.c * params.r1 / (params.q * -math.expm1(-u))
    if variant is ModelVariant.BASELINE:
        return scale * math.exp(params.delta * (params.r - params.r1))
    return scale * params.finance_factor


def _closed_form_u(s):
    """Positive root of ``expm1(u) - u = s`` via ``u = -W_-1(-e^-b) - b``, ``b = 1 + s``."""
    b = 1.0 + s
    arg = -math.exp(-b)
    if arg == 0.0:
        return None
    return -lambert_w(arg, Branch.LOWER) - b


def _root_u(s, r1, seed):
    """Bracketed Newton on ``g(u) = expm1(u) - u - s``; ``g`` is increasing and convex."""
    # x bracket [1e-12 q, 2^k q] in scaled units
    lo = r1 * 1e-12
    while _expm1_minus(lo) - s >= 0.0:
        lo *= 1e-3
        if lo < 1e-300:
            raise ConvergenceError(f"cannot bracket the root for s={s!r}")
    hi = r1
    while _expm1_minus(hi) - s <= 0.0:
        hi *= 2.0

    path = SolverPath.NEWTON
    if seed is not None and lo < seed < hi:
        u = seed
    else:
        if seed is not None:
            path = SolverPath.BISECTION_FALLBACK
        u = hi
    first = True
    for it in range(1, 201):
        g = _expm1_minus(u) - s
        if g == 0.0:
            break
        if g < 0.0:
            lo = u
        else:
            hi = u
        step = g / math.expm1(u)
        nxt = u - step
        done = abs(step) <= 4.0 * _EPS * u
        if not done and not lo < nxt < hi:
            if hi - lo <= 16.0 * _EPS * hi:
                # bracket already collapsed to a few ulps around u
                nxt, done = u, True
            else:
                nxt = math.sqrt(lo * hi) if hi > 4.0 * lo else 0.5 * (lo + hi)
                path = SolverPath.BISECTION_FALLBACK
        if first and done and seed is not None and path is SolverPath.NEWTON:
            path = SolverPath.CLOSED_FORM
        first = False
        u = nxt
        if done or hi - lo <= 4.0 * _EPS * hi:
            break
    return u, path, it


def solve(params: ModelParams, variant=ModelVariant.BASELINE, method="lambert") -> ModelSolution:
    """Minimize the procurement cost over the shipment size.

    Parameters
    ----------
    params : ModelParams
    variant : ModelVariant or str
    method : {'lambert', 'newton'}
        ``lambert`` seeds the polish with the closed form; ``newton`` starts
        from the upper end of the bracket and uses no Lambert W at all.

    Raises
    ------
    NoPositiveRootError
        If ``f == 0`` (the optimum degenerates to ``x = 0``).
    ConvergenceError
        If the polished root misses ``|foc| <= 1e-10 * foc_scale``.
    """
    variant = _variant(variant)
    if method not in ("lambert", "newton"):
        raise ValueError(f"unknown method {method!r}")
    if params.f == 0.0:
        raise NoPositiveRootError("no positive root: f = 0 puts the optimum at x = 0")
    s = params.f * params.r1 / (_foc_weight(params, variant) * params.q)
    seed = _closed_form_u(s) if method == "lambert" else None
    u, path, iterations = _root_u(s, params.r1, seed)
    x = params.q * u / params.r1

    residual = foc(params, x, variant)
    scale = foc_scale(params, x, variant)
    if not abs(residual) <= FOC_RTOL * scale:
        raise ConvergenceError(
            f"FOC residual {residual!r} exceeds tolerance at x={x!r} ({params})"
        )
    return ModelSolution(
        params=params,
        variant=variant,
        x_star=x,
        n=params.q / x,
        demand=params.c * x,
        cost=total_cost(params, x, variant),
        foc_residual=residual,
        foc_scale=scale,
        soc_value=soc(params, x, variant),
        solver_path=path,
        iterations=iterations,
    )


def financing_demand(solution: ModelSolution) -> float:
    """Exporter's outstanding working-capital loan, ``c * x_star``."""
    return solution.params.c * solution.x_star
