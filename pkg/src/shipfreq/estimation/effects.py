"""Percent effects implied by fitted coefficients."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .design import _LOG


@dataclass(frozen=True)
class Effect:
    term: str
    coefficient: float
    kind: str  # "log" or "level"
    effect_pct: float


def effect_per_10pct(beta: float) -> float:
    """Percent change in the outcome when a logged regressor rises 10%: ``(1.1**beta - 1) * 100``."""
    return (1.1**beta - 1.0) * 100.0


def effect_per_unit(beta: float) -> float:
    """Percent change per unit of a level regressor: ``(exp(beta) - 1) * 100``."""
    return math.expm1(beta) * 100.0


def is_log_term(term: str) -> bool:
    """True when any factor of the term enters in logs (``ln_*`` or ``log(...)``)."""
    return any(f.startswith("ln_") or _LOG.fullmatch(f) for f in term.split(":"))


def elasticity_effects(result, scenario=None) -> list:
    """Effect table for the requested coefficients (all of them by default).

    Raises
    ------
    KeyError
        If a requested coefficient is not in the result.
    """
    names = list(result.names) if scenario is None else list(scenario)
    out = []
    for name in names:
        beta = result.coef(name)
        if is_log_term(name):
            out.append(Effect(name, beta, "log", effect_per_10pct(beta)))
        else:
            out.append(Effect(name, beta, "level", effect_per_unit(beta)))
    return out
