import math
import time

import numpy as np
import pytest

from shipfreq.model import (
    ConvergenceError,
    DegenerateDenominatorError,
    ModelParams,
    ModelVariant,
    NoPositiveRootError,
    ParameterError,
    SolverPath,
    financing_demand,
    foc,
    foc_scale,
    payment,
    soc,
    solve,
    total_cost,
)
from shipfreq.statics import StaticsGrid, draw_params

BASE = ModelVariant.BASELINE
UP = ModelVariant.UPFRONT_F


def bisect_root(fn, lo, hi, iters=400):
    flo = fn(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= 1e-16 * hi:
            break
    return 0.5 * (lo + hi)


@pytest.fixture(scope="module")
def grid_draws():
    return draw_params(StaticsGrid(), 1000, 0)


# payment ------------------------------------------------------------------


def test_payment_without_delay():
    p = ModelParams(c=1, q=100, f=5, delta=0, r=0.3, r1=0.05)
    assert payment(p, 10) == 15.0


def test_payment_with_delay():
    p = ModelParams(c=1, q=100, f=0, delta=0.5, r=0.10, r1=0.05)
    assert payment(p, 10) == pytest.approx(10 * math.exp(0.05), rel=1e-15)


def test_payment_recomputed():
    p = ModelParams(c=2, q=100, f=10, delta=0.3, r=0.12, r1=0.05)
    # e^0.036 by its series, independent of math.exp
    term, total, k = 1.0, 1.0, 0
    while term > 1e-18:
        k += 1
        term *= 0.036 / k
        total += term
    assert payment(p, 20) == pytest.approx(2 * 20 * total + 10, rel=1e-14)


def test_payment_rejects_nonpositive_size(reference):
    with pytest.raises(ValueError):
        payment(reference, 0.0)


# total cost ---------------------------------------------------------------


def test_total_cost_series_oracle(reference):
    x = 25.0
    k = np.arange(1_000_000)
    disc = np.exp(-reference.r1 * x / reference.q * k)
    series = payment(reference, x) * math.exp(-reference.delta * reference.r1) * math.fsum(disc)
    assert total_cost(reference, x) == pytest.approx(series, rel=1e-12)


def test_total_cost_large_size_limit(reference):
    x = 1e7 * reference.q / reference.r1
    one = payment(reference, x) * math.exp(-reference.delta * reference.r1)
    assert total_cost(reference, x) == pytest.approx(one, rel=1e-15)


def test_upfront_equals_baseline_without_delay(reference):
    p = reference.replace(delta=0.0)
    for x in (1.0, 25.0, 400.0):
        cx = (p.c * x + p.f) / -math.expm1(-p.r1 * x / p.q)
        assert total_cost(p, x, BASE) == pytest.approx(cx, rel=1e-14)
        assert total_cost(p, x, UP) == pytest.approx(cx, rel=1e-14)


def test_degenerate_denominator():
    p = ModelParams(c=1, q=1e300, f=1, delta=0, r=0, r1=1e-10)
    with pytest.raises(DegenerateDenominatorError):
        total_cost(p, 1e-10)


# FOC / SOC ----------------------------------------------------------------


def test_foc_plug_in():
    p = ModelParams(c=1, q=100, f=10, delta=0, r=0, r1=0.05)
    expect = 100 * math.expm1(0.025) - 2.5 - 0.5
    assert foc(p, 50) == pytest.approx(expect, rel=1e-13)


def test_foc_vanishes_at_origin_without_fixed_cost(reference):
    p = reference.replace(f=0.0)
    assert abs(foc(p, 1e-9)) < 1e-20


def test_foc_sign_convention(reference):
    x = solve(reference).x_star
    assert foc(reference, 0.5 * x) < 0 < foc(reference, 2 * x)


def test_upfront_foc_form(reference):
    x = 77.0
    p = reference
    expect = p.c * p.q * math.exp(p.r1 * x / p.q) - p.c * p.r1 * x - p.f * p.r1 - p.c * p.q
    assert foc(p, x, UP) == pytest.approx(expect, rel=1e-12)


def test_soc_matches_second_difference(reference):
    for variant in (BASE, UP):
        x = solve(reference, variant).x_star
        h = 1e-3 * x
        c = [total_cost(reference, x + k * h, variant) for k in (-2, -1, 0, 1, 2)]
        d2 = (-c[0] + 16 * c[1] - 30 * c[2] + 16 * c[3] - c[4]) / (12 * h * h)
        assert soc(reference, x, variant) == pytest.approx(d2, rel=1e-5)


def test_soc_linear_in_c(reference):
    x = 40.0
    assert soc(reference.replace(c=3.0), x) == pytest.approx(3.0 * soc(reference, x), rel=1e-15)


def test_soc_positive_everywhere(reference):
    for x in np.geomspace(1e-6, 1e6, 50):
        assert soc(reference, x) > 0


# solve ----------------------------------------------------------------------


def test_reference_against_bisection(reference):
    sol = solve(reference)
    q = reference.q
    oracle = bisect_root(lambda x: foc(reference, x), 1e-9 * q, 1e6 * q)
    assert sol.x_star == pytest.approx(oracle, rel=1e-9)
    assert sol.x_star == pytest.approx(193.268688993885, rel=1e-12)
    assert sol.n * sol.x_star == pytest.approx(q, rel=1e-15)
    assert sol.demand == financing_demand(sol) == reference.c * sol.x_star
    assert sol.cost == total_cost(reference, sol.x_star)
    assert sol.soc_value > 0
    assert sol.relative_residual <= 1e-10


def test_upfront_against_bisection(reference):
    sol = solve(reference, UP)
    oracle = bisect_root(lambda x: foc(reference, x, UP), 1e-9, 1e8)
    assert sol.x_star == pytest.approx(oracle, rel=1e-9)


def test_solver_certificate_on_grid(grid_draws):
    t0 = time.perf_counter()
    for p in grid_draws:
        a = solve(p)
        b = solve(p, method="newton")
        assert a.relative_residual <= 1e-10
        assert a.soc_value > 0
        assert abs(a.x_star - b.x_star) <= 1e-9 * a.x_star
        assert a.solver_path in (SolverPath.CLOSED_FORM, SolverPath.NEWTON)
        assert b.solver_path is not SolverPath.CLOSED_FORM
    assert time.perf_counter() - t0 < 5.0


def test_minimality(grid_draws):
    for p in grid_draws[:300]:
        x = solve(p).x_star
        c = total_cost(p, x)
        for eps in (1e-3, 1e-2, 0.1):
            for s in (1 - eps, 1 + eps):
                assert c <= total_cost(p, x * s) * (1 + 1e-15)


def test_cost_depends_on_c_delta_r_through_markup(reference):
    k = math.exp(reference.delta * reference.r)
    a = solve(reference)
    b = solve(reference.replace(c=reference.c * k, delta=0.0))
    assert a.x_star == pytest.approx(b.x_star, rel=1e-12)


def test_f_to_zero_drives_size_to_zero(reference):
    sizes = [solve(reference.replace(f=f)).x_star for f in (1.0, 1e-2, 1e-4, 1e-6, 1e-8)]
    assert all(b < a for a, b in zip(sizes, sizes[1:]))
    assert sizes[-1] < 1e-2


def test_zero_fixed_cost_has_no_positive_root(reference):
    with pytest.raises(NoPositiveRootError, match="no positive root"):
        solve(reference.replace(f=0.0))


@pytest.mark.parametrize("r", [0.0, 0.1, 0.3])
@pytest.mark.parametrize("delta", [0.0, 0.5, 1.0])
def test_upfront_size_ignores_origin_finance(reference, r, delta):
    base = solve(reference.replace(r=0.0, delta=0.0), UP).x_star
    assert solve(reference.replace(r=r, delta=delta), UP).x_star == base


def test_envelope_in_f(reference):
    sol = solve(reference)
    h = 1e-4
    up = solve(reference.replace(f=reference.f + h)).cost
    dn = solve(reference.replace(f=reference.f - h)).cost
    y = reference.r1 * sol.x_star / reference.q
    expect = math.exp(-reference.delta * reference.r1) / -math.expm1(-y)
    assert (up - dn) / (2 * h) == pytest.approx(expect, rel=1e-6)


def test_unknown_method(reference):
    with pytest.raises(ValueError):
        solve(reference, method="secant")


def test_foc_scale_positive(reference):
    assert foc_scale(reference, 10.0) > 0


def test_convergence_error_is_arithmetic():
    assert issubclass(ConvergenceError, ArithmeticError)


# parameters -----------------------------------------------------------------


@pytest.mark.parametrize(
    "field,value",
    [("c", 0.0), ("q", -1.0), ("r1", 0.0), ("f", -1e-9), ("delta", -0.1), ("r", -0.01), ("c", math.nan), ("q", math.inf)],
)
def test_parameter_validation_names_field(reference, field, value):
    with pytest.raises(ParameterError) as info:
        reference.replace(**{field: value})
    assert info.value.field == field
    assert field in str(info.value)


def test_non_numeric_parameter():
    with pytest.raises(ParameterError, match="c"):
        ModelParams(c="abc", q=1, f=1, delta=0, r=0, r1=0.1)


def test_financing_demand_definition(reference):
    sol = solve(reference)
    fake = type(sol)(**{**sol.__dict__, "x_star": 20.0})
    assert financing_demand(fake) == 20.0
    fake = type(sol)(**{**sol.__dict__, "x_star": 20.0, "params": reference.replace(c=2.5)})
    assert financing_demand(fake) == 50.0
