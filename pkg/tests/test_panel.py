import math

import numpy as np
import pytest

from shipfreq import solve
from shipfreq.panel import (
    BERNOULLI,
    CALIBRATION,
    COUNTRY_COVARIATES,
    PANEL_FIELDS,
    RELIGION,
    DgpConfig,
    Panel,
    PanelFormatError,
    cell_params,
    generate_countries,
    generate_panel,
    read_countries,
    read_panel,
    write_countries,
    write_panel,
)

SMALL = dict(n_firms=12, n_products=4, n_destinations=6, n_years=3, density=0.5)


@pytest.fixture(scope="module")
def many_countries():
    return generate_countries(DgpConfig(seed=3, n_destinations=10_000))


def test_single_country_is_deterministic():
    a = generate_countries(DgpConfig(seed=9, n_destinations=1))
    b = generate_countries(DgpConfig(seed=9, n_destinations=1))
    assert a == b and len(a) == 1


def test_cost_mean_and_bounds(many_countries):
    cost = np.array([c.ln_pershipment_cost for c in many_countries])
    assert abs(cost.mean() - 7.08) <= 0.02
    assert cost.min() >= 5.90 and cost.max() <= 9.89


def test_every_covariate_mean_within_three_se(many_countries):
    n = len(many_countries)
    targets = {k: (v[0], v[1]) for k, v in CALIBRATION.items()}
    targets.update({k: (p, math.sqrt(p * (1 - p))) for k, p in BERNOULLI.items()})
    targets["common_religion"] = RELIGION[:2]
    assert set(targets) == set(COUNTRY_COVARIATES)
    for name, (mean, sd) in targets.items():
        values = np.array([getattr(c, name) for c in many_countries], dtype=float)
        assert abs(values.mean() - mean) <= 3 * sd / math.sqrt(n), name


def test_calibrated_ranges(many_countries):
    for name, (_, _, lo, hi) in CALIBRATION.items():
        values = np.array([getattr(c, name) for c in many_countries])
        assert values.min() >= lo and values.max() <= hi, name
    rel = np.array([c.common_religion for c in many_countries])
    assert rel.min() >= 0.0 and rel.max() <= RELIGION[2]
    rate = np.array([c.importer_rate for c in many_countries])
    assert rate.min() > 0.0 and rate.max() <= 60.0


def test_distance_gdp_correlation_knob():
    base = DgpConfig(seed=4, n_destinations=5000)
    cs = generate_countries(base.replace(dist_gdp_corr=0.6))
    d = [c.ln_distance for c in cs]
    g = [c.ln_gdp for c in cs]
    assert np.corrcoef(d, g)[0, 1] == pytest.approx(0.6, abs=0.05)
    cs = generate_countries(base)
    assert abs(np.corrcoef([c.ln_distance for c in cs], [c.ln_gdp for c in cs])[0, 1]) < 0.05


def test_intercept_only_poisson_mean():
    cfg = DgpConfig(seed=1, n_firms=100, n_products=10, n_destinations=20, n_years=5, density=0.2,
                    betas={"const": math.log(5.0)}, fe_variances={})
    panel = generate_panel(cfg)
    n = len(panel)
    assert abs(panel["n_shipments"].mean() - 5.0) <= 3 * math.sqrt(5.0 / n)


def test_panel_keys_unique_and_sorted():
    panel = generate_panel(DgpConfig(seed=2, **SMALL))
    keys = list(zip(*(panel[k] for k in ("firm", "product", "mode", "destination", "year"))))
    assert len(set(keys)) == len(keys)
    assert keys == sorted(keys)
    assert len(panel) <= 12 * 4 * 6 * 3
    assert set(panel["year"]) <= {2006, 2007, 2008}
    assert (panel["n_shipments"] >= 0).all()
    assert panel.columns[: len(PANEL_FIELDS)] == list(PANEL_FIELDS)


def test_exporter_rate_varies_by_year_only():
    panel = generate_panel(DgpConfig(seed=5, **SMALL))
    by_year = {}
    for y, r in zip(panel["year"], panel["exporter_rate"]):
        by_year.setdefault(y, set()).add(r)
    assert all(len(v) == 1 for v in by_year.values())
    assert all(11.30 <= next(iter(v)) <= 13.77 for v in by_year.values())


def test_same_seed_same_file(tmp_path):
    cfg = DgpConfig(seed=7, **SMALL)
    write_panel(generate_panel(cfg), tmp_path / "a.csv")
    write_panel(generate_panel(cfg), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    write_panel(generate_panel(cfg.replace(seed=8)), tmp_path / "c.csv")
    assert (tmp_path / "a.csv").read_bytes() != (tmp_path / "c.csv").read_bytes()


def test_counts_depend_on_cell_not_on_panel_shape():
    # counter-based streams: growing the year range leaves earlier cells intact
    a = generate_panel(DgpConfig(seed=6, fe_variances={}, **SMALL))
    b = generate_panel(DgpConfig(seed=6, fe_variances={}, **dict(SMALL, n_years=4)))
    rows_b = {r[:5]: r.n_shipments for r in b.rows() if r.year < 2009}
    assert {r[:5]: r.n_shipments for r in a.rows()} == rows_b


def test_structural_counts_equal_rounded_solution():
    cfg = DgpConfig(seed=3, mode="structural", **SMALL)
    panel = generate_panel(cfg)
    for i in range(0, len(panel), 7):
        row = {k: panel[k][i] for k in panel.columns}
        assert panel["n_shipments"][i] == math.floor(solve(cell_params(cfg, row)).n + 0.5)
    assert "ln_pershipment_value" in panel


def test_structural_higher_f_lowers_n():
    cfg = DgpConfig(seed=3, mode="structural", **SMALL)
    panel = generate_panel(cfg)
    row = {k: panel[k][0] for k in panel.columns}
    base = solve(cell_params(cfg, row)).n
    row["ln_pershipment_cost"] += math.log(1.1)
    assert solve(cell_params(cfg, row)).n < base


def test_structural_jitter_is_poisson_around_solution():
    cfg = DgpConfig(seed=3, mode="structural", jitter=True, **SMALL)
    jittered = generate_panel(cfg)["n_shipments"]
    exact = generate_panel(cfg.replace(jitter=False))["n_shipments"]
    assert not np.array_equal(jittered, exact)
    assert abs(jittered.sum() - exact.sum()) <= 4 * math.sqrt(exact.sum()) + len(exact)


def test_panel_csv_round_trip(tmp_path):
    panel = generate_panel(DgpConfig(seed=11, **SMALL))
    write_panel(panel, tmp_path / "p.csv")
    assert read_panel(tmp_path / "p.csv").equals(panel)


def test_structural_panel_round_trip(tmp_path):
    panel = generate_panel(DgpConfig(seed=11, mode="structural", **SMALL))
    write_panel(panel, tmp_path / "p.csv")
    assert read_panel(tmp_path / "p.csv").equals(panel)


def test_empty_panel(tmp_path):
    panel = generate_panel(DgpConfig(seed=1, **dict(SMALL, density=0.0)))
    assert len(panel) == 0
    write_panel(panel, tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text().strip() == ",".join(PANEL_FIELDS)
    back = read_panel(tmp_path / "e.csv")
    assert len(back) == 0 and back.equals(panel)


def _tamper(tmp_path, line_no, edit):
    panel = generate_panel(DgpConfig(seed=12, **SMALL))
    path = tmp_path / "p.csv"
    write_panel(panel, path)
    lines = path.read_text().splitlines()
    lines[line_no - 1] = edit(lines[line_no - 1], lines)
    path.write_text("\n".join(lines) + "\n")
    return path


def test_negative_count_names_line(tmp_path):
    def neg(line, _):
        cells = line.split(",")
        cells[5] = "-1"
        return ",".join(cells)

    path = _tamper(tmp_path, 4, neg)
    with pytest.raises(PanelFormatError, match="line 4"):
        read_panel(path)


def test_bad_mode_rejected(tmp_path):
    path = _tamper(tmp_path, 3, lambda line, _: line.replace(line.split(",")[2], "rail", 1))
    with pytest.raises(PanelFormatError, match="line 3"):
        read_panel(path)


def test_duplicate_key_named(tmp_path):
    path = _tamper(tmp_path, 5, lambda _, lines: lines[1])
    with pytest.raises(PanelFormatError, match="duplicate") as info:
        read_panel(path)
    assert lines_key(path) in str(info.value)


def lines_key(path):
    cells = path.read_text().splitlines()[1].split(",")
    return cells[0]


def test_missing_column_rejected(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("firm,product\nF1,00000001\n")
    with pytest.raises(PanelFormatError):
        read_panel(path)


def test_countries_round_trip(tmp_path):
    cs = generate_countries(DgpConfig(seed=2, n_destinations=15))
    write_countries(cs, tmp_path / "c.csv")
    assert read_countries(tmp_path / "c.csv") == cs


def test_invalid_config():
    with pytest.raises(ValueError):
        DgpConfig(n_firms=0)
    with pytest.raises(ValueError):
        DgpConfig(fe_variances={"firm": -1.0})
    with pytest.raises(ValueError):
        DgpConfig(mode="bogus")


def test_panel_take_and_with_column():
    panel = generate_panel(DgpConfig(seed=13, **SMALL))
    sub = panel.take(np.arange(3))
    assert len(sub) == 3
    assert isinstance(sub, Panel)
    extra = panel.with_column("z", np.zeros(len(panel)))
    assert "z" in extra and "z" not in panel
