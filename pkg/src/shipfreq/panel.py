"""Synthetic firm-product-mode-destination-year panels of shipment counts.

Two data-generating processes are available:

``reduced_form``
    ``n ~ Poisson(exp(X beta + planted fixed effects))`` with ``X`` built
    from the same term grammar the estimators use.
``structural``
    Each cell's covariates are mapped to :class:`~shipfreq.model.ModelParams`
    and the count is the optimal number of shipments ``q / x*``, rounded or
    Poisson-jittered.

All cell-level randomness comes from a counter-based generator keyed by
``(seed, stream, cell index)``, so a cell's draws do not depend on the order
in which cells are produced.
"""

from __future__ import annotations

import csv
import dataclasses
import functools
import math
import zlib
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np
import scipy.optimize
import scipy.special
import scipy.stats

from .estimation.design import group_codes, term_values
from .model import ModelParams, solve

__all__ = [
    "COUNTRY_FIELDS",
    "CellSolveError",
    "CountryProfile",
    "DgpConfig",
    "MODES",
    "PANEL_FIELDS",
    "Panel",
    "PanelFormatError",
    "PanelObservation",
    "PLANTED_BETAS",
    "generate_countries",
    "generate_panel",
    "histogram",
    "read_countries",
    "read_panel",
    "write_countries",
    "write_histogram",
    "write_panel",
]

MODES = ("air", "ocean", "land")
KEY_FIELDS = ("firm", "product", "mode", "destination", "year")
COUNTRY_COVARIATES = (
    "ln_pershipment_cost",
    "ln_distance",
    "ln_gdp",
    "ln_gdp_pc",
    "island",
    "landlocked",
    "common_religion",
    "common_legal",
    "colony",
    "importer_rate",
)
PANEL_FIELDS = KEY_FIELDS + ("n_shipments",) + COUNTRY_COVARIATES + ("exporter_rate",)
COUNTRY_FIELDS = ("id",) + COUNTRY_COVARIATES
_INT_FIELDS = ("year", "n_shipments")
_STR_FIELDS = ("firm", "product", "mode", "destination")

# Poisson PPML coefficients used as default plants
PLANTED_BETAS = {
    "const": 2.859,
    "ln_pershipment_cost": -0.335,
    "ln_distance": -0.904,
    "spline1": -5.023,
    "spline2": -19.402,
    "spline1:ln_distance": 0.410,
    "spline2:ln_distance": 2.135,
    "importer_rate": -0.083,
    "importer_rate:exporter_rate": 0.006,
    "ln_gdp": 0.300,
    "ln_gdp_pc": 0.248,
    "island": -0.234,
    "landlocked": -0.162,
    "common_religion": 0.789,
    "common_legal": 0.081,
    "colony": 0.359,
}

# (mean, sd, min, max) of destination covariates
CALIBRATION = {
    "ln_pershipment_cost": (7.08, 0.39, 5.90, 9.89),
    "ln_distance": (8.88, 0.51, 6.06, 9.81),
    "ln_gdp": (27.87, 1.49, 18.46, 30.45),
    "ln_gdp_pc": (10.23, 0.96, 5.09, 11.63),
    "importer_rate": (5.15, 3.52, 0.5, 58.98),
}
BERNOULLI = {"island": 0.13, "landlocked": 0.03, "colony": 0.07, "common_legal": 0.10}
RELIGION = (0.09, 0.23, 0.86)  # mean, sd, max
RELIGION_ZERO_SHARE = 0.6
EXPORTER_RATE_RANGE = (11.30, 13.77)


class PanelFormatError(ValueError):
    """Malformed panel or country file."""


class CellSolveError(ValueError):
    """The structural model failed for one cell; ``cell`` holds its key."""

    def __init__(self, cell, cause):
        super().__init__(f"cell {cell}: {type(cause).__name__}: {cause}")
        self.cell = cell
        self.cause = cause


@dataclass(frozen=True)
class CountryProfile:
    id: str
    ln_pershipment_cost: float
    ln_distance: float
    ln_gdp: float
    ln_gdp_pc: float
    island: int
    landlocked: int
    common_religion: float
    common_legal: int
    colony: int
    importer_rate: float


class PanelObservation(NamedTuple):
    firm: str
    product: str
    mode: str
    destination: str
    year: int
    n_shipments: int
    exporter_rate: float


@dataclass(frozen=True)
class DgpConfig:
    """Settings of the synthetic panel.

    Attributes
    ----------
    mode : {'reduced_form', 'structural'}
    betas : dict
        Term name to coefficient for the reduced form; ``const`` is the intercept.
    fe_variances : dict
        FE grouping key (``firm``, ``product*mode*year``, ...) to the variance
        of its planted effects.
    density : float
        Probability that a firm-product-destination triple trades.
    mode_probs : tuple
        Probabilities of air, ocean and land for an active triple.
    dist_gdp_corr : float
        Gaussian-copula correlation between log distance and log GDP.
    f_scale, c, q, delta_by_mode, jitter
        Structural mode: ``f = f_scale * exp(ln_pershipment_cost)``, cost per
        unit, annual quantity, delivery time in years per mode, and whether
        counts are Poisson draws around ``q / x*`` instead of rounded.
    """

    mode: str = "reduced_form"
    betas: dict = field(default_factory=lambda: dict(PLANTED_BETAS))
    fe_variances: dict = field(default_factory=lambda: {"firm": 0.25, "product*mode*year": 0.25})
    seed: int = 0
    n_firms: int = 200
    n_products: int = 10
    n_destinations: int = 100
    n_years: int = 5
    start_year: int = 2006
    density: float = 0.05
    mode_probs: tuple = (0.25, 0.70, 0.05)
    dist_gdp_corr: float = 0.0
    common_legal_p: float = BERNOULLI["common_legal"]
    exporter_rate_range: tuple = EXPORTER_RATE_RANGE
    f_scale: float = 0.01
    c: float = 1.0
    q: float = 10_000.0
    delta_by_mode: dict = field(default_factory=lambda: {"air": 0.01, "ocean": 0.08, "land": 0.03})
    jitter: bool = False

    def __post_init__(self):
        if self.mode not in ("reduced_form", "structural"):
            raise ValueError(f"mode must be reduced_form or structural, got {self.mode!r}")
        for name in ("n_firms", "n_products", "n_destinations", "n_years"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)!r}")
        if self.n_years > 0xFFFF:
            raise ValueError("n_years must be <= 65535")
        if self.n_products > 10_000:
            raise ValueError("n_products must be <= 10000")
        for key, var in self.fe_variances.items():
            if not var >= 0.0:
                raise ValueError(f"fe_variances[{key!r}] must be >= 0, got {var!r}")
        if not 0.0 <= self.density <= 1.0:
            raise ValueError(f"density must be in [0, 1], got {self.density!r}")
        probs = tuple(float(p) for p in self.mode_probs)
        if len(probs) != 3 or min(probs) < 0 or not math.isclose(sum(probs), 1.0, abs_tol=1e-9):
            raise ValueError(f"mode_probs must be three probabilities summing to 1, got {self.mode_probs!r}")
        if not -1.0 < self.dist_gdp_corr < 1.0:
            raise ValueError("dist_gdp_corr must be in (-1, 1)")
        if not 0.0 <= self.common_legal_p <= 1.0:
            raise ValueError("common_legal_p must be in [0, 1]")
        lo, hi = self.exporter_rate_range
        if not 0.0 <= lo <= hi:
            raise ValueError("exporter_rate_range must be 0 <= low <= high")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        for name in ("f_scale", "c", "q"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be > 0")
        missing = set(MODES) - set(self.delta_by_mode)
        if missing:
            raise ValueError(f"delta_by_mode lacks {sorted(missing)}")

    @property
    def years(self):
        return list(range(self.start_year, self.start_year + self.n_years))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


# counter-based generator ---------------------------------------------------



def _splitmix(x):
    x = x + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def stream_id(name: str) -> int:
    return zlib.crc32(name.encode())


def counter_uniform(seed: int, stream: str, keys) -> np.ndarray:
    """Uniforms in (0, 1), one per integer key, fixed by ``(seed, stream, key)``."""
    keys = np.atleast_1d(np.asarray(keys, dtype=np.uint64))
    with np.errstate(over="ignore"):
        base = _splitmix(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))
        base = _splitmix(base ^ np.uint64(stream_id(stream)))
        h = _splitmix(base ^ _splitmix(keys))
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def _substream(seed, name):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, stream_id(name)])))


# calibration ---------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def truncnorm_params(mean, sd, lo, hi):
    """Location and scale of a normal whose truncation to [lo, hi] has the given moments."""

    def gap(p):
        loc, log_scale = p
        scale = math.exp(log_scale)
        a, b = (lo - loc) / scale, (hi - loc) / scale
        m, v = scipy.stats.truncnorm.stats(a, b, loc=loc, scale=scale, moments="mv")
        return [(float(m) - mean) / sd, (math.sqrt(float(v)) - sd) / sd]

    sol = scipy.optimize.root(gap, [mean, math.log(sd)], method="hybr")
    if not sol.success or max(abs(g) for g in gap(sol.x)) > 1e-8:
        raise RuntimeError(f"truncated-normal calibration failed for {(mean, sd, lo, hi)}")
    return float(sol.x[0]), math.exp(float(sol.x[1]))


def _truncnorm_from_uniform(u, target):
    mean, sd, lo, hi = target
    loc, scale = truncnorm_params(mean, sd, lo, hi)
    a, b = (lo - loc) / scale, (hi - loc) / scale
    return scipy.stats.truncnorm.ppf(u, a, b, loc=loc, scale=scale)


@functools.lru_cache(maxsize=None)
def religion_beta_params():
    """Beta shape parameters for the nonzero part of the common-religion index."""
    mean, sd, top = RELIGION
    nz = 1.0 - RELIGION_ZERO_SHARE
    m = mean / nz / top
    second = (sd * sd + mean * mean) / nz / top**2
    var = second - m * m
    k = m * (1.0 - m) / var - 1.0
    return m * k, (1.0 - m) * k


def generate_countries(config: DgpConfig) -> list:
    """Draw destination profiles.

    Continuous covariates follow normals truncated to the calibration range
    whose truncated mean and sd hit the targets; binaries are Bernoulli; the
    common-religion index is zero with probability 0.6 and otherwise a scaled
    Beta matching the target moments.
    """
    n = int(config.n_destinations)
    rng = _substream(config.seed, "countries")
    z = rng.standard_normal((n, 5))
    rho = config.dist_gdp_corr
    # columns: cost, distance, gdp, gdp_pc, importer rate
    z[:, 2] = rho * z[:, 1] + math.sqrt(1.0 - rho * rho) * z[:, 2]
    u = scipy.special.ndtr(z)
    names = ("ln_pershipment_cost", "ln_distance", "ln_gdp", "ln_gdp_pc", "importer_rate")
    cont = {name: _truncnorm_from_uniform(u[:, j], CALIBRATION[name]) for j, name in enumerate(names)}
    probs = dict(BERNOULLI, common_legal=config.common_legal_p)
    binary = {name: (rng.random(n) < probs[name]).astype(int) for name in ("island", "landlocked", "common_legal", "colony")}
    a, b = religion_beta_params()
    nonzero = rng.random(n) >= RELIGION_ZERO_SHARE
    religion = np.where(nonzero, RELIGION[2] * rng.beta(a, b, n), 0.0)

    width = max(3, len(str(n)))
    return [
        CountryProfile(
            id=f"D{i + 1:0{width}d}",
            ln_pershipment_cost=float(cont["ln_pershipment_cost"][i]),
            ln_distance=float(cont["ln_distance"][i]),
            ln_gdp=float(cont["ln_gdp"][i]),
            ln_gdp_pc=float(cont["ln_gdp_pc"][i]),
            island=int(binary["island"][i]),
            landlocked=int(binary["landlocked"][i]),
            common_religion=float(religion[i]),
            common_legal=int(binary["common_legal"][i]),
            colony=int(binary["colony"][i]),
            importer_rate=float(cont["importer_rate"][i]),
        )
        for i in range(n)
    ]


# panel container -----------------------------------------------------------


class Panel:
    """Columnar panel; ``panel[name]`` is a numpy array, ``len(panel)`` the row count.

    String columns are object arrays, ``year`` and ``n_shipments`` int64, the
    rest float64. Extra float columns (``ln_pershipment_value``) may follow
    the standard schema.
    """

    def __init__(self, columns: dict):
        missing = [f for f in PANEL_FIELDS if f not in columns]
        if missing:
            raise PanelFormatError(f"panel lacks columns {missing}")
        lengths = {len(v) for v in columns.values()}
        if len(lengths) > 1:
            raise PanelFormatError("panel columns differ in length")
        self._cols = {}
        for name, values in columns.items():
            if name in _STR_FIELDS:
                self._cols[name] = np.asarray(values, dtype=object)
            elif name in _INT_FIELDS:
                self._cols[name] = np.asarray(values, dtype=np.int64)
            else:
                self._cols[name] = np.asarray(values, dtype=np.float64)

    def __len__(self):
        return len(self._cols["firm"])

    def __getitem__(self, name):
        return self._cols[name]

    def __contains__(self, name):
        return name in self._cols

    @property
    def columns(self):
        return list(self._cols)

    def rows(self) -> Iterator[PanelObservation]:
        c = self._cols
        for i in range(len(self)):
            yield PanelObservation(
                c["firm"][i], c["product"][i], c["mode"][i], c["destination"][i],
                int(c["year"][i]), int(c["n_shipments"][i]), float(c["exporter_rate"][i]),
            )

    def take(self, index):
        return Panel({k: v[index] for k, v in self._cols.items()})

    def with_column(self, name, values):
        cols = dict(self._cols)
        cols[name] = values
        return Panel(cols)

    def equals(self, other) -> bool:
        if self.columns != other.columns or len(self) != len(other):
            return False
        for name in self.columns:
            a, b = self[name], other[name]
            if a.dtype == np.float64:
                if not np.array_equal(a, b, equal_nan=True):
                    return False
            elif not np.array_equal(a, b):
                return False
        return True


def _canonical_order(cols):
    return np.lexsort(tuple(np.asarray(cols[k]) for k in reversed(KEY_FIELDS)))


def _product_codes(seed, n):
    h = counter_uniform(seed, "product", np.arange(n))
    heading = (h * 8800).astype(int)
    return [f"{10 + heading[p] // 100:02d}{heading[p] % 100:02d}{p:04d}" for p in range(n)]


def generate_panel(config: DgpConfig, countries: list | None = None) -> Panel:
    """Simulate the panel in canonical (sorted key) order.

    Each firm-product-destination triple trades with probability
    ``density``, ships by one mode drawn once per triple and appears in every
    year.
    """
    if countries is None:
        countries = generate_countries(config)
    if not countries:
        raise ValueError("need at least one destination")
    F, P, D, Y = config.n_firms, config.n_products, len(countries), config.n_years
    seed = config.seed

    triple = np.arange(F * P * D, dtype=np.int64)
    active = triple[counter_uniform(seed, "active", triple) < config.density]
    u_mode = counter_uniform(seed, "mode", active)
    cum = np.cumsum(config.mode_probs)
    mode_idx = np.minimum(np.searchsorted(cum, u_mode, side="right"), 2)

    f_idx, rem = np.divmod(active, P * D)
    p_idx, d_idx = np.divmod(rem, D)
    n_cells = active.size * Y
    f_idx, p_idx, d_idx, mode_idx = (np.repeat(a, Y) for a in (f_idx, p_idx, d_idx, mode_idx))
    y_idx = np.tile(np.arange(Y), active.size)
    # independent of the year range, so a cell keeps its draw when Y grows
    cell_key = (np.repeat(active, Y) << 16) | y_idx

    width_f = max(4, len(str(F)))
    firms = np.array([f"F{i + 1:0{width_f}d}" for i in range(F)], dtype=object)
    products = np.array(_product_codes(seed, P), dtype=object)
    u_rate = counter_uniform(seed, "exporter_rate", np.arange(Y))
    lo, hi = config.exporter_rate_range
    exporter_rate = lo + (hi - lo) * u_rate

    cols = {
        "firm": firms[f_idx],
        "product": products[p_idx],
        "mode": np.array(MODES, dtype=object)[mode_idx],
        "destination": np.array([c.id for c in countries], dtype=object)[d_idx],
        "year": np.asarray(config.years, dtype=np.int64)[y_idx],
        "n_shipments": np.zeros(n_cells, dtype=np.int64),
    }
    for name in COUNTRY_COVARIATES:
        cols[name] = np.array([getattr(c, name) for c in countries], dtype=float)[d_idx]
    cols["exporter_rate"] = exporter_rate[y_idx]
    order = _canonical_order(cols)
    cols = {k: v[order] for k, v in cols.items()}
    cell_key = cell_key[order]
    panel = Panel(cols)
    u = counter_uniform(seed, "count", cell_key)

    if config.mode == "reduced_form":
        eta = np.full(len(panel), float(config.betas.get("const", 0.0)))
        for term, beta in config.betas.items():
            if term != "const" and beta != 0.0:
                eta += beta * term_values(panel, term)
        for level in sorted(config.fe_variances):
            var = config.fe_variances[level]
            codes, n_groups = group_codes(panel, level)
            if var == 0.0 or n_groups == 0:
                continue
            effects = _substream(seed, f"fe:{level}").normal(0.0, math.sqrt(var), n_groups)
            eta += (effects - effects.mean())[codes]
        counts = scipy.stats.poisson.ppf(u, np.exp(eta)) if len(panel) else np.zeros(0)
        cols["n_shipments"] = counts.astype(np.int64)
        return Panel(cols)

    n_star = _structural_counts(config, panel)
    if config.jitter:
        counts = scipy.stats.poisson.ppf(u, n_star)
    else:
        counts = np.floor(n_star + 0.5)
    cols["n_shipments"] = counts.astype(np.int64)
    with np.errstate(divide="ignore"):
        value = np.where(counts > 0, np.log(config.q * config.c / np.maximum(counts, 1)), np.nan)
    cols["ln_pershipment_value"] = value
    return Panel(cols)


def cell_params(config: DgpConfig, row) -> ModelParams:
    """Model parameters of one panel row (a mapping of its fields)."""
    return ModelParams(
        c=config.c,
        q=config.q,
        f=config.f_scale * math.exp(row["ln_pershipment_cost"]),
        delta=config.delta_by_mode[row["mode"]],
        r=row["exporter_rate"] / 100.0,
        r1=row["importer_rate"] / 100.0,
    )


def _structural_counts(config, panel):
    out = np.empty(len(panel))
    cache = {}
    for i in range(len(panel)):
        row = {k: panel[k][i] for k in ("ln_pershipment_cost", "mode", "exporter_rate", "importer_rate")}
        key = tuple(row.values())
        if key not in cache:
            try:
                cache[key] = solve(cell_params(config, row)).n
            except (ValueError, ArithmeticError) as exc:
                cell = tuple(panel[k][i] for k in KEY_FIELDS)
                raise CellSolveError(cell, exc) from exc
        out[i] = cache[key]
    return out


# CSV i/o -------------------------------------------------------------------


def _fmt(name, value):
    if name in _STR_FIELDS:
        return value
    if name in _INT_FIELDS:
        return str(int(value))
    return repr(float(value))


def write_panel(panel: Panel, path) -> None:
    """Write the panel as UTF-8 CSV with a header row; floats use ``repr``."""
    names = panel.columns
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        cols = [panel[n] for n in names]
        for i in range(len(panel)):
            w.writerow([_fmt(n, c[i]) for n, c in zip(names, cols)])


def read_panel(path) -> Panel:
    """Read a panel CSV, validating types, counts and key uniqueness.

    Raises
    ------
    PanelFormatError
        Naming the line number of a malformed row, or the duplicated key.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PanelFormatError(f"{path}: empty file, expected a header row") from None
        missing = [f for f in PANEL_FIELDS if f not in header]
        if missing:
            raise PanelFormatError(f"{path}: header lacks {missing}")
        if len(set(header)) != len(header):
            raise PanelFormatError(f"{path}: duplicate column names in header")
        data = {name: [] for name in header}
        seen = {}
        for row in reader:
            line = reader.line_num
            if len(row) != len(header):
                raise PanelFormatError(f"line {line}: expected {len(header)} fields, got {len(row)}")
            for name, text in zip(header, row):
                try:
                    value = _parse(name, text)
                except ValueError as exc:
                    raise PanelFormatError(f"line {line}: field {name}: {exc}") from None
                data[name].append(value)
            key = tuple(data[k][-1] for k in KEY_FIELDS)
            if key in seen:
                raise PanelFormatError(
                    f"line {line}: duplicate key firm={key[0]} product={key[1]} mode={key[2]} "
                    f"destination={key[3]} year={key[4]} (first on line {seen[key]})"
                )
            seen[key] = line
    return Panel(data)


def _parse(name, text):
    if name in _STR_FIELDS:
        if not text:
            raise ValueError("empty")
        if name == "mode" and text not in MODES:
            raise ValueError(f"unknown mode {text!r}")
        return text
    if name in _INT_FIELDS:
        value = int(text)
        if name == "n_shipments" and value < 0:
            raise ValueError(f"negative count {value}")
        return value
    return float(text)


def write_countries(countries, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COUNTRY_FIELDS)
        for c in countries:
            w.writerow([c.id] + [repr(getattr(c, f)) for f in COUNTRY_COVARIATES])


def read_countries(path) -> list:
    types = {f.name: f.type for f in dataclasses.fields(CountryProfile)}
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or list(reader.fieldnames) != list(COUNTRY_FIELDS):
            raise PanelFormatError(f"{path}: expected header {COUNTRY_FIELDS}")
        for row in reader:
            try:
                out.append(CountryProfile(**{
                    k: (v if k == "id" else int(v) if types[k] == "int" else float(v)) for k, v in row.items()
                }))
            except (TypeError, ValueError) as exc:
                raise PanelFormatError(f"line {reader.line_num}: {exc}") from None
    return out


def histogram(values, bins):
    """Counts of ``values`` in ``bins`` (edges); returns ``(edges, counts)``."""
    counts, edges = np.histogram(np.asarray(values, dtype=float), bins=bins)
    return edges, counts


def write_histogram(values, bins, path, label="value") -> None:
    edges, counts = histogram(values, bins)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"{label}_lo", f"{label}_hi", "count"])
        for lo, hi, n in zip(edges[:-1], edges[1:], counts):
            w.writerow([repr(float(lo)), repr(float(hi)), int(n)])
