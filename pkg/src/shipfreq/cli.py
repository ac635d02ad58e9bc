"""Command-line entry point.

``shipfreq <solve|statics|simulate|estimate|roundtrip> --config FILE [--seed N] [--out DIR]``

The config file is INI. Sections used per command:

``[model]``       c, q, f, delta, r, r1, variant, method
``[statics]``     draws, seed, and optional ``<param> = lo, hi, log|lin`` ranges
``[dgp]``         DgpConfig fields; ``[betas]`` and ``[fe_variances]`` map names to numbers
``[estimation]``  outcome, regressors, fe, cluster, estimator, panel (path)

``--set section.key=value`` overrides single keys. Exit codes: 0 success,
1 round trip outside 3 standard errors, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import math
import sys
from pathlib import Path

import numpy as np

from . import model, panel as panel_mod, statics
from .estimation import EstimationSpec, elasticity_effects, estimate
from .panel import CellSolveError, DgpConfig

EXIT_OK = 0
EXIT_ROUNDTRIP = 1
EXIT_INVALID = 2
EXIT_NUMERIC = 3
Z_LIMIT = 3.0


class ConfigError(ValueError):
    """Missing or malformed configuration."""


def _split(text):
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _section(cfg, name):
    if not cfg.has_section(name):
        raise ConfigError(f"config lacks section [{name}]")
    return cfg[name]


def _float(sec, key, default=None):
    if key not in sec:
        if default is None:
            raise ConfigError(f"[{sec.name}] lacks key {key!r}")
        return default
    try:
        return float(sec[key])
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key}: not a number: {sec[key]!r}") from None


def _int(sec, key, default):
    try:
        return int(sec.get(key, default))
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key}: not an integer: {sec[key]!r}") from None


def model_params(cfg) -> tuple:
    sec = _section(cfg, "model")
    params = model.ModelParams(**{k: _float(sec, k) for k in ("c", "q", "f", "delta", "r", "r1")})
    return params, sec.get("variant", "baseline"), sec.get("method", "lambert")


def statics_grid(cfg):
    if not cfg.has_section("statics"):
        return statics.StaticsGrid(), 1000, 0
    sec = cfg["statics"]
    ranges = {}
    for name in ("c", "q", "f", "delta", "r", "r1"):
        if name in sec:
            parts = _split(sec[name])
            if len(parts) != 3:
                raise ConfigError(f"[statics] {name}: expected 'lo, hi, log|lin'")
            ranges[name] = (float(parts[0]), float(parts[1]), parts[2])
    return statics.StaticsGrid(**ranges), _int(sec, "draws", 1000), _int(sec, "seed", 0)


def dgp_config(cfg, seed=None) -> DgpConfig:
    kwargs = {}
    if cfg.has_section("dgp"):
        sec = cfg["dgp"]
        for key in ("mode",):
            if key in sec:
                kwargs[key] = sec[key]
        for key in ("seed", "n_firms", "n_products", "n_destinations", "n_years", "start_year"):
            if key in sec:
                kwargs[key] = _int(sec, key, 0)
        for key in ("density", "dist_gdp_corr", "common_legal_p", "f_scale", "c", "q"):
            if key in sec:
                kwargs[key] = _float(sec, key)
        for key in ("mode_probs", "exporter_rate_range"):
            if key in sec:
                kwargs[key] = tuple(float(v) for v in _split(sec[key]))
        if "delta_by_mode" in sec:
            pairs = [p.split(":") for p in _split(sec["delta_by_mode"])]
            kwargs["delta_by_mode"] = {k.strip(): float(v) for k, v in pairs}
        if "jitter" in sec:
            kwargs["jitter"] = sec.getboolean("jitter")
    for name in ("betas", "fe_variances"):
        if cfg.has_section(name):
            sec = cfg[name]
            kwargs[name] = {k: _float(sec, k) for k in sec}
    if seed is not None:
        kwargs["seed"] = seed
    return DgpConfig(**kwargs)


def default_spec(config: DgpConfig) -> EstimationSpec:
    """PPML of counts on every planted term with firm and product*mode*year FEs, firm clusters."""
    terms = tuple(t for t in config.betas if t != "const")
    return EstimationSpec("count", terms, ("firm", "product*mode*year"), "firm", "ppml")


def estimation_spec(cfg) -> EstimationSpec:
    sec = _section(cfg, "estimation")
    if "outcome" not in sec:
        raise ConfigError("[estimation] lacks key 'outcome'")
    return EstimationSpec(
        outcome=sec["outcome"],
        regressors=_split(sec.get("regressors", "")),
        fe_levels=_split(sec.get("fe", "")),
        cluster=sec.get("cluster") or None,
        estimator=sec.get("estimator", "ppml"),
    )


# writers -------------------------------------------------------------------


def _write(out: Path, name: str, text: str, written: list):
    (out / name).write_text(text, encoding="utf-8", newline="")
    written.append(name)


def _csv(rows):
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _manifest(out, command, seed, written):
    lines = [f"command: {command}", f"seed: {seed}", "files:"]
    for name in sorted(written):
        data = (out / name).read_bytes()
        lines.append(f"  {name} {len(data)} sha256:{hashlib.sha256(data).hexdigest()}")
    (out / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def solution_csv(sol) -> str:
    fields = [
        ("variant", sol.variant.value),
        ("x_star", sol.x_star),
        ("n", sol.n),
        ("demand", sol.demand),
        ("cost", sol.cost),
        ("foc_residual", sol.foc_residual),
        ("relative_residual", sol.relative_residual),
        ("soc", sol.soc_value),
        ("solver_path", sol.solver_path.value),
        ("iterations", sol.iterations),
    ]
    return _csv([[k for k, _ in fields], [repr(v) if isinstance(v, float) else str(v) for _, v in fields]])


# commands ------------------------------------------------------------------


def run_solve(cfg, args, out, written):
    params, variant, method = model_params(cfg)
    sol = model.solve(params, variant, method)
    text = solution_csv(sol)
    _write(out, "solution.csv", text, written)
    print(
        f"x* = {sol.x_star!r}\nn = {sol.n!r}\nD = {sol.demand!r}\nC = {sol.cost!r}\n"
        f"relative FOC residual = {sol.relative_residual!r}\nSOC = {sol.soc_value!r}"
    )
    return EXIT_OK


def run_statics(cfg, args, out, written):
    grid, draws, seed = statics_grid(cfg)
    if args.seed is not None:
        seed = args.seed
    summary = statics.statics_sweep(grid, draws, seed)
    text = summary.to_csv()
    _write(out, "statics_summary.csv", text, written)
    sys.stdout.write(text)
    if summary.errors:
        print(f"{len(summary.errors)} draws failed to solve; first: {summary.errors[0]}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _simulate(cfg, seed, out, written):
    config = dgp_config(cfg, seed)
    countries = panel_mod.generate_countries(config)
    panel = panel_mod.generate_panel(config, countries)
    panel_mod.write_panel(panel, out / "panel.csv")
    written.append("panel.csv")
    panel_mod.write_countries(countries, out / "countries.csv")
    written.append("countries.csv")
    top = int(panel["n_shipments"].max()) + 1 if len(panel) else 1
    panel_mod.write_histogram(panel["n_shipments"], np.arange(0, top + 1), out / "hist_n_shipments.csv", "n_shipments")
    written.append("hist_n_shipments.csv")
    if "ln_pershipment_value" in panel:
        v = panel["ln_pershipment_value"]
        v = v[np.isfinite(v)]
        if v.size:
            panel_mod.write_histogram(v, 40, out / "hist_ln_pershipment_value.csv", "ln_pershipment_value")
            written.append("hist_ln_pershipment_value.csv")
    return config, panel


def run_simulate(cfg, args, out, written):
    config, panel = _simulate(cfg, args.seed, out, written)
    print(f"{len(panel)} cells, {int(panel['n_shipments'].sum())} shipments ({config.mode})")
    return EXIT_OK


def _estimate(panel, spec, out, written):
    result = estimate(panel, spec)
    effects = elasticity_effects(result)
    _write(out, "estimates.csv", result.to_csv(effects), written)
    _write(out, "run_metadata.txt", result.metadata(), written)
    return result


def run_estimate(cfg, args, out, written):
    spec = estimation_spec(cfg)
    sec = cfg["estimation"]
    if "panel" not in sec:
        raise ConfigError("[estimation] lacks key 'panel'")
    path = Path(sec["panel"])
    if not path.is_absolute():
        path = Path(args.config).parent / path
    panel = panel_mod.read_panel(path)
    result = _estimate(panel, spec, out, written)
    sys.stdout.write(result.to_csv(elasticity_effects(result)))
    return EXIT_OK


def run_roundtrip(cfg, args, out, written):
    config, panel = _simulate(cfg, args.seed, out, written)
    spec = estimation_spec(cfg) if cfg.has_section("estimation") else default_spec(config)
    result = _estimate(panel, spec, out, written)
    rows = [["term", "planted", "estimate", "clustered_se", "z", "within_2se", "within_3se"]]
    worst = 0.0
    for name in result.names:
        planted = float(config.betas.get(name, 0.0))
        b, s = result.coef(name), result.stderr(name)
        z = (b - planted) / s if s > 0 else math.inf
        worst = max(worst, abs(z))
        rows.append([name, repr(planted), repr(b), repr(s), repr(z), str(abs(z) <= 2.0), str(abs(z) <= 3.0)])
    _write(out, "roundtrip_report.csv", _csv(rows), written)
    print(f"{len(panel)} cells, max |z| = {worst:.3f}")
    return EXIT_OK if worst <= Z_LIMIT else EXIT_ROUNDTRIP


COMMANDS = {
    "solve": run_solve,
    "statics": run_statics,
    "simulate": run_simulate,
    "estimate": run_estimate,
    "roundtrip": run_roundtrip,
}


def build_parser():
    p = argparse.ArgumentParser(prog="shipfreq", description="Shipment-frequency model, simulation and estimation.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="INI configuration file")
    p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override one config key")
    return p


def load_config(path, overrides=()):
    cfg = configparser.ConfigParser(interpolation=None)
    cfg.optionxform = str
    if not Path(path).is_file():
        raise ConfigError(f"config file not found: {path}")
    cfg.read(path, encoding="utf-8")
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, option = key.partition(".")
        if not sep or not dot:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        if not cfg.has_section(section):
            cfg.add_section(section)
        cfg[section][option] = value
    return cfg


def _exit_code(exc):
    cause = exc.cause if isinstance(exc, CellSolveError) else exc
    if isinstance(cause, ArithmeticError):
        return EXIT_NUMERIC
    return EXIT_INVALID


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be >= 0", file=sys.stderr)
        return EXIT_INVALID
    out = Path(args.out)
    written: list = []
    try:
        cfg = load_config(args.config, args.set)
        out.mkdir(parents=True, exist_ok=True)
        code = COMMANDS[args.command](cfg, args, out, written)
    except (ArithmeticError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    _manifest(out, args.command, "config" if args.seed is None else args.seed, written)
    return code


if __name__ == "__main__":
    sys.exit(main())
