"""Scenario runner: config-driven experiments emitting CSV plus a JSON summary.

Subcommands:

    qgplab run <config.ini>     execute a scenario
    qgplab presets              list bundled model presets
    qgplab validate <config>    parse and build without running

Configs are strict INI files; unknown sections or keys are rejected. All
frequencies at this boundary are cyclic (Hz = E/h); CSV time columns are
seconds and energy/rate columns angular (rad/s). Exit codes: 0 success,
2 configuration error, 3 numerical failure.
"""

import argparse
import configparser
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import ConfigError, NumericalError, QgplabError
from .numerics import TimeGrid
from .presets import PRESETS, ModelBundle, build_bundle, list_presets
from .spectral import track
from .geometry import geometric_series, polar_cap_surface, theta_winding
from .dynamics import adiabatic_report
from .interferometer import intensity_offset_series, scan_and_extract_frequency

KINDS = ("qgp", "interfere", "theta", "adiabatic-check", "sweep")
SWEEPABLE_KINDS = ("qgp", "interfere", "adiabatic-check")

_SECTION_KEYS = {
    "scenario": {"kind", "preset", "seed", "gauge", "label"},
    "model": None,  # validated against the preset's parameter names
    "grid": {"periods", "samples_per_period", "span_s", "samples"},
    "theta": {"theta0_rad", "mesh", "boundary_samples"},
    "interfere": {"delta_t_steps", "min_periods", "min_samples_per_period"},
    "adiabatic": {"tol"},
    "sweep": {"parameter", "values", "kind"},
    "output": {"csv", "summary"},
}

CONVENTIONS = {
    "units": (
        "config frequencies are cyclic (Hz = E/h); internal rates angular "
        "(x 2*pi); CSV time columns in seconds, energies/rates in rad/s"
    ),
    "levels": "level 0 = lowest instantaneous eigenvalue ('minus'), level 1 = highest ('plus')",
    "qgp_orientation": (
        "Delta_mn = A_m - A_n + d/dt arg<phi_n|d/dt phi_m>; on the rotating "
        "preset Delta_(1,0) = +2*K*eta*cos(theta)"
    ),
    "curvature_orientation": (
        "plaquette phases taken counterclockwise in chart coordinates "
        "(equals -curl of i<phi|d phi>); upper sphere level -> +sin(theta)/2; "
        "winding combines flux of F_n - F_m with the boundary traversed in "
        "increasing time"
    ),
}


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class Scenario:
    kind: str
    preset: str
    seed: int = 0
    gauge: str | None = None
    label: str | None = None
    model_overrides: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    theta: dict = field(default_factory=dict)
    interfere: dict = field(default_factory=dict)
    adiabatic: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    csv_path: str | None = None
    summary_path: str | None = None
    echo: dict = field(default_factory=dict)


def _typed(section: str, key: str, raw: str, caster, what: str):
    try:
        return caster(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{section}.{key}: expected {what}, got {raw!r}") from None


_FLOAT_KEYS = {
    "periods", "samples_per_period", "span_s", "theta0_rad", "tol",
    "min_periods", "min_samples_per_period",
}
_INT_KEYS = {"samples", "seed", "mesh", "boundary_samples", "delta_t_steps"}


def parse_config(path: str) -> Scenario:
    """Parse and validate a scenario config; raises ConfigError on any defect."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"config parse error in {path!r}: {exc}") from None

    echo: dict = {}
    sections: dict = {}
    for section in parser.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(
                f"unknown section [{section}]; known sections: "
                f"{', '.join(_SECTION_KEYS)}"
            )
        allowed = _SECTION_KEYS[section]
        values = {}
        for key, raw in parser.items(section):
            if allowed is not None and key not in allowed:
                raise ConfigError(
                    f"unknown key {section}.{key}; allowed: {', '.join(sorted(allowed))}"
                )
            if key in _FLOAT_KEYS:
                values[key] = _typed(section, key, raw, float, "a number")
            elif key in _INT_KEYS:
                values[key] = _typed(section, key, raw, int, "an integer")
            elif section == "model":
                values[key] = _typed(section, key, raw, float, "a number")
            else:
                values[key] = raw
        sections[section] = values
        echo[section] = dict(values)

    scenario_cfg = sections.get("scenario", {})
    kind = scenario_cfg.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"scenario.kind must be one of {', '.join(KINDS)}; got {kind!r}")
    preset = scenario_cfg.get("preset")
    if not preset:
        raise ConfigError("scenario.preset is required")
    if preset not in PRESETS:
        raise ConfigError(
            f"unknown preset {preset!r}; known presets: {', '.join(PRESETS)}"
        )
    gauge = scenario_cfg.get("gauge")
    if gauge is not None and gauge not in ("analytic", "parallel_transport", "raw"):
        raise ConfigError(f"scenario.gauge must be analytic|parallel_transport|raw, got {gauge!r}")
    for key in ("samples", "mesh", "boundary_samples", "periods", "samples_per_period", "span_s"):
        for sect in ("grid", "theta"):
            v = sections.get(sect, {}).get(key)
            if v is not None and not v > 0:
                raise ConfigError(f"{sect}.{key} must be positive, got {v!r}")

    scn = Scenario(
        kind=kind,
        preset=preset,
        seed=int(scenario_cfg.get("seed", 0)),
        gauge=gauge,
        label=scenario_cfg.get("label"),
        model_overrides=sections.get("model", {}),
        grid=sections.get("grid", {}),
        theta=sections.get("theta", {}),
        interfere=sections.get("interfere", {}),
        adiabatic=sections.get("adiabatic", {}),
        sweep=sections.get("sweep", {}),
        csv_path=sections.get("output", {}).get("csv"),
        summary_path=sections.get("output", {}).get("summary"),
        echo=echo,
    )
    if kind == "sweep":
        if "parameter" not in scn.sweep or "values" not in scn.sweep:
            raise ConfigError("sweep scenarios need sweep.parameter and sweep.values")
        sub = scn.sweep.get("kind", "interfere")
        if sub not in SWEEPABLE_KINDS:
            raise ConfigError(
                f"sweep.kind must be one of {', '.join(SWEEPABLE_KINDS)}; got {sub!r}"
            )
    return scn


def _sweep_values(scn: Scenario) -> np.ndarray:
    spec = scn.sweep["values"].strip()
    if spec.startswith("linspace:"):
        parts = spec.split(":")
        if len(parts) != 4:
            raise ConfigError("sweep.values linspace form is linspace:start:stop:count")
        start = _typed("sweep", "values", parts[1], float, "a number")
        stop = _typed("sweep", "values", parts[2], float, "a number")
        count = _typed("sweep", "values", parts[3], int, "an integer")
        return np.linspace(start, stop, count)
    if spec.startswith("random:"):
        parts = spec.split(":")
        if len(parts) != 4:
            raise ConfigError("sweep.values random form is random:count:low:high")
        count = _typed("sweep", "values", parts[1], int, "an integer")
        low = _typed("sweep", "values", parts[2], float, "a number")
        high = _typed("sweep", "values", parts[3], float, "a number")
        rng = np.random.default_rng(scn.seed)
        return np.sort(rng.uniform(low, high, count))
    try:
        return np.asarray([float(v) for v in spec.split(",") if v.strip() != ""])
    except ValueError:
        raise ConfigError(f"sweep.values: cannot parse {spec!r}") from None


# ---------------------------------------------------------------------------
# experiment runners
# ---------------------------------------------------------------------------

_GRID_DEFAULTS = {
    "qgp": (1.0, 4096.0),
    "interfere": (8.0, 512.0),
    "adiabatic-check": (1.0, 512.0),
}

# keep enough samples per field rotation for frame tracking regardless of
# how slow the reported oscillation is
_MIN_SAMPLES_PER_ROTATION = 16.0


def _build_grid(scn: Scenario, bundle: ModelBundle, base_period: float) -> TimeGrid:
    g = scn.grid
    if "span_s" in g or "samples" in g:
        if "span_s" not in g or "samples" not in g:
            raise ConfigError("grid.span_s and grid.samples must be given together")
        span = g["span_s"]
        n = g["samples"]
        if n < 2:
            raise ConfigError("grid.samples must be at least 2")
    else:
        periods_default, spp_default = _GRID_DEFAULTS[
            scn.kind if scn.kind in _GRID_DEFAULTS else scn.sweep.get("kind", "interfere")
        ]
        periods = g.get("periods", periods_default)
        spp = g.get("samples_per_period", spp_default)
        span = periods * base_period
        n = int(round(periods * spp)) + 1
    floor = int(np.ceil(_MIN_SAMPLES_PER_ROTATION * span / bundle.rotation_period_s)) + 1
    n = max(n, floor, 2)
    return TimeGrid.linspace(0.0, span, n)


def _trajectory(scn: Scenario, bundle: ModelBundle, grid: TimeGrid):
    gauge = scn.gauge
    if gauge is None:
        gauge = "analytic" if bundle.model.eig_at is not None else "parallel_transport"
    return track(bundle.model, grid, gauge)


def run_qgp(scn: Scenario, bundle: ModelBundle):
    grid = _build_grid(scn, bundle, bundle.rotation_period_s)
    traj = _trajectory(scn, bundle, grid)
    series = geometric_series(traj, 1, 0)
    columns = [
        ("time_s", grid.samples),
        ("energy_0", traj.energies[:, 0]),
        ("energy_1", traj.energies[:, 1]),
        ("connection_0", series.a_n),
        ("connection_1", series.a_m),
        ("qgp_delta", series.delta),
        ("valid", series.validity.astype(np.float64)),
        ("accumulated_delta", series.accumulated_delta),
    ]
    mean_delta = float(np.nanmean(series.delta))
    headlines = {
        "qgp_delta_rad_per_s": {"value": mean_delta, "units": "rad/s", "csv_source": "qgp_delta"},
    }
    if "eta_hz" in bundle.params_hz:
        eta_ang = 2.0 * np.pi * bundle.params_hz["eta_hz"]
        headlines["delta_over_eta"] = {
            "value": mean_delta / eta_ang, "units": "1", "csv_source": "qgp_delta",
        }
    return columns, headlines, {"gauge": traj.gauge_mode, "samples": grid.n}


def run_interfere(scn: Scenario, bundle: ModelBundle):
    f = bundle.expected_frequency_hz
    base = 1.0 / f if f and np.isfinite(f) and f > 0 else bundle.rotation_period_s
    grid = _build_grid(scn, bundle, base)
    traj = _trajectory(scn, bundle, grid)
    trace, freq = scan_and_extract_frequency(
        traj,
        min_periods=scn.interfere.get("min_periods", 5.0),
        min_samples_per_period=scn.interfere.get("min_samples_per_period", 20.0),
    )
    steps = scn.interfere.get("delta_t_steps", 4)
    offset_intensity = intensity_offset_series(traj, steps)
    columns = [
        ("t1_s", grid.samples),
        ("dI_dt2", trace.dI_dt2),
        ("envelope", trace.envelope),
        ("phase_arg", trace.phase_arg),
        ("dynamic_subtracted", trace.dynamic_subtracted),
        ("intensity_offset", offset_intensity),
    ]
    headlines = {
        "frequency_hz": {"value": freq, "units": "Hz", "csv_source": "dI_dt2"},
        "gap_hz": {"value": bundle.gap_hz, "units": "Hz", "csv_source": "dynamic_subtracted"},
        "frequency_over_gap": {
            "value": freq / bundle.gap_hz if bundle.gap_hz else np.nan,
            "units": "1",
            "csv_source": "dI_dt2",
        },
    }
    extra = {
        "expected_frequency_hz": bundle.expected_frequency_hz,
        "delta_t_steps": steps,
        "gauge": traj.gauge_mode,
        "samples": grid.n,
    }
    return columns, headlines, extra


def run_adiabatic(scn: Scenario, bundle: ModelBundle):
    grid = _build_grid(scn, bundle, bundle.rotation_period_s)
    traj = _trajectory(scn, bundle, grid)
    tol = scn.adiabatic.get("tol", 1e-9)
    report = adiabatic_report(traj, 0, 1, propagation_tol=tol)
    columns = [
        ("time_s", grid.samples),
        ("energy_0", traj.energies[:, 0]),
        ("energy_1", traj.energies[:, 1]),
        ("ratio_qgp", report.ratio_qgp),
        ("ratio_traditional", report.ratio_traditional),
        ("resonance", report.resonance_flags.astype(np.float64)),
        ("fidelity", report.fidelity_trace),
    ]
    headlines = {
        "max_ratio_qgp": {"value": report.max_ratio_qgp, "units": "1", "csv_source": "ratio_qgp"},
        "max_ratio_traditional": {
            "value": report.max_ratio_traditional, "units": "1", "csv_source": "ratio_traditional",
        },
        "min_fidelity": {
            "value": float(report.fidelity_trace.min()), "units": "1", "csv_source": "fidelity",
        },
    }
    return columns, headlines, {"propagation_tol": tol, "gauge": traj.gauge_mode, "samples": grid.n}


def run_theta(scn: Scenario, bundle: ModelBundle):
    if bundle.family is None:
        raise ConfigError(f"preset {bundle.preset!r} has no 2-parameter family for theta scans")
    theta0 = scn.theta.get("theta0_rad", bundle.info.get("theta0_rad", 0.25 * np.pi))
    if not 0.0 < theta0 < np.pi:
        raise ConfigError(f"theta.theta0_rad must lie in (0, pi), got {theta0!r}")
    mesh = scn.theta.get("mesh", 256)
    boundary = scn.theta.get("boundary_samples", 4096)
    result = theta_winding(
        bundle.family,
        polar_cap_surface(theta0),
        period=bundle.rotation_period_s,
        m=1,
        n=0,
        mesh=(mesh, mesh),
        boundary_samples=boundary,
    )
    n_rows = max(result.boundary_times.size, result.ring_flux.size)

    def _pad(a):
        out = np.full(n_rows, np.nan)
        out[: a.size] = a
        return out

    columns = [
        ("boundary_time_s", _pad(result.boundary_times)),
        ("boundary_delta", _pad(result.boundary_delta)),
        ("ring_index", _pad(np.arange(result.ring_flux.size, dtype=np.float64))),
        ("ring_flux", _pad(result.ring_flux)),
    ]
    headlines = {
        "theta": {"value": result.theta, "units": "1", "csv_source": "ring_flux"},
        "nearest_integer": {"value": result.nearest_integer, "units": "1", "csv_source": "ring_flux"},
        "residual": {"value": result.residual, "units": "1", "csv_source": "ring_flux"},
        "surface_integral": {"value": result.surface_integral, "units": "rad", "csv_source": "ring_flux"},
        "boundary_integral": {"value": result.boundary_integral, "units": "rad", "csv_source": "boundary_delta"},
    }
    extra = {"theta0_rad": theta0, "mesh": mesh, "boundary_samples": boundary}
    return columns, headlines, extra


_SUB_RUNNERS = {
    "qgp": run_qgp,
    "interfere": run_interfere,
    "adiabatic-check": run_adiabatic,
}


def run_sweep(scn: Scenario, threads: int = 1):
    parameter = scn.sweep["parameter"]
    values = _sweep_values(scn)
    if values.size == 0:
        raise ConfigError("sweep.values produced no values")
    sub_kind = scn.sweep.get("kind", "interfere")
    runner = _SUB_RUNNERS[sub_kind]

    def one(value: float):
        overrides = dict(scn.model_overrides)
        overrides[parameter] = float(value)
        bundle = build_bundle(scn.preset, overrides)
        _, headlines, _ = runner(scn, bundle)
        return {name: rec["value"] for name, rec in headlines.items()}

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, values))
    else:
        rows = [one(v) for v in values]

    names = list(rows[0].keys())
    columns = [(parameter, values)]
    for name in names:
        columns.append((name, np.asarray([row[name] for row in rows], dtype=np.float64)))
    headlines = {
        "sweep_points": {"value": int(values.size), "units": "1", "csv_source": parameter},
    }
    if "frequency_hz" in names:
        freqs = np.asarray([row["frequency_hz"] for row in rows])
        headlines["frequency_hz_min"] = {"value": float(freqs.min()), "units": "Hz", "csv_source": "frequency_hz"}
        headlines["frequency_hz_max"] = {"value": float(freqs.max()), "units": "Hz", "csv_source": "frequency_hz"}
    extra = {"parameter": parameter, "sub_kind": sub_kind, "threads": threads}
    return columns, headlines, extra


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, kind: str, columns, stamp: str) -> None:
    names = [name for name, _ in columns]
    arrays = [np.asarray(a, dtype=np.float64) for _, a in columns]
    n = max(a.size for a in arrays)
    lines = [f"# qgplab {kind} csv generated {stamp}", ",".join(names)]
    for i in range(n):
        row = []
        for a in arrays:
            row.append(f"{a[i]:.17g}" if i < a.size else "nan")
        lines.append(",".join(row))
    _atomic_write(path, "\n".join(lines) + "\n")


def execute(scn: Scenario, out_dir: str = ".", threads: int = 1) -> dict:
    """Run a parsed scenario, write artifacts, and return the summary dict."""
    start = time.perf_counter()
    if scn.kind == "sweep":
        bundle = build_bundle(scn.preset, scn.model_overrides)  # validates overrides
        columns, headlines, extra = run_sweep(scn, threads)
    else:
        bundle = build_bundle(scn.preset, scn.model_overrides)
        runner = {**_SUB_RUNNERS, "theta": run_theta}[scn.kind]
        columns, headlines, extra = runner(scn, bundle)
    wall = time.perf_counter() - start

    csv_name = scn.csv_path or f"{scn.kind}.csv"
    summary_name = scn.summary_path or f"{scn.kind}.json"
    csv_path = os.path.join(out_dir, csv_name)
    summary_path = os.path.join(out_dir, summary_name)
    stamp = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    write_csv(csv_path, scn.kind, columns, stamp)

    summary = {
        "qgplab_version": __version__,
        "scenario": scn.echo,
        "preset": scn.preset,
        "kind": scn.kind,
        "seed": scn.seed,
        "model_hz": bundle.params_hz,
        "headlines": headlines,
        "details": extra,
        "conventions": dict(CONVENTIONS),
        "csv": os.path.basename(csv_path),
        "wall_time_s": wall,
    }
    _atomic_write(summary_path, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------

def _cmd_run(args) -> int:
    scn = parse_config(args.config)
    if args.seed is not None:
        scn.seed = args.seed
    summary = execute(scn, out_dir=args.out_dir, threads=args.threads)
    for name, rec in summary["headlines"].items():
        print(f"{name} = {rec['value']:.10g} {rec['units']}")
    print(f"csv: {os.path.join(args.out_dir, summary['csv'])}")
    return 0


def _cmd_presets(_args) -> int:
    for name, description in list_presets():
        print(f"{name}: {description}")
    return 0


def _cmd_validate(args) -> int:
    scn = parse_config(args.config)
    build_bundle(scn.preset, scn.model_overrides)
    if scn.kind == "sweep":
        _sweep_values(scn)
    print(f"ok: {args.config} ({scn.kind} on {scn.preset})")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qgplab",
        description="geometric-potential laboratory: config-driven scenario runner",
    )
    parser.add_argument("--version", action="version", version=f"qgplab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a scenario config")
    run_p.add_argument("config")
    run_p.add_argument("--out-dir", default=".", help="directory for CSV/JSON artifacts")
    run_p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    run_p.add_argument("--seed", type=int, default=None, help="override scenario seed")
    run_p.set_defaults(func=_cmd_run)

    presets_p = sub.add_parser("presets", help="list model presets")
    presets_p.set_defaults(func=_cmd_presets)

    val_p = sub.add_parser("validate", help="parse and build a config without running")
    val_p.add_argument("config")
    val_p.set_defaults(func=_cmd_validate)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(json.dumps({"error_category": exc.category, "message": str(exc)}), file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(json.dumps({"error_category": exc.category, "message": str(exc)}), file=sys.stderr)
        return 3
    except QgplabError as exc:  # pragma: no cover - base-class safety net
        print(json.dumps({"error_category": exc.category, "message": str(exc)}), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
