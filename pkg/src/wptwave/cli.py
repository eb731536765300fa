"""Experiment driver: seeded sweeps over power/bandwidth/N/beta/A_s to CSV.

Config is a single JSON file (see README or `wptwave run --help`).  Every row
of the output CSV is one (sweep point, method, channel realization) triple
carrying the full chain report plus solver status; rows are written in
deterministic order and all floats use repr-stable formatting, so a re-run
with the same config and base_seed is byte-identical.  Timestamps and other
run-specific facts live only in the JSON sidecar next to the CSV.

dB conventions: power levels are dBW = 10*log10(P/1 W); the saturation level
A_s is dBV = 20*log10(A_s/1 V); path loss / antenna gain are amplitude-scaled
onto the channel as 10^((rx_gain_dbi - path_loss_db)/20).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .amplifier import SspaParams
from .baselines import (
    evaluate_chain,
    evaluate_dense_chain,
    no_hpa_waveform,
    optimize_ideal_hpa,
    papr_capped_waveform,
    scale_to_chain_feasibility,
    single_carrier_best,
)
from .channel import FrequencyResponse, etsi_model_b_profile, flat_channel, sample_channel
from .errors import ContractViolationError, WptError
from .model1 import Model1Config, optimize_model1
from .model2 import Model2Config, optimize_model2
from .multisine import FrequencyGrid, MultisineWaveform, average_power, papr, participation_ratio
from .rectenna import RectennaParams, z_dc

WORKERS_ENV = "WPTWAVE_WORKERS"
SCHEMA = "wptwave.sweep.v1"

SWEEP_VARIABLES = (
    "p_both_dbw",
    "p_in_max_dbw",
    "p_tr_max_dbw",
    "bandwidth_hz",
    "n_subcarriers",
    "beta",
    "a_s_db",
)
METHODS = ("ideal", "model1", "model2", "model2_approx", "no_hpa", "single_carrier", "papr_capped")

COLUMNS = (
    "sweep_variable",
    "sweep_value",
    "method",
    "realization",
    "channel_seed",
    "n_subcarriers",
    "delta_f_hz",
    "bandwidth_hz",
    "beta",
    "a_s_db",
    "p_in_max_w",
    "p_tr_max_w",
    "status",
    "iterations",
    "p_in_w",
    "p_out_hpa_w",
    "p_discarded_w",
    "p_tr_w",
    "obo_db",
    "pe",
    "ape",
    "p_dc_supply_w",
    "z_dc",
    "pte",
    "papr_in",
    "papr_tr",
    "participation_ratio",
)

_METRIC_COLUMNS = COLUMNS[14:]

_KNOWN_KEYS = {
    "scenario",
    "sweep",
    "methods",
    "n_realizations",
    "base_seed",
    "output",
    "f0_hz",
    "bandwidth_hz",
    "n_subcarriers",
    "sspa",
    "rectenna",
    "p_in_max_dbw",
    "p_tr_max_dbw",
    "path_loss_db",
    "rx_gain_dbi",
    "apply_link_budget",
    "extension",
    "papr_cap_db",
    "model1",
    "model2",
}

_MODEL1_OVERRIDE_KEYS = {
    "extension",
    "eps_scp",
    "eps_sqp",
    "max_scp_iterations",
    "max_sqp_iterations",
    "init",
    "full_step",
}
_MODEL2_OVERRIDE_KEYS = {
    "eps_scp",
    "barrier_t0",
    "barrier_mu",
    "barrier_eps",
    "quadrature_points",
    "max_scp_iterations",
    "max_newton_iterations",
    "extension_factor",
    "reconstruction_oversampling",
}


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    sweep_variable: str
    sweep_grid: tuple
    methods: tuple
    n_realizations: int
    base_seed: int
    output: str | None
    f0_hz: float
    bandwidth_hz: float
    n_subcarriers: int
    sspa_gain: float
    a_s_db: float
    beta: float
    k2: float
    k4: float
    r_ant_ohm: float
    r_load_ohm: float
    p_in_max_dbw: float
    p_tr_max_dbw: float
    path_loss_db: float
    rx_gain_dbi: float
    apply_link_budget: bool
    extension: float
    papr_cap_db: float | None
    model1_overrides: dict = field(default_factory=dict)
    model2_overrides: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ContractViolationError(message)


def config_from_json(d: dict) -> ExperimentConfig:
    """Parse and validate the experiment config dict (strict on unknown keys)."""
    _require(isinstance(d, dict), "config must be a JSON object")
    unknown = set(d) - _KNOWN_KEYS
    _require(not unknown, f"unknown config keys: {sorted(unknown)}")

    scenario = d.get("scenario", "flat")
    _require(scenario in ("flat", "etsi_b"), "scenario must be 'flat' or 'etsi_b'")

    sweep = d.get("sweep")
    _require(isinstance(sweep, dict), "config needs a 'sweep' object {variable, grid}")
    variable = sweep.get("variable")
    _require(variable in SWEEP_VARIABLES, f"sweep.variable must be one of {SWEEP_VARIABLES}")
    grid = sweep.get("grid")
    _require(isinstance(grid, list) and len(grid) > 0, "sweep.grid must be a non-empty list")
    values = []
    for v in grid:
        _require(isinstance(v, (int, float)) and math.isfinite(v), "sweep values must be finite numbers")
        if variable == "n_subcarriers":
            _require(float(v).is_integer() and v >= 1, "n_subcarriers sweep values must be integers >= 1")
            values.append(int(v))
        else:
            values.append(float(v))

    methods = d.get("methods")
    _require(isinstance(methods, list) and len(methods) > 0, "methods must be a non-empty list")
    _require(len(set(methods)) == len(methods), "methods must not repeat")
    for m in methods:
        _require(m in METHODS, f"unknown method {m!r}; choose from {METHODS}")

    n_realizations = d.get("n_realizations", 1)
    _require(
        isinstance(n_realizations, int) and n_realizations >= 1,
        "n_realizations must be an integer >= 1",
    )
    if scenario == "flat":
        n_realizations = 1  # deterministic channel; extra realizations are identical

    sspa = d.get("sspa", {})
    _require(isinstance(sspa, dict), "sspa must be an object")
    rect = d.get("rectenna", {})
    _require(isinstance(rect, dict), "rectenna must be an object")

    m1 = d.get("model1", {})
    m2 = d.get("model2", {})
    _require(isinstance(m1, dict), "model1 overrides must be an object")
    _require(isinstance(m2, dict), "model2 overrides must be an object")
    bad1 = set(m1) - _MODEL1_OVERRIDE_KEYS
    bad2 = set(m2) - _MODEL2_OVERRIDE_KEYS
    _require(not bad1, f"unknown model1 override keys: {sorted(bad1)}")
    _require(not bad2, f"unknown model2 override keys: {sorted(bad2)}")

    papr_cap_db = d.get("papr_cap_db")
    if "papr_capped" in methods:
        _require(
            isinstance(papr_cap_db, (int, float)),
            "method 'papr_capped' requires papr_cap_db",
        )

    cfg = ExperimentConfig(
        scenario=scenario,
        sweep_variable=variable,
        sweep_grid=tuple(values),
        methods=tuple(methods),
        n_realizations=n_realizations,
        base_seed=int(d.get("base_seed", 0)),
        output=d.get("output"),
        f0_hz=float(d.get("f0_hz", 5.18e9)),
        bandwidth_hz=float(d.get("bandwidth_hz", 1e7)),
        n_subcarriers=int(d.get("n_subcarriers", 8)),
        sspa_gain=float(sspa.get("gain", 1.0)),
        a_s_db=float(sspa.get("a_s_db", 10.0)),
        beta=float(sspa.get("beta", 4.0)),
        k2=float(rect.get("k2", 0.0034)),
        k4=float(rect.get("k4", 0.3829)),
        r_ant_ohm=float(rect.get("r_ant_ohm", 50.0)),
        r_load_ohm=float(rect.get("r_load_ohm", 1.0)),
        p_in_max_dbw=float(d.get("p_in_max_dbw", 10.0)),
        p_tr_max_dbw=float(d.get("p_tr_max_dbw", 8.0)),
        path_loss_db=float(d.get("path_loss_db", 58.0)),
        rx_gain_dbi=float(d.get("rx_gain_dbi", 2.0)),
        apply_link_budget=bool(d.get("apply_link_budget", scenario == "etsi_b")),
        extension=float(d.get("extension", 2.0)),
        papr_cap_db=None if papr_cap_db is None else float(papr_cap_db),
        model1_overrides=dict(m1),
        model2_overrides=dict(m2),
        raw=dict(d),
    )
    _require(cfg.n_subcarriers >= 1, "n_subcarriers must be >= 1")
    _require(cfg.f0_hz > 0 and cfg.bandwidth_hz > 0, "f0_hz and bandwidth_hz must be positive")
    _require(cfg.extension > 1.0, "extension must be > 1")
    _require(cfg.output is None or isinstance(cfg.output, str), "output must be a path string")
    return cfg


@dataclass(frozen=True)
class _Point:
    """Fully resolved parameters of one (sweep value, realization) cell."""

    sweep_value: float
    realization: int
    channel_seed: int | None
    n: int
    delta_f_hz: float
    f0_hz: float
    gain: float
    a_s_db: float
    beta: float
    p_in_max_w: float
    p_tr_max_w: float


def _resolve_point(cfg: ExperimentConfig, value, realization: int) -> _Point:
    n = cfg.n_subcarriers
    bandwidth = cfg.bandwidth_hz
    beta = cfg.beta
    a_s_db = cfg.a_s_db
    p_in_dbw = cfg.p_in_max_dbw
    p_tr_dbw = cfg.p_tr_max_dbw
    v = cfg.sweep_variable
    if v == "p_both_dbw":
        p_in_dbw = p_tr_dbw = value
    elif v == "p_in_max_dbw":
        p_in_dbw = value
    elif v == "p_tr_max_dbw":
        p_tr_dbw = value
    elif v == "bandwidth_hz":
        bandwidth = value
    elif v == "n_subcarriers":
        n = int(value)
    elif v == "beta":
        beta = value
    elif v == "a_s_db":
        a_s_db = value
    seed = None
    if cfg.scenario == "etsi_b":
        # one tap realization per (base_seed, realization): identical gains across
        # every sweep value so that sweep comparisons are paired
        seed = int(np.random.SeedSequence((cfg.base_seed, realization)).generate_state(1)[0])
    return _Point(
        sweep_value=float(value),
        realization=realization,
        channel_seed=seed,
        n=n,
        delta_f_hz=bandwidth / n,
        f0_hz=cfg.f0_hz,
        gain=cfg.sspa_gain,
        a_s_db=a_s_db,
        beta=beta,
        p_in_max_w=10.0 ** (p_in_dbw / 10.0),
        p_tr_max_w=10.0 ** (p_tr_dbw / 10.0),
    )


def _channel(cfg: ExperimentConfig, point: _Point, grid: FrequencyGrid) -> FrequencyResponse:
    if cfg.scenario == "etsi_b":
        h = sample_channel(etsi_model_b_profile(), point.channel_seed, grid)
    else:
        h = flat_channel(grid)
    if cfg.apply_link_budget:
        h = h.scaled(10.0 ** ((cfg.rx_gain_dbi - cfg.path_loss_db) / 20.0))
    return h


def _nan_row_metrics() -> dict:
    return {c: math.nan for c in _METRIC_COLUMNS}


def _report_metrics(report, w_tr: MultisineWaveform) -> dict:
    return {
        "p_in_w": report.p_in,
        "p_out_hpa_w": report.p_out_hpa,
        "p_discarded_w": report.p_discarded_bpf,
        "p_tr_w": report.p_tr,
        "obo_db": report.obo_db,
        "pe": report.pe,
        "ape": report.ape,
        "p_dc_supply_w": report.p_dc_supply,
        "z_dc": report.z_dc,
        "pte": report.pte,
        "papr_in": report.papr_in,
        "papr_tr": report.papr_tr,
        "participation_ratio": (
            participation_ratio(w_tr) if np.any(np.abs(w_tr.weights) > 0) else math.nan
        ),
    }


def _method_rows(cfg: ExperimentConfig, point: _Point) -> list[dict]:
    grid = FrequencyGrid(point.f0_hz, point.delta_f_hz, point.n)
    sspa = SspaParams.from_db(point.gain, point.a_s_db, point.beta)
    rect = RectennaParams(cfg.k2, cfg.k4, cfg.r_ant_ohm, cfg.r_load_ohm)
    h = _channel(cfg, point, grid)
    ext = cfg.extension

    base = {
        "sweep_variable": cfg.sweep_variable,
        "sweep_value": point.sweep_value,
        "realization": point.realization,
        "channel_seed": "" if point.channel_seed is None else point.channel_seed,
        "n_subcarriers": point.n,
        "delta_f_hz": point.delta_f_hz,
        "bandwidth_hz": point.delta_f_hz * point.n,
        "beta": point.beta,
        "a_s_db": point.a_s_db,
        "p_in_max_w": point.p_in_max_w,
        "p_tr_max_w": point.p_tr_max_w,
    }

    model2_sol = None
    model2_err = None
    if "model2" in cfg.methods or "model2_approx" in cfg.methods:
        try:
            m2cfg = Model2Config(
                p_in_max=point.p_in_max_w, p_tr_max=point.p_tr_max_w, **cfg.model2_overrides
            )
            model2_sol = optimize_model2(m2cfg, sspa, rect, h)
        except Exception as e:  # keep the sweep alive; the row carries the reason
            model2_err = e

    rows = []
    for method in cfg.methods:
        row = dict(base)
        row["method"] = method
        row.update(_nan_row_metrics())
        row["status"] = "ok"
        row["iterations"] = 0
        try:
            if method == "ideal":
                w = optimize_ideal_hpa(point.p_tr_max_w, rect, h)
                row["p_tr_w"] = average_power(w)
                row["z_dc"] = z_dc(rect, w, h)
                row["papr_tr"] = papr(w)
                row["participation_ratio"] = participation_ratio(w)
            elif method == "no_hpa":
                w = no_hpa_waveform(
                    point.p_in_max_w, point.p_tr_max_w, sspa, rect, h, ext
                )
                report, w_tr = evaluate_chain(w, sspa, rect, h, ext)
                row.update(_report_metrics(report, w_tr))
            elif method == "single_carrier":
                w = single_carrier_best(h, point.p_tr_max_w, sspa, point.p_in_max_w)
                report, w_tr = evaluate_chain(w, sspa, rect, h, ext)
                row.update(_report_metrics(report, w_tr))
            elif method == "papr_capped":
                cap = 10.0 ** (cfg.papr_cap_db / 10.0)
                w = papr_capped_waveform(point.p_tr_max_w, rect, h, cap)
                w = scale_to_chain_feasibility(
                    w, sspa, point.p_in_max_w, point.p_tr_max_w, ext
                )
                report, w_tr = evaluate_chain(w, sspa, rect, h, ext)
                row.update(_report_metrics(report, w_tr))
            elif method == "model1":
                m1cfg = Model1Config(
                    p_in_max=point.p_in_max_w,
                    p_tr_max=point.p_tr_max_w,
                    **{"extension": ext, **cfg.model1_overrides},
                )
                sol = optimize_model1(m1cfg, sspa, rect, h)
                row.update(_report_metrics(sol.report, sol.w_tr))
                row["status"] = sol.diagnostics.status
                row["iterations"] = sol.diagnostics.scp_iterations
            elif method == "model2":
                if model2_err is not None:
                    raise model2_err
                row.update(_report_metrics(model2_sol.report, model2_sol.w_tr))
                row["status"] = model2_sol.diagnostics.status
                row["iterations"] = model2_sol.diagnostics.scp_iterations
            elif method == "model2_approx":
                if model2_err is not None:
                    raise model2_err
                spec = model2_sol.w_in_approx
                x = spec.n_bins * np.fft.ifft(spec.weights)
                report, w_tr = evaluate_dense_chain(x, grid, sspa, rect, h)
                row.update(_report_metrics(report, w_tr))
                row["status"] = model2_sol.diagnostics.status
                row["iterations"] = model2_sol.diagnostics.scp_iterations
        except Exception as e:
            row.update(_nan_row_metrics())
            row["status"] = f"error:{type(e).__name__}"
            row["iterations"] = 0
        rows.append(row)
    return rows


def _run_cell(args) -> list[dict]:
    cfg, value, realization = args
    return _method_rows(cfg, _resolve_point(cfg, value, realization))


def _format_value(v) -> str:
    if isinstance(v, float):
        return format(v, ".12g")
    return str(v)


def _worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        count = int(raw)
    except ValueError as e:
        raise ContractViolationError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from e
    if count < 1:
        raise ContractViolationError(f"{WORKERS_ENV} must be >= 1")
    return count


def run_sweep(cfg: ExperimentConfig, output: str | None = None) -> list[dict]:
    """Run all cells, write CSV (+ sidecar) if an output path is known, return rows.

    Row order is (sweep value, realization, method) in config order regardless
    of worker count; with WPTWAVE_WORKERS > 1 the cells run in a process pool
    but results are consumed in submission order.
    """
    path = output if output is not None else cfg.output
    started = time.time()
    tasks = [
        (cfg, value, realization)
        for value in cfg.sweep_grid
        for realization in range(cfg.n_realizations)
    ]

    writer = None
    handle = None
    if path is not None:
        handle = open(path, "w", newline="")
        handle.write(f"# schema={SCHEMA}\n")
        writer = csv.writer(handle)
        writer.writerow(COLUMNS)
        handle.flush()

    rows: list[dict] = []
    try:
        workers = _worker_count()
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = pool.map(_run_cell, tasks)
                for cell_rows in results:
                    rows.extend(cell_rows)
                    if writer is not None:
                        writer.writerows(
                            [[_format_value(r[c]) for c in COLUMNS] for r in cell_rows]
                        )
                        handle.flush()
        else:
            for task in tasks:
                cell_rows = _run_cell(task)
                rows.extend(cell_rows)
                if writer is not None:
                    writer.writerows(
                        [[_format_value(r[c]) for c in COLUMNS] for r in cell_rows]
                    )
                    handle.flush()
    finally:
        if handle is not None:
            handle.close()

    if path is not None:
        sidecar = {
            "schema": SCHEMA,
            "library_version": __version__,
            "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(started)),
            "duration_s": time.time() - started,
            "rows": len(rows),
            "base_seed": cfg.base_seed,
            "channel_seeds": {
                str(r): int(np.random.SeedSequence((cfg.base_seed, r)).generate_state(1)[0])
                for r in range(cfg.n_realizations)
            }
            if cfg.scenario == "etsi_b"
            else {},
            "config": cfg.raw,
        }
        with open(path + ".meta.json", "w") as f:
            json.dump(sidecar, f, indent=2, sort_keys=True)
            f.write("\n")
    return rows


def describe(cfg: ExperimentConfig) -> str:
    """Dry-run plan: sweep size and run count, no computation."""
    lines = [
        f"scenario:        {cfg.scenario}",
        f"sweep variable:  {cfg.sweep_variable}",
        f"sweep grid:      {list(cfg.sweep_grid)} ({len(cfg.sweep_grid)} points)",
        f"methods:         {list(cfg.methods)}",
    ]
    if cfg.scenario == "flat":
        lines.append("realizations:    1 (flat channel is deterministic; coerced)")
    else:
        lines.append(f"realizations:    {cfg.n_realizations} (base_seed={cfg.base_seed})")
    total = len(cfg.sweep_grid) * len(cfg.methods) * cfg.n_realizations
    lines.append(
        f"total runs:      {total} "
        f"({len(cfg.sweep_grid)} points x {len(cfg.methods)} methods x {cfg.n_realizations} realizations)"
    )
    lines.append(f"output:          {cfg.output or '(none; rows returned only)'}")
    lines.append(f"workers:         {WORKERS_ENV}={os.environ.get(WORKERS_ENV, '1')}")
    return "\n".join(lines)


def _load_config(path: str) -> ExperimentConfig:
    with open(path) as f:
        return config_from_json(json.load(f))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wptwave",
        description="Waveform optimization experiments for wireless power transfer "
        "through a nonlinear amplifier.",
        epilog="dB conventions: power dBW = 10*log10(W); A_s dBV = 20*log10(V). "
        f"Set {WORKERS_ENV} to parallelize sweep cells across processes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the sweep and write the CSV")
    run.add_argument("config", help="JSON experiment config path")
    run.add_argument("--output", help="override the config's output CSV path")
    desc = sub.add_parser("describe", help="print the sweep plan without computing")
    desc.add_argument("config", help="JSON experiment config path")
    val = sub.add_parser("validate-config", help="parse + validate the config, exit 0/1")
    val.add_argument("config", help="JSON experiment config path")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
    except (OSError, json.JSONDecodeError, WptError, KeyError, TypeError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1

    if args.command == "validate-config":
        print("config OK")
        print(describe(cfg))
        return 0
    if args.command == "describe":
        print(describe(cfg))
        return 0

    output = args.output if args.output is not None else cfg.output
    if output is None:
        print("config error: no output path (set 'output' in the config or pass --output)", file=sys.stderr)
        return 1
    try:
        rows = run_sweep(cfg, output)
    except Exception as e:
        print(f"runtime failure: {e}", file=sys.stderr)
        return 2
    print(f"wrote {len(rows)} rows to {output} (+ {output}.meta.json)")
    return 0
