"""Command-line interface: single-solve inspection and Monte-Carlo sweeps.

Scenario parameters come from a TOML or JSON config file (defaults match the
simulated downlink: 915 MHz carrier, 10 dBi per-end antenna gain, receivers
at 100 m, harvesters at 5 m, -95 dBm noise, 36 dBm budget, 24 mW/150/14 mW
rectifier curve, 1% normalized CSI error).  Exit codes: 0 solved, 2 the QoS
constraints are infeasible, 1 any other error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .channels import ErrorSpec, ScenarioGeometry, corrupt_estimates, draw_channels
from .eh import EhParams
from .lmi import dump_problem
from .model import SystemConfig
from .optimizer import certified_min_harvest, extract_beamformers, verify_kkt
from .simulate import (
    AXES,
    SCHEMES,
    ExperimentPlan,
    _solve_scheme,
    run_plan,
    to_dbm,
    write_aggregate_csv,
    write_records_csv,
)

CONFIG_ENV_VAR = "SWIPTBEAM_CONFIG"

DEFAULT_CONFIG = {
    "system": {
        "n_tx": 6,
        "n_rx": 2,
        "n_ir": 2,
        "n_er": 4,
        "p_max_dbm": 36.0,
        "p_max_w": None,  # overrides p_max_dbm when set (allows exactly zero)
        "noise_dbm": -95.0,
        "sinr_db": 10.0,
        "eh": {"m_sat_mw": 24.0, "a_per_watt": 150.0, "b_watt": 0.014},
    },
    "geometry": {
        "ir_distance_m": 100.0,
        "er_distance_m": 5.0,
        "carrier_hz": 915e6,
        "antenna_gain_dbi": 10.0,
        "rician_k_db": 3.0,
    },
    "errors": {"ir_norm_var": 0.01, "er_norm_var": 0.01},
}


class ConfigError(ValueError):
    pass


def _merge_checked(base: dict, override: dict, path: str = "") -> dict:
    out = dict(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where} must be a table/object")
            out[key] = _merge_checked(base[key], value, where)
        else:
            if isinstance(value, dict):
                raise ConfigError(f"config key {where} must be a scalar")
            out[key] = value
    return out


def load_config(path: str | None) -> dict:
    """Parse a TOML/JSON config and validate it against the known schema."""
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR)
    if path is None:
        return DEFAULT_CONFIG
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    if p.suffix.lower() == ".json":
        data = json.loads(p.read_text())
    else:
        try:
            import tomllib  # Python >= 3.11
        except ModuleNotFoundError:
            import tomli as tomllib
        data = tomllib.loads(p.read_text())
    if not isinstance(data, dict):
        raise ConfigError("config root must be a table/object")
    return _merge_checked(DEFAULT_CONFIG, data)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def build_scenario(config: dict) -> tuple[SystemConfig, ScenarioGeometry, ErrorSpec]:
    sysc = config["system"]
    eh = sysc["eh"]
    params = EhParams(
        m_sat=eh["m_sat_mw"] / 1000.0, a_rate=eh["a_per_watt"], b_turn_on=eh["b_watt"]
    )
    if sysc.get("p_max_w") is not None:
        p_max = float(sysc["p_max_w"])
    else:
        p_max = dbm_to_watts(float(sysc["p_max_dbm"]))
    system = SystemConfig(
        n_tx=int(sysc["n_tx"]),
        n_rx=int(sysc["n_rx"]),
        n_ir=int(sysc["n_ir"]),
        n_er=int(sysc["n_er"]),
        p_max=p_max,
        noise_power=dbm_to_watts(float(sysc["noise_dbm"])),
        sinr_targets=(10.0 ** (float(sysc["sinr_db"]) / 10.0),) * int(sysc["n_ir"]),
        eh_params=(params,) * int(sysc["n_er"]),
    )
    geo = config["geometry"]
    geometry = ScenarioGeometry(
        ir_distance=float(geo["ir_distance_m"]),
        er_distance=float(geo["er_distance_m"]),
        carrier_hz=float(geo["carrier_hz"]),
        antenna_gain_db=float(geo["antenna_gain_dbi"]),
        rician_k_db=float(geo["rician_k_db"]),
    )
    err = config["errors"]
    errors = ErrorSpec(ir_norm_var=float(err["ir_norm_var"]), er_norm_var=float(err["er_norm_var"]))
    return system, geometry, errors


def cmd_solve(args) -> int:
    config = load_config(args.config)
    system, geometry, errors = build_scenario(config)
    channels = draw_channels(system, geometry, np.random.SeedSequence((args.seed,)))
    estimates, rho, ups = corrupt_estimates(
        channels, errors, np.random.SeedSequence((args.seed, 7))
    )
    radii = (rho, ups)
    system = replace(system, ir_error_radii=tuple(rho), er_error_radii=tuple(ups))

    if args.dump_problem:
        from .lmi import assemble_feasibility_sdp

        problem = assemble_feasibility_sdp(system, estimates, radii, er_form="lifted")
        with open(args.dump_problem, "w") as fh:
            dump_problem(problem, fh)
        print(f"problem dump written to {args.dump_problem}")

    result = _solve_scheme(args.scheme, system, estimates, radii)
    if result.status != "solved":
        print(f"status: {result.status}")
        return 2
    min_phi, worst = certified_min_harvest(system, result.design, estimates, radii)
    print(f"scheme: {args.scheme}")
    print(f"status: solved (in {result.solve_time:.2f} s)")
    print(f"min harvested power: {to_dbm(result.tau_star):.2f} dBm (certified {to_dbm(min_phi):.2f} dBm)")
    print(f"transmit power: {result.design.total_power():.6f} W of {system.p_max:.6f} W")
    report = result.rank_report
    ratios = " ".join(f"{r:.2e}" for r in report["w_ratios"])
    print(f"rank ratios (information beams): {ratios}")
    if report["we_ratio"] is None:
        print("energy covariance: isotropic")
    elif report["we_trace"] <= 1e-9 * system.p_max:
        print("energy covariance: zero (no dedicated energy beam)")
    else:
        print(
            f"energy covariance: rank-one beam, ratio {report['we_ratio']:.2e}, "
            f"power {report['we_trace']:.4f} W"
        )
    payload = {
        "scheme": args.scheme,
        "status": "solved",
        "tau_star_w": result.tau_star,
        "tau_star_dbm": to_dbm(result.tau_star),
        "certified_min_harvest_w": min_phi,
        "worst_case_received_w": worst,
        "rank_report": {
            "w_ratios": report["w_ratios"],
            "we_ratio": report["we_ratio"],
            "we_trace": report["we_trace"],
        },
        "total_power_w": result.design.total_power(),
    }
    if args.kkt:
        if args.scheme == "baseline2":
            print("kkt certificate: not applicable to the isotropic baseline")
        else:
            cert = verify_kkt(result)
            print(f"kkt certificate: {'pass' if cert.passed else 'FAIL'}")
            print(f"  power price lambda* = {cert.lambda_star:.6e}")
            gaps = " ".join(f"{g:.2e}" for g in cert.eig_gap["per_user"])
            print(f"  price/top-eigenvalue gaps: {gaps}")
            if cert.eig_gap["energy"] is not None:
                state = "active" if cert.we_active else "inactive"
                print(f"  energy-beam gap: {cert.eig_gap['energy']:.2e} ({state})")
            for msg in cert.failures:
                print(f"  failure: {msg}")
            payload["kkt_passed"] = cert.passed
            payload["kkt_failures"] = cert.failures
    if args.json_out:
        with open(args.json_out, "w") as fh:
            json.dump(payload, fh, indent=2, default=float)
        print(f"json result written to {args.json_out}")
    return 0


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    system, geometry, errors = build_scenario(config)
    axis = {"rate": "rate_target"}.get(args.axis, args.axis)
    values = tuple(float(v) for v in args.values.split(","))
    schemes = tuple(s.strip() for s in args.schemes.split(","))
    plan = ExperimentPlan(
        base_config=system,
        geometry=geometry,
        errors=errors,
        axis=axis,
        values=values,
        schemes=schemes,
        n_realizations=args.realizations,
        master_seed=args.seed,
    )
    records, aggregates = run_plan(plan, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "records.csv", "w", newline="\n") as fh:
        write_records_csv(records, fh)
    with open(out / "aggregate.csv", "w", newline="\n") as fh:
        write_aggregate_csv(aggregates, fh)
    print(f"wrote {len(records)} records to {out/'records.csv'}")
    for row in aggregates:
        print(
            f"  {plan.axis}={row['axis_value']:g} {row['scheme']}: "
            f"{row['mean_dbm']:.2f} dBm (feasible {row['feasible_frac']:.0%} of {row['n']})"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swiptbeam",
        description="Robust max-min SWIPT beamforming designer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one channel realization")
    p_solve.add_argument("--config", default=None, help=f"TOML/JSON scenario (default ${CONFIG_ENV_VAR} or built-ins)")
    p_solve.add_argument("--seed", type=int, default=0)
    p_solve.add_argument("--scheme", choices=SCHEMES, default="proposed")
    p_solve.add_argument("--kkt", action="store_true", help="verify the optimality certificate")
    p_solve.add_argument("--dump-problem", default=None, metavar="PATH")
    p_solve.add_argument("--json-out", default=None, metavar="PATH")
    p_solve.set_defaults(func=cmd_solve)

    p_sweep = sub.add_parser("sweep", help="Monte-Carlo sweep, CSV output")
    p_sweep.add_argument("--config", default=None)
    p_sweep.add_argument("--axis", choices=("rate",) + AXES, required=True)
    p_sweep.add_argument("--values", required=True, help="comma-separated axis values")
    p_sweep.add_argument("--realizations", type=int, default=10)
    p_sweep.add_argument("--schemes", default="proposed")
    p_sweep.add_argument("--out", required=True, help="output directory")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports, not raises
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
