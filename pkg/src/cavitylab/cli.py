"""Command-line front end.

    cavitylab <command> [--config cfg.json] [--out DIR] [--seed N] [--threads N] [--dry-run]

Configs are JSON objects validated against ``schemas/<command>.json``; unknown
keys are rejected.  User-facing units are W/cm^2 and 1/cm, everything written
to disk is SI.  Every run writes ``manifest.json`` next to its CSV files.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .bistability import bistable_window, hysteresis_sweep, input_power
from .errors import ConfigurationError, DomainError, NumericalError
from .fokkerplanck import (FPParams, no_spontaneous_responsivity, responsivity,
                           responsivity_map, steady_state)
from .sde import (SdeConfig, crds_experiment, default_ramp, ringdown_experiment,
                  ringdown_traces, stable_dt, sweep_up_experiment, timing_floor)
from .sensitivity import ComparisonConfig, compare_cases
from .units import (CONSTANTS, CavityGeometry, MediumSpec, NoiseBudget, TraceGas,
                    per_cm_to_per_m, photons_from_wcm2)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

GEOMETRY = {"L_m": 1.0, "A_m2": math.pi * 1e-6, "wavelength_m": 1.064e-6, "delta1": 1e-5}

DEFAULTS = {
    "heart-map": {**GEOMETRY, "eta0": 1e6, "a_min": -4.0, "a_max": 12.0, "n_gain": 65,
                  "drive_max": 4.0, "n_drive": 21, "drive_slice": 1.0},
    "sensitivity": {"L_m": 1.0, "A_m2": math.pi * 1e-6, "wavelength_m": 1.064e-6,
                    "delta1_E": 1e-5, "delta1_G": 1e-4, "mirror_limit_wcm2": 1e4, "v_T": 1e-9,
                    "eta0": 1e6, "t_star_s": 1.0, "t_min_s": 1e-6, "t_max_s": 1e3, "n_t": 181,
                    "vT_min": 1e-16, "vT_max": 1e-2, "n_vT": 141, "a_spread": 3.0, "a_lower": 5.0},
    "bistability": {**GEOMETRY, "kappa_L_over_kappa_C": 12.0, "I_sat_wcm2": 1.0,
                    "alpha_S_per_cm": 0.0, "delta_alpha_per_cm": 1e-8,
                    "p0_lo_factor": 0.5, "p0_hi_factor": 1.5, "n_p0": 401},
    "sweep-up": {**GEOMETRY, "kappa_L_over_kappa_C": 12.0, "I_sat_wcm2": 1.0, "Q0_over_kappa_L": 2.0,
                 "alpha_S_per_cm": 0.0, "delta_alpha_per_cm": 1e-8, "n_shots": 100,
                 "ramp_duration_over_tau_C": 30.0, "ramp_lo": 0.8, "ramp_hi": 1.2,
                 "dt_margin": 0.01, "dump_shots": 1, "record_stride": 100},
    "ringdown": {**GEOMETRY, "kappa_L_over_kappa_C": 100.0, "I_sat_wcm2": 1.0, "I_init_wcm2": 1e4,
                 "Q0_over_kappa_L": 2.0, "alpha_S_per_cm": 0.0, "threshold_over_I_sat": 0.1,
                 "n_shots": 200, "g_rms_over_kappa_C": [0.0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0],
                 "dt_margin": 0.002, "record_stride": 50, "duration_over_tau_C": 8.0,
                 "crds_window_over_tau_C": 5.0, "method": "model", "detection_shotnoise": True,
                 "dump_shots": 1},
}


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def load_schema(command):
    text = resources.files("cavitylab").joinpath("schemas", f"{command}.json").read_text()
    return json.loads(text)


def resolve_config(command, user_cfg=None, seed=None):
    """Merge defaults, user config and --seed; validate the result."""
    cfg = dict(DEFAULTS[command])
    cfg["seed"] = 0
    schema = load_schema(command)
    user_cfg = {} if user_cfg is None else user_cfg
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(user_cfg), key=lambda e: list(e.path))
    if errors:
        msgs = "; ".join(f"{'/'.join(map(str, e.path)) or '<root>'}: {e.message}" for e in errors)
        raise CliError(f"invalid configuration: {msgs}", EXIT_CONFIG)
    cfg.update(user_cfg)
    if seed is not None:
        cfg["seed"] = seed
    errors = list(validator.iter_errors(cfg))
    if errors:
        raise CliError(f"invalid configuration: {errors[0].message}", EXIT_CONFIG)
    return cfg


def _geom(cfg, delta1_key="delta1"):
    return CavityGeometry(cfg["L_m"], cfg["A_m2"], cfg["wavelength_m"], cfg[delta1_key])


# ---------------------------------------------------------------- output helpers

def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    return repr(float(x))


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj):
    Path(path).write_text(json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n")


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------- resolution to SI

def _fp_template(cfg):
    geom = _geom(cfg)
    I_sat = math.pi * cfg["eta0"] ** 2 / 16.0
    return geom, I_sat


def _heart_grids(cfg):
    geom, I_sat = _fp_template(cfg)
    kp = geom.kappa_C
    a = np.linspace(cfg["a_min"], cfg["a_max"], cfg["n_gain"])
    kG = np.array([FPParams.from_pump_parameter(float(x), kp, I_sat).kappa_G for x in a])
    # drive expressed through the photon number it would build in the empty cavity
    drive_units = np.linspace(0.0, cfg["drive_max"], cfg["n_drive"])
    E0 = 0.5 * kp * np.sqrt(drive_units * cfg["eta0"])
    return geom, I_sat, a, kG, drive_units, E0


def resolve_si(command, cfg):
    """Physical parameters in SI / photon units, as used by the computation."""
    if command == "heart-map":
        geom, I_sat, a, kG, du, E0 = _heart_grids(cfg)
        return {"kappa_C": geom.kappa_C, "I_sat_photons": I_sat, "kappa_G_range": [kG[0], kG[-1]],
                "E0_range": [E0[0], E0[-1]]}
    if command == "sensitivity":
        cc = _comparison_config(cfg)
        return {"kappa_E": cc.geom_E.kappa_C, "kappa_G": cc.geom_G.kappa_C, "I_sat_photons": cc.I_sat,
                "mirror_limit_photons": cc.mirror_limit}
    geom = _geom(cfg)
    kC = geom.kappa_C
    I_sat = photons_from_wcm2(cfg["I_sat_wcm2"], geom)
    out = {"kappa_C": kC, "kappa_L": cfg["kappa_L_over_kappa_C"] * kC, "I_sat_photons": I_sat,
           "alpha_S_per_m": float(per_cm_to_per_m(cfg["alpha_S_per_cm"])),
           "photon_energy_J": geom.photon_energy}
    if "delta_alpha_per_cm" in cfg:
        out["delta_alpha_per_m"] = float(per_cm_to_per_m(cfg["delta_alpha_per_cm"]))
    if command == "ringdown":
        out["I_init_photons"] = photons_from_wcm2(cfg["I_init_wcm2"], geom)
        out["timing_floor_per_m"] = timing_floor(kC, I_sat)
    return out


def _comparison_config(cfg):
    return ComparisonConfig(
        delta1_E=cfg["delta1_E"], delta1_G=cfg["delta1_G"], wavelength=cfg["wavelength_m"],
        A=cfg["A_m2"], L=cfg["L_m"], mirror_limit_wcm2=cfg["mirror_limit_wcm2"], v_T=cfg["v_T"],
        eta0=cfg["eta0"], t_star=cfg["t_star_s"],
        t_grid=np.geomspace(cfg["t_min_s"], cfg["t_max_s"], cfg["n_t"]),
        v_T_sweep=np.geomspace(cfg["vT_min"], cfg["vT_max"], cfg["n_vT"]),
        a_spread=cfg["a_spread"], a_lower=cfg["a_lower"])


# ---------------------------------------------------------------- commands

def cmd_heart_map(cfg, out, threads=1):
    geom, I_sat, a, kG, du, E0 = _heart_grids(cfg)
    kp = geom.kappa_C
    template = FPParams(0.0, kp, kp, I_sat, 2.0 * kp)
    rmap = responsivity_map(E0, kG, template)
    # matrix form: header row holds the drive axis, first column the gain axis
    write_csv(out / "heart_map.csv", ["kappa_G\\E0", *E0],
              ([g, *rmap.abs_responsivity[i]] for i, g in enumerate(kG)))
    rows = []
    for i in range(a.size):
        for j in range(du.size):
            rows.append((a[i], kG[i], du[j], E0[j], rmap.abs_responsivity[i, j], rmap.mean_intensity[i, j]))
    write_csv(out / "heart_map_long.csv", ["a", "kappa_G", "drive_units", "E0", "abs_R_m", "mean_I"], rows)

    E_slice = 0.5 * kp * math.sqrt(cfg["drive_slice"] * cfg["eta0"])
    slice_rows = []
    for x, g in zip(a, kG):
        vals = []
        for e in (0.0, E_slice):
            p = FPParams(e, kp, float(g), I_sat, 2.0 * float(g))
            d = steady_state(p)
            vals.append((abs(responsivity(p, d)), d.mean))
        ns = float(no_spontaneous_responsivity(np.array([g]), kp)[0])
        slice_rows.append((x, g, vals[0][0], vals[1][0], ns, vals[0][1], vals[1][1]))
    write_csv(out / "heart_slice_responsivity.csv",
              ["a", "kappa_G", "abs_R_zero_drive_m", "abs_R_driven_m", "abs_R_no_spontaneous_m"],
              [r[:5] for r in slice_rows])
    write_csv(out / "heart_slice_intensity.csv", ["a", "kappa_G", "mean_I_zero_drive", "mean_I_driven"],
              [(r[0], r[1], r[5], r[6]) for r in slice_rows])
    peak0 = max(r[2] for r in slice_rows)
    peak1 = max(r[3] for r in slice_rows)
    return {"peak_abs_R_zero_drive_m": peak0, "peak_abs_R_driven_m": peak1,
            "empty_cavity_abs_R_m": 4.0 * geom.L / geom.delta_C, "failures": rmap.failures}


def cmd_sensitivity(cfg, out, threads=1):
    cc = _comparison_config(cfg)
    res = compare_cases(cc)
    write_csv(out / "time_curves.csv", ["t", "dalpha2_gain", "dalpha2_empty"],
              zip(res.gain.t_grid, res.gain.dalpha2, res.empty.dalpha2))
    write_csv(out / "time_curves_variants.csv", ["t", "dalpha2_gain_a_low", "dalpha2_gain_a_high"],
              zip(res.gain.t_grid, res.gain_variants["a_low"].dalpha2, res.gain_variants["a_high"].dalpha2))
    v = res.vt_sweep
    write_csv(out / "vt_sweep.csv", ["v_T", "dalpha2_gain", "dalpha2_empty", "I_opt", "I_E", "clamp"],
              zip(v["v_T"], v["dalpha2_gain"], v["dalpha2_empty"], v["I_opt"], v["I_E"], v["clamp"]))
    op = res.operating_point
    return {
        "operating_point": {"gamma_prime": op.gamma_prime, "intensity": op.intensity, "clamped": op.clamped,
                            "a": op.a, "dalpha2_at_t_star": op.dalpha2_at_t},
        "t_intersection_s": res.t_intersection,
        "crossover": None if res.crossover is None else res.crossover._asdict(),
        "v_T_critical_numeric": res.v_T_critical_numeric,
        "v_T_critical_formula": res.v_T_critical_formula,
    }


def _tp_dict(tp):
    return None if tp is None else tp._asdict()


def cmd_bistability(cfg, out, threads=1):
    si = resolve_si("bistability", cfg)
    geom = _geom(cfg)
    kL, Is = si["kappa_L"], si["I_sat_photons"]
    alphas = {"ref": si["alpha_S_per_m"], "doped": si["alpha_S_per_m"] + si["delta_alpha_per_m"]}
    win = bistable_window(geom, kL, Is, alphas["doped"]) or bistable_window(geom, kL, Is, alphas["ref"])
    if win is None:
        P_ref = photons_to_power_scale(geom, kL, Is, alphas["ref"])
        grid = np.linspace(cfg["p0_lo_factor"] * P_ref, cfg["p0_hi_factor"] * P_ref, cfg["n_p0"])
    else:
        grid = np.linspace(cfg["p0_lo_factor"] * win[0], cfg["p0_hi_factor"] * win[1], cfg["n_p0"])
    summary = {}
    curves = {}
    for name, a in alphas.items():
        c = hysteresis_sweep(grid, geom, kL, Is, a)
        curves[name] = c
        rows = []
        for p, roots, st in zip(c.p0_grid, c.branches, c.stability):
            r = list(roots) + [None] * (3 - len(roots))
            s = list(st) + [None] * (3 - len(st))
            rows.append([p, *r, *s])
        write_csv(out / f"curve_{name}.csv",
                  ["P0", "I_root1", "I_root2", "I_root3", "stable1", "stable2", "stable3"], rows)
        summary[name] = {"alpha_S_per_m": a, "turning_points": _tp_dict(c.turning_points),
                         "jump_up_P0": c.jump_up_p0, "jump_down_P0": c.jump_down_p0}
    write_csv(out / "sweep_up.csv", ["P0", "I_ref", "I_doped"],
              zip(grid, curves["ref"].up, curves["doped"].up))
    write_csv(out / "sweep_down.csv", ["P0", "I_ref", "I_doped"],
              zip(grid, curves["ref"].down, curves["doped"].down))
    summary["bistable"] = win is not None
    return summary


def photons_to_power_scale(geom, kL, Is, alpha):
    return input_power(Is, geom, kL, Is, alpha)


def _wilson(k, n, z=1.959963984540054):
    if n == 0:
        return (float("nan"), float("nan"))
    p = k / n
    den = 1 + z * z / n
    c = (p + z * z / (2 * n)) / den
    h = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return (c - h, c + h)


def _traj_rows(traj, geom):
    return zip(traj.t, traj.e1, traj.e2, traj.intensity, traj.output_power(geom))


TRAJ_HEADER = ["t", "e1", "e2", "I", "recorded_output"]


def cmd_sweep_up(cfg, out, threads=1):
    si = resolve_si("sweep-up", cfg)
    geom = _geom(cfg)
    kL, Is = si["kappa_L"], si["I_sat_photons"]
    med = MediumSpec.saturable_absorber(kL, Is, cfg["Q0_over_kappa_L"] * kL)
    a_ref = si["alpha_S_per_m"]
    a_dop = a_ref + si["delta_alpha_per_m"]
    dt = stable_dt(geom, med, TraceGas(a_dop), margin=cfg["dt_margin"])
    T = cfg["ramp_duration_over_tau_C"] / geom.kappa_C
    ramp = default_ramp(geom, kL, Is, a_dop, T, cfg["ramp_lo"], cfg["ramp_hi"])
    ramp_ref = default_ramp(geom, kL, Is, a_ref, T, cfg["ramp_lo"], cfg["ramp_hi"])
    ramp = type(ramp)("ramp", P_start=ramp_ref.P_start, P_stop=ramp.P_stop, ramp_duration=T)
    base = SdeConfig(geom, med, TraceGas(a_ref), dt=dt, seed=cfg["seed"], duration=T,
                     record_stride=cfg["record_stride"])
    doped = SdeConfig(geom, med, TraceGas(a_dop), dt=dt, seed=cfg["seed"], duration=T,
                      record_stride=cfg["record_stride"])
    summary = sweep_up_experiment((base, doped), ramp, cfg["n_shots"], threads=threads)
    rows = [(i, s.switch_time, s.diagnostics.get("switch_time_b"), s.sign_of_differential, s.estimator_value)
            for i, s in enumerate(summary.shots)]
    write_csv(out / "shots.csv", ["shot", "switch_time_a", "switch_time_b", "sign", "estimate"], rows)
    if cfg["dump_shots"]:
        n = min(cfg["dump_shots"], cfg["n_shots"])
        traced = sweep_up_experiment((base, doped), ramp, n, threads=threads, keep_traces=True)
        for i, s in enumerate(traced.shots):
            if "trajectories" not in s.diagnostics:
                continue
            ta, tb = s.diagnostics["trajectories"]
            for cav, tr in enumerate((ta, tb)):
                write_csv(out / f"traj_shot{i}_cav{cav}.csv", TRAJ_HEADER, _traj_rows(tr, geom))
            write_csv(out / f"differential_shot{i}.csv", ["t", "P0", "differential_output"],
                      zip(ta.t, ramp.P_start + (ramp.P_stop - ramp.P_start) * np.minimum(ta.t / T, 1.0),
                          s.diagnostics["differential_output"]))
    n_dec = summary.n_negative + summary.n_positive
    return {"n_shots": cfg["n_shots"], "n_valid": summary.n_valid, "n_flagged": summary.n_flagged,
            "n_negative": summary.n_negative, "n_positive": summary.n_positive, "n_ties": summary.n_ties,
            "fraction_negative": summary.fraction_negative,
            "fraction_negative_ci95": _wilson(summary.n_negative, n_dec),
            "dt_switch_dalpha": summary.dt_dalpha, "dt": dt,
            "ramp": {"P_start": ramp.P_start, "P_stop": ramp.P_stop, "duration": T}}


def cmd_ringdown(cfg, out, threads=1):
    si = resolve_si("ringdown", cfg)
    geom = _geom(cfg)
    kC, kL, Is = geom.kappa_C, si["kappa_L"], si["I_sat_photons"]
    I_init = si["I_init_photons"]
    med = MediumSpec.saturable_absorber(kL, Is, cfg["Q0_over_kappa_L"] * kL)
    trace = TraceGas(si["alpha_S_per_m"])
    dt = stable_dt(geom, med, trace, margin=cfg["dt_margin"])
    sc = SdeConfig(geom, med, trace, dt=dt, seed=cfg["seed"], duration=cfg["duration_over_tau_C"] / kC,
                   record_stride=cfg["record_stride"])
    threshold = cfg["threshold_over_I_sat"] * Is
    traces = ringdown_traces(sc, I_init, cfg["n_shots"], threshold, threads)
    window = (0.0, cfg["crds_window_over_tau_C"] / kC)
    comp_rows, shot_rows = [], []
    for g_rel in cfg["g_rms_over_kappa_C"]:
        nb = NoiseBudget(g_drift_var=(g_rel * kC) ** 2)
        timing = ringdown_experiment(sc, I_init, threshold, cfg["n_shots"], nb,
                                     shotnoise=cfg["detection_shotnoise"], method=cfg["method"], traces=traces)
        crds = crds_experiment(geom, trace, I_init, cfg["n_shots"], nb, seed=cfg["seed"], fit_window=window,
                               shotnoise=cfg["detection_shotnoise"])
        et = np.array([r.diagnostics["error"] for r in timing if r.estimator_value is not None])
        ec = np.array([r.diagnostics["error"] for r in crds])
        comp_rows.append((g_rel * kC, (g_rel * kC) ** 2, math.sqrt(np.mean(ec**2)),
                          math.sqrt(np.mean(et**2)) if et.size else None, et.size, np.mean(ec),
                          np.mean(et) if et.size else None))
        for i, (rt, rc) in enumerate(zip(timing, crds)):
            shot_rows.append((g_rel * kC, i, rt.switch_time, rt.diagnostics["g_prime"],
                              rt.estimator_value, rc.estimator_value))
    write_csv(out / "comparison.csv",
              ["g_rms", "g_var", "rms_crds", "rms_timing", "n_timing", "bias_crds", "bias_timing"], comp_rows)
    write_csv(out / "shots.csv", ["g_rms", "shot", "switch_time", "g_prime", "estimate_timing", "estimate_crds"],
              shot_rows)
    for i, tr in enumerate(traces.trajectories[:cfg["dump_shots"]]):
        write_csv(out / f"traj_shot{i}.csv", TRAJ_HEADER, _traj_rows(tr, geom))
    cross = None
    for prev, row in zip(comp_rows, comp_rows[1:]):
        if row[3] is not None and row[3] < row[2] and (prev[3] is None or prev[3] >= prev[2]):
            cross = row[0]
            break
    return {"timing_floor_per_m": si["timing_floor_per_m"], "first_g_rms_timing_wins": cross, "dt": dt,
            "threshold_photons": threshold}


COMMANDS = {
    "heart-map": cmd_heart_map,
    "sensitivity": cmd_sensitivity,
    "bistability": cmd_bistability,
    "sweep-up": cmd_sweep_up,
    "ringdown": cmd_ringdown,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="cavitylab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=load_schema(name)["description"])
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--out", type=Path, default=Path("out") / name, help="output directory")
        p.add_argument("--seed", type=int, help="64-bit seed (overrides the config)")
        p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
        p.add_argument("--dry-run", action="store_true", help="validate and print resolved parameters")
    return parser


def run(argv=None, stdout=None):
    stdout = sys.stdout if stdout is None else stdout
    args = build_parser().parse_args(argv)
    try:
        user = {}
        if args.config is not None:
            try:
                user = json.loads(args.config.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise CliError(f"cannot read config: {exc}", EXIT_CONFIG) from exc
        if args.threads < 1:
            raise CliError("--threads must be >= 1", EXIT_CONFIG)
        cfg = resolve_config(args.command, user, args.seed)
        try:
            si = resolve_si(args.command, cfg)
        except (ValueError, DomainError) as exc:
            raise CliError(f"invalid configuration: {exc}", EXIT_CONFIG) from exc
        if args.dry_run:
            stdout.write(json.dumps(_jsonable({"command": args.command, "config": cfg, "si": si}),
                                    sort_keys=True, indent=2) + "\n")
            return EXIT_OK
        out = args.out
        out.mkdir(parents=True, exist_ok=True)
        try:
            summary = COMMANDS[args.command](cfg, out, args.threads)
        except (ConfigurationError, DomainError) as exc:
            raise CliError(f"configuration error: {exc}", EXIT_CONFIG) from exc
        except NumericalError as exc:
            raise CliError(f"numerical failure: {exc} {getattr(exc, 'diagnostics', {})}", EXIT_NUMERIC) from exc
        write_json(out / "summary.json", summary)
        files = sorted(p.name for p in out.iterdir() if p.name != "manifest.json")
        write_json(out / "manifest.json", {
            "command": args.command,
            "artifact_version": __version__,
            "seed": cfg["seed"],
            "config": cfg,
            "si": si,
            "constants": CONSTANTS,
            "outputs": {f: _sha256(out / f) for f in files},
        })
        stdout.write(f"{args.command}: wrote {len(files) + 1} files to {out}\n")
        return EXIT_OK
    except CliError as exc:
        sys.stderr.write(f"cavitylab {args.command}: {exc}\n")
        return exc.code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
