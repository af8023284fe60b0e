"""
Command-line entry points: simulate / params / verify-weights / volterra /
check-initial / echo, driven by JSON configs (comments allowed), with CSV and
JSON outputs carrying the config hash.

Exit codes: 0 ok, 2 config or constraint error, 3 numerical abort,
4 verification failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import weights as wt
from .dynamics import SimConfig, run
from .echoes import (BandEnergyTracker, measure_echo, predict_echo,
                     FrozenFieldBackground, volterra_solve)
from .solutions import band_limited_bump, single_mode_data, traveling_waves, two_wave_data
from .spectral import SpectralGrid, read_snapshot, write_snapshot

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_VERIFY = 4


class ConfigError(ValueError):
    pass


def strip_json_comments(text: str) -> str:
    """Remove // line and /* */ block comments outside of strings."""
    out = []
    i, n = 0, len(text)
    in_str = False
    while i < n:
        c = text[i]
        if in_str:
            out.append(c)
            if c == "\\" and i + 1 < n:
                out.append(text[i + 1])
                i += 1
            elif c == '"':
                in_str = False
        elif c == '"':
            in_str = True
            out.append(c)
        elif c == "/" and i + 1 < n and text[i + 1] == "/":
            while i < n and text[i] != "\n":
                i += 1
            continue
        elif c == "/" and i + 1 < n and text[i + 1] == "*":
            i += 2
            while i + 1 < n and not (text[i] == "*" and text[i + 1] == "/"):
                i += 1
            i += 1
        else:
            out.append(c)
        i += 1
    return "".join(out)


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    try:
        return json.loads(strip_json_comments(text))
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}")


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    return format(float(x), ".17g")


def _build_initial(cfg: dict, grid: SpectralGrid, epsilon: float, t0: float):
    init = cfg.get("initial")
    if not isinstance(init, dict) or "kind" not in init:
        raise ConfigError("config needs initial: {kind: ...}")
    kind = init["kind"]
    r = init.get("bump", {}).get("r", 0.1)
    try:
        if kind == "trivial":
            bump = band_limited_bump(grid, r)
            coeffs = init.get("coeffs", [1.0])
            return traveling_waves(grid, bump, coeffs, t0,
                                   sobolev_index=init.get("sobolev_index", 0.0),
                                   eta_seq=init.get("eta_seq")), bump
        if kind == "two_wave":
            bump = band_limited_bump(grid, r)
            return two_wave_data(grid, epsilon, int(init["k"]), float(init["eta"]),
                                 bump, t0), bump
        if kind == "single_mode":
            bump = band_limited_bump(grid, r)
            return single_mode_data(grid, epsilon, int(init.get("k0", 1)), bump, t0), bump
        if kind == "snapshot":
            return read_snapshot(init["path"], grid), None
    except (ValueError, KeyError, OSError) as e:
        raise ConfigError(f"initial data: {e}")
    raise ConfigError(f"unknown initial kind {kind!r}")


def _build_params(cfg: dict, epsilon: float):
    pc = cfg.get("params")
    if pc is None:
        return None, None
    try:
        p = wt.derive_params(epsilon, float(pc["N"]), float(pc["sigma"]),
                             float(pc["alpha"]), require_transport=False)
    except wt.ConstraintViolation as e:
        raise ConfigError(f"parameter constraint failed: {e}")
    except KeyError as e:
        raise ConfigError(f"params section missing {e}")
    return p, pc.get("C", "auto")


def _resolve_C(p, c_spec, grid, t_end):
    """Install the requested C, sweeping powers of two when 'auto'."""
    import dataclasses
    if c_spec is None or c_spec == "auto":
        k_max = min(grid.k_max, 32)
        t_grid = np.linspace(min(1.0, t_end), min(t_end, p.horizon), 10)
        p2, sweep = wt.auto_weight_constant(p, k_max, t_grid, l_max=k_max)
        return p2, {"C": p2.C, "c_max": sweep.c_max, "mode": "auto",
                    "k_star": sweep.k_star, "t_star": sweep.t_star}
    return dataclasses.replace(p, C=float(c_spec)), {"C": float(c_spec), "mode": "fixed"}


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    chash = config_hash(cfg)
    try:
        gcfg, tcfg = cfg["grid"], cfg["time"]
        grid = SpectralGrid(int(gcfg["Nx"]), int(gcfg["Nv"]), float(gcfg["L"]))
        epsilon = float(cfg["epsilon"])
        sim = SimConfig(grid, float(tcfg["dt"]), float(tcfg["t0"]), float(tcfg["t_end"]),
                        epsilon, diag_every=int(tcfg.get("diag_every", 1)),
                        force_off=bool(cfg.get("force_off", False)) or args.force_off)
        f0, bump = _build_initial(cfg, grid, epsilon, sim.t0)
        params, c_spec = _build_params(cfg, epsilon)
    except (ConfigError, ValueError, KeyError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    out_cfg = cfg.get("output", {})
    outdir = Path(args.output or out_cfg.get("dir", "."))
    outdir.mkdir(parents=True, exist_ok=True)
    k_report = int(out_cfg.get("K_report", 8))

    c_info = None
    if params is not None:
        params, c_info = _resolve_C(params, c_spec, grid, sim.t_end)

    from .dynamics import validity_window
    t_valid = validity_window(f0)
    override = bool(cfg.get("override_validity", False)) or args.override_validity
    if sim.t_end > t_valid and not override:
        print(f"config error: t_end = {sim.t_end} exceeds the validity window "
              f"t_valid = {t_valid:.3f}; pass --override-validity to run anyway",
              file=sys.stderr)
        return EXIT_CONFIG

    try:
        record = run(sim, f0, params=params,
                     checkpoint_times=out_cfg.get("checkpoint_times", ()),
                     checkpoint_dir=str(outdir), k_report=k_report,
                     config_hash=chash)
    except (ValueError, wt.WeightOverflow) as e:
        print(f"run setup error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    csv_path = outdir / "run.csv"
    with open(csv_path, "w") as fh:
        cols = ["t", "z", "e_dist_z", "e_rho_z", "dist_ok", "rho_ok", "valid",
                "e_dist_0", "e_rho_0", "deta_norm"]
        cols += [f"rho_k{k}" for k in range(k_report + 1)]
        fh.write("# config_hash=" + chash + "\n")
        fh.write(",".join(cols) + "\n")
        for r in record.reports:
            row = [_fmt(r.time), _fmt(r.z), _fmt(r.e_dist), _fmt(r.e_rho),
                   "" if r.dist_ok is None else _fmt(r.dist_ok),
                   "" if r.rho_ok is None else _fmt(r.rho_ok),
                   _fmt(r.valid), _fmt(r.e_dist_0), _fmt(r.e_rho_0), _fmt(r.deta_norm)]
            row += [_fmt(v) for v in r.rho_abs]
            fh.write(",".join(row) + "\n")

    final_path = outdir / "final.vps"
    write_snapshot(record.final_state.field, final_path,
                   sidecar={"time": record.final_state.time,
                            "step": record.final_state.step_index,
                            "config_hash": chash})

    meta = {
        "config": cfg,
        "config_hash": chash,
        "versions": {"landau_lab": __version__, "numpy": np.__version__},
        "validity_window": t_valid,
        "rho_max_overall": record.rho_max_overall,
        "aborted": record.aborted,
        "abort_info": record.abort_info,
        "weight_constant": c_info,
        "run_meta": record.meta,
    }
    if params is not None:
        meta["params"] = {f: getattr(params, f) for f in
                          ("epsilon", "N", "sigma", "alpha", "beta", "beta_prime",
                           "gamma", "eta_cutoff", "C")}
        meta["constraints"] = [{"name": n, "ok": ok, "detail": d}
                               for n, ok, d in wt.constraint_table(params)]
    with open(outdir / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)

    if cfg.get("initial", {}).get("kind") == "two_wave" and bump is not None:
        init = cfg["initial"]
        pred = predict_echo(epsilon, int(init["k"]), float(init["eta"]), bump.l1_norm)
        echo = {"prediction": {"time": pred.time, "modes": list(pred.modes),
                               "amplitude": pred.amplitude,
                               "chain_times": pred.chain_times},
                "config_hash": chash}
        times = [r.time for r in record.reports]
        km = pred.modes[0]
        if km >= 1 and times and times[-1] >= pred.chain_times[-1] * 0.9:
            rhos = [r.rho_abs[km] for r in record.reports]
            i = int(np.argmax(rhos))
            echo["measured"] = {"time": times[i], "rho_peak": float(rhos[i])}
        with open(outdir / "echo.json", "w") as fh:
            json.dump(echo, fh, indent=2, sort_keys=True)

    if record.aborted:
        print(f"numerical abort at t = {record.abort_info['time']:.6g}; "
              f"partial outputs in {outdir}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"run complete: {len(record.reports)} rows -> {csv_path}")
    return EXIT_OK


def cmd_params(args) -> int:
    try:
        p = wt.derive_params(args.epsilon, args.N, args.sigma, args.alpha,
                             require_transport=False)
    except wt.ConstraintViolation as e:
        print(json.dumps({"error": str(e), "constraint": e.constraint}, indent=2))
        return EXIT_CONFIG
    table = wt.constraint_table(p)
    out = {
        "params": {f: getattr(p, f) for f in
                   ("epsilon", "N", "sigma", "alpha", "beta", "beta_prime",
                    "gamma", "eta_cutoff")},
        "horizon": p.horizon,
        "constraints": [{"name": n, "ok": ok, "detail": d} for n, ok, d in table],
    }
    print(json.dumps(out, indent=2, sort_keys=True))
    bad = [n for n, ok, _ in table if not ok]
    if bad:
        print(f"constraint failure: {bad[0]}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def cmd_verify_weights(args) -> int:
    try:
        p = wt.derive_params(args.epsilon, args.N, args.sigma, args.alpha,
                             require_transport=False)
    except wt.ConstraintViolation as e:
        print(f"constraint failure: {e}", file=sys.stderr)
        return EXIT_CONFIG
    t_grid = np.linspace(p.horizon / args.t_samples, p.horizon, args.t_samples)
    if args.C == "auto":
        p, sweep = wt.auto_weight_constant(p, args.k_max, t_grid, l_max=args.k_max)
    else:
        import dataclasses
        p = dataclasses.replace(p, C=float(args.C))
        sweep = wt.density_bound_constant(p, args.k_max, t_grid, l_max=args.k_max)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("k,t,partial_constant\n")
            for k, t, v in sweep.table:
                fh.write(f"{k},{_fmt(t)},{_fmt(v)}\n")
    viol, worst_margin = wt.subadditivity_check(p, args.samples, seed=args.seed)
    b_lin = wt.exp_decay_bound_check(p, args.C1, args.samples, "linear", seed=args.seed)
    b_sig = wt.exp_decay_bound_check(p, args.C1, args.samples, "sigma", seed=args.seed + 1)
    out = {
        "C": p.C,
        "c_max": sweep.c_max,
        "argmax": {"k": sweep.k_star, "t": sweep.t_star},
        "quadrature_converged": sweep.converged,
        "subadditivity_violations": viol,
        "subadditivity_worst_margin": worst_margin,
        "exp_bound_linear_worst_ratio": b_lin.worst_ratio,
        "exp_bound_sigma_worst_ratio": b_sig.worst_ratio,
        "C1": args.C1,
    }
    print(json.dumps(out, indent=2, sort_keys=True))
    ok = (sweep.c_max <= 0.5 and viol == 0
          and b_lin.worst_ratio <= 1.0 and b_sig.worst_ratio <= 1.0)
    if not ok:
        print("verification failed: "
              + ("bound constant above 1/2; " if sweep.c_max > 0.5 else "")
              + (f"subadditivity violations {viol}; " if viol else "")
              + (f"linear exp bound ratio {b_lin.worst_ratio:.3g} at "
                 f"(k={b_lin.witness_k:g}, eta={b_lin.witness_eta:.3g}); "
                 if b_lin.worst_ratio > 1 else "")
              + (f"sigma exp bound ratio {b_sig.worst_ratio:.3g} at "
                 f"(k={b_sig.witness_k:g}, eta={b_sig.witness_eta:.3g})"
                 if b_sig.worst_ratio > 1 else ""),
              file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_check_initial(args) -> int:
    cfg = load_config(args.config)
    try:
        gcfg = cfg["grid"]
        grid = SpectralGrid(int(gcfg["Nx"]), int(gcfg["Nv"]), float(gcfg["L"]))
        epsilon = float(cfg["epsilon"])
        t0 = float(cfg.get("time", {}).get("t0", 0.5))
        f0, _ = _build_initial(cfg, grid, epsilon, t0)
        params, c_spec = _build_params(cfg, epsilon)
        if params is None:
            raise ConfigError("check-initial needs a params section")
        if c_spec not in (None, "auto"):
            import dataclasses
            params = dataclasses.replace(params, C=float(c_spec))
    except (ConfigError, ValueError, KeyError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    res = wt.check_initial_data(f0, params)
    print(json.dumps({"passed": res.passed, "value": res.value,
                      "threshold": res.threshold, "C": params.C},
                     indent=2, sort_keys=True))
    return EXIT_OK if res.passed else EXIT_VERIFY


def cmd_echo(args) -> int:
    cfg = load_config(args.config)
    try:
        init = cfg["initial"]
        if init.get("kind") != "two_wave":
            raise ConfigError("echo needs initial.kind == 'two_wave'")
        gcfg = cfg["grid"]
        grid = SpectralGrid(int(gcfg["Nx"]), int(gcfg["Nv"]), float(gcfg["L"]))
        bump = band_limited_bump(grid, init.get("bump", {}).get("r", 0.1))
        pred = predict_echo(float(cfg["epsilon"]), int(init["k"]), float(init["eta"]),
                            bump.l1_norm)
    except (ConfigError, ValueError, KeyError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps({"prediction": {
        "time": pred.time, "modes": list(pred.modes), "v_frequency": pred.v_frequency,
        "amplitude": pred.amplitude, "chain_times": pred.chain_times}},
        indent=2, sort_keys=True))
    return EXIT_OK


def cmd_volterra(args) -> int:
    cfg = load_config(args.config)
    try:
        gcfg, tcfg = cfg["grid"], cfg["time"]
        grid = SpectralGrid(int(gcfg["Nx"]), int(gcfg["Nv"]), float(gcfg["L"]))
        epsilon = float(cfg.get("epsilon", 1.0))
        t0, t1 = float(tcfg["t0"]), float(tcfg["t_end"])
        n = int(tcfg.get("n", 101))
        K = int(cfg.get("K", 2))
        f0, _ = _build_initial(cfg, grid, epsilon, t0)
        kind = cfg.get("background", "frozen")
        if kind not in ("frozen", "zero"):
            raise ConfigError(f"unknown background kind {kind!r}")
    except (ConfigError, ValueError, KeyError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    modes = range(-2 * K, 2 * K + 1)
    bg = FrozenFieldBackground(f0, modes)
    times = np.linspace(t0, t1, n)
    state = volterra_solve(bg, K, times, kernel_on=(kind == "frozen"))
    out = Path(args.output or "volterra.csv")
    with open(out, "w") as fh:
        fh.write("t," + ",".join(f"abs_rho_k{k}" for k in state.modes) + "\n")
        for i, t in enumerate(state.times):
            fh.write(_fmt(t) + "," + ",".join(_fmt(abs(state.rho[i, j]))
                                              for j in range(len(state.modes))) + "\n")
    print(f"volterra solve: {n} times, modes 1..{K} -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="landau-lab",
                                 description="spectral kinetic simulation and "
                                             "weighted-norm verification toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run the split-step solver from a config")
    s.add_argument("--config", required=True)
    s.add_argument("--output", default=None)
    s.add_argument("--force-off", action="store_true")
    s.add_argument("--override-validity", action="store_true")
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("params", help="derive and check the weight parameters")
    s.add_argument("--epsilon", type=float, required=True)
    s.add_argument("--N", type=float, required=True)
    s.add_argument("--sigma", type=float, required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.set_defaults(fn=cmd_params)

    s = sub.add_parser("verify-weights", help="kernel bound sweep and weight property checks")
    s.add_argument("--epsilon", type=float, required=True)
    s.add_argument("--N", type=float, required=True)
    s.add_argument("--sigma", type=float, required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--k-max", type=int, default=32)
    s.add_argument("--t-samples", type=int, default=10)
    s.add_argument("--C", default="auto")
    s.add_argument("--C1", type=float, default=64.0)
    s.add_argument("--samples", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--csv", default=None)
    s.set_defaults(fn=cmd_verify_weights)

    s = sub.add_parser("check-initial", help="initial-data admissibility check")
    s.add_argument("--config", required=True)
    s.set_defaults(fn=cmd_check_initial)

    s = sub.add_parser("echo", help="echo prediction for a two-wave config")
    s.add_argument("--config", required=True)
    s.set_defaults(fn=cmd_echo)

    s = sub.add_parser("volterra", help="density integral recursion from a config")
    s.add_argument("--config", required=True)
    s.add_argument("--output", default=None)
    s.set_defaults(fn=cmd_volterra)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
