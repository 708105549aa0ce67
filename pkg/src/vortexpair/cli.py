"""Command-line front end.

    vortexpair <command> [--config FILE] [flags]

Commands: profile, solve, sweep, rstar, potential, pointvortex, validate.
Exit status: 0 success, 2 validation failure, 3 non-convergence.
"""
from __future__ import annotations

import argparse
import json
import math
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .asymptotics import (AsymptoticsError, PotentialSetup, TravelPotentialKind, c1_window,
                          core_balance_height, epsilon_sweep, kind_of, limit_height,
                          minimize_travel_potential, travel_potential_eval)
from .config import COMMANDS, ConfigError, RunConfig, build_model, load_config
from .energy import AdmissibilityError, make_params
from .maximizer import MaximizerError, export_solution, run_maximizer
from .model_functions import ModelError, ModelFunctions, validate_hypotheses
from .point_vortex import PointVortexState, pv_integrate, traveling_pair_check, write_trajectory_csv
from .radial_profiles import (ProfileError, export_profile, pohozaev_residual, profile_constant_Cg,
                              solve_radial_profile)

__all__ = ["main", "run_cli", "EXIT_OK", "EXIT_INVALID", "EXIT_NONCONVERGED"]

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NONCONVERGED = 3

# flag -> (section.key, help)
FLAGS = {
    "--preset": ("model.preset", "theorem1 | theorem2 | theorem3"),
    "--f": ("model.f", "f family: power, linear, heaviside, zero"),
    "--g": ("model.g", "g family: power, linear, heaviside, zero"),
    "--p": ("model.p", "power-law exponent"),
    "--alpha": ("model.alpha", "g = alpha f coefficient (theorem1)"),
    "--delta": ("model.delta", "vanishing coefficient (theorem2: on g, theorem3: on f)"),
    "--kappa": ("physics.kappa", "circulation"),
    "--speed": ("physics.speed", "travel speed W"),
    "--lambda-cap": ("physics.lambda_cap", "vorticity cap Lambda"),
    "--epsilon": ("solver.epsilon", "core scale"),
    "--epsilons": ("solver.epsilons", "comma-separated decreasing core scales"),
    "--grid-n": ("solver.grid_n", "cells across the box width (0: use cells-per-eps)"),
    "--cells-per-eps": ("solver.cells_per_eps", "cells per core scale"),
    "--max-iter": ("solver.max_iter", "fixed-point iteration budget"),
    "--box": ("solver.box", "working box 'x1lo,x1hi,x2lo,x2hi'"),
    "--center": ("solver.center", "seed centre 'x1,x2'"),
    "--t": ("potential.t", "height at which to evaluate the potential"),
    "--radius": ("pointvortex.radius", "pair half-separation"),
    "--dt": ("pointvortex.dt", "time step"),
    "--duration": ("pointvortex.duration", "integration time"),
    "--d": ("validate.d", "height bound for the hypothesis probes"),
    "--out": ("run.out", "output directory"),
    "--workers": ("run.workers", "worker processes for sweeps"),
    "--seed": ("run.seed", "seed for randomized probes"),
}


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file; flags override its values")
    for flag, (_, text) in FLAGS.items():
        common.add_argument(flag, dest=flag[2:].replace("-", "_"), help=text)
    ap = argparse.ArgumentParser(prog="vortexpair", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        sub.add_parser(cmd, parents=[common])
    return ap


def _overrides(ns) -> dict:
    out = {}
    for flag, (dotted, _) in FLAGS.items():
        val = getattr(ns, flag[2:].replace("-", "_"))
        if val is not None:
            out[dotted] = val
    return out


def _kind(cfg: RunConfig, model: ModelFunctions) -> TravelPotentialKind:
    preset = cfg.get("model", "preset")
    return TravelPotentialKind.parse(preset) if preset else kind_of(model)


def _alpha(cfg, model, kind):
    if kind is TravelPotentialKind.THEOREM1:
        return model.cg / model.cf
    return 0.0


def _profile_nl(model: ModelFunctions, kind):
    return model.g if kind is TravelPotentialKind.THEOREM3 else model.f


def _potential_setup(cfg, model, kind) -> PotentialSetup:
    kappa, W = cfg.get("physics", "kappa"), cfg.get("physics", "speed")
    if kind is TravelPotentialKind.THEOREM2:
        return PotentialSetup(kind, kappa, W)
    nl = _profile_nl(model, kind)
    prof = solve_radial_profile(nl, kappa)
    return PotentialSetup(kind, kappa, W, nl, _alpha(cfg, model, kind), prof)


def _box(cfg, model, kind):
    """Working box; the resolved default is written back so the manifest records it."""
    box = cfg.get("solver", "box")
    if box:
        return tuple(box)
    kappa, W = cfg.get("physics", "kappa"), cfg.get("physics", "speed")
    if kind is TravelPotentialKind.THEOREM3:
        setup = _potential_setup(cfg, model, kind)
        c1 = c1_window(setup)
        r2 = setup.reference_height
        box = [-1.0, 1.0, c1 * r2, r2 / c1]
    else:
        r = limit_height(kind, kappa, W, _alpha(cfg, model, kind))
        box = [-1.0, 1.0, r / 2.0, 2.0 * r]
    cfg.values["solver"]["box"] = box
    return tuple(box)


def _params(cfg, model, kind, eps=None):
    s = cfg.values["solver"]
    return make_params(model, cfg.get("physics", "speed"), cfg.get("physics", "kappa"),
                       eps if eps is not None else s["epsilon"], cfg.get("physics", "lambda_cap"),
                       _box(cfg, model, kind), cells_per_eps=s["cells_per_eps"],
                       grid_n=s["grid_n"] or None, mass_tol=s["mass_tol"],
                       fixedpoint_tol=s["fixedpoint_tol"], max_iter=s["max_iter"])


def _center(cfg, p):
    c = cfg.get("solver", "center")
    if c:
        return tuple(c)
    x1lo, x1hi, x2lo, x2hi = p.D_bounds
    cfg.values["solver"]["center"] = [0.0, math.sqrt(x2lo * x2hi)]
    return tuple(cfg.values["solver"]["center"])


def _kv(fh, mapping):
    for k, v in mapping.items():
        fh.write(f"{k} = {v!r}\n" if isinstance(v, float) else f"{k} = {v}\n")


def _cmd_profile(cfg, out, report):
    model = build_model(cfg)
    kind = _kind(cfg, model)
    nl = _profile_nl(model, kind)
    kappa = cfg.get("physics", "kappa")
    prof = solve_radial_profile(nl, kappa)
    export_profile(out / "profile.txt", prof, repr(nl), kappa)
    res1, res2 = pohozaev_residual(prof, nl)
    cg = profile_constant_Cg(prof, nl, kappa)
    rec = {"nl": repr(nl), "kappa": kappa, "support_radius": prof.support_radius,
           "center_value": prof.center_value, "mass": prof.mass,
           "pohozaev_residual_1": res1, "pohozaev_residual_2": res2,
           "C_g": cg.value, "C_g_discrepancy": cg.discrepancy}
    report(rec)
    return EXIT_OK, ["profile.txt", "summary.txt"]


def _cmd_solve(cfg, out, report):
    model = build_model(cfg)
    kind = _kind(cfg, model)
    p = _params(cfg, model, kind)
    sol = run_maximizer(p, _center(cfg, p))
    summary = export_solution(out, sol, p)
    report({"kind": kind.value, "epsilon": p.eps, **summary})
    code = EXIT_OK if sol.converged else EXIT_NONCONVERGED
    return code, ["zeta.txt", "psi.txt", "eta.txt", "summary.txt"]


def _cmd_sweep(cfg, out, report):
    model = build_model(cfg)
    kind = _kind(cfg, model)
    eps_list = cfg.get("solver", "epsilons")
    p = _params(cfg, model, kind, eps=eps_list[0])
    workers = cfg.get("run", "workers")
    rep = epsilon_sweep(p, eps_list, _center(cfg, p), warm_start=workers <= 1, workers=workers,
                        cells_per_eps=cfg.get("solver", "cells_per_eps"))
    rep.write_csv(out / "sweep.csv")
    report({"kind": kind.value, "slope_E": rep.slope_E, "slope_mu": rep.slope_mu,
            "rbar_extrapolated": rep.rbar_extrapolated, "all_converged": not rep.tainted})
    return (EXIT_NONCONVERGED if rep.tainted else EXIT_OK), ["sweep.csv", "summary.txt"]


def _cmd_rstar(cfg, out, report):
    model = build_model(cfg)
    kind = _kind(cfg, model)
    kappa, W = cfg.get("physics", "kappa"), cfg.get("physics", "speed")
    alpha = _alpha(cfg, model, kind)
    r = limit_height(kind, kappa, W, alpha)
    print(f"{r:.7f}")
    report({"kind": kind.value, "limit_height": r,
            "core_balance_height": core_balance_height(kind, kappa, W, alpha)}, echo=False)
    return EXIT_OK, ["summary.txt"]


def _cmd_potential(cfg, out, report):
    model = build_model(cfg)
    kind = _kind(cfg, model)
    setup = _potential_setup(cfg, model, kind)
    t_min, dres = minimize_travel_potential(setup)
    rec = {"kind": kind.value, "t_min": t_min, "derivative_residual": dres,
           "value_at_t_min": travel_potential_eval(setup, t_min)}
    t = cfg.get("potential", "t")
    if not math.isnan(t):
        rec["t"] = t
        rec["value_at_t"] = travel_potential_eval(setup, t)
    report(rec)
    return EXIT_OK, ["summary.txt"]


def _cmd_pointvortex(cfg, out, report):
    kappa, W = cfg.get("physics", "kappa"), cfg.get("physics", "speed")
    r = cfg.get("pointvortex", "radius")
    if math.isnan(r):
        r = kappa / (4 * math.pi * W)
        cfg.values["pointvortex"]["radius"] = r
    dt, duration = cfg.get("pointvortex", "dt"), cfg.get("pointvortex", "duration")
    check = traveling_pair_check(kappa, r, dt=dt, duration=duration)
    print(f"speed {check.measured_speed:.6f}")
    n = int(round(duration / dt))
    traj = pv_integrate(PointVortexState([[0.0, r], [0.0, -r]], [kappa, -kappa]), dt, n,
                        record_every=max(1, n // 1000))
    write_trajectory_csv(out / "trajectory.csv", traj)
    report({"kappa": kappa, "radius": r, "measured_speed": check.measured_speed,
            "expected_speed": check.expected_speed, "rel_error": check.rel_error,
            "x2_drift": check.x2_drift}, echo=False)
    return EXIT_OK, ["trajectory.csv", "summary.txt"]


def _cmd_validate(cfg, out, report):
    model = build_model(cfg)
    rep = validate_hypotheses(model, cfg.get("validate", "d"))
    for line in rep.lines():
        print(line)
    report({"all_passed": rep.all_passed, **{r.name: r.passed for r in rep.results.values()}}, echo=False)
    return (EXIT_OK if rep.all_passed else EXIT_INVALID), ["summary.txt"]


HANDLERS = {"profile": _cmd_profile, "solve": _cmd_solve, "sweep": _cmd_sweep,
            "rstar": _cmd_rstar, "potential": _cmd_potential,
            "pointvortex": _cmd_pointvortex, "validate": _cmd_validate}


def _write_manifest(out: Path, cfg: RunConfig, outputs, code):
    ini = cfg.to_ini()
    prov = {"command": cfg.command, "exit_status": code, "outputs": sorted(outputs),
            "versions": {"vortexpair": __version__, "numpy": np.__version__,
                         "scipy": scipy.__version__, "python": platform.python_version()}}
    with open(out / "manifest.ini", "w") as fh:
        fh.write(ini)
        fh.write("[manifest]\n")
        for k, v in prov.items():
            fh.write(f"{k} = {json.dumps(v)}\n")


def run_cli(argv=None) -> int:
    ns = _parser().parse_args(argv)
    try:
        cfg = load_config(ns.command, ns.config, _overrides(ns))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary_lines = {}

    def report(rec, echo=True):
        summary_lines.update(rec)
        if echo:
            for k, v in rec.items():
                print(f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}")

    try:
        code, outputs = HANDLERS[ns.command](cfg, out, report)
    except (ConfigError, ModelError, AdmissibilityError, AsymptoticsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code, outputs = EXIT_INVALID, []
    except (MaximizerError, ProfileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code, outputs = EXIT_NONCONVERGED, []
    if summary_lines and ns.command != "solve":
        with open(out / "summary.txt", "w") as fh:
            _kv(fh, summary_lines)
    _write_manifest(out, cfg, outputs + ["manifest.ini"], code)
    return code


def main(argv=None) -> None:
    sys.exit(run_cli(argv))


if __name__ == "__main__":
    main()
