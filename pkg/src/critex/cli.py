"""Command-line entry point: exponents, simulate, picard, certificate, sweep.

Every file-writing command records a manifest (the resolved config plus run
metadata and data fingerprints) in its output directory; re-running the
manifest as a config file reproduces the CSV outputs byte for byte.  Exit
codes: 0 success / horizon, 2 usage or config error, 3 blow-up, 4 stalled,
5 non-converged fixed point.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from fractions import Fraction

import numpy as np

from . import __version__
from . import certificate as cert_mod
from . import config as config_mod
from . import evolve, picard, sweep as sweep_mod
from .exponents import (
    Params,
    classify_regime,
    derive,
    q_window_discriminant,
    verify_scaling_identities,
)
from .field import Field, ForcingSpec, field_fingerprint, read_snapshot, write_snapshot


def _fmt(x):
    if x is None:
        return "none"
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return f"{float(x):.17g}"


def _print_err(msg):
    print(f"error: {msg}", file=sys.stderr)


def _ensure_out(ns):
    if ns.out is None:
        return None
    os.makedirs(ns.out, exist_ok=True)
    return ns.out


def _write_manifest(ns, command, sections, fingerprints):
    out = _ensure_out(ns)
    if out is None:
        return
    manifest = {"run": {
        "command": command,
        "version": __version__,
        "timestamp_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }}
    manifest.update(config_mod.strip_meta(sections))
    if fingerprints:
        manifest["fingerprints"] = fingerprints
    config_mod.write_config(manifest, os.path.join(out, "manifest.ini"))


def _write_text(ns, name, text):
    out = _ensure_out(ns)
    if out is None:
        return
    with open(os.path.join(out, name), "w") as fh:
        fh.write(text)


# ---------------------------------------------------------------- exponents


def cmd_exponents(ns):
    try:
        params = Params(N=ns.N, p=Fraction(ns.p), sigma=Fraction(ns.sigma))
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        _print_err(str(exc))
        return 2
    der = derive(params)
    try:
        regime = classify_regime(params).value
    except ValueError:
        regime = "outside-classification-scope (sigma = 0)"
    rows = [
        ("N", str(params.N)),
        ("p", _fmt(params.p)),
        ("sigma", _fmt(params.sigma)),
        ("p_F", _fmt(der.fujita)),
        ("p_star", _fmt(der.critical)),
        ("regime", regime),
        ("d", _fmt(der.data_index)),
        ("k", _fmt(der.forcing_index)),
        ("q_window", "empty" if der.q_window is None else
         f"({_fmt(der.q_window[0])}, {_fmt(der.q_window[1])})"),
        ("q_default", _fmt(der.q_default) if der.q_default is not None else "none"),
        ("beta", _fmt(der.beta) if der.beta is not None else "none"),
        ("window_discriminant", _fmt(q_window_discriminant(params))),
    ]
    if not params.in_classification_scope:
        rows.append(("scope", "outside classification scope (baseline/diagnostic)"))
    width = max(len(k) for k, _ in rows)
    table = "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows) + "\n"
    print(table, end="")
    _write_text(ns, "exponents.txt", table)
    _write_manifest(ns, "exponents", {"params": {
        "N": str(params.N), "p": str(params.p), "sigma": str(params.sigma)}}, {})

    if ns.check:
        failures = []
        if der.q_window is not None:
            rep = verify_scaling_identities(params, der.q_default)
            if not rep.ok:
                failures.append("scaling identities failed at q_default")
            if not (der.q_default > der.data_index > der.forcing_index >= 1):
                failures.append("q > d > k >= 1 ordering failed")
        if (der.forcing_index == 1) != (der.critical is not math.inf
                                        and params.p == der.critical):
            failures.append("k = 1 does not align with p = p_star")
        for msg in failures:
            _print_err(msg)
        return 1 if failures else 0
    return 0


# ----------------------------------------------------------------- simulate


def _load_run_inputs(ns, cfg):
    params = config_mod.params_from_config(cfg)
    grid = config_mod.grid_from_config(cfg, params.N)
    data = cfg.get("data", {})
    seed = read_snapshot(ns.seed_profile) if ns.seed_profile else None
    if seed is not None and seed.grid != grid:
        raise config_mod.ConfigError("--seed-profile grid does not match [grid]")
    u0 = config_mod.bump_from_config(data, "u0", grid, seed_profile=seed)
    w_profile = config_mod.bump_from_config(data, "w", grid)
    if u0 is None:
        u0 = Field(grid, np.zeros(grid.shape))
    u0 = u0.scaled(config_mod.get_float(data, "u0_factor_value", default=1.0))
    w = None
    if w_profile is not None:
        w_profile = w_profile.scaled(
            config_mod.get_float(data, "w_factor_value", default=1.0))
        w = ForcingSpec.from_profile(w_profile)
    return params, grid, u0, w


def cmd_simulate(ns):
    try:
        cfg = config_mod.load_config(ns.config)
        params, grid, u0, w = _load_run_inputs(ns, cfg)
        solve = cfg.get("solve", {})
        run_cfg = evolve.SolveConfig(
            params=params,
            Tend=config_mod.get_float(solve, "Tend_time"),
            dt0=config_mod.get_float(solve, "dt0_time", default=1e-4),
            dt_min=config_mod.get_float(solve, "dt_min_time", default=1e-12),
            dt_max=(config_mod.get_float(solve, "dt_max_time", default=0.0) or None),
            Umax=config_mod.get_float(solve, "Umax_value", default=1e8),
            tol_step=config_mod.get_float(solve, "tol_step", default=1e-7),
            snapshot_every=config_mod.get_int(solve, "snapshot_every", default=0),
            record_times=config_mod.get_floats(solve, "record_times_time", default=()),
        )
    except (config_mod.ConfigError, OSError, ValueError) as exc:
        _print_err(str(exc))
        return 2

    traj = evolve.run(u0, w, run_cfg)
    fingerprints = {"u0": field_fingerprint(u0)}
    if w is not None:
        fingerprints["w"] = field_fingerprint(w.profile)
    _write_manifest(ns, "simulate", cfg, fingerprints)
    _write_text(ns, "norms.csv", traj.norms_csv())
    out = _ensure_out(ns)
    if out is not None:
        write_snapshot(u0, os.path.join(out, "u0.field"))
        if w is not None:
            write_snapshot(w.profile, os.path.join(out, "w.field"))
        for i, (t, f) in enumerate(traj.snapshots):
            write_snapshot(f, os.path.join(out, f"snap_{i:04d}.field"))

    tstar = _fmt(traj.t_star) if traj.t_star is not None else "-"
    print(f"verdict: {traj.verdict.value}  t_star: {tstar}  "
          f"boundary_flagged: {traj.boundary_flagged}")
    if traj.verdict is evolve.Verdict.BLEW_UP:
        return 3
    if traj.verdict is evolve.Verdict.STALLED:
        return 4
    return 0


# ------------------------------------------------------------------- picard


def cmd_picard(ns):
    try:
        cfg = config_mod.load_config(ns.config)
        params, grid, u0, w = _load_run_inputs(ns, cfg)
        sec = cfg.get("picard", {})
        tcap = config_mod.get_float(sec, "Tcap_time", default=10.0)
        rungs = config_mod.get_int(sec, "rungs", default=64)
        q = config_mod.get_float(sec, "q", default=0.0) or None
        delta = config_mod.get_float(sec, "delta_value", default=0.0) or None
        max_iter = config_mod.get_int(sec, "max_iter", default=40)
        tol = config_mod.get_float(sec, "tol", default=1e-9)
    except (config_mod.ConfigError, OSError, ValueError) as exc:
        _print_err(str(exc))
        return 2

    try:
        sol, diag = picard.iterate_to_fixed_point(
            u0, w, params, q=q, delta=delta, max_iter=max_iter, tol=tol,
            tcap=tcap, rungs=rungs)
        audit = picard.audit_estimates(sol, u0, w, params, sol.q)
    except ValueError as exc:
        _print_err(str(exc))
        return 2

    fingerprints = {"u0": field_fingerprint(u0)}
    if w is not None:
        fingerprints["w"] = field_fingerprint(w.profile)
    _write_manifest(ns, "picard", cfg, fingerprints)
    _write_text(ns, "picard_distances.csv", diag.csv())
    _write_text(ns, "picard_audit.csv", audit.csv())
    out = _ensure_out(ns)
    if out is not None:
        for j, f in enumerate(sol.fields):
            write_snapshot(f, os.path.join(out, f"ladder_{j:04d}.field"))
    print(f"converged: {diag.converged}  iterations: {diag.iterates}  "
          f"ratio: {_fmt(diag.ratio_estimate)}  in_ball: {diag.stayed_in_ball}  "
          f"outside_guarantee: {diag.outside_guarantee}")
    print(f"margins_nonnegative: {audit.all_margins_nonnegative}  "
          f"cstar_hat: {_fmt(audit.cstar_hat)}")
    return 0 if diag.converged else 5


# -------------------------------------------------------------- certificate


def cmd_certificate(ns):
    try:
        cfg = config_mod.load_config(ns.config)
        params = config_mod.params_from_config(cfg)
        grid = config_mod.grid_from_config(cfg, params.N)
        data = cfg.get("data", {})
        w_profile = config_mod.bump_from_config(data, "w", grid)
        if w_profile is None:
            raise config_mod.ConfigError("certificate needs a forcing profile")
        w_profile = w_profile.scaled(
            config_mod.get_float(data, "w_factor_value", default=1.0))
        w = ForcingSpec.from_profile(w_profile)
        sec = cfg.get("certificate", {})
        ladder = config_mod.get_floats(sec, "T_ladder_time")
        R = config_mod.get_float(sec, "R_length", default=0.0) or None
        label = config_mod.get_str(sec, "cutoffs", default="default")
        cutoffs = {"default": cert_mod.default_cutoffs,
                   "steep": cert_mod.steep_cutoffs}[label]()
    except (config_mod.ConfigError, OSError, ValueError, KeyError) as exc:
        _print_err(str(exc))
        return 2

    try:
        report = cert_mod.blowup_certificate(w, params, cutoffs, ladder, R=R)
    except ValueError as exc:
        _print_err(str(exc))
        return 2
    _write_manifest(ns, "certificate", cfg, {"w": field_fingerprint(w.profile)})
    _write_text(ns, "certificate.csv", report.csv())
    print(f"verdict: {report.verdict}  bound_slope: {_fmt(report.slopes['bound'])}  "
          f"expected: {_fmt(report.expected_slopes['bound'])}")
    return 0


# -------------------------------------------------------------------- sweep


def cmd_sweep(ns):
    try:
        cfg = config_mod.load_config(ns.config)
        sec = cfg.get("sweep", {})
        grid_sec = cfg.get("grid", {})
        plan = sweep_mod.SweepPlan(
            N=config_mod.get_int(sec, "N"),
            L=config_mod.get_float(grid_sec, "L_length"),
            n=config_mod.get_int(grid_sec, "n"),
            p_values=config_mod.get_floats(sec, "p_values"),
            sigma_values=config_mod.get_floats(sec, "sigma_values"),
            data_scales=config_mod.get_floats(sec, "data_scales", default=(1.0,)),
            tend=config_mod.get_float(sec, "Tend_time", default=100.0),
            tend_max=config_mod.get_float(sec, "Tend_max_time", default=1e4),
            umax=config_mod.get_float(sec, "Umax_value", default=1e8),
            tol_step=config_mod.get_float(sec, "tol_step", default=1e-7),
            dt0=config_mod.get_float(sec, "dt0_time", default=1e-4),
            budget_cstar=config_mod.get_float(sec, "budget_cstar", default=1.0),
        )
    except (config_mod.ConfigError, ValueError, OSError) as exc:
        _print_err(str(exc))
        return 2

    points = sweep_mod.execute(plan, workers=ns.workers)
    _write_manifest(ns, "sweep", cfg, {})
    _write_text(ns, "phase.csv", sweep_mod.phase_csv(points))
    _write_text(ns, "phase.svg", sweep_mod.phase_svg(points, plan.N))
    lines = ["sigma,p_star_theory,p_hat,note"]
    for sigma in sorted(set(pt.sigma for pt in points)):
        est = sweep_mod.estimate_boundary(points, sigma, plan.N)
        ph = "" if est.p_hat is None else _fmt(est.p_hat)
        lines.append(f"{_fmt(sigma)},{_fmt(est.p_star_theory)},{ph},{est.note}")
    _write_text(ns, "boundaries.csv", "\n".join(lines) + "\n")
    for pt in points:
        tstar = _fmt(pt.t_star) if pt.t_star is not None else "-"
        print(f"p={pt.p:g} sigma={pt.sigma:g} scale={pt.scale:g} "
              f"-> {pt.verdict} (t*={tstar}) [{pt.theory}]")
    return 0


# --------------------------------------------------------------------- main


def build_parser():
    parser = argparse.ArgumentParser(
        prog="critex",
        description="numerical laboratory for the forced semilinear heat equation",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--seed-profile", default=None,
                        help="field snapshot overriding the u0 profile")
        sp.add_argument("--check", action="store_true",
                        help="verify identities; nonzero exit on failure")

    sp = sub.add_parser("exponents", help="print the derived exponent table")
    sp.add_argument("-N", type=int, required=True)
    sp.add_argument("-p", "--p", required=True,
                    help="nonlinearity power; fractions like 5/3 are exact")
    sp.add_argument("--sigma", required=True,
                    help="forcing time power; use --sigma=-1/2 for fractions")
    common(sp)
    sp.set_defaults(func=cmd_exponents)

    for name, func, extra in (
        ("simulate", cmd_simulate, ()),
        ("picard", cmd_picard, ()),
        ("certificate", cmd_certificate, ()),
        ("sweep", cmd_sweep, ("workers",)),
    ):
        sp = sub.add_parser(name, help=f"run the {name} module from a config file")
        sp.add_argument("config", help="INI config file (a manifest also works)")
        if "workers" in extra:
            sp.add_argument("--workers", type=int, default=1)
        common(sp)
        sp.set_defaults(func=func)
    return parser


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return ns.func(ns)
    except BrokenPipeError:
        return 0


if __name__ == "__main__":
    sys.exit(main())
