"""Phase-diagram sweeps: classify blow-up vs global behavior over (p, sigma).

Each lattice point runs the evolver on scaled bump data.  A run that blows
up is conclusive.  A run that reaches the horizon is promoted to
GlobalCandidate only if the weighted norm of the mean-free part is
non-increasing over the last time decade and the spatial mean is far from
triggering the reaction ODE within a safety factor of the horizon; on the
periodic box the mean accumulates the injected forcing mass instead of
dispersing, so the raw weighted norm grows slowly for every forced run and
only the fluctuation part carries the dispersive decay.  Ambiguous runs are
retried with a tenfold horizon before reporting Undetermined.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from .evolve import SolveConfig, Verdict, run
from .exponents import (
    Params,
    Regime,
    classify_regime,
    critical_exponent,
    derive,
    picard_smallness,
)
from .field import ForcingSpec, Grid, lr_norm, make_bump

BLOWUP = "BlowUp"
GLOBAL_CANDIDATE = "GlobalCandidate"
UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class BumpSpec:
    """Recipe for a localized data profile (picklable, deterministic)."""

    kind: str = "gaussian"
    scale: float = 0.25
    amplitude: float = 1.0
    center: tuple | None = None

    def build(self, grid):
        return make_bump(grid, self.kind, center=self.center, scale=self.scale,
                         amplitude=self.amplitude)


@dataclass(frozen=True)
class SweepPlan:
    """Job lattice and shared solver settings for one sweep."""

    N: int
    L: float
    n: int
    p_values: tuple
    sigma_values: tuple
    data_scales: tuple = (1.0,)
    u0_spec: BumpSpec = BumpSpec()
    w_spec: BumpSpec = BumpSpec()
    tend: float = 100.0
    tend_max: float = 1e4
    umax: float = 1e8
    tol_step: float = 1e-7
    dt0: float = 1e-4
    budget_scaled_data: bool = True
    budget_cstar: float = 1.0
    tail_slope_tol: float = 0.05
    projection_margin: float = 10.0

    def __post_init__(self):
        if not self.p_values or not self.sigma_values or not self.data_scales:
            raise ValueError("sweep lattice must be nonempty")
        if any(s <= -1 for s in self.sigma_values):
            raise ValueError("all sigma values must exceed -1")

    def grid(self):
        return Grid(N=self.N, L=self.L, n=self.n)

    def jobs(self):
        return sorted(
            (float(s), float(p), float(a))
            for s in self.sigma_values
            for p in self.p_values
            for a in self.data_scales
        )


@dataclass(frozen=True)
class PhasePoint:
    """Classification outcome of one (p, sigma, scale) job."""

    p: float
    sigma: float
    scale: float
    verdict: str
    t_star: float | None
    reason: str
    theory: str
    tend_used: float


def _theory_label(params):
    if params.sigma == 0:
        return ""
    return classify_regime(params).value


def _job_data(plan, params, scale):
    """Build (u0, w) for one job, optionally shrunk into the smallness budget."""
    grid = plan.grid()
    u0 = plan.u0_spec.build(grid)
    w_profile = plan.w_spec.build(grid)
    if plan.budget_scaled_data and params.sigma != 0:
        if classify_regime(params) is Regime.SUPERCRITICAL_GLOBAL:
            der = derive(params)
            q = float(der.q_default)
            _, budget = picard_smallness(params, q, plan.budget_cstar)
            nd = lr_norm(u0, float(der.data_index))
            nk = lr_norm(w_profile, float(der.forcing_index))
            if nd > 0:
                u0 = u0.scaled(0.25 * budget / nd)
            if nk > 0:
                w_profile = w_profile.scaled(0.25 * budget / nk)
    u0 = u0.scaled(scale)
    w_profile = w_profile.scaled(scale)
    return u0, ForcingSpec.from_profile(w_profile)


def _tail_slope(times, series, t_lo):
    mask = (times >= t_lo) & (series > 1e-300)
    if np.count_nonzero(mask) < 4:
        return 0.0
    return float(np.polyfit(np.log(times[mask]), np.log(series[mask]), 1)[0])


def _mean_ode_blowup(m0, wbar, sigma, p, t0, t_cap):
    """Blow-up time of m' = |m|^p + wbar * t^sigma from (t0, m0), capped.

    Cheap adaptive midpoint integration; the constant Fourier mode of the
    periodic box obeys exactly this ODE with Jensen's inequality in the
    blow-up direction, so this projects how far the horizon-reaching run
    really is from the torus mean-growth blow-up.
    """
    m, t = abs(float(m0)), float(t0)
    for _ in range(100000):
        if m >= 1e8:
            return t
        rate = m**p + wbar * t**sigma
        if rate <= 0.0:
            return math.inf
        dt = min(0.05 * t, 0.2 * (m + 1e-9) / rate, t_cap - t)
        mid = m + 0.5 * dt * rate
        rate_mid = mid**p + wbar * (t + 0.5 * dt) ** sigma
        m += dt * rate_mid
        t += dt
        if t >= t_cap:
            return t_cap
    return t


def classify_run(traj, params, plan, tend, wbar=0.0):
    """Map one trajectory to (verdict, t_star, reason); may request escalation."""
    if traj.verdict is Verdict.BLEW_UP:
        return BLOWUP, traj.t_star, "sup-norm threshold"
    if traj.verdict is Verdict.STALLED:
        return UNDETERMINED, None, "stalled"
    slope = _tail_slope(traj.times, traj.lq_fluct, tend / 10.0)
    final = traj.snapshot_at(traj.times[-1])
    mean = float(np.mean(final.values))
    horizon = plan.projection_margin * tend
    proj = _mean_ode_blowup(mean, max(wbar, 0.0), float(params.sigma),
                            float(params.p), tend, horizon)
    if slope <= plan.tail_slope_tol and proj >= horizon:
        return GLOBAL_CANDIDATE, None, f"tail slope {slope:.3g}"
    return None, None, f"tail slope {slope:.3g}, projected blow-up {proj:.3g}"


def _run_job(plan, job):
    sigma, p, scale = job
    try:
        params = Params(N=plan.N, p=p, sigma=sigma)
        theory = _theory_label(params)
        u0, w = _job_data(plan, params, scale)
        wbar = w.mass / (2.0 * plan.L) ** plan.N
        tend = plan.tend
        while True:
            cfg = SolveConfig(
                params=params,
                Tend=tend,
                dt0=plan.dt0,
                Umax=plan.umax,
                tol_step=plan.tol_step,
                record_times=(tend,),
            )
            traj = run(u0, w, cfg)
            verdict, t_star, reason = classify_run(traj, params, plan, tend, wbar)
            if verdict is not None:
                return PhasePoint(p, sigma, scale, verdict, t_star, reason,
                                  theory, tend)
            if tend >= plan.tend_max:
                return PhasePoint(p, sigma, scale, UNDETERMINED, None,
                                  f"horizon: {reason}", theory, tend)
            tend = min(tend * 10.0, plan.tend_max)
    except Exception as exc:  # job failures must not abort the sweep
        return PhasePoint(p, sigma, scale, UNDETERMINED, None,
                          f"error: {exc}", _safe_theory(plan, p, sigma), plan.tend)


def _safe_theory(plan, p, sigma):
    try:
        return _theory_label(Params(N=plan.N, p=p, sigma=sigma))
    except Exception:
        return ""


def execute(plan, workers=1):
    """Run every job; results are sorted by key and independent of scheduling."""
    jobs = plan.jobs()
    if workers <= 1:
        results = [_run_job(plan, job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, [plan] * len(jobs), jobs))
    results = _repair_p_monotonicity(plan, results)
    return sorted(results, key=lambda pt: (pt.sigma, pt.p, pt.scale))


def _repair_p_monotonicity(plan, points):
    """Re-examine global candidates sitting below a blow-up in the same column.

    At fixed sigma < 0 and data scale, blow-ups must occupy the low-p end.  A
    GlobalCandidate below some BlowUp is the suspect (a slow burner): re-run
    it with doubled horizon; if it still looks global, demote to Undetermined
    with the violation recorded.
    """
    out = list(points)
    by_col = {}
    for i, pt in enumerate(out):
        by_col.setdefault((pt.sigma, pt.scale), []).append(i)
    for (sigma, scale), idxs in sorted(by_col.items()):
        if sigma >= 0:
            continue
        blow_ps = [out[i].p for i in idxs if out[i].verdict == BLOWUP]
        if not blow_ps:
            continue
        top_blow = max(blow_ps)
        for i in idxs:
            pt = out[i]
            if pt.verdict != GLOBAL_CANDIDATE or pt.p >= top_blow:
                continue
            retry = _run_job(
                _with_tend(plan, min(2.0 * pt.tend_used, plan.tend_max)),
                (pt.sigma, pt.p, pt.scale),
            )
            if retry.verdict == BLOWUP:
                out[i] = retry
            else:
                out[i] = PhasePoint(
                    pt.p, pt.sigma, pt.scale, UNDETERMINED, None,
                    f"ordering violation vs blow-up at p={top_blow:g}; "
                    f"retried to Tend={retry.tend_used:g}",
                    pt.theory, retry.tend_used)
    return out


def _with_tend(plan, tend):
    from dataclasses import replace

    return replace(plan, tend=tend)


@dataclass(frozen=True)
class BoundaryEstimate:
    """Empirical critical power at one sigma, bracketed from both sides."""

    sigma: float
    p_hat: float | None
    p_star_theory: float
    bracket: tuple | None
    note: str


def estimate_boundary(points, sigma, N):
    """Smallest p classified global at the smallest data scale for this sigma."""
    if not any(pt.sigma == sigma for pt in points):
        raise ValueError(f"no points at sigma = {sigma}")
    return _boundary_for(points, sigma, N)


def write_phase_csv(points, path):
    with open(path, "w") as fh:
        fh.write(phase_csv(points))


def phase_csv(points):
    out = io.StringIO()
    out.write("p,sigma,scale,verdict,tstar,theory\n")
    for pt in points:
        tstar = f"{pt.t_star:.17g}" if pt.t_star is not None else ""
        out.write(
            f"{pt.p:.17g},{pt.sigma:.17g},{pt.scale:.17g},{pt.verdict},"
            f"{tstar},{pt.theory}\n"
        )
    return out.getvalue()


_VERDICT_COLORS = {
    BLOWUP: "#c0392b",
    GLOBAL_CANDIDATE: "#2980b9",
    UNDETERMINED: "#95a5a6",
}


def phase_svg(points, N, width=640, height=480):
    """Verdict-colored lattice with the theoretical critical curve overlaid.

    One cell per (sigma, p) at the smallest data scale.
    """
    smallest = {}
    for pt in points:
        key = (pt.sigma, pt.p)
        if key not in smallest or pt.scale < smallest[key].scale:
            smallest[key] = pt
    pts = sorted(smallest.values(), key=lambda v: (v.sigma, v.p))
    sigmas = sorted({pt.sigma for pt in pts})
    ps = sorted({pt.p for pt in pts})
    pad = 60.0
    cw = (width - 2 * pad) / max(len(sigmas), 1)
    chh = (height - 2 * pad) / max(len(ps), 1)

    def x_of(sig):
        return pad + sigmas.index(sig) * cw

    def y_of(p):
        return height - pad - (ps.index(p) + 1) * chh

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" font-size="15">'
        f"phase diagram (N={N})</text>",
    ]
    for pt in pts:
        color = _VERDICT_COLORS.get(pt.verdict, "#000000")
        lines.append(
            f'<rect x="{x_of(pt.sigma):.2f}" y="{y_of(pt.p):.2f}" '
            f'width="{cw:.2f}" height="{chh:.2f}" fill="{color}" '
            f'stroke="white" stroke-width="1"><title>sigma={pt.sigma:.6g} '
            f"p={pt.p:.6g} {pt.verdict}</title></rect>"
        )
    # theoretical critical curve, drawn through cell centers where finite
    curve = []
    for sig in sigmas:
        crit = critical_exponent(N, sig) if sig != 0 else None
        if crit is None or crit is math.inf:
            continue
        crit = float(crit)
        lo, hi = min(ps), max(ps)
        if lo <= crit <= hi:
            # interpolate a vertical position inside the lattice
            below = max((p for p in ps if p <= crit), default=lo)
            above = min((p for p in ps if p >= crit), default=hi)
            frac = 0.0 if above == below else (crit - below) / (above - below)
            ycell = y_of(below) + chh / 2 - frac * (
                (y_of(below) - y_of(above)) if above != below else 0.0
            )
            curve.append((x_of(sig) + cw / 2, ycell))
    if len(curve) >= 2:
        path = " ".join(f"{x:.2f},{y:.2f}" for x, y in curve)
        lines.append(
            f'<polyline points="{path}" fill="none" stroke="black" '
            f'stroke-width="2" stroke-dasharray="6,3"/>'
        )
    for i, sig in enumerate(sigmas):
        lines.append(
            f'<text x="{pad + (i + 0.5) * cw:.1f}" y="{height - pad + 18:.1f}" '
            f'text-anchor="middle" font-size="11">{sig:.4g}</text>'
        )
    for j, p in enumerate(ps):
        lines.append(
            f'<text x="{pad - 8:.1f}" y="{height - pad - (j + 0.5) * chh + 4:.1f}" '
            f'text-anchor="end" font-size="11">{p:.4g}</text>'
        )
    lines.append(
        f'<text x="{width / 2:.1f}" y="{height - 12:.1f}" text-anchor="middle" '
        f'font-size="12">sigma</text>'
    )
    lines.append(
        f'<text x="16" y="{height / 2:.1f}" font-size="12" '
        f'transform="rotate(-90 16 {height / 2:.1f})" text-anchor="middle">p</text>'
    )
    x0 = pad
    for verdict, color in _VERDICT_COLORS.items():
        lines.append(f'<rect x="{x0:.1f}" y="34" width="12" height="12" fill="{color}"/>')
        lines.append(f'<text x="{x0 + 16:.1f}" y="44" font-size="11">{verdict}</text>')
        x0 += 150
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


@dataclass
class DiscontinuityReport:
    """Formula-side critical powers vs sweep estimates near sigma = 0."""

    N: int
    rows: list = dc_field(default_factory=list)  # (sigma, p_star, p_hat, note)
    limit_from_below: float = math.nan
    positive_side_infinite: bool = True

    def table(self):
        out = io.StringIO()
        out.write("sigma,p_star_theory,p_hat,note\n")
        for sigma, p_star, p_hat, note in self.rows:
            ph = "" if p_hat is None else f"{p_hat:.17g}"
            out.write(f"{sigma:.17g},{p_star:.17g},{ph},{note}\n")
        return out.getvalue()


def critical_limit_from_below(N):
    """Limit of the critical power as sigma -> 0-: N/(N-2) for N >= 3, else inf."""
    if N >= 3:
        return N / (N - 2.0)
    return math.inf


def discontinuity_probe(plan, workers=1, points=None):
    """Tabulate theory and sweep boundaries over the plan's sigma ladder.

    The formula side is exact (limits evaluated from the closed form); the
    empirical p_hat values are reported as observed, never forced.
    """
    if any(s == 0 for s in plan.sigma_values):
        raise ValueError("sigma ladder must exclude 0")
    if points is None:
        points = execute(plan, workers=workers)
    report = DiscontinuityReport(N=plan.N)
    report.limit_from_below = critical_limit_from_below(plan.N)
    for sigma in sorted({pt.sigma for pt in points}):
        crit = critical_exponent(plan.N, sigma)
        crit_f = math.inf if crit is math.inf else float(crit)
        est = _boundary_for(points, sigma, plan.N)
        report.rows.append((sigma, crit_f, est.p_hat, est.note))
        if sigma > 0 and crit_f != math.inf:
            report.positive_side_infinite = False
    return report


def _boundary_for(points, sigma, N):
    rows = [pt for pt in points if pt.sigma == sigma]
    smallest = min(pt.scale for pt in rows)
    rows = [pt for pt in rows if pt.scale == smallest]
    glob = sorted(pt.p for pt in rows if pt.verdict == GLOBAL_CANDIDATE)
    blow = sorted(pt.p for pt in rows if pt.verdict == BLOWUP)
    crit = critical_exponent(N, sigma) if sigma != 0 else math.inf
    crit_f = math.inf if crit is math.inf else float(crit)
    if not glob:
        note = "Unbracketed: no global candidate"
        if sigma > 0:
            note += " (critical power is infinite)"
        return BoundaryEstimate(sigma, None, crit_f, None, note)
    p_hat = glob[0]
    below = [p for p in blow if p < p_hat]
    bracket = (max(below), p_hat) if below else None
    note = "" if below else "Unbracketed: no blow-up below p_hat"
    return BoundaryEstimate(sigma, p_hat, crit_f, bracket, note)
