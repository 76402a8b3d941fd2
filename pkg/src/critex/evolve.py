"""Time integration of the forced reaction-diffusion equation.

Strang splitting: exact spectral diffusion half-steps around a pointwise
Runge-Kutta step of v' = |v|^p + s^sigma * w(x).  Steps that touch s = 0
with sigma < 0 integrate the reaction in the variable tau = s^(sigma+1), so
the singular-in-time forcing enters through its exact antiderivative.  Step
size is controlled by step doubling, and blow-up is declared either when the
sup norm crosses the configured threshold or when the step collapses while
the sup norm keeps growing.
"""

from __future__ import annotations

import enum
import io
import math
from collections import deque
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import kernels
from .exponents import Params, derive
from .field import Field, boundary_shell_fraction
from .semigroup import Propagator

_GROW_CAP = 4.0
_SHRINK_FLOOR = 0.2
_SAFETY = 0.9
_BOUNDARY_FLAG_LEVEL = 1e-6


class StepOverflow(RuntimeError):
    """Raised when a trial step produces non-finite values."""


class Verdict(enum.Enum):
    BLEW_UP = "BlewUpAt"
    REACHED_HORIZON = "ReachedHorizon"
    STALLED = "Stalled"


@dataclass
class SolveConfig:
    """Run parameters for the adaptive solver.

    dt_max defaults to max(dt0, Tend/500); record_times are hit exactly and
    snapshotted.  Set nonlinear=False to integrate only the linear forced
    equation (diagnostic mode).
    """

    params: Params
    Tend: float
    dt0: float = 1e-4
    dt_min: float = 1e-12
    dt_max: float | None = None
    Umax: float = 1e8
    tol_step: float = 1e-7
    snapshot_every: int = 0
    record_times: tuple = ()
    nonlinear: bool = True

    def __post_init__(self):
        if not (self.Tend > 0):
            raise ValueError("Tend must be positive")
        if not (0 < self.dt_min <= self.dt0):
            raise ValueError("need 0 < dt_min <= dt0")
        if not (self.Umax > 0):
            raise ValueError("Umax must be positive")
        if not (self.tol_step > 0):
            raise ValueError("tol_step must be positive")

    @property
    def effective_dt_max(self):
        if self.dt_max is not None:
            return self.dt_max
        return max(self.dt0, self.Tend / 500.0)


class Stepper:
    """Strang-split stepper bound to one grid and parameter set."""

    def __init__(self, grid, params, w_values=None, nonlinear=True):
        self.grid = grid
        self.prop = Propagator(grid)
        self.p = float(params.p)
        self.sigma = float(params.sigma)
        self.w = None if w_values is None else np.ascontiguousarray(w_values).ravel()
        self.nl = 1.0 if nonlinear else 0.0

    def _react(self, flat, t0, dt):
        if self.w is None:
            return kernels.reaction_rk4_plain(flat, dt, self.p, self.nl)
        if t0 == 0.0 and self.sigma < 0.0:
            return kernels.reaction_rk4_tau(flat, self.w, dt, self.p, self.sigma, self.nl)
        return kernels.reaction_rk4_forced(flat, self.w, t0, dt, self.p, self.sigma, self.nl)

    def step_values(self, values, t0, dt):
        half = self.prop.apply_values(values, 0.5 * dt)
        react = self._react(np.ascontiguousarray(half).ravel(), t0, dt)
        out = self.prop.apply_values(react.reshape(self.grid.shape), 0.5 * dt)
        if not np.all(np.isfinite(out)):
            raise StepOverflow(f"non-finite values at t = {t0}")
        return out


def step(u, t, dt, params, w=None, nonlinear=True):
    """One Strang-split step of length dt starting at time t."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    wv = None if w is None else w.profile.values
    if w is not None and w.profile.grid != u.grid:
        raise ValueError("forcing grid does not match field grid")
    stepper = Stepper(u.grid, params, wv, nonlinear)
    return Field(u.grid, stepper.step_values(u.values, float(t), float(dt)))


@dataclass
class Trajectory:
    """Recorded norms, snapshots and the termination verdict of one run."""

    params: Params
    q: float
    beta: float
    d: float
    times: np.ndarray
    linf: np.ndarray
    lq: np.ndarray
    ld: np.ndarray
    weighted: np.ndarray
    lq_fluct: np.ndarray
    snapshots: list = dc_field(default_factory=list)
    verdict: Verdict = Verdict.STALLED
    t_star: float | None = None
    boundary_frac_max: float = 0.0

    @property
    def boundary_flagged(self):
        return self.boundary_frac_max > _BOUNDARY_FLAG_LEVEL

    def snapshot_at(self, t):
        for ts, f in self.snapshots:
            if ts == t:
                return f
        raise KeyError(f"no snapshot recorded at t = {t}")

    def norms_csv(self):
        out = io.StringIO()
        out.write("t,Linf,Lq,Ld,weighted\n")
        for i in range(self.times.size):
            out.write(
                f"{self.times[i]:.17g},{self.linf[i]:.17g},{self.lq[i]:.17g},"
                f"{self.ld[i]:.17g},{self.weighted[i]:.17g}\n"
            )
        return out.getvalue()


def _norm_q(values, q, vol):
    return (vol * float(np.sum(np.abs(values) ** q))) ** (1.0 / q)


def recording_norms(params):
    """The (q, beta, d) triple recorded along a trajectory.

    Uses the admissible-window midpoint when the window exists; otherwise a
    bookkeeping fallback q = max(2, p) with beta clipped at zero.
    """
    der = derive(params)
    if der.q_default is not None:
        q = float(der.q_default)
        beta = float(der.beta)
    else:
        p = float(params.p)
        q = max(2.0, p)
        beta = max(0.0, 1.0 / (p - 1.0) - params.N / (2.0 * q))
    return q, beta, float(der.data_index)


def run(u0, w, cfg):
    """Advance from u0 with adaptive step doubling until blow-up or horizon."""
    grid = u0.grid
    if w is not None and w.profile.grid != grid:
        raise ValueError("forcing grid does not match initial-data grid")
    q, beta, d = recording_norms(cfg.params)
    stepper = Stepper(grid, cfg.params, None if w is None else w.profile.values,
                      cfg.nonlinear)
    vol = grid.cell_volume

    record_set = {float(t) for t in cfg.record_times if 0.0 < t <= cfg.Tend}
    targets = sorted(record_set | {float(cfg.Tend)})

    times, linf_s, lq_s, ld_s, weighted_s, fluct_s = [], [], [], [], [], []
    snapshots = []
    boundary_max = 0.0
    mean_weight = 1.0 / grid.size

    def record(t, values):
        nonlocal boundary_max
        linf = float(np.max(np.abs(values)))
        lqv = _norm_q(values, q, vol)
        ldv = _norm_q(values, d, vol) if d >= 1.0 else math.nan
        mean = float(np.sum(values)) * mean_weight
        fl = _norm_q(values - mean, q, vol)
        times.append(t)
        linf_s.append(linf)
        lq_s.append(lqv)
        ld_s.append(ldv)
        weighted_s.append(t**beta * lqv if t > 0 else (lqv if beta == 0.0 else 0.0))
        fluct_s.append(t**beta * fl if t > 0 else (fl if beta == 0.0 else 0.0))
        absu = np.abs(values)
        total = float(np.sum(absu))
        if total > 0.0:
            frac = boundary_shell_fraction(Field(grid, values), 0.125)
            boundary_max = max(boundary_max, frac)
        return linf

    v = np.array(u0.values, dtype=np.float64)
    t = 0.0
    record(0.0, v)
    if cfg.snapshot_every > 0 or 0.0 in record_set:
        snapshots.append((0.0, u0))

    dt = min(cfg.dt0, cfg.effective_dt_max, targets[0])
    dt_max = cfg.effective_dt_max
    hist = deque(maxlen=10)
    hist.append(linf_s[-1])
    accepted = 0
    ti = 0
    verdict, t_star = None, None

    def growth_verdict():
        grew = len(hist) >= 2 and hist[-1] > hist[0]
        return (Verdict.BLEW_UP, t) if grew else (Verdict.STALLED, None)

    while verdict is None:
        target = targets[ti]
        gap = target - t
        if gap <= cfg.dt_min:
            t = target
        else:
            dt_try = min(dt, dt_max, gap)
            try:
                full = stepper.step_values(v, t, dt_try)
                mid = stepper.step_values(v, t, 0.5 * dt_try)
                fine = stepper.step_values(mid, t + 0.5 * dt_try, 0.5 * dt_try)
                err = float(np.max(np.abs(full - fine))) / (
                    1.0 + float(np.max(np.abs(fine)))
                )
            except StepOverflow:
                err = math.inf
            if err > cfg.tol_step:
                if err == math.inf:
                    dt = max(dt_try * _SHRINK_FLOOR, 0.0)
                else:
                    dt = dt_try * min(
                        1.0, max(_SHRINK_FLOOR, _SAFETY * (cfg.tol_step / err) ** (1.0 / 3.0))
                    )
                if dt < cfg.dt_min:
                    verdict, t_star = growth_verdict()
                continue
            v = fine
            t = t + dt_try
            accepted += 1
            linf = record(t, v)
            hist.append(linf)
            if cfg.snapshot_every > 0 and accepted % cfg.snapshot_every == 0:
                snapshots.append((t, Field(grid, v.copy())))
            if err == 0.0:
                dt = dt_try * _GROW_CAP
            else:
                dt = dt_try * min(
                    _GROW_CAP, max(_SHRINK_FLOOR, _SAFETY * (cfg.tol_step / err) ** (1.0 / 3.0))
                )
            if linf >= cfg.Umax:
                verdict, t_star = Verdict.BLEW_UP, t
                break
        if verdict is None and t >= target:
            if target in record_set:
                if times[-1] != t:
                    record(t, v)
                if not snapshots or snapshots[-1][0] != t:
                    snapshots.append((t, Field(grid, v.copy())))
            if target >= cfg.Tend:
                verdict = Verdict.REACHED_HORIZON
                break
            ti += 1

    return Trajectory(
        params=cfg.params,
        q=q,
        beta=beta,
        d=d,
        times=np.array(times),
        linf=np.array(linf_s),
        lq=np.array(lq_s),
        ld=np.array(ld_s),
        weighted=np.array(weighted_s),
        lq_fluct=np.array(fluct_s),
        snapshots=snapshots,
        verdict=verdict,
        t_star=t_star,
        boundary_frac_max=boundary_max,
    )


def weighted_norm_series(traj, beta, q):
    """The series (t, t^beta * ||u(t)||_q) and its running supremum.

    Reuses the recorded q-norms when q matches the trajectory's recorded
    index; otherwise recomputes from snapshots (error if none exist).
    """
    if q == traj.q:
        times = traj.times
        base = traj.lq
    else:
        if not traj.snapshots:
            raise ValueError(
                f"q = {q} was not recorded and no snapshots are available"
            )
        times = np.array([ts for ts, _ in traj.snapshots])
        base = np.array(
            [_norm_q(f.values, q, f.grid.cell_volume) for _, f in traj.snapshots]
        )
    weighted = np.where(times > 0, times**beta * base, base if beta == 0.0 else 0.0)
    return times, weighted, np.maximum.accumulate(weighted)
