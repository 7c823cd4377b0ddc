"""Verification experiments: Riccati toy model and epsilon sweeps.

The Riccati problem y' = y^2 / (1 + eps^2 y^2) is the scalar caricature
of calming: the uncalmed equation (eps = 0) blows up at t = 1/y0 while
every eps > 0 solution is global, and the two agree before blowup as
eps -> 0.  Its closed form is evaluated in a cancellation-safe
arrangement so tiny eps does not lose digits.

``convergence_sweep`` measures how fast a calmed trajectory approaches
the identity-calming reference as epsilon shrinks: the expected order
of the squared-norm errors is 2*gamma with gamma the residual decay
order of the family.  Sweep entries are independent; a bounded process
pool is used when CALMED_MHDB_THREADS allows it.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from . import spectral
from .calming import CalmingSpec, constants_for
from .diagnostics import resolution_tail_ratio
from .dynamics import PhysParams, State, StepperConfig, builtin_initial_data, simulate
from .spectral import Grid

__all__ = [
    "RiccatiCase",
    "riccati_closed_form",
    "riccati_integrate",
    "SweepPlan",
    "SweepRow",
    "SweepResult",
    "RateFit",
    "UnresolvedReferenceError",
    "convergence_sweep",
    "fit_rate",
    "sweep_worker_count",
    "THREADS_ENV_VAR",
]

THREADS_ENV_VAR = "CALMED_MHDB_THREADS"

#: sup of the reference spectrum tail (relative to its peak) above which
#: the reference run is rejected as under-resolved
REFERENCE_TAIL_LIMIT = 1e-8

#: squared errors at or below this are treated as exact agreement
ZERO_ERROR_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# Riccati toy model


@dataclass(frozen=True)
class RiccatiCase:
    """Initial value y0 > 0, calming strength eps >= 0, output times."""

    y0: float
    epsilon: float
    t_grid: tuple

    def __post_init__(self):
        if not self.y0 > 0:
            raise ValueError(f"y0 must be positive, got {self.y0}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        object.__setattr__(self, "t_grid", tuple(float(t) for t in self.t_grid))
        if any(t < 0 for t in self.t_grid):
            raise ValueError("output times must be nonnegative")


def riccati_closed_form(case: RiccatiCase) -> np.ndarray:
    """Exact solution of y' = y^2 / (1 + eps^2 y^2), y(0) = y0.

    For eps > 0 the solution solves the quadratic implicit relation and
    equals

        y(t) = [d + sqrt(d^2 + 4 eps^2 y0^2)] / (2 eps^2 y0),
        d = eps^2 y0^2 + t y0 - 1.

    When d < 0 the numerator suffers cancellation for small eps, so the
    conjugate form 2 y0 / (sqrt(d^2 + 4 eps^2 y0^2) - d) is used there.
    With eps = 0 the blowup solution y0 / (1 - t y0) is returned and
    times at or past 1/y0 are rejected.
    """
    t = np.asarray(case.t_grid, dtype=float)
    y0, eps = case.y0, case.epsilon
    if eps == 0.0:
        if np.any(t >= 1.0 / y0):
            raise ValueError(
                f"uncalmed solution blows up at t = {1.0 / y0:.6g}; "
                "an output time is at or past it"
            )
        return y0 / (1.0 - t * y0)
    d = eps**2 * y0**2 + t * y0 - 1.0
    root = np.sqrt(d**2 + 4.0 * eps**2 * y0**2)
    safe = np.where(d >= 0.0, (d + root) / (2.0 * eps**2 * y0), 2.0 * y0 / (root - d))
    return safe


def riccati_integrate(case: RiccatiCase, rtol: float = 1e-11, atol: float = 1e-12) -> np.ndarray:
    """Adaptive 4th/5th-order integration of the calmed Riccati equation."""
    if case.epsilon <= 0.0:
        raise ValueError("numerical integration requires epsilon > 0")
    eps2 = case.epsilon**2

    def f(_t, y):
        return y * y / (1.0 + eps2 * y * y)

    t = np.asarray(case.t_grid, dtype=float)
    order = np.argsort(t)
    sol = solve_ivp(
        f,
        (0.0, float(t.max()) if t.size else 0.0),
        [case.y0],
        method="RK45",
        t_eval=t[order],
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise RuntimeError(f"integration failed: {sol.message}")
    out = np.empty_like(t)
    out[order] = sol.y[0]
    return out


# ---------------------------------------------------------------------------
# rate fitting


@dataclass(frozen=True)
class RateFit:
    """Least-squares power law fit err ~ exp(intercept) * eps^slope."""

    slope: float
    intercept: float
    residuals: tuple
    r_squared: float


def fit_rate(points) -> RateFit:
    """OLS fit of log(err) against log(eps).

    ``points`` is a sequence of (eps, err) pairs with at least three
    entries and strictly positive errors; exact-zero data belongs to
    the zero-error fast path, not to a log fit.
    """
    pts = [(float(e), float(v)) for e, v in points]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points to fit a rate, got {len(pts)}")
    if any(v <= 0.0 for _, v in pts):
        raise ValueError("errors must be positive for a log-log fit")
    if any(e <= 0.0 for e, _ in pts):
        raise ValueError("epsilon values must be positive")
    lx = np.log([e for e, _ in pts])
    ly = np.log([v for _, v in pts])
    slope, intercept = np.polyfit(lx, ly, 1)
    fitted = slope * lx + intercept
    resid = ly - fitted
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RateFit(
        slope=float(slope),
        intercept=float(intercept),
        residuals=tuple(float(r) for r in resid),
        r_squared=float(r2),
    )


# ---------------------------------------------------------------------------
# epsilon convergence sweep


class UnresolvedReferenceError(RuntimeError):
    """The identity reference run stressed the retained band."""


@dataclass(frozen=True)
class SweepPlan:
    """Everything needed to reproduce one epsilon sweep."""

    grid_n: int
    params: PhysParams
    family: str
    epsilon_ladder: tuple
    dt: float
    t_final: float
    initial: str = "taylor-green+gaussian-theta"
    seed: int = 0
    record_every: int = 1
    cfl_safety: float = 0.9

    def __post_init__(self):
        object.__setattr__(
            self, "epsilon_ladder", tuple(float(e) for e in self.epsilon_ladder)
        )
        lad = self.epsilon_ladder
        if not lad:
            raise ValueError("epsilon ladder is empty")
        if self.family != "identity":
            if any(e <= 0 for e in lad):
                raise ValueError("ladder entries must be positive")
            if any(b >= a for a, b in zip(lad, lad[1:])):
                raise ValueError("ladder must be strictly decreasing")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    def stepper(self) -> StepperConfig:
        return StepperConfig(dt=self.dt, t_final=self.t_final, cfl_safety=self.cfl_safety)


@dataclass(frozen=True)
class SweepRow:
    """Errors of one calmed run against the reference.

    e_inf is the sup over recorded times of the squared H1 errors of u
    and b plus the squared L2 error of theta; e_int integrates the
    squared H2 errors of u and b plus the squared H1 error of theta.
    max_curl is sup_t sup_x |curl b| of the calmed run, for windowed
    families.
    """

    epsilon: float
    e_inf: float
    e_int: float
    max_curl: float


@dataclass(frozen=True)
class SweepResult:
    plan: SweepPlan
    rows: tuple
    reference_tail: float
    fit_inf: RateFit | None
    fit_int: RateFit | None
    zero_error: bool
    monotone_inf: bool
    expected_order: float


def _run_recorded(plan: SweepPlan, spec: CalmingSpec):
    """Run one trajectory, returning records (t, u, b, th) and max curl."""
    grid = Grid(plan.grid_n)
    state = builtin_initial_data(plan.initial, grid, plan.seed)
    frames = []
    max_curl = 0.0

    def capture(_step, s):
        nonlocal max_curl
        frames.append((s.t, s.u_hat.copy(), s.b_hat.copy(), s.theta_hat.copy()))
        j = spectral.to_physical(grid, spectral.curl2d(grid, s.b_hat))
        max_curl = max(max_curl, float(np.max(np.abs(j))))

    final = simulate(state, plan.params, spec, plan.stepper(), [(plan.record_every, capture)])
    tail = resolution_tail_ratio(final)
    return frames, max_curl, tail


def _error_rows(grid: Grid, ref_frames, frames):
    if len(ref_frames) != len(frames):
        raise RuntimeError("reference and calmed runs recorded different step counts")
    times, sups, ints = [], [], []
    for (t_r, ur, br, tr), (t_c, uc, bc, tc) in zip(ref_frames, frames):
        if abs(t_r - t_c) > 1e-12:
            raise RuntimeError("reference and calmed runs drifted in time")
        du, db, dth = ur - uc, br - bc, tr - tc
        sup = (
            spectral.l2_norm(du) ** 2
            + spectral.h1_seminorm(grid, du) ** 2
            + spectral.l2_norm(db) ** 2
            + spectral.h1_seminorm(grid, db) ** 2
            + spectral.l2_norm(dth) ** 2
        )
        hi = (
            spectral.l2_norm(du) ** 2
            + spectral.h1_seminorm(grid, du) ** 2
            + spectral.h2_seminorm(grid, du) ** 2
            + spectral.l2_norm(db) ** 2
            + spectral.h1_seminorm(grid, db) ** 2
            + spectral.h2_seminorm(grid, db) ** 2
            + spectral.l2_norm(dth) ** 2
            + spectral.h1_seminorm(grid, dth) ** 2
        )
        times.append(t_r)
        sups.append(sup)
        ints.append(hi)
    e_inf = float(np.max(sups))
    e_int = float(np.trapezoid(ints, times))
    return e_inf, e_int


# module-level cache so forked/spawned pool workers recompute the
# reference trajectory at most once each
_REFERENCE_CACHE: dict = {}


def _reference_frames(plan: SweepPlan):
    key = plan
    if key not in _REFERENCE_CACHE:
        _REFERENCE_CACHE.clear()
        frames, _max_curl, tail = _run_recorded(plan, CalmingSpec("identity"))
        if tail > REFERENCE_TAIL_LIMIT:
            raise UnresolvedReferenceError(
                f"reference spectrum tail {tail:.3e} exceeds {REFERENCE_TAIL_LIMIT:.1e}; "
                "increase the grid or the dissipation"
            )
        _REFERENCE_CACHE[key] = (frames, tail)
    return _REFERENCE_CACHE[key]


def _sweep_entry(args):
    plan, eps = args
    ref_frames, tail = _reference_frames(plan)
    if plan.family == "identity":
        spec = CalmingSpec("identity")  # labels only; identity has no epsilon
    else:
        spec = CalmingSpec(plan.family, eps)
    frames, max_curl, _ = _run_recorded(plan, spec)
    e_inf, e_int = _error_rows(Grid(plan.grid_n), ref_frames, frames)
    return SweepRow(epsilon=eps, e_inf=e_inf, e_int=e_int, max_curl=max_curl), tail


def sweep_worker_count(n_jobs: int) -> int:
    """Bounded worker count from CALMED_MHDB_THREADS (default serial)."""
    raw = os.environ.get(THREADS_ENV_VAR, "1")
    try:
        threads = int(raw)
    except ValueError as exc:
        raise ValueError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}") from exc
    return max(1, min(n_jobs, threads))


def convergence_sweep(plan: SweepPlan) -> SweepResult:
    """Compare calmed runs against the identity reference over a ladder.

    The identity reference is run once (and checked for resolution),
    every ladder entry is run with identical initial data and stepper,
    and the squared-norm errors are fit against epsilon.  Runs whose
    errors sit at the floating-point floor are reported through the
    zero_error flag instead of a meaningless log fit, and a
    non-monotone e_inf ladder is flagged rather than silently passed.
    """
    jobs = [(plan, eps) for eps in plan.epsilon_ladder]
    workers = sweep_worker_count(len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_sweep_entry, jobs))
    else:
        outcomes = [_sweep_entry(job) for job in jobs]

    rows = tuple(row for row, _ in outcomes)
    _, tail = _reference_frames(plan)

    zero_error = all(r.e_inf <= ZERO_ERROR_FLOOR for r in rows)
    fit_inf = fit_int = None
    if not zero_error and len(rows) >= 3 and all(r.e_inf > 0 and r.e_int > 0 for r in rows):
        fit_inf = fit_rate([(r.epsilon, r.e_inf) for r in rows])
        fit_int = fit_rate([(r.epsilon, r.e_int) for r in rows])
    monotone = all(
        b.e_inf <= a.e_inf * (1.0 + 1e-9) + 1e-300 for a, b in zip(rows, rows[1:])
    )
    if plan.family == "identity":
        expected = float("nan")
    else:
        expected = 2.0 * constants_for(CalmingSpec(plan.family, plan.epsilon_ladder[0])).gamma
    return SweepResult(
        plan=plan,
        rows=rows,
        reference_tail=float(tail),
        fit_inf=fit_inf,
        fit_int=fit_int,
        zero_error=zero_error,
        monotone_inf=monotone,
        expected_order=expected,
    )
