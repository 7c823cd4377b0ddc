"""Time evolution of the calmed magneto-Boussinesq system.

State variables are the Fourier coefficients of the velocity u, the
magnetic field b (both solenoidal with zero mean) and the temperature
theta (whose mean is free to evolve).  The semi-discrete system is the
Galerkin restriction to the dealias mask of

    du/dt = nu Lap u - P[(u.grad)u] + P[(b.grad)b] + g P[theta e2]
    db/dt = mu Lap b - P[(u.grad)b] + P[(b.grad)u]
    dth/dt = kappa Lap th - (u.grad)th + alpha mu zeta(|curl b|) |curl b|

with P the zero-mean Leray projector.  Quadratic products are formed on
the 3/2 quadrature grid and are therefore exact; the temperature source
is the one non-polynomial term and is evaluated pointwise on the same
grid before truncation, a quadrature choice recorded on the module.

Time stepping is Heun's method on integrating-factor variables: the
diffusion semigroup is applied exactly per mode, the remaining terms
explicitly to second order.  The calmed and identity systems share this
code path, differing only in the calming family passed in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import calming, spectral
from .calming import CalmingSpec
from .spectral import Grid

__all__ = [
    "PhysParams",
    "State",
    "StepperConfig",
    "SimulationError",
    "rhs_nonlinear",
    "ohmic_source_samples",
    "ohmic_source_spectrum",
    "step_imex",
    "simulate",
    "galerkin_project",
    "laplacian_shells",
    "builtin_initial_data",
    "INITIAL_DATA_NAMES",
]

#: tolerance scale for the solenoidality invariant checks
DIVERGENCE_TOL = 1e-10


class SimulationError(RuntimeError):
    """Raised when a step cannot proceed; carries the simulation time."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (t = {time:.6g})")
        self.time = time


@dataclass(frozen=True)
class PhysParams:
    """Viscosity, resistivity, diffusivity, buoyancy and heating gains."""

    nu: float
    mu: float
    kappa: float
    g: float
    alpha: float

    def __post_init__(self):
        for name in ("nu", "mu", "kappa", "g", "alpha"):
            value = getattr(self, name)
            if not (value > 0.0 and np.isfinite(value)):
                raise ValueError(f"parameter {name} must be positive, got {value}")


@dataclass
class State:
    """Spectral state (u, b, theta) at time t on a fixed grid."""

    grid: Grid
    u_hat: np.ndarray
    b_hat: np.ndarray
    theta_hat: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.u_hat = np.asarray(self.u_hat, dtype=complex)
        self.b_hat = np.asarray(self.b_hat, dtype=complex)
        self.theta_hat = np.asarray(self.theta_hat, dtype=complex)
        if self.u_hat.shape != self.grid.vector_shape():
            raise ValueError(f"u_hat has shape {self.u_hat.shape}")
        if self.b_hat.shape != self.grid.vector_shape():
            raise ValueError(f"b_hat has shape {self.b_hat.shape}")
        if self.theta_hat.shape != self.grid.scalar_shape():
            raise ValueError(f"theta_hat has shape {self.theta_hat.shape}")

    def copy(self) -> "State":
        return State(
            self.grid,
            self.u_hat.copy(),
            self.b_hat.copy(),
            self.theta_hat.copy(),
            self.t,
        )

    def field_scale(self) -> float:
        """A magnitude scale for relative invariant tolerances."""
        return max(
            spectral.l2_norm(self.u_hat),
            spectral.l2_norm(self.b_hat),
            spectral.l2_norm(self.theta_hat),
            1.0,
        )

    def check_invariants(self, tol: float = DIVERGENCE_TOL) -> None:
        """Solenoidality, zero means of u and b, conjugate symmetry."""
        scale = self.field_scale()
        for name, field in (("u", self.u_hat), ("b", self.b_hat)):
            div = spectral.max_divergence(self.grid, field)
            if div > tol * scale * self.grid.n:
                raise ValueError(f"{name} is not solenoidal: max div = {div:.3e}")
            mean = np.max(np.abs(field[:, 0, 0]))
            if mean > tol * scale:
                raise ValueError(f"{name} has nonzero mean {mean:.3e}")
        for name, field in (
            ("u", self.u_hat),
            ("b", self.b_hat),
            ("theta", self.theta_hat),
        ):
            asym = spectral.max_asymmetry(field)
            if asym > tol * scale:
                raise ValueError(f"{name} is not conjugate symmetric ({asym:.3e})")


@dataclass(frozen=True)
class StepperConfig:
    """Step size, horizon and advective CFL safety factor.

    The runtime CFL condition is dt <= cfl_safety * h / max(1, sup|u|,
    sup|b|) with h = 1/n, checked before every step.
    """

    dt: float
    t_final: float
    scheme: str = "if-heun"
    cfl_safety: float = 0.5

    def __post_init__(self):
        if not (self.dt > 0.0 and np.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (self.t_final >= 0.0 and np.isfinite(self.t_final)):
            raise ValueError(f"t_final must be nonnegative, got {self.t_final}")
        if self.scheme != "if-heun":
            raise ValueError(f"unknown scheme {self.scheme!r}; only 'if-heun'")
        if not (0.0 < self.cfl_safety <= 1.0):
            raise ValueError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")


# ---------------------------------------------------------------------------
# right-hand side


def ohmic_source_samples(grid: Grid, b_hat, spec: CalmingSpec) -> np.ndarray:
    """zeta(|curl b|) |curl b| on the quadrature grid (without alpha mu).

    |curl b| is evaluated directly; it vanishes where curl b does, so no
    special casing is needed at zeros.  For the saturating family with
    sup |curl b| < 1/eps this reproduces |curl b|^2 bit for bit.
    """
    j = spectral.to_quadrature(grid, spectral.curl2d(grid, b_hat))
    mag = np.abs(j)
    return calming.evaluate(spec, mag) * mag


def ohmic_source_spectrum(grid: Grid, b_hat, spec: CalmingSpec, alpha_mu: float):
    """Masked spectrum of alpha mu zeta(|curl b|)|curl b|.

    The pointwise samples are non-polynomial in b, so unlike the
    advection terms their quadrature carries a small aliasing error in
    the retained band; it is part of the spatial discretization error.
    """
    samples = ohmic_source_samples(grid, b_hat, spec)
    return alpha_mu * spectral.apply_mask(grid, spectral.from_quadrature(grid, samples))


def rhs_nonlinear(state: State, params: PhysParams, spec: CalmingSpec):
    """Non-diffusive tendency (du, db, dth), Galerkin truncated.

    Diffusion is absent here; the stepper applies it exactly through
    integrating factors.
    """
    grid = state.grid
    u, b, th = state.u_hat, state.b_hat, state.theta_hat

    du = -spectral.advect(grid, u, u) + spectral.advect(grid, b, b)
    du[1] += params.g * th
    du = spectral.apply_mask(grid, spectral.leray_project(grid, du, zero_mean=True))

    db = -spectral.advect(grid, u, b) + spectral.advect(grid, b, u)
    db = spectral.apply_mask(grid, spectral.leray_project(grid, db, zero_mean=True))

    dth = -spectral.apply_mask(grid, spectral.advect(grid, u, th))
    dth = dth + ohmic_source_spectrum(grid, b, spec, params.alpha * params.mu)

    for name, field in (("du", du), ("db", db), ("dtheta", dth)):
        if not np.all(np.isfinite(field)):
            raise SimulationError(f"non-finite values in {name}", state.t)
    return du, db, dth


# ---------------------------------------------------------------------------
# time stepping


def _sup_speed(grid: Grid, v_hat) -> float:
    v = spectral.to_physical(grid, v_hat)
    return float(np.max(np.hypot(v[0], v[1])))


def _check_cfl(state: State, dt: float, cfl_safety: float) -> None:
    h = 1.0 / state.grid.n
    speed = max(1.0, _sup_speed(state.grid, state.u_hat), _sup_speed(state.grid, state.b_hat))
    limit = cfl_safety * h / speed
    if dt > limit:
        raise SimulationError(
            f"CFL violation: dt = {dt:.3e} exceeds {limit:.3e} "
            f"(advective speed {speed:.3g})",
            state.t,
        )


def step_imex(
    state: State,
    params: PhysParams,
    spec: CalmingSpec,
    dt: float,
    cfl_safety: float = 1.0,
) -> State:
    """One integrating-factor Heun step of length dt.

    The diffusion factor exp(-visc |2 pi k|^2 dt) is exact per mode, so
    a pure-diffusion state follows the heat semigroup to roundoff; the
    explicit part is second order.  After the step u and b are
    re-projected and all fields re-symmetrized, keeping the invariants
    from drifting over long runs.
    """
    if not (dt > 0.0 and np.isfinite(dt)):
        raise ValueError(f"dt must be positive, got {dt}")
    _check_cfl(state, dt, cfl_safety)
    grid = state.grid
    eu = np.exp(-params.nu * grid.k2 * dt)
    eb = np.exp(-params.mu * grid.k2 * dt)
    et = np.exp(-params.kappa * grid.k2 * dt)

    du1, db1, dth1 = rhs_nonlinear(state, params, spec)
    predictor = State(
        grid,
        eu * (state.u_hat + dt * du1),
        eb * (state.b_hat + dt * db1),
        et * (state.theta_hat + dt * dth1),
        state.t + dt,
    )
    du2, db2, dth2 = rhs_nonlinear(predictor, params, spec)

    u_new = eu * state.u_hat + 0.5 * dt * (eu * du1 + du2)
    b_new = eb * state.b_hat + 0.5 * dt * (eb * db1 + db2)
    th_new = et * state.theta_hat + 0.5 * dt * (et * dth1 + dth2)

    u_new = spectral.symmetrize(spectral.leray_project(grid, u_new, zero_mean=True))
    b_new = spectral.symmetrize(spectral.leray_project(grid, b_new, zero_mean=True))
    th_new = spectral.symmetrize(th_new)

    for name, field in (("u", u_new), ("b", b_new), ("theta", th_new)):
        if not np.all(np.isfinite(field)):
            raise SimulationError(f"non-finite values in {name} after step", state.t)

    return State(grid, u_new, b_new, th_new, state.t + dt)


def simulate(
    state: State,
    params: PhysParams,
    spec: CalmingSpec,
    config: StepperConfig,
    observers=(),
) -> State:
    """March the state to t_final, notifying observers along the way.

    ``observers`` is a sequence of (every, callback) pairs; callbacks
    receive (step_index, state) at step 0, at every ``every``-th step,
    and at the final step.  With t_final = 0 the initial state is
    reported once and returned unchanged.  Outputs are a pure function
    of the inputs: repeated runs are bit identical.
    """
    state = state.copy()
    state.check_invariants()

    n_full = int(np.floor(config.t_final / config.dt + 1e-9))
    partial = config.t_final - n_full * config.dt
    has_partial = partial > 1e-12 * config.dt
    total = n_full + (1 if has_partial else 0)

    def notify(step_index: int) -> None:
        for every, callback in observers:
            if step_index == 0 or step_index == total or (every > 0 and step_index % every == 0):
                callback(step_index, state)

    notify(0)
    for step in range(1, n_full + 1):
        state = step_imex(state, params, spec, config.dt, config.cfl_safety)
        notify(step)
    if has_partial:
        state = step_imex(state, params, spec, partial, config.cfl_safety)
        notify(total)
    return state


# ---------------------------------------------------------------------------
# Galerkin projection onto low Laplacian shells


def laplacian_shells(grid: Grid) -> tuple:
    """Distinct values of k1^2 + k2^2 inside the dealias mask, sorted.

    Shell s corresponds to the Laplacian eigenvalue (2 pi)^2 s; the
    first shell (s = 0) is the constant mode.
    """
    m2 = grid.modes_x**2 + grid.modes_y**2
    return tuple(int(s) for s in np.unique(m2[grid.dealias_mask]))


def galerkin_project(state: State, m: int) -> State:
    """Keep only the first m distinct Laplacian eigenvalue shells.

    ``m`` indexes the sorted distinct eigenvalues (m = 1 keeps the mean
    alone); passing the full shell count is the identity on dealiased
    states.  The projection is a mode mask, so it is idempotent and
    commutes with the Leray projector.
    """
    shells = laplacian_shells(state.grid)
    if not (1 <= m <= len(shells)):
        raise ValueError(
            f"shell index m must lie in [1, {len(shells)}] for n = {state.grid.n}, got {m}"
        )
    cutoff = shells[m - 1]
    m2 = state.grid.modes_x**2 + state.grid.modes_y**2
    keep = (m2 <= cutoff) & state.grid.dealias_mask
    return State(
        state.grid,
        np.where(keep, state.u_hat, 0.0),
        np.where(keep, state.b_hat, 0.0),
        np.where(keep, state.theta_hat, 0.0),
        state.t,
    )


# ---------------------------------------------------------------------------
# built-in initial data

INITIAL_DATA_NAMES = ("taylor-green", "orszag-tang-like", "gaussian-theta", "random-smooth")

#: amplitude of the magnetic part of the taylor-green state; kept small
#: so eps * sup|curl b| stays below saturation on the epsilon ladders
#: used in the convergence studies
TAYLOR_GREEN_B_AMP = 0.15

GAUSSIAN_THETA_SIGMA = 0.1


def _zero_state(grid: Grid) -> State:
    return State(
        grid,
        np.zeros(grid.vector_shape(), dtype=complex),
        np.zeros(grid.vector_shape(), dtype=complex),
        np.zeros(grid.scalar_shape(), dtype=complex),
        0.0,
    )


def _taylor_green(grid: Grid) -> State:
    s = _zero_state(grid)
    c1, s1 = np.cos(2 * np.pi * grid.x1), np.sin(2 * np.pi * grid.x1)
    c2, s2 = np.cos(2 * np.pi * grid.x2), np.sin(2 * np.pi * grid.x2)
    u = np.stack([s1 * c2, -c1 * s2])
    b = TAYLOR_GREEN_B_AMP * np.stack([s1 * s2, c1 * c2])
    s.u_hat = spectral.apply_mask(grid, spectral.to_spectral(grid, u))
    s.b_hat = spectral.apply_mask(grid, spectral.to_spectral(grid, b))
    return s


def _orszag_tang_like(grid: Grid) -> State:
    s = _zero_state(grid)
    u = np.stack([-np.sin(2 * np.pi * grid.x2), np.sin(2 * np.pi * grid.x1)])
    b = 0.5 * np.stack([-np.sin(2 * np.pi * grid.x2), np.sin(4 * np.pi * grid.x1)])
    s.u_hat = spectral.apply_mask(grid, spectral.to_spectral(grid, u))
    s.b_hat = spectral.apply_mask(grid, spectral.to_spectral(grid, b))
    return s


def _gaussian_theta(grid: Grid) -> State:
    s = _zero_state(grid)
    theta = np.zeros(grid.scalar_shape())
    sig2 = GAUSSIAN_THETA_SIGMA**2
    # periodize by summing over neighbor images; the bump is narrow
    # enough that one layer reaches machine precision
    for i in (-1, 0, 1):
        for j in (-1, 0, 1):
            d2 = (grid.x1 - 0.5 - i) ** 2 + (grid.x2 - 0.5 - j) ** 2
            theta += np.exp(-d2 / (2.0 * sig2))
    s.theta_hat = spectral.apply_mask(grid, spectral.to_spectral(grid, theta))
    return s


def _random_smooth(grid: Grid, seed: int) -> State:
    rng = np.random.default_rng(seed)
    kmag2 = (grid.modes_x**2 + grid.modes_y**2).astype(float)
    amp = (1.0 + kmag2) ** -2  # |k|^-4 spectral decay

    def draw_scalar():
        raw = rng.standard_normal(grid.scalar_shape()) + 1j * rng.standard_normal(
            grid.scalar_shape()
        )
        f = spectral.symmetrize(spectral.apply_mask(grid, amp * raw))
        return f

    u = np.stack([draw_scalar(), draw_scalar()])
    u = spectral.leray_project(grid, u, zero_mean=True)
    b = np.stack([draw_scalar(), draw_scalar()])
    b = spectral.leray_project(grid, b, zero_mean=True)
    th = draw_scalar()

    def unit(f):
        norm = spectral.l2_norm(f)
        return f / norm if norm > 0 else f

    return State(grid, unit(u), unit(b), unit(th), 0.0)


def builtin_initial_data(name: str, grid: Grid, seed: int = 0) -> State:
    """Construct a named initial state; '+' combines states additively.

    Available names: taylor-green (velocity vortex plus a weak
    solenoidal magnetic cell), orszag-tang-like (shear flow with a
    mixed-scale magnetic field), gaussian-theta (temperature bump with
    positive mean, u = b = 0), random-smooth (seeded fields with |k|^-4
    decay, unit norms).  All states satisfy the solenoidality, zero
    mean and dealias invariants.
    """
    parts = [p.strip() for p in name.split("+")]
    out = _zero_state(grid)
    for part in parts:
        if part == "taylor-green":
            s = _taylor_green(grid)
        elif part == "orszag-tang-like":
            s = _orszag_tang_like(grid)
        elif part == "gaussian-theta":
            s = _gaussian_theta(grid)
        elif part == "random-smooth":
            s = _random_smooth(grid, seed)
        else:
            raise ValueError(
                f"unknown initial data {part!r}; choose from {INITIAL_DATA_NAMES} "
                "or combine with '+'"
            )
        out.u_hat = out.u_hat + s.u_hat
        out.b_hat = out.b_hat + s.b_hat
        out.theta_hat = out.theta_hat + s.theta_hat
    out.check_invariants()
    return out
