"""Energy accounting and structural identity checks.

All quantities are computed spectrally from the state coefficients.
Because the dynamical fields are confined to the dealias mask and
products are formed on the 3/2 quadrature grid, the pairings used here
agree with exact integrals of the underlying trigonometric polynomials;
the only quadrature caveat is the non-polynomial temperature source,
whose retained-band aliasing is part of the spatial discretization.

The discrete L2 balance is

    d/dt (1/2)(|u|^2 + |b|^2 + |th|^2) + dissipation
        = buoyancy_input + ohmic_input

and holds for the semi-discrete system exactly, so the per-step
residual measured by ``check_energy_budget`` is purely a time
discretization effect of second order.

H2 norms are recorded for inspection but no H2 growth bound is
enforced: the constants in the corresponding a priori estimate are not
pinned down explicitly, so there is no number to check against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import calming, spectral
from .calming import CalmingSpec
from .dynamics import PhysParams, State, ohmic_source_spectrum
from .spectral import Grid

__all__ = [
    "EnergyRecord",
    "IdentityReport",
    "record",
    "check_energy_budget",
    "check_identities",
    "calming_gap",
    "gronwall_envelope",
    "check_gronwall",
    "resolution_tail_ratio",
    "BUDGET_TOLERANCE_COEFF",
    "ENERGY_CSV_COLUMNS",
]

#: documented constant c in the budget tolerance c * dt^2 * scale
BUDGET_TOLERANCE_COEFF = 100.0

ENERGY_CSV_COLUMNS = (
    "t",
    "l2_u",
    "l2_b",
    "l2_theta",
    "h1_u",
    "h1_b",
    "h1_theta",
    "h2_u",
    "h2_b",
    "ohmic_input",
    "buoyancy_input",
    "dissipation",
)


@dataclass(frozen=True)
class EnergyRecord:
    """One diagnostics row: squared norms and instantaneous fluxes.

    l2_* are squared L2 norms, h1_*/h2_* squared Sobolev seminorms.
    ohmic_input is the pairing of alpha mu zeta(|curl b|)|curl b| with
    theta, buoyancy_input the pairing of g theta e2 with u, and
    dissipation is nu |grad u|^2 + mu |grad b|^2 + kappa |grad th|^2.
    Serialization order follows ENERGY_CSV_COLUMNS.
    """

    t: float
    l2_u: float
    l2_b: float
    l2_theta: float
    h1_u: float
    h1_b: float
    h1_theta: float
    h2_u: float
    h2_b: float
    ohmic_input: float
    buoyancy_input: float
    dissipation: float

    def total_energy(self) -> float:
        """(1/2) (|u|^2 + |b|^2 + |theta|^2)."""
        return 0.5 * (self.l2_u + self.l2_b + self.l2_theta)

    def csv_row(self) -> str:
        return ",".join(repr(getattr(self, name)) for name in ENERGY_CSV_COLUMNS)

    @staticmethod
    def csv_header() -> str:
        return ",".join(ENERGY_CSV_COLUMNS)

    @staticmethod
    def from_csv_row(line: str) -> "EnergyRecord":
        parts = line.strip().split(",")
        if len(parts) != len(ENERGY_CSV_COLUMNS):
            raise ValueError(f"expected {len(ENERGY_CSV_COLUMNS)} columns, got {len(parts)}")
        return EnergyRecord(**{k: float(v) for k, v in zip(ENERGY_CSV_COLUMNS, parts)})


def record(state: State, params: PhysParams, spec: CalmingSpec) -> EnergyRecord:
    """Instantaneous energy/flux diagnostics of a state."""
    grid = state.grid
    u, b, th = state.u_hat, state.b_hat, state.theta_hat
    h1u = spectral.h1_seminorm(grid, u) ** 2
    h1b = spectral.h1_seminorm(grid, b) ** 2
    h1t = spectral.h1_seminorm(grid, th) ** 2
    source = ohmic_source_spectrum(grid, b, spec, params.alpha * params.mu)
    return EnergyRecord(
        t=state.t,
        l2_u=spectral.l2_norm(u) ** 2,
        l2_b=spectral.l2_norm(b) ** 2,
        l2_theta=spectral.l2_norm(th) ** 2,
        h1_u=h1u,
        h1_b=h1b,
        h1_theta=h1t,
        h2_u=spectral.h2_seminorm(grid, u) ** 2,
        h2_b=spectral.h2_seminorm(grid, b) ** 2,
        ohmic_input=spectral.inner(source, th),
        buoyancy_input=params.g * spectral.inner(th, u[1]),
        dissipation=params.nu * h1u + params.mu * h1b + params.kappa * h1t,
    )


@dataclass(frozen=True)
class IdentityReport:
    """Residual of one identity against its tolerance."""

    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance


def check_energy_budget(
    prev: EnergyRecord, nxt: EnergyRecord, dt: float
) -> IdentityReport:
    """Per-step discrete L2 balance check.

    Compares the energy difference quotient against the trapezoid
    average of (inputs - dissipation).  Tolerance is
    BUDGET_TOLERANCE_COEFF * dt^2 * scale with scale the largest of the
    energies, fluxes and 1; the residual itself is returned so callers
    can fit its order in dt.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    de = (nxt.total_energy() - prev.total_energy()) / dt
    flux_prev = prev.buoyancy_input + prev.ohmic_input - prev.dissipation
    flux_next = nxt.buoyancy_input + nxt.ohmic_input - nxt.dissipation
    residual = abs(de - 0.5 * (flux_prev + flux_next))
    scale = max(
        1.0,
        prev.total_energy(),
        nxt.total_energy(),
        prev.dissipation,
        nxt.dissipation,
        abs(prev.buoyancy_input) + abs(prev.ohmic_input),
        abs(nxt.buoyancy_input) + abs(nxt.ohmic_input),
    )
    return IdentityReport(
        name="l2_budget",
        residual=float(residual),
        tolerance=BUDGET_TOLERANCE_COEFF * dt**2 * scale,
    )


# ---------------------------------------------------------------------------
# structural identities of the advection bracket


def _require_solenoidal(grid: Grid, v_hat, label: str) -> None:
    scale = max(spectral.l2_norm(v_hat), 1e-300)
    div = spectral.max_divergence(grid, v_hat)
    if div > 1e-8 * scale * grid.n:
        raise ValueError(f"{label} must be solenoidal; max divergence {div:.3e}")


def check_identities(state: State, rel_tol: float = 1e-10):
    """Antisymmetry, energy neutrality, enstrophy neutrality, Jacobi sum.

    Uses the state's u and b as the two solenoidal test fields.  Each
    report's residual is normalized: the cancelling-pair identities by
    their largest term, the single-pairing identities by a product of
    norms of the factors.  Raises if u or b is not solenoidal.
    """
    grid = state.grid
    u, b = state.u_hat, state.b_hat
    _require_solenoidal(grid, u, "u")
    _require_solenoidal(grid, b, "b")
    tiny = 1e-300

    adv_ub = spectral.advect(grid, u, b)
    adv_uu = spectral.advect(grid, u, u)
    adv_bu = spectral.advect(grid, b, u)
    adv_bb = spectral.advect(grid, b, b)

    # <(u.grad)b, u> = -<(u.grad)u, b>
    t1 = spectral.inner(adv_ub, u)
    t2 = spectral.inner(adv_uu, b)
    antisym = abs(t1 + t2) / max(abs(t1), abs(t2), tiny)

    # <(u.grad)b, b> = 0
    pairing = abs(spectral.inner(adv_ub, b))
    scale2 = max(spectral.l2_norm(adv_ub) * spectral.l2_norm(b), tiny)
    neutral = pairing / scale2

    # <(w.grad)w, Lap w> = 0 for planar solenoidal w (tested with w = u)
    au = grid.k2 * u
    enstrophy = abs(spectral.inner(adv_uu, au))
    scale3 = max(
        spectral.h1_seminorm(grid, u) * spectral.h2_seminorm(grid, u) ** 2, tiny
    )
    enstrophy_rel = enstrophy / scale3

    # <(u.grad)w, Aw> + <(w.grad)u, Aw> + <(w.grad)w, Au> = 0 with w = b
    ab = grid.k2 * b
    j1 = spectral.inner(adv_ub, ab)
    j2 = spectral.inner(adv_bu, ab)
    j3 = spectral.inner(adv_bb, au)
    jacobi = abs(j1 + j2 + j3) / max(abs(j1), abs(j2), abs(j3), tiny)

    return [
        IdentityReport("advection_antisymmetry", float(antisym), rel_tol),
        IdentityReport("advection_energy_neutral", float(neutral), rel_tol),
        IdentityReport("enstrophy_neutral", float(enstrophy_rel), rel_tol),
        IdentityReport("gradient_jacobi_sum", float(jacobi), rel_tol),
    ]


# ---------------------------------------------------------------------------
# calming gap and a priori envelope


def calming_gap(grid: Grid, b_hat, spec: CalmingSpec) -> float:
    """L2 size of the uncalmed-minus-calmed source (|j| - zeta(|j|))|j|.

    Zero for the identity family, and exactly zero for the saturating
    family while sup |curl b| stays inside its window.
    """
    j = spectral.to_quadrature(grid, spectral.curl2d(grid, b_hat))
    mag = np.abs(j)
    gap = calming.residual(spec, mag) * mag
    return float(np.sqrt(np.mean(gap**2)))


def gronwall_envelope(initial: EnergyRecord, params: PhysParams, m_eps: float, t: float) -> float:
    """A priori bound on |u|^2 + |b|^2 + |theta|^2 at time t.

    Follows from the L2 balance: buoyancy is Young-split into
    (g/2)(|u|^2 + |theta|^2) and the calmed source into
    (mu/2)|grad b|^2 + (mu alpha^2 m_eps^2 / 2)|theta|^2, the gradient
    piece absorbed by dissipation, leaving exponential growth at rate
    g + mu alpha^2 m_eps^2.
    """
    y0 = initial.l2_u + initial.l2_b + initial.l2_theta
    rate = params.g + params.mu * params.alpha**2 * m_eps**2
    return y0 * float(np.exp(rate * t))


def check_gronwall(records, params: PhysParams, m_eps: float) -> IdentityReport:
    """Worst envelope violation over a sequence of records."""
    records = list(records)
    if not records:
        raise ValueError("need at least one record")
    first = records[0]
    worst = 0.0
    for rec in records:
        bound = gronwall_envelope(first, params, m_eps, rec.t - first.t)
        value = rec.l2_u + rec.l2_b + rec.l2_theta
        worst = max(worst, value - bound)
    return IdentityReport("gronwall_envelope", float(worst), 0.0)


def resolution_tail_ratio(state: State, band: float = 0.75) -> float:
    """Peak coefficient magnitude in the outer retained shells over the
    global peak, across u, b and theta.

    The outer band covers integer modes with max(|k1|, |k2|) at or
    above ``band`` times the largest retained mode.  Small values mean
    the dealiased resolution is not being stressed.
    """
    grid = state.grid
    kmax = grid.kmax_retained
    cut = int(np.ceil(band * kmax))
    kinf = np.maximum(np.abs(grid.modes_x), np.abs(grid.modes_y))
    outer = (kinf >= cut) & grid.dealias_mask
    peak = 0.0
    tail = 0.0
    for field in (state.u_hat, state.b_hat, state.theta_hat):
        mag = np.abs(field)
        peak = max(peak, float(mag.max()))
        if field.ndim == 3:
            tail = max(tail, float(mag[:, outer].max()))
        else:
            tail = max(tail, float(mag[outer].max()))
    if peak == 0.0:
        return 0.0
    return tail / peak
