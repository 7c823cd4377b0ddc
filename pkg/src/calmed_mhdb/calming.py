"""Bounded Lipschitz approximations of the identity map on R.

Each family is an odd function zeta depending on a parameter
epsilon > 0 with zeta(x) -> x pointwise as epsilon -> 0.  The solver
feeds |curl b| through one of these before it enters the temperature
source term, which is what keeps that term bounded.  The ``identity``
family is the unmodified map x -> x and recovers the original system.

Families
--------
identity     x
rational1    x / (1 + eps |x|)
rational2    x / (1 + eps^2 x^2)
arctan       arctan(eps x) / eps
saturating   odd extension of a C^1 ramp that equals x for
             |x| < 1/eps and saturates at 3/(2 eps) beyond 2/eps

Every non-identity family satisfies, with constants reported by
``constants_for``:

* boundedness        |zeta(x)| + |zeta'(x)| <= m_eps
* Lipschitz          |zeta(x) - zeta(y)| <= l_eps |x - y|
* residual decay     |x - zeta(x)| <= c_resid * eps^gamma * |x|^beta
* oddness            zeta(-x) = -zeta(x)

``verify_properties`` certifies the constants by dense sampling and is
wired into the command line ``verify`` subcommand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FAMILIES",
    "CalmingSpec",
    "CalmingConstants",
    "PropertyReport",
    "evaluate",
    "derivative",
    "residual",
    "constants_for",
    "verify_properties",
]

FAMILIES = ("identity", "rational1", "rational2", "arctan", "saturating")

#: boundedness / Lipschitz / residual checks pass when no sampled
#: violation exceeds this
VERIFY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class CalmingSpec:
    """A calming family together with its strength parameter."""

    family: str
    epsilon: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(
                f"unknown calming family {self.family!r}; choose from {FAMILIES}"
            )
        if self.family == "identity":
            if self.epsilon != 0.0:
                raise ValueError("identity calming takes epsilon = 0")
        elif not (self.epsilon > 0.0 and np.isfinite(self.epsilon)):
            raise ValueError(
                f"family {self.family!r} needs a finite epsilon > 0, "
                f"got {self.epsilon}"
            )

    @property
    def is_identity(self) -> bool:
        return self.family == "identity"


@dataclass(frozen=True)
class CalmingConstants:
    """Certified constants for one (family, epsilon) pair."""

    m_eps: float   # bound on |zeta| + |zeta'|
    l_eps: float   # Lipschitz constant
    gamma: float   # residual decay order in epsilon
    beta: float    # residual growth order in |x|
    c_resid: float # residual prefactor


def evaluate(spec: CalmingSpec, x):
    """zeta(x), elementwise on arrays."""
    x = np.asarray(x, dtype=float)
    eps = spec.epsilon
    if spec.family == "identity":
        return x + 0.0
    if spec.family == "rational1":
        return x / (1.0 + eps * np.abs(x))
    if spec.family == "rational2":
        return x / (1.0 + eps**2 * x**2)
    if spec.family == "arctan":
        return np.arctan(eps * x) / eps
    # saturating: odd extension of the ramp q(r); q(r) = r exactly on
    # [0, 1/eps), so inside that window zeta(x) reproduces x bit for bit
    r = np.abs(x)
    lo = 1.0 / eps
    q = np.where(
        r < lo,
        r,
        np.where(r < 2.0 * lo, -0.5 * eps * (r - 2.0 * lo) ** 2 + 1.5 * lo, 1.5 * lo),
    )
    return np.sign(x) * q


def derivative(spec: CalmingSpec, x):
    """zeta'(x); one-sided limits agree at the saturating breakpoints."""
    x = np.asarray(x, dtype=float)
    eps = spec.epsilon
    if spec.family == "identity":
        return np.ones_like(x)
    if spec.family == "rational1":
        return 1.0 / (1.0 + eps * np.abs(x)) ** 2
    if spec.family == "rational2":
        t2 = eps**2 * x**2
        return (1.0 - t2) / (1.0 + t2) ** 2
    if spec.family == "arctan":
        return 1.0 / (1.0 + eps**2 * x**2)
    r = np.abs(x)
    lo = 1.0 / eps
    return np.where(r < lo, 1.0, np.where(r < 2.0 * lo, -eps * (r - 2.0 * lo), 0.0))


def residual(spec: CalmingSpec, x):
    """x - zeta(x), in closed form where cancellation would bite."""
    x = np.asarray(x, dtype=float)
    eps = spec.epsilon
    if spec.family == "identity":
        return np.zeros_like(x)
    if spec.family == "rational1":
        # x - x/(1 + eps|x|) without subtractive cancellation
        return eps * x * np.abs(x) / (1.0 + eps * np.abs(x))
    if spec.family == "rational2":
        return eps**2 * x**3 / (1.0 + eps**2 * x**2)
    if spec.family == "arctan":
        return x - np.arctan(eps * x) / eps
    return x - evaluate(spec, x)


def constants_for(spec: CalmingSpec) -> CalmingConstants:
    """Certified (m_eps, l_eps, gamma, beta, c_resid) for the family.

    The identity family is exempt from calming bounds (it has no finite
    sup) and is rejected here.
    """
    eps = spec.epsilon
    if spec.family == "identity":
        raise ValueError("identity calming has no finite bound constants")
    if spec.family == "rational1":
        return CalmingConstants(1.0 / eps + 1.0, 1.0, 1.0, 2.0, 1.0)
    if spec.family == "rational2":
        # sup |zeta| = 1/(2 eps) at |x| = 1/eps; residual admits both
        # (gamma=2, beta=3, c=1) and (gamma=1, beta=2, c=1/2); the
        # higher-order pair is stored
        return CalmingConstants(0.5 / eps + 1.0, 1.0, 2.0, 3.0, 1.0)
    if spec.family == "arctan":
        return CalmingConstants(0.5 * np.pi / eps + 1.0, 1.0, 2.0, 3.0, 1.0 / 3.0)
    # saturating
    return CalmingConstants(1.5 / eps + 1.0, 1.0, 1.0, 2.0, 1.0)


@dataclass(frozen=True)
class PropertyReport:
    """Worst sampled violations of the four calming properties.

    Violations are signed slack (quantity minus bound); a property
    holds when its entry does not exceed ``tolerance``.
    """

    spec: CalmingSpec
    constants: CalmingConstants
    sample_count: int
    x_max: float
    bound_violation: float
    lipschitz_violation: float
    residual_violation: float
    oddness_violation: float
    tolerance: float = VERIFY_TOLERANCE

    @property
    def passed(self) -> bool:
        return (
            self.bound_violation <= self.tolerance
            and self.lipschitz_violation <= self.tolerance
            and self.residual_violation <= self.tolerance
            and self.oddness_violation <= self.tolerance
        )

    def worst(self) -> float:
        return max(
            self.bound_violation,
            self.lipschitz_violation,
            self.residual_violation,
            self.oddness_violation,
        )


def _sample_points(spec: CalmingSpec, sample_count: int, x_max: float, seed: int):
    xs = np.linspace(-x_max, x_max, sample_count)
    extra = [0.0]
    if spec.family == "saturating":
        lo = 1.0 / spec.epsilon
        for bp in (lo, 2.0 * lo):
            for off in (-1e-9 * bp, 0.0, 1e-9 * bp):
                if abs(bp + off) <= x_max:
                    extra.extend((bp + off, -(bp + off)))
    rng = np.random.default_rng(seed)
    randoms = rng.uniform(-x_max, x_max, size=max(64, sample_count // 4))
    return np.concatenate([xs, np.asarray(extra), randoms])


def verify_properties(
    spec: CalmingSpec,
    constants: CalmingConstants | None = None,
    sample_count: int = 4096,
    x_max: float | None = None,
    seed: int = 0,
) -> PropertyReport:
    """Certify the bound, Lipschitz, residual and oddness properties.

    Samples ``sample_count`` points densely on [-x_max, x_max] (default
    x_max = 10/eps) plus randomized pairs, and reports the worst signed
    violation of each property against ``constants`` (defaults to the
    table in ``constants_for``).
    """
    if sample_count < 2:
        raise ValueError("sample_count must be at least 2")
    if spec.is_identity:
        raise ValueError("identity calming has no bounds to verify")
    if constants is None:
        constants = constants_for(spec)
    if x_max is None:
        x_max = 10.0 / spec.epsilon

    xs = _sample_points(spec, sample_count, x_max, seed)
    zx = evaluate(spec, xs)
    dzx = derivative(spec, xs)

    bound = float(np.max(np.abs(zx) + np.abs(dzx) - constants.m_eps))

    rng = np.random.default_rng(seed + 1)
    ys = rng.uniform(-x_max, x_max, size=xs.size)
    zy = evaluate(spec, ys)
    pair_gap = np.abs(zx - zy) - constants.l_eps * np.abs(xs - ys)
    neighbor_gap = np.abs(np.diff(zx)) - constants.l_eps * np.abs(np.diff(xs))
    lipschitz = float(max(np.max(pair_gap), np.max(neighbor_gap)))

    res = np.abs(residual(spec, xs))
    res_bound = constants.c_resid * spec.epsilon**constants.gamma * np.abs(xs) ** constants.beta
    residual_v = float(np.max(res - res_bound))

    oddness = float(np.max(np.abs(evaluate(spec, -xs) + zx)))

    return PropertyReport(
        spec=spec,
        constants=constants,
        sample_count=int(xs.size),
        x_max=float(x_max),
        bound_violation=bound,
        lipschitz_violation=lipschitz,
        residual_violation=residual_v,
        oddness_violation=oddness,
    )
