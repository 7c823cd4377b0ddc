"""Pseudo-spectral solver and verification suite for 2D magneto-
Boussinesq flow whose Ohmic heating term is tamed by a calming
function.

The package is organized as:

* ``spectral``     Fourier grids, transforms, dealiased products, norms
* ``calming``      the calming function families and their certified
                   constants
* ``dynamics``     state, right-hand side, integrating-factor stepper,
                   Galerkin projection, built-in initial data
* ``diagnostics``  energy records, budget and identity checks
* ``experiments``  Riccati toy model, epsilon convergence sweeps
* ``config``/``storage``/``cli``   run configs, file formats, CLI
"""

from .calming import CalmingSpec, constants_for, verify_properties
from .diagnostics import EnergyRecord, check_energy_budget, check_identities, record
from .dynamics import (
    PhysParams,
    State,
    StepperConfig,
    builtin_initial_data,
    galerkin_project,
    rhs_nonlinear,
    simulate,
    step_imex,
)
from .experiments import (
    RiccatiCase,
    SweepPlan,
    convergence_sweep,
    fit_rate,
    riccati_closed_form,
    riccati_integrate,
)
from .spectral import Grid

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "CalmingSpec",
    "constants_for",
    "verify_properties",
    "PhysParams",
    "State",
    "StepperConfig",
    "rhs_nonlinear",
    "step_imex",
    "simulate",
    "galerkin_project",
    "builtin_initial_data",
    "EnergyRecord",
    "record",
    "check_energy_budget",
    "check_identities",
    "RiccatiCase",
    "riccati_closed_form",
    "riccati_integrate",
    "SweepPlan",
    "convergence_sweep",
    "fit_rate",
    "__version__",
]
