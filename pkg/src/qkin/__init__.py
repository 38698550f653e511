"""Nonextensive quantum kinetics: q-entropy production under a pairwise
collision master equation, and q-deformed Fermi-Dirac/Bose-Einstein
equilibria."""
from .qmath import DomainError, QIndex, exp_q, ln_q, q_difference, q_product, weighted_qlog
from .gas import GasState, LevelGrid, LevelGroup, Statistics, moments, occupancy_ratio, random_state
from .kernel import (
    CollisionChannel,
    CollisionKernel,
    RateSpec,
    build_kernel,
    collision_rate_Z,
    enumerate_channels,
    kernel_from_csv,
    kernel_to_csv,
)
from .entropy import (
    EntropyDiagnostics,
    PhiGrid,
    entropy_Sq,
    entropy_rate_chain,
    entropy_rate_symmetric,
    entropy_rate_weighted,
    n_tilde,
    phi,
    scan_phi_domain,
)
from .dynamics import IntegratorConfig, Trajectory, rhs, run, step
from .equilibrium import EquilibriumParams, occupation_q, solve_params, stationarity_residuals

__version__ = "0.1.0"
