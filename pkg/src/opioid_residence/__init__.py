"""Stochastic prescription-opioid epidemic model with residence-time feedback.

Submodules
----------
model
    Drift, addiction-free equilibrium, Jacobian, 3x3 eigenvalues, R0.
sde
    Euler-Maruyama paths with noise on the susceptible fraction only.
control
    Riccati feedback (Newton-Kleinman) and bang-bang policies.
exitstats
    Domains, first exits, Monte Carlo ensembles, survival and exit rates.
quasipotential
    Minimum of a quadratic form over a polyhedral boundary.
eigen
    Upwind finite-difference generator and its principal eigenpair.
cli
    ``opioid-residence`` command-line tool.
"""
from .control import REPORTED_GAIN, RiccatiSolution, bang_bang_policy, feedback_gain, linear_policy, solve_care
from .domain import Domain
from .eigen import GridSpec, discretize_generator, eigen_vs_montecarlo, gradient_field, principal_eigenvalue
from .exceptions import ComputationError, SimulationError, ValidationError
from .exitstats import (
    ExitEnsemble,
    estimate_exit_rate,
    first_exit,
    mean_exit_time,
    run_ensemble,
    survival_curve,
)
from .model import (
    EpidemicParams,
    LinearModel,
    PopulationState,
    addiction_free_equilibrium,
    drift,
    eigenvalues_3x3,
    jacobian,
    linearize,
    reproduction_number,
)
from .quasipotential import log_residence_scaling, matrix_norm_spectral, quasipotential
from .rng import gaussian_stream
from .sde import ActuationMatrix, LinearDynamics, ModelDynamics, Policy, SdeConfig, em_step, simulate_path

__version__ = "0.1.0"
