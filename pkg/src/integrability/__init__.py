"""Recover utility and expenditure functions from demand functions."""

__version__ = "0.1.0"

from .compensation import CompensationPath, Status, endpoint, reverse_check, solve_path
from .demand import Box, DemandSpec, PriceIncome, check_walras, evaluate, range_probe, register_demand
from .function_space import gronwall_check, lipschitz_estimate, rho, utility_convergence_experiment
from .inverse import g_sample, invert, price_floor_probe
from .recovery import boundary_v, concavity_probe, expenditure, recover_u, shephard_residual
from .revealed import strong_axiom_check, weak_axiom_check
from .slutsky import check_S_NSD, jacobian_fd, slutsky_matrix
