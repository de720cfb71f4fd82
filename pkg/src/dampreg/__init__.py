"""Regularization of damped central-force motion.

The package maps linearly damped Kepler, power-law and oscillator problems to
autonomous and collision-free regularized forms, integrates both sides and
cross-checks them numerically.
"""

from .algebra import Quaternion, ks_matrix, lc_matrix, quat_mul, uhat_n
from .dynamics import RhsContext, SystemId, rhs
from .integrate import IntegratorConfig, Method, Scenario, Status, integrate, integrate_pair
from .transforms import PhaseState, Regularization, RegularizedState, SingularInputError, SystemParams
from .verify import CheckKind, CheckSpec, run_check, standard_suite

__version__ = "0.1.0"

__all__ = [
    "CheckKind", "CheckSpec", "IntegratorConfig", "Method", "PhaseState", "Quaternion",
    "Regularization", "RegularizedState", "RhsContext", "Scenario", "SingularInputError",
    "Status", "SystemId", "SystemParams", "integrate", "integrate_pair", "ks_matrix",
    "lc_matrix", "quat_mul", "rhs", "run_check", "standard_suite", "uhat_n",
]
