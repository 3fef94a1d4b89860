"""
Exceptions raised by the DP minimax toolkit.

Every error carries the process exit code the CLI reports for it.
"""


class DpMinimaxError(Exception):
    """Base class for all toolkit errors"""

    exit_code = 1


class ConfigError(DpMinimaxError):
    """Invalid experiment configuration. Message names the key and constraint."""

    exit_code = 2

    def __init__(self, key: str, constraint: str):
        self.key = key
        self.constraint = constraint
        super().__init__(f"{key}: {constraint}")


class InvalidInputError(DpMinimaxError, ValueError):
    """Non-finite vector, dimension mismatch or similar malformed argument"""

    exit_code = 2


class DomainError(DpMinimaxError, ValueError):
    """Argument outside the admissible interval of a formula"""

    exit_code = 2


class BudgetError(DomainError):
    """Privacy budget with epsilon <= 0 or delta outside (0, 1)"""


class GeneratorError(DpMinimaxError):
    """Problem generator could not build a valid instance"""

    exit_code = 2


class AdjacencyError(DpMinimaxError):
    """Datasets passed to a coupled run differ in more than one position"""

    exit_code = 2


class NonConvergenceError(DpMinimaxError):
    """Iterative solver hit its iteration cap before reaching tolerance"""

    exit_code = 3

    def __init__(self, residual: float, iterations: int, tol: float):
        self.residual = residual
        self.iterations = iterations
        self.tol = tol
        super().__init__(
            f"no convergence after {iterations} iterations "
            f"(residual {residual:.3e} > tol {tol:.1e})"
        )


class SingularSystemError(DpMinimaxError):
    """Saddle linear system could not be solved to the required residual"""

    exit_code = 3


class PrivacyVerificationError(DpMinimaxError):
    """Noise plan does not meet its (epsilon, delta) budget"""

    exit_code = 4
