"""
Gaussian noise calibration and moments-accountant verification

sigma = c * G * sqrt(T log(1/delta)) / (n epsilon). The accountant bounds the
log moment of one noisy full-batch step by 2 G^2 lam (lam + 1) / (n^2 sigma^2),
composes additively over steps, and converts to delta with
delta = min over integer lam of exp(alpha(lam) - lam * epsilon).

The w and v parameters each release T noisy gradients with the same sigma, so
a plan is verified against 2T composed mechanisms.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np

from errors import BudgetError, DomainError, PrivacyVerificationError

logger = logging.getLogger(__name__)

LAMBDA_MAX = 256

# Relative gap under which two lambda candidates count as tied
TIE_TOLERANCE = 1e-12

# (n, T, epsilon, delta) points the default calibration constant must pass
CALIBRATION_GRID = tuple(product((100, 1000), (100, 10000), (0.5, 1.0, 4.0), (1e-5, 1e-6)))


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float

    def __post_init__(self):
        if not self.epsilon > 0 or not math.isfinite(self.epsilon):
            raise BudgetError(f"epsilon must be a positive finite number, got {self.epsilon}")
        if not 0.0 < self.delta < 1.0:
            raise BudgetError(f"delta must lie in (0,1), got {self.delta}")


@dataclass
class NoisePlan:
    """Calibrated noise scale plus the accountant's evidence for it"""

    sigma: float
    c: float
    T: int
    G: float
    n: int
    budget: PrivacyBudget
    achieved_delta: float = math.inf
    lambda_star: int = 0
    valid: bool = False
    stream_delta: dict = field(default_factory=dict)


def per_step_moment(lam: int, G: float, n: int, sigma: float) -> float:
    """Log-moment bound of one noisy gradient release"""
    if not sigma > 0:
        raise DomainError(f"moment is infinite for sigma={sigma}")
    return 2.0 * G * G * lam * (lam + 1) / (n * n * sigma * sigma)


def composed_moment(lam: int, G: float, n: int, sigma: float, T: int) -> float:
    return T * per_step_moment(lam, G, n, sigma)


def tail_delta(epsilon: float, G: float, n: int, sigma: float, T: int,
               lambda_max: int = LAMBDA_MAX) -> tuple:
    """
    Smallest delta the tail bound certifies at epsilon.

    Returns (delta, lambda_star). lambda_star is the smallest minimizer; values
    within TIE_TOLERANCE of the minimum are treated as ties.
    """
    if lambda_max < 1:
        raise DomainError(f"lambda_max must be at least 1, got {lambda_max}")
    lam = np.arange(1, lambda_max + 1, dtype=np.float64)
    log_delta = composed_moment(lam, G, n, sigma, T) - lam * epsilon
    best = float(log_delta.min())
    tied = np.nonzero(log_delta <= best + TIE_TOLERANCE * max(1.0, abs(best)))[0]
    lambda_star = int(tied[0]) + 1
    delta = math.exp(best) if best < 709.0 else math.inf
    return delta, lambda_star


def verify_budget(plan: NoisePlan, budget: PrivacyBudget) -> bool:
    """Check the plan against the budget and record the evidence on it"""
    if plan.sigma <= 0:
        plan.achieved_delta, plan.lambda_star, plan.valid = math.inf, 0, False
        return False
    delta, lam = tail_delta(budget.epsilon, plan.G, plan.n, plan.sigma, 2 * plan.T)
    plan.achieved_delta = delta
    plan.lambda_star = lam
    plan.valid = delta <= budget.delta
    plan.stream_delta = stream_deltas(plan)
    return plan.valid


def stream_deltas(plan: NoisePlan) -> dict:
    """
    Accountant delta of each parameter stream on its own (T mechanisms each).
    Both streams draw at the same sigma, so one evaluation serves w and v.
    """
    if plan.sigma <= 0:
        return {"w": math.inf, "v": math.inf}
    delta, _ = tail_delta(plan.budget.epsilon, plan.G, plan.n, plan.sigma, plan.T)
    return {"w": delta, "v": delta}


def _sigma(c, G, T, n, budget):
    return c * G * math.sqrt(T * math.log(1.0 / budget.delta)) / (n * budget.epsilon)


def calibrate_sigma(G: float, T: int, n: int, budget: PrivacyBudget, c: float = None) -> NoisePlan:
    """Noise plan for T iterations on n points, verified by the accountant"""
    if c is None:
        c = calibration_constant()
    if not (G > 0 and T >= 1 and n >= 1 and c > 0):
        raise DomainError(f"calibration needs G, T, n, c > 0, got G={G}, T={T}, n={n}, c={c}")
    plan = NoisePlan(sigma=_sigma(c, G, T, n, budget), c=c, T=T, G=G, n=n, budget=budget)
    verify_budget(plan, budget)
    logger.debug("[Privacy] sigma=%.6g c=%.6g delta=%.3e lambda*=%d valid=%s",
                 plan.sigma, c, plan.achieved_delta, plan.lambda_star, plan.valid)
    return plan


def _passes(c, grid) -> bool:
    for n, T, epsilon, delta in grid:
        budget = PrivacyBudget(epsilon, delta)
        if not calibrate_sigma(1.0, T, n, budget, c).valid:
            return False
    return True


def search_calibration_constant(grid=CALIBRATION_GRID, lo: float = 0.01, hi: float = 64.0,
                                iterations: int = 60) -> float:
    """
    Smallest c (to bisection precision) whose calibrated sigma verifies on every grid point.

    The accountant delta only depends on G through G/sigma, so G=1 is used.
    """
    if not _passes(hi, grid):
        raise PrivacyVerificationError(f"no calibration constant up to {hi} verifies the grid")
    if _passes(lo, grid):
        return lo
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if _passes(mid, grid):
            hi = mid
        else:
            lo = mid
    logger.debug("[Privacy] calibration constant c*=%.10g", hi)
    return hi


@lru_cache(maxsize=1)
def calibration_constant() -> float:
    """Default c: the searched constant on CALIBRATION_GRID"""
    return search_calibration_constant()
