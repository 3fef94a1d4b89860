"""
Projected (DP-)GDA with averaged iterates

Each step evaluates both empirical gradients at (w_t, v_t), adds the noise pair
(b_w drawn before b_v from one stream), then descends on w, ascends on v and
projects onto the feasible balls. The output averages the T iterates the run
produces.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from errors import AdjacencyError, ConfigError, InvalidInputError, PrivacyVerificationError
from numerics import RngState, as_vector, project_ball, sample_gaussian
from privacy import NoisePlan
from problem import Dataset, ProblemInstance

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Schedule:
    """Step sizes eta_t = 1 / (rho (t + phi))"""

    rho: float
    phi: float = 0.0

    def __post_init__(self):
        if not self.rho > 0:
            raise InvalidInputError(f"schedule needs rho > 0, got {self.rho}")
        if not self.phi >= 0:
            raise InvalidInputError(f"schedule needs phi >= 0, got {self.phi}")

    def eta(self, t: int) -> float:
        return 1.0 / (self.rho * (t + self.phi))


@dataclass
class Trajectory:
    avg_w: np.ndarray
    avg_v: np.ndarray
    T: int
    sigma: float
    noise_seed: Optional[RngState]
    iterates: Optional[list] = None


def gda_step(inst: ProblemInstance, S: Dataset, w_t, v_t, eta_t: float, noise_w, noise_v) -> tuple:
    """One simultaneous projected descent-ascent step"""
    noise_w = as_vector(noise_w, inst.dim_w)
    noise_v = as_vector(noise_v, inst.dim_v)
    gw, gv = inst.mean_grads(w_t, v_t, S.points)
    w_next = project_ball(w_t - eta_t * (gw + noise_w), inst.radius_w)
    v_next = project_ball(v_t + eta_t * (gv + noise_v), inst.radius_v)
    return w_next, v_next


def run(inst: ProblemInstance, S: Dataset, T: int, schedule: Schedule, noise: Optional[NoisePlan] = None,
        rng: Optional[RngState] = None, retain_iterates: bool = False) -> Trajectory:
    """Train from w = v = 0 for T steps and return the averaged pair"""
    if T < 1:
        raise ConfigError("T", f"must be a positive integer, got {T}")
    sigma = 0.0
    if noise is not None:
        if noise.T != T:
            raise ConfigError("T", f"noise plan was calibrated for T={noise.T}, run asked for T={T}")
        sigma = noise.sigma
        if sigma > 0 and not noise.valid:
            raise PrivacyVerificationError(
                f"noise plan sigma={sigma:.6g} does not meet delta={noise.budget.delta:g} "
                f"(achieved {noise.achieved_delta:.3e})"
            )
    if sigma > 0 and rng is None:
        raise InvalidInputError("a noisy run needs an RngState")

    start_rng = rng
    w = np.zeros(inst.dim_w)
    v = np.zeros(inst.dim_v)
    zero_w, zero_v = np.zeros(inst.dim_w), np.zeros(inst.dim_v)
    sum_w, sum_v = np.zeros(inst.dim_w), np.zeros(inst.dim_v)
    iterates = [] if retain_iterates else None

    for t in range(1, T + 1):
        if sigma > 0:
            b_w, rng = sample_gaussian(inst.dim_w, sigma, rng)
            b_v, rng = sample_gaussian(inst.dim_v, sigma, rng)
        else:
            b_w, b_v = zero_w, zero_v
        w, v = gda_step(inst, S, w, v, schedule.eta(t), b_w, b_v)
        sum_w += w
        sum_v += v
        if iterates is not None:
            iterates.append((w, v))

    logger.debug("[GDA] finished T=%d sigma=%.6g", T, sigma)
    return Trajectory(avg_w=sum_w / T, avg_v=sum_v / T, T=T, sigma=sigma,
                      noise_seed=start_rng, iterates=iterates)


def differing_positions(S: Dataset, S_adj: Dataset) -> list:
    if S.points.shape != S_adj.points.shape:
        raise AdjacencyError(f"datasets have shapes {S.points.shape} and {S_adj.points.shape}")
    return [int(i) for i in np.nonzero(np.any(S.points != S_adj.points, axis=1))[0]]


def coupled_runs(inst: ProblemInstance, S: Dataset, S_adj: Dataset, T: int, schedule: Schedule,
                 noise: Optional[NoisePlan], shared_rng: Optional[RngState]) -> tuple:
    """Runs on adjacent datasets that consume the identical noise sequence"""
    diff = differing_positions(S, S_adj)
    if len(diff) > 1:
        raise AdjacencyError(f"datasets differ in {len(diff)} positions: {diff[:5]}")
    first = run(inst, S, T, schedule, noise, shared_rng)
    second = run(inst, S_adj, T, schedule, noise, shared_rng)
    return first, second
