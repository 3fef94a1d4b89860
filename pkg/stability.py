"""
Empirical argument stability from coupled adjacent-dataset runs
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import linregress

from bounds import BoundInputs, theorem2_gamma, theorem2_gamma_crude
from errors import InvalidInputError
from numerics import RngState, as_vector, sample_uniform, spawn
from optimizer import coupled_runs
from problem import Dataset
from risk import DEFAULT_TOL, g_distances
from workers import parallel_map

logger = logging.getLogger(__name__)

QUANTILES = (0.5, 0.9, 0.99)


@dataclass
class StabilityReport:
    samples: list
    theoretical_gamma: float
    crude_gamma: float
    containment_rate: float
    max_distance: float
    quantiles: dict
    n: int
    T: int
    sigma: float
    seed: int
    zeta: float
    extra: dict = field(default_factory=dict)

    @property
    def distances(self) -> np.ndarray:
        return np.array([s["distance"] for s in self.samples])


def make_adjacent(S: Dataset, i: int, z_new) -> Dataset:
    """Copy of S with position i replaced by z_new"""
    if not 0 <= i < S.n:
        raise InvalidInputError(f"index {i} outside [0, {S.n})")
    z_new = as_vector(z_new, S.dim)
    if not S.in_ball(z_new):
        raise InvalidInputError(f"replacement point lies outside the data ball of radius {S.data_radius}")
    points = np.array(S.points)
    points[i] = z_new
    return Dataset(points=points, seed=S.seed, data_radius=S.data_radius, ball_dims=S.ball_dims)


def _bound_inputs(inst, S, T, sigma, zeta, g_w, g_v) -> BoundInputs:
    return BoundInputs(G=inst.lipschitz, rho=inst.rho, L=inst.smooth, M_ell=inst.loss_bound,
                       M_W=inst.radius_w, M_V=inst.radius_v, sigma=sigma, T=T, n=S.n, p=inst.p,
                       zeta=zeta, g_w=g_w, g_v=g_v)


def _coupled_sample(task) -> dict:
    inst, S, T, schedule, noise, i, j, z_new, noise_rng, zeta, tol = task
    S_adj = make_adjacent(S, i, z_new)
    first, second = coupled_runs(inst, S, S_adj, T, schedule, noise, noise_rng)
    distance = float(np.linalg.norm(first.avg_w - second.avg_w) + np.linalg.norm(first.avg_v - second.avg_v))
    g_w, g_v = g_distances(inst, first, S, tol)
    gamma = theorem2_gamma(_bound_inputs(inst, S, T, first.sigma, zeta, g_w, g_v))
    return {"index": i, "replacement": j, "distance": distance, "g_w": g_w, "g_v": g_v, "gamma": gamma}


def loglog_slope(ns, values) -> float:
    """Least-squares slope of log(values) against log(ns)"""
    values = np.asarray(values, dtype=np.float64)
    if np.any(values <= 0):
        raise InvalidInputError("log-log slope needs positive values")
    return float(linregress(np.log(np.asarray(ns, dtype=np.float64)), np.log(values)).slope)


def sample_indices(n: int, count: int, rng: RngState) -> list:
    """count distinct positions out of n, chosen uniformly"""
    u, _ = sample_uniform(n, rng)
    return [int(i) for i in np.argsort(u, kind="stable")[:count]]


def empirical_gamma(inst, S: Dataset, T: int, schedule, noise, num_indices: int, num_replacements: int,
                    rng: RngState, zeta: float = 0.1, tol: float = DEFAULT_TOL, workers: int = 1) -> StabilityReport:
    """
    Coupled runs on S and S with one point replaced by a fresh draw.

    Each (index, replacement) pair owns a noise stream shared by its two runs.
    The reported max understates the sup over all adjacent pairs.
    """
    if not 1 <= num_indices <= S.n:
        raise InvalidInputError(f"num_indices must lie in [1, {S.n}], got {num_indices}")
    if num_replacements < 1:
        raise InvalidInputError(f"num_replacements must be positive, got {num_replacements}")

    tasks = []
    for i in sample_indices(S.n, num_indices, spawn(rng, "indices")):
        for j in range(num_replacements):
            z_new, _ = inst.sample_data(1, spawn(rng, f"replace/{i}/{j}"))
            tasks.append((inst, S, T, schedule, noise, i, j, z_new[0], spawn(rng, f"noise/{i}/{j}"), zeta, tol))

    samples = parallel_map(_coupled_sample, tasks, workers)
    distances = np.array([s["distance"] for s in samples])
    gammas = np.array([s["gamma"] for s in samples])
    sigma = noise.sigma if noise is not None else 0.0
    crude = theorem2_gamma_crude(_bound_inputs(inst, S, T, sigma, zeta, 0.0, 0.0))

    report = StabilityReport(
        samples=samples,
        theoretical_gamma=float(np.median(gammas)),
        crude_gamma=crude,
        containment_rate=float(np.mean(distances <= gammas)),
        max_distance=float(distances.max()),
        quantiles={q: float(np.quantile(distances, q)) for q in QUANTILES},
        n=S.n, T=T, sigma=sigma, seed=rng.seed, zeta=zeta,
    )
    logger.info("[Stability] n=%d T=%d max=%.4g containment=%.3f", S.n, T, report.max_distance,
                report.containment_rate)
    return report
