"""
Plain, primal, weak primal-dual and strong primal-dual risks

Inner sup/inf problems are rho-strongly concave/convex and are solved by
projected gradient with eta_t = 1 / (rho t), floored at 1 / L once the schedule
drops below it. Convergence is declared when the gradient-mapping residual
rho * ||x - Proj(x +/- g / rho)|| reaches the tolerance.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from errors import InvalidInputError, NonConvergenceError
from numerics import as_vector, project_ball
from problem import Dataset, ProblemInstance, QuadraticSaddle, closed_form_saddle, empirical_loss

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 10 ** 6


@dataclass
class BestResponse:
    point: np.ndarray
    value: float
    residual: float
    iterations: int


@dataclass
class RiskReport:
    plain_emp: float
    plain_pop: float
    primal_emp: float
    primal_pop: float
    strong_pd_emp: float
    strong_pd_pop: float
    weak_pd_emp: float = math.nan
    weak_pd_pop: float = math.nan
    tol: float = DEFAULT_TOL
    iterations: dict = field(default_factory=dict)
    n_eval: int = 0
    replicates: int = 1

    @property
    def plain_gap(self) -> float:
        return self.plain_pop - self.plain_emp

    @property
    def primal_gap(self) -> float:
        return self.primal_pop - self.primal_emp

    def as_row(self) -> dict:
        row = asdict(self)
        row.pop("iterations")
        row["plain_gap"] = self.plain_gap
        row["primal_gap"] = self.primal_gap
        return row


def _projected_gradient(grad, x0, radius, rho, smooth, ascent, tol, max_iter):
    sign = 1.0 if ascent else -1.0
    x = project_ball(x0, radius)
    floor = 1.0 / smooth
    for it in range(max_iter + 1):
        g = grad(x)
        residual = rho * float(np.linalg.norm(x - project_ball(x + sign * g / rho, radius)))
        if residual <= tol:
            return x, residual, it
        if it == max_iter:
            raise NonConvergenceError(residual, it, tol)
        eta = max(1.0 / (rho * (it + 1)), floor)
        x = project_ball(x + sign * eta * g, radius)


def _as_sets(data, count) -> list:
    if isinstance(data, Dataset):
        return [data] * count
    data = list(data)
    if len(data) != count:
        raise InvalidInputError(f"need one dataset per replicate, got {len(data)} for {count}")
    return data


def _best_response(inst, fixed, data, tol, max_iter, ascent, start=None) -> BestResponse:
    """
    Best response to a list of fixed opponents, each paired with its dataset.
    The objective is the average of the per-pair empirical risks.
    """
    if ascent:
        dim, radius = inst.dim_v, inst.radius_v

        def grad(x):
            return np.mean([inst.mean_grads(u, x, S.points)[1] for u, S in zip(fixed, data)], axis=0)

        def value(x):
            return float(np.mean([empirical_loss(inst, u, x, S) for u, S in zip(fixed, data)]))
    else:
        dim, radius = inst.dim_w, inst.radius_w

        def grad(x):
            return np.mean([inst.mean_grads(x, u, S.points)[0] for u, S in zip(fixed, data)], axis=0)

        def value(x):
            return float(np.mean([empirical_loss(inst, x, u, S) for u, S in zip(fixed, data)]))

    x0 = np.zeros(dim) if start is None else as_vector(start, dim)
    x, residual, iterations = _projected_gradient(grad, x0, radius, inst.rho, inst.smooth,
                                                  ascent, tol, max_iter)
    return BestResponse(point=x, value=value(x), residual=residual, iterations=iterations)


def inner_max(inst: ProblemInstance, w, data: Dataset, tol: float = DEFAULT_TOL,
              max_iter: int = DEFAULT_MAX_ITER, start=None) -> BestResponse:
    """sup over v of L_data(w, v)"""
    w = as_vector(w, inst.dim_w)
    return _best_response(inst, [w], [data], tol, max_iter, ascent=True, start=start)


def inner_min(inst: ProblemInstance, v, data: Dataset, tol: float = DEFAULT_TOL,
              max_iter: int = DEFAULT_MAX_ITER, start=None) -> BestResponse:
    """inf over w of L_data(w, v)"""
    v = as_vector(v, inst.dim_v)
    return _best_response(inst, [v], [data], tol, max_iter, ascent=False, start=start)


def strong_pd(inst: ProblemInstance, w, v, data: Dataset, tol: float = DEFAULT_TOL,
              max_iter: int = DEFAULT_MAX_ITER) -> float:
    return inner_max(inst, w, data, tol, max_iter).value - inner_min(inst, v, data, tol, max_iter).value


def weak_pd(inst: ProblemInstance, replicate_pairs: Sequence, data: Union[Dataset, Sequence[Dataset]],
            tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER, min_replicates: int = 2) -> float:
    """
    sup_v' E[L(w_r, v')] - inf_w' E[L(w', v_r)] with the expectation over
    training replicates replaced by the replicate average.

    `data` is one evaluation set shared by all replicates, or one dataset per
    replicate (the empirical form).
    """
    R = len(replicate_pairs)
    if R < max(1, min_replicates):
        raise InvalidInputError(f"weak PD risk needs at least {max(1, min_replicates)} replicates, got {R}")
    sets = _as_sets(data, R)
    ws = [as_vector(w, inst.dim_w) for w, _ in replicate_pairs]
    vs = [as_vector(v, inst.dim_v) for _, v in replicate_pairs]
    sup = _best_response(inst, ws, sets, tol, max_iter, ascent=True)
    inf = _best_response(inst, vs, sets, tol, max_iter, ascent=False)
    return sup.value - inf.value


def plain_gap(inst: ProblemInstance, w, v, S: Dataset, eval_data: Dataset) -> float:
    """Population (eval set) risk minus empirical risk at (w, v)"""
    return empirical_loss(inst, w, v, eval_data) - empirical_loss(inst, w, v, S)


def primal_gap(inst: ProblemInstance, w, S: Dataset, eval_data: Dataset, tol: float = DEFAULT_TOL,
               max_iter: int = DEFAULT_MAX_ITER) -> float:
    """R(w) - R_S(w)"""
    return inner_max(inst, w, eval_data, tol, max_iter).value - inner_max(inst, w, S, tol, max_iter).value


def primal_minimum(inst: ProblemInstance, data: Dataset, tol: float = DEFAULT_TOL,
                   max_iter: int = DEFAULT_MAX_ITER) -> float:
    """inf over w of R_data(w)"""
    if isinstance(inst, QuadraticSaddle):
        w_star, v_star = closed_form_saddle(inst, data)
        return empirical_loss(inst, w_star, v_star, data)

    # R is rho-strongly convex; its gradient at w is grad_w L(w, v*(w))
    inner_tol = tol * inst.rho / (4.0 * inst.smooth)
    outer_smooth = inst.smooth * (1.0 + inst.smooth / inst.rho)
    state = {"v": np.zeros(inst.dim_v)}

    def grad(w):
        best = inner_max(inst, w, data, inner_tol, max_iter, start=state["v"])
        state["v"] = best.point
        return inst.mean_grads(w, best.point, data.points)[0]

    w, _, iterations = _projected_gradient(grad, np.zeros(inst.dim_w), inst.radius_w, inst.rho,
                                           outer_smooth, False, tol, max_iter)
    logger.debug("[Risk] primal minimum in %d outer iterations", iterations)
    return inner_max(inst, w, data, inner_tol, max_iter, start=state["v"]).value


def primal_excess(inst: ProblemInstance, w, data: Dataset, tol: float = DEFAULT_TOL,
                  max_iter: int = DEFAULT_MAX_ITER) -> float:
    """R(w) - inf_w' R(w') on the given data"""
    return inner_max(inst, w, data, tol, max_iter).value - primal_minimum(inst, data, tol, max_iter)


def g_distances(inst: ProblemInstance, traj, S: Dataset, tol: float = DEFAULT_TOL,
                max_iter: int = DEFAULT_MAX_ITER) -> tuple:
    """Distances from the averaged iterates to their empirical best responses"""
    w_best = inner_min(inst, traj.avg_v, S, tol, max_iter).point
    v_best = inner_max(inst, traj.avg_w, S, tol, max_iter).point
    return float(np.linalg.norm(w_best - traj.avg_w)), float(np.linalg.norm(v_best - traj.avg_v))


def risk_report(inst: ProblemInstance, w, v, S: Dataset, eval_data: Dataset, tol: float = DEFAULT_TOL,
                max_iter: int = DEFAULT_MAX_ITER, replicate_pairs: Optional[Sequence] = None,
                replicate_sets: Optional[Sequence[Dataset]] = None, min_replicates: int = 2) -> RiskReport:
    """
    All single-pair risks. With replicate_pairs the weak PD fields are filled
    too: empirical over each replicate's own training set, population over
    the shared eval set. Without them they stay NaN.
    """
    max_emp = inner_max(inst, w, S, tol, max_iter)
    min_emp = inner_min(inst, v, S, tol, max_iter)
    max_pop = inner_max(inst, w, eval_data, tol, max_iter)
    min_pop = inner_min(inst, v, eval_data, tol, max_iter)
    weak_emp = weak_pop = math.nan
    replicates = 1
    if replicate_pairs is not None:
        replicates = len(replicate_pairs)
        if replicate_sets is None or len(replicate_sets) != replicates:
            raise InvalidInputError("replicate_pairs needs one training set per replicate")
        weak_emp = weak_pd(inst, replicate_pairs, list(replicate_sets), tol, max_iter, min_replicates)
        weak_pop = weak_pd(inst, replicate_pairs, eval_data, tol, max_iter, min_replicates)
    return RiskReport(
        plain_emp=empirical_loss(inst, w, v, S),
        plain_pop=empirical_loss(inst, w, v, eval_data),
        primal_emp=max_emp.value,
        primal_pop=max_pop.value,
        strong_pd_emp=max_emp.value - min_emp.value,
        strong_pd_pop=max_pop.value - min_pop.value,
        weak_pd_emp=weak_emp,
        weak_pd_pop=weak_pop,
        tol=tol,
        iterations={
            "max_emp": max_emp.iterations, "min_emp": min_emp.iterations,
            "max_pop": max_pop.iterations, "min_pop": min_pop.iterations,
        },
        n_eval=eval_data.n,
        replicates=replicates,
    )
