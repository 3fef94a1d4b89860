"""
Strongly-convex-strongly-concave minimax losses with certified constants

Two families are provided:
- QuadraticSaddle: l(w, v; z) = rho/2 ||w - Az||^2 + w'Bv - rho/2 ||v - Cz||^2 + offset,
  with analytic constants and a closed-form empirical saddle.
- AucSaddle: the square-loss AUC minimax surrogate with l2 regularizers on both
  blocks, minimization block (w, a, b) and scalar maximization block alpha.
  Its constants are estimated by sampling and inflated by a safety factor.

Data points live in a centered ball; each instance draws its own data.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from errors import DomainError, GeneratorError, InvalidInputError, SingularSystemError
from numerics import PROJECTION_SLACK, RngState, as_vector, derive_seed, sample_ball, sample_gaussian, sample_uniform

logger = logging.getLogger(__name__)

# Inflation applied to sampled (not analytic) constants
SAFETY_FACTOR = 1.25

# Residual accepted from the dense saddle solve
SADDLE_RESIDUAL_TOL = 1e-10


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Dataset:
    """Ordered sample z_1..z_n. Rows of `points` are data points."""

    points: np.ndarray
    seed: int
    data_radius: float
    ball_dims: int

    def __post_init__(self):
        if self.points.ndim != 2 or self.points.shape[0] < 1:
            raise InvalidInputError(f"dataset needs at least one point, got shape {self.points.shape}")
        if not np.all(np.isfinite(self.points)):
            raise InvalidInputError("dataset has non-finite entries")
        if self.points.flags.writeable:
            object.__setattr__(self, "points", _frozen(self.points))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def in_ball(self, z) -> bool:
        """True if z's constrained coordinates lie in the data ball"""
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.dim,) or not np.all(np.isfinite(z)):
            return False
        norm = float(np.linalg.norm(z[:self.ball_dims]))
        return norm <= self.data_radius * (1.0 + PROJECTION_SLACK)


class ProblemInstance:
    """
    Minimax loss with gradient oracles and certified constants.

    Subclasses implement the row-aligned batch oracles: row k of W, V and Z
    is one (w, v, z) triple.
    """

    kind = "abstract"

    def __init__(self, dim_w, dim_v, dim_z, radius_w, radius_v, data_radius, ball_dims,
                 rho, lipschitz, smooth, loss_bound):
        if rho <= 0 or smooth < rho:
            raise GeneratorError(f"need 0 < rho <= L, got rho={rho}, L={smooth}")
        self.dim_w = dim_w
        self.dim_v = dim_v
        self.dim_z = dim_z
        self.radius_w = float(radius_w)
        self.radius_v = float(radius_v)
        self.data_radius = float(data_radius)
        self.ball_dims = ball_dims
        self.rho = float(rho)
        self.lipschitz = float(lipschitz)
        self.smooth = float(smooth)
        self.loss_bound = float(loss_bound)

    @property
    def p(self) -> int:
        """Single dimension used by bound formulas"""
        return max(self.dim_w, self.dim_v)

    def describe(self) -> dict:
        return {
            "kind": self.kind, "dim_w": self.dim_w, "dim_v": self.dim_v, "dim_z": self.dim_z,
            "M_W": self.radius_w, "M_V": self.radius_v, "rho": self.rho,
            "G": self.lipschitz, "L": self.smooth, "M_ell": self.loss_bound,
        }

    # -- oracles ----------------------------------------------------------

    def batch_losses(self, W, V, Z) -> np.ndarray:
        raise NotImplementedError

    def batch_grads(self, W, V, Z) -> tuple:
        raise NotImplementedError

    def sample_data(self, count: int, rng: RngState) -> tuple:
        raise NotImplementedError

    def _check(self, w, v, Z):
        w = as_vector(w, self.dim_w)
        v = as_vector(v, self.dim_v)
        Z = np.asarray(Z, dtype=np.float64)
        if Z.ndim != 2 or Z.shape[1] != self.dim_z:
            raise InvalidInputError(f"data must have {self.dim_z} columns, got shape {Z.shape}")
        return w, v, Z

    def losses(self, w, v, Z) -> np.ndarray:
        """Per-point losses l(w, v; z_i)"""
        w, v, Z = self._check(w, v, Z)
        n = Z.shape[0]
        return self.batch_losses(np.broadcast_to(w, (n, self.dim_w)), np.broadcast_to(v, (n, self.dim_v)), Z)

    def loss(self, w, v, z) -> float:
        return float(self.losses(w, v, np.atleast_2d(z))[0])

    def grads(self, w, v, Z) -> tuple:
        """Per-point gradients (n x dim_w, n x dim_v)"""
        w, v, Z = self._check(w, v, Z)
        n = Z.shape[0]
        return self.batch_grads(np.broadcast_to(w, (n, self.dim_w)), np.broadcast_to(v, (n, self.dim_v)), Z)

    def mean_grads(self, w, v, Z) -> tuple:
        """Gradients of the empirical risk at (w, v), both taken before any update"""
        gw, gv = self.grads(w, v, Z)
        return gw.mean(axis=0), gv.mean(axis=0)

    def in_domain(self, z) -> bool:
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.dim_z,):
            return False
        return float(np.linalg.norm(z[:self.ball_dims])) <= self.data_radius * (1.0 + PROJECTION_SLACK)


# -- quadratic family -------------------------------------------------------

@dataclass(frozen=True)
class QuadraticSaddleSpec:
    """Quadratic SC-SC family. Missing matrices are drawn from the generator seed."""

    dim_w: int
    dim_v: int
    dim_z: int
    rho: float = 1.0
    coupling: float = 0.5      # target spectral norm of B when B is drawn
    data_radius: float = 1.0
    A: Optional[np.ndarray] = None
    C: Optional[np.ndarray] = None
    B: Optional[np.ndarray] = None
    radius_w: Optional[float] = None
    radius_v: Optional[float] = None


def _spectral_norm(M: np.ndarray) -> float:
    if M.size == 0:
        return 0.0
    return float(scipy.linalg.norm(M, 2))


def _random_matrix(rows, cols, target_norm, rng):
    if target_norm == 0:
        return np.zeros((rows, cols)), rng
    g, rng = sample_gaussian(rows * cols, 1.0, rng)
    M = g.reshape(rows, cols)
    return M * (target_norm / _spectral_norm(M)), rng


class QuadraticSaddle(ProblemInstance):

    kind = "quadratic"

    def __init__(self, A, B, C, rho, radius_w, radius_v, data_radius, offset, lipschitz, smooth, loss_bound):
        dim_w, dim_z = A.shape
        dim_v = C.shape[0]
        super().__init__(dim_w, dim_v, dim_z, radius_w, radius_v, data_radius, dim_z,
                         rho, lipschitz, smooth, loss_bound)
        self.A = _frozen(A)
        self.B = _frozen(B)
        self.C = _frozen(C)
        self.offset = float(offset)

    def batch_losses(self, W, V, Z):
        rw = W - Z @ self.A.T
        rv = V - Z @ self.C.T
        coupling = np.einsum("ij,ij->i", W @ self.B, V)
        return 0.5 * self.rho * np.einsum("ij,ij->i", rw, rw) + coupling \
            - 0.5 * self.rho * np.einsum("ij,ij->i", rv, rv) + self.offset

    def batch_grads(self, W, V, Z):
        gw = self.rho * (W - Z @ self.A.T) + V @ self.B.T
        gv = W @ self.B - self.rho * (V - Z @ self.C.T)
        return gw, gv

    def mean_grads(self, w, v, Z):
        # linear in z, so the data mean is a sufficient statistic
        w, v, Z = self._check(w, v, Z)
        zbar = Z.mean(axis=0)
        gw = self.rho * (w - self.A @ zbar) + self.B @ v
        gv = self.B.T @ w - self.rho * (v - self.C @ zbar)
        return gw, gv

    def sample_data(self, count, rng):
        return sample_ball(count, self.dim_z, self.data_radius, rng)


def make_quadratic_saddle(spec: QuadraticSaddleSpec, seed: int = 0) -> QuadraticSaddle:
    """Build a quadratic instance with analytically certified constants"""
    if spec.rho <= 0 or spec.data_radius <= 0 or spec.coupling < 0:
        raise GeneratorError("quadratic spec needs rho > 0, data_radius > 0, coupling >= 0")
    rng = RngState(derive_seed(seed, "quadratic"))
    A, C, B = spec.A, spec.C, spec.B
    if A is None:
        A, rng = _random_matrix(spec.dim_w, spec.dim_z, 1.0, rng)
    if C is None:
        C, rng = _random_matrix(spec.dim_v, spec.dim_z, 1.0, rng)
    if B is None:
        B, rng = _random_matrix(spec.dim_w, spec.dim_v, spec.coupling, rng)
    A, B, C = (np.atleast_2d(np.asarray(M, dtype=np.float64)) for M in (A, B, C))
    if A.shape != (spec.dim_w, spec.dim_z) or C.shape != (spec.dim_v, spec.dim_z) \
            or B.shape != (spec.dim_w, spec.dim_v):
        raise GeneratorError(f"matrix shapes A{A.shape} B{B.shape} C{C.shape} do not match the requested dims")
    if not all(np.all(np.isfinite(M)) for M in (A, B, C)):
        raise GeneratorError("quadratic matrices must be finite")

    rho, r_z = spec.rho, spec.data_radius
    a_max = _spectral_norm(A) * r_z
    c_max = _spectral_norm(C) * r_z
    b_norm = _spectral_norm(B)

    # [rho I, B; -B', rho I] has symmetric part rho I, so ||saddle|| <= ||(abar, cbar)||
    if b_norm == 0:
        bound_w, bound_v = a_max, c_max
    else:
        bound_w = bound_v = math.hypot(a_max, c_max)

    radius_w = spec.radius_w if spec.radius_w is not None else (2.0 * bound_w if bound_w > 0 else 1.0)
    radius_v = spec.radius_v if spec.radius_v is not None else (2.0 * bound_v if bound_v > 0 else 1.0)
    if radius_w <= bound_w or radius_v <= bound_v:
        raise GeneratorError(
            f"radii ({radius_w}, {radius_v}) do not keep the saddle interior; "
            f"need M_W > {bound_w:.6g} and M_V > {bound_v:.6g}"
        )

    m = max(radius_w, radius_v)
    lipschitz = max(rho * (radius_w + a_max) + b_norm * m, rho * (radius_v + c_max) + b_norm * m)
    smooth = rho + b_norm
    offset = b_norm * radius_w * radius_v + 0.5 * rho * (radius_v + c_max) ** 2
    loss_bound = 0.5 * rho * (radius_w + a_max) ** 2 + b_norm * radius_w * radius_v + offset

    inst = QuadraticSaddle(A, B, C, rho, radius_w, radius_v, r_z, offset, lipschitz, smooth, loss_bound)
    logger.debug("[Problem] quadratic instance %s", inst.describe())
    return inst


def closed_form_saddle(inst: QuadraticSaddle, S: Dataset) -> tuple:
    """Empirical saddle of a quadratic instance by a dense linear solve"""
    if not isinstance(inst, QuadraticSaddle):
        raise InvalidInputError("closed_form_saddle needs a quadratic instance")
    zbar = S.points.mean(axis=0)
    rho = inst.rho
    abar = inst.A @ zbar
    cbar = inst.C @ zbar
    K = np.block([
        [rho * np.eye(inst.dim_w), inst.B],
        [-inst.B.T, rho * np.eye(inst.dim_v)],
    ])
    rhs = rho * np.concatenate([abar, cbar])
    try:
        x = scipy.linalg.solve(K, rhs)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise SingularSystemError(f"saddle system could not be solved: {e}") from e
    residual = float(np.linalg.norm(K @ x - rhs))
    if not math.isfinite(residual) or residual > SADDLE_RESIDUAL_TOL * max(1.0, float(np.linalg.norm(rhs))):
        raise SingularSystemError(f"saddle residual {residual:.3e} exceeds tolerance")
    w_star, v_star = x[:inst.dim_w], x[inst.dim_w:]
    if np.linalg.norm(w_star) > inst.radius_w or np.linalg.norm(v_star) > inst.radius_v:
        raise GeneratorError("empirical saddle lies outside the feasible balls")
    return w_star, v_star


# -- AUC family ---------------------------------------------------------------

class AucSaddle(ProblemInstance):
    """
    Square-loss AUC surrogate. z = (x, y) with y in {-1, +1}; the minimization
    block is (w, a, b) and the maximization block is (alpha,).
    """

    kind = "auc"

    def __init__(self, dim, prior, rho, radius_w, radius_v, data_radius, separation, offset,
                 lipschitz=1.0, smooth=None, loss_bound=1.0):
        super().__init__(dim + 2, 1, dim + 1, radius_w, radius_v, data_radius, dim,
                         rho, lipschitz, smooth if smooth is not None else rho, loss_bound)
        self.dim = dim
        self.prior = float(prior)
        self.separation = float(separation)
        self.offset = float(offset)

    def _split(self, W, V, Z):
        d = self.dim
        return W[:, :d], W[:, d], W[:, d + 1], V[:, 0], Z[:, :d], Z[:, d] > 0

    def batch_losses(self, W, V, Z):
        q, rho = self.prior, self.rho
        w, a, b, alpha, x, pos = self._split(W, V, Z)
        s = np.einsum("ij,ij->i", x, w)
        pos_term = (1 - q) * (s - a) ** 2 - 2 * (1 + alpha) * (1 - q) * s
        neg_term = q * (s - b) ** 2 + 2 * (1 + alpha) * q * s
        reg = 0.5 * rho * np.einsum("ij,ij->i", W, W) - (q * (1 - q) + 0.5 * rho) * alpha ** 2
        return np.where(pos, pos_term, neg_term) + reg + self.offset

    def batch_grads(self, W, V, Z):
        q, rho = self.prior, self.rho
        w, a, b, alpha, x, pos = self._split(W, V, Z)
        s = np.einsum("ij,ij->i", x, w)
        k = np.where(pos, 2 * (1 - q) * (s - a) - 2 * (1 + alpha) * (1 - q),
                     2 * q * (s - b) + 2 * (1 + alpha) * q)
        gw = np.empty_like(W, dtype=np.float64)
        gw[:, :self.dim] = k[:, None] * x + rho * w
        gw[:, self.dim] = np.where(pos, -2 * (1 - q) * (s - a), 0.0) + rho * a
        gw[:, self.dim + 1] = np.where(pos, 0.0, -2 * q * (s - b)) + rho * b
        galpha = np.where(pos, -2 * (1 - q) * s, 2 * q * s) - (2 * q * (1 - q) + rho) * alpha
        return gw, galpha[:, None]

    def sample_data(self, count, rng):
        u, rng = sample_uniform(count, rng)
        y = np.where(u < self.prior, 1.0, -1.0)
        base, rng = sample_ball(count, self.dim, self.data_radius, rng)
        x = (1 - self.separation) * base
        x[:, 0] += self.separation * self.data_radius * y
        return np.column_stack([x, y]), rng

    def in_domain(self, z):
        return super().in_domain(z) and float(z[self.dim]) in (-1.0, 1.0)


def _sample_feasible(inst: ProblemInstance, count: int, rng: RngState) -> tuple:
    W, rng = sample_ball(count, inst.dim_w, inst.radius_w, rng)
    V, rng = sample_ball(count, inst.dim_v, inst.radius_v, rng)
    Z, rng = inst.sample_data(count, rng)
    return W, V, Z, rng


def make_auc_instance(q: float, rho: float, seed: int = 0, dim: int = 4, data_radius: float = 1.0,
                      radius_w: float = 1.0, separation: float = 0.25,
                      constant_samples: int = 10 ** 6, batch: int = 100000) -> AucSaddle:
    """AUC surrogate with sampled constants inflated by SAFETY_FACTOR"""
    if not 0.0 < q < 1.0:
        raise DomainError(f"class-1 prior must lie in (0,1), got {q}")
    if rho <= 0 or dim < 1 or constant_samples < 1:
        raise GeneratorError("auc instance needs rho > 0, dim >= 1, constant_samples >= 1")

    spread = max(q, 1 - q)
    radius_v = 4.0 * spread * radius_w * data_radius / (2 * q * (1 - q) + rho)
    offset = 2 * (1 + radius_v) * spread * radius_w * data_radius + (q * (1 - q) + 0.5 * rho) * radius_v ** 2
    inst = AucSaddle(dim, q, rho, radius_w, radius_v, data_radius, separation, offset)

    rng = RngState(derive_seed(seed, "auc-constants"))
    max_grad, max_loss, max_secant = 0.0, 0.0, rho
    remaining = constant_samples
    while remaining > 0:
        m = min(batch, remaining)
        W, V, Z, rng = _sample_feasible(inst, m, rng)
        W2, V2, _, rng = _sample_feasible(inst, m, rng)
        gw, gv = inst.batch_grads(W, V, Z)
        gw2, gv2 = inst.batch_grads(W2, V2, Z)
        max_grad = max(max_grad, float(np.max(np.linalg.norm(gw, axis=1))),
                       float(np.max(np.linalg.norm(gv, axis=1))))
        max_loss = max(max_loss, float(np.max(inst.batch_losses(W, V, Z))))
        dg = np.sqrt(np.sum((gw - gw2) ** 2, axis=1) + np.sum((gv - gv2) ** 2, axis=1))
        dx = np.sqrt(np.sum((W - W2) ** 2, axis=1) + np.sum((V - V2) ** 2, axis=1))
        ok = dx > 0
        if np.any(ok):
            max_secant = max(max_secant, float(np.max(dg[ok] / dx[ok])))
        remaining -= m

    inst.lipschitz = SAFETY_FACTOR * max_grad
    inst.loss_bound = SAFETY_FACTOR * max_loss
    inst.smooth = max(rho, SAFETY_FACTOR * max_secant)
    logger.debug("[Problem] auc instance %s", inst.describe())
    return inst


# -- data --------------------------------------------------------------------

def _draw(inst: ProblemInstance, n: int, seed: int, domain: str) -> Dataset:
    if n < 1:
        raise InvalidInputError(f"dataset size must be positive, got {n}")
    Z, _ = inst.sample_data(n, RngState(derive_seed(seed, domain)))
    return Dataset(points=Z, seed=seed, data_radius=inst.data_radius, ball_dims=inst.ball_dims)


def gen_dataset(inst: ProblemInstance, n: int, seed: int) -> Dataset:
    """n i.i.d. training points"""
    return _draw(inst, n, seed, "train")


def eval_set(inst: ProblemInstance, n_eval: int, seed: int) -> Dataset:
    """Fresh draw for population estimates; seed domain separated from training"""
    return _draw(inst, n_eval, seed, "eval")


def empirical_loss(inst: ProblemInstance, w, v, S: Dataset) -> float:
    """L_S(w, v) = mean of per-point losses"""
    return float(np.mean(inst.losses(w, v, S.points)))


def check_assumptions(inst: ProblemInstance, samples: int, seed: int) -> dict:
    """Spot-check gradient and loss bounds at random feasible points"""
    W, V, Z, _ = _sample_feasible(inst, samples, RngState(derive_seed(seed, "assumptions")))
    gw, gv = inst.batch_grads(W, V, Z)
    losses = inst.batch_losses(W, V, Z)
    return {
        "max_grad_w": float(np.max(np.linalg.norm(gw, axis=1))),
        "max_grad_v": float(np.max(np.linalg.norm(gv, axis=1))),
        "min_loss": float(np.min(losses)),
        "max_loss": float(np.max(losses)),
    }


def build_instance(section: dict, seed: int) -> ProblemInstance:
    """Instance from a validated config `instance` section"""
    if section["kind"] == "quadratic":
        spec = QuadraticSaddleSpec(
            dim_w=section["dim_w"], dim_v=section["dim_v"], dim_z=section["dim_z"],
            rho=section["rho"], coupling=section["coupling"], data_radius=section["data_radius"],
            radius_w=section.get("radius_w"), radius_v=section.get("radius_v"),
        )
        return make_quadratic_saddle(spec, seed)
    return make_auc_instance(
        section["prior"], section["rho"], seed, dim=section["dim"],
        data_radius=section["data_radius"], radius_w=section.get("radius_w") or 1.0,
        constant_samples=section["constant_samples"],
    )
