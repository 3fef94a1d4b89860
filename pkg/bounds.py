"""
Closed-form stability, optimization and generalization bounds

Each evaluator returns the right-hand side of its inequality. Left-hand sides
subtract a multiple of an empirical quantity; lhs_coefficient() gives that
multiple so callers compare like-for-like:

    plain_3a     L(w, v) - k * L_S(w, v)           k = 1 / (1 - iota)
    primal_3b    R(w) - k * R_S(w)                 k = 1 / (1 - iota)
    excess_3c    R(w) - k * inf R                  k = (1 + iota) / (1 - iota)
    strong_3d    strong PD population risk         k = 0
    strong_c1a   strong PD pop - k * emp           k = 1
    weak_c1b     weak PD population risk           k = 0
    weak_c1c     weak PD pop - k * emp             k = 1
"""

import logging
import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional

from errors import DomainError

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
E = math.e


@dataclass(frozen=True)
class BoundInputs:
    G: float = 1.0
    rho: float = 1.0
    L: float = 1.0
    M_ell: float = 1.0
    M_W: float = 1.0
    M_V: float = 1.0
    sigma: float = 0.0
    T: int = 1
    n: int = 1
    p: int = 1
    epsilon: float = 1.0
    delta: float = 1e-5
    zeta: float = 0.1
    iota: float = 0.5
    g_w: float = 0.0
    g_v: float = 0.0
    delta_s_emp: float = 0.0
    delta_s_emp_expect: Optional[float] = None
    c: float = 1.0
    phi: float = 0.0
    gamma: Optional[float] = None

    @classmethod
    def from_dict(cls, record: dict) -> "BoundInputs":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(record) - known)
        if unknown:
            raise DomainError(f"unknown bound inputs: {', '.join(unknown)}")
        return cls(**record)

    def as_dict(self) -> dict:
        return asdict(self)


def _check_zeta(zeta: float, p: int):
    if not 0.0 < zeta < 1.0:
        raise DomainError(f"zeta must lie in (0,1), got {zeta}")
    if zeta <= math.exp(-p / 8.0):
        logger.warning("[Bounds] zeta=%g is below exp(-p/8)=%.4g; noise concentration is outside its range",
                       zeta, math.exp(-p / 8.0))


def _check_iota(iota: float):
    if not 0.0 < iota < 1.0:
        raise DomainError(f"iota must lie in (0,1), got {iota}")


def _check_common(gamma, n, iota, zeta):
    _check_iota(iota)
    if not 0.0 < zeta < 1.0:
        raise DomainError(f"zeta must lie in (0,1), got {zeta}")
    if gamma < 0:
        raise DomainError(f"gamma must be non-negative, got {gamma}")
    if n < 1:
        raise DomainError(f"n must be at least 1, got {n}")


def _ceil_log(n: int) -> int:
    return math.ceil(math.log(n))


def p_zeta(T: int, p: int, zeta: float) -> float:
    """Noise-norm inflation 1 + (8 log(2T / zeta) / p)^(1/4)"""
    if p < 1 or T < 1:
        raise DomainError(f"p and T must be positive, got p={p}, T={T}")
    if not 0.0 < zeta <= 2.0 * T:
        raise DomainError(f"zeta must lie in (0, 2T], got {zeta}")
    return 1.0 + (8.0 * math.log(2.0 * T / zeta) / p) ** 0.25


def _gamma(x: BoundInputs, g_sum: float) -> float:
    _check_zeta(x.zeta, x.p)
    log_et = 1.0 + math.log(x.T)
    pz = p_zeta(x.T, x.p, x.zeta)
    sp = x.sigma * math.sqrt(x.p)
    rho2T = x.rho * x.rho * x.T
    radicand = (x.G ** 2 * log_et / rho2T
                + sp ** 2 * log_et * pz ** 2 / rho2T
                + 2.0 * x.G * sp * log_et * pz / rho2T
                + g_sum * sp * pz / x.rho)
    return 4.0 * x.G / (x.n * x.rho) + 2.0 * sp * log_et * pz / x.T + 4.0 * math.sqrt(radicand)


def theorem2_gamma(x: BoundInputs) -> float:
    """High-probability argument-stability bound with measured g_w, g_v"""
    return _gamma(x, x.g_w + x.g_v)


def theorem2_gamma_crude(x: BoundInputs) -> float:
    """Same bound with g_w + g_v replaced by the domain radii M_W + M_V"""
    return _gamma(x, x.M_W + x.M_V)


def remark3_g_bound(x: BoundInputs) -> float:
    """Bound on g_w (and g_v)"""
    _check_zeta(x.zeta, x.p)
    log_et = 1.0 + math.log(x.T)
    p_prime = 1.0 + (8.0 * math.log(x.T / x.zeta) / x.p) ** 0.25
    sp = x.sigma * math.sqrt(x.p)
    M = max(x.M_W, x.M_V)
    inner = (x.G ** 2 / (x.rho ** 2 * x.T)
             + (2.0 / x.rho) * (x.G * sp / x.T + M * sp / log_et) * p_prime
             + sp ** 2 * p_prime ** 2 / (x.rho * x.T))
    return math.sqrt(log_et) * math.sqrt(inner)


def lemma9_delta_s(x: BoundInputs) -> float:
    """Empirical strong PD risk of the averaged iterates, in terms of sigma"""
    _check_zeta(x.zeta, x.p)
    log_et = 1.0 + math.log(x.T)
    pz = p_zeta(x.T, x.p, x.zeta)
    sp = x.sigma * math.sqrt(x.p)
    rhoT = x.rho * x.T
    return (x.rho * x.phi * (x.M_W ** 2 + x.M_V ** 2) / (2.0 * x.T)
            + x.G ** 2 * log_et / rhoT
            + sp ** 2 * pz ** 2 * log_et / rhoT
            + 2.0 * x.G * sp * pz * log_et / rhoT
            + (x.g_w + x.g_v) * sp * pz)


def lemma9_delta_s_budget(x: BoundInputs) -> float:
    """Same bound written through (c, epsilon, delta)"""
    _check_zeta(x.zeta, x.p)
    if not (x.epsilon > 0 and 0.0 < x.delta < 1.0):
        raise DomainError("budget form needs epsilon > 0 and delta in (0,1)")
    log_et = 1.0 + math.log(x.T)
    log_inv = math.log(1.0 / x.delta)
    pz = p_zeta(x.T, x.p, x.zeta)
    n_eps = x.n * x.epsilon
    return (x.G ** 2 * log_et / (x.rho * x.T)
            + x.c * x.G * (x.g_w + x.g_v) * math.sqrt(x.T * x.p * log_inv) * pz / n_eps
            + x.c * x.G ** 2 * log_et * (x.p * log_inv * pz ** 2 / (x.rho * n_eps ** 2)
                                         + 2.0 * math.sqrt(x.p * log_inv) * pz / (x.rho * math.sqrt(x.T) * n_eps)))


def _plain_radical(gamma, G, n, iota, log_term):
    return math.sqrt((G ** 2 * gamma ** 2 + 64.0 * G ** 2 * n * gamma ** 2 * log_term)
                     / (2.0 * (1 - iota) ** 2 * n) * log_term)


def _primal_radical(gamma, G, n, iota, log_term, ratio):
    return math.sqrt(ratio ** 2 * G ** 2 * gamma ** 2 * (1.0 + 64.0 * n * log_term)
                     / (2.0 * (1 - iota) ** 2 * n) * log_term)


def thm3a_plain(gamma, G, M_ell, n, iota, zeta) -> float:
    _check_common(gamma, n, iota, zeta)
    l3 = math.log(3.0 / zeta)
    return (_plain_radical(gamma, G, n, iota, l3)
            + 50.0 * SQRT2 * E * G * gamma * _ceil_log(n) * math.log(3.0 * E / zeta) / (1 - iota)
            + (12 + 2 * iota) * M_ell * l3 / (3 * iota * (1 - iota) * n))


def thm3b_primal(gamma, G, M_ell, n, iota, zeta, L, rho) -> float:
    _check_common(gamma, n, iota, zeta)
    l3 = math.log(3.0 / zeta)
    ratio = 1.0 + L / rho
    return (_primal_radical(gamma, G, n, iota, l3, ratio)
            + 50.0 * SQRT2 * ratio * G * gamma * _ceil_log(n) * math.log(3.0 * E / zeta) / (1 - iota)
            + (12 + 2 * iota) * M_ell * l3 / (3 * iota * (1 - iota) * n))


def thm3c_excess(gamma, G, M_ell, n, iota, zeta, L, rho, delta_s_emp) -> float:
    _check_common(gamma, n, iota, zeta)
    l6 = math.log(6.0 / zeta)
    ratio = 1.0 + L / rho
    return (_primal_radical(gamma, G, n, iota, l6, ratio)
            + _plain_radical(gamma, G, n, iota, l6)
            + 50.0 * SQRT2 * (1.0 + E + L / rho) * G * gamma * _ceil_log(n) * math.log(6.0 * E / zeta) / (1 - iota)
            + (24 + 4 * iota) * M_ell * l6 / (3 * iota * (1 - iota) * n)
            + delta_s_emp / (1 - iota))


def _pd_common(gamma, G, M_ell, n, iota, zeta, L, rho) -> float:
    _check_common(gamma, n, iota, zeta)
    le = math.log(E / zeta)
    return (100.0 * SQRT2 * E * (1 + iota) * (1 + L / rho) * G * gamma * _ceil_log(n) * le / (1 - iota)
            + 144.0 * E * (1 + iota) * G ** 2 * le / (rho * iota * (1 - iota) * n)
            + 8.0 * E * (1 + iota) * M_ell * le / (n * (1 - iota)))


def _emp_weight(iota, zeta) -> float:
    return E * iota * math.log(E / zeta) / (1 - iota)


def thm3d_strong_pd(gamma, G, M_ell, n, iota, zeta, L, rho, delta_s_emp, delta_s_emp_expect=None) -> float:
    """The expectation term defaults to the realized empirical risk"""
    if delta_s_emp_expect is None:
        delta_s_emp_expect = delta_s_emp
    return (_pd_common(gamma, G, M_ell, n, iota, zeta, L, rho)
            + _emp_weight(iota, zeta) * delta_s_emp_expect + delta_s_emp)


def cor1a_strong_gen(gamma, G, M_ell, n, iota, zeta, L, rho, delta_s_emp_expect) -> float:
    return _pd_common(gamma, G, M_ell, n, iota, zeta, L, rho) + _emp_weight(iota, zeta) * delta_s_emp_expect


def cor1b_weak_pop(gamma, G, M_ell, n, iota, zeta, L, rho, delta_s_emp) -> float:
    return _pd_common(gamma, G, M_ell, n, iota, zeta, L, rho) + (_emp_weight(iota, zeta) + 1.0) * delta_s_emp


def cor1c_weak_gen(gamma, G, M_ell, n, iota, zeta, L, rho, delta_s_emp) -> float:
    return _pd_common(gamma, G, M_ell, n, iota, zeta, L, rho) + (_emp_weight(iota, zeta) + 2.0) * delta_s_emp


_LHS = {
    "plain_3a": lambda iota: 1.0 / (1 - iota),
    "primal_3b": lambda iota: 1.0 / (1 - iota),
    "excess_3c": lambda iota: (1 + iota) / (1 - iota),
    "strong_3d": lambda iota: 0.0,
    "strong_c1a": lambda iota: 1.0,
    "weak_c1b": lambda iota: 0.0,
    "weak_c1c": lambda iota: 1.0,
}


def lhs_coefficient(name: str, iota: float) -> float:
    """Multiple of the empirical (or inf) term subtracted on the left-hand side"""
    _check_iota(iota)
    if name not in _LHS:
        raise DomainError(f"no left-hand side recorded for bound '{name}'")
    return _LHS[name](iota)


def _with_gamma(x: BoundInputs) -> BoundInputs:
    return x if x.gamma is not None else replace(x, gamma=theorem2_gamma(x))


def _expect(x: BoundInputs) -> float:
    return x.delta_s_emp if x.delta_s_emp_expect is None else x.delta_s_emp_expect


BOUNDS = {
    "p_zeta": lambda x: p_zeta(x.T, x.p, x.zeta),
    "theorem2_gamma": theorem2_gamma,
    "theorem2_gamma_crude": theorem2_gamma_crude,
    "remark3_g_bound": remark3_g_bound,
    "lemma9_delta_s": lemma9_delta_s,
    "lemma9_delta_s_budget": lemma9_delta_s_budget,
    "plain_3a": lambda x: thm3a_plain(x.gamma, x.G, x.M_ell, x.n, x.iota, x.zeta),
    "primal_3b": lambda x: thm3b_primal(x.gamma, x.G, x.M_ell, x.n, x.iota, x.zeta, x.L, x.rho),
    "excess_3c": lambda x: thm3c_excess(x.gamma, x.G, x.M_ell, x.n, x.iota, x.zeta, x.L, x.rho, x.delta_s_emp),
    "strong_3d": lambda x: thm3d_strong_pd(x.gamma, x.G, x.M_ell, x.n, x.iota, x.zeta, x.L, x.rho,
                                           x.delta_s_emp, _expect(x)),
    "strong_c1a": lambda x: cor1a_strong_gen(x.gamma, x.G, x.M_ell, x.n, x.iota, x.zeta, x.L, x.rho, _expect(x)),
    "weak_c1b": lambda x: cor1b_weak_pop(x.gamma, x.G, x.M_ell, x.n, x.iota, x.zeta, x.L, x.rho, x.delta_s_emp),
    "weak_c1c": lambda x: cor1c_weak_gen(x.gamma, x.G, x.M_ell, x.n, x.iota, x.zeta, x.L, x.rho, x.delta_s_emp),
}


def evaluate(name: str, x: BoundInputs) -> float:
    """Evaluate a bound by name; generalization bounds use theorem2_gamma unless gamma is given"""
    if name not in BOUNDS:
        raise DomainError(f"unknown bound '{name}'; choose from {', '.join(sorted(BOUNDS))}")
    if name in _LHS:
        x = _with_gamma(x)
    return float(BOUNDS[name](x))
