"""
Vector helpers, Euclidean ball projection and the deterministic noise source

Gaussian noise comes from a counter-based stream: Philox4x64 keyed by the seed
supplies raw 64-bit words starting at a block counter, words become uniforms in
(0, 1) as ((word >> 11) + 0.5) * 2**-53, and pairs of uniforms become normals by
Box-Muller (cos branch, then sin branch, interleaved). A call that needs k
normals consumes ceil(2 * ceil(k / 2) / 4) Philox blocks, so equal
(seed, counter) pairs replay the same numbers on every platform numpy supports.
"""

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from errors import DomainError, InvalidInputError

# Vectors are 1-D float64 numpy arrays
Vector = np.ndarray

# Relative slack when deciding a point is already inside a ball
PROJECTION_SLACK = 1e-12

_WORDS_PER_BLOCK = 4
_U53 = 2.0 ** -53


@dataclass(frozen=True)
class RngState:
    """Position in a counter-based random stream"""

    seed: int
    counter: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidInputError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not 0 <= self.counter < 2 ** 64:
            raise InvalidInputError(f"counter must be a 64-bit unsigned integer, got {self.counter}")


def as_vector(x, dim: int = None) -> Vector:
    """Convert to a finite float64 vector, optionally checking its length"""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInputError(f"expected a 1-D vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise InvalidInputError(f"expected dimension {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("vector has non-finite entries")
    return arr


def project_ball(x: Vector, radius: float) -> Vector:
    """Euclidean projection of x onto the centered ball of the given radius"""
    if not radius >= 0 or not math.isfinite(radius):
        raise InvalidInputError(f"radius must be a finite non-negative number, got {radius}")
    x = as_vector(x)
    norm = float(np.linalg.norm(x))
    if norm <= radius * (1.0 + PROJECTION_SLACK):
        return x.copy()
    return x * (radius / norm)


def derive_seed(seed: int, label) -> int:
    """Child seed for a labelled sub-stream (replicate, index, ...)"""
    digest = hashlib.blake2b(f"{seed}/{label}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def spawn(rng: RngState, label) -> RngState:
    """Fresh stream for a labelled child task; never overlaps the parent"""
    return RngState(derive_seed(rng.seed, label), 0)


def _raw_words(count: int, rng: RngState) -> tuple:
    blocks = -(-count // _WORDS_PER_BLOCK)
    bit_gen = np.random.Philox(key=rng.seed, counter=rng.counter)
    words = bit_gen.random_raw(blocks * _WORDS_PER_BLOCK)[:count]
    return words, RngState(rng.seed, (rng.counter + blocks) % 2 ** 64)


def sample_uniform(count: int, rng: RngState) -> tuple:
    """count uniforms in the open interval (0, 1); returns (values, next_state)"""
    if count < 0:
        raise InvalidInputError(f"count must be non-negative, got {count}")
    words, rng = _raw_words(count, rng)
    values = ((words >> np.uint64(11)).astype(np.float64) + 0.5) * _U53
    return values, rng


def _standard_normals(count: int, rng: RngState) -> tuple:
    pairs = -(-count // 2)
    u, rng = sample_uniform(2 * pairs, rng)
    radius = np.sqrt(-2.0 * np.log(u[0::2]))
    angle = 2.0 * math.pi * u[1::2]
    out = np.empty(2 * pairs, dtype=np.float64)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:count], rng


def sample_gaussian(dim: int, sigma: float, rng: RngState) -> tuple:
    """dim i.i.d. N(0, sigma^2) draws; returns (vector, next_state)"""
    if dim < 1:
        raise InvalidInputError(f"dim must be positive, got {dim}")
    if not sigma >= 0:
        raise InvalidInputError(f"sigma must be non-negative, got {sigma}")
    z, rng = _standard_normals(dim, rng)
    return sigma * z, rng


def sample_ball(count: int, dim: int, radius: float, rng: RngState) -> tuple:
    """count points uniform in the dim-dimensional ball; returns (count x dim array, next_state)"""
    if count < 1 or dim < 1:
        raise InvalidInputError(f"count and dim must be positive, got {count}, {dim}")
    z, rng = _standard_normals(count * dim, rng)
    directions = z.reshape(count, dim)
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    u, rng = sample_uniform(count, rng)
    radii = radius * u ** (1.0 / dim)
    return directions * radii[:, None], rng


def noise_norm_threshold(sigma: float, p: int, zeta: float) -> float:
    """High-probability bound on ||b||_2 for b ~ N(0, sigma^2 I_p)"""
    if p < 1:
        raise DomainError(f"p must be positive, got {p}")
    if not math.exp(-p / 8.0) < zeta < 1.0:
        raise DomainError(f"zeta must lie in (exp(-p/8), 1) = ({math.exp(-p / 8.0):.6g}, 1), got {zeta}")
    return sigma * math.sqrt(p) * (1.0 + (8.0 * math.log(1.0 / zeta) / p) ** 0.25)


def noise_exceedance(sigma: float, p: int, zeta: float, draws: int, rng: RngState,
                     batch: int = 10000) -> tuple:
    """
    Fraction of fresh N(0, sigma^2 I_p) draws whose norm exceeds noise_norm_threshold.

    Returns (fraction, threshold, next_state).
    """
    threshold = noise_norm_threshold(sigma, p, zeta)
    exceed = 0
    remaining = draws
    while remaining > 0:
        chunk = min(batch, remaining)
        z, rng = sample_gaussian(chunk * p, sigma, rng)
        norms = np.linalg.norm(z.reshape(chunk, p), axis=1)
        exceed += int(np.count_nonzero(norms > threshold))
        remaining -= chunk
    return exceed / draws, threshold, rng
