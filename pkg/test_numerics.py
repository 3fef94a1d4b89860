import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errors import DomainError, InvalidInputError
from numerics import (
    RngState, derive_seed, noise_exceedance, noise_norm_threshold, project_ball,
    sample_ball, sample_gaussian, sample_uniform, spawn,
)

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)
vectors = st.lists(finite, min_size=3, max_size=3)
radii = st.one_of(st.just(0.0), st.floats(min_value=1e-6, max_value=1e3))


def test_project_outside_point():
    assert np.allclose(project_ball([3.0, 4.0], 1.0), [0.6, 0.8])


def test_project_interior_point_unchanged():
    assert np.array_equal(project_ball([0.1, 0.2], 1.0), [0.1, 0.2])


def test_project_zero_radius():
    assert np.array_equal(project_ball([0.0, 0.0], 0.0), [0.0, 0.0])


def test_project_rejects_non_finite():
    with pytest.raises(InvalidInputError):
        project_ball([1.0, math.nan], 1.0)
    with pytest.raises(InvalidInputError):
        project_ball([1.0, 2.0], -1.0)


@given(vectors, radii)
def test_projection_is_idempotent(x, r):
    once = project_ball(x, r)
    assert np.array_equal(project_ball(once, r), once)
    assert np.linalg.norm(once) <= r * (1 + 1e-12)


@settings(max_examples=500)
@given(vectors, vectors, radii)
def test_projection_is_non_expansive(x, y, r):
    d = np.linalg.norm(project_ball(x, r) - project_ball(y, r))
    assert d <= np.linalg.norm(np.subtract(x, y)) * (1 + 1e-12) + 1e-9


def test_zero_variance_noise():
    b, _ = sample_gaussian(4, 0.0, RngState(123))
    assert np.array_equal(b, np.zeros(4))


def test_noise_replays_from_state():
    rng = RngState(2024, 17)
    first, next_a = sample_gaussian(5, 1.3, rng)
    second, next_b = sample_gaussian(5, 1.3, rng)
    assert np.array_equal(first, second)
    assert next_a == next_b
    third, _ = sample_gaussian(5, 1.3, next_a)
    assert not np.array_equal(first, third)


def test_noise_moments():
    b, _ = sample_gaussian(10 ** 6, 1.0, RngState(5))
    pairs = b.reshape(-1, 2)
    assert np.all(np.abs(pairs.mean(axis=0)) <= 0.01)
    assert np.all(np.abs(pairs.var(axis=0) - 1.0) <= 0.02)


def test_counter_advances_by_blocks():
    _, rng = sample_gaussian(3, 1.0, RngState(9))
    # 3 normals -> 4 uniforms -> one block of four words
    assert rng.counter == 1
    _, rng = sample_uniform(9, RngState(9))
    assert rng.counter == 3


def test_uniforms_in_open_interval():
    u, _ = sample_uniform(10000, RngState(1))
    assert np.all((u > 0) & (u < 1))


def test_rng_state_rejects_out_of_range_seed():
    with pytest.raises(InvalidInputError):
        RngState(-1)
    with pytest.raises(InvalidInputError):
        RngState(2 ** 64)


def test_derived_seeds_separate_labels():
    assert derive_seed(7, "train") == derive_seed(7, "train")
    assert derive_seed(7, "train") != derive_seed(7, "eval")
    assert derive_seed(7, "noise/0/1") != derive_seed(8, "noise/0/1")
    child = spawn(RngState(7, 99), "x")
    assert child.counter == 0 and child.seed == derive_seed(7, "x")


def test_ball_samples_inside_ball():
    pts, _ = sample_ball(5000, 4, 2.5, RngState(3))
    assert pts.shape == (5000, 4)
    assert np.all(np.linalg.norm(pts, axis=1) <= 2.5 * (1 + 1e-12))


def test_threshold_near_one():
    assert noise_norm_threshold(1.0, 16, 1 - 1e-12) == pytest.approx(4.0, abs=1e-2)


def test_threshold_zero_noise():
    assert noise_norm_threshold(0.0, 8, 0.5) == 0.0


def test_threshold_transcription():
    expected = 4.0 * (1.0 + (8.0 * math.log(5.0) / 16.0) ** 0.25)
    assert noise_norm_threshold(1.0, 16, 0.2) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(7.789, abs=1e-3)


@pytest.mark.parametrize("zeta", [0.0, 1.0, 1.5, math.exp(-2.0) * 0.5])
def test_threshold_domain(zeta):
    with pytest.raises(DomainError):
        noise_norm_threshold(1.0, 16, zeta)


def test_noise_norm_concentration():
    draws = 10 ** 5
    fraction, threshold, _ = noise_exceedance(1.0, 16, 0.05, draws, RngState(31))
    assert threshold == pytest.approx(noise_norm_threshold(1.0, 16, 0.05))
    assert fraction <= 0.05 + 3 * math.sqrt(0.05 * 0.95 / draws)
