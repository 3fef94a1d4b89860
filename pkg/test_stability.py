import numpy as np
import pytest

from bounds import BoundInputs, theorem2_gamma
from errors import InvalidInputError
from numerics import RngState
from optimizer import Schedule, coupled_runs
from privacy import PrivacyBudget, calibrate_sigma, calibration_constant
from problem import gen_dataset
from stability import empirical_gamma, loglog_slope, make_adjacent, sample_indices


def _plan(inst, n, T):
    return calibrate_sigma(inst.lipschitz, T, n, PrivacyBudget(1.0, 1e-5), calibration_constant())


def test_make_adjacent_replaces_one_point(coupled):
    S = gen_dataset(coupled, 10, seed=1)
    z = np.full(8, 0.1)
    S_adj = make_adjacent(S, 3, z)
    assert np.array_equal(S_adj.points[3], z)
    assert np.array_equal(np.delete(S_adj.points, 3, axis=0), np.delete(S.points, 3, axis=0))
    assert not np.array_equal(S.points[3], z)


@pytest.mark.parametrize("index", [-1, 10])
def test_make_adjacent_index_range(coupled, index):
    S = gen_dataset(coupled, 10, seed=1)
    with pytest.raises(InvalidInputError):
        make_adjacent(S, index, np.zeros(8))


def test_make_adjacent_rejects_point_outside_ball(coupled):
    S = gen_dataset(coupled, 10, seed=1)
    with pytest.raises(InvalidInputError):
        make_adjacent(S, 0, np.full(8, 1.0))


def test_identical_replacement_gives_zero_distance(coupled):
    S = gen_dataset(coupled, 15, seed=2)
    S_adj = make_adjacent(S, 5, S.points[5])
    first, second = coupled_runs(coupled, S, S_adj, 30, Schedule(coupled.rho), _plan(coupled, 15, 30), RngState(4))
    assert np.array_equal(first.avg_w, second.avg_w) and np.array_equal(first.avg_v, second.avg_v)


def test_coupling_is_symmetric(coupled):
    S = gen_dataset(coupled, 15, seed=2)
    S_adj = make_adjacent(S, 5, np.zeros(8))
    plan = _plan(coupled, 15, 30)
    a1, a2 = coupled_runs(coupled, S, S_adj, 30, Schedule(coupled.rho), plan, RngState(4))
    b1, b2 = coupled_runs(coupled, S_adj, S, 30, Schedule(coupled.rho), plan, RngState(4))
    assert np.array_equal(a1.avg_w, b2.avg_w) and np.array_equal(a2.avg_w, b1.avg_w)


def test_sample_indices_distinct():
    picks = sample_indices(50, 10, RngState(3))
    assert len(set(picks)) == 10 and all(0 <= i < 50 for i in picks)
    assert picks == sample_indices(50, 10, RngState(3))


def test_loglog_slope_exact_power():
    ns = [10, 100, 1000]
    assert loglog_slope(ns, [1.0 / n for n in ns]) == pytest.approx(-1.0)
    with pytest.raises(InvalidInputError):
        loglog_slope(ns, [1.0, 0.0, 1.0])


def test_small_private_sweep_is_contained(coupled):
    n, T = 20, 15
    S = gen_dataset(coupled, n, seed=5)
    report = empirical_gamma(coupled, S, T, Schedule(coupled.rho), _plan(coupled, n, T),
                             num_indices=3, num_replacements=2, rng=RngState(6))
    assert len(report.samples) == 6
    assert report.containment_rate == 1.0
    assert report.max_distance <= report.crude_gamma
    assert report.quantiles[0.5] <= report.quantiles[0.9] <= report.quantiles[0.99] <= report.max_distance


def test_sweep_replays_from_seed(coupled):
    n, T = 20, 15
    S = gen_dataset(coupled, n, seed=5)
    args = (coupled, S, T, Schedule(coupled.rho), _plan(coupled, n, T))
    first = empirical_gamma(*args, num_indices=2, num_replacements=2, rng=RngState(6))
    again = empirical_gamma(*args, num_indices=2, num_replacements=2, rng=RngState(6))
    assert np.array_equal(first.distances, again.distances)


def test_sweep_independent_of_worker_count(coupled):
    n, T = 20, 15
    S = gen_dataset(coupled, n, seed=5)
    args = (coupled, S, T, Schedule(coupled.rho), _plan(coupled, n, T))
    serial = empirical_gamma(*args, num_indices=2, num_replacements=2, rng=RngState(6), workers=1)
    pooled = empirical_gamma(*args, num_indices=2, num_replacements=2, rng=RngState(6), workers=2)
    assert np.array_equal(serial.distances, pooled.distances)
    assert [s["gamma"] for s in serial.samples] == [s["gamma"] for s in pooled.samples]


def test_sweep_argument_checks(coupled):
    S = gen_dataset(coupled, 5, seed=5)
    with pytest.raises(InvalidInputError):
        empirical_gamma(coupled, S, 5, Schedule(coupled.rho), None, 6, 1, RngState(1))
    with pytest.raises(InvalidInputError):
        empirical_gamma(coupled, S, 5, Schedule(coupled.rho), None, 2, 0, RngState(1))


@pytest.mark.slow
def test_noiseless_stability_decays_like_inverse_n(small_coupled):
    ns = [100, 200, 400, 800]
    maxima = []
    for n in ns:
        S = gen_dataset(small_coupled, n, seed=n)
        report = empirical_gamma(small_coupled, S, 2000, Schedule(small_coupled.rho), None,
                                 num_indices=10, num_replacements=5, rng=RngState(n))
        assert len(report.samples) == 50
        maxima.append(float(report.distances.max()))
    assert -1.25 <= loglog_slope(ns, maxima) <= -0.75


@pytest.mark.slow
def test_private_distances_within_bound(small_coupled):
    n = 200
    T = int(n ** (2.0 / 3.0))
    S = gen_dataset(small_coupled, n, seed=13)
    report = empirical_gamma(small_coupled, S, T, Schedule(small_coupled.rho), _plan(small_coupled, n, T),
                             num_indices=20, num_replacements=10, rng=RngState(13), zeta=0.1)
    assert len(report.samples) == 200
    assert report.containment_rate >= 0.87


def test_private_bound_decays_like_inverse_root_n():
    ns = [400, 1600, 6400]
    gammas = []
    for n in ns:
        T = int(n ** (2.0 / 3.0))
        sigma = calibrate_sigma(1.0, T, n, PrivacyBudget(1.0, 1e-5), calibration_constant()).sigma
        gammas.append(theorem2_gamma(BoundInputs(G=1.0, rho=1.0, sigma=sigma, T=T, n=n, p=8, zeta=0.1,
                                                 g_w=0.0, g_v=0.0)))
    assert all(a > b for a, b in zip(gammas, gammas[1:]))
    assert -0.75 <= loglog_slope(ns, gammas) <= -0.25
