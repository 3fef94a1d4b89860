import numpy as np
import pytest

from errors import InvalidInputError, NonConvergenceError
from optimizer import Schedule, Trajectory, run
from problem import (
    Dataset, QuadraticSaddleSpec, closed_form_saddle, empirical_loss, eval_set, gen_dataset,
    make_quadratic_saddle,
)
from risk import (
    g_distances, inner_max, inner_min, plain_gap, primal_excess, primal_gap, primal_minimum, risk_report,
    strong_pd, weak_pd,
)


def _data(points):
    points = np.array(points, dtype=float)
    return Dataset(points=points, seed=0, data_radius=1.0, ball_dims=points.shape[1])


@pytest.fixture(scope="module")
def scalar():
    return make_quadratic_saddle(QuadraticSaddleSpec(dim_w=1, dim_v=1, dim_z=1, rho=1.0,
                                                     A=[[1.0]], C=[[1.0]], B=[[2.0]]))


@pytest.fixture(scope="module")
def flat():
    """Loss that ignores the data"""
    zeros = np.zeros((2, 2))
    return make_quadratic_saddle(QuadraticSaddleSpec(dim_w=2, dim_v=2, dim_z=2, A=zeros, C=zeros, B=zeros))


def test_uncoupled_inner_max_is_data_center(decoupled):
    S = _data([[0.5, 0.2], [0.1, -0.4]])
    best = inner_max(decoupled, np.array([0.7, -0.1]), S)
    assert np.allclose(best.point, S.points.mean(axis=0), atol=1e-8)
    assert best.residual <= 1e-8


def test_uncoupled_inner_min_is_data_center(decoupled):
    S = _data([[0.5, 0.2], [0.1, -0.4]])
    best = inner_min(decoupled, np.array([-0.3, 0.3]), S)
    assert np.allclose(best.point, S.points.mean(axis=0), atol=1e-8)


def test_scalar_best_response_interior(scalar):
    S = _data([[0.5]])
    best = inner_max(scalar, [0.1], S, tol=1e-12)
    assert best.point[0] == pytest.approx(0.7, abs=1e-10)
    assert best.value == pytest.approx(scalar.loss([0.1], [0.7], [0.5]), abs=1e-12)


def test_scalar_best_response_clipped(scalar):
    S = _data([[0.5]])
    best = inner_max(scalar, [1.5], S, tol=1e-12)
    assert 0.5 + 3.0 > scalar.radius_v
    assert best.point[0] == pytest.approx(scalar.radius_v, abs=1e-10)


def test_scalar_best_response_beats_grid(scalar):
    S = _data([[0.5], [-0.2]])
    w = np.array([0.4])
    grid = np.linspace(-scalar.radius_v, scalar.radius_v, 20001)
    values = [empirical_loss(scalar, w, [g], S) for g in grid]
    best = inner_max(scalar, w, S, tol=1e-12)
    assert best.value >= max(values) - 1e-12
    assert best.value <= max(values) + 1e-6


def test_tolerance_controls_residual(coupled):
    S = gen_dataset(coupled, 30, seed=1)
    w = np.full(8, 0.1)
    loose = inner_max(coupled, w, S, tol=1e-4)
    tight = inner_max(coupled, w, S, tol=1e-11)
    assert loose.residual <= 1e-4 and tight.residual <= 1e-11
    assert loose.iterations <= tight.iterations


def test_iteration_cap_raises(coupled):
    S = gen_dataset(coupled, 30, seed=1)
    with pytest.raises(NonConvergenceError) as info:
        inner_max(coupled, np.full(8, 0.1), S, tol=1e-12, max_iter=0)
    assert info.value.exit_code == 3


def test_restarts_reach_same_best_response(coupled):
    S = gen_dataset(coupled, 30, seed=2)
    w = np.linspace(-0.3, 0.3, 8)
    a = inner_max(coupled, w, S, tol=1e-11)
    b = inner_max(coupled, w, S, tol=1e-11, start=np.full(8, 0.5))
    assert np.allclose(a.point, b.point, atol=1e-9)


def test_strong_pd_vanishes_at_saddle(coupled):
    S = gen_dataset(coupled, 40, seed=3)
    w, v = closed_form_saddle(coupled, S)
    assert abs(strong_pd(coupled, w, v, S, tol=1e-11)) <= 1e-10


def test_strong_pd_positive_off_saddle(coupled):
    S = gen_dataset(coupled, 40, seed=3)
    assert strong_pd(coupled, np.full(8, 0.2), np.zeros(8), S) > 0


def test_weak_pd_single_replicate_is_strong_pd(coupled):
    S = gen_dataset(coupled, 40, seed=4)
    w, v = np.full(8, 0.2), np.full(8, -0.1)
    weak = weak_pd(coupled, [(w, v)], S, min_replicates=1)
    assert weak == pytest.approx(strong_pd(coupled, w, v, S), abs=1e-10)


def test_weak_pd_identical_replicates(coupled):
    S = gen_dataset(coupled, 40, seed=4)
    w, v = np.full(8, 0.2), np.full(8, -0.1)
    weak = weak_pd(coupled, [(w, v)] * 4, S)
    assert weak == pytest.approx(strong_pd(coupled, w, v, S), abs=1e-10)


def test_weak_pd_below_mean_strong_pd(coupled):
    S = gen_dataset(coupled, 40, seed=5)
    rng = np.random.default_rng(5)
    pairs = [(rng.uniform(-0.3, 0.3, 8), rng.uniform(-0.3, 0.3, 8)) for _ in range(5)]
    weak = weak_pd(coupled, pairs, S)
    strong = np.mean([strong_pd(coupled, w, v, S) for w, v in pairs])
    assert weak <= strong + 4e-8


def test_weak_pd_per_replicate_datasets(coupled):
    sets = [gen_dataset(coupled, 20, seed=s) for s in (1, 2, 3)]
    pairs = [closed_form_saddle(coupled, S) for S in sets]
    weak = weak_pd(coupled, pairs, sets)
    assert weak >= -1e-10
    with pytest.raises(InvalidInputError):
        weak_pd(coupled, pairs, sets[:2])


def test_weak_pd_needs_two_replicates(coupled):
    S = gen_dataset(coupled, 10, seed=1)
    with pytest.raises(InvalidInputError):
        weak_pd(coupled, [(np.zeros(8), np.zeros(8))], S)


def test_gaps_vanish_on_training_set(coupled):
    S = gen_dataset(coupled, 25, seed=6)
    w, v = np.full(8, 0.1), np.full(8, 0.05)
    assert plain_gap(coupled, w, v, S, S) == 0.0
    assert primal_gap(coupled, w, S, S) == 0.0


def test_gaps_vanish_for_data_free_loss(flat):
    S = gen_dataset(flat, 10, seed=1)
    E = eval_set(flat, 500, seed=1)
    w, v = np.array([0.3, -0.2]), np.array([0.1, 0.4])
    assert plain_gap(flat, w, v, S, E) == pytest.approx(0.0, abs=1e-12)
    assert primal_gap(flat, w, S, E) == pytest.approx(0.0, abs=1e-12)


def test_primal_risk_dominates_loss(coupled):
    S = gen_dataset(coupled, 25, seed=7)
    w = np.full(8, 0.15)
    primal = inner_max(coupled, w, S).value
    for v in (np.zeros(8), np.full(8, 0.3), -np.full(8, 0.2)):
        assert primal >= empirical_loss(coupled, w, v, S) - 1e-12


def test_g_distances_at_saddle(coupled):
    S = gen_dataset(coupled, 30, seed=8)
    w, v = closed_form_saddle(coupled, S)
    traj = Trajectory(avg_w=w, avg_v=v, T=1, sigma=0.0, noise_seed=None)
    g_w, g_v = g_distances(coupled, traj, S, tol=1e-11)
    assert g_w <= 1e-9 and g_v <= 1e-9


def test_g_distances_uncoupled(decoupled):
    S = _data([[0.5, 0.2], [0.1, -0.4]])
    zbar = S.points.mean(axis=0)
    traj = Trajectory(avg_w=np.array([0.0, 1.0]), avg_v=np.array([-1.0, 0.0]), T=1, sigma=0.0, noise_seed=None)
    g_w, g_v = g_distances(decoupled, traj, S, tol=1e-11)
    assert g_w == pytest.approx(np.linalg.norm(zbar - traj.avg_w), abs=1e-9)
    assert g_v == pytest.approx(np.linalg.norm(zbar - traj.avg_v), abs=1e-9)


def test_primal_excess_zero_at_saddle(coupled):
    S = gen_dataset(coupled, 30, seed=9)
    w, _ = closed_form_saddle(coupled, S)
    assert primal_excess(coupled, w, S, tol=1e-11) == pytest.approx(0.0, abs=1e-10)
    assert primal_excess(coupled, np.full(8, 0.3), S) > 0


def test_primal_minimum_is_a_lower_envelope(coupled):
    S = gen_dataset(coupled, 30, seed=9)
    floor = primal_minimum(coupled, S)
    w, v = closed_form_saddle(coupled, S)
    assert floor == pytest.approx(empirical_loss(coupled, w, v, S), abs=1e-12)
    for point in (np.zeros(8), np.full(8, 0.3), -np.full(8, 0.1)):
        assert inner_max(coupled, point, S, tol=1e-11).value >= floor - 1e-9


def test_auc_primal_minimum_below_primal_risk(auc):
    S = gen_dataset(auc, 30, seed=10)
    floor = primal_minimum(auc, S, tol=1e-6)
    assert inner_max(auc, np.zeros(auc.dim_w), S, tol=1e-6).value >= floor - 1e-5


def test_auc_primal_excess_nonnegative(auc):
    S = gen_dataset(auc, 30, seed=10)
    traj = run(auc, S, 200, Schedule(auc.rho))
    assert primal_excess(auc, traj.avg_w, S, tol=1e-6) >= -1e-5
    assert primal_excess(auc, np.zeros(auc.dim_w), S, tol=1e-6) >= -1e-5


def test_risk_report_fields_agree(coupled):
    S = gen_dataset(coupled, 30, seed=11)
    E = eval_set(coupled, 2000, seed=11)
    w, v = np.full(8, 0.1), np.full(8, -0.1)
    report = risk_report(coupled, w, v, S, E)
    assert report.primal_emp >= report.plain_emp - 1e-12
    assert report.strong_pd_emp == pytest.approx(strong_pd(coupled, w, v, S), abs=1e-12)
    assert report.plain_gap == pytest.approx(plain_gap(coupled, w, v, S, E))
    row = report.as_row()
    assert row["n_eval"] == 2000 and "iterations" not in row
    assert np.isnan(row["weak_pd_emp"]) and row["replicates"] == 1


def test_risk_report_fills_weak_measures(coupled):
    E = eval_set(coupled, 2000, seed=12)
    sets = [gen_dataset(coupled, 30, seed=20 + r) for r in range(3)]
    trajs = [run(coupled, S, 50, Schedule(coupled.rho)) for S in sets]
    pairs = [(traj.avg_w, traj.avg_v) for traj in trajs]
    w, v = pairs[0]
    report = risk_report(coupled, w, v, sets[0], E, replicate_pairs=pairs, replicate_sets=sets)
    assert np.isfinite(report.weak_pd_emp) and report.weak_pd_emp >= -4 * report.tol
    assert report.weak_pd_emp == pytest.approx(weak_pd(coupled, pairs, sets), abs=1e-12)
    assert report.weak_pd_pop == pytest.approx(weak_pd(coupled, pairs, E), abs=1e-12)
    assert report.replicates == 3 and report.as_row()["weak_pd_emp"] == report.weak_pd_emp
    with pytest.raises(InvalidInputError):
        risk_report(coupled, w, v, sets[0], E, replicate_pairs=pairs, replicate_sets=sets[:2])


def test_larger_eval_set_moves_estimates_within_monte_carlo_error(coupled):
    N = 250
    w, v = np.full(8, 0.1), np.full(8, -0.1)
    allowed = 2.0 * coupled.loss_bound / np.sqrt(N)
    plain_ok, primal_ok = [], []
    for rep in range(100):
        large = eval_set(coupled, 4 * N, seed=1000 + rep)
        small = Dataset(points=large.points[:N], seed=large.seed, data_radius=large.data_radius,
                        ball_dims=large.ball_dims)
        plain_ok.append(abs(empirical_loss(coupled, w, v, large) - empirical_loss(coupled, w, v, small)) <= allowed)
        primal_ok.append(abs(inner_max(coupled, w, large).value - inner_max(coupled, w, small).value) <= allowed)
    assert np.mean(plain_ok) >= 0.95
    assert np.mean(primal_ok) >= 0.95
