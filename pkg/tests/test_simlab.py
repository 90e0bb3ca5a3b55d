import math

import numpy as np
import pytest

from spectral_krr.estimator import FittedEstimator, fit
from spectral_krr.filters import FilterFamily
from spectral_krr.kernels import KernelSpec
from spectral_krr.simlab import (
    FeatureModel,
    SyntheticTask,
    bias_variance_split,
    concentration_trial,
    estimate_rate,
    exact_mu_mse,
    moment_bound,
    replicate_seed,
    run_experiment,
    sample_dataset,
    select_lambda,
    tail_bound,
    validation_mse,
)
from spectral_krr.simlab.concentration import informative_r, min_admissible_r
from spectral_krr.simlab.experiment import bound_check, fixed_lambda_risks

DISCRETE = KernelSpec("discrete")


def test_task_defaults_and_validation():
    task = SyntheticTask(16)
    np.testing.assert_array_equal(task.target, np.r_[np.ones(5), np.zeros(11)])
    assert task.masses.sum() == pytest.approx(1.0)
    assert task.masses[0] / task.masses[3] == pytest.approx(2.0)  # x^(-1/2): 1 vs 4
    with pytest.raises(ValueError):
        SyntheticTask(4, noise_sd=-1)
    with pytest.raises(ValueError):
        SyntheticTask(4, target=np.ones(3))


def test_noiseless_sample():
    task = SyntheticTask(10, noise_sd=0.0)
    d = sample_dataset(task, 200, 5)
    np.testing.assert_array_equal(d.y, task.f(d.x))
    assert d.x.min() >= 1 and d.x.max() <= 10


def test_uniform_frequencies():
    task = SyntheticTask(4, marginal_exponent=0.0)
    x = sample_dataset(task, 40000, 123).x
    freq = np.bincount(x, minlength=5)[1:] / 40000
    se = math.sqrt(0.25 * 0.75 / 40000)
    assert np.all(np.abs(freq - 0.25) <= 4 * se)


def test_sampling_deterministic():
    task = SyntheticTask(100, marginal_exponent=1.0)
    a, b = sample_dataset(task, 500, 42), sample_dataset(task, 500, 42)
    assert a.x.tobytes() == b.x.tobytes() and a.y.tobytes() == b.y.tobytes()
    assert replicate_seed(7, 3, 1) == replicate_seed(7, 3, 1)
    assert len({replicate_seed(7, r, s) for r in range(20) for s in range(3)}) == 60
    with pytest.raises(ValueError):
        sample_dataset(task, 0, 1)


def test_exact_mu_mse_cases():
    task = SyntheticTask(8, marginal_exponent=1.0)
    perfect = FittedEstimator(task.domain, task.target.copy(), DISCRETE, FilterFamily("ridge"), 1.0)
    assert exact_mu_mse(task, perfect) == pytest.approx(0.0, abs=1e-15)
    half = SyntheticTask(2, marginal_exponent=0.0, target=np.array([1.0, 0.0]))
    zero = FittedEstimator(np.array([1]), np.array([0.0]), DISCRETE, FilterFamily("ridge"), 1.0)
    assert exact_mu_mse(half, zero) == pytest.approx(0.5)


def test_exact_mu_mse_loop_oracle():
    rng = np.random.default_rng(0)
    task = SyntheticTask(64, marginal_exponent=0.7, target=rng.normal(size=64))
    pts = rng.integers(1, 65, 30)
    est = FittedEstimator(pts, rng.normal(size=30), DISCRETE, FilterFamily("ridge"), 1.0)
    total = 0.0
    for x in range(1, 65):
        fx = sum(c for p, c in zip(pts, est.dual_coefficients) if p == x)
        total += task.masses[x - 1] * (task.target[x - 1] - fx) ** 2
    assert exact_mu_mse(task, est) == pytest.approx(total, abs=1e-14)


def test_validation_mse_cases():
    est = FittedEstimator(np.array([1, 2]), np.array([3.0, -1.0]), DISCRETE, FilterFamily("ridge"), 1.0)
    assert validation_mse(est, [1, 2, 2], [3.0, -1.0, -1.0]) == 0.0
    assert validation_mse(est, [1, 2], [3.5, -0.5]) == pytest.approx(0.25)
    rng = np.random.default_rng(1)
    vx, vy = rng.integers(1, 4, 20), rng.normal(size=20)
    loop = sum((b - {1: 3.0, 2: -1.0}.get(a, 0.0)) ** 2 for a, b in zip(vx, vy)) / 20
    assert validation_mse(est, vx, vy) == pytest.approx(loop, abs=1e-14)
    with pytest.raises(ValueError):
        validation_mse(est, [], [])


def test_select_lambda():
    assert select_lambda([0.1, 0.2, 0.3], [3, 1, 2]) == 0.2
    assert select_lambda([0.1, 0.2, 0.3], [1, 1, 2]) == 0.1
    with pytest.raises(ValueError):
        select_lambda([], [])


def test_bias_variance_noiseless_and_zero_estimator():
    task = SyntheticTask(32, 1.0, noise_sd=0.0)
    X = sample_dataset(task, 64, 3).x
    f = FilterFamily("ridge")
    bv = bias_variance_split(task, X, DISCRETE, f, 0.05)
    assert bv.variance_part == 0.0
    est = fit(X, task.f(X), DISCRETE, f, 0.05)
    assert bv.bias_part == pytest.approx(exact_mu_mse(task, est), abs=1e-14)
    cut = bias_variance_split(task, X, DISCRETE, FilterFamily("cutoff"), 2.0)
    assert cut.bias_part == pytest.approx(float(np.dot(task.masses, task.target**2)))


@pytest.mark.parametrize("kind", ["ridge", "cutoff"])
def test_bias_variance_monte_carlo_oracle(kind):
    task = SyntheticTask(32, 1.0, noise_sd=0.5)
    X = sample_dataset(task, 64, 8).x
    f = FilterFamily(kind)
    lam = 0.03
    bv = bias_variance_split(task, X, DISCRETE, f, lam)
    rng = np.random.default_rng(99)
    risks = np.empty(2000)
    for k in range(2000):
        y = task.f(X) + task.noise_sd * rng.standard_normal(X.size)
        risks[k] = exact_mu_mse(task, fit(X, y, DISCRETE, f, lam))
    se = risks.std(ddof=1) / math.sqrt(risks.size)
    assert abs(risks.mean() - bv.total) <= 3 * se


def test_variance_monotone_in_noise():
    X = sample_dataset(SyntheticTask(32, 1.0), 80, 4).x
    f = FilterFamily("ridge")
    v = [bias_variance_split(SyntheticTask(32, 1.0, noise_sd=s), X, DISCRETE, f, 0.02).variance_part
         for s in (0.0, 0.1, 0.5, 1.0)]
    assert all(a <= b for a, b in zip(v, v[1:]))


def test_estimate_rate_cases():
    assert estimate_rate([(10, 0.1), (100, 0.01), (1000, 0.001)]) == pytest.approx(-1.0)
    assert estimate_rate([(10, 2.0), (20, 2.0), (40, 2.0)]) == pytest.approx(0.0, abs=1e-12)
    rng = np.random.default_rng(5)
    ns = 2.0 ** np.arange(6, 12)
    pts = [(n, 3 * n ** (-2 / 3) * (1 + 0.05 * rng.uniform(-1, 1))) for n in ns]
    assert -0.75 <= estimate_rate(pts) <= -0.58
    with pytest.raises(ValueError, match="3 ladder points"):
        estimate_rate([(10, 1.0)])
    with pytest.raises(ValueError):
        estimate_rate([(10, 1.0), (20, 0.0), (30, 1.0)])


def test_concentration_formulas():
    t = np.array([0.4, 0.3, 0.2, 0.1])
    d = float(np.sum(t / (t + 0.1)))
    want = 4 * d * math.exp(-0.1 * 100 * 0.25 / (2 * (1 + 1 / 6)))
    assert tail_bound(d, 0.1, 100, 0.5, 0.0, 1.0) == pytest.approx(want)
    assert moment_bound(1.0, 10) == pytest.approx(3.55)
    r = informative_r(d, 0.1, 1000, 0.0, 1.0, level=0.5)
    assert tail_bound(d, 0.1, 1000, r, 0.0, 1.0) == pytest.approx(0.5)


def test_concentration_large_n():
    model = FeatureModel.discrete(np.full(4, 0.25))
    res = concentration_trial(model, 10**6, 0.1, 0.0, 0.05, 200, seed=1)
    assert res.empirical_tail_prob == 0.0
    assert res.empirical_second_moment <= 0.05 * res.moment_bound
    assert res.tail_ok and res.moment_ok


def test_concentration_precondition_reported():
    model = FeatureModel.discrete(np.full(4, 0.25))
    r_min = min_admissible_r(0.1, 50, 0.0, 1.0)
    with pytest.raises(ValueError, match="admissible"):
        concentration_trial(model, 50, 0.1, 0.0, 0.5 * r_min, 10)
    with pytest.raises(ValueError):
        concentration_trial(model, 50, 2.0, 0.0, 10.0, 10)


def test_feature_model_must_diagonalize():
    mu = np.full(3, 1 / 3)
    with pytest.raises(ValueError):
        FeatureModel(mu, np.ones((3, 2)))
    H = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2)
    m = FeatureModel(np.array([0.5, 0.5]), H)
    np.testing.assert_allclose(m.eigenvalues, [0.5, 0.5])
    assert m.kappa_sq == pytest.approx(1.0)


def test_run_experiment_interpolation_bound():
    task = SyntheticTask(50, 0.5, noise_sd=0.0)
    rep = run_experiment(task, 40, np.array([1e-6, 2e-6]), methods=("kpcr",), replicates=1)
    x = sample_dataset(task, 40, replicate_seed(task.master_seed, 0, 1)).x
    unseen = np.setdiff1d(task.domain, x)
    bound = task.masses[unseen - 1].sum() * np.max(task.target**2)
    assert rep.records[0].mu_mse <= bound + 1e-15


def test_run_experiment_deterministic_and_records():
    task = SyntheticTask(64, 0.5, noise_sd=0.5, master_seed=17)
    grid = np.linspace(1e-4, 0.05, 40)
    a = run_experiment(task, 100, grid, replicates=3)
    b = run_experiment(task, 100, grid, replicates=3, threads=2)
    assert a.rows() == b.rows()
    assert a.methods() == ["krr", "kpcr"]
    for rec in a.records:
        assert rec.mu_mse >= 0 and rec.bias_part >= 0 and rec.variance_part >= 0
        assert rec.lambda_selected in grid
    agg = a.aggregates()
    assert set(agg["krr"]) == {"lambda_selected", "validation_mse", "mu_mse", "bias_part", "variance_part"}
    with pytest.raises(ValueError):
        run_experiment(task, 100, grid, replicates=0)
    with pytest.raises(ValueError):
        run_experiment(task, 100, grid[::-1])


def test_selected_lambda_minimizes_validation():
    task = SyntheticTask(40, 0.5, noise_sd=0.5, master_seed=2)
    grid = np.linspace(1e-3, 0.1, 25)
    rep = run_experiment(task, 60, grid, methods=("krr",), replicates=1)
    tr = sample_dataset(task, 60, replicate_seed(2, 0, 1))
    va = sample_dataset(task, 60, replicate_seed(2, 0, 2))
    f = FilterFamily("ridge")
    mses = [validation_mse(fit(tr.x, tr.y, DISCRETE, f, lam), va.x, va.y) for lam in grid]
    assert rep.records[0].lambda_selected == select_lambda(grid, mses)
    assert rep.records[0].validation_mse == pytest.approx(min(mses), abs=1e-12)


def test_bound_check_window_gate():
    task = SyntheticTask(64, 1.0, noise_sd=0.1)
    fail = bound_check(task, 512, 1e-4, "krr", 5)
    assert not fail.window_ok and fail.dominated is None and fail.terms is None
    ok = bound_check(task, 512, 0.05, "kpcr", 20)
    assert ok.window_ok and ok.dominated


def test_fixed_lambda_risks_zero_noise_is_bias():
    task = SyntheticTask(32, 1.0, noise_sd=0.0)
    risks = fixed_lambda_risks(task, 64, FilterFamily("ridge"), 0.05, 3)
    for i, r in enumerate(risks):
        x = sample_dataset(task, 64, replicate_seed(0, i, 10)).x
        bv = bias_variance_split(task, x, DISCRETE, FilterFamily("ridge"), 0.05)
        assert r == pytest.approx(bv.bias_part, abs=1e-14)
