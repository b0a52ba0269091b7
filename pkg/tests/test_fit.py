import numpy as np
import pytest

from pded.errors import DegenerateProblem, ZeroVariance
from pded.expr import Factor, make_term
from pded.fit import (
    FitResult,
    StridgeConfig,
    evaluate_coefficients,
    fitness,
    nrmse,
    r_squared,
    stridge,
)
from pded.numerics import RegressionProblem

TERMS = [
    make_term([(Factor.U, 1)]),
    make_term([(Factor.U, 2)]),
    make_term([(Factor.U, 3)]),
    make_term([(Factor.UX, 1)]),
    make_term([(Factor.UXX, 1)]),
    make_term([(Factor.UXXX, 1)]),
    make_term([(Factor.X, 1)]),
    make_term([(Factor.SIN_U, 1)]),
]


def make_problem(theta: np.ndarray, y: np.ndarray) -> RegressionProblem:
    n, d = theta.shape
    columns = {TERMS[j]: theta[:, j].copy() for j in range(d)}
    return RegressionProblem(target=y.copy(), columns=columns,
                             n_samples=n, split_index=n)


class TestNrmse:
    def test_perfect_prediction(self):
        t = np.array([1.0, 2.0, 3.0, 4.0])
        assert nrmse(t, t) == 0.0

    def test_mean_predictor_is_one(self):
        t = np.array([1.0, 2.0, 3.0, 4.0])
        p = np.full_like(t, t.mean())
        assert nrmse(p, t) == pytest.approx(1.0, abs=1e-14)

    def test_matches_direct_formula(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            n = rng.integers(2, 40)
            t = rng.normal(size=n)
            p = rng.normal(size=n)
            direct = np.sqrt(np.mean((p - t) ** 2) / np.mean((t - t.mean()) ** 2))
            assert nrmse(p, t) == pytest.approx(direct, abs=1e-12)

    def test_zero_variance(self):
        with pytest.raises(ZeroVariance):
            nrmse(np.zeros(5), np.full(5, 2.0))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            nrmse(np.zeros(3), np.zeros(4))


class TestRSquared:
    def test_perfect(self):
        t = np.array([1.0, -2.0, 5.0])
        assert r_squared(t, t) == 1.0

    def test_mean_predictor_zero(self):
        t = np.array([1.0, 2.0, 3.0])
        assert r_squared(np.full_like(t, 2.0), t) == pytest.approx(0.0, abs=1e-14)

    def test_identity_with_nrmse(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            t = rng.normal(size=30)
            p = rng.normal(size=30)
            assert r_squared(p, t) == pytest.approx(1 - nrmse(p, t) ** 2,
                                                    abs=1e-12)


class TestFitness:
    def test_zero_error_two_terms(self):
        assert fitness(0.0, 2, 0.01) == pytest.approx(0.98)

    def test_unit_error_three_terms(self):
        assert fitness(1.0, 3, 0.01) == pytest.approx(0.485)

    def test_empty_support_upper_bound(self):
        assert fitness(0.0, 0, 0.01) == 1.0

    def test_monotone_in_error(self):
        for n in range(5):
            scores = [fitness(e, n, 0.01) for e in np.linspace(0, 3, 40)]
            assert all(a > b for a, b in zip(scores, scores[1:]))

    def test_monotone_in_terms(self):
        for e in np.linspace(0, 3, 40):
            scores = [fitness(e, n, 0.01) for n in range(8)]
            assert all(a > b for a, b in zip(scores, scores[1:]))

    def test_bounded_by_accuracy_factor(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            e = float(rng.uniform(0, 5))
            n = int(rng.integers(0, 9))
            assert fitness(e, n, 0.01) <= 1.0 / (1.0 + e) <= 1.0


class TestStridge:
    def test_exact_sparse_recovery(self):
        rng = np.random.default_rng(42)
        theta = rng.normal(size=(400, 5))
        y = 2.0 * theta[:, 0] - 3.0 * theta[:, 2]
        fr = stridge(make_problem(theta, y))
        assert fr.support == (0, 2)
        assert fr.coefficients[0] == pytest.approx(2.0, abs=1e-6)
        assert fr.coefficients[2] == pytest.approx(-3.0, abs=1e-6)
        assert all(fr.coefficients[j] == 0.0 for j in (1, 3, 4))

    def test_no_threshold_equals_ols(self):
        rng = np.random.default_rng(1)
        theta = rng.normal(size=(200, 4))
        y = rng.normal(size=200)
        fr = stridge(make_problem(theta, y),
                     StridgeConfig(ridge_alpha=0.0, threshold=0.0))
        ols = np.linalg.lstsq(theta, y, rcond=None)[0]
        assert fr.support == (0, 1, 2, 3)
        assert np.allclose(fr.coefficients, ols, atol=1e-10)

    def test_deterministic(self):
        rng = np.random.default_rng(9)
        theta = rng.normal(size=(300, 6))
        y = theta[:, 1] + 0.01 * rng.normal(size=300)
        a = stridge(make_problem(theta, y))
        b = stridge(make_problem(theta, y))
        assert a.coefficients == b.coefficients
        assert a.score == b.score

    def test_support_trace_non_increasing(self):
        rng = np.random.default_rng(8)
        theta = rng.normal(size=(500, 8))
        y = theta[:, 0] - 0.5 * theta[:, 3] + 0.02 * rng.normal(size=500)
        fr = stridge(make_problem(theta, y), StridgeConfig(threshold=0.05))
        sets = [set(s) for s in fr.support_trace]
        for earlier, later in zip(sets, sets[1:]):
            assert later <= earlier

    def test_all_thresholded_empty_model(self):
        rng = np.random.default_rng(2)
        theta = rng.normal(size=(200, 3))
        y = rng.normal(size=200)  # no real signal
        fr = stridge(make_problem(theta, y), StridgeConfig(threshold=10.0))
        assert fr.support == ()
        assert all(c == 0.0 for c in fr.coefficients)
        zero_err = nrmse(np.zeros_like(y), y)
        assert fr.nrmse_train == pytest.approx(zero_err)
        assert fr.score == pytest.approx(fitness(zero_err, 0, 0.01))

    def test_degenerate_when_underdetermined(self):
        theta = np.ones((3, 5))
        with pytest.raises(DegenerateProblem):
            stridge(make_problem(theta, np.ones(3)))

    def test_dependent_columns_dropped_and_flagged(self):
        rng = np.random.default_rng(6)
        base = rng.normal(size=(300, 2))
        theta = np.column_stack([base[:, 0], base[:, 0], base[:, 1]])
        y = base[:, 0] + base[:, 1]
        fr = stridge(make_problem(theta, y),
                     StridgeConfig(ridge_alpha=0.0, threshold=0.0))
        assert fr.degenerate
        assert len(fr.support) == 2
        pred = theta @ np.array(fr.coefficients)
        assert np.allclose(pred, y, atol=1e-8)

    def test_score_formula_invariant(self):
        rng = np.random.default_rng(12)
        theta = rng.normal(size=(250, 4))
        y = theta[:, 0] + 0.3 * theta[:, 2] + 0.05 * rng.normal(size=250)
        cfg = StridgeConfig(lambda_parsimony=0.02)
        fr = stridge(make_problem(theta, y), cfg)
        assert fr.score == pytest.approx(
            fitness(fr.nrmse_train, len(fr.support), 0.02), abs=1e-15
        )
        assert fr.r2_train == pytest.approx(1 - fr.nrmse_train**2, abs=1e-12)


class TestEvaluateCoefficients:
    def test_round_trips_training_fit(self):
        rng = np.random.default_rng(21)
        theta = rng.normal(size=(150, 3))
        y = theta @ np.array([1.0, 0.0, -2.0]) + 0.01 * rng.normal(size=150)
        p = make_problem(theta, y)
        fr = stridge(p)
        err, r2 = evaluate_coefficients(p, fr.coefficients)
        assert err == pytest.approx(fr.nrmse_train, abs=1e-12)
        assert r2 == pytest.approx(fr.r2_train, abs=1e-12)

    def test_wrong_length(self):
        rng = np.random.default_rng(22)
        p = make_problem(rng.normal(size=(50, 2)), rng.normal(size=50))
        with pytest.raises(ValueError):
            evaluate_coefficients(p, [1.0])


class TestConfigValidation:
    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            StridgeConfig(ridge_alpha=-1.0)
        with pytest.raises(ValueError):
            StridgeConfig(max_iters=0)
