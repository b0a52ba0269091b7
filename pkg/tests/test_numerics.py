import math

import numpy as np
import pytest

from pded.errors import EmptySplit, SingularFactor, UnsupportedOrder
from pded.expr import Factor, make_term, parse_equation
from pded.numerics import (
    Axis,
    Dataset,
    Split,
    TRIM_T,
    TRIM_X,
    build_problem,
    differentiate,
)


def grid_dataset(fn, x0=-1.0, x1=1.0, t0=0.0, t1=1.0, nx=32, nt=16, **kw):
    x = np.linspace(x0, x1, nx)
    t = np.linspace(t0, t1, nt)
    u = fn(x[:, None], t[None, :]) * np.ones((nx, nt))
    return Dataset(u, x0, x1, t0, t1, **kw)


class TestDatasetValidation:
    def test_too_small_grid(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((4, 20)), 0, 1, 0, 1)

    def test_non_finite(self):
        u = np.zeros((10, 10))
        u[3, 3] = np.nan
        with pytest.raises(ValueError):
            Dataset(u, 0, 1, 0, 1)

    def test_bad_train_frac(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((10, 10)), 0, 1, 0, 1, train_frac=0.0)

    def test_spacing(self):
        d = grid_dataset(lambda x, t: x + t, nx=11, x0=0.0, x1=1.0)
        assert d.dx == pytest.approx(0.1)


class TestDifferentiate:
    def test_quadratic_exact_first_derivative(self):
        d = grid_dataset(lambda x, t: x**2)
        ux = differentiate(d, 1, Axis.X)
        expected = 2 * d.x[:, None] * np.ones_like(d.u)
        assert np.allclose(ux[1:-1], expected[1:-1], atol=1e-12)
        # one-sided boundary stencils are exact on quadratics too
        assert np.allclose(ux, expected, atol=1e-10)

    def test_constant_field_all_orders_zero(self):
        d = grid_dataset(lambda x, t: 3.7)
        for order in (1, 2, 3):
            assert np.allclose(differentiate(d, order, Axis.X), 0.0, atol=1e-9)
        assert np.allclose(differentiate(d, 1, Axis.T), 0.0, atol=1e-12)

    def test_second_order_convergence_uxx(self):
        def max_err(nx):
            d = grid_dataset(lambda x, t: np.sin(x), x0=0.0, x1=3.0, nx=nx)
            uxx = differentiate(d, 2, Axis.X)
            return np.max(np.abs(uxx[2:-2] + np.sin(d.x[2:-2, None])))

        ratio = max_err(101) / max_err(201)
        assert 3.3 < ratio < 4.7  # halving dx shrinks error about 4x

    def test_third_derivative_stencil(self):
        d = grid_dataset(lambda x, t: x**3, x0=0.0, x1=2.0, nx=41)
        uxxx = differentiate(d, 3, Axis.X)
        assert np.allclose(uxxx[2:-2], 6.0, atol=1e-8)

    def test_time_axis(self):
        d = grid_dataset(lambda x, t: t**2, nt=21)
        ut = differentiate(d, 1, Axis.T)
        expected = 2 * d.t[None, :] * np.ones_like(d.u)
        assert np.allclose(ut[:, 1:-1], expected[:, 1:-1], atol=1e-12)

    @pytest.mark.parametrize("order,axis", [(2, Axis.T), (4, Axis.X), (0, Axis.X)])
    def test_unsupported(self, order, axis):
        d = grid_dataset(lambda x, t: x)
        with pytest.raises(UnsupportedOrder):
            differentiate(d, order, axis)

    def test_cache_returns_same_array(self):
        d = grid_dataset(lambda x, t: np.sin(x) * t)
        a = differentiate(d, 2, Axis.X)
        b = differentiate(d, 2, Axis.X)
        assert a is b
        assert not a.flags.writeable


class TestBuildProblem:
    def test_sample_count_matches_trim_rule(self, fisher_dataset):
        e = parse_equation("u_t = u_xx + u - u^2")
        p = build_problem(fisher_dataset, e, Split.TRAIN)
        nx, nt = fisher_dataset.u.shape
        n_train = math.ceil(0.8 * nt)
        assert n_train == 80
        assert p.n_samples == (nx - 2 * TRIM_X) * (n_train - 2 * TRIM_T)
        assert p.split_index == n_train

    def test_burgers_grid_arithmetic(self, dataset_cache):
        d = dataset_cache("burgers")
        p = build_problem(d, parse_equation("u_t = u*u_x + u_xx"), Split.TRAIN)
        assert p.n_samples == (256 - 4) * (math.ceil(0.8 * 201) - 2)
        assert len(p.columns) == 2

    def test_train_test_partition_all(self, fisher_dataset):
        e = parse_equation("u_t = u")
        total = sum(
            build_problem(fisher_dataset, e, s).n_samples
            for s in (Split.TRAIN, Split.TEST)
        )
        # the split boundary loses 2*TRIM_T slices relative to ALL
        alln = build_problem(fisher_dataset, e, Split.ALL).n_samples
        per_slice = fisher_dataset.nx - 2 * TRIM_X
        assert total == alln - 2 * TRIM_T * per_slice

    def test_exponent_column_is_power_of_base(self, fisher_dataset):
        p1 = build_problem(
            fisher_dataset, [make_term([(Factor.U, 1)])], Split.TRAIN
        )
        p3 = build_problem(
            fisher_dataset, [make_term([(Factor.U, 3)])], Split.TRAIN
        )
        base = next(iter(p1.columns.values()))
        cubed = next(iter(p3.columns.values()))
        assert np.array_equal(cubed, base**3)

    def test_invx_on_positive_domain(self, dataset_cache):
        d = dataset_cache("divide")
        p = build_problem(
            d, parse_equation("u_t = u_x*1/x + u_xx"), Split.TRAIN
        )
        assert all(np.all(np.isfinite(c)) for c in p.columns.values())

    def test_invx_crossing_zero_rejected(self, fisher_dataset):
        with pytest.raises(SingularFactor):
            build_problem(fisher_dataset, parse_equation("u_t = 1/x"), Split.TRAIN)

    def test_empty_test_split(self):
        d = grid_dataset(lambda x, t: np.sin(x) + t, train_frac=1.0)
        with pytest.raises(EmptySplit):
            build_problem(d, parse_equation("u_t = u"), Split.TEST)

    def test_duplicate_terms_rejected(self, fisher_dataset):
        t = make_term([(Factor.U, 1)])
        with pytest.raises(ValueError):
            build_problem(fisher_dataset, [t, t], Split.TRAIN)

    def test_twelve_term_library_allowed(self, fisher_dataset):
        lib = [
            make_term([(Factor.U, k)]) for k in (1, 2, 3, 4)
        ] + [
            make_term([(Factor.UX, k)]) for k in (1, 2, 3, 4)
        ] + [
            make_term([(Factor.UXX, k)]) for k in (1, 2, 3, 4)
        ]
        p = build_problem(fisher_dataset, lib, Split.TRAIN)
        assert len(p.columns) == 12

    def test_crc_stable(self, fisher_dataset):
        assert fisher_dataset.payload_crc32 == fisher_dataset.payload_crc32
