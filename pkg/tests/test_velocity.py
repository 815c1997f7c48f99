import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonlocalfv.measures import DiscreteMeasure, Grid1D, Grid2D
from nonlocalfv.velocity import (
    BoundsReport,
    KernelField,
    KuramotoIdentical,
    KuramotoNonIdentical,
    VelocityBounds,
    check_bounds,
    eval_velocity_1d,
    eval_velocity_2d,
)


def naive_kuramoto_1d(k, x, masses):
    """Direct O(N^2) sum, no order-parameter expansion."""
    v = np.zeros(len(x))
    for i in range(len(x)):
        acc = 0.0
        for j in range(len(x)):
            acc += math.sin(x[i] - x[j]) * masses[j]
        v[i] = -k * acc
    return v


def naive_kuramoto_2d(k, gx, gy, masses):
    nx, ny = masses.shape
    v1 = np.zeros((nx, ny))
    for i in range(nx):
        coupling = float(np.sum(np.sin(gx[i] - gx)[:, None] * masses))
        for j in range(ny):
            v1[i, j] = gy[j] - k * coupling
    return v1


class TestEval1D:
    def test_matches_naive_double_loop(self):
        grid = Grid1D.torus(257)
        rng = np.random.default_rng(7)
        masses = rng.random(257)
        masses /= masses.sum()
        m = DiscreteMeasure(grid, masses)
        fast = eval_velocity_1d(KuramotoIdentical(k=1.3), m)
        slow = naive_kuramoto_1d(1.3, grid.centers(), masses)
        assert np.max(np.abs(fast - slow)) <= 1e-12

    def test_kernel_field_matches_closed_form(self):
        grid = Grid1D.torus(64)
        rng = np.random.default_rng(3)
        masses = rng.random(64)
        masses /= masses.sum()
        m = DiscreteMeasure(grid, masses)
        field = KernelField(
            kernel=lambda d: -0.8 * np.sin(d),
            bounds=VelocityBounds(0.8, 0.8, 0.8, 0.8),
        )
        via_kernel = eval_velocity_1d(field, m)
        via_order_params = eval_velocity_1d(KuramotoIdentical(k=0.8), m)
        assert np.max(np.abs(via_kernel - via_order_params)) <= 1e-12

    def test_uniform_state_has_zero_velocity(self):
        grid = Grid1D.torus(64)
        m = DiscreteMeasure(grid, np.full(64, 1.0 / 64))
        v = eval_velocity_1d(KuramotoIdentical(k=2.0), m)
        assert np.max(np.abs(v)) <= 1e-12

    def test_rejects_2d_state(self):
        grid = Grid2D(Grid1D.torus(8), Grid1D.line(4, 0.0, 1.0))
        m = DiscreteMeasure(grid, np.full((8, 4), 1.0 / 32))
        with pytest.raises(ValueError, match="1D"):
            eval_velocity_1d(KuramotoIdentical(k=1.0), m)

    @given(
        i=st.integers(min_value=0, max_value=63),
        j=st.integers(min_value=0, max_value=63),
        k=st.floats(min_value=0.1, max_value=5.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_two_equal_atoms_antisymmetric(self, i, j, k):
        grid = Grid1D.torus(64)
        masses = np.zeros(64)
        masses[i] += 0.5
        masses[j] += 0.5
        v = eval_velocity_1d(KuramotoIdentical(k=k), DiscreteMeasure(grid, masses))
        assert abs(v[i] + v[j]) <= 1e-12

    @given(
        alpha=st.floats(min_value=0.0, max_value=2.0),
        beta=st.floats(min_value=0.0, max_value=2.0),
        seed=st.integers(min_value=0, max_value=999),
    )
    @settings(max_examples=40, deadline=None)
    def test_linear_in_the_measure(self, alpha, beta, seed):
        grid = Grid1D.torus(32)
        rng = np.random.default_rng(seed)
        ma, mb = rng.random(32), rng.random(32)
        field = KuramotoIdentical(k=1.0)
        va = eval_velocity_1d(field, DiscreteMeasure(grid, ma))
        vb = eval_velocity_1d(field, DiscreteMeasure(grid, mb))
        vc = eval_velocity_1d(field, DiscreteMeasure(grid, alpha * ma + beta * mb))
        assert np.max(np.abs(vc - (alpha * va + beta * vb))) <= 1e-10


class TestEval2D:
    def test_matches_naive_double_loop(self):
        grid = Grid2D(Grid1D.torus(33), Grid1D.line(17, -0.5, 1.5))
        rng = np.random.default_rng(11)
        masses = rng.random((33, 17))
        masses /= masses.sum()
        m = DiscreteMeasure(grid, masses)
        field = KuramotoNonIdentical(k=1.0, omega_support=(0.0, 1.0))
        v1, v2 = eval_velocity_2d(field, m)
        slow = naive_kuramoto_2d(
            1.0, grid.grid_theta.centers(), grid.grid_omega.centers(), masses
        )
        assert np.max(np.abs(v1 - slow)) <= 1e-12
        assert np.all(v2 == 0.0)

    def test_sup_bound_on_supported_frequencies(self):
        # With k=1 and frequencies in [0, 1] the angular speed never
        # exceeds 2 on the supported rows, whatever the state is.
        grid = Grid2D(Grid1D.torus(48), Grid1D.line(24, -0.5, 1.5))
        field = KuramotoNonIdentical(k=1.0, omega_support=(0.0, 1.0))
        rng = np.random.default_rng(5)
        y = grid.grid_omega.centers()
        supported = (y >= 0.0) & (y <= 1.0)
        for _ in range(20):
            masses = rng.random((48, 24))
            masses /= masses.sum()
            v1, _ = eval_velocity_2d(field, DiscreteMeasure(grid, masses))
            assert np.abs(v1[:, supported]).max() <= 2.0 + 1e-12

    def test_rejects_1d_state(self):
        m = DiscreteMeasure(Grid1D.torus(8), np.full(8, 0.125))
        field = KuramotoNonIdentical(k=1.0, omega_support=(0.0, 1.0))
        with pytest.raises(ValueError, match="2D"):
            eval_velocity_2d(field, m)

    def test_rejects_identical_field(self):
        grid = Grid2D(Grid1D.torus(8), Grid1D.line(4, 0.0, 1.0))
        m = DiscreteMeasure(grid, np.full((8, 4), 1.0 / 32))
        with pytest.raises(TypeError):
            eval_velocity_2d(KuramotoIdentical(k=1.0), m)


class TestBounds:
    def test_identical_bounds_all_equal_k(self):
        b = KuramotoIdentical(k=0.7).bounds
        assert (b.c1, b.c2, b.c3, b.c4) == (0.7, 0.7, 0.7, 0.7)

    def test_non_identical_bounds(self):
        b = KuramotoNonIdentical(k=1.0, omega_support=(-0.25, 1.0)).bounds
        assert (b.c1, b.c2, b.c3, b.c4) == (2.0, 2.0, 1.0, 1.0)

    def test_invalid_bounds_rejected(self):
        with pytest.raises(ValueError):
            VelocityBounds(-1.0, 1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            VelocityBounds(0.0, 1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            KuramotoIdentical(k=-0.5)
        with pytest.raises(ValueError):
            KuramotoNonIdentical(k=1.0, omega_support=(2.0, 1.0))

    def test_zero_coupling_decouples(self):
        # k = 0 must stay constructible: the field vanishes (1D) or reduces
        # to the frequencies themselves (2D), and c1 falls back to 1.
        grid = Grid1D.torus(16)
        rng = np.random.default_rng(1)
        masses = rng.random(16)
        masses /= masses.sum()
        v = eval_velocity_1d(KuramotoIdentical(k=0.0), DiscreteMeasure(grid, masses))
        assert np.all(v == 0.0)
        assert KuramotoIdentical(k=0.0).bounds.c1 == 1.0

        grid2 = Grid2D(Grid1D.torus(8), Grid1D.line(6, -0.5, 1.5))
        m2 = np.random.default_rng(2).random((8, 6))
        m2 /= m2.sum()
        field = KuramotoNonIdentical(k=0.0, omega_support=(0.0, 1.0))
        v1, _ = eval_velocity_2d(field, DiscreteMeasure(grid2, m2))
        y = grid2.grid_omega.centers()
        assert np.all(v1 == np.broadcast_to(y, (8, 6)))

    def test_check_bounds_accepts_kuramoto_samples(self):
        rng = np.random.default_rng(2)
        grid = Grid1D.torus(128)
        samples = []
        for _ in range(10):
            masses = rng.random(128)
            masses /= masses.sum()
            samples.append(DiscreteMeasure(grid, masses))
        report = check_bounds(KuramotoIdentical(k=1.5), samples)
        assert isinstance(report, BoundsReport)
        assert report.passed, report.messages
        assert report.worst_sup_ratio <= 1.0
        assert report.worst_slope_ratio <= 1.0 + 1e-6

    def test_check_bounds_accepts_2d_buffer_grid(self):
        # The grid carries frequency cells outside the declared support;
        # those rows are excluded from the sup check.
        grid = Grid2D(Grid1D.torus(32), Grid1D.line(16, -0.5, 1.5))
        rng = np.random.default_rng(9)
        samples = []
        for _ in range(5):
            masses = rng.random((32, 16))
            masses /= masses.sum()
            samples.append(DiscreteMeasure(grid, masses))
        field = KuramotoNonIdentical(k=1.0, omega_support=(0.0, 1.0))
        report = check_bounds(field, samples)
        assert report.passed, report.messages

    def test_check_bounds_flags_understated_constants(self):
        grid = Grid1D.torus(64)
        masses = np.zeros(64)
        masses[0] = 1.0
        field = KernelField(
            kernel=lambda d: -np.sin(d),
            bounds=VelocityBounds(0.05, 0.05, 0.05, 0.05),
        )
        report = check_bounds(field, [DiscreteMeasure(grid, masses)])
        assert not report.passed
        assert report.worst_sup_ratio > 1.0
        assert any("sup" in msg for msg in report.messages)
