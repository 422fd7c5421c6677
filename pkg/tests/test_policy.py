import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochassign import policy


class TestAssignment:
    def test_positive_intercept(self):
        assert policy.les_assign(np.array([1.0, 0.0, 0.0]), np.array([1.0, 0.5, 0.5])) == 1

    def test_tie_counts_as_treated(self):
        beta = np.array([0.0, 1.0, 0.0])
        assert policy.les_assign(beta, np.array([1.0, 0.0, 0.3])) == 1

    def test_benchmark_rule_evaluation(self):
        # 0.552 - 0.641 < 0 so the row is untreated
        beta = np.array([0.552, 0.533, -0.641])
        assert policy.les_assign(beta, np.array([1.0, 0.0, 1.0])) == 0

    def test_vectorised(self):
        beta = np.array([0.0, 1.0, -1.0])
        rows = np.array([[1.0, 0.6, 0.5], [1.0, 0.2, 0.5]])
        assert policy.les_assign(beta, rows).tolist() == [1, 0]

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            policy.les_assign(np.array([1.0, 0.0]), np.array([1.0, 0.5, 0.5]))

    @settings(max_examples=60, deadline=None)
    @given(
        scale=st.floats(min_value=1e-6, max_value=1e6),
        seed=st.integers(min_value=0, max_value=2**31),
    )
    def test_scale_invariance(self, scale, seed):
        rng = np.random.default_rng(seed)
        beta = rng.standard_normal(3)
        if np.linalg.norm(beta) == 0:
            return
        rows = np.column_stack([np.ones(8), rng.uniform(0, 1, (8, 2))])
        assert np.array_equal(policy.les_assign(beta, rows), policy.les_assign(scale * beta, rows))


class TestNormalize:
    def test_axis(self):
        assert np.array_equal(policy.normalize_direction([2.0, 0.0, 0.0]), [1.0, 0.0, 0.0])

    def test_benchmark_coefficients(self):
        direction = policy.normalize_direction([4126.0, 3988.0, -4796.0])
        assert direction == pytest.approx([0.5517, 0.5332, -0.6413], abs=1e-4)

    def test_idempotent(self):
        v = np.array([0.6, -0.48, 0.64])
        v /= np.linalg.norm(v)
        assert np.abs(policy.normalize_direction(v) - v).max() < 1e-15

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            policy.normalize_direction([0.0, 0.0, 0.0])


class TestSphericalCoordinates:
    def test_pole(self):
        assert policy.to_spherical(np.array([0.0, 0.0, 1.0])) == (0.0, 0.0)

    def test_reported_directions(self):
        theta, phi = policy.to_spherical(np.array([0.883, 0.442, 0.158]))
        assert round(theta) == 27 and round(phi) == 81
        theta, phi = policy.to_spherical(np.array([0.872, 0.490, 0.018]))
        assert round(theta) == 29 and round(phi) == 89

    def test_round_trip(self, rng):
        vectors = rng.standard_normal((1000, 3))
        vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
        for v in vectors:
            theta, phi = policy.to_spherical(v)
            assert -180.0 <= theta < 180.0 and 0.0 <= phi <= 180.0
            assert np.abs(policy.from_spherical(theta, phi) - v).max() < 1e-10

    def test_dimension_guard(self):
        with pytest.raises(ValueError):
            policy.to_spherical(np.array([1.0, 0.0]))


class TestGreatCircle:
    def test_identity(self):
        v = policy.normalize_direction([1.0, 2.0, -1.0])
        assert policy.great_circle_distance(v, v) == 0.0

    def test_antipodal(self):
        v = policy.normalize_direction([0.3, -0.4, 0.5])
        assert policy.great_circle_distance(v, -v) == pytest.approx(math.pi)

    def test_orthogonal(self):
        assert policy.great_circle_distance([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]) == pytest.approx(math.pi / 2)

    def test_symmetry(self, rng):
        a = policy.normalize_direction(rng.standard_normal(3))
        b = policy.normalize_direction(rng.standard_normal(3))
        assert policy.great_circle_distance(a, b) == policy.great_circle_distance(b, a)


class TestGrid:
    def test_two_points_antipodal(self):
        grid = policy.build_grid(3, 2)
        assert policy.great_circle_distance(grid.points[0], grid.points[1]) == pytest.approx(math.pi)

    def test_reference_density(self):
        grid = policy.build_grid(3, 10_116)
        assert grid.density == pytest.approx(4.0 * math.pi / 10_116)
        assert grid.density == pytest.approx(0.00124, abs=5e-5)

    def test_unit_norms(self):
        for m, count in [(3, 500), (4, 300), (6, 200)]:
            grid = policy.build_grid(m, count)
            assert np.abs(np.linalg.norm(grid.points, axis=1) - 1.0).max() < 1e-12

    def test_quasi_uniform_symmetry(self):
        grid = policy.build_grid(3, 1500)
        assert np.linalg.norm(grid.points.mean(axis=0)) <= 0.05

    def test_realized_spacing_enforced(self):
        grid = policy.build_grid(3, 2000)
        assert grid.realized_spacing <= grid.nominal_spacing + 1e-12
        with pytest.raises(ValueError):
            policy.SphereGrid(
                points=grid.points,
                nominal_spacing=grid.realized_spacing / 2.0,
                realized_spacing=grid.realized_spacing,
            )

    def test_count_guard(self):
        with pytest.raises(ValueError):
            policy.build_grid(3, 1)

    def test_csv_export(self, tmp_path):
        grid = policy.build_grid(3, 16)
        path = tmp_path / "grid.csv"
        policy.write_grid_csv(grid, path)
        header, *rows = path.read_text().strip().splitlines()
        assert header.split(",") == ["theta_deg", "phi_deg", "beta0", "beta1", "beta2"]
        assert len(rows) == 16
        first = [float(v) for v in rows[0].split(",")]
        assert np.allclose(
            policy.from_spherical(first[0], first[1]), first[2:], atol=1e-12
        )
