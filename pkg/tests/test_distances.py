import numpy as np
import pytest
from scipy.spatial.distance import cdist

from cloudtwin import (
    CloudTwinError,
    DistanceField,
    EmptyCloudError,
    PointCloud,
    c2c_distances,
    directed_hausdorff,
    hausdorff,
)
from cloudtwin.distances import write_field_csv

from conftest import random_cloud


class TestDistanceField:
    def test_rejects_negative_entries(self):
        with pytest.raises(CloudTwinError):
            DistanceField(np.array([1.0, -0.5]))

    def test_rejects_non_finite(self):
        with pytest.raises(CloudTwinError):
            DistanceField(np.array([np.nan]))


class TestC2c:
    def test_self_distance_is_zero(self, rng):
        cloud = random_cloud(rng, 200)
        field = c2c_distances(cloud, cloud)
        assert np.all(field.distances == 0.0)

    def test_analytic_two_point_case(self):
        ref = PointCloud(np.array([[0.0, 0, 0]]))
        flo = PointCloud(np.array([[3.0, 4, 0], [0.0, 0, 1]]))
        field = c2c_distances(ref, flo)
        assert np.array_equal(field.distances, [5.0, 1.0])

    def test_matches_exhaustive_oracle(self, rng):
        ref = random_cloud(rng, 500)
        flo = random_cloud(rng, 500)
        field = c2c_distances(ref, flo)
        oracle = cdist(flo.points, ref.points).min(axis=1)
        np.testing.assert_allclose(field.distances, oracle, rtol=1e-12, atol=0)

    def test_empty_cloud_errors(self):
        empty = PointCloud(np.empty((0, 3)))
        some = PointCloud(np.zeros((1, 3)))
        with pytest.raises(EmptyCloudError):
            c2c_distances(empty, some)
        with pytest.raises(EmptyCloudError):
            c2c_distances(some, empty)


class TestDirectedHausdorff:
    def test_zero_field(self):
        assert directed_hausdorff(DistanceField(np.zeros(3))) == 0.0

    def test_max_of_field(self):
        assert directed_hausdorff(DistanceField(np.array([5.0, 1.0]))) == 5.0

    def test_empty_field_errors(self):
        with pytest.raises(EmptyCloudError):
            directed_hausdorff(DistanceField(np.empty(0)))

    def test_matches_brute_force(self, rng):
        a = random_cloud(rng, 300)
        b = random_cloud(rng, 400)
        field = c2c_distances(b, a)  # a's points against b
        oracle = cdist(a.points, b.points).min(axis=1).max()
        assert abs(directed_hausdorff(field) - oracle) <= 1e-12 * oracle


class TestHausdorff:
    def test_identical_clouds_all_zero(self, rng):
        cloud = random_cloud(rng, 100)
        s = hausdorff(cloud, cloud)
        assert s.hausdorff == 0.0
        assert s.directed_h_ab == s.directed_h_ba == 0.0
        assert s.mean == s.max == 0.0

    def test_hand_computed_asymmetric_pair(self):
        A = PointCloud(np.array([[0.0, 0, 0], [10.0, 0, 0]]))
        B = PointCloud(np.array([[0.0, 0, 0]]))
        s = hausdorff(A, B)
        # h(A,B): A's farthest point is (10,0,0) at distance 10; h(B,A) = 0
        assert s.directed_h_ab == 10.0
        assert s.directed_h_ba == 0.0
        assert s.hausdorff == 10.0

    def test_symmetry_on_random_pairs(self, rng):
        for _ in range(100):
            a = random_cloud(rng, int(rng.integers(2, 60)))
            b = random_cloud(rng, int(rng.integers(2, 60)))
            assert hausdorff(a, b).hausdorff == hausdorff(b, a).hausdorff

    def test_zero_iff_equal_point_sets(self, rng):
        a = random_cloud(rng, 50)
        shuffled = PointCloud(a.points[rng.permutation(50)])
        assert hausdorff(a, shuffled).hausdorff == 0.0
        moved = PointCloud(a.points + [1e-3, 0, 0])
        assert hausdorff(a, moved).hausdorff > 0.0

    def test_triangle_inequality(self, rng):
        for _ in range(30):
            a = random_cloud(rng, 30)
            b = random_cloud(rng, 30)
            c = random_cloud(rng, 30)
            hab = hausdorff(a, b).hausdorff
            hbc = hausdorff(b, c).hausdorff
            hac = hausdorff(a, c).hausdorff
            assert hac <= hab + hbc + 1e-12

    def test_percentile_ordering_invariant(self, rng):
        for _ in range(20):
            a = random_cloud(rng, int(rng.integers(5, 200)))
            b = random_cloud(rng, int(rng.integers(5, 200)))
            s = hausdorff(a, b)
            assert s.max >= s.p99 >= s.p95 >= s.p90 >= s.median
            assert s.hausdorff == max(s.directed_h_ab, s.directed_h_ba)
            assert s.median == s.p50


def test_field_csv_export(tmp_path, rng):
    ref = random_cloud(rng, 20)
    flo = random_cloud(rng, 5)
    field = c2c_distances(ref, flo)
    out = tmp_path / "field.csv"
    write_field_csv(field, flo, out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "index,x,y,z,distance"
    assert len(lines) == 6
    first = lines[1].split(",")
    assert int(first[0]) == 0
    np.testing.assert_allclose([float(v) for v in first[1:4]], flo.points[0], rtol=1e-8)
    np.testing.assert_allclose(float(first[4]), field.distances[0], rtol=1e-8)
