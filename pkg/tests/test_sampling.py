"""Point-cloud generators: determinism, distributional checks, CSV round trip."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from powerpath import rng
from powerpath.errors import (DensityContractError, DomainError, ParameterError,
                              UnsupportedDomainError)
from powerpath.geometry import DensityField, Domain, bump_density, uniform_density
from powerpath.sampling import (PointCloud, Tube, cloud_from_csv, cloud_to_csv,
                                sample_iid, sample_poisson, segment_distances,
                                thin, tube_restrict)

UNIT_BOX = Domain("box", (1.0, 1.0))
UNIT_TORUS = Domain("torus", (1.0, 1.0))


class TestRngStreams:
    def test_same_key_same_stream(self):
        a = rng.stream(42, 0, 7).random(5)
        b = rng.stream(42, 0, 7).random(5)
        assert np.array_equal(a, b)

    def test_different_indices_differ(self):
        a = rng.stream(42, 0, 7).random(5)
        b = rng.stream(42, 0, 8).random(5)
        c = rng.stream(42, 1, 7).random(5)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    @given(st.integers(0, 2**32), st.integers(0, 100))
    @settings(max_examples=25, deadline=None)
    def test_streams_are_deterministic(self, seed, idx):
        assert rng.stream(seed, 5, idx).random() == rng.stream(seed, 5, idx).random()


class TestPointCloud:
    def test_points_are_read_only(self):
        cloud = sample_iid(uniform_density(UNIT_BOX), UNIT_BOX, 10, 0)
        with pytest.raises(ValueError):
            cloud.points[0, 0] = 2.0

    def test_rejects_points_outside_domain(self):
        with pytest.raises(DomainError):
            PointCloud(np.array([[1.5, 0.5]]), UNIT_BOX, 0, "iid")

    def test_empty_cloud(self):
        cloud = sample_iid(uniform_density(UNIT_BOX), UNIT_BOX, 0, 0)
        assert len(cloud) == 0
        assert cloud.points.shape == (0, 2)


class TestSampleIid:
    def test_deterministic(self):
        f = bump_density(UNIT_BOX)
        a = sample_iid(f, UNIT_BOX, 100, 3)
        b = sample_iid(f, UNIT_BOX, 100, 3)
        assert np.array_equal(a.points, b.points)

    def test_seed_changes_cloud(self):
        f = uniform_density(UNIT_BOX)
        a = sample_iid(f, UNIT_BOX, 100, 3)
        b = sample_iid(f, UNIT_BOX, 100, 4)
        assert not np.array_equal(a.points, b.points)

    def test_count_and_containment(self):
        f = bump_density(UNIT_BOX, amplitude=2.0)
        cloud = sample_iid(f, UNIT_BOX, 1234, 1)
        assert len(cloud) == 1234
        assert np.all(UNIT_BOX.contains(cloud.points))

    def test_uniform_marginals_pass_ks(self):
        cloud = sample_iid(uniform_density(UNIT_BOX), UNIT_BOX, 5000, 11)
        for ax in range(2):
            pval = stats.kstest(cloud.points[:, ax], "uniform").pvalue
            assert pval > 1e-4

    def test_bump_density_enriches_bump_region(self):
        # chi-square of observed vs expected counts inside / outside the bump
        f = bump_density(UNIT_BOX, amplitude=2.0, width=0.1)
        n = 20000
        cloud = sample_iid(f, UNIT_BOX, n, 5)
        r = np.linalg.norm(cloud.points - 0.5, axis=1)
        inside = int((r < 0.3).sum())
        # expected mass inside the support via fine midpoint quadrature
        grid = (np.arange(600) + 0.5) / 600
        mesh = np.stack(np.meshgrid(grid, grid, indexing="ij"), axis=-1).reshape(-1, 2)
        m = mesh[np.linalg.norm(mesh - 0.5, axis=1) < 0.3]
        p_in = float(f(m).sum() / 600**2)
        chi2 = (inside - n * p_in) ** 2 / (n * p_in) + \
            ((n - inside) - n * (1 - p_in)) ** 2 / (n * (1 - p_in))
        assert chi2 < stats.chi2.ppf(1 - 1e-4, df=1)

    def test_misdeclared_sup_bound_detected(self):
        base = bump_density(UNIT_BOX, amplitude=2.0)
        lying = DensityField(base.evaluate, base.inf_bound, base.sup_bound * 0.5)
        with pytest.raises(DensityContractError):
            sample_iid(lying, UNIT_BOX, 100, 0)

    def test_negative_count_rejected(self):
        with pytest.raises(ParameterError):
            sample_iid(uniform_density(UNIT_BOX), UNIT_BOX, -1, 0)


class TestSamplePoisson:
    def test_count_distribution_matches_poisson(self):
        lam = 200.0
        counts = [len(sample_poisson(lam, UNIT_BOX, 7, stream_index=i))
                  for i in range(300)]
        mean = np.mean(counts)
        # mean of 300 Poisson(200) draws: stderr = sqrt(200/300)
        assert abs(mean - lam) < 4 * np.sqrt(lam / 300)

    def test_tube_points_lie_in_tube(self):
        tube = Tube(np.array([5.0, 5.0]), np.array([25.0, 5.0]), 5.0)
        cloud = sample_poisson(1.0, tube, 3)
        # the returned cloud lives in the shifted bounding box, origin at (0, 0)
        lo = np.minimum(tube.x, tube.y) - tube.b
        pts = cloud.points + lo
        assert np.all(segment_distances(tube.x, tube.y, pts) < tube.b)

    def test_tube_count_mean(self):
        # area of the tube: rectangle + two half-disks
        t, b = 30.0, 3.0
        tube = Tube(np.zeros(2) + b, np.array([t + b, b]), b)
        area = 2 * b * t + np.pi * b**2
        counts = [len(sample_poisson(1.0, tube, 13, stream_index=i))
                  for i in range(200)]
        assert abs(np.mean(counts) - area) < 4 * np.sqrt(area / 200)

    def test_bad_intensity(self):
        with pytest.raises(ParameterError):
            sample_poisson(0.0, UNIT_BOX, 0)


class TestThin:
    def test_thinned_cloud_is_subset(self):
        f = bump_density(UNIT_BOX, amplitude=2.0)
        cloud = sample_iid(f, UNIT_BOX, 2000, 9)
        thinned = thin(cloud, f, f.inf_bound, 9)
        assert thinned.generator_tag == "thinned"
        rows = {tuple(r) for r in cloud.points}
        assert all(tuple(r) in rows for r in thinned.points)

    def test_thinning_flattens_density(self):
        # after thinning an iid-f cloud by floor/f, counts near and far from
        # the bump should match their areas
        f = bump_density(UNIT_BOX, amplitude=2.0, width=0.1)
        cloud = sample_iid(f, UNIT_BOX, 40000, 21)
        thinned = thin(cloud, f, f.inf_bound, 21)
        r = np.linalg.norm(thinned.points - 0.5, axis=1)
        inside = (r < 0.3).mean()
        area = np.pi * 0.09
        assert abs(inside - area) < 4 * np.sqrt(area * (1 - area) / len(thinned))

    def test_floor_above_density_rejected(self):
        f = bump_density(UNIT_BOX)
        cloud = sample_iid(f, UNIT_BOX, 50, 2)
        with pytest.raises(DensityContractError):
            thin(cloud, f, f.sup_bound * 2.0, 2)


class TestTubeRestrict:
    def test_keeps_exactly_near_segment_points(self):
        cloud = sample_iid(uniform_density(UNIT_BOX), UNIT_BOX, 500, 4)
        x, y, b = np.array([0.1, 0.5]), np.array([0.9, 0.5]), 0.05
        sub = tube_restrict(cloud, x, y, b)
        dist = segment_distances(x, y, cloud.points)
        assert len(sub) == int((dist < b).sum())
        assert np.all(segment_distances(x, y, sub.points) < b)

    def test_torus_rejected(self):
        cloud = sample_iid(uniform_density(UNIT_TORUS), UNIT_TORUS, 10, 0)
        with pytest.raises(UnsupportedDomainError):
            tube_restrict(cloud, [0.1, 0.5], [0.9, 0.5], 0.1)


class TestSegmentDistances:
    def test_degenerate_segment(self):
        d = segment_distances(np.zeros(2), np.zeros(2), np.array([[3.0, 4.0]]))
        assert d[0] == pytest.approx(5.0)

    def test_projection_clamped_to_endpoints(self):
        x, y = np.zeros(2), np.array([1.0, 0.0])
        d = segment_distances(x, y, np.array([[-3.0, 4.0], [0.5, 2.0]]))
        assert d[0] == pytest.approx(5.0)
        assert d[1] == pytest.approx(2.0)


class TestCsvRoundTrip:
    def test_bit_exact(self):
        cloud = sample_iid(uniform_density(UNIT_BOX), UNIT_BOX, 137, 8)
        text = cloud_to_csv(cloud)
        back = cloud_from_csv(text, UNIT_BOX)
        assert np.array_equal(back.points, cloud.points)
        assert back.seed == cloud.seed

    def test_header_mismatch_detected(self):
        cloud = sample_iid(uniform_density(UNIT_BOX), UNIT_BOX, 5, 8)
        text = cloud_to_csv(cloud)
        with pytest.raises(DomainError):
            cloud_from_csv(text, Domain("torus", (1.0, 1.0)))

    def test_empty_cloud_round_trip(self):
        cloud = sample_iid(uniform_density(UNIT_BOX), UNIT_BOX, 0, 8)
        back = cloud_from_csv(cloud_to_csv(cloud), UNIT_BOX)
        assert len(back) == 0

    def test_missing_header_rejected(self):
        with pytest.raises(ParameterError):
            cloud_from_csv("0.5,0.5\n", UNIT_BOX)
