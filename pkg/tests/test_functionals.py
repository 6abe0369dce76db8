"""Scores, region statistics, scaling identities, and the stabilization probe."""

import math

import numpy as np
import pytest

from stabpp import functionals as fn
from stabpp.neighbors import knn_indices
from stabpp.point_process import (DensitySpec, PointConfiguration, generator,
                                  sample_location, sample_poisson,
                                  sample_poisson_rng)
from stabpp.regions import Region


def line_config(*values):
    return PointConfiguration.from_points([[float(v)] for v in values])


THREE = line_config(0, 1, 3)


class TestElementaryScores:
    def test_nn_distance(self):
        assert fn.nn_distance([0.0], THREE) == 1.0
        assert fn.nn_distance([3.0], THREE) == 2.0
        # tie with 0 at distance 1; value unambiguous
        assert fn.nn_distance([1.0], THREE) == 1.0

    def test_nn_distance_needs_other_points(self):
        with pytest.raises(fn.InsufficientPointsError):
            fn.nn_distance([0.0], line_config(0))

    def test_knn_neighbors(self):
        assert fn.knn_neighbors([0.0], THREE, 2).ravel().tolist() == [1.0, 3.0]
        assert fn.knn_neighbors([1.0], THREE, 1).ravel().tolist() == [0.0]
        with pytest.raises(fn.InsufficientPointsError):
            fn.knn_neighbors([0.0], THREE, 3)

    def test_xi_knn_three_point_graph(self):
        spec = fn.FunctionalSpec(family=fn.KNN_UNDIRECTED, k=1, alpha=1.0)
        assert fn.xi_knn([1.0], THREE, spec) == pytest.approx(1.5)
        assert fn.xi_knn([0.0], THREE, spec) == pytest.approx(0.5)
        total = sum(fn.xi_knn([v], THREE, spec) for v in (0.0, 1.0, 3.0))
        assert total == pytest.approx(3.0)  # total edge length of the graph

    def test_xi_directed(self):
        assert fn.xi_directed_nn([0.0], THREE, 1.0) == 1.0
        assert fn.xi_directed_nn([3.0], THREE, 2.0) == 4.0
        assert fn.xi_directed_nn([3.0], THREE, 0.5) == pytest.approx(math.sqrt(2.0))

    def test_l_alpha(self):
        assert fn.l_alpha(THREE, Region.interval(-0.5, 2.0), 1.0) == pytest.approx(2.0)
        assert fn.l_alpha(THREE, Region.interval(10.0, 11.0), 1.0) == 0.0
        assert fn.l_alpha(THREE, Region.interval(-1.0, 4.0), 1.0) == pytest.approx(4.0)

    def test_l_alpha_insufficient(self):
        with pytest.raises(fn.InsufficientPointsError):
            fn.l_alpha(line_config(0.5), Region.interval(0.0, 1.0), 1.0)


class TestHalfSumIdentity:
    def test_sum_of_scores_equals_edge_total(self):
        rng = np.random.default_rng(17)
        for trial in range(100):
            d = int(rng.integers(1, 3))
            n = int(rng.integers(5, 50))
            k = int(rng.integers(1, 4))
            if n <= k:
                n = k + 2
            alpha = float(rng.uniform(0.5, 2.5))
            pts = rng.uniform(size=(n, d))
            config = PointConfiguration(dimension=d, points=pts)
            spec = fn.FunctionalSpec(family=fn.KNN_UNDIRECTED, k=k, alpha=alpha)
            total = math.fsum(fn.xi_knn(pts[i], config, spec) for i in range(n))
            # independent edge-list total from the neighbour matrix
            nbr = knn_indices(pts, k)
            edges = set()
            for i in range(n):
                for j in nbr[i]:
                    edges.add((min(i, int(j)), max(i, int(j))))
            edge_total = math.fsum(
                np.sqrt(((pts[a] - pts[b]) ** 2).sum()) ** alpha for a, b in edges)
            assert total == pytest.approx(edge_total, rel=1e-12)


class TestScaledStatistics:
    def test_t_statistic_unscaled(self):
        f = fn.TestFunctionSpec(region=Region.interval(-1.0, 4.0))
        spec = fn.FunctionalSpec(family=fn.DIRECTED_NN, alpha=1.0, lam=1.0)
        assert fn.t_statistic(THREE, f, spec) == pytest.approx(4.0)

    def test_t_statistic_homogeneity_hand_value(self):
        f = fn.TestFunctionSpec(region=Region.interval(-1.0, 4.0))
        spec = fn.FunctionalSpec(family=fn.DIRECTED_NN, alpha=1.0, lam=4.0)
        assert fn.t_statistic(THREE, f, spec) == pytest.approx(16.0)

    def test_zero_test_function(self):
        f = fn.TestFunctionSpec(region=Region.interval(-1.0, 4.0),
                                kind="piecewise", values=(0.0,))
        spec = fn.FunctionalSpec(family=fn.DIRECTED_NN, alpha=1.0, lam=4.0)
        assert fn.t_statistic(THREE, f, spec) == 0.0

    def test_homogeneity_identity_1d(self):
        # dilating the configuration multiplies the statistic by lambda^alpha
        rng = np.random.default_rng(2)
        gamma = Region.interval(0.2, 0.8)
        f = fn.TestFunctionSpec(region=gamma)
        for alpha in (0.5, 1.0, 2.0):
            for lam in (3.0, 17.5, 400.0):
                pts = rng.uniform(size=(60, 1))
                config = PointConfiguration(dimension=1, points=pts)
                spec = fn.FunctionalSpec(family=fn.DIRECTED_NN, alpha=alpha, lam=lam)
                t = fn.t_statistic(config, f, spec)
                assert t == pytest.approx(
                    lam ** alpha * fn.l_alpha(config, gamma, alpha), rel=1e-12)

    def test_translation_invariance(self):
        rng = np.random.default_rng(8)
        pts = rng.uniform(size=(50, 2))
        shift = np.array([13.7, -4.2])
        gamma = Region.from_bounds([((0.1, 0.1), (0.9, 0.9))])
        gamma_shift = Region.from_bounds([(tuple(np.array([0.1, 0.1]) + shift),
                                           tuple(np.array([0.9, 0.9]) + shift))])
        for family, k in ((fn.DIRECTED_NN, 1), (fn.KNN_UNDIRECTED, 2)):
            spec = fn.FunctionalSpec(family=family, k=k, alpha=1.3, lam=25.0)
            t0 = fn.t_statistic(PointConfiguration(dimension=2, points=pts),
                                fn.TestFunctionSpec(region=gamma), spec)
            t1 = fn.t_statistic(PointConfiguration(dimension=2, points=pts + shift),
                                fn.TestFunctionSpec(region=gamma_shift), spec)
            assert t1 == pytest.approx(t0, rel=1e-12)

    def test_locality(self):
        # a remote point outside the region that is nobody's nearest neighbour
        # leaves the region sum untouched
        rng = np.random.default_rng(4)
        pts = rng.uniform(size=(40, 1))
        gamma = Region.interval(0.0, 1.0)
        before = fn.l_alpha(PointConfiguration(dimension=1, points=pts), gamma, 1.5)
        extended = np.vstack([pts, [[50.0]]])
        after = fn.l_alpha(PointConfiguration(dimension=1, points=extended), gamma, 1.5)
        assert after == before

    def test_t_vector_single_region(self):
        f = fn.TestFunctionSpec(region=Region.interval(-1.0, 4.0))
        spec = fn.FunctionalSpec(family=fn.DIRECTED_NN, alpha=1.0, lam=1.0)
        vec = fn.t_vector(THREE, [f], spec)
        assert vec.values.tolist() == [fn.t_statistic(THREE, f, spec)]

    def test_t_vector_empty_config_is_zero(self):
        empty = PointConfiguration(dimension=1, points=np.empty((0, 1)))
        fs = [fn.TestFunctionSpec(region=Region.interval(0.0, 1.0)),
              fn.TestFunctionSpec(region=Region.interval(2.0, 3.0))]
        spec = fn.FunctionalSpec(family=fn.DIRECTED_NN, alpha=1.0, lam=1.0)
        assert fn.t_vector(empty, fs, spec).values.tolist() == [0.0, 0.0]

    def test_t_vector_rejects_overlap(self):
        fs = [fn.TestFunctionSpec(region=Region.interval(0.0, 2.0)),
              fn.TestFunctionSpec(region=Region.interval(1.0, 3.0))]
        spec = fn.FunctionalSpec(family=fn.DIRECTED_NN, alpha=1.0, lam=1.0)
        with pytest.raises(ValueError):
            fn.t_vector(THREE, fs, spec)

    def test_far_separated_regions_decompose(self):
        # gap far exceeds every nearest-neighbour distance, so the joint
        # statistic equals the per-cluster statistics
        rng = np.random.default_rng(21)
        left = rng.uniform(0.0, 1.0, size=(30, 1))
        right = rng.uniform(100.0, 101.0, size=(25, 1))
        both = PointConfiguration(dimension=1, points=np.vstack([left, right]))
        fs = [fn.TestFunctionSpec(region=Region.interval(0.0, 1.0)),
              fn.TestFunctionSpec(region=Region.interval(100.0, 101.0))]
        spec = fn.FunctionalSpec(family=fn.DIRECTED_NN, alpha=1.0, lam=9.0)
        vec = fn.t_vector(both, fs, spec)
        t_left = fn.t_statistic(PointConfiguration(dimension=1, points=left),
                                fs[0], spec)
        t_right = fn.t_statistic(PointConfiguration(dimension=1, points=right),
                                 fs[1], spec)
        assert vec.values[0] == pytest.approx(t_left, rel=1e-12)
        assert vec.values[1] == pytest.approx(t_right, rel=1e-12)


class TestThresholding:
    def test_extremes(self):
        f = fn.TestFunctionSpec(region=Region.interval(-1.0, 4.0))
        spec = fn.FunctionalSpec(family=fn.DIRECTED_NN, alpha=1.0, lam=4.0)
        assert fn.thresholded_t(THREE, f, spec, np.inf) == fn.t_statistic(THREE, f, spec)
        assert fn.thresholded_t(THREE, f, spec, 0.0) == 0.0

    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(33)
        pts = rng.uniform(size=(100, 1))
        config = PointConfiguration(dimension=1, points=pts)
        f = fn.TestFunctionSpec(region=Region.interval(0.0, 1.0))
        for family, k in ((fn.DIRECTED_NN, 1), (fn.KNN_UNDIRECTED, 2)):
            spec = fn.FunctionalSpec(family=family, k=k, alpha=1.0, lam=100.0)
            values = [fn.thresholded_t(config, f, spec, t)
                      for t in np.linspace(0.0, 5.0, 40)]
            assert all(b >= a - 1e-15 for a, b in zip(values, values[1:]))


class TestStabilizationProbe:
    def test_directed_radii_bounded_by_nn_distance(self):
        # replay the probe's stream discipline to recover each probe point and
        # base configuration, then check R >= dilated NN distance
        region = Region.interval(0.0, 1.0)
        density = DensitySpec.homogeneous(region)
        lam = 100.0
        spec = fn.FunctionalSpec(family=fn.DIRECTED_NN, alpha=1.0)
        count = 40
        res = fn.stabilization_probe(density, lam, spec, probe_count=count,
                                     resample_count=3, seed=60)
        for i in range(count):
            rng = generator(60, (1 << 40) + i)
            x = sample_location(density, rng)
            base = sample_poisson_rng(density, lam, rng)
            nn = lam * np.min(np.abs(base[:, 0] - x[0]))
            assert res.radii[i] >= nn - 1e-9

    def test_tail_monotone_and_decaying(self):
        density = DensitySpec.homogeneous(Region.interval(0.0, 1.0))
        spec = fn.FunctionalSpec(family=fn.DIRECTED_NN, alpha=1.0)
        res = fn.stabilization_probe(density, 150.0, spec, probe_count=150,
                                     resample_count=3, seed=2)
        assert np.all(np.diff(res.tail_probs) <= 1e-12)
        assert res.decay_slope < 0.0
        assert res.censored.sum() == 0

    def test_constant_functional_stabilizes_at_zero(self):
        density = DensitySpec.homogeneous(Region.interval(0.0, 1.0))
        spec = fn.FunctionalSpec(family=fn.DIRECTED_NN, alpha=1.0)
        res = fn.stabilization_probe(density, 50.0, spec, probe_count=10,
                                     resample_count=2, seed=3,
                                     evaluator=lambda x, points, s: 1.0)
        assert np.all(res.radii == 0.0)

    def test_rejects_bad_arguments(self):
        density = DensitySpec.homogeneous(Region.interval(0.0, 1.0))
        spec = fn.FunctionalSpec(family=fn.DIRECTED_NN, alpha=1.0)
        with pytest.raises(ValueError):
            fn.stabilization_probe(density, 50.0, spec, probe_count=0,
                                   resample_count=2, seed=1)
        with pytest.raises(ValueError):
            fn.stabilization_probe(density, 0.5, spec, probe_count=5,
                                   resample_count=2, seed=1)


class TestSpecValidation:
    def test_directed_fixes_k(self):
        with pytest.raises(ValueError):
            fn.FunctionalSpec(family=fn.DIRECTED_NN, k=2)

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            fn.FunctionalSpec(family="voronoi")

    def test_piecewise_needs_values(self):
        with pytest.raises(ValueError):
            fn.TestFunctionSpec(region=Region.interval(0, 1), kind="piecewise")

    def test_insufficient_points_for_t(self):
        f = fn.TestFunctionSpec(region=Region.interval(0.0, 1.0))
        spec = fn.FunctionalSpec(family=fn.KNN_UNDIRECTED, k=3, alpha=1.0, lam=1.0)
        with pytest.raises(fn.InsufficientPointsError):
            fn.t_statistic(line_config(0.5, 0.6), f, spec)
