import math

import numpy as np
import pytest
import scipy.stats

from hdpaired.distances import DistanceMatrix, distance_matrix, upper_triangle
from hdpaired.inference import (
    bootstrap_distribution,
    dcor_ttest,
    distance_pair_correlation,
    permutation_test,
    rank_correlations,
    subsample_ci,
    ucenter,
)
from hdpaired.matrixio import FeatureMatrix
from hdpaired.synthgen import gen_null, gen_shared_latent

from oracles import (
    brute_bias_corrected_dcor,
    brute_kendall_tau_b,
    brute_spearman,
    brute_ucentered,
    naive_pearson,
)


def fm(data, tag=""):
    data = np.asarray(data, dtype=float)
    return FeatureMatrix(data, tuple(f"s{i}" for i in range(data.shape[0])), tag)


def random_distance_pair(n, p=8, q=6, seed=0):
    rng = np.random.default_rng(seed)
    dx = distance_matrix(fm(rng.standard_normal((n, p))), "scaled_euclidean")
    dy = distance_matrix(fm(rng.standard_normal((n, q))), "pearson_correlation_distance")
    return dx, dy


class TestDistancePairCorrelation:
    def test_perfect_positive_affine(self):
        dx, _ = random_distance_pair(10, seed=1)
        shifted = DistanceMatrix(
            np.where(np.eye(10, dtype=bool), 0.0, 2.5 * dx.data + 1.0),
            "euclidean",
            dx.subject_ids,
        )
        assert distance_pair_correlation(dx, shifted) == pytest.approx(1.0, abs=1e-12)

    def test_perfect_negative_affine(self):
        dx, _ = random_distance_pair(10, seed=2)
        top = dx.data.max() * 2
        flipped = DistanceMatrix(
            np.where(np.eye(10, dtype=bool), 0.0, top - dx.data),
            "euclidean",
            dx.subject_ids,
        )
        assert distance_pair_correlation(dx, flipped) == pytest.approx(-1.0, abs=1e-12)

    def test_matches_flatten_and_correlate_oracle(self):
        dx, dy = random_distance_pair(30, seed=3)
        got = distance_pair_correlation(dx, dy)
        expected = naive_pearson(upper_triangle(dx), upper_triangle(dy))
        assert abs(got) < 0.3
        assert got == pytest.approx(expected, abs=1e-12)

    def test_exact_joint_relabeling_invariance(self):
        rng = np.random.default_rng(4)
        dx, dy = random_distance_pair(14, seed=4)
        perm = rng.permutation(14)
        ids = tuple(f"s{i}" for i in perm)
        dxp = DistanceMatrix(dx.data[np.ix_(perm, perm)], dx.metric_tag, ids)
        dyp = DistanceMatrix(dy.data[np.ix_(perm, perm)], dy.metric_tag, ids)
        assert distance_pair_correlation(dxp, dyp) == distance_pair_correlation(dx, dy)

    def test_constant_triangle_errors(self):
        ids = ("a", "b", "c")
        const = DistanceMatrix(np.ones((3, 3)) - np.eye(3), "euclidean", ids)
        dx, _ = random_distance_pair(3, seed=5)
        with pytest.raises(ValueError, match="constant"):
            distance_pair_correlation(const, DistanceMatrix(dx.data, "euclidean", ids))


class TestPermutationTest:
    def test_identity_replicate_equals_observed(self):
        # Replicates draw sigma via rng.permutation; find a replicate index
        # whose permutation is identity on a tiny n and check exact equality.
        from hdpaired._util import STREAM_PERMUTATION, replicate_rng

        dx, dy = random_distance_pair(5, seed=6)
        res = permutation_test(dx, dy, b=600, seed=9)
        hits = 0
        for i in range(600):
            sigma = replicate_rng(9, STREAM_PERMUTATION, i).permutation(5)
            if np.array_equal(sigma, np.arange(5)):
                assert res.null_samples[i] == res.observed
                hits += 1
        assert hits >= 1, "no identity permutation drawn; adjust b or seed"

    def test_pvalue_rule_and_smoothing(self):
        dx, dy = random_distance_pair(12, seed=7)
        res = permutation_test(dx, dy, b=99, seed=1)
        count = int(np.sum(res.null_samples >= res.observed))
        assert res.p_value == count / 99
        assert res.p_value_smoothed == (1 + count) / 100
        assert 0.0 < res.p_value_smoothed <= 1.0

    def test_denominator_identity_under_permutation(self):
        dx, _ = random_distance_pair(15, seed=8)
        tri = upper_triangle(dx)
        ss = ((tri - tri.mean()) ** 2).sum()
        rng = np.random.default_rng(3)
        for _ in range(10):
            perm = rng.permutation(15)
            ptri = upper_triangle(dx.data[np.ix_(perm, perm)])
            pss = ((ptri - ptri.mean()) ** 2).sum()
            assert pss == pytest.approx(ss, rel=1e-12)

    def test_planted_dependence_rejects(self):
        ds, _ = gen_shared_latent(100, 12, 12, 0.8, seed=5)
        dx = distance_matrix(ds.x, "scaled_euclidean")
        dy = distance_matrix(ds.y, "pearson_correlation_distance")
        res = permutation_test(dx, dy, b=999, seed=0)
        assert res.p_value <= 0.001

    def test_thread_count_does_not_change_results(self):
        dx, dy = random_distance_pair(20, seed=9)
        a = permutation_test(dx, dy, b=64, seed=4, threads=1)
        b = permutation_test(dx, dy, b=64, seed=4, threads=4)
        assert np.array_equal(a.null_samples, b.null_samples)
        assert a.p_value == b.p_value

    def test_mantel_joint_flag_runs(self):
        dx, dy = random_distance_pair(12, seed=10)
        res = permutation_test(dx, dy, b=50, seed=2, mantel_joint=True)
        assert res.n_permutations == 50

    def test_null_pvalues_roughly_uniform(self):
        # Small-scale calibration check; the acceptance suite runs the full one.
        pvals = []
        for rep in range(60):
            ds = gen_null(25, 6, 6, seed=rep)
            dx = distance_matrix(ds.x, "scaled_euclidean")
            dy = distance_matrix(ds.y, "pearson_correlation_distance")
            pvals.append(permutation_test(dx, dy, b=199, seed=rep).p_value)
        assert scipy.stats.kstest(pvals, "uniform").pvalue > 0.005


class TestRankCorrelations:
    def test_monotone_transform_gives_one(self):
        dx, _ = random_distance_pair(10, seed=11)
        cubed = DistanceMatrix(dx.data**3, "euclidean", dx.subject_ids)
        rho, tau = rank_correlations(dx, cubed)
        assert rho == pytest.approx(1.0, abs=1e-12)
        assert tau == pytest.approx(1.0, abs=1e-12)

    def test_self_correlation(self):
        dx, _ = random_distance_pair(8, seed=12)
        rho, tau = rank_correlations(dx, dx)
        assert (rho, tau) == (pytest.approx(1.0), pytest.approx(1.0))

    def test_matches_brute_force_oracles(self):
        for seed in range(6):
            dx, dy = random_distance_pair(int(np.random.default_rng(seed).integers(5, 26)),
                                          seed=100 + seed)
            rho, tau = rank_correlations(dx, dy)
            tx, ty = upper_triangle(dx), upper_triangle(dy)
            assert rho == pytest.approx(brute_spearman(tx, ty), abs=1e-12)
            assert tau == pytest.approx(brute_kendall_tau_b(tx, ty), abs=1e-12)


class TestUcenter:
    def test_constant_off_diagonal_gives_zero(self):
        d = 3.7 * (np.ones((6, 6)) - np.eye(6))
        np.testing.assert_allclose(ucenter(d), 0.0, atol=1e-12)

    def test_matches_per_cell_oracle(self):
        dx, _ = random_distance_pair(5, seed=13)
        np.testing.assert_allclose(ucenter(dx), brute_ucentered(dx.data), atol=1e-12)

    def test_row_sum_identity(self):
        dx, _ = random_distance_pair(9, seed=14)
        u = ucenter(dx)
        np.testing.assert_allclose(u.sum(axis=1), 0.0, atol=1e-10)

    def test_requires_n4(self):
        with pytest.raises(ValueError, match="n >= 4"):
            ucenter(np.zeros((3, 3)))


class TestDcorTtest:
    def test_self_dependence(self):
        rng = np.random.default_rng(15)
        x = fm(rng.standard_normal((12, 4)))
        res = dcor_ttest(x, x)
        assert res.bias_corrected_r == pytest.approx(1.0, abs=1e-10)
        assert res.p_value == pytest.approx(0.0, abs=1e-12)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(16)
        for n in (4, 6, 9, 12):
            x = rng.standard_normal((n, 3))
            y = rng.standard_normal((n, 5))
            res = dcor_ttest(fm(x), fm(y))
            assert res.bias_corrected_r == pytest.approx(
                brute_bias_corrected_dcor(x, y), abs=1e-10
            )

    def test_degrees_of_freedom(self):
        rng = np.random.default_rng(17)
        x = fm(rng.standard_normal((20, 3)))
        y = fm(rng.standard_normal((20, 3)))
        res = dcor_ttest(x, y)
        assert res.degrees_of_freedom == 20 * 17 // 2 - 1

    def test_pvalue_is_upper_tail(self):
        rng = np.random.default_rng(18)
        x = fm(rng.standard_normal((15, 3)))
        y = fm(rng.standard_normal((15, 3)))
        res = dcor_ttest(x, y)
        expected = scipy.stats.t.sf(res.t_statistic, df=res.degrees_of_freedom)
        assert res.p_value == pytest.approx(float(expected), rel=1e-12)

    def test_requires_n4(self):
        rng = np.random.default_rng(19)
        x = fm(rng.standard_normal((3, 2)))
        with pytest.raises(ValueError, match="n >= 4"):
            dcor_ttest(x, x)


class TestSubsampleCi:
    def test_ratio_one_degenerate_interval(self):
        ds, _ = gen_shared_latent(20, 5, 5, 0.7, seed=20)
        for method in ("root", "percentile"):
            ci = subsample_ci(ds.x, ds.y, ratio=1.0, b=20, seed=1, method=method)
            assert ci.upper - ci.lower <= 1e-12
            assert ci.lower == pytest.approx(ci.point_estimate, abs=1e-12)

    def test_reproducible_across_threads(self):
        ds, _ = gen_shared_latent(30, 6, 6, 0.6, seed=21)
        a = subsample_ci(ds.x, ds.y, ratio=0.5, b=40, seed=3, threads=1)
        b = subsample_ci(ds.x, ds.y, ratio=0.5, b=40, seed=3, threads=4)
        assert (a.lower, a.upper) == (b.lower, b.upper)

    def test_interval_brackets_point_estimate(self):
        ds, _ = gen_shared_latent(60, 8, 8, 0.7, seed=22)
        ci = subsample_ci(ds.x, ds.y, ratio=0.3, b=300, seed=5)
        assert ci.lower <= ci.point_estimate <= ci.upper

    def test_small_ratio_rejected(self):
        ds, _ = gen_shared_latent(20, 5, 5, 0.5, seed=23)
        with pytest.raises(ValueError, match="< 4"):
            subsample_ci(ds.x, ds.y, ratio=0.1, b=10, seed=0)

    def test_percentile_method(self):
        ds, _ = gen_shared_latent(40, 6, 6, 0.8, seed=24)
        ci = subsample_ci(ds.x, ds.y, ratio=0.4, b=200, seed=7, method="percentile")
        assert ci.method == "percentile"
        assert ci.lower < ci.upper


class TestBootstrap:
    def test_all_identical_resample_recorded_missing(self):
        from hdpaired._util import STREAM_BOOTSTRAP, replicate_rng

        ds, _ = gen_shared_latent(4, 5, 5, 0.5, seed=25)
        res = bootstrap_distribution(ds.x, ds.y, b=400, seed=2)
        # find replicates that drew a constant index vector
        found_constant = False
        for i in range(400):
            idx = replicate_rng(2, STREAM_BOOTSTRAP, i).choice(4, size=4, replace=True)
            if len(set(idx.tolist())) == 1:
                assert math.isnan(res.replicates[i])
                found_constant = True
        assert found_constant, "no constant resample drawn; adjust b or seed"
        assert res.n_missing >= 1

    def test_upward_bias_on_planted_dependence(self):
        ds, _ = gen_shared_latent(100, 12, 12, 0.8, seed=26)
        res = bootstrap_distribution(ds.x, ds.y, b=300, seed=3)
        assert res.valid.mean() > res.observed

    def test_subsampling_not_systematically_above(self):
        ds, _ = gen_shared_latent(100, 12, 12, 0.8, seed=26)
        from hdpaired.distances import distance_matrix as dm

        ci = subsample_ci(ds.x, ds.y, ratio=0.5, b=300, seed=3)
        # reconstruct replicates through the same seeded path
        from hdpaired._util import STREAM_SUBSAMPLE, replicate_rng
        from hdpaired.inference import _triangle_corr_fast

        dx = dm(ds.x, "scaled_euclidean").data
        dy = dm(ds.y, "pearson_correlation_distance").data
        m = round(0.5 * 100)
        im, jm = np.triu_indices(m, 1)
        reps = []
        for i in range(300):
            idx = replicate_rng(3, STREAM_SUBSAMPLE, i).choice(100, size=m, replace=False)
            reps.append(_triangle_corr_fast(dx[idx[im], idx[jm]], dy[idx[im], idx[jm]]))
        reps = np.array(reps)
        se = reps.std(ddof=1) / math.sqrt(reps.size)
        assert reps.mean() - ci.point_estimate <= 2 * se
