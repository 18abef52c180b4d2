import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heliometrics.errors import (
    BadArgs,
    DimMismatch,
    EmptyInput,
    KTooLarge,
    NotPsd,
    NotSymmetric,
    SubsetTooLarge,
    TooFewSamples,
)
from heliometrics.featstore import FeatureSet
from heliometrics.imageprep import NormalizedImage
from heliometrics.metrics import (
    GaussianStats,
    PcaFeaturizer,
    flatten_featurizer,
    frechet_distance,
    frechet_from_features,
    gaussian_stats,
    kid,
    patch_fid,
    pixel_histogram,
    precision_recall,
    sqrtm_psd,
    subsample_rows,
    tail_mass,
)


def fs(rows, ext="toy"):
    return FeatureSet(ext, np.asarray(rows, dtype=np.float32))


# ------------------------------------------------------------ gaussian_stats


def test_stats_two_points():
    stats = gaussian_stats(fs([[0.0], [2.0]]))
    assert stats.mean[0] == 1.0
    assert stats.cov[0, 0] == 2.0  # divisor n-1
    assert stats.n == 2


def test_stats_identical_rows():
    stats = gaussian_stats(fs([[3.0, 4.0]] * 5))
    assert np.allclose(stats.cov, 0.0)


def test_stats_recovers_diagonal_gaussian():
    rng = np.random.default_rng(11)
    truth = np.array([1.0, 4.0, 0.25])
    draws = rng.standard_normal((500, 3)) * np.sqrt(truth)
    stats = gaussian_stats(fs(draws))
    assert np.all(np.abs(np.diag(stats.cov) - truth) <= 0.15 * truth)


def test_stats_too_few():
    with pytest.raises(TooFewSamples):
        gaussian_stats(fs([[1.0, 2.0]]))


# ------------------------------------------------------------ sqrtm_psd


def test_sqrtm_identity():
    assert np.allclose(sqrtm_psd(np.eye(4)), np.eye(4))


def test_sqrtm_diagonal():
    assert np.allclose(sqrtm_psd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))


@pytest.mark.parametrize("d", [2, 8, 32])
def test_sqrtm_self_verifies(d):
    rng = np.random.default_rng(d)
    a = rng.standard_normal((d, d))
    m = a.T @ a
    s = sqrtm_psd(m)
    assert np.linalg.norm(s @ s - m, "fro") <= 1e-6 * np.linalg.norm(m, "fro")
    assert np.allclose(s, s.T)


def test_sqrtm_rejects_indefinite():
    with pytest.raises(NotPsd):
        sqrtm_psd(np.diag([1.0, -0.5]))


def test_sqrtm_rejects_asymmetric():
    with pytest.raises(NotSymmetric):
        sqrtm_psd(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_sqrtm_clamps_tiny_negative():
    m = np.diag([1.0, -1e-14])
    s = sqrtm_psd(m)
    assert s[1, 1] == 0.0


# ------------------------------------------------------------ frechet


def g(mean, var):
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.diag(np.atleast_1d(np.asarray(var, dtype=float)))
    return GaussianStats(mean=mean, cov=cov, n=1000)


def test_frechet_self_zero():
    stats = gaussian_stats(fs(np.random.default_rng(0).random((20, 4))))
    assert frechet_distance(stats, stats) == 0.0


def test_frechet_mean_shift():
    assert frechet_distance(g(0.0, 1.0), g(1.0, 1.0)) == pytest.approx(1.0, abs=1e-12)


def test_frechet_variance_shift():
    assert frechet_distance(g(0.0, 1.0), g(0.0, 4.0)) == pytest.approx(1.0, abs=1e-12)


def closed_form_diag(m1, v1, m2, v2):
    return float(
        np.sum((np.asarray(m1) - np.asarray(m2)) ** 2)
        + np.sum((np.sqrt(np.asarray(v1)) - np.sqrt(np.asarray(v2))) ** 2)
    )


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_frechet_matches_closed_form_on_diagonals(seed, d):
    rng = np.random.default_rng(seed)
    m1, m2 = rng.normal(size=(2, d)) * 3
    v1, v2 = rng.uniform(0.01, 5.0, size=(2, d))
    got = frechet_distance(g(m1, v1), g(m2, v2))
    assert got == pytest.approx(closed_form_diag(m1, v1, m2, v2), abs=1e-8)


def test_frechet_symmetry_random_full_cov():
    rng = np.random.default_rng(5)
    a = gaussian_stats(fs(rng.random((40, 6))))
    b = gaussian_stats(fs(rng.random((50, 6)) + 0.3))
    ab = frechet_distance(a, b)
    ba = frechet_distance(b, a)
    assert abs(ab - ba) <= 1e-6 * (1.0 + ab)


def test_frechet_dim_mismatch():
    with pytest.raises(DimMismatch):
        frechet_distance(g([0.0], [1.0]), g([0.0, 0.0], [1.0, 1.0]))


def test_metrics_depend_only_on_row_multiset():
    rng = np.random.default_rng(21)
    x = rng.random((25, 4)).astype(np.float32)
    y = (rng.random((25, 4)) + 0.1).astype(np.float32)
    shuffled = x[rng.permutation(25)]
    assert frechet_from_features(fs(shuffled), fs(y)) == pytest.approx(
        frechet_from_features(fs(x), fs(y)), rel=1e-9, abs=1e-12
    )
    full_kid = lambda rows: kid(fs(rows), fs(y), subset_size=25, n_subsets=1, seed=0)[0]
    assert full_kid(shuffled) == pytest.approx(full_kid(x), rel=1e-9, abs=1e-12)
    assert precision_recall(fs(shuffled), fs(y), k=3) == precision_recall(
        fs(x), fs(y), k=3
    )


def test_fid_invariant_under_common_permutation():
    rng = np.random.default_rng(8)
    x = rng.random((30, 5)).astype(np.float32)
    y = (rng.random((30, 5)) + 0.2).astype(np.float32)
    perm = rng.permutation(5)
    base = frechet_from_features(fs(x), fs(y))
    permuted = frechet_from_features(fs(x[:, perm]), fs(y[:, perm]))
    assert permuted == pytest.approx(base, rel=1e-9, abs=1e-9)


# ------------------------------------------------------------ kid


def kid_oracle(x, y):
    """Naive double-loop unbiased MMD^2 with the cubic dot-product kernel."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    d = x.shape[1]
    k = lambda u, v: (float(u @ v) / d + 1.0) ** 3
    m, n = len(x), len(y)
    sxx = sum(k(x[i], x[j]) for i in range(m) for j in range(m) if i != j)
    syy = sum(k(y[i], y[j]) for i in range(n) for j in range(n) if i != j)
    sxy = sum(k(x[i], y[j]) for i in range(m) for j in range(n))
    return sxx / (m * (m - 1)) + syy / (n * (n - 1)) - 2.0 * sxy / (m * n)


def test_kid_identical_point_masses():
    x = fs([[1.0, 2.0]] * 10)
    mean, std = kid(x, x, subset_size=10, n_subsets=3, seed=0)
    assert mean == 0.0
    assert std == 0.0


def test_kid_hand_case():
    x = fs(np.zeros((12, 4)))
    y = fs(np.tile([2.0, 0.0, 0.0, 0.0], (12, 1)))
    mean, _ = kid(x, y, subset_size=12, n_subsets=1, seed=0)
    assert mean == pytest.approx(7.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 50), st.integers(1, 64))
def test_kid_matches_bruteforce(seed, n, d):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d)).astype(np.float32)
    y = (rng.standard_normal((n, d)) * 0.5 + 0.3).astype(np.float32)
    mean, _ = kid(fs(x), fs(y), subset_size=n, n_subsets=1, seed=1)
    assert mean == pytest.approx(kid_oracle(x, y), abs=1e-10)


def test_kid_subset_too_large():
    with pytest.raises(SubsetTooLarge):
        kid(fs(np.zeros((5, 2))), fs(np.zeros((9, 2))), subset_size=6)


def test_kid_deterministic_in_seed():
    rng = np.random.default_rng(2)
    x = fs(rng.random((30, 4)))
    y = fs(rng.random((25, 4)))
    assert kid(x, y, subset_size=10, n_subsets=5, seed=3) == kid(
        x, y, subset_size=10, n_subsets=5, seed=3
    )


# ------------------------------------------------------------ precision/recall


def pr_oracle(real, fake, k):
    """All-pairs membership check, one point at a time."""
    real = np.asarray(real, dtype=np.float64)
    fake = np.asarray(fake, dtype=np.float64)

    def radius(pts, i):
        dists = sorted(
            float(np.linalg.norm(pts[i] - pts[j])) for j in range(len(pts)) if j != i
        )
        return dists[k - 1]

    r_real = [radius(real, i) for i in range(len(real))]
    r_fake = [radius(fake, i) for i in range(len(fake))]
    precision = np.mean([
        any(np.linalg.norm(f - real[i]) <= r_real[i] for i in range(len(real)))
        for f in fake
    ])
    recall = np.mean([
        any(np.linalg.norm(r - fake[i]) <= r_fake[i] for i in range(len(fake)))
        for r in real
    ])
    return float(precision), float(recall)


def test_pr_identical_sets():
    rng = np.random.default_rng(0)
    x = rng.random((20, 3)).astype(np.float32)
    assert precision_recall(fs(x), fs(x), k=3) == (1.0, 1.0)


def test_pr_separated_clusters():
    rng = np.random.default_rng(1)
    real = rng.random((30, 2)).astype(np.float32)
    fake = (rng.random((30, 2)) + 1000.0).astype(np.float32)
    assert precision_recall(fs(real), fs(fake), k=3) == (0.0, 0.0)


def test_pr_planted_half():
    # 10 fake points: 5 duplicates of real points, 5 far away.
    rng = np.random.default_rng(2)
    real = rng.random((20, 2)).astype(np.float32)
    fake = np.vstack([real[:5], real[:5] + 500.0]).astype(np.float32)
    precision, _ = precision_recall(fs(real), fs(fake), k=3)
    assert precision == 0.5


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(5, 40), st.integers(1, 4))
def test_pr_matches_bruteforce(seed, n, k):
    rng = np.random.default_rng(seed)
    real = rng.standard_normal((n, 3)).astype(np.float32)
    fake = (rng.standard_normal((n + 3, 3)) * 1.2 + 0.5).astype(np.float32)
    got = precision_recall(fs(real), fs(fake), k=k)
    assert got == pytest.approx(pr_oracle(real, fake, k), abs=1e-12)


def test_pr_k_too_large():
    with pytest.raises(KTooLarge):
        precision_recall(fs(np.zeros((5, 2))), fs(np.ones((8, 2))), k=5)


# ------------------------------------------------------------ patch fid


def imgs_from(rng, n, side=12):
    return [NormalizedImage(rng.random((side, side))) for _ in range(n)]


def test_patch_fid_identical_sources_zero():
    rng = np.random.default_rng(0)
    imgs = imgs_from(rng, 5)
    val = patch_fid(imgs, list(imgs), size=6, n_patches=40,
                    featurize=flatten_featurizer, seed=3)
    assert val == 0.0


def test_patch_fid_full_size_reduces_to_plain_fid():
    rng = np.random.default_rng(1)
    a = imgs_from(rng, 6)
    b = imgs_from(rng, 6)
    via_patches = patch_fid(a, b, size=12, n_patches=6,
                            featurize=flatten_featurizer, seed=0)
    plain = frechet_distance(
        gaussian_stats(np.stack([im.data.ravel() for im in a])),
        gaussian_stats(np.stack([im.data.ravel() for im in b])),
    )
    assert via_patches == pytest.approx(plain, rel=1e-12, abs=1e-12)


def test_patch_fid_pure_function_of_seed():
    rng = np.random.default_rng(2)
    a = imgs_from(rng, 4)
    b = imgs_from(rng, 4)
    args = dict(size=6, n_patches=30, featurize=flatten_featurizer)
    assert patch_fid(a, b, seed=7, **args) == patch_fid(a, b, seed=7, **args)
    assert patch_fid(a, b, seed=7, **args) != patch_fid(a, b, seed=8, **args)


def test_patch_fid_empty_source():
    with pytest.raises(EmptyInput):
        patch_fid([], [], size=4, n_patches=2, featurize=flatten_featurizer)


def test_pca_featurizer_shape():
    rng = np.random.default_rng(3)
    ref = rng.random((50, 6, 6))
    feat = PcaFeaturizer(ref, dim=5)
    out = feat(rng.random((7, 6, 6)))
    assert out.shape == (7, 5)


# ------------------------------------------------------------ histograms


def test_histogram_constant_image():
    h = pixel_histogram([np.full((4, 4), 7, dtype=np.uint8)])
    assert h.bins[7] == 16
    assert h.total == 16
    assert h.mean_pixel == 7.0


def test_histogram_identical_sets_l1_zero():
    rng = np.random.default_rng(4)
    imgs = [rng.integers(0, 256, (8, 8)).astype(np.uint8) for _ in range(3)]
    h1 = pixel_histogram(imgs)
    h2 = pixel_histogram(list(imgs))
    assert np.abs(h1.bins - h2.bins).sum() == 0


def test_histogram_two_value_mean():
    imgs = [np.zeros((2, 2), dtype=np.uint8), np.full((2, 2), 255, dtype=np.uint8)]
    h = pixel_histogram(imgs)
    assert h.mean_pixel == 127.5


def test_histogram_empty():
    with pytest.raises(EmptyInput):
        pixel_histogram([])


def test_tail_mass_cutoffs():
    h = pixel_histogram([np.full((4, 4), 7, dtype=np.uint8)])
    assert tail_mass(h, 0) == (0.0, 1.0)
    assert tail_mass(h, 150) == (1.0, 0.0)
    left, right = tail_mass(h, 8)
    assert left == 1.0 and right == 0.0
    with pytest.raises(BadArgs):
        tail_mass(h, 256)


def test_tail_mass_sums_to_one():
    rng = np.random.default_rng(5)
    h = pixel_histogram([rng.integers(0, 256, (16, 16)).astype(np.uint8)])
    for cutoff in [1, 77, 150, 255]:
        left, right = tail_mass(h, cutoff)
        assert left + right == 1.0


# ------------------------------------------------------------ subsample


def test_subsample_budget():
    rng = np.random.default_rng(6)
    x = fs(rng.random((100, 3)))
    sub = subsample_rows(x, 10, seed=0)
    assert sub.count == 10
    assert subsample_rows(x, 200, seed=0) is x
    again = subsample_rows(x, 10, seed=0)
    assert np.array_equal(sub.rows, again.rows)
