"""Feature-space metric engine: Gaussian statistics, Frechet distance,
unbiased kernel distance, k-NN precision/recall, patch-level Frechet
orchestration, and pixel-histogram diagnostics.

All accumulation happens in double precision regardless of the single
precision feature files. Every randomized estimator is a pure function of
its inputs plus a seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import (
    BadArgs,
    DimMismatch,
    EmptyInput,
    InvariantViolation,
    KTooLarge,
    NotPsd,
    NotSymmetric,
    NumericsError,
    PatchTooLarge,
    SubsetTooLarge,
    TooFewSamples,
)
from .featstore import FeatureSet
from .imageprep import NormalizedImage

# Frechet values in [-NEG_CLAMP, 0] are numerical noise and clamp to zero;
# anything more negative is a real numerics failure and raises.
NEG_CLAMP = 1e-6

DEFAULT_KID_SUBSETS = 100
DEFAULT_KID_SUBSET_SIZE = 1000
DEFAULT_KNN_K = 3
DEFAULT_SAMPLE_BUDGET = 50_000


@dataclass
class GaussianStats:
    """Sufficient statistics (mean, covariance, count) of one feature set."""

    mean: np.ndarray
    cov: np.ndarray
    n: int

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass
class PixelHistogram:
    bins: np.ndarray
    total: int

    @property
    def mean_pixel(self) -> float:
        return float(np.arange(256) @ self.bins) / self.total


@dataclass
class MetricReport:
    """Named metric values for one model, plus the parameters that made them."""

    model_id: str
    values: dict[str, float] = field(default_factory=dict)
    params: dict = field(default_factory=dict)


def gaussian_stats(fs: FeatureSet | np.ndarray) -> GaussianStats:
    """Sample mean and unbiased covariance (divisor n-1), symmetrized."""
    rows = fs.rows if isinstance(fs, FeatureSet) else np.asarray(fs)
    if rows.shape[0] < 2:
        raise TooFewSamples(f"covariance needs n >= 2, got {rows.shape[0]}")
    x = rows.astype(np.float64)
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (x.shape[0] - 1)
    cov = (cov + cov.T) / 2.0
    return GaussianStats(mean=mean, cov=cov, n=x.shape[0])


def sqrtm_psd(m: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues in [-tol, 0] are clamped to zero; below -tol raises NotPsd.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotSymmetric(f"expected square matrix, got {m.shape}")
    scale = np.linalg.norm(m, "fro")
    if not np.allclose(m, m.T, atol=1e-9 * max(scale, 1.0), rtol=0.0):
        raise NotSymmetric("matrix is not symmetric")
    if tol is None:
        tol = 1e-10 * max(float(np.trace(m)), 1.0)
    eigvals, eigvecs = np.linalg.eigh((m + m.T) / 2.0)
    if eigvals.min(initial=0.0) < -tol:
        raise NotPsd(f"eigenvalue {eigvals.min()} below -{tol}")
    root = eigvecs @ (np.sqrt(np.clip(eigvals, 0.0, None))[:, None] * eigvecs.T)
    root = (root + root.T) / 2.0
    if __debug__:
        residual = np.linalg.norm(root @ root - m, "fro")
        assert residual <= 1e-6 * max(scale, 1e-30), f"sqrtm residual {residual}"
    return root


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """Squared Frechet distance between two Gaussians.

    ||mu_a - mu_b||^2 + tr(S_a) + tr(S_b) - 2 tr((S_a^1/2 S_b S_a^1/2)^1/2),
    computed through the symmetrized product for numerical robustness.
    """
    if a.dim != b.dim:
        raise DimMismatch(f"dim {a.dim} vs {b.dim}")
    if np.array_equal(a.mean, b.mean) and np.array_equal(a.cov, b.cov):
        return 0.0
    diff = a.mean - b.mean
    root_a = sqrtm_psd(a.cov)
    inner = root_a @ b.cov @ root_a
    inner = (inner + inner.T) / 2.0
    eigvals = np.linalg.eigvalsh(inner)
    tr_cross = float(np.sqrt(np.clip(eigvals, 0.0, None)).sum())
    value = float(diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * tr_cross)
    if value < -NEG_CLAMP:
        raise NumericsError(f"Frechet distance {value} below clamp threshold")
    return max(value, 0.0)


def frechet_from_features(x: FeatureSet, y: FeatureSet) -> float:
    return frechet_distance(gaussian_stats(x), gaussian_stats(y))


def _poly3_kernel(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    d = u.shape[1]
    return (u @ v.T / d + 1.0) ** 3


def _mmd2_unbiased(x: np.ndarray, y: np.ndarray) -> float:
    kxx = _poly3_kernel(x, x)
    kyy = _poly3_kernel(y, y)
    kxy = _poly3_kernel(x, y)
    m, n = x.shape[0], y.shape[0]
    sum_xx = (kxx.sum() - np.trace(kxx)) / (m * (m - 1))
    sum_yy = (kyy.sum() - np.trace(kyy)) / (n * (n - 1))
    return float(sum_xx + sum_yy - 2.0 * kxy.mean())


def kid(
    x: FeatureSet,
    y: FeatureSet,
    subset_size: int | None = None,
    n_subsets: int = DEFAULT_KID_SUBSETS,
    seed: int = 0,
) -> tuple[float, float]:
    """Unbiased squared MMD with kernel (u.v/d + 1)^3, averaged over subsets.

    Within-set sums exclude the diagonal. Returns (mean, std) over
    ``n_subsets`` seeded subsets drawn without replacement from each side;
    std uses divisor n-1 (0.0 for a single subset).
    """
    if x.dim != y.dim:
        raise DimMismatch(f"dim {x.dim} vs {y.dim}")
    limit = min(x.count, y.count)
    if subset_size is None:
        subset_size = min(DEFAULT_KID_SUBSET_SIZE, limit)
    if subset_size > limit:
        raise SubsetTooLarge(f"subset_size {subset_size} > min count {limit}")
    if subset_size < 2:
        raise TooFewSamples("unbiased MMD needs subsets of size >= 2")
    xr = x.rows.astype(np.float64)
    yr = y.rows.astype(np.float64)
    rng = np.random.default_rng(seed)
    values = np.empty(n_subsets)
    for i in range(n_subsets):
        xi = rng.choice(x.count, size=subset_size, replace=False)
        yi = rng.choice(y.count, size=subset_size, replace=False)
        values[i] = _mmd2_unbiased(xr[xi], yr[yi])
    std = float(values.std(ddof=1)) if n_subsets > 1 else 0.0
    return float(values.mean()), std


def precision_recall(
    real: FeatureSet, fake: FeatureSet, k: int = DEFAULT_KNN_K
) -> tuple[float, float]:
    """k-NN manifold precision and recall.

    A point lies on a set's manifold when it falls within the k-th-neighbor
    radius of at least one of the set's points (self excluded from the
    neighbor count). Precision checks fake against the real manifold, recall
    the reverse.
    """
    if real.dim != fake.dim:
        raise DimMismatch(f"dim {real.dim} vs {fake.dim}")
    if k < 1 or k >= min(real.count, fake.count):
        raise KTooLarge(f"k={k} with counts {real.count}/{fake.count}")
    r = real.rows.astype(np.float64)
    f = fake.rows.astype(np.float64)
    precision = _manifold_fraction(r, f, k)
    recall = _manifold_fraction(f, r, k)
    return precision, recall


def _manifold_fraction(anchor: np.ndarray, query: np.ndarray, k: int) -> float:
    d_self = cdist(anchor, anchor)
    np.fill_diagonal(d_self, np.inf)
    radii = np.partition(d_self, k - 1, axis=1)[:, k - 1]
    d_cross = cdist(anchor, query)
    inside = (d_cross <= radii[:, None]).any(axis=0)
    return float(inside.mean())


def patch_fid(
    real_imgs: Sequence[NormalizedImage],
    fake_imgs: Sequence[NormalizedImage],
    size: int,
    n_patches: int,
    featurize: Callable[[np.ndarray], np.ndarray],
    seed: int = 0,
) -> float:
    """Frechet distance between featurized random patches of the two corpora.

    Patch i comes from image i mod corpus size (so a full-image patch count
    equal to the corpus size reduces to plain FID on the same features) with
    a seeded uniform origin. Both sides use the same seed: identical inputs
    give exactly zero.
    """
    if not len(real_imgs) or not len(fake_imgs):
        raise EmptyInput("patch_fid needs non-empty image sources")
    real_feats = featurize(sample_patches(real_imgs, size, n_patches, seed))
    fake_feats = featurize(sample_patches(fake_imgs, size, n_patches, seed))
    if real_feats.shape[1] != fake_feats.shape[1]:
        raise DimMismatch("featurize returned unequal dims")
    return frechet_distance(gaussian_stats(real_feats), gaussian_stats(fake_feats))


def sample_patches(
    imgs: Sequence[NormalizedImage], size: int, n_patches: int, seed: int
) -> np.ndarray:
    rng = np.random.default_rng(seed)
    out = np.empty((n_patches, size, size))
    for i in range(n_patches):
        img = imgs[i % len(imgs)]
        if size > min(img.height, img.width):
            raise PatchTooLarge(f"patch {size} in {img.height}x{img.width} image")
        r = int(rng.integers(0, img.height - size + 1))
        c = int(rng.integers(0, img.width - size + 1))
        out[i] = img.data[r : r + size, c : c + size]
    return out


def flatten_featurizer(patches: np.ndarray) -> np.ndarray:
    """Identity features: each patch flattened to one row."""
    return patches.reshape(patches.shape[0], -1)


class PcaFeaturizer:
    """Linear projection onto the top principal directions of a reference
    patch sample; a cheap stand-in for a neural embedding at desk scale."""

    def __init__(self, reference: np.ndarray, dim: int = 16):
        flat = flatten_featurizer(reference).astype(np.float64)
        self.mean = flat.mean(axis=0)
        _, _, vt = np.linalg.svd(flat - self.mean, full_matrices=False)
        self.basis = vt[:dim]

    def __call__(self, patches: np.ndarray) -> np.ndarray:
        flat = flatten_featurizer(patches).astype(np.float64)
        return (flat - self.mean) @ self.basis.T


def pixel_histogram(imgs) -> PixelHistogram:
    """256-bin counts over every pixel of a sequence of uint8 images."""
    bins = np.zeros(256, dtype=np.int64)
    total = 0
    for arr in imgs:
        arr = np.asarray(arr)
        if arr.dtype != np.uint8:
            raise InvariantViolation(f"expected uint8 image, got dtype {arr.dtype}")
        bins += np.bincount(arr.ravel(), minlength=256)
        total += arr.size
    if total == 0:
        raise EmptyInput("no pixels to histogram")
    return PixelHistogram(bins=bins, total=total)


def tail_mass(h: PixelHistogram, cutoff: int) -> tuple[float, float]:
    """(fraction of pixels < cutoff, fraction >= cutoff); the two sum to 1."""
    if not 0 <= cutoff <= 255:
        raise BadArgs(f"cutoff {cutoff} outside [0, 255]")
    left = float(h.bins[:cutoff].sum()) / h.total
    return left, 1.0 - left


def subsample_rows(fs: FeatureSet, budget: int, seed: int) -> FeatureSet:
    """Seeded without-replacement cap on the number of rows used."""
    if fs.count <= budget:
        return fs
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(fs.count, size=budget, replace=False))
    return FeatureSet(
        extractor_id=fs.extractor_id,
        rows=fs.rows[idx],
        sample_ids=[fs.sample_ids[i] for i in idx],
    )
