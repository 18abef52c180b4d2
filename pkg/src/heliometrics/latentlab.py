"""Unsupervised latent-direction extraction: PCA over intermediate latent
vectors and edit sequences along a chosen component.

Banks travel as FEAT1 files whose extractor id names the latent space
(typically "W"); directions export the same way plus an eigenvalue sidecar.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BadComponent, DegenerateData, InvariantViolation, KTooLarge
from .featstore import FeatureSet

# Singular values this far below the leading one are rank noise, not signal.
_RANK_TOL = 1e-12


@dataclass
class LatentBank:
    vectors: np.ndarray
    space_id: str = "W"

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise InvariantViolation(f"bank must be 2-D, got {self.vectors.shape}")
        if not np.all(np.isfinite(self.vectors)):
            raise InvariantViolation("bank has non-finite entries")

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def width(self) -> int:
        return self.vectors.shape[1]

    @classmethod
    def from_features(cls, fs: FeatureSet) -> "LatentBank":
        return cls(vectors=fs.rows.astype(np.float64), space_id=fs.extractor_id)


@dataclass
class PcaDirections:
    components: np.ndarray
    eigenvalues: np.ndarray
    mean: np.ndarray

    @property
    def k(self) -> int:
        return self.components.shape[0]


def pca(bank: LatentBank, k: int) -> PcaDirections:
    """Top-k principal directions of the mean-centered bank.

    Computed through the SVD of the centered data (the acceptance oracle
    cross-checks against a dense covariance eigensolver). Sign convention:
    the largest-magnitude coordinate of each component is positive.
    Eigenvalues use the sample covariance (divisor n-1); values that are
    pure rank noise are clamped to zero.
    """
    n, w = bank.vectors.shape
    if k < 1 or k > min(n - 1, w):
        raise KTooLarge(f"k={k} with bank {n}x{w}")
    if n < w:
        warnings.warn(
            f"bank has fewer vectors ({n}) than dimensions ({w}); "
            "directions will be noisy",
            stacklevel=2,
        )
    mean = bank.vectors.mean(axis=0)
    centered = bank.vectors - mean
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    if svals[0] == 0.0:
        raise DegenerateData("bank has zero variance")
    eigvals = svals**2 / (n - 1)
    eigvals[svals < _RANK_TOL * svals[0]] = 0.0
    components = vt[:k].copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaDirections(components=components, eigenvalues=eigvals[:k], mean=mean)


def coordinate(dirs: PcaDirections, vector: np.ndarray, component: int) -> float:
    """Coordinate of a vector along one component, measured from the mean."""
    if not 0 <= component < dirs.k:
        raise BadComponent(f"component {component} of {dirs.k}")
    return float((np.asarray(vector) - dirs.mean) @ dirs.components[component])


def edit_sequence(
    dirs: PcaDirections,
    base: np.ndarray,
    component: int,
    coords,
) -> list[np.ndarray]:
    """Vectors whose coordinate along the chosen component equals each value
    in ``coords``, leaving all other principal coordinates untouched."""
    if not 0 <= component < dirs.k:
        raise BadComponent(f"component {component} of {dirs.k}")
    base = np.asarray(base, dtype=np.float64)
    v = dirs.components[component]
    current = float((base - dirs.mean) @ v)
    return [base + (float(c) - current) * v for c in coords]


def bank_to_features(bank: LatentBank) -> FeatureSet:
    return FeatureSet(
        extractor_id=bank.space_id, rows=bank.vectors.astype(np.float32)
    )


def directions_to_features(dirs: PcaDirections, space_id: str) -> FeatureSet:
    return FeatureSet(
        extractor_id=f"{space_id}:pca",
        rows=dirs.components.astype(np.float32),
        sample_ids=[f"pc{i:02d}" for i in range(dirs.k)],
    )
