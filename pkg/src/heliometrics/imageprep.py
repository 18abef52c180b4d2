"""Intensity preprocessing, downsampling, patch extraction, quantization,
and a deterministic synthetic-sun generator for pipeline self-tests.

The intensity transform follows the ingestion recipe for Level-1 EUV
counts: clip to a minimum of 1, natural log, normalize by log of the
instrument ceiling so the output lands in [0, 1].
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import BadMaxDn, InvariantViolation, NonDivisibleFactor, PatchTooLarge

DEFAULT_MAX_DN = 16383


@dataclass(eq=False)
class NormalizedImage:
    """A floating image with every pixel in [0, 1]."""

    data: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise InvariantViolation(f"expected 2-D image, got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise InvariantViolation("image has non-finite pixels")
        if self.data.size and (self.data.min() < 0.0 or self.data.max() > 1.0):
            raise InvariantViolation("pixels outside [0, 1]")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(eq=False)
class Patch:
    data: np.ndarray
    origin: tuple[int, int]
    size: int


@dataclass(frozen=True)
class SynthParams:
    """Control knobs for the synthetic test sun.

    The feature vocabulary mirrors what matters in real EUV frames: a bright
    disc, curved filament arcs near the limb, dark holes, and noise.
    """

    resolution: int = 256
    disc_radius_frac: float = 0.7
    loop_density: float = 0.0
    hole_count: int = 0
    noise_scale: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.disc_radius_frac < 1.0:
            raise InvariantViolation(f"disc_radius_frac={self.disc_radius_frac}")
        if self.loop_density < 0:
            raise InvariantViolation("loop_density must be >= 0")
        if self.hole_count < 0:
            raise InvariantViolation("hole_count must be >= 0")
        if self.resolution < 8:
            raise InvariantViolation("resolution must be >= 8")


def derive_seed(seed: int, label: str) -> int:
    """Stable per-item seed so parallel or reordered batches never change results."""
    digest = hashlib.blake2b(
        f"{seed}:{label}".encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


def normalize_intensity(
    raw: np.ndarray, max_dn: int = DEFAULT_MAX_DN, source_id: str = ""
) -> NormalizedImage:
    """ln(max(raw, 1)) / ln(max_dn), clamped to [0, 1].

    Total and monotone: everything at or below 1 DN maps to 0 (negative
    counts are instrument errors), the ceiling maps to 1.
    """
    if max_dn < 1:
        raise BadMaxDn(f"max_dn={max_dn}")
    arr = np.asarray(raw, dtype=np.float64)
    clipped = np.maximum(arr, 1.0)
    if max_dn == 1:
        out = np.zeros_like(clipped)
    else:
        out = np.log(clipped) / np.log(float(max_dn))
    return NormalizedImage(np.clip(out, 0.0, 1.0), source_id=source_id)


def downsample_box(img: NormalizedImage, factor: int) -> NormalizedImage:
    """Area averaging over factor x factor blocks."""
    if factor < 1:
        raise NonDivisibleFactor(f"factor={factor}")
    h, w = img.data.shape
    if h % factor or w % factor:
        raise NonDivisibleFactor(f"factor {factor} does not divide {h}x{w}")
    blocks = img.data.reshape(h // factor, factor, w // factor, factor)
    out = blocks.mean(axis=(1, 3))
    return NormalizedImage(np.clip(out, 0.0, 1.0), source_id=img.source_id)


def extract_patches(
    img: NormalizedImage, size: int, count: int, seed: int
) -> list[Patch]:
    """Draw ``count`` square patches with origins uniform over valid positions."""
    if size > min(img.height, img.width) or size < 1:
        raise PatchTooLarge(f"size {size} in {img.height}x{img.width} image")
    if count < 1:
        raise InvariantViolation("count must be >= 1")
    rng = np.random.default_rng(seed)
    rows = rng.integers(0, img.height - size + 1, size=count)
    cols = rng.integers(0, img.width - size + 1, size=count)
    return [
        Patch(img.data[r : r + size, c : c + size], (int(r), int(c)), size)
        for r, c in zip(rows, cols)
    ]


def quantize_u8(img: NormalizedImage) -> np.ndarray:
    """round(255 * x) with round-half-even, as uint8."""
    return np.rint(255.0 * img.data).astype(np.uint8)


def synth_sun(params: SynthParams) -> NormalizedImage:
    """Deterministic synthetic EUV-like frame.

    Bright disc of radius disc_radius_frac * resolution / 2 with a soft limb,
    Poisson(loop_density) bright arcs anchored near the limb, hole_count dark
    blobs on the disc, plus seeded Gaussian noise. Identical params (seed
    included) give bit-identical arrays.
    """
    res = params.resolution
    rng = np.random.default_rng(params.seed)
    center = (res - 1) / 2.0
    radius = params.disc_radius_frac * res / 2.0

    yy = np.arange(res, dtype=np.float64)[:, None] - center
    xx = np.arange(res, dtype=np.float64)[None, :] - center
    rr = np.sqrt(yy * yy + xx * xx)

    # Disc brightness: bright core falling toward the limb, soft edge.
    edge = 0.03 * res
    disc = 1.0 / (1.0 + np.exp((rr - radius) / edge))
    img = 0.12 + 0.55 * disc * (1.0 - 0.35 * np.clip(rr / radius, 0.0, 1.2) ** 2)

    n_loops = int(rng.poisson(params.loop_density)) if params.loop_density > 0 else 0
    for _ in range(n_loops):
        img += _loop_arc(res, center, radius, rng)

    for _ in range(params.hole_count):
        theta = rng.uniform(0, 2 * np.pi)
        dist = rng.uniform(0.1, 0.75) * radius
        cy, cx = center + dist * np.sin(theta), center + dist * np.cos(theta)
        hole_r = rng.uniform(0.08, 0.2) * radius
        d2 = (yy - (cy - center)) ** 2 + (xx - (cx - center)) ** 2
        img *= 1.0 - 0.75 * np.exp(-d2 / (2.0 * hole_r**2))

    if params.noise_scale > 0:
        img += params.noise_scale * rng.standard_normal((res, res))

    return NormalizedImage(
        np.clip(img, 0.0, 1.0), source_id=f"synth-seed{params.seed}"
    )


def _loop_arc(res: int, center: float, radius: float, rng) -> np.ndarray:
    """One bright coronal-loop-like arc: a partial circle bulging off the limb."""
    theta = rng.uniform(0, 2 * np.pi)
    foot_sep = rng.uniform(0.25, 0.7) * radius
    bulge = rng.uniform(0.4, 1.1) * foot_sep
    # Footpoints sit on the limb; the arc is a circle through both plus an apex.
    fy = center + radius * np.sin(theta)
    fx = center + radius * np.cos(theta)
    tangent = theta + np.pi / 2
    ay, ax = np.sin(tangent) * foot_sep, np.cos(tangent) * foot_sep
    t = np.linspace(0.0, 1.0, 160)
    # Quadratic Bezier from foot A to foot B with an outward control point.
    p0 = np.array([fy, fx])
    p2 = np.array([fy + ay, fx + ax])
    mid = (p0 + p2) / 2.0
    outward = (mid - center) / (np.linalg.norm(mid - center) + 1e-9)
    p1 = mid + outward * bulge
    curve = (
        (1 - t)[:, None] ** 2 * p0
        + 2 * ((1 - t) * t)[:, None] * p1
        + (t**2)[:, None] * p2
    )
    sigma = max(0.012 * res, 1.0)
    amp = rng.uniform(0.4, 0.7)
    canvas = np.zeros((res, res))
    yy = np.arange(res, dtype=np.float64)
    lo = np.clip(curve - 4 * sigma, 0, res - 1).astype(int)
    hi = np.clip(curve + 4 * sigma + 1, 1, res).astype(int)
    for (cy, cx), (ly, lx), (hy, hx) in zip(curve, lo, hi):
        wy = np.exp(-((yy[ly:hy] - cy) ** 2) / (2 * sigma**2))
        wx = np.exp(-((yy[lx:hx] - cx) ** 2) / (2 * sigma**2))
        canvas[ly:hy, lx:hx] = np.maximum(canvas[ly:hy, lx:hx], np.outer(wy, wx))
    return amp * canvas
