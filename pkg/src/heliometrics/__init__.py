"""heliometrics: measurement stack for generative models of solar EUV images."""

__version__ = "0.1.0"

from .errors import DataError, HelioError, NumericsError
from .featstore import FeatureSet, concat, load_features, read_features, save_features, write_features
from .fitsio import FitsImage, QualityVerdict, build_image, parse_fits, quality_filter, write_fits
from .imageprep import (
    NormalizedImage,
    Patch,
    SynthParams,
    downsample_box,
    extract_patches,
    normalize_intensity,
    quantize_u8,
    synth_sun,
)
from .latentlab import LatentBank, PcaDirections, edit_sequence, pca
from .metrics import (
    GaussianStats,
    MetricReport,
    PixelHistogram,
    frechet_distance,
    frechet_from_features,
    gaussian_stats,
    kid,
    patch_fid,
    pixel_histogram,
    precision_recall,
    sqrtm_psd,
    tail_mass,
)
from .statlab import (
    MetricTable,
    RunAggregate,
    StudyResponse,
    aggregate_runs,
    binomial_test_two_sided,
    pearson,
    spearman,
    study_report,
)

__all__ = [
    "DataError",
    "FeatureSet",
    "FitsImage",
    "GaussianStats",
    "HelioError",
    "LatentBank",
    "MetricReport",
    "MetricTable",
    "NormalizedImage",
    "NumericsError",
    "Patch",
    "PcaDirections",
    "PixelHistogram",
    "QualityVerdict",
    "RunAggregate",
    "StudyResponse",
    "SynthParams",
    "aggregate_runs",
    "binomial_test_two_sided",
    "build_image",
    "concat",
    "downsample_box",
    "edit_sequence",
    "extract_patches",
    "frechet_distance",
    "frechet_from_features",
    "gaussian_stats",
    "kid",
    "load_features",
    "normalize_intensity",
    "parse_fits",
    "patch_fid",
    "pca",
    "pearson",
    "pixel_histogram",
    "precision_recall",
    "quality_filter",
    "quantize_u8",
    "read_features",
    "save_features",
    "spearman",
    "sqrtm_psd",
    "study_report",
    "synth_sun",
    "tail_mass",
    "write_features",
    "write_fits",
]
