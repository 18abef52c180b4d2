"""Exception hierarchy shared across the toolkit.

Two broad families matter for the CLI exit-code contract: data errors
(malformed files, bad arguments, impossible requests) and numerics errors
(results that violate mathematical guarantees beyond tolerance).
"""


class HelioError(Exception):
    """Base class for all toolkit errors."""


class DataError(HelioError):
    """Malformed input data or an invalid request. CLI exit code 3."""


class NumericsError(HelioError):
    """Numerical guarantee violated beyond tolerance. CLI exit code 4."""


class InvariantViolation(DataError):
    """A domain-type invariant does not hold."""


# FITS ingestion

class TruncatedFile(DataError):
    """Input is not whole 2880-byte blocks, or data is shorter than declared."""


class MalformedCard(DataError):
    """A header card is not ASCII or its value cannot be parsed."""


class MalformedHeader(DataError):
    """Mandatory header keywords are missing or structurally inconsistent."""


class UnsupportedBitpix(DataError):
    """BITPIX is outside {8, 16, 32, 64, -32, -64}."""


# Image preprocessing

class BadMaxDn(DataError):
    """Normalization ceiling below 1."""


class NonDivisibleFactor(DataError):
    """Downsampling factor does not divide the image dimensions."""


class PatchTooLarge(DataError):
    """Requested patch does not fit inside the image."""


# Feature store

class IoFailure(DataError):
    """Underlying stream failed while writing features."""


class BadMagic(DataError):
    """Stream does not start with the FEAT1 magic."""


class CorruptLength(DataError):
    """Stream ended before the declared record count was read."""


class NonFiniteValue(DataError):
    """A feature row contains NaN or infinity."""


class ExtractorMismatch(DataError):
    """Feature sets come from different extractors."""


class DimMismatch(DataError):
    """Feature or statistics dimensionalities differ."""


# Metric engine

class TooFewSamples(DataError):
    """Fewer samples than the estimator requires."""


class NotSymmetric(NumericsError):
    """Matrix is not symmetric within tolerance."""


class NotPsd(NumericsError):
    """Matrix has an eigenvalue below the negative tolerance."""


class SubsetTooLarge(DataError):
    """KID subset size exceeds one of the sample counts."""


class KTooLarge(DataError):
    """Neighbor count or component count exceeds what the data supports."""


class EmptyInput(DataError):
    """An operation received no data."""


# Statistics

class LengthMismatch(DataError):
    """Paired lists have different lengths."""


class DegenerateInput(DataError):
    """Zero-variance input where variation is required."""


class TooFewRuns(DataError):
    """Run aggregation needs at least two values."""


class BadArgs(DataError):
    """Arguments outside the documented domain."""


# Latent analysis

class DegenerateData(DataError):
    """Latent bank has zero variance."""


class BadComponent(DataError):
    """Component index outside the extracted directions."""
