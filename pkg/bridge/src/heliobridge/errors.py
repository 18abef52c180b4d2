class BridgeError(Exception):
    """Base class for extraction failures."""


class MissingCheckpoint(BridgeError):
    """The chosen extractor needs a weights file and none was given or found."""


class MissingDependency(BridgeError):
    """An optional backbone library is not installed."""


class UnreadableImage(BridgeError):
    """An input file could not be decoded as PNG or HTIL."""
