class HlcError(Exception):
    """Base class for all codec errors."""


class BitstreamError(HlcError):
    """Malformed, truncated, or otherwise undecodable bitstream."""


class FormatError(HlcError):
    """Unsupported or corrupt image file."""
