"""HLC: a lightweight mezzanine image codec.

16x4 coding units, dependency-free palette clustering, DC/VT/HT prediction
with an integer 5/3 transform, Lagrangian mode decision, and entropy coding
that reuses the rate estimators' statistics verbatim.
"""

from .codec import (
    EncoderConfig,
    decode_frame,
    decode_frame_full,
    encode_frame,
    encode_frame_full,
)
from .core import Frame, make_frame
from .errors import BitstreamError, FormatError, HlcError
from .imageio import load_image, store_image

__version__ = "0.1.0"

__all__ = [
    "BitstreamError",
    "EncoderConfig",
    "FormatError",
    "Frame",
    "HlcError",
    "decode_frame",
    "decode_frame_full",
    "encode_frame",
    "encode_frame_full",
    "load_image",
    "make_frame",
    "store_image",
    "__version__",
]
