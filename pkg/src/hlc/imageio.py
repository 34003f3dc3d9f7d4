"""Image file I/O for the harness: PPM (P6) and truecolor PNG.

PNG support is deliberately narrow - color type 2 at 8 or 16 bits,
non-interlaced - but reads all five scanline filters.  16-bit files map to
10-bit frames by a right shift of 6 (and back by a left shift on store).
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .core import Frame, make_frame
from .errors import FormatError

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
MAX_DIMENSION = 0xFFFF


def load_image(path, ycbcr: bool = False) -> Frame:
    """Read a PPM or PNG file into a Frame (component order R,G,B).

    With ycbcr=True the samples are converted to full-range BT.709
    Y'CbCr after loading.
    """
    path = Path(path)
    data = path.read_bytes()
    if data[:2] == b"P6":
        frame = _parse_ppm(data)
    elif data[: len(PNG_SIGNATURE)] == PNG_SIGNATURE:
        frame = _parse_png(data)
    else:
        raise FormatError(f"{path}: not a P6 PPM or PNG file")
    if frame.width > MAX_DIMENSION or frame.height > MAX_DIMENSION:
        raise FormatError(f"{path}: dimensions exceed {MAX_DIMENSION}")
    return rgb_to_ycbcr(frame) if ycbcr else frame


def store_image(frame: Frame, path, ycbcr: bool = False) -> None:
    """Write a Frame as PPM (8-bit) or PNG (8-bit, or 10-bit as 16-bit)."""
    if ycbcr:
        frame = ycbcr_to_rgb(frame)
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".ppm":
        if frame.bit_depth != 8:
            raise FormatError("PPM output supports 8-bit frames only")
        path.write_bytes(_build_ppm(frame))
    elif suffix == ".png":
        path.write_bytes(_build_png(frame))
    else:
        raise FormatError(f"unsupported output format {suffix!r}")


def _parse_ppm(data: bytes) -> Frame:
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PPM header")
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    width, height, maxval = (int(f) for f in fields)
    if maxval != 255:
        raise FormatError(f"PPM maxval {maxval} unsupported (8-bit only)")
    expected = width * height * 3
    raw = data[pos : pos + expected]
    if len(raw) < expected:
        raise FormatError("PPM pixel data too short")
    arr = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3)
    return make_frame((arr[:, :, 0], arr[:, :, 1], arr[:, :, 2]), bit_depth=8)


def _build_ppm(frame: Frame) -> bytes:
    header = f"P6\n{frame.width} {frame.height}\n255\n".encode()
    arr = np.stack(frame.planes, axis=-1).astype(np.uint8)
    return header + arr.tobytes()


def _png_chunk(tag: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + tag
        + payload
        + struct.pack(">I", zlib.crc32(tag + payload))
    )


def _build_png(frame: Frame) -> bytes:
    if frame.bit_depth == 8:
        depth = 8
        arr = np.stack(frame.planes, axis=-1).astype(">u1")
    else:
        depth = 16
        arr = (np.stack(frame.planes, axis=-1) << 6).astype(">u2")
    rows = arr.reshape(frame.height, -1).view(np.uint8).reshape(frame.height, -1)
    raw = b"".join(b"\x00" + r.tobytes() for r in rows)
    ihdr = struct.pack(">IIBBBBB", frame.width, frame.height, depth, 2, 0, 0, 0)
    return (
        PNG_SIGNATURE
        + _png_chunk(b"IHDR", ihdr)
        + _png_chunk(b"IDAT", zlib.compress(raw, 6))
        + _png_chunk(b"IEND", b"")
    )


def _parse_png(data: bytes) -> Frame:
    pos = len(PNG_SIGNATURE)
    ihdr = None
    idat = bytearray()
    while pos + 8 <= len(data):
        length, tag = struct.unpack_from(">I4s", data, pos)
        pos += 8
        payload = data[pos : pos + length]
        pos += length + 4  # skip CRC
        if tag == b"IHDR":
            ihdr = struct.unpack(">IIBBBBB", payload)
        elif tag == b"IDAT":
            idat += payload
        elif tag == b"IEND":
            break
    if ihdr is None:
        raise FormatError("PNG missing IHDR")
    width, height, depth, color, comp, filt, interlace = ihdr
    if color != 2 or comp != 0 or filt != 0 or interlace != 0:
        raise FormatError("only non-interlaced truecolor PNG is supported")
    if depth not in (8, 16):
        raise FormatError(f"PNG bit depth {depth} unsupported")
    bpp = 3 * (depth // 8)
    stride = width * bpp
    try:
        raw = zlib.decompress(bytes(idat))
    except zlib.error as exc:
        raise FormatError(f"PNG inflate failed: {exc}") from None
    if len(raw) < height * (stride + 1):
        raise FormatError("PNG pixel data too short")
    rows = np.frombuffer(raw[: height * (stride + 1)], dtype=np.uint8)
    rows = rows.reshape(height, stride + 1)
    unfiltered = _unfilter(rows, bpp, stride)
    if depth == 8:
        arr = unfiltered.reshape(height, width, 3).astype(np.int32)
        bit_depth = 8
    else:
        arr = np.ascontiguousarray(unfiltered).view(">u2").astype(np.int32)
        arr = (arr >> 6).reshape(height, width, 3)
        bit_depth = 10
    return make_frame((arr[:, :, 0], arr[:, :, 1], arr[:, :, 2]), bit_depth=bit_depth)


def _unfilter(rows: np.ndarray, bpp: int, stride: int) -> np.ndarray:
    """Undo PNG scanline filters; returns (height, stride) uint8."""
    height = rows.shape[0]
    out = np.zeros((height, stride), dtype=np.uint8)
    for y in range(height):
        ftype = rows[y, 0]
        cur = rows[y, 1:].astype(np.int32)
        prev = out[y - 1].astype(np.int32) if y else np.zeros(stride, np.int32)
        if ftype == 0:
            line = cur
        elif ftype == 2:
            line = (cur + prev) & 0xFF
        elif ftype in (1, 3, 4):
            line = np.zeros(stride, np.int32)
            for x in range(stride):
                a = line[x - bpp] if x >= bpp else 0
                b = prev[x]
                c = prev[x - bpp] if x >= bpp else 0
                if ftype == 1:
                    base = a
                elif ftype == 3:
                    base = (a + b) >> 1
                else:
                    p = a + b - c
                    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
                    base = a if pa <= pb and pa <= pc else (b if pb <= pc else c)
                line[x] = (cur[x] + base) & 0xFF
        else:
            raise FormatError(f"PNG filter type {ftype} invalid")
        out[y] = line
    return out


# Full-range BT.709 luma coefficients.
_KR, _KG, _KB = 0.2126, 0.7152, 0.0722
_CB_SCALE = 2.0 * (1.0 - _KB)  # 1.8556
_CR_SCALE = 2.0 * (1.0 - _KR)  # 1.5748


def rgb_to_ycbcr(frame: Frame) -> Frame:
    """Full-range BT.709 conversion, rounded to integers."""
    r, g, b = (p.astype(np.float64) for p in frame.planes)
    mid = 1 << (frame.bit_depth - 1)
    hi = frame.max_value
    y = _KR * r + _KG * g + _KB * b
    cb = (b - y) / _CB_SCALE + mid
    cr = (r - y) / _CR_SCALE + mid
    planes = tuple(
        np.clip(np.floor(p + 0.5), 0, hi).astype(np.int32) for p in (y, cb, cr)
    )
    return Frame(frame.width, frame.height, frame.bit_depth, planes)


def ycbcr_to_rgb(frame: Frame) -> Frame:
    """Inverse of rgb_to_ycbcr; the round trip is within +/-1 per sample."""
    y, cb, cr = (p.astype(np.float64) for p in frame.planes)
    mid = 1 << (frame.bit_depth - 1)
    hi = frame.max_value
    r = y + _CR_SCALE * (cr - mid)
    b = y + _CB_SCALE * (cb - mid)
    g = (y - _KR * r - _KB * b) / _KG
    planes = tuple(
        np.clip(np.floor(p + 0.5), 0, hi).astype(np.int32) for p in (r, g, b)
    )
    return Frame(frame.width, frame.height, frame.bit_depth, planes)
