"""Sample containers, block tiling, bit I/O and quality metrics.

A frame is three full-resolution integer planes (4:4:4, component order
C0,C1,C2).  The codec's atomic unit is the 16x4 CodingUnit: same pixel
count as an 8x8 block but half the line-buffer depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BitstreamError
from ._kernels import pack_fields_kernel

CU_WIDTH = 16
CU_HEIGHT = 4
CU_PIXELS = CU_WIDTH * CU_HEIGHT

QP_MIN = 0
QP_MAX = 19

VALID_BIT_DEPTHS = (8, 10)


def check_qp(qp: int) -> int:
    if not QP_MIN <= qp <= QP_MAX:
        raise ValueError(f"qp {qp} outside [{QP_MIN}, {QP_MAX}]")
    return qp


@dataclass(frozen=True)
class Frame:
    """A 3-component 4:4:4 integer image.

    planes holds three (height, width) int32 arrays; every sample must lie
    in [0, 2**bit_depth).
    """

    width: int
    height: int
    bit_depth: int
    planes: tuple

    def __post_init__(self):
        if self.bit_depth not in VALID_BIT_DEPTHS:
            raise ValueError(f"bit_depth must be one of {VALID_BIT_DEPTHS}")
        if self.width < 1 or self.height < 1:
            raise ValueError("frame dimensions must be positive")
        if len(self.planes) != 3:
            raise ValueError("a frame has exactly 3 planes")
        for p in self.planes:
            if p.shape != (self.height, self.width):
                raise ValueError("plane shape does not match frame dimensions")
            if p.dtype != np.int32:
                raise ValueError("planes must be int32")
        hi = 1 << self.bit_depth
        for p in self.planes:
            if p.size and (p.min() < 0 or p.max() >= hi):
                raise ValueError("sample outside bit depth range")

    @property
    def max_value(self) -> int:
        return (1 << self.bit_depth) - 1


def make_frame(planes, bit_depth: int) -> Frame:
    """Build a Frame from any 3 array-likes, converting to int32."""
    arrs = tuple(np.ascontiguousarray(p, dtype=np.int32) for p in planes)
    h, w = arrs[0].shape
    return Frame(width=w, height=h, bit_depth=bit_depth, planes=arrs)


@dataclass(frozen=True)
class CodingUnit:
    """One 16x4 block of all three components.

    x0/y0 are padded-frame coordinates (multiples of 16 and 4); samples has
    shape (3, 4, 16).
    """

    x0: int
    y0: int
    samples: np.ndarray


def pad_frame(frame: Frame) -> Frame:
    """Round dimensions up to CU multiples by edge replication.

    Replication (rather than zero fill) keeps palette and prediction
    statistics free of artificial edges.  Identity on aligned frames.
    """
    pw = -(-frame.width // CU_WIDTH) * CU_WIDTH
    ph = -(-frame.height // CU_HEIGHT) * CU_HEIGHT
    if pw == frame.width and ph == frame.height:
        return frame
    planes = tuple(
        np.pad(p, ((0, ph - frame.height), (0, pw - frame.width)), mode="edge")
        for p in frame.planes
    )
    return Frame(width=pw, height=ph, bit_depth=frame.bit_depth, planes=planes)


def tile_frame(frame: Frame) -> list:
    """Split an aligned frame into CodingUnits in raster order."""
    if frame.width % CU_WIDTH or frame.height % CU_HEIGHT:
        raise ValueError("frame dimensions must be multiples of 16x4; pad first")
    stacked = np.stack(frame.planes)  # (3, h, w)
    rows = frame.height // CU_HEIGHT
    cols = frame.width // CU_WIDTH
    grid = stacked.reshape(3, rows, CU_HEIGHT, cols, CU_WIDTH).transpose(1, 3, 0, 2, 4)
    return [
        CodingUnit(x0=cx * CU_WIDTH, y0=cy * CU_HEIGHT, samples=np.ascontiguousarray(grid[cy, cx]))
        for cy in range(rows)
        for cx in range(cols)
    ]


def untile_frame(cus, width: int, height: int, bit_depth: int) -> Frame:
    """Reassemble CodingUnits (raster order) into a frame."""
    stacked = np.zeros((3, height, width), dtype=np.int32)
    for cu in cus:
        stacked[:, cu.y0 : cu.y0 + CU_HEIGHT, cu.x0 : cu.x0 + CU_WIDTH] = cu.samples
    return Frame(width=width, height=height, bit_depth=bit_depth, planes=tuple(stacked))


def psnr(a: np.ndarray, b: np.ndarray, bit_depth: int) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical planes."""
    if a.shape != b.shape:
        raise ValueError("plane dimensions differ")
    diff = a.astype(np.float64) - b.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    peak = (1 << bit_depth) - 1
    return 10.0 * math.log10(peak * peak / mse)


def frame_psnr(a: Frame, b: Frame, weights=None):
    """Per-plane PSNRs plus their weighted average (equal weights default)."""
    vals = tuple(psnr(pa, pb, a.bit_depth) for pa, pb in zip(a.planes, b.planes))
    if weights is None:
        return vals, sum(vals) / 3.0
    total = sum(weights)
    return vals, sum(v * w for v, w in zip(vals, weights)) / total


class BitSink:
    """Append-only bit buffer, MSB-first within each byte."""

    __slots__ = ("_buf", "_acc", "_nacc")

    def __init__(self):
        self._buf = bytearray()
        self._acc = 0  # pending bits, right-aligned
        self._nacc = 0  # 0..7

    def __len__(self) -> int:
        """Total bits written."""
        return len(self._buf) * 8 + self._nacc

    def write(self, value: int, nbits: int) -> None:
        if nbits < 0 or value < 0 or value >> nbits:
            raise ValueError(f"value {value} does not fit in {nbits} bits")
        acc = (self._acc << nbits) | value
        n = self._nacc + nbits
        while n >= 8:
            n -= 8
            self._buf.append((acc >> n) & 0xFF)
        self._acc = acc & ((1 << n) - 1)
        self._nacc = n

    def write_fields(self, values, widths) -> None:
        """Batched write of many (value, width) fields; widths <= 32."""
        v = np.asarray(values, dtype=np.int64)
        w = np.asarray(widths, dtype=np.int64)
        out, acc, nacc = pack_fields_kernel(v, w, self._acc, self._nacc)
        self._buf += out.tobytes()
        self._acc = int(acc)
        self._nacc = int(nacc)

    def extend_packed(self, data: bytes, acc: int, nacc: int) -> None:
        """Adopt pre-packed whole bytes plus a partial-byte remainder."""
        self._buf += data
        self._acc = acc
        self._nacc = nacc

    @property
    def partial(self):
        return self._acc, self._nacc

    def to_bytes(self) -> bytes:
        """Byte-aligned snapshot; a final partial byte is zero-padded."""
        if self._nacc:
            return bytes(self._buf) + bytes([(self._acc << (8 - self._nacc)) & 0xFF])
        return bytes(self._buf)


class BitSource:
    """Sequential bit reader over a byte buffer, MSB-first."""

    __slots__ = ("_data", "_pos", "_nbits")

    def __init__(self, data: bytes, bit_offset: int = 0, bit_length=None):
        self._data = data
        self._pos = bit_offset
        self._nbits = len(data) * 8 if bit_length is None else bit_length

    @property
    def position(self) -> int:
        return self._pos

    @property
    def remaining(self) -> int:
        return self._nbits - self._pos

    @property
    def bit_length(self) -> int:
        return self._nbits

    @property
    def buffer(self) -> bytes:
        return self._data

    def seek(self, position: int) -> None:
        if not 0 <= position <= self._nbits:
            raise BitstreamError("seek outside stream")
        self._pos = position

    def read(self, nbits: int) -> int:
        end = self._pos + nbits
        if end > self._nbits:
            raise BitstreamError("bitstream truncated")
        if nbits == 0:
            return 0
        first = self._pos >> 3
        last = (end + 7) >> 3
        chunk = int.from_bytes(self._data[first:last], "big")
        self._pos = end
        return (chunk >> (last * 8 - end)) & ((1 << nbits) - 1)
