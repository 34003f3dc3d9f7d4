"""Directional prediction, residual transform and DP rate estimation.

Residuals go through one integer 5/3 lifting level horizontally (rows of
16) and one vertically (columns of 4), then a rounding bit-shift quantizer
with shift = qp >> 2.  Rate is counted per 2x2 coefficient cube from the
cube's maximum magnitude bit-width, and those bit-planes are handed on to
entropy coding unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .core import CU_HEIGHT, CU_WIDTH, check_qp
from ._kernels import dwt_fwd_kernel, dwt_inv_kernel, rate_dp_kernel


class PredMode(IntEnum):
    DC = 0
    VT = 1
    HT = 2


@dataclass(frozen=True)
class NeighborContext:
    """Reconstructed reference samples: top (3,16) and left (3,4), or None
    when the CU sits on the first row / column of the frame."""

    top: np.ndarray | None
    left: np.ndarray | None


def prediction_block(ctx: NeighborContext, mode: PredMode, bit_depth: int) -> np.ndarray:
    """Build the (3,4,16) predictor for one mode.

    DC averages all available reference samples (round half up) per
    component; VT copies the sample above each column, HT the sample beside
    each row.  Missing references fall back to the mid-range constant.
    """
    mid = 1 << (bit_depth - 1)
    out = np.empty((3, CU_HEIGHT, CU_WIDTH), dtype=np.int32)
    if mode == PredMode.DC:
        if ctx.top is not None and ctx.left is not None:
            refs = np.concatenate([ctx.top, ctx.left], axis=1)  # (3,20)
        elif ctx.top is not None:
            refs = ctx.top
        elif ctx.left is not None:
            refs = ctx.left
        else:
            out[:] = mid
            return out
        n = refs.shape[1]
        dc = (refs.sum(axis=1, dtype=np.int64) + n // 2) // n
        out[:] = dc.astype(np.int32)[:, None, None]
    elif mode == PredMode.VT:
        if ctx.top is None:
            out[:] = mid
        else:
            out[:] = ctx.top[:, None, :]
    elif mode == PredMode.HT:
        if ctx.left is None:
            out[:] = mid
        else:
            out[:] = ctx.left[:, :, None]
    else:
        raise ValueError(f"unknown prediction mode {mode}")
    return out


def predict_cu(cu, ctx: NeighborContext, mode: PredMode, bit_depth: int) -> np.ndarray:
    """Residual (original minus prediction) for one mode, (3,4,16) signed."""
    return cu.samples - prediction_block(ctx, mode, bit_depth)


def forward_dwt(block: np.ndarray) -> np.ndarray:
    """One 5/3 level on rows then columns; accepts (...,4,16) int blocks."""
    arr = np.ascontiguousarray(block, dtype=np.int32)
    flat = arr.reshape(-1, CU_HEIGHT, CU_WIDTH)
    return dwt_fwd_kernel(flat).reshape(arr.shape)


def inverse_dwt(coeffs: np.ndarray) -> np.ndarray:
    """Exact inverse of forward_dwt."""
    arr = np.ascontiguousarray(coeffs, dtype=np.int32)
    flat = arr.reshape(-1, CU_HEIGHT, CU_WIDTH)
    return dwt_inv_kernel(flat).reshape(arr.shape)


def quant_shift(qp: int) -> int:
    check_qp(qp)
    return qp >> 2


def quantize(coeffs: np.ndarray, qp: int) -> np.ndarray:
    """Rounding right-shift by qp >> 2; identity for qp <= 3."""
    shift = quant_shift(qp)
    if shift == 0:
        return coeffs.astype(np.int32, copy=True)
    offset = (1 << shift) >> 1
    mag = (np.abs(coeffs) + offset) >> shift
    return (np.sign(coeffs) * mag).astype(np.int32)


def dequantize(coeffs: np.ndarray, qp: int) -> np.ndarray:
    """Left-shift back; reconstruction error is at most 2**(shift-1)."""
    shift = quant_shift(qp)
    if shift == 0:
        return coeffs.astype(np.int32, copy=True)
    return (coeffs * (1 << shift)).astype(np.int32)


def bitwidth(v: int) -> int:
    """Magnitude bit-width: 0 for 0, position of the highest set bit + 1."""
    return int(abs(int(v))).bit_length()


def estimate_rate_dp(coeffs: np.ndarray):
    """Exact DP payload size in bits plus the per-cube bit-planes.

    coeffs: (3,4,16) quantized block.  Returns (bits, (3,16) uint8 planes);
    the planes are exactly what the entropy coder writes as headers.
    """
    arr = np.ascontiguousarray(coeffs, dtype=np.int32).reshape(-1, CU_HEIGHT, CU_WIDTH)
    bits, planes = rate_dp_kernel(arr)
    return int(bits.sum()), planes


def estimate_rate_dp_batch(coeffs: np.ndarray):
    """Vectorized variant over (n,3,4,16): per-item bits and planes."""
    n = coeffs.shape[0]
    arr = np.ascontiguousarray(coeffs, dtype=np.int32).reshape(-1, CU_HEIGHT, CU_WIDTH)
    bits, planes = rate_dp_kernel(arr)
    return bits.reshape(n, 3).sum(axis=1), planes.reshape(n, 3, 16)


def reconstruct_dp(ctx: NeighborContext, mode: PredMode, coeffs: np.ndarray,
                   qp: int, bit_depth: int) -> np.ndarray:
    """Prediction + inverse transform of dequantized coefficients, clamped.

    Runs the same way on encoder and decoder, so both sides agree bit for
    bit.
    """
    pred = prediction_block(ctx, mode, bit_depth)
    residual = inverse_dwt(dequantize(coeffs, qp))
    hi = (1 << bit_depth) - 1
    return np.clip(pred + residual, 0, hi).astype(np.int32)
