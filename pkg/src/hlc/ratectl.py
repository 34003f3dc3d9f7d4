"""Per-CU QP selection from a bits-per-pixel budget.

Proportional control on the accumulated bit error: each CU's QP is the
base QP plus floor(b_err / gain), clamped to +/- step_clamp and to the
valid QP range.  A positive error (over budget) raises QP.  Setting
step_clamp to 0 pins QP at the base, which disables rate control.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import CU_PIXELS, QP_MAX, check_qp

BPP_UNIT = 256  # b_tar is in 1/256 bpp units


@dataclass(frozen=True)
class RcState:
    b_tar: int  # target rate, 1/256 bpp units
    qp_base: int
    b_err: float = 0.0  # accumulated actual-minus-target bits
    gain: int = 256  # bits of error per QP step
    step_clamp: int = 4

    def __post_init__(self):
        if self.b_tar <= 0:
            raise ValueError("target rate must be positive")
        check_qp(self.qp_base)


def qp_for_cu(state: RcState) -> int:
    step = math.floor(state.b_err / state.gain)
    step = max(-state.step_clamp, min(state.step_clamp, step))
    return max(0, min(QP_MAX, state.qp_base + step))


def update(state: RcState, actual_bits: int) -> RcState:
    """Fold one CU's emitted size into the error accumulator."""
    if actual_bits < 0:
        raise ValueError("bit count cannot be negative")
    target = state.b_tar * CU_PIXELS / BPP_UNIT
    return RcState(
        b_tar=state.b_tar,
        qp_base=state.qp_base,
        b_err=state.b_err + actual_bits - target,
        gain=state.gain,
        step_clamp=state.step_clamp,
    )


def bpp_units(target_bpp: float) -> int:
    units = round(target_bpp * BPP_UNIT)
    if units <= 0:
        raise ValueError("target bpp must be positive")
    return units
