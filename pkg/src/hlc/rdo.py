"""Lagrangian mode decision and the QP-lambda table behind it.

The rate-distortion trade-off follows the power-law model D = C * R**-K
fitted in log-log space on a calibration corpus; lambda at a given QP is
the slope of that curve at the QP's typical rate, lambda = C*K*R**-(K+1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from .core import QP_MAX


class CuMode(IntEnum):
    """Candidate coding modes; enum order is the deterministic tie-break."""

    DC = 0
    VT = 1
    HT = 2
    PLT = 3


@dataclass(frozen=True)
class ModeCost:
    mode: CuMode
    d: int  # SAD of the mode's reconstruction, summed over components
    r: int  # exact payload + header bits


@dataclass(frozen=True)
class RdModel:
    c: float
    k: float
    r_square: float

    def __post_init__(self):
        if self.c <= 0 or self.k <= 0:
            raise ValueError("model requires C > 0 and K > 0")


class LambdaTable:
    """Per-QP Lagrange multipliers, nonnegative and nondecreasing."""

    __slots__ = ("values",)

    def __init__(self, values):
        vals = tuple(float(v) for v in values)
        if len(vals) != QP_MAX + 1:
            raise ValueError(f"lambda table needs {QP_MAX + 1} entries")
        for i, v in enumerate(vals):
            if v < 0:
                raise ValueError("lambda must be nonnegative")
            if i and v < vals[i - 1]:
                raise ValueError("lambda must be nondecreasing in qp")
        self.values = vals

    def __getitem__(self, qp: int) -> float:
        return self.values[qp]

    def __eq__(self, other):
        return isinstance(other, LambdaTable) and self.values == other.values

    def save(self, path) -> None:
        lines = [f"{qp} {v:.17g}" for qp, v in enumerate(self.values)]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "LambdaTable":
        vals = [0.0] * (QP_MAX + 1)
        seen = set()
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            qp_s, v_s = line.split()
            qp = int(qp_s)
            vals[qp] = float(v_s)
            seen.add(qp)
        if len(seen) != QP_MAX + 1:
            raise ValueError("lambda table file must cover qp 0..19")
        return cls(vals)


def fit_rd_model(points) -> RdModel:
    """Least-squares fit of log D = log C - K log R.

    points: iterable of (rate, distortion) pairs, all strictly positive,
    at least three of them.
    """
    pts = [(float(r), float(d)) for r, d in points]
    if len(pts) < 3:
        raise ValueError("need at least 3 points to fit")
    if any(r <= 0 or d <= 0 for r, d in pts):
        raise ValueError("rates and distortions must be positive")
    x = np.log([r for r, _ in pts])
    y = np.log([d for _, d in pts])
    slope, intercept = np.polyfit(x, y, 1)
    pred = intercept + slope * x
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        r_square = 1.0 if ss_res < 1e-12 else 0.0
    else:
        r_square = 1.0 - ss_res / ss_tot
    return RdModel(c=float(math.exp(intercept)), k=float(-slope), r_square=r_square)


def derive_lambda_table(model: RdModel, rate_anchors) -> LambdaTable:
    """Tabulate the R-D slope at each QP's typical rate.

    rate_anchors maps every qp in 0..19 to the mean rate measured at that
    QP on the calibration corpus.
    """
    vals = []
    for qp in range(QP_MAX + 1):
        if qp not in rate_anchors:
            raise ValueError(f"missing rate anchor for qp {qp}")
        r = float(rate_anchors[qp])
        if r <= 0:
            raise ValueError(f"rate anchor for qp {qp} must be positive")
        vals.append(model.c * model.k * r ** (-model.k - 1.0))
    return LambdaTable(vals)


def choose_mode(costs, lam: float) -> ModeCost:
    """argmin of J = D + lambda*R; exact J ties fall back to enum order."""
    best = None
    best_key = None
    for cost in costs:
        key = (cost.d + lam * cost.r, int(cost.mode))
        if best is None or key < best_key:
            best = cost
            best_key = key
    if best is None:
        raise ValueError("no candidate modes")
    return best


# Slopes of D = 7.177 * R^-0.6189 (r^2 0.947) fitted by `hlc calibrate` on
# the bundled synthetic corpus, evaluated at each QP's mean rate anchor.
# Regenerate after corpus or codec changes (see README).
DEFAULT_LAMBDA = LambdaTable(
    [
        0.12200964246716671,  # qp 0,
        0.12200964246716671,
        0.12218572589247036,
        0.12218572589247036,
        0.1959452590582694,  # qp 4,
        0.1959452590582694,
        0.27135406930741446,
        0.27135406930741446,
        0.3993998293101457,  # qp 8,
        0.3993998293101457,
        0.3993998293101457,
        0.3993998293101457,
        2.07940274971836,  # qp 12,
        2.07940274971836,
        2.07940274971836,
        2.07940274971836,
        2.9845384823255614,  # qp 16,
        2.9845384823255614,
        2.9845384823255614,
        2.9845384823255614,
    ]
)
