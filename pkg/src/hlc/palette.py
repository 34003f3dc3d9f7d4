"""Dependency-free palette coding for 16x4 CUs.

Each cluster keeps two colors.  The founding color is written once, when
the cluster is created, and every assignment decision compares against it
alone; the running-mean color is only accumulated and is used purely for
reconstruction.  Freezing the decision color removes the update-then-compare
dependency that serializes conventional palette clustering, at a small
quality cost.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .core import CU_PIXELS, CU_HEIGHT, CU_WIDTH, check_qp
from .entropy import egc_bit_length
from ._kernels import cluster_kernel, rle_map_kernel

MAX_CLUSTERS = 8


class RunSymbol(IntEnum):
    L = 0  # matches left neighbor
    T = 1  # matches top neighbor
    N = 2  # no match, index sent explicitly


@dataclass(frozen=True)
class ClusterEntry:
    initial_cc: tuple  # founding pixel, fixed for all clustering decisions
    virtual_cc: tuple  # rounded running mean, used only for reconstruction
    count: int
    sum: tuple


@dataclass(frozen=True)
class ClusterTable:
    entries: tuple  # creation order

    def __len__(self):
        return len(self.entries)

    def virtual_array(self) -> np.ndarray:
        return np.array([e.virtual_cc for e in self.entries], dtype=np.int32)


@dataclass(frozen=True)
class RunList:
    """Run-length coded index map: (symbol, length) pairs summing to 64,
    plus the explicit index of every N pixel in scan order."""

    runs: tuple
    explicit: tuple

    def __post_init__(self):
        object.__setattr__(self, "runs", tuple(self.runs))
        object.__setattr__(self, "explicit", tuple(self.explicit))


def threshold_for_qp(qp: int) -> int:
    """Clustering SAD threshold: 1 << (qp >> 1)."""
    check_qp(qp)
    return 1 << (qp >> 1)


def cluster_cu(cu, qp: int, track_means: bool = True):
    """Cluster a CU's pixels; returns (ClusterTable, index map) or None.

    Pixels are scanned in raster order; the joint 3-component SAD of each
    pixel against every founding color decides assignment (minimum SAD, tie
    to the lowest index) when it is within threshold_for_qp(qp), otherwise
    the pixel founds a new cluster.  None means a ninth cluster would be
    required and the CU is unsuitable for palette coding.

    track_means=False skips the running-mean accumulation entirely (the
    virtual color then stays at the founding value); clustering decisions
    are identical either way.
    """
    thr = threshold_for_qp(qp)
    pixels = np.ascontiguousarray(
        cu.samples.reshape(3, CU_PIXELS).T, dtype=np.int32
    )
    n, assign, ccs, sums, counts = cluster_kernel(pixels, thr, track_means)
    if n < 0:
        return None
    entries = []
    for k in range(n):
        cc = tuple(int(v) for v in ccs[k])
        if track_means:
            cnt = int(counts[k])
            s = tuple(int(v) for v in sums[k])
            virtual = tuple((v + cnt // 2) // cnt for v in s)
        else:
            cnt = 0
            s = (0, 0, 0)
            virtual = cc
        entries.append(ClusterEntry(initial_cc=cc, virtual_cc=virtual, count=cnt, sum=s))
    index_map = assign.reshape(CU_HEIGHT, CU_WIDTH).copy()
    return ClusterTable(entries=tuple(entries)), index_map


_SYMBOLS = (RunSymbol.L, RunSymbol.T, RunSymbol.N)


def map_indices(index_map: np.ndarray) -> RunList:
    """Map each index to L/T/N against its neighbors and run-length code.

    Raster scan; L is checked before T, out-of-CU neighbors never match, so
    the first pixel is always N, the first row never T, the first column
    never L.  Consecutive identical symbols merge across row boundaries.
    """
    flat = np.ascontiguousarray(index_map, dtype=np.int32).reshape(CU_PIXELS)
    syms, lens, nruns, expl, nexp = rle_map_kernel(flat)
    runs = tuple(
        (_SYMBOLS[s], length)
        for s, length in zip(syms[:nruns].tolist(), lens[:nruns].tolist())
    )
    return RunList(runs=runs, explicit=tuple(expl[:nexp].tolist()))


def inverse_map(runs: RunList) -> np.ndarray:
    """Rebuild the index map from its run-length form.

    Raises ValueError on structural violations: run lengths not summing to
    64, L in the first column, T in the first row, or a missing explicit
    index for an N pixel.
    """
    total = sum(length for _, length in runs.runs)
    if total != CU_PIXELS:
        raise ValueError(f"run lengths sum to {total}, expected {CU_PIXELS}")
    out = np.zeros((CU_HEIGHT, CU_WIDTH), dtype=np.int32)
    pos = 0
    n_used = 0
    explicit = runs.explicit
    for sym, length in runs.runs:
        for _ in range(length):
            y, x = divmod(pos, CU_WIDTH)
            if sym == RunSymbol.L:
                if x == 0:
                    raise ValueError("L symbol in the first column")
                out[y, x] = out[y, x - 1]
            elif sym == RunSymbol.T:
                if y == 0:
                    raise ValueError("T symbol in the first row")
                out[y, x] = out[y - 1, x]
            else:
                if n_used >= len(explicit):
                    raise ValueError("N pixel without an explicit index")
                out[y, x] = explicit[n_used]
                n_used += 1
            pos += 1
    if n_used != len(explicit):
        raise ValueError("unused explicit indices")
    return out


def reconstruct_plt(table, index_map: np.ndarray, bit_depth: int) -> np.ndarray:
    """Replace each pixel by its cluster's virtual color; (3,4,16) output."""
    ccs = table.virtual_array() if isinstance(table, ClusterTable) else np.asarray(table)
    samples = ccs[index_map]  # (4,16,3)
    hi = (1 << bit_depth) - 1
    return np.clip(samples.transpose(2, 0, 1), 0, hi).astype(np.int32)


def estimate_rate_plt(table, runs: RunList, bit_depth: int) -> int:
    """Exact palette payload size in bits (excluding the CU header).

    This is the same arithmetic the entropy coder performs, field by field,
    which is what makes the estimate reusable as the emitted length.
    """
    count = len(table.entries) if isinstance(table, ClusterTable) else int(table)
    bits = 3 + count * 3 * bit_depth
    for _, length in runs.runs:
        bits += 2 + egc_bit_length(length - 1)
    bits += len(runs.explicit) * (count - 1).bit_length()
    return bits
