"""Bit-exact CU payload syntax: hybrid fixed/variable-length coding.

Fixed-length syntax elements (bit-planes, run symbols, cluster counts)
always precede the variable-length data whose size they determine, and
they are exactly the statistics the rate estimators already computed, so
estimation and emission can never disagree.

Layout, MSB-first:

  CU header    qp:5, plt:1, then mode:2 for DP (00=DC 01=VT 10=HT, 11 reserved)
  DP payload   per component, per 2x2 cube (raster over the 8x2 cube grid):
               bit-plane:4, four magnitudes of bit-plane bits each, then one
               sign bit (1=negative) per nonzero magnitude
  PLT payload  cluster_count-1:3; per cluster (creation order) three
               virtual-CC components of bit_depth bits; per run symbol:2
               (L=00 T=01 N=10) + EG0(length-1); then the explicit index of
               every N pixel in scan order, ceil(log2(count)) bits each
"""

from __future__ import annotations

import numpy as np

from .core import BitSink, BitSource, check_qp
from .errors import BitstreamError
from ._kernels import pack_dp_kernel, pack_plt_kernel, unpack_dp_kernel

# run symbol codes on the wire; palette.RunSymbol uses the same values
SYM_L = 0
SYM_T = 1
SYM_N = 2

MODE_DC = 0
MODE_VT = 1
MODE_HT = 2
MODE_PLT = 3


def egc_bit_length(v: int) -> int:
    """Size of the order-0 Exp-Golomb code for v."""
    return 2 * (v + 1).bit_length() - 1


def egc_encode(sink: BitSink, v: int) -> None:
    """Order-0 Exp-Golomb: z zeros, then the z+1 bits of v+1."""
    if v < 0 or v >= 1 << 31:
        raise ValueError("EGC operand out of range")
    n = (v + 1).bit_length()
    sink.write(0, n - 1)
    sink.write(v + 1, n)


def egc_decode(source: BitSource) -> int:
    z = 0
    while source.read(1) == 0:
        z += 1
        if z > 31:
            raise BitstreamError("malformed Exp-Golomb prefix")
    return ((1 << z) | source.read(z)) - 1


def encode_cu_header(qp: int, mode: int, sink: BitSink) -> int:
    """Write qp and mode; returns bits written (6 for PLT, 8 for DP)."""
    check_qp(qp)
    if mode == MODE_PLT:
        sink.write(qp, 5)
        sink.write(1, 1)
        return 6
    sink.write(qp, 5)
    sink.write(0, 1)
    sink.write(mode, 2)
    return 8


def decode_cu_header(source: BitSource):
    qp = source.read(5)
    if qp > 19:
        raise BitstreamError(f"qp {qp} out of range")
    if source.read(1):
        return qp, MODE_PLT
    mode = source.read(2)
    if mode == 3:
        raise BitstreamError("reserved DP mode code 11")
    return qp, mode


def header_bits(mode: int) -> int:
    return 6 if mode == MODE_PLT else 8


def encode_cu_dp(bitplanes: np.ndarray, coeffs: np.ndarray, sink: BitSink) -> int:
    """Serialize a (3,4,16) quantized coefficient block; returns bits written.

    bitplanes is the (3,16) uint8 array from the rate estimator; it must
    hold the true per-cube maxima (asserted).
    """
    before = len(sink)
    data, acc, nacc = pack_dp_kernel(
        np.ascontiguousarray(coeffs, dtype=np.int32),
        np.ascontiguousarray(bitplanes, dtype=np.uint8),
        sink.partial[0],
        sink.partial[1],
    )
    sink.extend_packed(data.tobytes(), int(acc), int(nacc))
    return len(sink) - before


def decode_cu_dp(source: BitSource) -> np.ndarray:
    """Read one DP payload back into a (3,4,16) int32 block."""
    buf = np.frombuffer(source.buffer, dtype=np.uint8)
    coeffs, pos = unpack_dp_kernel(buf, source.position, source.bit_length)
    if pos < 0:
        raise BitstreamError("bitstream truncated in DP payload")
    source.seek(int(pos))
    return coeffs


def encode_cu_plt(table, runs, bit_depth: int, sink: BitSink) -> int:
    """Serialize a palette payload; returns bits written.

    table is a palette.ClusterTable or a (count, 3) array of virtual CCs;
    runs is a palette.RunList or the raw (symbols, lengths, run count,
    explicit, explicit count) arrays from the analysis kernel.
    """
    before = len(sink)
    if hasattr(table, "entries"):
        ccs = np.array([e.virtual_cc for e in table.entries], dtype=np.int32)
    else:
        ccs = np.ascontiguousarray(table, dtype=np.int32)
    count = ccs.shape[0]
    assert 1 <= count <= 8
    if hasattr(runs, "runs"):
        syms = np.array([int(s) for s, _ in runs.runs], dtype=np.int32)
        lens = np.array([length for _, length in runs.runs], dtype=np.int32)
        nruns = len(syms)
        expl = np.asarray(runs.explicit, dtype=np.int32)
        nexp = len(expl)
        assert int(lens.sum()) == 64, "run lengths must cover the CU"
        assert (lens >= 1).all()
    else:
        syms, lens, nruns, expl, nexp = runs
    data, acc, nacc = pack_plt_kernel(
        ccs, count, syms, lens, nruns, expl, nexp, bit_depth,
        sink.partial[0], sink.partial[1],
    )
    sink.extend_packed(data.tobytes(), int(acc), int(nacc))
    return len(sink) - before


def decode_cu_plt(source: BitSource, bit_depth: int):
    """Read one palette payload; returns (virtual CC array, index map)."""
    from .palette import RunList, RunSymbol, inverse_map

    count = source.read(3) + 1
    ccs = np.empty((count, 3), dtype=np.int32)
    for k in range(count):
        for c in range(3):
            ccs[k, c] = source.read(bit_depth)
    runs = []
    total = 0
    n_explicit = 0
    while total < 64:
        sym = source.read(2)
        if sym == 3:
            raise BitstreamError("reserved run symbol code 11")
        length = egc_decode(source) + 1
        if total + length > 64:
            raise BitstreamError("run lengths exceed the CU")
        runs.append((RunSymbol(sym), length))
        if sym == SYM_N:
            n_explicit += length
        total += length
    idx_bits = (count - 1).bit_length()
    explicit = [source.read(idx_bits) for _ in range(n_explicit)]
    for idx in explicit:
        if idx >= count:
            raise BitstreamError("explicit index out of table range")
    index_map = inverse_map(RunList(runs=runs, explicit=explicit))
    return ccs, index_map
