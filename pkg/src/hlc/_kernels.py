"""Compiled inner loops shared by the palette, transform and entropy modules.

Every kernel is plain Python that numba can compile; if numba is missing the
same functions run uncompiled (slow but identical results).
"""

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


@njit(cache=True)
def cluster_kernel(pixels, threshold, track_means):
    """Cluster the 64 pixels of a CU against frozen founding colors.

    pixels: (64, 3) int32 in raster order.  Returns (count, assign, ccs,
    sums, counts); count is -1 when a ninth cluster would be needed.
    Assignment compares each pixel only against founding colors, so the
    result never depends on the running sums.
    """
    ccs = np.zeros((8, 3), np.int32)
    sums = np.zeros((8, 3), np.int64)
    counts = np.zeros(8, np.int64)
    assign = np.zeros(64, np.int32)
    n = 0
    for i in range(64):
        best = -1
        best_sad = threshold + 1
        for k in range(n):
            sad = 0
            for c in range(3):
                d = pixels[i, c] - ccs[k, c]
                sad += d if d >= 0 else -d
            if sad < best_sad:
                best_sad = sad
                best = k
        if best < 0:
            if n == 8:
                return -1, assign, ccs, sums, counts
            for c in range(3):
                ccs[n, c] = pixels[i, c]
            best = n
            n += 1
        assign[i] = best
        if track_means:
            for c in range(3):
                sums[best, c] += pixels[i, c]
            counts[best] += 1
    return n, assign, ccs, sums, counts


@njit(cache=True)
def dwt_fwd_kernel(blocks):
    """One 5/3 lifting level along rows then columns of 4x16 blocks.

    blocks: (n, 4, 16) int32.  Output keeps the same shape with subbands
    deinterleaved: columns 0..7 horizontal low / 8..15 high, rows 0..1
    vertical low / 2..3 high.
    """
    n = blocks.shape[0]
    out = np.empty_like(blocks)
    tmp = np.empty((4, 16), np.int32)
    for b in range(n):
        for y in range(4):
            row = blocks[b, y]
            for i in range(8):
                r = 2 * i + 2
                if r > 14:
                    r = 14
                tmp[y, 8 + i] = row[2 * i + 1] - ((row[2 * i] + row[r]) >> 1)
            for i in range(8):
                dl = tmp[y, 8 + i - 1] if i > 0 else tmp[y, 8]
                tmp[y, i] = row[2 * i] + ((dl + tmp[y, 8 + i] + 2) >> 2)
        for x in range(16):
            a0 = tmp[0, x]
            a1 = tmp[1, x]
            a2 = tmp[2, x]
            a3 = tmp[3, x]
            d0 = a1 - ((a0 + a2) >> 1)
            d1 = a3 - a2
            out[b, 0, x] = a0 + ((d0 + d0 + 2) >> 2)
            out[b, 1, x] = a2 + ((d0 + d1 + 2) >> 2)
            out[b, 2, x] = d0
            out[b, 3, x] = d1
    return out


@njit(cache=True)
def dwt_inv_kernel(coeffs):
    """Exact inverse of dwt_fwd_kernel."""
    n = coeffs.shape[0]
    out = np.empty_like(coeffs)
    tmp = np.empty((4, 16), np.int32)
    ev = np.empty(8, np.int32)
    for b in range(n):
        for x in range(16):
            s0 = coeffs[b, 0, x]
            s1 = coeffs[b, 1, x]
            d0 = coeffs[b, 2, x]
            d1 = coeffs[b, 3, x]
            a0 = s0 - ((d0 + d0 + 2) >> 2)
            a2 = s1 - ((d0 + d1 + 2) >> 2)
            tmp[0, x] = a0
            tmp[1, x] = d0 + ((a0 + a2) >> 1)
            tmp[2, x] = a2
            tmp[3, x] = d1 + a2
        for y in range(4):
            row = tmp[y]
            for i in range(8):
                dl = row[8 + i - 1] if i > 0 else row[8]
                ev[i] = row[i] - ((dl + row[8 + i] + 2) >> 2)
            for i in range(8):
                e2 = ev[i + 1] if i < 7 else ev[7]
                out[b, y, 2 * i] = ev[i]
                out[b, y, 2 * i + 1] = row[8 + i] + ((ev[i] + e2) >> 1)
    return out


@njit(cache=True)
def rate_dp_kernel(coeffs):
    """Exact DP bit cost and per-cube bit-planes for quantized 4x16 blocks.

    coeffs: (n, 4, 16) int32.  Per 2x2 cube the cost is a 4-bit plane
    header, the plane width for each of the 4 magnitudes, and one sign bit
    per nonzero magnitude.  Cubes raster over the 8-wide, 2-tall grid.
    """
    n = coeffs.shape[0]
    bits = np.zeros(n, np.int64)
    planes = np.zeros((n, 16), np.uint8)
    for b in range(n):
        total = 0
        for cy in range(2):
            for cx in range(8):
                bp = 0
                nz = 0
                for wy in range(2):
                    for wx in range(2):
                        v = coeffs[b, 2 * cy + wy, 2 * cx + wx]
                        if v < 0:
                            v = -v
                        if v > 0:
                            nz += 1
                            w = 0
                            while v:
                                v >>= 1
                                w += 1
                            if w > bp:
                                bp = w
                total += 4 + 4 * bp + nz
                planes[b, cy * 8 + cx] = bp
        bits[b] = total
    return bits, planes


@njit(cache=True)
def pack_fields_kernel(values, widths, acc, nacc):
    """Append MSB-first bit fields to a partial-byte accumulator.

    Returns (full bytes produced, new accumulator, new bit count).  Field
    widths must be <= 32 so the int64 accumulator never overflows.
    """
    total = nacc
    for i in range(widths.shape[0]):
        total += widths[i]
    out = np.empty(total // 8 + 1, np.uint8)
    pos = 0
    a = acc
    nb = nacc
    for i in range(values.shape[0]):
        w = widths[i]
        a = (a << w) | (values[i] & ((np.int64(1) << w) - 1))
        nb += w
        while nb >= 8:
            nb -= 8
            out[pos] = (a >> nb) & 0xFF
            pos += 1
        a &= (np.int64(1) << nb) - 1
    return out[:pos], a, nb


@njit(cache=True)
def pack_dp_kernel(coeffs, planes, acc, nacc):
    """Serialize a quantized 3x4x16 coefficient block (DP payload).

    Mirrors rate_dp_kernel: per component, per cube: 4-bit plane, four
    magnitudes, then sign bits (1 = negative) for nonzero magnitudes.
    """
    # 4-bit headers + magnitudes + an upper bound of one sign bit each
    total = nacc + 3 * 16 * 4 + 3 * 64
    for comp in range(3):
        for cube in range(16):
            total += 4 * np.int64(planes[comp, cube])
    out = np.empty(total // 8 + 1, np.uint8)
    pos = 0
    a = acc
    nb = nacc
    for comp in range(3):
        for cy in range(2):
            for cx in range(8):
                bp = np.int64(planes[comp, cy * 8 + cx])
                a = (a << 4) | bp
                nb += 4
                while nb >= 8:
                    nb -= 8
                    out[pos] = (a >> nb) & 0xFF
                    pos += 1
                a &= (np.int64(1) << nb) - 1
                if bp == 0:
                    continue
                for wy in range(2):
                    for wx in range(2):
                        v = coeffs[comp, 2 * cy + wy, 2 * cx + wx]
                        m = -v if v < 0 else v
                        a = (a << bp) | m
                        nb += bp
                        while nb >= 8:
                            nb -= 8
                            out[pos] = (a >> nb) & 0xFF
                            pos += 1
                        a &= (np.int64(1) << nb) - 1
                for wy in range(2):
                    for wx in range(2):
                        v = coeffs[comp, 2 * cy + wy, 2 * cx + wx]
                        if v != 0:
                            a = (a << 1) | (1 if v < 0 else 0)
                            nb += 1
                            if nb >= 8:
                                nb -= 8
                                out[pos] = (a >> nb) & 0xFF
                                pos += 1
                                a &= (np.int64(1) << nb) - 1
    return out[:pos], a, nb


@njit(cache=True)
def rle_map_kernel(assign):
    """Run-length code a flat 64-entry index map against its neighbors.

    Symbols: 0 = matches left (checked first), 1 = matches top, 2 = no
    match (index recorded).  Returns (symbols, lengths, run count,
    explicit indices, explicit count).
    """
    syms = np.empty(64, np.int32)
    lens = np.empty(64, np.int32)
    expl = np.empty(64, np.int32)
    nruns = 0
    nexp = 0
    prev = -1
    for i in range(64):
        x = i & 15
        v = assign[i]
        if x > 0 and assign[i - 1] == v:
            s = 0
        elif i >= 16 and assign[i - 16] == v:
            s = 1
        else:
            s = 2
            expl[nexp] = v
            nexp += 1
        if s == prev:
            lens[nruns - 1] += 1
        else:
            syms[nruns] = s
            lens[nruns] = 1
            nruns += 1
            prev = s
    return syms, lens, nruns, expl, nexp


@njit(cache=True)
def pack_plt_kernel(ccs, count, syms, lens, nruns, expl, nexp, bit_depth, acc, nacc):
    """Serialize a palette payload (see entropy module for the layout).

    The Exp-Golomb code of length-1 is emitted as the single field
    (length, 2*bitlen(length)-1): the field's leading zeros are exactly the
    EG0 prefix.
    """
    idx_bits = 0
    t = count - 1
    while t:
        idx_bits += 1
        t >>= 1
    total = nacc + 3 + count * 3 * bit_depth + nexp * idx_bits
    for r in range(nruns):
        w = 0
        t = lens[r]
        while t:
            w += 1
            t >>= 1
        total += 2 + 2 * w - 1
    out = np.empty(total // 8 + 1, np.uint8)
    pos = 0
    a = acc
    nb = nacc

    a = (a << 3) | (count - 1)
    nb += 3
    while nb >= 8:
        nb -= 8
        out[pos] = (a >> nb) & 0xFF
        pos += 1
    a &= (np.int64(1) << nb) - 1
    for k in range(count):
        for c in range(3):
            a = (a << bit_depth) | ccs[k, c]
            nb += bit_depth
            while nb >= 8:
                nb -= 8
                out[pos] = (a >> nb) & 0xFF
                pos += 1
            a &= (np.int64(1) << nb) - 1
    for r in range(nruns):
        length = np.int64(lens[r])
        w = 0
        t = length
        while t:
            w += 1
            t >>= 1
        width = 2 + 2 * w - 1
        a = (a << width) | (np.int64(syms[r]) << (2 * w - 1)) | length
        nb += width
        while nb >= 8:
            nb -= 8
            out[pos] = (a >> nb) & 0xFF
            pos += 1
        a &= (np.int64(1) << nb) - 1
    if idx_bits:
        for i in range(nexp):
            a = (a << idx_bits) | expl[i]
            nb += idx_bits
            while nb >= 8:
                nb -= 8
                out[pos] = (a >> nb) & 0xFF
                pos += 1
            a &= (np.int64(1) << nb) - 1
    return out[:pos], a, nb


@njit(cache=True)
def analyze_cu_kernel(frame_arr, recon, x0, y0, thr, shift, hi, mid, bit_depth,
                      plt_enabled, coeffs, planes, recon_dp, recon_plt, assign,
                      ccs_virtual, run_syms, run_lens, run_expl, meta):
    """Evaluate every candidate mode for the CU at (x0, y0) in one pass.

    Composes the cluster/DWT/rate kernels; the modular Python functions in
    palette/predict are the behavioral reference and the two are held equal
    by the round-trip and reuse-contract tests.

    meta out layout: 0 cluster count (-1 unsuitable/disabled), 1 run count,
    2 explicit count, 3 exact PLT payload bits, 4 PLT SAD, 5..7 exact DP
    payload bits per mode, 8..10 DP SAD per mode.
    """
    orig = np.empty((3, 4, 16), np.int32)
    for c in range(3):
        for y in range(4):
            for x in range(16):
                orig[c, y, x] = frame_arr[c, y0 + y, x0 + x]
    have_top = y0 > 0
    have_left = x0 > 0

    preds = np.empty((3, 3, 4, 16), np.int32)
    for c in range(3):
        s = np.int64(0)
        n = 0
        if have_top:
            for x in range(16):
                s += recon[c, y0 - 1, x0 + x]
            n += 16
        if have_left:
            for y in range(4):
                s += recon[c, y0 + y, x0 - 1]
            n += 4
        dc = (s + n // 2) // n if n > 0 else mid
        for y in range(4):
            for x in range(16):
                preds[0, c, y, x] = dc
                preds[1, c, y, x] = recon[c, y0 - 1, x0 + x] if have_top else mid
                preds[2, c, y, x] = recon[c, y0 + y, x0 - 1] if have_left else mid

    resid = np.empty((9, 4, 16), np.int32)
    for m in range(3):
        for c in range(3):
            for y in range(4):
                for x in range(16):
                    resid[3 * m + c, y, x] = orig[c, y, x] - preds[m, c, y, x]
    cf = dwt_fwd_kernel(resid)
    if shift > 0:
        off = (1 << shift) >> 1
        for i in range(9):
            for y in range(4):
                for x in range(16):
                    v = cf[i, y, x]
                    if v < 0:
                        cf[i, y, x] = -((-v + off) >> shift)
                    else:
                        cf[i, y, x] = (v + off) >> shift
    bits_dp, pl = rate_dp_kernel(cf)
    if shift > 0:
        deq = np.empty_like(cf)
        for i in range(9):
            for y in range(4):
                for x in range(16):
                    deq[i, y, x] = cf[i, y, x] << shift
    else:
        deq = cf
    rec_res = dwt_inv_kernel(deq)
    for m in range(3):
        sad = np.int64(0)
        for c in range(3):
            for y in range(4):
                for x in range(16):
                    v = preds[m, c, y, x] + rec_res[3 * m + c, y, x]
                    if v < 0:
                        v = 0
                    elif v > hi:
                        v = hi
                    recon_dp[m, c, y, x] = v
                    d = orig[c, y, x] - v
                    sad += d if d >= 0 else -d
            for cube in range(16):
                planes[m, c, cube] = pl[3 * m + c, cube]
            for y in range(4):
                for x in range(16):
                    coeffs[m, c, y, x] = cf[3 * m + c, y, x]
        meta[5 + m] = bits_dp[3 * m] + bits_dp[3 * m + 1] + bits_dp[3 * m + 2]
        meta[8 + m] = sad

    meta[0] = -1
    if plt_enabled:
        pixels = np.empty((64, 3), np.int32)
        for i in range(64):
            y = i >> 4
            x = i & 15
            for c in range(3):
                pixels[i, c] = orig[c, y, x]
        n, asg, ccs, sums, counts = cluster_kernel(pixels, thr, True)
        meta[0] = n
        if n > 0:
            for i in range(64):
                assign[i] = asg[i]
            for k in range(n):
                cnt = counts[k]
                for c in range(3):
                    ccs_virtual[k, c] = (sums[k, c] + cnt // 2) // cnt
            syms, lens, nruns, expl, nexp = rle_map_kernel(asg)
            for r in range(nruns):
                run_syms[r] = syms[r]
                run_lens[r] = lens[r]
            for i in range(nexp):
                run_expl[i] = expl[i]
            meta[1] = nruns
            meta[2] = nexp
            idx_bits = 0
            t = n - 1
            while t:
                idx_bits += 1
                t >>= 1
            rate = 3 + n * 3 * bit_depth + nexp * idx_bits
            for r in range(nruns):
                w = 0
                t = lens[r]
                while t:
                    w += 1
                    t >>= 1
                rate += 2 + 2 * w - 1
            meta[3] = rate
            sadp = np.int64(0)
            for i in range(64):
                y = i >> 4
                x = i & 15
                k = asg[i]
                for c in range(3):
                    v = ccs_virtual[k, c]
                    recon_plt[c, y, x] = v
                    d = orig[c, y, x] - v
                    sadp += d if d >= 0 else -d
            meta[4] = sadp


@njit(cache=True)
def unpack_dp_kernel(buf, pos, nbits):
    """Inverse of pack_dp_kernel.  Returns (coeffs, new position).

    new position is -1 when the stream ends before the payload does.
    """
    out = np.zeros((3, 4, 16), np.int32)
    for comp in range(3):
        for cy in range(2):
            for cx in range(8):
                if pos + 4 > nbits:
                    return out, -1
                bp = 0
                for _ in range(4):
                    bp = (bp << 1) | ((buf[pos >> 3] >> (7 - (pos & 7))) & 1)
                    pos += 1
                if bp == 0:
                    continue
                if pos + 4 * bp > nbits:
                    return out, -1
                nz = 0
                for wy in range(2):
                    for wx in range(2):
                        m = 0
                        for _ in range(bp):
                            m = (m << 1) | ((buf[pos >> 3] >> (7 - (pos & 7))) & 1)
                            pos += 1
                        out[comp, 2 * cy + wy, 2 * cx + wx] = m
                        if m != 0:
                            nz += 1
                if pos + nz > nbits:
                    return out, -1
                for wy in range(2):
                    for wx in range(2):
                        if out[comp, 2 * cy + wy, 2 * cx + wx] != 0:
                            s = (buf[pos >> 3] >> (7 - (pos & 7))) & 1
                            pos += 1
                            if s:
                                out[comp, 2 * cy + wy, 2 * cx + wx] = -out[
                                    comp, 2 * cy + wy, 2 * cx + wx
                                ]
    return out, pos
