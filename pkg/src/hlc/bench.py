"""Evaluation harness: rate-distortion curves, BD-PSNR, corpus runs and
lambda-table calibration."""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .codec import EncoderConfig, decode_frame_full, encode_frame_full
from .core import QP_MAX, Frame, frame_psnr
from .errors import HlcError
from .imageio import load_image
from .rdo import CuMode, LambdaTable, RdModel, derive_lambda_table, fit_rd_model

DEFAULT_TARGETS = (1.0, 1.25, 1.5, 1.75)

CSV_COLUMNS = [
    "image",
    "config",
    "target_bpp",
    "achieved_bpp",
    "psnr_c0",
    "psnr_c1",
    "psnr_c2",
    "psnr_avg",
    "encode_s",
    "decode_s",
    "cu_plt",
    "cu_dc",
    "cu_vt",
    "cu_ht",
]


@dataclass(frozen=True)
class RatePoint:
    bpp: float
    psnr: tuple
    psnr_avg: float

    def __post_init__(self):
        if self.bpp <= 0:
            raise ValueError("bpp must be positive")


@dataclass(frozen=True)
class RdCurve:
    points: tuple

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if len(self.points) < 4:
            raise ValueError("an R-D curve needs at least 4 points")
        bpps = [p.bpp for p in self.points]
        if any(b2 <= b1 for b1, b2 in zip(bpps, bpps[1:])):
            raise ValueError("curve bpp values must be strictly increasing")


def bd_psnr(ref: RdCurve, test: RdCurve) -> float:
    """Average PSNR gap of test over ref across their shared log-rate range.

    Cubic fit of PSNR against log10(bpp) per curve, integrated exactly;
    positive means test beats ref.
    """
    def fit(curve):
        x = np.log10([p.bpp for p in curve.points])
        y = np.array([p.psnr_avg for p in curve.points])
        if not np.all(np.isfinite(y)):
            raise ValueError("curve contains non-finite PSNR (degenerate fit)")
        return x, np.polyfit(x, y, 3)

    x_ref, p_ref = fit(ref)
    x_test, p_test = fit(test)
    lo = max(x_ref.min(), x_test.min())
    hi = min(x_ref.max(), x_test.max())
    if hi <= lo:
        raise ValueError("rate ranges do not overlap")
    int_ref = np.polyint(p_ref)
    int_test = np.polyint(p_test)
    area_ref = np.polyval(int_ref, hi) - np.polyval(int_ref, lo)
    area_test = np.polyval(int_test, hi) - np.polyval(int_test, lo)
    return float((area_test - area_ref) / (hi - lo))


@dataclass
class RunRecord:
    image: str
    config: str
    target_bpp: float
    achieved_bpp: float
    psnr: tuple
    psnr_avg: float
    encode_s: float
    decode_s: float
    modes: dict

    def csv_row(self, timing: bool):
        fmt_time = (lambda t: f"{t:.4f}") if timing else (lambda t: "")
        return [
            self.image,
            self.config,
            f"{self.target_bpp:g}",
            f"{self.achieved_bpp:.6f}",
            f"{self.psnr[0]:.4f}",
            f"{self.psnr[1]:.4f}",
            f"{self.psnr[2]:.4f}",
            f"{self.psnr_avg:.4f}",
            fmt_time(self.encode_s),
            fmt_time(self.decode_s),
            str(self.modes[CuMode.PLT]),
            str(self.modes[CuMode.DC]),
            str(self.modes[CuMode.VT]),
            str(self.modes[CuMode.HT]),
        ]


def evaluate(frame: Frame, cfg: EncoderConfig):
    """Encode + decode one frame; returns (record fields, decode result)."""
    t0 = time.perf_counter()
    enc = encode_frame_full(frame, cfg)
    t1 = time.perf_counter()
    dec = decode_frame_full(enc.data)
    t2 = time.perf_counter()
    psnr_vals, psnr_avg = frame_psnr(frame, dec.frame)
    achieved = len(enc.data) * 8 / (frame.width * frame.height)
    return enc, dec, psnr_vals, psnr_avg, achieved, t1 - t0, t2 - t1


def _config_for(target_bpp: float, plt_enabled: bool, lambda_table=None, qp_base=None):
    kwargs = dict(target_bpp=target_bpp, plt_enabled=plt_enabled, qp_base=qp_base)
    if lambda_table is not None:
        kwargs["lambda_table"] = lambda_table
    return EncoderConfig(**kwargs)


def _run_one(job):
    path, config_name, target_bpp, plt_enabled, ycbcr = job
    frame = load_image(path, ycbcr=ycbcr)
    cfg = _config_for(target_bpp, plt_enabled)
    enc, dec, psnr_vals, psnr_avg, achieved, te, td = evaluate(frame, cfg)
    return RunRecord(
        image=Path(path).name,
        config=config_name,
        target_bpp=target_bpp,
        achieved_bpp=achieved,
        psnr=psnr_vals,
        psnr_avg=psnr_avg,
        encode_s=te,
        decode_s=td,
        modes=dec.mode_counts,
    )


def run_corpus(paths, targets=DEFAULT_TARGETS, csv_path=None, timing: bool = True,
               ycbcr: bool = False, workers: int = 1):
    """Encode every image at every target with and without palette.

    Returns (records, per-image BD-PSNR of no-plt vs full).  Unreadable
    images are skipped with a warning; rows are ordered by path then config
    then target so repeated runs are reproducible.
    """
    usable = []
    for path in sorted(Path(p) for p in paths):
        try:
            load_image(path, ycbcr=ycbcr)
        except (HlcError, OSError) as exc:
            print(f"warning: skipping {path}: {exc}")
            continue
        usable.append(path)

    jobs = [
        (str(path), name, float(t), plt, ycbcr)
        for path in usable
        for name, plt in (("full", True), ("no-plt", False))
        for t in targets
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_one, jobs))
    else:
        records = [_run_one(job) for job in jobs]
    records.sort(key=lambda r: (r.image, r.config, r.target_bpp))

    bd_by_image = {}
    for path in usable:
        name = path.name
        curves = {}
        for config in ("full", "no-plt"):
            pts = sorted(
                (r for r in records if r.image == name and r.config == config),
                key=lambda r: r.achieved_bpp,
            )
            try:
                curves[config] = RdCurve(
                    tuple(RatePoint(r.achieved_bpp, r.psnr, r.psnr_avg) for r in pts)
                )
            except ValueError:
                curves[config] = None
        if curves["full"] is not None and curves["no-plt"] is not None:
            try:
                bd_by_image[name] = bd_psnr(curves["full"], curves["no-plt"])
            except ValueError:
                bd_by_image[name] = math.nan
        else:
            bd_by_image[name] = math.nan

    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for r in records:
                writer.writerow(r.csv_row(timing))
    return records, bd_by_image


ZERO_LAMBDA = LambdaTable([0.0] * (QP_MAX + 1))

# mean SAD per pixel below which a sweep point counts as lossless saturation
MIN_FIT_DISTORTION = 0.05


def sweep_fixed_qp(frames, qps, plt_enabled: bool = True, lambda_table=None):
    """Encode frames at pinned QPs (rate control off); returns per-frame
    lists of (qp, bpp, mean-SAD, psnr_avg).

    Without a lambda table the mode choice is pure minimum distortion
    (lambda = 0 everywhere), i.e. rate-distortion weighting disabled.
    """
    table = lambda_table if lambda_table is not None else ZERO_LAMBDA
    out = []
    for frame in frames:
        rows = []
        pixels = frame.width * frame.height
        for qp in qps:
            cfg = EncoderConfig(
                target_bpp=1.0,
                qp_base=qp,
                rc_clamp=0,
                plt_enabled=plt_enabled,
                lambda_table=table,
            )
            enc = encode_frame_full(frame, cfg)
            sad = sum(
                int(np.abs(o.astype(np.int64) - r.astype(np.int64)).sum())
                for o, r in zip(frame.planes, enc.recon.planes)
            )
            _, avg = frame_psnr(frame, enc.recon)
            rows.append((qp, enc.payload_bits / pixels, sad / pixels, avg))
        out.append(rows)
    return out


def _monotone_anchors(anchors):
    """Fill unmeasured QPs by interpolation, then take a running minimum
    over qp so the derived lambda is nondecreasing."""
    qs = sorted(anchors)
    full = {}
    for qp in range(QP_MAX + 1):
        if qp in anchors:
            full[qp] = anchors[qp]
        elif qp < qs[0]:
            full[qp] = anchors[qs[0]]
        elif qp > qs[-1]:
            full[qp] = anchors[qs[-1]]
        else:
            lo = max(q for q in qs if q < qp)
            hi = min(q for q in qs if q > qp)
            t = (qp - lo) / (hi - lo)
            full[qp] = anchors[lo] * (1 - t) + anchors[hi] * t
    mono = {}
    floor = math.inf
    for qp in range(QP_MAX + 1):
        floor = min(floor, full[qp])
        mono[qp] = floor
    return mono


def calibrate(paths, qps=tuple(range(QP_MAX + 1)), passes: int = 2):
    """Fit D = C*R**-K on corpus means at fixed QPs and derive the table.

    The first pass measures rate anchors with mode decision by distortion
    alone; later passes re-measure them with the previous pass's table
    driving the decision, so the anchors reflect the operating regime the
    table will actually see.  Returns (RdModel, LambdaTable, anchors,
    report string); raises HlcError if the corpus is too flat to produce
    three positive-distortion points.
    """
    frames = [load_image(p) for p in sorted(Path(p) for p in paths)]
    if len(frames) < 3:
        raise HlcError("calibration needs at least 3 images")
    model = None
    table = None
    anchors = {}
    dists = {}
    for _ in range(max(1, passes)):
        sweeps = sweep_fixed_qp(frames, qps, lambda_table=table)
        for i, qp in enumerate(qps):
            anchors[qp] = float(np.mean([rows[i][1] for rows in sweeps]))
            dists[qp] = float(np.mean([rows[i][2] for rows in sweeps]))
        # the power law models the lossy regime; near-lossless saturation
        # points would bend the log-log fit
        points = [
            (anchors[qp], dists[qp]) for qp in qps if dists[qp] > MIN_FIT_DISTORTION
        ]
        if len(points) < 3:
            raise HlcError("degenerate corpus: distortion is zero almost everywhere")
        model = fit_rd_model(points)
        table = derive_lambda_table(model, _monotone_anchors(anchors))
    lines = [
        f"model: D = {model.c:.6g} * R^-{model.k:.6g}",
        f"r_square: {model.r_square:.6f}",
        f"fit points: {len(points)} of {len(qps)} QPs",
    ]
    for qp in sorted(anchors):
        lines.append(
            f"qp {qp:2d}: rate {anchors[qp]:.4f} bpp, distortion {dists[qp]:.4f}, "
            f"lambda {table[qp]:.6g}"
        )
    return model, table, anchors, "\n".join(lines)
