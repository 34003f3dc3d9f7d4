"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error (unreadable image,
malformed bitstream, degenerate corpus).
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from .bench import DEFAULT_TARGETS, calibrate, run_corpus
from .codec import EncoderConfig, decode_frame, encode_frame
from .corpus import DEFAULT_SEED, make_test_corpus, make_text_corpus
from .errors import HlcError
from .imageio import load_image, store_image
from .rdo import LambdaTable


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the CLI contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_encoder_flags(p):
    p.add_argument("--bpp", type=float, default=1.5, help="target bits per pixel")
    p.add_argument("--qp-base", type=int, default=None,
                   help="base QP (default: derived from --bpp)")
    p.add_argument("--no-plt", action="store_true", help="disable palette mode")
    p.add_argument("--lambda-table", type=Path, default=None,
                   help="text file with 20 'qp lambda' lines")
    p.add_argument("--rc-gain", type=int, default=256,
                   help="bits of rate error per QP step")
    p.add_argument("--rc-clamp", type=int, default=4,
                   help="max QP deviation from base (0 disables rate control)")


def _encoder_config(args) -> EncoderConfig:
    kwargs = dict(
        target_bpp=args.bpp,
        qp_base=args.qp_base,
        plt_enabled=not args.no_plt,
        rc_gain=args.rc_gain,
        rc_clamp=args.rc_clamp,
    )
    if args.lambda_table is not None:
        kwargs["lambda_table"] = LambdaTable.load(args.lambda_table)
    return EncoderConfig(**kwargs)


def _cmd_encode(args) -> int:
    frame = load_image(args.input, ycbcr=args.ycbcr)
    data = encode_frame(frame, _encoder_config(args))
    Path(args.output).write_bytes(data)
    bpp = len(data) * 8 / (frame.width * frame.height)
    print(f"{args.output}: {len(data)} bytes, {bpp:.4f} bpp")
    return 0


def _cmd_decode(args) -> int:
    data = Path(args.input).read_bytes()
    frame = decode_frame(data)
    store_image(frame, args.output, ycbcr=args.ycbcr)
    print(f"{args.output}: {frame.width}x{frame.height} {frame.bit_depth}-bit")
    return 0


def _cmd_bench(args) -> int:
    paths = sorted(p for p in Path(args.corpus).iterdir() if p.is_file())
    if not paths:
        raise HlcError(f"no files in {args.corpus}")
    targets = tuple(float(t) for t in args.targets.split(","))
    records, bd_by_image = run_corpus(
        paths,
        targets=targets,
        csv_path=args.csv,
        timing=not args.no_timing,
        ycbcr=args.ycbcr,
        workers=args.workers,
    )
    for r in records:
        print(
            f"{r.image:24s} {r.config:7s} target {r.target_bpp:5.2f} "
            f"-> {r.achieved_bpp:6.3f} bpp, {r.psnr_avg:7.3f} dB"
        )
    valid = [v for v in bd_by_image.values() if not math.isnan(v)]
    if valid:
        mean_bd = sum(valid) / len(valid)
        print(f"BD-PSNR no-plt vs full (mean over {len(valid)} images): {mean_bd:+.3f} dB")
    else:
        print("BD-PSNR no-plt vs full: not computable (degenerate curves)")
    if args.csv:
        print(f"wrote {args.csv}")
    return 0


def _cmd_calibrate(args) -> int:
    paths = sorted(p for p in Path(args.corpus).iterdir() if p.is_file())
    model, table, _anchors, report = calibrate(paths)
    table.save(args.table_out)
    Path(args.report_out).write_text(report + "\n")
    print(report)
    print(f"wrote {args.table_out} and {args.report_out}")
    return 0


def _cmd_gen_text_corpus(args) -> int:
    paths = make_text_corpus(args.directory, count=args.count, seed=args.seed,
                             size=args.size)
    print(f"wrote {len(paths)} text pages to {args.directory}")
    return 0


def _cmd_gen_test_corpus(args) -> int:
    paths = make_test_corpus(args.directory, seed=args.seed, size=args.size)
    print(f"wrote {len(paths)} images to {args.directory}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="hlc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="compress an image to .hlc")
    p.add_argument("input")
    p.add_argument("output")
    _add_encoder_flags(p)
    p.add_argument("--ycbcr", action="store_true",
                   help="convert RGB to BT.709 YCbCr before encoding")
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("decode", help="decompress an .hlc file")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--ycbcr", action="store_true",
                   help="stream holds YCbCr samples; convert back to RGB")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("bench", help="encode a corpus at the standard targets")
    p.add_argument("corpus")
    p.add_argument("--targets", default=",".join(str(t) for t in DEFAULT_TARGETS))
    p.add_argument("--csv", type=Path, default=None)
    p.add_argument("--no-timing", action="store_true",
                   help="blank timing columns for reproducible output")
    p.add_argument("--ycbcr", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("calibrate", help="fit the R-D model and lambda table")
    p.add_argument("corpus")
    p.add_argument("--table-out", type=Path, default=Path("lambda_table.txt"))
    p.add_argument("--report-out", type=Path, default=Path("calibration_report.txt"))
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("gen-text-corpus", help="generate dense glyph pages")
    p.add_argument("directory")
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=_cmd_gen_text_corpus)

    p = sub.add_parser("gen-test-corpus", help="generate the mixed test corpus")
    p.add_argument("directory")
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=_cmd_gen_test_corpus)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (HlcError, OSError, ValueError) as exc:
        print(f"hlc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
