"""Command line entry point: ``rdlab <command> ...``.

Exit codes: 0 success, 1 I/O failure, 2 bad arguments, 3 codec failure.
Files are written to a temporary sibling and renamed on success, each with a
``<output>.manifest.json`` sidecar describing the run.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .codec import (
    BitstreamError,
    CodecConfig,
    decode_image,
    encode_image,
    psnr,
    rd_sweep,
)
from .imageio import ImageFormatError, encode_pnm, load_image
from .metrics import bd_psnr, bd_rate, format_rd_csv, read_rd_csv
from .reference import size_law
from .scaling import (
    PowerLawFit,
    evaluate_fit,
    fit_power_law,
    fit_power_law_floor,
    forecast_report,
    pareto_frontier,
    read_points_csv,
    read_training_log,
)
from .svg import Series, plot

EXIT_IO, EXIT_ARGS, EXIT_CODEC = 1, 2, 3
IMAGE_SUFFIXES = (".ppm", ".pgm", ".pnm", ".png")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = (_dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc) if epoch
            else _dt.datetime.now(_dt.timezone.utc))
    return when.strftime("%Y-%m-%dT%H:%M:%SZ")


def _atomic_write(path: str | os.PathLike, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_outputs(outputs: dict, command: str, inputs: list, config: dict) -> None:
    """Write every output file and its manifest; nothing lands unless all succeed."""
    try:
        for path, data in outputs.items():
            manifest = {
                "command": command,
                "inputs": [str(p) for p in inputs],
                "config": config,
                "tool_version": __version__,
                "timestamp": _timestamp(),
            }
            blob = (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode()
            _atomic_write(path, data)
            _atomic_write(f"{path}.manifest.json", blob)
    except OSError as e:
        raise CliError(EXIT_IO, f"cannot write output: {e}") from e


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _load(path):
    try:
        return load_image(path)
    except (OSError, ImageFormatError) as e:
        raise CliError(EXIT_IO, f"cannot read image {path}: {e}") from e


def _read_bytes(path) -> bytes:
    try:
        with open(path, "rb") as f:
            return f.read()
    except OSError as e:
        raise CliError(EXIT_IO, f"cannot read {path}: {e}") from e


def _config(args, delta=None) -> CodecConfig:
    try:
        return CodecConfig(
            delta=args.delta if delta is None else delta,
            beta=args.beta,
            color_transform=args.ycbcr,
            context_enabled=args.context,
            context_rho=args.rho,
        )
    except ValueError as e:
        raise CliError(EXIT_ARGS, str(e)) from e


def _config_dict(cfg: CodecConfig) -> dict:
    return {"delta": cfg.delta, "beta": cfg.beta, "color_transform": cfg.color_transform,
            "context_enabled": cfg.context_enabled, "context_rho": cfg.context_rho}


def cmd_encode(args) -> int:
    cfg = _config(args)
    img = _load(args.input)
    try:
        enc, point = encode_image(img, cfg)
    except (ValueError, ArithmeticError) as e:
        raise CliError(EXIT_CODEC, f"encoding failed: {e}") from e
    data = enc.to_bytes()
    _write_outputs({args.output: data}, "encode", [args.input], _config_dict(cfg))
    print(f"bpp={point.bpp:.6f} psnr={point.psnr:.6f} bytes={len(data)}")
    return 0


def cmd_decode(args) -> int:
    data = _read_bytes(args.input)
    try:
        img = decode_image(data)
    except BitstreamError as e:
        raise CliError(EXIT_CODEC, f"cannot decode {args.input}: {e}") from e
    out = args.output
    if str(out).lower().endswith(".png"):
        tmp = tempfile.NamedTemporaryFile(suffix=".png", delete=False)
        tmp.close()
        try:
            from .imageio import save_image

            save_image(img, tmp.name)
            blob = Path(tmp.name).read_bytes()
        finally:
            os.unlink(tmp.name)
    else:
        blob = encode_pnm(img)
    _write_outputs({out: blob}, "decode", [args.input], {})
    line = f"width={img.width} height={img.height} channels={img.channels}"
    if args.compare:
        line += f" psnr={psnr(_load(args.compare), img):.6f}"
    print(line)
    return 0


def cmd_rd_sweep(args) -> int:
    directory = Path(args.image_dir)
    if not directory.is_dir():
        raise CliError(EXIT_IO, f"not a directory: {directory}")
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise CliError(EXIT_ARGS, f"no images in {directory}")
    if len(args.deltas) < 2:
        raise CliError(EXIT_ARGS, "need at least two deltas")
    cfg = _config(args, delta=max(args.deltas))
    for d in args.deltas:
        _config(args, delta=d)
    images = [_load(p) for p in files]
    threads = int(os.environ.get("RDLAB_THREADS", "0") or 0)
    workers = min(threads or (os.cpu_count() or 1), len(images) * len(args.deltas))
    curve = rd_sweep(images, args.deltas, cfg, workers=workers)
    text = format_rd_csv(curve)
    if args.out:
        config = _config_dict(cfg) | {"deltas": list(args.deltas)}
        _write_outputs({args.out: text.encode()}, "rd-sweep", [str(p) for p in files], config)
    sys.stdout.write(text)
    return 0


def _read_curve(path, label):
    try:
        return read_rd_csv(path, label)
    except OSError as e:
        raise CliError(EXIT_IO, f"cannot read {path}: {e}") from e


def cmd_bdrate(args) -> int:
    anchor = _read_curve(args.anchor, "anchor")
    test = _read_curve(args.test, "test")
    value = bd_rate(anchor, test, pchip=args.pchip)
    print(f"{value:.6f}")
    if args.psnr:
        print(f"{bd_psnr(anchor, test, pchip=args.pchip):.6f}")
    return 0


def _read_scaling_input(path):
    """Return (points, curves) from either an ``x,loss`` CSV or a training log."""
    try:
        with open(path, newline="") as f:
            text = f.read()
    except OSError as e:
        raise CliError(EXIT_IO, f"cannot read {path}: {e}") from e
    header = text.splitlines()[0].split(",") if text.strip() else []
    if "model_id" in header:
        curves = read_training_log(text)
        return [c.final_point() for c in curves], curves
    return read_points_csv(text), []


def _fit_line(fit: PowerLawFit) -> str:
    line = f"gamma={fit.gamma:.6f} alpha={fit.alpha_exp:.6f} r={fit.pearson_r:.6f}"
    if fit.floor is not None:
        line += f" floor={fit.floor:.6f}"
    return line


def _fit_series(fit: PowerLawFit, xs, label: str, color: str) -> Series:
    lo, hi = min(xs), max(xs)
    grid = [lo * (hi / lo) ** (i / 63) for i in range(64)]
    return Series(grid, [evaluate_fit(fit, x) for x in grid], label, color,
                  markers=False, dashed=True)


def _points_csv(header: str, pts) -> str:
    return header + "\n" + "".join(f"{p.x:.6f},{p.loss:.6f}\n" for p in pts)


def _scaling_outputs(path, csv_text: str, svg_text: str) -> dict:
    if path is None:
        return {}
    suffix = Path(path).suffix.lower()
    if suffix == ".svg":
        return {path: svg_text.encode()}
    if suffix == ".csv":
        return {path: csv_text.encode()}
    raise CliError(EXIT_ARGS, f"--out must end in .svg or .csv, got {path}")


def cmd_scaling_fit(args) -> int:
    points, _ = _read_scaling_input(args.input)
    fit = (fit_power_law_floor if args.floor else fit_power_law)(points)
    print(_fit_line(fit))
    xs = [p.x for p in points]
    svg_text = plot([Series(xs, [p.loss for p in points], "data", "#000000", line=False),
                     _fit_series(fit, xs, "power-law fit", "#1f77b4")],
                    "Loss vs scale", "x", "loss")
    _write_outputs(_scaling_outputs(args.out, _points_csv("x,loss", points), svg_text),
                   "scaling fit", [args.input], {"floor": args.floor})
    return 0


def cmd_scaling_frontier(args) -> int:
    _, curves = _read_scaling_input(args.input)
    if not curves:
        raise CliError(EXIT_ARGS, "frontier needs a training log (model_id,n_params_billions,compute_pflops,loss)")
    frontier = pareto_frontier(curves)
    csv_text = _points_csv("compute_pflops,loss", frontier)
    sys.stdout.write(csv_text)
    series = [Series([s[0] for s in c.samples], [s[1] for s in c.samples], c.model_id,
                     markers=False, width=1.0) for c in curves]
    series.append(Series([p.x for p in frontier], [p.loss for p in frontier], "frontier",
                         "#8c4a1a", markers=True, width=3.0))
    if len(frontier) >= (4 if args.floor else 2):
        fit = (fit_power_law_floor if args.floor else fit_power_law)(frontier)
        print("# " + _fit_line(fit))
        series.append(_fit_series(fit, [p.x for p in frontier], "frontier fit", "#e377c2"))
    svg_text = plot(series, "Loss vs training compute", "compute (PFLOPs)", "loss")
    _write_outputs(_scaling_outputs(args.out, csv_text, svg_text),
                   "scaling frontier", [args.input], {"floor": args.floor})
    return 0


def cmd_scaling_forecast(args) -> int:
    if not args.targets:
        raise CliError(EXIT_ARGS, "--targets is required")
    if args.gamma is not None or args.alpha is not None:
        if args.gamma is None or args.alpha is None:
            raise CliError(EXIT_ARGS, "--gamma and --alpha go together")
        fit, points = PowerLawFit(args.gamma, args.alpha, args.floor_value), []
    elif args.input:
        points, curves = _read_scaling_input(args.input)
        report = forecast_report(points, curves, (), floor=args.floor)
        fit = report.size_fit
        print(_fit_line(fit))
    else:
        fit, points = size_law(), []
    forecasts = [(t, evaluate_fit(fit, t)) for t in args.targets]
    for t, v in forecasts:
        print(f"x={t:.6f} loss={v:.6f}")
    csv_text = "x,loss\n" + "".join(f"{t:.6f},{v:.6f}\n" for t, v in forecasts)
    xs = [p.x for p in points] + [t for t, _ in forecasts]
    series = [_fit_series(fit, xs, "power-law fit", "#1f77b4"),
              Series([t for t, _ in forecasts], [v for _, v in forecasts], "forecast", "#d62728",
                     line=False)]
    if points:
        series.insert(0, Series([p.x for p in points], [p.loss for p in points], "models",
                                "#000000", line=False))
    svg_text = plot(series, "Forecast", "model size (B params)", "loss")
    inputs = [args.input] if args.input else []
    _write_outputs(_scaling_outputs(args.out, csv_text, svg_text), "scaling forecast", inputs,
                   {"gamma": fit.gamma, "alpha_exp": fit.alpha_exp, "floor": fit.floor,
                    "targets": list(args.targets)})
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ARGS, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rdlab", description="GGM image codec and scaling-law tools")
    p.add_argument("--version", action="version", version=f"rdlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def codec_flags(sp, with_delta=True):
        if with_delta:
            sp.add_argument("--delta", type=float, default=1.0, help="quantizer step (>= 0.25)")
        sp.add_argument("--beta", type=float, default=1.5, help="GGM shape parameter")
        sp.add_argument("--ycbcr", action="store_true", help="code RGB input as YCbCr")
        sp.add_argument("--context", action="store_true", help="two-pass checkerboard context")
        sp.add_argument("--rho", type=float, default=0.0, help="context prediction weight")

    sp = sub.add_parser("encode", help="encode a PPM/PGM/PNG image")
    sp.add_argument("input")
    sp.add_argument("output")
    codec_flags(sp)
    sp.set_defaults(func=cmd_encode)

    sp = sub.add_parser("decode", help="decode a bitstream to PPM/PGM/PNG")
    sp.add_argument("input")
    sp.add_argument("output")
    sp.add_argument("--compare", metavar="IMAGE", help="also print PSNR against this image")
    sp.set_defaults(func=cmd_decode)

    sp = sub.add_parser("rd-sweep", help="average RD curve of a directory of images")
    sp.add_argument("image_dir")
    sp.add_argument("--deltas", type=_floats, default=[1.0, 2.0, 4.0, 8.0],
                    help="comma-separated quantizer steps (default 1,2,4,8)")
    sp.add_argument("--out", help="CSV output path")
    codec_flags(sp, with_delta=False)
    sp.set_defaults(func=cmd_rd_sweep)

    sp = sub.add_parser("bdrate", help="BD-Rate of TEST against ANCHOR (bpp,psnr CSVs)")
    sp.add_argument("anchor")
    sp.add_argument("test")
    sp.add_argument("--pchip", action="store_true", help="piecewise cubic Hermite interpolation")
    sp.add_argument("--psnr", action="store_true", help="also print BD-PSNR")
    sp.set_defaults(func=cmd_bdrate)

    sc = sub.add_parser("scaling", help="scaling-law fits").add_subparsers(
        dest="scaling_command", required=True, parser_class=_Parser)
    sp = sc.add_parser("fit", help="fit a power law to x,loss points or final losses of a log")
    sp.add_argument("input")
    sp.add_argument("--floor", action="store_true", help="fit an irreducible loss floor")
    sp.add_argument("--out", help=".svg or .csv output")
    sp.set_defaults(func=cmd_scaling_fit)

    sp = sc.add_parser("frontier", help="compute-optimal frontier of a training log")
    sp.add_argument("input", help="training log CSV")
    sp.add_argument("--floor", action="store_true", help="fit the frontier with a loss floor")
    sp.add_argument("--out", help=".svg or .csv output")
    sp.set_defaults(func=cmd_scaling_frontier)

    sp = sc.add_parser("forecast", help="evaluate a size law at target sizes")
    sp.add_argument("input", nargs="?", help="points CSV or training log to fit from")
    sp.add_argument("--targets", type=_floats, required=True, help="comma-separated x values")
    sp.add_argument("--gamma", type=float, help="law coefficient (with --alpha, skips fitting)")
    sp.add_argument("--alpha", type=float, help="law exponent")
    sp.add_argument("--floor-value", type=float, help="loss floor added to --gamma/--alpha law")
    sp.add_argument("--floor", action="store_true", help="fit with a loss floor")
    sp.add_argument("--out", help=".svg or .csv output")
    sp.set_defaults(func=cmd_scaling_forecast)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"rdlab: {e}", file=sys.stderr)
        return e.code
    except ValueError as e:
        print(f"rdlab: {e}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
