"""
Command-line front end: ``crtkit <subcommand> [options]``.

Exit codes: 0 success, 1 usage error, 2 data or format error, 3 range check
failed, 4 selftest failed.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np
from scipy import fft as sp_fft

from . import __version__
from .cone import (ConeError, ConeParams, QuadratureSpec, cone_reach, forward_crt,
                   shadow_padding, weighted_forward_crt)
from .dalembertian import apply_box
from .field import GridError, GridSpec, crop_field, linf_norm, pad_field, relative_l2
from .inversion import DimensionError, check_range, filtered_data, invert
from .io import (FormatError, parse_keyvalue, read_crtf, read_keyvalue, slice_2d, write_crtf,
                 write_csv, write_keyvalue, write_pgm)
from .phantoms import PhantomError, PhantomSpec, default_scene, render_phantom
from .spectral import SymbolDomainError, symbol_table

logger = logging.getLogger("crtkit")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RANGE, EXIT_SELFTEST = 0, 1, 2, 3, 4
DATA_ERRORS = (FormatError, GridError, ConeError, PhantomError, DimensionError, SymbolDomainError,
               OSError, ValueError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _angle(text: str) -> float:
    try:
        phi = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0.0 < phi < math.pi / 2:
        raise argparse.ArgumentTypeError(f"phi must lie in (0, pi/2), got {phi}")
    return phi


def _positive(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _meta_path(path) -> Path:
    return Path(f"{path}.meta")


# -- subcommand implementations ------------------------------------------------

def cmd_phantom(args) -> int:
    if args.lo or args.hi or args.counts:
        if not (args.lo and args.hi and args.counts):
            raise UsageError("--lo, --hi and --counts must be given together")
        grid = GridSpec.from_bounds(args.lo, args.hi, args.counts)
        m = grid.spatial_dim
        center = args.center or (0.0,) * (m + 1)
        radius = args.radius or (1.0,)
        spec = PhantomSpec(args.kind, (center,), (radius if len(radius) > 1 else radius[0],),
                           (args.amplitude,))
    else:
        spec, grid = default_scene(args.m, args.count, args.t_count)
        if args.center or args.radius or args.kind != "bump" or args.amplitude != 1.0:
            radius = args.radius or (1.0,)
            spec = PhantomSpec(args.kind, (args.center or spec.centers[0],),
                               (radius if len(radius) > 1 else radius[0],), (args.amplitude,))
    f = render_phantom(spec, grid)
    write_crtf(args.output, f)
    print(f"wrote {args.output}: grid {grid.counts}, linf {linf_norm(f):.6g}")
    return EXIT_OK


def _padding_for(f, cone, policy: str, guard_rows: int):
    m = f.spatial_dim
    if policy == "none":
        return [(0, 0)] * (m + 1)
    if policy == "reach":
        rows = int(math.ceil(cone_reach(f.grid, cone) / f.grid.dt))
        return [(0, 0)] * m + [(0, rows)]
    return shadow_padding(f, cone, above=guard_rows)


def _run_forward(args, weighted: bool) -> int:
    f = read_crtf(args.input)
    cone = ConeParams(args.phi)
    quad = QuadratureSpec(args.order)
    widths = _padding_for(f, cone, args.pad, args.guard_rows)
    padded = pad_field(f, widths)
    if weighted:
        g = weighted_forward_crt(padded, cone, quad)
    else:
        g = forward_crt(padded, cone, quad, surface_measure=args.surface_measure, flip=args.flip_cone)
    write_crtf(args.output, g)
    meta = {
        "source": str(args.input),
        "transform": "weighted" if weighted else "forward",
        "phi": repr(args.phi),
        "order": args.order,
        "pad_policy": args.pad,
        "pad_widths": ";".join(f"{a},{b}" for a, b in widths),
        "source_counts": ",".join(map(str, f.grid.counts)),
        "source_spacing": ",".join(repr(h) for h in f.grid.spacing),
        "source_origin": ",".join(repr(o) for o in f.grid.origin),
    }
    write_keyvalue(_meta_path(args.output), meta)
    print(f"wrote {args.output}: grid {g.grid.counts} (padding {widths})")
    return EXIT_OK


def cmd_forward(args) -> int:
    return _run_forward(args, weighted=False)


def cmd_forward_weighted(args) -> int:
    return _run_forward(args, weighted=True)


def cmd_box(args) -> int:
    f = read_crtf(args.input)
    write_crtf(args.output, apply_box(f, args.phi, args.k))
    print(f"wrote {args.output}")
    return EXIT_OK


def _source_grid(path):
    meta_file = _meta_path(path)
    if not meta_file.exists():
        return None
    meta = read_keyvalue(meta_file)
    try:
        return GridSpec(_ints(meta["source_counts"]), _floats(meta["source_spacing"]),
                        _floats(meta["source_origin"]))
    except (KeyError, argparse.ArgumentTypeError) as exc:
        raise FormatError(f"{meta_file}: incomplete metadata ({exc})") from exc


def cmd_invert(args) -> int:
    g = read_crtf(args.input)
    f = invert(g, args.phi, QuadratureSpec(args.order))
    if args.crop:
        grid = _source_grid(args.input)
        if grid is None:
            raise FormatError(f"--crop needs {_meta_path(args.input)} written by forward")
        f = crop_field(f, grid)
    write_crtf(args.output, f)
    print(f"wrote {args.output}: grid {f.grid.counts}")
    return EXIT_OK


def cmd_check_range(args) -> int:
    g = read_crtf(args.input)
    quad = QuadratureSpec(args.order)
    report = check_range(g, args.phi, tol=args.tol, quad=quad)
    text = report.to_text()
    sys.stdout.write(text)
    if args.report:
        Path(args.report).write_text(text)
    if args.kv:
        Path(args.kv).write_text(report.to_keyvalue())
    if args.figure:
        from .plotting import range_figure
        filtered, _ = filtered_data(g, args.phi, quad=quad)
        range_figure(g, filtered, report, args.figure)
    return EXIT_OK if report.passed else EXIT_RANGE


def cmd_symbol_table(args) -> int:
    sigmas = [complex(s, -t) for s in args.re_sigma for t in args.tau]
    rows = symbol_table(args.m, args.phi, args.omega, sigmas)
    out = open(args.output, "w") if args.output else sys.stdout
    with (out if args.output else nullcontext(out)):
        out.write("m,phi,omega,re_sigma,im_sigma,re_value,im_value\n")
        for row in rows:
            out.write(",".join(repr(float(v)) if not isinstance(v, int) else str(v) for v in row) + "\n")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest
    results = run_selftest()
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print("selftest: " + ("all checks passed" if ok else "FAILED"))
    return EXIT_OK if ok else EXIT_SELFTEST


def cmd_export(args) -> int:
    f = read_crtf(args.input)
    if args.format == "csv":
        write_csv(args.output, f)
    else:
        fixed = dict(args.fix or [])
        vmin, vmax = write_pgm(args.output, slice_2d(f, fixed))
        print(f"range [{vmin:.6g}, {vmax:.6g}] recorded in {args.output}.minmax")
    if args.figure:
        from .plotting import field_figure
        field_figure(f, args.figure, title=Path(args.input).name)
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_compare(args) -> int:
    a, b = read_crtf(args.first), read_crtf(args.second)
    if not a.grid.same_as(b.grid):
        small, large = (a, b) if a.grid.size <= b.grid.size else (b, a)
        large = crop_field(large, small.grid)
        a, b = (small, large) if small is a else (large, small)
    rel = relative_l2(a, b)
    diff = float(np.abs(a.values - b.values).max())
    print(f"relative_l2={rel:.6e}")
    print(f"linf_diff={diff:.6e}")
    if args.max_rel is not None and rel > args.max_rel:
        return EXIT_RANGE
    return EXIT_OK


# -- parser ----------------------------------------------------------------------

def _fix_pair(text: str):
    try:
        axis, index = text.split("=")
        return int(axis), int(index)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected AXIS=INDEX, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="crtkit", description="Conical Radon transform toolkit.")
    parser.add_argument("--version", action="version", version=f"crtkit {__version__}")
    parser.add_argument("--config", help="key=value file with option defaults")
    parser.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--threads", type=int, default=1, help="FFT worker threads")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    def cone_opts(p, order=True):
        p.add_argument("--phi", type=_angle, default=math.pi / 4, help="half-opening angle (rad)")
        if order:
            p.add_argument("--order", type=int, choices=(1, 3), default=1,
                           help="t-interpolation order of the quadrature")

    p = sub.add_parser("phantom", help="render a bump or Gaussian phantom")
    p.add_argument("output")
    p.add_argument("--m", type=int, choices=(1, 2, 3), default=1)
    p.add_argument("--count", type=int, help="spatial samples per axis (default scene)")
    p.add_argument("--t-count", type=int)
    p.add_argument("--kind", choices=("bump", "gaussian"), default="bump")
    p.add_argument("--center", type=_floats)
    p.add_argument("--radius", type=_floats)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--lo", type=_floats)
    p.add_argument("--hi", type=_floats)
    p.add_argument("--counts", type=_ints)
    p.set_defaults(func=cmd_phantom)

    for name, func, helptext in (("forward", cmd_forward, "cone transform C"),
                                 ("forward-weighted", cmd_forward_weighted, "weighted transform C'")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("input")
        p.add_argument("output")
        cone_opts(p)
        p.add_argument("--pad", choices=("reach", "shadow", "none"), default="reach",
                       help="reach: extend t by the cone reach; shadow: widen the spatial axes "
                            "to hold the cone shadow; none: use the input grid")
        p.add_argument("--guard-rows", type=int, default=4,
                       help="t-rows appended above the data with --pad shadow")
        if name == "forward":
            p.add_argument("--flip-cone", action="store_true", help="cones open towards -t")
            p.add_argument("--surface-measure", action="store_true",
                           help="integrate against surface measure (divides by sin phi)")
        p.set_defaults(func=func)

    p = sub.add_parser("box", help="apply the iterated d'Alembertian")
    p.add_argument("input")
    p.add_argument("output")
    cone_opts(p, order=False)
    p.add_argument("--k", type=int, default=1)
    p.set_defaults(func=cmd_box)

    p = sub.add_parser("invert", help="invert forward data (parity chosen from m)")
    p.add_argument("input")
    p.add_argument("output")
    cone_opts(p)
    p.add_argument("--crop", action="store_true",
                   help="crop the result to the grid recorded by forward in INPUT.meta")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("check-range", help="test the range conditions; exit 3 if any fails")
    p.add_argument("input")
    cone_opts(p)
    p.add_argument("--tol", type=_positive, help="relative tolerance (default max(10 h^2, 1e-6))")
    p.add_argument("--report", help="write the text report here")
    p.add_argument("--kv", help="write key=value results here")
    p.add_argument("--figure", help="write a PNG summary figure here")
    p.set_defaults(func=cmd_check_range)

    p = sub.add_parser("symbol-table", help="CSV of the cone-kernel symbol")
    p.add_argument("--m", type=int, choices=(1, 2, 3), default=1)
    cone_opts(p, order=False)
    p.add_argument("--omega", type=_floats, default=(0.5, 1.0, 2.0, 4.0, 8.0))
    p.add_argument("--tau", type=_floats, default=(0.5, 1.0, 2.0, 4.0, 8.0),
                   help="values of -Im(sigma); all must be positive")
    p.add_argument("--re-sigma", type=_floats, default=(0.0,))
    p.add_argument("--output")
    p.set_defaults(func=cmd_symbol_table)

    p = sub.add_parser("selftest", help="calibration and identity checks; exit 4 on failure")
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("export", help="CSV or 16-bit PGM export")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--format", choices=("csv", "pgm"), default="csv")
    p.add_argument("--fix", type=_fix_pair, action="append",
                   help="AXIS=INDEX to fix for the PGM slice (repeatable)")
    p.add_argument("--figure", help="also write a PNG of the x1-t slice")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("compare", help="relative l2 distance of two fields")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--max-rel", type=float, help="exit 3 if the distance exceeds this")
    p.set_defaults(func=cmd_compare)
    return parser


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _apply_config(parser: argparse.ArgumentParser, pairs: dict, source: str):
    """Install config values as defaults; command-line flags still win."""
    subparsers = [a for a in parser._actions if isinstance(a, argparse._SubParsersAction)]
    targets = [parser] + [p for sp in subparsers for p in sp.choices.values()]
    known = set()
    for target in targets:
        for action in target._actions:
            key = action.dest
            if key not in pairs or not action.option_strings:
                continue
            known.add(key)
            raw = pairs[key]
            if isinstance(action, argparse._StoreTrueAction):
                if raw.lower() not in _TRUE | _FALSE:
                    raise UsageError(f"{source}: {key} must be true or false, got {raw!r}")
                action.default = raw.lower() in _TRUE
            else:
                try:
                    value = action.type(raw) if action.type else raw
                except (argparse.ArgumentTypeError, ValueError) as exc:
                    raise UsageError(f"{source}: bad value for {key}: {exc}")
                if action.choices is not None and value not in action.choices:
                    raise UsageError(f"{source}: {key} must be one of {list(action.choices)}")
                action.default = value
    unknown = sorted(set(pairs) - known)
    if unknown:
        raise UsageError(f"{source}: unknown option(s) {', '.join(unknown)}")


def _config_arg(argv):
    pre = _Parser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    return known.config


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser = build_parser()
        config = _config_arg(argv)
        if config:
            try:
                pairs = parse_keyvalue(Path(config).read_text(), config)
            except OSError as exc:
                raise UsageError(f"cannot read config {config}: {exc}")
            except FormatError as exc:
                raise UsageError(str(exc))
            pairs = {k.replace("-", "_"): v for k, v in pairs.items()}
            _apply_config(parser, pairs, config)
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)

    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with sp_fft.set_workers(max(1, args.threads)):
            return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
