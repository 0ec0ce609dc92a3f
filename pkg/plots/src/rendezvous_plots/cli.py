"""Command-line figure generation.

Either pass a FigureSpec file (same flat key = value format as the
experiment configs) or mirror its fields with flags:

  rendezvous-plots trajectory out.png run_a.csv run_b.csv --labels a,b
  rendezvous-plots actuation raster.png run_a_actuation.csv --plane zx
  rendezvous-plots histogram times.png std.csv rel.csv --labels standard,relaxed
  rendezvous-plots profile profile.png std.csv --mission-times 1880
  rendezvous-plots spec figure.spec
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import ZX_PLANE_THRUSTERS, FigureSpec, SchemaError, render


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(part) for part in text.split(",") if part.strip())


def spec_from_file(path) -> FigureSpec:
    values: dict = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key in ("inputs", "labels"):
            values[key] = tuple(part.strip() for part in value.split(",") if part.strip())
        elif key in ("xlim", "ylim", "mission_times"):
            values[key] = _parse_floats(value)
        elif key == "thrusters":
            values[key] = tuple(int(v) for v in _parse_floats(value))
        elif key in ("sampling_period",):
            values[key] = float(value)
        elif key == "bins":
            values[key] = int(value)
        elif key in ("kind", "output", "title"):
            values[key] = value
        else:
            raise ValueError(f"{path}:{lineno}: unknown key '{key}'")
    return FigureSpec(**values)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rendezvous-plots", description=__doc__)
    sub = parser.add_subparsers(dest="kind", required=True)

    spec_cmd = sub.add_parser("spec", help="render a FigureSpec file")
    spec_cmd.add_argument("spec_file")

    for kind in ("trajectory", "actuation", "histogram", "profile"):
        cmd = sub.add_parser(kind)
        cmd.add_argument("output")
        cmd.add_argument("inputs", nargs="+")
        cmd.add_argument("--labels", default="", help="comma-separated series labels")
        cmd.add_argument("--title", default="")
        cmd.add_argument("--xlim", default="", help="low,high")
        cmd.add_argument("--ylim", default="", help="low,high")
        cmd.add_argument("--sampling-period", type=float, default=10.0)
        if kind == "actuation":
            cmd.add_argument("--thrusters", default="", help="1-based indices, e.g. 1,3,4,6")
            cmd.add_argument(
                "--plane",
                choices=["zx"],
                default=None,
                help="restrict to the default layout's zx-plane thrusters",
            )
        if kind == "histogram":
            cmd.add_argument("--bins", type=int, default=40)
        if kind == "profile":
            cmd.add_argument("--mission-times", default="", help="comma-separated t markers")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.kind == "spec":
            spec = spec_from_file(args.spec_file)
        else:
            thrusters: tuple[int, ...] = ()
            if getattr(args, "plane", None) == "zx":
                thrusters = ZX_PLANE_THRUSTERS
            if getattr(args, "thrusters", ""):
                thrusters = tuple(int(v) for v in _parse_floats(args.thrusters))
            spec = FigureSpec(
                inputs=tuple(args.inputs),
                kind=args.kind,
                output=args.output,
                labels=tuple(part for part in args.labels.split(",") if part),
                title=args.title,
                xlim=_parse_floats(args.xlim) or None,
                ylim=_parse_floats(args.ylim) or None,
                sampling_period=args.sampling_period,
                thrusters=thrusters,
                mission_times=_parse_floats(getattr(args, "mission_times", "")),
                bins=getattr(args, "bins", 40),
            )
        out = render(spec)
    except (SchemaError, ValueError, OSError) as exc:
        print(f"figure error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
