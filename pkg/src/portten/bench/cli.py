"""``portten-bench``: bandwidth sweeps and per-layer convnet timings.

Exit status: 0 on success, 2 on invalid arguments or model specs, 3 when
the selected backend is unavailable or a kernel fails to build.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import sys
from pathlib import Path

from .. import codegen
from ..backends import BackendError, get_backend
from ..cache import KernelBuildError
from . import report
from .harness import DEFAULT_SIZES, bench_apply, bench_model
from .models import ModelSpecError, model_spec_load

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BACKEND = 3

log = logging.getLogger("portten.bench")


def _sizes(text: str) -> list[int]:
    try:
        values = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid size list {text!r}") from None
    if not values or any(v < 1 or v != int(v) for v in values):
        raise argparse.ArgumentTypeError("sizes must be positive integers, e.g. 1e3,1e4")
    return [int(v) for v in values]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--backend", default=None, choices=("reference", "device", "auto"),
                        help="execution backend (default: $PORTTEN_BACKEND or auto)")
    common.add_argument("--reps", type=int, default=None, help="timed repetitions (>= 3)")
    common.add_argument("--out", default="-", help="CSV output path ('-' for stdout)")
    common.add_argument("--gnuplot", metavar="SCRIPT", help="also write a gnuplot script")
    common.add_argument("--plot", metavar="IMAGE", help="also render a matplotlib figure")
    common.add_argument("--dump-kernels", metavar="DIR",
                        help="write every generated kernel source to DIR")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="portten-bench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("apply", parents=[common], help="per-element bandwidth sweep")
    p.add_argument("--sizes", type=_sizes, default=list(DEFAULT_SIZES),
                   help="comma-separated floats per launch (default 1e3..1e7)")
    p.add_argument("--expr", default="x = x * 2", help="unary apply expression")

    m = sub.add_parser("model", parents=[common], help="per-layer model timings")
    m.add_argument("--name", required=True, help="bundled model (alexnet, vgg-a) or spec file")
    m.add_argument("--scale", type=int, default=16, help="size divisor (default 16)")
    m.add_argument("--impl", default=None, help="force a convolution implementation")
    m.add_argument("--backward", action="store_true", help="time forward+backward")
    m.add_argument("--batch", type=int, default=4)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--summary", metavar="CSV", help="per-layer-type summary CSV")
    return parser


@contextlib.contextmanager
def _output(path: str):
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _run_apply(args, backend) -> None:
    rows = bench_apply(backend, args.sizes, args.expr, reps=args.reps or 5)
    with _output(args.out) as fh:
        report.write_bandwidth_csv(rows, fh)
    if args.gnuplot:
        image = str(Path(args.gnuplot).with_suffix(".png"))
        Path(args.gnuplot).write_text(report.gnuplot_bandwidth(args.out, image))
    if args.plot:
        report.plot_bandwidth(rows, args.plot, label=backend.name)


def _run_model(args, backend) -> None:
    model = model_spec_load(args.name)
    rows, summary = bench_model(model, args.scale, backend, impl=args.impl,
                                backward=args.backward, batch=args.batch,
                                reps=args.reps or 3, seed=args.seed)
    with _output(args.out) as fh:
        report.write_layer_csv(rows, fh)
    if args.summary:
        with _output(args.summary) as fh:
            report.write_summary_csv(summary, fh)
    if args.gnuplot:
        image = str(Path(args.gnuplot).with_suffix(".png"))
        Path(args.gnuplot).write_text(report.gnuplot_layers(args.out, args.summary, image))
    if args.plot:
        mode = "forward+backward" if args.backward else "forward"
        report.plot_layers(rows, summary, args.plot,
                           title=f"{model.name} / {args.scale}, {mode}, {backend.name}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.dump_kernels:
        codegen.set_dump_dir(args.dump_kernels)
    try:
        backend = get_backend(args.backend)
        if args.command == "apply":
            _run_apply(args, backend)
        else:
            _run_model(args, backend)
    except (BackendError, KernelBuildError) as exc:
        print(f"portten-bench: backend failure: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (ModelSpecError, ValueError, LookupError) as exc:
        print(f"portten-bench: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    finally:
        if args.dump_kernels:
            codegen.set_dump_dir(None)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
