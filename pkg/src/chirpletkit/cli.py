"""Command-line entry point: ``chirplet <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from .core import make_analytic, reconstruct
from .dictionary import DictionaryConfig, build_dictionary
from .errors import (
    ChirpletError,
    CorruptFileError,
    DomainError,
    FormatVersionError,
    InvalidInputError,
    ParseError,
    UnsupportedFormatError,
)
from .estimator import EstimatorOptions, mpem_decompose
from .io import (
    decimate,
    dumps_decomposition,
    load_decomposition,
    load_signal,
    write_csv_signal,
    write_wav,
)
from .spectra import acs, export_grid, stft_spectrogram

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
DEFAULT_MAX_LENGTH = 4096

log = logging.getLogger("chirpletkit")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _signal_from_file(path, decimate_by=None):
    x, rate = load_signal(path)
    if decimate_by:
        if np.iscomplexobj(x):
            x = x.real
        x, rate = decimate(x, decimate_by, rate)
    if not np.iscomplexobj(x):
        x = make_analytic(x)
    return x, rate


def _options(args) -> EstimatorOptions:
    return EstimatorOptions(max_atoms=args.atoms, cc_threshold=args.cc_thresh,
                            em_passes=args.em_passes)


def cmd_decompose(args):
    f, rate = _signal_from_file(args.input, args.decimate)
    if f.size > args.max_length:
        raise InvalidInputError(
            f"signal has {f.size} samples (limit {args.max_length}); "
            "decimate it (--decimate) or split it into segments first"
        )
    d = build_dictionary(DictionaryConfig(f.size, args.radix, args.i0))
    dec = mpem_decompose(f, d, _options(args), sample_rate_hz=rate)
    _write_text(args.output, dumps_decomposition(dec))
    log.info("%d atoms, residual energy %.6g", len(dec.atoms), dec.residual_energy_trace[-1])


def cmd_synth(args):
    dec = load_decomposition(args.input)
    z = reconstruct(dec)
    out = Path(args.output)
    if out.suffix.lower() == ".wav":
        write_wav(out, z.real, dec.sample_rate_hz or args.rate)
    elif out.suffix.lower() in (".csv", ".txt"):
        write_csv_signal(out, z if args.complex else z.real, dec.sample_rate_hz)
    else:
        raise UsageError(f"cannot infer output format from {out.name!r}; use .wav or .csv")


def cmd_render(args):
    if args.acs == args.stft:
        raise UsageError("render: choose exactly one of --acs or --stft")
    src = Path(args.input)
    is_decomp = src.suffix.lower() == ".json"
    if args.acs:
        if is_decomp:
            dec = load_decomposition(src)
        else:
            f, rate = _signal_from_file(src)
            d = build_dictionary(DictionaryConfig(f.size))
            dec = mpem_decompose(f, d, EstimatorOptions(), sample_rate_hz=rate)
        grid = acs(dec)
    else:
        f = reconstruct(load_decomposition(src)) if is_decomp else _signal_from_file(src)[0]
        grid = stft_spectrogram(f, args.window, args.hop)
    export_grid(grid, args.output)


def cmd_bench(args):
    snrs = [float(s) for s in args.snr.split(",")] if args.snr else list(bench.DEFAULT_SNRS)
    report = bench.run_robustness_experiment(snrs, args.trials, args.boot, args.seed, n=args.n)
    _write_text(args.output, report.to_csv())
    sys.stdout.write(report.to_text())


def cmd_info(args):
    dec = load_decomposition(args.input)
    rate = dec.sample_rate_hz
    print(f"{len(dec.atoms)} atoms, N={dec.n_samples}, "
          f"sample rate={'normalized' if rate is None else f'{rate:g} Hz'}, "
          f"radix={dec.radix}, i0={dec.i0}")
    print(f"{'#':>3} {'amp':>10} {'phase':>8} {'tc':>9} {'fc':>8} {'c':>11} {'dt':>9} {'cc':>8}")
    for i, a in enumerate(dec.atoms, 1):
        p = a.params
        print(f"{i:3d} {a.amp:10.4g} {a.phase:8.3f} {p.tc:9.3f} {p.omega:8.4f} "
              f"{p.c:11.4e} {p.dt:9.3f} {a.cc:8.4f}")
    trace = dec.residual_energy_trace
    print(f"residual energy: {trace[0]:.6g} -> {trace[-1]:.6g}")


def cmd_demo(args):
    if args.kind == "crossed":
        x = bench.make_crossed_signal(args.n)
    else:
        x = bench.seven_component_signal(args.n)
    write_csv_signal(args.output, x if args.complex else x.real)


def _write_text(path, text):
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="chirplet", description="Adaptive chirplet decomposition (MPEM).")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("decompose", help="decompose a WAV/CSV signal into chirplets")
    s.add_argument("input")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--atoms", type=int, default=10)
    s.add_argument("--cc-thresh", type=float, default=0.005)
    s.add_argument("--em-passes", type=int, default=3)
    s.add_argument("--radix", type=int, default=2)
    s.add_argument("--i0", type=int, default=1)
    s.add_argument("--decimate", type=int, default=None, metavar="FACTOR")
    s.add_argument("--max-length", type=int, default=DEFAULT_MAX_LENGTH)
    s.set_defaults(func=cmd_decompose)

    s = sub.add_parser("synth", help="reconstruct a signal from a decomposition file")
    s.add_argument("input")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--rate", type=float, default=8000.0,
                   help="WAV rate when the decomposition has none")
    s.add_argument("--complex", action="store_true", help="write re,im columns to CSV")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("render", help="render an ACS or STFT grid")
    s.add_argument("input")
    s.add_argument("--acs", action="store_true")
    s.add_argument("--stft", action="store_true")
    s.add_argument("--window", type=int, default=11)
    s.add_argument("--hop", type=int, default=1)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_render)

    s = sub.add_parser("bench", help="run the noise-robustness benchmark")
    s.add_argument("--snr", default=None, help="comma-separated SNR list in dB")
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--boot", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n", type=int, default=100)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("info", help="print the atom table of a decomposition file")
    s.add_argument("input")
    s.set_defaults(func=cmd_info)

    s = sub.add_parser("demo", help="write a synthetic demo signal as CSV")
    s.add_argument("kind", choices=("crossed", "seven"))
    s.add_argument("--n", type=int, default=None)
    s.add_argument("--complex", action="store_true", help="write re,im columns")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
        if args.command == "demo" and args.n is None:
            args.n = 100 if args.kind == "crossed" else 512
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s: %(message)s", stream=sys.stderr)
        args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, UnsupportedFormatError, FormatVersionError, CorruptFileError,
            InvalidInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DomainError, ChirpletError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
