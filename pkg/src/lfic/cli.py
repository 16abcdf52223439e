"""Command-line interface: ``lfic <subcommand> ...``.

Exit codes: 0 ok, 1 gradient check failed, 2 bad flags, 3 IO error,
4 format error, 5 budget infeasible (container still written).
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import bdrate, bitstream, codec, gradcheck, harness, ratecontrol
from .errors import LficError, PnmError, WeightsFormatError
from .image import psnr, read_pnm, save_pnm
from .metric import FIXTURE_PATH, EmbeddingNet, LossWeights

log = logging.getLogger("lfic")

EXIT_OK = 0
EXIT_GRAD_FAIL = 1
EXIT_FLAGS = 2
EXIT_IO = 3
EXIT_FORMAT = 4
EXIT_BUDGET = 5


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def atomic_write(path, data: bytes | str):
    """Write via a temp file in the target directory, then rename."""
    path = Path(path)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _positive(v):
    x = float(v)
    if not x > 0 or not math.isfinite(x):
        raise argparse.ArgumentTypeError(f"must be a positive number: {v}")
    return x


def _nonneg(v):
    x = float(v)
    if not x >= 0 or not math.isfinite(x):
        raise argparse.ArgumentTypeError(f"must be non-negative: {v}")
    return x


def _levels(v):
    x = int(v)
    if not 2 <= x <= 256:
        raise argparse.ArgumentTypeError("levels must be in [2, 256]")
    return x


def _fraction(v):
    x = float(v)
    if not 0 < x <= 1:
        raise argparse.ArgumentTypeError("must be in (0, 1]")
    return x


def _loops(v):
    x = int(v)
    if x < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return x


def _budget_list(v):
    try:
        budgets = [_positive(b) for b in v.split(",") if b.strip()]
    except (ValueError, argparse.ArgumentTypeError) as exc:
        raise argparse.ArgumentTypeError(f"bad budget list {v!r}") from exc
    if not budgets or any(b >= a for a, b in zip(budgets[1:], budgets)):
        raise argparse.ArgumentTypeError("budgets must be strictly increasing")
    return budgets


def _add_codec_flags(p):
    p.add_argument("--block-max", type=int, choices=(4, 8), default=8)
    p.add_argument("--levels", type=_levels, default=8)
    p.add_argument("--weights", help="LFW1 weights file, or 'fixture'; omit for pixel metric only")
    p.add_argument("--lambda-con", type=_nonneg, default=0.01)
    p.add_argument("--lambda-sem", type=_nonneg, default=10.0)
    p.add_argument("--refine-fraction", type=_fraction, default=0.05)
    p.add_argument("--max-loops", type=_loops, default=32)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lfic", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="compress a PNM image under a bit budget")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--budget-bpp", type=_positive, required=True)
    p.add_argument("--report", help="write the key=value report here")
    p.add_argument("--csv", help="append-free CSV file with one report row")
    _add_codec_flags(p)

    p = sub.add_parser("decode", help="decompress a container to PNM")
    p.add_argument("input")
    p.add_argument("output")

    p = sub.add_parser("info", help="summarise a container")
    p.add_argument("input")

    p = sub.add_parser("rd-sweep", help="encode a corpus at several budgets")
    p.add_argument("corpus")
    p.add_argument("--budgets", type=_budget_list, default=[0.05, 0.1, 0.2, 0.4])
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.add_argument("--containers", help="directory for the encoded containers")
    p.add_argument("--workers", type=int, default=1)
    _add_codec_flags(p)

    p = sub.add_parser("bdrate", help="BD-rate of TEST against ANCHOR (rate,quality CSVs)")
    p.add_argument("anchor")
    p.add_argument("test")

    p = sub.add_parser("grad-check", help="finite-difference check of metric gradients")
    p.add_argument("--weights", help="LFW1 weights file, or 'fixture'")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--probes", type=int, default=10)

    p = sub.add_parser("suite", help="encode a corpus and run the corpus checks")
    p.add_argument("corpus")
    p.add_argument("--budget-bpp", type=_positive, default=harness.DEFAULT_BUDGET_BPP)
    p.add_argument("--out", help="per-file CSV output path")
    p.add_argument("--workers", type=int, default=1)
    _add_codec_flags(p)

    p = sub.add_parser("gen-corpus", help="write a synthetic PNM corpus")
    p.add_argument("directory")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--textured", action="store_true",
                   help="only blob and checkerboard images at 144x112")
    return parser


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_IO) from exc


def _load_image(path):
    try:
        return read_pnm(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_IO) from exc
    except PnmError as exc:
        raise CliError(f"{path}: {exc}", EXIT_FORMAT) from exc


def _weights_path(arg):
    if arg is None:
        return None
    return str(FIXTURE_PATH) if arg == "fixture" else arg


def _load_net(arg):
    path = _weights_path(arg)
    if path is None:
        return None
    try:
        return EmbeddingNet.load(path)
    except OSError as exc:
        raise CliError(f"cannot read weights {path}: {exc.strerror}", EXIT_IO) from exc
    except WeightsFormatError as exc:
        raise CliError(f"{path}: {exc}", EXIT_FORMAT) from exc


def _check_output_dir(path):
    parent = Path(path).resolve().parent
    if not parent.is_dir():
        raise CliError(f"output directory {parent} does not exist", EXIT_IO)


def _refine_cfg(args):
    return ratecontrol.RefineConfig(args.max_loops, args.refine_fraction)


def _weights(args):
    return LossWeights(args.lambda_con, args.lambda_sem, 0.0)


def report_row(name, img, enc, rep):
    return [name, f"{rep.achieved_bpp:.6f}", f"{rep.mask_overhead:.6f}",
            f"{psnr(enc.mosaic, img):.4f}", str(rep.loops_used), rep.termination]


def cmd_encode(args):
    _check_output_dir(args.output)
    img = _load_image(args.input)
    net = _load_net(args.weights)
    enc, rep = ratecontrol.encode_with_budget(
        img, args.budget_bpp, _refine_cfg(args), args.block_max, args.levels, net, _weights(args)
    )
    atomic_write(args.output, enc.data)
    text = rep.to_text()
    if args.report:
        atomic_write(args.report, text)
    if args.csv:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(harness.REPORT_FIELDS)
        w.writerow(report_row(Path(args.input).name, img, enc, rep))
        atomic_write(args.csv, buf.getvalue())
    sys.stdout.write(text)
    if rep.termination == ratecontrol.INITIAL_OVERSHOOT:
        log.error("budget %.6g bpp is below the coarsest encode (%.6g bpp)",
                  args.budget_bpp, rep.achieved_bpp)
        return EXIT_BUDGET
    return EXIT_OK


def cmd_decode(args):
    data = _read_bytes(args.input)
    _check_output_dir(args.output)
    try:
        img = codec.decode(data)
    except LficError as exc:
        raise CliError(f"{args.input}: {exc}", EXIT_FORMAT) from exc
    atomic_write(args.output, save_pnm(img))
    return EXIT_OK


def cmd_info(args):
    data = _read_bytes(args.input)
    try:
        sys.stdout.write(bitstream.inspect(data))
    except LficError as exc:
        raise CliError(f"{args.input}: {exc}", EXIT_FORMAT) from exc
    return EXIT_OK


def _sweep_one(task):
    path, budget, opts = task
    img = read_pnm(path)
    net = EmbeddingNet.load(opts["weights"]) if opts["weights"] else None
    enc, rep = ratecontrol.encode_with_budget(
        img, budget, opts["refine"], opts["block_max"], opts["levels"], net, opts["lambdas"]
    )
    err = enc.mosaic.astype(np.float64) - img
    return enc.data, rep.achieved_bpp, float(np.sum(err**2)), err.size


def cmd_rd_sweep(args):
    try:
        files = harness.list_corpus(args.corpus)
    except FileNotFoundError as exc:
        raise CliError(str(exc), EXIT_IO) from exc
    if args.out:
        _check_output_dir(args.out)
    if args.containers and not Path(args.containers).is_dir():
        raise CliError(f"container directory {args.containers} does not exist", EXIT_IO)
    for f in files:
        _load_image(f)
    opts = {
        "weights": _weights_path(args.weights),
        "refine": _refine_cfg(args),
        "block_max": args.block_max,
        "levels": args.levels,
        "lambdas": _weights(args),
    }
    if opts["weights"]:
        _load_net(args.weights)
    tasks = [(f, b, opts) for f in files for b in args.budgets]
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            results = list(pool.map(_sweep_one, tasks))
    else:
        results = [_sweep_one(t) for t in tasks]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["budget", "bpp", "psnr"])
    for bi, budget in enumerate(args.budgets):
        rows = [results[fi * len(args.budgets) + bi] for fi in range(len(files))]
        mean_bpp = float(np.mean([r[1] for r in rows]))
        mse = sum(r[2] for r in rows) / sum(r[3] for r in rows)
        q = math.inf if mse == 0 else 10 * math.log10(255.0**2 / mse)
        w.writerow([f"{budget:g}", f"{mean_bpp:.6f}", f"{q:.4f}"])
    if args.containers:
        for (f, b, _), r in zip(tasks, results):
            atomic_write(Path(args.containers) / f"{f.stem}_{b:g}.lfic", r[0])
    if args.out:
        atomic_write(args.out, buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_bdrate(args):
    curves = []
    for path in (args.anchor, args.test):
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_IO) from exc
        try:
            curves.append(bdrate.parse_rd_csv(text))
        except bdrate.RdCurveError as exc:
            raise CliError(f"{path}: {exc}", EXIT_FORMAT) from exc
    try:
        value = bdrate.bd_rate(*curves)
    except bdrate.RdCurveError as exc:
        raise CliError(str(exc), EXIT_FORMAT) from exc
    print(f"{value:+.2f}%")
    return EXIT_OK


def cmd_grad_check(args):
    net = _load_net(args.weights)
    results = gradcheck.run_suite(net, seed=args.seed, probes=args.probes)
    worst = max(results, key=lambda r: r.rel_error)
    for name in dict.fromkeys(r.loss for r in results):
        rs = [r for r in results if r.loss == name]
        bad = sum(not r.ok for r in rs)
        print(f"{name}: {len(rs) - bad}/{len(rs)} probes ok, "
              f"max rel error {max(r.rel_error for r in rs):.3e}")
    ok = all(r.ok for r in results)
    print(f"{'PASS' if ok else 'FAIL'} worst={worst.loss}#{worst.probe} "
          f"rel_error={worst.rel_error:.3e}")
    return EXIT_OK if ok else EXIT_GRAD_FAIL


def cmd_suite(args):
    try:
        harness.list_corpus(args.corpus)
    except FileNotFoundError as exc:
        raise CliError(str(exc), EXIT_IO) from exc
    if args.weights:
        _load_net(args.weights)
    cfg = harness.SuiteConfig(
        budget_bpp=args.budget_bpp, max_block=args.block_max, levels=args.levels,
        refine=_refine_cfg(args), weights=_weights(args),
        weights_path=_weights_path(args.weights),
    )
    summary = harness.run_suite(args.corpus, cfg, workers=args.workers)
    if args.out:
        atomic_write(args.out, summary.to_csv())
    sys.stdout.write(summary.to_text())
    return EXIT_OK if summary.passed else EXIT_GRAD_FAIL


def cmd_gen_corpus(args):
    try:
        paths = harness.write_corpus(args.directory, args.count, args.seed, args.textured)
    except OSError as exc:
        raise CliError(f"cannot write corpus: {exc}", EXIT_IO) from exc
    print(f"wrote {len(paths)} images to {args.directory}")
    return EXIT_OK


COMMANDS = {
    "encode": cmd_encode,
    "decode": cmd_decode,
    "info": cmd_info,
    "rd-sweep": cmd_rd_sweep,
    "bdrate": cmd_bdrate,
    "grad-check": cmd_grad_check,
    "suite": cmd_suite,
    "gen-corpus": cmd_gen_corpus,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="lfic: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        log.error("%s", exc)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
