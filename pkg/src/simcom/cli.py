"""Command-line entry point: compress, sweep, modestats, trace-replay.

Exit codes: 0 success, 1 a run failed, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

from . import baselines, codec
from .memsim import BLOCK_SIZE, SCHEMES, NvmState, WriteBlock
from .metrics import (HIST_LABELS, UndefinedRatioError, bit_write_ratio, csv_text,
                      evaluate, report_row, rmse, search_af)
from .workloads import (KERNELS, SYNTH_KINDS, PpmError, kernel_input, load_ppm,
                        memory_for, run_kernel, synth_bitmap)

log = logging.getLogger("simcom")

DEFAULT_AF_LIST = (0.0, 0.01, 0.02, 0.05, 0.1)
DEFAULT_FORMATS = ("1,8", "3,8", "4,8", "1,16", "3,16", "4,16")
APPROX_SCHEMES = ("simcom", "fpc", "bdi", "biscaling")

EXIT_OK, EXIT_RUN, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    inputs: List[str] = field(default_factory=list)
    schemes: List[str] = field(default_factory=lambda: ["simcom"])
    af_list: List[float] = field(default_factory=lambda: list(DEFAULT_AF_LIST))
    quality_target: Optional[float] = None
    kernels: List[str] = field(default_factory=lambda: list(KERNELS))
    seed: int = 0
    out: Optional[str] = None
    figures: Optional[str] = None
    baseline: str = "raw"
    count_sideband: bool = True

    def __post_init__(self):
        for af in self.af_list:
            if not 0.0 <= af <= 1.0:
                raise UsageError(f"af {af} outside [0, 1]")
        if not self.schemes:
            raise UsageError("at least one scheme is required")
        for s in self.schemes:
            if s not in SCHEMES:
                raise UsageError(f"unknown scheme {s!r}; expected one of {', '.join(SCHEMES)}")
        for k in self.kernels:
            if k not in KERNELS:
                raise UsageError(f"unknown kernel {k!r}; expected one of {', '.join(KERNELS)}")


def _af(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"af {v} outside [0, 1]")
    return v


def _af_list(text: str) -> List[float]:
    if not text.strip():
        return list(DEFAULT_AF_LIST)
    return [_af(t) for t in text.split(",") if t.strip()]


def _format(text: str):
    try:
        cc, bpc = (int(t) for t in text.split(","))
        codec.mode_for(cc, bpc)
    except (ValueError, codec.CodecError):
        raise argparse.ArgumentTypeError(f"bad format {text!r}; expected CC,BPC such as 3,8")
    return cc, bpc


def _write_out(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


# --- compress ------------------------------------------------------------------

def _describe_simcom(c: codec.CompressedBlock) -> str:
    runs = " ".join(str(p.run) for p in c.pairs)
    rem = len(c.remainder) if c.remainder is not None else 0
    return f"mode={c.mode.name} pairs={c.base_count} runs=[{runs}] remainder={rem}"


def compress_block(block: bytes, scheme: str, af: float, word_width: int = 8, mode=None):
    """Returns (stored bytes, compressible, description).

    ``mode`` pins SimCom to one compression mode instead of the selector.
    """
    if scheme == "simcom":
        if mode is not None:
            c, _ = codec.compress_mode(block, mode, af)
        else:
            c = codec.compress_adaptive(block, af)
        if c is None:
            return block, False, "incompressible"
        return codec.serialize(c), True, _describe_simcom(c)
    if scheme == "fpc":
        data, desc = baselines.fpc_compress(block, af), "fpc"
    elif scheme == "bdi":
        enc = baselines.bdi_best(block, af)
        data = baselines.bdi_compress(block, af)
        desc = f"bdi base={enc.base_size} delta={enc.delta_size}" if enc is not None else ""
    elif scheme == "biscaling":
        s = baselines.biscaling_compress(block, word_width, af)
        data = s.to_bytes() if s is not None else None
        desc = f"biscaling msb={s.msb_drop} lsb={s.lsb_drop}" if s is not None else ""
    else:
        return block, False, "raw"
    if data is None:
        return block, False, "incompressible"
    return data, True, desc


def cmd_compress(path: str, scheme: str, af: float, out: Optional[str] = None,
                 word_width: int = 8, mode=None) -> int:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}")
    if len(raw) == 0 or len(raw) % BLOCK_SIZE:
        raise UsageError(f"{path}: length {len(raw)} is not a positive multiple of {BLOCK_SIZE}")
    blob = bytearray()
    lines = ["block,offset,size,saved,compressible,detail"]
    total = 0
    for i in range(len(raw) // BLOCK_SIZE):
        block = raw[i * BLOCK_SIZE:(i + 1) * BLOCK_SIZE]
        data, ok, desc = compress_block(block, scheme, af, word_width, mode)
        total += len(data)
        blob += data
        lines.append(f"{i},{i * BLOCK_SIZE},{len(data)},{BLOCK_SIZE - len(data)},{int(ok)},{desc}")
    n = len(raw) // BLOCK_SIZE
    lines.append(f"# {n} blocks, {len(raw)} -> {total} bytes ({total / len(raw):.4f})")
    print("\n".join(lines))
    if out:
        with open(out, "wb") as fh:
            fh.write(bytes(blob))
    return EXIT_OK


# --- sweep ---------------------------------------------------------------------

def _load_images(cfg: RunConfig):
    if cfg.inputs:
        imgs = []
        for p in cfg.inputs:
            try:
                imgs.append((os.path.splitext(os.path.basename(p))[0], load_ppm(p)))
            except OSError as e:
                raise UsageError(f"cannot read {p}: {e.strerror}")
            except PpmError as e:
                raise UsageError(f"{p}: {e}")
        return imgs
    # no inputs: a small deterministic synthetic corpus drawn from the seed
    return [(f"synth{i}", synth_bitmap(3, 8, "gradient", 64, 64, seed=cfg.seed + i))
            for i in range(2)]


def _run_one(kernel, name, img, scheme, af, count_sideband):
    """One sweep point, scored against a raw-scheme run of the same kernel."""
    inp = kernel_input(kernel, img)
    ref = run_kernel(kernel, inp, NvmState(memory_for(inp)), "raw", 0.0).output
    st = NvmState(memory_for(inp), count_sideband=count_sideband)
    res = run_kernel(kernel, inp, st, scheme, af)
    q = rmse(res.output, ref)
    return evaluate(st.counters, q)


def _point(args):
    kernel, name, img, scheme, af, count_sideband = args
    try:
        rep = _run_one(kernel, name, img, scheme, af, count_sideband)
        return report_row(kernel, name, scheme, af, rep)
    except (ValueError, LookupError, UndefinedRatioError, codec.CodecError) as e:
        return report_row(kernel, name, scheme, af, None, error=f"{type(e).__name__}: {e}")


def _matched_af(kernel, imgs, scheme, target, count_sideband):
    def mean_rmse(af):
        vals = [_run_one(kernel, n, img, scheme, af, count_sideband).rmse for n, img in imgs]
        return sum(vals) / len(vals)
    return search_af(mean_rmse, target=target)


def _search_job(args):
    kernel, imgs, scheme, target, count_sideband = args
    if scheme == "raw":
        return kernel, scheme, 0.0
    return kernel, scheme, _matched_af(kernel, imgs, scheme, target, count_sideband).af


def _map(fn, jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


def _sort_key(row):
    return (row["workload"], row["image"], row["scheme"], float(row["af"]))


def sweep_rows(cfg: RunConfig, workers: int = 1):
    imgs = _load_images(cfg)
    if cfg.quality_target is not None:
        searches = [(k, imgs, s, cfg.quality_target, cfg.count_sideband)
                    for k in cfg.kernels for s in cfg.schemes]
        chosen = _map(_search_job, searches, workers)
        points = [(k, n, img, s, af, cfg.count_sideband)
                  for k, s, af in chosen for n, img in imgs]
    else:
        points = [(k, n, img, s, af, cfg.count_sideband)
                  for k in cfg.kernels for n, img in imgs
                  for s in cfg.schemes for af in cfg.af_list]
    rows = _map(_point, points, workers)
    rows.sort(key=_sort_key)
    return rows


def cmd_sweep(cfg: RunConfig, workers: int = 1) -> int:
    rows = sweep_rows(cfg, workers)
    _write_out(csv_text(rows), cfg.out)
    if cfg.figures:
        from .plotting import plot_sweep
        for p in plot_sweep(rows, cfg.figures, baseline=cfg.baseline):
            log.info("wrote %s", p)
    failed = [r for r in rows if r["error"]]
    for r in failed:
        print(f"error: {r['workload']}/{r['image']}/{r['scheme']} af={r['af']}: {r['error']}",
              file=sys.stderr)
    return EXIT_RUN if failed else EXIT_OK


# --- modestats ---------------------------------------------------------------

def mode_table(formats, kind: str, af: float, seed: int = 0, size: int = 64):
    """Percentage of blocks per selected mode, keyed by true format."""
    table = {}
    for cc, bpc in formats:
        img = synth_bitmap(cc, bpc, kind, size, size, seed=seed)
        hist = Counter()
        n = len(img.data) // BLOCK_SIZE
        for i in range(n):
            c = codec.compress_adaptive(img.data[i * BLOCK_SIZE:(i + 1) * BLOCK_SIZE], af)
            hist[c.mode.name if c is not None else HIST_LABELS[-1]] += 1
        table[(cc, bpc)] = {lab: 100.0 * hist[lab] / n for lab in HIST_LABELS}
    return table


def format_mode_table(table, formats, kind: str) -> str:
    head = ["kind", "selected"] + [f"({cc}, {bpc})" for cc, bpc in formats]
    lines = [",".join(f'"{h}"' if "," in h else h for h in head)]
    for lab in HIST_LABELS:
        cells = [f"{table[f][lab]:.1f}" for f in formats]
        lines.append(",".join([kind, lab] + cells))
    return "\n".join(lines) + "\n"


def cmd_modestats(formats, kinds, af: float, seed: int = 0, out: Optional[str] = None,
                  figures: Optional[str] = None) -> int:
    parts = []
    for kind in kinds:
        fmts = [f for f in formats if kind != "grayscale-in-rgb" or f[0] > 1]
        if not fmts:
            continue
        table = mode_table(fmts, kind, af, seed)
        parts.append(format_mode_table(table, fmts, kind))
        if figures:
            from .plotting import plot_modestats
            p = plot_modestats(table, fmts, HIST_LABELS,
                               os.path.join(figures, f"modestats_{kind}.png"))
            log.info("wrote %s", p)
    _write_out("\n".join(parts), out)
    return EXIT_OK


# --- trace replay ------------------------------------------------------------

_FLAGS = {"a": True, "1": True, "approx": True, "p": False, "0": False, "precise": False}


def parse_trace(lines):
    """Yield ``(op, addr, payload, approximable)`` from trace text.

    ``W 0xADDR <128 hex digits> <a|p>`` writes a block, ``R 0xADDR`` reads
    one. ``#`` starts a comment.
    """
    for lineno, line in enumerate(lines, 1):
        t = line.split("#", 1)[0].split()
        if not t:
            continue
        op = t[0].upper()
        try:
            addr = int(t[1], 0)
            if op == "W":
                if len(t) != 4:
                    raise ValueError("write needs address, payload and flag")
                payload = bytes.fromhex(t[2])
                if len(payload) != BLOCK_SIZE:
                    raise ValueError(f"payload is {len(payload)} bytes, expected {BLOCK_SIZE}")
                flag = _FLAGS[t[3].lower()]
                yield op, addr, payload, flag
            elif op == "R":
                if len(t) > 3:
                    raise ValueError("trailing fields")
                yield op, addr, None, None
            else:
                raise ValueError(f"unknown operation {t[0]!r}")
        except (IndexError, ValueError, KeyError) as e:
            raise UsageError(f"trace line {lineno}: {e or 'malformed'}")


def cmd_trace_replay(path: str, scheme: str, af: float, baseline: str = "raw",
                     count_sideband: bool = True, out: Optional[str] = None) -> int:
    try:
        with open(path) as fh:
            ops = list(parse_trace(fh))
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}")
    if not ops:
        raise UsageError(f"{path}: empty trace")
    size = max(a for _, a, _, _ in ops) // BLOCK_SIZE * BLOCK_SIZE + BLOCK_SIZE
    st = NvmState(size, count_sideband=count_sideband, default_af=af)
    failures = 0
    for op, addr, payload, flag in ops:
        try:
            if op == "W":
                st.write(WriteBlock(addr, payload, flag), scheme)
            else:
                st.read(addr)
        except (LookupError, codec.CodecError) as e:
            print(f"error: {op} {addr:#x}: {e}", file=sys.stderr)
            failures += 1
    c = st.counters
    try:
        ratio = f"{bit_write_ratio(c, baseline):.6f}"
    except UndefinedRatioError:
        ratio = "undefined"
    lines = [
        f"scheme,{scheme}",
        f"af,{af:g}",
        f"writes,{c.writes}",
        f"reads,{c.reads}",
        f"approximable_writes,{c.approximable_writes}",
        f"precise_writes,{c.precise_writes}",
        f"bit_writes,{c.total_bit_writes}",
        f"baseline_bits,{c.raw_bits if baseline == 'raw' else c.raw_fnw_bits}",
        f"bit_write_ratio,{ratio}",
        f"write_units,{c.total_write_units}",
        f"saved_precise_compression,{c.saved_precise}",
        f"saved_approximate_compression,{c.saved_approximate}",
        f"saved_fnw,{c.saved_fnw}",
        f"overhead,{c.overhead}",
    ]
    lines += [f"mode_{k},{c.modes.get(k, 0)}" for k in HIST_LABELS]
    _write_out("\n".join(lines) + "\n", out)
    return EXIT_RUN if failures else EXIT_OK


# --- argument parsing -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simcom", description="Similarity-aware NVM write compression.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compress", help="compress a file of 64-byte blocks")
    c.add_argument("input")
    c.add_argument("--scheme", default="simcom", choices=SCHEMES)
    c.add_argument("--af", type=_af, default=0.0)
    c.add_argument("--word-width", type=int, default=8, choices=(8, 16),
                   help="word width for biscaling")
    c.add_argument("--mode", type=_format, metavar="CC,BPC",
                   help="pin simcom to one mode instead of the adaptive selector")
    c.add_argument("--out", help="write concatenated stored blocks here")

    s = sub.add_parser("sweep", help="run kernels over images for each scheme and af")
    s.add_argument("images", nargs="*", help="PPM/PGM inputs; a seeded synthetic pair if omitted")
    s.add_argument("--kernel", dest="kernels", action="append", choices=KERNELS)
    s.add_argument("--scheme", dest="schemes", action="append", choices=SCHEMES)
    s.add_argument("--af-list", type=_af_list, default=list(DEFAULT_AF_LIST))
    s.add_argument("--quality-target", type=float,
                   help="search af per kernel and scheme to hit this mean RMSE")
    s.add_argument("--baseline", choices=("raw", "raw-fnw"), default="raw")
    s.add_argument("--count-sideband", action=argparse.BooleanOptionalAction, default=True,
                   help="charge approximable/compressible flag flips as bit-writes")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out")
    s.add_argument("--figures", metavar="DIR", help="also render figures into DIR")

    m = sub.add_parser("modestats", help="mode selector statistics on synthetic bitmaps")
    m.add_argument("--format", dest="formats", action="append", type=_format)
    m.add_argument("--kind", dest="kinds", action="append", choices=SYNTH_KINDS)
    m.add_argument("--af", type=_af, default=0.03)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out")
    m.add_argument("--figures", metavar="DIR")

    t = sub.add_parser("trace-replay", help="replay a block-level access trace")
    t.add_argument("trace")
    t.add_argument("--scheme", default="simcom", choices=SCHEMES)
    t.add_argument("--af", type=_af, default=0.0, help="af for approximable writes")
    t.add_argument("--baseline", choices=("raw", "raw-fnw"), default="raw")
    t.add_argument("--count-sideband", action=argparse.BooleanOptionalAction, default=True)
    t.add_argument("--out")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "compress":
            mode = codec.mode_for(*args.mode) if args.mode else None
            return cmd_compress(args.input, args.scheme, args.af, args.out, args.word_width, mode)
        if args.command == "sweep":
            if args.quality_target is not None and not 0 < args.quality_target < 1:
                raise UsageError("quality target must be in (0, 1)")
            cfg = RunConfig("sweep", inputs=args.images,
                            schemes=args.schemes or list(APPROX_SCHEMES),
                            af_list=args.af_list, quality_target=args.quality_target,
                            kernels=args.kernels or list(KERNELS), seed=args.seed,
                            out=args.out, figures=args.figures, baseline=args.baseline,
                            count_sideband=args.count_sideband)
            return cmd_sweep(cfg, max(1, args.jobs))
        if args.command == "modestats":
            formats = args.formats or [_format(f) for f in DEFAULT_FORMATS]
            kinds = args.kinds or ["gradient", "grayscale-in-rgb"]
            return cmd_modestats(formats, kinds, args.af, args.seed, args.out, args.figures)
        return cmd_trace_replay(args.trace, args.scheme, args.af, args.baseline,
                                args.count_sideband, args.out)
    except UsageError as e:
        print(f"simcom: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
