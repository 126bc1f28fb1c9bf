"""pit: identity tests, hitting sets, concentration checks, corpora and benchmarks."""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

import sympy

from .algebra import DEFAULT_PRIME
from .concentrate import top_product
from .corpus import family
from .errors import DimensionMismatch, FieldTooSmall, NotADualForm, NotNormalized, PartitionViolation, PitError, SchemaError
from .formula import (
    Blackbox,
    ClassParams,
    DiagonalCircuit,
    SetDepthFormula,
    diagonal_to_hadamard,
    dumps,
    parse,
)
from .hadamard import HadamardPoly, Partition, is_l_concentrated, shift
from .hitgen import hitting_set, hitting_set_diagonal, test_blackbox
from .report import BENCH_FIELDS, bench, hitting_set_for, to_csv, write_report

EXIT_NONZERO = 0
EXIT_ZERO = 10
EXIT_INPUT = 2
EXIT_FIELD = 3
EXIT_OTHER = 1

FAMILIES = ("setml3", "setdepth4", "diagonal")


class InputError(Exception):
    pass


INPUT_ERRORS = (InputError, SchemaError, PartitionViolation, NotNormalized, DimensionMismatch, NotADualForm, ValueError, KeyError)


def _load_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not JSON ({exc})") from None


def _emit(doc) -> None:
    sys.stdout.write(json.dumps(doc, separators=(",", ":")) + "\n")


def cmd_check(args) -> int:
    c = parse(_load_json(args.circuit))
    hs = hitting_set_for(c, args.prime)
    v = test_blackbox(Blackbox.of(c, args.prime), hs, args.prime, args.threads)
    _emit(v.to_json())
    return EXIT_ZERO if v.zero else EXIT_NONZERO


def cmd_hitting_set(args) -> int:
    doc = _load_json(args.class_)
    if doc.get("kind") == "diagonal":
        hs = hitting_set_diagonal(int(doc["k"]), int(doc["n"]), int(doc["d"]), args.prime)
    else:
        hs = hitting_set(ClassParams.from_json(doc), args.prime)
    text = hs.to_jsonl()
    if args.out:
        Path(args.out).write_text(text)
        _emit({"size": len(hs), "bound": hs.bound, "out": args.out})
    else:
        sys.stdout.write(text)
    return 0


def _parse_blocks(text: str) -> Partition:
    try:
        return Partition.of([[int(v) for v in blk.split(",") if v.strip()] for blk in text.split(";") if blk.strip()])
    except ValueError as exc:
        raise InputError(f"bad --block-partition {text!r}: {exc}") from None


def _concentration_target(c, p: int) -> HadamardPoly:
    if isinstance(c, SetDepthFormula):
        factors, _ = top_product(c, p)
        D = factors[0]
        for g in factors[1:]:
            D = D * g
        return D
    if isinstance(c, DiagonalCircuit):
        _, F, d = diagonal_to_hadamard(c, p)
        D = F
        for _ in range(d - 1):
            D = D * F
        return D
    raise InputError(f"concentrate takes a set-depth or diagonal circuit, not {type(c).__name__}")


def cmd_concentrate(args) -> int:
    c = parse(_load_json(args.circuit))
    D = _concentration_target(c, args.prime)
    partition = _parse_blocks(args.block_partition) if args.block_partition else None
    mode = "block" if partition is not None else "support"
    if args.shift:
        rng = random.Random(args.seed)
        D = shift(D, tuple(rng.randrange(args.prime) for _ in range(D.n)))
    ok, r_low, r_full = is_l_concentrated(D, args.ell, mode, partition)
    _emit({"concentrated": ok, "rank_low": r_low, "rank_full": r_full})
    return 0


def cmd_gen_corpus(args) -> int:
    rng = random.Random(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for i in range(args.count):
        zero = args.zero_every > 0 and i % args.zero_every == args.zero_every - 1
        c = family(args.family, rng, zero=zero)
        name = f"{args.family}_{i:04d}_{'zero' if zero else 'random'}.json"
        (out / name).write_text(dumps(c) + "\n")
        names.append(name)
    _emit({"family": args.family, "count": args.count, "seed": args.seed, "files": names})
    return 0


def cmd_bench(args) -> int:
    rows = bench(args.family, args.count, args.seed, args.prime, args.zero_every)
    if args.out:
        csv_path, png = write_report(rows, args.out)
        _emit({"csv": str(csv_path), "figure": str(png), "rows": len(rows)})
    else:
        sys.stdout.write(to_csv(rows, BENCH_FIELDS))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--prime", type=int, default=DEFAULT_PRIME, help="field size p (default 2^61 - 1)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1, help="workers for point evaluation")

    ap = argparse.ArgumentParser(prog="pit", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common], help="blackbox identity test of a circuit file")
    p.add_argument("circuit")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("hitting-set", parents=[common], help="emit a class hitting set as JSON lines")
    p.add_argument("--class", dest="class_", required=True, help="class parameters JSON")
    p.add_argument("--out")
    p.set_defaults(func=cmd_hitting_set)

    p = sub.add_parser("concentrate", parents=[common], help="rank concentration of a circuit's Hadamard product")
    p.add_argument("--circuit", required=True)
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--block-partition", help="blocks as '1,2;3,4' (switches to block weight)")
    p.add_argument("--shift", action="store_true", help="translate by a random point drawn from --seed first")
    p.set_defaults(func=cmd_concentrate)

    p = sub.add_parser("gen-corpus", parents=[common], help="write random circuits as JSON files")
    p.add_argument("--family", choices=FAMILIES, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", default="corpus")
    p.add_argument("--zero-every", type=int, default=5, help="every n-th instance is built to vanish (0: none)")
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("bench", parents=[common], help="timing and size table as CSV")
    p.add_argument("--family", choices=FAMILIES, required=True)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--out", help="CSV path; a PNG figure is written next to it")
    p.add_argument("--zero-every", type=int, default=5)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else 0
    if not sympy.isprime(args.prime):
        print(f"pit: --prime {args.prime} is not prime", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except FieldTooSmall as exc:
        print(f"pit: field too small: {exc}", file=sys.stderr)
        return EXIT_FIELD
    except INPUT_ERRORS as exc:
        print(f"pit: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PitError as exc:
        print(f"pit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
