"""Command-line interface.

Exit codes: 0 success, 1 verification failure, 2 usage or I/O error. The
primary stream carries JSON (or CSV where stated); diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .designs import (
    DEFAULT_TOL,
    L5_OPTIMAL_ANGLES,
    design_report,
    l5_catalog,
    report_from_potential,
    verify_catalog_match,
)
from .ensemble import graph_ensemble, linear_cluster_ensemble
from .errors import MBDesignError, NonUnitaryBranch
from .fusion import choose_fusion_neighbors, fuse, postselection_check
from .gadgets import CATALOG_NAMES, VARIANT_NAMES, bhh_repetitions, gadget_catalog, verify_gadget
from .graphstate import OpenGraph
from .optimize import MULTI_MAX_LENGTH, RECURSION_MAX_LENGTH, SearchConfig, cluster_potential, sweep

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

PATTERN_ALIASES = {
    "pi4": "pi4",
    "single": "single_min",
    "single_min": "single_min",
    "multi": "multi_min",
    "multi_min": "multi_min",
}


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class CommandResult:
    exit_code: int
    stdout: str = ""
    stderr: str = ""


# -- JSON at 17 significant digits -------------------------------------------


def dumps(obj) -> str:
    """JSON text with every float written at 17 significant digits."""
    return _encode(obj)


def _encode(o) -> str:
    if o is None or isinstance(o, (bool, np.bool_)):
        return json.dumps(None if o is None else bool(o))
    if isinstance(o, (int, np.integer)):
        return str(int(o))
    if isinstance(o, (float, np.floating)):
        x = float(o)
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x} in output")
        text = format(x, ".17g")
        return text if any(c in text for c in ".en") else text + ".0"
    if isinstance(o, str):
        return json.dumps(o, ensure_ascii=False)
    if isinstance(o, np.ndarray):
        return _encode(o.tolist())
    if isinstance(o, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in o.items()) + "}"
    if isinstance(o, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in o) + "]"
    raise TypeError(f"cannot encode {type(o).__name__}")


# -- parsing -----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102
        raise UsageError(message)


def _float_list(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad vertex list {text!r}") from exc


def _env_threads() -> int | None:
    env = os.environ.get("MBQC_THREADS")
    if not env:
        return None
    try:
        return max(1, int(env))
    except ValueError:
        return None


def _add_angles(p: argparse.ArgumentParser) -> None:
    p.add_argument("--length", type=int, required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--angles", type=_float_list, help="comma-separated radians")
    group.add_argument("--pattern", choices=["pi4"])
    p.add_argument("--degrees", action="store_true", help=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="worker bound (default $MBQC_THREADS)")
    parser = _Parser(prog="mbdesigns", description="Measurement-based unitary designs toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fp", parents=[common], help="frame potential of a linear cluster")
    _add_angles(p)
    p.add_argument("--t", type=int, required=True)

    p = sub.add_parser("ensemble", parents=[common], help="dump a linear-cluster or graph ensemble")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--graph")
    group.add_argument("--length", type=int)
    p.add_argument("--angles", type=_float_list)
    p.add_argument("--pattern", choices=["pi4"])
    p.add_argument("--degrees", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("verify", parents=[common], help="design check of a graph file or the L=5 catalog match")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--graph")
    group.add_argument("--catalog", action="store_true")
    p.add_argument("--t", type=int)
    p.add_argument("--literal", action="store_true", help="catalog: compare without a fixed-frame alignment")

    p = sub.add_parser("fuse", parents=[common], help="fuse a vertex set of a graph file")
    p.add_argument("--graph", required=True)
    p.add_argument("--set", dest="fused", type=_int_list, required=True)
    p.add_argument("--basis", choices=["x", "y", "z", "X", "Y", "Z"], required=True)
    p.add_argument("--check", action="store_true", help="also compare against post-selection")
    p.add_argument("--out")

    p = sub.add_parser("gadget", help="gadget catalog operations")
    gsub = p.add_subparsers(dest="action", required=True, parser_class=_Parser)
    gv = gsub.add_parser("verify", parents=[common])
    gv.add_argument("name", choices=CATALOG_NAMES + VARIANT_NAMES)
    gv.add_argument("--mode", choices=["exhaustive", "sampled"], default="exhaustive")
    gv.add_argument("--count", type=int)
    gv.add_argument("--seed", type=int)
    gsub.add_parser("list", parents=[common])

    p = sub.add_parser("sweep", parents=[common], help="design-gap curves, written as CSV")
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--lmax", type=int, required=True)
    p.add_argument("--lmin", type=int, default=2)
    p.add_argument("--patterns", default="pi4")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--restarts", type=int, default=SearchConfig.restarts)

    p = sub.add_parser("bhh-size", parents=[common], help="repetition count for the brickwork construction")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--log-base", type=float, default=2.0)
    return parser


# -- helpers -----------------------------------------------------------------


def _angles(args) -> list[float]:
    if getattr(args, "degrees", False):
        raise UsageError("--degrees is not supported; give angles in radians")
    if args.length is None or args.length < 1:
        raise UsageError("--length must be at least 1")
    if args.angles is not None:
        if len(args.angles) != args.length:
            raise UsageError(f"--angles has {len(args.angles)} entries, expected {args.length}")
        return list(args.angles)
    return [math.pi / 4] * args.length


def _check_t(t: int | None, hi: int = 8) -> int:
    if t is None or not 1 <= t <= hi:
        raise UsageError(f"--t must lie in 1..{hi}")
    return t


def _read_graph(path: str) -> OpenGraph:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return OpenGraph.from_json(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc


# -- commands ----------------------------------------------------------------


def cmd_fp(args) -> CommandResult:
    angles = _angles(args)
    t = _check_t(args.t)
    if len(angles) > RECURSION_MAX_LENGTH:
        raise UsageError(f"--length above {RECURSION_MAX_LENGTH} is not supported")
    report = report_from_potential(cluster_potential(angles, t), t)
    return CommandResult(EXIT_OK, dumps({"length": len(angles), "angles": angles, **report.to_dict()}))


def cmd_ensemble(args, threads) -> CommandResult:
    if args.graph is not None:
        ens = graph_ensemble(_read_graph(args.graph), threads=threads)
    else:
        angles = _angles(args)
        if len(angles) > MULTI_MAX_LENGTH:
            raise UsageError(f"--length above {MULTI_MAX_LENGTH} is not supported")
        ens = linear_cluster_ensemble(angles)
    return CommandResult(EXIT_OK, dumps(ens.to_dict()))


def cmd_verify(args, threads) -> CommandResult:
    if args.catalog:
        ens = linear_cluster_ensemble(L5_OPTIMAL_ANGLES)
        match = verify_catalog_match(ens, l5_catalog(), align=not args.literal)
        out = {"total": len(ens), "n_matched": len(ens) - len(match.unmatched), **match.to_dict()}
        return CommandResult(EXIT_OK if match.matched else EXIT_FAIL, dumps(out))
    t = _check_t(args.t)
    ens = graph_ensemble(_read_graph(args.graph), threads=threads)
    report = design_report(ens, t, DEFAULT_TOL)
    out = {"elements": len(ens), **report.to_dict()}
    return CommandResult(EXIT_OK if report.exact else EXIT_FAIL, dumps(out))


def cmd_fuse(args) -> CommandResult:
    graph = _read_graph(args.graph)
    basis = args.basis.upper()
    neighbor_map = choose_fusion_neighbors(graph, args.fused) if basis == "X" else None
    result = fuse(graph, args.fused, basis, neighbor_map=neighbor_map)
    out = result.to_dict()
    code = EXIT_OK
    if args.check:
        ok, bad = postselection_check(graph, result)
        out["check"] = {"ok": ok, "mismatched": bad}
        code = EXIT_OK if ok else EXIT_FAIL
    if args.out:
        _write(args.out, result.graph.to_json())
    return CommandResult(code, dumps(out))


def cmd_gadget(args, threads) -> CommandResult:
    catalog = gadget_catalog()
    if args.action == "list":
        return CommandResult(EXIT_OK, dumps({name: g.to_dict() for name, g in catalog.items()}))
    if args.mode == "sampled":
        if args.seed is None:
            raise UsageError("sampled mode needs --seed")
        if args.count is None or args.count < 1:
            raise UsageError("sampled mode needs a positive --count")
    report = verify_gadget(catalog[args.name], args.mode, args.count, args.seed, threads=threads)
    return CommandResult(EXIT_OK if report.ok else EXIT_FAIL, dumps(report.to_dict()))


def cmd_sweep(args, threads) -> CommandResult:
    t = _check_t(args.t)
    patterns = []
    for name in args.patterns.split(","):
        name = name.strip()
        if name not in PATTERN_ALIASES:
            raise UsageError(f"unknown pattern {name!r}")
        patterns.append(PATTERN_ALIASES[name])
    limit = MULTI_MAX_LENGTH if "multi_min" in patterns else RECURSION_MAX_LENGTH
    if not 1 <= args.lmin <= args.lmax <= limit:
        raise UsageError(f"need 1 <= --lmin <= --lmax <= {limit} for these patterns")
    if "multi_min" in patterns and args.seed is None:
        raise UsageError("the multi pattern needs --seed")
    config = SearchConfig(restarts=args.restarts, seed=args.seed or 0, threads=threads)
    curve = sweep(args.lmax, t, patterns, config, L_min=args.lmin)
    _write(args.out, curve.to_csv())
    summary = {
        "out": args.out,
        "t": t,
        "rows": len(curve.points),
        "min_delta_f": {p: min(q.delta_f for q in curve.series(t, p)) for p in patterns},
    }
    return CommandResult(EXIT_OK, dumps(summary))


def cmd_bhh(args) -> CommandResult:
    try:
        reps = bhh_repetitions(args.n, args.t, args.eps, args.C, args.log_base)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return CommandResult(EXIT_OK, dumps({"n": args.n, "t": args.t, "eps": args.eps, "repetitions": reps}))


def _write(path: str, text: str) -> None:
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


# -- entry points ------------------------------------------------------------


def run(argv: Sequence[str] | None = None) -> CommandResult:
    """Parse and execute; never raises for user-facing errors."""
    parser = build_parser()
    try:
        args = parser.parse_args(list(sys.argv[1:] if argv is None else argv))
    except UsageError as exc:
        return CommandResult(EXIT_USAGE, "", f"usage error: {exc}\n")
    except SystemExit as exc:  # --help
        return CommandResult(int(exc.code or 0), parser.format_help(), "")
    threads = args.threads if args.threads is not None else _env_threads()
    if threads is not None and threads < 1:
        return CommandResult(EXIT_USAGE, "", "usage error: --threads must be positive\n")
    try:
        if args.command == "fp":
            return cmd_fp(args)
        if args.command == "ensemble":
            return cmd_ensemble(args, threads)
        if args.command == "verify":
            return cmd_verify(args, threads)
        if args.command == "fuse":
            return cmd_fuse(args)
        if args.command == "gadget":
            return cmd_gadget(args, threads)
        if args.command == "sweep":
            return cmd_sweep(args, threads)
        return cmd_bhh(args)
    except (UsageError, OSError) as exc:
        return CommandResult(EXIT_USAGE, "", f"error: {exc}\n")
    except NonUnitaryBranch as exc:
        return CommandResult(EXIT_FAIL, "", f"error: {exc}\n")
    except MBDesignError as exc:
        return CommandResult(EXIT_USAGE, "", f"error: {type(exc).__name__}: {exc}\n")


def main(argv: Sequence[str] | None = None) -> int:
    result = run(argv)
    if result.stdout:
        sys.stdout.write(result.stdout if result.stdout.endswith("\n") else result.stdout + "\n")
    if result.stderr:
        sys.stderr.write(result.stderr)
    return result.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
