"""Command-line front end: ``bncg {solve,brute,verify,gadget,random}``.

Reports go to stdout as JSON, artifacts to ``--out`` files. Exit codes:
0 success, 1 scheme not persuasive, 2 asymmetric game given to ``solve``,
3 no convergence, 4 size cap exceeded, 5 unreadable or invalid input.
Set ``BNCG_LOG`` to ``info`` or ``debug`` for diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Any, Sequence

from . import gadgets
from .errors import CapExceededError, ConvergenceError, GameFormatError, UnsupportedGameError
from .game import (
    DEFAULT_PATH_CAP,
    expected_social_cost,
    game_to_dict,
    parse_game,
    parse_scheme,
    scheme_to_dict,
    serialize_game,
    validate_scheme,
)
from .generate import random_game
from .lp import LpSizeError
from .solver import DEFAULT_COLUMN_CAP, OPT_TOL, NotPersuasive, SolveReport, brute_force_solve, cutting_plane_solve, verify_persuasive

EXIT_OK = 0
EXIT_NOT_PERSUASIVE = 1
EXIT_UNSUPPORTED = 2
EXIT_NO_CONVERGENCE = 3
EXIT_CAP = 4
EXIT_INPUT = 5

VERIFY_EPS = 1e-7
LOG_LEVELS = {"off": None, "info": logging.INFO, "debug": logging.DEBUG}


class _Parser(argparse.ArgumentParser):
    # usage mistakes are input errors; exit code 2 is reserved for asymmetric solves
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise GameFormatError(f"cannot read file: {exc.strerror}", path) from exc


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text if text.endswith("\n") else text + "\n")


def _emit(obj: Any) -> None:
    print(json.dumps(obj, indent=2))


def _solution_report(game, report: SolveReport, eps: float, out: str | None) -> tuple[dict[str, Any], int]:
    verdict = verify_persuasive(game, report.scheme, eps)
    body: dict[str, Any] = {
        "value": report.value,
        "expected_social_cost": expected_social_cost(game, report.scheme),
        "iterations": report.iterations,
        "gap": report.gap,
        "lower_bound": report.lower_bound,
        "persuasive": not isinstance(verdict, NotPersuasive),
    }
    if isinstance(verdict, NotPersuasive):
        body["counterexample"] = {"player": verdict.player, "deviation": list(verdict.deviation), "gain": verdict.gain}
    else:
        body["margins"] = list(verdict.margins)
    if out:
        _write(out, json.dumps(scheme_to_dict(report.scheme), indent=2))
        body["scheme_file"] = out
    else:
        body["scheme"] = scheme_to_dict(report.scheme)
    # a solver result that fails verification is reported, not hidden
    return body, EXIT_OK if body["persuasive"] else EXIT_NOT_PERSUASIVE


def cmd_solve(args: argparse.Namespace) -> int:
    game = parse_game(_read(args.game))
    report = cutting_plane_solve(game, opt_tol=args.opt_tol, max_iters=args.max_iters)
    body, code = _solution_report(game, report, args.eps, args.out)
    _emit(body)
    return code


def cmd_brute(args: argparse.Namespace) -> int:
    game = parse_game(_read(args.game))
    report = brute_force_solve(game, path_cap=args.path_cap, column_cap=args.column_cap)
    body, code = _solution_report(game, report, args.eps, args.out)
    _emit(body)
    return code


def cmd_verify(args: argparse.Namespace) -> int:
    game = parse_game(_read(args.game))
    scheme = parse_scheme(_read(args.scheme), game)
    validate_scheme(game, scheme)
    verdict = verify_persuasive(game, scheme, args.eps)
    cost = expected_social_cost(game, scheme)
    if isinstance(verdict, NotPersuasive):
        _emit({
            "persuasive": False,
            "expected_social_cost": cost,
            "player": verdict.player,
            "deviation": list(verdict.deviation),
            "gain": verdict.gain,
        })
        return EXIT_NOT_PERSUASIVE
    _emit({"persuasive": True, "expected_social_cost": cost, "margins": list(verdict.margins), "min_margin": min(verdict.margins)})
    return EXIT_OK


def cmd_gadget(args: argparse.Namespace) -> int:
    formula = gadgets.parse_dimacs(_read(args.cnf), pad=args.pad)
    default = gadgets.GadgetParams.default(formula)
    try:
        params = gadgets.GadgetParams(
            default.z if args.z is None else args.z,
            default.u if args.u is None else args.u,
            default.eps if args.eps is None else args.eps,
        )
    except ValueError as exc:
        raise GameFormatError(str(exc), "params") from exc
    scg = gadgets.build_scg(formula, params, max_players=args.max_players)
    meta = gadgets.gadget_metadata(formula, params, scg)
    data = gadgets.scg_to_dict(scg) if args.format == "scg" else game_to_dict(gadgets.scg_to_ncg(scg))
    data["metadata"] = meta
    if args.out:
        _write(args.out, json.dumps(data, indent=2))
        _emit({"instance_file": args.out, "format": args.format, "metadata": meta})
    else:
        _emit(data)
    return EXIT_OK


def cmd_random(args: argparse.Namespace) -> int:
    game = random_game(args.nodes, args.extra_edges, args.states, args.players, args.seed)
    text = serialize_game(game)
    if args.out:
        _write(args.out, text)
    else:
        print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bncg", description="Optimal ex ante persuasive signaling in network congestion games.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="cutting-plane solve of a symmetric game")
    p.add_argument("game")
    p.add_argument("--out", help="write the scheme JSON here instead of embedding it in the report")
    p.add_argument("--opt-tol", type=_positive, default=OPT_TOL)
    p.add_argument("--max-iters", type=_positive_int, default=10_000)
    p.add_argument("--eps", type=_positive, default=VERIFY_EPS, help="persuasiveness tolerance for the report")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("brute", help="solve the full signaling LP over all profiles (small games)")
    p.add_argument("game")
    p.add_argument("--out")
    p.add_argument("--path-cap", type=_positive_int, default=DEFAULT_PATH_CAP)
    p.add_argument("--column-cap", type=_positive_int, default=DEFAULT_COLUMN_CAP)
    p.add_argument("--eps", type=_positive, default=VERIFY_EPS)
    p.set_defaults(func=cmd_brute)

    p = sub.add_parser("verify", help="check a scheme for ex ante persuasiveness")
    p.add_argument("game")
    p.add_argument("scheme")
    p.add_argument("--eps", type=_positive, default=VERIFY_EPS)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gadget", help="build the 3SAT singleton-congestion gadget from DIMACS CNF")
    p.add_argument("cnf")
    p.add_argument("--z", type=_positive_int)
    p.add_argument("--u", type=_positive_int)
    p.add_argument("--eps", type=_positive)
    p.add_argument("--format", choices=("scg", "ncg"), default="ncg")
    p.add_argument("--pad", action="store_true", help="repeat the first clause until clauses >= variables")
    p.add_argument("--max-players", type=_positive_int, default=gadgets.DEFAULT_MAX_PLAYERS)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gadget)

    p = sub.add_parser("random", help="generate a seeded random symmetric game")
    p.add_argument("--nodes", type=int, default=4)
    p.add_argument("--extra-edges", type=int, default=2)
    p.add_argument("--states", type=int, default=2)
    p.add_argument("--players", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_random)
    return parser


def _configure_logging() -> None:
    value = os.environ.get("BNCG_LOG", "off").strip().lower()
    if value not in LOG_LEVELS:
        print(f"bncg: ignoring BNCG_LOG={value!r}; expected one of {', '.join(LOG_LEVELS)}", file=sys.stderr)
        value = "off"
    level = LOG_LEVELS[value]
    pkg = logging.getLogger("bncg")
    # main() may run many times in one process (tests); keep a single handler
    for h in [h for h in pkg.handlers if getattr(h, "_bncg_cli", False)]:
        pkg.removeHandler(h)
    if level is not None:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        handler._bncg_cli = True
        pkg.addHandler(handler)
        pkg.setLevel(level)
    else:
        pkg.setLevel(logging.NOTSET)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging()
    try:
        return args.func(args)
    except UnsupportedGameError as exc:
        print(f"bncg: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except ConvergenceError as exc:
        print(f"bncg: {exc}", file=sys.stderr)
        _emit({"error": "no convergence", "lower_bound": exc.lower_bound, "upper_bound": exc.upper_bound, "iterations": exc.iterations})
        return EXIT_NO_CONVERGENCE
    except (CapExceededError, LpSizeError) as exc:
        print(f"bncg: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (GameFormatError, ValueError) as exc:
        print(f"bncg: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
