"""Command-line entry point.

Exit codes: 0 when every asserted inequality holds, 1 when a check fails,
2 for usage, format and size errors.
"""

from __future__ import annotations

import argparse
import math
import sys
from fractions import Fraction
from pathlib import Path

from gamefort import io
from gamefort._enum import DEFAULT_CAP, InstanceTooLarge
from gamefort.bireg import NotGraphical, biregularize, biregularize_graphical, size_bounds
from gamefort.concat import (
    combinatorial_fortification_check,
    concatenate,
    concatenate_multiplayer,
    fortification_violation,
    multiplayer_violation,
    pointwise_bound_check,
)
from gamefort.expanders import (
    SPECTRAL_SLACK,
    ExpanderNotFound,
    GraphError,
    certify,
    complete_graph,
    normalized_adjacency,
    random_biregular_expander,
    shift_union_graph,
    singular_values,
)
from gamefort.games import Game, InvalidGame, KPlayerGame, classical_value, kplayer_value
from gamefort.harness import StageError, gap_amplification_plan, repetition_bound_check, run_pipeline
from gamefort.ordered import build_injection_family, ordered_fortify, tilde_lift

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _cap(value: str) -> int | None:
    n = int(value)
    return None if n <= 0 else n


def _emit(path: str | None, data: dict) -> None:
    if path is None or path == "-":
        sys.stdout.write(io.dumps(data))
    else:
        io.write_json(path, data)


def _status(ok: bool) -> int:
    print(f"result: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_value(args) -> int:
    g = io.load_any_game(args.game)
    if isinstance(g, KPlayerGame):
        v = kplayer_value(g, cap=args.cap)
    else:
        v = classical_value(g, cap=args.cap)
    print(f"value: {v}")
    print(f"value_float: {float(v):.12g}")
    return EXIT_OK


def cmd_bireg(args) -> int:
    g = io.load_game(args.game)
    if args.mode == "graphical":
        res = biregularize_graphical(g, multi_edges=args.multi_edges)
        prov = {"mode": "graphical", "edges": res.edges,
                "x_int": res.game.x_size, "y_int": res.game.y_size}
    else:
        res, quant = biregularize(g, args.tau, cap=args.cap)
        bx, by = size_bounds(g, args.tau)
        prov = {"mode": "general", "tau": str(args.tau), "q": quant.q, "null_mass": str(quant.null_mass),
                "x_int": res.game.x_size, "y_int": res.game.y_size,
                "size_bound_x": str(bx), "size_bound_y": str(by)}
    for k, v in prov.items():
        print(f"# {k}: {v}", file=sys.stderr)
    data = io.game_to_dict(res.game)
    data["provenance"] = prov
    _emit(args.output, data)
    return EXIT_OK


def cmd_concat(args) -> int:
    g = io.load_game(args.game)
    cg = concatenate(io.load_graph(args.left), g, io.load_graph(args.right), cap=args.cap)
    print(f"# lambda: {cg.lam}", file=sys.stderr)
    _emit(args.output, io.game_to_dict(cg.outer))
    return EXIT_OK


def cmd_ordered(args) -> int:
    g = io.load_game(args.game)
    M, P = io.load_graph(args.left_graph), io.load_graph(args.right_graph)
    cg = ordered_fortify(g, M, P, l=args.l, kind=args.family, cap=args.cap)
    ok = True
    for name, base, lifted in (("left", M, cg.left), ("right", P, cg.right)):
        d = base.degree
        bound = max(base.lam, 1 / math.sqrt(d - 1)) if d >= 2 else None
        line = f"# {name}: lambda={base.lam} lambda_tilde={lifted.lam}"
        if bound is not None:
            good = lifted.lam <= bound + args.tolerance
            ok &= good
            line += f" bound={bound} ok={good}"
        print(line, file=sys.stderr)
    _emit(args.output, io.game_to_dict(cg.outer))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_check_fort(args) -> int:
    data = io.read_json(args.game)
    graphs = [io.load_graph(p) for p in args.graphs]
    if "question_sizes" in data:
        g = io.kgame_from_dict(data)
        cg = concatenate_multiplayer(graphs, g, cap=args.cap)
        rep = multiplayer_violation(cg, args.epsilon, args.delta, cap=args.cap)
        print(rep.render())
        return _status(rep.passed and rep.extras["proof_inequality_holds"])
    if len(graphs) != 2:
        raise ValueError("two-player games need exactly two graphs")
    cg = concatenate(graphs[0], io.game_from_dict(data), graphs[1], cap=args.cap)
    if args.mode in ("exact", "ascent"):
        rep = fortification_violation(cg, args.epsilon, args.delta, mode=args.mode, cap=args.cap, seed=args.seed)
    elif args.mode == "combinatorial":
        rep = combinatorial_fortification_check(cg, args.epsilon, args.delta, cap=args.cap)
    else:
        rep = pointwise_bound_check(cg, args.epsilon, args.delta, cap=args.cap, slack=args.tolerance)
    print(rep.render())
    return _status(rep.passed)


def _build_graph(args):
    if args.graph:
        return io.load_graph(args.graph)
    if args.shift_union:
        n, *shifts = (int(v) for v in args.shift_union.split(","))
        return certify(shift_union_graph(n, shifts))
    if args.complete:
        return certify(complete_graph(args.complete))
    if args.random:
        n, d = args.random
        target = float(args.lambda_target) if args.lambda_target is not None else 1.0
        return random_biregular_expander(n, d, target, seed=args.seed, simple=args.simple)
    raise ValueError("give a graph file or one of --shift-union, --complete, --random")


def cmd_spectral(args) -> int:
    e = _build_graph(args)
    s = singular_values(normalized_adjacency(e.graph))
    print(f"left_size: {e.graph.left_size}")
    print(f"right_size: {e.graph.right_size}")
    print(f"degree: {e.degree}")
    print(f"lambda: {e.lam!r}")
    print("spectrum: " + " ".join(f"{v:.12g}" for v in s))
    ok = True
    if args.lambda_target is not None:
        ok = e.lam <= float(args.lambda_target) + args.tolerance
        print(f"lambda_target: {float(args.lambda_target)} ok={ok}")
    if args.tilde:
        d = e.degree
        lifted = tilde_lift(e, args.tilde, build_injection_family(d, args.tilde, args.family, cap=args.cap))
        bound = max(e.lam, 1 / math.sqrt(d - 1)) if d >= 2 else float("nan")
        good = d >= 2 and lifted.lam <= bound + args.tolerance
        ok &= good
        print(f"tilde_lambda: {lifted.lam!r}")
        print(f"tilde_bound: {bound!r} ok={good}")
    if args.output:
        io.save_graph(args.output, e)
    return _status(ok)


def cmd_repeat(args) -> int:
    g = io.load_game(args.game)
    cg = concatenate(io.load_graph(args.left), g, io.load_graph(args.right), cap=args.cap)
    rep = repetition_bound_check(cg, args.m, args.epsilon, args.delta, cap=args.cap, steps=args.steps)
    print(rep.render())
    ok = rep.passed and all(s.passed for s in rep.steps)
    return _status(ok)


def cmd_plan(args) -> int:
    plan = gap_amplification_plan(args.sigma, args.tau, args.beta, x_size=args.x_size)
    print(plan.render())
    return _status(plan.soundness_term <= plan.beta / 2 and plan.error_term <= plan.beta / 2)


def cmd_pipeline(args) -> int:
    g = io.load_game(args.game)
    res = run_pipeline(
        g, args.out, args.tau, args.epsilon, args.delta,
        seed=args.seed, cap=args.cap, ordered=args.ordered, l=args.l, family=args.family,
        quantum_target=args.quantum_target, certify_fortification=not args.no_certify,
        repeat_m=args.repeat, source=Path(args.game).name,
    )
    print((Path(args.out) / "manifest.txt").read_text(encoding="utf-8"), end="")
    return _status(res.passed)


def build_parser() -> argparse.ArgumentParser:
    def global_flags(suppress: bool) -> argparse.ArgumentParser:
        # subcommands accept the flags too but must not overwrite a value given before them
        flags = argparse.ArgumentParser(add_help=False)
        pick = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        flags.add_argument("--seed", type=int, default=pick(0))
        flags.add_argument("--cap", type=_cap, default=pick(DEFAULT_CAP), help="enumeration cap, <= 0 disables")
        flags.add_argument("--tolerance", type=float, default=pick(SPECTRAL_SLACK),
                           help="additive slack for float checks")
        return flags

    common = global_flags(True)
    p = argparse.ArgumentParser(prog="gamefort", description="Fortification and repetition of one-round games.",
                                parents=[global_flags(False)])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("value", parents=[common], help="exact classical value")
    s.add_argument("game")
    s.set_defaults(func=cmd_value)

    s = sub.add_parser("bireg", parents=[common], help="biregularize a game")
    s.add_argument("game")
    s.add_argument("--tau", type=rational, default=Fraction(1, 4))
    s.add_argument("--mode", choices=("graphical", "general"), default="general")
    s.add_argument("--multi-edges", action="store_true", help="graphical mode: accept repeated edges")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_bireg)

    s = sub.add_parser("concat", parents=[common], help="concatenate a game with two graphs")
    s.add_argument("game")
    s.add_argument("left")
    s.add_argument("right")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_concat)

    s = sub.add_parser("ordered-fort", parents=[common], help="ordered fortification")
    s.add_argument("--game", required=True)
    s.add_argument("--left-graph", required=True)
    s.add_argument("--right-graph", required=True)
    s.add_argument("--l", type=int)
    s.add_argument("--family", choices=("full", "pairwise"), default="full")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_ordered)

    s = sub.add_parser("check-fort", parents=[common], help="fortification checks on a concatenation")
    s.add_argument("game")
    s.add_argument("graphs", nargs="+", help="one graph per player")
    s.add_argument("--epsilon", type=rational, default=Fraction(0))
    s.add_argument("--delta", type=rational)
    s.add_argument("--mode", choices=("exact", "ascent", "combinatorial", "pointwise"), default="exact")
    s.set_defaults(func=cmd_check_fort)

    s = sub.add_parser("spectral", parents=[common], help="certify a graph's second singular value")
    s.add_argument("graph", nargs="?")
    s.add_argument("--shift-union", metavar="N,S1,S2,...")
    s.add_argument("--complete", type=int, metavar="N")
    s.add_argument("--random", type=int, nargs=2, metavar=("N", "D"))
    s.add_argument("--simple", action="store_true", help="random graphs without repeated edges")
    s.add_argument("--lambda-target", type=rational)
    s.add_argument("--tilde", type=int, metavar="L", help="also check the tilde-lift bound")
    s.add_argument("--family", choices=("full", "pairwise"), default="full")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_spectral)

    s = sub.add_parser("repeat", parents=[common], help="parallel repetition bound")
    s.add_argument("game")
    s.add_argument("left")
    s.add_argument("right")
    s.add_argument("--m", type=int, default=2)
    s.add_argument("--epsilon", type=rational, default=Fraction(0))
    s.add_argument("--delta", type=rational, default=Fraction(0))
    s.add_argument("--steps", action="store_true", help="also report each peeling step")
    s.set_defaults(func=cmd_repeat)

    s = sub.add_parser("plan", parents=[common], help="gap amplification parameters")
    s.add_argument("--sigma", type=int, required=True, help="inner alphabet size |A||B|")
    s.add_argument("--tau", type=rational, required=True)
    s.add_argument("--beta", type=rational, required=True)
    s.add_argument("--x-size", type=int)
    s.set_defaults(func=cmd_plan)

    s = sub.add_parser("pipeline", parents=[common], help="biregularize, fortify, certify and repeat")
    s.add_argument("game")
    s.add_argument("--out", required=True)
    s.add_argument("--tau", type=rational, default=Fraction(1, 4))
    s.add_argument("--epsilon", type=rational, required=True)
    s.add_argument("--delta", type=rational, required=True)
    s.add_argument("--ordered", action="store_true")
    s.add_argument("--l", type=int)
    s.add_argument("--family", choices=("full", "pairwise"), default="full")
    s.add_argument("--quantum-target", action="store_true")
    s.add_argument("--no-certify", action="store_true")
    s.add_argument("--repeat", type=int, default=2, metavar="M", help="0 skips the repetition check")
    s.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InstanceTooLarge, InvalidGame, NotGraphical, GraphError, ExpanderNotFound,
            io.FormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
