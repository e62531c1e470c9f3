"""Command-line front end.

Exit codes: 0 success or passed check, 1 failed check, 2 usage or parse error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .automata import (BlockUnitaryError, Bqca, MultilayerQca, Pqca, StateCapError,
                       SupportEscape, evolve)
from .io import (FormatError, coding_to_json, dump_json, load_automaton,
                 load_coding, load_state, save_automaton, save_state)
from .lattice import AlphabetError, DimensionError
from .lowering import (UnsupportedLowering, lower_bqca_to_pqca, lower_multilayer_to_bqca,
                       lower_multilayer_to_pqca)
from .verify import (check_causality, check_commutation, check_intrinsic_simulation,
                     check_shift_invariance, check_unitarity)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

KIND = {Pqca: "pqca", Bqca: "bqca", MultilayerQca: "multilayer"}


class UsageError(Exception):
    pass


def _ints(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def cmd_simulate(args) -> int:
    a = load_automaton(args.automaton)
    state = load_state(args.state, a.alphabet, renormalize=args.renormalize)
    if args.rounds < 0:
        raise UsageError("--rounds must be non-negative")
    save_state(evolve(a, state, args.rounds), args.out)
    return EXIT_OK


PASSES = {
    ("bqca", "multilayer"): lower_multilayer_to_bqca,
    ("pqca", "bqca"): lower_bqca_to_pqca,
    ("pqca-full", "multilayer"): lower_multilayer_to_pqca,
}


def cmd_lower(args) -> int:
    a = load_automaton(args.automaton)
    kind = KIND[type(a)]
    fn = PASSES.get((args.pass_name, kind))
    if fn is None:
        raise UsageError(f"pass {args.pass_name!r} does not apply to a {kind} automaton")
    result = fn(a)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_automaton(result.target, out / "automaton.json")
    dump_json(coding_to_json(result, kind), out / "coding.json")
    print(f"wrote {out / 'automaton.json'} ({KIND[type(result.target)]}, "
          f"{result.target.alphabet.size} letters) and {out / 'coding.json'} "
          f"(step ratio {result.step_ratio})")
    return EXIT_OK


def cmd_verify(args) -> int:
    a = load_automaton(args.automaton)
    if args.check == "unitarity":
        rep = check_unitarity(a, args.window_lo, args.window, margin=args.margin)
    elif args.check == "shift":
        rep = check_shift_invariance(a, samples=args.samples, seed=args.seed)
    elif args.check == "causality":
        rep = check_causality(a, trials=args.samples, seed=args.seed)
    else:
        if not isinstance(a, MultilayerQca):
            raise UsageError("the commutation check needs a multilayer automaton")
        rep = check_commutation(a.k, seed=args.seed)
    rep.parameters.setdefault("seed", args.seed)
    print(rep.summary())
    if args.out:
        dump_json(rep.to_dict(), args.out)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_check_sim(args) -> int:
    source = load_automaton(args.source)
    target = load_automaton(args.target)
    result = load_coding(args.coding, source, target)
    rep = check_intrinsic_simulation(source, target, result, steps=args.steps,
                                     samples=args.samples, seed=args.seed,
                                     particles=args.particles)
    print(rep.summary())
    if args.out:
        dump_json(rep.to_dict(), args.out)
    return EXIT_OK if rep.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qcasim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="evolve a state for a number of rounds")
    s.add_argument("--automaton", required=True)
    s.add_argument("--state", required=True)
    s.add_argument("--rounds", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--renormalize", action="store_true",
                   help="rescale the input state to unit norm instead of rejecting it")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("lower", help="run a lowering pass")
    s.add_argument("--automaton", required=True)
    s.add_argument("--pass", dest="pass_name", required=True, choices=["bqca", "pqca", "pqca-full"])
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_lower)

    s = sub.add_parser("verify", help="check an axiom or the commutation promise")
    s.add_argument("--automaton", required=True)
    s.add_argument("--check", required=True,
                   choices=["unitarity", "shift", "causality", "commutation"])
    s.add_argument("--window", type=_ints, default=None, help="window shape, e.g. 4 or 2,2")
    s.add_argument("--window-lo", type=_ints, default=None, help="window corner, e.g. 0,0")
    s.add_argument("--margin", type=int, default=1)
    s.add_argument("--samples", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="write the JSON report here")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("check-sim", help="check that a target intrinsically simulates a source")
    s.add_argument("--source", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--coding", required=True)
    s.add_argument("--steps", type=int, default=4)
    s.add_argument("--samples", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--particles", type=int, default=2,
                   help="maximum non-quiescent cells per sampled configuration")
    s.add_argument("--out", help="write the JSON report here")
    s.set_defaults(func=cmd_check_sim)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except (FormatError, UsageError, UnsupportedLowering, AlphabetError, DimensionError,
            BlockUnitaryError, StateCapError, SupportEscape, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
