"""``compop`` command line: propagate instance files and run the verification suites."""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

from .engine import RandomChoice, Result, UpdatePolicy, _Choose, gico
from .errors import CompopError
from .instance import Instance, parse_instance
from .lattice import format_var_domain
from .oracle import domains_close, naive_gfp, verify_lemma_suite
from .strategies import STRATEGY_NAMES, StrategyConfig, independence_facts, redundancy_facts

EXIT_FIXPOINT, EXIT_EMPTY, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="compop", description="Constraint propagation with composition operators.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("propagate", help="propagate an instance file to its fixed-point")
    run.add_argument("file")
    run.add_argument("--strategy", default="fifo", choices=STRATEGY_NAMES)
    run.add_argument("--update", default="dependency", choices=[u.value for u in UpdatePolicy])
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--eps", type=float, default=1e-9, help="precision of box narrowing")
    run.add_argument("--window", type=int, default=None)
    run.add_argument("--eps-ratio", type=float, default=0.05)
    run.add_argument("--min-progress", type=float, default=0.0,
                     help="ignore interval reductions below this width when re-activating")
    run.add_argument("--no-prune", action="store_true", help="keep box functions of single-occurrence variables")
    run.add_argument("--trace", action="store_true")
    run.add_argument("--stats", action="store_true", help="also print the update and tentative counters")
    run.add_argument("--seed", type=int, default=None, help="with fifo: pick functions at random instead")

    ver = sub.add_parser("verify", help="run a verification suite")
    ver.add_argument("--suite", required=True, choices=["lemmas", "strategies"])
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds (lemmas)")
    ver.add_argument("--instances", default=None, help="directory of .csp files (strategies)")
    ver.add_argument("--plant-fault", default=None, choices=["nonmonotone", "dependent-pair"])
    return p


def run_instance(
    inst: Instance,
    strategy: str = "fifo",
    update: str = "dependency",
    threads: int = 1,
    eps: float = 1e-9,
    window: int | None = None,
    eps_ratio: float = 0.05,
    min_progress: float = 0.0,
    prune: bool = True,
    trace: bool = False,
    seed: int | None = None,
) -> Result:
    F = inst.functions(eps, prune)
    config = StrategyConfig(strategy, threads, window, eps_ratio)
    facts = independence_facts(F) + redundancy_facts(F)
    strat = _Choose(RandomChoice(seed)) if strategy == "fifo" and seed is not None else config.build()
    return gico(F, inst.domain(), strat, update, facts, threads, min_progress, trace=trace)


def corpus_dir() -> Path:
    return Path(str(resources.files("compop") / "corpus"))


def _propagate(args) -> int:
    try:
        inst = parse_instance(Path(args.file).read_text())
    except OSError as exc:
        print(f"compop: cannot read {args.file}: {exc.strerror}", file=sys.stderr)
        return EXIT_USAGE
    result = run_instance(
        inst, args.strategy, args.update, args.threads, args.eps, args.window,
        args.eps_ratio, args.min_progress, not args.no_prune, args.trace, args.seed,
    )
    for line in result.trace:
        print(line)
    for name, dom in result.domain.items():
        print(f"{name}={format_var_domain(dom)}")
    print(f"status: {'empty' if result.empty else 'fixpoint'}")
    print(result.stats.line())
    if args.stats:
        s = result.stats
        print(f"stats: turns={result.turns} update_checks={s.update_evaluations} tentative={s.tentative_evaluations}")
    return EXIT_EMPTY if result.empty else EXIT_FIXPOINT


def strategy_suite(directory: Path, out=print) -> bool:
    ok = True
    files = sorted(directory.glob("*.csp"))
    if not files:
        out(f"no .csp files in {directory}")
        return False
    for path in files:
        inst = parse_instance(path.read_text())
        reference = naive_gfp(inst.functions(), inst.domain())
        for strategy in STRATEGY_NAMES:
            for update in UpdatePolicy:
                threads = 2 if strategy == "parallel" else 1
                got = run_instance(inst, strategy, update.value, threads).domain
                same = domains_close(got, reference, 1e-9)
                ok &= same
                out(f"INSTANCE {path.name} strategy={strategy} update={update.value} {'PASS' if same else 'FAIL'}"
                    + ("" if same else f" got=({got.render()}) expected=({reference.render()})"))
    return ok


def _verify(args) -> int:
    if args.suite == "lemmas":
        ok = True
        for seed in range(args.seed, args.seed + args.seeds):
            report = verify_lemma_suite(seed, plant_fault=args.plant_fault)
            for line in report.lines():
                print(f"seed={seed} {line}")
            ok &= report.passed
        return 0 if ok else 1
    directory = Path(args.instances) if args.instances else corpus_dir()
    return 0 if strategy_suite(directory) else 1


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "propagate":
            return _propagate(args)
        return _verify(args)
    except CompopError as exc:
        print(f"compop: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
