"""``oran-placer`` command line.

Exit codes: 0 success, 1 usage or input error, 2 infeasible, 3 validation
error, 4 size-guard refusal.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .deployment import InfeasibleError
from .maddpg import (CheckpointError, DivergenceError, GroupingError, TrainConfig,
                     load_checkpoint, save_checkpoint, train)
from .milp import (LpFormatError, MilpError, ModelTooLargeError, build_model, check_solution,
                   emit_lp, read_lp, read_solution)
from .oracle import (EXACT_MAX_NODES, EXACT_MAX_REQUESTS, OracleSizeError, exact_small_solve,
                     rfdh_sweep)
from .scenario import ScenarioError, fixture_F, fixture_T, load_requests, resolve_scenario

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_INVALID, EXIT_GUARD = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    # argparse's own exit status 2 would collide with "infeasible"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_instance(p: argparse.ArgumentParser, random_ok: bool = False) -> None:
    p.add_argument("--scenario", default="sample8",
                   help="bundled sample name (sample8, sample14) or scenario JSON path")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--requests", help="request-batch JSON file")
    src.add_argument("--fixture", choices=("F", "T"), help="built-in traffic fixture")
    if random_ok:
        src.add_argument("--random", type=int, metavar="N", help="N random batches")
    p.add_argument("--seed", type=int, default=0, help="single source of randomness")


def _batches(args, network) -> list[list]:
    if args.requests:
        return [load_requests(args.requests)]
    if args.fixture == "F":
        return [fixture_F(network.node_ids)]
    if args.fixture == "T":
        return [fixture_T(network.node_ids)]
    n = getattr(args, "random", None)
    if n is not None:
        if n < 1:
            raise CliError("--random needs a positive count")
        return harness.random_batches(network, n, args.seed)
    raise CliError("give --requests, --fixture" + (" or --random" if hasattr(args, "random") else ""))


def _settings(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


# -- commands -----------------------------------------------------------------------

def cmd_compare(args) -> int:
    network, params = resolve_scenario(args.scenario)
    batches = _batches(args, network)
    strategies = [s.strip().upper() for s in args.strategies.split(",") if s.strip()]
    ensemble = None
    if args.checkpoint:
        ensemble = load_checkpoint(args.checkpoint)
    elif "DRL" in strategies:
        if args.strategies_given:
            raise CliError("the DRL strategy needs --checkpoint")
        strategies.remove("DRL")
    workers = harness.worker_count(args.workers)
    cmp = harness.compare(network, params, batches, strategies, ensemble, args.idle_horizon,
                          args.seed, workers)
    out = Path(args.out)
    harness.write_csv(out, harness.COMPARE_HEADER, harness.comparison_rows(cmp))
    header, rows = harness.curve_rows(cmp, network, params, args.curve_step)
    harness.write_csv(out.with_name(out.stem + ".curve.csv"), header, rows)
    harness.atomic_write_text(out.with_name(out.stem + ".deployments.json"),
                              json.dumps(harness.deployments_doc(cmp, batches), sort_keys=True)
                              + "\n")
    harness.write_config_echo(out, "compare", {**_settings(args), "strategies": cmp.strategies,
                                               "workers": workers})
    flagged = sum(not o.served for o in cmp.outcomes)
    _say(f"wrote {out} ({len(batches)} batches, {len(cmp.strategies)} strategies, "
         f"{flagged} infeasible runs flagged)")
    return EXIT_OK


def cmd_train(args) -> int:
    network, params = resolve_scenario(args.scenario)
    try:
        cfg = harness.train_preset(args.scenario)
    except ValueError:
        cfg = TrainConfig()
    if args.config:
        cfg = TrainConfig.from_dict({**cfg.to_dict(), **json.loads(Path(args.config).read_text())})
    overrides = {"seed": args.seed}
    if args.episodes is not None:
        overrides["episodes"] = args.episodes
    cfg = TrainConfig.from_dict({**cfg.to_dict(), **overrides})
    report = (lambda e, r: _say(f"episode {e}: mean reward {r:.4f}")) if args.verbose else None
    ensemble, history = train(network, params, cfg, progress=report)
    out = Path(args.out)
    save_checkpoint(ensemble, out)
    hist = out.with_name(out.stem + ".history.csv")
    harness.write_csv(hist, ("episode", "step", "reward"), harness.history_rows(history))
    harness.write_config_echo(out, "train", {**_settings(args), "train_config": cfg.to_dict()})
    _say(f"wrote {out} and {hist}")
    return EXIT_OK


def cmd_export_milp(args) -> int:
    network, params = resolve_scenario(args.scenario)
    requests = _batches(args, network)[0]
    model = build_model(network, requests, params, big_m=args.big_m)
    emit_lp(model, args.out)
    harness.write_config_echo(args.out, "export-milp", _settings(args))
    _say(f"wrote {args.out} ({len(model.variables)} variables, "
         f"{len(model.constraints)} constraints)")
    return EXIT_OK


def cmd_check_solution(args) -> int:
    network, params = resolve_scenario(args.scenario)
    requests = _batches(args, network)[0]
    model = build_model(network, requests, params, big_m=args.big_m)
    if args.lp:
        given = read_lp(args.lp)
        if given != model:
            raise CliError(f"{args.lp} does not match the model built from the scenario "
                           "and requests", EXIT_INVALID)
    values = read_solution(args.solution)
    reference = args.reference_kj
    if reference is None and len(network) <= EXACT_MAX_NODES and len(requests) <= EXACT_MAX_REQUESTS:
        try:
            reference = exact_small_solve(network, requests, params)[1]
        except InfeasibleError:
            reference = None
    rep = check_solution(model, values, reference)
    print(f"verdict: {rep.verdict}")
    print(f"objective_kj: {rep.objective_kj!r}")
    if rep.recomputed_kj is not None:
        print(f"recomputed_kj: {rep.recomputed_kj!r}")
    if reference is not None:
        print(f"reference_kj: {reference!r}")
    if rep.validation is not None:
        print(f"validator: {'ok' if rep.validation.ok else 'violations'}")
    if rep.violated:
        print("violated: " + ", ".join(rep.violated))
    if rep.message:
        print(f"message: {rep.message}")
    print("family slack minima:")
    for fam, slack in sorted(rep.family_slacks.items()):
        print(f"  {fam}: {slack!r}")
    return EXIT_INVALID if rep.verdict == "infeasible" else EXIT_OK


def cmd_oracle(args) -> int:
    network, params = resolve_scenario(args.scenario)
    requests = _batches(args, network)[0]
    out = Path(args.out)
    if args.exact:
        try:
            dep, kj = exact_small_solve(network, requests, params)
        except InfeasibleError as exc:
            harness.write_csv(out, ("kind", "activations", "objective_kj"), [("exact", "", None)])
            raise CliError(str(exc), EXIT_INFEASIBLE) from exc
        harness.write_csv(out, ("kind", "activations", "objective_kj"),
                          [("exact", " ".join(map(str, sorted(dep.activations))), kj)])
        harness.write_config_echo(out, "oracle", _settings(args))
        return EXIT_OK
    rows = rfdh_sweep(network, requests, params, harness.worker_count(args.workers))
    table, served = harness.sweep_rows(rows, network, requests, params)
    harness.write_csv(out, harness.SWEEP_HEADER, table)
    harness.write_config_echo(out, "oracle", _settings(args))
    best = table[-1]
    _say(f"wrote {out}: {len(rows)} subsets, best mask [{best[1]}] "
         f"objective {best[3] if served else 'none'}")
    return EXIT_OK if served else EXIT_INFEASIBLE


# -- parser ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="oran-placer",
                     description="Energy-aware Open RAN function placement")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compare", help="run strategies on request batches, write CSV")
    _add_instance(p, random_ok=True)
    p.add_argument("--strategies", default=None,
                   help="comma list from DRL,ORACLE,PMD,RA,GHP,ASM (default: all but ORACLE)")
    p.add_argument("--checkpoint", help="trained ensemble for the DRL strategy")
    p.add_argument("--idle-horizon", type=float, default=150.0, help="seconds")
    p.add_argument("--curve-step", type=float, default=10.0, help="seconds between curve points")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("train", help="train the activation agents")
    p.add_argument("--scenario", default="sample8")
    p.add_argument("--config", help="JSON file with training settings")
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("export-milp", help="write the MILP in CPLEX-LP format")
    _add_instance(p)
    p.add_argument("--big-m", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_milp)

    p = sub.add_parser("check-solution", help="verify a solver assignment for the MILP")
    _add_instance(p)
    p.add_argument("--solution", required=True, help="'name value' lines")
    p.add_argument("--lp", help="exported model to compare against the rebuilt one")
    p.add_argument("--reference-kj", type=float, default=None, help="known optimum")
    p.add_argument("--big-m", type=float, default=None)
    p.set_defaults(func=cmd_check_solution)

    p = sub.add_parser("oracle", help="sweep every activation subset through the heuristic")
    _add_instance(p)
    p.add_argument("--exact", action="store_true", help="exhaustive solve (tiny instances)")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "compare":
        args.strategies_given = args.strategies is not None
        if args.strategies is None:
            args.strategies = "DRL,PMD,RA,GHP,ASM"
    try:
        return args.func(args)
    except CliError as exc:
        _say(f"error: {exc}")
        return exc.code
    except (OracleSizeError, ModelTooLargeError) as exc:
        _say(f"refused: {exc}")
        return EXIT_GUARD
    except InfeasibleError as exc:
        _say(f"infeasible: {exc}")
        return EXIT_INFEASIBLE
    except (LpFormatError, CheckpointError, GroupingError) as exc:
        _say(f"error: {exc}")
        return EXIT_INVALID
    except DivergenceError as exc:
        _say(f"training diverged: {exc}")
        return EXIT_USAGE
    except (ScenarioError, MilpError, ValueError, OSError) as exc:
        _say(f"error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
