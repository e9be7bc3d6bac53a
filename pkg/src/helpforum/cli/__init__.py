"""Command-line entry points (``helpforum <subcommand>``)."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from ..planner import DEFAULT_TIMEOUT


def _cell(text: str):
    try:
        x, y = (int(v) for v in text.replace("(", "").replace(")", "").split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y but got {text!r}")
    return (x, y)


def _world(args):
    from ..world import GridWorld, default_world

    if getattr(args, "world", None):
        w = GridWorld.from_dict(json.loads(Path(args.world).read_text(encoding="utf-8")))
        if args.horizon is not None:
            w = GridWorld(w.width, w.height, w.obstacles, args.horizon, w.regions)
        return w
    return default_world(args.horizon or 30)


def _write(path: Optional[str], text: str) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_gen_scenario(args) -> int:
    from .experiment import gen_scenario

    sc = gen_scenario(args.seed, _world(args), args.ils_iterations)
    _write(args.out, sc.dumps())
    return 0


def _load_scenario(path):
    from .experiment import Scenario

    return Scenario.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def cmd_experiment2(args) -> int:
    from ..oracle import IlsParams
    from .experiment import gen_scenario, run_experiment2, summary_csv

    scenario = _load_scenario(args.scenario) if args.scenario else gen_scenario(args.seed, _world(args), args.ils_iterations)
    results = run_experiment2(
        args.trials, args.seed, args.out, args.workers,
        IlsParams(max_iterations=args.ils_iterations), args.timeout, scenario,
    )
    failed = sum(1 for r in results if r.error)
    sys.stdout.write(summary_csv(results))
    if failed:
        print(f"{failed} trial(s) failed and were excluded", file=sys.stderr)
    return 0


def cmd_plan(args) -> int:
    from ..planner import Infeasible, SolverTimeout, build_original, build_updated, solve
    from ..planner.milp import encode, write_lp
    from ..stl import parse, to_text

    world = _world(args)
    task = parse(args.formula)
    bindings = {k: [tuple(c) for c in v] for k, v in json.loads(args.bindings).items()} if args.bindings else None
    if args.help_formula:
        problem = build_updated(world, args.start, task, parse(args.help_formula), bindings)
    else:
        problem = build_original(world, args.start, task, bindings)
    if args.export_lp:
        write_lp(encode(problem), args.export_lp)
    try:
        sol = solve(problem, timeout=args.timeout)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    except SolverTimeout as exc:
        print(f"timeout: {exc}", file=sys.stderr)
        return 3
    out = {
        "formula": to_text(task),
        "trajectory": [list(c) for c in sol.trajectory],
        "objective": sol.objective,
        "times": list(sol.times),
        "distance": sol.distance,
        "wall_time": round(sol.wall_time, 4),
    }
    print(json.dumps(out))
    return 0


def _translator_config(args):
    from ..nl import TranslatorConfig

    preds = args.predicates.split(",") if getattr(args, "predicates", None) else None
    return TranslatorConfig(
        backend=args.backend, endpoint=args.endpoint, predicates=preds,
        max_retries=args.retries, use_grammar=not args.no_grammar,
    )


def cmd_translate(args) -> int:
    from ..nl import ExhaustedRetries, ServiceError, Untranslatable, translate
    from ..stl import to_text

    try:
        f = translate(args.text, _translator_config(args))
    except (Untranslatable, ExhaustedRetries, ServiceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(to_text(f))
    return 0


def cmd_eval_nl(args) -> int:
    from ..nl import evaluate, load_pairs

    if args.corpus in (None, "mini_corpus.jsonl") and not (args.corpus and Path(args.corpus).exists()):
        pairs = load_pairs("mini_corpus.jsonl")
    else:
        pairs = [json.loads(l) for l in Path(args.corpus).read_text(encoding="utf-8").splitlines() if l.strip()]
    report = evaluate(pairs, _translator_config(args))
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    _write(args.out, report.to_json())
    s = report.summary()
    print(f"validity {s['validity_pct']:.1f} accuracy {s['accuracy_pct']:.1f} containment {s['containment_pct']:.1f} (n={s['n']})", file=sys.stderr)
    return 0


def cmd_oracle_run(args) -> int:
    from ..oracle import IlsParams, greedy_insertion, ils
    from .experiment import gen_scenario

    sc = _load_scenario(args.scenario) if args.scenario else gen_scenario(args.seed, _world(args), args.iterations)
    init = greedy_insertion(sc.world, sc.forklifts, sc.tasks, args.seed, max_route_cost=sc.world.horizon)
    res = ils(sc.world, sc.forklifts, init, IlsParams(max_iterations=args.iterations, seed=args.seed), max_route_cost=sc.world.horizon)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "schedule.json").write_text(json.dumps(res.schedule.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        (out / "trace.csv").write_text(res.trace_csv(), encoding="utf-8")
    print(json.dumps({"initial_cost": res.initial_cost, "cost": res.cost, "schedule": res.schedule.to_dict()["routes"]}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="helpforum", description="Multi-robot help requests over STL path planning.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--world", help="world JSON (default: 10x10 warehouse)")
        sp.add_argument("--horizon", type=int, default=None)
        if seed:
            sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("gen-scenario", help="write a seeded scenario as JSON")
    common(sp)
    sp.add_argument("--ils-iterations", type=int, default=500)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_gen_scenario)

    sp = sub.add_parser("experiment2", help="help-site benchmark against the baselines")
    common(sp)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--scenario", help="scenario JSON (default: generated from --seed)")
    sp.add_argument("--workers", type=int, default=None)
    sp.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)
    sp.add_argument("--ils-iterations", type=int, default=500)
    sp.add_argument("--out", default="experiment2")
    sp.set_defaults(func=cmd_experiment2)

    sp = sub.add_parser("plan", help="solve one path problem")
    common(sp, seed=False)
    sp.add_argument("--start", type=_cell, required=True)
    sp.add_argument("--formula", required=True)
    sp.add_argument("--help-formula")
    sp.add_argument("--bindings", help='JSON mapping atom -> [[x, y], ...]')
    sp.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)
    sp.add_argument("--export-lp")
    sp.set_defaults(func=cmd_plan)

    def nl_flags(sp):
        sp.add_argument("--backend", choices=("rules", "external"), default="rules")
        sp.add_argument("--endpoint", help="service URL (default: $HELPFORUM_ENDPOINT)")
        sp.add_argument("--predicates", help="comma-separated vocabulary")
        sp.add_argument("--retries", type=int, default=3)
        sp.add_argument("--no-grammar", action="store_true", help="do not send the grammar to the service")

    sp = sub.add_parser("translate", help="sentence to STL")
    sp.add_argument("text")
    nl_flags(sp)
    sp.set_defaults(func=cmd_translate)

    sp = sub.add_parser("eval-nl", help="score a translator on a JSONL corpus")
    sp.add_argument("corpus", nargs="?", default=None)
    nl_flags(sp)
    sp.add_argument("--out", help="report JSON path (default: stdout)")
    sp.add_argument("--csv")
    sp.set_defaults(func=cmd_eval_nl)

    sp = sub.add_parser("oracle-run", help="greedy insertion plus ILS on a scenario")
    common(sp)
    sp.add_argument("--scenario")
    sp.add_argument("--iterations", type=int, default=500)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_oracle_run)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        # bad formulas, unknown atoms and unreadable files are usage errors
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
