"""Help-request benchmark: one warehouse scenario, many random help sites.

Each trial compares the added makespan of four ways to serve a blocked
aisle:

* ``ours``: forum round, the cheapest offer wins (``tau_h + tau_new``)
* ``b1``: centralized ILS re-plan of the whole fleet
* ``b2``: the helper nearest the site plans the help alone
* ``b3``: help pinned to the nearest helper, ILS re-plans everything else

Added makespan counts the requester's wait for the help plus the growth of
the fleet's summed makespans.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import random
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from ..oracle import CostModel, IlsParams, added_cost, greedy_insertion, ils, insert_help
from ..planner import DEFAULT_TIMEOUT, makespan
from ..protocol import AllDeclined, Conflict, nearest_helper, run_round
from ..tasks import PnpTask, Schedule, tasks_formula
from ..world import Cell, GridWorld, Robot, default_world
from .svg import boxplot_svg

METHODS = ("ours", "b1", "b2", "b3")
N_FORKLIFTS = 6
N_TASKS = 12
MAX_HAUL = 5
FORKLIFT_CAPS = "forklift; can lift pallets"
MOBILE_CAPS = "mobile base; no lift"
CONFLICT_TEXT = "A pallet is blocking the aisle"


@dataclass
class Scenario:
    seed: int
    world: GridWorld
    forklifts: List[Robot]
    requester: Robot
    tasks: List[PnpTask]
    schedule: Schedule

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "world": self.world.to_dict(),
            "forklifts": [r.to_dict() for r in self.forklifts],
            "requester": self.requester.to_dict(),
            "tasks": [t.to_dict() for t in self.tasks],
            "schedule": self.schedule.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        tasks = [PnpTask.from_dict(t) for t in d["tasks"]]
        return cls(
            int(d["seed"]),
            GridWorld.from_dict(d["world"]),
            [Robot.from_dict(r) for r in d["forklifts"]],
            Robot.from_dict(d["requester"]),
            tasks,
            Schedule.from_dict(d["schedule"], {t.id: t for t in tasks}),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @property
    def reserved(self) -> set:
        return {c for t in self.tasks for c in t.cells}


def gen_scenario(seed: int, world: Optional[GridWorld] = None, ils_iterations: int = 500) -> Scenario:
    """Seeded fleet, short-haul pallet tasks and a horizon-feasible schedule.

    Placements are redrawn until every route fits within the horizon.
    """
    world = world or default_world()
    rng = random.Random(seed)
    for _attempt in range(1000):
        free = list(world.free)
        starts = rng.sample(free, N_FORKLIFTS + 1)
        used = set(starts)
        tasks = []
        for i in range(N_TASKS):
            picks = [c for c in free if c not in used]
            pick = rng.choice(picks)
            near = world.distances_from(pick)
            places = [c for c in free if c not in used and c != pick and 1 <= near.get(c, 99) <= MAX_HAUL]
            if not places:
                break
            place = rng.choice(places)
            used |= {pick, place}
            tasks.append(PnpTask(f"t{i:02d}", pick, place))
        if len(tasks) < N_TASKS:
            continue
        forklifts = [Robot(i + 1, starts[i], "forklift", FORKLIFT_CAPS) for i in range(N_FORKLIFTS)]
        requester = Robot(N_FORKLIFTS + 1, starts[-1], "mobile", MOBILE_CAPS)
        init = greedy_insertion(world, forklifts, tasks, seed, max_route_cost=world.horizon)
        res = ils(world, forklifts, init, IlsParams(max_iterations=ils_iterations, seed=seed), max_route_cost=world.horizon)

        model = CostModel(world, forklifts, res.schedule.tasks)
        if all(model.route_times(r, ids)[0] <= world.horizon for r, ids in res.schedule.routes.items()):
            return Scenario(seed, world, forklifts, requester, tasks, res.schedule)
    raise RuntimeError("could not draw a feasible scenario")


def help_sites(scenario: Scenario) -> List[Cell]:
    """Free cells next to a shelf that are not task cells or robot starts."""
    w = scenario.world
    blocked = scenario.reserved | {r.start for r in scenario.forklifts} | {scenario.requester.start}
    out = []
    for c in w.free:
        if c in blocked:
            continue
        if any((c[0] + dx, c[1] + dy) in w.obstacles for dx, dy in ((0, -1), (1, 0), (0, 1), (-1, 0))):
            out.append(c)
    return out


def original_makespans(scenario: Scenario, timeout: float = DEFAULT_TIMEOUT) -> Dict[int, int]:
    """Each forklift's makespan without help (shared by all trials)."""
    return {
        r.id: makespan(scenario.world, r.start, tasks_formula(scenario.schedule.of(r.id)), timeout=timeout)
        for r in scenario.forklifts
    }


@dataclass
class TrialResult:
    trial: int
    seed: int
    site: Cell
    delta: Dict[str, Optional[float]]
    wall: Dict[str, float]
    winner: Optional[int]
    solve_times: List[float] = field(default_factory=list)
    timeouts: int = 0
    messages: List[dict] = field(default_factory=list)
    error: Optional[str] = None


def run_trial(
    scenario: Scenario,
    trial: int,
    seed: int,
    makespans: Dict[int, int],
    ils_params: IlsParams = IlsParams(),
    timeout: float = DEFAULT_TIMEOUT,
) -> TrialResult:
    rng = random.Random(seed)
    site = rng.choice(help_sites(scenario))
    w = scenario.world
    conflict = Conflict(CONFLICT_TEXT, site)
    delta: Dict[str, Optional[float]] = {m: None for m in METHODS}
    wall: Dict[str, float] = {m: 0.0 for m in METHODS}

    t0 = time.perf_counter()
    try:
        rnd = run_round(
            w, scenario.schedule, scenario.requester, conflict, scenario.forklifts,
            timeout=timeout, makespans=makespans,
        )
    except AllDeclined as exc:
        return TrialResult(trial, seed, site, delta, wall, None, error=str(exc))
    wall["ours"] = time.perf_counter() - t0
    winner = rnd.confirmation.helper
    by_id = {o.helper: o for o in rnd.offers}
    delta["ours"] = float(by_id[winner].cost)
    solve_times = [s.wall_time for s in rnd.stats.values()]
    timeouts = sum(1 for s in rnd.stats.values() if s.timed_out)

    near = nearest_helper(w, site, scenario.forklifts)
    wall["b2"] = rnd.stats[near.id].wall_time
    if not by_id[near.id].declined:
        delta["b2"] = float(by_id[near.id].cost)

    help_task = rnd.help_task
    for name, mode in (("b1", "full"), ("b3", "nearest")):
        t0 = time.perf_counter()
        res = insert_help(w, scenario.forklifts, scenario.schedule, help_task, mode,
                          IlsParams(**{**asdict(ils_params), "seed": seed}), max_route_cost=w.horizon)
        wall[name] = time.perf_counter() - t0
        delta[name] = float(added_cost(w, scenario.forklifts, scenario.schedule, res.schedule, help_task.id))
    return TrialResult(trial, seed, site, delta, wall, winner, solve_times, timeouts, rnd.bus.messages)


def _trial_job(args):
    return run_trial(*args)


def trial_seed(master: int, i: int) -> int:
    return master * 100_003 + i


def run_experiment2(
    trials: int = 100,
    seed: int = 0,
    out_dir=None,
    workers: Optional[int] = None,
    ils_params: IlsParams = IlsParams(),
    timeout: float = DEFAULT_TIMEOUT,
    scenario: Optional[Scenario] = None,
) -> List[TrialResult]:
    """Run the benchmark; with ``out_dir`` also write CSV, summary, SVG and logs."""
    scenario = scenario or gen_scenario(seed)
    makespans = original_makespans(scenario, timeout)
    jobs = [(scenario, i, trial_seed(seed, i), makespans, ils_params, timeout) for i in range(trials)]
    workers = workers if workers is not None else (os.cpu_count() or 1)
    if workers > 1 and trials > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_trial_job, jobs))
    else:
        results = [_trial_job(j) for j in jobs]
    if out_dir is not None:
        write_outputs(results, scenario, Path(out_dir))
    return results


# ---------------------------------------------------------------------------
# reporting


def results_csv(results: Sequence[TrialResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trial", "seed", "site_x", "site_y", "winner"] + [f"delta_{m}" for m in METHODS]
               + [f"time_{m}" for m in METHODS] + ["error"])
    for r in results:
        w.writerow(
            [r.trial, r.seed, r.site[0], r.site[1], "" if r.winner is None else r.winner]
            + ["" if r.delta[m] is None else f"{r.delta[m]:g}" for m in METHODS]
            + [f"{r.wall[m]:.4f}" for m in METHODS]
            + [r.error or ""]
        )
    return buf.getvalue()


def summarize(results: Sequence[TrialResult]) -> Dict[str, Tuple[float, float, int]]:
    out = {}
    for m in METHODS:
        vals = [r.delta[m] for r in results if r.delta[m] is not None]
        if vals:
            sd = statistics.stdev(vals) if len(vals) > 1 else 0.0
            out[m] = (statistics.fmean(vals), sd, len(vals))
        else:
            out[m] = (math.nan, math.nan, 0)
    return out


def summary_csv(results: Sequence[TrialResult]) -> str:
    rows = ["method,mean,std,n"]
    for m, (mean, sd, n) in summarize(results).items():
        rows.append(f"{m},{mean:.4f},{sd:.4f},{n}")
    return "\n".join(rows) + "\n"


def write_outputs(results: Sequence[TrialResult], scenario: Scenario, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "scenario.json").write_text(scenario.dumps(), encoding="utf-8")
    (out / "results.csv").write_text(results_csv(results), encoding="utf-8")
    (out / "summary.csv").write_text(summary_csv(results), encoding="utf-8")
    groups = {m.upper() if m != "ours" else "Ours": [r.delta[m] for r in results if r.delta[m] is not None] for m in METHODS}
    (out / "boxplot.svg").write_text(boxplot_svg(groups, "Added makespan per method", "time-steps"), encoding="utf-8")
    with open(out / "messages.jsonl", "w", encoding="utf-8") as fh:
        for r in results:
            for msg in r.messages:
                fh.write(json.dumps({"trial": r.trial, **msg}, sort_keys=True) + "\n")
