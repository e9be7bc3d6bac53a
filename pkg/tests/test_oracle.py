import pytest
from helpers import random_fleet, reference_optimum

from helpforum.oracle import (
    CostModel,
    IlsParams,
    added_cost,
    exhaustive_optimum,
    greedy_insertion,
    ils,
    insert_help,
    nearest_robot,
    route_cost,
    schedule_cost,
)
from helpforum.planner import makespan
from helpforum.tasks import PnpTask, Schedule, pnp_formula, tasks_formula
from helpforum.world import GridWorld, Robot, default_world


class TestCosts:
    def test_route_cost_by_hand(self):
        w = GridWorld(5, 1)
        t1, t2 = PnpTask("a", (1, 0), (3, 0)), PnpTask("b", (4, 0), (0, 0))
        assert route_cost(w, (0, 0), [t1]) == 1 + 1 + 2 + 1
        assert route_cost(w, (0, 0), [t1, t2]) == 5 + 1 + 1 + 4 + 1
        assert route_cost(w, (0, 0), []) == 0

    @pytest.mark.parametrize("seed", range(10))
    def test_route_cost_equals_planner_makespan(self, seed):
        w, robots, tasks = random_fleet(seed, n_robots=1, n_tasks=1)
        assert route_cost(w, robots[0].start, tasks) == makespan(w, robots[0].start, pnp_formula(tasks[0]))

    def test_two_task_route_vs_planner(self):
        w = GridWorld(6, 1, horizon=20)
        tasks = [PnpTask("a", (1, 0), (2, 0)), PnpTask("b", (4, 0), (5, 0))]
        assert route_cost(w, (0, 0), tasks) == makespan(w, (0, 0), tasks_formula(tasks))

    def test_help_wait_is_counted(self):
        w = GridWorld(5, 1)
        tasks = {"a": PnpTask("a", (1, 0), (2, 0)), "h": PnpTask("h", (3, 0), (4, 0))}
        m = CostModel(w, [Robot(1, (0, 0))], tasks, "h")
        total, done = m.route_times(1, ["a", "h"])
        assert (total, done) == (8, 8) and m.J({1: ["a", "h"]}) == 16

    def test_overrun_penalty(self):
        w = GridWorld(10, 1)
        t = {"a": PnpTask("a", (9, 0), (0, 0))}
        m = CostModel(w, [Robot(1, (0, 0))], t, max_route_cost=10)
        assert m.raw_J({1: ["a"]}) == 20 and m.J({1: ["a"]}) > 20


class TestSearch:
    @pytest.mark.parametrize("seed", range(15))
    def test_exhaustive_matches_reference(self, seed):
        w, robots, tasks = random_fleet(seed)
        assert exhaustive_optimum(w, robots, tasks)[0] == reference_optimum(w, robots, tasks)

    @pytest.mark.parametrize("seed", range(15))
    def test_ils_never_worse_than_start(self, seed):
        w, robots, tasks = random_fleet(seed)
        init = greedy_insertion(w, robots, tasks, seed)
        res = ils(w, robots, init, IlsParams(max_iterations=50, seed=seed))
        assert res.cost <= res.initial_cost
        assert res.cost == schedule_cost(w, robots, res.schedule)
        assert res.cost >= reference_optimum(w, robots, tasks)

    def test_deterministic(self):
        w, robots, tasks = random_fleet(3, n_robots=3, n_tasks=4)
        init = greedy_insertion(w, robots, tasks, 1)
        a = ils(w, robots, init, IlsParams(max_iterations=40, seed=5))
        b = ils(w, robots, init, IlsParams(max_iterations=40, seed=5))
        assert a.schedule.routes == b.schedule.routes and a.trace == b.trace
        assert a.trace_csv().splitlines()[0] == "iteration,J,accepted"

    def test_params_validation(self):
        with pytest.raises(ValueError):
            IlsParams(max_iterations=0)
        with pytest.raises(ValueError):
            IlsParams(temperature=0)
        with pytest.raises(ValueError):
            greedy_insertion(default_world(), [Robot(1, (0, 0))], [])


class TestHelpInsertion:
    def setup_method(self):
        self.w, self.robots, tasks = random_fleet(11, n_robots=3, n_tasks=4)
        init = greedy_insertion(self.w, self.robots, tasks, 0)
        self.sched = ils(self.w, self.robots, init, IlsParams(max_iterations=50)).schedule
        self.help = PnpTask("help", (3, 5), (4, 5))

    def test_nearest_mode_pins_help(self):
        res = insert_help(self.w, self.robots, self.sched, self.help, "nearest", IlsParams(max_iterations=30))
        assert res.schedule.robot_of("help") == nearest_robot(self.w, self.robots, (3, 5)).id

    def test_full_no_worse_than_pinned(self):
        full = insert_help(self.w, self.robots, self.sched, self.help, "full", IlsParams(max_iterations=60))
        pinned = insert_help(self.w, self.robots, self.sched, self.help, "nearest", IlsParams(max_iterations=60))
        a = added_cost(self.w, self.robots, self.sched, full.schedule, "help")
        b = added_cost(self.w, self.robots, self.sched, pinned.schedule, "help")
        assert 0 <= a <= b

    def test_added_cost_of_unchanged_routes(self):
        tasks = dict(self.sched.tasks)
        tasks["help"] = self.help
        routes = {r: list(ids) for r, ids in self.sched.routes.items()}
        r0 = sorted(routes)[0]
        routes[r0] = routes[r0] + ["help"]
        after = Schedule(tasks, routes)
        model = CostModel(self.w, self.robots, tasks, "help")
        expect = model.raw_J(routes) - model.raw_J(self.sched.routes)
        assert added_cost(self.w, self.robots, self.sched, after, "help") == expect

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            insert_help(self.w, self.robots, self.sched, self.help, "psychic")
