import pickle

import pytest

from helpforum.stl import Atom, Eventually, satisfies
from helpforum.stl.semantics import time_to_first_satisfaction
from helpforum.tasks import (
    HelpTask,
    PnpTask,
    Schedule,
    act,
    dwell_formula,
    help_formula,
    help_pnp_task,
    makespan,
    pnp_formula,
    sequence_latches,
    sequenced,
    tasks_formula,
)
from helpforum.world import (
    GridWorld,
    Latch,
    Robot,
    Trajectory,
    Unreachable,
    at_atom,
    check_roster,
    default_world,
    latch_order,
    lift,
    manhattan_length,
    nearest_free_cell,
    parse_at_atom,
    shortest_path_dist,
)


def line(*xs, y=0):
    return [(x, y) for x in xs]


class TestWorld:
    def test_default_layout(self):
        w = default_world()
        assert (w.width, w.height, w.horizon) == (10, 10, 30)
        assert (2, 3) in w.obstacles and (2, 5) not in w.obstacles and (2, 0) not in w.obstacles
        assert len(w.free) == 100 - 3 * 7

    def test_distances_route_around_shelves(self):
        w = default_world()
        assert shortest_path_dist(w, (1, 2), (3, 2)) == 2 + 2 + 2
        assert shortest_path_dist(w, (0, 0), (0, 0)) == 0

    def test_unreachable(self):
        w = GridWorld(3, 1, frozenset({(1, 0)}))
        with pytest.raises(Unreachable):
            shortest_path_dist(w, (0, 0), (2, 0))
        with pytest.raises(ValueError):
            shortest_path_dist(w, (0, 0), (1, 0))

    def test_nearest_free_cell_row_major_ties(self):
        w = GridWorld(3, 3)
        # (1,0), (0,1), (2,1), (1,2) are all at distance 1; row-major picks (1,0)
        assert nearest_free_cell(w, (1, 1), exclude=[(1, 1)]) == (1, 0)
        assert nearest_free_cell(w, (1, 1), exclude=[(1, 1), (1, 0)]) == (0, 1)

    def test_serialization_and_pickle(self):
        w = GridWorld(4, 3, frozenset({(1, 1)}), 9, {"dock": frozenset({(0, 0), (3, 2)})})
        again = GridWorld.from_dict(w.to_dict())
        assert again.to_dict() == w.to_dict()
        assert pickle.loads(pickle.dumps(w)).to_dict() == w.to_dict()
        assert again.region_of("dock") == {(0, 0), (3, 2)}
        assert again.region_of("obstacle") == {(1, 1)}
        with pytest.raises(KeyError):
            again.region_of("nowhere")

    def test_invalid_worlds(self):
        with pytest.raises(ValueError):
            GridWorld(0, 3)
        with pytest.raises(ValueError):
            GridWorld(1, 1, frozenset({(0, 0)}))
        with pytest.raises(ValueError):
            GridWorld(2, 2, frozenset({(5, 5)}))

    def test_roster(self):
        w = default_world()
        check_roster(w, [Robot(1, (0, 0)), Robot(2, (1, 0))])
        with pytest.raises(ValueError):
            check_roster(w, [Robot(1, (0, 0)), Robot(1, (1, 0))])
        with pytest.raises(ValueError):
            check_roster(w, [Robot(1, (2, 2))])

    def test_trajectory(self):
        t = Trajectory([(0, 0), (0, 0), (1, 0)])
        assert manhattan_length(t) == 1
        assert t.padded(5)[-1] == (1, 0) and len(t.padded(5)) == 5
        with pytest.raises(ValueError):
            Trajectory([(0, 0), (1, 1)])
        with pytest.raises(ValueError):
            Trajectory([(0, 0), (1, 0)], GridWorld(2, 1, frozenset({(1, 0)})))

    def test_at_atoms(self):
        assert at_atom((3, 12)) == "at_3_12"
        assert parse_at_atom("at_3_12") == (3, 12)
        assert parse_at_atom("aisle_A") is None


class TestLatches:
    def test_lift_latch_waits_for_predecessor(self):
        b = {"s1": Latch([(2, 0)]), "s2": Latch([(1, 0)], "s1")}
        tr = lift(line(0, 1, 2, 1), b)
        assert tr.signal("s1") == [False, False, True, True]
        # the first pass over (1,0) happens before s1 and does not count
        assert tr.signal("s2") == [False, False, False, True]

    def test_same_step_chain(self):
        b = {"s2": Latch([(0, 0)], "s1"), "s1": Latch([(0, 0)])}
        assert latch_order(b) == ["s1", "s2"]
        assert lift(line(0), b).steps[0] == {"s1", "s2"}

    def test_cycle(self):
        with pytest.raises(ValueError):
            latch_order({"a": Latch([(0, 0)], "b"), "b": Latch([(0, 0)], "a")})

    def test_sequence_on_latches_is_satisfiable(self):
        f = sequenced(["s1", "s2", "s3"])
        b = sequence_latches(["s1", "s2", "s3"], [[(0, 0)], [(2, 0)], [(0, 0)]])
        assert satisfies(lift(line(0, 1, 2, 1, 0), b), f)
        assert not satisfies(lift(line(0, 1, 2), b), f)


class TestTaskFormulas:
    def test_act_dwell(self):
        assert act((1, 1), 0) == Atom("at_1_1")
        f = Eventually(act((1, 0), 2))
        assert satisfies(lift(line(0, 1, 1, 1), atoms=f.atoms()), f)
        assert not satisfies(lift(line(0, 1, 1, 0), atoms=f.atoms()), f)

    def test_pnp_ordering(self):
        task = PnpTask("t", (0, 0), (2, 0))
        f = pnp_formula(task)
        good = line(0, 0, 1, 2, 2)
        assert time_to_first_satisfaction(lift(good, atoms=f.atoms()), f) == 4
        # dropping before picking does not count
        bad = line(2, 2, 1, 0, 0)
        assert not satisfies(lift(bad, atoms=f.atoms()), f)

    def test_pnp_carrying_blocks_other_actions(self):
        t1 = PnpTask("a", (0, 0), (3, 0))
        t2 = PnpTask("b", (1, 0), (2, 0))
        f = pnp_formula(t1, [t2])
        # dwelling on t2's pick cell while carrying t1 violates the formula
        traj = line(0, 0, 1, 1, 2, 3, 3)
        assert not satisfies(lift(traj, atoms=f.atoms()), f)
        traj = line(0, 0, 1, 2, 3, 3)
        assert satisfies(lift(traj, atoms=f.atoms()), f)

    def test_tasks_formula_empty(self):
        from helpforum.stl import TRUE

        assert tasks_formula([]) == TRUE

    def test_invalid_tasks(self):
        with pytest.raises(ValueError):
            PnpTask("x", (0, 0), (0, 0))
        with pytest.raises(ValueError):
            HelpTask((0, 0), style="teleport")
        with pytest.raises(ValueError):
            dwell_formula((0, 0), 0)

    def test_help_tasks(self):
        w = GridWorld(3, 3)
        job = help_pnp_task(HelpTask((1, 1)), w, avoid=[(1, 0)])
        assert (job.pick, job.place) == ((1, 1), (0, 1))
        assert help_formula(HelpTask((1, 1), 2, "dwell"), w) == dwell_formula((1, 1), 2)

    def test_makespan(self):
        w = GridWorld(5, 1)
        # reach pick, dwell, carry two cells, dwell
        assert makespan(w, (0, 0), pnp_formula(PnpTask("t", (1, 0), (3, 0)))) == 1 + 1 + 2 + 1
        assert makespan(GridWorld(3, 1, frozenset({(1, 0)})), (0, 0), Eventually(Atom("at_2_0"))) is None


class TestSchedule:
    def test_partition(self):
        tasks = {"a": PnpTask("a", (0, 0), (1, 0)), "b": PnpTask("b", (0, 1), (1, 1))}
        s = Schedule(tasks, {1: ["b"], 2: ["a"]})
        assert s.robot_of("a") == 2 and [t.id for t in s.of(1)] == ["b"] and s.of(9) == []
        assert Schedule.from_dict(s.to_dict(), tasks).routes == s.routes
        with pytest.raises(ValueError):
            Schedule(tasks, {1: ["a", "b"], 2: ["a"]})
        with pytest.raises(ValueError):
            Schedule(tasks, {1: ["a"]})
        with pytest.raises(KeyError):
            s.robot_of("zzz")
