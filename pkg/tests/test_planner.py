import io
import re

import numpy as np
import pytest
from helpers import brute_force, small_instance

from helpforum.planner import (
    Infeasible,
    PathProblem,
    SolverTimeout,
    UnsupportedFragment,
    build_updated,
    makespan,
    price_help,
    solve,
)
from helpforum.planner.milp import check_trajectory, decode, encode, read_solution, write_lp
from helpforum.planner.problem import trajectory_cost
from helpforum.stl import Atom, Eventually, Globally, Not
from helpforum.tasks import PnpTask, dwell_formula, pnp_formula, tasks_formula
from helpforum.world import GridWorld, default_world

scipy_opt = pytest.importorskip("scipy.optimize")


def detour_world():
    return GridWorld(6, 6, horizon=12)


class TestSearch:
    @pytest.mark.parametrize("seed", range(40))
    def test_matches_brute_force(self, seed):
        p = small_instance(seed)
        sol = solve(p)
        assert sol.objective == brute_force(p)
        assert trajectory_cost(p, sol.trajectory) == sol.objective

    @pytest.mark.parametrize("seed", range(12))
    def test_updated_problem_matches_brute_force(self, seed):
        import random

        rng = random.Random(1000 + seed)
        w = GridWorld(3, 3, horizon=8)
        cells = rng.sample(w.free, 4)
        task = pnp_formula(PnpTask("t", cells[0], cells[1]))
        help_f = dwell_formula(cells[2], 1)
        p = build_updated(w, cells[3], task, help_f)
        best = brute_force(p)
        if best is None:
            with pytest.raises(Infeasible):
                solve(p)
        else:
            assert solve(p).objective == best

    def test_detour_layout(self):
        w = detour_world()
        tau_h, tau_new, sol = price_help(w, (0, 0), Eventually(Atom("at_0_4")), dwell_formula((1, 1), 1))
        assert (tau_h, tau_new) == (2, 2)
        assert sol.trajectory[2] == (1, 1)

    def test_no_help_is_free(self):
        from helpforum.stl import TRUE

        assert price_help(detour_world(), (0, 0), Eventually(Atom("at_0_4")), TRUE)[:2] == (0, 0)

    def test_infeasible_within_horizon(self):
        w = GridWorld(10, 1, horizon=3)
        with pytest.raises(Infeasible):
            solve(PathProblem(w, (0, 0), ((Eventually(Atom("at_9_0")), 1.0),)))

    def test_hard_constraint_respected(self):
        w = GridWorld(3, 3, horizon=8)
        avoid = Globally(Not(Atom("at_1_0")))
        p = PathProblem(w, (0, 0), ((Eventually(Atom("at_2_0")), 1.0),), hard=avoid)
        sol = solve(p)
        assert (1, 0) not in sol.trajectory
        assert sol.times == (4,)

    def test_unbound_atom(self):
        with pytest.raises(UnsupportedFragment):
            PathProblem(GridWorld(2, 2), (0, 0), ((Eventually(Atom("kitchen")), 1.0),))

    def test_timeout_raises_with_incumbent_field(self):
        w = default_world()
        tasks = [PnpTask(f"t{i}", (0, i), (9, 9 - i)) for i in range(4)]
        p = PathProblem(w, (0, 0), ((tasks_formula(tasks), 1.0),))
        with pytest.raises(SolverTimeout) as e:
            solve(p, timeout=1e-4)
        assert hasattr(e.value, "incumbent")

    def test_deterministic(self):
        p = small_instance(7)
        assert solve(p).trajectory == solve(p).trajectory

    def test_export_only(self, tmp_path):
        path = tmp_path / "m.lp"
        assert solve(small_instance(3), backend="export-only", lp_path=path) is None
        assert path.read_text().startswith("\\")

    def test_makespan_ignores_distance(self):
        w = GridWorld(5, 1)
        assert makespan(w, (0, 0), Eventually(Atom("at_4_0"))) == 4


# ---------------------------------------------------------------------------
# MILP encoding


def _highs(model):
    from scipy.optimize import Bounds, LinearConstraint, milp

    c, A, rlb, rub, lb, ub = model.to_arrays()
    res = milp(c, constraints=LinearConstraint(A, rlb, rub), bounds=Bounds(lb, ub), integrality=np.ones_like(c))
    assert res.status == 0, res.message
    return res.fun, dict(zip(model.names, res.x))


def _milp_instances():
    out = [small_instance(s) for s in range(9) if small_instance(s).horizon <= 6][:5]
    out.append(build_updated(GridWorld(4, 4, horizon=6), (0, 0), Eventually(Atom("at_0_3")), dwell_formula((1, 1), 1)))
    return out


class TestMilp:
    @pytest.mark.parametrize("k", range(6))
    def test_optimum_equals_search(self, k):
        p = _milp_instances()[k]
        model = encode(p)
        value, x = _highs(model)
        sol = solve(p)
        assert value == pytest.approx(sol.objective, abs=1e-6)
        traj = decode(model, x)
        assert trajectory_cost(p, traj) == pytest.approx(sol.objective)

    @pytest.mark.parametrize("k", range(6))
    def test_substitution(self, k):
        p = _milp_instances()[k]
        model = encode(p)
        sol = solve(p)
        ok, value, bad = check_trajectory(model, p, sol.trajectory)
        assert ok, bad[:5]
        assert value == pytest.approx(sol.objective)

    def test_lp_round_trip(self):
        p = _milp_instances()[1]
        model = encode(p)
        buf = io.StringIO()
        write_lp(model, buf)
        text = buf.getvalue()
        assert all(len(line) <= 200 for line in text.splitlines())
        c, rows, fixed, binaries = parse_lp(text)
        assert set(binaries) | set(fixed) == set(model.names)
        assert c == {n: v for n, v in model.objective.items() if v}
        assert len(rows) == len(model.rows)
        for (coeffs, sense, rhs), (mc, ms, mr) in zip(rows, model.rows):
            assert coeffs == {n: v for n, v in mc.items() if v} and sense == ms and rhs == mr
        for n, lo, hi in zip(model.names, model.lb, model.ub):
            if lo == hi:
                assert fixed[n] == lo

    def test_variable_naming(self):
        model = encode(_milp_instances()[0])
        assert any(re.fullmatch(r"z_c\d+_t\d+", n) for n in model.names)
        assert any(re.fullmatch(r"d_\d+_\d+", n) for n in model.names)

    def test_read_solution(self):
        names = ["z_c0_t0", "d_0_3"]
        text = "# objective 4\nz_c0_t0 1\nd_0_3 0.9999999\nunrelated 7\n"
        assert read_solution(text, names) == {"z_c0_t0": 1.0, "d_0_3": 0.9999999}


def parse_lp(text):
    """Minimal reader for the LP subset the writer produces."""
    section = None
    buf = {"obj": [], "rows": [], "bounds": [], "bin": []}
    for line in text.splitlines():
        s = line.strip()
        if not s or s.startswith("\\"):
            continue
        head = s.lower()
        if head in ("minimize", "subject to", "bounds", "binaries", "end"):
            section = head
            continue
        if section == "minimize":
            buf["obj"].append(s)
        elif section == "subject to":
            if re.match(r"^r\d+:", s):
                buf["rows"].append(s)
            else:
                buf["rows"][-1] += " " + s
        elif section == "bounds":
            buf["bounds"].append(s)
        elif section == "binaries":
            buf["bin"].extend(s.split())

    def terms(tokens):
        out, sign, coef = {}, 1.0, None
        for tok in tokens:
            if tok in "+-":
                sign = -1.0 if tok == "-" else 1.0
            elif re.fullmatch(r"[-+]?\d+(\.\d*)?([eE][-+]?\d+)?", tok):
                coef = float(tok)
            else:
                out[tok] = out.get(tok, 0.0) + sign * (1.0 if coef is None else coef)
                sign, coef = 1.0, None
        return {k: v for k, v in out.items() if v}

    obj = " ".join(buf["obj"]).split(":", 1)[1].split()
    rows = []
    for r in buf["rows"]:
        toks = r.split(":", 1)[1].split()
        sense, rhs = toks[-2], float(toks[-1])
        rows.append((terms(toks[:-2]), sense, rhs))
    fixed = {}
    for b in buf["bounds"]:
        n, v = b.split("=")
        fixed[n.strip()] = float(v)
    return terms(obj), rows, fixed, buf["bin"]
