"""Mixed-integer encoding of a :class:`PathProblem` and LP-format export.

Variables (all binary):

* ``z_c{i}_t{t}``   robot occupies cell ``i`` (row-major index) at time ``t``
* ``w_c{i}_t{t}``   robot stays on cell ``i`` between ``t`` and ``t+1``
* ``d_{k}_{t}``     objective ``k`` has been satisfied by some prefix ending at or before ``t``
* ``a{j}_t{t}``     atom ``j`` holds at ``t`` (sum of occupancies of its region)
* ``l{j}_t{t}``     latch ``j`` holds at ``t``
* ``s{n}_t{t}[_L{L}]`` formula node ``n`` holds at ``t`` in the prefix ending at ``L``
  (the ``L`` suffix is dropped when the node cannot see past ``L``)
* ``p…`` / ``u…``  auxiliaries for bounded until

plus ``one``, fixed to 1, which carries the objective's constant term.

Distance is ``D = H - sum(w)`` and ``T_k = sum_t (1 - d_k_t)``.
"""

from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..stl import (
    And,
    Atom,
    Const,
    Eventually,
    Formula,
    Globally,
    Implies,
    Not,
    Or,
    Until,
    evaluate_batch,
    reach,
)
from ..world import MOVES, Trajectory
from .problem import PathProblem

Value = Union[str, bool]


@dataclass
class MilpModel:
    names: List[str] = field(default_factory=list)
    lb: List[float] = field(default_factory=list)
    ub: List[float] = field(default_factory=list)
    # each row: ({name: coeff}, sense in {"<=", ">=", "="}, rhs)
    rows: List[Tuple[Dict[str, float], str, float]] = field(default_factory=list)
    objective: Dict[str, float] = field(default_factory=dict)
    meaning: Dict[str, tuple] = field(default_factory=dict)
    horizon: int = 0
    n_cells: int = 0

    def __post_init__(self):
        self._index = {n: i for i, n in enumerate(self.names)}

    # -- construction --------------------------------------------------------

    def add_var(self, name: str, meaning: tuple, lb: float = 0.0, ub: float = 1.0) -> str:
        if name in self._index:
            raise ValueError(f"duplicate variable {name}")
        self._index[name] = len(self.names)
        self.names.append(name)
        self.lb.append(lb)
        self.ub.append(ub)
        self.meaning[name] = meaning
        return name

    def add_row(self, coeffs: Mapping[str, float], sense: str, rhs: float) -> None:
        merged: Dict[str, float] = {}
        for k, v in coeffs.items():
            merged[k] = merged.get(k, 0.0) + v
        self.rows.append(({k: v for k, v in merged.items() if v != 0}, sense, float(rhs)))

    def index(self, name: str) -> int:
        return self._index[name]

    def __contains__(self, name: str) -> bool:
        return name in self._index

    @property
    def n_vars(self) -> int:
        return len(self.names)

    # -- evaluation ----------------------------------------------------------

    def objective_value(self, x: Mapping[str, float]) -> float:
        return sum(c * x.get(n, 0.0) for n, c in self.objective.items())

    def violations(self, x: Mapping[str, float], tol: float = 1e-6) -> List[str]:
        out = []
        for n, lo, hi in zip(self.names, self.lb, self.ub):
            v = x.get(n, 0.0)
            if v < lo - tol or v > hi + tol:
                out.append(f"bound {n}={v}")
        for i, (coeffs, sense, rhs) in enumerate(self.rows):
            lhs = sum(c * x.get(n, 0.0) for n, c in coeffs.items())
            if (sense == "<=" and lhs > rhs + tol) or (sense == ">=" and lhs < rhs - tol) or (
                sense == "=" and abs(lhs - rhs) > tol
            ):
                out.append(f"row {i}: {lhs} {sense} {rhs}")
        return out

    def to_arrays(self):
        """``(c, A, row_lb, row_ub, lb, ub)`` as dense-friendly numpy arrays."""
        n = self.n_vars
        c = np.zeros(n)
        for name, v in self.objective.items():
            c[self._index[name]] = v
        A = np.zeros((len(self.rows), n))
        rlb = np.full(len(self.rows), -np.inf)
        rub = np.full(len(self.rows), np.inf)
        for i, (coeffs, sense, rhs) in enumerate(self.rows):
            for name, v in coeffs.items():
                A[i, self._index[name]] = v
            if sense in ("<=", "="):
                rub[i] = rhs
            if sense in (">=", "="):
                rlb[i] = rhs
        return c, A, rlb, rub, np.array(self.lb), np.array(self.ub)


class _Encoder:
    def __init__(self, problem: PathProblem):
        self.p = problem
        self.w = problem.world
        self.H = problem.horizon
        self.m = MilpModel(horizon=self.H, n_cells=self.w.width * self.w.height)
        self.node_ids: Dict[Formula, int] = {}
        self.memo: Dict[tuple, Value] = {}
        self.atom_ids = {a: j for j, a in enumerate(sorted(problem.atoms))}

    def z(self, c, t) -> str:
        return f"z_c{self.w.cell_index(c)}_t{t}"

    def fresh(self, name, meaning) -> str:
        return self.m.add_var(name, meaning)

    # -- boolean gadgets -----------------------------------------------------

    def gate_and(self, name, meaning, xs: Sequence[Value]) -> Value:
        if any(x is False for x in xs):
            return False
        xs = [x for x in xs if x is not True]
        if not xs:
            return True
        if len(xs) == 1:
            return xs[0]
        v = self.fresh(name, meaning)
        for x in xs:
            self.m.add_row({v: 1, x: -1}, "<=", 0)
        row = {v: 1}
        for x in xs:
            row[x] = row.get(x, 0) - 1
        self.m.add_row(row, ">=", 1 - len(xs))
        return v

    def gate_or(self, name, meaning, xs: Sequence[Value]) -> Value:
        if any(x is True for x in xs):
            return True
        xs = [x for x in xs if x is not False]
        if not xs:
            return False
        if len(xs) == 1:
            return xs[0]
        v = self.fresh(name, meaning)
        for x in xs:
            self.m.add_row({v: 1, x: -1}, ">=", 0)
        row = {v: 1}
        for x in xs:
            row[x] = row.get(x, 0) - 1
        self.m.add_row(row, "<=", 0)
        return v

    def gate_not(self, name, meaning, x: Value) -> Value:
        if isinstance(x, bool):
            return not x
        v = self.fresh(name, meaning)
        self.m.add_row({v: 1, x: 1}, "=", 1)
        return v

    # -- grid ------------------------------------------------------------------

    def encode_grid(self):
        w, H, m = self.w, self.H, self.m
        m.add_var("one", ("one",), 1.0, 1.0)
        for t in range(H + 1):
            for c in w.cells:
                m.add_var(self.z(c, t), ("z", c, t))
        for t in range(H + 1):
            m.add_row({self.z(c, t): 1 for c in w.cells}, "=", 1)
            for c in w.obstacles:
                m.add_row({self.z(c, t): 1}, "=", 0)
        m.add_row({self.z(self.p.start, 0): 1}, "=", 1)
        for t in range(H):
            for c in w.cells:
                row = {self.z(c, t + 1): 1}
                for dx, dy in MOVES:
                    n = (c[0] + dx, c[1] + dy)
                    if w.in_bounds(n):
                        row[self.z(n, t)] = row.get(self.z(n, t), 0) - 1
                m.add_row(row, "<=", 0)
        # stays: w = z_t AND z_{t+1}
        for t in range(H):
            for c in w.free:
                s = m.add_var(f"w_c{w.cell_index(c)}_t{t}", ("w", c, t))
                m.add_row({s: 1, self.z(c, t): -1}, "<=", 0)
                m.add_row({s: 1, self.z(c, t + 1): -1}, "<=", 0)
                m.add_row({s: 1, self.z(c, t): -1, self.z(c, t + 1): -1}, ">=", -1)

    # -- atoms -----------------------------------------------------------------

    def atom(self, name: str, t: int) -> Value:
        key = ("atom", name, t)
        if key in self.memo:
            return self.memo[key]
        j = self.atom_ids.get(name)
        if name in self.p.latches:
            latch = self.p.latches[name]
            inside = self._region_sum(f"a{j}r_t{t}", ("region", latch.region, t), latch.region, t)
            after = True if latch.after is None else self.atom(latch.after, t)
            arrive = self.gate_and(f"a{j}e_t{t}", ("latch_enter", name, t), [inside, after])
            prev = False if t == 0 else self.atom(name, t - 1)
            v = self.gate_or(f"l{j}_t{t}", ("atom", name, t), [prev, arrive])
        else:
            v = self._region_sum(f"a{j}_t{t}", ("atom", name, t), self.p.regions[name], t)
        self.memo[key] = v
        return v

    def _region_sum(self, name, meaning, region, t) -> Value:
        cells = [c for c in region if self.w.is_free(c)]
        if not cells:
            return False
        if len(cells) == 1:
            return self.z(cells[0], t)
        v = self.fresh(name, meaning)
        row = {v: 1}
        for c in cells:
            row[self.z(c, t)] = -1
        self.m.add_row(row, "=", 0)
        return v

    # -- formulas --------------------------------------------------------------

    def nid(self, f: Formula) -> int:
        if f not in self.node_ids:
            self.node_ids[f] = len(self.node_ids)
        return self.node_ids[f]

    def sat(self, f: Formula, t: int, L: int) -> Value:
        """Value of ``f`` at ``t`` on the prefix ending at ``L``."""
        shared = t + reach(f) <= L
        key = (f, t, None if shared else L)
        if key in self.memo:
            return self.memo[key]
        n = self.nid(f)
        tag = f"s{n}_t{t}" if shared else f"s{n}_t{t}_L{L}"
        meaning = ("sat", f, t, self.H if shared else L)
        if isinstance(f, Const):
            v = f.value
        elif isinstance(f, Atom):
            v = self.atom(f.name, t)
        elif isinstance(f, Not):
            v = self.gate_not(tag, meaning, self.sat(f.child, t, L))
        elif isinstance(f, And):
            v = self.gate_and(tag, meaning, [self.sat(c, t, L) for c in f.args])
        elif isinstance(f, Or):
            v = self.gate_or(tag, meaning, [self.sat(c, t, L) for c in f.args])
        elif isinstance(f, Implies):
            left = self.gate_not(tag + "n", ("sat", Not(f.left), t, meaning[3]), self.sat(f.left, t, L))
            v = self.gate_or(tag, meaning, [left, self.sat(f.right, t, L)])
        elif isinstance(f, (Eventually, Globally)):
            ev = isinstance(f, Eventually)
            if f.interval is None:
                # recursive form: F(t) = c(t) | F(t+1), empty past L
                here = self.sat(f.child, t, L)
                nxt = (not ev) if t + 1 > L else self.sat(f, t + 1, L)
                gate = self.gate_or if ev else self.gate_and
                v = gate(tag, meaning, [here, nxt])
            else:
                a, b = f.interval
                xs = [self.sat(f.child, k, L) for k in range(t + a, min(t + b, L) + 1)]
                v = (self.gate_or if ev else self.gate_and)(tag, meaning, xs)
        elif isinstance(f, Until):
            v = self._until(f, t, L, tag, meaning)
        else:
            raise TypeError(f"unknown node {f!r}")
        self.memo[key] = v
        return v

    def _until(self, f: Until, t, L, tag, meaning) -> Value:
        if f.interval is None:
            right = self.sat(f.right, t, L)
            if t + 1 > L:
                return right
            cont = self.gate_and(tag + "c", ("until_step", f, t, meaning[3]), [self.sat(f.left, t, L), self.sat(f, t + 1, L)])
            return self.gate_or(tag, meaning, [right, cont])
        a, b = f.interval
        hits = []
        prefix: Value = True  # left holds on [t, k)
        for k in range(t, min(t + b, L) + 1):
            if k >= t + a:
                hits.append(self.gate_and(f"{tag}u{k}", ("until_hit", f, t, k, meaning[3]), [prefix, self.sat(f.right, k, L)]))
            prefix = self.gate_and(f"{tag}p{k}", ("until_left", f, t, k, meaning[3]), [prefix, self.sat(f.left, k, L)])
            if prefix is False:
                break
        return self.gate_or(tag, meaning, hits)

    # -- objectives -------------------------------------------------------------

    def encode(self) -> MilpModel:
        H, m = self.H, self.m
        self.encode_grid()
        obj: Dict[str, float] = {}
        const = 0.0
        dw = self.p.distance_weight
        if dw:
            const += dw * H
            for t in range(H):
                for c in self.w.free:
                    obj[f"w_c{self.w.cell_index(c)}_t{t}"] = -dw
        for k, (f, weight) in enumerate(self.p.objectives):
            prev: Optional[str] = None
            for t in range(H + 1):
                d = m.add_var(f"d_{k}_{t}", ("done", k, t))
                s = self.sat(f, 0, t)
                row = {d: 1}
                if prev is not None:
                    row[prev] = -1
                    m.add_row({prev: 1, d: -1}, "<=", 0)
                if s is True:
                    pass
                elif s is False:
                    m.add_row(row, "<=", 0)
                else:
                    row[s] = row.get(s, 0) - 1
                    m.add_row(row, "<=", 0)
                if weight:
                    const += weight
                    obj[d] = obj.get(d, 0) - weight
                prev = d
            m.add_row({prev: 1}, "=", 1)
        hard = self.sat(self.p.hard, 0, H)
        if hard is False:
            m.add_row({"one": 1}, "<=", 0)
        elif hard is not True:
            m.add_row({hard: 1}, "=", 1)
        if const:
            obj["one"] = const
        m.objective = obj
        return m


def encode(problem: PathProblem) -> MilpModel:
    """Binary program whose optimum equals the planner's optimum."""
    return _Encoder(problem).encode()


# ---------------------------------------------------------------------------
# substitution


def assignment(model: MilpModel, problem: PathProblem, traj: Sequence) -> Dict[str, float]:
    """Every variable's value implied by a trajectory (padded to the horizon)."""
    H = model.horizon
    full = Trajectory(traj).padded(H + 1)
    trace = problem.lift(full)
    atoms = sorted(trace.atoms)
    idx = {a: i for i, a in enumerate(atoms)}
    sig = np.array([[a in s for a in atoms] for s in trace.steps], dtype=bool)[None]
    cache: Dict[tuple, np.ndarray] = {}

    def value(f: Formula, t: int, L: int) -> bool:
        key = (f, L)
        if key not in cache:
            cache[key] = evaluate_batch(sig[:, : L + 1], idx, f)[0]
        return bool(cache[key][t])

    times = []
    for f, _ in problem.objectives:
        hit = None
        for L in range(H + 1):
            if value(f, 0, L):
                hit = L
                break
        times.append(hit)

    def left_prefix(f, t, k, L):
        return all(value(f.left, j, L) for j in range(t, k + 1))

    x: Dict[str, float] = {}
    for name in model.names:
        mean = model.meaning[name]
        kind = mean[0]
        if kind == "one":
            v = True
        elif kind == "z":
            v = full[mean[2]] == mean[1]
        elif kind == "w":
            c, t = mean[1], mean[2]
            v = full[t] == c and full[t + 1] == c
        elif kind == "done":
            T = times[mean[1]]
            v = T is not None and mean[2] >= T
        elif kind == "atom":
            v = mean[1] in trace.steps[mean[2]]
        elif kind == "region":
            v = full[mean[2]] in mean[1]
        elif kind == "latch_enter":
            name_, t = mean[1], mean[2]
            latch = problem.latches[name_]
            v = full[t] in latch.region and (latch.after is None or latch.after in trace.steps[t])
        elif kind == "sat":
            v = value(mean[1], mean[2], mean[3])
        elif kind == "until_step":
            f, t, L = mean[1], mean[2], mean[3]
            v = value(f.left, t, L) and value(f, t + 1, L)
        elif kind == "until_left":
            f, t, k, L = mean[1:]
            v = left_prefix(f, t, k, L)
        elif kind == "until_hit":
            f, t, k, L = mean[1:]
            v = (k == t or left_prefix(f, t, k - 1, L)) and value(f.right, k, L)
        else:  # pragma: no cover
            raise ValueError(f"unknown variable kind {kind}")
        x[name] = 1.0 if v else 0.0
    return x


def check_trajectory(model: MilpModel, problem: PathProblem, traj) -> Tuple[bool, float, List[str]]:
    """Substitute a trajectory: (feasible, objective value, violated rows)."""
    x = assignment(model, problem, traj)
    bad = model.violations(x)
    return not bad, model.objective_value(x), bad


def decode(model: MilpModel, x: Mapping[str, float]) -> Trajectory:
    """Trajectory read from occupancy variables."""
    cells = []
    for t in range(model.horizon + 1):
        best = None
        for name, mean in model.meaning.items():
            if mean[0] == "z" and mean[2] == t and x.get(name, 0.0) > 0.5:
                best = mean[1]
        if best is None:
            raise ValueError(f"no occupied cell at t={t}")
        cells.append(best)
    return Trajectory(cells)


# ---------------------------------------------------------------------------
# LP files


def _fmt(v: float) -> str:
    return repr(int(v)) if float(v).is_integer() else repr(float(v))


def _terms(coeffs: Mapping[str, float]) -> List[str]:
    out = []
    for i, (n, c) in enumerate(coeffs.items()):
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        body = n if mag == 1 else f"{_fmt(mag)} {n}"
        out.append(f"{sign} {body}" if i or sign == "-" else body)
    return out


def _wrap(prefix: str, tokens: Sequence[str], width: int = 200) -> List[str]:
    lines, cur = [], prefix
    for tok in tokens:
        if len(cur) + len(tok) + 1 > width:
            lines.append(cur)
            cur = "   "
        cur += " " + tok
    lines.append(cur)
    return lines


def write_lp(model: MilpModel, path_or_file) -> None:
    """Write the model in CPLEX LP format."""
    buf = io.StringIO()
    buf.write(f"\\ path problem: {model.n_vars} binaries, {len(model.rows)} rows, horizon {model.horizon}\n")
    buf.write("Minimize\n")
    obj = _terms(model.objective) or ["0 one"]
    buf.write("\n".join(_wrap(" obj:", obj)) + "\n")
    buf.write("Subject To\n")
    for i, (coeffs, sense, rhs) in enumerate(model.rows):
        terms = _terms(coeffs) or ["0 one"]
        buf.write("\n".join(_wrap(f" r{i}:", terms + [sense, _fmt(rhs)])) + "\n")
    buf.write("Bounds\n")
    for n, lo, hi in zip(model.names, model.lb, model.ub):
        if lo == hi:
            buf.write(f" {n} = {_fmt(lo)}\n")
    buf.write("Binaries\n")
    names = [n for n, lo, hi in zip(model.names, model.lb, model.ub) if lo != hi]
    buf.write("\n".join(_wrap("", names)) + "\n")
    buf.write("End\n")
    text = buf.getvalue()
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w", encoding="utf-8") as fh:
            fh.write(text)


_NUM = re.compile(r"^[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?$")


def read_solution(path_or_text, names: Iterable[str]) -> Dict[str, float]:
    """Variable values from a solver's text solution file.

    Any line holding a known variable name followed by a number is read, which
    covers the usual ``name value`` and ``index name value ...`` layouts.
    """
    known = set(names)
    text = path_or_text
    if not ("\n" in text or " " in text):
        with open(path_or_text, encoding="utf-8") as fh:
            text = fh.read()
    out: Dict[str, float] = {}
    for line in text.splitlines():
        toks = line.replace("=", " ").split()
        for i, tok in enumerate(toks[:-1]):
            if tok in known and _NUM.match(toks[i + 1]):
                v = float(toks[i + 1])
                if math.isfinite(v):
                    out[tok] = v
                break
    return out
