"""Help-request forum: messages, broadcast bus and helper selection.

One round is synchronous: the requester broadcasts a request, every eligible
helper answers with an offer (or a reasoned decline), and the requester
accepts the cheapest offer by ``tau_h + tau_new``.  Only scalar costs and
free text cross the bus; helpers' schedules never do.
"""

from __future__ import annotations

import json
import re
import time
from concurrent.futures import Executor
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .planner import Infeasible, PathSolution, SolverTimeout, makespan, price_help
from .tasks import HelpTask, PnpTask, Schedule, help_formula, help_pnp_task, tasks_formula
from .world import Cell, GridWorld, Robot, Unreachable, shortest_path_dist


class ProtocolError(Exception):
    pass


class NoLocation(ProtocolError):
    pass


class AllDeclined(ProtocolError):
    pass


# keyword in a conflict description -> capability keyword needed to fix it
REQUIRED_CAPABILITY = {
    "pallet": "lift",
    "crate": "lift",
    "box": "lift",
    "shelf": "lift",
    "door": "open",
    "spill": "clean",
}


@dataclass(frozen=True)
class Conflict:
    description: str
    location: Cell
    duration: int = 1

    def __post_init__(self):
        object.__setattr__(self, "location", tuple(self.location))
        if self.duration < 1:
            raise ValueError("conflict duration must be >= 1")


@dataclass(frozen=True)
class HelpRequest:
    requester: int
    conflict: Conflict
    capabilities: str
    resolution: str
    text: str

    def __post_init__(self):
        if not self.capabilities.strip():
            raise ValueError("requester capabilities must be stated")


@dataclass(frozen=True)
class Offer:
    helper: int
    tau_h: Optional[int] = None
    tau_new: Optional[int] = None
    capabilities: str = ""
    decline_reason: Optional[str] = None

    def __post_init__(self):
        if self.decline_reason is None:
            if self.tau_h is None or self.tau_new is None:
                raise ValueError("an offer needs both tau values")
            if self.tau_h < 0 or self.tau_new < 0:
                raise ValueError("tau values must be non-negative")
        elif self.tau_h is not None or self.tau_new is not None:
            raise ValueError("a declined offer carries no tau values")

    @property
    def declined(self) -> bool:
        return self.decline_reason is not None

    @property
    def cost(self) -> Optional[int]:
        return None if self.declined else self.tau_h + self.tau_new

    @property
    def text(self) -> str:
        if self.declined:
            return f"I cannot help: {self.decline_reason}."
        return (
            f"I can help you in {self.tau_h} minutes, but it will add {self.tau_new} "
            "minutes to my overall makespan."
        )


@dataclass(frozen=True)
class Confirmation:
    requester: int
    helper: int
    verdict: str

    def __post_init__(self):
        if self.verdict not in ("accept", "reject"):
            raise ValueError("verdict is accept or reject")


_NEGATION = re.compile(r"^\s*(no|not|cannot|can't|can not|without|unable to)\b", re.I)


def has_capability(capabilities: str, capability: str) -> bool:
    """Does some clause of the capability text grant ``capability``?

    Clauses are separated by ``;`` or ``,``; negated ones ("no lift") grant
    nothing.
    """
    for clause in re.split(r"[;,]", capabilities):
        if capability in clause.lower() and not _NEGATION.match(clause):
            return True
    return False


def needs_help(conflict: Conflict, capabilities: str, policy: Optional[Callable[[Conflict, str], bool]] = None) -> bool:
    """Whether the requester lacks a capability the conflict calls for.

    ``policy`` replaces the keyword rule (for instance with a language-model
    backed judgement).
    """
    if policy is not None:
        return bool(policy(conflict, capabilities))
    if not capabilities.strip():
        return True
    desc = conflict.description.lower()
    needed = {cap for kw, cap in REQUIRED_CAPABILITY.items() if kw in desc}
    return any(not has_capability(capabilities, cap) for cap in needed)


def _obj(description: str) -> str:
    desc = description.lower()
    for kw in REQUIRED_CAPABILITY:
        if kw in desc:
            return kw
    return "obstruction"


def format_request(conflict: Conflict, capabilities: str, requester: int = 0, style: str = "pnp") -> HelpRequest:
    """Fill the request template; location and capabilities are always stated."""
    x, y = conflict.location
    scene = conflict.description.strip().rstrip(".") or "Something is blocking my path"
    if style == "dwell":
        resolution = f"Wait at ({x},{y}) for {conflict.duration} steps."
        need = "hold position at the site"
    else:
        obj = _obj(conflict.description)
        resolution = f"Pick up {obj} at ({x},{y}) and drop it off at the closest free drop zone."
        need = f"move the {obj}"
    caps = capabilities.strip() or "no stated capabilities"
    text = (
        f"{scene} at location ({x}, {y}). Assistance is required to {need}. {resolution} "
        f"My capabilities: {caps}."
    )
    return HelpRequest(requester, conflict, caps, resolution, text)


_PAIR = re.compile(r"\(\s*(-?\d+)\s*,\s*(-?\d+)\s*\)")
_DURATION = re.compile(r"for\s+(\d+)\s+(?:time\s*)?(?:steps?|timesteps?|minutes?)", re.I)
_DWELL_WORDS = ("wait at", "stay at", "dwell", "hold position", "wait for")


def parse_request(text: str) -> Tuple[Conflict, str]:
    """Recover the conflict and a resolution hint (``"pnp"`` or ``"dwell"``)."""
    m = _PAIR.search(text)
    if m is None:
        raise NoLocation("request text contains no (x, y) location")
    loc = (int(m.group(1)), int(m.group(2)))
    low = text.lower()
    hint = "dwell" if any(w in low for w in _DWELL_WORDS) else "pnp"
    d = _DURATION.search(text)
    duration = int(d.group(1)) if d else 1
    lead = re.match(r"^(.*?)\s+at location\s*\(", text, re.S)
    scene = lead.group(1).strip() if lead else text.strip()
    return Conflict(scene, loc, max(1, duration)), hint


class MessageBus:
    """Append-only broadcast log; every message is a plain JSON object."""

    def __init__(self):
        self._log: List[dict] = []

    def send(self, kind: str, sender: int, to, body: Mapping) -> dict:
        msg = {"type": kind, "from": sender, "to": to, "body": dict(body)}
        json.dumps(msg)  # must be serializable
        self._log.append(msg)
        return msg

    @property
    def messages(self) -> List[dict]:
        return [dict(m) for m in self._log]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(m, sort_keys=True) + "\n" for m in self._log)

    def dump(self, path) -> None:
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())


@dataclass
class Helper:
    """A helper's private view: its robot and its own assigned tasks."""

    robot: Robot
    tasks: List[PnpTask] = field(default_factory=list)

    def formula(self, extra_others: Iterable[PnpTask] = ()):
        return tasks_formula(self.tasks, extra_others)


@dataclass
class RoundResult:
    confirmation: Confirmation
    solution: Optional[PathSolution]
    offers: List[Offer]
    help_task: Optional[PnpTask]
    bus: MessageBus
    stats: Dict[int, BidStats] = field(default_factory=dict)


def resolve_help(world: GridWorld, conflict: Conflict, hint: str, reserved: Iterable[Cell] = ()) -> Tuple[HelpTask, Optional[PnpTask]]:
    """Help task for a conflict; the PNP job (if any) drops at the nearest free cell."""
    help = HelpTask(conflict.location, conflict.duration, hint)
    job = help_pnp_task(help, world, reserved) if hint == "pnp" else None
    return help, job


@dataclass(frozen=True)
class BidStats:
    wall_time: float
    timed_out: bool = False


def make_offer(
    world: GridWorld,
    helper: Helper,
    request_text: str,
    required: Optional[str] = None,
    reserved: Iterable[Cell] = (),
    timeout: Optional[float] = None,
    original_makespan: Optional[int] = None,
) -> Tuple[Offer, Optional[PathSolution], BidStats]:
    """Price a broadcast request from the helper's own schedule."""
    caps = helper.robot.capabilities
    rid = helper.robot.id
    t0 = time.perf_counter()
    if required and not has_capability(caps, required):
        offer = Offer(rid, capabilities=caps, decline_reason=f"I lack the {required} capability")
        return offer, None, BidStats(0.0)
    conflict, hint = parse_request(request_text)
    kw = {} if timeout is None else {"timeout": timeout}
    try:
        help, job = resolve_help(world, conflict, hint, reserved)
        extra = [job] if job is not None else []
        phi_h = help_formula(help, world, others=helper.tasks, avoid=reserved)
        m = original_makespan
        if m is None:
            m = makespan(world, helper.robot.start, helper.formula(), **kw)
        tau_h, tau_new, sol = price_help(
            world, helper.robot.start, helper.formula(extra), phi_h, original_makespan=m, **kw
        )
    except (Infeasible, Unreachable):
        offer = Offer(rid, capabilities=caps, decline_reason="the help task does not fit within my horizon")
        return offer, None, BidStats(time.perf_counter() - t0)
    except SolverTimeout:
        offer = Offer(rid, capabilities=caps, decline_reason="planning timed out")
        return offer, None, BidStats(time.perf_counter() - t0, True)
    return Offer(rid, tau_h, tau_new, caps), sol, BidStats(time.perf_counter() - t0)


def select(offers: Sequence[Offer]) -> Offer:
    """Cheapest non-declined offer; ties go to the smaller helper id."""
    live = [o for o in offers if not o.declined]
    if not live:
        raise AllDeclined("every helper declined")
    return min(live, key=lambda o: (o.cost, o.helper))


def run_round(
    world: GridWorld,
    schedule: Schedule,
    requester: Robot,
    conflict: Conflict,
    helpers: Sequence[Robot],
    style: str = "pnp",
    reserved: Optional[Iterable[Cell]] = None,
    timeout: Optional[float] = None,
    makespans: Optional[Dict[int, int]] = None,
    executor: Optional[Executor] = None,
    bus: Optional[MessageBus] = None,
) -> RoundResult:
    """Broadcast, collect offers, accept the minimum-impact helper.

    ``reserved`` cells (default: all task cells) are never used as drop
    zones.  ``makespans`` caches each helper's makespan without help.
    """
    if not helpers:
        raise ValueError("need at least one eligible helper")
    bus = bus or MessageBus()
    if reserved is None:
        reserved = {c for t in schedule.tasks.values() for c in t.cells}
    reserved = set(reserved)
    request = format_request(conflict, requester.capabilities, requester.id, style)
    bus.send("request", requester.id, "broadcast", {"text": request.text})
    required = next((cap for kw, cap in REQUIRED_CAPABILITY.items() if kw in conflict.description.lower()), None)

    def bid(robot: Robot):
        helper = Helper(robot, schedule.of(robot.id))
        cached = None if makespans is None else makespans.get(robot.id)
        return make_offer(world, helper, request.text, required, reserved, timeout, cached)

    results = list(executor.map(bid, helpers)) if executor is not None else [bid(h) for h in helpers]
    offers = [o for o, _, _ in results]
    stats = {o.helper: st for o, _, st in results}
    for o in offers:
        body = {"text": o.text, "capabilities": o.capabilities}
        if o.declined:
            body["decline"] = o.decline_reason
        else:
            body.update(tau_h=o.tau_h, tau_new=o.tau_new)
        bus.send("offer", o.helper, requester.id, body)
    try:
        best = select(offers)
    except AllDeclined:
        for o in offers:
            bus.send("confirmation", requester.id, o.helper, {"verdict": "reject"})
        raise
    for o in offers:
        verdict = "accept" if o.helper == best.helper else "reject"
        bus.send("confirmation", requester.id, o.helper, {"verdict": verdict})
    sol = {o.helper: s for o, s, _ in results}[best.helper]
    conflict_, hint = parse_request(request.text)
    _, job = resolve_help(world, conflict_, hint, reserved)
    return RoundResult(Confirmation(requester.id, best.helper, "accept"), sol, offers, job, bus, stats)


def nearest_helper(world: GridWorld, site: Cell, helpers: Sequence[Robot]) -> Robot:
    """Helper whose start is closest to the site by path length (smaller id on ties)."""
    best = None
    for r in helpers:
        try:
            d = shortest_path_dist(world, r.start, site)
        except Unreachable:
            continue
        if best is None or (d, r.id) < best[0]:
            best = ((d, r.id), r)
    if best is None:
        raise AllDeclined("no helper can reach the site")
    return best[1]


def message_log(bus: MessageBus) -> List[dict]:
    return bus.messages


def offer_from_message(msg: Mapping) -> Offer:
    body = msg["body"]
    if "decline" in body:
        return Offer(msg["from"], capabilities=body.get("capabilities", ""), decline_reason=body["decline"])
    return Offer(msg["from"], body["tau_h"], body["tau_new"], body.get("capabilities", ""))


def conflict_dict(c: Conflict) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(c).items()}
