import json
from concurrent.futures import ThreadPoolExecutor

import pytest

from helpforum.planner import makespan, price_help
from helpforum.protocol import (
    AllDeclined,
    Confirmation,
    Conflict,
    Helper,
    HelpRequest,
    MessageBus,
    NoLocation,
    Offer,
    format_request,
    make_offer,
    nearest_helper,
    needs_help,
    offer_from_message,
    parse_request,
    resolve_help,
    run_round,
    select,
)
from helpforum.tasks import HelpTask, PnpTask, Schedule, help_formula, tasks_formula
from helpforum.world import GridWorld, Robot

LIFT = "forklift; can lift pallets"


@pytest.fixture(scope="module")
def scene():
    w = GridWorld(6, 6, frozenset({(2, 1), (2, 2), (2, 3)}), horizon=24)
    tasks = {
        "a": PnpTask("a", (0, 0), (0, 2)),
        "b": PnpTask("b", (5, 0), (4, 2)),
        "c": PnpTask("c", (3, 5), (5, 5)),
    }
    robots = [Robot(1, (1, 0), "forklift", LIFT), Robot(2, (5, 1), "forklift", LIFT), Robot(3, (4, 5), "forklift", LIFT)]
    sched = Schedule(tasks, {1: ["a"], 2: ["b"], 3: ["c"]})
    requester = Robot(9, (0, 5), "mobile", "mobile base; no lift")
    return w, sched, robots, requester


class TestMessages:
    def test_needs_help(self):
        c = Conflict("A pallet is blocking the aisle", (1, 1))
        assert needs_help(c, "mobile base; no lift")
        assert not needs_help(c, LIFT)
        assert needs_help(c, "")
        assert not needs_help(Conflict("Nothing special", (1, 1)), "mobile base")
        assert needs_help(c, LIFT, policy=lambda *_: True)

    def test_has_capability(self):
        from helpforum.protocol import has_capability

        assert has_capability("forklift, can lift pallets", "lift")
        assert not has_capability("mobile base; no lift", "lift")
        assert not has_capability("cannot lift", "lift")

    def test_request_text_round_trip(self):
        c = Conflict("A pallet is blocking the aisle", (3, 4))
        req = format_request(c, "mobile base", 7)
        assert "(3, 4)" in req.text and "My capabilities: mobile base" in req.text
        assert "Pick up pallet at (3,4)" in req.text
        back, hint = parse_request(req.text)
        assert back.location == (3, 4) and hint == "pnp"
        assert back.description == "A pallet is blocking the aisle"

    def test_dwell_request(self):
        req = format_request(Conflict("Door must be held open", (1, 2), 3), "mobile base", style="dwell")
        c, hint = parse_request(req.text)
        assert hint == "dwell" and c.duration == 3 and c.location == (1, 2)

    def test_no_location(self):
        with pytest.raises(NoLocation):
            parse_request("Something is in my way")

    def test_validation(self):
        with pytest.raises(ValueError):
            HelpRequest(1, Conflict("x", (0, 0)), "  ", "r", "t")
        with pytest.raises(ValueError):
            Offer(1, tau_h=1)
        with pytest.raises(ValueError):
            Offer(1, -1, 0)
        with pytest.raises(ValueError):
            Offer(1, 1, 1, decline_reason="no")
        with pytest.raises(ValueError):
            Confirmation(1, 2, "maybe")
        with pytest.raises(ValueError):
            Conflict("x", (0, 0), 0)

    def test_offer_text(self):
        o = Offer(4, 2, 2, LIFT)
        assert o.cost == 4
        assert o.text == "I can help you in 2 minutes, but it will add 2 minutes to my overall makespan."
        assert Offer(4, capabilities="", decline_reason="busy").cost is None

    def test_select(self):
        offers = [Offer(3, 2, 2), Offer(1, 1, 3), Offer(2, decline_reason="no")]
        assert select(offers).helper == 1
        with pytest.raises(AllDeclined):
            select([Offer(2, decline_reason="no")])

    def test_bus(self, tmp_path):
        bus = MessageBus()
        bus.send("request", 1, "broadcast", {"text": "hi"})
        with pytest.raises(TypeError):
            bus.send("offer", 2, 1, {"bad": object()})
        path = tmp_path / "log.jsonl"
        bus.dump(path)
        assert [json.loads(l) for l in path.read_text().splitlines()] == bus.messages


class TestRound:
    def test_round_invariants(self, scene):
        w, sched, robots, requester = scene
        r = run_round(w, sched, requester, Conflict("A pallet is blocking the aisle", (3, 2)), robots)
        msgs = r.bus.messages
        confirmations = [m for m in msgs if m["type"] == "confirmation"]
        assert [m["body"]["verdict"] for m in confirmations].count("accept") == 1
        assert len(confirmations) == len(robots)
        live = [o for o in r.offers if not o.declined]
        assert by(r.offers, r.confirmation.helper).cost == min(o.cost for o in live)
        for m in msgs:
            assert set(m["body"]) <= {"text", "capabilities", "tau_h", "tau_new", "decline", "verdict"}
        assert [offer_from_message(m) for m in msgs if m["type"] == "offer"] == r.offers
        assert r.help_task is not None and r.help_task.pick == (3, 2)

    def test_offers_match_direct_pricing(self, scene):
        w, sched, robots, requester = scene
        conflict = Conflict("A pallet is blocking the aisle", (3, 2))
        r = run_round(w, sched, requester, conflict, robots)
        reserved = {c for t in sched.tasks.values() for c in t.cells}
        _, job = resolve_help(w, conflict, "pnp", reserved)
        for robot in robots:
            own = sched.of(robot.id)
            phi_h = help_formula(HelpTask((3, 2)), w, others=own, avoid=reserved)
            m0 = makespan(w, robot.start, tasks_formula(own))
            h, n, _ = price_help(w, robot.start, tasks_formula(own, [job]), phi_h, original_makespan=m0)
            o = by(r.offers, robot.id)
            assert (o.tau_h, o.tau_new) == (h, n)

    def test_parallel_bids_match_sequential(self, scene):
        w, sched, robots, requester = scene
        c = Conflict("A pallet is blocking the aisle", (3, 2))
        seq = run_round(w, sched, requester, c, robots)
        with ThreadPoolExecutor(3) as ex:
            par = run_round(w, sched, requester, c, robots, executor=ex)
        assert seq.offers == par.offers and seq.bus.messages == par.bus.messages

    def test_capability_decline(self, scene):
        w, sched, robots, requester = scene
        weak = [Robot(r.id, r.start, "mobile", "mobile base; no lift") for r in robots]
        with pytest.raises(AllDeclined):
            run_round(w, sched, requester, Conflict("A pallet is blocking the aisle", (3, 2)), weak)
        mixed = [weak[0], robots[1]]
        r = run_round(w, sched, requester, Conflict("A pallet is blocking the aisle", (3, 2)), mixed)
        assert r.confirmation.helper == 2 and by(r.offers, 1).declined

    def test_horizon_decline(self, scene):
        w, sched, robots, requester = scene
        tight = GridWorld(w.width, w.height, w.obstacles, horizon=6)
        offer, sol, _ = make_offer(tight, Helper(robots[0], sched.of(1)), format_request(
            Conflict("A pallet is blocking the aisle", (5, 4)), "mobile").text, "lift")
        assert offer.declined and sol is None

    def test_nearest_helper(self, scene):
        w, _, robots, _ = scene
        assert nearest_helper(w, (5, 2), robots).id == 2
        with pytest.raises(AllDeclined):
            nearest_helper(GridWorld(3, 1, frozenset({(1, 0)})), (2, 0), [Robot(1, (0, 0))])


def by(offers, helper):
    return next(o for o in offers if o.helper == helper)
