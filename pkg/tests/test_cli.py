import csv
import io
import json

import pytest

from helpforum.cli import main
from helpforum.cli.experiment import METHODS, gen_scenario, run_experiment2, summary_csv
from helpforum.cli.svg import box_stats, boxplot_svg
from helpforum.oracle import IlsParams


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestCommands:
    def test_translate_aisles(self, capsys):
        code, out, _ = run(capsys, "translate", "Eventually pick up an item from Aisle A and Aisle B and Aisle C.")
        assert code == 0 and out.strip() == "F(aisle_A) & F(aisle_B) & F(aisle_C)"

    def test_translate_failure(self, capsys):
        code, _, err = run(capsys, "translate", "flibber the wug")
        assert code == 1 and err

    def test_plan_and_export(self, capsys, tmp_path):
        lp = tmp_path / "p.lp"
        code, out, _ = run(capsys, "plan", "--start", "0,0", "--formula", "F at_0_4", "--horizon", "12", "--export-lp", str(lp))
        assert code == 0
        res = json.loads(out)
        assert res["objective"] == 8 and res["trajectory"][-1] == [0, 4] and res["times"] == [4]
        text = lp.read_text()
        assert "z_c" in text and "d_0_" in text

    def test_plan_with_bindings(self, capsys):
        code, out, _ = run(capsys, "plan", "--start", "0,0", "--formula", "F dock", "--world", "", "--horizon", "10",
                           "--bindings", '{"dock": [[0, 3]]}')
        assert code == 0 and json.loads(out)["times"] == [3]

    def test_plan_errors(self, capsys):
        assert run(capsys, "plan", "--start", "0,0", "--formula", "F(")[0] == 2
        assert run(capsys, "plan", "--start", "0,0", "--formula", "F at_9_9", "--horizon", "3")[0] == 2

    def test_eval_nl(self, capsys, tmp_path):
        report = tmp_path / "r.json"
        code, _, err = run(capsys, "eval-nl", "--out", str(report), "--csv", str(tmp_path / "r.csv"))
        assert code == 0 and "validity 100.0" in err
        data = json.loads(report.read_text())
        assert data["summary"]["n"] == 50 and data["summary"]["accuracy_pct"] == 100.0
        assert len(list(csv.DictReader(io.StringIO((tmp_path / "r.csv").read_text())))) == 50

    def test_gen_scenario_is_deterministic(self, capsys, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert run(capsys, "gen-scenario", "--seed", "7", "--ils-iterations", "40", "--out", str(a))[0] == 0
        assert run(capsys, "gen-scenario", "--seed", "7", "--ils-iterations", "40", "--out", str(b))[0] == 0
        assert a.read_bytes() == b.read_bytes()
        d = json.loads(a.read_text())
        assert len(d["forklifts"]) == 6 and len(d["tasks"]) == 12

    def test_oracle_run(self, capsys, tmp_path):
        scen = tmp_path / "s.json"
        run(capsys, "gen-scenario", "--seed", "1", "--ils-iterations", "20", "--out", str(scen))
        code, out, _ = run(capsys, "oracle-run", "--scenario", str(scen), "--iterations", "30", "--out", str(tmp_path / "o"))
        assert code == 0
        res = json.loads(out)
        assert res["cost"] <= res["initial_cost"]
        assert (tmp_path / "o" / "schedule.json").exists()
        assert (tmp_path / "o" / "trace.csv").read_text().startswith("iteration,J,accepted")

    def test_missing_file(self, capsys):
        code, _, err = run(capsys, "eval-nl", "/nonexistent/corpus.jsonl")
        assert code == 2 and "error" in err


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("exp")
    params = IlsParams(max_iterations=40)
    scen = gen_scenario(3, ils_iterations=40)
    results = run_experiment2(2, 3, out, workers=1, ils_params=params, scenario=scen)
    again = run_experiment2(2, 3, None, workers=1, ils_params=params, scenario=scen)
    return results, again, out


class TestExperiment:
    def test_outputs(self, small_run):
        _, _, out = small_run
        names = {p.name for p in out.iterdir()}
        assert {"scenario.json", "results.csv", "summary.csv", "boxplot.svg", "messages.jsonl"} <= names
        assert (out / "summary.csv").read_text().splitlines()[0] == "method,mean,std,n"

    def test_invariants(self, small_run):
        results, _, _ = small_run
        for r in results:
            assert r.error is None
            assert all(r.delta[m] is None or r.delta[m] >= 0 for m in METHODS)
            accepted = [m for m in r.messages if m["type"] == "confirmation" and m["body"]["verdict"] == "accept"]
            assert len(accepted) == 1 and accepted[0]["to"] == r.winner
            offer = next(m for m in r.messages if m["type"] == "offer" and m["from"] == r.winner)
            assert r.delta["ours"] == offer["body"]["tau_h"] + offer["body"]["tau_new"]

    def test_deterministic(self, small_run):
        results, again, _ = small_run
        assert [(r.site, r.delta, r.winner) for r in results] == [(r.site, r.delta, r.winner) for r in again]
        assert summary_csv(results) == summary_csv(again)


class TestSvg:
    def test_box_stats(self):
        s = box_stats([1, 2, 3, 4, 100])
        assert (s["q1"], s["median"], s["q3"]) == (2, 3, 4)
        assert s["hi"] == 4 and s["outliers"] == [100]

    def test_svg_is_wellformed(self):
        import xml.etree.ElementTree as ET

        root = ET.fromstring(boxplot_svg({"Ours": [1, 2, 3], "B1": [2, 2, 5], "B2": []}, "t", "y"))
        assert root.tag.endswith("svg")
