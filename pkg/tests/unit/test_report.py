import json

from twoscale.graph import ExportGraph
from twoscale.report import BlockResult, Report


def make_report():
    report = Report(model="reference", exports={"d_u0_x1": 1, "eta_def": 2, "two_scale": 5})
    report.add(BlockResult(1, "constraint on u0", True, 7, fired={"green": 2}, seconds=0.5))
    report.add(BlockResult(2, "corrector", True, 6, fired={"d_u0_x1": 1, "green": 1}, seconds=0.25))
    report.add(BlockResult(3, "periodicity", True, 8, fired={"eta_def": 1, "d_u0_x1": 2}))
    report.add(BlockResult.failed(5, "limit problem", 4, "block 5 step 4: no result"))
    return report


def test_passed():
    report = make_report()
    assert not report.passed
    assert not Report(model="m").passed
    assert Report(model="m", blocks=[BlockResult(1, "", True, 1)]).passed


def test_fired_totals():
    assert make_report().fired() == {"d_u0_x1": 3, "eta_def": 1, "green": 3}


def test_consumers():
    assert make_report().consumers() == {1: [2, 3], 2: [3]}


def test_as_dict():
    obj = make_report().as_dict()
    json.dumps(obj)
    assert obj["passed"] is False
    assert obj["seconds"] == 0.75
    assert "error" not in obj["blocks"][0]
    assert obj["blocks"][3]["error"] == "block 5 step 4: no result"


def test_format_text():
    lines = make_report().format_text().splitlines()
    assert lines[0] == "reference: 3/4 blocks passed in 0.75s"
    assert "  block 5 [FAILED] limit problem" in lines


def test_seed_is_reported():
    report = Report(model="reference", packs=["multi_dimension"], seed="Eq(a, b)")
    assert report.format_text().splitlines()[1] == "  seed: Eq(a, b)"
    assert report.as_dict()["seed"] == "Eq(a, b)"


def test_export_dependencies():
    graph = ExportGraph(make_report())
    assert graph.walk_export_dependencies() == {(1, 2, "d_u0_x1"), (1, 3, "d_u0_x1"), (2, 3, "eta_def")}
    assert graph.as_dict() == {
        "model": "reference",
        "edges": {"1": ["2:d_u0_x1", "3:d_u0_x1"], "2": ["3:eta_def"]},
    }


def test_digraph():
    lines = ExportGraph(make_report()).generate_digraph().splitlines()
    assert lines[0] == 'digraph "reference" {'
    assert lines[-1] == "}"
    assert '  "block 5 (+0.000s 4 steps *FAILED*)" [shape=Mdiamond];' in lines
    assert (
        '  "block 1 (+0.500s 7 steps)"->"block 2 (+0.250s 6 steps)" [label="d_u0_x1",color="green"];' in lines
    )
