import datetime

import pytest

from twoscale.trace import SCHEMA_VERSION, StepSeverity, Trace, TraceStep


def make_step(block=1, step=1, **kwargs):
    return TraceStep(
        block=block,
        step=step,
        strategy="topdown(green)",
        before="Int(u, x)",
        after=kwargs.pop("after", "u = 0"),
        rules_fired=kwargs.pop("rules_fired", {"green": 1}),
        **kwargs,
    )


def test_as_dict_drops_defaults():
    obj = make_step().as_dict()
    assert "severity" not in obj
    assert "note" not in obj
    obj = make_step(severity=StepSeverity.WARNING, note="expectation replaced").as_dict()
    assert obj["severity"] == "warning"
    assert obj["note"] == "expectation replaced"


def test_rules_fired_are_sorted():
    obj = make_step(rules_fired={"simp": 2, "green": 1}).as_dict()
    assert list(obj["rules_fired"]) == ["green", "simp"]


def test_dumps_and_loads():
    created = datetime.datetime(2021, 3, 4, 5, 6, 7, tzinfo=datetime.timezone.utc)
    trace = Trace("reference", [make_step(), make_step(2, 1, severity=StepSeverity.WARNING)], created)
    loaded = Trace.loads(trace.dumps())
    assert loaded == trace
    assert loaded.created == created


@pytest.mark.parametrize("text", ['{"schema": 2, "steps": []}', '{"steps": []}'])
def test_unsupported_schema(text):
    with pytest.raises(ValueError):
        Trace.loads(text)


def test_schema_version():
    assert Trace("m").as_dict()["schema"] == SCHEMA_VERSION


def test_blocks_and_filter():
    trace = Trace("m", [make_step(2), make_step(1), make_step(2, 2)])
    assert trace.blocks() == [1, 2]
    assert [s.step for s in trace.for_block(2).steps] == [1, 2]
    assert trace.for_block(None) is trace
    assert not trace.for_block(5).steps


def test_fired_totals():
    trace = Trace("m", [make_step(rules_fired={"a": 1}), make_step(step=2, rules_fired={"a": 2, "b": 1})])
    assert trace.fired() == {"a": 3, "b": 1}


def test_extend():
    trace = Trace("m", [make_step()])
    trace.extend(Trace("m", [make_step(2)]))
    assert trace.blocks() == [1, 2]


def test_format_text():
    trace = Trace("m", [make_step(note="expectation replaced")])
    assert trace.format_text().splitlines() == [
        "Block 1",
        "  Step 1. topdown(green)  [greenx1]",
        "    => u = 0",
        "    (expectation replaced)",
    ]


def test_format_latex():
    trace = Trace("m", [make_step(after="Eq(Fun(u, [], [], Unknown), 0)", rules_fired={"d_self": 1})])
    latex = trace.format_latex()
    assert "\\paragraph{Block 1}" in latex
    assert "d\\_self" in latex
    assert "u = 0" in latex


def test_format_latex_falls_back_to_text(caplog):
    trace = Trace("m", [make_step(after="f(a,")])
    assert "\\text{f(a,}" in trace.format_latex()
    assert "not printable" in caplog.text
