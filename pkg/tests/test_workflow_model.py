import pytest

from decwf.errors import ConfigError, IllegalTransition
from decwf.workflow import LEGAL_TRANSITIONS, MultiInstance, ProcessDefinition, WorkItem, scope_tasks, wf_validate


def single(**task):
    return {
        "process": "one",
        "tasks": [{"id": "A", "role": "r", **task}],
        "edges": [],
        "roles": [{"id": "r", "members": ["u1"]}],
    }


def test_single_task_is_valid():
    d = ProcessDefinition.from_doc(single())
    rep = wf_validate(d)
    assert rep.valid, str(rep)
    assert d.start == "A" and d.end_tasks() == ["A"]


def test_missing_scope_key_reported():
    doc = single(reads=["x"])
    doc["data"] = [{"name": "x", "scope": "task", "tasks": ["A"], "sensitive": True}]
    rep = wf_validate(ProcessDefinition.from_doc(doc))
    assert not rep.valid
    assert [i.kind for i in rep.issues] == ["scope"]
    doc["roles"][0]["keys"] = ["x"]
    rep = wf_validate(ProcessDefinition.from_doc(doc))
    assert rep.valid and rep.bindings == [("r", "x", "A")]


def test_out_of_scope_use_reported():
    doc = single(reads=["x"])
    doc["tasks"].append({"id": "B", "role": "r"})
    doc["edges"] = [["A", "B"]]
    doc["data"] = [{"name": "x", "scope": "task", "tasks": ["B"], "sensitive": True}]
    doc["roles"][0]["keys"] = ["x"]
    rep = wf_validate(ProcessDefinition.from_doc(doc))
    assert any("outside its scope" in i.message for i in rep.issues)


def test_fixture_bindings(wcp1, wcp17):
    assert wf_validate(wcp1).bindings == [("clerk", "x", "A"), ("clerk", "x", "C")]
    assert wf_validate(wcp17).bindings == [("lead", "z", "A"), ("lead", "z", "D")]
    assert scope_tasks(wcp1, wcp1.data_elements["x"]) == {"A", "C"}
    assert scope_tasks(wcp17, wcp17.data_elements["z"]) == set(wcp17.tasks)


def test_structural_problems():
    doc = single()
    doc["tasks"].append({"id": "B", "role": "nobody"})
    doc["edges"] = [["A", "B"], ["A", "Z"]]
    kinds = {(i.kind, i.message.split()[0]) for i in wf_validate(ProcessDefinition.from_doc(doc)).issues}
    assert ("structure", "edge") in kinds
    assert ("role", "task") in kinds
    assert ("structure", "task") in kinds  # A splits without a split type
    with pytest.raises(ConfigError):
        ProcessDefinition.from_doc({"tasks": [{"id": "A"}, {"id": "A"}]})
    with pytest.raises(ConfigError):
        MultiInstance(0)
    with pytest.raises(ConfigError):
        MultiInstance(3, 2)


def test_team_policy_must_fit_role():
    doc = single(team_policy=[2, 3])
    doc["roles"][0]["members"] = ["u1", "u2"]
    rep = wf_validate(ProcessDefinition.from_doc(doc))
    assert [i.kind for i in rep.issues] == ["role"]


def test_doc_roundtrip(wcp1, wcp15, wcp17):
    for d in (wcp1, wcp15, wcp17):
        assert ProcessDefinition.from_doc(d.to_doc()) == d


def test_workitem_lifecycle():
    w = WorkItem("c/A/0", "c", "A")
    for to in ("offered", "allocated", "started", "completed"):
        w.transition(to, holder="u1")
    assert w.terminal and w.history[-1] == ("started", "completed")
    with pytest.raises(IllegalTransition):
        w.transition("completed")
    w2 = WorkItem("c/A/1", "c", "A")
    with pytest.raises(IllegalTransition):
        w2.transition("started")
    w2.transition("offered")
    w2.transition("withdrawn")
    assert w2.terminal
    states = {"-", "offered", "allocated", "withdrawn", "started", "completed", "failed"}
    for a in states:
        for b in states:
            item = WorkItem("x", "c", "A", state=a)
            if (a, b) in LEGAL_TRANSITIONS:
                item.transition(b)
            else:
                with pytest.raises(IllegalTransition):
                    item.transition(b)
