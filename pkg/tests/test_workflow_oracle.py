import pytest

from decwf.errors import UntranslatableError
from decwf.workflow import ProcessDefinition, oracle_run, translate


def run(*steps):
    out = []
    for s in steps:
        out += [("start", s), ("complete", s)]
    return out


def test_sequence(wcp1):
    net = translate(wcp1)
    assert net.legal(run("A", "B", "C"), complete=True)
    assert net.legal(run("A", "B"))
    assert not net.legal(run("A", "B"), complete=True)
    assert not net.legal(run("B"))
    assert not net.legal(run("A", "C"))


def test_interleaved_parallel_routing(wcp17):
    net = translate(wcp17)
    assert net.legal(run("A", "B", "C", "D"), complete=True)
    assert net.legal(run("A", "C", "B", "D"), complete=True)
    overlap = run("A") + [("start", "B"), ("start", "C")]
    assert not net.legal(overlap)
    assert not net.legal(run("A", "B", "D"))
    # the capacity-one place is never exceeded in any reachable marking
    for m in net.reachable():
        have = dict(m)
        assert have.get("busy:B", 0) + have.get("busy:C", 0) <= 1
        assert have.get("p3:bc", 0) + have.get("busy:B", 0) + have.get("busy:C", 0) == 1


def test_oracle_runs_cover_both_orders(wcp17):
    orders = set()
    for seed in range(40):
        labels = oracle_run(wcp17, seed)
        assert translate(wcp17).legal(labels, complete=True)
        starts = [t for k, t in labels if k == "start" and t in "BC"]
        orders.add(tuple(starts))
    assert orders == {("B", "C"), ("C", "B")}


def test_dynamic_instances(wcp15):
    net = translate(wcp15, instance_cap=5)
    three = run("A") + run("M", "M", "M") + run("C")
    assert net.legal(three, complete=True)
    four = run("A") + run("M", "M", "M", "M") + run("C")
    assert net.legal(four, complete=True)
    # instances overlap freely
    overlap = run("A") + [("start", "M")] * 3 + [("complete", "M")] * 3 + run("C")
    assert net.legal(overlap, complete=True)
    assert not net.legal(run("A") + run("M", "M") + [("start", "C")])
    assert not net.legal(run("A") + run("M") * 6)  # more than the cap


def test_sync_precedes_successor_exhaustively(wcp15):
    net = translate(wcp15, instance_cap=4)
    states = net.reachable()
    assert len(states) > 20
    for m in states:
        have = dict(m)
        if have.get("in:C") or have.get("busy:C") or have.get("o"):
            assert not any(have.get(p) for p in ("p1:M", "p5:M", "ready:M", "busy:M", "p2:M"))


def test_untranslatable():
    d = ProcessDefinition.from_doc({
        "tasks": [{"id": "A", "role": "r", "split": "OR"}, {"id": "B", "role": "r"}],
        "edges": [["A", "B"]], "roles": [{"id": "r", "members": ["u"]}],
    })
    with pytest.raises(UntranslatableError):
        translate(d)
