import random
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from decwf.errors import ConfigError, TraceFormatError
from decwf.simnet import SCRIPTS, AdversarySpec, Node, Simulator, Trace, check_trace
from decwf.simnet.core import corrupt_payload

FIXTURES = Path(__file__).parent / "fixtures"


class Pinger(Node):
    """Sends one message to every peer at start, records arrivals."""

    def __init__(self):
        self.got = []

    def on_start(self, ctx):
        for p in ctx.peers:
            if p != ctx.node_id:
                ctx.send(p, "ping", {"from": ctx.node_id, "at": ctx.now})

    def on_message(self, ctx, src, protocol, body):
        self.got.append((ctx.now, src))


def pingers(n=4):
    return {f"n{i}": Pinger() for i in range(n)}


def test_same_seed_same_trace():
    a = Simulator(pingers(), seed=5, dmax=6, trace_messages=True).run().trace.to_text()
    b = Simulator(pingers(), seed=5, dmax=6, trace_messages=True).run().trace.to_text()
    c = Simulator(pingers(), seed=6, dmax=6, trace_messages=True).run().trace.to_text()
    assert a == b and a != c


def test_empty_scenario_trace():
    res = Simulator({}, seed=0).run()
    assert [r.kind for r in res.trace] == ["setup", "end"]
    assert check_trace(res.trace).passed


def test_dmax_one_is_synchronous():
    res = Simulator(pingers(), seed=1, dmax=1).run()
    assert {t for node in res.nodes.values() for t, _ in node.got} == {1}


def test_delays_bounded():
    res = Simulator(pingers(5), seed=2, dmax=4, trace_messages=True).run()
    for r in res.trace.select(kind="send"):
        assert 1 <= int(r.get("at")) - r.time <= 4


def test_delay_max_script():
    adv = AdversarySpec({"n0": "delay-max"}, t=1)
    res = Simulator(pingers(), seed=3, dmax=7, adversary=adv, trace_messages=True).run()
    sends = [r for r in res.trace.select(kind="send") if r.node == "n0"]
    assert sends and all(int(r.get("at")) == r.time + 7 for r in sends)


def test_silent_and_drops():
    res = Simulator(pingers(), seed=0, adversary=AdversarySpec({"n1": "silent"})).run()
    assert all(src != "n1" for node in res.nodes.values() for _, src in node.got)
    res = Simulator(pingers(), seed=0, adversary=AdversarySpec({"n1": "omit"}, drops=[("n1", "n2")])).run()
    assert "n1" not in {s for _, s in res.nodes["n2"].got}
    assert "n1" in {s for _, s in res.nodes["n3"].got}


def test_adversary_config_errors():
    with pytest.raises(ConfigError, match="honest link"):
        Simulator(pingers(), adversary=AdversarySpec({"n1": "silent"}, drops=[("n2", "n3")]))
    with pytest.raises(ConfigError, match="budget"):
        Simulator(pingers(), adversary=AdversarySpec({"n1": "silent", "n2": "silent"}, t=1))
    with pytest.raises(ConfigError, match="unknown adversary"):
        Simulator(pingers(), adversary=AdversarySpec({"n1": "explode"}))
    with pytest.raises(ConfigError, match="roster"):
        Simulator(pingers(), adversary=AdversarySpec({"zz": "silent"}))
    with pytest.raises(ConfigError):
        Simulator(pingers(), dmax=0)
    with pytest.raises(ConfigError):
        AdversarySpec.from_doc(["n1"])
    spec = AdversarySpec.from_doc({"corrupted": [{"node": "n1", "script": "replay"}], "t": 1})
    assert spec.corrupted == {"n1": "replay"} and AdversarySpec.from_doc(spec.to_doc()) == spec
    assert set(SCRIPTS) == {"silent", "equivocate", "delay-max", "replay", "payload-corrupt", "omit"}


def test_tick_limit():
    class Forever(Node):
        def on_start(self, ctx):
            ctx.set_timer(1, "again")

        def on_timer(self, ctx, name, data):
            ctx.set_timer(1, "again")

        def done(self):
            return False

    res = Simulator({"x": Forever()}, tick_limit=50).run()
    assert res.timed_out and res.report.undone == ["x"]
    assert res.trace.records[-2].kind == "timeout"
    assert res.trace.complete
    assert check_trace(res.trace, ["wellformed"]).passed


def test_planted_double_hold_detected():
    trace = Trace.read(FIXTURES / "double_hold.trace")
    report = check_trace(trace, "mutex")
    assert not report.passed and "mutex-safety" in report.failed()


def test_shuffled_or_truncated_traces():
    trace = Simulator(pingers(), seed=1, trace_messages=True).run().trace
    lines = trace.to_text().splitlines()
    random.Random(0).shuffle(lines)
    with pytest.raises(TraceFormatError):
        check_trace(Trace.parse("\n".join(lines)))
    cut = Trace.parse("\n".join(trace.to_text().splitlines()[:-1]))
    assert not cut.complete
    assert "wellformed" in check_trace(cut).failed()
    with pytest.raises(TraceFormatError):
        Trace.parse("seq=1 time=0 node=a\n")
    with pytest.raises(TraceFormatError):
        check_trace(trace, "nonsense")


text = st.text(st.characters(blacklist_categories=("Cs",)), max_size=12)


@given(st.lists(st.tuples(st.integers(0, 99), text, text, st.dictionaries(st.from_regex(r"[a-z]{1,6}", fullmatch=True), text, max_size=3)), max_size=8))
def test_trace_text_roundtrip(rows):
    t = Trace()
    for time, node, detail, info in sorted(rows, key=lambda r: r[0]):
        t.append(time, node, "custom", "p", "i", detail, **info)
    again = Trace.parse(t.to_text())
    assert again.records == t.records


@given(st.integers(0, 10**6))
def test_corrupt_payload_changes_body(seed):
    body = {"a": 1, "b": [2, "x"], "c": b"\x01\x02"}
    out = corrupt_payload(body, random.Random(seed))
    assert out != body
    assert body == {"a": 1, "b": [2, "x"], "c": b"\x01\x02"}
