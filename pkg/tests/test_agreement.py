import dataclasses

import pytest

from decwf.agreement import AbaInstance, AbaNode, NoticeBoard, aba_init, aba_setup
from decwf.agreement.aba import equivocate_body
from decwf.crypto_core import TOY
from decwf.errors import IntegrityError, NotFound, ProtocolError
from decwf.simnet import SCRIPTS, AdversarySpec, Simulator, check_trace

MEMBERS = ["p1", "p2", "p3", "p4"]


@pytest.fixture(scope="module")
def keys():
    return aba_setup(MEMBERS, 1, TOY, seed=7)


def run_aba(keys, bits, seed, adversary=None, dmax=4):
    nodes = {m: AbaNode(keys[m], {"x": b}) for m, b in zip(MEMBERS, bits)}
    res = Simulator(nodes, seed=seed, dmax=dmax, adversary=adversary, t=1).run()
    return nodes, res


def test_start_emits_one_round1_prevote(keys):
    inst, out = aba_init("x", 1, keys["p1"])
    assert [(b["t"], b["r"], b["v"]) for b in out] == [("pre", 1, 1)]
    with pytest.raises(ProtocolError):
        inst.start(0)
    with pytest.raises(ProtocolError):
        AbaInstance("y", keys["p1"]).start(2)


def test_unanimous_inputs_decide_that_value(keys):
    for v in (0, 1):
        nodes, res = run_aba(keys, [v] * 4, seed=v)
        assert not res.timed_out
        assert {n.decisions()["x"] for n in nodes.values()} == {v}


@pytest.mark.parametrize("script", SCRIPTS)
def test_split_inputs_under_each_script(keys, script):
    for seed in range(5):
        bad = MEMBERS[seed % 4]
        adv = AdversarySpec({bad: script}, t=1)
        nodes, res = run_aba(keys, [0, 0, 1, 1], seed, adv)
        honest = [m for m in MEMBERS if m != bad]
        assert not res.timed_out
        decided = {nodes[m].decisions()["x"] for m in honest}
        assert len(decided) == 1
        rounds = [nodes[m].host.instances["x"].decided_round for m in honest]
        assert max(rounds) <= 20
        assert check_trace(res.trace, "aba").passed


def test_equivocation_is_dropped(keys):
    inst = AbaInstance("x", keys["p1"])
    inst.start(0)
    _, out = aba_init("x", 1, keys["p2"])
    genuine = out[0]
    inst.handle(keys["p2"].index, genuine)
    assert inst.pre[1][keys["p2"].index]["v"] == 1
    inst.handle(keys["p2"].index, equivocate_body(keys["p2"], genuine))
    # both votes of the equivocator are discarded and later ones ignored
    assert keys["p2"].index not in inst.pre[1]
    assert keys["p2"].index in inst.flagged
    inst.handle(keys["p2"].index, genuine)
    assert keys["p2"].index not in inst.pre[1]
    # a vote signed by someone else does not count for p3
    inst.handle(keys["p3"].index, equivocate_body(keys["p2"], genuine))
    assert keys["p3"].index not in inst.pre[1]


# notice board


def board(keys, seed=0, adversary=None):
    return NoticeBoard(keys, seed=seed, adversary=adversary)


def test_honest_publish_retrievable_everywhere(keys):
    nb = board(keys)
    entry = nb.publish("doc", b"v1", publisher="p2")
    seen = {nb.retrieve("doc", m) for m in MEMBERS}
    assert len(seen) == 1
    value, att = seen.pop()
    assert value == b"v1" and att == entry.attestation


def test_conflicting_publishes_give_one_value(keys):
    for seed in range(4):
        nb = board(keys, seed)
        nb.nodes["p1"].publish_later("k", b"A", 0, 1)
        nb.nodes["p2"].publish_later("k", b"B", 0, 1)
        nb.run()
        got = set()
        for m in MEMBERS:
            try:
                got.add(nb.retrieve("k", m)[0])
            except NotFound:
                got.add(None)
        assert len(got - {None}) <= 1
        assert len(got) == 1


def test_silent_member_does_not_block(keys):
    nb = board(keys, adversary=AdversarySpec({"p4": "silent"}, t=1))
    nb.publish("k", b"hello", publisher="p1")
    for m in ("p1", "p2", "p3"):
        assert nb.retrieve("k", m)[0] == b"hello"


def test_substituted_value_detected(keys):
    nb = board(keys)
    nb.publish("k", b"real", publisher="p1")
    store = nb.nodes["p3"].store
    store[("k", 0)] = dataclasses.replace(store[("k", 0)], value=b"fake")
    with pytest.raises(IntegrityError):
        nb.retrieve("k", "p3")
    with pytest.raises(NotFound):
        nb.retrieve("missing", "p1")
