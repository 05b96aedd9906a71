import pytest

from decwf.crypto_core import TOY
from decwf.errors import IntegrityError, NotPresent, ProtocolError
from decwf.group_key import gk_keygen
from decwf.workflow import (
    DataElement,
    DataRegistry,
    DataStore,
    Reference,
    WorkItem,
    provision,
    team_setup,
    wf_scope_keys,
    wf_team_accept,
    wf_transfer,
)
from decwf.workflow.team import TeamOffer, team_accept_shares


def pair(registry=None):
    reg = registry or DataRegistry()
    return DataStore("alice", reg), DataStore("bob", reg)


def test_copy_and_move():
    a, b = pair()
    a.put("x", b"v")
    wf_transfer(DataElement("x", transfer="copy"), a, b)
    assert a.read("x") == b.read("x") == b"v"
    a.put("y", b"w")
    wf_transfer(DataElement("y", transfer="move"), a, b)
    assert b.read("y") == b"w"
    with pytest.raises(NotPresent):
        a.read("y")
    with pytest.raises(NotPresent):
        wf_transfer(DataElement("y", transfer="move"), a, b)


def test_reference_and_locked_reference():
    a, b = pair()
    a.put("r", b"shared")
    wf_transfer(DataElement("r", transfer="ref"), a, b)
    assert isinstance(b.raw("r"), Reference) and b.read("r") == b"shared"
    a.put("l", b"guarded")
    wf_transfer(DataElement("l", transfer="ref-locked"), a, b)
    with pytest.raises(ProtocolError):
        b.read("l")
    assert b.acquire("l")
    assert not a.acquire("l")  # blocked while bob holds it
    assert b.read("l") == b"guarded"
    b.release("l")
    assert b.registry.lock(b.raw("l").locator).holds("alice")
    assert a.read("l") == b"guarded"  # the queued request was granted on release


def scope_pair(members=("alice", "bob")):
    spec_el = DataElement("s", scope="task", tasks=("T",), sensitive=True)
    ltks, directory = gk_keygen(["alice", "bob", "eve"], TOY, seed=1)
    from decwf.workflow.scopes import ScopeSpec

    handles = provision([ScopeSpec("c/s", "s", "task", tuple(members))], ltks, directory)
    return spec_el, handles["s"]


def test_sensitive_transfer_through_intermediary():
    el, h = scope_pair()
    a, b = pair()
    a.put("s", b"secret")
    seen = []
    wf_transfer(el, a, b, route=["relay"], src_key=h.key_for("alice"), dst_key=h.key_for("bob"),
                      tamper=lambda hop, w: seen.append(w) or w)
    assert b.read("s") == b"secret"
    assert b"secret" not in seen[0]


def test_tampering_intermediary_detected():
    el, h = scope_pair()
    a, b = pair()
    a.put("s", b"secret")

    def flip(hop, wire):
        w = bytearray(wire)
        w[5] ^= 0x80
        return bytes(w)

    with pytest.raises(IntegrityError):
        wf_transfer(el, a, b, route=["relay"], src_key=h.key_for("alice"), dst_key=h.key_for("bob"), tamper=flip)
    assert not b.has("s")


def test_non_member_cannot_decrypt():
    el, h = scope_pair()
    a, e = DataStore("alice"), DataStore("eve")
    a.put("s", b"secret")
    log = []
    with pytest.raises(PermissionError):
        h.key_for("eve")
    with pytest.raises(PermissionError):
        wf_transfer(el, a, e, src_key=h.key_for("alice"), trace=lambda *x: log.append(x))
    assert log == [("eve", "s", False)]


def wpd(scope, tasks, per_task_roles):
    roles = [{"id": r, "members": ms, "keys": ["d"]} for r, ms in per_task_roles.items()]
    rnames = list(per_task_roles)
    doc = {
        "tasks": [{"id": t, "role": rnames[i % len(rnames)]} for i, t in enumerate(tasks)],
        "edges": [[a, b] for a, b in zip(tasks, tasks[1:])],
        "roles": roles,
        "data": [{"name": "d", "scope": scope, "tasks": tasks[:1] if scope == "task" else [], "sensitive": True}],
    }
    from decwf.workflow import ProcessDefinition

    return ProcessDefinition.from_doc(doc)


def test_scope_memberships():
    case = wpd("case", ["A", "B"], {"r1": ["u1", "u2"], "r2": ["u3", "u4"]})
    (spec,) = wf_scope_keys(case, "c")
    assert spec.members == ("u1", "u2", "u3", "u4") and spec.scope_id == "c/d"
    task = wpd("task", ["A", "B"], {"r1": ["u1"], "r2": ["u3", "u4"]})
    (spec,) = wf_scope_keys(task, "c")
    assert spec.members == ("u1",)
    ltks, directory = gk_keygen(["u1", "u2", "u3", "u4"], TOY, seed=2)
    handles = provision(wf_scope_keys(case, "c"), ltks, directory)
    assert len({handles["d"].key_for(m).fingerprint() for m in ("u1", "u2", "u3", "u4")}) == 1


# team allocation


@pytest.fixture(scope="module")
def board():
    return team_setup("board", ["b1", "b2", "b3"], 2, TOY, seed=4)


def accepts(item, team, who):
    return [(m, s) for m in who for s in team_accept_shares(item.item_id, m, team)]


def test_team_allocates_at_threshold(board):
    item = WorkItem("c/T/0", "c", "T", state="offered")
    assert wf_team_accept(item, accepts(item, board, ["b1"]), board) is None
    assert item.state == "offered"
    alloc = wf_team_accept(item, accepts(item, board, ["b1", "b3"]), board)
    assert alloc is not None and alloc.verify(board.vks)
    assert item.state == "allocated" and item.holder == "team:board"


def test_team_offer_expires(board):
    item = WorkItem("c/T/1", "c", "T", state="offered")
    assert wf_team_accept(item, accepts(item, board, ["b2"]), board, now=10, expires_at=10) is None
    assert item.state == "withdrawn"


def test_acceptance_bound_to_item(board):
    a, b = WorkItem("c/T/2", "c", "T", state="offered"), WorkItem("c/T/3", "c", "T", state="offered")
    offer = TeamOffer(b, board, 100)
    assert not any(offer.add(m, s) for m, s in accepts(a, board, ["b1", "b2"]))


def test_weighted_team():
    w = {"president": 3, "m1": 1, "m2": 1, "m3": 1}
    team = team_setup("exec", list(w), 3, TOY, seed=5, weights=w)
    item = WorkItem("c/P/0", "c", "P", state="offered")
    assert wf_team_accept(item, accepts(item, team, ["president"]), team) is not None
    item2 = WorkItem("c/P/1", "c", "P", state="offered")
    assert wf_team_accept(item2, accepts(item2, team, ["m1", "m2"]), team) is None
    assert wf_team_accept(item2, accepts(item2, team, ["m1", "m2", "m3"]), team) is not None
