"""Two-level token mutual exclusion.

Requesters queue at their group leader. Leaders pass a single token among
themselves in the style of Suzuki and Kasami: a leader that needs the token
broadcasts a numbered GREQ, and the token carries the number of the last
served request of every leader plus a FIFO of leaders still waiting. The
token holder grants its local queue one holder at a time and hands the token
on once its queue is empty, or after ``batch`` local grants when other
leaders wait.

The cores below do no I/O. Each handler returns a list of ``(dst, message)``
pairs and appends to ``events``; ``MutexNode`` runs them on the simulator and
``model_check`` explores every delivery order.
"""

from __future__ import annotations

import copy
from collections import deque
from dataclasses import dataclass, field

from decwf.errors import ProtocolError
from decwf.simnet.core import Node

PROTOCOL = "mutex"


@dataclass(frozen=True)
class MutexRequest:
    requester: str
    mutex_id: str
    seq: int


@dataclass
class Token:
    ln: dict
    queue: list = field(default_factory=list)

    def to_wire(self) -> dict:
        return {"ln": dict(sorted(self.ln.items())), "q": list(self.queue)}

    @classmethod
    def from_wire(cls, doc) -> "Token":
        return cls({str(k): int(v) for k, v in doc["ln"].items()}, [str(x) for x in doc["q"]])


class MemberCore:
    """The requester side: idle -> waiting -> holding -> idle."""

    def __init__(self, name: str, leader: str, mutex_id: str):
        self.name = name
        self.leader = leader
        self.mutex_id = mutex_id
        self.state = "idle"
        self.seq = 0
        self.events = []

    def request(self) -> list:
        if self.state != "idle":
            raise ProtocolError(f"{self.name} already {self.state} on {self.mutex_id}")
        self.seq += 1
        self.state = "waiting"
        self.events.append(("request", {"seq": self.seq}))
        return [(self.leader, {"t": "REQ", "mx": self.mutex_id, "from": self.name, "seq": self.seq})]

    def on_grant(self, msg) -> list:
        if self.state != "waiting" or msg.get("seq") != self.seq:
            self.events.append(("stray-grant", {"seq": msg.get("seq")}))
            return []
        self.state = "holding"
        self.events.append(("enter", {"seq": self.seq}))
        return []

    def release(self) -> list:
        if self.state != "holding":
            raise ProtocolError(f"{self.name} does not hold {self.mutex_id}")
        self.state = "idle"
        self.events.append(("exit", {"seq": self.seq}))
        return [(self.leader, {"t": "RELEASE", "mx": self.mutex_id, "from": self.name, "seq": self.seq})]

    def key(self):
        return (self.name, self.state, self.seq)


class LeaderCore:
    """Group leader: owns the local queue and takes part in token passing."""

    def __init__(self, name: str, leaders, mutex_id: str, has_token: bool = False, batch: int = 4):
        self.name = name
        self.leaders = tuple(sorted(leaders))
        self.mutex_id = mutex_id
        self.batch = batch
        self.local = deque()
        self.in_cs = None  # (member, seq)
        self.rn = {lead: 0 for lead in self.leaders}
        self.arrivals = []  # leaders in GREQ arrival order
        self.token = Token({lead: 0 for lead in self.leaders}) if has_token else None
        self.requested = False
        self.served = 0
        self.transfers = 0
        self.events = []

    # -- helpers
    def _others_waiting(self) -> bool:
        t = self.token
        return any(j != self.name and self.rn[j] == t.ln[j] + 1 for j in self.leaders)

    def _ask_token(self) -> list:
        self.rn[self.name] += 1
        self.requested = True
        msg = {"t": "GREQ", "mx": self.mutex_id, "leader": self.name, "n": self.rn[self.name]}
        return [(j, dict(msg)) for j in self.leaders if j != self.name]

    def _grant_next(self) -> list:
        member, seq = self.local.popleft()
        self.in_cs = (member, seq)
        self.served += 1
        self.events.append(("grant", {"member": member, "seq": seq}))
        return [(member, {"t": "GRANT", "mx": self.mutex_id, "seq": seq})]

    def _pass_token(self) -> list:
        t = self.token
        t.ln[self.name] = self.rn[self.name]
        for j in self.arrivals:
            if j != self.name and self.rn[j] == t.ln[j] + 1 and j not in t.queue:
                t.queue.append(j)
        self.arrivals = [j for j in self.arrivals if j not in t.queue]
        nxt = t.queue.pop(0)
        self.token = None
        self.served = 0
        self.requested = False
        self.transfers += 1
        self.events.append(("token", {"to": nxt}))
        out = [(nxt, {"t": "TOKEN", "mx": self.mutex_id, "token": t.to_wire()})]
        if self.local:
            out += self._ask_token()
        return out

    def _settle(self) -> list:
        """Decide what to do with an idle token."""
        if self.token is None or self.in_cs is not None:
            return []
        if self.local and (self.served < self.batch or not self._others_waiting()):
            return self._grant_next()
        if self._others_waiting():
            return self._pass_token()
        self.served = 0
        return []

    # -- handlers
    def on_message(self, src: str, msg: dict) -> list:
        kind = msg.get("t")
        if kind == "REQ":
            return self.on_request(msg["from"], int(msg["seq"]))
        if kind == "RELEASE":
            return self.on_release(msg["from"], int(msg["seq"]))
        if kind == "GREQ":
            return self.on_greq(msg["leader"], int(msg["n"]))
        if kind == "TOKEN":
            return self.on_token(Token.from_wire(msg["token"]))
        raise ProtocolError(f"unknown mutex message {kind!r}")

    def on_request(self, member: str, seq: int) -> list:
        # a newer request from the current holder is legal: its RELEASE may still be in flight
        stale = self.in_cs is not None and self.in_cs[0] == member and self.in_cs[1] >= seq
        if any(m == member for m, _ in self.local) or stale:
            self.events.append(("duplicate", {"member": member, "seq": seq}))
            return []
        self.local.append((member, seq))
        if self.token is not None:
            return self._settle()
        if not self.requested:
            return self._ask_token()
        return []

    def on_release(self, member: str, seq: int) -> list:
        if self.in_cs != (member, seq):
            self.events.append(("bad-release", {"member": member, "seq": seq}))
            return []
        self.in_cs = None
        return self._settle()

    def on_greq(self, leader: str, n: int) -> list:
        if leader not in self.rn:
            raise ProtocolError(f"{leader} is not a leader of {self.mutex_id}")
        if n > self.rn[leader]:
            self.rn[leader] = n
            if leader not in self.arrivals:
                self.arrivals.append(leader)
        return self._settle()

    def on_token(self, token: Token) -> list:
        if self.token is not None:
            raise ProtocolError("second token")
        self.token = token
        self.served = 0
        self.events.append(("token-in", {}))
        return self._settle()

    def key(self):
        t = None if self.token is None else (tuple(sorted(self.token.ln.items())), tuple(self.token.queue))
        return (
            self.name, tuple(self.local), self.in_cs, tuple(sorted(self.rn.items())), tuple(self.arrivals),
            t, self.requested, self.served,
        )


@dataclass
class MutexLayout:
    """The groups of one mutex: leader name -> member names."""

    mutex_id: str
    groups: dict
    token_at: str | None = None
    batch: int = 4

    def __post_init__(self):
        seen = set()
        for leader, members in self.groups.items():
            for m in members:
                if m in seen:
                    raise ProtocolError(f"{m} is in two groups of {self.mutex_id}")
                seen.add(m)
        if self.token_at is None:
            self.token_at = min(self.groups)
        if self.token_at not in self.groups:
            raise ProtocolError("token must start at a leader")

    def leader_of(self, member: str) -> str:
        for leader, members in self.groups.items():
            if member in members:
                return leader
        raise ProtocolError(f"{member} is not in a group of {self.mutex_id}")

    def make_leader(self, name: str) -> LeaderCore:
        return LeaderCore(name, self.groups, self.mutex_id, name == self.token_at, self.batch)

    def make_member(self, name: str) -> MemberCore:
        return MemberCore(name, self.leader_of(name), self.mutex_id)

    @classmethod
    def even(cls, mutex_id: str, names, n_groups: int, batch: int = 4) -> "MutexLayout":
        """Split ``names`` into groups; the first name of each group leads it."""
        names = list(names)
        groups = {}
        for g in range(n_groups):
            part = names[g::n_groups]
            if part:
                groups[part[0]] = list(part)
        return cls(mutex_id, groups, batch=batch)


class MutexNode(Node):
    """Hosts member and leader cores for any number of mutexes.

    ``plan`` lists ``(at, mutex_id, hold)``: request at tick ``at`` and stay
    inside for ``hold`` ticks.
    """

    def __init__(self, name: str, layouts, plan=()):
        self.name = name
        self.members = {}
        self.leaders = {}
        for lay in layouts:
            if any(name in ms for ms in lay.groups.values()):
                self.members[lay.mutex_id] = lay.make_member(name)
            if name in lay.groups:
                self.leaders[lay.mutex_id] = lay.make_leader(name)
        self.plan = list(plan)
        self.entered = []
        self.on_enter = None  # callback(ctx, mutex_id)

    def on_start(self, ctx) -> None:
        for i, (at, mx, hold) in enumerate(self.plan):
            ctx.set_timer(max(1, at), "request", (mx, hold))

    def request(self, ctx, mutex_id: str) -> None:
        core = self.members[mutex_id]
        try:
            out = core.request()
        except ProtocolError as e:
            ctx.trace("mutex", PROTOCOL, mutex_id, "rejected", why=str(e))
            return
        self._emit(ctx, mutex_id, core, out)

    def release(self, ctx, mutex_id: str) -> None:
        core = self.members.get(mutex_id)
        if core is None or core.state != "holding":
            ctx.trace("mutex", PROTOCOL, mutex_id, "bad-release", who=self.name)
            raise ProtocolError(f"{self.name} does not hold {mutex_id}")
        self._emit(ctx, mutex_id, core, core.release())

    def on_timer(self, ctx, name, data) -> None:
        if name == "request":
            mx, hold = data
            self._holds = getattr(self, "_holds", {})
            self._holds[mx] = hold
            self.request(ctx, mx)
        elif name == "release":
            self.release(ctx, data)

    def on_message(self, ctx, src, protocol, body) -> None:
        if protocol != PROTOCOL or not isinstance(body, dict):
            return
        mx = body.get("mx")
        if body.get("t") == "GRANT":
            core = self.members.get(mx)
            if core is not None:
                self._emit(ctx, mx, core, core.on_grant(body))
            return
        core = self.leaders.get(mx)
        if core is None:
            ctx.trace("mutex", PROTOCOL, str(mx), "misrouted", sender=src)
            return
        try:
            out = core.on_message(src, body)
        except (ProtocolError, KeyError, TypeError, ValueError) as e:
            ctx.trace("mutex", PROTOCOL, str(mx), "malformed", sender=src, why=type(e).__name__)
            return
        self._emit(ctx, mx, core, out)

    def _emit(self, ctx, mx, core, out) -> None:
        for kind, info in core.events:
            ctx.trace("mutex", PROTOCOL, mx, kind, **info)
            if kind == "enter":
                self.entered.append((ctx.now, mx))
                if self.on_enter is not None:
                    self.on_enter(ctx, mx)
                else:
                    hold = getattr(self, "_holds", {}).get(mx, 1)
                    ctx.set_timer(hold, "release", mx)
        core.events.clear()
        for dst, msg in out:
            ctx.send(dst, PROTOCOL, msg)

    def done(self) -> bool:
        busy = any(c.state != "idle" for c in self.members.values())
        return not busy


def mx_request(node: MutexNode, ctx, mutex_id: str) -> None:
    node.request(ctx, mutex_id)


def mx_release(node: MutexNode, ctx, mutex_id: str) -> None:
    node.release(ctx, mutex_id)


# -- exhaustive model checking -------------------------------------------------


@dataclass
class CheckResult:
    states: int
    terminal: int
    violations: list
    ungranted: list
    max_transfers: int

    @property
    def ok(self) -> bool:
        return not self.violations and not self.ungranted


def model_check(layout: MutexLayout, requesters, rounds: int = 1, max_states: int = 2_000_000) -> CheckResult:
    """Explore every interleaving of requests, deliveries and releases.

    Each requester asks ``rounds`` times. Messages are delivered in any
    order, which covers every delay the network could impose.
    """
    leaders = {name: layout.make_leader(name) for name in layout.groups}
    members = {name: layout.make_member(name) for name in requesters}
    start = (leaders, members, (), tuple(sorted((r, rounds) for r in requesters)))
    seen = set()
    stack = [start]
    violations = []
    ungranted = set()
    terminal = 0
    max_tr = 0

    def fingerprint(state):
        ls, ms, flight, todo = state
        return (
            tuple(ls[k].key() for k in sorted(ls)),
            tuple(ms[k].key() for k in sorted(ms)),
            tuple(sorted(repr(f) for f in flight)),
            todo,
        )

    while stack:
        state = stack.pop()
        fp = fingerprint(state)
        if fp in seen:
            continue
        seen.add(fp)
        if len(seen) > max_states:
            raise RuntimeError("state space larger than max_states")
        ls, ms, flight, todo = state
        holding = [m for m in ms.values() if m.state == "holding"]
        if len(holding) > 1:
            violations.append(tuple(sorted(m.name for m in holding)))
            continue
        max_tr = max(max_tr, sum(lc.transfers for lc in ls.values()))
        moves = []
        for name, left in todo:
            if left and ms[name].state == "idle":
                moves.append(("req", name))
        for m in holding:
            moves.append(("rel", m.name))
        for i in range(len(flight)):
            moves.append(("msg", i))
        if not moves:
            terminal += 1
            for m in ms.values():
                if m.seq < rounds or m.state != "idle":
                    ungranted.add(m.name)
            continue
        for move in moves:
            ls2, ms2 = copy.deepcopy(ls), copy.deepcopy(ms)
            flight2 = list(flight)
            todo2 = todo
            if move[0] == "req":
                sender, out = move[1], ms2[move[1]].request()
                todo2 = tuple((r, n - 1 if r == move[1] else n) for r, n in todo)
            elif move[0] == "rel":
                sender, out = move[1], ms2[move[1]].release()
            else:
                src, sender, msg = flight2.pop(move[1])
                if msg["t"] == "GRANT":
                    out = ms2[sender].on_grant(msg)
                else:
                    out = ls2[sender].on_message(src, msg)
            for c in list(ls2.values()) + list(ms2.values()):
                c.events.clear()
            flight2.extend((sender, d, m) for d, m in out)
            stack.append((ls2, ms2, tuple(flight2), todo2))
    return CheckResult(len(seen), terminal, violations, sorted(ungranted), max_tr)
