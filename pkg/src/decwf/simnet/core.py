"""Deterministic discrete-event network simulator.

Time is logical. Every message sent at time ``t`` is delivered at some time
in ``[t + 1, t + dmax]``, drawn from the run's seeded generator; events with
equal time run in insertion order. Honest links never drop. Corrupted nodes
run ordinary node code but their outbound traffic goes through an adversary
script first.
"""

from __future__ import annotations

import copy
import heapq
import random
from dataclasses import dataclass, field

from decwf.encoding import canonical_json, hexdigest
from decwf.errors import ConfigError
from decwf.simnet.trace import Trace

SCRIPTS = ("silent", "equivocate", "delay-max", "replay", "payload-corrupt", "omit")

# (script, protocol tag) -> fn(node, ctx, dst, body, rng) -> body to send instead
_HOOKS = {}


def register_script_hook(script: str, protocol: str, fn) -> None:
    """Install a protocol-aware rewrite for ``equivocate`` or ``omit``."""
    _HOOKS[(script, protocol)] = fn


def register_equivocator(protocol: str, fn) -> None:
    register_script_hook("equivocate", protocol, fn)


@dataclass(frozen=True)
class Envelope:
    src: str
    dst: str
    protocol: str
    body: object
    sent: int
    deliver: int


@dataclass
class AdversarySpec:
    corrupted: dict = field(default_factory=dict)  # node -> script
    t: int | None = None
    drops: list = field(default_factory=list)  # (src, dst) links that lose everything
    replay_prob: float = 0.5

    def validate(self, nodes, t: int | None = None) -> None:
        budget = self.t if t is None else t
        unknown = [c for c in self.corrupted if c not in nodes]
        if unknown:
            raise ConfigError(f"corrupted nodes not in roster: {unknown}")
        bad = {c: s for c, s in self.corrupted.items() if s not in SCRIPTS}
        if bad:
            raise ConfigError(f"unknown adversary scripts {bad}; choose from {SCRIPTS}")
        if budget is not None and len(self.corrupted) > budget:
            raise ConfigError(f"{len(self.corrupted)} corrupted nodes exceed the budget t={budget}")
        for link in self.drops:
            src, dst = link
            if src not in self.corrupted:
                raise ConfigError(f"drop on honest link {src}->{dst}: honest links are fair by construction")

    def to_doc(self) -> dict:
        doc = {"corrupted": dict(self.corrupted)}
        if self.t is not None:
            doc["t"] = self.t
        if self.drops:
            doc["drops"] = [list(x) for x in self.drops]
        return doc

    @classmethod
    def from_doc(cls, doc) -> "AdversarySpec":
        if doc is None:
            return cls()
        if not isinstance(doc, dict):
            raise ConfigError("adversary must be a mapping")
        corrupted = doc.get("corrupted", {}) or {}
        if isinstance(corrupted, list):
            corrupted = {c["node"]: c["script"] for c in corrupted}
        drops = [tuple(x) for x in doc.get("drops", []) or []]
        return cls(dict(corrupted), doc.get("t"), drops, float(doc.get("replay_prob", 0.5)))


@dataclass
class TimeoutReport:
    tick_limit: int
    pending_events: int
    undone: list

    def __str__(self):
        return f"tick limit {self.tick_limit} reached with {self.pending_events} events pending; unfinished: {self.undone}"


@dataclass
class RunResult:
    trace: Trace
    nodes: dict
    timed_out: bool
    report: TimeoutReport | None
    messages: int
    end_time: int


class Node:
    """Base class for simulated participants. Override the ``on_*`` hooks."""

    def on_start(self, ctx: "Context") -> None:
        pass

    def on_message(self, ctx: "Context", src: str, protocol: str, body) -> None:
        pass

    def on_timer(self, ctx: "Context", name: str, data) -> None:
        pass

    def done(self) -> bool:
        return True


class Context:
    def __init__(self, sim: "Simulator", node_id: str):
        self._sim = sim
        self.node_id = node_id
        self.rng = random.Random(f"{sim.seed}|node|{node_id}")

    @property
    def now(self) -> int:
        return self._sim.now

    @property
    def peers(self) -> tuple:
        return self._sim.node_ids

    def send(self, dst: str, protocol: str, body) -> None:
        self._sim._send(self.node_id, dst, protocol, body)

    def broadcast(self, protocol: str, body, include_self: bool = True) -> None:
        for dst in self._sim.node_ids:
            if include_self or dst != self.node_id:
                self._sim._send(self.node_id, dst, protocol, body)

    def set_timer(self, delay: int, name: str, data=None) -> None:
        self._sim._push(self._sim.now + max(1, int(delay)), ("timer", self.node_id, name, data))

    def trace(self, kind: str, protocol: str = "-", instance="-", detail="-", **info) -> None:
        self._sim.trace.append(self._sim.now, self.node_id, kind, protocol, instance, detail, **info)


class Simulator:
    def __init__(
        self,
        nodes: dict,
        seed=0,
        dmax: int = 4,
        adversary: AdversarySpec | None = None,
        tick_limit: int = 100_000,
        t: int | None = None,
        trace_messages: bool = False,
    ):
        if dmax < 1:
            raise ConfigError("dmax must be at least 1")
        self.nodes = dict(nodes)
        self.node_ids = tuple(sorted(self.nodes))
        self.seed = seed
        self.dmax = int(dmax)
        self.adversary = adversary or AdversarySpec()
        self.adversary.validate(self.nodes, t)
        self.tick_limit = tick_limit
        self.trace_messages = trace_messages
        self.trace = Trace()
        self.now = 0
        self.messages = 0
        self._rng = random.Random(f"{seed}|net")
        self._adv_rng = random.Random(f"{seed}|adversary")
        self._heap = []
        self._seq = 0
        self._history = {c: [] for c in self.adversary.corrupted}
        self._drops = set(map(tuple, self.adversary.drops))
        self.contexts = {nid: Context(self, nid) for nid in self.node_ids}

    # event queue

    def _push(self, time: int, event) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (time, self._seq, event))

    def _send(self, src, dst, protocol, body) -> None:
        if dst not in self.nodes:
            raise ConfigError(f"{src} sent to unknown node {dst}")
        script = self.adversary.corrupted.get(src)
        if script is None:
            self._enqueue(src, dst, protocol, body, self._rng.randint(1, self.dmax))
            return
        if (src, dst) in self._drops or script == "silent":
            return
        rng = self._adv_rng
        delay = self._rng.randint(1, self.dmax)
        if script == "delay-max":
            delay = self.dmax
        elif script == "payload-corrupt":
            body = corrupt_payload(body, rng)
        elif script == "equivocate":
            if self.node_ids.index(dst) % 2 == 1:
                fn = _HOOKS.get((script, protocol))
                body = fn(self.nodes[src], self.contexts[src], dst, body, rng) if fn else corrupt_payload(body, rng)
        elif script == "omit":
            # withholds protocol-specific content; protocols without a hook pass through
            fn = _HOOKS.get((script, protocol))
            if fn is not None:
                body = fn(self.nodes[src], self.contexts[src], dst, body, rng)
        elif script == "replay":
            hist = self._history[src]
            if hist and rng.random() < self.adversary.replay_prob:
                old_protocol, old_body = hist[rng.randrange(len(hist))]
                self._enqueue(src, dst, old_protocol, old_body, rng.randint(1, self.dmax))
            hist.append((protocol, body))
        if body is None:
            return
        self._enqueue(src, dst, protocol, body, delay)

    def _enqueue(self, src, dst, protocol, body, delay) -> None:
        env = Envelope(src, dst, protocol, body, self.now, self.now + delay)
        self.messages += 1
        if self.trace_messages:
            self.trace.append(self.now, src, "send", protocol, "-", _body_digest(body), to=dst, at=env.deliver)
        self._push(env.deliver, ("msg", env))

    # main loop

    def run(self) -> RunResult:
        corrupted = ",".join(sorted(self.adversary.corrupted))
        scripts = ",".join(f"{k}:{v}" for k, v in sorted(self.adversary.corrupted.items()))
        self.trace.append(
            0, "sim", "setup", "sim", "-", "start", nodes=",".join(self.node_ids), corrupted=corrupted,
            scripts=scripts, seed=self.seed, dmax=self.dmax,
        )
        for nid in self.node_ids:
            self.nodes[nid].on_start(self.contexts[nid])
        timed_out = False
        while self._heap:
            time, _, event = self._heap[0]
            if time > self.tick_limit:
                timed_out = True
                break
            heapq.heappop(self._heap)
            self.now = time
            if event[0] == "msg":
                env = event[1]
                if self.trace_messages:
                    self.trace.append(time, env.dst, "recv", env.protocol, "-", _body_digest(env.body), frm=env.src)
                self.nodes[env.dst].on_message(self.contexts[env.dst], env.src, env.protocol, env.body)
            else:
                _, nid, name, data = event
                self.nodes[nid].on_timer(self.contexts[nid], name, data)
        report = None
        if timed_out:
            undone = [nid for nid in self.node_ids if nid not in self.adversary.corrupted and not self.nodes[nid].done()]
            report = TimeoutReport(self.tick_limit, len(self._heap), undone)
            self.now = max(self.now, self.tick_limit)
            self.trace.append(self.tick_limit, "sim", "timeout", "sim", "-", "tick-limit", pending=len(self._heap))
        self.trace.append(self.now, "sim", "end", "sim", "-", "timeout" if timed_out else "quiescent", messages=self.messages)
        return RunResult(self.trace, self.nodes, timed_out, report, self.messages, self.now)


def _body_digest(body) -> str:
    if isinstance(body, (bytes, bytearray)):
        return hexdigest(bytes(body))
    try:
        return hexdigest(canonical_json(body))
    except TypeError:
        return hexdigest(repr(body).encode())


def corrupt_payload(body, rng: random.Random):
    """Perturb one leaf of a message body; used by the payload-corrupt script."""
    if isinstance(body, (bytes, bytearray)):
        if not body:
            return body
        b = bytearray(body)
        b[rng.randrange(len(b))] ^= 1 << rng.randrange(8)
        return bytes(b)
    body = copy.deepcopy(body)
    leaves = []

    def walk(obj, path):
        if isinstance(obj, dict):
            for k in sorted(obj):
                walk(obj[k], path + (k,))
        elif isinstance(obj, list):
            for i, v in enumerate(obj):
                walk(v, path + (i,))
        else:
            leaves.append(path)

    walk(body, ())
    if not leaves:
        return body
    path = leaves[rng.randrange(len(leaves))]
    parent = body
    for key in path[:-1]:
        parent = parent[key]
    old = parent[path[-1]] if path else body
    new = _perturb(old, rng)
    if not path:
        return new
    parent[path[-1]] = new
    return body


def _perturb(v, rng):
    if isinstance(v, bool):
        return not v
    if isinstance(v, int):
        return v + 1 + rng.randrange(3)
    if isinstance(v, str):
        if v.isdigit():
            return str(int(v) + 1)
        return v + "x" if v else "x"
    if isinstance(v, (bytes, bytearray)):
        if not v:
            return b"\x00"
        b = bytearray(v)
        b[rng.randrange(len(b))] ^= 1 << rng.randrange(8)
        return bytes(b)
    if v is None:
        return 0
    return v
