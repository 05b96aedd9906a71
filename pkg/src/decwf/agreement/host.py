"""Running agreement instances on simulated nodes."""

from __future__ import annotations

from decwf.agreement.aba import AbaInstance, AbaKeys, equivocate_body
from decwf.errors import ProtocolError
from decwf.simnet.core import Node, register_equivocator

PROTOCOL = "aba"


class AbaHost:
    """Owns the agreement instances of one node and bridges them to the network.

    ``lazy_join`` starts an unknown instance with input 0 when its first
    message arrives; ``on_decide(ctx, instance_id, value)`` is called once per
    decided instance.
    """

    def __init__(self, keys: AbaKeys, lazy_join: bool = False, on_decide=None, trace_rounds: bool = True):
        self.keys = keys
        self.instances = {}
        self.lazy_join = lazy_join
        self.on_decide = on_decide
        self.trace_rounds = trace_rounds
        self._early = {}

    def start(self, ctx, instance_id: str, value: int) -> AbaInstance:
        inst = self.instances.get(instance_id)
        if inst is not None and inst.input_value is not None:
            raise ProtocolError(f"instance {instance_id} already started")
        if inst is None:
            inst = self.instances[instance_id] = AbaInstance(instance_id, self.keys)
        out = inst.start(value)
        for sender, body in self._early.pop(instance_id, []):
            out.extend(inst.handle(sender, body))
        self._flush(ctx, inst, out)
        return inst

    def handle(self, ctx, src: str, body) -> None:
        if not isinstance(body, dict):
            return
        instance_id = body.get("inst")
        if not isinstance(instance_id, str):
            return
        inst = self.instances.get(instance_id)
        sender = self.keys.index_of(src)
        if inst is None or inst.input_value is None:
            if self.lazy_join:
                self.start(ctx, instance_id, 0)
                inst = self.instances[instance_id]
            else:
                # hold messages for instances this node has not started yet
                self._early.setdefault(instance_id, []).append((sender, body))
                return
        self._flush(ctx, inst, inst.handle(sender, body))

    def _flush(self, ctx, inst: AbaInstance, out) -> None:
        for kind, info in inst.drain_events():
            if kind == "round" and not self.trace_rounds:
                continue
            if kind in ("suspect", "conflict"):
                ctx.trace("aba", PROTOCOL, inst.instance_id, kind, **info)
                continue
            ctx.trace("aba", PROTOCOL, inst.instance_id, kind, **info)
            if kind == "decide" and self.on_decide is not None:
                self.on_decide(ctx, inst.instance_id, info["value"])
        for body in out:
            ctx.broadcast(PROTOCOL, body, include_self=False)

    def all_decided(self) -> bool:
        return all(i.decision is not None for i in self.instances.values())


class AbaNode(Node):
    def __init__(self, keys: AbaKeys, inputs: dict):
        self.keys = keys
        self.inputs = dict(inputs)
        self.host = AbaHost(keys)

    def on_start(self, ctx) -> None:
        for instance_id in sorted(self.inputs):
            self.host.start(ctx, instance_id, self.inputs[instance_id])

    def on_message(self, ctx, src, protocol, body) -> None:
        if protocol == PROTOCOL:
            self.host.handle(ctx, src, body)

    def decisions(self) -> dict:
        return {k: i.decision for k, i in self.host.instances.items()}

    def done(self) -> bool:
        return self.host.all_decided()


def _equivocate(node, ctx, dst, body, rng):
    keys = getattr(node, "keys", None)
    if not isinstance(keys, AbaKeys) or not isinstance(body, dict):
        return body
    return equivocate_body(keys, body)


register_equivocator(PROTOCOL, _equivocate)
