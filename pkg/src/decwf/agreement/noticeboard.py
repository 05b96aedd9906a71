"""Distributed notice board: group-attested, single-assignment entries.

A publisher offers ``(key, epoch, value)`` to every member. Each distinct
value gets its own agreement instance; a member votes 1 for the first value
it saw for a ``(key, epoch)`` and 0 for any later one. When an instance
decides 1, a member signs ``(key, epoch, hash(value))`` unless it already
signed another value for that slot. ``n - t`` signatures form the
attestation, and since two quorums of that size share an honest member, at
most one value per slot can ever be attested.

Retrieval is verified locally, so the serving member need not be trusted.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from decwf.agreement.aba import AbaKeys
from decwf.agreement.host import AbaHost
from decwf.errors import IntegrityError, NotFound, PublishRejected
from decwf.simnet.core import AdversarySpec, Node, Simulator
from decwf.threshold_sig import CompositeSignature, SignatureShare, ts_combine, ts_sign_share, ts_verify, ts_verify_share

PROTOCOL = "nb"


def value_hash(value: bytes) -> str:
    return hashlib.sha256(value).hexdigest()


def nb_message(key: str, epoch: int, vhash: str) -> bytes:
    return f"decwf/nb|{key}|{epoch}|{vhash}".encode()


def nb_instance(key: str, epoch: int, vhash: str) -> str:
    return f"nb/{key}/{epoch}/{vhash}"


@dataclass(frozen=True)
class NoticeEntry:
    key: str
    epoch: int
    value: bytes
    attestation: CompositeSignature

    @property
    def vhash(self) -> str:
        return value_hash(self.value)

    def verify(self, vks) -> bool:
        return ts_verify(nb_message(self.key, self.epoch, self.vhash), self.attestation, vks)

    def to_doc(self, vks=None) -> dict:
        msg = nb_message(self.key, self.epoch, self.vhash)
        return {
            "key": self.key,
            "epoch": self.epoch,
            "value": self.value.hex(),
            "attestation": self.attestation.to_wire(msg, vks.dealing_id if vks else ""),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "NoticeEntry":
        return cls(doc["key"], int(doc["epoch"]), bytes.fromhex(doc["value"]), CompositeSignature.from_wire(doc["attestation"]))


class NoticeBoardNode(Node):
    def __init__(self, keys: AbaKeys, join_after: int = 40):
        self.keys = keys
        self.host = AbaHost(keys, on_decide=self._decided)
        self.join_after = join_after
        self.values = {}  # vhash -> value
        self.slot_of = {}  # instance -> (key, epoch, vhash)
        self.first_seen = {}  # (key, epoch) -> vhash
        self.signed = {}  # (key, epoch) -> vhash
        self.shares = {}  # instance -> {index: SignatureShare}
        self.accepted = set()
        self.store = {}  # (key, epoch) -> NoticeEntry
        self.flags = []
        self.outbox = []  # (delay, key, epoch, value) to publish on start

    def publish_later(self, key: str, value: bytes, epoch: int = 0, delay: int = 1) -> None:
        self.outbox.append((delay, key, epoch, bytes(value)))

    def on_start(self, ctx) -> None:
        pending, self.outbox = self.outbox, []
        for delay, key, epoch, value in pending:
            ctx.set_timer(delay, "publish", (key, epoch, value))

    def on_timer(self, ctx, name, data) -> None:
        if name == "publish":
            key, epoch, value = data
            ctx.trace("nb", PROTOCOL, nb_instance(key, epoch, value_hash(value)), "publish", key=key, epoch=epoch)
            ctx.broadcast(PROTOCOL, {"t": "offer", "key": key, "epoch": epoch, "value": value.hex()})
        elif name == "join":
            inst = data
            if inst not in self.host.instances or self.host.instances[inst].input_value is None:
                self.host.start(ctx, inst, 0)

    def on_message(self, ctx, src, protocol, body) -> None:
        if protocol == "aba":
            inst = body.get("inst") if isinstance(body, dict) else None
            if isinstance(inst, str) and inst not in self.host.instances and inst not in self.slot_of:
                parsed = _parse_instance(inst)
                if parsed is None:
                    return
                self.slot_of[inst] = parsed
                ctx.set_timer(self.join_after, "join", inst)
            self.host.handle(ctx, src, body)
            return
        if protocol != PROTOCOL or not isinstance(body, dict):
            return
        try:
            kind = body["t"]
            if kind == "offer":
                self._offer(ctx, body["key"], int(body["epoch"]), bytes.fromhex(body["value"]))
            elif kind == "sign":
                self._share(ctx, body["key"], int(body["epoch"]), body["vhash"], SignatureShare.from_wire(body["sig"]), src)
            elif kind == "entry":
                self._entry(ctx, NoticeEntry.from_doc(body["entry"]), src)
        except (KeyError, TypeError, ValueError, IndexError) as e:
            ctx.trace("nb", PROTOCOL, "-", "malformed", sender=src, why=type(e).__name__)

    def _offer(self, ctx, key, epoch, value) -> None:
        if not isinstance(key, str) or "/" in key:
            raise ValueError("bad key")
        h = value_hash(value)
        self.values[h] = value
        inst = nb_instance(key, epoch, h)
        self.slot_of[inst] = (key, epoch, h)
        started = inst in self.host.instances and self.host.instances[inst].input_value is not None
        if started:
            return
        first = self.first_seen.setdefault((key, epoch), h) == h
        self.host.start(ctx, inst, 1 if first else 0)

    def _decided(self, ctx, inst, value) -> None:
        slot = self.slot_of.get(inst)
        if slot is None:
            return
        key, epoch, h = slot
        if value != 1:
            ctx.trace("nb", PROTOCOL, inst, "rejected", key=key, epoch=epoch, vhash=h[:16])
            return
        self.accepted.add(inst)
        if (key, epoch) in self.signed:
            return
        self.signed[(key, epoch)] = h
        ss = ts_sign_share(nb_message(key, epoch, h), self.keys.sig_key, self.keys.vks)
        ctx.trace("nb", PROTOCOL, inst, "signed", key=key, epoch=epoch, vhash=h[:16])
        self.shares.setdefault(inst, {})[ss.index] = ss
        ctx.broadcast(PROTOCOL, {"t": "sign", "key": key, "epoch": epoch, "vhash": h, "sig": ss.to_wire()}, include_self=False)
        self._try_attest(ctx, key, epoch, h)

    def _share(self, ctx, key, epoch, h, ss, src) -> None:
        if ss.index != self.keys.index_of(src):
            raise ValueError("share index does not match sender")
        if not ts_verify_share(nb_message(key, epoch, h), ss, self.keys.vks):
            ctx.trace("nb", PROTOCOL, nb_instance(key, epoch, h), "suspect", sender=src)
            return
        inst = nb_instance(key, epoch, h)
        self.shares.setdefault(inst, {}).setdefault(ss.index, ss)
        self._try_attest(ctx, key, epoch, h)

    def _try_attest(self, ctx, key, epoch, h) -> None:
        if h not in self.values:
            return
        shares = self.shares.get(nb_instance(key, epoch, h), {})
        k = self.keys.quorum
        if len(shares) < k:
            return
        lowest = [shares[i] for i in sorted(shares)[:k]]
        comp = ts_combine(nb_message(key, epoch, h), lowest, self.keys.vks)
        self._offer_entry(ctx, NoticeEntry(key, epoch, self.values[h], comp))

    def _entry(self, ctx, entry: NoticeEntry, src) -> None:
        if not entry.verify(self.keys.vks):
            ctx.trace("nb", PROTOCOL, nb_instance(entry.key, entry.epoch, entry.vhash), "suspect", sender=src)
            return
        self.values.setdefault(entry.vhash, entry.value)
        self._offer_entry(ctx, entry)

    def _offer_entry(self, ctx, entry: NoticeEntry) -> None:
        # Members keep the attestation with the lexicographically smallest
        # contributor set and re-announce every improvement, so all honest
        # holders converge on one byte-identical entry.
        slot = (entry.key, entry.epoch)
        cur = self.store.get(slot)
        rank = tuple(entry.attestation.indices)
        if cur is not None and cur.vhash != entry.vhash:
            # cannot happen without a broken key; keep the first and say so
            ctx.trace("nb", PROTOCOL, nb_instance(entry.key, entry.epoch, entry.vhash), "conflict", key=entry.key)
            return
        if cur is not None and tuple(cur.attestation.indices) <= rank:
            return
        self.store[slot] = entry
        if cur is None:
            ctx.trace(
                "nb", PROTOCOL, nb_instance(entry.key, entry.epoch, entry.vhash), "attested",
                key=entry.key, epoch=entry.epoch, vhash=entry.vhash[:16],
            )
        ctx.broadcast(PROTOCOL, {"t": "entry", "entry": entry.to_doc(self.keys.vks)}, include_self=False)

    def done(self) -> bool:
        return self.host.all_decided()


def _parse_instance(inst: str):
    parts = inst.split("/")
    if len(parts) != 4 or parts[0] != "nb":
        return None
    try:
        return parts[1], int(parts[2]), parts[3]
    except ValueError:
        return None


def nb_retrieve(key: str, member: NoticeBoardNode, vks=None, epoch: int = 0):
    """Fetch and check an entry held by ``member``; returns (value, attestation)."""
    vks = vks if vks is not None else member.keys.vks
    entry = member.store.get((key, epoch))
    if entry is None:
        raise NotFound(f"no entry for {key!r} in epoch {epoch}")
    if not isinstance(entry.value, bytes) or not entry.verify(vks):
        member.flags.append(("bad-attestation", key, epoch))
        raise IntegrityError(f"entry for {key!r} does not match its attestation")
    return entry.value, entry.attestation


class NoticeBoard:
    """A set of member nodes whose state persists across publish calls."""

    def __init__(self, keys: dict, seed=0, dmax: int = 4, adversary: AdversarySpec | None = None, tick_limit=20_000):
        self.keys = keys
        self.members = tuple(sorted(keys))
        self.nodes = {m: NoticeBoardNode(keys[m]) for m in self.members}
        self.seed = seed
        self.dmax = dmax
        self.adversary = adversary
        self.tick_limit = tick_limit
        self.runs = 0
        self.last = None

    @property
    def vks(self):
        return self.keys[self.members[0]].vks

    def run(self):
        t = next(iter(self.keys.values())).t
        sim = Simulator(
            self.nodes, seed=f"{self.seed}|{self.runs}", dmax=self.dmax, adversary=self.adversary,
            tick_limit=self.tick_limit, t=t,
        )
        self.runs += 1
        self.last = sim.run()
        return self.last

    def publish(self, key: str, value: bytes, publisher=None, epoch: int = 0) -> NoticeEntry:
        publisher = publisher if publisher is not None else self.members[0]
        if publisher not in self.nodes:
            raise PublishRejected(f"{publisher} is not a member")
        self.nodes[publisher].publish_later(key, value, epoch)
        self.run()
        entry = self.nodes[publisher].store.get((key, epoch))
        if entry is None or entry.value != bytes(value):
            raise PublishRejected(f"value for {key!r} in epoch {epoch} was not attested")
        return entry

    def retrieve(self, key: str, member, epoch: int = 0):
        return nb_retrieve(key, self.nodes[member], self.vks, epoch)


def nb_publish(key: str, value: bytes, membership, keys: dict, epoch: int = 0, publisher=None, seed=0) -> NoticeEntry:
    """Publish on a fresh board formed by ``membership`` and return the entry."""
    board = NoticeBoard({m: keys[m] for m in membership}, seed=seed)
    return board.publish(key, value, publisher, epoch)
