"""Hierarchical anonymous broadcast channels with noise and mixing.

Nodes are named by a pseudonym, the hash of their public key. A node joins
the channel given by the first ``m`` bits of its pseudonym; nodes whose
channels are compatible (one prefix extends the other) are linked.

A packet for channel ``A`` travels to every node whose channel is
compatible with ``A`` and whose mask is at most ``m_A``. A relay never sends
a packet back where it came from, nor to nodes the previous hop already
covered, and drops packets it has seen before.

Every node emits exactly ``out_rate`` packets per tick on each of its links.
Slots not filled by buffered traffic carry noise addressed to the node's own
channel or an ancestor of it, which every eligible receiver already gets
from the sender directly, so noise is never relayed further. Real and noise
packets have the same size and layout, and the wire carries no sender
field.
"""

from __future__ import annotations

import hashlib
import random
from collections import OrderedDict, deque
from dataclasses import dataclass, field

from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey

from decwf.crypto_core import Drbg
from decwf.errors import IntegrityError, PolicyError
from decwf.simnet.core import Node
from decwf.symmetric import hkdf, open_sealed, seal

PROTOCOL = "anon"
PSEUDONYM_BITS = 256
PACKET_SIZE = 1024
PREFIX_BYTES = 32
MASK_BYTES = 2
HEADER = PREFIX_BYTES + MASK_BYTES
CT_LEN = PACKET_SIZE - HEADER
_EPH = 32
_NONCE = 12
_TAG = 16
_BODY = CT_LEN - _EPH - _NONCE - _TAG
MAX_PLAINTEXT = _BODY - 2
MIX_CAPACITY = 16
DEFAULT_OUT_RATE = 2


@dataclass(frozen=True)
class Pseudonym:
    bits: str

    @classmethod
    def of(cls, public_key: bytes) -> "Pseudonym":
        h = hashlib.sha256(public_key).digest()
        return cls("".join(format(b, "08b") for b in h))


@dataclass(frozen=True)
class ChannelId:
    prefix: str
    mask: int

    def __post_init__(self):
        if not isinstance(self.mask, int) or not 0 <= self.mask <= PSEUDONYM_BITS:
            raise PolicyError(f"mask must be in [0, {PSEUDONYM_BITS}]")
        if len(self.prefix) < self.mask or set(self.prefix) - {"0", "1"}:
            raise PolicyError("prefix must be a bit string at least mask bits long")
        object.__setattr__(self, "prefix", self.prefix[: self.mask])

    def compatible(self, other: "ChannelId") -> bool:
        a, b = self.prefix, other.prefix
        return a.startswith(b) or b.startswith(a)

    def ancestors(self) -> list:
        """This channel and every channel above it, root first."""
        return [ChannelId(self.prefix[:m], m) for m in range(self.mask + 1)]

    def to_bytes(self) -> bytes:
        bits = self.prefix.ljust(PREFIX_BYTES * 8, "0")
        raw = int(bits, 2).to_bytes(PREFIX_BYTES, "big") if bits else bytes(PREFIX_BYTES)
        return raw + self.mask.to_bytes(MASK_BYTES, "big")

    @classmethod
    def from_bytes(cls, data: bytes) -> "ChannelId":
        mask = int.from_bytes(data[PREFIX_BYTES:HEADER], "big")
        bits = "".join(format(b, "08b") for b in data[:PREFIX_BYTES])
        return cls(bits[:mask], mask)

    def __str__(self):
        return f"({self.prefix or '-'},{self.mask})"


class AnonIdentity:
    def __init__(self, name: str, private: X25519PrivateKey):
        self.name = name
        self._private = private
        self.public = private.public_key().public_bytes_raw()
        self.pseudonym = Pseudonym.of(self.public)

    @classmethod
    def generate(cls, name: str, seed=0) -> "AnonIdentity":
        raw = Drbg(f"{seed}|{name}", b"anon-identity").randbytes(32)
        return cls(name, X25519PrivateKey.from_private_bytes(raw))

    def exchange(self, peer_public: bytes) -> bytes:
        return self._private.exchange(X25519PublicKey.from_public_bytes(peer_public))

    def __repr__(self):
        return f"AnonIdentity({self.name!r})"


def join_channel(identity: AnonIdentity, m: int) -> ChannelId:
    if not isinstance(m, int) or not 0 <= m <= PSEUDONYM_BITS:
        raise PolicyError(f"mask must be in [0, {PSEUDONYM_BITS}]")
    return ChannelId(identity.pseudonym.bits[:m], m)


@dataclass(frozen=True)
class AnonPacket:
    target: ChannelId
    payload: bytes

    def __post_init__(self):
        if len(self.payload) != CT_LEN:
            raise PolicyError(f"payload must be exactly {CT_LEN} bytes")

    def to_bytes(self) -> bytes:
        return self.target.to_bytes() + self.payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "AnonPacket":
        if len(data) != PACKET_SIZE:
            raise PolicyError(f"packets are {PACKET_SIZE} bytes")
        return cls(ChannelId.from_bytes(data[:HEADER]), bytes(data[HEADER:]))

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()[:24]


def _kem_key(shared: bytes, eph: bytes, recipient: bytes) -> bytes:
    return hkdf(shared, b"decwf/anon|" + eph + recipient)


def seal_packet(target: ChannelId, plaintext: bytes, recipient_public: bytes, rnd: bytes) -> AnonPacket:
    """Encrypt to ``recipient_public``; ``rnd`` supplies 44 random bytes."""
    if len(plaintext) > MAX_PLAINTEXT:
        raise PolicyError(f"plaintext longer than {MAX_PLAINTEXT} bytes")
    eph_priv = X25519PrivateKey.from_private_bytes(rnd[:32])
    eph = eph_priv.public_key().public_bytes_raw()
    shared = eph_priv.exchange(X25519PublicKey.from_public_bytes(recipient_public))
    body = len(plaintext).to_bytes(2, "big") + plaintext
    body += bytes(_BODY - len(body))
    blob = seal(_kem_key(shared, eph, recipient_public), body, target.to_bytes(), nonce=rnd[32:44])
    return AnonPacket(target, eph + blob)


def open_packet(packet: AnonPacket, identity: AnonIdentity) -> bytes | None:
    eph = packet.payload[:_EPH]
    try:
        shared = identity.exchange(eph)
        body = open_sealed(_kem_key(shared, eph, identity.public), packet.payload[_EPH:], packet.target.to_bytes())
    except (IntegrityError, ValueError):
        return None
    n = int.from_bytes(body[:2], "big")
    return body[2 : 2 + n]


def noise_packet(target: ChannelId, rng: random.Random) -> AnonPacket:
    return AnonPacket(target, rng.randbytes(CT_LEN))


class ChannelTopology:
    """Static channel membership; links join every compatible pair."""

    def __init__(self, channels: dict):
        self.channels = dict(channels)
        names = sorted(self.channels)
        self._nbrs = {
            a: tuple(b for b in names if b != a and self.channels[a].compatible(self.channels[b])) for a in names
        }

    def neighbors(self, name: str) -> tuple:
        return self._nbrs[name]

    def eligible(self, name: str, target: ChannelId) -> tuple:
        return tuple(
            b for b in self._nbrs[name] if self.channels[b].compatible(target) and self.channels[b].mask <= target.mask
        )

    def members(self, target: ChannelId) -> list:
        """Nodes a packet for ``target`` must reach."""
        return sorted(
            n for n, c in self.channels.items() if c.compatible(target) and c.mask <= target.mask
        )


@dataclass
class NodeChannelState:
    name: str
    joined: ChannelId
    topology: ChannelTopology
    out_rate: int = DEFAULT_OUT_RATE
    capacity: int = MIX_CAPACITY
    seen_limit: int = 4096
    mix_buffer: list = field(default_factory=list)  # (packet, links)
    backlog: deque = field(default_factory=deque)
    seen: OrderedDict = field(default_factory=OrderedDict)

    @property
    def neighbors(self) -> tuple:
        return self.topology.neighbors(self.name)

    def _remember(self, digest: str) -> bool:
        if digest in self.seen:
            return False
        self.seen[digest] = True
        if len(self.seen) > self.seen_limit:
            self.seen.popitem(last=False)
        return True

    def _enqueue(self, packet: AnonPacket, links) -> None:
        if not links:
            return
        self.backlog.append((packet, tuple(links)))
        while self.backlog and len(self.mix_buffer) < self.capacity:
            self.mix_buffer.append(self.backlog.popleft())

    def anon_send(self, target: ChannelId, plaintext: bytes, recipient_public: bytes, rnd: bytes) -> AnonPacket:
        pkt = seal_packet(target, plaintext, recipient_public, rnd)
        self._remember(pkt.digest)
        self._enqueue(pkt, self.topology.eligible(self.name, target))
        return pkt

    def relay_step(self, packet: AnonPacket, arrival: str) -> tuple:
        """Queue ``packet`` for forwarding; returns the links it will use."""
        if not self._remember(packet.digest):
            return ()
        covered = set(self.topology.eligible(arrival, packet.target)) | {arrival}
        links = tuple(b for b in self.topology.eligible(self.name, packet.target) if b not in covered)
        self._enqueue(packet, links)
        return links

    def tick(self, rng: random.Random) -> dict:
        """Emit one tick of traffic: link -> exactly ``out_rate`` packets."""
        rng.shuffle(self.mix_buffer)
        chosen = self.mix_buffer[: self.out_rate]
        del self.mix_buffer[: self.out_rate]
        while self.backlog and len(self.mix_buffer) < self.capacity:
            self.mix_buffer.append(self.backlog.popleft())
        noise_targets = self.joined.ancestors()
        out = {link: [] for link in self.neighbors}
        for slot in range(self.out_rate):
            noise = noise_packet(noise_targets[rng.randrange(len(noise_targets))], rng)
            self._remember(noise.digest)
            pkt, links = chosen[slot] if slot < len(chosen) else (None, ())
            for link in out:
                out[link].append(pkt if link in links else noise)
        return out

    @property
    def pending(self) -> int:
        return len(self.mix_buffer) + len(self.backlog)


class LinkObserver:
    """Global passive adversary: sees every packet on every link."""

    def __init__(self):
        self.log = []  # (time, src, dst, digest)

    def record(self, time, src, dst, digest) -> None:
        self.log.append((time, src, dst, digest))


class AnonNode(Node):
    def __init__(self, identity: AnonIdentity, state: NodeChannelState, duration: int = 20, observer=None, directory=None):
        self.identity = identity
        self.state = state
        self.duration = duration
        self.observer = observer
        self.directory = directory or {}
        self.plan = []  # (tick, target, plaintext, recipient name)
        self.received = []
        self.sent = []
        self.reached = set()
        self._ticking = False

    def schedule_send(self, at: int, target: ChannelId, plaintext: bytes, recipient: str) -> None:
        self.plan.append((at, target, bytes(plaintext), recipient))

    def on_start(self, ctx) -> None:
        self._arm(ctx)

    def _arm(self, ctx) -> None:
        if not self._ticking:
            self._ticking = True
            ctx.set_timer(1, "tick")

    def on_timer(self, ctx, name, data) -> None:
        if name != "tick":
            return
        self._ticking = False
        now = ctx.now
        for item in [p for p in self.plan if p[0] <= now]:
            self.plan.remove(item)
            _, target, plaintext, recipient = item
            pub = self.directory.get(recipient)
            if pub is None:
                # unknown recipient: encrypt to a throwaway key so the packet still looks normal
                pub = X25519PrivateKey.from_private_bytes(ctx.rng.randbytes(32)).public_key().public_bytes_raw()
            pkt = self.state.anon_send(target, plaintext, pub, ctx.rng.randbytes(44))
            self.sent.append((now, pkt.digest))
            ctx.trace("anon", PROTOCOL, str(target), "originate", digest=pkt.digest)
        emitted = self.state.tick(ctx.rng)
        counts = {len(v) for v in emitted.values()}
        count = counts.pop() if len(counts) == 1 else "mixed"
        if emitted:
            ctx.trace("anon", PROTOCOL, str(self.state.joined), "emit", count=count, rate=self.state.out_rate)
        for link in sorted(emitted):
            for pkt in emitted[link]:
                if self.observer is not None:
                    self.observer.record(now, self.identity.name, link, pkt.digest)
                ctx.send(link, PROTOCOL, pkt.to_bytes())
        if now < self.duration or self.state.pending or self.plan:
            self._arm(ctx)

    def on_message(self, ctx, src, protocol, body) -> None:
        if protocol != PROTOCOL:
            return
        try:
            pkt = AnonPacket.from_bytes(body)
        except (PolicyError, TypeError):
            ctx.trace("anon", PROTOCOL, "-", "malformed", sender=src)
            return
        if pkt.digest in self.state.seen:
            return
        if self.state.joined.compatible(pkt.target) and self.state.joined.mask <= pkt.target.mask:
            plain = open_packet(pkt, self.identity)
            if plain is not None:
                self.received.append(plain)
                ctx.trace("anon", PROTOCOL, str(pkt.target), "deliver", digest=pkt.digest)
            self.reached.add(pkt.digest)
        if self.state.relay_step(pkt, src):
            self._arm(ctx)

    def done(self) -> bool:
        return not self.state.pending and not self.plan


def first_emission_guess(log, send_time: int, window: int, candidates, rng: random.Random) -> str:
    """Guess the originator as the node emitting the most new digests after ``send_time``."""
    first = {}
    for time, src, _dst, digest in log:
        if digest not in first:
            first[digest] = (time, src)
    counts = {c: 0 for c in candidates}
    for time, src in first.values():
        if send_time <= time <= send_time + window and src in counts:
            counts[src] += 1
    best = max(counts.values())
    tied = sorted(c for c, v in counts.items() if v == best)
    return tied[rng.randrange(len(tied))]


def build_channel(n: int, seed=0, mask: int = 0, out_rate: int = DEFAULT_OUT_RATE, duration: int = 12, prefix="n"):
    names = [f"{prefix}{i}" for i in range(n)]
    ids = {nm: AnonIdentity.generate(nm, seed=f"{seed}|id") for nm in names}
    channels = {nm: join_channel(ids[nm], mask) for nm in names}
    topo = ChannelTopology(channels)
    obs = LinkObserver()
    directory = {nm: i.public for nm, i in ids.items()}
    nodes = {
        nm: AnonNode(ids[nm], NodeChannelState(nm, channels[nm], topo, out_rate), duration, obs, directory) for nm in names
    }
    return nodes, topo, obs


def simulate_anonymity(n: int, seed: int, out_rate: int = DEFAULT_OUT_RATE, send_at: int = 4, window: int = 3, dmax: int = 3):
    """One attacker trial; returns (sender, guess, run result, nodes)."""
    from decwf.simnet.core import Simulator

    rng = random.Random(f"{seed}|anon-trial")
    nodes, topo, obs = build_channel(n, seed=seed, out_rate=out_rate, duration=send_at + window + 2)
    names = sorted(nodes)
    sender = names[rng.randrange(n)]
    recipient = rng.choice([m for m in names if m != sender])
    nodes[sender].schedule_send(send_at, nodes[sender].state.joined, b"hello from somewhere", recipient)
    result = Simulator(nodes, seed=seed, dmax=dmax).run()
    guess = first_emission_guess(obs.log, send_at, window, names, random.Random(f"{seed}|attacker"))
    return sender, guess, result, nodes
