"""Conference key agreement with misbehaviour filtering.

Every member holds a long-term key pair ``(x_i, y_i = g^x_i)``; the
directory of public keys is known to all. A session runs in four steps:

1. **contribute** - member ``i`` picks a session ephemeral ``r_i`` and a
   nonce ``u_i``, and broadcasts one signed message holding ``R_i = g^r_i``,
   a commitment ``H(u_i)`` and ``u_i`` encrypted to every other member under
   a key derived from ``y_j^r_i``;
2. **echo** - every member re-broadcasts, signed, the contributions it
   received. A recipient whose ciphertext did not open to the committed
   nonce attaches ``S = R_i^x_j`` and a proof that ``S`` is correct, so the
   complaint can be judged by anyone;
3. **filter** - from the echoes each member derives the same exclusion set:
   senders seen with two signed versions, senders nobody received, proven
   bad encryptions, false complaints and members that never echoed;
4. **establish** - survivors send a fresh ``w_i`` to the other survivors
   only, derive the master key from the survivors' ``u`` and ``w`` values and
   exchange key confirmations. Any mismatch aborts the session, so members
   never end up holding different keys.

Excluded members saw the ``u`` values but never the ``w`` values, so they
cannot recompute the master key. Session keys are derived one-way from the
master key and fresh per-session nonces; only session keys encrypt payloads.
"""

from __future__ import annotations

import hashlib
import hmac
from collections import defaultdict
from dataclasses import dataclass, field

from decwf.crypto_core import DleqProof, Drbg, GroupParams, dleq_prove, dleq_verify
from decwf.encoding import canonical_json
from decwf.errors import IntegrityError, ProtocolError, SessionAborted
from decwf.simnet.core import Node, register_equivocator
from decwf.symmetric import hkdf, open_sealed, seal

PROTOCOL = "gk"
NONCE_BYTES = 32


@dataclass(frozen=True)
class LongTermKey:
    member: str
    x: int
    params: GroupParams

    @property
    def public(self) -> int:
        return self.params.exp(self.params.g, self.x)

    def __repr__(self):
        return f"LongTermKey(member={self.member!r})"


def gk_keygen(members, params: GroupParams, seed=0):
    """Long-term key pairs and the public directory for ``members``."""
    rng = Drbg(seed, b"gk-longterm")
    keys = {m: LongTermKey(m, rng.nonzero_scalar(params.q), params) for m in sorted(members)}
    return keys, {m: k.public for m, k in keys.items()}


def _sig_context(msg: bytes) -> bytes:
    return b"decwf/gk-sig|" + hashlib.sha256(msg).digest()


def sign(ltk: LongTermKey, msg: bytes) -> DleqProof:
    p = ltk.params
    return dleq_prove(ltk.x, p.g, p.g, p, context=_sig_context(msg))


def verify_sig(y: int, msg: bytes, proof, params: GroupParams) -> bool:
    return dleq_verify(proof, params.g, params.g, y, y, params, context=_sig_context(msg))


def pair_key(params: GroupParams, shared: int, session_id: str, sender: str, recipient: str, phase: str) -> bytes:
    info = f"decwf/gk/pair|{session_id}|{phase}|{sender}|{recipient}".encode()
    return hkdf(params.encode(shared), info)


# wire objects


@dataclass(frozen=True)
class NonceContribution:
    session_id: str
    member: str
    R: int
    commitment: str
    ciphertexts: dict  # recipient -> bytes
    signature: DleqProof | None = None

    def body(self) -> bytes:
        return canonical_json(
            {
                "session": self.session_id,
                "member": self.member,
                "R": str(self.R),
                "commit": self.commitment,
                "cts": {r: c.hex() for r, c in sorted(self.ciphertexts.items())},
            }
        )

    @property
    def digest(self) -> str:
        sig = self.signature.to_wire() if self.signature else []
        return hashlib.sha256(self.body() + canonical_json(sig)).hexdigest()

    def to_wire(self) -> dict:
        return {
            "session": self.session_id,
            "member": self.member,
            "R": str(self.R),
            "commit": self.commitment,
            "cts": {r: c.hex() for r, c in sorted(self.ciphertexts.items())},
            "sig": self.signature.to_wire() if self.signature else None,
        }

    @classmethod
    def from_wire(cls, w: dict) -> "NonceContribution":
        cts = {str(r): bytes.fromhex(c) for r, c in w["cts"].items()}
        sig = DleqProof.from_wire(w["sig"]) if w.get("sig") is not None else None
        return cls(str(w["session"]), str(w["member"]), int(w["R"]), str(w["commit"]), cts, sig)


@dataclass(frozen=True)
class Echo:
    session_id: str
    echoer: str
    entries: dict  # sender -> {"c": contribution wire or None, "complaint": None or {"S", "proof"}}
    signature: DleqProof | None = None

    def body(self) -> bytes:
        return canonical_json({"session": self.session_id, "echoer": self.echoer, "entries": self.entries})

    @property
    def digest(self) -> str:
        """Hash of the (sender, contribution digest) vector this echo reports."""
        vec = []
        for s in sorted(self.entries):
            c = self.entries[s].get("c")
            vec.append([s, NonceContribution.from_wire(c).digest if c else None])
        return hashlib.sha256(canonical_json(vec)).hexdigest()

    def to_wire(self) -> dict:
        return {
            "session": self.session_id,
            "echoer": self.echoer,
            "entries": self.entries,
            "sig": self.signature.to_wire() if self.signature else None,
        }

    @classmethod
    def from_wire(cls, w: dict) -> "Echo":
        sig = DleqProof.from_wire(w["sig"]) if w.get("sig") is not None else None
        return cls(str(w["session"]), str(w["echoer"]), dict(w["entries"]), sig)


# key material


class _Secret:
    __slots__ = ("_key", "label")

    def __init__(self, key: bytes, label: str):
        self._key = bytearray(key)
        self.label = label

    @property
    def key(self) -> bytes:
        if not any(self._key) and len(self._key) == 32:
            raise ProtocolError(f"{type(self).__name__} {self.label!r} was zeroized")
        return bytes(self._key)

    def zeroize(self) -> None:
        for i in range(len(self._key)):
            self._key[i] = 0

    @property
    def zeroized(self) -> bool:
        return not any(self._key)

    def fingerprint(self) -> str:
        return hashlib.sha256(b"decwf/gk/fp|" + bytes(self._key)).hexdigest()[:16]

    def __eq__(self, other):
        return type(other) is type(self) and hmac.compare_digest(bytes(self._key), bytes(other._key))

    def __hash__(self):
        return hash((type(self).__name__, self.fingerprint()))

    def __repr__(self):
        return f"{type(self).__name__}(label={self.label!r}, fp={self.fingerprint()})"


class MasterKey(_Secret):
    """Root of a conference; never used to encrypt payload traffic."""


class SessionKey(_Secret):
    def seal(self, plaintext: bytes, aad: bytes = b"", nonce: bytes | None = None) -> bytes:
        return seal(self.key, plaintext, aad, nonce)

    def open(self, blob: bytes, aad: bytes = b"") -> bytes:
        return open_sealed(self.key, blob, aad)


def payload_seal(key: SessionKey, plaintext: bytes, aad: bytes = b"", nonce: bytes | None = None) -> bytes:
    if not isinstance(key, SessionKey):
        raise TypeError("payloads are encrypted under session keys only")
    return key.seal(plaintext, aad, nonce)


def payload_open(key: SessionKey, blob: bytes, aad: bytes = b"") -> bytes:
    if not isinstance(key, SessionKey):
        raise TypeError("payloads are decrypted under session keys only")
    return key.open(blob, aad)


def gk_session_key(master: MasterKey, session_id: str, nonces) -> SessionKey:
    if not isinstance(master, MasterKey):
        raise TypeError("session keys derive from a master key")
    salt = hashlib.sha256(b"".join(sorted(bytes(n) for n in nonces))).digest()
    return SessionKey(hkdf(master.key, f"decwf/gk/session|{session_id}".encode(), salt=salt), session_id)


# one member's view of a session


class KeySession:
    def __init__(self, session_id: str, members, ltk: LongTermKey, directory: dict, params: GroupParams | None = None):
        self.session_id = session_id
        self.members = tuple(sorted(members))
        if ltk.member not in self.members:
            raise ProtocolError(f"{ltk.member} is not a session member")
        self.me = ltk.member
        self.ltk = ltk
        self.params = params or ltk.params
        self.directory = dict(directory)
        self.status = "collecting"
        self.contributions = {}
        self.echoes = {}
        self.nonces = {}
        self.complaints = {}
        self.conflicts = {}
        self.survivors = None
        self.excluded = frozenset()
        self.w_values = {}
        self.master = None
        self._r = None
        self._w = None
        self._rng = None
        self._version_of = {}

    # contribute

    def contribute(self, seed=0) -> NonceContribution:
        p = self.params
        self._rng = Drbg(f"{seed}|{self.session_id}|{self.me}", b"gk-session")
        self._r = self._rng.nonzero_scalar(p.q)
        u = self._rng.randbytes(NONCE_BYTES)
        c = self._build(u, self._r)
        self.nonces[self.me] = u
        self.contributions[self.me] = c
        return c

    def _build(self, u: bytes, r: int, garble=()) -> NonceContribution:
        p = self.params
        cts = {}
        for j in self.members:
            if j == self.me:
                continue
            shared = p.exp(self.directory[j], r)
            key = pair_key(p, shared, self.session_id, self.me, j, "u")
            pt = u if j not in garble else bytes(NONCE_BYTES)
            cts[j] = seal(key, pt, self._aad(self.me, j, "u"), nonce=self._rng.randbytes(12))
        c = NonceContribution(self.session_id, self.me, p.exp(p.g, r), hashlib.sha256(u).hexdigest(), cts)
        return NonceContribution(c.session_id, c.member, c.R, c.commitment, c.ciphertexts, sign(self.ltk, c.body()))

    def alternative_contribution(self, rng) -> NonceContribution:
        """A second, validly signed contribution with a different nonce (misbehaviour)."""
        u = bytes(rng.getrandbits(8) for _ in range(NONCE_BYTES))
        return self._build(u, self._r)

    def garbled_contribution(self, victims) -> NonceContribution:
        """Same commitment, but ``victims`` get an encryption of the wrong nonce."""
        return self._build(self.nonces[self.me], self._r, garble=set(victims))

    def _aad(self, sender, recipient, phase) -> bytes:
        return f"{self.session_id}|{phase}|{sender}|{recipient}".encode()

    def valid_contribution(self, c: NonceContribution, sender: str) -> bool:
        if not isinstance(c, NonceContribution) or c.member != sender or c.session_id != self.session_id:
            return False
        if sender not in self.members or not self.params.is_element(c.R):
            return False
        if set(c.ciphertexts) != set(self.members) - {sender}:
            return False
        return verify_sig(self.directory[sender], c.body(), c.signature, self.params)

    def receive_contribution(self, c: NonceContribution) -> bool:
        if not self.valid_contribution(c, c.member):
            return False
        held = self.contributions.get(c.member)
        if held is not None:
            if held.digest != c.digest:
                # two signed versions: keep the second as evidence
                self.conflicts.setdefault(c.member, c)
            return False
        self.contributions[c.member] = c
        self._open_nonce(c)
        return True

    def _open_nonce(self, c: NonceContribution) -> None:
        p = self.params
        shared = p.exp(c.R, self.ltk.x)
        key = pair_key(p, shared, self.session_id, c.member, self.me, "u")
        try:
            u = open_sealed(key, c.ciphertexts[self.me], self._aad(c.member, self.me, "u"))
        except IntegrityError:
            u = None
        if u is not None and hashlib.sha256(u).hexdigest() == c.commitment:
            self.nonces[c.member] = u
        else:
            proof = dleq_prove(self.ltk.x, p.g, c.R, p, context=self._complaint_ctx(c))
            self.complaints[c.member] = {"S": str(shared), "proof": proof.to_wire()}

    def _complaint_ctx(self, c: NonceContribution) -> bytes:
        return f"decwf/gk-complaint|{self.session_id}|{c.member}|{c.digest}".encode()

    # echo

    def make_echo(self) -> Echo:
        entries = {}
        for i in self.members:
            c = self.contributions.get(i)
            alt = self.conflicts.get(i)
            entries[i] = {
                "c": c.to_wire() if c else None,
                "also": alt.to_wire() if alt else None,
                "complaint": self.complaints.get(i),
            }
        e = Echo(self.session_id, self.me, entries)
        e = Echo(e.session_id, e.echoer, e.entries, sign(self.ltk, e.body()))
        self.echoes[self.me] = e
        self.status = "echoing"
        return e

    def receive_echo(self, e: Echo) -> bool:
        if e.echoer in self.echoes or e.session_id != self.session_id or e.echoer not in self.members:
            return False
        if not verify_sig(self.directory[e.echoer], e.body(), e.signature, self.params):
            return False
        self.echoes[e.echoer] = e
        # a contribution we missed may arrive inside someone's echo
        for i, ent in sorted(e.entries.items()):
            if not isinstance(ent, dict):
                continue
            for slot in ("c", "also"):
                if ent.get(slot):
                    try:
                        self.receive_contribution(NonceContribution.from_wire(ent[slot]))
                    except (KeyError, TypeError, ValueError):
                        pass
        return True

    # filter

    def filter(self) -> frozenset:
        guilty = set(m for m in self.members if m not in self.echoes)
        versions = defaultdict(dict)
        for j in sorted(self.echoes):
            for i, ent in sorted(self.echoes[j].entries.items()):
                if i not in self.members or not isinstance(ent, dict):
                    continue
                for slot in ("c", "also"):
                    if not ent.get(slot):
                        continue
                    try:
                        c = NonceContribution.from_wire(ent[slot])
                    except (KeyError, TypeError, ValueError):
                        guilty.add(j)
                        continue
                    if not self.valid_contribution(c, i):
                        guilty.add(j)
                        continue
                    versions[i][c.digest] = c
        # evidence that reached us after the echoes went out still counts;
        # if it makes our view differ, key confirmation fails and we abort
        for i, c in self.conflicts.items():
            versions[i][c.digest] = c
        for i in self.members:
            if len(versions[i]) != 1:
                guilty.add(i)
        for j in sorted(self.echoes):
            for i, ent in sorted(self.echoes[j].entries.items()):
                if i not in self.members or not isinstance(ent, dict) or not ent.get("complaint"):
                    continue
                if len(versions[i]) != 1 or i == j:
                    continue
                (c,) = versions[i].values()
                guilty.add(self._judge(c, j, ent["complaint"]))
        self.excluded = frozenset(guilty)
        self.survivors = frozenset(m for m in self.members if m not in guilty)
        self._version_of = {i: next(iter(versions[i].values())) for i in self.survivors}
        if self.me not in self.survivors:
            self.status = "excluded"
            return self.survivors
        if len(self.members) > 1 and len(self.survivors) < 2:
            self.status = "aborted"
            raise SessionAborted(f"only {len(self.survivors)} survivor(s)")
        for i in self.survivors:
            if i != self.me and i not in self.nonces:
                # we hold the agreed contribution but it did not open for us
                self.status = "aborted"
                raise SessionAborted(f"no usable nonce from {i}")
        self.status = "filtered"
        return self.survivors

    def _judge(self, c: NonceContribution, complainer: str, complaint) -> str:
        """Return the party at fault for a decryption complaint."""
        p = self.params
        try:
            shared = int(complaint["S"])
            proof = DleqProof.from_wire(complaint["proof"])
        except (KeyError, TypeError, ValueError):
            return complainer
        y = self.directory[complainer]
        ctx = f"decwf/gk-complaint|{self.session_id}|{c.member}|{c.digest}".encode()
        if not dleq_verify(proof, p.g, c.R, y, shared, p, context=ctx):
            return complainer
        key = pair_key(p, shared, self.session_id, c.member, complainer, "u")
        try:
            u = open_sealed(key, c.ciphertexts[complainer], self._aad(c.member, complainer, "u"))
        except IntegrityError:
            return c.member
        return complainer if hashlib.sha256(u).hexdigest() == c.commitment else c.member

    # establish

    def make_w(self) -> dict:
        if self.status != "filtered":
            raise ProtocolError("filter before phase two")
        p = self.params
        self._w = self._rng.randbytes(NONCE_BYTES)
        self.w_values[self.me] = self._w
        out = {}
        for j in sorted(self.survivors):
            if j == self.me:
                continue
            key = pair_key(p, p.exp(self.directory[j], self._r), self.session_id, self.me, j, "w")
            out[j] = seal(key, self._w, self._aad(self.me, j, "w"), nonce=self._rng.randbytes(12))
        return out

    def receive_w(self, sender: str, blob: bytes) -> bool:
        if self.survivors is None or sender not in self.survivors or sender in self.w_values:
            return False
        p = self.params
        c = self._version_of[sender]
        key = pair_key(p, p.exp(c.R, self.ltk.x), self.session_id, sender, self.me, "w")
        try:
            self.w_values[sender] = open_sealed(key, blob, self._aad(sender, self.me, "w"))
        except IntegrityError:
            return False
        return True

    def ready(self) -> bool:
        return self.survivors is not None and all(s in self.w_values for s in self.survivors)

    def establish(self) -> MasterKey:
        if self.status not in ("filtered", "confirming"):
            raise ProtocolError(f"cannot establish from status {self.status}")
        order = sorted(self.survivors)
        missing = [s for s in order if s not in self.nonces or s not in self.w_values]
        if missing:
            raise ProtocolError(f"missing contributions from {missing}")
        ikm = bytearray()
        for s in order:
            ikm += len(s).to_bytes(2, "big") + s.encode()
        for s in order:
            ikm += self.nonces[s]
        for s in order:
            ikm += self.w_values[s]
        self.master = MasterKey(hkdf(bytes(ikm), f"decwf/gk/master|{self.session_id}".encode()), self.session_id)
        self.status = "confirming"
        return self.master

    def confirmation(self) -> str:
        return hmac.new(self.master.key, f"decwf/gk/confirm|{self.session_id}".encode(), "sha256").hexdigest()

    def confirm(self, tags: dict) -> MasterKey:
        mine = self.confirmation()
        for s in sorted(self.survivors):
            if s == self.me:
                continue
            if not hmac.compare_digest(str(tags.get(s, "")), mine):
                self.abort()
                raise SessionAborted(f"key confirmation from {s} does not match")
        self.status = "established"
        return self.master

    def abort(self) -> None:
        if self.master is not None:
            self.master.zeroize()
        self.status = "aborted"

    def close(self) -> None:
        """Erase per-session secrets."""
        self._r = None
        self._w = None
        for k in list(self.nonces):
            self.nonces[k] = b""
        self.w_values.clear()


# functional wrappers


def gk_contribute(member: LongTermKey, session: KeySession, seed=0) -> NonceContribution:
    if session.me != member.member:
        raise ProtocolError("contribution must come from the session owner")
    return session.contribute(seed)


def gk_filter(session: KeySession, echoes) -> frozenset:
    for e in echoes.values() if isinstance(echoes, dict) else echoes:
        session.receive_echo(e)
    return session.filter()


def gk_establish(session: KeySession) -> MasterKey:
    return session.establish()


def run_key_session(session_id: str, members, ltks: dict, directory: dict, seed=0, params=None) -> dict:
    """Run a session in-process with every member honest; returns member -> MasterKey."""
    sessions = {m: KeySession(session_id, members, ltks[m], directory, params) for m in sorted(members)}
    contribs = [s.contribute(seed) for s in sessions.values()]
    for s in sessions.values():
        for c in contribs:
            if c.member != s.me:
                s.receive_contribution(c)
    echoes = [s.make_echo() for s in sessions.values()]
    for s in sessions.values():
        for e in echoes:
            if e.echoer != s.me:
                s.receive_echo(e)
        s.filter()
    ws = {m: s.make_w() for m, s in sessions.items()}
    for m, s in sessions.items():
        for sender, blobs in ws.items():
            if m in blobs:
                s.receive_w(sender, blobs[m])
    for s in sessions.values():
        s.establish()
    tags = {m: s.confirmation() for m, s in sessions.items()}
    out = {m: s.confirm(tags) for m, s in sessions.items()}
    for s in sessions.values():
        s.close()
    return out


@dataclass
class ScopeHandle:
    """A provisioned scope: every member's session key for one data scope."""

    scope_id: str
    members: tuple
    keys: dict = field(repr=False)  # member -> SessionKey

    def key_for(self, member: str) -> SessionKey:
        try:
            return self.keys[member]
        except KeyError:
            raise PermissionError(f"{member} holds no key for scope {self.scope_id}") from None

    def close(self) -> None:
        for k in self.keys.values():
            k.zeroize()


def create_scope_key(scope_id: str, members, ltks: dict, directory: dict, seed=0, params=None) -> ScopeHandle:
    members = tuple(sorted(set(members)))
    if not members:
        raise ProtocolError(f"scope {scope_id} has no members")
    masters = run_key_session(f"scope/{scope_id}", members, ltks, directory, seed, params)
    nonce = hashlib.sha256(f"decwf/scope-nonce|{scope_id}|{seed}".encode()).digest()
    keys = {m: gk_session_key(k, scope_id, [nonce]) for m, k in masters.items()}
    for k in masters.values():
        k.zeroize()
    return ScopeHandle(scope_id, members, keys)


# simulated protocol


class GroupKeyNode(Node):
    """Runs one session over the simulator; ``wait`` bounds each phase."""

    def __init__(self, session_id, members, ltk: LongTermKey, directory, seed=0, wait: int = 12):
        self.session = KeySession(session_id, members, ltk, directory)
        self.seed = seed
        self.wait = wait
        self.tags = {}
        self.error = None
        self._alt = None
        self._early_w = {}
        self._phase = "contrib"

    @property
    def members(self):
        return self.session.members

    def _bcast(self, ctx, body, to=None) -> None:
        for dst in sorted(to if to is not None else self.members):
            if dst != self.session.me:
                ctx.send(dst, PROTOCOL, body)

    def on_start(self, ctx) -> None:
        c = self.session.contribute(self.seed)
        self._bcast(ctx, {"t": "contrib", "c": c.to_wire()})
        ctx.set_timer(self.wait, "phase", "contrib")
        self._maybe_echo(ctx)

    def on_timer(self, ctx, name, data) -> None:
        if name != "phase" or data != self._phase:
            return
        if data == "contrib":
            self._echo(ctx)
        elif data == "echo":
            self._filter(ctx)
        elif data in ("w", "confirm"):
            self._fail(ctx, f"timed out in phase {data}")

    def on_message(self, ctx, src, protocol, body) -> None:
        if protocol != PROTOCOL or not isinstance(body, dict) or self.session.status in ("aborted", "excluded", "established"):
            return
        try:
            kind = body["t"]
            if kind == "contrib":
                c = NonceContribution.from_wire(body["c"])
                if c.member == src and self._phase == "contrib":
                    self.session.receive_contribution(c)
                    self._maybe_echo(ctx)
            elif kind == "echo":
                e = Echo.from_wire(body["e"])
                if e.echoer == src:
                    self.session.receive_echo(e)
                    if self._phase == "echo" and len(self.session.echoes) == len(self.members):
                        self._filter(ctx)
            elif kind == "w":
                blob = bytes.fromhex(body["ct"])
                if self.session.survivors is None:
                    self._early_w.setdefault(src, blob)
                elif self.session.receive_w(src, blob):
                    self._maybe_establish(ctx)
            elif kind == "confirm":
                self.tags.setdefault(src, str(body["tag"]))
                self._maybe_confirm(ctx)
        except (KeyError, TypeError, ValueError, IndexError) as e:
            ctx.trace("gk", PROTOCOL, self.session.session_id, "malformed", sender=src, why=type(e).__name__)

    def _maybe_echo(self, ctx) -> None:
        if self._phase == "contrib" and len(self.session.contributions) == len(self.members):
            self._echo(ctx)

    def _echo(self, ctx) -> None:
        self._phase = "echo"
        e = self.session.make_echo()
        self._bcast(ctx, {"t": "echo", "e": e.to_wire()})
        ctx.set_timer(self.wait, "phase", "echo")
        if len(self.session.echoes) == len(self.members):
            self._filter(ctx)

    def _filter(self, ctx) -> None:
        if self._phase != "echo":
            return
        self._phase = "w"
        sid = self.session.session_id
        try:
            survivors = self.session.filter()
        except SessionAborted as e:
            self._fail(ctx, str(e))
            return
        ctx.trace("gk", PROTOCOL, sid, "filtered", survivors=",".join(sorted(survivors)),
                  excluded=",".join(sorted(self.session.excluded)))
        if self.session.status == "excluded":
            return
        for dst, blob in self.session.make_w().items():
            ctx.send(dst, PROTOCOL, {"t": "w", "ct": blob.hex()})
        for src, blob in sorted(self._early_w.items()):
            self.session.receive_w(src, blob)
        self._early_w.clear()
        ctx.set_timer(self.wait, "phase", "w")
        self._maybe_establish(ctx)

    def _maybe_establish(self, ctx) -> None:
        if self._phase != "w" or not self.session.ready():
            return
        self._phase = "confirm"
        self.session.establish()
        survivors = self.session.survivors
        self._bcast(ctx, {"t": "confirm", "tag": self.session.confirmation()}, to=survivors)
        ctx.set_timer(self.wait, "phase", "confirm")
        self._maybe_confirm(ctx)

    def _maybe_confirm(self, ctx) -> None:
        if self._phase != "confirm":
            return
        others = [s for s in self.session.survivors if s != self.session.me]
        if not all(s in self.tags for s in others):
            return
        try:
            master = self.session.confirm(self.tags)
        except SessionAborted as e:
            self._fail(ctx, str(e))
            return
        self._phase = "done"
        ctx.trace("gk", PROTOCOL, self.session.session_id, "established", fp=master.fingerprint(),
                  survivors=",".join(sorted(self.session.survivors)))

    def _fail(self, ctx, why: str) -> None:
        self.session.abort()
        self._phase = "done"
        self.error = why
        ctx.trace("gk", PROTOCOL, self.session.session_id, "aborted", why=why)

    def done(self) -> bool:
        return self.session.status in ("established", "aborted", "excluded")


def _equivocate(node, ctx, dst, body, rng):
    if not isinstance(node, GroupKeyNode) or not isinstance(body, dict) or body.get("t") != "contrib":
        return body
    if node._alt is None:
        node._alt = node.session.alternative_contribution(rng)
    return {"t": "contrib", "c": node._alt.to_wire()}


register_equivocator(PROTOCOL, _equivocate)
