"""Asynchronous binary Byzantine agreement with signed, justified votes.

Every vote carries its voter's signature share over the vote body and a
justification that any receiver can check on its own:

* round-1 pre-votes are the parties' inputs and need nothing more;
* a main-vote for ``b`` carries the composite of ``n - t`` pre-votes for ``b``;
* an abstaining main-vote carries two pre-votes of its round, one per value;
* a later pre-vote either repeats a main-vote's justification ("hard") or
  carries the composite of ``n - t`` abstentions plus the round's coin shares
  ("soft"), and must then equal the coin. After round 1 the coin is replaced
  by the majority of ``n - t`` round-1 pre-votes, which keeps a unanimous
  honest input from being overturned by a coin.

``n - t`` equal main-votes decide. The decider broadcasts the composite of
those main-votes as a certificate; a receiver checks it, decides, forwards it
and stops. All thresholds are ``n - t`` and ``n >= 3t + 1``.

The instance is sans-IO: ``start`` and ``handle`` return broadcast bodies.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

from decwf.coin_toss import CoinScheme, CoinShare, aba_coin_name, coin_combine, coin_share, coin_verify_share
from decwf.crypto_core import GroupParams
from decwf.errors import InsufficientShares, PolicyError, ProtocolError
from decwf.secret_sharing import SharingPolicy
from decwf.threshold_sig import (
    CompositeSignature,
    SignatureShare,
    SigningKeyShare,
    VerificationKeySet,
    ts_combine,
    ts_deal,
    ts_sign_share,
    ts_verify,
    ts_verify_share,
)

ABSTAIN = "a"


@dataclass(frozen=True)
class AbaKeys:
    """One party's view of an agreement group."""

    members: tuple
    me: str
    t: int
    vks: VerificationKeySet
    sig_key: SigningKeyShare
    coin: CoinScheme
    coin_key: SigningKeyShare

    @property
    def n(self) -> int:
        return len(self.members)

    @property
    def quorum(self) -> int:
        return self.n - self.t

    @property
    def index(self) -> int:
        return self.members.index(self.me) + 1

    def index_of(self, node) -> int | None:
        try:
            return self.members.index(node) + 1
        except ValueError:
            return None


def aba_setup(members, t: int, params: GroupParams, seed=0) -> dict:
    """Deal a signature key and an independent coin key for ``members``."""
    members = tuple(members)
    n = len(members)
    if t < 0 or n < 3 * t + 1:
        raise PolicyError(f"need n >= 3t + 1, got n={n}, t={t}")
    policy = SharingPolicy(n - t, n)
    vks, sig_keys = ts_deal(policy, params, seed=(f"{seed}|aba-sig"))
    coin_vks, coin_keys = ts_deal(policy, params, seed=(f"{seed}|aba-coin"))
    scheme = CoinScheme(coin_vks)
    return {m: AbaKeys(members, m, t, vks, sig_keys[i], scheme, coin_keys[i]) for i, m in enumerate(members)}


def vote_message(inst: str, kind: str, r: int, v) -> bytes:
    return f"decwf/aba|{inst}|{kind}|{r}|{v}".encode()


def _comp_wire(comp: CompositeSignature, message: bytes, vks) -> dict:
    return comp.to_wire(message, vks.dealing_id)


def _bit(v) -> bool:
    return v in (0, 1) and not isinstance(v, bool)


class Invalid(Exception):
    pass


class Verifier:
    """Stateless checks of vote bodies against a key set."""

    def __init__(self, keys: AbaKeys):
        self.keys = keys
        self.vks = keys.vks

    def share(self, message: bytes, wire, idx=None) -> SignatureShare:
        ss = SignatureShare.from_wire(wire)
        if idx is not None and ss.index != idx:
            raise Invalid("share index does not match sender")
        if not ts_verify_share(message, ss, self.vks):
            raise Invalid("bad signature share")
        return ss

    def composite(self, message: bytes, wire) -> None:
        if not isinstance(wire, dict):
            raise Invalid("composite must be a mapping")
        comp = CompositeSignature.from_wire(wire)
        if len(comp.contributors) < self.keys.quorum or not ts_verify(message, comp, self.vks):
            raise Invalid("bad composite")

    def prevote(self, inst, body, idx=None) -> None:
        r, v = body["r"], body["v"]
        if not (isinstance(r, int) and r >= 1 and _bit(v)):
            raise Invalid("bad prevote header")
        self.share(vote_message(inst, "pre", r, v), body["sig"], idx)
        just = body.get("just")
        if r == 1:
            if just is not None:
                raise Invalid("round-1 prevote carries a justification")
            return
        if not isinstance(just, dict):
            raise Invalid("missing prevote justification")
        if "hard" in just:
            self.composite(vote_message(inst, "pre", r - 1, v), just["hard"])
            return
        self.composite(vote_message(inst, "main", r - 1, ABSTAIN), just["soft"])
        if r == 2:
            self._majority(inst, v, just["maj"])
        else:
            bit = self.coin_bit(inst, r - 1, just["coin"])
            if bit != v:
                raise Invalid("soft prevote differs from the coin")

    def _majority(self, inst, v, records) -> None:
        seen = {}
        for idx, val, wire in records:
            if not _bit(val):
                raise Invalid("bad value in majority set")
            self.share(vote_message(inst, "pre", 1, val), wire, idx)
            seen[idx] = val
        if len(seen) < self.keys.quorum:
            raise Invalid("majority set below quorum")
        ones = sum(seen.values())
        zeros = len(seen) - ones
        if (v == 1 and ones < zeros) or (v == 0 and zeros < ones):
            raise Invalid("value is not a majority of the set")

    def coin_bit(self, inst, r, wires) -> int:
        name = aba_coin_name(inst, r)
        shares = [CoinShare.from_wire(w) for w in wires]
        try:
            return coin_combine(name, shares, self.keys.coin)
        except InsufficientShares:
            raise Invalid("not enough coin shares") from None

    def mainvote(self, inst, body, idx=None) -> None:
        r, v = body["r"], body["v"]
        if not (isinstance(r, int) and r >= 1 and (_bit(v) or v == ABSTAIN)):
            raise Invalid("bad mainvote header")
        self.share(vote_message(inst, "main", r, v), body["sig"], idx)
        just = body["just"]
        if v == ABSTAIN:
            if not isinstance(just, list) or len(just) != 2:
                raise Invalid("abstain needs two prevotes")
            for pv in just:
                if pv.get("r") != r:
                    raise Invalid("abstain evidence from another round")
                self.prevote(inst, pv)
            if {just[0]["v"], just[1]["v"]} != {0, 1}:
                raise Invalid("abstain evidence does not conflict")
        else:
            self.composite(vote_message(inst, "pre", r, v), just)

    def coin(self, inst, body, idx) -> CoinShare:
        r = body["r"]
        if not (isinstance(r, int) and r >= 2):
            raise Invalid("bad coin round")
        cs = CoinShare.from_wire(body["share"])
        if cs.index != idx or not coin_verify_share(cs, self.keys.coin, aba_coin_name(inst, r)):
            raise Invalid("bad coin share")
        return cs

    def decide(self, inst, body) -> None:
        r, v = body["r"], body["v"]
        if not (isinstance(r, int) and r >= 1 and _bit(v)):
            raise Invalid("bad decide header")
        self.composite(vote_message(inst, "main", r, v), body["cert"])


class AbaInstance:
    def __init__(self, instance_id: str, keys: AbaKeys):
        self.instance_id = instance_id
        self.keys = keys
        self.verify = Verifier(keys)
        self.input_value = None
        self.round = 0
        self.phase = "preprocess"
        self._decision = None
        self.decided_round = None
        self.halted = False
        self.pre = defaultdict(dict)  # round -> voter index -> body
        self.main = defaultdict(dict)
        self.coins = defaultdict(dict)
        self.pre_used = {}  # round -> bodies the mainvote was based on
        self.sent_coin = set()
        self.flagged = set()
        self._used = set()
        self.events = []

    @property
    def n(self):
        return self.keys.n

    @property
    def t(self):
        return self.keys.t

    @property
    def decision(self):
        return self._decision

    def _set_decision(self, v, r) -> None:
        if self._decision is not None and self._decision != v:
            raise ProtocolError("decision is write-once")
        self._decision = v
        self.decided_round = r
        self.phase = "decided"
        self.halted = True
        self.events.append(("decide", {"value": v, "round": r}))

    def _sign(self, kind, r, v) -> list:
        ss = ts_sign_share(vote_message(self.instance_id, kind, r, v), self.keys.sig_key, self.keys.vks)
        return ss.to_wire()

    def _prevote(self, r, v, just) -> dict:
        return {"t": "pre", "inst": self.instance_id, "r": r, "v": v, "sig": self._sign("pre", r, v), "just": just}

    def start(self, v: int) -> list:
        if self.input_value is not None:
            raise ProtocolError(f"instance {self.instance_id} already started")
        if not _bit(v):
            raise ProtocolError("input must be 0 or 1")
        self.input_value = v
        self.round = 1
        self.phase = "prevote"
        self.events.append(("input", {"value": v}))
        body = self._prevote(1, v, None)
        out = [body]
        self._store("pre", 1, self.keys.index, body)
        self._advance(out)
        return out

    # message intake

    def handle(self, sender_idx: int, body: dict) -> list:
        out = []
        if self.halted or sender_idx is None or sender_idx in self.flagged:
            return out
        kind = body.get("t")
        try:
            if kind == "pre":
                self.verify.prevote(self.instance_id, body, sender_idx)
                self._store("pre", body["r"], sender_idx, body)
            elif kind == "main":
                self.verify.mainvote(self.instance_id, body, sender_idx)
                self._store("main", body["r"], sender_idx, body)
            elif kind == "coin":
                cs = self.verify.coin(self.instance_id, body, sender_idx)
                self.coins[body["r"]].setdefault(sender_idx, cs)
            elif kind == "decide":
                self.verify.decide(self.instance_id, body)
                self._set_decision(body["v"], body["r"])
                out.append(body)
                return out
            else:
                raise Invalid(f"unknown vote kind {kind!r}")
        except (Invalid, KeyError, TypeError, ValueError, IndexError, AttributeError) as e:
            self.events.append(("suspect", {"sender": sender_idx, "why": type(e).__name__}))
            return out
        if self.input_value is not None:
            self._advance(out)
        return out

    def _store(self, kind, r, idx, body) -> None:
        store = (self.pre if kind == "pre" else self.main)[r]
        old = store.get(idx)
        if old is None:
            store[idx] = body
            return
        if old["v"] == body["v"]:
            return
        # same voter, same slot, different value
        if (kind, r, idx) not in self._used:
            del store[idx]
            self.flagged.add(idx)
        self.events.append(("conflict", {"sender": idx, "round": r, "vote": kind}))

    # state machine

    def _advance(self, out) -> None:
        q = self.keys.quorum
        while not self.halted:
            r = self.round
            if self.phase == "prevote":
                votes = list(self.pre[r].items())
                if len(votes) < q:
                    return
                chosen = votes[:q]
                self.pre_used[r] = chosen
                self._used.update(("pre", r, i) for i, _ in chosen)
                values = {b["v"] for _, b in chosen}
                if len(values) == 1:
                    (v,) = values
                    msg = vote_message(self.instance_id, "pre", r, v)
                    shares = [SignatureShare.from_wire(b["sig"]) for _, b in chosen]
                    just = _comp_wire(ts_combine(msg, shares, self.keys.vks), msg, self.keys.vks)
                else:
                    v = ABSTAIN
                    zero = next(b for _, b in chosen if b["v"] == 0)
                    one = next(b for _, b in chosen if b["v"] == 1)
                    just = [zero, one]
                body = {"t": "main", "inst": self.instance_id, "r": r, "v": v, "sig": self._sign("main", r, v), "just": just}
                out.append(body)
                self._store("main", r, self.keys.index, body)
                self.phase = "mainvote"
                continue
            votes = list(self.main[r].items())
            if len(votes) < q:
                return
            chosen = votes[:q]
            self._used.update(("main", r, i) for i, _ in chosen)
            if r >= 2 and r not in self.sent_coin:
                self.sent_coin.add(r)
                cs = coin_share(aba_coin_name(self.instance_id, r), self.keys.coin_key, self.keys.coin)
                self.coins[r].setdefault(self.keys.index, cs)
                out.append({"t": "coin", "inst": self.instance_id, "r": r, "share": cs.to_wire()})
            hard = [b for _, b in chosen if b["v"] != ABSTAIN]
            if hard and len(hard) == q and len({b["v"] for b in hard}) == 1:
                v = hard[0]["v"]
                msg = vote_message(self.instance_id, "main", r, v)
                shares = [SignatureShare.from_wire(b["sig"]) for b in hard]
                cert = _comp_wire(ts_combine(msg, shares, self.keys.vks), msg, self.keys.vks)
                self._set_decision(v, r)
                out.append({"t": "decide", "inst": self.instance_id, "r": r, "v": v, "cert": cert})
                return
            if hard:
                nv = hard[0]["v"]
                just = {"hard": hard[0]["just"]}
            else:
                msg = vote_message(self.instance_id, "main", r, ABSTAIN)
                shares = [SignatureShare.from_wire(b["sig"]) for _, b in chosen]
                soft = _comp_wire(ts_combine(msg, shares, self.keys.vks), msg, self.keys.vks)
                if r == 1:
                    basis = self.pre_used[1]
                    ones = sum(b["v"] for _, b in basis)
                    nv = 1 if 2 * ones >= len(basis) else 0
                    just = {"soft": soft, "maj": [[i, b["v"], b["sig"]] for i, b in basis]}
                else:
                    coin = self.coins[r]
                    k = self.keys.coin.threshold
                    if len(coin) < k:
                        return
                    picked = [coin[i] for i in sorted(coin)[:k]]
                    nv = coin_combine(aba_coin_name(self.instance_id, r), picked, self.keys.coin)
                    self.events.append(("coin", {"round": r, "value": nv}))
                    just = {"soft": soft, "coin": [c.to_wire() for c in picked]}
            self.round = r + 1
            self.phase = "prevote"
            self.events.append(("round", {"round": r + 1, "value": nv}))
            body = self._prevote(r + 1, nv, just)
            out.append(body)
            self._store("pre", r + 1, self.keys.index, body)

    def drain_events(self) -> list:
        ev, self.events = self.events, []
        return ev


def equivocate_body(keys: AbaKeys, body: dict):
    """Re-sign a vote with the opposite value; justifications are left as they were."""
    kind = body.get("t")
    if kind not in ("pre", "main", "decide"):
        return body
    v = body["v"]
    flipped = 1 if v == 0 else 0
    out = dict(body)
    out["v"] = flipped
    if kind in ("pre", "main"):
        msg = vote_message(body["inst"], kind, body["r"], flipped)
        out["sig"] = ts_sign_share(msg, keys.sig_key, keys.vks).to_wire()
    return out
