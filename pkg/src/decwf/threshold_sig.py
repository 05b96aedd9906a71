"""(k, l)-threshold signatures with per-share validity proofs.

A signature share on ``M`` is ``H(M)^{x_i}`` together with a proof that its
exponent matches the member's verification key ``g^{x_i}``. Any ``k`` valid
shares combine in the exponent into ``H(M)^x``, which is attributable to the
group; the contributor list is kept so participation cannot be denied.
"""

from __future__ import annotations

import hashlib
import secrets
from dataclasses import dataclass

from decwf import kernels
from decwf.crypto_core import (
    DleqProof,
    Drbg,
    GroupParams,
    dleq_prove,
    dleq_verify,
    hash_to_group,
    lagrange_coeffs,
)
from decwf.errors import InsufficientShares
from decwf.secret_sharing import Dealing, Share, SharingPolicy, deal


@dataclass(frozen=True)
class SigningKeyShare:
    share: Share
    participant: object = None

    @property
    def index(self) -> int:
        return self.share.index


@dataclass(frozen=True)
class VerificationKeySet:
    group_vk: int
    member_vks: dict
    policy: SharingPolicy
    params: GroupParams
    dealing_id: str
    commitments: tuple = ()

    def __hash__(self):
        return hash((self.group_vk, self.dealing_id))

    @property
    def threshold(self) -> int:
        return self.policy.threshold

    def consistent(self) -> bool:
        if not self.commitments or self.commitments[0] != self.group_vk:
            return False
        p, q = self.params.p, self.params.q
        return all(kernels.commit_eval(self.commitments, i, p, q) == vk for i, vk in self.member_vks.items())

    def to_doc(self) -> dict:
        return {
            "dealing_id": self.dealing_id,
            "params": self.params.to_doc(),
            "policy": self.policy.to_doc(),
            "group_vk": str(self.group_vk),
            "member_vks": {str(i): str(v) for i, v in sorted(self.member_vks.items())},
            "commitments": [str(c) for c in self.commitments],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "VerificationKeySet":
        return cls(
            int(doc["group_vk"]),
            {int(i): int(v) for i, v in doc["member_vks"].items()},
            SharingPolicy.from_doc(doc["policy"]),
            GroupParams.from_doc(doc["params"]),
            doc["dealing_id"],
            tuple(int(c) for c in doc.get("commitments", ())),
        )


@dataclass(frozen=True)
class SignatureShare:
    index: int
    value: int
    proof: DleqProof

    def to_wire(self) -> list:
        return [self.index, str(self.value)] + self.proof.to_wire()

    @classmethod
    def from_wire(cls, w) -> "SignatureShare":
        return cls(int(w[0]), int(w[1]), DleqProof.from_wire(w[2:4]))


@dataclass(frozen=True)
class CompositeSignature:
    value: int
    contributors: tuple

    @property
    def indices(self) -> list:
        return [s.index for s in self.contributors]

    def to_wire(self, message: bytes = b"", dealing_id: str = "") -> dict:
        return {
            "dealing_id": dealing_id,
            "m_hash": hashlib.sha256(message).hexdigest(),
            "contributors": [s.to_wire() for s in self.contributors],
            "value": str(self.value),
        }

    @classmethod
    def from_wire(cls, w: dict) -> "CompositeSignature":
        return cls(int(w["value"]), tuple(SignatureShare.from_wire(c) for c in w["contributors"]))


def vks_from_dealing(dealing: Dealing) -> VerificationKeySet:
    p, q = dealing.params.p, dealing.params.q
    member_vks = {
        i: kernels.commit_eval(dealing.commitments, i, p, q) for i in range(1, dealing.policy.share_count + 1)
    }
    return VerificationKeySet(
        dealing.commitments[0], member_vks, dealing.policy, dealing.params, dealing.dealing_id, dealing.commitments
    )


def ts_deal(policy: SharingPolicy, params: GroupParams, seed=None, secret: int | None = None):
    """Trusted-dealer key generation; the group secret is discarded on return."""
    base = Drbg(seed if seed is not None else secrets.token_bytes(32), b"ts-deal")
    if secret is None:
        secret = base.scalar(params.q)
    dealing, shares = deal(secret, policy, params, seed=base.randbytes(32))
    vks = vks_from_dealing(dealing)
    owners = {}
    for who, idx in policy.allocation().items():
        for i in idx:
            owners[i] = who
    keys = [SigningKeyShare(s, owners.get(s.index, s.index)) for s in shares]
    return vks, keys


def _context(vks: VerificationKeySet, message: bytes) -> bytes:
    return b"decwf/tsig|" + vks.dealing_id.encode() + b"|" + message


def ts_sign_share(message: bytes, key: SigningKeyShare, vks: VerificationKeySet) -> SignatureShare:
    params = vks.params
    h = hash_to_group(message, params)
    x = key.share.value
    value = kernels.powmod(h, x, params.p)
    proof = dleq_prove(x, params.g, h, params, context=_context(vks, message))
    return SignatureShare(key.share.index, value, proof)


def ts_verify_share(message: bytes, ss: SignatureShare, vks: VerificationKeySet, _h: int | None = None) -> bool:
    if not isinstance(ss, SignatureShare):
        return False
    vk = vks.member_vks.get(ss.index)
    if vk is None:
        return False
    params = vks.params
    h = _h if _h is not None else hash_to_group(message, params)
    return dleq_verify(ss.proof, params.g, h, vk, ss.value, params, context=_context(vks, message))


def _interpolate(shares, params: GroupParams) -> int:
    lam = lagrange_coeffs([s.index for s in shares], params)
    return kernels.multi_powmod([s.value for s in shares], [lam[s.index] for s in shares], params.p)


def ts_combine(message: bytes, shares, vks: VerificationKeySet) -> CompositeSignature:
    h = hash_to_group(message, vks.params)
    valid = {}
    for s in shares:
        if s.index not in valid and ts_verify_share(message, s, vks, _h=h):
            valid[s.index] = s
    k = vks.threshold
    if len(valid) < k:
        raise InsufficientShares(f"{len(valid)} valid signature shares, need {k}")
    ordered = [valid[i] for i in sorted(valid)]
    value = _interpolate(ordered[:k], vks.params)
    return CompositeSignature(value, tuple(ordered))


def ts_verify(message: bytes, sig: CompositeSignature, vks: VerificationKeySet) -> bool:
    if not isinstance(sig, CompositeSignature):
        return False
    contributors = list(sig.contributors)
    indices = [s.index for s in contributors]
    if len(set(indices)) != len(indices) or len(indices) < vks.threshold:
        return False
    h = hash_to_group(message, vks.params)
    if not all(ts_verify_share(message, s, vks, _h=h) for s in contributors):
        return False
    return _interpolate(contributors, vks.params) == sig.value
