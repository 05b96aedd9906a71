"""Verifiable threshold sharing of scalars and short keys.

A dealing is a random polynomial ``f`` of degree ``k - 1`` with ``f(0)`` equal
to the secret. Share ``i`` is ``f(i)``; the public commitments ``g^coeff`` let
anyone check a share without learning the secret. Weighted participants hold
several consecutive indices.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from decwf import kernels
from decwf.crypto_core import Drbg, GroupParams, lagrange_coeffs
from decwf.errors import DealingMismatch, InsufficientShares, PolicyError


@dataclass(frozen=True)
class SharingPolicy:
    threshold: int
    share_count: int
    weights: dict | None = None

    def __post_init__(self):
        if self.weights is not None:
            object.__setattr__(self, "weights", dict(self.weights))

    def validate(self, params: GroupParams | None = None) -> None:
        k, n = self.threshold, self.share_count
        if not (isinstance(k, int) and isinstance(n, int)) or not 1 <= k <= n:
            raise PolicyError(f"need 1 <= k <= n, got k={k}, n={n}")
        if self.weights is not None:
            if any((not isinstance(w, int)) or w < 1 for w in self.weights.values()):
                raise PolicyError("weights must be positive integers")
            if sum(self.weights.values()) != n:
                raise PolicyError("weights must sum to the share count")
        if params is not None and n >= params.q:
            raise PolicyError(f"{n} shares need distinct nonzero indices below q={params.q}")

    def allocation(self) -> dict:
        """Participant -> list of share indices (consecutive, starting at 1)."""
        if self.weights is None:
            return {i: [i] for i in range(1, self.share_count + 1)}
        out = {}
        nxt = 1
        for who, w in self.weights.items():
            out[who] = list(range(nxt, nxt + w))
            nxt += w
        return out

    def to_doc(self) -> dict:
        doc = {"threshold": self.threshold, "share_count": self.share_count}
        if self.weights is not None:
            doc["weights"] = dict(self.weights)
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "SharingPolicy":
        return cls(int(doc["threshold"]), int(doc["share_count"]), doc.get("weights"))


@dataclass(frozen=True)
class Share:
    index: int
    value: int
    dealing_id: str

    def to_doc(self) -> dict:
        return {"index": self.index, "value": str(self.value), "dealing_id": self.dealing_id}

    @classmethod
    def from_doc(cls, doc: dict) -> "Share":
        return cls(int(doc["index"]), int(doc["value"]), doc["dealing_id"])


@dataclass(frozen=True)
class Dealing:
    policy: SharingPolicy
    params: GroupParams
    commitments: tuple
    dealing_id: str
    _expected: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def expected_power(self, index: int) -> int:
        """g^{f(index)} computed from the commitments alone."""
        got = self._expected.get(index)
        if got is None:
            got = kernels.commit_eval(self.commitments, index, self.params.p, self.params.q)
            self._expected[index] = got
        return got

    def to_doc(self) -> dict:
        return {
            "dealing_id": self.dealing_id,
            "policy": self.policy.to_doc(),
            "params": self.params.to_doc(),
            "commitments": [str(c) for c in self.commitments],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Dealing":
        return cls(
            SharingPolicy.from_doc(doc["policy"]),
            GroupParams.from_doc(doc["params"]),
            tuple(int(c) for c in doc["commitments"]),
            doc["dealing_id"],
        )


def _dealing_id(params: GroupParams, commitments) -> str:
    h = hashlib.sha256(b"decwf/dealing|")
    for c in commitments:
        h.update(params.encode(c))
    return h.hexdigest()[:24]


def deal_polynomial(coeffs, policy: SharingPolicy, params: GroupParams):
    """Deal from explicit coefficients (constant term first)."""
    policy.validate(params)
    if len(coeffs) != policy.threshold:
        raise PolicyError("need exactly k coefficients")
    p, q, g = params.p, params.q, params.g
    coeffs = [c % q for c in coeffs]
    commitments = tuple(kernels.powmod(g, c, p) for c in coeffs)
    did = _dealing_id(params, commitments)
    dealing = Dealing(policy, params, commitments, did)
    shares = [Share(i, kernels.poly_eval(coeffs, i, q), did) for i in range(1, policy.share_count + 1)]
    return dealing, shares


def deal(secret: int, policy: SharingPolicy, params: GroupParams, seed=None):
    policy.validate(params)
    if not params.is_scalar(secret):
        raise PolicyError("secret outside [0, q)")
    rng = Drbg(seed if seed is not None else _fresh(), b"deal")
    coeffs = [secret] + [rng.scalar(params.q) for _ in range(policy.threshold - 1)]
    return deal_polynomial(coeffs, policy, params)


def _fresh() -> bytes:
    import secrets

    return secrets.token_bytes(32)


def verify_share(share: Share, dealing: Dealing) -> bool:
    params = dealing.params
    if not isinstance(share, Share) or share.dealing_id != dealing.dealing_id:
        return False
    if not (isinstance(share.index, int) and 1 <= share.index <= dealing.policy.share_count):
        return False
    if not params.is_scalar(share.value):
        return False
    return kernels.powmod(params.g, share.value, params.p) == dealing.expected_power(share.index)


def reconstruct(shares, dealing: Dealing) -> int:
    shares = list(shares)
    if any(s.dealing_id != dealing.dealing_id for s in shares):
        raise DealingMismatch("shares come from different dealings")
    valid = {}
    for s in shares:
        if s.index not in valid and verify_share(s, dealing):
            valid[s.index] = s
    k = dealing.policy.threshold
    if len(valid) < k:
        raise InsufficientShares(f"{len(valid)} valid shares, need {k}")
    chosen = sorted(valid)[:k]
    lam = lagrange_coeffs(chosen, dealing.params)
    q = dealing.params.q
    return sum(lam[i] * valid[i].value for i in chosen) % q


def shares_for(participant, policy: SharingPolicy, shares) -> list:
    wanted = set(policy.allocation()[participant])
    return [s for s in shares if s.index in wanted]


# Keys of up to 256 bits are framed and split into scalar-sized chunks so that
# even the toy group can hold them.

_LEN_BITS = 16


def _chunk_bits(params: GroupParams) -> int:
    return params.q.bit_length() - 1


def split_key(key: bytes, policy: SharingPolicy, params: GroupParams, seed=None):
    """Share a short byte string; returns one (Dealing, shares) pair per chunk."""
    if len(key) > 32:
        raise PolicyError("only keys of at most 256 bits are held in the safe")
    w = _chunk_bits(params)
    bits = format(len(key), f"0{_LEN_BITS}b") + "".join(format(b, "08b") for b in key)
    bits += "0" * (-len(bits) % w)
    chunks = [int(bits[i : i + w], 2) for i in range(0, len(bits), w)]
    base = Drbg(seed if seed is not None else _fresh(), b"split-key")
    return [deal(c, policy, params, seed=base.randbytes(32)) for c in chunks]


def recover_key(dealt_parts) -> bytes:
    """Inverse of split_key; ``dealt_parts`` is a list of (Dealing, shares)."""
    if not dealt_parts:
        raise InsufficientShares("no chunks")
    params = dealt_parts[0][0].params
    w = _chunk_bits(params)
    bits = "".join(format(reconstruct(sh, d), f"0{w}b") for d, sh in dealt_parts)
    length = int(bits[:_LEN_BITS], 2)
    body = bits[_LEN_BITS : _LEN_BITS + 8 * length]
    if len(body) < 8 * length:
        raise PolicyError("framed length exceeds recovered data")
    return bytes(int(body[i : i + 8], 2) for i in range(0, len(body), 8))
