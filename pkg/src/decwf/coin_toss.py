"""Threshold coin: one unpredictable, shared bit per coin name.

The coin for ``name`` is derived from ``H(name)^{x0}`` where ``x0`` is a shared
secret. Each holder publishes ``H(name)^{x_i}`` with a validity proof; any
``k`` valid shares fix the bit, fewer reveal nothing about it.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from decwf import kernels
from decwf.crypto_core import DleqProof, dleq_prove, dleq_verify, hash_to_group, lagrange_coeffs
from decwf.errors import InsufficientShares
from decwf.threshold_sig import SigningKeyShare, VerificationKeySet


@dataclass(frozen=True)
class CoinScheme:
    vks: VerificationKeySet

    @property
    def params(self):
        return self.vks.params

    @property
    def threshold(self) -> int:
        return self.vks.threshold


@dataclass(frozen=True)
class CoinShare:
    coin_name: bytes
    index: int
    value: int
    proof: DleqProof

    def to_wire(self) -> list:
        return [self.coin_name.decode("latin-1"), self.index, str(self.value)] + self.proof.to_wire()

    @classmethod
    def from_wire(cls, w) -> "CoinShare":
        return cls(w[0].encode("latin-1"), int(w[1]), int(w[2]), DleqProof.from_wire(w[3:5]))


def aba_coin_name(instance_id: str, round_no: int) -> bytes:
    return f"aba/{instance_id}/round/{round_no}".encode()


def coin_base(name: bytes, scheme: CoinScheme) -> int:
    return hash_to_group(b"decwf/coin|" + name, scheme.params)


def _context(scheme: CoinScheme, name: bytes) -> bytes:
    return b"decwf/coin-share|" + scheme.vks.dealing_id.encode() + b"|" + name


def coin_share(name: bytes, key: SigningKeyShare, scheme: CoinScheme) -> CoinShare:
    params = scheme.params
    base = coin_base(name, scheme)
    x = key.share.value
    value = kernels.powmod(base, x, params.p)
    proof = dleq_prove(x, params.g, base, params, context=_context(scheme, name))
    return CoinShare(name, key.share.index, value, proof)


def coin_verify_share(cs: CoinShare, scheme: CoinScheme, name: bytes | None = None) -> bool:
    """Check a coin share; pass ``name`` to pin the coin it must belong to."""
    if not isinstance(cs, CoinShare):
        return False
    if name is not None and cs.coin_name != name:
        return False
    vk = scheme.vks.member_vks.get(cs.index)
    if vk is None:
        return False
    params = scheme.params
    base = coin_base(cs.coin_name, scheme)
    return dleq_verify(cs.proof, params.g, base, vk, cs.value, params, context=_context(scheme, cs.coin_name))


def coin_element(name: bytes, shares, scheme: CoinScheme) -> int:
    valid = {}
    for s in shares:
        if s.index not in valid and coin_verify_share(s, scheme, name):
            valid[s.index] = s
    k = scheme.threshold
    if len(valid) < k:
        raise InsufficientShares(f"{len(valid)} valid coin shares, need {k}")
    chosen = [valid[i] for i in sorted(valid)[:k]]
    lam = lagrange_coeffs([s.index for s in chosen], scheme.params)
    return kernels.multi_powmod([s.value for s in chosen], [lam[s.index] for s in chosen], scheme.params.p)


def coin_bit(name: bytes, element: int, scheme: CoinScheme) -> int:
    h = hashlib.sha256(b"decwf/coin-bit|" + name + b"|" + scheme.params.encode(element)).digest()
    return h[-1] & 1


def coin_combine(name: bytes, shares, scheme: CoinScheme) -> int:
    return coin_bit(name, coin_element(name, shares, scheme), scheme)
