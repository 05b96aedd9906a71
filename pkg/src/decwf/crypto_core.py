"""Prime-order group arithmetic shared by every threshold protocol.

Elements live in the quadratic-residue subgroup of a safe prime ``p = 2q + 1``.
Scalars are plain ints in ``[0, q)`` and group elements plain ints in
``[1, p)``; the helpers here check membership where inputs are untrusted.
"""

from __future__ import annotations

import functools
import hashlib
import secrets
from dataclasses import dataclass

from decwf import kernels
from decwf.errors import PolicyError

HASH_ID = "sha256"
CHALLENGE_BITS = 256

# RFC 3526 group 14 (2048-bit MODP), a safe prime.
_RFC3526_2048 = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
    "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF",
    16,
)


@dataclass(frozen=True)
class GroupParams:
    p: int
    q: int
    g: int
    profile: str = "toy"

    @property
    def element_len(self) -> int:
        return (self.p.bit_length() + 7) // 8

    def encode(self, x: int) -> bytes:
        return x.to_bytes(self.element_len, "big")

    def exp(self, base: int, e: int) -> int:
        return kernels.powmod(base, e % self.q, self.p)

    def is_element(self, x) -> bool:
        if not isinstance(x, int) or isinstance(x, bool) or not 1 <= x < self.p:
            return False
        if self.p < (1 << 64):
            return pow(x, self.q, self.p) == 1
        return _jacobi(x, self.p) == 1

    def is_scalar(self, x) -> bool:
        return isinstance(x, int) and not isinstance(x, bool) and 0 <= x < self.q

    def validate(self) -> None:
        from sympy import isprime

        if self.profile not in ("toy", "default"):
            raise PolicyError(f"unknown profile {self.profile!r}")
        if self.p != 2 * self.q + 1:
            raise PolicyError("p is not 2q + 1")
        if not (isprime(self.p) and isprime(self.q)):
            raise PolicyError("p and q must both be prime")
        if self.g in (0, 1) or pow(self.g, self.q, self.p) != 1:
            raise PolicyError("g does not generate the order-q subgroup")

    def to_doc(self) -> dict:
        return {"p": str(self.p), "q": str(self.q), "g": str(self.g), "profile": self.profile}

    @classmethod
    def from_doc(cls, doc: dict) -> "GroupParams":
        return cls(int(doc["p"]), int(doc["q"]), int(doc["g"]), doc.get("profile", "toy"))


def _jacobi(a: int, n: int) -> int:
    try:
        from sympy.functions.combinatorial.numbers import jacobi_symbol
    except ImportError:  # older sympy
        from sympy.ntheory import jacobi_symbol
    return int(jacobi_symbol(a, n))


TOY = GroupParams(23, 11, 4, "toy")
DEFAULT = GroupParams(_RFC3526_2048, (_RFC3526_2048 - 1) // 2, 4, "default")

PROFILES = {"toy": TOY, "default": DEFAULT}


def params_for(profile: str) -> GroupParams:
    try:
        return PROFILES[profile]
    except KeyError:
        raise PolicyError(f"unknown profile {profile!r}") from None


def generate_params(bits: int, seed=None) -> GroupParams:
    """Search for a fresh safe prime of ``bits`` bits.

    Practical only up to a few hundred bits in pure Python; the default
    profile uses a published 2048-bit safe prime instead.
    """
    from sympy import isprime

    if bits < 5:
        raise PolicyError("need at least 5 bits")
    stream = Drbg(seed if seed is not None else secrets.token_bytes(32), b"params")
    while True:
        q = stream.randbits(bits - 1) | (1 << (bits - 2)) | 1
        if isprime(q) and isprime(2 * q + 1):
            p = 2 * q + 1
            profile = "default" if bits >= 2048 else "toy"
            return GroupParams(p, q, 4, profile)


class Drbg:
    """Deterministic byte stream keyed by a seed and a label (SHAKE-256)."""

    def __init__(self, seed, label: bytes = b""):
        if isinstance(seed, int):
            seed = seed.to_bytes((seed.bit_length() + 8) // 8, "big", signed=True)
        elif isinstance(seed, str):
            seed = seed.encode()
        self._key = hashlib.sha256(b"decwf/drbg|" + bytes(seed) + b"|" + label).digest()
        self._counter = 0

    def randbytes(self, n: int) -> bytes:
        self._counter += 1
        return hashlib.shake_256(self._key + self._counter.to_bytes(8, "big")).digest(n)

    def randbits(self, k: int) -> int:
        return int.from_bytes(self.randbytes((k + 7) // 8), "big") >> (-k % 8)

    def scalar(self, q: int) -> int:
        # 128 extra bits keep the modular bias negligible
        return int.from_bytes(self.randbytes((q.bit_length() + 135) // 8), "big") % q

    def nonzero_scalar(self, q: int) -> int:
        return 1 + self.scalar(q - 1)


def derive_scalar(q: int, *parts: bytes) -> int:
    h = hashlib.shake_256(b"decwf/scalar|" + b"|".join(parts))
    return int.from_bytes(h.digest((q.bit_length() + 135) // 8), "big") % q


def square_to_group(h: int, params: GroupParams) -> int:
    return (h % params.p) ** 2 % params.p


def hash_to_group(data: bytes, params: GroupParams) -> int:
    counter = 0
    msg = data
    while True:
        h = int.from_bytes(hashlib.sha256(msg).digest(), "big")
        v = square_to_group(h, params)
        if v not in (0, 1):
            return v
        counter += 1
        msg = data + b"|" + counter.to_bytes(4, "big")


@dataclass(frozen=True)
class DleqProof:
    """Non-interactive proof that two powers share one exponent.

    ``challenge`` keeps the full 256-bit hash value; only its residue mod q
    enters the group arithmetic.
    """

    challenge: int
    response: int

    def to_bytes(self, params: GroupParams) -> bytes:
        qlen = (params.q.bit_length() + 7) // 8
        return self.challenge.to_bytes(CHALLENGE_BITS // 8, "big") + self.response.to_bytes(qlen, "big")

    @classmethod
    def from_bytes(cls, data: bytes, params: GroupParams) -> "DleqProof":
        c = int.from_bytes(data[: CHALLENGE_BITS // 8], "big")
        s = int.from_bytes(data[CHALLENGE_BITS // 8 :], "big")
        return cls(c, s)

    def to_wire(self) -> list:
        return [str(self.challenge), str(self.response)]

    @classmethod
    def from_wire(cls, w) -> "DleqProof":
        return cls(int(w[0]), int(w[1]))


def _challenge(params, b1, b2, p1, p2, a1, a2, context: bytes) -> int:
    enc = params.encode
    h = hashlib.sha256()
    h.update(b"decwf/dleq/v1|")
    h.update(enc(params.p))
    for x in (b1, b2, p1, p2, a1, a2):
        h.update(enc(x))
    h.update(len(context).to_bytes(4, "big"))
    h.update(context)
    return int.from_bytes(h.digest(), "big")


def dleq_prove(x: int, base1: int, base2: int, params: GroupParams, context: bytes = b"") -> DleqProof:
    """Prove log_base1(base1^x) == log_base2(base2^x) with a derived nonce."""
    if not params.is_scalar(x):
        raise PolicyError("exponent out of range")
    p, q = params.p, params.q
    p1 = kernels.powmod(base1, x, p)
    p2 = kernels.powmod(base2, x, p)
    enc = params.encode
    r = derive_scalar(q, b"dleq-nonce", x.to_bytes(params.element_len, "big"), enc(base1), enc(base2), context)
    a1 = kernels.powmod(base1, r, p)
    a2 = kernels.powmod(base2, r, p)
    c = _challenge(params, base1, base2, p1, p2, a1, a2, context)
    return DleqProof(c, (r + c * x) % q)


@functools.lru_cache(maxsize=65536)
def _dleq_check(c, s, b1, b2, p1, p2, params, context) -> bool:
    p, q = params.p, params.q
    cq = c % q
    neg = (q - cq) % q
    a1 = kernels.multi_powmod((b1, p1), (s, neg), p)
    a2 = kernels.multi_powmod((b2, p2), (s, neg), p)
    return _challenge(params, b1, b2, p1, p2, a1, a2, context) == c


def dleq_verify(
    proof: DleqProof,
    base1: int,
    base2: int,
    power1: int,
    power2: int,
    params: GroupParams,
    context: bytes = b"",
) -> bool:
    """Check a proof; malformed or non-subgroup inputs give False."""
    if not isinstance(proof, DleqProof):
        return False
    c, s = proof.challenge, proof.response
    if not (isinstance(c, int) and 0 <= c < (1 << CHALLENGE_BITS)) or not params.is_scalar(s):
        return False
    for v in (base1, base2, power1, power2):
        if not params.is_element(v):
            return False
    return _dleq_check(c, s, base1, base2, power1, power2, params, bytes(context))


def lagrange_coeff(i: int, S, params: GroupParams) -> int:
    """Coefficient of share ``i`` when interpolating the set ``S`` at zero."""
    idx = list(S)
    q = params.q
    if len(set(idx)) != len(idx):
        raise PolicyError("duplicate share indices")
    if any(j % q == 0 for j in idx):
        raise PolicyError("share index is zero modulo q")
    if i not in idx:
        raise PolicyError(f"index {i} not in interpolation set")
    return kernels.lagrange_at_zero(idx, q)[idx.index(i)]


def lagrange_coeffs(S, params: GroupParams) -> dict:
    idx = list(S)
    q = params.q
    if len(set(idx)) != len(idx):
        raise PolicyError("duplicate share indices")
    if any(j % q == 0 for j in idx):
        raise PolicyError("share index is zero modulo q")
    return dict(zip(idx, kernels.lagrange_at_zero(idx, q)))
