import random

import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from decwf.crypto_core import (
    DEFAULT,
    TOY,
    DleqProof,
    Drbg,
    GroupParams,
    derive_scalar,
    dleq_prove,
    dleq_verify,
    hash_to_group,
    lagrange_coeff,
    lagrange_coeffs,
    params_for,
    square_to_group,
)
from decwf.errors import PolicyError

SUBGROUP = sorted({pow(x, 2, 23) for x in range(1, 23)})


def test_toy_subgroup_matches_brute_force():
    assert SUBGROUP == sorted(x for x in range(1, 23) if pow(x, 11, 23) == 1)
    for x in range(25):
        assert TOY.is_element(x) == (x in SUBGROUP)
    assert TOY.g in SUBGROUP and TOY.g != 1


def test_default_profile_is_a_safe_prime():
    assert DEFAULT.p.bit_length() == 2048
    assert sympy.isprime(DEFAULT.q) and DEFAULT.p == 2 * DEFAULT.q + 1
    assert pow(DEFAULT.g, DEFAULT.q, DEFAULT.p) == 1
    # first and last words of the published modulus
    assert hex(DEFAULT.p).startswith("0xffffffffffffffffc90fdaa2")
    assert hex(DEFAULT.p).endswith("8aacaa68ffffffffffffffff")
    DEFAULT.validate()


def test_params_doc_roundtrip_and_profiles():
    assert GroupParams.from_doc(TOY.to_doc()) == TOY
    assert params_for("toy") is TOY
    with pytest.raises(PolicyError):
        params_for("huge")
    with pytest.raises(PolicyError):
        GroupParams(23, 11, 5, "toy").validate()  # 5 is not a residue mod 23


def test_square_step_toy():
    assert square_to_group(5, TOY) == 2


@given(st.binary(max_size=64))
def test_hash_to_group_lands_in_subgroup(data):
    o = hash_to_group(data, TOY)
    assert pow(o, 11, 23) == 1 and o != 1
    assert hash_to_group(data, TOY) == o


def test_drbg_is_deterministic_and_label_separated():
    a, b = Drbg(7, b"x"), Drbg(7, b"x")
    assert a.randbytes(40) == b.randbytes(40)
    assert Drbg(7, b"x").randbytes(16) != Drbg(7, b"y").randbytes(16)
    assert Drbg("7").randbytes(8) != Drbg(8).randbytes(8)
    r = Drbg(1)
    assert all(1 <= r.nonzero_scalar(11) < 11 for _ in range(50))


def test_dleq_completeness_including_equal_bases():
    for x in range(11):
        h = hash_to_group(b"m", TOY)
        pr = dleq_prove(x, TOY.g, h, TOY)
        assert dleq_verify(pr, TOY.g, h, pow(TOY.g, x, 23), pow(h, x, 23), TOY)
        pr = dleq_prove(x, TOY.g, TOY.g, TOY, context=b"same")
        y = pow(TOY.g, x, 23)
        assert dleq_verify(pr, TOY.g, TOY.g, y, y, TOY, context=b"same")


def test_dleq_soundness_exhaustive_toy():
    h = hash_to_group(b"base", TOY)
    for x in range(11):
        pr = dleq_prove(x, TOY.g, h, TOY)
        for x2 in range(11):
            ok = dleq_verify(pr, TOY.g, h, pow(TOY.g, x, 23), pow(h, x2, 23), TOY)
            assert ok == (x == x2)


def test_dleq_power2_replaced_by_g_fails():
    h = hash_to_group(b"other", TOY)
    for x in range(11):
        pr = dleq_prove(x, TOY.g, h, TOY)
        if pow(h, x, 23) == TOY.g:
            continue  # then the statement is still true
        assert not dleq_verify(pr, TOY.g, h, pow(TOY.g, x, 23), TOY.g, TOY)


def test_dleq_bit_flips_rejected():
    h = hash_to_group(b"flip", TOY)
    x = 6
    p1, p2 = pow(TOY.g, x, 23), pow(h, x, 23)
    raw = dleq_prove(x, TOY.g, h, TOY).to_bytes(TOY)
    assert dleq_verify(DleqProof.from_bytes(raw, TOY), TOY.g, h, p1, p2, TOY)
    rng = random.Random(3)
    for bit in range(len(raw) * 8):
        b = bytearray(raw)
        b[bit // 8] ^= 1 << (bit % 8)
        assert not dleq_verify(DleqProof.from_bytes(bytes(b), TOY), TOY.g, h, p1, p2, TOY)
    # context is bound too
    assert not dleq_verify(DleqProof.from_bytes(raw, TOY), TOY.g, h, p1, p2, TOY, context=bytes([rng.randrange(256)]))


def test_dleq_rejects_non_members_and_junk():
    h = hash_to_group(b"j", TOY)
    pr = dleq_prove(3, TOY.g, h, TOY)
    assert not dleq_verify(pr, TOY.g, h, 5, pow(h, 3, 23), TOY)  # 5 is not in the subgroup
    assert not dleq_verify("proof", TOY.g, h, 1, 1, TOY)
    assert not dleq_verify(DleqProof(-1, 0), TOY.g, h, 1, 1, TOY)
    with pytest.raises(PolicyError):
        dleq_prove(11, TOY.g, h, TOY)


def test_dleq_on_default_group():
    h = hash_to_group(b"big", DEFAULT)
    x = derive_scalar(DEFAULT.q, b"t")
    pr = dleq_prove(x, DEFAULT.g, h, DEFAULT)
    assert dleq_verify(pr, DEFAULT.g, h, pow(DEFAULT.g, x, DEFAULT.p), pow(h, x, DEFAULT.p), DEFAULT)


def test_lagrange_hand_values():
    assert lagrange_coeff(1, [1], TOY) == 1
    assert lagrange_coeffs([1, 3], TOY) == {1: 7, 3: 5}
    with pytest.raises(PolicyError):
        lagrange_coeffs([1, 1], TOY)
    with pytest.raises(PolicyError):
        lagrange_coeffs([11, 2], TOY)
    with pytest.raises(PolicyError):
        lagrange_coeff(4, [1, 2], TOY)


@given(st.data())
def test_lagrange_interpolates_random_polynomials(data):
    k = data.draw(st.integers(1, 6))
    S = data.draw(st.lists(st.integers(1, 10), min_size=k, max_size=k, unique=True))
    coeffs = data.draw(st.lists(st.integers(0, 10), min_size=k, max_size=k))

    def f(x):
        return sum(c * x**i for i, c in enumerate(coeffs)) % 11

    lam = lagrange_coeffs(S, TOY)
    assert sum(lam[i] * f(i) for i in S) % 11 == f(0)
