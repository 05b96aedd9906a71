from itertools import combinations

import pytest

from decwf.crypto_core import DEFAULT, TOY, DleqProof, hash_to_group
from decwf.errors import InsufficientShares
from decwf.secret_sharing import SharingPolicy
from decwf.threshold_sig import (
    CompositeSignature,
    SignatureShare,
    VerificationKeySet,
    ts_combine,
    ts_deal,
    ts_sign_share,
    ts_verify,
    ts_verify_share,
)

M = b"approve case 17"


@pytest.fixture(scope="module")
def group():
    return ts_deal(SharingPolicy(2, 3), TOY, seed=b"tsig")


def test_deal_shape(group):
    vks, keys = group
    assert len(keys) == 3
    assert vks.consistent()
    assert VerificationKeySet.from_doc(vks.to_doc()) == vks


def test_group_key_known_secret():
    vks, _ = ts_deal(SharingPolicy(2, 3), TOY, seed=1, secret=3)
    assert vks.group_vk == 18


def test_signing_power_hand_value():
    # find a message hashing to 2 and a key share with value 2
    msg = next(m for m in (b"m%d" % i for i in range(500)) if hash_to_group(m, TOY) == 2)
    for seed in range(200):
        vks, keys = ts_deal(SharingPolicy(2, 3), TOY, seed=seed)
        hit = [k for k in keys if k.share.value == 2]
        if hit:
            assert ts_sign_share(msg, hit[0], vks).value == 4
            return
    pytest.fail("no dealing with a share of value 2")


def test_share_completeness_and_determinism(group):
    vks, keys = group
    for k in keys:
        a, b = ts_sign_share(M, k, vks), ts_sign_share(M, k, vks)
        assert a.value == b.value
        assert ts_verify_share(M, a, vks)


def test_share_bound_to_message(group):
    vks, keys = group
    ss = ts_sign_share(M, keys[0], vks)
    for i in range(40):
        other = b"other %d" % i
        if hash_to_group(other, TOY) == hash_to_group(M, TOY):
            continue  # identical statement at toy size
        assert not ts_verify_share(other, ss, vks)


def test_forged_value_with_reused_proof(group):
    vks, keys = group
    ss = ts_sign_share(M, keys[1], vks)
    for v in [1, 2, 3, 4, 6, 8, 9, 12, 13, 16, 18]:
        forged = SignatureShare(ss.index, v, ss.proof)
        assert ts_verify_share(M, forged, vks) == (v == ss.value)
    assert not ts_verify_share(M, SignatureShare(ss.index, ss.value, DleqProof(ss.proof.challenge, (ss.proof.response + 1) % 11)), vks)
    assert not ts_verify_share(M, SignatureShare(7, ss.value, ss.proof), vks)


def test_combine_and_verify(group):
    vks, keys = group
    shares = [ts_sign_share(M, k, vks) for k in keys]
    values = {ts_combine(M, c, vks).value for c in combinations(shares, 2)}
    assert len(values) == 1
    sig = ts_combine(M, shares[:2], vks)
    assert ts_verify(M, sig, vks)
    assert not ts_verify(M, CompositeSignature(sig.value * 4 % 23, sig.contributors), vks)
    assert not ts_verify(M, CompositeSignature(sig.value, sig.contributors[:1]), vks)
    assert not ts_verify(b"something else", sig, vks)
    w = sig.to_wire(M, vks.dealing_id)
    assert ts_verify(M, CompositeSignature.from_wire(w), vks)


def test_combine_below_threshold(group):
    vks, keys = group
    honest = ts_sign_share(M, keys[0], vks)
    corrupt = SignatureShare(keys[1].index, 1, honest.proof)
    with pytest.raises(InsufficientShares):
        ts_combine(M, [honest, corrupt], vks)
    with pytest.raises(InsufficientShares):
        ts_combine(M, [honest, honest], vks)


def test_default_group_signature():
    vks, keys = ts_deal(SharingPolicy(2, 3), DEFAULT, seed=b"big")
    sig = ts_combine(M, [ts_sign_share(M, k, vks) for k in keys[1:]], vks)
    assert ts_verify(M, sig, vks)
