from itertools import combinations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from decwf.crypto_core import DEFAULT, TOY
from decwf.errors import DealingMismatch, InsufficientShares, PolicyError
from decwf.secret_sharing import (
    Dealing,
    Share,
    SharingPolicy,
    deal,
    deal_polynomial,
    reconstruct,
    recover_key,
    shares_for,
    split_key,
    verify_share,
)

COMPANY = {"president": 3, "vp1": 2, "vp2": 2, "exec1": 1, "exec2": 1, "exec3": 1}


def test_single_share_policy():
    d, sh = deal(5, SharingPolicy(1, 1), TOY, seed=1)
    assert reconstruct(sh, d) == 5


def test_hand_polynomial_shares():
    d, sh = deal_polynomial([7, 3], SharingPolicy(2, 3), TOY)
    assert [(s.index, s.value) for s in sh] == [(1, 10), (2, 2), (3, 5)]
    assert reconstruct([sh[0], sh[2]], d) == 7
    assert reconstruct(sh, d) == 7
    assert d.commitments == (pow(4, 7, 23), pow(4, 3, 23))


def test_corrupted_share_is_skipped():
    d, sh = deal_polynomial([7, 3], SharingPolicy(2, 3), TOY)
    bad = Share(1, (sh[0].value + 1) % 11, d.dealing_id)
    assert not verify_share(bad, d)
    assert reconstruct([bad, sh[1], sh[2]], d) == 7
    with pytest.raises(InsufficientShares):
        reconstruct([bad, sh[1]], d)


def test_verify_share_rules():
    d, sh = deal(4, SharingPolicy(2, 3), TOY, seed=2)
    d2, sh2 = deal(4, SharingPolicy(2, 3), TOY, seed=3)
    assert all(verify_share(s, d) for s in sh)
    assert not verify_share(Share(sh[0].index, (sh[0].value + 1) % 11, d.dealing_id), d)
    assert d.dealing_id != d2.dealing_id
    assert not verify_share(sh2[0], d)
    assert not verify_share(Share(9, 1, d.dealing_id), d)
    with pytest.raises(DealingMismatch):
        reconstruct([sh[0], sh2[1]], d)


def test_policy_validation():
    for k, n in [(0, 3), (4, 3), (2, 0)]:
        with pytest.raises(PolicyError):
            SharingPolicy(k, n).validate(TOY)
    with pytest.raises(PolicyError):
        SharingPolicy(2, 11).validate(TOY)  # no room for 11 nonzero indices mod 11
    with pytest.raises(PolicyError):
        SharingPolicy(2, 4, {"a": 2, "b": 1}).validate(TOY)
    with pytest.raises(PolicyError):
        SharingPolicy(2, 3, {"a": 3, "b": 0}).validate(TOY)
    with pytest.raises(PolicyError):
        deal(11, SharingPolicy(1, 1), TOY)


def test_weighted_company():
    policy = SharingPolicy(3, 10, COMPANY)
    alloc = policy.allocation()
    assert sum(len(v) for v in alloc.values()) == 10
    assert alloc["president"] == [1, 2, 3]
    d, sh = deal(9, policy, TOY, seed=5)

    def can(*who):
        pool = [s for w in who for s in shares_for(w, policy, sh)]
        try:
            return reconstruct(pool, d) == 9
        except InsufficientShares:
            return False

    assert can("president")
    assert can("vp1", "vp2")
    assert can("exec1", "exec2", "exec3")
    assert can("vp1", "exec2")  # two values plus one reach the threshold
    assert not can("vp1")
    assert not can("exec1", "exec3")


def test_weighted_dealing_is_multiplicity_expansion():
    # the same coefficients dealt weighted and unweighted give the same share values
    w, _ = deal_polynomial([3, 1, 4], SharingPolicy(3, 10, COMPANY), TOY)
    u, _ = deal_polynomial([3, 1, 4], SharingPolicy(3, 10), TOY)
    assert w.commitments == u.commitments


def test_docs_roundtrip():
    d, sh = deal(3, SharingPolicy(2, 3, {"a": 2, "b": 1}), TOY, seed=4)
    assert Dealing.from_doc(d.to_doc()) == d
    assert [Share.from_doc(s.to_doc()) for s in sh] == sh
    assert SharingPolicy.from_doc(d.policy.to_doc()) == d.policy


@given(st.binary(min_size=0, max_size=32), st.integers(1, 4), st.integers(0, 3))
def test_split_key_roundtrip(key, k, extra):
    policy = SharingPolicy(k, k + extra)
    parts = split_key(key, policy, TOY, seed=b"s")
    assert recover_key([(d, sh[:k]) for d, sh in parts]) == key
    if k > 1:
        with pytest.raises(InsufficientShares):
            recover_key([(d, sh[: k - 1]) for d, sh in parts])


def test_split_key_default_group_and_limit():
    key = bytes(range(32))
    parts = split_key(key, SharingPolicy(2, 3), DEFAULT, seed=b"d")
    assert len(parts) == 1
    assert recover_key([(d, sh[1:]) for d, sh in parts]) == key
    with pytest.raises(PolicyError):
        split_key(bytes(33), SharingPolicy(1, 1), TOY)


def test_any_subset_same_result():
    d, sh = deal(8, SharingPolicy(3, 5), TOY, seed=6)
    assert {reconstruct(c, d) for c in combinations(sh, 3)} == {8}
