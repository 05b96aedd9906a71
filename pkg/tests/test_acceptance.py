"""Exit criteria for the build.

Each test registers its criterion with the ``criterion`` fixture; the
terminal summary prints one PASS/FAIL line per criterion. Runtime budgets
are asserted alongside the properties.
"""

import time
from collections import Counter
from itertools import combinations

import pytest

from decwf.anon_channel import (
    HEADER,
    PACKET_SIZE,
    AnonIdentity,
    AnonPacket,
    ChannelId,
    build_channel,
    noise_packet,
    seal_packet,
    simulate_anonymity,
)
from decwf.coin_toss import CoinScheme, coin_combine, coin_share
from decwf.crypto_core import TOY, DleqProof
from decwf.errors import InsufficientShares
from decwf.group_key import GroupKeyNode, gk_keygen
from decwf.mutex import MutexLayout, model_check
from decwf.scenario import load_scenario, resolve
from decwf.secret_sharing import SharingPolicy, deal, reconstruct
from decwf.simnet import Simulator, check_trace
from decwf.threshold_sig import CompositeSignature, SignatureShare, ts_combine, ts_deal, ts_sign_share, ts_verify
from decwf.workflow import project

pytestmark = pytest.mark.acceptance

SUBGROUP = sorted({pow(TOY.g, e, TOY.p) for e in range(TOY.q)})


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.1f}s, budget {self.seconds}s"


def sweep(name, seeds=None):
    """Run every variant of a bundled scenario; returns the outcomes."""
    sc = load_scenario(resolve(name))
    return [sc.run(s, v) for v in sc.variants for s in (seeds if seeds is not None else sc.seeds)]


def failures(outcomes):
    return [(o.variant, o.seed, [n for n, v in o.rows() if v]) for o in outcomes if not o.passed]


def test_threshold_reconstruction(criterion):
    criterion(1, "every k-subset reconstructs, every (k-1)-subset fails, k <= n <= 6")
    with Budget(10):
        for n in range(1, 7):
            for k in range(1, n + 1):
                secret = (3 * n + k) % TOY.q
                dealing, shares = deal(secret, SharingPolicy(k, n), TOY, seed=f"{k}/{n}")
                for sub in combinations(shares, k):
                    assert reconstruct(sub, dealing) == secret
                for sub in combinations(shares, k - 1):
                    with pytest.raises(InsufficientShares):
                        reconstruct(sub, dealing)


def test_hierarchical_sharing(criterion):
    criterion(2, "weights 3/2/2/1/1/1, k=3: success iff total multiplicity >= 3")
    weights = {"president": 3, "vp1": 2, "vp2": 2, "exec1": 1, "exec2": 1, "exec3": 1}
    with Budget(5):
        policy = SharingPolicy(3, 10, weights)
        dealing, shares = deal(7, policy, TOY, seed=b"company")
        alloc = policy.allocation()
        by_index = {s.index: s for s in shares}
        people = list(weights)
        checked = 0
        for r in range(len(people) + 1):
            for group in combinations(people, r):
                held = [by_index[i] for p in group for i in alloc[p]]
                if sum(weights[p] for p in group) >= 3:
                    assert reconstruct(held, dealing) == 7
                else:
                    with pytest.raises(InsufficientShares):
                        reconstruct(held, dealing)
                checked += 1
        assert checked == 2 ** len(people)
        # the named cases
        for group in (["president"], ["vp1", "vp2"], ["vp1", "exec2"], ["exec1", "exec2", "exec3"]):
            assert reconstruct([by_index[i] for p in group for i in alloc[p]], dealing) == 7


def test_threshold_signature_soundness(criterion):
    criterion(3, "no composite with fewer than k honest contributors verifies; k-subsets agree")
    with Budget(30):
        n, k = 4, 3
        vks, keys = ts_deal(SharingPolicy(k, n), TOY, seed=b"sound")
        msg = b"release payment"
        honest = {s.index: s for s in (ts_sign_share(msg, key, vks) for key in keys)}
        # proofs an attacker could replay: this message and another one
        pool = [s.proof for s in honest.values()]
        pool += [ts_sign_share(b"other", key, vks).proof for key in keys]
        found = 0
        tried = 0
        reproduced = 0
        for r in range(k):
            for sub in combinations(sorted(honest), r):
                missing = [i for i in sorted(honest) if i not in sub]
                for forged_set in combinations(missing, k - r):
                    # forge every missing contributor the same way: every value,
                    # every replayed challenge and every response in Z_q
                    base = [honest[i] for i in sub]
                    for v in SUBGROUP:
                        for proof in pool:
                            for s in range(TOY.q):
                                forged = [SignatureShare(j, v, DleqProof(proof.challenge, s)) for j in forged_set]
                                # the sweep also hits the genuine share; that one is honest, not forged
                                copies = sum(f == honest[f.index] for f in forged)
                                reproduced += copies
                                contributors = tuple(base + forged)
                                for value in SUBGROUP:
                                    tried += 1
                                    ok = ts_verify(msg, CompositeSignature(value, contributors), vks)
                                    if r + copies < k:
                                        found += ok
                                    else:
                                        assert ok == (value == ts_combine(msg, list(honest.values()), vks).value)
                # honest shares alone, below the threshold
                for value in SUBGROUP:
                    found += ts_verify(msg, CompositeSignature(value, tuple(honest[i] for i in sub)), vks)
        assert tried > 10_000
        assert reproduced > 0
        assert found == 0
        values = {ts_combine(msg, sub, vks).value for sub in combinations(honest.values(), k)}
        assert len(values) == 1
        assert ts_verify(msg, ts_combine(msg, list(honest.values()), vks), vks)


def test_threshold_signature_subsets_larger_groups(criterion):
    criterion(3, "no composite with fewer than k honest contributors verifies; k-subsets agree")
    with Budget(30):
        for n in range(2, 7):
            for k in range(1, n + 1):
                vks, keys = ts_deal(SharingPolicy(k, n), TOY, seed=f"agree{k}/{n}")
                msg = f"m{k}{n}".encode()
                shares = [ts_sign_share(msg, key, vks) for key in keys]
                assert len({ts_combine(msg, sub, vks).value for sub in combinations(shares, k)}) == 1
                for sub in combinations(shares, k - 1):
                    with pytest.raises(InsufficientShares):
                        ts_combine(msg, sub, vks)


def test_coin_agreement_and_balance(criterion):
    criterion(4, "64 coin names: all k-subsets agree, bit frequency in [0.25, 0.75]")
    with Budget(10):
        vks, keys = ts_deal(SharingPolicy(3, 5), TOY, seed=b"coins")
        scheme = CoinScheme(vks)
        ones = 0
        for i in range(64):
            name = f"coin/{i}".encode()
            shares = [coin_share(name, key, scheme) for key in keys]
            bits = {coin_combine(name, sub, scheme) for sub in combinations(shares, 3)}
            assert len(bits) == 1
            ones += bits.pop()
        assert 0.25 <= ones / 64 <= 0.75


@pytest.mark.slow
def test_aba(criterion):
    criterion(5, "ABA n=4 t=1, every script x 1000 seeds: agreement, validity, termination")
    with Budget(300):
        outcomes = sweep("aba-adversarial")
        scripts = {o.variant for o in outcomes}
        assert {"silent", "equivocate", "delay-max", "replay"} <= scripts
        assert len(outcomes) == len(scripts) * 1000
        assert failures(outcomes) == []
        assert not any(o.timed_out for o in outcomes)
        assert Counter(o.status for o in outcomes) == {"decided": len(outcomes)}


@pytest.mark.slow
def test_notice_board(criterion):
    criterion(6, "conflicting publishes, 200 seeds: at most one attested value, same everywhere")
    outcomes = sweep("notice-board")
    assert failures(outcomes) == []
    for o in outcomes:
        assert o.status in ("attested=0", "attested=1")
        attested = {r.get("vhash") for r in o.trace.select(kind="nb", detail="attested")}
        assert len(attested) <= 1


@pytest.mark.slow
def test_group_key(criterion):
    criterion(7, "honest sessions agree with no exclusions; one equivocator excluded >= 99%, never a split key")
    ltks_all, directory = gk_keygen([f"m{i}" for i in range(1, 7)], TOY, seed=11)
    for size in range(2, 7):
        members = [f"m{i}" for i in range(1, size + 1)]
        for seed in range(200):
            nodes = {m: GroupKeyNode(f"s{size}", members, ltks_all[m], directory, seed=seed) for m in members}
            res = Simulator(nodes, seed=seed, dmax=4).run()
            sessions = [n.session for n in nodes.values()]
            assert {s.status for s in sessions} == {"established"}
            assert {s.excluded for s in sessions} == {frozenset()}
            assert len({s.master.key for s in sessions}) == 1
            assert check_trace(res.trace, "gk").passed
    outcomes = [o for o in sweep("group-key") if o.variant == "equivocate"]
    assert len(outcomes) == 200
    assert failures(outcomes) == []
    excluded = sum(o.status == "excluded:m1" for o in outcomes)
    assert excluded >= 0.99 * len(outcomes)
    assert all(o.status in ("excluded:m1", "aborted") for o in outcomes)


def test_anonymity_structure_and_rate(criterion):
    criterion(8, "noise and real packets look alike, rate exactly out_rate, attacker <= 1/N + 0.1")
    import random

    rng = random.Random(0)
    bob = AnonIdentity.generate("bob")
    headers = set()
    for i in range(200):
        target = ChannelId(format(i % 8, "03b"), i % 4)
        real = seal_packet(target, bytes(rng.randrange(1, 900)), bob.public, rng.randbytes(44))
        fake = noise_packet(target, rng)
        for pkt in (real, fake):
            raw = pkt.to_bytes()
            assert len(raw) == PACKET_SIZE
            assert AnonPacket.from_bytes(raw) == pkt
        assert real.to_bytes()[:HEADER] == fake.to_bytes()[:HEADER]
        headers.add(real.to_bytes()[:HEADER])
    assert len(headers) > 1
    for seed in range(20):
        nodes, topo, obs = build_channel(6, seed=seed, duration=10)
        names = sorted(nodes)
        nodes[names[seed % 6]].schedule_send(3, ChannelId("", 0), b"x", names[(seed + 1) % 6])
        res = Simulator(nodes, seed=seed, dmax=3).run()
        assert check_trace(res.trace, "anon").passed
        per_link_tick = Counter((t, s, d) for t, s, d, _ in obs.log)
        assert set(per_link_tick.values()) == {2}


@pytest.mark.slow
@pytest.mark.parametrize("size", [4, 8])
def test_anonymity_timing_attacker(criterion, size):
    criterion(8, "noise and real packets look alike, rate exactly out_rate, attacker <= 1/N + 0.1")
    hits = 0
    for seed in range(500):
        sender, guess, res, nodes = simulate_anonymity(size, seed)
        hits += sender == guess
        assert sum(len(n.received) for n in nodes.values()) == 1
        assert check_trace(res.trace, "anon").passed
    assert hits / 500 <= 1 / size + 0.1


@pytest.mark.slow
def test_mutex(criterion):
    criterion(9, "3-group model check clean; 50 requesters x 500 seeds, no overlap, all granted")
    result = model_check(MutexLayout("m", {"A": ["A", "a1"], "B": ["B", "b1"], "C": ["C", "c1"]}), ["a1", "B", "c1"])
    assert result.ok and result.terminal > 0
    result = model_check(MutexLayout("m", {"A": ["A"], "B": ["B"], "C": ["C"]}), ["A", "B", "C"])
    assert result.ok
    outcomes = sweep("mutex")
    assert len(outcomes) == 500
    assert failures(outcomes) == []
    assert all(o.status == "entered=50" for o in outcomes)


@pytest.mark.slow
def test_workflow_differential(criterion):
    criterion(10, "WCP-1/15/17 x 200 seeds project to legal oracle runs; both orders; no out-of-scope decryption")
    census = Counter()
    for name in ("wcp1", "wcp15", "wcp15-omission", "wcp17"):
        outcomes = sweep(name)
        assert len(outcomes) == 200
        assert failures(outcomes) == []
        for o in outcomes:
            assert dict(o.rows())["scope-confidentiality"] == []
            if name == "wcp17":
                seq = project(o.trace)
                census[tuple(t for kind, t in seq if kind == "start" and t in ("B", "C"))] += 1
        expected = "aborted" if name == "wcp15-omission" else "complete"
        assert {o.status for o in outcomes} == {expected}
    assert set(census) == {("B", "C"), ("C", "B")}


def test_reproducible_traces(criterion, tmp_path):
    criterion(11, "re-running a (scenario, seed) gives a byte-identical trace file")
    from decwf.scenario import bundled_scenarios

    for name in sorted(bundled_scenarios()):
        sc = load_scenario(resolve(name))
        for v in sc.variants[:2]:
            for seed in (0, 7):
                a, b = tmp_path / "a.trace", tmp_path / "b.trace"
                sc.run(seed, v).trace.write(a)
                load_scenario(resolve(name)).run(seed, v).trace.write(b)
                assert a.read_bytes() == b.read_bytes(), (name, v.name, seed)
