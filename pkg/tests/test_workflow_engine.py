from collections import Counter

from decwf.simnet import AdversarySpec, Simulator, check_trace
from decwf.workflow import ProcessDefinition, WorkflowNode, prepare_case, project, run_case, translate


def labels(res):
    return project(res.trace, "case1")


def transitions(res):
    return [(r.get("task"), r.get("to")) for r in res.trace.select(kind="workitem")]


def test_start_task_offered_first(wcp1):
    res = run_case(wcp1, "o", seed=0)
    assert transitions(res)[0] == ("A", "offered")
    assert res.status == "complete" and not res.timed_out
    assert labels(res) == [("start", "A"), ("complete", "A"), ("start", "B"), ("complete", "B"), ("start", "C"), ("complete", "C")]


def test_offer_goes_to_every_role_member(wcp17):
    setup = prepare_case(wcp17, "o", seed=1)
    offers = Counter()

    class Counting(WorkflowNode):
        def _on_offer(self, ctx, src, body):
            offers[body["task"]] += 1
            super()._on_offer(ctx, src, body)

    nodes = {n: Counting(n, setup) for n in setup.nodes}
    Simulator(nodes, seed=1).run()
    assert offers == {"A": 1, "B": 3, "C": 3, "D": 1}


def test_and_join_waits_for_both(wcp17):
    for seed in range(10):
        res = run_case(wcp17, "o", seed=seed)
        seq = labels(res)
        d = seq.index(("start", "D"))
        assert ("complete", "B") in seq[:d] and ("complete", "C") in seq[:d]
        assert translate(wcp17).legal(seq, complete=True)


def test_interleaving_census(wcp17):
    orders = Counter()
    for seed in range(30):
        res = run_case(wcp17, "o", seed=seed)
        assert check_trace(res.trace).passed
        seq = labels(res)
        orders[tuple(t for k, t in seq if k == "start" and t in "BC")] += 1
    assert set(orders) == {("B", "C"), ("C", "B")}


def test_singleton_mutex_set(wcp17):
    doc = wcp17.to_doc()
    doc["mutex_sets"] = {"solo": ["B"]}
    d = ProcessDefinition.from_doc(doc)
    res = run_case(d, "o", seed=2)
    assert res.status == "complete"
    assert translate(d).legal(labels(res), complete=True)


def test_multi_instance_with_dynamic_addition(wcp15):
    res = run_case(wcp15, "o", seed=3, dynamic={"M": (1, 1)})
    seq = labels(res)
    assert res.status == "complete"
    assert seq.count(("complete", "M")) == 4
    assert translate(wcp15).legal(seq, complete=True)
    merged = res.trace.select(kind="wf", detail="merged")
    assert [r.get("count") for r in merged] == ["4"]


def test_multi_instance_static(wcp15):
    res = run_case(wcp15, "o", seed=4)
    assert labels(res).count(("start", "M")) == 3
    pre, post = res.setup.mi_plan["M"]
    assert pre in ("w1", "w2", "w3") and post in ("r1", "r2")


def test_omitted_instance_aborts(wcp15):
    for seed in range(5):
        setup = prepare_case(wcp15, "o", seed=seed, dynamic={"M": (1, 1)})
        post = setup.mi_plan["M"][1]
        res = run_case(wcp15, "o", seed=seed, dynamic={"M": (1, 1)}, adversary=AdversarySpec({post: "omit"}))
        assert res.status == "aborted"
        assert res.trace.select(kind="case", detail="abort")[0].get("reason") == "omission"
        assert ("start", "C") not in labels(res)


def test_tampered_account_aborts(wcp15):
    # a relay flips one byte of the sealed account on its way to the post-processor
    for seed in range(5):
        setup = prepare_case(wcp15, "o", seed=seed)

        class Relay(WorkflowNode):
            def _on_mi_account(self, ctx, src, body):
                blob = bytearray.fromhex(body["blob"])
                blob[len(blob) // 2] ^= 0x01
                super()._on_mi_account(ctx, src, dict(body, blob=blob.hex()))

        nodes = {n: (Relay if n == setup.mi_plan["M"][1] else WorkflowNode)(n, setup) for n in setup.nodes}
        res = Simulator(nodes, seed=seed).run()
        assert nodes["o"].status == "aborted"
        assert res.trace.select(kind="case", detail="abort")[0].get("reason") == "account-integrity"
        assert res.trace.select(kind="wf", detail="account-rejected")


def test_corrupt_pre_processor_never_completes_wrongly(wcp15):
    for seed in range(10):
        pre = prepare_case(wcp15, "o", seed=seed).mi_plan["M"][0]
        res = run_case(wcp15, "o", seed=seed, adversary=AdversarySpec({pre: "payload-corrupt"}))
        seq = labels(res)
        assert translate(wcp15).legal(seq, complete=res.status == "complete")
        assert res.status != "complete" or seq.count(("complete", "M")) >= 3


def test_no_out_of_scope_decryption(wcp1):
    for seed in range(10):
        res = run_case(wcp1, "o", seed=seed)
        members = set(res.setup.scopes["x"].members)
        for r in res.trace.select(kind="data", detail="decrypt"):
            assert (r.get("ok") == "1") == (r.node in members)
        assert check_trace(res.trace, "all").passed
