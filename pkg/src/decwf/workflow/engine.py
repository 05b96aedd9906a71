"""Distributed enactment of one case on the simulator.

The case initiator orchestrates. It offers work items to role members,
allocates to the first acceptor, and records every lifecycle transition. A
holder starts, works and reports completion, and the orchestrator then
offers the successors according to split and join types.

Tasks in a mutex set run inside the set's distributed mutex. The holder
enters before reporting the start and leaves only after the orchestrator has
acknowledged the completion.

A multiple-instance task is split between two participants. The
pre-processor, picked by a least-load rule, creates the instances and keeps
their count. The post-processor, who also holds the next task, merges the
results. The count goes to the post-processor sealed under their pairwise
conference key, and in the clear to the orchestrator, which compares it with
the merge and aborts the case on a mismatch.

Sensitive outputs are sealed under their scope key by the writer and relayed
by the orchestrator, which can only decrypt them if it is in scope itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from decwf.crypto_core import TOY
from decwf.encoding import canonical_json, load_json
from decwf.errors import ConfigError, IllegalTransition, IntegrityError
from decwf.group_key import create_scope_key, gk_keygen
from decwf.mutex import MutexLayout, MutexNode
from decwf.simnet.core import AdversarySpec, Node, Simulator, register_script_hook
from decwf.threshold_sig import SignatureShare
from decwf.workflow.data import open_element, seal_element
from decwf.workflow.model import ProcessDefinition, WorkItem
from decwf.workflow.scopes import wf_scope_keys
from decwf.workflow.team import TeamOffer, team_accept_shares, team_setup

PROTOCOL = "wf"


@dataclass
class CaseSetup:
    """Everything provisioned before the case runs."""

    case_id: str
    defn: ProcessDefinition
    orchestrator: str
    nodes: tuple
    layouts: list
    teams: dict  # task -> TeamKeys
    scopes: dict  # element -> ScopeHandle
    scope_ids: dict  # element -> scope id
    mi_plan: dict  # task -> (pre, post)
    pair_keys: dict  # task -> ScopeHandle for (pre, post)
    dynamic: dict  # task -> (after, add)
    work_time: tuple = (1, 4)
    accept_delay: tuple = (1, 3)
    team_expiry: int = 30
    max_attempts: int = 3

    def mset_layout(self, mset):
        return next(lay for lay in self.layouts if lay.mutex_id == mset)


def _least_loaded(members, load: dict, salt: int) -> str:
    ms = sorted(members)
    rot = ms[salt % len(ms):] + ms[: salt % len(ms)]
    return min(rot, key=lambda m: load.get(m, 0))


def prepare_case(
    defn: ProcessDefinition, orchestrator: str, case_id: str = "case1", seed=0, params=TOY, dynamic=None,
    team_weights=None, **knobs,
) -> CaseSetup:
    nodes = sorted(set(defn.participants()) | {orchestrator})
    # mutex sets: one group per role, the first member leads it
    layouts = []
    for mset, tasks in sorted(defn.mutex_sets.items()):
        groups, placed = {}, set()
        for tid in tasks:
            ms = [m for m in sorted(defn.members_of(defn.tasks[tid].role)) if m not in placed]
            if ms:
                groups[ms[0]] = ms
                placed.update(ms)
        if not groups:
            raise ConfigError(f"mutex set {mset} has no performers")
        layouts.append(MutexLayout(f"{case_id}/{mset}", groups))
    teams = {}
    for tid, t in defn.tasks.items():
        if t.team_policy is not None:
            k, _ = t.team_policy
            weights = (team_weights or {}).get(t.role)
            teams[tid] = team_setup(t.role, defn.members_of(t.role), k, params, seed=f"{seed}|{case_id}", weights=weights)
    ltks, directory = gk_keygen(nodes, params, seed=f"{seed}|{case_id}|ltk")
    specs = wf_scope_keys(defn, case_id)
    scopes = {s.element: create_scope_key(s.scope_id, s.members, ltks, directory, seed, params) for s in specs}
    scope_ids = {s.element: s.scope_id for s in specs}
    load, salt = {}, sum(map(ord, f"{seed}|{case_id}"))
    mi_plan, pair_keys = {}, {}
    for tid, t in defn.tasks.items():
        if t.multi_instance is None or t.multi_instance.trivial:
            continue
        pre = _least_loaded(defn.members_of(t.role), load, salt)
        load[pre] = load.get(pre, 0) + 1
        succ = defn.successors(tid)
        if len(succ) == 1 and defn.tasks[succ[0]].team_policy is None:
            post = _least_loaded(defn.members_of(defn.tasks[succ[0]].role), load, salt + 1)
        else:
            post = orchestrator
        load[post] = load.get(post, 0) + 1
        mi_plan[tid] = (pre, post)
        pair_keys[tid] = create_scope_key(f"{case_id}/mi/{tid}", {pre, post}, ltks, directory, seed, params)
    return CaseSetup(
        case_id, defn, orchestrator, tuple(nodes), layouts, teams, scopes, scope_ids, mi_plan, pair_keys,
        dict(dynamic or {}), **knobs,
    )


def _account_aad(case_id, task) -> str:
    return f"{case_id}/mi/{task}/account"


@dataclass
class _Mi:
    accounted: int = 0
    final: bool = False
    done: dict | None = None
    completed: set = field(default_factory=set)
    created: list = field(default_factory=list)


class WorkflowNode(Node):
    """A participant; the orchestrator is the one named in the setup."""

    def __init__(self, name: str, setup: CaseSetup):
        self.name = name
        self.setup = setup
        self.defn = setup.defn
        self.case = setup.case_id
        self.is_orch = name == setup.orchestrator
        self.mx = MutexNode(name, setup.layouts)
        self.mx.on_enter = self._entered
        self.held = {}  # item -> allocation info
        self.waiting = {}  # mutex id -> [item]
        self.in_cs = {}  # mutex id -> item
        self.acked = set()
        self.store = {}  # element -> plaintext this node could read
        # orchestrator state
        self.items = {}
        self.meta = {}  # item -> (task, inst, attempt)
        self.joins = {}
        self.blobs = {}  # element -> (sealed, payload)
        self.offers = {}  # item -> TeamOffer
        self.mi = {}
        self._early = {}
        self.status = "pending"
        # multiple-instance roles
        self.pre = {}  # task -> dict
        self.post = {}  # task -> dict

    # -- helpers
    def _send(self, ctx, dst, body) -> None:
        ctx.send(dst, PROTOCOL, body)

    def _mset(self, task):
        m = self.defn.mutex_set_of(task)
        return f"{self.case}/{m}" if m else None

    def on_start(self, ctx) -> None:
        if not self.is_orch:
            return
        self.status = "running"
        ctx.trace("case", PROTOCOL, self.case, "start", orchestrator=self.name, process=self.defn.id)
        for el, h in sorted(self.setup.scopes.items()):
            ctx.trace("scopekey", PROTOCOL, self.case, "members", scope=h.scope_id, element=el, members=",".join(h.members))
        for tid, h in sorted(self.setup.pair_keys.items()):
            ctx.trace("scopekey", PROTOCOL, self.case, "members", scope=h.scope_id, element="-", members=",".join(h.members))
        self._enable(ctx, self.defn.start)

    def on_message(self, ctx, src, protocol, body) -> None:
        if protocol == "mutex":
            self.mx.on_message(ctx, src, protocol, body)
            return
        if protocol != PROTOCOL or not isinstance(body, dict):
            return
        handler = getattr(self, "_on_" + str(body.get("t", "")).lower(), None)
        if handler is None:
            ctx.trace("wf", PROTOCOL, self.case, "malformed", sender=src)
            return
        try:
            handler(ctx, src, body)
        except (KeyError, TypeError, ValueError, IllegalTransition) as e:
            ctx.trace("wf", PROTOCOL, self.case, "rejected", sender=src, why=type(e).__name__, msg=str(body.get("t")))

    def on_timer(self, ctx, name, data) -> None:
        if name == "accept":
            self._send(ctx, self.setup.orchestrator, data)
        elif name == "work":
            self._finish(ctx, data)
        elif name == "expire":
            self._expire(ctx, data)
        elif name == "mx-request":
            if self.waiting.get(data) and data not in self.in_cs and self.mx.members[data].state == "idle":
                self.mx.request(ctx, data)

    # ------------------------------------------------------------------ orchestrator

    def _record(self, ctx, item: WorkItem, to: str, holder=None) -> None:
        frm, _ = item.transition(to, holder)
        info = {"item": item.item_id, "task": item.task, "frm": frm, "to": to}
        if item.holder:
            info["holder"] = item.holder
        mset = self.defn.mutex_set_of(item.task)
        if mset:
            info["mset"] = mset
        ctx.trace("workitem", PROTOCOL, self.case, "transition", **info)

    def _abort(self, ctx, reason: str, **info) -> None:
        if self.status != "running":
            return
        self.status = "aborted"
        ctx.trace("case", PROTOCOL, self.case, "abort", reason=reason, **info)

    def _enable(self, ctx, task: str, direct_to=None) -> None:
        if self.status != "running":
            return
        t = self.defn.tasks[task]
        if t.multi_instance is not None and not t.multi_instance.trivial:
            pre, post = self.setup.mi_plan[task]
            self.mi[task] = _Mi()
            rule = self.setup.dynamic.get(task) if t.multi_instance.dynamic else None
            self._send(ctx, pre, {
                "t": "MI_START", "task": task, "count": t.multi_instance.min, "post": post,
                "rule": list(rule) if rule else None, "max": t.multi_instance.max,
            })
            return
        self._offer(ctx, task, 0, 0, direct_to)

    def _offer(self, ctx, task, inst, attempt, direct_to=None) -> None:
        suffix = f"/{inst}" + (f"r{attempt}" if attempt else "")
        item = WorkItem(f"{self.case}/{task}{suffix}", self.case, task, inst)
        self.items[item.item_id] = item
        self.meta[item.item_id] = (task, inst, attempt, direct_to)
        self._record(ctx, item, "offered")
        t = self.defn.tasks[task]
        targets = [direct_to] if direct_to else sorted(self.defn.members_of(t.role))
        for m in targets:
            self._send(ctx, m, {"t": "OFFER", "item": item.item_id, "task": task, "team": task in self.setup.teams})
        if task in self.setup.teams:
            self.offers[item.item_id] = TeamOffer(item, self.setup.teams[task], ctx.now + self.setup.team_expiry)
            ctx.set_timer(self.setup.team_expiry, "expire", item.item_id)

    def _expire(self, ctx, item_id) -> None:
        offer = self.offers.get(item_id)
        if offer is None or self.status != "running":
            return
        if offer.item.state != "offered":
            return
        frm = offer.item.state
        offer.expire(ctx.now)
        ctx.trace("workitem", PROTOCOL, self.case, "transition", item=item_id, task=offer.item.task, frm=frm, to="withdrawn")
        task, inst, attempt, direct_to = self.meta[item_id]
        if attempt + 1 >= self.setup.max_attempts:
            self._abort(ctx, "offer-expired", task=task)
            return
        self._offer(ctx, task, inst, attempt + 1, direct_to)

    def _inputs_for(self, task) -> dict:
        out = {}
        for el in self.defn.tasks[task].reads:
            if el in self.blobs:
                sealed, payload = self.blobs[el]
                out[el] = {"sealed": sealed, "v": payload.hex()}
        return out

    def _allocate(self, ctx, item, holder, performer) -> None:
        self._record(ctx, item, "allocated", holder)
        task = item.task
        body = {"t": "ALLOCATE", "item": item.item_id, "task": task, "inputs": self._inputs_for(task)}
        parent = self._mi_parent(item)
        if parent:
            body["post"] = self.setup.mi_plan[parent][1]
        self._send(ctx, performer, body)

    def _mi_parent(self, item):
        t = self.defn.tasks[item.task]
        return item.task if t.multi_instance is not None and not t.multi_instance.trivial else None

    def _on_accept(self, ctx, src, body) -> None:
        if not self.is_orch or self.status != "running":
            return
        item = self.items[body["item"]]
        if item.item_id in self.offers:
            offer = self.offers[item.item_id]
            for w in body.get("shares", []):
                offer.add(src, SignatureShare.from_wire(w))
            if item.state != "offered" or len(offer.shares) < offer.team.vks.threshold:
                return
            # TeamOffer.try_allocate moves the item itself; trace around it
            frm = item.state
            alloc = offer.try_allocate()
            valid = alloc.verify(offer.team.vks)
            ctx.trace(
                "team", PROTOCOL, self.case, "composite", item=item.item_id, valid=int(valid),
                contributors=",".join(str(i) for i in alloc.composite.indices),
            )
            ctx.trace("workitem", PROTOCOL, self.case, "transition", item=item.item_id, task=item.task, frm=frm, to="allocated", holder=alloc.holder)
            ctx.trace("team", PROTOCOL, self.case, "allocated", item=item.item_id, holder=alloc.holder)
            performer = offer.performer(alloc)
            body = {"t": "ALLOCATE", "item": item.item_id, "task": item.task, "inputs": self._inputs_for(item.task)}
            self._send(ctx, performer, body)
            return
        if item.state != "offered":
            return
        self._allocate(ctx, item, src, src)

    def _on_started(self, ctx, src, body) -> None:
        item = self.items[body["item"]]
        self._record(ctx, item, "started")
        early = self._early.pop(item.item_id, None)
        if early is not None:
            self._on_completed(ctx, *early)

    def _on_completed(self, ctx, src, body) -> None:
        item = self.items[body["item"]]
        if item.state == "allocated":
            # overtook its STARTED message; links are not FIFO
            self._early[item.item_id] = (src, body)
            return
        self._record(ctx, item, "completed")
        self._send(ctx, src, {"t": "ACK", "item": item.item_id})
        for el, out in sorted(body.get("outputs", {}).items()):
            payload = bytes.fromhex(out["v"])
            self.blobs[el] = (bool(out["sealed"]), payload)
            if out["sealed"]:
                self._try_decrypt(ctx, el, payload)
        parent = self._mi_parent(item)
        if parent:
            st = self.mi[parent]
            st.completed.add(item.item_id)
            pre = self.setup.mi_plan[parent][0]
            self._send(ctx, pre, {"t": "STATUS", "task": parent, "item": item.item_id, "done": len(st.completed)})
            self._check_merge(ctx, parent)
            return
        self._advance(ctx, item.task)

    def _advance(self, ctx, task) -> None:
        if self.status != "running":
            return
        t = self.defn.tasks[task]
        succ = self.defn.successors(task)
        if not succ:
            self.status = "complete"
            ctx.trace("case", PROTOCOL, self.case, "complete", last=task)
            return
        if t.split == "XOR":
            succ = [succ[ctx.rng.randrange(len(succ))]]
        for s in succ:
            direct = None
            if task in self.setup.mi_plan and self.setup.mi_plan[task][1] != self.setup.orchestrator:
                direct = self.setup.mi_plan[task][1]
            if self.defn.tasks[s].join == "AND":
                got = self.joins.setdefault(s, set())
                got.add(task)
                if len(got) < len(self.defn.predecessors(s)):
                    continue
                del self.joins[s]
            self._enable(ctx, s, direct)

    def _on_spawn(self, ctx, src, body) -> None:
        task = body["task"]
        pre, _ = self.setup.mi_plan[task]
        if src != pre:
            raise ValueError("spawn from a node that is not the pre-processor")
        st = self.mi[task]
        for inst in body["instances"]:
            st.created.append(int(inst))
            self._offer(ctx, task, int(inst), 0)

    def _on_account(self, ctx, src, body) -> None:
        # the clear copy the pre-processor sends to the orchestrator
        task = body["task"]
        if src != self.setup.mi_plan[task][0]:
            raise ValueError("account from a node that is not the pre-processor")
        st = self.mi[task]
        if int(body["count"]) >= st.accounted:
            st.accounted = int(body["count"])
        st.final = st.final or bool(body["final"])
        self._check_merge(ctx, task)

    def _on_mi_done(self, ctx, src, body) -> None:
        task = body["task"]
        if src != self.setup.mi_plan[task][1]:
            raise ValueError("merge report from a node that is not the post-processor")
        self.mi[task].done = body
        self._check_merge(ctx, task)

    def _check_merge(self, ctx, task) -> None:
        st = self.mi[task]
        if not st.final or st.done is None or self.status != "running":
            return
        results = st.done.get("results", [])
        items = {r[0] for r in results}
        expected = {f"{self.case}/{task}/{i}" for i in range(st.accounted)}
        if int(st.done.get("count", -1)) != st.accounted or items != expected:
            self._abort(ctx, "omission", task=task, accounted=st.accounted, merged=len(items))
            return
        if not expected <= st.completed:
            return  # some completions are still in flight
        ctx.trace("wf", PROTOCOL, self.case, "merged", task=task, count=st.accounted)
        self._advance(ctx, task)

    def _on_abort(self, ctx, src, body) -> None:
        if self.is_orch:
            self._abort(ctx, body.get("reason", "peer"), by=src)

    # ------------------------------------------------------------------ participant

    def _try_decrypt(self, ctx, el, blob) -> bytes | None:
        handle = self.setup.scopes.get(el)
        scope = self.setup.scope_ids.get(el, "-")
        try:
            key = handle.key_for(self.name)
            value = open_element(key, el, scope, blob)
        except (PermissionError, IntegrityError, AttributeError):
            ctx.trace("data", PROTOCOL, self.case, "decrypt", scope=scope, element=el, ok=0)
            return None
        ctx.trace("data", PROTOCOL, self.case, "decrypt", scope=scope, element=el, ok=1)
        return value

    def _on_offer(self, ctx, src, body) -> None:
        task = body["task"]
        reply = {"t": "ACCEPT", "item": body["item"]}
        if body.get("team"):
            team = self.setup.teams[task]
            reply["shares"] = [s.to_wire() for s in team_accept_shares(body["item"], self.name, team)]
        lo, hi = self.setup.accept_delay
        ctx.set_timer(ctx.rng.randint(lo, hi), "accept", reply)

    def _on_allocate(self, ctx, src, body) -> None:
        item = body["item"]
        task = body["task"]
        for el, inp in sorted(body.get("inputs", {}).items()):
            payload = bytes.fromhex(inp["v"])
            value = self._try_decrypt(ctx, el, payload) if inp["sealed"] else payload
            if value is not None:
                self.store[el] = value
        self.held[item] = {"task": task, "post": body.get("post")}
        mx = self._mset(task)
        if mx is None:
            self._begin(ctx, item)
            return
        self.waiting.setdefault(mx, []).append(item)
        if mx not in self.in_cs and self.mx.members[mx].state == "idle":
            self.mx.request(ctx, mx)

    def _entered(self, ctx, mx) -> None:
        queue = self.waiting.get(mx, [])
        if not queue:
            self.mx.release(ctx, mx)
            return
        item = queue.pop(0)
        self.in_cs[mx] = item
        self._begin(ctx, item)

    def _begin(self, ctx, item) -> None:
        self._send(ctx, self.setup.orchestrator, {"t": "STARTED", "item": item})
        lo, hi = self.setup.work_time
        ctx.set_timer(ctx.rng.randint(lo, hi), "work", item)

    def _finish(self, ctx, item) -> None:
        info = self.held[item]
        task = info["task"]
        outputs = {}
        for el in self.defn.tasks[task].writes:
            value = f"{el}@{item}".encode()
            element = self.defn.data_elements[el]
            if element.sensitive:
                handle = self.setup.scopes[el]
                try:
                    key = handle.key_for(self.name)
                except PermissionError:
                    ctx.trace("data", PROTOCOL, self.case, "no-key", scope=handle.scope_id, element=el)
                    continue
                nonce = ctx.rng.randbytes(12)
                outputs[el] = {"sealed": True, "v": seal_element(key, el, self.setup.scope_ids[el], value, nonce).hex()}
            else:
                outputs[el] = {"sealed": False, "v": value.hex()}
        self._send(ctx, self.setup.orchestrator, {"t": "COMPLETED", "item": item, "outputs": outputs})
        if info.get("post"):
            self._send(ctx, info["post"], {"t": "RESULT", "task": task, "item": item, "result": f"r:{item}"})

    def _on_ack(self, ctx, src, body) -> None:
        item = body["item"]
        self.acked.add(item)
        info = self.held.get(item)
        if info is None:
            return
        mx = self._mset(info["task"])
        if mx is not None and self.in_cs.get(mx) == item:
            del self.in_cs[mx]
            self.mx.release(ctx, mx)
            if self.waiting.get(mx):
                ctx.set_timer(1, "mx-request", mx)

    # pre-processor
    def _on_mi_start(self, ctx, src, body) -> None:
        task = body["task"]
        count = int(body["count"])
        rule = body.get("rule")
        st = self.pre[task] = {"created": count, "post": body["post"], "rule": rule, "added": False, "max": body.get("max")}
        self._send(ctx, src, {"t": "SPAWN", "task": task, "instances": list(range(count))})
        self._account(ctx, task, final=not rule)
        st["final"] = not rule

    def _account(self, ctx, task, final) -> None:
        st = self.pre[task]
        handle = self.setup.pair_keys[task]
        doc = {"task": task, "created": st["created"], "open": not final}
        blob = seal_element(handle.key_for(self.name), "account", _account_aad(self.case, task), canonical_json(doc),
                            ctx.rng.randbytes(12))
        self._send(ctx, st["post"], {"t": "MI_ACCOUNT", "task": task, "blob": blob.hex()})
        self._send(ctx, self.setup.orchestrator, {"t": "ACCOUNT", "task": task, "count": st["created"], "final": final})

    def _on_status(self, ctx, src, body) -> None:
        task = body["task"]
        st = self.pre.get(task)
        if st is None or st["final"]:
            return
        after, add = st["rule"]
        if int(body["done"]) >= int(after) and not st["added"]:
            if st["max"] is not None:
                add = max(0, min(add, int(st["max"]) - st["created"]))
            first = st["created"]
            st["created"] += add
            st["added"] = True
            st["final"] = True
            if add:
                self._send(ctx, self.setup.orchestrator, {"t": "SPAWN", "task": task, "instances": list(range(first, first + add))})
            self._account(ctx, task, final=True)

    # post-processor
    def _on_mi_account(self, ctx, src, body) -> None:
        task = body["task"]
        handle = self.setup.pair_keys[task]
        try:
            raw = open_element(handle.key_for(self.name), "account", _account_aad(self.case, task), bytes.fromhex(body["blob"]))
        except (IntegrityError, PermissionError):
            ctx.trace("wf", PROTOCOL, self.case, "account-rejected", task=task, sender=src)
            self._send(ctx, self.setup.orchestrator, {"t": "ABORT", "reason": "account-integrity", "task": task})
            return
        doc = load_json(raw)
        st = self.post.setdefault(task, {"created": 0, "open": True, "results": {}, "sent": False})
        if doc["created"] >= st["created"]:
            st["created"] = int(doc["created"])
            st["open"] = bool(doc["open"]) and st["open"]
        self._merge(ctx, task)

    def _on_result(self, ctx, src, body) -> None:
        task = body["task"]
        st = self.post.setdefault(task, {"created": 0, "open": True, "results": {}, "sent": False})
        st["results"][body["item"]] = body["result"]
        self._merge(ctx, task)

    def _merge(self, ctx, task) -> None:
        st = self.post[task]
        if st["sent"] or st["open"] or st["created"] == 0 or len(st["results"]) < st["created"]:
            return
        st["sent"] = True
        results = sorted(st["results"].items())
        ctx.trace("wf", PROTOCOL, self.case, "merge", task=task, count=len(results))
        self._send(ctx, self.setup.orchestrator, {"t": "MI_DONE", "task": task, "count": len(results), "results": results})

    def done(self) -> bool:
        if self.is_orch:
            return self.status != "running"
        return not self.in_cs and not any(self.waiting.values())


def _omit_result(node, ctx, dst, body, rng):
    # a post-processor that silently drops one instance result
    if isinstance(body, dict) and body.get("t") == "MI_DONE" and body.get("results"):
        body = dict(body)
        results = list(body["results"])
        results.pop(rng.randrange(len(results)))
        body["results"] = results
        body["count"] = len(results)
    return body


register_script_hook("omit", PROTOCOL, _omit_result)


@dataclass
class CaseResult:
    trace: object
    status: str
    nodes: dict
    setup: CaseSetup
    timed_out: bool


def run_case(
    defn: ProcessDefinition, orchestrator: str, seed=0, case_id: str = "case1", adversary: AdversarySpec | None = None,
    dmax: int = 4, tick_limit: int = 5_000, params=TOY, dynamic=None, team_weights=None, **knobs,
) -> CaseResult:
    setup = prepare_case(defn, orchestrator, case_id, seed, params, dynamic, team_weights, **knobs)
    nodes = {n: WorkflowNode(n, setup) for n in setup.nodes}
    sim = Simulator(nodes, seed=seed, dmax=dmax, adversary=adversary, tick_limit=tick_limit)
    res = sim.run()
    return CaseResult(res.trace, nodes[orchestrator].status, nodes, setup, res.timed_out)
