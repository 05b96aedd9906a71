"""Offline trace checks.

Each invariant is a function from a trace to a list of violation strings;
an empty list is a pass. Invariants whose records are absent pass vacuously,
so one suite can be run over any trace.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from decwf.errors import TraceFormatError
from decwf.simnet.trace import Trace

REGISTRY = {}


def invariant(name):
    def wrap(fn):
        REGISTRY[name] = fn
        return fn

    return wrap


def _setup(trace: Trace):
    for r in trace.records:
        if r.kind == "setup" and r.protocol == "sim":
            nodes = [x for x in r.get("nodes", "").split(",") if x]
            bad = {x for x in r.get("corrupted", "").split(",") if x}
            return nodes, bad
    return [], set()


def check_wellformed(trace: Trace) -> list:
    out = []
    prev_time = None
    for i, r in enumerate(trace.records, 1):
        if r.seq != i:
            out.append(f"record {i} has seq={r.seq}")
            break
        if prev_time is not None and r.time < prev_time:
            out.append(f"seq={r.seq} goes back in time ({r.time} < {prev_time})")
            break
        prev_time = r.time
    if not trace.complete:
        out.append("trace has no end record (truncated?)")
    return out


@invariant("wellformed")
def _wellformed(trace):
    return check_wellformed(trace)


@invariant("mutex-safety")
def mutex_safety(trace):
    out = []
    inside = {}
    for r in trace.select(kind="mutex"):
        if r.detail == "enter":
            holder = inside.get(r.instance)
            if holder is not None:
                out.append(f"seq={r.seq}: {r.node} entered {r.instance} while {holder} inside")
            inside[r.instance] = r.node
        elif r.detail == "exit":
            if inside.get(r.instance) != r.node:
                out.append(f"seq={r.seq}: {r.node} left {r.instance} without holding it")
            inside.pop(r.instance, None)
    return out


@invariant("mutex-liveness")
def mutex_liveness(trace):
    waiting = defaultdict(int)
    for r in trace.select(kind="mutex"):
        if r.detail == "request":
            waiting[(r.node, r.instance)] += 1
        elif r.detail == "enter":
            waiting[(r.node, r.instance)] -= 1
    return [f"{n} never granted {m}" for (n, m), c in sorted(waiting.items()) if c > 0]


def _aba(trace):
    _, bad = _setup(trace)
    inputs = defaultdict(dict)
    decisions = defaultdict(dict)
    for r in trace.select(kind="aba"):
        if r.node in bad:
            continue
        if r.detail == "input":
            inputs[r.instance][r.node] = r.get("value")
        elif r.detail == "decide":
            decisions[r.instance].setdefault(r.node, []).append(r.get("value"))
    return inputs, decisions


@invariant("aba-agreement")
def aba_agreement(trace):
    out = []
    _, decisions = _aba(trace)
    for inst, per_node in sorted(decisions.items()):
        values = {v for vs in per_node.values() for v in vs}
        if len(values) > 1:
            out.append(f"{inst}: honest decisions differ {sorted(values)}")
        for node, vs in sorted(per_node.items()):
            if len(vs) > 1:
                out.append(f"{inst}: {node} decided more than once")
    return out


@invariant("aba-validity")
def aba_validity(trace):
    out = []
    inputs, decisions = _aba(trace)
    for inst, per_node in sorted(inputs.items()):
        vals = set(per_node.values())
        if len(vals) != 1:
            continue
        (b,) = vals
        for node, vs in sorted(decisions.get(inst, {}).items()):
            if any(v != b for v in vs):
                out.append(f"{inst}: all honest input {b} but {node} decided {vs}")
    return out


@invariant("aba-termination")
def aba_termination(trace):
    inputs, decisions = _aba(trace)
    out = []
    for inst, per_node in sorted(inputs.items()):
        for node in sorted(per_node):
            if node not in decisions.get(inst, {}):
                out.append(f"{inst}: {node} never decided")
    return out


@invariant("nb-uniqueness")
def nb_uniqueness(trace):
    seen = defaultdict(set)
    for r in trace.select(kind="nb", detail="attested"):
        seen[(r.get("key"), r.get("epoch"))].add(r.get("vhash"))
    return [f"key {k} epoch {e}: {len(v)} attested values" for (k, e), v in sorted(seen.items()) if len(v) > 1]


@invariant("rate-constancy")
def rate_constancy(trace):
    out = []
    for r in trace.select(kind="anon", detail="emit"):
        if r.get("count") != r.get("rate"):
            out.append(f"seq={r.seq}: {r.node} emitted {r.get('count')} with rate {r.get('rate')}")
    return out


@invariant("gk-agreement")
def gk_agreement(trace):
    _, bad = _setup(trace)
    keys = defaultdict(dict)
    for r in trace.select(kind="gk", detail="established"):
        if r.node not in bad:
            keys[r.instance][r.node] = r.get("fp")
    out = []
    for sid, per in sorted(keys.items()):
        if len(set(per.values())) > 1:
            out.append(f"session {sid}: honest members hold {len(set(per.values()))} different keys")
    return out


LEGAL = {
    ("-", "offered"),
    ("offered", "allocated"),
    ("offered", "withdrawn"),
    ("allocated", "withdrawn"),
    ("allocated", "started"),
    ("started", "completed"),
    ("started", "failed"),
}


@invariant("workitem-legality")
def workitem_legality(trace):
    out = []
    state = {}
    for r in trace.select(kind="workitem", detail="transition"):
        item = (r.instance, r.get("item"))
        frm, to = r.get("frm"), r.get("to")
        cur = state.get(item, "-")
        if frm != cur:
            out.append(f"seq={r.seq}: item {item[1]} recorded from {frm} but was {cur}")
        if (cur, to) not in LEGAL:
            out.append(f"seq={r.seq}: item {item[1]} illegal {cur} -> {to}")
        state[item] = to
    return out


@invariant("interleave-safety")
def interleave_safety(trace):
    out = []
    running = {}
    for r in trace.select(kind="workitem", detail="transition"):
        mset = r.get("mset")
        if not mset:
            continue
        key = (r.instance, mset)
        if r.get("to") == "started":
            if key in running:
                out.append(f"seq={r.seq}: {r.get('item')} started while {running[key]} running in {mset}")
            running[key] = r.get("item")
        elif r.get("to") in ("completed", "failed") and running.get(key) == r.get("item"):
            del running[key]
    return out


@invariant("scope-confidentiality")
def scope_confidentiality(trace):
    members = {}
    for r in trace.select(kind="scopekey", detail="members"):
        members[(r.instance, r.get("scope"))] = set(r.get("members", "").split(","))
    out = []
    for r in trace.select(kind="data", detail="decrypt"):
        if r.get("ok") != "1":
            continue
        allowed = members.get((r.instance, r.get("scope")))
        if allowed is None or r.node not in allowed:
            out.append(f"seq={r.seq}: {r.node} decrypted {r.get('element')} outside scope {r.get('scope')}")
    return out


@invariant("team-acceptance")
def team_acceptance(trace):
    sigs = set()
    allocs = set()
    for r in trace.select(kind="team"):
        key = (r.instance, r.get("item"))
        if r.detail == "composite" and r.get("valid") == "1":
            sigs.add(key)
        elif r.detail == "allocated":
            allocs.add(key)
    out = [f"item {i} allocated to a team without a verifying acceptance" for _, i in sorted(allocs - sigs)]
    out += [f"item {i} has a verifying acceptance but no allocation" for _, i in sorted(sigs - allocs)]
    return out


SUITES = {
    "aba": ["wellformed", "aba-agreement", "aba-validity", "aba-termination"],
    "mutex": ["wellformed", "mutex-safety", "mutex-liveness"],
    "nb": ["wellformed", "aba-agreement", "nb-uniqueness"],
    "anon": ["wellformed", "rate-constancy"],
    "gk": ["wellformed", "gk-agreement"],
    "workflow": [
        "wellformed",
        "workitem-legality",
        "interleave-safety",
        "mutex-safety",
        "mutex-liveness",
        "scope-confidentiality",
        "team-acceptance",
    ],
}
SUITES["all"] = list(REGISTRY)


@dataclass
class InvariantResult:
    name: str
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


@dataclass
class Report:
    results: list

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def failed(self) -> list:
        return [r.name for r in self.results if not r.passed]

    def to_records(self) -> list:
        return [
            {"invariant": r.name, "status": "pass" if r.passed else "fail", "violations": len(r.violations)}
            for r in self.results
        ]


def suite_names(suite) -> list:
    if isinstance(suite, str):
        if suite not in SUITES:
            raise TraceFormatError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}")
        return SUITES[suite]
    names = list(suite)
    missing = [n for n in names if n not in REGISTRY]
    if missing:
        raise TraceFormatError(f"unknown invariants {missing}")
    return names


def check_trace(trace: Trace, suite="all") -> Report:
    """Evaluate a suite; raises TraceFormatError if the trace is not well formed.

    A trace whose sequence numbers or times are out of order cannot be
    checked meaningfully, so that is an error rather than a failed row.
    """
    names = suite_names(suite)
    shape = check_wellformed(trace)
    order = [v for v in shape if "no end record" not in v]
    if order:
        raise TraceFormatError("; ".join(order))
    return Report([InvariantResult(n, REGISTRY[n](trace)) for n in names])
