"""Scenario documents and the runner behind ``decwf run``.

A scenario is one YAML (or JSON) mapping::

    scenario: aba-adversarial
    protocol: aba            # aba | nb | gk | anon | mutex | workflow | none
    profile: toy
    nodes: [p1, p2, p3, p4]
    t: 1
    seeds: 0-999             # default sweep; --seed/--seeds override
    dmax: 5
    tick_limit: 5000
    adversary: {corrupted: {p4: silent}}
    matrix: {scripts: [silent, equivocate], corrupt: rotate, honest: true}
    suite: aba
    aba: {keys_seed: 7, instances: [x], inputs: seeded}

The protocol body sits under the key named by ``protocol``. ``matrix``
expands one scenario into variants, one per script; ``corrupt`` is a node,
a list of nodes, or ``rotate`` (seed picks the node).

Each run yields an :class:`Outcome` carrying the trace, the invariant
report and the run-level checks that need more than the trace (oracle
legality, retrievability, delivery).
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from decwf.crypto_core import PROFILES
from decwf.errors import ConfigError, DecwfError, NotFound
from decwf.simnet import SCRIPTS, SUITES, AdversarySpec, Report, Simulator, check_trace

PROTOCOLS = ("none", "aba", "nb", "gk", "anon", "mutex", "workflow")
DEFAULT_SUITE = {"none": "all", "aba": "aba", "nb": "nb", "gk": "gk", "anon": "anon", "mutex": "mutex", "workflow": "workflow"}
_RANGE = re.compile(r"(\d+)-(\d+)")


def parse_seeds(spec) -> list:
    """``7``, ``"0-199"``, ``"1,4,9"`` or a list -> list of ints."""
    if spec is None:
        return [0]
    if isinstance(spec, bool):
        raise ConfigError("seeds must be integers")
    if isinstance(spec, int):
        return [spec]
    if isinstance(spec, (list, tuple)):
        return [int(s) for s in spec]
    out = []
    for part in str(spec).split(","):
        part = part.strip()
        m = _RANGE.fullmatch(part)
        if m:
            lo, hi = int(m.group(1)), int(m.group(2))
            if hi < lo:
                raise ConfigError(f"empty seed range {part}")
            out.extend(range(lo, hi + 1))
        elif part.isdigit():
            out.append(int(part))
        elif part:
            raise ConfigError(f"bad seed spec {spec!r}")
    if not out:
        raise ConfigError(f"bad seed spec {spec!r}")
    return out


@dataclass
class Variant:
    name: str
    script: str | None = None
    corrupt: object = None  # node, list, "rotate" or None

    def adversary(self, scenario: "Scenario", seed: int) -> AdversarySpec:
        if self.script is None:
            return scenario.adversary
        targets = self.corrupt
        if targets == "rotate":
            pool = scenario.corruptible()
            targets = [pool[seed % len(pool)]]
        elif isinstance(targets, str):
            targets = [targets]
        return AdversarySpec({n: self.script for n in targets}, scenario.t)


@dataclass
class Outcome:
    scenario: str
    variant: str
    seed: int
    trace: object
    report: Report
    checks: dict = field(default_factory=dict)  # name -> list of violations
    timed_out: bool = False
    status: str = "-"

    @property
    def passed(self) -> bool:
        return self.report.passed and not self.timed_out and not any(self.checks.values())

    def rows(self) -> list:
        """(name, violations) for every invariant and check of this run."""
        out = [(r.name, list(r.violations)) for r in self.report.results]
        out += [(k, list(v)) for k, v in sorted(self.checks.items())]
        out.append(("tick-limit", ["tick limit reached"] if self.timed_out else []))
        return out


@dataclass
class Scenario:
    name: str
    protocol: str
    profile: str = "toy"
    nodes: list = field(default_factory=list)
    t: int | None = None
    seeds: list = field(default_factory=lambda: [0])
    dmax: int = 4
    tick_limit: int = 5_000
    adversary: AdversarySpec = field(default_factory=AdversarySpec)
    variants: list = field(default_factory=list)
    suite: str = "all"
    body: dict = field(default_factory=dict)
    base_dir: Path = Path(".")
    _defn: object = None

    @property
    def params(self):
        return PROFILES[self.profile]

    def roster(self) -> list:
        return list(self.nodes)

    def corruptible(self) -> list:
        if self.protocol == "anon":
            return [f"n{i}" for i in range(int(self.body.get("size", 4)))]
        return list(self.nodes)

    @property
    def definition(self):
        return self._defn

    def run(self, seed: int, variant: Variant | None = None) -> Outcome:
        variant = variant or self.variants[0]
        adv = variant.adversary(self, seed)
        runner = _RUNNERS[self.protocol]
        trace, timed_out, checks, status = runner(self, seed, adv)
        report = check_trace(trace, self.suite)
        return Outcome(self.name, variant.name, seed, trace, report, checks, timed_out, status)


def _need(doc, key, kind, default=None):
    v = doc.get(key, default)
    if v is not None and not isinstance(v, kind):
        raise ConfigError(f"{key} must be {getattr(kind, '__name__', kind)}")
    return v


def load_scenario(source, base_dir=None) -> Scenario:
    """Load and validate a scenario from a path, a YAML string or a mapping."""
    if isinstance(source, dict):
        doc = source
        base = Path(base_dir or ".")
    else:
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read scenario {source}: {e}") from None
        base = Path(base_dir) if base_dir else path.parent
        try:
            doc = yaml.safe_load(text) if path.suffix != ".json" else json.loads(text)
        except (yaml.YAMLError, json.JSONDecodeError) as e:
            raise ConfigError(f"scenario {source} does not parse: {e}") from None
    if not isinstance(doc, dict):
        raise ConfigError("scenario must be a mapping")
    protocol = doc.get("protocol", "none")
    if protocol not in PROTOCOLS:
        raise ConfigError(f"unknown protocol {protocol!r}; choose from {PROTOCOLS}")
    profile = doc.get("profile", "toy")
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    nodes = [str(n) for n in (_need(doc, "nodes", list, []) or [])]
    if len(set(nodes)) != len(nodes):
        raise ConfigError("node names must be distinct")
    t = _need(doc, "t", int)
    dmax = _need(doc, "dmax", int, 4)
    tick_limit = _need(doc, "tick_limit", int, 5_000)
    if dmax < 1 or tick_limit < 1:
        raise ConfigError("dmax and tick_limit must be positive")
    body = doc.get(protocol, {}) or {}
    if not isinstance(body, dict):
        raise ConfigError(f"{protocol} section must be a mapping")
    suite = doc.get("suite", DEFAULT_SUITE[protocol])
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}")
    sc = Scenario(
        name=str(doc.get("scenario", "scenario")),
        protocol=protocol,
        profile=profile,
        nodes=nodes,
        t=t,
        seeds=parse_seeds(doc.get("seeds", doc.get("seed", 0))),
        dmax=dmax,
        tick_limit=tick_limit,
        suite=suite,
        body=body,
        base_dir=base,
    )
    _VALIDATORS[protocol](sc)
    roster = sc.roster()
    sc.adversary = AdversarySpec.from_doc(doc.get("adversary"))
    if sc.adversary.t is None:
        sc.adversary.t = t
    _check_adversary(sc, sc.adversary, roster)
    sc.variants = _variants(sc, doc.get("matrix"), roster)
    return sc


def _check_adversary(sc: Scenario, adv: AdversarySpec, roster) -> None:
    if sc.protocol == "workflow":
        # post:<task> / pre:<task> name a role resolved per seed
        named = {n: s for n, s in adv.corrupted.items() if ":" not in n}
        AdversarySpec(named, adv.t, adv.drops).validate({n: None for n in roster})
        for n in adv.corrupted:
            if ":" in n:
                which, task = n.split(":", 1)
                if which not in ("pre", "post") or task not in sc.definition.tasks:
                    raise ConfigError(f"bad symbolic node {n!r}; use pre:<task> or post:<task>")
        bad = {c: s for c, s in adv.corrupted.items() if s not in SCRIPTS}
        if bad:
            raise ConfigError(f"unknown adversary scripts {bad}; choose from {SCRIPTS}")
        return
    adv.validate({n: None for n in roster})


def _variants(sc: Scenario, matrix, roster) -> list:
    if matrix is None:
        return [Variant("base")]
    if not isinstance(matrix, dict):
        raise ConfigError("matrix must be a mapping")
    scripts = matrix.get("scripts", [])
    if not isinstance(scripts, list) or not scripts:
        raise ConfigError("matrix.scripts must be a non-empty list")
    for s in scripts:
        if s not in SCRIPTS:
            raise ConfigError(f"unknown adversary script {s!r}; choose from {SCRIPTS}")
    corrupt = matrix.get("corrupt", "rotate")
    targets = [] if corrupt == "rotate" else ([corrupt] if isinstance(corrupt, str) else list(corrupt))
    for n in targets:
        if n not in roster:
            raise ConfigError(f"matrix corrupts unknown node {n}")
    if sc.t is not None and max(1, len(targets)) > sc.t:
        raise ConfigError(f"matrix corrupts {max(1, len(targets))} nodes, over the budget t={sc.t}")
    out = [Variant("honest")] if matrix.get("honest", False) else []
    out += [Variant(s, s, corrupt) for s in scripts]
    return out


# protocol validators fill derived fields and reject bad bodies


def _v_none(sc):
    pass


def _bits(inputs, n, where):
    if isinstance(inputs, str):
        if inputs not in ("random", "unanimous", "seeded"):
            raise ConfigError(f"{where}: inputs must be a bit list or random/unanimous/seeded")
        return
    if not isinstance(inputs, list) or len(inputs) != n or any(b not in (0, 1) for b in inputs):
        raise ConfigError(f"{where}: need one input bit per node")


def _v_aba(sc):
    if len(sc.nodes) < 4 or sc.t is None or not 0 <= sc.t or 3 * sc.t >= len(sc.nodes):
        raise ConfigError("aba needs t given and n > 3t with n >= 4")
    inst = sc.body.get("instances", ["x"])
    if not isinstance(inst, list) or not inst:
        raise ConfigError("aba.instances must be a non-empty list")
    _bits(sc.body.get("inputs", "seeded"), len(sc.nodes), "aba")


def _v_nb(sc):
    if len(sc.nodes) < 4 or sc.t is None or 3 * sc.t >= len(sc.nodes):
        raise ConfigError("nb needs t given and n > 3t with n >= 4")
    pubs = sc.body.get("publishes", [])
    if not isinstance(pubs, list) or not pubs:
        raise ConfigError("nb.publishes must be a non-empty list")
    for p in pubs:
        if not isinstance(p, dict) or p.get("node") not in sc.nodes or "key" not in p or "value" not in p:
            raise ConfigError(f"bad publish entry {p!r}")


def _v_gk(sc):
    if len(sc.nodes) < 1:
        raise ConfigError("gk needs at least one node")


def _v_anon(sc):
    size = sc.body.get("size", 4)
    if not isinstance(size, int) or size < 2:
        raise ConfigError("anon.size must be an integer >= 2")
    rate = sc.body.get("out_rate", 2)
    if not isinstance(rate, int) or rate < 1:
        raise ConfigError("anon.out_rate must be a positive integer")
    sc.nodes = [f"n{i}" for i in range(size)]


def _v_mutex(sc):
    groups = sc.body.get("groups", 3)
    if not sc.nodes:
        sc.nodes = [f"p{i}" for i in range(int(sc.body.get("requesters", 50)))]
    if not isinstance(groups, int) or not 1 <= groups <= len(sc.nodes):
        raise ConfigError("mutex.groups must be between 1 and the number of nodes")
    hold = sc.body.get("hold", [1, 3])
    if not (isinstance(hold, list) and len(hold) == 2 and 1 <= hold[0] <= hold[1]):
        raise ConfigError("mutex.hold must be [lo, hi] with 1 <= lo <= hi")
    reqs = sc.body.get("requests", 1)
    if not isinstance(reqs, int) or reqs < 1:
        raise ConfigError("mutex.requests must be a positive integer")


def _v_workflow(sc):
    from decwf.workflow.model import ProcessDefinition
    from decwf.workflow.validate import wf_validate

    body = sc.body
    if "definition" in body:
        doc = body["definition"]
        if isinstance(doc, str):
            path = sc.base_dir / doc
            try:
                doc = yaml.safe_load(path.read_text(encoding="utf-8"))
            except (OSError, yaml.YAMLError) as e:
                raise ConfigError(f"cannot load definition {path}: {e}") from None
    else:
        raise ConfigError("workflow.definition is required")
    defn = ProcessDefinition.from_doc(doc)
    rep = wf_validate(defn)
    if not rep.valid:
        raise ConfigError(f"definition {defn.id} does not validate:\n{rep}")
    sc._defn = defn
    orch = body.get("orchestrator", "o")
    if not isinstance(orch, str):
        raise ConfigError("workflow.orchestrator must be a node name")
    dyn = body.get("dynamic") or {}
    if not isinstance(dyn, dict):
        raise ConfigError("workflow.dynamic must map task -> [after, add]")
    for task, rule in dyn.items():
        mi = defn.tasks.get(task).multi_instance if task in defn.tasks else None
        if mi is None or not mi.dynamic:
            raise ConfigError(f"dynamic rule for {task}, which is not a dynamic multi-instance task")
        if not (isinstance(rule, list) and len(rule) == 2 and all(isinstance(x, int) and x >= 0 for x in rule)):
            raise ConfigError(f"dynamic rule for {task} must be [after, add]")
    expect = body.get("expect", "complete")
    if expect not in ("complete", "aborted"):
        raise ConfigError("workflow.expect must be complete or aborted")
    members = {m for r in defn.roles.values() for m in r.members}
    sc.nodes = sorted(members | {orch})


_VALIDATORS = {
    "none": _v_none, "aba": _v_aba, "nb": _v_nb, "gk": _v_gk, "anon": _v_anon, "mutex": _v_mutex,
    "workflow": _v_workflow,
}


# runners: (scenario, seed, adversary) -> (trace, timed_out, checks, status)


def _r_none(sc, seed, adv):
    res = Simulator({}, seed=seed, dmax=sc.dmax, tick_limit=sc.tick_limit).run()
    return res.trace, res.timed_out, {}, "-"


def _inputs(spec, n, seed, inst):
    rng = random.Random(f"{seed}|{inst}|inputs")
    if isinstance(spec, list):
        return list(spec)
    if spec == "random" or (spec == "seeded" and seed % 2):
        return [rng.randrange(2) for _ in range(n)]
    bit = rng.randrange(2)
    return [bit] * n


def _r_aba(sc, seed, adv):
    from decwf.agreement import AbaNode, aba_setup

    keys = aba_setup(sc.nodes, sc.t, sc.params, seed=sc.body.get("keys_seed", 0))
    spec = sc.body.get("inputs", "seeded")
    per_inst = {inst: _inputs(spec, len(sc.nodes), seed, inst) for inst in sc.body.get("instances", ["x"])}
    nodes = {m: AbaNode(keys[m], {inst: bits[i] for inst, bits in per_inst.items()}) for i, m in enumerate(sc.nodes)}
    res = Simulator(nodes, seed=seed, dmax=sc.dmax, adversary=adv, tick_limit=sc.tick_limit, t=sc.t).run()
    honest = [m for m in sc.nodes if m not in adv.corrupted]
    decided = {tuple(sorted(nodes[m].decisions().items())) for m in honest}
    return res.trace, res.timed_out, {}, "decided" if len(decided) == 1 else "split"


def _r_nb(sc, seed, adv):
    from decwf.agreement import NoticeBoard, aba_setup

    keys = aba_setup(sc.nodes, sc.t, sc.params, seed=sc.body.get("keys_seed", 0))
    board = NoticeBoard(keys, seed=seed, dmax=sc.dmax, adversary=adv, tick_limit=sc.tick_limit)
    rng = random.Random(f"{seed}|publish")
    for p in sc.body["publishes"]:
        delay = p.get("delay", 1)
        if isinstance(delay, list):
            delay = rng.randint(delay[0], delay[1])
        board.nodes[p["node"]].publish_later(str(p["key"]), str(p["value"]).encode(), int(p.get("epoch", 0)), int(delay))
    res = board.run()
    honest = [m for m in sc.nodes if m not in adv.corrupted]
    bad = []
    attested = 0
    for key, epoch in sorted({(str(p["key"]), int(p.get("epoch", 0))) for p in sc.body["publishes"]}):
        got = set()
        for m in honest:
            try:
                got.add(board.retrieve(key, m, epoch)[0])
            except NotFound:
                got.add(None)
            except DecwfError as e:
                got.add(f"error:{type(e).__name__}")
        if len(got) != 1:
            bad.append(f"{key}@{epoch}: members disagree on the retrievable value")
        attested += None not in got
    return res.trace, res.timed_out, {"nb-retrievable": bad}, f"attested={attested}"


def _r_gk(sc, seed, adv):
    from decwf.group_key import GroupKeyNode, gk_keygen

    sid = str(sc.body.get("session", "s1"))
    ltks, directory = gk_keygen(sc.nodes, sc.params, seed=sc.body.get("keys_seed", 0))
    wait = int(sc.body.get("wait", 12))
    nodes = {m: GroupKeyNode(sid, sc.nodes, ltks[m], directory, seed=seed, wait=wait) for m in sc.nodes}
    res = Simulator(nodes, seed=seed, dmax=sc.dmax, adversary=adv, tick_limit=sc.tick_limit).run()
    honest = [nodes[m].session for m in sc.nodes if m not in adv.corrupted]
    states = {s.status for s in honest}
    excluded = {s.excluded for s in honest}
    bad = []
    if len(states) != 1:
        bad.append(f"honest members ended in different states {sorted(states)}")
    if states == {"established"}:
        fps = {s.master.fingerprint() for s in honest}
        if len(fps) != 1:
            bad.append("honest members derived different keys")
        if not adv.corrupted and excluded != {frozenset()}:
            bad.append("an honest session excluded a member")
    elif not adv.corrupted:
        bad.append("an all-honest session did not establish")
    status = states.pop() if len(states) == 1 else "split"
    if status == "established" and excluded and next(iter(excluded)):
        status = "excluded:" + ",".join(sorted(next(iter(excluded))))
    return res.trace, res.timed_out, {"gk-consensus": bad}, status


def _r_anon(sc, seed, adv):
    from decwf.anon_channel import simulate_anonymity

    b = sc.body
    sender, guess, res, nodes = simulate_anonymity(
        int(b.get("size", 4)), seed, out_rate=int(b.get("out_rate", 2)), send_at=int(b.get("send_at", 4)),
        window=int(b.get("window", 3)), dmax=sc.dmax,
    )
    delivered = sum(len(n.received) for n in nodes.values())
    bad = [] if delivered == 1 else [f"message delivered {delivered} times"]
    return res.trace, res.timed_out, {"anon-delivery": bad}, "identified" if guess == sender else "hidden"


def _r_mutex(sc, seed, adv):
    from decwf.mutex import MutexLayout, MutexNode

    b = sc.body
    lay = MutexLayout.even("m", sc.nodes, int(b.get("groups", 3)), batch=int(b.get("batch", 4)))
    rng = random.Random(f"{seed}|plan")
    window = int(b.get("window", 30))
    lo, hi = b.get("hold", [1, 3])
    reqs = int(b.get("requests", 1))
    nodes = {}
    for n in sc.nodes:
        plan, at = [], 0
        for _ in range(reqs):
            at += rng.randint(1, window)
            plan.append((at, "m", rng.randint(lo, hi)))
            at += hi + 1
        nodes[n] = MutexNode(n, [lay], plan)
    res = Simulator(nodes, seed=seed, dmax=sc.dmax, adversary=adv, tick_limit=sc.tick_limit).run()
    entered = sum(len(n.entered) for n in nodes.values())
    bad = [] if entered == reqs * len(sc.nodes) else [f"{entered} of {reqs * len(sc.nodes)} requests entered"]
    return res.trace, res.timed_out, {"mutex-grants": bad}, f"entered={entered}"


def _r_workflow(sc, seed, adv):
    from decwf.workflow.engine import prepare_case, run_case
    from decwf.workflow.oracle import project, translate

    b = sc.body
    orch = b.get("orchestrator", "o")
    dyn = {k: tuple(v) for k, v in (b.get("dynamic") or {}).items()}
    if any(":" in n for n in adv.corrupted):
        plan = prepare_case(sc.definition, orch, seed=seed, params=sc.params, dynamic=dyn).mi_plan
        named = {}
        for n, s in adv.corrupted.items():
            if ":" in n:
                which, task = n.split(":", 1)
                if task not in plan:
                    raise ConfigError(f"{n}: {task} has no pre/post processors")
                n = plan[task][0 if which == "pre" else 1]
            named[n] = s
        adv = AdversarySpec(named, adv.t, adv.drops, adv.replay_prob)
    res = run_case(
        sc.definition, orch, seed=seed, adversary=adv, dmax=sc.dmax, tick_limit=sc.tick_limit, params=sc.params,
        dynamic=dyn,
    )
    labels = project(res.trace)
    net = translate(sc.definition)
    checks = {}
    if not net.legal(labels, complete=res.status == "complete"):
        checks["oracle-legality"] = [f"projected run {labels} is not a firing sequence of the reference net"]
    else:
        checks["oracle-legality"] = []
    expect = b.get("expect", "complete")
    checks["case-outcome"] = [] if res.status == expect else [f"case ended {res.status}, expected {expect}"]
    return res.trace, res.timed_out, checks, res.status


_RUNNERS = {
    "none": _r_none, "aba": _r_aba, "nb": _r_nb, "gk": _r_gk, "anon": _r_anon, "mutex": _r_mutex,
    "workflow": _r_workflow,
}


def bundled_scenarios() -> dict:
    """name -> path of the scenarios shipped with the package."""
    here = Path(__file__).parent / "scenarios"
    return {p.stem: p for p in sorted(here.glob("*.yaml")) if not p.stem.endswith("-process")}


def resolve(name_or_path) -> Path:
    p = Path(name_or_path)
    if p.exists():
        return p
    found = bundled_scenarios().get(str(name_or_path))
    if found is None:
        raise ConfigError(f"no scenario file or bundled scenario named {name_or_path!r}")
    return found
