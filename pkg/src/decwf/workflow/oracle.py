"""Centralised Petri-net reference semantics for process definitions.

``translate`` turns a definition into a net whose visible transitions are
labelled ``("start", task)`` and ``("complete", task)``; everything else is
silent. A multiple-instance task gets the pre/post region of the classic
CPN model:

* ``p1:T`` holds one token per created but unfinished instance,
* ``p2:T`` collects finished instances,
* ``p5:T`` is present while more instances may still be added.

The synchronising transition needs ``p1`` and ``p5`` empty (inhibitor arcs)
and clears ``p2`` (reset arc). A mutex set gets a capacity-one place ``p3:S``
taken by the start of each member task and returned on completion.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field

from decwf.errors import UntranslatableError
from decwf.workflow.model import ProcessDefinition

DEFAULT_INSTANCE_CAP = 16


@dataclass(frozen=True)
class Transition:
    name: str
    label: tuple | None
    pre: tuple  # ((place, n), ...)
    post: tuple
    inhibit: frozenset = frozenset()
    reset: frozenset = frozenset()


def _arcs(d) -> tuple:
    return tuple(sorted(Counter(d).items())) if not isinstance(d, dict) else tuple(sorted(d.items()))


Marking = tuple  # sorted ((place, count), ...) with count > 0


def marking(d: dict) -> Marking:
    return tuple(sorted((p, n) for p, n in d.items() if n))


@dataclass
class PetriNet:
    places: set = field(default_factory=set)
    transitions: list = field(default_factory=list)
    initial: dict = field(default_factory=dict)
    capacity: dict = field(default_factory=dict)

    def add(self, name, label=None, pre=(), post=(), inhibit=(), reset=()) -> Transition:
        t = Transition(name, label, _arcs(pre), _arcs(post), frozenset(inhibit), frozenset(reset))
        for p, _ in t.pre + t.post:
            self.places.add(p)
        self.places.update(t.inhibit | t.reset)
        self.transitions.append(t)
        return t

    @property
    def m0(self) -> Marking:
        return marking(self.initial)

    def enabled(self, m: Marking) -> list:
        have = dict(m)
        out = []
        for t in self.transitions:
            if any(have.get(p, 0) < n for p, n in t.pre):
                continue
            if any(have.get(p, 0) for p in t.inhibit):
                continue
            if self.capacity:
                after = self._apply(have, t)
                if any(after.get(p, 0) > c for p, c in self.capacity.items()):
                    continue
            out.append(t)
        return out

    @staticmethod
    def _apply(have: dict, t: Transition) -> dict:
        nxt = dict(have)
        for p, n in t.pre:
            nxt[p] -= n
        for p in t.reset:
            nxt[p] = 0
        for p, n in t.post:
            nxt[p] = nxt.get(p, 0) + n
        return nxt

    def fire(self, m: Marking, t: Transition) -> Marking:
        return marking(self._apply(dict(m), t))

    def silent_closure(self, ms, limit: int = 200_000) -> set:
        seen = set(ms)
        stack = list(ms)
        while stack:
            m = stack.pop()
            for t in self.enabled(m):
                if t.label is None:
                    m2 = self.fire(m, t)
                    if m2 not in seen:
                        seen.add(m2)
                        if len(seen) > limit:
                            raise RuntimeError("silent state space too large")
                        stack.append(m2)
        return seen

    def reachable(self, limit: int = 200_000) -> set:
        seen = {self.m0}
        stack = [self.m0]
        while stack:
            m = stack.pop()
            for t in self.enabled(m):
                m2 = self.fire(m, t)
                if m2 not in seen:
                    seen.add(m2)
                    if len(seen) > limit:
                        raise RuntimeError("state space too large")
                    stack.append(m2)
        return seen

    def after(self, labels) -> set:
        """Markings reachable by firing ``labels`` with silent moves between."""
        front = self.silent_closure({self.m0})
        for lab in labels:
            lab = tuple(lab)
            nxt = set()
            for m in front:
                for t in self.enabled(m):
                    if t.label == lab:
                        nxt.add(self.fire(m, t))
            if not nxt:
                return set()
            front = self.silent_closure(nxt)
        return front

    def legal(self, labels, complete: bool = False) -> bool:
        """Is ``labels`` a firing sequence (prefix) of this net?"""
        front = self.after(labels)
        if not front:
            return False
        if not complete:
            return True
        return any(self.final(m) for m in front)

    @staticmethod
    def final(m: Marking) -> bool:
        # mutex places keep their token at the end
        rest = [(p, n) for p, n in m if not p.startswith("p3:")]
        return rest == [("o", 1)]


def _check_translatable(defn: ProcessDefinition) -> None:
    for t in defn.tasks.values():
        if t.split not in ("none", "AND", "XOR") or t.join not in ("none", "AND", "XOR"):
            raise UntranslatableError(f"task {t.id}: routing {t.split}/{t.join} has no net translation")
    # acyclic only
    indeg = Counter(b for _, b in defn.edges)
    ready = [t for t in defn.tasks if indeg[t] == 0]
    seen = 0
    while ready:
        t = ready.pop()
        seen += 1
        for s in defn.successors(t):
            indeg[s] -= 1
            if indeg[s] == 0:
                ready.append(s)
    if seen != len(defn.tasks):
        raise UntranslatableError("cyclic process graphs are not translated")
    if len(defn.start_tasks()) != 1 or len(defn.end_tasks()) != 1:
        raise UntranslatableError("net translation needs one start and one end task")


def translate(defn: ProcessDefinition, instance_cap: int = DEFAULT_INSTANCE_CAP) -> PetriNet:
    _check_translatable(defn)
    net = PetriNet(initial={"i": 1})
    for name in defn.mutex_sets:
        net.initial[f"p3:{name}"] = 1
        net.capacity[f"p3:{name}"] = 1
    end = defn.end_tasks()[0]

    def edge(a, b):
        return f"e:{a}>{b}"

    for tid, t in defn.tasks.items():
        preds = defn.predecessors(tid)
        succs = defn.successors(tid)
        inp = f"in:{tid}"
        busy = f"busy:{tid}"
        # entry region
        if not preds:
            net.add(f"enter:{tid}", pre={"i": 1}, post={inp: 1})
        elif t.join == "AND":
            net.add(f"enter:{tid}", pre={edge(p, tid): 1 for p in preds}, post={inp: 1})
        else:
            for p in preds:
                net.add(f"enter:{tid}<{p}", pre={edge(p, tid): 1}, post={inp: 1})
        # exit targets
        if not succs:
            outs = [{"o": 1}]
        elif t.split == "AND":
            outs = [{edge(tid, s): 1 for s in succs}]
        else:
            outs = [{edge(tid, s): 1} for s in succs]
        mset = defn.mutex_set_of(tid)
        lock = {f"p3:{mset}": 1} if mset else {}
        mi = t.multi_instance
        if mi is None or mi.trivial:
            net.add(f"start:{tid}", ("start", tid), pre={inp: 1, **lock}, post={busy: 1})
            for j, out in enumerate(outs):
                net.add(f"complete:{tid}#{j}", ("complete", tid), pre={busy: 1}, post={**out, **lock})
            continue
        p1, p2, p5 = f"p1:{tid}", f"p2:{tid}", f"p5:{tid}"
        ready, slots, active = f"ready:{tid}", f"slots:{tid}", f"active:{tid}"
        top = mi.max if mi.max is not None else max(instance_cap, mi.min)
        spawn_post = {ready: mi.min, p1: mi.min, p5: 1, active: 1}
        if top > mi.min:
            spawn_post[slots] = top - mi.min
        net.add(f"spawn:{tid}", pre={inp: 1}, post=spawn_post)
        net.add(f"add:{tid}", pre={p5: 1, slots: 1}, post={p5: 1, ready: 1, p1: 1})
        net.add(f"close:{tid}", pre={p5: 1}, post={})
        inhibit_start = () if mi.dynamic else (p5,)
        net.add(f"start:{tid}", ("start", tid), pre={ready: 1, **lock}, post={busy: 1}, inhibit=inhibit_start)
        net.add(f"complete:{tid}", ("complete", tid), pre={busy: 1, p1: 1}, post={p2: 1, **lock})
        for j, out in enumerate(outs):
            net.add(f"sync:{tid}#{j}", pre={active: 1}, post=out, inhibit=(p1, p5, ready), reset=(p2, slots))
    if end not in defn.tasks:
        raise UntranslatableError("no end task")
    return net


def oracle_run(defn: ProcessDefinition, schedule=0, instance_cap: int = DEFAULT_INSTANCE_CAP, max_steps: int = 10_000) -> list:
    """Fire the translated net under ``schedule`` and return visible labels.

    ``schedule`` is a seed, a ``random.Random``, or a list of choice indices
    (taken modulo the number of enabled transitions; random after it runs
    out).
    """
    net = translate(defn, instance_cap)
    if isinstance(schedule, random.Random):
        rng, choices = schedule, []
    elif isinstance(schedule, (list, tuple)):
        rng, choices = random.Random(0), list(schedule)
    else:
        rng, choices = random.Random(schedule), []
    m = net.m0
    out = []
    for _ in range(max_steps):
        en = net.enabled(m)
        if not en:
            break
        i = choices.pop(0) % len(en) if choices else rng.randrange(len(en))
        t = en[i]
        m = net.fire(m, t)
        if t.label is not None:
            out.append(t.label)
    return out


def project(trace, case_id: str | None = None) -> list:
    """Start/complete labels of a distributed run, in orchestrator order."""
    out = []
    for r in trace.select(kind="workitem", detail="transition"):
        if case_id is not None and r.instance != case_id:
            continue
        to = r.get("to")
        if to == "started":
            out.append(("start", r.get("task")))
        elif to == "completed":
            out.append(("complete", r.get("task")))
    return out
