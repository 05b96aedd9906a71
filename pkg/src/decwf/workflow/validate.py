"""Structural and cross-aspect checks of process definitions."""

from __future__ import annotations

from dataclasses import dataclass, field

from decwf.workflow.model import ROUTING, SCOPES, TRANSFERS, ProcessDefinition


@dataclass(frozen=True)
class Issue:
    kind: str
    message: str
    task: str | None = None
    element: str | None = None
    role: str | None = None

    def to_doc(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


@dataclass
class ValidationReport:
    issues: list = field(default_factory=list)
    bindings: list = field(default_factory=list)  # (role, element, task)

    @property
    def valid(self) -> bool:
        return not self.issues

    def add(self, kind, message, **where) -> None:
        self.issues.append(Issue(kind, message, **where))

    def __str__(self):
        if self.valid:
            return f"valid ({len(self.bindings)} role/element/task bindings)"
        return "\n".join(f"{i.kind}: {i.message}" for i in self.issues)


def scope_tasks(defn: ProcessDefinition, element) -> set:
    """Tasks whose performers belong to ``element``'s scope."""
    if element.scope == "case":
        return set(defn.tasks)
    if element.scope in ("task", "scope-set"):
        return set(element.tasks)
    if element.scope == "multi-instance":
        listed = set(element.tasks)
        if listed:
            return listed
        return {t.id for t in defn.tasks.values() if t.multi_instance is not None}
    if element.scope == "block":
        sub = defn.subprocesses.get(element.block)
        blocks = {t.id for t in defn.tasks.values() if t.block == element.block}
        return blocks | (set(sub.tasks) if sub else set())
    return set()


def scope_roles(defn: ProcessDefinition, element) -> dict:
    """Task -> role for every task in scope, looking into sub-processes."""
    out = {}
    for tid in scope_tasks(defn, element):
        if tid in defn.tasks:
            out[tid] = defn.tasks[tid].role
            continue
        for sub in defn.subprocesses.values():
            if tid in sub.tasks:
                out[tid] = sub.tasks[tid].role
    return out


def _reachable(defn: ProcessDefinition, start: str) -> set:
    seen, stack = set(), [start]
    while stack:
        t = stack.pop()
        if t in seen:
            continue
        seen.add(t)
        stack.extend(defn.successors(t))
    return seen


def wf_validate(defn: ProcessDefinition) -> ValidationReport:
    rep = ValidationReport()
    tasks = defn.tasks
    if not tasks:
        rep.add("structure", "definition has no tasks")
        return rep
    for a, b in defn.edges:
        for t in (a, b):
            if t not in tasks:
                rep.add("structure", f"edge {a}->{b} references unknown task {t}", task=t)
    starts, ends = defn.start_tasks(), defn.end_tasks()
    if len(starts) != 1:
        rep.add("structure", f"expected one start task, found {starts}")
    if len(ends) != 1:
        rep.add("structure", f"expected one end task, found {ends}")
    if len(starts) == 1:
        unreachable = set(tasks) - _reachable(defn, starts[0])
        for t in sorted(unreachable):
            rep.add("structure", f"task {t} is not reachable from {starts[0]}", task=t)
    for t in tasks.values():
        if t.split not in ROUTING or t.join not in ROUTING:
            rep.add("structure", f"task {t.id} has unsupported routing {t.split}/{t.join}", task=t.id)
        if len(defn.successors(t.id)) > 1 and t.split == "none":
            rep.add("structure", f"task {t.id} has several successors but no split type", task=t.id)
        if len(defn.predecessors(t.id)) > 1 and t.join == "none":
            rep.add("structure", f"task {t.id} has several predecessors but no join type", task=t.id)
        if t.role not in defn.roles:
            rep.add("role", f"task {t.id} uses undefined role {t.role!r}", task=t.id, role=t.role)
        elif not defn.roles[t.role].members:
            rep.add("role", f"role {t.role} of task {t.id} has no members", task=t.id, role=t.role)
        if t.block is not None and t.block not in defn.subprocesses:
            rep.add("structure", f"task {t.id} references unknown sub-process {t.block}", task=t.id)
        if t.team_policy is not None:
            k, n = t.team_policy
            size = len(defn.members_of(t.role))
            if not 1 <= k <= n or n != size:
                rep.add("role", f"team policy {k}-of-{n} does not fit role {t.role} of size {size}", task=t.id, role=t.role)
        for el in t.reads + t.writes:
            if el not in defn.data_elements:
                rep.add("data", f"task {t.id} uses undefined element {el}", task=t.id, element=el)
    for name, members in defn.mutex_sets.items():
        if not members:
            rep.add("structure", f"mutex set {name} is empty")
        for t in members:
            if t not in tasks:
                rep.add("structure", f"mutex set {name} references unknown task {t}", task=t)
    for el in defn.data_elements.values():
        if el.scope not in SCOPES:
            rep.add("data", f"element {el.name} has unknown scope {el.scope}", element=el.name)
            continue
        if el.transfer not in TRANSFERS:
            rep.add("data", f"element {el.name} has unknown transfer mode {el.transfer}", element=el.name)
        if el.scope in ("task", "scope-set") and not el.tasks:
            rep.add("data", f"element {el.name} needs a task list for scope {el.scope}", element=el.name)
        if el.scope == "task" and len(el.tasks) != 1:
            rep.add("data", f"task-scoped element {el.name} must name exactly one task", element=el.name)
        if el.scope == "block" and el.block not in defn.subprocesses:
            rep.add("data", f"element {el.name} references unknown sub-process {el.block}", element=el.name)
        known = set(tasks) | {t for s in defn.subprocesses.values() for t in s.tasks}
        for t in el.tasks:
            if t not in known:
                rep.add("data", f"element {el.name} scope names unknown task {t}", element=el.name, task=t)
    # cross-aspect: who reads sensitive data must hold its scope key
    for t in tasks.values():
        for name in t.reads + t.writes:
            el = defn.data_elements.get(name)
            if el is None or not el.sensitive:
                continue
            role = defn.roles.get(t.role)
            if role is None:
                continue
            if t.id not in scope_tasks(defn, el):
                rep.add("scope", f"task {t.id} uses {name} outside its scope", task=t.id, element=name, role=t.role)
            elif name not in role.provisioned_keys:
                rep.add(
                    "scope", f"role {t.role} performs {t.id} reading sensitive {name} without its scope key",
                    task=t.id, element=name, role=t.role,
                )
            else:
                rep.bindings.append((t.role, name, t.id))
    rep.bindings.sort()
    return rep
