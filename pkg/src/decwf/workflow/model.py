"""Process definitions, data elements, roles and work items.

Definitions are plain mapping trees (loaded from YAML or JSON) with this
shape::

    process: wcp17
    tasks:
      - {id: A, role: clerk, writes: [x]}
      - {id: B, role: clerk, split: none, join: none}
      - {id: M, role: crew, multi_instance: {min: 3, max: null, dynamic: true}}
      - {id: T, role: board, team_policy: [2, 3]}
    edges: [[A, B], ...]
    roles:
      - {id: clerk, members: [r1, r2], keys: [x]}
    data:
      - {name: x, scope: scope-set, tasks: [A, C], transfer: copy, sensitive: true}
    mutex_sets: {m: [B, C]}
    subprocesses: {sub1: <definition>}

``split``/``join`` take ``none``, ``AND`` or ``XOR``. A role's ``keys`` lists
the elements whose scope keys its members are provisioned with.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from decwf.errors import ConfigError, IllegalTransition

ROUTING = ("none", "AND", "XOR")
SCOPES = ("task", "block", "scope-set", "multi-instance", "case")
TRANSFERS = ("copy", "move", "ref", "ref-locked")
STATES = ("offered", "allocated", "withdrawn", "started", "completed", "failed")
TERMINAL = frozenset({"withdrawn", "completed", "failed"})

# "-" is the state before the offer
LEGAL_TRANSITIONS = frozenset(
    {
        ("-", "offered"),
        ("offered", "allocated"),
        ("offered", "withdrawn"),
        ("allocated", "withdrawn"),
        ("allocated", "started"),
        ("started", "completed"),
        ("started", "failed"),
    }
)


@dataclass(frozen=True)
class MultiInstance:
    min: int = 1
    max: int | None = None  # None is unbounded
    dynamic: bool = False

    def __post_init__(self):
        if not isinstance(self.min, int) or self.min < 1:
            raise ConfigError("multi_instance.min must be at least 1")
        if self.max is not None and self.max < self.min:
            raise ConfigError("multi_instance.max must be >= min")

    @property
    def trivial(self) -> bool:
        return self.min == 1 and self.max == 1 and not self.dynamic


@dataclass(frozen=True)
class TaskNode:
    id: str
    role: str
    split: str = "none"
    join: str = "none"
    multi_instance: MultiInstance | None = None
    block: str | None = None
    team_policy: tuple | None = None  # (k, l)
    reads: tuple = ()
    writes: tuple = ()

    @classmethod
    def from_doc(cls, doc) -> "TaskNode":
        if not isinstance(doc, dict) or "id" not in doc:
            raise ConfigError(f"task entry needs an id: {doc!r}")
        mi = doc.get("multi_instance")
        if mi is not None:
            mi = MultiInstance(int(mi.get("min", 1)), None if mi.get("max") is None else int(mi["max"]), bool(mi.get("dynamic", False)))
        tp = doc.get("team_policy")
        if tp is not None:
            if isinstance(tp, dict):
                tp = (tp["k"], tp["l"])
            tp = tuple(int(x) for x in tp)
        return cls(
            id=str(doc["id"]),
            role=str(doc.get("role", "")),
            split=str(doc.get("split", "none")),
            join=str(doc.get("join", "none")),
            multi_instance=mi,
            block=doc.get("block"),
            team_policy=tp,
            reads=tuple(doc.get("reads", ()) or ()),
            writes=tuple(doc.get("writes", ()) or ()),
        )

    def to_doc(self) -> dict:
        doc = {"id": self.id, "role": self.role}
        if self.split != "none":
            doc["split"] = self.split
        if self.join != "none":
            doc["join"] = self.join
        if self.multi_instance is not None:
            mi = self.multi_instance
            doc["multi_instance"] = {"min": mi.min, "max": mi.max, "dynamic": mi.dynamic}
        if self.block is not None:
            doc["block"] = self.block
        if self.team_policy is not None:
            doc["team_policy"] = list(self.team_policy)
        if self.reads:
            doc["reads"] = list(self.reads)
        if self.writes:
            doc["writes"] = list(self.writes)
        return doc


@dataclass(frozen=True)
class DataElement:
    name: str
    scope: str = "case"
    tasks: tuple = ()  # for scope-set and task scopes
    block: str | None = None  # sub-process for block scope
    transfer: str = "copy"
    sensitive: bool = False

    @classmethod
    def from_doc(cls, doc) -> "DataElement":
        tasks = doc.get("tasks", ())
        if isinstance(tasks, str):
            tasks = (tasks,)
        return cls(
            name=str(doc["name"]),
            scope=str(doc.get("scope", "case")),
            tasks=tuple(tasks or ()),
            block=doc.get("block"),
            transfer=str(doc.get("transfer", "copy")),
            sensitive=bool(doc.get("sensitive", False)),
        )

    def to_doc(self) -> dict:
        doc = {"name": self.name, "scope": self.scope, "transfer": self.transfer, "sensitive": self.sensitive}
        if self.tasks:
            doc["tasks"] = list(self.tasks)
        if self.block is not None:
            doc["block"] = self.block
        return doc


@dataclass(frozen=True)
class RoleBinding:
    id: str
    members: tuple
    provisioned_keys: frozenset = frozenset()

    @classmethod
    def from_doc(cls, doc) -> "RoleBinding":
        return cls(str(doc["id"]), tuple(doc.get("members", ()) or ()), frozenset(doc.get("keys", ()) or ()))

    def to_doc(self) -> dict:
        return {"id": self.id, "members": list(self.members), "keys": sorted(self.provisioned_keys)}


@dataclass
class ProcessDefinition:
    id: str
    tasks: dict  # id -> TaskNode, in document order
    edges: list
    data_elements: dict = field(default_factory=dict)
    roles: dict = field(default_factory=dict)
    mutex_sets: dict = field(default_factory=dict)
    subprocesses: dict = field(default_factory=dict)

    @classmethod
    def from_doc(cls, doc) -> "ProcessDefinition":
        if not isinstance(doc, dict):
            raise ConfigError("process definition must be a mapping")
        tasks = {}
        for t in doc.get("tasks", []) or []:
            node = TaskNode.from_doc(t)
            if node.id in tasks:
                raise ConfigError(f"duplicate task id {node.id}")
            tasks[node.id] = node
        edges = []
        for e in doc.get("edges", []) or []:
            if not isinstance(e, (list, tuple)) or len(e) != 2:
                raise ConfigError(f"edge must be a pair: {e!r}")
            edges.append((str(e[0]), str(e[1])))
        data = {}
        for d in doc.get("data", []) or []:
            el = DataElement.from_doc(d)
            data[el.name] = el
        roles = {}
        for r in doc.get("roles", []) or []:
            rb = RoleBinding.from_doc(r)
            roles[rb.id] = rb
        msets = {str(k): tuple(v) for k, v in (doc.get("mutex_sets", {}) or {}).items()}
        subs = {str(k): cls.from_doc(v) for k, v in (doc.get("subprocesses", {}) or {}).items()}
        return cls(str(doc.get("process", "process")), tasks, edges, data, roles, msets, subs)

    def to_doc(self) -> dict:
        doc = {
            "process": self.id,
            "tasks": [t.to_doc() for t in self.tasks.values()],
            "edges": [list(e) for e in self.edges],
        }
        if self.roles:
            doc["roles"] = [r.to_doc() for r in self.roles.values()]
        if self.data_elements:
            doc["data"] = [d.to_doc() for d in self.data_elements.values()]
        if self.mutex_sets:
            doc["mutex_sets"] = {k: list(v) for k, v in self.mutex_sets.items()}
        if self.subprocesses:
            doc["subprocesses"] = {k: v.to_doc() for k, v in self.subprocesses.items()}
        return doc

    # graph helpers
    def successors(self, task: str) -> list:
        return [b for a, b in self.edges if a == task]

    def predecessors(self, task: str) -> list:
        return [a for a, b in self.edges if b == task]

    def start_tasks(self) -> list:
        return [t for t in self.tasks if not self.predecessors(t)]

    def end_tasks(self) -> list:
        return [t for t in self.tasks if not self.successors(t)]

    @property
    def start(self) -> str:
        s = self.start_tasks()
        if len(s) != 1:
            raise ConfigError(f"process {self.id} needs exactly one start task, has {s}")
        return s[0]

    def mutex_set_of(self, task: str) -> str | None:
        for name, members in sorted(self.mutex_sets.items()):
            if task in members:
                return name
        return None

    def members_of(self, role: str) -> tuple:
        rb = self.roles.get(role)
        return rb.members if rb else ()

    def participants(self) -> list:
        out = set()
        for t in self.tasks.values():
            out.update(self.members_of(t.role))
        return sorted(out)


@dataclass
class WorkItem:
    item_id: str
    case_id: str
    task: str
    instance: int = 0
    state: str = "-"
    holder: str | None = None
    history: list = field(default_factory=list)

    def transition(self, to: str, holder: str | None = None) -> tuple:
        """Move to ``to``; returns ``(from, to)`` or raises IllegalTransition."""
        if (self.state, to) not in LEGAL_TRANSITIONS:
            raise IllegalTransition(f"{self.item_id}: {self.state} -> {to} is not allowed")
        frm = self.state
        self.state = to
        if holder is not None:
            self.holder = holder
        self.history.append((frm, to))
        return frm, to

    @property
    def terminal(self) -> bool:
        return self.state in TERMINAL
