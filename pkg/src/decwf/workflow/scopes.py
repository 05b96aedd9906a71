"""Which participants share a key for each sensitive data scope."""

from __future__ import annotations

from dataclasses import dataclass

from decwf.errors import ConfigError
from decwf.group_key import create_scope_key
from decwf.workflow.model import ProcessDefinition
from decwf.workflow.validate import scope_roles


@dataclass(frozen=True)
class ScopeSpec:
    scope_id: str
    element: str
    kind: str
    members: tuple


def wf_scope_keys(defn: ProcessDefinition, case_id: str, only_sensitive: bool = True) -> list:
    """One key session per scope: the members of the roles of its tasks."""
    specs = []
    for el in defn.data_elements.values():
        if only_sensitive and not el.sensitive:
            continue
        members = set()
        for tid, role in sorted(scope_roles(defn, el).items()):
            ms = defn.members_of(role)
            if not ms:
                raise ConfigError(f"scope of {el.name} includes task {tid} whose role {role!r} has no members")
            members.update(ms)
        if not members:
            raise ConfigError(f"scope of {el.name} has no participants")
        specs.append(ScopeSpec(f"{case_id}/{el.name}", el.name, el.scope, tuple(sorted(members))))
    return specs


def provision(specs, ltks: dict, directory: dict, seed=0, params=None) -> dict:
    """Run the key sessions; returns element -> ScopeHandle."""
    return {s.element: create_scope_key(s.scope_id, s.members, ltks, directory, seed, params) for s in specs}
