"""Workflow enactment on top of the group protocols."""

from decwf.workflow.data import DataRegistry, DataStore, Reference, open_element, seal_element, wf_transfer
from decwf.workflow.engine import CaseResult, CaseSetup, WorkflowNode, prepare_case, run_case
from decwf.workflow.model import (
    LEGAL_TRANSITIONS,
    DataElement,
    MultiInstance,
    ProcessDefinition,
    RoleBinding,
    TaskNode,
    WorkItem,
)
from decwf.workflow.oracle import PetriNet, oracle_run, project, translate
from decwf.workflow.scopes import ScopeSpec, provision, wf_scope_keys
from decwf.workflow.team import TeamAllocation, TeamKeys, TeamOffer, team_setup, wf_team_accept
from decwf.workflow.validate import ValidationReport, scope_tasks, wf_validate

__all__ = [
    "DataRegistry",
    "DataStore",
    "Reference",
    "open_element",
    "seal_element",
    "wf_transfer",
    "CaseResult",
    "CaseSetup",
    "WorkflowNode",
    "prepare_case",
    "run_case",
    "LEGAL_TRANSITIONS",
    "DataElement",
    "MultiInstance",
    "ProcessDefinition",
    "RoleBinding",
    "TaskNode",
    "WorkItem",
    "PetriNet",
    "oracle_run",
    "project",
    "translate",
    "ScopeSpec",
    "provision",
    "wf_scope_keys",
    "TeamAllocation",
    "TeamKeys",
    "TeamOffer",
    "team_setup",
    "wf_team_accept",
    "ValidationReport",
    "scope_tasks",
    "wf_validate",
]
