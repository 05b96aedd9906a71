"""Discrete-event simulator, trace format and trace checker."""

from decwf.simnet.core import (
    SCRIPTS,
    AdversarySpec,
    Context,
    Envelope,
    Node,
    RunResult,
    Simulator,
    TimeoutReport,
    corrupt_payload,
    register_equivocator,
    register_script_hook,
)
from decwf.simnet.invariants import REGISTRY, SUITES, Report, check_trace
from decwf.simnet.trace import Trace, TraceRecord

__all__ = [
    "SCRIPTS",
    "AdversarySpec",
    "Context",
    "Envelope",
    "Node",
    "RunResult",
    "Simulator",
    "TimeoutReport",
    "corrupt_payload",
    "register_equivocator",
    "register_script_hook",
    "REGISTRY",
    "SUITES",
    "Report",
    "check_trace",
    "Trace",
    "TraceRecord",
]
