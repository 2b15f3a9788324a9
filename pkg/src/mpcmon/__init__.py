"""Distributed privacy-preserving runtime monitoring over secret shares.

A System streams secret-shared observations to k monitor parties that
jointly evaluate a stateful specification under mixed arithmetic/Boolean
sharing, reconstructing only a one-bit violation flag per round.
"""

from .algebra import BIT, DEFAULT_PRIME, Element, Modulus
from .compiler import (ScenarioConfig, build_acs, build_bloodsugar, build_car,
                       build_locks, build_scenario, compile_spec)
from .dealer import Dealer, ResourceLedger
from .errors import MonitorError
from .runtime import (LocalSession, SessionConfig, SessionResult, Verdict,
                      collect_metrics, run_local_session, transcript_probe)
from .sharing import (AdditiveScheme, BooleanScheme, ShamirScheme, ShareVector,
                      SType, TypedShare)
from .vm import Instruction, Opcode, Program, cost_estimate, typecheck

__version__ = "0.1.0"

__all__ = [
    "BIT", "DEFAULT_PRIME", "Element", "Modulus",
    "ScenarioConfig", "build_acs", "build_bloodsugar", "build_car",
    "build_locks", "build_scenario", "compile_spec",
    "Dealer", "ResourceLedger", "MonitorError",
    "LocalSession", "SessionConfig", "SessionResult", "Verdict",
    "collect_metrics", "run_local_session", "transcript_probe",
    "AdditiveScheme", "BooleanScheme", "ShamirScheme", "ShareVector",
    "SType", "TypedShare",
    "Instruction", "Opcode", "Program", "cost_estimate", "typecheck",
]
