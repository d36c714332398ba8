"""Runtime verification of component systems with multi-party interactions.

Schedulers are instrumented with vector clocks; an observer rebuilds the
lattice of every global trace compatible with the events it receives and
progresses LTL formulas along it.
"""

from .errors import (
    BudgetExceeded, ConfigError, LatticemonError, LengthMismatch, MeetMissing, NotEnabled,
    ParseError, PartialState, ProtocolViolation, UnknownFault, UnknownModel,
)
from .model import (
    Bot, ComponentSpec, GlobalAction, GlobalState, PartialTrace, SchedulerSpec, SystemSpec,
    compatible_traces, enabled_global_actions, lattice_view, project_local_trace, refine,
    run_actions, step, validate_system,
)
from .instrumentation import (
    ActionEvent, UpdateEvent, check_trace_preservation, extract_events, format_event_log,
    instrumented_step, parse_event_log, run_instrumented, vc_inc, vc_less, vc_max,
)
from .lattice import Lattice, LatticeNode, lattice_report
from .ltl import (
    FALSE, TRUE, Always, And, Atom, Eventually, Formula, Next, Not, Or, Until, XBeta,
    parse_formula, prog_oracle, progress, show, standard_progression, update_formula,
)
from .models import build_model, property_formula, sweep, tanks3, tpc
from .sim import Scenario, enumerate_deliveries, inject_fault, run_scenario

__version__ = "0.1.0"
