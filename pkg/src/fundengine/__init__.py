"""Deterministic rebalance engine for tokenized funds."""

from .errors import (DegenerateInput, DivisionByZero, EngineError,
                     FixedPointOverflow, IntegrityError, SchemaError)
from .fixedpoint import FP_ONE, ZERO, FixedPoint, fp, fp_max, fp_min, mul_div
from .netting import DepositRequest, FlowCaps, NettingResult, WithdrawRequest
from .orchestrator import (RebalanceEventInput, RebalanceReport, replay,
                           resume, revert_fees, run_rebalance)
from .scenario import ENGINE_VERSION, Scenario, dump_snapshot, load_snapshot
from .state import (SCHEME_A, SCHEME_B, SCHEME_C, FeeSchedule, FundState,
                    InvestorTracker, Treasury, seed_state)

__version__ = "0.1.0"

__all__ = [
    "DegenerateInput", "DivisionByZero", "EngineError", "FixedPointOverflow",
    "IntegrityError", "SchemaError",
    "FP_ONE", "ZERO", "FixedPoint", "fp", "fp_max", "fp_min", "mul_div",
    "DepositRequest", "FlowCaps", "NettingResult", "WithdrawRequest",
    "RebalanceEventInput", "RebalanceReport", "replay", "resume",
    "revert_fees", "run_rebalance",
    "ENGINE_VERSION", "Scenario", "dump_snapshot", "load_snapshot",
    "SCHEME_A", "SCHEME_B", "SCHEME_C", "FeeSchedule", "FundState",
    "InvestorTracker", "Treasury", "seed_state",
]
