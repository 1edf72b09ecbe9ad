"""Differential testing: aggregated schemes versus the per-lot calculator.

The driver replays a scenario through the orchestrator, mirrors every mint and
burn into the lot-level calculator, and compares the fees each side levied.
Divergences are classified rather than silently failed, because the aggregated
schemes and the per-lot view agree only on paths where each levy sets a new
running NAV high and redemptions happen at crystallized events.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .fixedpoint import ZERO, FixedPoint, fp_max
from .oracle import MODE_FREE_RIDE, TxnOracle
from .orchestrator import RebalanceEventInput, RebalanceReport, run_rebalance
from .state import FEE_COLLECTOR, TREASURY_ID, FundState

# Relative tolerance for agreement, as a scale-18 value (1e-9).
DEFAULT_REL_TOLERANCE = FixedPoint("0.000000001")

MATCH = "match"
DIVERGENCE_FALL_RISE = "fall_rise_path"
DIVERGENCE_DOWN_LEG_REDEMPTION = "down_leg_redemption"
DIVERGENCE_OTHER = "unclassified"


@dataclass
class EventDiff:
    event_index: int
    engine_fee_usd: FixedPoint
    oracle_fee_usd: FixedPoint
    classification: str
    notes: list[str] = field(default_factory=list)

    @property
    def matched(self) -> bool:
        return self.classification == MATCH


@dataclass
class DiffResult:
    per_event: list[EventDiff] = field(default_factory=list)
    engine_total_usd: FixedPoint = ZERO
    oracle_total_usd: FixedPoint = ZERO
    halted_at: Optional[int] = None

    @property
    def all_matched(self) -> bool:
        return all(d.matched for d in self.per_event)

    @property
    def divergences(self) -> list[EventDiff]:
        return [d for d in self.per_event if not d.matched]


def _within(a: FixedPoint, b: FixedPoint, rel_tol: FixedPoint) -> bool:
    diff = abs(a - b)
    scale = fp_max(abs(a), abs(b))
    if scale.is_zero:
        return diff.is_zero
    return diff <= scale * rel_tol


def feed_event(oracle: TxnOracle, report: RebalanceReport,
               event_index: int) -> FixedPoint:
    """Mirror one completed rebalance into the lot calculator.

    Entries: fee tokens minted at the pre-fee NAV, deposit mints and treasury
    mints at the adjusted NAV.  Exits: investor redemptions and treasury or
    plough-back burns.  Returns the calculator's fee for the event.
    """
    entries: list[tuple[str, FixedPoint, FixedPoint]] = []
    minted = report.fee_assessment.fee_tokens_minted
    if minted > ZERO:
        entries.append((FEE_COLLECTOR, minted, report.nav_pre_fee))
    for investor_id in sorted(report.investor_flows):
        flow = report.investor_flows[investor_id]
        if flow.tokens_in > ZERO:
            entries.append((investor_id, flow.tokens_in, report.nav_adjusted))
    if report.treasury_mint_tokens > ZERO:
        entries.append((TREASURY_ID, report.treasury_mint_tokens,
                        report.nav_adjusted))

    exits: list[tuple[str, FixedPoint]] = []
    for investor_id in sorted(report.investor_flows):
        flow = report.investor_flows[investor_id]
        if flow.tokens_out > ZERO:
            exits.append((investor_id, flow.tokens_out))
    if report.treasury_burn_tokens > ZERO:
        exits.append((TREASURY_ID, report.treasury_burn_tokens))
    if report.fee_assessment.fee_tokens_burned > ZERO:
        exits.append((FEE_COLLECTOR, report.fee_assessment.fee_tokens_burned))

    record = oracle.process_event(event_index, report.nav_pre_fee,
                                  entries, exits, report.nav_adjusted)
    return record.total_usd


def classify(report: RebalanceReport, matched: bool,
             taint: Optional[str]) -> str:
    """Attribute a mismatch to the path feature that caused it.

    A down-leg redemption or fall-rise breaks the benchmark/lot-reference
    correspondence, and the fee gap it opens surfaces at the next levy, so a
    prior divergence of either kind (``taint``) explains later mismatches too.
    """
    if matched:
        return MATCH
    if report.fee_assessment.plough_back_usd > ZERO \
            or report.fee_assessment.perf_fee_redemption_usd > ZERO:
        return DIVERGENCE_FALL_RISE
    if report.redeemed_investor_tokens > ZERO \
            and report.fee_assessment.perf_fee_fund_usd.is_zero:
        return DIVERGENCE_DOWN_LEG_REDEMPTION
    if taint is not None:
        return taint
    return DIVERGENCE_OTHER


def run_diff(initial: FundState, events: list[RebalanceEventInput],
             scheme: str,
             rel_tolerance: FixedPoint = DEFAULT_REL_TOLERANCE,
             oracle_mode: str = MODE_FREE_RIDE,
             hwml_ratio: FixedPoint = ZERO) -> DiffResult:
    """Replay ``events`` under ``scheme`` and the lot calculator in lockstep."""
    oracle = TxnOracle(initial.fee_schedule.perf_fee_pct, initial.hwm,
                       mode=oracle_mode, hwml_ratio=hwml_ratio)
    for investor_id in initial.investor_ids():
        tokens = initial.per_investor[investor_id].total_tokens
        if tokens > ZERO:
            oracle.record_lot(initial.nav, tokens, investor_id, event_index=-1)

    result = DiffResult()
    state = initial
    taint: Optional[str] = None
    for index, event in enumerate(events):
        state, report = run_rebalance(state, event, scheme)
        if report.halt is not None:
            result.halted_at = index
            break
        engine_fee = report.fee_assessment.total_levied_usd \
            - report.fee_assessment.plough_back_usd
        oracle_fee = feed_event(oracle, report, index)
        matched = _within(engine_fee, oracle_fee, rel_tolerance)
        diff = EventDiff(index, engine_fee, oracle_fee,
                         classify(report, matched, taint))
        if report.redeemed_investor_tokens > ZERO \
                and report.fee_assessment.perf_fee_fund_usd.is_zero:
            taint = DIVERGENCE_DOWN_LEG_REDEMPTION
        if report.fee_assessment.plough_back_usd > ZERO \
                or report.fee_assessment.perf_fee_redemption_usd > ZERO:
            taint = DIVERGENCE_FALL_RISE
        if not matched:
            diff.notes.append(
                f"engine {engine_fee} vs lots {oracle_fee} at event {index}")
        result.per_event.append(diff)
        result.engine_total_usd = result.engine_total_usd + engine_fee
        result.oracle_total_usd = result.oracle_total_usd + oracle_fee
        oracle.check_conservation(state)
    return result
