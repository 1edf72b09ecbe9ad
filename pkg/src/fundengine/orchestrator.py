"""The periodic rebalance state machine.

One event runs, in order: price the fund, levy management and performance
fees, mint fee tokens and adjust the NAV, net the request queue, cap the net
flow, allocate fills (FIFO deposits / pro-rata withdrawals), settle slippage
through the treasury on the withdraw branch, execute mints and burns at the
adjusted NAV, then apply the post-event benchmark updates.  Halts are typed
terminal outcomes that leave the input state untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from . import fees as fee_ops
from .errors import DegenerateInput, IntegrityError
from .fixedpoint import (ZERO, FixedPoint, fp_max, fp_min, from_fraction,
                         to_fraction)
from .netting import (DepositRequest, FlowCaps, NettingResult, WithdrawRequest,
                      net_per_investor, run_netting)
from .slippage import (SlippageOutcome, check_slippage_tolerance,
                       compute_slippage, settle_slippage)
from .state import (SCHEME_A, SCHEME_B, SCHEME_C, SCHEMES, SYSTEM_INVESTOR,
                    FundState)

HALT_SLIPPAGE = "slippage_tolerance_exceeded"


@dataclass
class RebalanceEventInput:
    time: int
    market_fund_value: FixedPoint
    caps: FlowCaps
    tolerance_pct: FixedPoint = ZERO
    rebalance_proceeds: Optional[FixedPoint] = None  # None: fills net amount exactly
    deposits: list[DepositRequest] = field(default_factory=list)
    withdrawals: list[WithdrawRequest] = field(default_factory=list)


@dataclass
class InvestorFlow:
    tokens_in: FixedPoint = ZERO
    tokens_out: FixedPoint = ZERO
    usd_in: FixedPoint = ZERO
    usd_out: FixedPoint = ZERO


@dataclass
class RebalanceReport:
    event_time: int
    scheme: str
    nav_pre_fee: FixedPoint = ZERO
    nav_adjusted: FixedPoint = ZERO
    nav_post_slippage_ref: Optional[FixedPoint] = None
    nav_final: FixedPoint = ZERO
    fee_assessment: fee_ops.FeeAssessment = field(default_factory=fee_ops.FeeAssessment)
    netting: NettingResult = field(default_factory=NettingResult)
    slippage: Optional[SlippageOutcome] = None
    deposit_mint_tokens: FixedPoint = ZERO
    withdraw_burn_tokens: FixedPoint = ZERO
    treasury_mint_tokens: FixedPoint = ZERO
    treasury_burn_tokens: FixedPoint = ZERO
    deposit_fee_usd: FixedPoint = ZERO
    redemption_fee_usd: FixedPoint = ZERO
    accepted_deposit_usd_net: FixedPoint = ZERO
    payout_usd_gross: FixedPoint = ZERO
    payout_usd_net: FixedPoint = ZERO
    redeemed_investor_tokens: FixedPoint = ZERO
    investor_flows: dict[str, InvestorFlow] = field(default_factory=dict)
    supply_before: FixedPoint = ZERO
    supply_after: FixedPoint = ZERO
    fund_value_before: FixedPoint = ZERO
    fund_value_after: FixedPoint = ZERO
    halt: Optional[str] = None
    fees_rolled_back: bool = False
    diagnostics: list[str] = field(default_factory=list)

    @property
    def completed(self) -> bool:
        return self.halt is None


class Halt(Exception):
    def __init__(self, reason: str, outcome: Optional[SlippageOutcome] = None):
        self.reason = reason
        self.outcome = outcome
        super().__init__(reason)


def compute_nav(fund_value: FixedPoint, token_supply: FixedPoint) -> FixedPoint:
    if token_supply <= ZERO:
        raise DegenerateInput("fund has no outstanding tokens")
    return fund_value / token_supply


def run_rebalance(state: FundState, event: RebalanceEventInput, scheme: str,
                  exact_dilution: bool = False,
                  carry_unfilled: bool = True
                  ) -> tuple[FundState, RebalanceReport]:
    """Execute one full rebalance event.

    Returns the successor state and the audit report.  On a halt the returned
    state is the input state, unchanged; fees assessed mid-event are rolled
    back with it and flagged in the report.
    """
    if scheme not in SCHEMES:
        raise DegenerateInput(f"unknown scheme: {scheme}")
    if event.time <= state.last_event_time and state.rebalance_count > 0:
        raise IntegrityError("event times must be strictly increasing")

    s = state.clone()
    report = RebalanceReport(event_time=event.time, scheme=scheme)
    report.supply_before = state.token_supply
    report.fund_value_before = state.fund_value

    try:
        _run(s, event, scheme, report, exact_dilution, carry_unfilled)
    except Halt as halt:
        report.halt = halt.reason
        report.slippage = halt.outcome or report.slippage
        report.fees_rolled_back = report.fee_assessment.total_levied_usd > ZERO \
            or report.fee_assessment.mgmt_fee_usd > ZERO
        return state, report

    report.supply_after = s.token_supply
    report.fund_value_after = s.fund_value
    s.validate()
    return s, report


def _run(s: FundState, event: RebalanceEventInput, scheme: str,
         report: RebalanceReport, exact_dilution: bool,
         carry_unfilled: bool) -> None:
    sched = s.fee_schedule
    pfp = sched.perf_fee_pct

    # Steps 1-3: price the fund at the event's market value.
    s.fund_value = event.market_fund_value
    nav0 = compute_nav(s.fund_value, s.token_supply)
    report.nav_pre_fee = nav0
    supply_base = s.token_supply

    # Step 4: fees on the fresh NAV, before any flows.
    assessment = report.fee_assessment
    elapsed = max(0, event.time - s.last_event_time)
    assessment.mgmt_fee_usd = fee_ops.management_fee(
        s.fund_value, sched.mgmt_fee_annual_pct, elapsed)
    assessment.nav_before = nav0

    wavg_prev_event = s.nav_wavg
    pb_mark: Optional[FixedPoint] = None
    if scheme == SCHEME_A:
        perf, per_inv = fee_ops.perf_fee_scheme_a_all(s, nav0)
        assessment.perf_fee_fund_usd = perf
        assessment.per_investor_fees = per_inv
        fee_ops.crystallize_scheme_a(s, nav0)
    else:
        assessment.perf_fee_fund_usd = fee_ops.perf_fee_scheme_b(s, nav0)
        if scheme == SCHEME_C:
            pb_mark = fee_ops.scheme_c_mark_down(s, nav0)

    # Steps 5-6: mint fee tokens, adjust the NAV.
    fee_usd = assessment.mgmt_fee_usd + assessment.perf_fee_fund_usd
    fee_tokens, nav_adj = fee_ops.mint_fee_tokens(
        fee_usd, nav0, s.token_supply, s.fund_value, exact_dilution)
    s.token_supply = s.token_supply + fee_tokens
    s.fee_collector_tokens = s.fee_collector_tokens + fee_tokens
    assessment.fee_tokens_minted = fee_tokens
    assessment.nav_after = nav_adj
    report.nav_adjusted = nav_adj

    # Benchmark crystallization at levy time.
    did_hwm_update = False
    if scheme == SCHEME_A:
        if nav0 > s.hwm:
            s.hwm = nav0
            did_hwm_update = True
            for tracker in s.per_investor.values():
                tracker.tokens_below_hwm = ZERO
                tracker.nav_wavg_lhwm = None
    else:
        if pb_mark is not None:
            s.nav_wavg = to_fraction(pb_mark)
            s.nav_wavg_pb = pb_mark
        else:
            s.nav_wavg_pb = None
            if to_fraction(nav0) > s.nav_wavg:
                s.nav_wavg = to_fraction(nav0)
        if nav0 > s.hwm:  # reference HWM kept for reporting under B/C
            s.hwm = nav0
            did_hwm_update = True

    # Step 7: net the queue at the adjusted NAV, cap, allocate.
    all_deps = s.pending_deposits + list(event.deposits)
    all_wdrs = s.pending_withdrawals + list(event.withdrawals)
    s.pending_deposits = []
    s.pending_withdrawals = []
    deps, wdrs = net_per_investor(all_deps, all_wdrs, nav_adj)
    for w in wdrs:
        held = s.tracker(w.investor_id).total_tokens
        if w.tokens > held:
            raise IntegrityError(
                f"{w.investor_id} requested {w.tokens} tokens but holds {held}")

    netting = run_netting(deps, wdrs, nav_adj, event.caps)
    report.netting = netting

    # Withdraw branch: tolerance gate, then treasury-mediated slippage settlement.
    if netting.is_net_withdraw:
        proceeds = event.rebalance_proceeds
        if proceeds is None:
            proceeds = abs(netting.net_amount_event)
        halt_reason = check_slippage_tolerance(
            netting.net_amount_event, proceeds, event.tolerance_pct) \
            if not (netting.net_amount_event.is_zero and proceeds.is_zero) else None
        if halt_reason:
            raise Halt(halt_reason)
        slippage = compute_slippage(netting.net_amount_event, proceeds)
        outcome = settle_slippage(s, slippage, nav_adj)
        outcome.rebalance_proceeds = proceeds
        report.slippage = outcome
        if outcome.kind == "halted":
            raise Halt(outcome.halt_reason, outcome)
        if outcome.kind == "burned_from_treasury" or outcome.kind == "partial_burn_with_carry":
            report.treasury_burn_tokens = outcome.tokens
        elif outcome.kind == "minted_to_treasury":
            report.treasury_mint_tokens = outcome.tokens
        if outcome.carry_usd > ZERO:
            s.pending_deposits.append(
                DepositRequest(SYSTEM_INVESTOR, outcome.carry_usd, seq=0))
        report.nav_post_slippage_ref = compute_nav(s.fund_value, s.token_supply)

    # Fills price at the step-6 adjusted NAV, never the post-slippage reference.
    dep_mint_total = ZERO
    for req, accepted in netting.accepted_deposits:
        if accepted.is_zero:
            _carry_deposit(s, req, accepted, carry_unfilled)
            continue
        dep_fee = accepted * sched.deposit_fee_pct
        net_in = accepted - dep_fee
        tokens = net_in / nav_adj
        s.treasury.stable_balance = s.treasury.stable_balance + dep_fee
        s.token_supply = s.token_supply + tokens
        s.fund_value = s.fund_value + net_in
        fee_ops.update_below_hwm_trackers(s, req.investor_id, tokens, ZERO, nav_adj)
        flow = report.investor_flows.setdefault(req.investor_id, InvestorFlow())
        flow.tokens_in = flow.tokens_in + tokens
        flow.usd_in = flow.usd_in + net_in
        dep_mint_total = dep_mint_total + tokens
        report.deposit_fee_usd = report.deposit_fee_usd + dep_fee
        report.accepted_deposit_usd_net = report.accepted_deposit_usd_net + net_in
        _carry_deposit(s, req, accepted, carry_unfilled)
    report.deposit_mint_tokens = dep_mint_total

    # Scheme C redemption-side rate, fixed before per-request fills.  Held as
    # an exact rational; each payout deduction truncates once.
    if scheme == SCHEME_C:
        benchmark = wavg_prev_event if pb_mark is not None else s.nav_wavg
        rdmpt_gap = max(Fraction(0), to_fraction(nav0) - benchmark) \
            * to_fraction(pfp)
    else:
        rdmpt_gap = Fraction(0)

    redeemed_total = ZERO
    rdmpt_total = ZERO
    for req, tokens in netting.accepted_withdrawals:
        if tokens.is_zero:
            _carry_withdrawal(s, req, tokens, carry_unfilled)
            continue
        gross = tokens * nav_adj
        red_fee = gross * sched.redemption_fee_pct
        perf_rdmpt = from_fraction(rdmpt_gap * to_fraction(tokens))
        payout = gross - red_fee - perf_rdmpt
        if payout < ZERO:
            raise IntegrityError("redemption fees exceed gross payout")
        s.treasury.stable_balance = s.treasury.stable_balance + red_fee
        s.token_supply = s.token_supply - tokens
        s.fund_value = s.fund_value - gross + perf_rdmpt
        fee_ops.update_below_hwm_trackers(s, req.investor_id, ZERO, -tokens, nav_adj)
        flow = report.investor_flows.setdefault(req.investor_id, InvestorFlow())
        flow.tokens_out = flow.tokens_out + tokens
        flow.usd_out = flow.usd_out + payout
        redeemed_total = redeemed_total + tokens
        rdmpt_total = rdmpt_total + perf_rdmpt
        report.redemption_fee_usd = report.redemption_fee_usd + red_fee
        report.payout_usd_gross = report.payout_usd_gross + gross
        report.payout_usd_net = report.payout_usd_net + payout
        _carry_withdrawal(s, req, tokens, carry_unfilled)
    report.withdraw_burn_tokens = redeemed_total
    report.redeemed_investor_tokens = redeemed_total

    # Scheme C: mint fee tokens for the redemption-side levy, burn for the
    # plough-back.  Both price at the step-3 NAV like the step-5 fee mint.
    rdmpt_fee_tokens = ZERO
    pb_burn_tokens = ZERO
    if scheme == SCHEME_C:
        assessment.perf_fee_redemption_usd = rdmpt_total
        if rdmpt_total > ZERO:
            rdmpt_fee_tokens = rdmpt_total / nav0
            s.token_supply = s.token_supply + rdmpt_fee_tokens
            s.fee_collector_tokens = s.fee_collector_tokens + rdmpt_fee_tokens
            assessment.fee_tokens_minted = assessment.fee_tokens_minted + rdmpt_fee_tokens
        if pb_mark is not None:
            remaining = supply_base - redeemed_total
            pb_usd = from_fraction(
                max(Fraction(0), wavg_prev_event - to_fraction(pb_mark))
                * to_fraction(pfp) * to_fraction(remaining))
            assessment.plough_back_usd = pb_usd
            pb_burn_tokens = fee_ops.burn_fee_tokens(pb_usd, nav0)
            if pb_burn_tokens > s.fee_collector_tokens:
                report.diagnostics.append(
                    "plough-back clamped to fee-collector token balance")
                pb_burn_tokens = s.fee_collector_tokens
            s.fee_collector_tokens = s.fee_collector_tokens - pb_burn_tokens
            s.token_supply = s.token_supply - pb_burn_tokens
            assessment.fee_tokens_burned = pb_burn_tokens

    # Weighted-average benchmark absorbs this event's inflows at mint prices.
    if scheme != SCHEME_A:
        inflows = []
        if fee_tokens + rdmpt_fee_tokens > ZERO:
            inflows.append((nav0, fee_tokens + rdmpt_fee_tokens))
        if dep_mint_total > ZERO:
            inflows.append((nav_adj, dep_mint_total))
        if report.treasury_mint_tokens > ZERO:
            inflows.append((nav_adj, report.treasury_mint_tokens))
        if inflows:
            inflow_total = ZERO
            for _, tok in inflows:
                inflow_total = inflow_total + tok
            base = s.token_supply - inflow_total
            s.nav_wavg = fee_ops.blend_wavg(s.nav_wavg, base, inflows)

    report.nav_final = compute_nav(s.fund_value, s.token_supply)
    s.nav = report.nav_final
    s.nav_prev = nav0
    s.rebalance_count += 1
    if did_hwm_update:
        s.last_hwm_rebalance_index = s.rebalance_count
    s.last_event_time = event.time


def _carry_deposit(s: FundState, req: DepositRequest, accepted: FixedPoint,
                   carry_unfilled: bool) -> None:
    remainder = req.amount_usd - accepted
    if remainder > ZERO and carry_unfilled:
        s.pending_deposits.append(DepositRequest(req.investor_id, remainder, req.seq))


def _carry_withdrawal(s: FundState, req: WithdrawRequest, accepted: FixedPoint,
                      carry_unfilled: bool) -> None:
    remainder = req.tokens - accepted
    if remainder > ZERO and carry_unfilled:
        s.pending_withdrawals.append(WithdrawRequest(req.investor_id, remainder, req.seq))


def resume(state: FundState, amended: RebalanceEventInput, scheme: str,
           **kwargs) -> tuple[FundState, RebalanceReport]:
    """Re-run a halted event with amended inputs (better proceeds, wider
    tolerance, a topped-up treasury)."""
    return run_rebalance(state, amended, scheme, **kwargs)


def revert_fees(state: FundState, report: RebalanceReport) -> FundState:
    """Compensating fee reversal, valid only against a halted event.

    Halted events never commit their mid-event fee mints (the working state is
    discarded wholesale), so the reversal is the identity on the ledger; the
    call exists to make the audit trail explicit.
    """
    if report.completed:
        raise IntegrityError("fee reversal is only available from a halted event")
    return state


def replay(state: FundState, events: list[RebalanceEventInput], scheme: str,
           **kwargs) -> tuple[FundState, list[RebalanceReport]]:
    """Fold the orchestrator over a scenario; stops at the first halt."""
    reports: list[RebalanceReport] = []
    current = state
    for event in events:
        current, report = run_rebalance(current, event, scheme, **kwargs)
        reports.append(report)
        if report.halt is not None:
            break
    return current, reports
