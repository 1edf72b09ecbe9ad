"""Management fees and the three aggregated performance-fee schemes.

Scheme A clubs each investor's below-HWM entries behind one weighted-average
entry price next to a single fund-wide HWM.  Scheme B drops the HWM and keeps
only a fund-level weighted-average NAV benchmark.  Scheme C extends B with a
plough-back that marks the benchmark down after a fall-and-partial-rise and
returns (burns) the fees attributable to the markdown.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .errors import IntegrityError
from .fixedpoint import (ZERO, FixedPoint, fp_max, fp_min, from_fraction,
                         mul_div, to_fraction)
from .state import FundState, InvestorTracker

_DAYS_PER_YEAR = FixedPoint(365)


@dataclass
class FeeAssessment:
    mgmt_fee_usd: FixedPoint = ZERO
    perf_fee_fund_usd: FixedPoint = ZERO
    perf_fee_investor_usd: FixedPoint = ZERO
    perf_fee_redemption_usd: FixedPoint = ZERO
    plough_back_usd: FixedPoint = ZERO
    fee_tokens_minted: FixedPoint = ZERO
    fee_tokens_burned: FixedPoint = ZERO
    nav_before: FixedPoint = ZERO
    nav_after: FixedPoint = ZERO
    per_investor_fees: dict[str, FixedPoint] = field(default_factory=dict)

    @property
    def total_levied_usd(self) -> FixedPoint:
        return (self.perf_fee_fund_usd + self.perf_fee_investor_usd
                + self.perf_fee_redemption_usd)


def management_fee(fund_value: FixedPoint, annual_pct: FixedPoint,
                   elapsed_days: int) -> FixedPoint:
    """ACT/365 proration of the annual rate over the days since the last event."""
    if elapsed_days < 0:
        raise IntegrityError("elapsed days negative")
    annual = fund_value * annual_pct
    return mul_div(annual, FixedPoint(elapsed_days), _DAYS_PER_YEAR)


# -- scheme A: investor-clubbed below-HWM tracking --------------------------

def perf_fee_scheme_a(state: FundState, nav: FixedPoint,
                      investor_id: str) -> FixedPoint:
    """Fund-term above the HWM plus the clubbed below-HWM term for one investor."""
    tracker = state.tracker(investor_id)
    pfp = state.fee_schedule.perf_fee_pct
    above = fp_max(ZERO, nav - state.hwm)
    fee = above * pfp * (tracker.total_tokens - tracker.tokens_below_hwm)
    if tracker.nav_wavg_lhwm is not None and tracker.tokens_below_hwm > ZERO:
        gain = fp_max(ZERO, nav - tracker.nav_wavg_lhwm)
        fee = fee + gain * pfp * tracker.tokens_below_hwm
    return fee


def perf_fee_scheme_a_all(state: FundState, nav: FixedPoint
                          ) -> tuple[FixedPoint, dict[str, FixedPoint]]:
    total = ZERO
    per_investor: dict[str, FixedPoint] = {}
    for investor_id in state.investor_ids():
        fee = perf_fee_scheme_a(state, nav, investor_id)
        per_investor[investor_id] = fee
        total = total + fee
    return total, per_investor


def crystallize_scheme_a(state: FundState, nav: FixedPoint) -> None:
    """After a below-HWM investor-term levy, reset the clubbed entry price to
    the NAV just charged so the same gain is not charged again next event."""
    if nav > state.hwm:
        return  # full reset happens in post_rebalance_hwm_update
    for tracker in state.per_investor.values():
        if tracker.nav_wavg_lhwm is not None and tracker.nav_wavg_lhwm < nav:
            tracker.nav_wavg_lhwm = nav


def update_below_hwm_trackers(state: FundState, investor_id: str,
                              invest_tokens: FixedPoint,
                              withdraw_tokens: FixedPoint,
                              nav: FixedPoint) -> InvestorTracker:
    """Apply one event's accepted flows to an investor's clubbed trackers.

    ``withdraw_tokens`` is non-positive.  Withdrawals consume the below-HWM
    tranche first; the tranche never goes negative.
    """
    if invest_tokens < ZERO or withdraw_tokens > ZERO:
        raise IntegrityError("invest must be >= 0 and withdraw <= 0")
    tracker = state.tracker(investor_id)
    tracker.total_tokens = tracker.total_tokens + invest_tokens + withdraw_tokens
    if tracker.total_tokens < ZERO:
        raise IntegrityError(f"investor {investor_id} driven below zero holding")

    entered_below = nav <= state.hwm
    if invest_tokens > ZERO and entered_below:
        prior = tracker.tokens_below_hwm
        prior_wavg = tracker.nav_wavg_lhwm if tracker.nav_wavg_lhwm is not None else ZERO
        new_total = prior + invest_tokens
        weighted = prior_wavg * prior + nav * invest_tokens
        tracker.tokens_below_hwm = new_total
        tracker.nav_wavg_lhwm = weighted / new_total
    if withdraw_tokens < ZERO:
        consumed = fp_min(tracker.tokens_below_hwm, abs(withdraw_tokens))
        tracker.tokens_below_hwm = tracker.tokens_below_hwm - consumed
        if tracker.tokens_below_hwm.is_zero:
            tracker.nav_wavg_lhwm = None
    if tracker.tokens_below_hwm > tracker.total_tokens:
        # Above-HWM holdings exhausted; the clubbed tranche is the whole position.
        tracker.tokens_below_hwm = tracker.total_tokens
    return tracker


def post_rebalance_hwm_update(state: FundState, nav: FixedPoint) -> None:
    """The end-of-event reset: strictly above the HWM crystallizes everything."""
    if nav > state.hwm:
        state.hwm = nav
        state.last_hwm_rebalance_index = state.rebalance_count
        for tracker in state.per_investor.values():
            tracker.tokens_below_hwm = ZERO
            tracker.nav_wavg_lhwm = None


# -- schemes B and C: fund-level weighted-average benchmark -----------------

def perf_fee_scheme_b(state: FundState, nav: FixedPoint) -> FixedPoint:
    """Gain of the whole supply over the exact weighted-average benchmark.

    Computed as a rational and truncated once when the fee leaves in USD.
    """
    gain = to_fraction(nav) - state.nav_wavg
    if gain <= 0:
        return ZERO
    fee = gain * to_fraction(state.fee_schedule.perf_fee_pct) \
        * to_fraction(state.token_supply)
    return from_fraction(fee)


def blend_wavg(wavg: Fraction, base_tokens: FixedPoint,
               inflows: list[tuple[FixedPoint, FixedPoint]]) -> Fraction:
    """Token-weighted mean of the existing benchmark and this event's inflows.

    ``inflows`` is a list of (mint price, token quantity).  Outflows leave the
    weighted average unchanged.
    """
    total = to_fraction(base_tokens)
    weighted = wavg * total
    for price, tokens in inflows:
        if tokens.is_zero:
            continue
        weighted = weighted + to_fraction(price) * to_fraction(tokens)
        total = total + to_fraction(tokens)
    if total == 0:
        return wavg
    return weighted / total


@dataclass
class SchemeCOutcome:
    nav_wavg_pb: Optional[FixedPoint]
    redemption_fee_usd: FixedPoint
    plough_back_usd: FixedPoint


def scheme_c_mark_down(state: FundState, nav: FixedPoint) -> Optional[FixedPoint]:
    """The plough-back trigger: NAV rose versus the previous event yet still
    sits below the weighted-average benchmark."""
    if nav > state.nav_prev and state.nav_wavg > to_fraction(nav):
        return nav
    return None


def scheme_c_settlement(state: FundState, nav: FixedPoint,
                        wavg_prev_event: Fraction,
                        nav_wavg_pb: Optional[FixedPoint],
                        redeemed_tokens: FixedPoint,
                        remaining_tokens: FixedPoint) -> SchemeCOutcome:
    """Redemption-side fee and plough-back, computed once fills are known."""
    pfp = to_fraction(state.fee_schedule.perf_fee_pct)
    if nav_wavg_pb is not None:
        rdmpt = max(Fraction(0), to_fraction(nav) - wavg_prev_event) \
            * pfp * to_fraction(redeemed_tokens)
        pb = max(Fraction(0), wavg_prev_event - to_fraction(nav_wavg_pb)) \
            * pfp * to_fraction(remaining_tokens)
    else:
        rdmpt = max(Fraction(0), to_fraction(nav) - state.nav_wavg) \
            * pfp * to_fraction(redeemed_tokens)
        pb = Fraction(0)
    return SchemeCOutcome(nav_wavg_pb, from_fraction(rdmpt), from_fraction(pb))


# -- fee token mint/burn ----------------------------------------------------

def mint_fee_tokens(fee_usd: FixedPoint, nav: FixedPoint,
                    token_supply: FixedPoint, fund_value: FixedPoint,
                    exact_dilution: bool = False) -> tuple[FixedPoint, FixedPoint]:
    """Tokens owed for a USD fee, plus the NAV after the mint dilutes supply.

    The default prices fee tokens at the pre-mint NAV.  ``exact_dilution``
    instead solves for the token count whose post-mint value equals the fee.
    """
    if fee_usd < ZERO:
        raise IntegrityError("fee cannot be negative")
    if fee_usd.is_zero:
        return ZERO, nav
    if exact_dilution:
        tokens = mul_div(fee_usd, token_supply, fund_value - fee_usd)
    else:
        tokens = fee_usd / nav
    nav_after = fund_value / (token_supply + tokens)
    return tokens, nav_after


def burn_fee_tokens(fee_usd: FixedPoint, nav: FixedPoint) -> FixedPoint:
    """Token quantity to burn when returning previously levied fees."""
    if fee_usd < ZERO:
        raise IntegrityError("plough-back cannot be negative")
    return fee_usd / nav
