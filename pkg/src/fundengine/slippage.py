"""Slippage measurement, tolerance halt, and treasury-mediated settlement.

Positive slippage (trading proceeds beat the net event amount) is swept into
the treasury against a burn of treasury-held fund tokens; negative slippage is
made whole from treasury stables against a mint of fund tokens to the
treasury.  All settlement token quantities price at the post-fee adjusted NAV.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import DegenerateInput, DivisionByZero
from .fixedpoint import ZERO, FixedPoint, fp_min
from .state import FundState

HALT_SLIPPAGE_TOLERANCE = "slippage_tolerance_exceeded"
HALT_TREASURY_STABLES = "treasury_stables_insufficient"


@dataclass
class SlippageOutcome:
    rebalance_proceeds: FixedPoint
    slippage: FixedPoint
    kind: str  # none | burned_from_treasury | minted_to_treasury | partial_burn_with_carry | halted
    tokens: FixedPoint = ZERO
    carry_usd: FixedPoint = ZERO
    halt_reason: Optional[str] = None


def check_slippage_tolerance(net_amount_event: FixedPoint,
                             rebalance_proceeds: FixedPoint,
                             tolerance_pct: FixedPoint) -> Optional[str]:
    """Returns a halt reason when realized proceeds fall short beyond tolerance."""
    if net_amount_event.is_zero:
        if rebalance_proceeds.is_zero:
            return None
        raise DegenerateInput("nonzero proceeds against a zero net event amount")
    shortfall = (abs(rebalance_proceeds) - abs(net_amount_event)) / abs(net_amount_event)
    if shortfall < -tolerance_pct:
        return HALT_SLIPPAGE_TOLERANCE
    return None


def compute_slippage(net_amount_event: FixedPoint,
                     rebalance_proceeds: FixedPoint) -> FixedPoint:
    return abs(rebalance_proceeds) - abs(net_amount_event)


def settle_slippage(state: FundState, slippage: FixedPoint,
                    nav_ref: FixedPoint) -> SlippageOutcome:
    """Mutates the treasury leg of ``state``; the caller owns the supply delta.

    Returns the outcome record; ``tokens`` is the quantity burned (positive
    branch) or minted (negative branch) against the treasury's own holdings.
    """
    if nav_ref <= ZERO:
        raise DivisionByZero("settlement NAV must be positive")
    treasury = state.treasury
    if slippage.is_zero:
        return SlippageOutcome(ZERO, slippage, "none")

    if slippage > ZERO:
        tokens_needed = slippage / nav_ref
        if treasury.alpha_tokens >= tokens_needed:
            treasury.stable_balance = treasury.stable_balance + slippage
            treasury.alpha_tokens = treasury.alpha_tokens - tokens_needed
            state.token_supply = state.token_supply - tokens_needed
            return SlippageOutcome(ZERO, slippage, "burned_from_treasury", tokens=tokens_needed)
        # Burn what the treasury holds; the uncovered remainder is reinvested
        # at the next rebalance.
        burn = treasury.alpha_tokens
        covered = burn * nav_ref
        covered = fp_min(covered, slippage)
        carry = slippage - covered
        treasury.stable_balance = treasury.stable_balance + covered
        treasury.alpha_tokens = ZERO
        state.token_supply = state.token_supply - burn
        return SlippageOutcome(ZERO, slippage, "partial_burn_with_carry",
                               tokens=burn, carry_usd=carry)

    deficit = abs(slippage)
    if treasury.stable_balance < deficit:
        return SlippageOutcome(ZERO, slippage, "halted", halt_reason=HALT_TREASURY_STABLES)
    tokens_minted = deficit / nav_ref
    treasury.stable_balance = treasury.stable_balance - deficit
    treasury.alpha_tokens = treasury.alpha_tokens + tokens_minted
    state.token_supply = state.token_supply + tokens_minted
    return SlippageOutcome(ZERO, slippage, "minted_to_treasury", tokens=tokens_minted)


def redemption_price(rebalance_proceeds: FixedPoint,
                     total_dpst_usd: FixedPoint,
                     accepted_wdrw_tokens: FixedPoint) -> FixedPoint:
    """Alternative pricing mode: value actually moved divided by tokens redeemed."""
    if accepted_wdrw_tokens <= ZERO:
        raise DegenerateInput("redemption price needs accepted withdrawal tokens")
    return (abs(rebalance_proceeds) + total_dpst_usd) / accepted_wdrw_tokens
