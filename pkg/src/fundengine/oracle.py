"""Brute-force transaction-level fee calculator.

Every entry into the fund becomes a separate lot with its own subscription
price.  Fees are computed per lot: a fund-level levy whenever the NAV sets a
new high-water mark, plus lot-level fees (on exit in free-ride mode, or an
upfront liability for below-HWM entrants).  This is the differential-testing
oracle for the aggregated weighted-average schemes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DegenerateInput, IntegrityError
from .fixedpoint import ZERO, FixedPoint, fp_max, fp_min
from .state import FundState

MODE_FREE_RIDE = "free_ride"
MODE_LIABILITY_UPFRONT = "liability_upfront"


@dataclass
class Lot:
    investor_id: str
    tokens: FixedPoint
    subscription_price: FixedPoint
    ref_price: FixedPoint  # highest NAV this lot has already been charged to
    entry_event_index: int
    entered_below_hwm: bool
    liability_paid: FixedPoint = ZERO


@dataclass
class OracleEventRecord:
    event_index: int
    levy_usd: FixedPoint
    exit_fee_usd: FixedPoint
    upfront_usd: FixedPoint
    diagnostics: list[str] = field(default_factory=list)

    @property
    def total_usd(self) -> FixedPoint:
        return self.levy_usd + self.exit_fee_usd + self.upfront_usd


class TxnOracle:
    """Replays lots through a sequence of rebalance events."""

    def __init__(self, perf_fee_pct: FixedPoint, hwm: FixedPoint,
                 mode: str = MODE_FREE_RIDE,
                 hwml_ratio: FixedPoint = ZERO):
        if mode not in (MODE_FREE_RIDE, MODE_LIABILITY_UPFRONT):
            raise DegenerateInput(f"unknown oracle mode: {mode}")
        if mode == MODE_LIABILITY_UPFRONT and hwml_ratio.is_zero:
            raise DegenerateInput("liability_upfront mode needs hwml_ratio > 0")
        if mode == MODE_FREE_RIDE and hwml_ratio > ZERO:
            raise DegenerateInput("free_ride mode needs hwml_ratio == 0")
        self.pfp = perf_fee_pct
        self.hwm = hwm
        self.mode = mode
        self.hwml_ratio = hwml_ratio
        self.lots: list[Lot] = []
        self.liability_account = ZERO
        self.events: list[OracleEventRecord] = []
        self.cumulative = ZERO

    # -- lot bookkeeping ----------------------------------------------------

    def record_lot(self, nav: FixedPoint, tokens: FixedPoint, investor_id: str,
                   event_index: int) -> Lot:
        if tokens <= ZERO:
            raise DegenerateInput("lot must hold tokens")
        lot = Lot(
            investor_id=investor_id,
            tokens=tokens,
            subscription_price=nav,
            ref_price=nav,
            entry_event_index=event_index,
            entered_below_hwm=nav <= self.hwm,
        )
        self.lots.append(lot)
        return lot

    def upfront_liability(self, lot: Lot) -> FixedPoint:
        """Liability charged at entry for a below-HWM subscription."""
        if self.mode != MODE_LIABILITY_UPFRONT:
            raise DegenerateInput("upfront liability applies only in liability_upfront mode")
        fee = fp_max(ZERO, self.hwm - lot.subscription_price) * self.pfp \
            * lot.tokens * self.hwml_ratio
        lot.liability_paid = lot.liability_paid + fee
        # The liability already covers the band up to the HWM.
        lot.ref_price = fp_max(lot.ref_price, self.hwm)
        self.liability_account = self.liability_account + fee
        return fee

    def exit_fee(self, lot: Lot, nav: FixedPoint, redeemed: FixedPoint) -> FixedPoint:
        """Free-ride mode charges a below-HWM lot on exit for gains never
        captured by a fund-level levy."""
        if self.mode != MODE_FREE_RIDE:
            return ZERO
        if not lot.entered_below_hwm:
            return ZERO
        if lot.investor_id.startswith("__"):
            return ZERO  # protocol-owned tokens (fee collector, treasury)
        return fp_max(ZERO, nav - lot.ref_price) * self.pfp * redeemed

    def set_hwml_ratio(self, ratio: FixedPoint) -> FixedPoint:
        """Mode switches mid-run: dropping to zero refunds liabilities; raising
        above zero is rejected (entrants would free ride)."""
        if ratio.is_zero:
            refund = self.liability_account
            self.liability_account = ZERO
            self.cumulative = self.cumulative - refund
            for lot in self.lots:
                lot.liability_paid = ZERO
            self.mode = MODE_FREE_RIDE
            self.hwml_ratio = ZERO
            return refund
        raise IntegrityError("raising the liability ratio mid-run is not supported")

    # -- event processing ---------------------------------------------------

    def process_event(self, event_index: int, levy_nav: FixedPoint,
                      entries: list[tuple[str, FixedPoint, FixedPoint]],
                      exits: list[tuple[str, FixedPoint]],
                      exit_nav: FixedPoint) -> OracleEventRecord:
        """One rebalance event.

        ``entries`` are (investor id, tokens, mint price) applied after the
        levy; ``exits`` are (investor id, tokens) redeemed at ``exit_nav``
        after the levy, consuming that investor's lots FIFO by entry event.
        """
        record = OracleEventRecord(event_index, ZERO, ZERO, ZERO)

        # Fund-level levy: fires only when the NAV sets a new high; each lot
        # pays on the band above its own already-charged reference.
        if levy_nav > self.hwm:
            for lot in self.lots:
                gain = fp_max(ZERO, levy_nav - lot.ref_price)
                if gain > ZERO and lot.tokens > ZERO:
                    record.levy_usd = record.levy_usd + gain * self.pfp * lot.tokens
                    lot.ref_price = levy_nav
            self.hwm = levy_nav
        elif levy_nav > self.nav_floor():
            record.diagnostics.append(
                f"event {event_index}: partial recovery below HWM; "
                "free-riding gains accrue untaxed until exit or new HWM")

        for investor_id, tokens in exits:
            record.exit_fee_usd = record.exit_fee_usd + self._redeem(
                investor_id, tokens, exit_nav)

        for investor_id, tokens, price in entries:
            if tokens.is_zero:
                continue
            lot = self.record_lot(price, tokens, investor_id, event_index)
            if self.mode == MODE_LIABILITY_UPFRONT and lot.entered_below_hwm:
                record.upfront_usd = record.upfront_usd + self.upfront_liability(lot)

        self.cumulative = self.cumulative + record.total_usd
        self.events.append(record)
        return record

    def _redeem(self, investor_id: str, tokens: FixedPoint,
                nav: FixedPoint) -> FixedPoint:
        remaining = tokens
        fee = ZERO
        for lot in self.lots:
            if remaining.is_zero:
                break
            if lot.investor_id != investor_id or lot.tokens.is_zero:
                continue
            take = fp_min(lot.tokens, remaining)
            fee = fee + self.exit_fee(lot, nav, take)
            lot.tokens = lot.tokens - take
            remaining = remaining - take
        if remaining > ZERO:
            raise IntegrityError(
                f"oracle: {investor_id} redeemed more than held ({remaining} short)")
        return fee

    # -- views --------------------------------------------------------------

    def nav_floor(self) -> FixedPoint:
        floors = [lot.ref_price for lot in self.lots if lot.tokens > ZERO]
        return min(floors) if floors else ZERO

    def holdings(self, investor_id: str) -> FixedPoint:
        total = ZERO
        for lot in self.lots:
            if lot.investor_id == investor_id:
                total = total + lot.tokens
        return total

    def check_conservation(self, state: FundState) -> None:
        """Lot totals must mirror the engine's per-investor trackers."""
        for investor_id in state.investor_ids():
            expected = state.per_investor[investor_id].total_tokens
            actual = self.holdings(investor_id)
            if actual != expected:
                raise IntegrityError(
                    f"lot conservation broken for {investor_id}: "
                    f"{actual} != {expected}")
