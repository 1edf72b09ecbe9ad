"""Domain state shared by every module: fund ledger, trackers, fee schedule."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

from .errors import IntegrityError
from .fixedpoint import ZERO, FixedPoint, from_fraction, to_fraction

FEE_COLLECTOR = "__fee_collector__"
TREASURY_ID = "__treasury__"
SYSTEM_INVESTOR = "__system__"

SCHEME_A = "A"  # investor-clubbed below-HWM tracking
SCHEME_B = "B"  # fund-level weighted-average benchmark
SCHEME_C = "C"  # scheme B plus plough-back for fall-rise paths
SCHEMES = (SCHEME_A, SCHEME_B, SCHEME_C)


@dataclass
class FeeSchedule:
    mgmt_fee_annual_pct: FixedPoint = ZERO
    perf_fee_pct: FixedPoint = ZERO
    deposit_fee_pct: FixedPoint = ZERO
    redemption_fee_pct: FixedPoint = ZERO
    hwm_liability_ratio: FixedPoint = ZERO  # oracle only

    def validate(self) -> None:
        one = FixedPoint(1)
        for name in ("mgmt_fee_annual_pct", "perf_fee_pct", "deposit_fee_pct",
                     "redemption_fee_pct", "hwm_liability_ratio"):
            value = getattr(self, name)
            if value < ZERO or value > one:
                raise IntegrityError(f"{name} outside [0, 1]: {value}")


@dataclass
class Treasury:
    stable_balance: FixedPoint = ZERO
    alpha_tokens: FixedPoint = ZERO

    def validate(self) -> None:
        if self.stable_balance < ZERO or self.alpha_tokens < ZERO:
            raise IntegrityError("treasury balance negative")


@dataclass
class InvestorTracker:
    total_tokens: FixedPoint = ZERO
    tokens_below_hwm: FixedPoint = ZERO
    nav_wavg_lhwm: Optional[FixedPoint] = None

    def validate(self) -> None:
        if self.tokens_below_hwm < ZERO or self.tokens_below_hwm > self.total_tokens:
            raise IntegrityError("tokens_below_hwm outside [0, total_tokens]")
        if (self.nav_wavg_lhwm is not None) != (self.tokens_below_hwm > ZERO):
            raise IntegrityError("nav_wavg_lhwm present iff tokens_below_hwm > 0")


@dataclass
class FundState:
    fund_value: FixedPoint
    token_supply: FixedPoint
    nav: FixedPoint
    hwm: FixedPoint
    fee_schedule: FeeSchedule
    last_hwm_rebalance_index: int = 0
    rebalance_count: int = 0
    # The fund-level weighted-average benchmark is held as an exact rational so
    # fall-rise plough-backs reproduce hand-derived figures to the last digit;
    # it only truncates to scale 18 when a fee leaves in USD terms.
    nav_wavg: Fraction = field(default_factory=lambda: Fraction(0))
    nav_prev: FixedPoint = ZERO
    nav_wavg_pb: Optional[FixedPoint] = None
    fee_collector_tokens: FixedPoint = ZERO
    last_event_time: int = 0
    per_investor: dict[str, InvestorTracker] = field(default_factory=dict)
    treasury: Treasury = field(default_factory=Treasury)
    # Unfilled request remainders and slippage reinvestment carry, queued for
    # the next rebalance.
    pending_deposits: list = field(default_factory=list)
    pending_withdrawals: list = field(default_factory=list)

    def clone(self) -> "FundState":
        return FundState(
            fund_value=self.fund_value,
            token_supply=self.token_supply,
            nav=self.nav,
            hwm=self.hwm,
            fee_schedule=replace(self.fee_schedule),
            last_hwm_rebalance_index=self.last_hwm_rebalance_index,
            rebalance_count=self.rebalance_count,
            nav_wavg=self.nav_wavg,
            nav_prev=self.nav_prev,
            nav_wavg_pb=self.nav_wavg_pb,
            fee_collector_tokens=self.fee_collector_tokens,
            last_event_time=self.last_event_time,
            per_investor={k: replace(v) for k, v in self.per_investor.items()},
            treasury=replace(self.treasury),
            pending_deposits=list(self.pending_deposits),
            pending_withdrawals=list(self.pending_withdrawals),
        )

    def nav_wavg_fp(self) -> FixedPoint:
        """Scale-18 view of the exact benchmark, for display and snapshots."""
        return from_fraction(self.nav_wavg)

    def tracker(self, investor_id: str) -> InvestorTracker:
        if investor_id not in self.per_investor:
            self.per_investor[investor_id] = InvestorTracker()
        return self.per_investor[investor_id]

    def investor_ids(self) -> list[str]:
        return sorted(self.per_investor)

    def validate(self) -> None:
        if self.token_supply < ZERO:
            raise IntegrityError("token supply negative")
        if self.fund_value < ZERO:
            raise IntegrityError("fund value negative")
        self.treasury.validate()
        self.fee_schedule.validate()
        for tracker in self.per_investor.values():
            tracker.validate()


def seed_state(fund_value: FixedPoint, token_supply: FixedPoint,
               fee_schedule: FeeSchedule,
               holdings: Optional[dict[str, FixedPoint]] = None,
               treasury: Optional[Treasury] = None,
               seed_below_hwm: bool = True) -> FundState:
    """Build an initial state with NAV, HWM and the weighted-average benchmark
    all at the seeding price.

    Seed holdings count as entries at the boundary NAV == HWM, so under the
    investor-clubbed scheme they sit in the below-HWM bucket at the seed price.
    """
    nav = fund_value / token_supply
    state = FundState(
        fund_value=fund_value,
        token_supply=token_supply,
        nav=nav,
        hwm=nav,
        nav_wavg=to_fraction(nav),
        nav_prev=nav,
        fee_schedule=fee_schedule,
        treasury=treasury or Treasury(),
    )
    for investor_id, tokens in (holdings or {}).items():
        state.per_investor[investor_id] = InvestorTracker(
            total_tokens=tokens,
            tokens_below_hwm=tokens if seed_below_hwm else ZERO,
            nav_wavg_lhwm=nav if seed_below_hwm else None,
        )
    state.validate()
    return state
