"""Request aggregation, net-direction flags, capping, and fill allocation.

Deposits are filled first-in-first-out by arrival sequence; withdrawals are
filled pro rata so every redeemer gets the same fraction of their request.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DegenerateInput
from .fixedpoint import FP_ONE, ZERO, FixedPoint, fp_min

@dataclass(frozen=True)
class DepositRequest:
    investor_id: str
    amount_usd: FixedPoint
    seq: int


@dataclass(frozen=True)
class WithdrawRequest:
    investor_id: str
    tokens: FixedPoint
    seq: int


@dataclass(frozen=True)
class FlowCaps:
    max_deposit_usd: FixedPoint
    max_withdraw_usd: FixedPoint


@dataclass
class NettingResult:
    total_dpst_usd: FixedPoint = ZERO
    total_wdrw_tokens: FixedPoint = ZERO
    total_wdrw_usd: FixedPoint = ZERO
    is_net_deposit: bool = False
    is_net_withdraw: bool = False
    net_dpst_or_wdrw: FixedPoint = ZERO
    net_amount_event: FixedPoint = ZERO
    deposit_accept_ratio: FixedPoint = FP_ONE
    withdraw_accept_ratio: FixedPoint = FP_ONE
    accepted_deposits: list[tuple[DepositRequest, FixedPoint]] = field(default_factory=list)
    accepted_withdrawals: list[tuple[WithdrawRequest, FixedPoint]] = field(default_factory=list)


def net_per_investor(deposits: list[DepositRequest],
                     withdrawals: list[WithdrawRequest],
                     nav: FixedPoint) -> tuple[list[DepositRequest], list[WithdrawRequest]]:
    """Collapse each investor's requests to a single net deposit or withdrawal.

    An investor contributes at most one direction per rebalance window; the
    opposite leg is netted out at the current NAV.  Requests keep the earliest
    arrival sequence the investor used.
    """
    dep_by_inv: dict[str, list[DepositRequest]] = {}
    wdr_by_inv: dict[str, list[WithdrawRequest]] = {}
    for d in deposits:
        dep_by_inv.setdefault(d.investor_id, []).append(d)
    for w in withdrawals:
        wdr_by_inv.setdefault(w.investor_id, []).append(w)

    out_deps: list[DepositRequest] = []
    out_wdrs: list[WithdrawRequest] = []
    for inv in sorted(set(dep_by_inv) | set(wdr_by_inv)):
        dep_usd = ZERO
        wdr_tok = ZERO
        seqs = []
        for d in dep_by_inv.get(inv, []):
            dep_usd = dep_usd + d.amount_usd
            seqs.append(d.seq)
        for w in wdr_by_inv.get(inv, []):
            wdr_tok = wdr_tok + w.tokens
            seqs.append(w.seq)
        seq = min(seqs)
        wdr_usd = wdr_tok * nav
        if dep_usd >= wdr_usd:
            net = dep_usd - wdr_usd
            if net > ZERO:
                out_deps.append(DepositRequest(inv, net, seq))
        else:
            net_tok = wdr_tok - dep_usd / nav
            if net_tok > ZERO:
                out_wdrs.append(WithdrawRequest(inv, net_tok, seq))
    out_deps.sort(key=lambda r: r.seq)
    out_wdrs.sort(key=lambda r: r.seq)
    return out_deps, out_wdrs


def aggregate_requests(deposits: list[DepositRequest],
                       withdrawals: list[WithdrawRequest]) -> tuple[FixedPoint, FixedPoint]:
    total_dpst = ZERO
    for d in deposits:
        total_dpst = total_dpst + d.amount_usd
    total_wdrw = ZERO
    for w in withdrawals:
        total_wdrw = total_wdrw + w.tokens
    return total_dpst, total_wdrw


def net_direction(total_dpst_usd: FixedPoint, total_wdrw_tokens: FixedPoint,
                  nav: FixedPoint) -> tuple[bool, bool, FixedPoint]:
    """Ties (deposits exactly covering withdrawals) resolve to the deposit branch."""
    wdrw_usd = total_wdrw_tokens * nav
    net = total_dpst_usd - wdrw_usd
    is_deposit = total_dpst_usd >= wdrw_usd
    return is_deposit, not is_deposit, net


def net_amount_event(is_net_deposit: bool, net_dpst_or_wdrw: FixedPoint,
                     caps: FlowCaps) -> FixedPoint:
    if caps.max_deposit_usd < ZERO or caps.max_withdraw_usd < ZERO:
        raise DegenerateInput("flow caps must be non-negative")
    if is_net_deposit:
        return fp_min(net_dpst_or_wdrw, caps.max_deposit_usd)
    return -fp_min(abs(net_dpst_or_wdrw), caps.max_withdraw_usd)


def allocate_deposits_fifo(deposits: list[DepositRequest],
                           net_amount: FixedPoint,
                           total_wdrw_usd: FixedPoint
                           ) -> tuple[list[tuple[DepositRequest, FixedPoint]], FixedPoint]:
    """Fill deposits in arrival order up to capacity |net amount| + withdraw USD.

    The marginal request is filled partially so the cumulative acceptance
    lands exactly on capacity; later requests get zero.
    """
    capacity = abs(net_amount) + abs(total_wdrw_usd)
    total_requested = ZERO
    for d in deposits:
        total_requested = total_requested + d.amount_usd

    accepted: list[tuple[DepositRequest, FixedPoint]] = []
    remaining = capacity
    for d in sorted(deposits, key=lambda r: r.seq):
        take = fp_min(d.amount_usd, remaining)
        if take < ZERO:
            take = ZERO
        accepted.append((d, take))
        remaining = remaining - take

    if total_requested.is_zero:
        ratio = FP_ONE
    else:
        ratio = fp_min(capacity / total_requested, FP_ONE)
    return accepted, ratio


def allocate_withdrawals_prorata(withdrawals: list[WithdrawRequest],
                                 net_amount: FixedPoint,
                                 total_dpst_usd: FixedPoint,
                                 nav: FixedPoint
                                 ) -> tuple[list[tuple[WithdrawRequest, FixedPoint]], FixedPoint]:
    """Every withdrawal is filled at the same ratio, rounded down per request."""
    total_wdrw_tokens = ZERO
    for w in withdrawals:
        total_wdrw_tokens = total_wdrw_tokens + w.tokens
    if total_wdrw_tokens.is_zero:
        return [], FP_ONE

    wdrw_usd = total_wdrw_tokens * nav
    ratio = fp_min((abs(net_amount) + total_dpst_usd) / wdrw_usd, FP_ONE)
    accepted = [(w, ratio * w.tokens) for w in sorted(withdrawals, key=lambda r: r.seq)]
    return accepted, ratio


def run_netting(deposits: list[DepositRequest],
                withdrawals: list[WithdrawRequest],
                nav: FixedPoint,
                caps: FlowCaps) -> NettingResult:
    """Full step-7 pipeline over an already per-investor-netted queue."""
    result = NettingResult()
    result.total_dpst_usd, result.total_wdrw_tokens = aggregate_requests(deposits, withdrawals)
    result.total_wdrw_usd = result.total_wdrw_tokens * nav
    result.is_net_deposit, result.is_net_withdraw, result.net_dpst_or_wdrw = net_direction(
        result.total_dpst_usd, result.total_wdrw_tokens, nav)
    result.net_amount_event = net_amount_event(result.is_net_deposit,
                                               result.net_dpst_or_wdrw, caps)
    if result.is_net_deposit:
        result.accepted_deposits, result.deposit_accept_ratio = allocate_deposits_fifo(
            deposits, result.net_amount_event, result.total_wdrw_usd)
        # Withdrawals are fully covered in the deposit branch.
        result.accepted_withdrawals = [(w, w.tokens)
                                       for w in sorted(withdrawals, key=lambda r: r.seq)]
        result.withdraw_accept_ratio = FP_ONE
    else:
        result.accepted_withdrawals, result.withdraw_accept_ratio = allocate_withdrawals_prorata(
            withdrawals, result.net_amount_event, result.total_dpst_usd, nav)
        # Deposits are fully absorbed in the withdraw branch.
        result.accepted_deposits = [(d, d.amount_usd)
                                    for d in sorted(deposits, key=lambda r: r.seq)]
        result.deposit_accept_ratio = FP_ONE
    return result
