"""Human-readable and machine-readable tables for rebalance runs.

Two renderings of the same rows: an aligned text table for terminals and a
pipe-delimited form for downstream tooling.  Output is deterministic byte for
byte given the same reports.
"""

from __future__ import annotations

from typing import Optional

from .fixedpoint import ZERO, FixedPoint
from .orchestrator import RebalanceReport
from .state import SCHEME_A, FundState

_PLACES = 6  # display truncation; ledger values stay at full precision


def _fmt(value: Optional[FixedPoint]) -> str:
    if value is None:
        return "-"
    text = str(value)
    if "." in text:
        whole, frac = text.split(".")
        if len(frac) > _PLACES:
            text = whole + "." + frac[:_PLACES]
    return text


def _render(headers: list[str], rows: list[list[str]], delimited: bool) -> str:
    if delimited:
        lines = ["|".join(headers)]
        lines.extend("|".join(row) for row in rows)
        return "\n".join(lines) + "\n"
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    def line(cells: list[str]) -> str:
        return "  ".join(cell.rjust(widths[i]) for i, cell in enumerate(cells))
    lines = [line(headers), line(["-" * w for w in widths])]
    lines.extend(line(row) for row in rows)
    return "\n".join(lines) + "\n"


def input_table(reports: list[RebalanceReport], delimited: bool = False) -> str:
    """Per-event requested flows before netting."""
    headers = ["Event", "Time", "Fund-Value", "Dpst-USD", "Wdrw-Tokens",
               "Wdrw-USD", "Net-Dir", "Net-Amount"]
    rows = []
    for i, r in enumerate(reports):
        n = r.netting
        rows.append([
            str(i), str(r.event_time), _fmt(r.fund_value_before),
            _fmt(n.total_dpst_usd), _fmt(n.total_wdrw_tokens),
            _fmt(n.total_wdrw_usd),
            "DPST" if n.is_net_deposit else "WDRW",
            _fmt(n.net_amount_event),
        ])
    return _render(headers, rows, delimited)


def accept_table(reports: list[RebalanceReport], delimited: bool = False) -> str:
    """Per-event accepted flows, fees on flows, and payouts."""
    headers = ["Event", "Dpst-Accept", "Dpst-Fee", "Mint-Tokens",
               "Burn-Tokens", "Payout-Gross", "Rdmpt-Fee", "Payout-Net",
               "Halt"]
    rows = []
    for i, r in enumerate(reports):
        rows.append([
            str(i), _fmt(r.accepted_deposit_usd_net), _fmt(r.deposit_fee_usd),
            _fmt(r.deposit_mint_tokens), _fmt(r.withdraw_burn_tokens),
            _fmt(r.payout_usd_gross), _fmt(r.redemption_fee_usd),
            _fmt(r.payout_usd_net), r.halt or "-",
        ])
    return _render(headers, rows, delimited)


def system_table(reports: list[RebalanceReport], delimited: bool = False) -> str:
    """Per-event ledger movement: supply, fund value, treasury actions."""
    headers = ["Event", "Supply-Before", "Supply-After", "FV-Before",
               "FV-After", "Trsy-Mint", "Trsy-Burn", "Slippage"]
    rows = []
    for i, r in enumerate(reports):
        slip = r.slippage.slippage if r.slippage is not None else None
        rows.append([
            str(i), _fmt(r.supply_before), _fmt(r.supply_after),
            _fmt(r.fund_value_before), _fmt(r.fund_value_after),
            _fmt(r.treasury_mint_tokens), _fmt(r.treasury_burn_tokens),
            _fmt(slip),
        ])
    return _render(headers, rows, delimited)


def scheme_table(reports: list[RebalanceReport], state: FundState,
                 delimited: bool = False) -> str:
    """Per-event performance-fee detail in the active scheme's terms."""
    scheme = reports[0].scheme if reports else SCHEME_A
    if scheme == SCHEME_A:
        headers = ["Event", "Total-Tokens", "Buy-Tokens", "Sell-Tokens",
                   "NAV", "HWM", "Amount-BHWM", "Perf-Fee",
                   "Fee-Tokens-Issued"]
    else:
        headers = ["Event", "Total-Tokens", "Buy-Tokens", "Sell-Tokens",
                   "NAV", "WNAV", "WNAV-PB", "Perf-Fee", "Rdmpt-Fee",
                   "Fees-Plough-Back", "Fee-Tokens-Issued"]
    rows = []
    for i, r in enumerate(reports):
        a = r.fee_assessment
        common = [str(i), _fmt(r.supply_after), _fmt(r.deposit_mint_tokens),
                  _fmt(r.withdraw_burn_tokens), _fmt(r.nav_pre_fee)]
        if scheme == SCHEME_A:
            bhwm = ZERO
            rows.append(common + [
                _fmt(None), _fmt(bhwm), _fmt(a.perf_fee_fund_usd),
                _fmt(a.fee_tokens_minted),
            ])
        else:
            rows.append(common + [
                _fmt(None), _fmt(None), _fmt(a.perf_fee_fund_usd),
                _fmt(a.perf_fee_redemption_usd), _fmt(a.plough_back_usd),
                _fmt(a.fee_tokens_minted),
            ])
    if scheme == SCHEME_A:
        bhwm_total = ZERO
        for tracker in state.per_investor.values():
            bhwm_total = bhwm_total + tracker.tokens_below_hwm
        for row in rows:
            row[5] = _fmt(state.hwm)
            row[6] = _fmt(bhwm_total)
    else:
        for row in rows:
            row[5] = _fmt(state.nav_wavg_fp())
            row[6] = _fmt(state.nav_wavg_pb)
    return _render(headers, rows, delimited)


def full_report(reports: list[RebalanceReport], state: FundState,
                scenario_hash: str, engine_version: str,
                delimited: bool = False) -> str:
    sections = [
        f"engine: {engine_version}",
        f"scenario: {scenario_hash or '-'}",
        f"scheme: {reports[0].scheme if reports else '-'}",
        "",
        "== inputs ==", input_table(reports, delimited),
        "== accepted flows ==", accept_table(reports, delimited),
        "== ledger ==", system_table(reports, delimited),
        "== performance fees ==", scheme_table(reports, state, delimited),
        "== final state ==",
        f"fund_value: {_fmt(state.fund_value)}",
        f"token_supply: {_fmt(state.token_supply)}",
        f"nav: {_fmt(state.nav)}",
        f"treasury_stable: {_fmt(state.treasury.stable_balance)}",
        f"treasury_tokens: {_fmt(state.treasury.alpha_tokens)}",
    ]
    return "\n".join(sections) + "\n"
