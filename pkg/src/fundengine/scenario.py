"""Scenario file ingestion, state snapshots, and report tables.

Scenario files are a line-oriented text format with exact decimal strings, so
replays are platform independent.  Sections start with ``[config]``,
``[state]`` or ``[event]``; the rest are ``key = value`` lines, with
``deposit``/``withdraw``/``holding`` repeatable as ``key = investor amount``.
Exponent notation is rejected on ingestion.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

from fractions import Fraction

from .errors import SchemaError
from .fixedpoint import ZERO, FixedPoint, to_fraction
from .netting import DepositRequest, FlowCaps, WithdrawRequest
from .orchestrator import RebalanceEventInput
from .state import (SCHEMES, FeeSchedule, FundState, InvestorTracker,
                    Treasury, seed_state)

ENGINE_VERSION = "fundengine-0.1.0"
SNAPSHOT_VERSION = 1

_CONFIG_KEYS = {
    "scheme", "perf_fee_pct", "mgmt_fee_annual_pct", "deposit_fee_pct",
    "redemption_fee_pct", "hwm_liability_ratio", "oracle_mode",
    "carry_unfilled", "exact_dilution", "max_deposit_usd", "max_withdraw_usd",
    "tolerance_pct",
}
_STATE_KEYS = {"fund_value", "token_supply", "treasury_stable",
               "treasury_tokens", "hwm", "nav_wavg", "time", "holding"}
_EVENT_KEYS = {"time", "fund_value", "proceeds", "max_deposit", "max_withdraw",
               "tolerance", "deposit", "withdraw"}


@dataclass
class ScenarioConfig:
    scheme: str = "B"
    fee_schedule: FeeSchedule = field(default_factory=FeeSchedule)
    oracle_mode: str = "free_ride"
    carry_unfilled: bool = True
    exact_dilution: bool = False
    default_caps: FlowCaps = field(default_factory=lambda: FlowCaps(ZERO, ZERO))
    default_tolerance: FixedPoint = ZERO


@dataclass
class Scenario:
    config: ScenarioConfig
    initial_state: FundState
    events: list[RebalanceEventInput]
    source_hash: str = ""


def ingest(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    scenario = parse_scenario(text)
    scenario.source_hash = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return scenario


def parse_scenario(text: str) -> Scenario:
    errors: list[str] = []
    sections: list[tuple[str, int, list[tuple[int, str, str]]]] = []
    current: Optional[tuple[str, int, list]] = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in ("config", "state", "event"):
                errors.append(f"line {lineno}: unknown section [{name}]")
                current = None
                continue
            current = (name, lineno, [])
            sections.append(current)
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        if current is None:
            errors.append(f"line {lineno}: key outside any section")
            continue
        key, _, value = line.partition("=")
        current[2].append((lineno, key.strip(), value.strip()))

    config = ScenarioConfig()
    state_kwargs: dict = {}
    holdings: dict[str, FixedPoint] = {}
    events: list[RebalanceEventInput] = []
    seq_counter = 0
    seen_config = seen_state = False

    def parse_fp(lineno: int, value: str) -> FixedPoint:
        try:
            return FixedPoint(value)
        except ValueError as exc:
            errors.append(f"line {lineno}: {exc}")
            return ZERO

    for name, start, items in sections:
        if name == "config":
            if seen_config:
                errors.append(f"line {start}: duplicate [config]")
            seen_config = True
            for lineno, key, value in items:
                if key not in _CONFIG_KEYS:
                    errors.append(f"line {lineno}: unknown config key '{key}'")
                    continue
                if key == "scheme":
                    if value not in SCHEMES:
                        errors.append(f"line {lineno}: unknown scheme '{value}'")
                    else:
                        config.scheme = value
                elif key == "oracle_mode":
                    if value not in ("free_ride", "liability_upfront"):
                        errors.append(f"line {lineno}: unknown oracle mode '{value}'")
                    else:
                        config.oracle_mode = value
                elif key in ("carry_unfilled", "exact_dilution"):
                    if value not in ("true", "false"):
                        errors.append(f"line {lineno}: '{key}' must be true or false")
                    else:
                        setattr(config, key, value == "true")
                elif key == "max_deposit_usd":
                    config.default_caps = FlowCaps(parse_fp(lineno, value),
                                                  config.default_caps.max_withdraw_usd)
                elif key == "max_withdraw_usd":
                    config.default_caps = FlowCaps(config.default_caps.max_deposit_usd,
                                                   parse_fp(lineno, value))
                elif key == "tolerance_pct":
                    config.default_tolerance = parse_fp(lineno, value)
                else:
                    setattr(config.fee_schedule, key, parse_fp(lineno, value))
        elif name == "state":
            if seen_state:
                errors.append(f"line {start}: duplicate [state]")
            seen_state = True
            for lineno, key, value in items:
                if key not in _STATE_KEYS:
                    errors.append(f"line {lineno}: unknown state key '{key}'")
                elif key == "holding":
                    parts = value.split()
                    if len(parts) != 2:
                        errors.append(f"line {lineno}: holding wants 'investor amount'")
                    else:
                        holdings[parts[0]] = parse_fp(lineno, parts[1])
                elif key == "time":
                    try:
                        state_kwargs["time"] = int(value)
                    except ValueError:
                        errors.append(f"line {lineno}: time must be an integer")
                else:
                    state_kwargs[key] = parse_fp(lineno, value)
        else:  # event
            ev: dict = {"deposits": [], "withdrawals": []}
            for lineno, key, value in items:
                if key not in _EVENT_KEYS:
                    errors.append(f"line {lineno}: unknown event key '{key}'")
                elif key == "time":
                    try:
                        ev["time"] = int(value)
                    except ValueError:
                        errors.append(f"line {lineno}: time must be an integer")
                elif key in ("deposit", "withdraw"):
                    parts = value.split()
                    if len(parts) != 2:
                        errors.append(f"line {lineno}: {key} wants 'investor amount'")
                        continue
                    amount = parse_fp(lineno, parts[1])
                    if amount <= ZERO:
                        errors.append(f"line {lineno}: {key} amount must be positive")
                        continue
                    if key == "deposit":
                        ev["deposits"].append((parts[0], amount))
                    else:
                        ev["withdrawals"].append((parts[0], amount))
                else:
                    ev[key] = parse_fp(lineno, value)
            if "time" not in ev:
                errors.append(f"line {start}: event missing 'time'")
                ev["time"] = -1
            if "fund_value" not in ev:
                errors.append(f"line {start}: event missing 'fund_value'")
                ev["fund_value"] = ZERO
            caps = FlowCaps(ev.get("max_deposit", config.default_caps.max_deposit_usd),
                            ev.get("max_withdraw", config.default_caps.max_withdraw_usd))
            deposits = []
            for inv, amount in ev["deposits"]:
                deposits.append(DepositRequest(inv, amount, seq_counter))
                seq_counter += 1
            withdrawals = []
            for inv, amount in ev["withdrawals"]:
                withdrawals.append(WithdrawRequest(inv, amount, seq_counter))
                seq_counter += 1
            events.append(RebalanceEventInput(
                time=ev["time"],
                market_fund_value=ev["fund_value"],
                caps=caps,
                tolerance_pct=ev.get("tolerance", config.default_tolerance),
                rebalance_proceeds=ev.get("proceeds"),
                deposits=deposits,
                withdrawals=withdrawals,
            ))

    if not seen_state:
        errors.append("missing [state] section")
    times = [ev.time for ev in events]
    for a, b in zip(times, times[1:]):
        if b <= a:
            errors.append(f"event times not strictly increasing: {a} then {b}")

    if errors:
        raise SchemaError(errors)

    config.fee_schedule.validate()
    initial = seed_state(
        fund_value=state_kwargs["fund_value"],
        token_supply=state_kwargs["token_supply"],
        fee_schedule=config.fee_schedule,
        holdings=holdings,
        treasury=Treasury(state_kwargs.get("treasury_stable", ZERO),
                          state_kwargs.get("treasury_tokens", ZERO)),
    )
    if "hwm" in state_kwargs:
        initial.hwm = state_kwargs["hwm"]
    if "nav_wavg" in state_kwargs:
        initial.nav_wavg = to_fraction(state_kwargs["nav_wavg"])
    if "time" in state_kwargs:
        initial.last_event_time = state_kwargs["time"]
    return Scenario(config=config, initial_state=initial, events=events)


# -- state snapshots --------------------------------------------------------

def _fp_out(value: Optional[FixedPoint]):
    return None if value is None else str(value.m)


def _fp_in(value) -> Optional[FixedPoint]:
    return None if value is None else FixedPoint.from_mantissa(int(value))


def state_to_dict(state: FundState) -> dict:
    return {
        "fund_value": _fp_out(state.fund_value),
        "token_supply": _fp_out(state.token_supply),
        "nav": _fp_out(state.nav),
        "hwm": _fp_out(state.hwm),
        "last_hwm_rebalance_index": state.last_hwm_rebalance_index,
        "rebalance_count": state.rebalance_count,
        "nav_wavg": [str(state.nav_wavg.numerator), str(state.nav_wavg.denominator)],
        "nav_prev": _fp_out(state.nav_prev),
        "nav_wavg_pb": _fp_out(state.nav_wavg_pb),
        "fee_collector_tokens": _fp_out(state.fee_collector_tokens),
        "last_event_time": state.last_event_time,
        "fee_schedule": {
            "mgmt_fee_annual_pct": _fp_out(state.fee_schedule.mgmt_fee_annual_pct),
            "perf_fee_pct": _fp_out(state.fee_schedule.perf_fee_pct),
            "deposit_fee_pct": _fp_out(state.fee_schedule.deposit_fee_pct),
            "redemption_fee_pct": _fp_out(state.fee_schedule.redemption_fee_pct),
            "hwm_liability_ratio": _fp_out(state.fee_schedule.hwm_liability_ratio),
        },
        "treasury": {
            "stable_balance": _fp_out(state.treasury.stable_balance),
            "alpha_tokens": _fp_out(state.treasury.alpha_tokens),
        },
        "per_investor": {
            inv: {
                "total_tokens": _fp_out(t.total_tokens),
                "tokens_below_hwm": _fp_out(t.tokens_below_hwm),
                "nav_wavg_lhwm": _fp_out(t.nav_wavg_lhwm),
            }
            for inv, t in sorted(state.per_investor.items())
        },
        "pending_deposits": [
            {"investor_id": d.investor_id, "amount_usd": _fp_out(d.amount_usd), "seq": d.seq}
            for d in state.pending_deposits
        ],
        "pending_withdrawals": [
            {"investor_id": w.investor_id, "tokens": _fp_out(w.tokens), "seq": w.seq}
            for w in state.pending_withdrawals
        ],
    }


def state_from_dict(data: dict) -> FundState:
    sched = FeeSchedule(**{k: _fp_in(v) for k, v in data["fee_schedule"].items()})
    state = FundState(
        fund_value=_fp_in(data["fund_value"]),
        token_supply=_fp_in(data["token_supply"]),
        nav=_fp_in(data["nav"]),
        hwm=_fp_in(data["hwm"]),
        fee_schedule=sched,
        last_hwm_rebalance_index=data["last_hwm_rebalance_index"],
        rebalance_count=data["rebalance_count"],
        nav_wavg=Fraction(int(data["nav_wavg"][0]), int(data["nav_wavg"][1])),
        nav_prev=_fp_in(data["nav_prev"]),
        nav_wavg_pb=_fp_in(data["nav_wavg_pb"]),
        fee_collector_tokens=_fp_in(data["fee_collector_tokens"]),
        last_event_time=data["last_event_time"],
        treasury=Treasury(_fp_in(data["treasury"]["stable_balance"]),
                          _fp_in(data["treasury"]["alpha_tokens"])),
    )
    for inv, t in data["per_investor"].items():
        state.per_investor[inv] = InvestorTracker(
            total_tokens=_fp_in(t["total_tokens"]),
            tokens_below_hwm=_fp_in(t["tokens_below_hwm"]),
            nav_wavg_lhwm=_fp_in(t["nav_wavg_lhwm"]),
        )
    state.pending_deposits = [
        DepositRequest(d["investor_id"], _fp_in(d["amount_usd"]), d["seq"])
        for d in data["pending_deposits"]
    ]
    state.pending_withdrawals = [
        WithdrawRequest(w["investor_id"], _fp_in(w["tokens"]), w["seq"])
        for w in data["pending_withdrawals"]
    ]
    return state


def dump_snapshot(state: FundState) -> str:
    body = state_to_dict(state)
    canonical = json.dumps(body, sort_keys=True, separators=(",", ":"))
    checksum = hashlib.sha256(canonical.encode("utf-8")).hexdigest()
    return json.dumps({
        "snapshot_version": SNAPSHOT_VERSION,
        "engine_version": ENGINE_VERSION,
        "checksum": checksum,
        "state": body,
    }, sort_keys=True, indent=2) + "\n"


def load_snapshot(text: str) -> FundState:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"snapshot is not valid JSON: {exc}")
    if doc.get("snapshot_version") != SNAPSHOT_VERSION:
        raise SchemaError(
            f"snapshot version mismatch: {doc.get('snapshot_version')} != {SNAPSHOT_VERSION}")
    body = doc.get("state")
    canonical = json.dumps(body, sort_keys=True, separators=(",", ":"))
    checksum = hashlib.sha256(canonical.encode("utf-8")).hexdigest()
    if checksum != doc.get("checksum"):
        raise SchemaError("snapshot checksum mismatch: refusing to load")
    return state_from_dict(body)
