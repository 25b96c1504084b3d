"""Time/energy model of a battery-powered LoRa sensor node.

Four reporting strategies are compared per hour of operation:

====  ==========================================  ============
case  phases run on the node                      payload (B)
====  ==========================================  ============
1     sensing, preprocessing, prediction, training  20
2     sensing, preprocessing, prediction            20 + 1024
3     sensing, preprocessing                        1024
4     sensing                                       2048
====  ==========================================  ============

The MCU stays awake while the radio transmits, so airtime is charged at
radio + MCU active power.  Time not spent active is charged at sleep power.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, TextIO

from .errors import FormatError, InfeasibleWorkloadError, InvalidInputError

log = logging.getLogger(__name__)

SECONDS_PER_HOUR = 3600.0
PHASES = ("sensing", "preprocessing", "prediction", "training")


def _default_phases() -> dict[str, float]:
    # prediction covers four instances at ~4 ms each
    return {"sensing": 0.50, "preprocessing": 0.010, "prediction": 4 * 0.004, "training": 0.008}


@dataclass(frozen=True)
class PowerProfile:
    mcu_active_mw: float = 110.9  # midpoint of 104.5-117.3 mW
    mcu_sleep_mw: float = 6.9
    lora_tx_mw: float = 174.1
    lora_bitrate_bps: float = 5470.0
    phase_durations_s: dict[str, float] = field(default_factory=_default_phases)
    # detailed airtime (Semtech formula); off by default
    detailed_airtime: bool = False
    spreading_factor: int = 7
    bandwidth_hz: float = 125_000.0
    coding_rate: int = 1  # 1 -> 4/5 ... 4 -> 4/8
    preamble_symbols: int = 8
    explicit_header: bool = True
    crc: bool = True

    def __post_init__(self) -> None:
        for name in ("mcu_active_mw", "mcu_sleep_mw", "lora_tx_mw", "lora_bitrate_bps", "bandwidth_hz"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise InvalidInputError(f"{name} must be a positive number, got {value!r}")
        missing = set(PHASES) - set(self.phase_durations_s)
        if missing:
            raise InvalidInputError(f"phase_durations_s missing {sorted(missing)}")
        for name, value in self.phase_durations_s.items():
            if not (isinstance(value, (int, float)) and value > 0):
                raise InvalidInputError(f"phase_durations_s.{name} must be positive, got {value!r}")
        if not 6 <= self.spreading_factor <= 12:
            raise InvalidInputError("spreading_factor must be in 6..12")
        if not 1 <= self.coding_rate <= 4:
            raise InvalidInputError("coding_rate must be in 1..4")


@dataclass(frozen=True)
class CaseSpec:
    case_id: int
    phases: tuple[str, ...]
    payload_bytes: int
    name: str = ""


CASES: dict[int, CaseSpec] = {
    1: CaseSpec(1, ("sensing", "preprocessing", "prediction", "training"), 20, "odl"),
    2: CaseSpec(2, ("sensing", "preprocessing", "prediction"), 20 + 1024, "prediction-only"),
    3: CaseSpec(3, ("sensing", "preprocessing"), 1024, "vibration-sensor"),
    4: CaseSpec(4, ("sensing",), 2048, "acceleration-sensor"),
}


@dataclass(frozen=True)
class CaseReport:
    case_id: int
    ops_per_hour: float
    active_seconds_per_hour: float
    energy_mwh_per_hour: float
    feasible: bool = True


def lora_airtime(payload_bytes: int, profile: PowerProfile = PowerProfile()) -> float:
    """Seconds on air for one packet."""
    if payload_bytes < 0:
        raise InvalidInputError("payload must be non-negative")
    if not profile.detailed_airtime:
        return 8.0 * payload_bytes / profile.lora_bitrate_bps
    sf = profile.spreading_factor
    t_sym = 2.0**sf / profile.bandwidth_hz
    low_dr = 1 if t_sym > 0.016 else 0
    ih = 0 if profile.explicit_header else 1
    num = 8 * payload_bytes - 4 * sf + 28 + 16 * int(profile.crc) - 20 * ih
    n_payload = 8 + max(math.ceil(num / (4 * (sf - 2 * low_dr))) * (profile.coding_rate + 4), 0)
    return (profile.preamble_symbols + 4.25) * t_sym + n_payload * t_sym


def per_op_cost(case: CaseSpec, profile: PowerProfile) -> tuple[float, float]:
    """(active seconds, energy in mW*s) spent by one operation."""
    compute = sum(profile.phase_durations_s[p] for p in case.phases)
    air = lora_airtime(case.payload_bytes, profile)
    energy = compute * profile.mcu_active_mw + air * (profile.lora_tx_mw + profile.mcu_active_mw)
    return compute + air, energy


def case_energy(
    case: CaseSpec | int,
    profile: PowerProfile = PowerProfile(),
    ops_per_hour: float = 1,
    *,
    check_feasible: bool = True,
) -> CaseReport:
    """Active time and energy for one hour at the given operation rate.

    With ``check_feasible=False`` workloads longer than an hour are
    extrapolated (no sleep time) instead of rejected.
    """
    if isinstance(case, int):
        case = CASES[case]
    if ops_per_hour < 0:
        raise InvalidInputError("ops_per_hour must be >= 0")
    t_op, e_op = per_op_cost(case, profile)
    active = ops_per_hour * t_op
    feasible = active <= SECONDS_PER_HOUR
    if not feasible and check_feasible:
        raise InfeasibleWorkloadError(
            f"case {case.case_id}: {ops_per_hour} ops/hour needs {active:.1f} s of active time per hour"
        )
    sleep = max(SECONDS_PER_HOUR - active, 0.0)
    energy_mws = ops_per_hour * e_op + sleep * profile.mcu_sleep_mw
    return CaseReport(case.case_id, ops_per_hour, active, energy_mws / SECONDS_PER_HOUR, feasible)


def memory_usage(n: int, N: int, m: int, K: int, bytes_per_value: int = 4) -> int:
    """Bytes for a shared alpha (n*N) plus K pairs of P (N*N) and beta (N*m)."""
    if min(n, N, m, K, bytes_per_value) < 1:
        raise InvalidInputError("all dimensions must be positive")
    return bytes_per_value * (n * N + K * N * N + K * N * m)


def workload_sweep(
    cases: Iterable[CaseSpec | int],
    profile: PowerProfile,
    ops_list: Sequence[float],
) -> list[CaseReport]:
    if not ops_list:
        raise InvalidInputError("ops_list must not be empty")
    rows = []
    for case in cases:
        for ops in ops_list:
            rep = case_energy(case, profile, ops, check_feasible=False)
            if not rep.feasible:
                log.warning(
                    "case %d at %g ops/hour exceeds one hour of active time; value is extrapolated",
                    rep.case_id,
                    ops,
                )
            rows.append(rep)
    return rows


SWEEP_HEADER = ("case", "ops_per_hour", "active_s", "energy_mwh")


def write_sweep_csv(rows: Iterable[CaseReport], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in rows:
        w.writerow([r.case_id, f"{r.ops_per_hour:g}", repr(r.active_seconds_per_hour), repr(r.energy_mwh_per_hour)])


def sweep_csv(rows: Iterable[CaseReport]) -> str:
    buf = io.StringIO()
    write_sweep_csv(rows, buf)
    return buf.getvalue()


# -- profile file ---------------------------------------------------------------

_FIELDS = {f.name: f for f in dataclasses.fields(PowerProfile)}


def profile_from_dict(data: dict) -> PowerProfile:
    if not isinstance(data, dict):
        raise FormatError("profile must be a JSON object")
    kwargs = {}
    for key, value in data.items():
        if key not in _FIELDS:
            raise FormatError(f"unknown profile field {key!r}")
        if key == "phase_durations_s":
            if not isinstance(value, dict):
                raise FormatError("field 'phase_durations_s' must be an object")
            merged = _default_phases()
            for phase, dur in value.items():
                if phase not in PHASES:
                    raise FormatError(f"unknown phase {phase!r} in field 'phase_durations_s'")
                if not isinstance(dur, (int, float)) or isinstance(dur, bool):
                    raise FormatError(f"field 'phase_durations_s.{phase}' must be a number")
                merged[phase] = float(dur)
            value = merged
        elif key in ("detailed_airtime", "explicit_header", "crc"):
            if not isinstance(value, bool):
                raise FormatError(f"field {key!r} must be true or false")
        elif not isinstance(value, (int, float)) or isinstance(value, bool):
            raise FormatError(f"field {key!r} must be a number")
        kwargs[key] = value
    try:
        return PowerProfile(**kwargs)
    except InvalidInputError as exc:
        raise FormatError(str(exc)) from exc


def load_profile(path: str | Path) -> PowerProfile:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed JSON: {exc}") from exc
    return profile_from_dict(data)


def profile_to_dict(profile: PowerProfile) -> dict:
    return dataclasses.asdict(profile)
