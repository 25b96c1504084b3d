import io
import json

import numpy as np
import pytest

from odlkit.energymodel import (
    CASES,
    SWEEP_HEADER,
    PowerProfile,
    case_energy,
    load_profile,
    lora_airtime,
    memory_usage,
    per_op_cost,
    profile_from_dict,
    profile_to_dict,
    workload_sweep,
    write_sweep_csv,
)
from odlkit.errors import FormatError, InfeasibleWorkloadError, InvalidInputError


def test_memory_formula():
    assert memory_usage(256, 32, 256, 4) == 180_224 == 176 * 1024
    assert memory_usage(1, 1, 1, 1) == 12
    assert memory_usage(256, 32, 256, 4, bytes_per_value=8) == 2 * 180_224


def test_simple_airtime():
    assert lora_airtime(20) == pytest.approx(160 / 5470)
    assert lora_airtime(0) == 0.0


def test_semtech_airtime_reference():
    # SF7 / 125 kHz / CR 4/5 / 8 preamble / explicit header / CRC, 20 bytes: 56.576 ms
    p = PowerProfile(detailed_airtime=True)
    assert lora_airtime(20, p) == pytest.approx(0.056576, abs=1e-9)


def test_hand_computed_case1():
    p = PowerProfile()
    t, e = per_op_cost(CASES[1], p)
    air = 160 / 5470
    compute = 0.5 + 0.01 + 0.016 + 0.008
    assert t == pytest.approx(compute + air)
    assert e == pytest.approx(compute * 110.9 + air * (174.1 + 110.9))
    rep = case_energy(1, p, 10)
    expect = (10 * e + (3600 - 10 * t) * 6.9) / 3600
    assert rep.energy_mwh_per_hour == pytest.approx(expect)


def test_zero_workload_is_pure_sleep():
    for c in CASES:
        assert case_energy(c, PowerProfile(), 0).energy_mwh_per_hour == pytest.approx(6.9)


@pytest.mark.parametrize("case", [1, 2, 3, 4])
def test_energy_monotone_in_workload(case):
    ops = [0, 1, 2, 5, 10, 60, 100, 600, 1000]  # case 4 saturates near 1030/h
    e = [case_energy(case, PowerProfile(), o).energy_mwh_per_hour for o in ops]
    assert all(b > a for a, b in zip(e, e[1:]))


def test_transmit_heavy_cases_cost_more():
    # case 1 sends least and case 4 most; that ordering survives any feasible rate
    for ops in (1, 60, 600):
        e = {c: case_energy(c, PowerProfile(), ops).energy_mwh_per_hour for c in CASES}
        assert e[1] == min(e.values()) and e[4] == max(e.values())


def test_infeasible_workload():
    with pytest.raises(InfeasibleWorkloadError):
        case_energy(4, PowerProfile(), 3600)
    rep = case_energy(4, PowerProfile(), 3600, check_feasible=False)
    assert not rep.feasible and rep.active_seconds_per_hour > 3600


def test_sweep_csv_header_and_rows():
    buf = io.StringIO()
    rows = workload_sweep([1, 3], PowerProfile(), [1, 10])
    write_sweep_csv(rows, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(SWEEP_HEADER)
    assert len(lines) == 5
    with pytest.raises(InvalidInputError):
        workload_sweep([1], PowerProfile(), [])


def test_profile_round_trip_and_errors(tmp_path):
    p = PowerProfile(mcu_active_mw=100.0)
    path = tmp_path / "p.json"
    path.write_text(json.dumps(profile_to_dict(p)))
    assert load_profile(path) == p
    with pytest.raises(FormatError, match="lora_power"):
        profile_from_dict({"lora_power": 3})
    with pytest.raises(FormatError, match="mcu_sleep_mw"):
        profile_from_dict({"mcu_sleep_mw": -1})


def test_profile_validation():
    with pytest.raises(InvalidInputError):
        PowerProfile(lora_tx_mw=0)
    with pytest.raises(InvalidInputError):
        PowerProfile(phase_durations_s={"sensing": 1.0})
    with pytest.raises(InvalidInputError):
        case_energy(1, PowerProfile(), -1)
