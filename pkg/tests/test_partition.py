from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from secmodel.partition import (
    Mapping,
    PartitionError,
    bus_load,
    cpu_utilization,
    estimate,
    mac_overhead_ratio,
    path_latency,
)
from support import FIRMWARE, bundled_model, model_of

REL = 1e-9


def one_bus(mac: int = 0, size: int = 8, rate: int = 100, capacity: int = 500_000, cost: int = 0) -> Mapping:
    return Mapping.from_model(
        model_of(
            f"""
task Src cost {cost} rate 1
task Dst cost 0 rate 1
channel frames data Src -> Dst
node CPU cpu 100000000
node CAN bus {capacity}
map task Src -> CPU
map task Dst -> CPU
map channel frames -> CAN size {size} rate {rate}{f" mac {mac}" if mac else ""}
"""
        )
    )


def one_cpu(crypto: int = 0) -> Mapping:
    return Mapping.from_model(
        model_of(
            f"""
task T cost 1000000 rate 10
node CPU cpu 100000000
node Idle cpu 100000000
map task T -> CPU{f" crypto {crypto}" if crypto else ""}
"""
        )
    )


# --- hand-computed scenarios --------------------------------------------------
# bus load = (size + mac) * 8 bit * rate / capacity: 8 * 8 * 100 / 500000 = 0.0128


def test_bus_load_without_mac():
    assert bus_load(one_bus(), "CAN") == pytest.approx(0.0128, rel=REL)


def test_bus_load_with_mac():
    assert bus_load(one_bus(mac=4), "CAN") == pytest.approx(0.0192, rel=REL)


def test_mac_overhead_ratio_is_exact():
    ratio = mac_overhead_ratio(one_bus(mac=4), "CAN")
    assert ratio == Fraction(3, 2)
    assert ratio == 1.5


def test_cpu_utilization():
    assert cpu_utilization(one_cpu(), "CPU") == pytest.approx(0.1, rel=REL)
    assert cpu_utilization(one_cpu(crypto=1_000_000), "CPU") == pytest.approx(0.2, rel=REL)
    assert cpu_utilization(one_cpu(), "Idle") == 0.0


def test_path_latency():
    assert path_latency(one_bus(), "frames") == pytest.approx(0.000128, rel=REL)
    assert path_latency(one_bus(mac=4), "frames") == pytest.approx(0.000192, rel=REL)


def test_two_bus_path_adds_transfer_times():
    m = Mapping.from_model(
        model_of(
            """
task S cost 0 rate 1
task D cost 0 rate 1
channel c data S -> D
node CPU cpu 1000000
node B1 bus 500000
node B2 bus 1000000
map task S -> CPU
map channel c -> B1, B2 size 8 rate 100
"""
        )
    )
    assert path_latency(m, "c") == pytest.approx(64 / 500_000 + 64 / 1_000_000, rel=REL)


def test_source_execution_counts_toward_latency():
    assert path_latency(one_bus(cost=100_000), "frames") == pytest.approx(0.000128 + 0.001, rel=REL)


def test_two_channels_on_one_bus_add_up():
    m = Mapping.from_model(
        model_of(
            """
node CAN bus 500000
map channel a -> CAN size 8 rate 100
map channel b -> CAN size 4 rate 50 mac 4
"""
        )
    )
    assert bus_load(m, "CAN") == pytest.approx(0.0128 + 0.0064, rel=REL)


def test_unknown_resources():
    with pytest.raises(PartitionError):
        bus_load(one_bus(), "CPU")
    with pytest.raises(PartitionError):
        cpu_utilization(one_bus(), "CAN")
    with pytest.raises(PartitionError):
        path_latency(one_bus(), "nope")
    with pytest.raises(PartitionError):
        mac_overhead_ratio(Mapping.from_model(model_of("node CAN bus 1\n")), "CAN")


def test_firmware_estimate_is_consistent():
    rep = estimate(bundled_model(FIRMWARE))
    assert rep.bus_loads["MainCAN"] == pytest.approx((8 * 1 + 12 * 100) * 8 / 500_000, rel=REL)
    assert rep.utilizations["CPU_ECU"] == pytest.approx((100_000 * 1 + 480_000 * 100) / 1e8, rel=REL)
    assert rep.overloaded == [] and rep.diagnostics == []
    assert "no contention" in rep.to_json()["assumption"]


def test_overload_is_a_warning():
    rep = estimate(model_of("node CAN bus 100\nmap channel a -> CAN size 8 rate 100\n"))
    assert rep.overloaded == ["CAN"]
    (d,) = rep.diagnostics
    assert not d.is_error and "overloaded" in d.message


# --- properties -----------------------------------------------------------------

sizes = st.integers(1, 64)
rates = st.integers(1, 10_000)
caps = st.integers(1_000, 10_000_000)
macs = st.integers(0, 16)


def bus_model(channels, capacity):
    lines = [f"node CAN bus {capacity}"]
    for i, (size, rate, mac) in enumerate(channels):
        lines.append(f"map channel c{i} -> CAN size {size} rate {rate}" + (f" mac {mac}" if mac else ""))
    return Mapping.from_model(model_of("\n".join(lines) + "\n"))


chans = st.lists(st.tuples(sizes, rates, macs), min_size=1, max_size=5)


@given(chans, caps)
def test_load_is_linear_in_channels(channels, capacity):
    total = bus_load(bus_model(channels, capacity), "CAN")
    parts = sum(bus_load(bus_model([c], capacity), "CAN") for c in channels)
    assert total == pytest.approx(parts, rel=REL)


@given(chans, caps, st.integers(2, 5))
def test_load_scales_with_rate_and_inversely_with_capacity(channels, capacity, k):
    base = bus_load(bus_model(channels, capacity), "CAN")
    faster = bus_load(bus_model([(s, r * k, m) for s, r, m in channels], capacity), "CAN")
    wider = bus_load(bus_model(channels, capacity * k), "CAN")
    assert faster == pytest.approx(base * k, rel=REL)
    assert wider == pytest.approx(base / k, rel=REL)


@given(sizes, rates, caps, macs, st.integers(1, 8))
def test_mac_bytes_never_reduce_load(size, rate, capacity, mac, extra):
    lo = bus_load(bus_model([(size, rate, mac)], capacity), "CAN")
    hi = bus_load(bus_model([(size, rate, mac + extra)], capacity), "CAN")
    assert hi > lo


@given(sizes, rates, caps)
def test_zero_mac_overhead_is_identity(size, rate, capacity):
    assert mac_overhead_ratio(bus_model([(size, rate, 0)], capacity), "CAN") == 1


@given(sizes, rates, caps, macs)
def test_overhead_ratio_closed_form(size, rate, capacity, mac):
    ratio = mac_overhead_ratio(bus_model([(size, rate, mac)], capacity), "CAN")
    assert ratio == Fraction(size + mac, size)
