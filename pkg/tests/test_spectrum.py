import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from iotcoex import spectrum as sp
from iotcoex.errors import ConfigError, NoSpectrumError, ValidationError
from iotcoex.radio import Channel
from iotcoex.spectrum import Operator, SharingMode
from iotcoex.topology import BaseStation, Device, DeviceKind, Position

MHZ = 1e6


def two_ops(width=10 * MHZ, fraction=1.0, mop=None):
    return [
        Operator(0, Channel(1000 * MHZ, 1000 * MHZ + width), fraction, is_mop=mop == 0),
        Operator(1, Channel(1000 * MHZ + width, 1000 * MHZ + 2 * width), fraction, is_mop=mop == 1),
    ]


@pytest.mark.parametrize("bw,width,count", [(20, 5, 4), (20, 1, 20), (4.5, 5, 0), (5, 5, 1), (7.9, 1, 7)])
def test_channelize_counts(bw, width, count):
    chans = sp.channelize(Channel(0, bw * MHZ), width * MHZ)
    assert len(chans) == count
    for k, c in enumerate(chans):
        assert c.low == k * width * MHZ and c.bandwidth == pytest.approx(width * MHZ)


def test_channelize_rejects_zero_width():
    with pytest.raises(ValueError):
        sp.channelize(Channel(0, 1), 0)
    assert sp.channelize(None, 1e6) == []


@settings(max_examples=200)
@given(st.floats(0, 1), st.integers(1, 100))
def test_split_exactness(fraction, mhz):
    op = Operator(0, Channel(700 * MHZ, (700 + mhz) * MHZ), fraction)
    assert op.exclusive_bandwidth + op.shared_bandwidth == op.licensed_band.bandwidth
    if op.shared_band is not None:
        assert op.shared_band.high == op.licensed_band.high
    if op.exclusive_band is not None:
        assert op.exclusive_band.low == op.licensed_band.low


def test_plan_zero_fraction_equals_none():
    ops = two_ops(fraction=0.0)
    none = sp.build_plan(ops, SharingMode.NONE)
    pool = sp.build_plan(ops, SharingMode.POOLING)
    assert pool.shared_channels == ()
    for op in ops:
        assert pool.eligible_iot_channels(op.id) == none.eligible_iot_channels(op.id)
        assert pool.ue_channels[op.id] == none.ue_channels[op.id]


def test_plan_full_pool():
    plan = sp.build_plan(two_ops(fraction=1.0), "pooling")
    assert sum(c.bandwidth for c in plan.shared_channels) == 20 * MHZ
    assert len(plan.shared_channels) == 20
    assert plan.iot_channels == {0: (), 1: ()}


def test_plan_half_split():
    ops = two_ops(fraction=0.5)
    plan = sp.build_plan(ops, "pooling")
    assert sum(c.bandwidth for c in plan.shared_channels) == 10 * MHZ
    for op in ops:
        assert op.exclusive_bandwidth == 5 * MHZ
        assert len(plan.iot_channels[op.id]) == 5
        assert all(op.exclusive_band.contains(c) for c in plan.iot_channels[op.id])
    # shared parts are the top halves, so the pool is not contiguous
    assert {c.low for c in plan.shared_channels} == (
        {1005 * MHZ + k * MHZ for k in range(5)} | {1015 * MHZ + k * MHZ for k in range(5)}
    )


def test_pool_only_at_shared_bs_unless_flagged():
    ops = two_ops(fraction=0.5)
    plan = sp.build_plan(ops, "pooling")
    assert len(plan.eligible_iot_channels(0, at_shared_bs=True)) == 15
    assert len(plan.eligible_iot_channels(0, at_shared_bs=False)) == 5
    relaxed = sp.build_plan(ops, "pooling", pool_at_exclusive_bs=True)
    assert len(relaxed.eligible_iot_channels(0, at_shared_bs=False)) == 15


def test_leasing_plan():
    ops = two_ops(fraction=0.5, mop=0)
    plan = sp.build_plan(ops, "leasing")
    assert plan.mop_id == 0
    assert len(plan.eligible_iot_channels(0)) == 10
    assert len(plan.eligible_iot_channels(1)) == 15
    assert all(ops[0].shared_band.contains(c) for c in plan.shared_channels)
    assert plan.is_leased(plan.shared_channels[0])
    assert not plan.is_leased(plan.iot_channels[1][0])


def test_plan_errors():
    with pytest.raises(ConfigError):
        sp.build_plan(two_ops(), "leasing")
    with pytest.raises(ConfigError):
        sp.build_plan([Operator(0, Channel(0, 10), is_mop=True), Operator(1, Channel(10, 20), is_mop=True)], "none")
    with pytest.raises(ConfigError):
        sp.build_plan([Operator(0, Channel(0, 10)), Operator(1, Channel(5, 20))], "none")
    with pytest.raises(ConfigError):
        Operator(0, Channel(0, 10), shared_fraction=1.5)


@pytest.mark.parametrize("mode", list(SharingMode))
def test_plan_invariants(mode):
    ops = two_ops(fraction=0.4, mop=1)
    plan = sp.build_plan(ops, mode)
    lists = list(plan.ue_channels.values()) + list(plan.iot_channels.values()) + [plan.shared_channels]
    for chans in lists:
        for a, b in zip(chans, chans[1:]):
            assert a.high <= b.low
        for c in chans:
            assert any(op.licensed_band.contains(c) for op in ops)
    if mode is SharingMode.NONE:
        for op in ops:
            assert all(op.licensed_band.contains(c) for c in plan.eligible_iot_channels(op.id))


def test_partition_examples():
    assert sp.partition_pool([2 * MHZ, 4 * MHZ], [5 * MHZ, 5 * MHZ], 10 * MHZ) == [2 * MHZ, 4 * MHZ]
    assert sp.partition_pool([10, 10], [5, 5], 10) == [5, 5]
    assert sp.partition_pool([8, 2], [6, 4], 10) == pytest.approx([8, 2])
    # first operator capped at 1, the rest split 9 by contributions 2:1
    assert sp.partition_pool([1, 10, 10], [3, 4, 2], 9) == pytest.approx([1, 16 / 3, 8 / 3])
    with pytest.raises(ValidationError):
        sp.partition_pool([1, 1], [3, 3], 10)
    with pytest.raises(ValidationError):
        sp.partition_pool([-1, 1], [5, 5], 10)


amounts = st.lists(st.floats(0, 100), min_size=1, max_size=5)


@settings(max_examples=200)
@given(amounts, st.data(), st.floats(0.01, 1000))
def test_partition_properties(requests, data, factor):
    contributions = data.draw(st.lists(st.floats(0, 100), min_size=len(requests), max_size=len(requests)))
    pool = sum(contributions)
    alloc = sp.partition_pool(requests, contributions, pool)
    assert sum(alloc) <= pool + 1e-6
    for a, r in zip(alloc, requests):
        assert 0 <= a <= r + 1e-9
    scaled = sp.partition_pool([r * factor for r in requests], [c * factor for c in contributions], pool * factor)
    assert scaled == pytest.approx([a * factor for a in alloc], rel=1e-9, abs=1e-9)


def test_profiles():
    nb = sp.iot_profile("NB-IoT")
    assert (nb.bandwidth, nb.max_tx_power) == (180e3, 23.0)
    emtc = sp.iot_profile("eMTC")
    assert (emtc.bandwidth, emtc.max_tx_power) == (1.08e6, 23.0)
    gsm = sp.iot_profile("EC-GSM-IoT")
    assert (gsm.bandwidth, gsm.max_tx_power) == (200e3, 33.0)
    assert gsm.power_classes == (33.0, 23.0)
    assert {p.name for p in sp.iot_profiles()} == {"NB-IoT", "eMTC", "EC-GSM-IoT"}
    with pytest.raises(KeyError):
        sp.iot_profile("LoRa")


def _ue(i, cell, op=0):
    bs = BaseStation(cell, op, Position(0, 0))
    return Device(i, DeviceKind.UE, op, Position(1, 1), 25.0, cell_id=cell, serving_bs=bs)


def test_ue_assignment_bijection_and_overflow():
    plan = sp.build_plan([Operator(0, Channel(0, 20 * MHZ))], "none")
    served, unserved = sp.assign_ue_channels(plan, [_ue(i, 0) for i in range(4)], seed=1)
    assert not unserved
    assert sorted(u.channel.low for u in served) == [0, 5 * MHZ, 10 * MHZ, 15 * MHZ]
    served, unserved = sp.assign_ue_channels(plan, [_ue(i, 0) for i in range(6)], seed=1)
    assert len(served) == 4 and len(unserved) == 2


def test_ue_assignment_reuse_and_determinism():
    plan = sp.build_plan([Operator(0, Channel(0, 20 * MHZ))], "none")
    ues = [_ue(i, i // 4) for i in range(8)]
    a, _ = sp.assign_ue_channels(plan, ues, seed=9)
    b, _ = sp.assign_ue_channels(plan, ues, seed=9)
    assert a == b
    for cell in (0, 1):
        assert {u.channel for u in a if u.cell_id == cell} == set(plan.ue_channels[0])


def test_draw_single_and_empty():
    rng = np.random.default_rng(0)
    ops = [Operator(0, Channel(0, 1 * MHZ)), Operator(1, Channel(1 * MHZ, 1.5 * MHZ))]
    plan = sp.build_plan(ops, "none")
    dev = Device(0, DeviceKind.IOT, 0, Position(0, 0), 20.0)
    assert sp.draw_iot_channel(plan, dev, rng) == Channel(0, 1 * MHZ)
    with pytest.raises(NoSpectrumError):
        sp.draw_iot_channel(plan, Device(1, DeviceKind.IOT, 1, Position(0, 0), 20.0), rng)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.integers(0, 1), st.floats(0, 1))
def test_none_draws_stay_in_own_band(seed, op_id, fraction):
    ops = two_ops(fraction=fraction)
    plan = sp.build_plan(ops, "none")
    rng = np.random.default_rng(seed)
    dev = Device(0, DeviceKind.IOT, op_id, Position(0, 0), 20.0)
    for _ in range(20):
        ch = sp.draw_iot_channel(plan, dev, rng)
        assert ops[op_id].licensed_band.contains(ch)
        assert ops[1 - op_id].licensed_band.overlap(ch) == 0


def test_pool_draws_uniform():
    plan = sp.build_plan(two_ops(fraction=1.0), "pooling")
    assert len(plan.shared_channels) == 20
    dev = Device(0, DeviceKind.IOT, 0, Position(0, 0), 20.0, serving_bs=BaseStation(0, 0, Position(0, 0)))
    rng = np.random.default_rng(2024)
    index = {c: k for k, c in enumerate(plan.shared_channels)}
    counts = np.zeros(20)
    for _ in range(10_000):
        counts[index[sp.draw_iot_channel(plan, dev, rng)]] += 1
    assert stats.chisquare(counts).pvalue > 0.001


def test_pooled_set_is_superset_of_none_set():
    for fraction in (0.0, 0.3, 1.0):
        ops = two_ops(fraction=fraction)
        none = sp.build_plan(ops, "none")
        pool = sp.build_plan(ops, "pooling")
        for op in ops:
            covered = sum(c.bandwidth for c in pool.eligible_iot_channels(op.id) if op.licensed_band.contains(c))
            assert covered == op.licensed_band.bandwidth
            assert len(pool.eligible_iot_channels(op.id)) >= len(none.eligible_iot_channels(op.id))
