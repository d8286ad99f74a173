import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iotcoex import topology as topo
from iotcoex.errors import AssociationError, ConfigError, GenerationError, ParseError, ValidationError
from iotcoex.topology import Area, AssociationMode, BaseStation, Device, DeviceKind, Position, Topology


def _nearest_neighbour_distances(pts):
    out = []
    for i, p in enumerate(pts):
        out.append(min(math.dist(p, q) for j, q in enumerate(pts) if j != i))
    return out


def test_hex_single_site_at_area_center():
    t = topo.gen_hex_grid(0, 1000.0, [0])
    assert len(t) == 1
    assert t.base_stations[0].position == t.area.center


def test_hex_one_ring_geometry():
    t = topo.gen_hex_grid(1, 1000.0, [0])
    assert len(t) == 7
    pts = [tuple(p) for p in t.positions]
    for d in _nearest_neighbour_distances(pts):
        assert d == pytest.approx(1000.0, rel=1e-9)


@pytest.mark.parametrize("rings", [0, 1, 2, 3])
@pytest.mark.parametrize("n_ops", [1, 2, 3])
def test_hex_overlay_counts(rings, n_ops):
    per = 1 + 3 * rings * (rings + 1)
    t = topo.gen_hex_grid(rings, 500.0, list(range(n_ops)), "per-operator-overlay")
    assert len(t) == per * n_ops
    for op in range(n_ops):
        assert int(np.sum(t.operator_ids == op)) == per


@pytest.mark.parametrize("rings", [1, 2, 3])
def test_hex_adjacent_sites_exactly_isd(rings):
    isd = 730.0
    t = topo.gen_hex_grid(rings, isd, [5])
    pts = t.positions
    for i, j in itertools.combinations(range(len(pts)), 2):
        d = math.dist(pts[i], pts[j])
        if d < 1.5 * isd:
            assert d == pytest.approx(isd, rel=1e-9)


def test_hex_overlay_offset_is_half_isd():
    t = topo.gen_hex_grid(1, 1000.0, [0, 1])
    a = t.positions[t.operator_ids == 0]
    b = t.positions[t.operator_ids == 1]
    np.testing.assert_allclose(b - a, np.tile([500.0, 0.0], (7, 1)), atol=1e-9)


def test_hex_alternating_interleaves():
    t = topo.gen_hex_grid(1, 1000.0, [0, 1], "alternating")
    assert len(t) == 7
    assert [b.operator_id for b in t.base_stations] == [0, 1, 0, 1, 0, 1, 0]


def test_hex_errors():
    with pytest.raises(ConfigError):
        topo.gen_hex_grid(1, 1000.0, [])
    with pytest.raises(ConfigError):
        topo.gen_hex_grid(-1, 1000.0, [0])
    with pytest.raises(ConfigError):
        topo.gen_hex_grid(1, 0.0, [0])
    with pytest.raises(ConfigError):
        topo.gen_hex_grid(1, 100.0, [0], "spiral")
    with pytest.raises(ConfigError):
        topo.gen_hex_grid(1, 100.0, range(5))


def test_uniform_generator():
    area = Area(0, 0, 1000, 2000)
    t = topo.gen_uniform(area, 1, [0], seed=1)
    assert len(t) == 1 and area.contains(t.base_stations[0].position)
    a = topo.gen_uniform(area, 10, [0, 1], seed=7)
    b = topo.gen_uniform(area, 10, [0, 1], seed=7)
    assert a == b
    np.testing.assert_array_equal(a.positions, b.positions)
    big = topo.gen_uniform(area, 100, [0, 1], seed=11)
    mean = big.positions.mean(axis=0)
    assert abs(mean[0] - 500) < 0.1 * area.width
    assert abs(mean[1] - 1000) < 0.1 * area.height
    with pytest.raises(ConfigError):
        topo.gen_uniform(area, 0, [0])


def _write(tmp_path, text):
    p = tmp_path / "bs.csv"
    p.write_text(text, encoding="utf-8")
    return p


def test_load_csv(tmp_path):
    p = _write(tmp_path, "bs_id,operator_id,x_m,y_m,shared\n1,0,0,0,1\n2,0,100,0,0\n3,1,50,200,1\n")
    t = topo.load_bs_csv(p)
    assert len(t) == 3
    assert [b.shared for b in t.base_stations] == [True, False, True]
    assert t.area == Area(-10.0, -10.0, 110.0, 210.0)


def test_load_csv_bad_number_reports_line(tmp_path):
    p = _write(tmp_path, "bs_id,operator_id,x_m,y_m,shared\n1,0,0,0,1\n2,0,abc,0,0\n")
    with pytest.raises(ParseError) as info:
        topo.load_bs_csv(p)
    assert info.value.line == 3
    assert "line 3" in str(info.value)


def test_load_csv_duplicate_id(tmp_path):
    p = _write(tmp_path, "bs_id,operator_id,x_m,y_m,shared\n1,0,0,0,1\n1,1,5,5,1\n")
    with pytest.raises(ValidationError):
        topo.load_bs_csv(p)


@pytest.mark.parametrize("text", [
    "id,op,x,y,s\n1,0,0,0,1\n",
    "bs_id,operator_id,x_m,y_m,shared\n1,0,0,0\n",
    "bs_id,operator_id,x_m,y_m,shared\n1,0,0,0,2\n",
])
def test_load_csv_malformed(tmp_path, text):
    with pytest.raises(ParseError):
        topo.load_bs_csv(_write(tmp_path, text))


def test_csv_round_trip(tmp_path):
    t = topo.gen_hex_grid(1, 800.0, [0, 1])
    path = tmp_path / "out.csv"
    topo.write_bs_csv(t, path)
    back = topo.load_bs_csv(path)
    assert back.base_stations == t.base_stations
    assert path.read_bytes().count(b"\r") == 0


def test_cell_polygons_tile_the_area():
    t = topo.gen_hex_grid(1, 1000.0, [0, 1])
    total = sum(t.cell_area(i) for i in range(len(t)))
    assert total == pytest.approx(t.area.width * t.area.height, rel=1e-9)


def test_place_single_cell():
    t = topo.gen_hex_grid(0, 1000.0, [0])
    devs = topo.place_devices(t, 20, 50, seed=1)
    assert len(devs) == 70
    assert sum(d.kind is DeviceKind.UE for d in devs) == 20
    assert all(d.tx_power == 25.0 for d in devs if d.kind is DeviceKind.UE)
    assert all(d.tx_power == 20.0 for d in devs if d.kind is DeviceKind.IOT)
    assert all(topo.associate(d, t) is t.base_stations[0] for d in devs)
    assert topo.place_devices(t, 0, 0, seed=1) == []


def test_placement_partition_and_determinism():
    t = topo.gen_hex_grid(1, 500.0, [0])
    devs = topo.place_devices(t, 5, 30, seed=42)
    assert len(devs) == 7 * 35
    for d in devs:
        assert t.area.contains(d.position)
        assert topo.associate(d, t, AssociationMode.OWN_OPERATOR).id == d.cell_id
    assert devs == topo.place_devices(t, 5, 30, seed=42)


def test_placement_multi_operator_uses_cells_of_all_bs():
    t = topo.gen_hex_grid(1, 1000.0, [0, 1])
    devs = topo.place_devices(t, 2, 10, seed=3)
    cells = t.cell_of([d.position for d in devs])
    assert [t.base_stations[i].id for i in cells] == [d.cell_id for d in devs]
    assert all(t.by_id(d.cell_id).operator_id == d.operator_id for d in devs)


def test_placement_zero_area_cell():
    area = Area(0, 0, 100, 100)
    t = Topology((BaseStation(0, 0, Position(50, 50)), BaseStation(1, 0, Position(50, 50))), area)
    with pytest.raises(GenerationError):
        topo.place_devices(t, 1, 0, seed=0)


def _dev(x, y, op=0):
    return Device(0, DeviceKind.IOT, op, Position(x, y), 20.0)


def test_associate_tie_lowest_id():
    area = Area(-10, -10, 10, 10)
    t = Topology((BaseStation(7, 0, Position(1, 0)), BaseStation(3, 0, Position(-1, 0))), area)
    assert topo.associate(_dev(0, 0), t).id == 3


def test_associate_pooling_prefers_closer_foreign_shared_bs():
    area = Area(-1000, -1000, 1000, 1000)
    own = BaseStation(0, 0, Position(-300, 0), shared=True)
    foreign = BaseStation(1, 1, Position(100, 0), shared=True)
    t = Topology((own, foreign), area)
    d = _dev(0, 0, op=0)
    # own BS is 300 m away, foreign one 100 m
    assert topo.associate(d, t, AssociationMode.OWN_OPERATOR) == own
    assert topo.associate(d, t, AssociationMode.ANY_SHARED) == foreign
    exclusive = Topology((own, BaseStation(1, 1, Position(100, 0), shared=False)), area)
    assert topo.associate(d, exclusive, AssociationMode.ANY_SHARED) == own


def test_associate_without_eligible_bs():
    t = Topology((BaseStation(0, 1, Position(0, 0), shared=False),), Area(-1, -1, 1, 1))
    with pytest.raises(AssociationError):
        topo.associate(_dev(0, 0, op=0), t)


coord = st.floats(-1000, 1000)


@settings(max_examples=100)
@given(
    st.lists(st.tuples(coord, coord, st.integers(0, 2), st.booleans()), min_size=1, max_size=8),
    st.tuples(coord, coord, st.integers(0, 2), st.booleans()),
    st.tuples(coord, coord),
)
def test_adding_bs_never_increases_serving_distance(sites, extra, point):
    area = Area(-1000, -1000, 1000, 1000)
    base = [BaseStation(i, op, Position(x, y), sh) for i, (x, y, op, sh) in enumerate(sites)]
    dev = _dev(point[0], point[1], op=0)
    t1 = Topology(tuple(base), area)
    try:
        before = math.dist(topo.associate(dev, t1, AssociationMode.ANY_SHARED).position, dev.position)
    except AssociationError:
        before = math.inf
    more = base + [BaseStation(len(base), extra[2], Position(extra[0], extra[1]), extra[3])]
    t2 = Topology(tuple(more), area)
    try:
        after = math.dist(topo.associate(dev, t2, AssociationMode.ANY_SHARED).position, dev.position)
    except AssociationError:
        after = math.inf
    assert after <= before
