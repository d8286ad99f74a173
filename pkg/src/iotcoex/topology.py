"""Base-station layouts, device placement and serving-cell association.

A cell is the nearest-BS (Voronoi) region of a base station, taken over all
base stations of the topology and clipped to the scenario area. Ties go to
the lowest BS id, so ``Topology.base_stations`` is always kept sorted by id.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import AssociationError, ConfigError, GenerationError, ParseError, ValidationError

CSV_HEADER = ("bs_id", "operator_id", "x_m", "y_m", "shared")
MAX_OVERLAY_OPERATORS = 4


class Position(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Area:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ConfigError(f"degenerate area {self}")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def center(self) -> Position:
        return Position((self.xmin + self.xmax) / 2, (self.ymin + self.ymax) / 2)

    def contains(self, p: Sequence[float]) -> bool:
        return self.xmin <= p[0] <= self.xmax and self.ymin <= p[1] <= self.ymax

    def corners(self) -> list[tuple[float, float]]:
        return [(self.xmin, self.ymin), (self.xmax, self.ymin),
                (self.xmax, self.ymax), (self.xmin, self.ymax)]


@dataclass(frozen=True)
class BaseStation:
    id: int
    operator_id: int
    position: Position
    shared: bool = True


class DeviceKind(str, enum.Enum):
    UE = "ue"
    IOT = "iot"


class AssociationMode(str, enum.Enum):
    OWN_OPERATOR = "own-operator"
    ANY_SHARED = "any-shared"


@dataclass(frozen=True)
class Device:
    """A UE or IoT transmitter.

    ``cell_id`` is the BS whose cell the device was dropped in; ``serving_bs``
    and ``channel`` stay ``None`` until association and channel assignment.
    """

    id: int
    kind: DeviceKind
    operator_id: int
    position: Position
    tx_power: float
    cell_id: int | None = None
    channel: object | None = None
    serving_bs: BaseStation | None = None


@dataclass(frozen=True)
class Topology:
    base_stations: tuple[BaseStation, ...]
    area: Area

    def __post_init__(self):
        bss = tuple(sorted(self.base_stations, key=lambda b: b.id))
        ids = [b.id for b in bss]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate base station id")
        object.__setattr__(self, "base_stations", bss)

    def __len__(self) -> int:
        return len(self.base_stations)

    @cached_property
    def positions(self) -> np.ndarray:
        return np.array([b.position for b in self.base_stations], dtype=float).reshape(-1, 2)

    @cached_property
    def operator_ids(self) -> np.ndarray:
        return np.array([b.operator_id for b in self.base_stations], dtype=np.int64)

    @cached_property
    def shared_mask(self) -> np.ndarray:
        return np.array([b.shared for b in self.base_stations], dtype=bool)

    @cached_property
    def index_of(self) -> dict[int, int]:
        return {b.id: i for i, b in enumerate(self.base_stations)}

    @property
    def operators(self) -> list[int]:
        return sorted(set(self.operator_ids.tolist()))

    def by_id(self, bs_id: int) -> BaseStation:
        return self.base_stations[self.index_of[bs_id]]

    def distances(self, points) -> np.ndarray:
        """(n_points, n_bs) Euclidean distance matrix."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        diff = pts[:, None, :] - self.positions[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])

    def nearest_index(self, points, eligible: np.ndarray | None = None) -> np.ndarray:
        """Index of the nearest BS per point, optionally among ``eligible`` columns.

        ``eligible`` is a bool mask over BSs, or (n_points, n_bs) per point.
        """
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        diff = pts[:, None, :] - self.positions[None, :, :]
        d2 = diff[..., 0] ** 2 + diff[..., 1] ** 2
        if eligible is not None:
            d2 = np.where(np.broadcast_to(eligible, d2.shape), d2, np.inf)
            if np.any(np.all(np.isinf(d2), axis=1)):
                raise AssociationError("no eligible base station")
        # argmin returns the first minimum, i.e. the lowest id on ties
        return np.argmin(d2, axis=1)

    def cell_of(self, points) -> np.ndarray:
        return self.nearest_index(points)

    def cell_polygon(self, index: int) -> list[tuple[float, float]]:
        """Vertices of the nearest-BS region of BS ``index`` clipped to the area."""
        poly = self.area.corners()
        si = self.positions[index]
        for j, sj in enumerate(self.positions):
            if j == index:
                continue
            normal = sj - si
            if not normal.any():
                if j < index:
                    return []
                continue
            # keep p with |p - si|^2 <= |p - sj|^2
            offset = 0.5 * (sj @ sj - si @ si)
            poly = _clip(poly, normal, offset)
            if not poly:
                return []
        return poly

    def cell_area(self, index: int) -> float:
        return _polygon_area(self.cell_polygon(index))


def _clip(poly, normal, offset):
    def inside(p):
        return normal[0] * p[0] + normal[1] * p[1] <= offset

    out = []
    n = len(poly)
    for k in range(n):
        cur, nxt = poly[k], poly[(k + 1) % n]
        cin, nin = inside(cur), inside(nxt)
        if cin:
            out.append(cur)
        if cin != nin:
            fc = normal[0] * cur[0] + normal[1] * cur[1] - offset
            fn = normal[0] * nxt[0] + normal[1] * nxt[1] - offset
            t = fc / (fc - fn)
            out.append((cur[0] + t * (nxt[0] - cur[0]), cur[1] + t * (nxt[1] - cur[1])))
    return out


def _polygon_area(poly) -> float:
    if len(poly) < 3:
        return 0.0
    xs = np.array([p[0] for p in poly])
    ys = np.array([p[1] for p in poly])
    return 0.5 * abs(float(np.dot(xs, np.roll(ys, -1)) - np.dot(ys, np.roll(xs, -1))))


def _operator_ids(operators) -> list[int]:
    ids = [getattr(op, "id", op) for op in operators]
    if not ids:
        raise ConfigError("at least one operator is required")
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate operator id")
    return ids


def hex_sites(rings: int) -> list[tuple[float, float]]:
    """Unit-spacing hexagonal lattice, centre first, then ring by ring counter-clockwise."""
    sites = []
    for q in range(-rings, rings + 1):
        for r in range(-rings, rings + 1):
            ring = max(abs(q), abs(r), abs(q + r))
            if ring > rings:
                continue
            x, y = q + r / 2.0, r * math.sqrt(3) / 2.0
            angle = math.atan2(y, x) % (2 * math.pi)
            sites.append((ring, round(angle, 12), x, y))
    sites.sort()
    return [(x, y) for _, _, x, y in sites]


def gen_hex_grid(
    rings: int,
    inter_site_distance: float,
    operators: Iterable,
    assignment: str = "per-operator-overlay",
    seed: int | None = None,
    shared: bool = True,
) -> Topology:
    """Hexagonal layout with ``1 + 3*rings*(rings+1)`` sites per lattice.

    ``alternating`` deals one lattice's sites to operators in turn.
    ``per-operator-overlay`` gives every operator its own lattice; operator k>0
    is shifted by half an inter-site distance along direction 60*(k-1) degrees,
    which puts its sites on edge midpoints of the first lattice. The layout is
    deterministic; ``seed`` is accepted for a uniform generator signature.
    """
    ops = _operator_ids(operators)
    if rings < 0:
        raise ConfigError("rings must be >= 0")
    if not inter_site_distance > 0:
        raise ConfigError("inter_site_distance must be positive")
    unit = hex_sites(rings)
    isd = float(inter_site_distance)
    placed: list[tuple[int, float, float]] = []
    if assignment == "alternating":
        for k, (x, y) in enumerate(unit):
            placed.append((ops[k % len(ops)], x * isd, y * isd))
    elif assignment == "per-operator-overlay":
        if len(ops) > MAX_OVERLAY_OPERATORS:
            raise ConfigError(f"overlay layout supports at most {MAX_OVERLAY_OPERATORS} operators")
        for k, op in enumerate(ops):
            if k == 0:
                dx = dy = 0.0
            else:
                theta = math.radians(60.0 * (k - 1))
                dx, dy = 0.5 * isd * math.cos(theta), 0.5 * isd * math.sin(theta)
            placed.extend((op, x * isd + dx, y * isd + dy) for x, y in unit)
    else:
        raise ConfigError(f"unknown hex assignment {assignment!r}")
    xs = [p[1] for p in placed]
    ys = [p[2] for p in placed]
    pad = isd / 2.0
    area = Area(min(xs) - pad, min(ys) - pad, max(xs) + pad, max(ys) + pad)
    bss = tuple(BaseStation(i, op, Position(x, y), shared) for i, (op, x, y) in enumerate(placed))
    return Topology(bss, area)


def gen_uniform(area: Area, count_per_operator: int, operators: Iterable, seed=None,
                shared: bool = True) -> Topology:
    ops = _operator_ids(operators)
    if count_per_operator < 1:
        raise ConfigError("count_per_operator must be >= 1")
    rng = np.random.default_rng(seed)
    bss = []
    for op in ops:
        xs = rng.uniform(area.xmin, area.xmax, count_per_operator)
        ys = rng.uniform(area.ymin, area.ymax, count_per_operator)
        for x, y in zip(xs, ys):
            bss.append(BaseStation(len(bss), op, Position(float(x), float(y)), shared))
    return Topology(tuple(bss), area)


def load_bs_csv(path) -> Topology:
    """Read base stations from ``bs_id,operator_id,x_m,y_m,shared`` rows.

    The area is the bounding box of the sites padded by 5% of its larger side
    (50 m when all sites coincide).
    """
    path = Path(path)
    bss: list[BaseStation] = []
    seen: dict[int, int] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise ParseError(f"expected header {','.join(CSV_HEADER)}", line=1)
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(CSV_HEADER):
                raise ParseError(f"expected {len(CSV_HEADER)} fields, got {len(row)}", line=line)
            try:
                bs_id = int(row[0])
                op = int(row[1])
                x = float(row[2])
                y = float(row[3])
            except ValueError as exc:
                raise ParseError(str(exc), line=line) from None
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ParseError("coordinates must be finite", line=line)
            flag = row[4].strip()
            if flag not in ("0", "1"):
                raise ParseError(f"shared must be 0 or 1, got {flag!r}", line=line)
            if bs_id in seen:
                raise ValidationError(f"duplicate bs_id {bs_id} on lines {seen[bs_id]} and {line}")
            seen[bs_id] = line
            bss.append(BaseStation(bs_id, op, Position(x, y), flag == "1"))
    if not bss:
        raise ParseError("no base stations in file")
    xs = [b.position.x for b in bss]
    ys = [b.position.y for b in bss]
    span = max(max(xs) - min(xs), max(ys) - min(ys))
    pad = 0.05 * span if span > 0 else 50.0
    return Topology(tuple(bss), Area(min(xs) - pad, min(ys) - pad, max(xs) + pad, max(ys) + pad))


def write_bs_csv(topology: Topology, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for b in topology.base_stations:
            writer.writerow([b.id, b.operator_id, repr(b.position.x), repr(b.position.y), int(b.shared)])


def sample_in_cell(topology: Topology, index: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` points uniform over cell ``index`` by rejection from its bounding box."""
    if n == 0:
        return np.empty((0, 2))
    poly = topology.cell_polygon(index)
    area = _polygon_area(poly)
    if area <= 0:
        raise GenerationError(f"cell of base station {topology.base_stations[index].id} has zero area")
    xs = [p[0] for p in poly]
    ys = [p[1] for p in poly]
    lo = np.array([min(xs), min(ys)])
    hi = np.array([max(xs), max(ys)])
    accept = area / float(np.prod(hi - lo))
    chunks, have = [], 0
    while have < n:
        batch = int(1.2 * (n - have) / accept) + 16
        pts = rng.uniform(lo, hi, size=(batch, 2))
        pts = pts[topology.cell_of(pts) == index]
        chunks.append(pts)
        have += len(pts)
    return np.concatenate(chunks)[:n]


def place_devices(
    topology: Topology,
    ues_per_cell: int,
    iot_per_cell: int,
    ue_tx_power: float = 25.0,
    iot_tx_power: float = 20.0,
    seed=None,
) -> list[Device]:
    """Drop UEs and IoT candidates uniformly inside every cell.

    Devices belong to the operator of the BS whose cell they land in. Ids run
    cell by cell (by BS id), UEs before IoT within a cell.
    """
    if ues_per_cell < 0 or iot_per_cell < 0:
        raise ConfigError("device counts must be >= 0")
    rng = np.random.default_rng(seed)
    devices: list[Device] = []
    for i, bs in enumerate(topology.base_stations):
        pts = sample_in_cell(topology, i, ues_per_cell + iot_per_cell, rng)
        for k, (x, y) in enumerate(pts.tolist()):
            is_ue = k < ues_per_cell
            devices.append(Device(
                id=len(devices),
                kind=DeviceKind.UE if is_ue else DeviceKind.IOT,
                operator_id=bs.operator_id,
                position=Position(x, y),
                tx_power=ue_tx_power if is_ue else iot_tx_power,
                cell_id=bs.id,
            ))
    return devices


def eligible_mask(topology: Topology, operator_ids, mode: AssociationMode | str) -> np.ndarray:
    """(n, n_bs) mask of BSs each device may attach to."""
    mode = AssociationMode(mode)
    ops = np.asarray(operator_ids).reshape(-1, 1)
    own = topology.operator_ids[None, :] == ops
    if mode is AssociationMode.ANY_SHARED:
        return own | topology.shared_mask[None, :]
    return own


def associate_many(topology: Topology, positions, operator_ids, mode) -> np.ndarray:
    """BS indices (into ``topology.base_stations``) serving each device."""
    if len(topology) == 0:
        raise AssociationError("empty topology")
    return topology.nearest_index(positions, eligible_mask(topology, operator_ids, mode))


def associate(device: Device, topology: Topology, mode=AssociationMode.OWN_OPERATOR) -> BaseStation:
    idx = associate_many(topology, [device.position], [device.operator_id], mode)[0]
    return topology.base_stations[int(idx)]
