"""Synthetic CSI for a corridor floor plan.

Each packet's CSI at an AP is a sum of propagation paths plus complex
Gaussian noise. Every path contributes the nominal phase (time of flight
across subcarriers plus the array's angle-of-arrival progression) and the
receiver offsets: a per-packet subcarrier slope, fixed per-antenna phases
and a per-packet common phase.

A point that shares a corridor with an AP sees it in line of sight: one
direct path plus weak reflections off a fixed set of scatterers, so its CSI
is a smooth function of position. Otherwise the AP hears only random
multipath drawn afresh for every packet, which carries no position
information.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Mapping, Sequence

import numpy as np

from .csi import SubcarrierSpec, ViewSpec, LocationScaler
from .errors import ConfigError

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class Corridor:
    """A straight corridor: centre-line segment plus width."""

    start: tuple[float, float]
    end: tuple[float, float]
    width: float = 1.0

    def __post_init__(self):
        if self.length <= 0:
            raise ConfigError("corridor segment has zero length")
        if self.width < 0:
            raise ConfigError("corridor width must be non-negative")

    @property
    def length(self) -> float:
        return float(np.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1]))

    @property
    def orientation(self) -> float:
        return float(np.arctan2(self.end[1] - self.start[1], self.end[0] - self.start[0]))

    def distance(self, point) -> float:
        a = np.asarray(self.start, float)
        b = np.asarray(self.end, float)
        p = np.asarray(point, float)
        t = np.clip(np.dot(p - a, b - a) / np.dot(b - a, b - a), 0.0, 1.0)
        return float(np.linalg.norm(p - (a + t * (b - a))))

    def contains(self, point, tol: float = 1e-9) -> bool:
        return self.distance(point) <= self.width / 2 + tol


@dataclass(frozen=True)
class APPlacement:
    """An AP's uniform linear array.

    ``axis_angle`` is the direction (rad) in which antenna ``m`` is offset by
    ``(m-1) * spacing`` from antenna 1; ``corridors`` lists the corridors the
    AP has line of sight into.
    """

    ap_id: str
    position: tuple[float, float]
    corridors: tuple[int, ...]
    spacing: float = SPEED_OF_LIGHT / (2 * 5.18e9)
    axis_angle: float = 0.0

    def __post_init__(self):
        if self.spacing <= 0:
            raise ConfigError(f"AP {self.ap_id}: antenna spacing must be positive")
        if not self.corridors:
            raise ConfigError(f"AP {self.ap_id}: must serve at least one corridor")

    @property
    def axis(self) -> np.ndarray:
        return np.array([np.cos(self.axis_angle), np.sin(self.axis_angle)])

    @property
    def broadside(self) -> np.ndarray:
        return np.array([-np.sin(self.axis_angle), np.cos(self.axis_angle)])


@dataclass(frozen=True)
class Topology:
    corridors: tuple[Corridor, ...]
    aps: tuple[APPlacement, ...]
    train_points: tuple[tuple[float, float], ...]
    test_points: tuple[tuple[float, float], ...]
    spacing: float = 0.5

    def __post_init__(self):
        ids = [ap.ap_id for ap in self.aps]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate AP identifiers")
        for ap in self.aps:
            bad = [k for k in ap.corridors if not 0 <= k < len(self.corridors)]
            if bad:
                raise ConfigError(f"AP {ap.ap_id} refers to unknown corridor(s) {bad}")
        for p in self.points:
            if not self.point_corridors(p):
                raise ConfigError(f"point {tuple(p)} lies on no corridor")
        for k in range(len(self.corridors)):
            if not any(k in ap.corridors for ap in self.aps):
                raise ConfigError(f"corridor {k + 1} has no AP and would form an empty view")

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(self.train_points) + list(self.test_points)

    @property
    def ap_ids(self) -> tuple[str, ...]:
        return tuple(ap.ap_id for ap in self.aps)

    def point_corridors(self, point) -> tuple[int, ...]:
        return tuple(k for k, c in enumerate(self.corridors) if c.contains(point))

    def view_label(self, point) -> np.ndarray:
        u = np.zeros(len(self.corridors), dtype=np.int64)
        u[list(self.point_corridors(point))] = 1
        return u

    def view_spec(self) -> ViewSpec:
        """View ``k`` holds the APs with line of sight into corridor ``k``."""
        return ViewSpec(tuple(tuple(ap.ap_id for ap in self.aps if k in ap.corridors) for k in range(len(self.corridors))))

    def is_los(self, point, ap: APPlacement) -> bool:
        return bool(set(self.point_corridors(point)) & set(ap.corridors))

    def bounding_box(self) -> LocationScaler:
        """Axis-aligned box around every corridor's floor area."""
        corners = []
        for c in self.corridors:
            half = c.width / 2
            for end in (c.start, c.end):
                corners += [(end[0] - half, end[1] - half), (end[0] + half, end[1] + half)]
        return LocationScaler.from_points(np.asarray(corners, dtype=np.float64))

    def to_dict(self) -> dict:
        return {
            "spacing": self.spacing,
            "corridors": [asdict(c) for c in self.corridors],
            "aps": [asdict(a) for a in self.aps],
            "train_points": [list(p) for p in self.train_points],
            "test_points": [list(p) for p in self.test_points],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Topology":
        try:
            corridors = tuple(
                Corridor(tuple(c["start"]), tuple(c["end"]), float(c.get("width", 1.0))) for c in d["corridors"]
            )
            aps = tuple(
                APPlacement(
                    str(a["ap_id"]),
                    tuple(a["position"]),
                    tuple(int(k) for k in a["corridors"]),
                    float(a.get("spacing", SPEED_OF_LIGHT / (2 * 5.18e9))),
                    float(a.get("axis_angle", 0.0)),
                )
                for a in d["aps"]
            )
            return cls(
                corridors,
                aps,
                tuple(tuple(map(float, p)) for p in d["train_points"]),
                tuple(tuple(map(float, p)) for p in d["test_points"]),
                float(d.get("spacing", 0.5)),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed topology: {exc}") from None


def default_topology() -> Topology:
    """L-shaped junction of two 7 m corridors with two lanes of points 0.5 m apart.

    Corridor 1 runs along +x and corridor 2 along +y; they share the 1 m x 1 m
    junction, whose four points belong to both. 52 points in total, 9 held
    out for testing.
    """
    c1 = Corridor((-0.5, 0.0), (6.5, 0.0), 1.0)
    c2 = Corridor((0.0, -0.5), (0.0, 6.5), 1.0)
    along = [-0.25 + 0.5 * j for j in range(14)]
    pts = []
    for x in along:
        for y in (-0.25, 0.25):
            pts.append((x, y))
    for y in along:
        for x in (-0.25, 0.25):
            if (x, y) not in pts:
                pts.append((x, y))
    test = [
        (0.25, 0.25),
        (1.25, -0.25), (2.75, 0.25), (4.25, -0.25), (5.75, 0.25),
        (0.25, 1.25), (-0.25, 2.75), (0.25, 4.25), (-0.25, 5.75),
    ]
    train = [p for p in pts if p not in test]
    half = np.pi / 2
    aps = (
        APPlacement("AP1", (6.5, -0.5), (0,), axis_angle=half),
        APPlacement("AP2", (3.25, 0.5), (0,), axis_angle=0.0),
        APPlacement("AP3", (0.5, -0.5), (0, 1), axis_angle=3 * np.pi / 4),
        APPlacement("AP4", (-0.5, -0.5), (0, 1), axis_angle=np.pi / 4),
        APPlacement("AP5", (-0.5, 0.5), (0, 1), axis_angle=-np.pi / 4),
        APPlacement("AP6", (0.5, 3.25), (1,), axis_angle=half),
        APPlacement("AP7", (-0.5, 6.5), (1,), axis_angle=0.0),
    )
    return Topology((c1, c2), aps, tuple(train), tuple(test), 0.5)


@dataclass(frozen=True)
class ChannelParams:
    """Radio constants, receiver offsets, noise and multipath knobs.

    ``slope_std`` is the std (rad per subcarrier index) of the per-packet
    subcarrier-dependent offset; per-antenna offsets and the per-packet phase
    are uniform on [0, 2pi).
    """

    subcarriers: SubcarrierSpec = field(default_factory=SubcarrierSpec.evenly_spaced)
    n_antennas: int = 3
    speed_of_light: float = SPEED_OF_LIGHT
    noise_std: float = 0.05
    slope_std: float = 0.05
    nlos_paths: int = 5
    nlos_decay: float = 0.5
    nlos_delay_spread: float = 100e-9
    nlos_gain: float = 1.0
    scatterers: int = 6
    scatter_gain: float = 0.3
    scatter_margin: float = 3.0

    def __post_init__(self):
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")
        if self.nlos_paths < 1:
            raise ConfigError("NLoS generation needs at least one path")
        if self.n_antennas < 2:
            raise ConfigError("at least two antennas per AP are required")
        if self.scatterers < 0 or self.scatter_gain < 0 or self.slope_std < 0:
            raise ConfigError("multipath and offset knobs must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["subcarriers"] = asdict(self.subcarriers)
        d["subcarriers"]["indices"] = list(self.subcarriers.indices)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ChannelParams":
        d = dict(d)
        sc = d.pop("subcarriers", None)
        try:
            if sc is None:
                subcarriers = SubcarrierSpec.evenly_spaced()
            elif "indices" in sc:
                subcarriers = SubcarrierSpec(tuple(sc["indices"]), **{k: v for k, v in sc.items() if k != "indices"})
            else:
                subcarriers = SubcarrierSpec.evenly_spaced(**sc)
            return cls(subcarriers=subcarriers, **d)
        except TypeError as exc:
            raise ConfigError(f"malformed channel parameters: {exc}") from None


@dataclass(frozen=True)
class PropagationPath:
    tof: float
    aoa: float
    amplitude: float
    is_los: bool = False


def nominal_phase(path: PropagationPath, m, s_i, params: ChannelParams, spacing: float) -> np.ndarray:
    """Nominal CSI phase in cycles for antenna ``m`` (1-based) and subcarrier index ``s_i``.

    Broadcasts over array-valued ``m`` and ``s_i``.
    """
    sc = params.subcarriers
    return (
        np.asarray(s_i, dtype=np.float64) * sc.delta_f * path.tof
        + (np.asarray(m, dtype=np.float64) - 1) * sc.center_freq * spacing * np.sin(path.aoa) / params.speed_of_light
    )


@dataclass(frozen=True)
class PacketOffsets:
    """Receiver phase offsets for one packet at one AP (radians)."""

    slope: float
    antenna: np.ndarray
    common: float


def measured_csi(
    paths: Sequence[PropagationPath],
    params: ChannelParams,
    spacing: float,
    offsets: PacketOffsets,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """Measured CSI ``(M, I)`` of one packet from its propagation paths.

    ``noise`` is the additive complex noise draw (already scaled), or None
    for a noise-free packet.
    """
    if not paths:
        raise ConfigError("measured CSI needs at least one propagation path")
    tof = np.array([p.tof for p in paths])
    aoa = np.array([p.aoa for p in paths])
    amp = np.array([p.amplitude for p in paths])
    return _sum_paths(tof, aoa, amp, params, spacing, offsets, noise)


def _sum_paths(tof, aoa, amp, params: ChannelParams, spacing: float, offsets: PacketOffsets, noise) -> np.ndarray:
    sc = params.subcarriers
    m = np.arange(params.n_antennas, dtype=np.float64)[:, None]
    s = sc.array[None, :]
    # cycles, (paths, M, I)
    cycles = (
        s[None] * sc.delta_f * tof[:, None, None]
        + m[None] * sc.center_freq * spacing * np.sin(aoa)[:, None, None] / params.speed_of_light
    )
    offset = s * offsets.slope + np.asarray(offsets.antenna, dtype=np.float64)[:, None] + offsets.common
    h = np.einsum("p,pmi->mi", amp, np.exp(1j * 2 * np.pi * cycles)) * np.exp(1j * offset)
    if noise is not None:
        h = h + noise
    return h


def _arrival(origin, ap: APPlacement) -> float:
    """Angle of arrival of a plane wave coming from ``origin``, in [-pi/2, pi/2]."""
    v = np.asarray(origin, float) - np.asarray(ap.position, float)
    return float(np.arctan2(np.dot(v, ap.axis), abs(np.dot(v, ap.broadside))))


def los_params(tx, ap: APPlacement, speed_of_light: float = SPEED_OF_LIGHT) -> PropagationPath:
    """Direct path from a transmitter position to an AP."""
    dist = float(np.linalg.norm(np.asarray(tx, float) - np.asarray(ap.position, float)))
    if dist == 0.0:
        raise ConfigError(f"transmitter is colocated with AP {ap.ap_id}")
    return PropagationPath(dist / speed_of_light, _arrival(tx, ap), 1.0 / dist, True)


def scatter_path(tx, scatterer, ap: APPlacement, gain: float, speed_of_light: float = SPEED_OF_LIGHT) -> PropagationPath:
    """Single-bounce reflection via a point scatterer."""
    d1 = float(np.linalg.norm(np.asarray(scatterer) - np.asarray(tx)))
    d2 = float(np.linalg.norm(np.asarray(scatterer) - np.asarray(ap.position)))
    return PropagationPath((d1 + d2) / speed_of_light, _arrival(scatterer, ap), gain / max(d1 + d2, 1e-6), False)


def nlos_paths(rng: np.random.Generator, distance: float, params: ChannelParams) -> list[PropagationPath]:
    """Random multipath for an AP without line of sight, drawn per packet."""
    r = np.arange(params.nlos_paths)
    amp = params.nlos_gain / max(distance, 1e-6) * np.exp(-params.nlos_decay * r) * rng.uniform(0.5, 1.0, r.size)
    tof = distance / params.speed_of_light + rng.uniform(0.0, params.nlos_delay_spread, r.size)
    aoa = rng.uniform(-np.pi / 2, np.pi / 2, r.size)
    return [PropagationPath(float(t), float(a), float(g), False) for t, a, g in zip(tof, aoa, amp)]


@dataclass
class CsiDataset:
    """Labelled packets of raw CSI for every AP of a topology.

    ``raw`` has shape ``(n, A, M, I)`` with APs in ``ap_ids`` order; ``split``
    holds ``"train"`` or ``"test"`` per packet.
    """

    raw: np.ndarray
    point_id: np.ndarray
    packet: np.ndarray
    split: np.ndarray
    location_m: np.ndarray
    view_label: np.ndarray
    ap_ids: tuple[str, ...]
    view_spec: ViewSpec
    scaler: LocationScaler
    subcarriers: SubcarrierSpec
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.raw.shape[0]

    @property
    def location(self) -> np.ndarray:
        return self.scaler.transform(self.location_m)

    @property
    def n_antennas(self) -> int:
        return self.raw.shape[2]

    def features(self) -> np.ndarray:
        """Full-sample real features over all APs, ``(n, A * 2(M-1) * I)``."""
        from .csi import relative_phasors, encode_phasors

        return encode_phasors(relative_phasors(self.raw))

    def view_columns(self) -> list[np.ndarray]:
        return self.view_spec.column_groups(self.ap_ids, self.n_antennas, self.subcarriers.count)

    def subset(self, mask) -> "CsiDataset":
        mask = np.asarray(mask)
        return CsiDataset(
            self.raw[mask], self.point_id[mask], self.packet[mask], self.split[mask], self.location_m[mask],
            self.view_label[mask], self.ap_ids, self.view_spec, self.scaler, self.subcarriers, dict(self.meta),
        )

    def train(self) -> "CsiDataset":
        return self.subset(self.split == "train")

    def test(self) -> "CsiDataset":
        return self.subset(self.split == "test")


def _packet_rng(seed: int, point: int, packet: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0, point, packet)))


def environment(topology: Topology, params: ChannelParams, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Fixed per-dataset state: per-AP antenna offsets ``(A, M)`` and scatterer positions ``(S, 2)``."""
    mu = np.stack([
        np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, a))).uniform(0, 2 * np.pi, params.n_antennas)
        for a in range(len(topology.aps))
    ])
    box = topology.bounding_box()
    lo = box.lower - params.scatter_margin
    hi = box.upper + params.scatter_margin
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2,)))
    scat = rng.uniform(lo, hi, size=(params.scatterers, 2))
    return mu, scat


def _static_paths(point, topology: Topology, params: ChannelParams, scatterers: np.ndarray) -> list:
    """Per AP: path arrays for line-of-sight APs, or the direct distance for the others."""
    out = []
    for ap in topology.aps:
        direct = los_params(point, ap, params.speed_of_light)
        if topology.is_los(point, ap):
            paths = [direct] + [scatter_path(point, s, ap, params.scatter_gain, params.speed_of_light) for s in scatterers]
            out.append(tuple(np.array([getattr(p, f) for p in paths]) for f in ("tof", "aoa", "amplitude")))
        else:
            out.append(direct.tof * params.speed_of_light)
    return out


def simulate_packet(
    point, topology: Topology, params: ChannelParams, rng: np.random.Generator,
    antenna_offsets: np.ndarray, scatterers: np.ndarray, static: list | None = None,
) -> np.ndarray:
    """Raw CSI ``(A, M, I)`` of one packet sent from ``point``.

    Draw order per AP: NLoS paths (if any), slope, common phase, noise.
    """
    if static is None:
        static = _static_paths(point, topology, params, scatterers)
    shape = (params.n_antennas, params.subcarriers.count)
    out = np.empty((len(topology.aps),) + shape, dtype=np.complex128)
    for a, ap in enumerate(topology.aps):
        if isinstance(static[a], tuple):
            tof, aoa, amp = static[a]
        else:
            paths = nlos_paths(rng, static[a], params)
            tof, aoa, amp = (np.array([getattr(p, f) for p in paths]) for f in ("tof", "aoa", "amplitude"))
        offsets = PacketOffsets(
            slope=float(rng.normal(0.0, params.slope_std)),
            antenna=antenna_offsets[a],
            common=float(rng.uniform(0.0, 2 * np.pi)),
        )
        noise = params.noise_std / np.sqrt(2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        out[a] = _sum_paths(tof, aoa, amp, params, ap.spacing, offsets, noise)
    return out


def generate_dataset(topology: Topology, params: ChannelParams, packets_per_point: int = 100, seed: int = 0) -> CsiDataset:
    """Simulate ``packets_per_point`` packets at every train and test point.

    Packet ``j`` at point ``p`` draws from its own stream seeded by
    ``(seed, p, j)``, so any subset of points can be generated independently
    with identical results.
    """
    if packets_per_point < 1:
        raise ConfigError("packets_per_point must be >= 1")
    mu, scat = environment(topology, params, seed)
    points = topology.points
    n_train = len(topology.train_points)
    n = len(points) * packets_per_point
    raw = np.empty((n, len(topology.aps), params.n_antennas, params.subcarriers.count), dtype=np.complex128)
    point_id = np.repeat(np.arange(len(points)), packets_per_point)
    packet = np.tile(np.arange(packets_per_point), len(points))
    row = 0
    for p, point in enumerate(points):
        static = _static_paths(point, topology, params, scat)
        for j in range(packets_per_point):
            raw[row] = simulate_packet(point, topology, params, _packet_rng(seed, p, j), mu, scat, static)
            row += 1
    location_m = np.asarray(points, dtype=np.float64)[point_id]
    labels = np.stack([topology.view_label(pt) for pt in points])[point_id]
    split = np.where(point_id < n_train, "train", "test")
    return CsiDataset(
        raw=raw,
        point_id=point_id,
        packet=packet,
        split=split,
        location_m=location_m,
        view_label=labels,
        ap_ids=topology.ap_ids,
        view_spec=topology.view_spec(),
        scaler=topology.bounding_box(),
        subcarriers=params.subcarriers,
        meta={"seed": int(seed), "packets_per_point": int(packets_per_point)},
    )
