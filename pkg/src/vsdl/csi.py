"""CSI domain types and the preprocessing from raw complex CSI to view features.

Feature layout
--------------
A view's feature vector is the concatenation, over the APs of the view (in
the view's membership order), of that AP's relative phasors flattened as
``[antenna m][subcarrier i][re, im]``. The full-sample matrix used by the
estimators follows the same layout over the global AP order, so every view
is a column subset of it (shared APs are duplicated into each view).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError, ConfigError


@dataclass(frozen=True)
class SubcarrierSpec:
    """Reported subcarrier indices, spacing ``delta_f`` (Hz) and centre frequency (Hz)."""

    indices: tuple[int, ...]
    delta_f: float = 312.5e3
    center_freq: float = 5.18e9
    max_index: int = 28

    def __post_init__(self):
        idx = np.asarray(self.indices)
        if idx.ndim != 1 or idx.size < 1:
            raise ConfigError("at least one subcarrier index is required")
        if np.any(np.diff(idx) <= 0):
            raise ConfigError("subcarrier indices must be strictly increasing")
        if np.any(np.abs(idx) > self.max_index):
            raise ConfigError(f"subcarrier indices must lie in [-{self.max_index}, {self.max_index}]")
        object.__setattr__(self, "indices", tuple(int(i) for i in idx))

    @classmethod
    def evenly_spaced(cls, count: int = 30, max_index: int = 28, **kwargs) -> "SubcarrierSpec":
        idx = np.round(np.linspace(-max_index, max_index, count)).astype(int)
        return cls(tuple(idx), max_index=max_index, **kwargs)

    @property
    def count(self) -> int:
        return len(self.indices)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.float64)


@dataclass(frozen=True)
class CsiMatrix:
    """Raw complex CSI of one packet at one AP, shape ``(M, I)``."""

    ap_id: str
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.ndim != 2 or values.shape[0] < 2:
            raise DataError(f"AP {self.ap_id}: CSI must be M x I with M >= 2, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DataError(f"AP {self.ap_id}: CSI contains non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def n_antennas(self) -> int:
        return self.values.shape[0]

    @property
    def n_subcarriers(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class RelativeCsiVector:
    """Unit phasors of antennas ``1..M-1`` relative to the last antenna, shape ``(M-1, I)``."""

    ap_id: str
    values: np.ndarray


@dataclass(frozen=True)
class ViewSpec:
    """Assignment of APs to views. Memberships may overlap."""

    ap_membership: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        membership = tuple(tuple(str(a) for a in view) for view in self.ap_membership)
        if not membership:
            raise ConfigError("a view spec needs at least one view")
        for k, view in enumerate(membership):
            if not view:
                raise ConfigError(f"view {k + 1} has no APs")
            if len(set(view)) != len(view):
                raise ConfigError(f"view {k + 1} lists an AP twice")
        object.__setattr__(self, "ap_membership", membership)

    @property
    def n_views(self) -> int:
        return len(self.ap_membership)

    @property
    def ap_ids(self) -> tuple[str, ...]:
        """All APs in order of first appearance."""
        seen: dict[str, None] = {}
        for view in self.ap_membership:
            for ap in view:
                seen.setdefault(ap, None)
        return tuple(seen)

    def check_covers(self, ap_ids: Sequence[str]) -> None:
        missing = set(ap_ids) - set(self.ap_ids)
        if missing:
            raise ConfigError(f"APs {sorted(missing)} belong to no view")

    def column_groups(self, ap_order: Sequence[str], n_antennas: int, n_subcarriers: int) -> list[np.ndarray]:
        """Column indices of each view inside a full-sample feature matrix laid out over ``ap_order``."""
        width = 2 * (n_antennas - 1) * n_subcarriers
        position = {ap: j for j, ap in enumerate(ap_order)}
        groups = []
        for view in self.ap_membership:
            try:
                blocks = [np.arange(position[ap] * width, (position[ap] + 1) * width) for ap in view]
            except KeyError as exc:
                raise DataError(f"AP {exc.args[0]} of the view spec is absent from the sample") from None
            groups.append(np.concatenate(blocks))
        return groups

    def to_dict(self) -> dict:
        return {"ap_membership": [list(v) for v in self.ap_membership]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ViewSpec":
        return cls(tuple(tuple(v) for v in d["ap_membership"]))


def relative_phasors(h: np.ndarray) -> np.ndarray:
    """Vectorised relative CSI over the last two axes ``(..., M, I)`` -> ``(..., M-1, I)``."""
    h = np.asarray(h, dtype=np.complex128)
    if h.shape[-2] < 2:
        raise DataError("relative CSI needs at least two antennas")
    mag = np.abs(h)
    if np.any(mag == 0):
        raise DataError("zero-magnitude CSI entry (corrupt packet)")
    unit = h / mag
    rel = unit[..., :-1, :] / unit[..., -1:, :]
    # renormalise so |x| = 1 holds to rounding even after the complex division
    return rel / np.abs(rel)


def relative_csi(raw: CsiMatrix) -> RelativeCsiVector:
    """Map a packet's CSI to unit phasors measured against the last (reference) antenna."""
    return RelativeCsiVector(raw.ap_id, relative_phasors(raw.values))


def encode_phasors(rel: np.ndarray) -> np.ndarray:
    """Flatten complex phasors ``(n, A, M-1, I)`` into real rows of interleaved (re, im)."""
    rel = np.asarray(rel)
    pairs = np.stack([rel.real, rel.imag], axis=-1)
    return pairs.reshape(rel.shape[0], -1)


def decode_phasors(features: np.ndarray, n_aps: int, n_antennas: int, n_subcarriers: int) -> np.ndarray:
    """Inverse of :func:`encode_phasors`."""
    features = np.asarray(features, dtype=np.float64)
    pairs = features.reshape(features.shape[0], n_aps, n_antennas - 1, n_subcarriers, 2)
    return pairs[..., 0] + 1j * pairs[..., 1]


def featurize(rel: Sequence[RelativeCsiVector] | Mapping[str, RelativeCsiVector], spec: ViewSpec) -> list[np.ndarray]:
    """Split one packet's relative CSI into per-view real feature vectors."""
    by_ap = dict(rel) if isinstance(rel, Mapping) else {r.ap_id: r for r in rel}
    missing = [ap for ap in spec.ap_ids if ap not in by_ap]
    if missing:
        raise DataError(f"incomplete sample: no CSI for AP(s) {missing}")
    out = []
    for view in spec.ap_membership:
        stacked = np.stack([np.asarray(by_ap[ap].values) for ap in view])
        out.append(encode_phasors(stacked[None])[0])
    return out


def defeaturize(features: Sequence[np.ndarray], spec: ViewSpec, n_antennas: int, n_subcarriers: int) -> dict[str, RelativeCsiVector]:
    """Recover the per-AP phasors from view feature vectors (first occurrence of shared APs wins)."""
    result: dict[str, RelativeCsiVector] = {}
    for view, vec in zip(spec.ap_membership, features):
        phasors = decode_phasors(np.asarray(vec)[None], len(view), n_antennas, n_subcarriers)[0]
        for ap, values in zip(view, phasors):
            result.setdefault(ap, RelativeCsiVector(ap, values))
    return result


def normalize_view_label(u) -> np.ndarray:
    """Scale binary view labels so each row sums to one. Accepts ``(K,)`` or ``(n, K)``."""
    u = np.asarray(u, dtype=np.float64)
    total = u.sum(axis=-1, keepdims=True)
    if np.any(total <= 0):
        raise DataError("view label must mark at least one informative view")
    return u / total


@dataclass
class LocationScaler:
    """Affine map from metres to the unit square using a bounding box."""

    lower: np.ndarray = field(default_factory=lambda: np.zeros(2))
    upper: np.ndarray = field(default_factory=lambda: np.ones(2))

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=np.float64)
        self.upper = np.asarray(self.upper, dtype=np.float64)
        if np.any(self.upper <= self.lower):
            raise ConfigError("bounding box must have positive extent on both axes")

    @classmethod
    def from_points(cls, points: np.ndarray) -> "LocationScaler":
        points = np.asarray(points, dtype=np.float64)
        return cls(points.min(axis=0), points.max(axis=0))

    def transform(self, y_m: np.ndarray) -> np.ndarray:
        return (np.asarray(y_m, dtype=np.float64) - self.lower) / (self.upper - self.lower)

    def inverse_transform(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y, dtype=np.float64) * (self.upper - self.lower) + self.lower

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "LocationScaler":
        return cls(np.asarray(d["lower"]), np.asarray(d["upper"]))
