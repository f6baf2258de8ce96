"""Line-delimited JSON dataset files.

The first line is a header record; every following line is one packet.
See FORMATS.md for the field list.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .channel import CsiDataset
from .csi import LocationScaler, SubcarrierSpec, ViewSpec
from .errors import DataError

FORMAT = "vsdl-csi"
VERSION = 1


def _header(ds: CsiDataset) -> dict:
    sc = ds.subcarriers
    return {
        "record": "header",
        "format": FORMAT,
        "version": VERSION,
        "ap_ids": list(ds.ap_ids),
        "n_antennas": ds.n_antennas,
        "subcarriers": {
            "indices": list(sc.indices), "delta_f": sc.delta_f, "center_freq": sc.center_freq, "max_index": sc.max_index,
        },
        "view_spec": ds.view_spec.to_dict(),
        "normalization": ds.scaler.to_dict(),
        "meta": ds.meta,
    }


def write_dataset(ds: CsiDataset, path: str | Path) -> None:
    loc = ds.location
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(_header(ds)) + "\n")
        for r in range(len(ds)):
            csi = {
                ap: np.stack([ds.raw[r, a].real, ds.raw[r, a].imag], axis=-1).tolist()
                for a, ap in enumerate(ds.ap_ids)
            }
            rec = {
                "record": "packet",
                "point_id": int(ds.point_id[r]),
                "packet": int(ds.packet[r]),
                "split": str(ds.split[r]),
                "raw_location_m": ds.location_m[r].tolist(),
                "location": loc[r].tolist(),
                "view_label": [int(v) for v in ds.view_label[r]],
                "csi": csi,
            }
            fh.write(json.dumps(rec) + "\n")


def read_dataset(path: str | Path) -> CsiDataset:
    """Load a dataset file. Location and view-label fields are optional per packet (NaN / zeros when absent)."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from None
    if not lines:
        raise DataError(f"{path} is empty")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed header: {exc}") from None
    if header.get("record") != "header" or header.get("format") != FORMAT:
        raise DataError(f"{path}: missing dataset header record")
    if header.get("version") != VERSION:
        raise DataError(f"{path}: unsupported dataset version {header.get('version')}")
    if "normalization" not in header:
        raise DataError(f"{path}: header lacks normalization constants")
    ap_ids = tuple(header["ap_ids"])
    view_spec = ViewSpec.from_dict(header["view_spec"])
    M = int(header["n_antennas"])
    sc = SubcarrierSpec(tuple(header["subcarriers"]["indices"]), float(header["subcarriers"]["delta_f"]),
                        float(header["subcarriers"]["center_freq"]), int(header["subcarriers"]["max_index"]))
    I = sc.count
    K = view_spec.n_views
    n = len(lines) - 1
    raw = np.empty((n, len(ap_ids), M, I), dtype=np.complex128)
    point_id = np.zeros(n, dtype=np.int64)
    packet = np.zeros(n, dtype=np.int64)
    split = np.empty(n, dtype="<U5")
    loc = np.full((n, 2), np.nan)
    labels = np.zeros((n, K), dtype=np.int64)
    for r, line in enumerate(lines[1:]):
        try:
            rec = json.loads(line)
            for a, ap in enumerate(ap_ids):
                if ap not in rec["csi"]:
                    raise DataError(f"{path}: packet {r} is missing AP {ap} (incomplete sample)")
                arr = np.asarray(rec["csi"][ap], dtype=np.float64)
                if arr.shape != (M, I, 2):
                    raise DataError(f"{path}: packet {r} AP {ap} has shape {arr.shape}, expected {(M, I, 2)}")
                raw[r, a] = arr[..., 0] + 1j * arr[..., 1]
            point_id[r] = int(rec.get("point_id", r))
            packet[r] = int(rec.get("packet", 0))
            split[r] = rec.get("split", "test")
            if rec.get("raw_location_m") is not None:
                loc[r] = rec["raw_location_m"]
            if rec.get("view_label") is not None:
                labels[r] = rec["view_label"]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, DataError):
                raise
            raise DataError(f"{path}: malformed packet record {r}: {exc}") from None
    if not np.all(np.isfinite(raw)):
        raise DataError(f"{path}: non-finite CSI values")
    return CsiDataset(raw, point_id, packet, split, loc, labels, ap_ids, view_spec,
                      LocationScaler.from_dict(header["normalization"]), sc, dict(header.get("meta", {})))
