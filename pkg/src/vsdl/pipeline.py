"""Trained systems bound to a dataset's AP layout and normalization, with bundle persistence."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import DNNRegressor, VDLRegressor
from .channel import CsiDataset
from .config import TrainConfig
from .csi import LocationScaler, SubcarrierSpec, ViewSpec, encode_phasors, relative_phasors
from .errors import ConfigError, DataError
from .model import VSDLRegressor
from .nn.serialize import dumps, loads

BUNDLE_FORMAT = "vsdl-bundle"
BUNDLE_VERSION = 1


def build_estimator(system: str, cfg: TrainConfig, view_columns, seed: int):
    if system == "vsdl":
        return VSDLRegressor(
            view_columns=view_columns, latent_dim=cfg.latent_dim, alpha=cfg.alpha, hidden=cfg.hidden,
            stage1_epochs=cfg.stage1_epochs, stage2_epochs=cfg.stage2_epochs, batch_size=cfg.batch_size,
            learning_rate=cfg.learning_rate, kl_weight=cfg.kl_weight, stage2_latent=cfg.stage2_latent,
            predict_latent=cfg.predict_latent, random_state=seed,
        )
    if system == "vdl":
        return VDLRegressor(latent_dim=cfg.latent_dim, hidden=cfg.hidden, epochs=cfg.baseline_epochs,
                            batch_size=cfg.batch_size, learning_rate=cfg.learning_rate, kl_weight=cfg.kl_weight,
                            random_state=seed)
    if system == "dnn":
        return DNNRegressor(hidden=cfg.hidden, epochs=cfg.baseline_epochs, batch_size=cfg.batch_size,
                            learning_rate=cfg.learning_rate, random_state=seed)
    raise ConfigError(f"unknown system {system!r}")


@dataclass
class LocalizationModel:
    """A fitted estimator plus what is needed to turn raw packets into metres."""

    system: str
    estimator: object
    ap_ids: tuple[str, ...]
    view_spec: ViewSpec
    scaler: LocationScaler
    n_antennas: int
    subcarriers: SubcarrierSpec
    train_config: TrainConfig
    seed: int

    def _check_layout(self, ds: CsiDataset) -> None:
        if tuple(ds.ap_ids) != tuple(self.ap_ids):
            raise DataError(f"dataset APs {ds.ap_ids} do not match the model's {self.ap_ids}")
        if ds.n_antennas != self.n_antennas or ds.subcarriers.indices != self.subcarriers.indices:
            raise DataError("dataset antenna/subcarrier layout does not match the model")

    def features(self, raw: np.ndarray) -> np.ndarray:
        raw = np.asarray(raw)
        expected = (len(self.ap_ids), self.n_antennas, self.subcarriers.count)
        if raw.ndim != 4 or raw.shape[1:] != expected:
            raise DataError(f"raw CSI must be (n, {expected[0]}, {expected[1]}, {expected[2]}), got {raw.shape}")
        return encode_phasors(relative_phasors(raw))

    def predict_raw(self, raw: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
        """Locations in metres and, for VSDL, the dominant-view weights."""
        X = self.features(raw)
        if self.system == "vsdl":
            out = self.estimator.forward(X)
            return self.scaler.inverse_transform(out.y_hat), out.u_hat
        return self.scaler.inverse_transform(self.estimator.predict(X)), None

    def predict_dataset(self, ds: CsiDataset) -> tuple[np.ndarray, np.ndarray | None]:
        self._check_layout(ds)
        return self.predict_raw(ds.raw)

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        state = self.estimator.get_state()
        if self.system == "vsdl":
            blobs = {}
            per_view: dict[int, dict] = {}
            for name, arr in state["stage1"].items():
                k = int(name.split(".", 1)[0][len("view"):])
                per_view.setdefault(k, {})[name] = arr
            for k in sorted(per_view):
                blobs[f"stage1_view{k + 1}.bin"] = dumps(per_view[k])
            blobs["stage2.bin"] = dumps(state["stage2"])
        else:
            blobs = {"model.bin": dumps(state["network"])}
        for name, blob in blobs.items():
            (directory / name).write_bytes(blob)
        params = self.estimator.get_params()
        if params.get("view_columns") is not None:
            params["view_columns"] = [np.asarray(c).tolist() for c in params["view_columns"]]
        params["hidden"] = list(params["hidden"])
        manifest = {
            "format": BUNDLE_FORMAT,
            "version": BUNDLE_VERSION,
            "system": self.system,
            "seed": self.seed,
            "estimator_params": params,
            "n_features": int(self.estimator.n_features_in_),
            "ap_ids": list(self.ap_ids),
            "view_spec": self.view_spec.to_dict(),
            "normalization": self.scaler.to_dict(),
            "n_antennas": self.n_antennas,
            "subcarriers": {"indices": list(self.subcarriers.indices), "delta_f": self.subcarriers.delta_f,
                            "center_freq": self.subcarriers.center_freq, "max_index": self.subcarriers.max_index},
            "train_config": self.train_config.to_dict(),
            "files": {name: hashlib.sha256(blob).hexdigest() for name, blob in sorted(blobs.items())},
        }
        (directory / "bundle.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, directory: str | Path) -> "LocalizationModel":
        directory = Path(directory)
        try:
            manifest = json.loads((directory / "bundle.json").read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read bundle manifest in {directory}: {exc}") from None
        if manifest.get("format") != BUNDLE_FORMAT or manifest.get("version") != BUNDLE_VERSION:
            raise DataError(f"{directory} is not a version {BUNDLE_VERSION} model bundle")
        if "normalization" not in manifest:
            raise DataError("bundle lacks normalization constants")
        arrays = {}
        for name, digest in manifest["files"].items():
            blob = (directory / name).read_bytes()
            if hashlib.sha256(blob).hexdigest() != digest:
                raise DataError(f"bundle file {name} does not match its recorded checksum")
            arrays[name] = loads(blob)
        system = manifest["system"]
        params = dict(manifest["estimator_params"])
        params["hidden"] = tuple(params["hidden"])
        est = {"vsdl": VSDLRegressor, "vdl": VDLRegressor, "dnn": DNNRegressor}[system](**params)
        if system == "vsdl":
            stage1 = {}
            for name, arrs in arrays.items():
                if name.startswith("stage1_view"):
                    stage1.update(arrs)
            est.set_state(manifest["n_features"], {"stage1": stage1, "stage2": arrays["stage2.bin"]})
        else:
            est.set_state(manifest["n_features"], {"network": arrays["model.bin"]})
        sc = manifest["subcarriers"]
        return cls(
            system=system,
            estimator=est,
            ap_ids=tuple(manifest["ap_ids"]),
            view_spec=ViewSpec.from_dict(manifest["view_spec"]),
            scaler=LocationScaler.from_dict(manifest["normalization"]),
            n_antennas=int(manifest["n_antennas"]),
            subcarriers=SubcarrierSpec(tuple(sc["indices"]), sc["delta_f"], sc["center_freq"], sc["max_index"]),
            train_config=TrainConfig.from_dict(manifest["train_config"]),
            seed=int(manifest["seed"]),
        )


def train_system(system: str, ds: CsiDataset, cfg: TrainConfig, seed: int) -> LocalizationModel:
    """Fit one system on the training split of ``ds``."""
    train = ds.train()
    if len(train) == 0:
        raise DataError("dataset has no training packets")
    if np.isnan(train.location_m).any():
        raise DataError("training packets need location labels")
    est = build_estimator(system, cfg, train.view_columns() if system == "vsdl" else None, seed)
    est.fit(train.features(), train.location, train.view_label)
    return LocalizationModel(system, est, ds.ap_ids, ds.view_spec, ds.scaler, ds.n_antennas, ds.subcarriers, cfg, seed)
