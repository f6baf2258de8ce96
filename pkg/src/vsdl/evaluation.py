"""Localization metrics, error reports and the multi-seed comparison run."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import CsiDataset, generate_dataset
from .config import ExperimentConfig
from .errors import VsdlError
from .pipeline import LocalizationModel, train_system

log = logging.getLogger(__name__)

PERCENTILES = (50, 67, 90, 95)


def localization_error(pred_m, true_m) -> np.ndarray:
    """Euclidean distance per row (or a scalar for single points)."""
    return np.linalg.norm(np.asarray(pred_m, dtype=np.float64) - np.asarray(true_m, dtype=np.float64), axis=-1)


def error_cdf(errors) -> tuple[np.ndarray, np.ndarray]:
    """Empirical CDF: sorted errors and cumulative fractions ``k/n``."""
    errors = np.sort(np.asarray(errors, dtype=np.float64).ravel())
    if errors.size == 0:
        raise ValueError("error_cdf needs at least one error")
    return errors, np.arange(1, errors.size + 1) / errors.size


def dominant_view_summary(point_id, location_m, view_label, u_hat) -> list[dict]:
    """Per point: how often argmax of ``u_hat`` hits an informative view, and the median ``u_hat``."""
    out = []
    for p in np.unique(point_id):
        rows = point_id == p
        u = view_label[rows][0]
        picks = np.argmax(u_hat[rows], axis=1)
        out.append({
            "point_id": int(p),
            "location_m": [float(v) for v in location_m[rows][0]],
            "view_label": [int(v) for v in u],
            "argmax_accuracy": float(np.mean(u[picks] == 1)),
            "median_u_hat": [float(v) for v in np.median(u_hat[rows], axis=0)],
        })
    return out


@dataclass
class ErrorReport:
    system: str
    seed: int
    config_hash: str
    errors: np.ndarray
    dominant_view: list[dict] | None = None

    @property
    def mean(self) -> float:
        return float(np.mean(self.errors))

    @property
    def median(self) -> float:
        return float(np.median(self.errors))

    def percentiles(self) -> dict[str, float]:
        return {f"p{q}": float(np.percentile(self.errors, q)) for q in PERCENTILES}

    def cdf(self) -> tuple[np.ndarray, np.ndarray]:
        return error_cdf(self.errors)

    def to_dict(self) -> dict:
        e, f = self.cdf()
        return {
            "system": self.system,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "n": int(self.errors.size),
            "mean": self.mean,
            "median": self.median,
            "percentiles": self.percentiles(),
            "errors": self.errors.tolist(),
            "cdf": [[float(a), float(b)] for a, b in zip(e, f)],
            "dominant_view": self.dominant_view,
        }

    def cdf_csv(self) -> str:
        e, f = self.cdf()
        return "error_m,fraction\n" + "".join(f"{a!r},{b!r}\n" for a, b in zip(e.tolist(), f.tolist()))


def evaluate(model: LocalizationModel, ds: CsiDataset, config_hash: str = "") -> ErrorReport:
    if np.isnan(ds.location_m).any():
        raise VsdlError("evaluation needs packets with known locations")
    pred, u_hat = model.predict_dataset(ds)
    report = ErrorReport(model.system, model.seed, config_hash, localization_error(pred, ds.location_m))
    if u_hat is not None:
        report.dominant_view = dominant_view_summary(ds.point_id, ds.location_m, ds.view_label, u_hat)
    return report


@dataclass
class ExperimentResult:
    config_hash: str
    reports: dict[tuple[str, int], ErrorReport] = field(default_factory=dict)
    models: dict[tuple[str, int], LocalizationModel] = field(default_factory=dict)
    datasets: dict[int, CsiDataset] = field(default_factory=dict)

    @property
    def systems(self) -> list[str]:
        return list(dict.fromkeys(s for s, _ in self.reports))

    def seed_means(self, system: str) -> list[float]:
        return [r.mean for (s, _), r in self.reports.items() if s == system]

    def median_mean(self, system: str) -> float:
        return float(np.median(self.seed_means(system)))

    def table(self) -> str:
        seeds = list(dict.fromkeys(seed for _, seed in self.reports))
        head = f"{'system':<8}" + "".join(f"{'seed ' + str(s):>12}" for s in seeds) + f"{'median':>12}"
        lines = ["Mean localization error (m) on the test split", head]
        for system in self.systems:
            row = f"{system.upper():<8}" + "".join(f"{self.reports[(system, s)].mean:>12.4f}" for s in seeds)
            lines.append(row + f"{self.median_mean(system):>12.4f}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "summary": {s: {"seed_means": self.seed_means(s), "median_of_means": self.median_mean(s)} for s in self.systems},
            "reports": [r.to_dict() for r in self.reports.values()],
        }

    def write(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "report.json").write_text(json.dumps(self.to_dict(), indent=1) + "\n")
        (directory / "comparison.txt").write_text(self.table())
        for (system, seed), r in self.reports.items():
            (directory / f"cdf_{system}_seed{seed}.csv").write_text(r.cdf_csv())


class StageError(VsdlError):
    """Wraps a failure with the experiment stage it happened in."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.exit_code = getattr(cause, "exit_code", 1)


def run_experiment(config: ExperimentConfig, datasets: dict[int, CsiDataset] | None = None,
                   keep_models: bool = False) -> ExperimentResult:
    """Simulate (or reuse) one dataset per seed, train every system and evaluate on the test split.

    With ``keep_models`` the fitted models and datasets stay on the result.
    """
    digest = config.digest()
    result = ExperimentResult(digest)
    for seed in config.seeds:
        try:
            ds = (datasets or {}).get(seed) or generate_dataset(config.topology, config.channel, config.packets_per_point, seed)
        except Exception as exc:
            raise StageError(f"simulate (seed {seed})", exc) from exc
        if keep_models:
            result.datasets[seed] = ds
        test = ds.test()
        for system in config.systems:
            log.info("seed %d: training %s", seed, system)
            try:
                model = train_system(system, ds, config.train, seed)
            except Exception as exc:
                raise StageError(f"train {system} (seed {seed})", exc) from exc
            try:
                result.reports[(system, seed)] = evaluate(model, test, digest)
            except Exception as exc:
                raise StageError(f"evaluate {system} (seed {seed})", exc) from exc
            if keep_models:
                result.models[(system, seed)] = model
    return result
