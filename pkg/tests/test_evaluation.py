import numpy as np
import pytest

from conftest import TINY_TRAIN
from vsdl.config import ExperimentConfig
from vsdl.evaluation import (
    ErrorReport, StageError, dominant_view_summary, error_cdf, evaluate, localization_error, run_experiment,
)
from vsdl.pipeline import train_system


def test_localization_error_examples():
    assert localization_error([3.0, 4.0], [0.0, 0.0]) == 5.0
    assert localization_error([1.0, 1.0], [1.0, 1.0]) == 0.0
    np.testing.assert_allclose(localization_error([[0, 0], [1, 1]], [[0, 1], [4, 5]]), [1.0, 5.0])


def test_error_cdf_examples():
    e, f = error_cdf([3.0, 1.0, 2.0])
    np.testing.assert_array_equal(e, [1.0, 2.0, 3.0])
    np.testing.assert_allclose(f, [1 / 3, 2 / 3, 1.0])
    e, f = error_cdf([0.7])
    assert f[-1] == 1.0
    with pytest.raises(ValueError):
        error_cdf([])


def test_error_report_statistics():
    errors = np.arange(1.0, 101.0)
    r = ErrorReport("vsdl", 0, "h", errors)
    assert r.mean == 50.5 and r.median == 50.5
    assert r.percentiles()["p90"] == pytest.approx(np.percentile(errors, 90))
    d = r.to_dict()
    assert d["n"] == 100 and d["cdf"][-1] == [100.0, 1.0]
    assert r.cdf_csv().splitlines()[0] == "error_m,fraction"


def test_dominant_view_summary():
    pid = np.array([0, 0, 1, 1])
    loc = np.zeros((4, 2))
    labels = np.array([[1, 0], [1, 0], [1, 1], [1, 1]])
    u_hat = np.array([[0.9, 0.1], [0.4, 0.6], [0.5, 0.5], [0.3, 0.7]])
    rows = dominant_view_summary(pid, loc, labels, u_hat)
    assert rows[0]["argmax_accuracy"] == 0.5
    assert rows[1]["argmax_accuracy"] == 1.0
    assert rows[1]["median_u_hat"] == [0.4, 0.6]


def test_evaluate_reports_dominant_view(small_dataset):
    model = train_system("vsdl", small_dataset, TINY_TRAIN, seed=0)
    report = evaluate(model, small_dataset.test(), "abc")
    assert report.errors.shape == (27,)
    assert len(report.dominant_view) == 9
    assert report.config_hash == "abc"


def test_run_experiment_tiny(small_dataset, tmp_path):
    cfg = ExperimentConfig(train=TINY_TRAIN, packets_per_point=3, seeds=(11,), systems=("vsdl", "dnn"))
    result = run_experiment(cfg, datasets={11: small_dataset})
    assert set(result.reports) == {("vsdl", 11), ("dnn", 11)}
    assert "VSDL" in result.table()
    result.write(tmp_path)
    assert (tmp_path / "cdf_dnn_seed11.csv").exists()


def test_run_experiment_names_failing_stage(small_dataset):
    bad = small_dataset.subset(np.arange(len(small_dataset)))
    bad.view_label = np.zeros_like(bad.view_label)
    bad.view_label[:, 0] = 1
    cfg = ExperimentConfig(train=TINY_TRAIN, seeds=(11,), systems=("vsdl",))
    with pytest.raises(StageError, match="train vsdl"):
        run_experiment(cfg, datasets={11: bad})
