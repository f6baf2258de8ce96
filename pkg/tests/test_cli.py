import json

import pytest

from vsdl.cli import main

TINY = ["--set", "train.latent_dim=4", "--set", "train.hidden=[16]", "--set", "train.stage1_epochs=1",
        "--set", "train.stage2_epochs=1", "--set", "train.baseline_epochs=1"]


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["simulate", "--seed", "3", "--packets-per-point", "2", "--out", str(d / "data.jsonl")]) == 0
    assert main(["train", "--data", str(d / "data.jsonl"), "--system", "vsdl", "--out", str(d / "bundle"), *TINY]) == 0
    return d


def tree_bytes(path):
    if path.is_file():
        return {path.name: path.read_bytes()}
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def test_simulate_is_reproducible(workdir):
    assert main(["simulate", "--seed", "3", "--packets-per-point", "2", "--out", str(workdir / "again.jsonl")]) == 0
    assert (workdir / "again.jsonl").read_bytes() == (workdir / "data.jsonl").read_bytes()


def test_train_is_reproducible(workdir):
    out = workdir / "bundle2"
    assert main(["train", "--data", str(workdir / "data.jsonl"), "--system", "vsdl", "--out", str(out), *TINY]) == 0
    assert tree_bytes(out) == tree_bytes(workdir / "bundle")


def test_predict_writes_csv(workdir, capsys):
    args = ["predict", "--bundle", str(workdir / "bundle"), "--packets", str(workdir / "data.jsonl")]
    assert main(args + ["--out", str(workdir / "p1.csv")]) == 0
    assert main(args + ["--out", str(workdir / "p2.csv")]) == 0
    text = (workdir / "p1.csv").read_text()
    assert text == (workdir / "p2.csv").read_text()
    lines = text.splitlines()
    assert lines[0] == "point_id,packet,y1_m,y2_m,u_hat_1,u_hat_2"
    assert len(lines) == 1 + 52 * 2
    assert main(args) == 0
    assert capsys.readouterr().out == text


def test_evaluate_is_reproducible(workdir):
    for name in ("e1", "e2"):
        assert main(["evaluate", "--bundle", str(workdir / "bundle"), "--data", str(workdir / "data.jsonl"),
                     "--out", str(workdir / name)]) == 0
    assert tree_bytes(workdir / "e1") == tree_bytes(workdir / "e2")
    report = json.loads((workdir / "e1" / "report.json").read_text())
    assert report["n"] == 18 and report["system"] == "vsdl"


def test_compare_is_reproducible(tmp_path):
    args = ["compare", *TINY, "--set", "packets_per_point=1", "--set", "seeds=[0]"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")
    assert {"report.json", "comparison.txt", "cdf_vsdl_seed0.csv"} <= set(tree_bytes(tmp_path / "a"))


def test_exit_codes(tmp_path, workdir):
    assert main(["simulate", "--set", "train.alpha=2", "--out", str(tmp_path / "x")]) == 2
    assert main(["simulate", "--set", "nonsense=1", "--out", str(tmp_path / "x")]) == 2
    (tmp_path / "bad.jsonl").write_text("garbage\n")
    assert main(["train", "--data", str(tmp_path / "bad.jsonl"), "--out", str(tmp_path / "b")]) == 3
    assert main(["predict", "--bundle", str(tmp_path / "nobundle"), "--packets", str(workdir / "data.jsonl")]) == 3
    with pytest.raises(SystemExit):
        main(["train", "--system", "svm", "--data", "x", "--out", "y"])
