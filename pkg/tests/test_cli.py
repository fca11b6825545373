import csv
import json

import numpy as np
import pytest

from fairfis.cli import main
from fairfis.data import load_dataset
from fairfis.fairness import tree_importance
from fairfis.tree import fit_tree

DATA_FLAGS = ["--target", "y", "--protected", "z"]


@pytest.fixture(scope="module")
def sim_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "sim.csv"
    assert main(["simulate", "--n", "300", "--seed", "3", "--out", str(path)]) == 0
    return path


@pytest.fixture
def depth_one_csv(tmp_path):
    path = tmp_path / "d1.csv"
    path.write_text("a,b,z,y\n1,0,0,0\n2,0,0,0\n3,0,1,1\n4,0,1,1\n")
    return path


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_simulate_writes_dataset_and_sidecar(sim_csv):
    assert sim_csv.exists()
    spec = json.loads(sim_csv.with_name("sim.csv.json").read_text())
    assert spec["seed"] == 3 and spec["n"] == 300
    d = load_dataset(sim_csv, "y", "z")
    assert (d.n, d.p) == (300, 12)


@pytest.mark.parametrize("model", ["tree", "forest", "boosting"])
def test_train_smoke(tmp_path, sim_csv, capsys, model):
    out = tmp_path / "m.json"
    args = ["train", "--data", str(sim_csv), *DATA_FLAGS, "--model", model, "--n-trees", "5", "--n-stages", "5",
            "--out", str(out)]
    assert main(args) == 0
    printed = capsys.readouterr().out
    accuracy = float(printed.split("accuracy:")[1].split()[0])
    assert 0.0 <= accuracy <= 1.0
    assert "fairness:" in printed
    first = out.read_bytes()
    assert main(args) == 0
    assert out.read_bytes() == first


def test_eqop_on_regression_is_usage_error(tmp_path, sim_csv, capsys):
    code = main(["train", "--data", str(sim_csv), *DATA_FLAGS, "--task", "regression", "--metric", "eqop",
                 "--out", str(tmp_path / "m.json")])
    assert code == 2
    assert "EQOP requires classification" in capsys.readouterr().err


def test_argparse_usage_error_exit_code(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["train", "--data", "x.csv"])
    assert exc.value.code == 2


def test_missing_data_is_data_error(tmp_path, capsys):
    code = main(["train", "--data", str(tmp_path / "nope.csv"), *DATA_FLAGS, "--out", str(tmp_path / "m.json")])
    assert code == 1
    assert "missing file" in capsys.readouterr().err


def test_depth_one_importance_csv(tmp_path, depth_one_csv):
    model = tmp_path / "m.json"
    assert main(["train", "--data", str(depth_one_csv), *DATA_FLAGS, "--max-depth", "1", "--out", str(model)]) == 0
    out = tmp_path / "scores.csv"
    svg = tmp_path / "chart.svg"
    assert main(["importance", "--model-file", str(model), "--data", str(depth_one_csv), *DATA_FLAGS,
                 "--out", str(out), "--svg", str(svg)]) == 0
    rows = read_rows(out)
    assert [r["feature"] for r in rows] == ["a", "b"]
    assert [float(r["fis"]) for r in rows] == [1.0, 0.0]
    assert [float(r["fairfis"]) for r in rows] == [-1.0, 0.0]
    text = svg.read_text()
    assert 'class="neg"' in text and "-1.000000000000" in text


def test_all_leaf_model_gives_zero_scores(tmp_path, sim_csv):
    model = tmp_path / "m.json"
    assert main(["train", "--data", str(sim_csv), *DATA_FLAGS, "--max-depth", "0", "--out", str(model)]) == 0
    out = tmp_path / "scores.csv"
    assert main(["importance", "--model-file", str(model), "--data", str(sim_csv), *DATA_FLAGS, "--out", str(out)]) == 0
    rows = read_rows(out)
    assert all(float(r["fis"]) == 0.0 and float(r["fairfis"]) == 0.0 for r in rows)


@pytest.mark.parametrize("model", ["tree", "forest"])
def test_csv_and_json_agree(tmp_path, sim_csv, model):
    model_file = tmp_path / "m.json"
    assert main(["train", "--data", str(sim_csv), *DATA_FLAGS, "--model", model, "--n-trees", "4",
                 "--out", str(model_file)]) == 0
    base = ["importance", "--model-file", str(model_file), "--data", str(sim_csv), *DATA_FLAGS, "--metric", "eqop"]
    assert main(base + ["--out", str(tmp_path / "s.csv")]) == 0
    assert main(base + ["--format", "json", "--out", str(tmp_path / "s.json")]) == 0
    rows = read_rows(tmp_path / "s.csv")
    doc = json.loads((tmp_path / "s.json").read_text())
    assert [float(r["fis"]) for r in rows] == doc["fis"]
    assert [float(r["fairfis"]) for r in rows] == doc["fairfis"]


def test_importance_feature_count_mismatch(tmp_path, sim_csv, depth_one_csv, capsys):
    model = tmp_path / "m.json"
    assert main(["train", "--data", str(depth_one_csv), *DATA_FLAGS, "--out", str(model)]) == 0
    code = main(["importance", "--model-file", str(model), "--data", str(sim_csv), *DATA_FLAGS,
                 "--out", str(tmp_path / "s.csv")])
    assert code == 1
    assert "feature count mismatch" in capsys.readouterr().err


def test_corrupted_model_file(tmp_path, sim_csv, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"kind": "tree"')
    code = main(["importance", "--model-file", str(bad), "--data", str(sim_csv), *DATA_FLAGS,
                 "--out", str(tmp_path / "s.csv")])
    assert code == 1
    assert "corrupted" in capsys.readouterr().err


def test_surrogate_with_own_labels(tmp_path, sim_csv, capsys):
    d = load_dataset(sim_csv, "y", "z")
    preds = tmp_path / "p.csv"
    preds.write_text("pred\n" + "\n".join(str(v) for v in d.y.values) + "\n")
    report_path = tmp_path / "r.json"
    scores_path = tmp_path / "s.csv"
    assert main(["surrogate", "--data", str(sim_csv), *DATA_FLAGS, "--predictions", str(preds),
                 "--out", str(report_path), "--scores-out", str(scores_path)]) == 0
    report = json.loads(report_path.read_text())
    assert report["fidelity"] == 1.0
    direct = tree_importance(fit_tree(d))
    assert report["scores"]["fis"] == [float(v) for v in direct.fis]
    assert report["scores"]["fairfis"] == [float(v) for v in direct.fairfis]
    assert "black_box_accuracy: 1.000000" in capsys.readouterr().out


def test_surrogate_short_predictions(tmp_path, sim_csv, capsys):
    preds = tmp_path / "p.csv"
    preds.write_text("\n".join("1" for _ in range(299)) + "\n")
    code = main(["surrogate", "--data", str(sim_csv), *DATA_FLAGS, "--predictions", str(preds),
                 "--out", str(tmp_path / "r.json")])
    assert code == 1
    assert "predictions/dataset length mismatch" in capsys.readouterr().err


def test_replicate_summary(tmp_path, capsys):
    out = tmp_path / "rep.csv"
    assert main(["replicate", "--n", "200", "--reps", "3", "--seed", "5", "--out", str(out)]) == 0
    rows = read_rows(out)
    assert len(rows) == 12
    assert set(rows[0]) == {"feature", "group", "mean_fis", "sd_fis", "mean_fairfis", "sd_fairfis"}
    assert np.isclose(sum(float(r["mean_fis"]) for r in rows), 1.0)
    assert "G1:" in capsys.readouterr().out


def test_default_seed_is_fixed(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", "--n", "50", "--out", str(a)]) == 0
    assert main(["simulate", "--n", "50", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
