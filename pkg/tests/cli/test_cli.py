import csv
import json
from pathlib import Path

import numpy as np
import pytest
import yaml
from typer.testing import CliRunner

from qshs.cli import EXIT_DATA, EXIT_USAGE, app
from qshs.data import load_csv
from qshs.manifest import load_manifest, manifest_path_for
from qshs.model import decision_values, load

runner = CliRunner()


def _invoke(*args: str):
    return runner.invoke(app, [str(arg) for arg in args])


def _rows(path: Path):
    with path.open(newline="") as handle:
        return list(csv.DictReader(handle))


@pytest.fixture
def circle_csv(tmp_path):
    path = tmp_path / "circle.csv"
    result = _invoke("gen", "--kind", "circle", "--n", 300, "--seed", 1, "--out", path)
    assert result.exit_code == 0, result.output
    return path


@pytest.fixture
def circle_model(tmp_path, circle_csv):
    path = tmp_path / "model.json"
    result = _invoke("train", "--data", circle_csv, "--out", path)
    assert result.exit_code == 0, result.output
    return path


def test_gen_writes_dataset_and_manifest(circle_csv):
    data = load_csv(circle_csv)
    assert data.n_samples == 300
    assert data.n_features == 2
    assert int(np.sum(data.y == 1.0)) == 150

    manifest = load_manifest(manifest_path_for(circle_csv))
    assert manifest.command == "gen"
    assert manifest.seed == 1
    assert manifest.status == "ok"
    assert manifest.details["rows"] == 300


def test_gen_smallest_dataset(tmp_path):
    path = tmp_path / "line.csv"
    result = _invoke("gen", "--kind", "line", "--n", 4, "--out", path)
    assert result.exit_code == 0, result.output
    assert len(_rows(path)) == 4


def test_gen_with_noise_records_indices(tmp_path):
    path = tmp_path / "noisy.csv"
    result = _invoke(
        "gen", "--kind", "parabola", "--n", 50, "--flips", 2, "--outliers", 3, "--out", path
    )
    assert result.exit_code == 0, result.output
    assert len(_rows(path)) == 53
    details = load_manifest(manifest_path_for(path)).details
    assert len(details["flipped_indices"]) == 2
    assert details["outlier_indices"] == [50, 51, 52]


@pytest.mark.parametrize(
    "args",
    [
        ("gen", "--kind", "ellipse", "--out", "x.csv"),
        ("gen", "--kind", "circle", "--n", 3, "--out", "x.csv"),
        ("gen", "--kind", "circle", "--margin", 0, "--out", "x.csv"),
        ("gen", "--kind", "circle", "--margin=-0.5", "--out", "x.csv"),
    ],
)
def test_gen_usage_errors(tmp_path, args):
    assert _invoke(*args).exit_code == EXIT_USAGE


def test_train_converges_on_circle(circle_csv, circle_model):
    model = load(circle_model)
    assert model.n_features == 2
    assert model.meta["report"]["converged"] is True

    details = load_manifest(manifest_path_for(circle_model)).details
    assert details["converged"] is True
    assert details["train_accuracy"] >= 0.97


def test_train_iteration_cap_reports_not_converged(tmp_path, circle_csv):
    out = tmp_path / "capped.json"
    result = _invoke("train", "--data", circle_csv, "--max-iter", 0, "--out", out)
    assert result.exit_code == 0, result.output
    assert "converged=false" in result.output
    assert load(out).meta["report"]["converged"] is False


def test_train_history_is_recorded(tmp_path, circle_csv):
    out = tmp_path / "history.json"
    result = _invoke("train", "--data", circle_csv, "--max-iter", 5, "--history", "--out", out)
    assert result.exit_code == 0, result.output
    history = load_manifest(manifest_path_for(out)).details["history"]
    assert 1 <= len(history) <= 5


def test_train_usage_errors(tmp_path, circle_csv):
    assert _invoke("train").exit_code == EXIT_USAGE
    result = _invoke("train", "--data", circle_csv, "--C", -1, "--out", tmp_path / "m.json")
    assert result.exit_code == EXIT_USAGE


def test_train_single_class_is_a_data_error(tmp_path):
    path = tmp_path / "one.csv"
    path.write_text("1,2,1\n3,4,1\n5,6,1\n")
    assert _invoke("train", "--data", path, "--out", tmp_path / "m.json").exit_code == EXIT_DATA


def test_train_reads_config_file(tmp_path, circle_csv):
    config = tmp_path / "run.yml"
    assert _invoke("init", "--path", config).exit_code == 0
    payload = yaml.safe_load(config.read_text())
    payload["solver"]["C"] = 4e6
    config.write_text(yaml.safe_dump(payload))

    out = tmp_path / "m.json"
    result = _invoke("train", "--data", circle_csv, "--config", config, "--out", out)
    assert result.exit_code == 0, result.output
    assert load(out).meta["solver"]["C"] == 4e6

    override = tmp_path / "m2.json"
    result = _invoke("train", "--data", circle_csv, "--config", config, "--C", 2, "--out", override)
    assert result.exit_code == 0, result.output
    assert load(override).meta["solver"]["C"] == 2.0


def test_init_does_not_overwrite_without_force(tmp_path):
    config = tmp_path / "qshs.yml"
    assert _invoke("init", "--path", config).exit_code == 0
    config.write_text("solver:\n  C: 3.0\n")
    result = _invoke("init", "--path", config)
    assert "already exists" in result.output
    assert "3.0" in config.read_text()
    assert _invoke("init", "--path", config, "--force").exit_code == 0
    assert yaml.safe_load(config.read_text())["solver"]["C"] == 1e7


def test_predict_matches_training_labels(tmp_path, circle_csv, circle_model):
    out = tmp_path / "pred.csv"
    result = _invoke("predict", "--model", circle_model, "--data", circle_csv, "--out", out)
    assert result.exit_code == 0, result.output

    rows = _rows(out)
    labels = np.array([float(row["label"]) for row in rows])
    values = np.array([float(row["decision_value"]) for row in rows])
    truth = load_csv(circle_csv).y
    assert labels.size == truth.size
    assert np.mean(labels == truth) >= 0.97
    assert np.all(labels == np.where(values >= 0.0, 1.0, -1.0))


def test_predict_unlabelled_rows(tmp_path, circle_model):
    data = tmp_path / "points.csv"
    data.write_text("0.0,0.0\n0.9,0.9\n")
    out = tmp_path / "pred.csv"
    result = _invoke("predict", "--model", circle_model, "--data", data, "--out", out)
    assert result.exit_code == 0, result.output
    assert len(_rows(out)) == 2


def test_predict_empty_file_writes_header_only(tmp_path, circle_model):
    data = tmp_path / "empty.csv"
    data.write_text("")
    out = tmp_path / "pred.csv"
    result = _invoke("predict", "--model", circle_model, "--data", data, "--out", out)
    assert result.exit_code == 0, result.output
    assert out.read_text() == "label,decision_value\n"


def test_predict_dimension_mismatch(tmp_path, circle_model):
    data = tmp_path / "wide.csv"
    data.write_text("1,2,3,4,1\n5,6,7,8,-1\n")
    out = tmp_path / "pred.csv"
    result = _invoke("predict", "--model", circle_model, "--data", data, "--out", out)
    assert result.exit_code == EXIT_DATA


def test_predict_corrupt_model(tmp_path, circle_csv):
    model = tmp_path / "broken.json"
    model.write_text("{not json")
    result = _invoke("predict", "--model", model, "--data", circle_csv, "--out", tmp_path / "p.csv")
    assert result.exit_code == EXIT_DATA


def test_cv_and_single_cell_grid_agree(tmp_path, circle_csv):
    cv_out = tmp_path / "cv.csv"
    grid_out = tmp_path / "grid.json"
    common = ("--data", circle_csv, "--folds", 3, "--repeats", 1, "--seed", 4)

    result = _invoke("cv", *common, "--C", "1e7", "--sigma", 1000, "--out", cv_out)
    assert result.exit_code == 0, result.output
    result = _invoke("grid", *common, "--grid-C", "1e7", "--grid-sigma", "1000", "--out", grid_out)
    assert result.exit_code == 0, result.output
    assert "Best cell: C=1e+07" in result.output

    cv_row = _rows(cv_out)[0]
    grid_row = json.loads(grid_out.read_text())[0]
    for column in ("mACC", "stdACC", "mNSV", "stdNSV", "C", "sigma"):
        assert float(cv_row[column]) == pytest.approx(grid_row[column])
    assert cv_row["method"] == grid_row["method"] == "qssvm01"
    assert float(cv_row["mACC"]) >= 0.95

    manifest = load_manifest(manifest_path_for(grid_out))
    assert manifest.command == "grid"
    assert manifest.details["C"] == 1e7


def test_train_offset_step_option(tmp_path, circle_csv):
    out = tmp_path / "full.json"
    result = _invoke("train", "--data", circle_csv, "--offset-step", "full", "--out", out)
    assert result.exit_code == 0, result.output
    assert load(out).meta["solver"]["offset_step"] == "full"

    bad = _invoke("train", "--data", circle_csv, "--offset-step", "half", "--out", out)
    assert bad.exit_code == EXIT_USAGE


def test_trace_solver_flag_is_accepted(tmp_path, circle_csv):
    out = tmp_path / "traced.json"
    result = _invoke("--trace-solver", "train", "--data", circle_csv, "--max-iter", 3, "--out", out)
    assert result.exit_code == 0, result.output


def test_cv_without_out_keeps_dataset_manifest(circle_csv):
    common = ("--data", circle_csv, "--folds", 2, "--repeats", 1)
    result = _invoke("cv", *common)
    assert result.exit_code == 0, result.output
    result = _invoke("grid", *common, "--grid-C", "1e7", "--grid-sigma", "1000")
    assert result.exit_code == 0, result.output

    assert load_manifest(manifest_path_for(circle_csv)).command == "gen"
    assert load_manifest(manifest_path_for(circle_csv, tag="cv")).command == "cv"
    assert load_manifest(manifest_path_for(circle_csv, tag="grid")).command == "grid"


def test_manifest_config_repeats_the_run(tmp_path, circle_csv):
    # Header row plus text labels, so the CSV options matter.
    data = load_csv(circle_csv)
    labelled = tmp_path / "labelled.csv"
    with labelled.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["x1", "x2", "side"])
        for row, label in zip(data.X, data.y):
            writer.writerow([*row, "inside" if label > 0 else "outside"])

    config = tmp_path / "run.yml"
    assert _invoke("init", "--path", config).exit_code == 0
    payload = yaml.safe_load(config.read_text())
    payload["csv"] = {"header": True, "label_map": {"inside": 1, "outside": -1}}
    payload["cv"] = {"folds": 3, "repeats": 1, "seed": 4}
    payload["runtime"]["threads"] = 2
    config.write_text(yaml.safe_dump(payload))

    first = tmp_path / "first.csv"
    result = _invoke("cv", "--data", labelled, "--config", config, "--sigma", 3000, "--out", first)
    assert result.exit_code == 0, result.output

    params = load_manifest(manifest_path_for(first)).params
    assert Path(params["config_path"]).resolve() == config.resolve()
    assert params["config"]["csv"]["label_map"] == {"inside": 1, "outside": -1}
    assert params["config"]["csv"]["header"] is True
    assert params["config"]["solver"]["sigma"] == 3000.0

    replay = tmp_path / "replay.yml"
    replay.write_text(yaml.safe_dump(params["config"]))
    second = tmp_path / "second.csv"
    result = _invoke("cv", "--data", labelled, "--config", replay, "--out", second)
    assert result.exit_code == 0, result.output

    def without_timing(rows):
        return [{key: value for key, value in row.items() if key != "cpu_s"} for row in rows]

    assert without_timing(_rows(first)) == without_timing(_rows(second))


def test_grid_table_has_every_cell(tmp_path, circle_csv):
    out = tmp_path / "grid.csv"
    result = _invoke(
        "grid", "--data", circle_csv, "--folds", 2, "--repeats", 1,
        "--grid-C", "0.5,2", "--grid-sigma", "1,4", "--out", out,
    )
    assert result.exit_code == 0, result.output
    rows = _rows(out)
    assert {(float(r["C"]), float(r["sigma"])) for r in rows} == {
        (0.5, 1.0), (0.5, 4.0), (2.0, 1.0), (2.0, 4.0)
    }


@pytest.mark.parametrize("command", ["cv", "grid"])
def test_eval_usage_errors(circle_csv, command):
    assert _invoke(command, "--data", circle_csv, "--folds", 1).exit_code == EXIT_USAGE


def test_grid_rejects_bad_value_list(circle_csv):
    result = _invoke("grid", "--data", circle_csv, "--grid-C", "1,abc")
    assert result.exit_code == EXIT_USAGE


def test_cv_unstratifiable_data(tmp_path):
    path = tmp_path / "tiny.csv"
    path.write_text("0,0,1\n1,1,1\n2,2,-1\n")
    result = _invoke("cv", "--data", path, "--folds", 2, "--repeats", 1)
    assert result.exit_code == EXIT_DATA


def test_boundary_level_points_lie_on_surface(tmp_path, circle_csv, circle_model):
    out = tmp_path / "boundary.csv"
    result = _invoke(
        "boundary", "--model", circle_model, "--data", circle_csv, "--out", out, "--resolution", 60
    )
    assert result.exit_code == 0, result.output

    rows = _rows(out)
    kinds = {row["kind"] for row in rows}
    assert kinds == {"grid", "level", "sample"}
    assert sum(row["kind"] == "grid" for row in rows) == 60 * 60
    assert sum(row["kind"] == "sample" for row in rows) == 300

    level = np.array([[float(r["x1"]), float(r["x2"])] for r in rows if r["kind"] == "level"])
    assert level.shape[0] > 0
    details = load_manifest(manifest_path_for(out)).details
    values = decision_values(load(circle_model), level)
    assert np.all(np.abs(values) <= details["cell_bound"])
    assert details["support_vectors"] == len(load(circle_model).meta["report"]["support_vectors"])


def test_boundary_requires_two_features(tmp_path):
    data = tmp_path / "three.csv"
    data.write_text(
        "\n".join(f"{i},{i % 3},{i % 5},{1 if i % 2 else -1}" for i in range(12)) + "\n"
    )
    model = tmp_path / "m.json"
    result = _invoke("train", "--data", data, "--out", model)
    assert result.exit_code == 0, result.output

    result = _invoke("boundary", "--model", model, "--out", tmp_path / "b.csv")
    assert result.exit_code == EXIT_DATA
