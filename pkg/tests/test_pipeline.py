import json

import numpy as np
import pytest

from dfecs.config import OUTPUT_ENV, RunConfig
from dfecs.errors import ConfigError
from dfecs.io import load_model, read_curve, write_keypoints
from dfecs.pipeline import cross_dataset_run, frames_to_matrix, reference_template
from dfecs.presets import EXTENDED_ALPHAS
from dfecs.synthetic import anchor_free_aus, synthetic_frames

PARTS = ("left_eyebrow", "right_eyebrow", "left_eye", "right_eye", "nose", "lips", "jawline")


def test_run_config_defaults_and_validation(monkeypatch):
    monkeypatch.delenv(OUTPUT_ENV, raising=False)
    cfg = RunConfig()
    assert cfg.beta == 0.05 and cfg.output_dir == "."
    assert cfg.grid_spec().alphas[0] == 5.0
    assert RunConfig(grid="extended").grid_spec().alphas == EXTENDED_ALPHAS
    assert RunConfig(grid="published:CK+").grid_spec().q_values == (10,)
    for bad in ({"beta": 0}, {"grid": "nope"}, {"grid": "published:X"}, {"grid": "custom"},
                {"n_jobs": 0}, {"anchors": "x"}, {"max_iterations": 0}, {"alpha": -1.0}):
        with pytest.raises(ConfigError):
            RunConfig(**bad)
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"betta": 0.1})
    monkeypatch.setenv(OUTPUT_ENV, "/somewhere")
    assert RunConfig().output_dir == "/somewhere"


def test_run_config_file_round_trip(tmp_path):
    cfg = RunConfig(beta=0.1, grid="custom", custom_grid={"alphas": [1.0], "q_values": [2]}, seed=4)
    (tmp_path / "c.json").write_text(json.dumps(cfg.to_dict()))
    back = RunConfig.from_file(tmp_path / "c.json")
    assert back.to_dict() == cfg.to_dict()
    (tmp_path / "bad.json").write_text("[1]")
    with pytest.raises(ConfigError):
        RunConfig.from_file(tmp_path / "bad.json")


def test_reference_template_falls_back_without_jawline():
    U = anchor_free_aus(4, 0)
    frames = synthetic_frames(U, 2, 3, seed=0, missing_jawline=True)
    t = reference_template(frames)
    assert not t.validity[:17].any()
    with pytest.raises(ConfigError):
        reference_template(frames, subject="nobody")


def test_frames_to_matrix_neutral_columns_are_zero():
    frames = synthetic_frames(anchor_free_aus(4, 0), 2, 5, seed=1)
    X, _ = frames_to_matrix(frames)
    assert X.m == 10
    neutral_cols = [i for i, f in enumerate(X.frame_indices) if f == 0]
    assert np.abs(X.X[:, neutral_cols]).max() < 1e-9


def test_cross_dataset_run(tmp_path):
    U = anchor_free_aus(6, 2)
    manifests = {}
    for name, seed, n in (("train", 0, 4), ("testA", 1, 2), ("testB", 2, 2)):
        write_keypoints(synthetic_frames(U, n, 40, seed=seed, magnitude=6.0), tmp_path / f"{name}.csv")
        subjects = {f"s{s:03d}": {"files": f"{name}.csv"} for s in range(n)}
        (tmp_path / f"{name}.json").write_text(json.dumps({"name": name, "subjects": subjects}))
        manifests[name] = tmp_path / f"{name}.json"
    cfg = RunConfig(grid="custom", custom_grid={
        "alphas": [0.5, 0.1], "q_values": [3, 6, 9], "alphas_A": [0.1], "alphas_B": [0.1],
        "k_values": {p: [2, 4] for p in PARTS}})
    out = tmp_path / "run"
    report = cross_dataset_run(manifests["train"], {"A": manifests["testA"], "B": manifests["testB"]},
                               out, cfg)
    assert report["ve_train"] >= 95 and set(report["tests"]) == {"A", "B"}
    assert load_model(out / "model.dfecs").q == report["q"]
    for name in ("A", "B"):
        assert report["tests"][name]["dfecs"] > 90
        assert (out / f"{name}_by_k.svg").exists()
        curve = read_curve(out / f"{name}_dfecs_by_l1.tsv")
        assert np.all(np.diff(curve["mean_ve"]) >= -1e-9)
