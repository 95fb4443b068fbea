import json

import pytest

import vidcascade as vc

SPEC = {
    "meta": {"width": 16, "height": 16, "channels": 1, "fps": 30, "frame_count": 1500},
    "appearance_rate": 6.0,
    "dwell_frames": 90.0,
    "seed": 4,
}


@pytest.fixture
def clip(tmp_path):
    video = tmp_path / "clip.vcv"
    labels = tmp_path / "truth.csv"
    truth = vc.synth(SPEC, video, labels)
    return video, labels, truth


def test_synth_is_deterministic(clip, tmp_path):
    video, labels, truth = clip
    assert len(truth) == 1500
    assert set(truth) <= {0, 1}
    assert 0 < sum(truth) < len(truth)
    again = vc.synth(SPEC, tmp_path / "again.vcv")
    assert again == truth
    assert vc.read_labels(labels) == truth
    meta = vc.video_meta(video)
    assert (meta["width"], meta["height"], meta["frame_count"]) == (16, 16, 1500)


def test_oracle_only_cascade_reproduces_labels(clip):
    video, labels, truth = clip
    config = {"oracle": {"kind": "ground-truth-file", "label_path": str(labels)}}
    pred, stats = vc.run(config, video)
    assert pred == truth
    assert stats["frames_oracle"] == 1500
    part, _ = vc.run(config, video, begin=100, end=400, workers=2)
    assert part == truth[100:400]


def test_metrics():
    ref = [0] * 60
    pred = [0] * 60
    pred[0] = 1
    pred[1] = 1
    assert vc.windowed_accuracy(pred, ref) == 1.0
    pred[2] = 1
    assert vc.windowed_accuracy(pred, ref) == 0.5
    r = vc.fp_fn_rates(pred, ref)
    assert r["fp"] == 3 and r["fn"] == 0
    assert r["fp_rate"] == pytest.approx(3 / 60)
    assert vc.extract_intervals([0, 1, 1, 0, 1], 2) == [(0.5, 1.5), (2.0, 2.5)]
    assert vc.estimate_cost(1.0, 0.0, 0.0, 0.5, 2.0, 10.0) == pytest.approx(0.5)
    assert vc.estimate_cost(0.5, 0.5, 0.5, 1.0, 2.0, 8.0) == pytest.approx(0.5 + 0.5 + 1.0)
    assert vc.error_budget(0.01, 250) == 2


def test_errors_map_to_python_exceptions(tmp_path):
    with pytest.raises(ValueError):
        vc.fp_fn_rates([0, 1], [0])
    with pytest.raises(ValueError):
        vc.synth("{not json", tmp_path / "x.vcv")
    with pytest.raises(OSError):
        vc.read_labels(tmp_path / "missing.csv")


def test_cli_search_and_run(clip, tmp_path):
    video, labels, truth = clip
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({
        "detectors": [{"mode": "earlier-frame", "metric": "global-mse",
                       "t_diff_frames": 5, "t_skip_frames": 5}],
        "archs": [{"hidden_layers": 1, "hidden_width": 4}],
    }))
    out = tmp_path / "search"
    code = vc.run_cli(["search", "--video", str(video), "--labels", str(labels), "--grid", str(grid),
                       "--input-width", "8", "--input-height", "8", "--epochs", "1",
                       "--fp-star", "0.5", "--fn-star", "0.5", "--t-full", "0.01", "--out", str(out)])
    assert code == 0
    result = json.loads((out / "search.json").read_text())
    assert result["feasible"]
    pred, stats = vc.run(json.loads((out / "config.json").read_text()), video)
    assert len(pred) == len(truth)
    assert stats["frames_skipped"] + stats["frames_suppressed"] + stats["frames_model_decided"] \
        + stats["frames_oracle"] == stats["frames_total"]
    assert vc.run_cli(["run", "--bogus"]) == 2
