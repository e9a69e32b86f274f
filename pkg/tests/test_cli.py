import json
from pathlib import Path

import numpy as np
import pytest

from sitsgraph.cli import main


def _dir_bytes(path: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(path.iterdir()) if p.is_file()}


class TestSynth:
    def test_same_seed_byte_identical(self, tmp_path):
        args = ["synth", "--kind", "seasonal", "--seed", "7", "--t", "6", "--height", "12", "--width", "12", "--blobs", "3", "--period", "3"]
        assert main(args + ["--out", str(tmp_path / "a")]) == 0
        assert main(args + ["--out", str(tmp_path / "b")]) == 0
        a, b = _dir_bytes(tmp_path / "a"), _dir_bytes(tmp_path / "b")
        assert set(a) == set(b)
        for name in a:
            if name != "run_config.json":  # differs by the out path itself
                assert a[name] == b[name], name

    def test_run_config_written(self, tmp_path):
        main(["synth", "--seed", "1", "--t", "4", "--height", "8", "--width", "8", "--blobs", "2", "--period", "2", "--out", str(tmp_path / "c")])
        cfg = json.loads((tmp_path / "c" / "run_config.json").read_text())
        assert cfg["seed"] == 1 and cfg["subcommand"] == "synth"


class TestExitCodes:
    def test_usage_error_is_2(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as e:
            main(["build-graph", "--cube", "x", "--seg", "y", "--st", "periodic:0", "--out", str(tmp_path)])
        assert e.value.code == 2

    def test_unknown_subcommand_is_2(self):
        with pytest.raises(SystemExit) as e:
            main(["frobnicate"])
        assert e.value.code == 2

    def test_data_error_is_1(self, tmp_path, capsys):
        assert main(["segment", "--cube", str(tmp_path / "nope"), "--out", str(tmp_path / "s")]) == 1
        assert "error:" in capsys.readouterr().err

    def test_bad_config_key_is_2(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 3, "bogus_key": 1}))
        with pytest.raises(SystemExit) as e:
            main(["synth", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert e.value.code == 2


class TestConfigReplay:
    def test_rerun_from_run_config(self, tmp_path):
        main(["synth", "--seed", "5", "--t", "4", "--height", "8", "--width", "8", "--blobs", "2", "--period", "2", "--out", str(tmp_path / "a")])
        rc = tmp_path / "a" / "run_config.json"
        assert main(["synth", "--config", str(rc), "--out", str(tmp_path / "b")]) == 0
        assert (tmp_path / "a" / "cube.bin").read_bytes() == (tmp_path / "b" / "cube.bin").read_bytes()

    def test_explicit_flag_overrides_config(self, tmp_path):
        main(["synth", "--seed", "5", "--t", "4", "--height", "8", "--width", "8", "--blobs", "2", "--period", "2", "--out", str(tmp_path / "a")])
        rc = tmp_path / "a" / "run_config.json"
        main(["synth", "--config", str(rc), "--seed", "6", "--out", str(tmp_path / "c")])
        cfg = json.loads((tmp_path / "c" / "run_config.json").read_text())
        assert cfg["seed"] == 6


class TestPipeline:
    def test_segment_features_graph_export(self, tmp_path):
        cube = tmp_path / "cube"
        main(["synth", "--kind", "context", "--seed", "3", "--cells", "4", "--cell-px", "3", "--t", "2", "--out", str(cube)])
        assert main(["segment", "--cube", str(cube), "--algo", "felzenszwalb", "--scale", "1e-6", "--min-size", "1", "--out", str(tmp_path / "seg"), "--threads", "1"]) == 0
        assert main(["features", "--cube", str(cube), "--seg", str(tmp_path / "seg"), "--out", str(tmp_path / "feat")]) == 0
        header = (tmp_path / "feat" / "features.csv").read_text().splitlines()[0]
        assert header.startswith("object_id,")
        assert main(["build-graph", "--cube", str(cube), "--seg", str(tmp_path / "seg"), "--spatial", "adjacency", "--st", "overlap:1", "--out", str(tmp_path / "graph")]) == 0
        assert main(["export", "--graph", str(tmp_path / "graph" / "graph.json"), "--format", "dot", "--out", str(tmp_path / "g.dot")]) == 0
        assert (tmp_path / "g.dot").read_text().startswith("digraph")
        assert main(["events", "--graph", str(tmp_path / "graph" / "graph.json"), "--out", str(tmp_path / "ev")]) == 0
        assert (tmp_path / "ev" / "events.csv").read_text().startswith("node,event,t")
        assert main(["mine", "--graph", str(tmp_path / "graph" / "graph.json"), "--feature", "0", "--bins", "2", "--minsup", "2", "--maxlen", "2", "--out", str(tmp_path / "pat")]) == 0
        pats = json.loads((tmp_path / "pat" / "patterns.json").read_text())
        assert pats["patterns"]

    def test_train_predict_eval(self, tmp_path):
        cube = tmp_path / "cube"
        main(["synth", "--kind", "context", "--seed", "9", "--cells", "5", "--cell-px", "3", "--t", "2", "--out", str(cube)])
        main(["segment", "--cube", str(cube), "--algo", "felzenszwalb", "--scale", "1e-6", "--min-size", "1", "--out", str(tmp_path / "seg")])
        main(["build-graph", "--cube", str(cube), "--seg", str(tmp_path / "seg"), "--spatial", "adjacency", "--st", "overlap:1", "--out", str(tmp_path / "graph")])
        g = str(tmp_path / "graph" / "graph.json")
        assert main(["train", "--graph", g, "--conv", "sage", "--hidden", "8", "--layers", "2", "--lr", "1e-2", "--epochs", "10", "--seed", "0", "--out", str(tmp_path / "model")]) == 0
        ckpt = str(tmp_path / "model" / "checkpoint.bin")
        assert main(["predict", "--checkpoint", ckpt, "--graph", g, "--out", str(tmp_path / "pred")]) == 0
        preds = json.loads((tmp_path / "pred" / "predictions.json").read_text())
        assert len(preds["node_class"]) == 50
        assert main(["eval", "--task", "classify", "--checkpoint", ckpt, "--graph", g, "--seg", str(tmp_path / "seg"), "--cube", str(cube), "--out", str(tmp_path / "rep")]) == 0
        rep = json.loads((tmp_path / "rep" / "report.json").read_text())
        assert set(rep) >= {"per_class_iou", "miou", "oa", "majority_upper_bound"}

    def test_forecast_train_predict(self, tmp_path):
        cubes = []
        for s in range(3):
            d = tmp_path / f"site{s}"
            main(["synth", "--seed", str(s), "--t", "8", "--height", "12", "--width", "12", "--blobs", "3", "--period", "6", "--out", str(d)])
            cubes.append(str(d))
        out = tmp_path / "fc"
        assert main(
            ["forecast", "train", "--cubes", *cubes, "--input-len", "6", "--segments", "4",
             "--hidden", "8", "--rounds", "1", "--lr", "1e-3", "--epochs", "2", "--seed", "0",
             "--out", str(out)]
        ) == 0
        assert main(
            ["forecast", "predict", "--checkpoint", str(out / "checkpoint.bin"), "--cube", cubes[0],
             "--out", str(tmp_path / "fp")]
        ) == 0
        frame = np.frombuffer((tmp_path / "fp" / "frame.bin").read_bytes(), dtype="<f4")
        assert frame.size == 144
        rep = json.loads((tmp_path / "fp" / "metrics.json").read_text())
        assert set(rep) == {"rmse", "psnr", "ssim"}

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["--version"])
        assert e.value.code == 0
