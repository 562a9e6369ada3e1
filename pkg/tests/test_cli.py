import math
from pathlib import Path

import numpy as np
import pytest
import yaml

from vidseg.cli import main
from vidseg.dataio import load_dataset, save_dataset
from vidseg.nn import Network, approx_spec, ensemble_spec, init_params, priming_spec, save_checkpoint
from vidseg.synthgen import SceneConfig, class_table, generate_many

TABLE = class_table()
C = TABLE.num_scored


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data") / "ds"
    seqs = generate_many(SceneConfig(width=96, height=64, num_frames=8, seed=2), 3)
    save_dataset(seqs, TABLE, root, split={"train": [0, 1], "test": [2]})
    return root


@pytest.fixture(scope="module")
def checkpoints(tmp_path_factory):
    """Untrained nets; enough for exercising command plumbing."""
    ckdir = tmp_path_factory.mktemp("ck")
    p, a, e = priming_spec(C), approx_spec(C), ensemble_spec(C)
    save_checkpoint(str(ckdir / "priming.npz"), {"priming": Network(p, init_params(p, 0))})
    save_checkpoint(str(ckdir / "joint.npz"), {
        "approx": Network(a, init_params(a, 1)),
        "ensemble": Network(e, init_params(e, 2)),
    })
    return ckdir / "priming.npz", ckdir / "joint.npz"


class TestGenerate:
    def test_writes_loadable_dataset(self, tmp_path):
        out = tmp_path / "gen"
        rc = main([
            "generate", "--out", str(out), "--sequences", "2", "--frames", "4",
            "--width", "64", "--height", "48", "--seed", "5", "--train-fraction", "0.5",
        ])
        assert rc == 0
        ds = load_dataset(out)
        assert len(ds.sequences) == 2
        assert set(ds.split) == {"train", "test"}

    def test_deterministic_given_seed(self, tmp_path):
        args = ["generate", "--sequences", "1", "--frames", "3",
                "--width", "64", "--height", "48", "--seed", "7"]
        assert main(args + ["--out", str(tmp_path / "a")]) == 0
        assert main(args + ["--out", str(tmp_path / "b")]) == 0
        fa = (tmp_path / "a" / "seq_000" / "frame_0001.png").read_bytes()
        fb = (tmp_path / "b" / "seq_000" / "frame_0001.png").read_bytes()
        assert fa == fb


class TestDensity:
    def test_reports_and_figure(self, dataset, tmp_path):
        out = tmp_path / "density.csv"
        rc = main(["density", str(dataset), "--out", str(out)])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "sequence,spatial_density,temporal_density"
        assert lines[-1].startswith("overall,0.875,30.0")
        assert out.with_suffix(".png").is_file()

    def test_no_plot(self, dataset, tmp_path):
        out = tmp_path / "d.csv"
        assert main(["density", str(dataset), "--out", str(out), "--no-plot"]) == 0
        assert not out.with_suffix(".png").exists()

    def test_missing_dataset_is_data_error(self, tmp_path):
        assert main(["density", str(tmp_path / "nope"), "--out", str(tmp_path / "x.csv")]) == 2


class TestSubn:
    def test_csv_schema(self, dataset, tmp_path):
        out = tmp_path / "subn.csv"
        rc = main(["subn", str(dataset), "--strides", "1,2,4", "--out", str(out)])
        assert rc == 0
        lines = out.read_text().splitlines()
        names = [TABLE.name_of(cid) for cid in TABLE.scored_ids]
        assert lines[0] == "stride," + ",".join(names) + ",miou"
        first = lines[1].split(",")
        assert first[0] == "1" and first[-1] == "1.0"
        assert out.with_suffix(".png").is_file()


class TestBudget:
    def test_cost_model_file(self, tmp_path):
        cm = tmp_path / "costs.yaml"
        cm.write_text(yaml.safe_dump({
            "cost_prime": 1.0, "cost_approx": 0.1, "cost_ensemble": 0.1,
        }))
        out = tmp_path / "budget.csv"
        rc = main(["budget", "--cost-model", str(cm), "--periods", "1,2,5,inf",
                   "-L", "60", "--out", str(out)])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "period,relative_runtime"
        assert lines[1] == "1,1.0"
        assert lines[3] == "5,0.36"
        assert lines[4].startswith("inf,")

    def test_requires_source(self, tmp_path):
        assert main(["budget", "--out", str(tmp_path / "b.csv")]) == 2

    def test_calibrate_writes_cost_model(self, checkpoints, tmp_path):
        priming, joint = checkpoints
        saved = tmp_path / "measured.yaml"
        rc = main([
            "budget", "--calibrate", "--priming", str(priming), "--joint", str(joint),
            "--height", "48", "--width", "64", "--repeats", "3",
            "--save-cost-model", str(saved), "--out", str(tmp_path / "b.csv"), "--no-plot",
        ])
        assert rc == 0
        doc = yaml.safe_load(saved.read_text())
        assert doc["cost_prime"] > 0 and "calibrated" in doc["provenance"]


class TestRunAndEval:
    def test_run_outputs(self, dataset, checkpoints, tmp_path):
        priming, joint = checkpoints
        out = tmp_path / "run"
        rc = main([
            "run", str(dataset), "--priming", str(priming), "--joint", str(joint),
            "--out", str(out), "--period", "2", "--split", "test", "--seed", "0",
        ])
        assert rc == 0
        assert (out / "metrics.csv").is_file()
        assert (out / "cost_trace.csv").is_file()
        assert (out / "run_manifest.yaml").is_file()
        assert (out / "seq_002" / "label_0000.png").is_file()
        manifest = yaml.safe_load((out / "run_manifest.yaml").read_text())
        assert manifest["cost_model_provenance"] == "builtin-default"
        trace = (out / "cost_trace.csv").read_text().splitlines()
        assert trace[0] == "sequence,frame,primed,cost"
        assert len(trace) == 1 + 8

    def test_run_twice_byte_identical(self, dataset, checkpoints, tmp_path):
        priming, joint = checkpoints
        outs = []
        for tag in ("r1", "r2"):
            out = tmp_path / tag
            rc = main([
                "run", str(dataset), "--priming", str(priming), "--joint", str(joint),
                "--out", str(out), "--split", "test", "--seed", "3", "--no-plot",
            ])
            assert rc == 0
            outs.append(out)
        for name in ("metrics.csv", "cost_trace.csv"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

    def test_eval_of_run_matches_run_metrics(self, dataset, checkpoints, tmp_path):
        priming, joint = checkpoints
        out = tmp_path / "run"
        main(["run", str(dataset), "--priming", str(priming), "--joint", str(joint),
              "--out", str(out), "--split", "test", "--no-plot"])
        metrics_out = tmp_path / "eval.csv"
        rc = main(["eval", str(dataset), "--pred", str(out), "--split", "test",
                   "--out", str(metrics_out), "--no-plot"])
        assert rc == 0
        run_lines = (out / "metrics.csv").read_text().splitlines()
        eval_lines = metrics_out.read_text().splitlines()
        # same per-class rows; the run CSV has an extra relative_runtime column
        for rl, el in zip(run_lines[1:], eval_lines[1:]):
            assert rl.rsplit(",", 1)[0] == el

    def test_eval_identical_gt_is_perfect(self, dataset, tmp_path):
        ds = load_dataset(dataset)
        pred = tmp_path / "pred"
        from vidseg.dataio import save_label_image

        for name, seq in zip(ds.names, ds.sequences):
            (pred / name).mkdir(parents=True)
            for i, frame in enumerate(seq.frames):
                lab = frame.label.data.copy()
                lab[lab == TABLE.unknown_id] = 0  # predictions carry no unknown
                from vidseg.core import LabelMap

                save_label_image(LabelMap(lab), pred / name / f"label_{i:04d}.png")
        out = tmp_path / "metrics.csv"
        rc = main(["eval", str(dataset), "--pred", str(pred), "--out", str(out), "--no-plot"])
        assert rc == 0
        rows = out.read_text().splitlines()
        assert rows[-1].split(",")[2] == "1.0"  # mean iou

    def test_missing_prediction_is_data_error(self, dataset, tmp_path):
        assert main(["eval", str(dataset), "--pred", str(tmp_path / "void"),
                     "--out", str(tmp_path / "m.csv")]) == 2


class TestTrainCommand:
    def test_priming_then_joint_then_run(self, tmp_path):
        root = tmp_path / "ds"
        seqs = generate_many(SceneConfig(width=64, height=48, num_frames=4, seed=11), 2)
        save_dataset(seqs, TABLE, root)
        pck = tmp_path / "p.npz"
        rc = main(["train", str(root), "--stage", "priming", "--out", str(pck),
                   "--epochs", "1", "--quiet", "--seed", "0"])
        assert rc == 0 and pck.is_file()
        jck = tmp_path / "j.npz"
        rc = main(["train", str(root), "--stage", "joint", "--priming", str(pck),
                   "--out", str(jck), "--epochs", "1", "--quiet", "--seed", "0"])
        assert rc == 0 and jck.is_file()
        out = tmp_path / "run"
        rc = main(["run", str(root), "--priming", str(pck), "--joint", str(jck),
                   "--out", str(out), "--no-plot"])
        assert rc == 0 and (out / "metrics.csv").is_file()

    def test_joint_requires_priming_checkpoint(self, dataset, tmp_path):
        rc = main(["train", str(dataset), "--stage", "joint",
                   "--out", str(tmp_path / "j.npz"), "--quiet"])
        assert rc == 2

    def test_config_file_supplies_defaults(self, tmp_path):
        root = tmp_path / "ds"
        seqs = generate_many(SceneConfig(width=64, height=48, num_frames=3, seed=12), 1)
        save_dataset(seqs, TABLE, root)
        cfg = tmp_path / "train.yaml"
        cfg.write_text(yaml.safe_dump({"epochs": 1, "learning_rate": 0.005}))
        rc = main(["train", str(root), "--stage", "priming", "--config", str(cfg),
                   "--out", str(tmp_path / "p.npz"), "--quiet"])
        assert rc == 0


class TestUsageErrors:
    def test_unknown_subcommand(self):
        assert main(["frobnicate"]) == 1

    def test_unknown_flag(self):
        assert main(["density", "x", "--bogus"]) == 1

    def test_missing_required_flag(self):
        assert main(["run", "ds"]) == 1

    def test_bad_period_value(self, dataset, checkpoints, tmp_path):
        priming, joint = checkpoints
        rc = main(["run", str(dataset), "--priming", str(priming), "--joint", str(joint),
                   "--out", str(tmp_path / "o"), "--period", "0"])
        assert rc == 1

    def test_help_exits_zero(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--help"])
        assert exc.value.code == 0
        assert "--period" in capsys.readouterr().out
