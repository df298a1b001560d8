"""End-to-end CLI runs on synthetic fixtures: prepare, train, evaluate."""

import json
from pathlib import Path

import numpy as np
import pytest

from conftest import make_liar_dir
from liarnet.cli import main
from liarnet.models import HyperParams, build_model, save_checkpoint

SMALL_HYPER_CFG = """\
# fast widths for CLI tests; sequence lengths stay at the cache defaults
embed_dim = 8
lstm_hidden = 3
lstm_dense = 4
statement_kernel = 3
statement_filters = 2
attr_kernel = 2
attr_filters = 2
conv_dense = 4
merge_width = 4
patience = none
"""

REPORT_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "classes", "per_class", "weighted", "macro",
                 "accuracy", "total", "confusion"],
    "properties": {
        "schema_version": {"const": 1},
        "classes": {"type": "array", "minItems": 6, "maxItems": 6},
        "accuracy": {"type": "number", "minimum": 0, "maximum": 1},
        "total": {"type": "integer", "minimum": 1},
        "confusion": {"type": "array", "minItems": 6, "maxItems": 6},
        "per_class": {"type": "object"},
        "weighted": {"type": "object", "required": ["precision", "recall", "f1"]},
        "macro": {"type": "object", "required": ["precision", "recall", "f1"]},
    },
}


@pytest.fixture()
def small_cfg(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL_HYPER_CFG, encoding="utf-8")
    return path


class TestPrepare:
    def test_writes_cache_and_reports_sizes(self, tiny_liar_dir, tmp_path, capsys):
        out = tmp_path / "cache"
        assert main(["prepare", "--data-dir", str(tiny_liar_dir), "--out", str(out)]) == 0
        stdout = capsys.readouterr().out
        assert "train: 64 records" in stdout
        assert "published size is 10269" in stdout  # deviation reported, not hidden
        for name in ("vocab.json", "meta.json", "embeddings.npy",
                     "train.jsonl", "valid.jsonl", "test.jsonl"):
            assert (out / name).exists(), name

    def test_rerun_is_byte_identical(self, tiny_liar_dir, tmp_path):
        outs = []
        for name in ("one", "two"):
            out = tmp_path / name
            assert main(["prepare", "--data-dir", str(tiny_liar_dir),
                         "--out", str(out)]) == 0
            outs.append(out)
        for name in ("vocab.json", "meta.json", "embeddings.npy",
                     "train.jsonl", "valid.jsonl", "test.jsonl"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name

    def test_missing_file_exits_2_naming_path(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert main(["prepare", "--data-dir", str(empty), "--out", str(tmp_path / "c")]) == 2
        assert "train.tsv" in capsys.readouterr().err


class TestTrain:
    def test_train_writes_checkpoint_log_and_figure(self, small_cache, small_cfg,
                                                    tmp_path, capsys):
        out = tmp_path / "run"
        code = main(["train", "--data-dir", str(small_cache), "--out", str(out),
                     "--model", "cnn", "--epochs", "2", "--seed", "3",
                     "--config", str(small_cfg)])
        assert code == 0
        assert (out / "cnn.ckpt").exists()
        assert (out / "training_curves.png").stat().st_size > 0
        log_lines = (out / "train.log").read_text().strip().splitlines()
        assert len(log_lines) == 2
        record = json.loads(log_lines[0])
        assert record["epoch"] == 1 and record["val_accuracy"] is not None
        assert "final validation accuracy" in capsys.readouterr().out

    def test_same_seed_gives_identical_checkpoints(self, small_cache, small_cfg,
                                                   tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["train", "--data-dir", str(small_cache), "--out", str(out),
                         "--model", "bilstm", "--epochs", "2", "--seed", "42",
                         "--config", str(small_cfg)]) == 0
            outs.append(out)
        assert (outs[0] / "bilstm.ckpt").read_bytes() == (outs[1] / "bilstm.ckpt").read_bytes()
        assert (outs[0] / "train.log").read_bytes() == (outs[1] / "train.log").read_bytes()

    def test_unknown_model_tag_is_usage_error(self, small_cache, tmp_path, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["train", "--data-dir", str(small_cache),
                  "--out", str(tmp_path / "x"), "--model", "gru"])
        assert excinfo.value.code == 2

    def test_train_without_cache_exits_2(self, tmp_path, capsys):
        missing = tmp_path / "nowhere"
        missing.mkdir()
        assert main(["train", "--data-dir", str(missing),
                     "--out", str(tmp_path / "x"), "--model", "cnn"]) == 2
        assert "meta.json" in capsys.readouterr().err

    def test_embed_dim_mismatch_exits_2(self, small_cache, tmp_path, capsys):
        # cache is 8-wide; default hyper wants 300
        assert main(["train", "--data-dir", str(small_cache),
                     "--out", str(tmp_path / "x"), "--model", "cnn"]) == 2
        assert "embed_dim" in capsys.readouterr().err


def _constant_prediction_checkpoint(cache_dir, path, class_index):
    """A checkpoint whose model always predicts ``class_index``."""
    meta = json.loads((Path(cache_dir) / "meta.json").read_text())
    matrix = np.load(Path(cache_dir) / "embeddings.npy")
    hyper = HyperParams(embed_dim=meta["embed_dim"], lstm_hidden=3, lstm_dense=4,
                        statement_filters=2, attr_filters=2, conv_dense=4,
                        merge_width=4)
    model = build_model("cnn", matrix, hyper, seed=0)
    for tensor in model.parameters(trainable_only=False).values():
        tensor.data[...] = 0.0
    model.head.bias.data[class_index] = 8.0
    save_checkpoint(path, model, meta["vocab_sha256"])
    return model


@pytest.fixture(scope="module")
def constant_label_cache(tmp_path_factory):
    """Cache whose test split is labeled half-true throughout."""
    data_dir = make_liar_dir(tmp_path_factory.mktemp("liar-const"), seed=5,
                             constant_test_label="half-true")
    out = tmp_path_factory.mktemp("cache-const")
    cfg = tmp_path_factory.mktemp("cfg-const") / "prepare.cfg"
    cfg.write_text("embed_dim = 8\n", encoding="utf-8")
    assert main(["prepare", "--data-dir", str(data_dir), "--out", str(out),
                 "--config", str(cfg)]) == 0
    return out


class TestEvaluate:
    def test_constant_predictor_scores_one_on_constant_split(
            self, constant_label_cache, tmp_path, capsys):
        ckpt = tmp_path / "const.ckpt"
        _constant_prediction_checkpoint(constant_label_cache, ckpt, class_index=3)
        out = tmp_path / "eval"
        code = main(["evaluate", "--data-dir", str(constant_label_cache),
                     "--checkpoint", str(ckpt), "--out", str(out)])
        assert code == 0
        stdout = capsys.readouterr().out
        assert "accuracy 1.0000" in stdout

        payload = json.loads((out / "report.json").read_text())
        jsonschema = pytest.importorskip("jsonschema")
        jsonschema.validate(payload, REPORT_SCHEMA)
        assert payload["accuracy"] == 1.0

        matrix = np.array(payload["confusion"])
        assert np.trace(matrix) / matrix.sum() == payload["accuracy"]
        for name in ("report.txt", "confusion.txt", "confusion.png"):
            assert (out / name).exists(), name

    def test_printed_accuracy_equals_trace_over_total(self, small_cache, small_cfg,
                                                      tmp_path, capsys):
        run = tmp_path / "run"
        assert main(["train", "--data-dir", str(small_cache), "--out", str(run),
                     "--model", "cnn", "--epochs", "1", "--seed", "1",
                     "--config", str(small_cfg)]) == 0
        out = tmp_path / "eval"
        assert main(["evaluate", "--data-dir", str(small_cache),
                     "--checkpoint", str(run / "cnn.ckpt"), "--out", str(out),
                     "--split", "valid"]) == 0
        stdout = capsys.readouterr().out
        line = next(l for l in stdout.splitlines() if l.startswith("evaluated"))
        printed = float(line.split("accuracy", 1)[1].split("(")[0].strip())
        payload = json.loads((out / "report.json").read_text())
        matrix = np.array(payload["confusion"])
        assert printed == pytest.approx(np.trace(matrix) / matrix.sum(), abs=5e-5)

    def test_vocab_hash_mismatch_is_stale_cache_error(self, small_cache,
                                                      constant_label_cache,
                                                      small_cfg, tmp_path, capsys):
        run = tmp_path / "run"
        assert main(["train", "--data-dir", str(small_cache), "--out", str(run),
                     "--model", "cnn", "--epochs", "1", "--config", str(small_cfg)]) == 0
        code = main(["evaluate", "--data-dir", str(constant_label_cache),
                     "--checkpoint", str(run / "cnn.ckpt"),
                     "--out", str(tmp_path / "eval")])
        assert code == 2
        assert "different vocabulary" in capsys.readouterr().err


class TestVerify:
    def test_pristine_build_passes_all_checks(self, capsys):
        """`liarnet verify` runs from embedded fixtures only: no dataset or
        pretrained embeddings are touched."""
        assert main(["verify"]) == 0
        stdout = capsys.readouterr().out
        assert "[FAIL]" not in stdout
        assert "reference:combined:accuracy" in stdout
        assert "grad-model:combined" in stdout
        assert "checks passed" in stdout


class TestConfigFile:
    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("learning_rate = 0.1\n", encoding="utf-8")
        code = main(["train", "--data-dir", str(tmp_path), "--out", str(tmp_path),
                     "--model", "cnn", "--config", str(cfg)])
        assert code == 2
        assert "unknown config key" in capsys.readouterr().err

    def test_flags_override_file_values(self, tiny_liar_dir, tmp_path, capsys):
        cfg = tmp_path / "prep.cfg"
        cfg.write_text("embed_dim = 8\nmin_count = 3\n", encoding="utf-8")
        out = tmp_path / "cache"
        assert main(["prepare", "--data-dir", str(tiny_liar_dir), "--out", str(out),
                     "--config", str(cfg), "--min-count", "1"]) == 0
        meta = json.loads((out / "meta.json").read_text())
        assert meta["min_count"] == 1
        assert meta["embed_dim"] == 8
