import io
import json
import re

import pytest

from urldet.cli import main
from urldet.data import load_dataset
from urldet.tokenizer import save_vocab, train_bpe

TINY_FLAGS = [
    "--vocab-size", "280", "--max-len", "16", "--d-model", "16",
    "--layers", "2", "--heads", "2", "--d-ff", "32", "--d-char", "8",
    "--batch-size", "8", "--lr", "5e-3", "--seed", "0",
]


def write_corpus(path, n, offset=0):
    rows = ["url,label"]
    for i in range(n // 2):
        rows.append(f"http://site{offset + i}.example.com/page{i},benign")
        rows.append(
            f"http://x{offset + i}-login-verify.top/id?s={i},malicious")
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    write_corpus(root / "train.csv", 16)
    write_corpus(root / "val.csv", 8, offset=100)
    rc = main(["train", "--data", str(root / "train.csv"),
               "--val", str(root / "val.csv"),
               "--out", str(root / "run"), "--epochs", "2"] + TINY_FLAGS)
    assert rc == 0
    return root


def test_train_outputs(workdir):
    run = workdir / "run"
    assert (run / "model.ckpt").exists()
    log = json.loads((run / "log.json").read_text())
    assert len(log["epochs"]) == 2
    assert log["best_epoch"] in (1, 2)
    cfg = json.loads((run / "config.json").read_text())
    assert cfg["model_config"]["d_model"] == 16
    assert cfg["label_map"] == {"benign": 0, "malicious": 1}
    assert re.fullmatch(r"[0-9a-f]{64}", cfg["vocab_sha256"])


def test_eval_writes_report(workdir, capsys):
    out = workdir / "eval"
    rc = main(["eval", "--ckpt", str(workdir / "run" / "model.ckpt"),
               "--test", str(workdir / "val.csv"), "--out", str(out)])
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    for key in ("accuracy", "precision", "recall", "f1", "auc", "roc",
                "tpr_at_fpr"):
        assert key in report
    assert "0.01" in report["tpr_at_fpr"]
    assert (out / "report.txt").read_text().strip()
    assert "accuracy" in capsys.readouterr().out


def test_eval_cross_tagging(workdir):
    out = workdir / "cross"
    rc = main(["eval", "--ckpt", str(workdir / "run" / "model.ckpt"),
               "--test", str(workdir / "val.csv"), "--out", str(out),
               "--cross"])
    assert rc == 0
    assert json.loads((out / "report.json").read_text())["tag"] == "cross"


def test_eval_ablation(workdir):
    out = workdir / "ablate"
    rc = main(["eval", "--ckpt", str(workdir / "run" / "model.ckpt"),
               "--test", str(workdir / "val.csv"), "--out", str(out),
               "--ablate", "1,2"])
    assert rc == 0
    rows = json.loads((out / "ablation.json").read_text())
    assert [r["layers"] for r in rows] == [1, 2]
    assert all("auc" in r["report"] for r in rows)
    assert len((out / "ablation.txt").read_text().splitlines()) == 3


def test_eval_vocab_mismatch(workdir, capsys):
    other = train_bpe(["http://unrelated.example/z"], 262)
    vocab_path = workdir / "other_vocab.json"
    save_vocab(other, str(vocab_path))
    rc = main(["eval", "--ckpt", str(workdir / "run" / "model.ckpt"),
               "--test", str(workdir / "val.csv"),
               "--out", str(workdir / "mismatch"),
               "--vocab", str(vocab_path)])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_score_file_in_file_out(workdir):
    urls = ["http://site0.example.com/page0",
            "http://x0-login-verify.top/id?s=0",
            "http://fresh.example.org/new"]
    infile = workdir / "urls.txt"
    infile.write_text("\n".join(urls) + "\n", encoding="utf-8")
    outfile = workdir / "scores.tsv"
    rc = main(["score", "--ckpt", str(workdir / "run" / "model.ckpt"),
               "--in", str(infile), "--out", str(outfile)])
    assert rc == 0
    lines = outfile.read_text().splitlines()
    assert len(lines) == 3
    for line, url in zip(lines, urls):
        score, name, echoed = line.split("\t")
        assert re.fullmatch(r"[01]\.\d{6}", score)
        assert name in ("benign", "malicious")
        assert echoed == url


def test_score_stdin_stdout(workdir, capsys, monkeypatch):
    monkeypatch.setattr("sys.stdin", io.StringIO("http://a.example.com/q\n"))
    rc = main(["score", "--ckpt", str(workdir / "run" / "model.ckpt")])
    assert rc == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 1
    assert out[0].endswith("http://a.example.com/q")


def test_score_empty_input(workdir):
    infile = workdir / "empty.txt"
    infile.write_text("", encoding="utf-8")
    outfile = workdir / "empty_scores.tsv"
    rc = main(["score", "--ckpt", str(workdir / "run" / "model.ckpt"),
               "--in", str(infile), "--out", str(outfile)])
    assert rc == 0
    assert outfile.read_text() == ""


def test_advgen_file_output(workdir):
    pool = workdir / "pool.csv"
    write_corpus(pool, 24)
    domains = workdir / "domains.txt"
    domains.write_text("evil.com\nbad.net\n", encoding="utf-8")
    out = workdir / "advtest.csv"
    rc = main(["advgen", "--in", str(pool), "--domains", str(domains),
               "--spec", "4,3,3", "--out", str(out)])
    assert rc == 0
    # the written set is shuffled, so pin the label ids on reload
    dset = load_dataset(str(out), class_names=("benign", "malicious"))
    assert len(dset) == 10
    assert dset.class_counts() == [4, 6]


def test_advgen_stdout(workdir, capsys):
    pool = workdir / "pool2.csv"
    write_corpus(pool, 24)
    domains = workdir / "domains2.txt"
    domains.write_text("evil.com\n", encoding="utf-8")
    rc = main(["advgen", "--in", str(pool), "--domains", str(domains),
               "--spec", "2,2,2"])
    assert rc == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "url,label"
    assert len(lines) == 7


def test_stats_stdout(workdir, capsys):
    rc = main(["stats", "--in", str(workdir / "train.csv")])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["classes"] == {"benign": 8, "malicious": 8}
    assert set(payload["tld"]["benign"]) == {"com", "cctld", "other"}


def test_usage_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["train", "--data", "x.csv"])
    assert exc.value.code == 2


def test_runtime_errors_exit_1(workdir, capsys):
    rc = main(["eval", "--ckpt", str(workdir / "does-not-exist.ckpt"),
               "--test", str(workdir / "val.csv"),
               "--out", str(workdir / "nope")])
    assert rc == 1
    assert capsys.readouterr().err.startswith("error:")
    rc = main(["train", "--data", str(workdir / "missing.csv"),
               "--val", str(workdir / "val.csv"),
               "--out", str(workdir / "nope2")] + TINY_FLAGS + ["--epochs", "1"])
    assert rc == 1


def test_train_is_byte_reproducible(tmp_path):
    write_corpus(tmp_path / "train.csv", 16)
    write_corpus(tmp_path / "val.csv", 8, offset=100)
    flags = ["--data", str(tmp_path / "train.csv"),
             "--val", str(tmp_path / "val.csv"),
             "--epochs", "1", "--precision", "64"] + TINY_FLAGS
    for name in ("a", "b"):
        rc = main(["train", "--out", str(tmp_path / name)] + flags)
        assert rc == 0
    ckpt_a = (tmp_path / "a" / "model.ckpt").read_bytes()
    ckpt_b = (tmp_path / "b" / "model.ckpt").read_bytes()
    assert ckpt_a == ckpt_b
    assert ((tmp_path / "a" / "config.json").read_text()
            == (tmp_path / "b" / "config.json").read_text())
