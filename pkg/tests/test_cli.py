import subprocess
import sys

import pytest

from hanpunc.checkpoint import Checkpoint
from hanpunc.cli import build_parser, main, resolve
from hanpunc.restore import strip_marks
from hanpunc.schemes import Task

DOCS = {
    "a": "子曰：「學而時習之，不亦說乎？」",
    "b": "有朋自遠方來，不亦樂乎？人不知而不慍，不亦君子乎？",
    "c": "曾子曰：吾日三省吾身。為人謀而不忠乎？",
    "d": "子曰：溫故而知新，可以為師矣。",
    "e": "子曰：君子不器。",
}


def run(*argv, stdin=b""):
    return subprocess.run(
        [sys.executable, "-m", "hanpunc", *argv], input=stdin, capture_output=True, timeout=300
    )


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    raw = root / "raw"
    raw.mkdir()
    for name, text in DOCS.items():
        (raw / f"{name}.txt").write_text(text, encoding="utf-8")
    assert main(["normalize", "--in", str(raw), "--out", str(root / "canon"), "--source", "DRC"]) == 0
    assert main(["build-dataset", "--in", str(root / "canon"), "--out", str(root / "data"), "--test-fraction", "0.2"]) == 0
    assert main(["build-vocab", "--data", str(root / "data" / "train.conll"), "--out", str(root / "vocab.txt")]) == 0
    args = ["train", "--train", str(root / "data" / "train.conll"), "--val", str(root / "data" / "val.conll")]
    args += ["--vocab", str(root / "vocab.txt"), "--out", str(root / "m.ckpt"), "--epochs", "2"]
    assert main(args + ["--history", str(root / "h.csv")]) == 0
    return root


def test_normalize_output(workspace):
    assert (workspace / "canon" / "a.txt").read_text(encoding="utf-8") == "子曰:學而時習之，不亦說乎?\n"


def test_dataset_files(workspace):
    data = workspace / "data"
    assert {p.name for p in data.iterdir()} == {"train.conll", "val.conll", "test.conll", "manifest.txt", "stats.txt"}
    manifest = (data / "manifest.txt").read_text(encoding="utf-8")
    assert "[test]\t1\n" in manifest


def test_train_outputs(workspace):
    ck = Checkpoint.load(workspace / "m.ckpt")
    assert ck.scheme.task is Task.PUNCTUATION
    assert (workspace / "h.csv").read_text().count("\n") == 3


def test_eval_table(workspace, capsys):
    metrics = workspace / "metrics.tsv"
    code = main(["eval", "--checkpoint", str(workspace / "m.ckpt"), "--data", str(workspace / "data" / "test.conll"), "--metrics", str(metrics)])
    assert code == 0
    out = capsys.readouterr().out
    assert "micro" in out and "macro" in out
    assert "exclude_O\ttrue" in metrics.read_text()


def test_restore_subprocess(workspace):
    proc = run("restore", "--checkpoint", str(workspace / "m.ckpt"), stdin="學而時習之".encode())
    assert proc.returncode == 0, proc.stderr
    assert strip_marks(proc.stdout.decode()) == "學而時習之"


def test_restore_empty_stdin(workspace):
    proc = run("restore", "--checkpoint", str(workspace / "m.ckpt"))
    assert proc.returncode == 0
    assert proc.stdout == b""


def test_restore_vocab_mismatch(workspace, tmp_path):
    (tmp_path / "v.txt").write_text("[PAD]\n[UNK]\n[CLS]\n[SEP]\n學", encoding="utf-8")
    proc = run("restore", "--checkpoint", str(workspace / "m.ckpt"), "--vocab", str(tmp_path / "v.txt"), stdin="學".encode())
    assert proc.returncode == 1
    assert b"vocabulary" in proc.stderr


def test_stats(workspace, capsys):
    assert main(["stats", "--data", str(workspace / "data" / "train.conll"), "--cooccur", "?", "--window", "1"]) == 0
    out = capsys.readouterr().out
    assert "U+003F" in out or "?" in out
    assert "乎" in out


def test_spacing_pipeline_shows_O_row(workspace, tmp_path, capsys):
    data = tmp_path / "sp"
    assert main(["build-dataset", "--in", str(workspace / "canon"), "--out", str(data), "--task", "spacing", "--test-fraction", "0.2"]) == 0
    vocab = tmp_path / "v.txt"
    assert main(["build-vocab", "--task", "spacing", "--data", str(data / "train.conll"), "--out", str(vocab)]) == 0
    ckpt = tmp_path / "s.ckpt"
    assert main(["train", "--task", "spacing", "--train", str(data / "train.conll"), "--vocab", str(vocab), "--out", str(ckpt), "--epochs", "1"]) == 0
    capsys.readouterr()
    assert main(["eval", "--task", "spacing", "--checkpoint", str(ckpt), "--data", str(data / "test.conll")]) == 0
    rows = [line.split()[0] for line in capsys.readouterr().out.splitlines() if line.strip()]
    assert "O" in rows and "_" in rows


def test_eval_task_mismatch(workspace, capsys):
    code = main(["eval", "--task", "spacing", "--checkpoint", str(workspace / "m.ckpt"), "--data", str(workspace / "data" / "test.conll")])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_train_defaults():
    args = resolve(build_parser().parse_args(["train", "--train", "t", "--vocab", "v", "--out", "o"]))
    assert (args.batch_size, args.epochs, args.lr) == (16, 15, 5e-5)
    assert args.weight_decay == 0.01
    assert args.task is Task.PUNCTUATION


def test_config_file_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# overrides\nbatch-size = 4\nepochs = 3\nlr = 1e-3\n", encoding="utf-8")
    base = ["--config", str(cfg), "train", "--train", "t", "--vocab", "v", "--out", "o"]
    args = resolve(build_parser().parse_args(base + ["--epochs", "7"]))
    assert (args.batch_size, args.epochs, args.lr) == (4, 7, 1e-3)


def test_bad_config_file_is_usage_error(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("epochs three\n", encoding="utf-8")
    with pytest.raises(SystemExit) as exc:
        main(["--config", str(cfg), "stats", "--data", "x"])
    assert exc.value.code == 2


def test_usage_errors():
    assert run().returncode == 2
    assert run("train").returncode == 2
    assert run("stats", "--data", "x", "--task", "nope").returncode == 2


def test_missing_file_is_error(tmp_path):
    proc = run("stats", "--data", str(tmp_path / "missing.conll"))
    assert proc.returncode == 1
    assert b"error" in proc.stderr
