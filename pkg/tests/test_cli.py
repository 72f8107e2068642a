import json

import pytest

from modrec.cli import main
from modrec.errors import EXIT_DEGENERATE_FALLBACK, EXIT_INPUT_ERROR, EXIT_OK
from modrec.synthetic import SyntheticSpec, gen_synthetic


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_corpus")
    gen_synthetic(SyntheticSpec(n_modules=3, classes_per_module=(12, 16), seed=6), out)
    return out


def write_tree(root):
    (root / "m1" / "pkg1").mkdir(parents=True)
    (root / "m1" / "module-info.java").write_text("module one {}\n", encoding="utf-8")
    (root / "m1" / "pkg1" / "A.java").write_text("package pkg1;\nclass A {}\n", encoding="utf-8")
    (root / "m2" / "pkg2").mkdir(parents=True)
    (root / "m2" / "module-info.java").write_text("module two {}\n", encoding="utf-8")
    (root / "m2" / "pkg2" / "B.java").write_text("package pkg2;\nclass B {}\n", encoding="utf-8")


def test_scan_names_only(tmp_path, capsys):
    write_tree(tmp_path)
    assert main(["scan", str(tmp_path), "--names-only"]) == EXIT_OK
    out = capsys.readouterr().out.strip().splitlines()
    assert out == ["pkg1.A", "pkg2.B"]


def test_scan_json_manifest(tmp_path, capsys):
    write_tree(tmp_path)
    assert main(["scan", str(tmp_path)]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert {e["fqcn"] for e in doc["entities"]} == {"pkg1.A", "pkg2.B"}


def test_ground_truth_command(tmp_path, capsys):
    write_tree(tmp_path)
    assert main(["ground-truth", str(tmp_path)]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["modules"] == {"one": ["pkg1.A"], "two": ["pkg2.B"]}


def test_recover_and_evaluate_roundtrip(corpus_dir, tmp_path, capsys):
    out = tmp_path / "rec"
    code = main(
        [
            "recover",
            str(corpus_dir / "classes.txt"),
            "--runs",
            "2",
            "--seed",
            "3",
            "--out",
            str(out),
        ]
    )
    assert code == EXIT_OK
    assert (out / "architecture.json").is_file()
    assert (out / "run_0" / "architecture.json").is_file()
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["runs"] == 2
    capsys.readouterr()

    code = main(
        [
            "evaluate",
            "--recovered",
            str(out / "architecture.json"),
            "--ground-truth",
            str(corpus_dir / "ground_truth.json"),
            "--deps",
            str(corpus_dir / "deps.txt"),
        ]
    )
    assert code == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert set(doc) >= {"a2a", "h_score", "c_score", "mq_sum", "mq_normalized", "transform_cost"}
    assert doc["mq_sum"] is not None


def test_recover_tiny_corpus_exits_degenerate(tmp_path, capsys):
    names = tmp_path / "names.txt"
    names.write_text("a.A\nb.B\nc.C\nd.D\n", encoding="utf-8")
    code = main(["recover", str(names), "--runs", "1", "--out", str(tmp_path / "o")])
    assert code == EXIT_DEGENERATE_FALLBACK


def test_recover_missing_source_exits_input_error(tmp_path, capsys):
    code = main(["recover", str(tmp_path / "absent.txt"), "--out", str(tmp_path / "o")])
    assert code == EXIT_INPUT_ERROR
    assert "error" in capsys.readouterr().err


def test_gen_synthetic_and_report(tmp_path, capsys):
    out = tmp_path / "syn"
    assert main(["gen-synthetic", "--modules", "3", "--classes-min", "8", "--classes-max", "10", "--seed", "5", "--out", str(out)]) == EXIT_OK
    capsys.readouterr()
    rep = tmp_path / "metrics.json"
    rep.write_text(json.dumps({"a2a": 90.0, "h_score": 0.9, "c_score": 0.8, "mq_normalized": None}))
    assert main(["report", str(rep)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "a2a" in text and "90.00%" in text


def test_config_file_with_flag_override(corpus_dir, tmp_path):
    cfg = tmp_path / "modrec.toml"
    cfg.write_text("runs = 1\nseed = 4\nmin_cluster_size = 3\n", encoding="utf-8")
    out = tmp_path / "rec"
    code = main(
        ["recover", str(corpus_dir / "classes.txt"), "--config", str(cfg), "--seed", "9", "--out", str(out)]
    )
    assert code == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["seed"] == 9  # flag wins
    assert report["config"]["runs"] == 1  # from config file
    assert report["config"]["min_cluster_size"] == 3


def test_evaluate_bad_path_is_input_error(tmp_path, capsys):
    code = main(["evaluate", "--recovered", str(tmp_path / "x.json"), "--ground-truth", str(tmp_path / "y.json")])
    assert code == EXIT_INPUT_ERROR
