import json
import stat

import pytest

from motifgrammar.cli import load_msg, main, msg_path
from motifgrammar.config import RunConfig
from motifgrammar.hrg import Grammar

from conftest import DATA, FIXTURES

ELEVEN = [
    "C=CC(=O)OC",
    "C=CC(=O)OCC",
    "C=CC(=O)OCCO",
    "C=CC(=O)OCC1CCCCC1",
    "CC1(C)C2CCC1(C)C(C2)OC(=O)C=C",
    "C=CC(=O)OCCOC(=O)C=C",
    "C=C(C)C(=O)OC",
    "C=CC(=O)N",
    "C#CCO",
    "O",
    "C=CC(=O)OCC(C)O",
]


@pytest.fixture
def dataset(tmp_path):
    path = tmp_path / "eleven.smi"
    path.write_text("\n".join(ELEVEN) + "\n")
    return path


def run(*argv):
    return main([str(a) for a in argv])


def test_induce_counts_every_rule_once(dataset, tmp_path, capsys):
    out = tmp_path / "out"
    assert run("induce", "--dataset", dataset, "--out", out) == 0
    grammar = Grammar.loads((out / "grammar_first_k_k1.json").read_text())
    cfg = RunConfig(out=str(out))
    n_rules = sum(len(load_msg(msg_path(cfg, i, 0))[1]) for i in range(len(ELEVEN)))
    assert grammar.total == n_rules
    assert len(list((out / "msgs").glob("*.json"))) == 11
    assert len(list((out / "logs").glob("*.jsonl"))) == 11
    assert "11 molecule(s) x 1 pass(es)" in capsys.readouterr().out


def test_written_files_are_world_readable(dataset, tmp_path):
    out = tmp_path / "out"
    run("induce", "--dataset", dataset, "--out", out)
    mode = (out / "grammar_first_k_k1.json").stat().st_mode
    assert mode & stat.S_IROTH


def test_topk_with_k_equal_passes_matches_first_k(dataset, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    common = ["--dataset", dataset, "--passes", 5, "--k", 5, "--oracle", "random"]
    assert run("induce", *common, "--out", a, "--mode", "topk") == 0
    assert run("induce", *common, "--out", b, "--mode", "first_k") == 0
    assert (a / "grammar_topk_k5.json").read_text() == (b / "grammar_first_k_k5.json").read_text()


def test_induce_is_deterministic_across_worker_counts(dataset, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    common = ["--dataset", dataset, "--passes", 3, "--k", 1, "--mode", "topk", "--oracle", "random"]
    assert run("induce", *common, "--out", a, "--workers", 1) == 0
    assert run("induce", *common, "--out", b, "--workers", 4) == 0
    assert (a / "grammar_topk_k1.json").read_bytes() == (b / "grammar_topk_k1.json").read_bytes()
    assert (a / "rank" / "m004.json").read_bytes() == (b / "rank" / "m004.json").read_bytes()


def test_rank_then_roundtrip_then_generate(dataset, tmp_path, capsys):
    out = tmp_path / "out"
    common = ["--dataset", dataset, "--out", out, "--passes", 2, "--k", 1, "--oracle", "random"]
    assert run("induce", *common) == 0
    assert run("rank", *common) == 0
    standings = json.loads((out / "rank" / "standings.json").read_text())
    assert sorted(standings) == [f"m{i:03d}" for i in range(11)]
    assert all(sorted(v) == [0, 1] for v in standings.values())
    assert run("roundtrip-check", *common) == 0
    assert "22/22" in capsys.readouterr().out
    assert run("generate", *common, "--grammar", out / "grammar_topk_k1.json", "-n", 50) == 0
    samples = (out / "samples_topk_k1.smi").read_text().split()
    assert len(samples) == 50
    report = json.loads((out / "samples_topk_k1_report.json").read_text())
    assert report["valid"] == 1.0
    trace = json.loads((out / "samples_topk_k1_trace.json").read_text())
    assert [s["smiles"] for s in trace["samples"]] == samples
    assert all(s["trace"] and isinstance(s["seed"], int) for s in trace["samples"])
    assert trace["attempts"] == 50 + sum(trace["rejections"].values())


def test_eval_command(dataset, tmp_path, capsys):
    samples = tmp_path / "s.smi"
    samples.write_text("CCO\nC=CC(=O)OC\nnot-a-molecule\n")
    assert run("eval", "--dataset", dataset, samples) == 0
    report = json.loads(samples.with_suffix(".report.json").read_text())
    assert report["valid"] == pytest.approx(2 / 3)
    assert "novelty" in capsys.readouterr().out


def test_config_file_and_remote_replay(tmp_path):
    out = tmp_path / "out"
    assert run("induce", "--config", FIXTURES / "remote_induce.json", "--out", out) == 0
    assert (out / "grammar_topk_k1.json").exists()


def test_exit_codes(tmp_path, dataset):
    assert run("induce", "--out", tmp_path / "o") == 2  # no dataset
    assert run("induce", "--dataset", tmp_path / "missing.smi", "--out", tmp_path / "o") == 2
    assert run("induce", "--dataset", dataset, "--passes", 2, "--k", 3, "--out", tmp_path / "o") == 2
    bad = tmp_path / "bad.smi"
    bad.write_text("CC\nC1CC\n")
    assert run("induce", "--dataset", bad, "--out", tmp_path / "o") == 1


def test_generate_from_bundled_corpus(tmp_path):
    out = tmp_path / "out"
    assert run("induce", "--dataset", DATA / "acrylates.smi", "--out", out) == 0
    assert run("generate", "--dataset", DATA / "acrylates.smi", "--out", out, "-n", 30) == 0
