import numpy as np

from conftest import StubEncoder
from xling_extract import cli, verify_alignment, write_xemb


def unit(n, d, seed=0):
    m = np.random.default_rng(seed).normal(size=(n, d))
    return (m / np.linalg.norm(m, axis=1, keepdims=True)).astype(np.float32)


def test_matching_set_passes_and_lists_checksums(tmp_path):
    for lang in ["swa", "hau"]:
        write_xemb(tmp_path / f"{lang}.xemb", "m", lang, unit(4, 3))
    report = verify_alignment(tmp_path)
    assert report.ok and report.shape == (4, 3)
    assert [line.split()[0] for line in report.lines()[:2]] == ["hau.xemb", "swa.xemb"]
    assert report.lines()[-1] == "OK"


def test_different_dim_names_the_file(tmp_path):
    write_xemb(tmp_path / "hau.xemb", "m", "hau", unit(4, 3))
    write_xemb(tmp_path / "swa.xemb", "m", "swa", unit(4, 5))
    report = verify_alignment(tmp_path)
    assert not report.ok
    assert "swa.xemb" in report.failures[0]


def test_empty_dir_fails(tmp_path):
    report = verify_alignment(tmp_path)
    assert not report.ok and "no .xemb files" in report.failures[0]


def test_unnormalized_file_fails(tmp_path):
    write_xemb(tmp_path / "swa.xemb", "m", "swa", np.ones((2, 2), dtype=np.float32))
    assert not verify_alignment(tmp_path).ok


def test_cli_extract_then_verify(corpus, tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(cli, "load_encoder", lambda job: StubEncoder(hidden_size=6))
    out = tmp_path / "out"
    code = cli.main(
        ["extract", "--model", "toy", "--corpus-dir", str(corpus), "--langs", "swa,hau", "--out", str(out), "--batch", "4"]
    )
    assert code == 0
    assert capsys.readouterr().out.strip().endswith("OK")
    assert cli.main(["verify", str(out / "toy")]) == 0


def test_cli_exit_codes(corpus, tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "load_encoder", lambda job: StubEncoder())
    (corpus / "hau.txt").write_text("x\n", encoding="utf-8")
    base = ["extract", "--model", "toy", "--corpus-dir", str(corpus), "--out", str(tmp_path)]
    assert cli.main(base + ["--langs", "swa,hau"]) == 1
    assert cli.main(base + ["--langs", "swa", "--batch", "0"]) == 2
    assert cli.main(["verify", str(tmp_path / "nothing")]) == 1
