import pytest

from indelphy.cli import main

TREE = "((a:0.3,b:0.3):0.2,(c:0.3,d:0.3):0.2);\n"


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "t.nwk").write_text(TREE)
    (tmp_path / "truth.nwk").write_text("((a,b),(c,d));\n")
    return tmp_path


def _pipeline(d, tag, seed=3):
    sim = ["simulate", "--tree", str(d / "t.nwk"), "--k-r", "50000", "--eta", "0.1", "--delta", "0.02",
           "--lam", "0.02", "--seed", str(seed), "--out", str(d / f"{tag}.fa"), "--ancestry", str(d / f"{tag}.tsv")]
    assert main(sim) == 0
    assert main(["estimate", "--seqs", str(d / f"{tag}.fa"), "--out", str(d / f"{tag}.dist")]) == 0
    return main(["reconstruct", "--matrix", str(d / f"{tag}.dist"), "--truth", str(d / "truth.nwk"),
                 "--out", str(d / f"{tag}.nwk")])


def test_pipeline_recovers_quartet(workdir):
    assert _pipeline(workdir, "x") == 0
    assert (workdir / "x.nwk").read_text() == "(a,b,(c,d));\n"


def test_outputs_are_byte_identical(workdir):
    _pipeline(workdir, "x")
    _pipeline(workdir, "y")
    for ext in ("fa", "tsv", "dist", "nwk"):
        assert (workdir / f"x.{ext}").read_bytes() == (workdir / f"y.{ext}").read_bytes()


def test_reconstruct_exit_code_on_mismatch(workdir):
    _pipeline(workdir, "x")
    (workdir / "wrong.nwk").write_text("((a,c),(b,d));\n")
    assert main(["reconstruct", "--matrix", str(workdir / "x.dist"), "--truth", str(workdir / "wrong.nwk")]) == 1


def test_experiment_requires_seed(workdir):
    with pytest.raises(SystemExit):
        main(["experiment", "--n", "4"])


def test_experiment_config_file_and_exit_code(workdir, capsys):
    cfg = workdir / "exp.cfg"
    cfg.write_text("n = 4\nk-r = 20000\nreplicates = 4\nmin-success = 0.0\n")
    out = workdir / "exp"
    assert main(["experiment", "--seed", "5", "--config", str(cfg), "--out", str(out)]) == 0
    assert "min_success = 0.0" in (out / "report.txt").read_text()
    assert main(["experiment", "--seed", "5", "--config", str(cfg), "--min-success", "1.01"]) == 1


def test_experiment_reports_are_byte_identical(workdir):
    for tag in ("p", "q"):
        main(["experiment", "--seed", "2", "--n", "5", "--k-r", "10000,30000", "--replicates", "3",
              "--out", str(workdir / tag)])
    for name in ("report.txt", "checks.csv", "replicates.csv", "summary.csv"):
        assert (workdir / "p" / name).read_bytes() == (workdir / "q" / name).read_bytes()
