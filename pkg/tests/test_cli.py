import filecmp
import warnings

import pytest

from autobss import cli

CFG = """family = resnet18
candidate_size = 120
iterations = 2
batch_size = 8
mc_samples = 16
seed = 7
evaluator.kind = synthetic
"""


@pytest.fixture(autouse=True)
def quiet_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


def run_cli(argv):
    return cli.main(argv)


def test_cost_command(capsys):
    code = run_cli(["cost", "--family", "resnet18",
                    "--code", "64,128,256,512,2,2,2,2"])
    out = capsys.readouterr().out
    assert code == cli.EXIT_OK
    assert out.strip() == "flops=1814073344 params=11689512"


def test_cost_profile_csv(tmp_path, capsys):
    profile = tmp_path / "profile.csv"
    code = run_cli(["cost", "--family", "resnet18",
                    "--code", "64,128,256,512,2,2,2,2",
                    "--profile", str(profile)])
    assert code == cli.EXIT_OK
    assert profile.read_text().splitlines()[0] == \
        "stage,flops,params,flops_share"


def test_cost_invalid_code(capsys):
    code = run_cli(["cost", "--family", "resnet18",
                    "--code", "64,128,256,512,2,2,2,99"])
    err = capsys.readouterr().err
    assert code == cli.EXIT_USAGE
    assert "99" in err


def test_search_and_baseline_and_resume(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    journal = tmp_path / "journal.jsonl"
    traj = tmp_path / "traj.csv"
    cfg.write_text(CFG + f"output.journal = {journal}\n"
                         f"output.trajectory = {traj}\n")

    assert run_cli(["search", "--config", str(cfg)]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("best_accuracy=")
    lines = traj.read_text().splitlines()
    assert lines[0] == "iteration,rank,accuracy,code"
    assert len(lines) == 1 + 2 * 8

    # truncated journal resumes to the identical artifact
    full = journal.read_bytes()
    cut = tmp_path / "cut.jsonl"
    cut.write_bytes(full[:-200])
    assert run_cli(["search", "--resume", str(cut)]) == cli.EXIT_OK
    resumed_out = capsys.readouterr().out
    assert resumed_out == out
    assert cut.read_bytes() == full

    assert run_cli(["search", "--config", str(cfg),
                    "--baseline", "random"]) == cli.EXIT_OK


def test_search_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(CFG + "bogus = 1\n")
    assert run_cli(["search", "--config", str(cfg)]) == cli.EXIT_USAGE
    assert "bogus" in capsys.readouterr().err


def test_search_requires_config_or_resume(capsys):
    with pytest.raises(SystemExit) as exc:
        run_cli(["search"])
    assert exc.value.code == cli.EXIT_USAGE


def test_candidates_command(tmp_path, capsys):
    out = tmp_path / "cands.txt"
    argv = ["--seed", "4", "candidates", "--family", "resnet18",
            "--size", "30", "--out", str(out)]
    assert run_cli(argv) == cli.EXIT_OK
    assert len(out.read_text().splitlines()) == 1 + 30

    again = tmp_path / "cands2.txt"
    argv2 = ["--seed", "4", "candidates", "--family", "resnet18",
             "--size", "30", "--out", str(again)]
    assert run_cli(argv2) == cli.EXIT_OK
    text_a, text_b = out.read_text(), again.read_text()
    assert text_a.splitlines()[1:] == text_b.splitlines()[1:]


def test_candidates_size_zero_is_usage_error(tmp_path, capsys):
    code = run_cli(["candidates", "--family", "resnet18", "--size", "0",
                    "--out", str(tmp_path / "x.txt")])
    assert code == cli.EXIT_USAGE


def test_bench_command(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    argv = ["--seed", "1", "bench", "--family", "resnet18", "--seeds", "2",
            "--candidate-size", "120", "--out", str(out)]
    assert run_cli(argv) == cli.EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "seed,autobss_best,random_best"
    assert len(lines) == 3

    again = tmp_path / "bench2.csv"
    argv = ["--seed", "1", "bench", "--family", "resnet18", "--seeds", "2",
            "--candidate-size", "120", "--out", str(again)]
    assert run_cli(argv) == cli.EXIT_OK
    assert filecmp.cmp(out, again, shallow=False)
