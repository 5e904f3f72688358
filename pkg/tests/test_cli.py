import os
import shutil
import subprocess
from pathlib import Path

import pytest
from filelock import FileLock

from abac_chain.cli import main
from abac_chain.fixtures import OBJECT_ID, SUBJECT_ID, quickstart
from abac_chain.runtime import Chain

ROOT = Path(__file__).resolve().parents[1]
POLICY = ["--sa", "Name=", "Org=NAIST", "Dep=IS", "Lab=LSM", "Role=Student",
          "--oa", "Name=", "Org=NAIST", "Dep=IS", "Lab=LSM", "Place=",
          "--read", "--write", "--mode", "1", "--start", "1563206776", "--end", "1575483330"]


@pytest.fixture
def cli(tmp_path, capsys):
    state = str(tmp_path / "state.log")

    def run(*argv):
        code = main(["--state", state, *argv])
        cap = capsys.readouterr()
        return code, cap.out, cap.err

    run.state = state
    return run


def kv(text):
    return dict(line.split(": ", 1) for line in text.splitlines() if ": " in line)


def load_example(cli):
    assert cli("deploy")[0] == 0
    assert cli("subject", "add", SUBJECT_ID, "Name=Alice", "Org=NAIST", "Dep=IS", "Lab=LSM",
               "Role=student", "Others=")[0] == 0
    assert cli("object", "add", OBJECT_ID, "Name=Camera", "Org=NAIST", "Dep=IS", "Lab=LSM",
               "Place=Room1", "Others=")[0] == 0
    assert cli("policy", "add", *POLICY)[0] == 0


def test_deploy_prints_rows(cli):
    code, out, _ = cli("deploy")
    assert code == 0
    assert out.splitlines()[0] == "contract,gas,usd"
    assert out.splitlines()[-1] == "total,4943332,5.22016"


def test_cli_state_equals_library_quickstart(cli):
    load_example(cli)
    assert Chain.restore(cli.state).digest() == quickstart().digest()


def test_access_output(cli):
    load_example(cli)
    code, out, _ = cli("access", "--subject", SUBJECT_ID, "--object", OBJECT_ID,
                       "--action", "read", "--now", "1570000000")
    f = kv(out)
    assert code == 0
    assert (f["result"], f["reason"], f["gas"]) == ("true", "Permit", "502508")
    assert f["now"] == "1570000000"
    assert f["step.findMatchPolicy"] == "123693"
    code, out, _ = cli("access", "--subject", SUBJECT_ID, "--object", OBJECT_ID, "--action", "execute")
    f = kv(out)
    assert code == 0 and (f["result"], f["reason"], f["gas"]) == ("false", "ActionNotAllowed", "322508")


def test_access_outside_window(cli):
    load_example(cli)
    _, out, _ = cli("access", "--subject", SUBJECT_ID, "--object", OBJECT_ID,
                    "--action", "read", "--now", "1563206775")
    assert kv(out)["reason"] == "OutsideTimeWindow"


def test_digest_is_deterministic(tmp_path, capsys):
    digests = []
    for d in ("a", "b"):
        state = str(tmp_path / d / "s.log")
        os.makedirs(os.path.dirname(state))
        for argv in (["deploy"], ["policy", "add", *POLICY], ["digest"]):
            assert main(["--state", state, *argv]) == 0
        digests.append(kv(capsys.readouterr().out)["digest"])
    assert digests[0] == digests[1]


def test_contract_error_exit_code(cli):
    load_example(cli)
    code, _, err = cli("policy", "add", *POLICY)
    assert code == 1 and "error=DuplicatePolicy" in err
    code, _, err = cli("--sender", "0x" + "99" * 20, "policy", "add", "--sa", "Org=X")
    assert code == 1 and "error=Unauthorized" in err
    code, _, err = cli("subject", "add", SUBJECT_ID, "noequals")
    assert code == 1 and "error=InvalidArgument" in err


def test_failed_command_leaves_state_file_untouched(cli):
    load_example(cli)
    before = Path(cli.state).read_text()
    assert cli("policy", "add", *POLICY)[0] == 1
    assert Path(cli.state).read_text() == before


def test_dry_run_does_not_save(cli):
    load_example(cli)
    before = Path(cli.state).read_text()
    code, out, _ = cli("--dry-run", "policy", "add", "--sa", "Org=X", "--read")
    assert code == 0 and "dry_run" in out
    assert Path(cli.state).read_text() == before


def test_find_is_free(cli):
    load_example(cli)
    before = Path(cli.state).read_text()
    code, out, _ = cli("policy", "find", "--sa", "Org=NAIST", "Dep=IS", "Lab=LSM", "Role=Student",
                       "--oa", "Org=NAIST", "Dep=IS", "Lab=LSM")
    f = kv(out)
    assert code == 0 and f["indices"] == "0" and f["gas_if_sent"] == "123693"
    assert Path(cli.state).read_text() == before
    code, out, _ = cli("policy", "get", "0")
    assert kv(out)["actions"] == "read,write"


def test_record_get(cli):
    load_example(cli)
    code, out, _ = cli("subject", "get", SUBJECT_ID)
    assert code == 0 and kv(out)["Role"] == '"Student"'


def test_locked_state(cli):
    with FileLock(cli.state + ".lock"):
        code, _, err = cli("deploy")
    assert code == 1 and "error=StateLocked" in err


def test_cost_deploy(cli):
    code, out, _ = cli("cost", "deploy")
    assert out.splitlines() == [
        "scheme,gas,usd,reference_value",
        "acl,2809093,2.96640,2809093",
        "proposed,4943332,5.22016,4943332",
    ]


def test_cost_curve_csv_and_figure(cli, tmp_path):
    csv_path, png = tmp_path / "c.csv", tmp_path / "c.png"
    code, _, _ = cli("cost", "curve", "--p", "1", "--m-max", "250", "--out", str(csv_path), "--figure", str(png))
    assert code == 0
    text = csv_path.read_text()
    assert "# crossover proposed_below_acl m=3" in text
    assert "# crossover proposed_above_acl m=210" in text
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_cost_scenarios(cli):
    _, out, _ = cli("cost", "scenario1")
    assert "proposed_best,310136," in out
    _, out, _ = cli("cost", "scenario2")
    assert "proposed_best,46520400," in out and "proposed_best_strict,46527000," in out
    code, _, err = cli("cost", "scenario2", "--mode", "metered")
    assert code == 1 and "error=InvalidArgument" in err


def test_cost_figures(cli, tmp_path, monkeypatch):
    import abac_chain.cli as cli_mod
    monkeypatch.setattr(cli_mod, "FIGURE_SETS", {"small": ((1, "all"), 10)})
    code, _, _ = cli("cost", "figures", "--out-dir", str(tmp_path / "fig"))
    assert code == 0
    names = sorted(p.name for p in (tmp_path / "fig").iterdir())
    assert names == ["small.png", "small_p1.csv", "small_pm.csv"]


@pytest.mark.skipif(shutil.which("abac-chain") is None, reason="console script not installed")
def test_quickstart_script(tmp_path):
    res = subprocess.run(["sh", str(ROOT / "scripts" / "quickstart.sh"), str(tmp_path / "q.log")],
                         capture_output=True, text=True, check=True)
    results = [line for line in res.stdout.splitlines() if line.startswith("result: ")]
    assert results == ["result: true", "result: false"]
