import json
import subprocess
import sys
from pathlib import Path

import pytest

from finmkt.cli import main, run
from finmkt.errors import UnknownCommand
from finmkt.scenario import parse_scenario

sys.path.insert(0, str(Path(__file__).parent / "fixtures"))
from regenerate import CASES, report_name  # noqa: E402

FIX = Path(__file__).parent / "fixtures"


def js(*argv):
    status, text = run(list(argv) + ["--format", "json"])
    return status, json.loads(text)


GOLDEN = [(fixture, args) for fixture, runs in CASES.items() for args in runs]


@pytest.mark.parametrize("fixture,args", GOLDEN, ids=[report_name(f, a)[:-5] for f, a in GOLDEN])
def test_report_matches_committed_expected(fixture, args):
    status, text = run([args[0], str(FIX / f"{fixture}.json"), "--format", "json"] + args[1:])
    assert status == 0
    assert text == (FIX / "expected" / report_name(fixture, args)).read_text(encoding="utf-8")


def test_check_binomial():
    _, rep = js("check", str(FIX / "binomial.json"))
    assert rep["efficient"] and rep["complete"]["complete"]
    assert rep["emm"]["status"] == "unique"
    assert rep["emm"]["representative"] == {"u": "1/3", "d": "2/3"}


def test_price_binomial_call():
    _, rep = js("price", str(FIX / "binomial.json"), "--claim", "call1")
    assert rep["values"][0]["real_world"] == rep["values"][0]["risk_neutral"] == "1/3"
    assert rep["equal"]


def test_check_insider_prints_witness_block():
    status, text = run(["check", str(FIX / "insider.json")])
    assert status == 0
    assert "sensitive: no" in text
    assert "information_block" in text and "ug" in text


def test_check_arbitrage_fixture():
    _, rep = js("check", str(FIX / "crr_arbitrage.json"))
    assert rep["emm"]["status"] == "empty"
    assert not rep["NA"] and not rep["ND"] and not rep["NWA"]


def test_uninformative_insider_is_efficient():
    _, rep = js("sensitivity", str(FIX / "insider_uninformative.json"))
    assert rep["sensitive"]


def test_strict_exit_codes():
    assert run(["check", str(FIX / "binomial.json"), "--strict"])[0] == 0
    assert run(["check", str(FIX / "insider.json"), "--strict"])[0] == 2
    assert run(["check", str(FIX / "insider.json")])[0] == 0
    assert run(["emm", str(FIX / "crr_arbitrage.json"), "--strict"])[0] == 2


def test_errors_exit_one(tmp_path, capsys):
    assert main(["price", str(FIX / "binomial.json"), "--claim", "nope"]) == 1
    assert main(["check", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{\n  \"version\": 1,,\n}")
    assert main(["check", str(bad)]) == 1
    assert "line 2" in capsys.readouterr().err
    assert main(["check", str(FIX / "binomial.json"), "--numeraire", "gold"]) == 1


def test_unknown_command():
    with pytest.raises(UnknownCommand):
        run(["frobnicate", "x.json"])
    assert main(["frobnicate", "x.json"]) == 1


def test_numeraire_flag_keeps_verdicts():
    _, a = js("check", str(FIX / "trinomial.json"))
    _, b = js("check", str(FIX / "trinomial.json"), "--numeraire", "stock")
    for key in ("NA", "ND", "efficient"):
        assert a[key] == b[key]
    assert a["emm"]["status"] == b["emm"]["status"]


def test_json_is_deterministic_given_seed():
    for cmd in (["check"], ["hypothesis", "--strategy", "random", "--partition", "random"]):
        a = run([cmd[0], str(FIX / "crr2.json"), "--format", "json", "--seed", "7"] + cmd[1:])
        b = run([cmd[0], str(FIX / "crr2.json"), "--format", "json", "--seed", "7"] + cmd[1:])
        assert a == b


def test_hypothesis_strategies():
    for strat in ("hold:stock", "mix:stock=1/2", "random", "gop"):
        _, rep = js("hypothesis", str(FIX / "crr2.json"), "--strategy", strat)
        assert rep["statistics_ok"]
    _, rep = js("hypothesis", str(FIX / "insider.json"), "--strategy", "hold:stock")
    assert rep["verdict"] != "sensitive-and-complete-consistent"


def test_generate_round_trip(tmp_path):
    out = tmp_path / "g.json"
    status, _ = run(["generate", "crr", "--periods", "1", "--u", "2", "--d", "0.5", "--r", "0", "--p", "0.5", "--out", str(out)])
    assert status == 0
    assert parse_scenario(out.read_text()).times == 1
    _, rep = js("check", str(out))
    assert rep["emm"]["representative"] == {"u": "1/3", "d": "2/3"}


def test_generate_bad_params_exit_one():
    assert main(["generate", "crr", "--u", "0"]) == 1


def test_console_script_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "finmkt.cli", "check", str(FIX / "binomial.json"), "--format", "json"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["efficient"]
