import io
import json

import pytest

from ehr_abms import cli
from ehr_abms.ledger import read_log
from ehr_abms.workspace import DATA_DIR_ENV

CLOCK = "2024-03-01T09:00:00Z"


class Run:
    def __init__(self, root):
        self.root = root

    def __call__(self, *argv, fmt="table", seed=11):
        out, err = io.StringIO(), io.StringIO()
        head = ["--data-dir", str(self.root), "--fixed-clock", CLOCK, "--format", fmt]
        if seed is not None:
            head += ["--seed", str(seed)]
        code = cli.main(head + [str(a) for a in argv], stdout=out, stderr=err)
        self.out, self.err = out.getvalue(), err.getvalue()
        return code

    def records(self):
        return [json.loads(line) for line in self.out.splitlines()]


@pytest.fixture
def run(tmp_path):
    return Run(tmp_path / "ws")


@pytest.fixture
def world(run, tmp_path):
    """A small deployment built through the CLI, ready for access requests."""
    steps = [
        ("setup",),
        ("authority", "add", "hospital", "--sign-attr", "patient_id", "--abe-attr", "lab"),
        ("authority", "add", "dmv", "--sign-attr", "driver_license"),
        ("patient", "register", "gid-p", "--name", "Pat"),
        ("provider", "register", "gid-lab", "--name", "Lab", "--kind", "lab", "--t", 2, "--n", 2),
        ("provider", "register", "gid-any", "--name", "Any", "--kind", "research", "--t", 1, "--n", 2),
        ("keys", "extract", "--authority", "hospital", "--gid", "gid-p", "--attr", "patient_id", "--value", "42"),
        ("keys", "extract", "--authority", "dmv", "--gid", "gid-p", "--attr", "driver_license", "--value", "7"),
        ("keys", "abe-issue", "--authority", "hospital", "--attr", "lab", "--gid", "gid-lab"),
        ("sign", "--gid", "gid-p"),
        ("profile", "write", "--gid", "gid-p", "--bundle-out", tmp_path / "bundle.json"),
    ]
    for argv in steps:
        assert run(*argv) == 0, (argv, run.err)
    plain = tmp_path / "plain.bin"
    plain.write_bytes(b"imaging study " * 100)
    assert run("ehr", "encrypt", "--policy", "lab@hospital", "--in", plain, "--out", tmp_path / "ct.bin") == 0
    assert run("ehr", "upload", "--owner", "gid-p", "--in", tmp_path / "ct.bin") == 0
    return tmp_path


def grant(run, who):
    return run("acl", "grant", "--owner", "gid-p", "--permission", "request_access", "--grantee-gid", who)


def test_cli_workflow_end_to_end(run, world):
    assert grant(run, "gid-lab") == 0
    assert run("access", "request", "--caller", "gid-lab", "--owner", "gid-p", fmt="machine") == 0
    rec = run.records()[0]
    assert rec["authenticated"] and rec["valid_count"] == 2 and rec["schema_version"] == 1
    url = rec["url"]
    assert run("ehr", "fetch", "--url", url, "--out", world / "got.bin") == 0
    assert run("ehr", "fetch", "--url", url, "--out", world / "again.bin") == cli.EXIT_GONE
    assert run("ehr", "decrypt", "--gid", "gid-lab", "--in", world / "got.bin", "--out", world / "pt.bin") == 0
    assert (world / "pt.bin").read_bytes() == (world / "plain.bin").read_bytes()
    bundle = (world / "bundle.json").read_text()
    assert "gid-p" not in bundle
    assert run("ledger", "verify", fmt="machine") == 0 and run.records()[0]["ok"]


def test_exit_code_paths(run, world, monkeypatch):
    assert run("patient", "register", "gid-p", "--name", "Again") == cli.EXIT_DUPLICATE
    assert run("access", "request", "--caller", "gid-ghost", "--owner", "gid-p") == cli.EXIT_UNKNOWN
    assert run("access", "request", "--caller", "gid-lab", "--owner", "gid-p") == cli.EXIT_ACCESS_DENIED
    assert run("profile", "read", "--caller", "gid-lab", "--owner", "gid-p") == cli.EXIT_ACCESS_DENIED
    assert run("ehr", "encrypt", "--policy", "lab@@x", "--in", world / "plain.bin",
               "--out", world / "x") == cli.EXIT_INVALID_INPUT
    # a second ABE holder without the policy attribute
    assert run("authority", "attr", "hospital", "nurse", "--kind", "abe") == 0
    assert run("keys", "abe-issue", "--authority", "hospital", "--attr", "nurse", "--gid", "gid-any") == 0
    assert run("ehr", "decrypt", "--gid", "gid-any", "--in", world / "ct.bin",
               "--out", world / "x") == cli.EXIT_DECRYPT_DENIED
    ct = bytearray((world / "ct.bin").read_bytes())
    ct[-5] ^= 1
    (world / "bad.bin").write_bytes(bytes(ct))
    assert run("ehr", "decrypt", "--gid", "gid-lab", "--in", world / "bad.bin",
               "--out", world / "x") == cli.EXIT_INTEGRITY
    monkeypatch.delenv(DATA_DIR_ENV, raising=False)
    assert cli.main(["ledger", "verify"], stdout=io.StringIO(), stderr=io.StringIO()) == cli.EXIT_USAGE
    assert run("no-such-command") == cli.EXIT_USAGE
    assert run("setup") == cli.EXIT_WORKSPACE


def test_threshold_rejection_exit_code(run, world):
    # drop one of the two signatures by rewriting the profile with only one key held
    assert run("patient", "register", "gid-q", "--name", "Q") == 0
    assert run("keys", "extract", "--authority", "hospital", "--gid", "gid-q", "--attr", "patient_id",
               "--value", "5") == 0
    assert run("sign", "--gid", "gid-q") == 0 and run("profile", "write", "--gid", "gid-q") == 0
    assert run("ehr", "upload", "--owner", "gid-q", "--in", world / "ct.bin") == 0
    assert run("acl", "grant", "--owner", "gid-q", "--permission", "request_access",
               "--grantee-role", "provider") == 0
    assert run("access", "request", "--caller", "gid-lab", "--owner", "gid-q") == cli.EXIT_AUTH_REJECTED
    assert "only 1 valid" in run.out
    assert run("access", "request", "--caller", "gid-any", "--owner", "gid-q") == 0


def test_workspace_required(run):
    assert run("patient", "register", "gid-x", "--name", "X") == cli.EXIT_WORKSPACE
    assert "setup" in run.err


def test_data_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(DATA_DIR_ENV, str(tmp_path / "envws"))
    assert cli.main(["setup"], stdout=io.StringIO(), stderr=io.StringIO()) == 0
    assert (tmp_path / "envws" / "config.json").exists()


def _tamper(root):
    log = root / "ledger" / "ledger.log"
    target = read_log(log)[5].payload_digest
    data = log.read_bytes()
    flipped = ("0" if target[10] != "0" else "1")
    log.write_bytes(data.replace(target.encode(), (target[:10] + flipped + target[11:]).encode()))


def test_tampered_log_is_reported(run):
    assert run("scenario", "annie", "--ehr-size", 4096) == 0
    _tamper(run.root)
    assert run("ledger", "verify") == cli.EXIT_CHAIN_BROKEN
    assert "broken at seq 5" in run.out
    assert run("patient", "register", "gid-z", "--name", "Z") == cli.EXIT_CHAIN_BROKEN


def test_scenario_cli(run):
    assert run("scenario", "annie", "--ehr-size", 4096, fmt="machine") == 0
    rec = run.records()[-1]
    assert rec["ok"] and rec["ledger_height"] == 18 and len(rec["event_ids"]) == 17
    assert all(rec["second_redeem_gone"].values())
    assert run("scenario", "annie", "--ehr-size", 4096) == cli.EXIT_DUPLICATE


def test_scenario_step_failure(run):
    assert run("scenario", "annie", "--ehr-size", -1) == cli.EXIT_SCENARIO_STEP
    assert "ehr encrypt and upload" in run.err


def test_seeded_runs_are_byte_identical(tmp_path):
    files = []
    for name in ("a", "b"):
        r = Run(tmp_path / name)
        assert r("scenario", "annie", "--ehr-size", 4096, seed=5) == 0
        files.append([(r.root / "ledger" / f).read_bytes() for f in ("ledger.log", "private.jsonl")])
    assert files[0] == files[1]


def test_unseeded_runs_differ(tmp_path):
    logs = []
    for name in ("a", "b"):
        r = Run(tmp_path / name)
        assert r("scenario", "annie", "--ehr-size", 4096, seed=None) == 0
        logs.append((r.root / "ledger" / "ledger.log").read_bytes())
    assert logs[0] != logs[1]


def test_machine_format_records(run):
    assert run("setup", fmt="machine") == 0
    (rec,) = run.records()
    assert rec["schema_version"] == 1 and rec["rng"] == "seeded(11)"


def test_edge_stress_cli(run):
    assert run("scenario", "annie", "--ehr-size", 4096) == 0
    assert run("edge", "stress", "--workers", 32, fmt="machine") == 0
    rec = run.records()[0]
    assert rec["successes"] == 1 and rec["gone"] == 31


def test_bench_cli(run, tmp_path):
    out = tmp_path / "b.jsonl"
    assert run("bench", "length", "--lengths", "10,100", "--trials", 30, "--output", out, fmt="machine") == 0
    assert [r["x"] for r in run.records()] == [10, 100]
    assert len(out.read_text().splitlines()) == 2
    assert run("bench", "length", "--lengths", "10,100", "--trials", 30, "--check",
               "--flat-limit", 0.5) == cli.EXIT_BENCH_SHAPE
    assert "FAIL" in run.out
    assert run("bench", "count", "--counts", "1,2", "--trials", 5) == cli.EXIT_INVALID_INPUT
    assert run("bench", "count", "--counts", "1,x") == cli.EXIT_USAGE


def test_help_lists_exit_codes(capsys):
    assert cli.main(["--help"]) == 0
    assert "14  benchmark shape check failed" in capsys.readouterr().out
