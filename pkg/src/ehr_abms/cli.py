"""Command-line front end: one workspace per invocation.

Exit codes:

    0  ok                     7  threshold authentication rejected
    1  unexpected failure     8  one-time URL gone
    2  usage error            9  decryption denied (policy not satisfied)
    3  workspace problem     10  ciphertext integrity failure
    4  duplicate             11  ledger chain broken
    5  unknown entity        12  invalid input
    6  access denied         13  scenario step failed
                             14  benchmark shape check failed
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import threading
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable

from . import bench, errors
from .abms import dump_profile_bundle
from .edge_http import make_server
from .ledger import LOG_NAME, read_log, verify_chain
from .scenario import ScenarioStepError, run_scenario_annie
from .util import parse_iso
from .workspace import DATA_DIR_ENV, Workspace, sample_ehr

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_WORKSPACE = 3
EXIT_DUPLICATE = 4
EXIT_UNKNOWN = 5
EXIT_ACCESS_DENIED = 6
EXIT_AUTH_REJECTED = 7
EXIT_GONE = 8
EXIT_DECRYPT_DENIED = 9
EXIT_INTEGRITY = 10
EXIT_CHAIN_BROKEN = 11
EXIT_INVALID_INPUT = 12
EXIT_SCENARIO_STEP = 13
EXIT_BENCH_SHAPE = 14

# Checked in order, so subclasses come before their bases.
_ERROR_CODES: list[tuple[type[BaseException], int]] = [
    (ScenarioStepError, EXIT_SCENARIO_STEP),
    (errors.WorkspaceError, EXIT_WORKSPACE),
    (errors.DuplicateRegistrationError, EXIT_DUPLICATE),
    (errors.UnknownParticipantError, EXIT_UNKNOWN),
    (errors.UnknownGidError, EXIT_UNKNOWN),
    (errors.UnknownObjectError, EXIT_UNKNOWN),
    (errors.NoEhrObjectError, EXIT_UNKNOWN),
    (errors.MissingPublicKeyError, EXIT_UNKNOWN),
    (errors.AccessDeniedError, EXIT_ACCESS_DENIED),
    (errors.PolicyNotSatisfiedError, EXIT_DECRYPT_DENIED),
    (errors.CiphertextIntegrityError, EXIT_INTEGRITY),
    (errors.MalformedCiphertextError, EXIT_INTEGRITY),
    (errors.EhrAbmsError, EXIT_INVALID_INPUT),
    (ValueError, EXIT_INVALID_INPUT),
    (OSError, EXIT_WORKSPACE),
]


class CliExit(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, CliExit):
        return exc.code
    # A rerun on a used workspace is reported as the duplicate it is.
    if isinstance(exc, ScenarioStepError) and isinstance(exc.cause, errors.DuplicateRegistrationError):
        return EXIT_DUPLICATE
    for cls, code in _ERROR_CODES:
        if isinstance(exc, cls):
            return code
    return EXIT_FAILURE


# -- output


class Output:
    def __init__(self, fmt: str, stream=None):
        self.fmt = fmt
        self.stream = stream or sys.stdout

    def emit(self, record: dict, human: str | None = None) -> None:
        if self.fmt == "machine":
            self.stream.write(json.dumps({"schema_version": SCHEMA_VERSION, **record}, sort_keys=True) + "\n")
        else:
            self.stream.write((human if human is not None else _human(record)) + "\n")

    def line(self, text: str) -> None:
        """Free-form progress text; suppressed in machine mode."""
        if self.fmt != "machine":
            self.stream.write(text + "\n")


def _human(record: dict) -> str:
    return "  ".join(f"{k}={v}" for k, v in record.items())


def _receipt(r) -> dict:
    return {"seq": r.seq, "event_id": r.event_id, "kind": r.kind, "timestamp": r.timestamp}


# -- workspace handling


def _data_dir(args) -> Path:
    if args.data_dir:
        return Path(args.data_dir)
    env = os.environ.get(DATA_DIR_ENV)
    if env:
        return Path(env)
    raise CliExit(EXIT_USAGE, f"no workspace: pass --data-dir or set {DATA_DIR_ENV}")


def _check_chain(root: Path) -> None:
    log = root / "ledger" / LOG_NAME
    if not log.exists():
        return
    try:
        status = verify_chain(read_log(log))
    except (ValueError, KeyError, errors.WorkspaceError) as exc:
        raise CliExit(EXIT_CHAIN_BROKEN, f"ledger log unreadable: {exc}") from exc
    if not status.ok:
        raise CliExit(EXIT_CHAIN_BROKEN, f"ledger chain broken at seq {status.broken_at}")


def _open(args) -> Workspace:
    root = _data_dir(args)
    if not (root / "config.json").exists():
        raise errors.WorkspaceError(f"{root} is not a workspace; run `setup` first")
    _check_chain(root)
    return Workspace.open(root, seed=args.seed, fixed_clock=args.fixed_clock)


def _read_bytes(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    return Path(path).read_bytes()


def _write_bytes(path: str, data: bytes) -> None:
    if path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    else:
        Path(path).write_bytes(data)


# -- commands


def cmd_setup(args, out: Output) -> int:
    root = _data_dir(args)
    ws = Workspace.create(root, seed=args.seed, fixed_clock=args.fixed_clock,
                          default_ttl=timedelta(hours=args.ttl_hours))
    with ws:
        cfg = ws.config
        out.emit({"data_dir": str(root), "curve_id": cfg.curve_id, "clock": cfg.clock_mode,
                  "rng": cfg.rng_mode, "ledger_height": ws.ledger.height},
                 f"workspace ready at {root} ({cfg.curve_id}, clock {cfg.clock_mode}, rng {cfg.rng_mode})")
    return EXIT_OK


def cmd_authority_add(args, out: Output) -> int:
    with _open(args) as ws:
        r = ws.add_authority(args.authority_id, args.name)
        out.emit({"authority": args.authority_id, **_receipt(r)},
                 f"authority {args.authority_id} registered (seq {r.seq}, event {r.event_id})")
        for name in args.sign_attr:
            ws.add_signing_attribute(args.authority_id, name)
            r = ws.ledger.last_receipt()
            out.emit({"attribute": f"{name}@{args.authority_id}", "key": "verification", **_receipt(r)},
                     f"  signing attribute {name}@{args.authority_id} (seq {r.seq})")
        for name in args.abe_attr:
            ws.add_abe_attribute(args.authority_id, name)
            r = ws.ledger.last_receipt()
            out.emit({"attribute": f"{name}@{args.authority_id}", "key": "encryption", **_receipt(r)},
                     f"  encryption attribute {name}@{args.authority_id} (seq {r.seq})")
    return EXIT_OK


def cmd_authority_attr(args, out: Output) -> int:
    with _open(args) as ws:
        if args.kind == "sign":
            ws.add_signing_attribute(args.authority_id, args.name)
        else:
            ws.add_abe_attribute(args.authority_id, args.name)
        r = ws.ledger.last_receipt()
        out.emit({"attribute": f"{args.name}@{args.authority_id}", "kind": args.kind, **_receipt(r)})
    return EXIT_OK


def cmd_patient_register(args, out: Output) -> int:
    with _open(args) as ws:
        r = ws.register_patient(args.gid, args.name)
        out.emit({"gid": args.gid, "role": "patient", **_receipt(r)},
                 f"patient {args.gid} registered (seq {r.seq}, event {r.event_id})")
    return EXIT_OK


def cmd_provider_register(args, out: Output) -> int:
    with _open(args) as ws:
        r = ws.register_provider(args.gid, args.name, args.kind, args.t, args.n)
        out.emit({"gid": args.gid, "role": f"provider:{args.kind}", "t": args.t, "n": args.n, **_receipt(r)},
                 f"provider {args.gid} ({args.kind}, {args.t} of {args.n}) registered (seq {r.seq})")
    return EXIT_OK


def cmd_keys_extract(args, out: Output) -> int:
    with _open(args) as ws:
        key = ws.extract(args.authority, args.gid, args.attr, args.value)
        out.emit({"gid": args.gid, "attribute": key.attribute.label, "issued_at": key.issuance_record.timestamp},
                 f"signing key for {key.attribute.label} issued to {args.gid}")
    return EXIT_OK


def cmd_keys_abe_issue(args, out: Output) -> int:
    with _open(args) as ws:
        key = ws.abe_issue(args.authority, args.attr, args.gid)
        out.emit({"gid": args.gid, "attribute": key.label}, f"ABE key {key.label} issued to {args.gid}")
    return EXIT_OK


def cmd_sign(args, out: Output) -> int:
    with _open(args) as ws:
        sigs = ws.sign(args.gid)
        if not sigs:
            raise errors.UnknownGidError(f"{args.gid!r} holds no extracted signing keys")
        for s in sigs:
            out.emit({"gid": args.gid, "attribute": s.attribute.label, "signature": s.signature.hex()},
                     f"{s.attribute.label}: {s.signature.hex()}")
    return EXIT_OK


def cmd_profile_write(args, out: Output) -> int:
    with _open(args) as ws:
        r = ws.write_profile(args.gid)
        sigs = ws.ledger.profiles[args.gid].signatures
        if args.bundle_out:
            Path(args.bundle_out).write_text(dump_profile_bundle(sigs, gid=None))
        out.emit({"gid": args.gid, "signatures": len(sigs), **_receipt(r)},
                 f"profile for {args.gid} written with {len(sigs)} signatures (seq {r.seq})")
    return EXIT_OK


def cmd_profile_read(args, out: Output) -> int:
    with _open(args) as ws:
        view = ws.ledger.read_profile(args.caller, args.owner)
        out.emit({"owner": view.gid, "name": view.name, "redacted": view.redacted,
                  "attributes": [s.attribute.label for s in view.signatures],
                  "object_ids": list(view.object_ids)})
    return EXIT_OK


def cmd_acl_grant(args, out: Output) -> int:
    with _open(args) as ws:
        r = ws.grant(args.owner, args.permission, grantee_gid=args.grantee_gid, grantee_role=args.grantee_role)
        who = args.grantee_gid or args.grantee_role
        out.emit({"owner": args.owner, "permission": args.permission, "grantee": who, **_receipt(r)},
                 f"{args.owner} grants {args.permission} to {who} (seq {r.seq})")
    return EXIT_OK


def cmd_ehr_encrypt(args, out: Output) -> int:
    with _open(args) as ws:
        ct = ws.encrypt(_read_bytes(args.input), args.policy)
        _write_bytes(args.output, ct)
        if args.output != "-":
            out.emit({"policy": args.policy, "bytes": len(ct), "output": args.output},
                     f"encrypted {len(ct)} bytes under '{args.policy}' -> {args.output}")
    return EXIT_OK


def cmd_ehr_upload(args, out: Output) -> int:
    with _open(args) as ws:
        oid, r = ws.upload(args.owner, _read_bytes(args.input))
        out.emit({"object_id": oid, **_receipt(r)}, f"object {oid} attached to {args.owner} (seq {r.seq})")
    return EXIT_OK


def cmd_ehr_fetch(args, out: Output) -> int:
    with _open(args) as ws:
        data = ws.fetch(args.url)
    if data is None:
        raise CliExit(EXIT_GONE, "gone")
    _write_bytes(args.output, data)
    if args.output != "-":
        out.emit({"bytes": len(data), "output": args.output}, f"fetched {len(data)} bytes -> {args.output}")
    return EXIT_OK


def cmd_ehr_decrypt(args, out: Output) -> int:
    with _open(args) as ws:
        pt = ws.decrypt(args.gid, _read_bytes(args.input))
    _write_bytes(args.output, pt)
    if args.output != "-":
        out.emit({"bytes": len(pt), "output": args.output}, f"decrypted {len(pt)} bytes -> {args.output}")
    return EXIT_OK


def cmd_access_request(args, out: Output) -> int:
    with _open(args) as ws:
        res = ws.request_access(args.caller, args.owner)
        rec = {"authenticated": res.authenticated, "valid_count": res.valid_count, "url": res.url,
               **_receipt(res.receipt)}
        if res.authenticated:
            out.emit(rec, f"authenticated ({res.valid_count} valid); one-time URL: {res.url}")
            return EXIT_OK
        out.emit(rec, f"rejected: only {res.valid_count} valid signatures (event {res.receipt.event_id})")
        return EXIT_AUTH_REJECTED


def cmd_ledger_verify(args, out: Output) -> int:
    root = _data_dir(args)
    log = root / "ledger" / LOG_NAME
    if not log.exists():
        raise errors.WorkspaceError(f"no ledger at {log}")
    try:
        status = verify_chain(read_log(log))
    except (ValueError, KeyError, errors.WorkspaceError):
        status = None
    if status is None:
        out.emit({"ok": False, "broken_at": 0, "height": None}, "broken: log unreadable")
        return EXIT_CHAIN_BROKEN
    if status.ok:
        out.emit({"ok": True, "height": status.height}, f"ok (height {status.height})")
        return EXIT_OK
    out.emit({"ok": False, "broken_at": status.broken_at, "height": status.height},
             f"broken at seq {status.broken_at}")
    return EXIT_CHAIN_BROKEN


def _bench(args, out: Output, run: Callable[[], bench.BenchReport]) -> int:
    report = run()
    if args.output:
        Path(args.output).write_text(report.to_jsonl())
    if out.fmt == "machine":
        for rec in report.to_records():
            out.stream.write(json.dumps(rec, sort_keys=True) + "\n")
    else:
        out.line(report.table())
    verdicts = bench.shape_verdicts(report, flat_limit=args.flat_limit, r2_limit=args.r2_limit)
    for v in verdicts:
        out.line(v.line())
    if args.check and not all(v.passed for v in verdicts):
        return EXIT_BENCH_SHAPE
    return EXIT_OK


def cmd_bench_length(args, out: Output) -> int:
    return _bench(args, out, lambda: bench.bench_length(args.lengths or bench.DEFAULT_LENGTHS, args.trials,
                                                        seed=args.seed))


def cmd_bench_count(args, out: Output) -> int:
    return _bench(args, out, lambda: bench.bench_count(args.counts or bench.DEFAULT_COUNTS, args.trials,
                                                       seed=args.seed))


def cmd_scenario_annie(args, out: Output) -> int:
    root = _data_dir(args)
    if (root / "config.json").exists():
        ws = _open(args)
    else:
        ws = Workspace.create(root, seed=args.seed, fixed_clock=args.fixed_clock)
    with ws:
        res = run_scenario_annie(ws, ehr_size=args.ehr_size, echo=out.line)
    out.emit({"ok": res.chain_ok, "ledger_height": res.ledger_height, "event_ids": res.event_ids,
              "second_redeem_gone": res.second_redeem_gone},
             f"scenario complete: {len(res.event_ids)} events, ledger height {res.ledger_height}")
    return EXIT_OK


def cmd_edge_serve(args, out: Output) -> int:
    with _open(args) as ws:
        server = make_server(ws.edge, args.host, args.port)
        h, p = server.server_address[:2]
        out.emit({"url": f"http://{h}:{p}"}, f"edge store serving on http://{h}:{p} (Ctrl-C to stop)")
        out.stream.flush()
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
        finally:
            server.server_close()
    return EXIT_OK


def cmd_edge_stress(args, out: Output) -> int:
    """Issue one token and race ``--workers`` threads to redeem it."""
    with _open(args) as ws:
        oid = args.object_id
        if oid is None:
            oid = ws.edge.put_object("gid-stress", _stress_container(ws, sample_ehr(args.size)))
        tok, url = ws.edge.issue_token(oid)
        barrier = threading.Barrier(args.workers)
        results: list[bool] = [False] * args.workers

        def worker(i: int) -> None:
            barrier.wait()
            results[i] = ws.edge.redeem_url(url) is not None

        threads = [threading.Thread(target=worker, args=(i,)) for i in range(args.workers)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        wins = sum(results)
        out.emit({"workers": args.workers, "successes": wins, "gone": args.workers - wins},
                 f"{args.workers} concurrent redeemers: {wins} success, {args.workers - wins} gone")
    return EXIT_OK if wins == 1 else EXIT_FAILURE


def _stress_container(ws: Workspace, plaintext: bytes) -> bytes:
    if not ws.ledger.abe_pk_registry:
        raise errors.MissingPublicKeyError("no ABE attribute published; pass --object-id instead")
    label = sorted(ws.ledger.abe_pk_registry)[0]
    return ws.encrypt(plaintext, label)


# -- parser


def _clock_arg(text: str) -> datetime:
    try:
        dt = parse_iso(text) if text.endswith("Z") else datetime.fromisoformat(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an ISO-8601 instant: {text!r}") from exc
    return dt if dt.tzinfo else dt.replace(tzinfo=timezone.utc)


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ehr-abms",
        description="Multi-authority signatures, attribute-based encryption and a hash-chained ledger for EHR sharing.",
        epilog=__doc__.split("\n\n", 1)[1],
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--data-dir", help=f"workspace directory (default: ${DATA_DIR_ENV})")
    p.add_argument("--seed", type=int, help="seeded randomness; reproducible and NOT secret")
    p.add_argument("--fixed-clock", type=_clock_arg, metavar="ISO8601", help="freeze the clock at this instant")
    p.add_argument("--format", choices=("table", "machine"), default="table",
                   help="human-readable text or JSON lines with a schema_version field")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    def add(parent, name, fn, help_):
        sp = parent.add_parser(name, help=help_, description=help_)
        sp.set_defaults(func=fn)
        return sp

    def group(name, help_):
        g = sub.add_parser(name, help=help_)
        return g.add_subparsers(dest="action", required=True, metavar="action")

    sp = add(sub, "setup", cmd_setup, "create an empty workspace")
    sp.add_argument("--ttl-hours", type=float, default=24.0, help="lifetime of one-time URLs")

    g = group("authority", "attribute authorities")
    sp = add(g, "add", cmd_authority_add, "register an authority")
    sp.add_argument("authority_id")
    sp.add_argument("--name", help="display name")
    sp.add_argument("--sign-attr", action="append", default=[], metavar="NAME", help="signing attribute (repeatable)")
    sp.add_argument("--abe-attr", action="append", default=[], metavar="NAME", help="encryption attribute (repeatable)")
    sp = add(g, "attr", cmd_authority_attr, "set up one more attribute for an authority")
    sp.add_argument("authority_id")
    sp.add_argument("name")
    sp.add_argument("--kind", choices=("sign", "abe"), default="sign")

    g = group("patient", "data owners")
    sp = add(g, "register", cmd_patient_register, "register a patient")
    sp.add_argument("gid")
    sp.add_argument("--name", required=True)

    g = group("provider", "healthcare providers")
    sp = add(g, "register", cmd_provider_register, "register a provider with its (t, n) threshold")
    sp.add_argument("gid")
    sp.add_argument("--name", required=True)
    sp.add_argument("--kind", required=True, help='e.g. "medical laboratory scientist"')
    sp.add_argument("--t", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)

    g = group("keys", "key issuance")
    sp = add(g, "extract", cmd_keys_extract, "issue an attribute signing key to a patient")
    sp.add_argument("--authority", required=True)
    sp.add_argument("--gid", required=True)
    sp.add_argument("--attr", required=True)
    sp.add_argument("--value", required=True)
    sp = add(g, "abe-issue", cmd_keys_abe_issue, "issue an ABE decryption key")
    sp.add_argument("--authority", required=True)
    sp.add_argument("--attr", required=True)
    sp.add_argument("--gid", required=True)

    sp = add(sub, "sign", cmd_sign, "sign every attribute held by a patient")
    sp.add_argument("--gid", required=True)

    g = group("profile", "patient profiles")
    sp = add(g, "write", cmd_profile_write, "publish the patient's signatures as a profile")
    sp.add_argument("--gid", required=True)
    sp.add_argument("--bundle-out", help="also write the signature bundle (without gid) to this file")
    sp = add(g, "read", cmd_profile_read, "read a profile, subject to the ACL")
    sp.add_argument("--caller", required=True)
    sp.add_argument("--owner", required=True)

    g = group("acl", "access control")
    sp = add(g, "grant", cmd_acl_grant, "grant a permission on the owner's profile")
    sp.add_argument("--owner", required=True)
    sp.add_argument("--permission", required=True, choices=("read_profile", "request_access"))
    who = sp.add_mutually_exclusive_group(required=True)
    who.add_argument("--grantee-gid")
    who.add_argument("--grantee-role", help='"provider", "provider:<kind>" or "authority"')

    g = group("ehr", "encrypted health records")
    sp = add(g, "encrypt", cmd_ehr_encrypt, "ABE-encrypt a file under a policy")
    sp.add_argument("--policy", required=True, help='e.g. "lab_scientist@hospital OR 2 of (a@x, b@y, c@z)"')
    sp.add_argument("--in", dest="input", required=True, help="plaintext file or -")
    sp.add_argument("--out", dest="output", required=True, help="ciphertext file or -")
    sp = add(g, "upload", cmd_ehr_upload, "store a ciphertext at the edge and attach it to a profile")
    sp.add_argument("--owner", required=True)
    sp.add_argument("--in", dest="input", required=True)
    sp = add(g, "fetch", cmd_ehr_fetch, "redeem a one-time URL")
    sp.add_argument("--url", required=True)
    sp.add_argument("--out", dest="output", required=True)
    sp = add(g, "decrypt", cmd_ehr_decrypt, "decrypt with the ABE keys held by a gid")
    sp.add_argument("--gid", required=True)
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", dest="output", required=True)

    g = group("access", "threshold-authenticated access")
    sp = add(g, "request", cmd_access_request, "authenticate the owner's signatures and obtain a one-time URL")
    sp.add_argument("--caller", required=True)
    sp.add_argument("--owner", required=True)

    g = group("ledger", "the hash-chained ledger")
    add(g, "verify", cmd_ledger_verify, "recompute the hash chain")

    g = group("bench", "signing/verification micro-benchmarks")
    for name, fn, opt in (("length", cmd_bench_length, "--lengths"), ("count", cmd_bench_count, "--counts")):
        sp = add(g, name, fn, f"vary attribute {name}")
        sp.add_argument(opt, type=_int_list, help="comma-separated values")
        sp.add_argument("--trials", type=int, default=bench.MIN_TRIALS)
        sp.add_argument("--output", help="write the JSON-lines report here")
        sp.add_argument("--check", action="store_true", help=f"exit {EXIT_BENCH_SHAPE} if a shape check fails")
        sp.add_argument("--flat-limit", type=float, default=bench.FLATNESS_LIMIT)
        sp.add_argument("--r2-limit", type=float, default=bench.R2_LIMIT)

    g = group("scenario", "scripted walk-throughs")
    sp = add(g, "annie", cmd_scenario_annie, "run the full registration-to-decryption workflow")
    sp.add_argument("--ehr-size", type=int, default=1 << 20, help="size of the sample EHR in bytes")

    g = group("edge", "the edge store")
    sp = add(g, "serve", cmd_edge_serve, "serve the edge store over local HTTP")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8080)
    sp = add(g, "stress", cmd_edge_stress, "race concurrent redeemers against one token")
    sp.add_argument("--workers", type=int, default=128)
    sp.add_argument("--object-id", help="existing object; otherwise a sample object is encrypted and stored")
    sp.add_argument("--size", type=int, default=4096)
    return p


def main(argv: list[str] | None = None, *, stdout=None, stderr=None) -> int:
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    out = Output(args.format, stdout)
    try:
        return args.func(args, out)
    except Exception as exc:  # noqa: BLE001 - every failure maps to an exit code
        code = exit_code_for(exc)
        if code == EXIT_FAILURE:
            print(f"error: {type(exc).__name__}: {exc}", file=stderr)
        else:
            print(f"error: {exc}", file=stderr)
        return code


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
