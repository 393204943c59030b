"""The Annie Foster walk-through: registration to decryption on one workspace."""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable

from .errors import EhrAbmsError
from .workspace import Workspace, sample_ehr

ANNIE_GID = "gid-annie-foster"
ANNIE_NAME = "Annie Foster"
ANNIE_ATTRIBUTES = (
    ("hospital", "patient_id", "0003231"),
    ("dmv", "driver_license", "9907184"),
    ("insurer", "insurance_id", "1EG4-TE5-MK72"),
)
AUTHORITIES = (
    ("hospital", "General Hospital"),
    ("dmv", "Department of Motor Vehicles"),
    ("insurer", "Health Insurance Co."),
)
LAB_GID = "gid-lab-scientist"
RESEARCH_GID = "gid-research-scientist"
PROVIDERS = (
    # gid, name, kind, t, n, ABE attribute held
    (LAB_GID, "Lab Scientist", "medical laboratory scientist", 3, 3, "lab_scientist"),
    (RESEARCH_GID, "Research Scientist", "medical research scientist", 1, 3, "research_scientist"),
)
EHR_POLICY = "lab_scientist@hospital OR research_scientist@hospital"


class ScenarioStepError(EhrAbmsError):
    def __init__(self, step: str, cause: BaseException):
        super().__init__(f"step '{step}' failed: {cause}")
        self.step = step
        self.cause = cause


@dataclass
class ScenarioResult:
    transcript: list[str] = field(default_factory=list)
    event_ids: list[str] = field(default_factory=list)
    urls: dict[str, str] = field(default_factory=dict)
    second_redeem_gone: dict[str, bool] = field(default_factory=dict)
    ledger_height: int = 0
    chain_ok: bool = False


def run_scenario_annie(
    ws: Workspace, *, ehr_size: int = 1 << 20, echo: Callable[[str], None] | None = None
) -> ScenarioResult:
    res = ScenarioResult()

    def say(line: str) -> None:
        res.transcript.append(line)
        if echo is not None:
            echo(line)

    def logged(receipt, what: str) -> None:
        res.event_ids.append(receipt.event_id)
        say(f"  seq={receipt.seq:<3} {receipt.kind:<15} {receipt.event_id}  {what}")

    @contextmanager
    def step(name: str):
        say(f"[{name}]")
        try:
            yield
        except ScenarioStepError:
            raise
        except Exception as exc:
            raise ScenarioStepError(name, exc) from exc

    with step("authority setup"):
        for aid, name in AUTHORITIES:
            logged(ws.add_authority(aid, name), f"authority {aid}")
        for aid, attr, _ in ANNIE_ATTRIBUTES:
            ws.add_signing_attribute(aid, attr)
            logged(ws.ledger.last_receipt(), f"verification key {attr}@{aid}")
        for *_, abe_attr in PROVIDERS:
            ws.add_abe_attribute("hospital", abe_attr)
            logged(ws.ledger.last_receipt(), f"encryption key {abe_attr}@hospital")

    with step("registration"):
        logged(ws.register_patient(ANNIE_GID, ANNIE_NAME), "patient registered")
        for gid, name, kind, t, n, _ in PROVIDERS:
            logged(ws.register_provider(gid, name, kind, t, n), f"provider registered ({kind}, {t} of {n})")

    with step("key issuance"):
        for aid, attr, value in ANNIE_ATTRIBUTES:
            ws.extract(aid, ANNIE_GID, attr, value)
            say(f"  extracted signing key for {attr}@{aid}")
        for gid, *_, abe_attr in PROVIDERS:
            ws.abe_issue("hospital", abe_attr, gid)
            say(f"  issued ABE key {abe_attr}@hospital")

    with step("ehr encrypt and upload"):
        plaintext = sample_ehr(ehr_size)
        ct = ws.encrypt(plaintext, EHR_POLICY)
        oid, receipt = ws.upload(ANNIE_GID, ct)
        logged(receipt, f"EHR object {oid[:16]}... under '{EHR_POLICY}'")

    with step("abms signing"):
        sigs = ws.sign(ANNIE_GID)
        for sig in sigs:
            say(f"  signed {sig.attribute.label}: {sig.signature.hex()[:24]}...")
        logged(ws.write_profile(ANNIE_GID), f"profile written with {len(sigs)} signatures")

    with step("access policy"):
        for _, _, kind, *_ in PROVIDERS:
            logged(ws.grant(ANNIE_GID, "request_access", grantee_role=f"provider:{kind}"),
                   f"request_access granted to {kind}")

    with step("access requests"):
        for gid, _, kind, t, n, _ in PROVIDERS:
            out = ws.request_access(gid, ANNIE_GID)
            logged(out.receipt, f"{kind}: {out.valid_count}/{n} valid, t={t}")
            if not out.authenticated:
                raise RuntimeError(f"{kind} was not authenticated")
            res.urls[gid] = out.url

    with step("retrieve and decrypt"):
        for gid, _, kind, *_ in PROVIDERS:
            url = res.urls[gid]
            data = ws.fetch(url)
            if data is None:
                raise RuntimeError(f"first redemption of {url} returned gone")
            again = ws.fetch(url)
            res.second_redeem_gone[gid] = again is None
            say(f"  {kind}: fetched {len(data)} bytes; second fetch -> {'gone' if again is None else 'DATA'}")
            if again is not None:
                raise RuntimeError("one-time URL redeemed twice")
            if ws.decrypt(gid, data) != plaintext:
                raise RuntimeError("decrypted EHR differs from the original")
            say(f"  {kind}: decrypted EHR matches ({len(plaintext)} bytes)")

    with step("ledger verify"):
        status = ws.ledger.verify_chain()
        res.chain_ok = status.ok
        res.ledger_height = status.height
        say(f"  chain ok={status.ok} height={status.height}")
        if not status.ok:
            raise RuntimeError(f"chain broken at {status.broken_at}")

    ws.save()
    return res

