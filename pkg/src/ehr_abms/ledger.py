"""Embedded hash-chained ledger standing in for the permissioned blockchain.

On-chain: an append-only list of transactions.  Each transaction carries a
small public payload (roles, outcomes, counts, digests) whose SHA-256 is
bound into the chain hash.  Identities, names and profile contents never
appear on chain; they live in a private record store keyed by digest, and
the public payload references them through a ``record`` digest.  State
(participants, profiles, ACL rules, key registries) is a pure function of
the transactions plus the private records, so it can be rebuilt by replay.

Persistence (optional): ``ledger.log`` holds length-prefixed canonical
transaction encodings; ``private.jsonl`` holds the private records.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import threading
from dataclasses import dataclass, field, replace
from datetime import timedelta
from pathlib import Path
from typing import Iterable, Sequence

from . import abms
from .abms import AttributeRef, AttributeSignature, ThresholdSpec
from .edge_store import EdgeStore, token_digest
from .errors import (
    AccessDeniedError,
    DuplicateRegistrationError,
    InvalidSignatureError,
    MalformedEncodingError,
    NoEhrObjectError,
    UnknownObjectError,
    UnknownParticipantError,
    WorkspaceError,
)
from .pairing import PairingParams
from .util import Clock, Entropy, canonical_json, isoformat, new_event_id, os_entropy, sha256_hex, utc_now

KINDS = ("register", "profile_write", "auth_event", "access_activity")
ROLES = ("patient", "provider", "authority")
PERMISSIONS = ("read_profile", "request_access")
ZERO_HASH = "0" * 64
LOG_NAME = "ledger.log"
PRIVATE_NAME = "private.jsonl"


# --- domain types ---------------------------------------------------------------


@dataclass(frozen=True)
class Participant:
    gid: str
    display_name: str
    role: str
    provider_kind: str | None = None
    threshold: ThresholdSpec | None = None

    def __post_init__(self):
        if not self.gid:
            raise ValueError("participant gid must be non-empty")
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}")
        if self.role == "provider" and (not self.provider_kind or self.threshold is None):
            raise ValueError("providers need a kind and a threshold policy")

    @property
    def role_label(self) -> str:
        return f"provider:{self.provider_kind}" if self.role == "provider" else self.role

    def to_dict(self) -> dict:
        return {
            "gid": self.gid,
            "display_name": self.display_name,
            "role": self.role,
            "provider_kind": self.provider_kind,
            "threshold": None if self.threshold is None else [self.threshold.t, self.threshold.n],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Participant":
        th = d.get("threshold")
        return cls(d["gid"], d["display_name"], d["role"], d.get("provider_kind"),
                   None if th is None else ThresholdSpec(*th))


@dataclass(frozen=True)
class EhrRef:
    object_id: str
    token_digests: tuple[str, ...] = ()


@dataclass(frozen=True)
class PatientProfile:
    gid: str
    name: str
    signatures: tuple[AttributeSignature, ...] = ()
    ehr_refs: tuple[EhrRef, ...] = ()

    def to_dict(self) -> dict:
        return {
            "gid": self.gid,
            "name": self.name,
            "signatures": [s.to_dict() for s in self.signatures],
            "ehr_refs": [{"object_id": r.object_id, "tokens": list(r.token_digests)}
                         for r in self.ehr_refs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PatientProfile":
        return cls(
            d["gid"],
            d["name"],
            tuple(AttributeSignature.from_dict(s) for s in d["signatures"]),
            tuple(EhrRef(r["object_id"], tuple(r["tokens"])) for r in d.get("ehr_refs", [])),
        )


@dataclass(frozen=True)
class ProfileView:
    """What a reader sees.  Non-owners get gid, name and token history redacted."""

    gid: str | None
    name: str | None
    signatures: tuple[AttributeSignature, ...]
    object_ids: tuple[str, ...]
    token_digests: tuple[str, ...] | None
    redacted: bool


@dataclass(frozen=True)
class AclRule:
    """Grant from a profile owner to a grantee gid or a role pattern.

    Role patterns: ``"provider"`` (any provider), ``"provider:<kind>"``,
    or ``"authority"``.  Patients can never be grantees.
    """

    profile_owner_gid: str
    permission: str
    grantee_gid: str | None = None
    grantee_role: str | None = None

    def __post_init__(self):
        if self.permission not in PERMISSIONS:
            raise ValueError(f"permission must be one of {PERMISSIONS}")
        if (self.grantee_gid is None) == (self.grantee_role is None):
            raise ValueError("a rule names exactly one of grantee_gid or grantee_role")
        if self.grantee_role is not None and self.grantee_role.split(":")[0] not in ("provider", "authority"):
            raise ValueError("role patterns must target providers or authorities")

    def matches(self, caller: Participant) -> bool:
        if caller.role == "patient":
            return False
        if self.grantee_gid is not None:
            return caller.gid == self.grantee_gid
        pattern = self.grantee_role
        return pattern == caller.role or pattern == caller.role_label

    def to_dict(self) -> dict:
        return {"owner": self.profile_owner_gid, "permission": self.permission,
                "grantee_gid": self.grantee_gid, "grantee_role": self.grantee_role}

    @classmethod
    def from_dict(cls, d: dict) -> "AclRule":
        return cls(d["owner"], d["permission"], d.get("grantee_gid"), d.get("grantee_role"))


@dataclass(frozen=True)
class LedgerTransaction:
    seq: int
    timestamp: str
    kind: str
    event_id: str
    payload_digest: str
    prev_hash: str
    this_hash: str
    payload: dict = field(default_factory=dict, compare=True)

    def to_dict(self) -> dict:
        return {
            "seq": self.seq, "timestamp": self.timestamp, "kind": self.kind,
            "event_id": self.event_id, "payload_digest": self.payload_digest,
            "prev_hash": self.prev_hash, "this_hash": self.this_hash, "payload": self.payload,
        }

    def encode(self) -> bytes:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "LedgerTransaction":
        return cls(d["seq"], d["timestamp"], d["kind"], d["event_id"], d["payload_digest"],
                   d["prev_hash"], d["this_hash"], d.get("payload", {}))


@dataclass(frozen=True)
class Receipt:
    seq: int
    event_id: str
    timestamp: str
    kind: str
    this_hash: str


@dataclass(frozen=True)
class ChainStatus:
    ok: bool
    broken_at: int | None = None
    height: int = 0

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class AccessOutcome:
    authenticated: bool
    valid_count: int
    url: str | None
    receipt: Receipt


# --- hashing ----------------------------------------------------------------------


def payload_digest(payload: dict) -> str:
    return sha256_hex(canonical_json(payload))


def chain_hash(seq: int, timestamp: str, kind: str, event_id: str, pdigest: str, prev_hash: str) -> str:
    h = hashlib.sha256()
    for part in (str(seq), timestamp, kind, event_id, pdigest, prev_hash):
        raw = str(part).encode("utf-8")
        h.update(struct.pack(">I", len(raw)) + raw)
    return h.hexdigest()


def verify_chain(transactions: Sequence[LedgerTransaction]) -> ChainStatus:
    """Recompute every digest and link; report the first broken seq position."""
    prev = ZERO_HASH
    for i, tx in enumerate(transactions):
        try:
            good = (
                tx.seq == i
                and tx.kind in KINDS
                and tx.prev_hash == prev
                and tx.payload_digest == payload_digest(tx.payload)
                and tx.this_hash == chain_hash(tx.seq, tx.timestamp, tx.kind, tx.event_id,
                                               tx.payload_digest, tx.prev_hash)
            )
        except (TypeError, ValueError):
            good = False
        if not good:
            return ChainStatus(False, i, len(transactions))
        prev = tx.this_hash
    return ChainStatus(True, None, len(transactions))


def read_log(path: str | os.PathLike) -> list[LedgerTransaction]:
    data = Path(path).read_bytes()
    out, pos = [], 0
    while pos < len(data):
        if pos + 4 > len(data):
            raise WorkspaceError("ledger log truncated inside a length prefix")
        (n,) = struct.unpack(">I", data[pos : pos + 4])
        raw = data[pos + 4 : pos + 4 + n]
        if len(raw) != n:
            raise WorkspaceError("ledger log truncated inside a record")
        out.append(LedgerTransaction.from_dict(json.loads(raw)))
        pos += 4 + n
    return out


def _digest_gid(gid: str) -> str:
    return sha256_hex(b"ehr-ledger/subject/v1|" + gid.encode())


# --- the ledger ---------------------------------------------------------------------


class Ledger:
    """Single-writer ledger.  All mutations go through one lock."""

    def __init__(
        self,
        params: PairingParams,
        data_dir: str | os.PathLike | None = None,
        *,
        clock: Clock = utc_now,
        entropy: Entropy = os_entropy,
        edge_store: EdgeStore | None = None,
        token_ttl: timedelta | None = None,
    ):
        self.params = params
        self._clock = clock
        self._entropy = entropy
        self.edge_store = edge_store
        self.token_ttl = token_ttl
        self._lock = threading.RLock()
        self._txs: list[LedgerTransaction] = []
        self._private: dict[str, dict] = {}
        self._reset_state()
        self._dir = Path(data_dir) if data_dir is not None else None
        self._log = self._priv = None
        if self._dir is not None:
            self._dir.mkdir(parents=True, exist_ok=True)
            if (self._dir / LOG_NAME).exists():
                self._load()
            self._log = open(self._dir / LOG_NAME, "ab")
            self._priv = open(self._dir / PRIVATE_NAME, "a", encoding="utf-8")
        if not self._txs:
            self._append("register", {"type": "genesis", "curve_id": params.curve_id}, None)

    def _reset_state(self) -> None:
        self.participants: dict[str, Participant] = {}
        self.profiles: dict[str, PatientProfile] = {}
        self.acl: dict[str, list[AclRule]] = {}
        self.vk_registry: dict[AttributeRef, bytes] = {}
        self.abe_pk_registry: dict[str, bytes] = {}

    # -- persistence / replay

    def _load(self) -> None:
        txs = read_log(self._dir / LOG_NAME)
        priv_path = self._dir / PRIVATE_NAME
        if priv_path.exists():
            for line in priv_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    rec = json.loads(line)
                    if sha256_hex(canonical_json(rec["record"])) != rec["digest"]:
                        raise WorkspaceError(f"private record {rec['digest'][:16]} does not match its digest")
                    self._private[rec["digest"]] = rec["record"]
        self.replay(txs)

    def replay(self, transactions: Iterable[LedgerTransaction]) -> None:
        """Rebuild all state from transactions and the private record store."""
        with self._lock:
            self._reset_state()
            self._txs = []
            for tx in transactions:
                self._txs.append(tx)
                self._apply(tx)

    def close(self) -> None:
        for fh in (self._log, self._priv):
            if fh is not None:
                fh.close()
        self._log = self._priv = None

    def state_snapshot(self) -> dict:
        """Canonical dict of all replayable state, for equality checks."""
        return {
            "participants": {g: p.to_dict() for g, p in sorted(self.participants.items())},
            "profiles": {g: p.to_dict() for g, p in sorted(self.profiles.items())},
            "acl": {g: [r.to_dict() for r in rules] for g, rules in sorted(self.acl.items())},
            "vk_registry": {f"{r.authority_id}/{r.name}": v.hex()
                            for r, v in sorted(self.vk_registry.items())},
            "abe_pk_registry": {k: v.hex() for k, v in sorted(self.abe_pk_registry.items())},
        }

    # -- append path

    def _store_private(self, record: dict) -> str:
        digest = sha256_hex(canonical_json(record))
        if digest not in self._private:
            self._private[digest] = record
            if self._priv is not None:
                self._priv.write(json.dumps({"digest": digest, "record": record}, sort_keys=True) + "\n")
                self._priv.flush()
                os.fsync(self._priv.fileno())
        return digest

    def _append(self, kind: str, payload: dict, record: dict | None) -> Receipt:
        assert kind in KINDS
        with self._lock:
            if record is not None:
                payload = dict(payload, record=self._store_private(record))
            seq = len(self._txs)
            ts = isoformat(self._clock())
            event_id = new_event_id(self._entropy)
            prev = self._txs[-1].this_hash if self._txs else ZERO_HASH
            pd = payload_digest(payload)
            tx = LedgerTransaction(seq, ts, kind, event_id, pd, prev,
                                   chain_hash(seq, ts, kind, event_id, pd, prev), payload)
            if self._log is not None:
                raw = tx.encode()
                self._log.write(struct.pack(">I", len(raw)) + raw)
                self._log.flush()
                os.fsync(self._log.fileno())
            self._txs.append(tx)
            self._apply(tx)
            return Receipt(seq, event_id, ts, kind, tx.this_hash)

    def _record(self, tx: LedgerTransaction) -> dict:
        digest = tx.payload.get("record")
        if digest is None:
            return {}
        try:
            return self._private[digest]
        except KeyError:
            raise WorkspaceError(f"private record {digest} for seq {tx.seq} is missing") from None

    def _apply(self, tx: LedgerTransaction) -> None:
        """State transition for one transaction.  Shared by live appends and replay."""
        kind = tx.payload.get("type")
        rec = self._record(tx)
        if kind == "participant":
            p = Participant.from_dict(rec)
            self.participants[p.gid] = p
        elif kind == "verification_key":
            self.vk_registry[AttributeRef(tx.payload["authority_id"], tx.payload["name"])] = bytes.fromhex(
                tx.payload["key"])
        elif kind == "abe_public_key":
            self.abe_pk_registry[f"{tx.payload['name']}@{tx.payload['authority_id']}"] = bytes.fromhex(
                tx.payload["key"])
        elif kind == "profile":
            prev = self.profiles.get(rec["gid"])
            prof = PatientProfile.from_dict(rec)
            if prev is not None and not prof.ehr_refs:
                prof = replace(prof, ehr_refs=prev.ehr_refs)
            self.profiles[prof.gid] = prof
        elif kind == "ehr_ref":
            prof = self.profiles.get(rec["gid"]) or PatientProfile(
                rec["gid"], self.participants[rec["gid"]].display_name)
            self.profiles[rec["gid"]] = replace(prof, ehr_refs=prof.ehr_refs + (EhrRef(rec["object_id"]),))
        elif kind == "acl":
            rule = AclRule.from_dict(rec)
            self.acl.setdefault(rule.profile_owner_gid, []).append(rule)
        elif kind == "auth_event" and tx.payload.get("token_digest"):
            prof = self.profiles[rec["owner"]]
            refs = list(prof.ehr_refs)
            for i, r in enumerate(refs):
                if r.object_id == rec["object_id"]:
                    refs[i] = replace(r, token_digests=r.token_digests + (tx.payload["token_digest"],))
            self.profiles[rec["owner"]] = replace(prof, ehr_refs=tuple(refs))

    # -- queries

    @property
    def height(self) -> int:
        return len(self._txs)

    @property
    def transactions(self) -> tuple[LedgerTransaction, ...]:
        return tuple(self._txs)

    def last_receipt(self) -> Receipt:
        tx = self._txs[-1]
        return Receipt(tx.seq, tx.event_id, tx.timestamp, tx.kind, tx.this_hash)

    def is_registered(self, gid: str) -> bool:
        return gid in self.participants

    def participant(self, gid: str) -> Participant:
        try:
            return self.participants[gid]
        except KeyError:
            raise UnknownParticipantError(f"unknown participant {gid!r}") from None

    def verify_chain(self) -> ChainStatus:
        with self._lock:
            snapshot = list(self._txs)
        return verify_chain(snapshot)

    def vk_lookup(self, ref: AttributeRef) -> bytes | None:
        return self.vk_registry.get(ref)

    # -- operations

    def register_participant(self, p: Participant) -> Receipt:
        with self._lock:
            if p.gid in self.participants:
                raise DuplicateRegistrationError(f"gid {p.gid!r} already registered")
            payload = {"type": "participant", "role": p.role_label, "subject": _digest_gid(p.gid)}
            return self._append("register", payload, p.to_dict())

    def _publish(self, kind: str, ref: AttributeRef, key: bytes, registry: dict, reg_key) -> Receipt:
        with self._lock:
            auth = self.participants.get(ref.authority_id)
            if auth is None or auth.role != "authority":
                raise UnknownParticipantError(f"{ref.authority_id!r} is not a registered authority")
            if reg_key in registry:
                raise DuplicateRegistrationError(f"key for {ref.label} already published")
            payload = {"type": kind, "authority_id": ref.authority_id, "name": ref.name, "key": key.hex()}
            return self._append("register", payload, None)

    def publish_verification_key(self, ref: AttributeRef, vk: bytes) -> Receipt:
        return self._publish("verification_key", ref, bytes(vk), self.vk_registry, ref)

    def publish_abe_public_key(self, ref: AttributeRef, pk: bytes) -> Receipt:
        return self._publish("abe_public_key", ref, bytes(pk), self.abe_pk_registry, ref.label)

    def _require_owner(self, caller_gid: str, owner_gid: str) -> Participant:
        caller = self.participant(caller_gid)
        owner = self.participant(owner_gid)
        if caller_gid != owner_gid:
            raise AccessDeniedError("only the profile owner may do this")
        if owner.role != "patient":
            raise AccessDeniedError("only patients own profiles")
        return caller

    def write_profile(self, owner_gid: str, profile: PatientProfile) -> Receipt:
        with self._lock:
            self._require_owner(owner_gid, profile.gid)
            for sig in profile.signatures:
                vk = self.vk_registry.get(sig.attribute)
                try:
                    ok = vk is not None and abms.verify_attribute(self.params, sig, vk)
                except MalformedEncodingError:
                    ok = False
                if not ok:
                    raise InvalidSignatureError(f"signature for {sig.attribute.label} does not verify")
            payload = {"type": "profile", "subject": _digest_gid(profile.gid),
                       "signature_count": len(profile.signatures)}
            return self._append("profile_write", payload, profile.to_dict())

    def attach_ehr(self, owner_gid: str, object_id: str) -> Receipt:
        with self._lock:
            self._require_owner(owner_gid, owner_gid)
            if self.edge_store is not None and not self.edge_store.has_object(object_id):
                raise UnknownObjectError(f"edge store has no object {object_id}")
            payload = {"type": "ehr_ref", "subject": _digest_gid(owner_gid)}
            return self._append("profile_write", payload, {"gid": owner_gid, "object_id": object_id})

    def set_acl(self, owner_gid: str, rule: AclRule) -> Receipt:
        with self._lock:
            self._require_owner(owner_gid, rule.profile_owner_gid)
            if rule.grantee_gid is not None:
                grantee = self.participant(rule.grantee_gid)
                if grantee.role == "patient":
                    raise AccessDeniedError("patients cannot be granted access to other profiles")
            payload = {"type": "acl", "subject": _digest_gid(owner_gid), "permission": rule.permission}
            return self._append("profile_write", payload, rule.to_dict())

    def _permits(self, caller: Participant, owner_gid: str, permission: str) -> bool:
        return any(r.permission == permission and r.matches(caller) for r in self.acl.get(owner_gid, ()))

    def read_profile(self, caller_gid: str, owner_gid: str) -> ProfileView:
        with self._lock:
            caller = self.participant(caller_gid)
            self.participant(owner_gid)
            profile = self.profiles.get(owner_gid)
            if profile is None:
                raise UnknownParticipantError(f"{owner_gid!r} has no profile")
            if caller_gid == owner_gid:
                return ProfileView(profile.gid, profile.name, profile.signatures,
                                   tuple(r.object_id for r in profile.ehr_refs),
                                   tuple(d for r in profile.ehr_refs for d in r.token_digests), False)
            granted = self._permits(caller, owner_gid, "read_profile")
            self._append(
                "access_activity",
                {"type": "read_profile", "outcome": "granted" if granted else "denied",
                 "caller_role": caller.role_label},
                {"caller": caller_gid, "owner": owner_gid},
            )
            if not granted:
                raise AccessDeniedError("profile read denied")
            return ProfileView(None, None, profile.signatures,
                               tuple(r.object_id for r in profile.ehr_refs), None, True)

    def request_access(self, caller_gid: str, owner_gid: str) -> AccessOutcome:
        """Smart-contract entry point: threshold-authenticate the owner, log, issue a one-time URL.

        Exactly one auth_event is appended per call, whatever the outcome.
        """
        with self._lock:
            caller = self.participants.get(caller_gid)
            owner = self.participants.get(owner_gid)
            role = caller.role_label if caller else "unknown"

            def log(outcome: str, extra: dict | None = None, private: dict | None = None) -> Receipt:
                payload = {"type": "auth_event", "outcome": outcome, "caller_role": role}
                payload.update(extra or {})
                record = {"caller": caller_gid, "owner": owner_gid}
                record.update(private or {})
                return self._append("auth_event", payload, record)

            if caller is None or owner is None:
                log("error", {"reason": "unknown participant"})
                raise UnknownParticipantError("caller or owner is not registered")
            if caller.role != "provider":
                log("denied", {"reason": "caller is not a provider"})
                raise AccessDeniedError("only providers may request access")
            if not self._permits(caller, owner_gid, "request_access"):
                log("denied", {"reason": "acl"})
                raise AccessDeniedError("access request denied by ACL")
            profile = self.profiles.get(owner_gid)
            if profile is None or not profile.ehr_refs:
                log("error", {"reason": "no ehr object"})
                raise NoEhrObjectError(f"no EHR object attached for {owner_gid!r}")

            sigs = list(profile.signatures)
            t = caller.threshold.t
            n = len(sigs)
            if n == 0 or t > n:
                valid = 0
                if n:
                    valid = abms.verify_threshold(self.params, sigs, self.vk_lookup,
                                                  ThresholdSpec(1, n)).valid_count
                rec = log("rejected", {"t": t, "n": n, "valid_count": valid})
                return AccessOutcome(False, valid, None, rec)
            result = abms.verify_threshold(self.params, sigs, self.vk_lookup, ThresholdSpec(t, n))
            counts = {"t": t, "n": n, "valid_count": result.valid_count}
            if not result.authenticated:
                rec = log("rejected", counts)
                return AccessOutcome(False, result.valid_count, None, rec)

            object_id = profile.ehr_refs[-1].object_id
            url = None
            tdigest = None
            if self.edge_store is not None:
                tok, url = self.edge_store.issue_token(object_id, self.token_ttl)
                tdigest = token_digest(tok.token)
            rec = log("authenticated", dict(counts, token_digest=tdigest), {"object_id": object_id})
            return AccessOutcome(True, result.valid_count, url, rec)

    # test/diagnostic hook: the public API offers no way to rewrite history
    def _replace_transaction(self, index: int, tx: LedgerTransaction) -> None:
        self._txs[index] = tx
