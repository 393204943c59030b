"""A data directory holding one deployment: ledger, edge store, authorities, wallets.

Layout::

    <data_dir>/config.json
    <data_dir>/ledger/ledger.log, private.jsonl
    <data_dir>/edge/objects/<object_id>, tokens.journal
    <data_dir>/authorities.json        authority secrets (ABMS and ABE)
    <data_dir>/wallets/<gid>.json      user-held keys and signatures

The command line opens a workspace per invocation; the scripted scenario
keeps one open for the whole run.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import warnings
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

from . import abms, maabe, pairing
from .abms import AttributeAuthority, AttributeDescriptor, AttributeRef, ExtractedSigningKey, ThresholdSpec
from .edge_store import EdgeStore
from .errors import UnknownParticipantError, WorkspaceError
from .ledger import LOG_NAME, AccessOutcome, AclRule, Ledger, Participant, PatientProfile, Receipt, read_log
from .maabe import AbeAuthority, AbeUserKey, EhrCiphertext
from .util import Clock, Entropy, fixed_clock, isoformat, os_entropy, parse_iso, utc_now

CONFIG_VERSION = 1
DATA_DIR_ENV = "EHR_ABMS_DATA_DIR"


def sample_ehr(size: int = 1 << 20, seed: int = 0) -> bytes:
    """Deterministic pseudo-random bytes standing in for imaging data."""
    return random.Random(seed).randbytes(size)


@dataclass
class WorkspaceConfig:
    data_dir: Path
    curve_id: str = pairing.CURVE_ID
    default_ttl: timedelta = timedelta(hours=24)
    fixed_clock: datetime | None = None
    seed: int | None = None

    @property
    def clock_mode(self) -> str:
        return "real" if self.fixed_clock is None else f"fixed({isoformat(self.fixed_clock)})"

    @property
    def rng_mode(self) -> str:
        return "os" if self.seed is None else f"seeded({self.seed})"

    def to_dict(self) -> dict:
        return {
            "version": CONFIG_VERSION,
            "curve_id": self.curve_id,
            "default_ttl_seconds": self.default_ttl.total_seconds(),
            "fixed_clock": None if self.fixed_clock is None else isoformat(self.fixed_clock),
            "seed": self.seed,
        }

    @classmethod
    def load(cls, data_dir: Path) -> "WorkspaceConfig":
        d = json.loads((data_dir / "config.json").read_text())
        fc = d.get("fixed_clock")
        return cls(data_dir, d["curve_id"], timedelta(seconds=d["default_ttl_seconds"]),
                   None if fc is None else parse_iso(fc), d.get("seed"))


class _Wallet:
    def __init__(self, path: Path):
        self.path = path
        self.signing_keys: dict[str, ExtractedSigningKey] = {}
        self.abe_keys: dict[str, AbeUserKey] = {}
        self.signatures: dict[str, abms.AttributeSignature] = {}
        if path.exists():
            d = json.loads(path.read_text())
            for k in d["signing_keys"]:
                key = ExtractedSigningKey.from_dict(k)
                self.signing_keys[key.attribute.label] = key
            for k in d["abe_keys"]:
                key = AbeUserKey.from_dict(k)
                self.abe_keys[key.label] = key
            for s in d["signatures"]:
                sig = abms.AttributeSignature.from_dict(s)
                self.signatures[sig.attribute.label] = sig

    def save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        doc = {
            "signing_keys": [k.to_dict() for _, k in sorted(self.signing_keys.items())],
            "abe_keys": [k.to_dict() for _, k in sorted(self.abe_keys.items())],
            "signatures": [s.to_dict() for _, s in sorted(self.signatures.items())],
        }
        self.path.write_text(json.dumps(doc, indent=2, sort_keys=True))


class Workspace:
    def __init__(self, config: WorkspaceConfig, *, entropy: Entropy | None = None, clock: Clock | None = None):
        self.config = config
        root = Path(config.data_dir)
        self.root = root
        self.params = pairing.setup(128)
        if clock is None:
            clock = utc_now if config.fixed_clock is None else fixed_clock(config.fixed_clock)
        if entropy is None:
            entropy = self._entropy_for(config.seed, root)
        self.clock = clock
        self.entropy = entropy
        self.edge = EdgeStore(root / "edge", clock=clock, entropy=entropy, default_ttl=config.default_ttl)
        self.ledger = Ledger(self.params, root / "ledger", clock=clock, entropy=entropy,
                             edge_store=self.edge, token_ttl=config.default_ttl)
        self.abms_authorities: dict[str, AttributeAuthority] = {}
        self.abe_authorities: dict[str, AbeAuthority] = {}
        self._wallets: dict[str, _Wallet] = {}
        self._load_authorities()

    @staticmethod
    def _entropy_for(seed: int | None, root: Path) -> Entropy:
        if seed is None:
            return os_entropy
        warnings.warn("seeded randomness: keys are reproducible and not secret", stacklevel=3)
        # Separate invocations on one workspace must not replay the same stream.
        log = root / "ledger" / LOG_NAME
        height = len(read_log(log)) if log.exists() else 0
        mixed = int.from_bytes(hashlib.sha256(f"{seed}:{height}".encode()).digest()[:8], "big")
        return random.Random(mixed).randbytes

    # -- lifecycle

    @classmethod
    def create(cls, data_dir: str | os.PathLike, *, seed: int | None = None,
               fixed_clock: datetime | None = None, default_ttl: timedelta = timedelta(hours=24),
               **kwargs) -> "Workspace":
        root = Path(data_dir)
        if (root / "config.json").exists():
            raise WorkspaceError(f"{root} already holds a workspace")
        root.mkdir(parents=True, exist_ok=True)
        if not os.access(root, os.W_OK):
            raise WorkspaceError(f"{root} is not writable")
        cfg = WorkspaceConfig(root, default_ttl=default_ttl, fixed_clock=fixed_clock, seed=seed)
        (root / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2))
        return cls(cfg, **kwargs)

    @classmethod
    def open(cls, data_dir: str | os.PathLike, *, seed: int | None = None,
             fixed_clock: datetime | None = None, **kwargs) -> "Workspace":
        root = Path(data_dir)
        if not (root / "config.json").exists():
            raise WorkspaceError(f"{root} is not a workspace; run `setup` first")
        cfg = WorkspaceConfig.load(root)
        if seed is not None:
            cfg.seed = seed
        if fixed_clock is not None:
            cfg.fixed_clock = fixed_clock
        return cls(cfg, **kwargs)

    def close(self) -> None:
        self.save()
        self.ledger.close()
        self.edge.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _load_authorities(self) -> None:
        path = self.root / "authorities.json"
        if not path.exists():
            return
        d = json.loads(path.read_text())
        for aid, ad in d["abms"].items():
            self.abms_authorities[aid] = AttributeAuthority.from_dict(ad, self.params, **self._abms_hooks())
        for aid, ad in d["abe"].items():
            self.abe_authorities[aid] = AbeAuthority.from_dict(ad, self.params, **self._abe_hooks())

    def _abms_hooks(self) -> dict:
        return {"is_registered": self.ledger.is_registered,
                "publish": self.ledger.publish_verification_key, "clock": self.clock}

    def _abe_hooks(self) -> dict:
        return {"is_registered": self.ledger.is_registered, "publish": self.ledger.publish_abe_public_key}

    def save(self) -> None:
        doc = {
            "abms": {a: auth.to_dict() for a, auth in sorted(self.abms_authorities.items())},
            "abe": {a: auth.to_dict() for a, auth in sorted(self.abe_authorities.items())},
        }
        (self.root / "authorities.json").write_text(json.dumps(doc, indent=2, sort_keys=True))
        for w in self._wallets.values():
            w.save()

    def wallet(self, gid: str) -> _Wallet:
        if gid not in self._wallets:
            safe = hashlib.sha256(gid.encode()).hexdigest()[:32]
            self._wallets[gid] = _Wallet(self.root / "wallets" / f"{safe}.json")
        return self._wallets[gid]

    # -- registration

    def add_authority(self, authority_id: str, display_name: str | None = None) -> Receipt:
        receipt = self.ledger.register_participant(
            Participant(authority_id, display_name or authority_id, "authority"))
        self.abms_authorities[authority_id] = AttributeAuthority(authority_id, self.params, **self._abms_hooks())
        self.abe_authorities[authority_id] = AbeAuthority(authority_id, self.params, **self._abe_hooks())
        self.save()
        return receipt

    def _abms(self, authority_id: str) -> AttributeAuthority:
        try:
            return self.abms_authorities[authority_id]
        except KeyError:
            raise UnknownParticipantError(f"unknown authority {authority_id!r}") from None

    def _abe(self, authority_id: str) -> AbeAuthority:
        try:
            return self.abe_authorities[authority_id]
        except KeyError:
            raise UnknownParticipantError(f"unknown authority {authority_id!r}") from None

    def add_signing_attribute(self, authority_id: str, name: str):
        keys = self._abms(authority_id).authority_setup(AttributeRef(authority_id, name), self.entropy)
        self.save()
        return keys

    def add_abe_attribute(self, authority_id: str, name: str):
        keys = self._abe(authority_id).setup_attribute(name, self.entropy)
        self.save()
        return keys

    def register_patient(self, gid: str, name: str) -> Receipt:
        return self.ledger.register_participant(Participant(gid, name, "patient"))

    def register_provider(self, gid: str, name: str, kind: str, t: int, n: int) -> Receipt:
        return self.ledger.register_participant(Participant(gid, name, "provider", kind, ThresholdSpec(t, n)))

    # -- keys and signatures

    def extract(self, authority_id: str, gid: str, name: str, value: str) -> ExtractedSigningKey:
        key = self._abms(authority_id).extract(gid, AttributeDescriptor(authority_id, name, value))
        self.wallet(gid).signing_keys[key.attribute.label] = key
        self.save()
        return key

    def abe_issue(self, authority_id: str, name: str, gid: str) -> AbeUserKey:
        key = self._abe(authority_id).keygen(name, gid)
        self.wallet(gid).abe_keys[key.label] = key
        self.save()
        return key

    def sign(self, gid: str) -> list[abms.AttributeSignature]:
        w = self.wallet(gid)
        out = []
        for label, key in sorted(w.signing_keys.items()):
            sig = abms.sign_attribute(self.params, key, key.attribute.value)
            w.signatures[label] = sig
            out.append(sig)
        self.save()
        return out

    def write_profile(self, gid: str) -> Receipt:
        p = self.ledger.participant(gid)
        sigs = tuple(s for _, s in sorted(self.wallet(gid).signatures.items()))
        return self.ledger.write_profile(gid, PatientProfile(gid, p.display_name, sigs))

    def grant(self, owner_gid: str, permission: str, *, grantee_gid: str | None = None,
              grantee_role: str | None = None) -> Receipt:
        return self.ledger.set_acl(owner_gid, AclRule(owner_gid, permission, grantee_gid, grantee_role))

    # -- EHR data path

    def encrypt(self, plaintext: bytes, policy: str) -> bytes:
        ct = maabe.abe_encrypt(self.params, plaintext, policy, self.ledger.abe_pk_registry, self.entropy)
        return ct.to_bytes()

    def upload(self, owner_gid: str, ciphertext: bytes) -> tuple[str, Receipt]:
        oid = self.edge.put_object(owner_gid, ciphertext)
        return oid, self.ledger.attach_ehr(owner_gid, oid)

    def request_access(self, caller_gid: str, owner_gid: str) -> AccessOutcome:
        return self.ledger.request_access(caller_gid, owner_gid)

    def fetch(self, url: str) -> bytes | None:
        return self.edge.redeem_url(url)

    def decrypt(self, gid: str, ciphertext: bytes | EhrCiphertext) -> bytes:
        keys = list(self.wallet(gid).abe_keys.values())
        return maabe.abe_decrypt(self.params, ciphertext, keys)
