"""Multi-authority attribute-based multi-signatures with (t, n) threshold verification.

Each attribute authority owns a BLS keypair per attribute.  Extraction
hands the attribute's signing scalar to a registered data owner and
records the issuance; the binding to the owner's GID is administrative
(an auditable record), not cryptographic.  Owners sign a digest of each
attribute value, and verifiers check every signature individually before
comparing the number of valid ones against a threshold.

Verification takes only the signature bundle and public keys.  No GID
flows through ``verify_attribute`` or ``verify_threshold``.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Iterable, Mapping, Sequence

from py_arkworks_bls12381 import G2Point

from . import pairing
from .errors import (
    AttestationMismatchError,
    DuplicateRegistrationError,
    ForeignAttributeError,
    MalformedEncodingError,
    ThresholdSpecError,
    UnknownGidError,
)
from .pairing import GroupSignature, PairingParams
from .util import Clock, Entropy, isoformat, os_entropy, utc_now

ATTRIBUTE_DOMAIN_TAG = b"ehr-abms/attribute-digest/v1"
PROFILE_BUNDLE_VERSION = 1
VK_REGISTRY_VERSION = 1


@dataclass(frozen=True, order=True)
class AttributeRef:
    """(authority_id, name): identifies an attribute without its value."""

    authority_id: str
    name: str

    @property
    def label(self) -> str:
        return f"{self.name}@{self.authority_id}"


@dataclass(frozen=True)
class AttributeDescriptor:
    authority_id: str
    name: str
    value: str

    def __post_init__(self):
        if not self.authority_id or not self.name:
            raise ValueError("attribute needs an authority_id and a name")
        if not self.value:
            raise ValueError("attribute value must be non-empty")

    @property
    def ref(self) -> AttributeRef:
        return AttributeRef(self.authority_id, self.name)

    @property
    def label(self) -> str:
        return self.ref.label


def _as_ref(attribute: AttributeDescriptor | AttributeRef) -> AttributeRef:
    return attribute.ref if isinstance(attribute, AttributeDescriptor) else attribute


def _lp(data: bytes) -> bytes:
    return len(data).to_bytes(4, "big") + data


def attribute_digest(ref: AttributeRef, value: str) -> bytes:
    """H(A_i): SHA-256 over a domain tag, the attribute identity and its value."""
    h = hashlib.sha256()
    h.update(_lp(ATTRIBUTE_DOMAIN_TAG))
    h.update(_lp(ref.authority_id.encode()))
    h.update(_lp(ref.name.encode()))
    h.update(_lp(value.encode()))
    return h.digest()


@dataclass(frozen=True)
class AuthorityAttributeKeys:
    """(SIK_i, VK_i) for one attribute type; values are attested per owner at extraction."""

    attribute: AttributeRef
    signature_key: int = field(repr=False)
    verification_key: G2Point = field(compare=False)

    @property
    def vk_bytes(self) -> bytes:
        return pairing.encode_vk(self.verification_key)


@dataclass(frozen=True)
class IssuanceRecord:
    authority_id: str
    gid: str
    attribute: AttributeDescriptor
    timestamp: str


@dataclass(frozen=True)
class ExtractedSigningKey:
    attribute: AttributeDescriptor
    gid: str
    signing_key: int = field(repr=False)
    issuance_record: IssuanceRecord

    def to_dict(self) -> dict:
        return {
            "authority_id": self.attribute.authority_id,
            "name": self.attribute.name,
            "value": self.attribute.value,
            "gid": self.gid,
            "signing_key": pairing.encode_scalar(self.signing_key).hex(),
            "issued_at": self.issuance_record.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExtractedSigningKey":
        attr = AttributeDescriptor(d["authority_id"], d["name"], d["value"])
        record = IssuanceRecord(attr.authority_id, d["gid"], attr, d["issued_at"])
        return cls(attr, d["gid"], pairing.decode_scalar(bytes.fromhex(d["signing_key"])), record)


@dataclass(frozen=True)
class AttributeSignature:
    """sigma_i with the digest it signs.  Carries no attribute value."""

    attribute: AttributeRef
    signature: GroupSignature
    hashed_value_digest: bytes

    def to_dict(self) -> dict:
        return {
            "authority_id": self.attribute.authority_id,
            "name": self.attribute.name,
            "signature": self.signature.hex(),
            "digest": self.hashed_value_digest.hex(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AttributeSignature":
        try:
            digest = bytes.fromhex(d["digest"])
        except ValueError as exc:
            raise MalformedEncodingError(f"digest hex: {exc}") from exc
        return cls(
            AttributeRef(d["authority_id"], d["name"]),
            GroupSignature.from_hex(d["signature"]),
            digest,
        )


@dataclass(frozen=True)
class ThresholdSpec:
    t: int
    n: int

    def __post_init__(self):
        if not (isinstance(self.t, int) and isinstance(self.n, int)) or not 1 <= self.t <= self.n:
            raise ThresholdSpecError(f"threshold requires 1 <= t <= n, got t={self.t}, n={self.n}")


@dataclass(frozen=True)
class ThresholdResult:
    authenticated: bool
    valid_count: int
    spec: ThresholdSpec

    def __bool__(self) -> bool:
        return self.authenticated


def abms_initial_setup(security_level: int = 128) -> PairingParams:
    return pairing.setup(security_level)


class AttributeAuthority:
    """An attribute authority: per-attribute BLS keys plus an issuance registry.

    ``is_registered`` decides whether a GID may receive keys; by default the
    authority keeps its own enrolment set (see :meth:`enroll`).
    ``publish`` is called with (attribute ref, VK bytes) after each setup,
    which is how keys reach the ledger's registry.
    """

    def __init__(
        self,
        authority_id: str,
        params: PairingParams,
        *,
        is_registered: Callable[[str], bool] | None = None,
        publish: Callable[[AttributeRef, bytes], None] | None = None,
        clock: Clock = utc_now,
    ):
        self.authority_id = authority_id
        self.params = params
        self._enrolled: set[str] = set()
        self._is_registered = is_registered
        self._publish = publish
        self._clock = clock
        self._keys: dict[str, AuthorityAttributeKeys] = {}
        self._issued: dict[tuple[str, str], ExtractedSigningKey] = {}
        self.issuance_log: list[IssuanceRecord] = []
        self._lock = threading.Lock()

    def enroll(self, gid: str) -> None:
        self._enrolled.add(gid)

    def gid_known(self, gid: str) -> bool:
        if not gid:
            return False
        if self._is_registered is not None:
            return self._is_registered(gid)
        return gid in self._enrolled

    @property
    def attributes(self) -> dict[str, AuthorityAttributeKeys]:
        return dict(self._keys)

    def keys_for(self, name: str) -> AuthorityAttributeKeys:
        try:
            return self._keys[name]
        except KeyError:
            raise ForeignAttributeError(f"{self.authority_id} does not issue {name!r}") from None

    def authority_setup(
        self, attribute: AttributeDescriptor | AttributeRef, entropy: Entropy = os_entropy
    ) -> AuthorityAttributeKeys:
        attribute = _as_ref(attribute)
        if attribute.authority_id != self.authority_id:
            raise ForeignAttributeError(
                f"{attribute.label} belongs to {attribute.authority_id}, not {self.authority_id}"
            )
        with self._lock:
            if attribute.name in self._keys:
                raise DuplicateRegistrationError(f"{attribute.label} already registered")
            kp = pairing.keygen(self.params, entropy)
            keys = AuthorityAttributeKeys(attribute, kp.signing_scalar, kp.verification_point)
            self._keys[attribute.name] = keys
        if self._publish is not None:
            self._publish(attribute, keys.vk_bytes)
        return keys

    def extract(self, gid: str, attribute: AttributeDescriptor) -> ExtractedSigningKey:
        if not self.gid_known(gid):
            raise UnknownGidError(f"gid {gid!r} is not registered")
        if attribute.authority_id != self.authority_id or attribute.name not in self._keys:
            raise ForeignAttributeError(f"{self.authority_id} does not own {attribute.label}")
        return extract(self.params, gid, attribute, self._keys[attribute.name], authority=self)

    def _record(self, key: ExtractedSigningKey) -> ExtractedSigningKey:
        slot = (key.gid, key.attribute.name)
        with self._lock:
            existing = self._issued.get(slot)
            if existing is not None:
                if existing.attribute.value != key.attribute.value:
                    raise AttestationMismatchError(
                        f"{key.attribute.label} was attested to {key.gid} with a different value"
                    )
                return existing
            self._issued[slot] = key
            self.issuance_log.append(key.issuance_record)
            return key

    def to_dict(self) -> dict:
        return {
            "authority_id": self.authority_id,
            "enrolled": sorted(self._enrolled),
            "attributes": [
                {
                    "name": k.attribute.name,
                    "signature_key": pairing.encode_scalar(k.signature_key).hex(),
                }
                for k in self._keys.values()
            ],
            "issued": [k.to_dict() for k in self._issued.values()],
        }

    @classmethod
    def from_dict(cls, d: dict, params: PairingParams, **kwargs) -> "AttributeAuthority":
        auth = cls(d["authority_id"], params, **kwargs)
        auth._enrolled = set(d.get("enrolled", []))
        for a in d["attributes"]:
            attr = AttributeRef(auth.authority_id, a["name"])
            kp = pairing.BlsKeyPair.from_secret(
                params, pairing.decode_scalar(bytes.fromhex(a["signature_key"]))
            )
            auth._keys[attr.name] = AuthorityAttributeKeys(
                attr, kp.signing_scalar, kp.verification_point
            )
        for k in d.get("issued", []):
            key = ExtractedSigningKey.from_dict(k)
            auth._issued[(key.gid, key.attribute.name)] = key
            auth.issuance_log.append(key.issuance_record)
        return auth


def authority_setup(
    params: PairingParams,
    attribute: AttributeDescriptor | AttributeRef,
    entropy: Entropy = os_entropy,
    *,
    authority: AttributeAuthority | None = None,
) -> AuthorityAttributeKeys:
    """Generate (SIK_i, VK_i) for one attribute.

    Without an ``authority`` no duplicate tracking happens; the stateful
    check lives on :class:`AttributeAuthority`.
    """
    if authority is not None:
        return authority.authority_setup(attribute, entropy)
    kp = pairing.keygen(params, entropy)
    return AuthorityAttributeKeys(_as_ref(attribute), kp.signing_scalar, kp.verification_point)


def extract(
    params: PairingParams,
    gid: str,
    attribute: AttributeDescriptor,
    authority_keys: AuthorityAttributeKeys,
    *,
    authority: AttributeAuthority | None = None,
    timestamp: datetime | None = None,
) -> ExtractedSigningKey:
    if not gid:
        raise UnknownGidError("gid must be non-empty")
    if authority_keys.attribute != attribute.ref:
        raise ForeignAttributeError(
            f"keys for {authority_keys.attribute.label} cannot extract {attribute.label}"
        )
    if authority is not None and not authority.gid_known(gid):
        raise UnknownGidError(f"gid {gid!r} is not registered")
    when = timestamp or (authority._clock() if authority is not None else utc_now())
    record = IssuanceRecord(attribute.authority_id, gid, attribute, isoformat(when))
    key = ExtractedSigningKey(attribute, gid, authority_keys.signature_key, record)
    if authority is not None:
        key = authority._record(key)
    return key


def sign_attribute(
    params: PairingParams, key: ExtractedSigningKey, attribute_value: str
) -> AttributeSignature:
    if attribute_value != key.attribute.value:
        raise AttestationMismatchError(
            f"value does not match the value attested for {key.attribute.label}"
        )
    digest = attribute_digest(key.attribute.ref, attribute_value)
    sig = pairing.bls_sign(params, key.signing_key, digest)
    return AttributeSignature(key.attribute.ref, sig, digest)


def verify_attribute(params: PairingParams, sig: AttributeSignature, vk: G2Point | bytes) -> bool:
    return pairing.bls_verify(params, vk, sig.hashed_value_digest, sig.signature)


VkLookup = Mapping[AttributeRef, "G2Point | bytes"] | Callable[[AttributeRef], "G2Point | bytes | None"]


def _lookup(vks: VkLookup, ref: AttributeRef):
    if callable(vks):
        return vks(ref)
    return vks.get(ref)


def verify_threshold(
    params: PairingParams,
    sigs: Sequence[AttributeSignature],
    vks: VkLookup,
    spec: ThresholdSpec,
) -> ThresholdResult:
    """Authenticate iff at least ``spec.t`` of the ``spec.n`` signatures verify.

    All signatures are checked even once the threshold is reached.  A
    signature whose VK is missing or whose encoding is malformed counts
    as invalid.
    """
    if spec.n != len(sigs):
        raise ThresholdSpecError(f"spec.n={spec.n} but {len(sigs)} signatures presented")
    valid = 0
    for sig in sigs:
        vk = _lookup(vks, sig.attribute)
        ok = False
        if vk is not None:
            try:
                ok = verify_attribute(params, sig, vk)
            except MalformedEncodingError:
                ok = False
        valid += int(ok)
    return ThresholdResult(valid >= spec.t, valid, spec)


# --- file formats -------------------------------------------------------------


def dump_profile_bundle(
    sigs: Iterable[AttributeSignature], gid: str | None = None, curve_id: str = pairing.CURVE_ID
) -> str:
    doc = {
        "version": PROFILE_BUNDLE_VERSION,
        "curve_id": curve_id,
        "gid": gid,
        "signatures": [s.to_dict() for s in sigs],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def load_profile_bundle(text: str) -> tuple[str | None, list[AttributeSignature]]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedEncodingError(f"profile bundle is not JSON: {exc}") from exc
    if doc.get("version") != PROFILE_BUNDLE_VERSION:
        raise MalformedEncodingError(f"unsupported profile bundle version {doc.get('version')!r}")
    if doc.get("curve_id") != pairing.CURVE_ID:
        raise MalformedEncodingError(f"unsupported curve {doc.get('curve_id')!r}")
    return doc.get("gid"), [AttributeSignature.from_dict(s) for s in doc["signatures"]]


def strip_gid(text: str) -> str:
    """Return the bundle with its gid removed, ready to share with verifiers."""
    gid, sigs = load_profile_bundle(text)
    return dump_profile_bundle(sigs, gid=None)


def dump_vk_registry(rows: Mapping[AttributeRef, G2Point | bytes]) -> str:
    out = []
    for ref in sorted(rows):
        vk = rows[ref]
        vk_bytes = vk if isinstance(vk, (bytes, bytearray)) else pairing.encode_vk(vk)
        out.append({"authority_id": ref.authority_id, "name": ref.name, "vk": bytes(vk_bytes).hex()})
    return json.dumps(
        {"version": VK_REGISTRY_VERSION, "curve_id": pairing.CURVE_ID, "rows": out}, indent=2
    )


def load_vk_registry(text: str) -> dict[AttributeRef, G2Point]:
    doc = json.loads(text)
    if doc.get("version") != VK_REGISTRY_VERSION or doc.get("curve_id") != pairing.CURVE_ID:
        raise MalformedEncodingError("unsupported verification-key registry")
    return {
        AttributeRef(r["authority_id"], r["name"]): pairing.decode_vk(bytes.fromhex(r["vk"]))
        for r in doc["rows"]
    }
