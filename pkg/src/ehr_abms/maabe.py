"""Multi-authority ciphertext-policy ABE for EHR payloads.

Construction: the access policy is compiled to an LSSS program; a fresh
secret s in Z_r is shared across the program's rows; each share is wrapped
for the row's attribute with hashed ElGamal in G1 (HKDF-SHA256 +
AES-256-GCM); the payload is encrypted under a key derived from s with
AES-256-GCM in fixed-size chunks (STREAM nonces), authenticated together
with a digest of the whole header.

Limitation: a user key is the attribute's decapsulation secret tagged with
the holder's GID.  Collusion between users is prevented only by the API
refusing key sets with mixed GIDs, not cryptographically.
"""

from __future__ import annotations

import hashlib
import struct
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF
from py_arkworks_bls12381 import G1Point, Scalar

from . import pairing
from .abms import AttributeRef
from .errors import (
    CiphertextIntegrityError,
    DuplicateRegistrationError,
    ForeignAttributeError,
    MalformedCiphertextError,
    MalformedEncodingError,
    MissingPublicKeyError,
    MixedGidError,
    PolicyNotSatisfiedError,
    PolicySyntaxError,
    UnknownGidError,
)
from .lsss import R, LsssProgram, policy_to_lsss
from .pairing import PairingParams
from .policy import AccessPolicy, policy_parse
from .util import Entropy, draw, os_entropy

MAGIC = b"EHRC"
CONTAINER_VERSION = 1
CHUNK_SIZE = 64 * 1024
NONCE_PREFIX_BYTES = 7
_ZERO_NONCE = bytes(12)


def abe_initial_setup(security_level: int = 128) -> PairingParams:
    return pairing.setup(security_level)


def encode_pk(point: G1Point) -> bytes:
    return bytes([pairing.ENCODING_VERSION]) + bytes(point.to_compressed_bytes())


def decode_pk(data: bytes) -> G1Point:
    if len(data) != 49 or data[0] != pairing.ENCODING_VERSION:
        raise MalformedEncodingError("ABE public key: bad length or version")
    point = pairing.decode_g1(data[1:])
    if point == G1Point.identity():
        raise MalformedEncodingError("ABE public key is the identity")
    return point


@dataclass(frozen=True)
class AbeAuthorityKeys:
    attribute: AttributeRef
    public_key: G1Point = field(compare=False)
    master_secret: int = field(repr=False)

    @property
    def pk_bytes(self) -> bytes:
        return encode_pk(self.public_key)


@dataclass(frozen=True)
class AbeUserKey:
    attribute: AttributeRef
    gid: str
    key_material: int = field(repr=False)

    @property
    def label(self) -> str:
        return self.attribute.label

    def to_dict(self) -> dict:
        return {
            "authority_id": self.attribute.authority_id,
            "name": self.attribute.name,
            "gid": self.gid,
            "key": pairing.encode_scalar(self.key_material).hex(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AbeUserKey":
        return cls(
            AttributeRef(d["authority_id"], d["name"]),
            d["gid"],
            pairing.decode_scalar(bytes.fromhex(d["key"])),
        )


def abe_authority_setup(
    params: PairingParams, attribute: AttributeRef, entropy: Entropy = os_entropy
) -> AbeAuthorityKeys:
    msk = pairing.random_scalar(entropy)
    return AbeAuthorityKeys(attribute, params.g1_generator * Scalar(msk), msk)


def abe_keygen(
    params: PairingParams, attribute: AttributeRef, gid: str, master: AbeAuthorityKeys
) -> AbeUserKey:
    if not gid:
        raise UnknownGidError("gid must be non-empty")
    if master.attribute != attribute:
        raise ForeignAttributeError(f"master key for {master.attribute.label} cannot issue {attribute.label}")
    return AbeUserKey(attribute, gid, master.master_secret)


class AbeAuthority:
    """Stateful ABE authority: duplicate checks, GID checks, PK publication."""

    def __init__(
        self,
        authority_id: str,
        params: PairingParams,
        *,
        is_registered: Callable[[str], bool] | None = None,
        publish: Callable[[AttributeRef, bytes], None] | None = None,
    ):
        self.authority_id = authority_id
        self.params = params
        self._is_registered = is_registered
        self._enrolled: set[str] = set()
        self._publish = publish
        self._keys: dict[str, AbeAuthorityKeys] = {}
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
    def attributes(self) -> dict[str, AbeAuthorityKeys]:
        return dict(self._keys)

    def setup_attribute(self, name: str, entropy: Entropy = os_entropy) -> AbeAuthorityKeys:
        ref = AttributeRef(self.authority_id, name)
        with self._lock:
            if name in self._keys:
                raise DuplicateRegistrationError(f"{ref.label} already registered for encryption")
            keys = abe_authority_setup(self.params, ref, entropy)
            self._keys[name] = keys
        if self._publish is not None:
            self._publish(ref, keys.pk_bytes)
        return keys

    def keygen(self, name: str, gid: str) -> AbeUserKey:
        if not self.gid_known(gid):
            raise UnknownGidError(f"gid {gid!r} is not registered")
        if name not in self._keys:
            raise ForeignAttributeError(f"{self.authority_id} does not issue {name!r}")
        return abe_keygen(self.params, AttributeRef(self.authority_id, name), gid, self._keys[name])

    def public_keys(self) -> dict[str, bytes]:
        return {k.attribute.label: k.pk_bytes for k in self._keys.values()}

    def to_dict(self) -> dict:
        return {
            "authority_id": self.authority_id,
            "enrolled": sorted(self._enrolled),
            "attributes": {
                name: pairing.encode_scalar(k.master_secret).hex() for name, k in self._keys.items()
            },
        }

    @classmethod
    def from_dict(cls, d: dict, params: PairingParams, **kwargs) -> "AbeAuthority":
        auth = cls(d["authority_id"], params, **kwargs)
        auth._enrolled = set(d.get("enrolled", []))
        for name, hexkey in d["attributes"].items():
            msk = pairing.decode_scalar(bytes.fromhex(hexkey))
            auth._keys[name] = AbeAuthorityKeys(
                AttributeRef(auth.authority_id, name), params.g1_generator * Scalar(msk), msk
            )
        return auth


# --- container ----------------------------------------------------------------


@dataclass(frozen=True)
class EhrCiphertext:
    policy: AccessPolicy
    encapsulations: tuple[bytes, ...]
    payload: tuple[bytes, ...]
    payload_nonce: bytes
    chunk_size: int = CHUNK_SIZE
    version: int = CONTAINER_VERSION
    curve_id: str = pairing.CURVE_ID

    def header_bytes(self) -> bytes:
        return _encode_header(
            self.policy.to_text(), self.encapsulations, self.payload_nonce, self.chunk_size,
            len(self.payload), self.version, self.curve_id,
        )

    def to_bytes(self) -> bytes:
        body = b"".join(struct.pack(">I", len(c)) + c for c in self.payload)
        return self.header_bytes() + body

    @classmethod
    def from_bytes(cls, data: bytes) -> "EhrCiphertext":
        return _decode_container(bytes(data))


def _encode_header(
    policy_text: str,
    encapsulations: Sequence[bytes],
    nonce: bytes,
    chunk_size: int,
    chunk_count: int,
    version: int = CONTAINER_VERSION,
    curve_id: str = pairing.CURVE_ID,
) -> bytes:
    cid = curve_id.encode("ascii")
    ptext = policy_text.encode("utf-8")
    out = [MAGIC, bytes([version, len(cid)]), cid, struct.pack(">I", len(ptext)), ptext,
           struct.pack(">H", len(encapsulations))]
    for blob in encapsulations:
        out.append(struct.pack(">H", len(blob)) + blob)
    out.append(bytes([len(nonce)]) + nonce)
    out.append(struct.pack(">II", chunk_size, chunk_count))
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise MalformedCiphertextError("ciphertext container truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _decode_container(data: bytes) -> EhrCiphertext:
    rd = _Reader(data)
    if rd.take(4) != MAGIC:
        raise MalformedCiphertextError("not an EHR ciphertext container")
    version, cid_len = rd.unpack(">BB")
    if version != CONTAINER_VERSION:
        raise MalformedCiphertextError(f"unsupported container version {version}")
    curve_id = rd.take(cid_len).decode("ascii", errors="replace")
    if curve_id != pairing.CURVE_ID:
        raise MalformedCiphertextError(f"unsupported curve {curve_id!r}")
    (plen,) = rd.unpack(">I")
    try:
        policy = policy_parse(rd.take(plen).decode("utf-8"))
    except (UnicodeDecodeError, PolicySyntaxError, ValueError) as exc:
        raise MalformedCiphertextError(f"embedded policy invalid: {exc}") from exc
    (rows,) = rd.unpack(">H")
    encs = []
    for _ in range(rows):
        (blen,) = rd.unpack(">H")
        encs.append(rd.take(blen))
    (nlen,) = rd.unpack(">B")
    nonce = rd.take(nlen)
    chunk_size, chunk_count = rd.unpack(">II")
    if nlen != NONCE_PREFIX_BYTES or chunk_size == 0 or chunk_count == 0:
        raise MalformedCiphertextError("bad payload parameters")
    chunks = []
    for _ in range(chunk_count):
        (clen,) = rd.unpack(">I")
        chunks.append(rd.take(clen))
    if rd.pos != len(data):
        raise MalformedCiphertextError("trailing bytes after payload")
    ct = EhrCiphertext(policy, tuple(encs), tuple(chunks), nonce, chunk_size, version, curve_id)
    if ct.policy.to_text() != data[10 + cid_len : 10 + cid_len + plen].decode("utf-8"):
        raise MalformedCiphertextError("embedded policy is not in canonical form")
    if len(encs) != policy_to_lsss(policy).rows:
        raise MalformedCiphertextError("encapsulation count does not match the policy")
    return ct


# --- crypto helpers -----------------------------------------------------------


def _hkdf(ikm: bytes, salt: bytes, info: bytes) -> bytes:
    return HKDF(algorithm=hashes.SHA256(), length=32, salt=salt, info=info).derive(ikm)


def _row_ad(policy_text: str, row: int, label: str, nonce: bytes) -> bytes:
    h = hashlib.sha256(b"ehr-abe/row/v1")
    for part in (policy_text.encode(), label.encode(), nonce):
        h.update(struct.pack(">I", len(part)) + part)
    h.update(struct.pack(">I", row))
    return h.digest()


def _wrap_share(pk: G1Point, share: int, ad: bytes, entropy: Entropy) -> bytes:
    r = pairing.random_scalar(entropy)
    c = pairing.G1Point() * Scalar(r)
    c_bytes = bytes(c.to_compressed_bytes())
    shared = bytes((pk * Scalar(r)).to_compressed_bytes())
    kek = _hkdf(shared, c_bytes, b"ehr-abe/row-wrap/v1")
    return c_bytes + AESGCM(kek).encrypt(_ZERO_NONCE, share.to_bytes(32, "big"), ad)


def _unwrap_share(secret: int, blob: bytes, ad: bytes) -> int | None:
    if len(blob) != 48 + 32 + 16:
        return None
    try:
        c = pairing.decode_g1(blob[:48])
    except MalformedEncodingError:
        return None
    shared = bytes((c * Scalar(secret)).to_compressed_bytes())
    kek = _hkdf(shared, blob[:48], b"ehr-abe/row-wrap/v1")
    try:
        raw = AESGCM(kek).decrypt(_ZERO_NONCE, blob[48:], ad)
    except InvalidTag:
        return None
    value = int.from_bytes(raw, "big")
    return value if value < R else None


def _data_key(secret: int) -> bytes:
    return _hkdf(secret.to_bytes(32, "big"), b"", b"ehr-abe/data-key/v1")


def _chunk_nonce(prefix: bytes, index: int, last: bool) -> bytes:
    return prefix + struct.pack(">I", index) + (b"\x01" if last else b"\x00")


PkLookup = Mapping[str, "G1Point | bytes"] | Callable[[str], "G1Point | bytes | None"]


def _resolve_pk(pks: PkLookup, label: str) -> G1Point:
    pk = pks(label) if callable(pks) else pks.get(label)
    if pk is None:
        raise MissingPublicKeyError(f"no public key published for {label}")
    return decode_pk(bytes(pk)) if isinstance(pk, (bytes, bytearray)) else pk


def abe_encrypt(
    params: PairingParams,
    plaintext: bytes,
    policy: AccessPolicy | str,
    pks: PkLookup,
    entropy: Entropy = os_entropy,
    *,
    chunk_size: int = CHUNK_SIZE,
) -> EhrCiphertext:
    # Normalise through the canonical text so the rows compiled here match
    # the rows a reader compiles from the serialized container.
    policy = policy_parse(policy if isinstance(policy, str) else policy.to_text())
    if not plaintext:
        raise ValueError("plaintext must be non-empty")
    program = policy_to_lsss(policy)
    resolved = {label: _resolve_pk(pks, label) for label in set(program.row_labels)}
    text = policy.to_text()
    nonce = draw(entropy, NONCE_PREFIX_BYTES)

    secret = pairing.random_scalar(entropy)
    shares = program.share(secret, entropy)
    encs = tuple(
        _wrap_share(resolved[label], share, _row_ad(text, i, label, nonce), entropy)
        for i, (label, share) in enumerate(zip(program.row_labels, shares))
    )

    view = memoryview(plaintext)
    count = -(-len(view) // chunk_size)
    ad = hashlib.sha256(_encode_header(text, encs, nonce, chunk_size, count)).digest()
    aead = AESGCM(_data_key(secret))
    chunks = tuple(
        aead.encrypt(
            _chunk_nonce(nonce, i, i == count - 1),
            bytes(view[i * chunk_size : (i + 1) * chunk_size]),
            ad,
        )
        for i in range(count)
    )
    return EhrCiphertext(policy, encs, chunks, nonce, chunk_size)


def _check_gids(keys: Sequence[AbeUserKey]) -> None:
    gids = {k.gid for k in keys}
    if len(gids) > 1:
        raise MixedGidError("attribute keys from different GIDs cannot be combined")


def abe_decrypt(
    params: PairingParams, ct: EhrCiphertext | bytes, keys: Iterable[AbeUserKey]
) -> bytes:
    """Return the plaintext, or raise.

    Raises MixedGidError for keys of several GIDs, MalformedCiphertextError
    for unparsable containers, PolicyNotSatisfiedError whenever the keys do
    not open enough rows (whatever the reason), and CiphertextIntegrityError
    when the payload fails authentication after a successful reconstruction.
    """
    keys = list(keys)
    _check_gids(keys)
    if isinstance(ct, (bytes, bytearray)):
        ct = EhrCiphertext.from_bytes(bytes(ct))
    program: LsssProgram = policy_to_lsss(ct.policy)
    if len(ct.encapsulations) != program.rows:
        raise MalformedCiphertextError("encapsulation count does not match the policy")
    text = ct.policy.to_text()
    by_label: dict[str, list[AbeUserKey]] = {}
    for k in keys:
        by_label.setdefault(k.label, []).append(k)

    shares: dict[int, int] = {}
    for i, label in enumerate(program.row_labels):
        ad = _row_ad(text, i, label, ct.payload_nonce)
        for k in by_label.get(label, ()):
            share = _unwrap_share(k.key_material, ct.encapsulations[i], ad)
            if share is not None:
                shares[i] = share
                break
    secret = program.reconstruct(shares) if shares else None
    if secret is None:
        raise PolicyNotSatisfiedError()

    ad = hashlib.sha256(ct.header_bytes()).digest()
    aead = AESGCM(_data_key(secret))
    out = []
    count = len(ct.payload)
    try:
        for i, chunk in enumerate(ct.payload):
            out.append(aead.decrypt(_chunk_nonce(ct.payload_nonce, i, i == count - 1), chunk, ad))
    except InvalidTag:
        raise CiphertextIntegrityError("EHR payload failed authentication") from None
    return b"".join(out)
