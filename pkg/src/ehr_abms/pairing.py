"""BLS signatures over BLS12-381.

Signatures and message hashes live in G1 (48-byte compressed points),
verification keys live in G2 (96-byte compressed points).  This role
assignment is fixed for every artifact the package writes.

Every canonical encoding starts with a one-byte version tag.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from py_arkworks_bls12381 import G1Point, G2Point, GT, Scalar

from .errors import (
    EmptyMessageError,
    InvalidScalarError,
    MalformedEncodingError,
    UnsupportedSecurityLevel,
)
from .hash_to_curve import P as FIELD_MODULUS
from .hash_to_curve import hash_to_g1
from .util import Entropy, draw, os_entropy

CURVE_ID = "BLS12-381"
GROUP_ORDER = 0x73EDA753299D7D483339D80809A1D80553BDA402FFFE5BFEFFFFFFFF00000001
SUPPORTED_LEVELS = (128,)
ENCODING_VERSION = 1
HASH_DST = b"EHR-ABMS-V01-CS01-with-BLS12381G1_XMD:SHA-256_SSWU_RO_NUL_"

G1_BYTES = 48
G2_BYTES = 96


def _g1_bytes(point: G1Point) -> bytes:
    return bytes(point.to_compressed_bytes())


def _g2_bytes(point: G2Point) -> bytes:
    return bytes(point.to_compressed_bytes())


def _strip_version(data: bytes, expected_len: int, what: str) -> bytes:
    if len(data) != expected_len + 1:
        raise MalformedEncodingError(f"{what}: expected {expected_len + 1} bytes, got {len(data)}")
    if data[0] != ENCODING_VERSION:
        raise MalformedEncodingError(f"{what}: unknown encoding version {data[0]}")
    return data[1:]


def _decode_point(cls, raw: bytes, to_bytes, what: str):
    raw = bytes(raw)
    try:
        point = cls.from_compressed_bytes(raw)
    except Exception as exc:
        raise MalformedEncodingError(f"invalid {what} point: {exc}") from exc
    # arkworks ignores the x bits of an infinity encoding; only the canonical form is accepted
    if to_bytes(point) != raw:
        raise MalformedEncodingError(f"non-canonical {what} encoding")
    return point


def decode_g1(raw: bytes) -> G1Point:
    """Decode a compressed G1 point, enforcing curve and subgroup membership."""
    return _decode_point(G1Point, raw, _g1_bytes, "G1")


def decode_g2(raw: bytes) -> G2Point:
    return _decode_point(G2Point, raw, _g2_bytes, "G2")


@dataclass(frozen=True)
class PairingParams:
    curve_id: str
    g1_generator: G1Point = field(compare=False)
    g2_generator: G2Point = field(compare=False)

    def to_bytes(self) -> bytes:
        cid = self.curve_id.encode("ascii")
        return (
            bytes([ENCODING_VERSION, len(cid)])
            + cid
            + _g1_bytes(self.g1_generator)
            + _g2_bytes(self.g2_generator)
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "PairingParams":
        if len(data) < 2 or data[0] != ENCODING_VERSION:
            raise MalformedEncodingError("params: bad version prefix")
        n = data[1]
        body = data[2 + n :]
        if len(body) != G1_BYTES + G2_BYTES:
            raise MalformedEncodingError("params: bad length")
        curve_id = data[2 : 2 + n].decode("ascii", errors="replace")
        if curve_id != CURVE_ID:
            raise MalformedEncodingError(f"params: unsupported curve {curve_id!r}")
        g1 = decode_g1(body[:G1_BYTES])
        g2 = decode_g2(body[G1_BYTES:])
        if g1 != G1Point() or g2 != G2Point():
            raise MalformedEncodingError("params: generators differ from the published ones")
        return cls(curve_id, g1, g2)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PairingParams) and self.to_bytes() == other.to_bytes()

    def __hash__(self) -> int:
        return hash(self.to_bytes())


def setup(security_level: int = 128) -> PairingParams:
    if security_level not in SUPPORTED_LEVELS:
        raise UnsupportedSecurityLevel(
            f"security level {security_level} unsupported; choose from {SUPPORTED_LEVELS}"
        )
    return PairingParams(CURVE_ID, G1Point(), G2Point())


def _check_scalar(value: int) -> int:
    if not isinstance(value, int) or not 1 <= value < GROUP_ORDER:
        raise InvalidScalarError("signing scalar must lie in [1, r-1]")
    return value


def encode_scalar(value: int) -> bytes:
    return bytes([ENCODING_VERSION]) + _check_scalar(value).to_bytes(32, "big")


def decode_scalar(data: bytes) -> int:
    body = _strip_version(data, 32, "scalar")
    try:
        return _check_scalar(int.from_bytes(body, "big"))
    except InvalidScalarError as exc:
        raise MalformedEncodingError(str(exc)) from exc


def encode_vk(point: G2Point) -> bytes:
    return bytes([ENCODING_VERSION]) + _g2_bytes(point)


def decode_vk(data: bytes) -> G2Point:
    point = decode_g2(_strip_version(data, G2_BYTES, "verification key"))
    if point == G2Point.identity():
        raise MalformedEncodingError("verification key is the identity")
    return point


def random_scalar(entropy: Entropy = os_entropy) -> int:
    # 64 bytes reduced mod r-1 keeps the bias below 2^-128.
    return int.from_bytes(draw(entropy, 64), "big") % (GROUP_ORDER - 1) + 1


@dataclass(frozen=True)
class BlsKeyPair:
    signing_scalar: int = field(repr=False)
    verification_point: G2Point = field(compare=False)

    @property
    def vk_bytes(self) -> bytes:
        return encode_vk(self.verification_point)

    def secret_bytes(self) -> bytes:
        return encode_scalar(self.signing_scalar)

    @classmethod
    def from_secret(cls, params: PairingParams, signing_scalar: int) -> "BlsKeyPair":
        _check_scalar(signing_scalar)
        return cls(signing_scalar, params.g2_generator * Scalar(signing_scalar))


def keygen(params: PairingParams, entropy: Entropy = os_entropy) -> BlsKeyPair:
    return BlsKeyPair.from_secret(params, random_scalar(entropy))


def hash_to_group(params: PairingParams, message: bytes) -> G1Point:
    if not message:
        raise EmptyMessageError("cannot hash an empty message to the curve")
    return hash_to_g1(bytes(message), HASH_DST)


@dataclass(frozen=True)
class GroupSignature:
    point: G1Point = field(compare=False)
    encoding: bytes

    @classmethod
    def from_point(cls, point: G1Point) -> "GroupSignature":
        return cls(point, bytes([ENCODING_VERSION]) + _g1_bytes(point))

    @classmethod
    def from_bytes(cls, data: bytes) -> "GroupSignature":
        data = bytes(data)
        point = decode_g1(_strip_version(data, G1_BYTES, "signature"))
        return cls(point, data)

    @classmethod
    def from_hex(cls, text: str) -> "GroupSignature":
        try:
            return cls.from_bytes(bytes.fromhex(text))
        except ValueError as exc:
            if isinstance(exc, MalformedEncodingError):
                raise
            raise MalformedEncodingError(f"signature hex: {exc}") from exc

    def to_bytes(self) -> bytes:
        return self.encoding

    def hex(self) -> str:
        return self.encoding.hex()

    def debug_coordinates(self) -> tuple[int, int, int]:
        """Uncompressed (X, Y, Z) rendering with Z = 1, for display only."""
        return affine_coordinates(self.point) + (1,)


def affine_coordinates(point: G1Point) -> tuple[int, int]:
    raw = bytearray(_g1_bytes(point))
    if raw[0] & 0x40:
        raise ValueError("point at infinity has no affine coordinates")
    larger = bool(raw[0] & 0x20)
    raw[0] &= 0x1F
    x = int.from_bytes(raw, "big")
    y = pow((x * x * x + 4) % FIELD_MODULUS, (FIELD_MODULUS + 1) // 4, FIELD_MODULUS)
    if (y > FIELD_MODULUS - y) != larger:
        y = FIELD_MODULUS - y
    return x, y


def bls_sign(params: PairingParams, key: int, message: bytes) -> GroupSignature:
    _check_scalar(key)
    return GroupSignature.from_point(hash_to_group(params, message) * Scalar(key))


def bls_verify(
    params: PairingParams,
    vk: G2Point | bytes,
    message: bytes,
    sig: GroupSignature | bytes,
) -> bool:
    """Return True iff e(sig, g2) == e(H(message), vk).

    Undecodable keys or signatures raise MalformedEncodingError; a
    well-formed but wrong signature returns False.
    """
    if isinstance(vk, (bytes, bytearray)):
        vk = decode_vk(bytes(vk))
    if isinstance(sig, (bytes, bytearray)):
        sig = GroupSignature.from_bytes(bytes(sig))
    if not message:
        return False
    if sig.point == G1Point.identity() or vk == G2Point.identity():
        return False
    h = hash_to_group(params, message)
    check = GT.multi_pairing([sig.point, -h], [params.g2_generator, vk])
    return check == GT.one()
