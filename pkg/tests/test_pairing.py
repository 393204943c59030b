import random

import pytest
from py_arkworks_bls12381 import G1Point, G2Point, Scalar
from py_ecc.bls.g2_primitives import G1_to_pubkey, G2_to_signature
from py_ecc.optimized_bls12_381 import G2 as ECC_G2
from py_ecc.optimized_bls12_381 import multiply

from ehr_abms import pairing
from ehr_abms.errors import (
    EmptyMessageError,
    EntropyError,
    InvalidScalarError,
    MalformedEncodingError,
    UnsupportedSecurityLevel,
)
from ehr_abms.pairing import (
    GROUP_ORDER,
    BlsKeyPair,
    GroupSignature,
    PairingParams,
    bls_sign,
    bls_verify,
    decode_scalar,
    decode_vk,
    encode_scalar,
    encode_vk,
    hash_to_group,
    keygen,
)
from ehr_abms.util import os_entropy, seeded_entropy


def test_setup_is_deterministic_and_serializes(params):
    again = pairing.setup(128)
    assert params.to_bytes() == again.to_bytes()
    assert PairingParams.from_bytes(params.to_bytes()) == params
    assert params.g1_generator != G1Point.identity()
    assert params.g2_generator != G2Point.identity()


def test_setup_rejects_other_levels():
    with pytest.raises(UnsupportedSecurityLevel):
        pairing.setup(512)


def test_params_from_bytes_rejects_foreign_curve(params):
    raw = bytearray(params.to_bytes())
    raw[2] ^= 0x01
    with pytest.raises(MalformedEncodingError):
        PairingParams.from_bytes(bytes(raw))


def test_keygen_seeded_is_reproducible(params):
    a = keygen(params, seeded_entropy(42))
    b = keygen(params, seeded_entropy(42))
    assert a == b and a.vk_bytes == b.vk_bytes


def test_keygen_os_keys_differ(params):
    assert keygen(params, os_entropy).signing_scalar != keygen(params, os_entropy).signing_scalar


def test_keygen_invariant(params, entropy):
    kp = keygen(params, entropy)
    assert 1 <= kp.signing_scalar < GROUP_ORDER
    assert kp.verification_point == params.g2_generator * Scalar(kp.signing_scalar)


def test_keygen_entropy_failure(params):
    with pytest.raises(EntropyError):
        keygen(params, lambda n: b"short")

    def broken(n):
        raise OSError("no entropy")

    with pytest.raises(EntropyError):
        keygen(params, broken)


def test_hash_to_group_properties(params):
    a = hash_to_group(params, b"0003231")
    assert a == hash_to_group(params, b"0003231")
    assert bytes(a.to_compressed_bytes()) != bytes(hash_to_group(params, b"0003232").to_compressed_bytes())
    with pytest.raises(EmptyMessageError):
        hash_to_group(params, b"")


def test_sign_verify_and_determinism(params, entropy):
    kp = keygen(params, entropy)
    s1 = bls_sign(params, kp.signing_scalar, b"0003231")
    s2 = bls_sign(params, kp.signing_scalar, b"0003231")
    assert s1 == s2
    assert bls_verify(params, kp.verification_point, b"0003231", s1)
    assert bls_verify(params, kp.vk_bytes, b"0003231", s1.to_bytes())


def test_cross_key_and_cross_message_reject(params, entropy):
    a, b = keygen(params, entropy), keygen(params, entropy)
    sig = bls_sign(params, a.signing_scalar, b"0003231")
    assert not bls_verify(params, b.verification_point, b"0003231", sig)
    assert not bls_verify(params, a.verification_point, b"9907184", sig)


def test_sign_rejects_invalid_scalar(params):
    for bad in (0, GROUP_ORDER, -1):
        with pytest.raises(InvalidScalarError):
            bls_sign(params, bad, b"m")


def test_identity_signature_and_key_reject(params, entropy):
    kp = keygen(params, entropy)
    ident = GroupSignature.from_point(G1Point.identity())
    assert not bls_verify(params, kp.verification_point, b"m", ident)
    with pytest.raises(MalformedEncodingError):
        decode_vk(encode_vk(G2Point.identity()))


def test_every_single_byte_flip_is_rejected_or_malformed(params, entropy):
    kp = keygen(params, entropy)
    sig = bls_sign(params, kp.signing_scalar, b"0003231").to_bytes()
    for i in range(len(sig)):
        raw = bytearray(sig)
        raw[i] ^= 0x01 << (i % 8)
        try:
            ok = bls_verify(params, kp.verification_point, b"0003231", bytes(raw))
        except MalformedEncodingError:
            continue
        assert not ok, f"flip at byte {i} accepted"


def test_encodings_round_trip(params, entropy):
    kp = keygen(params, entropy)
    assert decode_scalar(encode_scalar(kp.signing_scalar)) == kp.signing_scalar
    assert decode_vk(encode_vk(kp.verification_point)) == kp.verification_point
    sig = bls_sign(params, kp.signing_scalar, b"abc")
    assert GroupSignature.from_bytes(sig.to_bytes()) == sig
    assert GroupSignature.from_hex(sig.hex()).to_bytes() == sig.to_bytes()
    assert BlsKeyPair.from_secret(params, kp.signing_scalar) == kp


@pytest.mark.parametrize("raw", [b"", b"\x01", b"\x02" + bytes(48), b"\x01" + b"\xff" * 48])
def test_malformed_signature_encodings(raw):
    with pytest.raises(MalformedEncodingError):
        GroupSignature.from_bytes(raw)


def test_malformed_hex():
    with pytest.raises(MalformedEncodingError):
        GroupSignature.from_hex("zz")


def test_debug_coordinates_lie_on_curve(params, entropy):
    kp = keygen(params, entropy)
    x, y, z = bls_sign(params, kp.signing_scalar, b"abc").debug_coordinates()
    p = pairing.FIELD_MODULUS
    assert z == 1 and (y * y - x**3 - 4) % p == 0


def test_sign_and_keys_match_py_ecc_oracle(params):
    from py_ecc.bls.hash_to_curve import hash_to_G1
    import hashlib

    rng = random.Random(7)
    for _ in range(3):
        sk = rng.randrange(1, GROUP_ORDER)
        msg = rng.randbytes(rng.randrange(1, 64))
        kp = BlsKeyPair.from_secret(params, sk)
        expected_vk = G2_to_signature(multiply(ECC_G2, sk))
        assert bytes(kp.verification_point.to_compressed_bytes()) == expected_vk
        expected_sig = G1_to_pubkey(multiply(hash_to_G1(msg, pairing.HASH_DST, hashlib.sha256), sk))
        assert bls_sign(params, sk, msg).to_bytes()[1:] == expected_sig
