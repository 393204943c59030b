"""
BLS signatures on BLS12-381
===========================

A signature is one point in G1; the verification key lives in G2. Checking
a signature costs two pairings, which is why verification is the slower half.
"""

from ehr_abms import pairing
from ehr_abms.errors import MalformedEncodingError

params = pairing.setup(128)
print(params.curve_id)

# A fresh key pair. The secret is a scalar below the group order.
kp = pairing.keygen(params)
print("vk:", kp.vk_bytes.hex()[:32], "...", len(kp.vk_bytes), "bytes")

# Hash a message onto the curve and multiply by the secret.
msg = b"patient_id=0003231"
sig = pairing.bls_sign(params, kp.signing_scalar, msg)
print("sig:", sig.hex()[:32], "...", len(sig.to_bytes()), "bytes")
print("verifies:", pairing.bls_verify(params, kp.verification_point, msg, sig))

# Signing is deterministic: the same key and message give the same bytes.
print("deterministic:", pairing.bls_sign(params, kp.signing_scalar, msg) == sig)

# A different message or another key makes the pairing equation fail.
print("other message:", pairing.bls_verify(params, kp.verification_point, b"patient_id=0003232", sig))
other = pairing.keygen(params)
print("other key:", pairing.bls_verify(params, other.verification_point, msg, sig))

# Flipping a bit usually leaves the curve altogether; decoding refuses it.
raw = bytearray(sig.to_bytes())
raw[10] ^= 0x01
try:
    print("flipped bit:", pairing.bls_verify(params, kp.verification_point, msg, bytes(raw)))
except MalformedEncodingError as exc:
    print("flipped bit rejected while decoding:", exc)
