"""
Threshold authentication with attribute signatures
==================================================

Three authorities each attest one attribute of the same patient. The patient
signs every attribute, and a provider accepts the bundle when at least t of
the n signatures verify.
"""

import dataclasses

from ehr_abms import abms, pairing
from ehr_abms.abms import AttributeAuthority, AttributeDescriptor, AttributeRef, ThresholdSpec

params = abms.abms_initial_setup(128)
gid = "gid-annie-foster"

# Each authority keeps its own secret; the verification keys are public.
attributes = [("hospital", "patient_id", "0003231"),
              ("dmv", "driver_license", "9907184"),
              ("insurer", "insurance_id", "1EG4-TE5-MK72")]
vks = {}
signatures = []
for aid, name, value in attributes:
    authority = AttributeAuthority(aid, params)
    authority.enroll(gid)
    keys = authority.authority_setup(AttributeRef(aid, name))
    vks[keys.attribute] = keys.verification_key
    key = authority.extract(gid, AttributeDescriptor(aid, name, value))
    signatures.append(abms.sign_attribute(params, key, value))
    print(f"signed {key.attribute.label}")

# A lab scientist wants all three; a research scientist is content with one.
for who, spec in (("lab scientist", ThresholdSpec(3, 3)), ("research scientist", ThresholdSpec(1, 3))):
    res = abms.verify_threshold(params, signatures, vks, spec)
    print(f"{who:<20} t={spec.t} valid={res.valid_count} -> {'accept' if res else 'reject'}")

# Corrupt one stored signature and ask again.
bad = pairing.bls_sign(params, 12345, b"unrelated")
corrupted = [dataclasses.replace(signatures[0], signature=bad)] + signatures[1:]
print("after corrupting one signature:")
for who, spec in (("lab scientist", ThresholdSpec(3, 3)), ("research scientist", ThresholdSpec(1, 3))):
    res = abms.verify_threshold(params, corrupted, vks, spec)
    print(f"{who:<20} t={spec.t} valid={res.valid_count} -> {'accept' if res else 'reject'}")

# The bundle a provider sees carries no gid.
print(abms.dump_profile_bundle(signatures, gid=None)[:160], "...")
