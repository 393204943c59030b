"""
Encrypting a record under an attribute policy
=============================================

Authorities publish one public key per attribute. The encryptor writes a
policy over those attributes; only a reader whose keys satisfy it recovers
the data. Policies can mix AND, OR and k-of-n gates.
"""

from ehr_abms import lsss, pairing
from ehr_abms.errors import PolicyNotSatisfiedError
from ehr_abms.maabe import AbeAuthority, abe_decrypt, abe_encrypt
from ehr_abms.policy import policy_parse
from ehr_abms.workspace import sample_ehr

params = pairing.setup(128)

# Two independent authorities, a public key directory filled as they publish.
directory = {}
publish = lambda ref, pk: directory.__setitem__(ref.label, pk)  # noqa: E731
hospital = AbeAuthority("hospital", params, publish=publish)
university = AbeAuthority("university", params, publish=publish)
for name in ("lab_scientist", "research_scientist", "doctor"):
    hospital.setup_attribute(name)
university.setup_attribute("ethics_board")
print(sorted(directory))

# The policy compiles to a share-generating matrix, one row per attribute.
policy = policy_parse("lab_scientist@hospital OR (research_scientist@hospital AND ethics_board@university)")
program = lsss.policy_to_lsss(policy)
print(policy.to_text())
for label, row in zip(program.row_labels, program.matrix):
    print(f"  {label:<32} {row}")

record = sample_ehr(256 * 1024)
ct = abe_encrypt(params, record, policy, directory)
blob = ct.to_bytes()
print(f"{len(record)} plaintext bytes -> {len(blob)} ciphertext bytes")

# Keys are bound to one gid; readers cannot pool keys across identities.
for authority in (hospital, university):
    authority.enroll("gid-res")
    authority.enroll("gid-lab")
readers = {
    "lab scientist": [hospital.keygen("lab_scientist", "gid-lab")],
    "researcher alone": [hospital.keygen("research_scientist", "gid-res")],
    "researcher with approval": [hospital.keygen("research_scientist", "gid-res"),
                                 university.keygen("ethics_board", "gid-res")],
}
for who, keys in readers.items():
    try:
        ok = abe_decrypt(params, blob, keys) == record
        print(f"{who:<26} decrypts: {ok}")
    except PolicyNotSatisfiedError as exc:
        print(f"{who:<26} denied: {exc}")

# Any change to the container is caught by the authenticated encryption.
tampered = bytearray(blob)
tampered[-100] ^= 0x01
try:
    abe_decrypt(params, bytes(tampered), readers["lab scientist"])
except Exception as exc:
    print("tampered container:", type(exc).__name__)
