import os

import pytest

from ehr_abms import maabe, pairing
from ehr_abms.abms import AttributeRef
from ehr_abms.errors import (
    CiphertextIntegrityError,
    DecryptionError,
    DuplicateRegistrationError,
    ForeignAttributeError,
    MalformedCiphertextError,
    MissingPublicKeyError,
    MixedGidError,
    PolicyNotSatisfiedError,
    UnknownGidError,
    UnsupportedSecurityLevel,
)
from ehr_abms.maabe import AbeAuthority, AbeUserKey, EhrCiphertext, abe_decrypt, abe_encrypt
from ehr_abms.policy import policy_parse, policy_satisfied
from ehr_abms.util import seeded_entropy

from policy_family import UNIVERSE, family, subsets


class AbeWorld:
    def __init__(self, labels, seed=5):
        self.params = pairing.setup(128)
        self.entropy = seeded_entropy(seed)
        self.pks: dict[str, bytes] = {}
        self.auths: dict[str, AbeAuthority] = {}
        for label in labels:
            name, _, aid = label.partition("@")
            auth = self.auths.setdefault(
                aid, AbeAuthority(aid, self.params, publish=lambda ref, pk: self.pks.__setitem__(ref.label, pk))
            )
            auth.setup_attribute(name, self.entropy)
        for auth in self.auths.values():
            auth.enroll("gid-user")
            auth.enroll("gid-other")

    def key(self, label, gid="gid-user") -> AbeUserKey:
        name, _, aid = label.partition("@")
        return self.auths[aid].keygen(name, gid)

    def keys(self, labels, gid="gid-user"):
        return [self.key(lab, gid) for lab in labels]

    def encrypt(self, data, policy):
        return abe_encrypt(self.params, data, policy, self.pks, self.entropy)


HOSPITAL = ["doctor@hospital", "nurse@hospital", "cardiology@hospital", "admin@insurer"]


@pytest.fixture(scope="module")
def world():
    return AbeWorld(HOSPITAL + list(UNIVERSE))


def test_initial_setup_contract():
    assert maabe.abe_initial_setup(128) == pairing.setup(128)
    with pytest.raises(UnsupportedSecurityLevel):
        maabe.abe_initial_setup(192)


def test_duplicate_attribute(world):
    with pytest.raises(DuplicateRegistrationError):
        world.auths["hospital"].setup_attribute("doctor")


def test_keygen_errors(world):
    with pytest.raises(UnknownGidError):
        world.auths["hospital"].keygen("doctor", "gid-stranger")
    with pytest.raises(ForeignAttributeError):
        world.auths["hospital"].keygen("admin", "gid-user")
    master = world.auths["hospital"].attributes["doctor"]
    with pytest.raises(ForeignAttributeError):
        maabe.abe_keygen(world.params, AttributeRef("hospital", "nurse"), "gid-user", master)


def test_hundred_public_keys_distinct():
    params = pairing.setup(128)
    ent = seeded_entropy(11)
    pks = {maabe.abe_authority_setup(params, AttributeRef("a", f"attr{i}"), ent).pk_bytes for i in range(100)}
    assert len(pks) == 100


def test_or_policy_either_key(world):
    ct = world.encrypt(b"annie's ehr", "doctor@hospital OR nurse@hospital")
    assert abe_decrypt(world.params, ct, world.keys(["doctor@hospital"])) == b"annie's ehr"
    assert abe_decrypt(world.params, ct, world.keys(["nurse@hospital"])) == b"annie's ehr"


def test_and_policy(world):
    ct = world.encrypt(b"x-ray", "doctor@hospital AND cardiology@hospital").to_bytes()
    assert abe_decrypt(world.params, ct, world.keys(["doctor@hospital", "cardiology@hospital"])) == b"x-ray"
    with pytest.raises(PolicyNotSatisfiedError):
        abe_decrypt(world.params, ct, world.keys(["doctor@hospital"]))


def test_wrong_attribute_key_never_helps(world):
    ct = world.encrypt(b"data", "nurse@hospital")
    with pytest.raises(PolicyNotSatisfiedError):
        abe_decrypt(world.params, ct, world.keys(["doctor@hospital", "cardiology@hospital", "admin@insurer"]))


def test_missing_public_key(world):
    with pytest.raises(MissingPublicKeyError):
        world.encrypt(b"data", "doctor@hospital OR surgeon@hospital")


def test_fresh_randomness(world):
    a = world.encrypt(b"same", "doctor@hospital").to_bytes()
    b = world.encrypt(b"same", "doctor@hospital").to_bytes()
    assert a != b


def test_empty_plaintext_rejected(world):
    with pytest.raises(ValueError):
        world.encrypt(b"", "doctor@hospital")


@pytest.mark.parametrize("size", [1, 1024, 10 * 1024 * 1024])
def test_round_trip_sizes(world, size):
    data = os.urandom(size)
    ct = world.encrypt(data, "doctor@hospital OR nurse@hospital").to_bytes()
    assert abe_decrypt(world.params, ct, world.keys(["nurse@hospital"])) == data


def test_chunk_boundaries(world):
    for size in (63, 64, 65, 128, 129):
        data = os.urandom(size)
        ct = abe_encrypt(world.params, data, "doctor@hospital", world.pks, world.entropy, chunk_size=64)
        assert len(ct.payload) == -(-size // 64)
        back = EhrCiphertext.from_bytes(ct.to_bytes())
        assert abe_decrypt(world.params, back, world.keys(["doctor@hospital"])) == data


def test_chunk_reorder_and_truncation_detected(world):
    data = os.urandom(300)
    ct = abe_encrypt(world.params, data, "doctor@hospital", world.pks, world.entropy, chunk_size=64)
    keys = world.keys(["doctor@hospital"])
    swapped = EhrCiphertext(ct.policy, ct.encapsulations, (ct.payload[1], ct.payload[0]) + ct.payload[2:],
                            ct.payload_nonce, ct.chunk_size)
    with pytest.raises(CiphertextIntegrityError):
        abe_decrypt(world.params, swapped, keys)
    dropped = EhrCiphertext(ct.policy, ct.encapsulations, ct.payload[:-1], ct.payload_nonce, ct.chunk_size)
    with pytest.raises(CiphertextIntegrityError):
        abe_decrypt(world.params, dropped, keys)


def test_mixed_gid_is_an_error_even_when_covered(world):
    ct = world.encrypt(b"data", "doctor@hospital AND nurse@hospital")
    keys = [world.key("doctor@hospital", "gid-user"), world.key("nurse@hospital", "gid-other")]
    with pytest.raises(MixedGidError):
        abe_decrypt(world.params, ct, keys)
    with pytest.raises(MixedGidError):
        abe_decrypt(world.params, ct, keys + world.keys(["doctor@hospital", "nurse@hospital"]))


def test_two_of_three_truth_table(world):
    pol = "2 of (a@x, b@y, c@z)"
    ct = world.encrypt(b"secret", pol).to_bytes()
    for s in subsets(["a@x", "b@y", "c@z"]):
        try:
            ok = abe_decrypt(world.params, ct, world.keys(s)) == b"secret"
        except PolicyNotSatisfiedError:
            ok = False
        assert ok == policy_satisfied(policy_parse(pol), s)


def test_family_equivalence_distinct_labels(world):
    for pol in family():
        ct = world.encrypt(b"m", pol).to_bytes()
        for s in subsets(pol.labels()):
            try:
                ok = abe_decrypt(world.params, ct, world.keys(s)) == b"m"
            except PolicyNotSatisfiedError:
                ok = False
            assert ok == policy_satisfied(pol, s), (pol.to_text(), sorted(s))


def test_uniform_failure_message(world):
    ct = world.encrypt(b"data", "doctor@hospital AND nurse@hospital")
    msgs = set()
    for keys in ([], world.keys(["doctor@hospital"]), world.keys(["admin@insurer"])):
        with pytest.raises(PolicyNotSatisfiedError) as info:
            abe_decrypt(world.params, ct, keys)
        msgs.add(str(info.value))
    assert len(msgs) == 1


def test_every_byte_flip_fails(world):
    """Flip one bit in every byte of a fixture container; nothing decrypts."""
    ct = world.encrypt(b"EHR fixture payload", "doctor@hospital OR nurse@hospital").to_bytes()
    keys = world.keys(["doctor@hospital", "nurse@hospital"])
    outcomes = set()
    for i in range(len(ct)):
        raw = bytearray(ct)
        raw[i] ^= 0x01
        try:
            abe_decrypt(world.params, bytes(raw), keys)
        except (MalformedCiphertextError, DecryptionError) as exc:
            outcomes.add(type(exc).__name__)
            continue
        pytest.fail(f"mutated byte {i} still decrypted")
    assert "CiphertextIntegrityError" in outcomes


def test_container_rejects_trailing_and_foreign_data(world):
    ct = world.encrypt(b"data", "doctor@hospital").to_bytes()
    for bad in (ct + b"\x00", b"NOPE" + ct[4:], ct[:-1], b""):
        with pytest.raises(MalformedCiphertextError):
            EhrCiphertext.from_bytes(bad)


def test_container_round_trip(world):
    ct = world.encrypt(b"data", "2 of (a@x, b@y, c@z) OR doctor@hospital")
    back = EhrCiphertext.from_bytes(ct.to_bytes())
    assert back.to_bytes() == ct.to_bytes()
    assert back.policy == ct.policy


def test_nested_ast_policy_survives_serialization(world):
    from ehr_abms.policy import AccessPolicy, Gate, leaf

    nested = AccessPolicy(Gate("and", 2, (Gate("and", 2, (leaf("a@x"), leaf("b@y"))), leaf("c@z"))))
    ct = world.encrypt(b"data", nested).to_bytes()
    assert abe_decrypt(world.params, ct, world.keys(["a@x", "b@y", "c@z"])) == b"data"


def test_user_key_and_authority_persistence(world):
    k = world.key("doctor@hospital")
    assert AbeUserKey.from_dict(k.to_dict()) == k
    auth = world.auths["hospital"]
    again = AbeAuthority.from_dict(auth.to_dict(), world.params)
    assert again.public_keys() == auth.public_keys()
