import inspect
import itertools
import json
import threading

import pytest
from hypothesis import given, settings, strategies as st

from ehr_abms import abms, pairing
from ehr_abms.abms import (
    AttributeAuthority,
    AttributeDescriptor,
    AttributeRef,
    AttributeSignature,
    ThresholdSpec,
    attribute_digest,
    dump_profile_bundle,
    dump_vk_registry,
    load_profile_bundle,
    load_vk_registry,
    sign_attribute,
    strip_gid,
    verify_attribute,
    verify_threshold,
)
from ehr_abms.errors import (
    AttestationMismatchError,
    DuplicateRegistrationError,
    ForeignAttributeError,
    MalformedEncodingError,
    ThresholdSpecError,
    UnknownGidError,
    UnsupportedSecurityLevel,
)
from ehr_abms.util import seeded_entropy

ANNIE = "gid-annie"
ANNIE_ATTRS = [
    AttributeDescriptor("hospital", "patient_id", "0003231"),
    AttributeDescriptor("dmv", "driver_license", "9907184"),
    AttributeDescriptor("insurer", "insurance_id", "1EG4-TE5-MK72"),
]


@pytest.fixture(scope="module")
def world():
    """Three authorities, Annie enrolled at each, her three signatures."""
    params = pairing.setup(128)
    ent = seeded_entropy(99)
    published = {}
    auths = {}
    for attr in ANNIE_ATTRS:
        a = AttributeAuthority(attr.authority_id, params,
                               publish=lambda ref, vk: published.__setitem__(ref, vk))
        a.enroll(ANNIE)
        a.authority_setup(attr.ref, ent)
        auths[attr.authority_id] = a
    keys = [auths[a.authority_id].extract(ANNIE, a) for a in ANNIE_ATTRS]
    sigs = [sign_attribute(params, k, k.attribute.value) for k in keys]
    return params, auths, published, keys, sigs


def _corrupt(sig: AttributeSignature) -> AttributeSignature:
    # a valid curve point that is not the signature on this digest
    other = pairing.bls_sign(pairing.setup(128), 12345, b"unrelated")
    return AttributeSignature(sig.attribute, other, sig.hashed_value_digest)


def test_initial_setup_delegates():
    assert abms.abms_initial_setup(128) == pairing.setup(128)
    with pytest.raises(UnsupportedSecurityLevel):
        abms.abms_initial_setup(256)


def test_descriptor_requires_value():
    with pytest.raises(ValueError):
        AttributeDescriptor("hospital", "patient_id", "")


def test_three_authorities_publish_independent_keys(world):
    params, auths, published, keys, sigs = world
    assert set(published) == {a.ref for a in ANNIE_ATTRS}
    assert len({bytes(v) for v in published.values()}) == 3


def test_duplicate_attribute_registration(world):
    params, auths, *_ = world
    with pytest.raises(DuplicateRegistrationError):
        auths["hospital"].authority_setup(AttributeRef("hospital", "patient_id"), seeded_entropy(1))


def test_foreign_attribute_setup_rejected(world):
    params, auths, *_ = world
    with pytest.raises(ForeignAttributeError):
        auths["hospital"].authority_setup(AttributeRef("dmv", "other"))


def test_concurrent_duplicate_setup_serializes(params):
    a = AttributeAuthority("hospital", params)
    errors, ok = [], []
    barrier = threading.Barrier(8)

    def go():
        barrier.wait()
        try:
            ok.append(a.authority_setup(AttributeRef("hospital", "x")))
        except DuplicateRegistrationError as e:
            errors.append(e)

    ts = [threading.Thread(target=go) for _ in range(8)]
    [t.start() for t in ts]
    [t.join() for t in ts]
    assert len(ok) == 1 and len(errors) == 7


def test_extract_errors(world):
    params, auths, *_ = world
    with pytest.raises(UnknownGidError):
        auths["hospital"].extract("gid-nobody", ANNIE_ATTRS[0])
    with pytest.raises(ForeignAttributeError):
        auths["hospital"].extract(ANNIE, ANNIE_ATTRS[1])
    with pytest.raises(ForeignAttributeError):
        abms.extract(params, ANNIE, ANNIE_ATTRS[1], auths["hospital"].keys_for("patient_id"))


def test_extract_is_idempotent_and_recorded(world):
    params, auths, published, keys, sigs = world
    again = auths["hospital"].extract(ANNIE, ANNIE_ATTRS[0])
    assert again == keys[0]
    assert len([r for r in auths["hospital"].issuance_log if r.gid == ANNIE]) == 1
    with pytest.raises(AttestationMismatchError):
        auths["hospital"].extract(ANNIE, AttributeDescriptor("hospital", "patient_id", "0003232"))


def test_signatures_self_verify_and_are_deterministic(world):
    params, auths, published, keys, sigs = world
    for k, s in zip(keys, sigs):
        assert verify_attribute(params, s, published[k.attribute.ref])
        assert sign_attribute(params, k, k.attribute.value) == s
        assert s.hashed_value_digest == attribute_digest(k.attribute.ref, k.attribute.value)


def test_sign_rejects_unattested_value(world):
    params, auths, published, keys, sigs = world
    with pytest.raises(AttestationMismatchError):
        sign_attribute(params, keys[0], "0003232")


def test_cross_authority_verification_rejects(world):
    params, auths, published, keys, sigs = world
    for s, k in itertools.product(sigs, keys):
        if s.attribute != k.attribute.ref:
            assert not verify_attribute(params, s, published[k.attribute.ref])


def test_corrupted_signature_rejects(world):
    params, auths, published, keys, sigs = world
    raw = sigs[0].signature.to_bytes()
    for i in range(1, len(raw)):
        b = bytearray(raw)
        b[i] ^= 0x80 >> (i % 8)
        try:
            bad = AttributeSignature(sigs[0].attribute, pairing.GroupSignature.from_bytes(bytes(b)),
                                     sigs[0].hashed_value_digest)
        except MalformedEncodingError:
            continue
        assert not verify_attribute(params, bad, published[sigs[0].attribute])


def test_lab_and_research_thresholds(world):
    params, auths, published, keys, sigs = world
    lab = verify_threshold(params, sigs, published, ThresholdSpec(3, 3))
    research = verify_threshold(params, sigs, published, ThresholdSpec(1, 3))
    assert lab.authenticated and lab.valid_count == 3
    assert research.authenticated and research.valid_count == 3
    broken = [sigs[0], sigs[1], _corrupt(sigs[2])]
    lab = verify_threshold(params, broken, published, ThresholdSpec(3, 3))
    assert not lab.authenticated and lab.valid_count == 2
    assert verify_threshold(params, broken, published, ThresholdSpec(1, 3)).authenticated


def test_threshold_exactness_all_corruption_patterns(world):
    params, auths, published, keys, sigs = world
    for pattern in itertools.product([False, True], repeat=3):
        bundle = [_corrupt(s) if bad else s for s, bad in zip(sigs, pattern)]
        v = 3 - sum(pattern)
        for t in (1, 2, 3):
            res = verify_threshold(params, bundle, published, ThresholdSpec(t, 3))
            assert res.valid_count == v
            assert res.authenticated == (t <= v)


def test_threshold_monotone(world):
    params, auths, published, keys, sigs = world
    bundle = [sigs[0], _corrupt(sigs[1]), sigs[2]]
    results = [verify_threshold(params, bundle, published, ThresholdSpec(t, 3)).authenticated for t in (1, 2, 3)]
    # once it fails at some t it fails for every larger t
    assert results == sorted(results, reverse=True)


def test_threshold_spec_validation(world):
    params, auths, published, keys, sigs = world
    for t, n in [(0, 3), (4, 3), (-1, 1)]:
        with pytest.raises(ThresholdSpecError):
            ThresholdSpec(t, n)
    with pytest.raises(ThresholdSpecError):
        verify_threshold(params, sigs, published, ThresholdSpec(1, 2))


def test_threshold_counts_missing_vk_as_invalid(world):
    params, auths, published, keys, sigs = world
    partial = {k: v for k, v in published.items() if k.authority_id != "dmv"}
    res = verify_threshold(params, sigs, partial, ThresholdSpec(3, 3))
    assert res.valid_count == 2 and not res.authenticated
    res = verify_threshold(params, sigs, partial.get, ThresholdSpec(2, 3))
    assert res.authenticated


def test_threshold_checks_every_signature(world, monkeypatch):
    params, auths, published, keys, sigs = world
    calls = []
    real = abms.verify_attribute
    monkeypatch.setattr(abms, "verify_attribute", lambda *a: calls.append(1) or real(*a))
    verify_threshold(params, sigs, published, ThresholdSpec(1, 3))
    assert len(calls) == 3


def test_verification_api_takes_no_gid():
    for fn in (verify_attribute, verify_threshold):
        names = [p.lower() for p in inspect.signature(fn).parameters]
        assert not any("gid" in n or "identity" in n for n in names), fn.__name__
    for f in AttributeSignature.__dataclass_fields__:
        assert "gid" not in f and f != "value"


def test_profile_bundle_round_trip_and_strip(world):
    params, auths, published, keys, sigs = world
    text = dump_profile_bundle(sigs, gid=ANNIE)
    gid, back = load_profile_bundle(text)
    assert gid == ANNIE and back == sigs
    stripped = strip_gid(text)
    assert ANNIE not in stripped and load_profile_bundle(stripped)[0] is None
    # the bundle never carries the attribute values themselves
    for a in ANNIE_ATTRS:
        assert a.value not in text


def test_profile_bundle_rejects_bad_input():
    with pytest.raises(MalformedEncodingError):
        load_profile_bundle("{")
    with pytest.raises(MalformedEncodingError):
        load_profile_bundle(json.dumps({"version": 9, "curve_id": pairing.CURVE_ID, "signatures": []}))


def test_vk_registry_round_trip(world):
    params, auths, published, keys, sigs = world
    reg = load_vk_registry(dump_vk_registry(published))
    assert {k: pairing.encode_vk(v) for k, v in reg.items()} == {k: bytes(v) for k, v in published.items()}


def test_authority_persistence(world):
    params, auths, published, keys, sigs = world
    a = auths["hospital"]
    b = AttributeAuthority.from_dict(json.loads(json.dumps(a.to_dict())), params)
    assert b.keys_for("patient_id").vk_bytes == a.keys_for("patient_id").vk_bytes
    assert b.extract(ANNIE, ANNIE_ATTRS[0]) == keys[0]


@settings(max_examples=10, deadline=None)
@given(st.text(min_size=1, max_size=40), st.integers(min_value=0, max_value=2**32))
def test_round_trip_property(value, seed):
    params = pairing.setup(128)
    ref = AttributeRef("auth", "attr")
    ak = abms.authority_setup(params, ref, seeded_entropy(seed))
    key = abms.extract(params, "gid-x", AttributeDescriptor("auth", "attr", value), ak)
    assert verify_attribute(params, sign_attribute(params, key, value), ak.verification_key)
