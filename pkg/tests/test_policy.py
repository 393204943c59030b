
import pytest
from hypothesis import given, strategies as st

from ehr_abms.errors import PolicySyntaxError
from ehr_abms.policy import AccessPolicy, Gate, Leaf, and_, leaf, or_, policy_parse, policy_satisfied, threshold

from policy_family import family, subsets


def test_single_leaf():
    assert policy_parse("doctor@hospital").root == Leaf("doctor", "hospital")


def test_and_binds_tighter_than_or():
    p = policy_parse("(doctor@hospital AND cardiology@hospital) OR admin@insurer")
    assert p.root == or_(and_(leaf("doctor@hospital"), leaf("cardiology@hospital")), leaf("admin@insurer"))
    q = policy_parse("doctor@hospital AND cardiology@hospital OR admin@insurer")
    assert q == p


def test_threshold_form():
    p = policy_parse("2 of (a@x, b@y, c@z)")
    assert p.root == Gate("threshold", 2, (leaf("a@x"), leaf("b@y"), leaf("c@z")))


def test_same_kind_chains_flatten():
    p = policy_parse("a@x AND b@y AND c@z")
    assert p.root == Gate("and", 3, (leaf("a@x"), leaf("b@y"), leaf("c@z")))


@pytest.mark.parametrize(
    "text, pos",
    [
        ("NOT a@x", 0),
        ("a@x AND NOT b@y", 8),
        ("a@x AND", 7),
        ("(a@x", 4),
        ("a@x b@y", 4),
        ("4 of (a@x, b@y)", 0),
        ("0 of (a@x)", 0),
        ("doctor", 0),
        ("a@x & b@y", 4),
        ("", 0),
        ("a@x and b@y", 4),
    ],
)
def test_syntax_errors_carry_position(text, pos):
    with pytest.raises(PolicySyntaxError) as info:
        policy_parse(text)
    assert info.value.position == pos


def test_satisfaction_examples():
    assert policy_satisfied(policy_parse("a@x"), {"a@x"})
    assert not policy_satisfied(policy_parse("a@x AND b@y"), {"a@x"})
    p = policy_parse("2 of (a@x, b@y, c@z)")
    for s in subsets(["a@x", "b@y", "c@z"]):
        assert policy_satisfied(p, s) == (len(s) >= 2)
    assert not policy_satisfied(p, {"a@x", "q@q", "r@r"})


def test_satisfaction_is_monotone_over_family():
    for pol in family():
        labels = sorted(pol.labels())
        for s in subsets(labels):
            if policy_satisfied(pol, s):
                for extra in labels:
                    assert policy_satisfied(pol, s | {extra})


def test_canonical_text_round_trips_over_family():
    for pol in family(with_repeats=True):
        assert policy_parse(pol.to_text()).to_text() == pol.to_text()


def test_builders_validate():
    with pytest.raises(ValueError):
        threshold(3, leaf("a@x"), leaf("b@y"))
    with pytest.raises(ValueError):
        leaf("noauthority")


_names = st.sampled_from(["a@x", "b@y", "c@z", "d@w"])
_trees = st.recursive(
    _names.map(leaf),
    lambda kids: st.lists(kids, min_size=2, max_size=3).flatmap(
        lambda cs: st.sampled_from([and_(*cs), or_(*cs)] + [threshold(k, *cs) for k in range(1, len(cs) + 1)])
    ),
    max_leaves=6,
)


@given(_trees, st.sets(_names))
def test_parse_of_render_preserves_meaning(root, held):
    pol = AccessPolicy(root)
    again = policy_parse(pol.to_text())
    assert policy_satisfied(again, held) == policy_satisfied(pol, held)
