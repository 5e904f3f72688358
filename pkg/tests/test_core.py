import itertools

import pytest

from abac_chain.core import (
    AccessDecision, AccountId, ActionFlags, AttributeSet, Policy, Reason, TimeContext,
    attrs_match_complete, attrs_match_partial, decide, evaluate, normalize_record,
)
from abac_chain.fixtures import LAB_POLICY, OBJECT_ATTRS, SUBJECT_ATTRS

READ, WRITE, EXECUTE = ActionFlags.of("read"), ActionFlags.of("write"), ActionFlags.of("execute")


def subset_oracle(policy, presented):
    """Independent restatement: non-empty policy items form a subset of non-empty presented items."""
    want = {(n, v) for n, v in policy.entries if v}
    have = {(n, v) for n, v in presented.entries if v}
    return want <= have


# -- types ---------------------------------------------------------------------

def test_account_id_normalizes_case():
    a = AccountId("0x" + "AB" * 20)
    assert a == "0x" + "ab" * 20
    assert a.raw == bytes([0xAB] * 20)


@pytest.mark.parametrize("bad", ["0x123", "ab" * 20, "0x" + "g" * 40, 42])
def test_account_id_rejects_malformed(bad):
    with pytest.raises(ValueError):
        AccountId(bad)


def test_attribute_set_rejects_duplicate_names():
    with pytest.raises(ValueError):
        AttributeSet.of([("Org", "A"), ("Org", "B")])


def test_bounds_check():
    assert SUBJECT_ATTRS.check_bounds(6, 10) is None
    assert AttributeSet.of(a="1" * 11).check_bounds(6, 10) is not None
    assert AttributeSet.of({str(i): "x" for i in range(7)}).check_bounds(6, 10) is not None


def test_time_context_validation():
    with pytest.raises(ValueError):
        TimeContext(2)
    with pytest.raises(ValueError):
        TimeContext(1, 10, 5)
    assert TimeContext(0, 10, 5).allows(0)  # mode 0 ignores the window


def test_merge_overwrites_per_name_and_appends():
    base = AttributeSet.of([("Org", "NAIST"), ("Role", "Student")])
    merged = base.merged(AttributeSet.of([("Role", "Staff"), ("Lab", "LSM")]))
    assert merged.entries == (("Org", "NAIST"), ("Role", "Staff"), ("Lab", "LSM"))


def test_role_normalization_only_touches_role():
    rec = normalize_record(AttributeSet.of([("Role", "student"), ("Name", "alice")]))
    assert rec.get("Role") == "Student"
    assert rec.get("Name") == "alice"


def test_policy_json_round_trip():
    assert Policy.from_json(LAB_POLICY.to_json()) == LAB_POLICY


def test_decision_permitted_iff_permit():
    for reason in Reason:
        assert AccessDecision(reason).permitted == (reason is Reason.PERMIT)


# -- attrs_match_partial -------------------------------------------------------

def test_partial_lab_policy_matches_example_subject():
    assert attrs_match_partial(LAB_POLICY.sa, normalize_record(SUBJECT_ATTRS))
    assert attrs_match_partial(LAB_POLICY.oa, OBJECT_ATTRS)


def test_partial_is_case_sensitive_without_normalization():
    assert not attrs_match_partial(LAB_POLICY.sa, SUBJECT_ATTRS)


def test_partial_empty_policy_matches_anything():
    assert attrs_match_partial(AttributeSet(), SUBJECT_ATTRS)
    assert attrs_match_partial(AttributeSet(), AttributeSet())


def test_partial_differing_value():
    assert not attrs_match_partial(AttributeSet.of(Org="NAIST", Dep="IS"),
                                   AttributeSet.of(Org="NAIST", Dep="MS"))


def _two_entry_sets(alphabet):
    names = ["Org", "Dep"]
    for values in itertools.product(alphabet + [""], repeat=2):
        yield AttributeSet(tuple(zip(names, values)))
    for n in names:
        for v in alphabet:
            yield AttributeSet(((n, v),))


def test_partial_exhaustive_two_entries_three_symbols():
    sets = list(_two_entry_sets(["a", "b", "c"]))
    for p, s in itertools.product(sets, sets):
        assert attrs_match_partial(p, s) == subset_oracle(p, s)


# -- attrs_match_complete ------------------------------------------------------

def test_complete_is_order_insensitive_and_reflexive():
    assert attrs_match_complete(AttributeSet.of(Org="NAIST", Dep="IS"), AttributeSet.of(Dep="IS", Org="NAIST"))
    assert attrs_match_complete(LAB_POLICY.sa, LAB_POLICY.sa)


def test_complete_distinguishes_wildcard_entries():
    assert not attrs_match_complete(AttributeSet.of(Org="NAIST"), AttributeSet.of(Org="NAIST", Name=""))


def test_complete_exhaustive_over_subsets_of_three_entries():
    universe = [("Org", "NAIST"), ("Dep", "IS"), ("Lab", "LSM")]
    subsets = [c for k in range(4) for c in itertools.combinations(universe, k)]
    for a, b in itertools.product(subsets, subsets):
        expected = sorted(a) == sorted(b)
        for pa in itertools.permutations(a):
            assert attrs_match_complete(AttributeSet(pa), AttributeSet(b)) == expected
    assert not attrs_match_complete(AttributeSet.of(Org="NAIST"), AttributeSet.of(Org="NAIST", Dep="IS"))


# -- evaluate ------------------------------------------------------------------

def test_evaluate_lab_policy_examples():
    assert evaluate(LAB_POLICY, READ, 1570000000).reason is Reason.PERMIT
    assert evaluate(LAB_POLICY, EXECUTE, 1570000000).reason is Reason.ACTION_NOT_ALLOWED
    assert evaluate(LAB_POLICY, READ, 1563206775).reason is Reason.OUTSIDE_TIME_WINDOW


def test_evaluate_window_is_closed():
    assert evaluate(LAB_POLICY, READ, 1563206776).permitted
    assert evaluate(LAB_POLICY, READ, 1575483330).permitted
    assert not evaluate(LAB_POLICY, READ, 1575483331).permitted


def test_evaluate_checks_action_before_time():
    assert evaluate(LAB_POLICY, EXECUTE, 0).reason is Reason.ACTION_NOT_ALLOWED


def test_evaluate_multi_action_requires_all_flags():
    assert evaluate(LAB_POLICY, ActionFlags.of("read", "write"), 1570000000).permitted
    assert not evaluate(LAB_POLICY, ActionFlags.of("read", "execute"), 1570000000).permitted


def test_evaluate_rejects_empty_request():
    with pytest.raises(ValueError):
        evaluate(LAB_POLICY, ActionFlags(), 0)


# -- decide --------------------------------------------------------------------

def test_decide_examples():
    subj = normalize_record(SUBJECT_ATTRS)
    assert decide(subj, OBJECT_ATTRS, [LAB_POLICY], WRITE, 1570000000).reason is Reason.PERMIT
    assert decide(subj, OBJECT_ATTRS, [], READ, 1570000000).reason is Reason.NO_MATCHING_POLICY


def test_decide_no_attribute_match():
    s, o = AttributeSet.of(Org="NAIST"), AttributeSet.of(Org="OSAKA")
    assert not any(attrs_match_partial(p.sa, s) and attrs_match_partial(p.oa, o) for p in [LAB_POLICY])
    assert decide(s, o, [LAB_POLICY], READ, 1570000000).reason is Reason.NO_MATCHING_POLICY


def test_decide_any_permit_wins_and_first_denial_reported():
    subj = normalize_record(SUBJECT_ATTRS)
    exec_only = Policy(AttributeSet.of(Org="NAIST"), AttributeSet(), ActionFlags(execute=True))
    late = Policy(AttributeSet.of(Lab="LSM"), AttributeSet(), ActionFlags(read=True), TimeContext(1, 0, 10))
    assert decide(subj, OBJECT_ATTRS, [exec_only, late], READ, 100).reason is Reason.ACTION_NOT_ALLOWED
    assert decide(subj, OBJECT_ATTRS, [late, exec_only], READ, 100).reason is Reason.OUTSIDE_TIME_WINDOW
    assert decide(subj, OBJECT_ATTRS, [exec_only, late, LAB_POLICY], READ, 1570000000).permitted


def test_decide_no_cross_policy_union():
    read_only = Policy(AttributeSet(), AttributeSet(), ActionFlags(read=True))
    write_only = Policy(AttributeSet.of(Org="NAIST"), AttributeSet(), ActionFlags(write=True))
    both = ActionFlags.of("read", "write")
    assert not decide(SUBJECT_ATTRS, OBJECT_ATTRS, [read_only, write_only], both, 0).permitted
