import random

import pytest

from abac_chain import gas
from abac_chain.core import AttributeSet, Policy
from abac_chain.errors import (
    AttributeBoundsExceeded, DuplicatePolicy, IndexOutOfRange, NoSuchAttribute,
    NoSuchSubject, PolicyNotFound,
)
from abac_chain.fixtures import (
    ADMIN, LAB_POLICY, OBJECT_ATTRS, OBJECT_ID, SUBJECT_ATTRS, SUBJECT_ID, deploy_all, quickstart, request,
)
from abac_chain.runtime import Chain

from sessions import generate, run


@pytest.fixture
def chain():
    c = Chain()
    deploy_all(c)
    return c


def add_subject(c, attrs=SUBJECT_ATTRS, id=SUBJECT_ID):
    return c.execute(ADMIN, "SAMC", "subjectAdd", {"id": id, "attrs": attrs.to_json()})[1]


def add_policy(c, p):
    return c.execute(ADMIN, "PMC", "policyAdd", {"policy": p.to_json()})


# -- SAMC / OAMC ---------------------------------------------------------------

def test_subject_add_gas_and_normalization(chain):
    assert add_subject(chain).total == 155_090
    rec = chain.call("SAMC", "getSubject", {"id": SUBJECT_ID})
    assert rec.get("Role") == "Student"
    assert rec.names == SUBJECT_ATTRS.names


def test_subject_add_is_idempotent_upsert(chain):
    add_subject(chain)
    state = chain.contract("SAMC").state_json()
    add_subject(chain)
    assert chain.contract("SAMC").state_json() == state
    add_subject(chain, AttributeSet.of(Lab="AHC"))
    assert chain.call("SAMC", "getSubject", {"id": SUBJECT_ID}).get("Lab") == "AHC"


def test_subject_add_bounds(chain):
    seven = AttributeSet.of({f"a{i}": "x" for i in range(7)})
    with pytest.raises(AttributeBoundsExceeded):
        add_subject(chain, seven)
    with pytest.raises(AttributeBoundsExceeded):
        add_subject(chain, AttributeSet.of(Name="x" * 11))
    # merging a new name into a full record also violates the bound
    add_subject(chain)
    with pytest.raises(AttributeBoundsExceeded):
        add_subject(chain, AttributeSet.of(Extra="x"))


def test_subject_update_and_delete(chain):
    add_subject(chain)
    _, r = chain.execute(ADMIN, "SAMC", "subjectUpdate", {"id": SUBJECT_ID, "name": "Lab", "value": "AHC"})
    assert r.total == 61_250 + 64 * 3
    with pytest.raises(NoSuchAttribute):
        chain.execute(ADMIN, "SAMC", "subjectUpdate", {"id": SUBJECT_ID, "name": "Age", "value": "1"})
    _, r = chain.execute(ADMIN, "SAMC", "subjectDelete", {"id": SUBJECT_ID, "name": "Others"})
    assert r.total == 26_786
    assert "Others" not in chain.call("SAMC", "getSubject", {"id": SUBJECT_ID})
    with pytest.raises(NoSuchSubject):
        chain.execute(ADMIN, "SAMC", "subjectDelete", {"id": OBJECT_ID, "name": "Lab"})


def test_object_add_gas(chain):
    _, r = chain.execute(ADMIN, "OAMC", "objectAdd", {"id": OBJECT_ID, "attrs": OBJECT_ATTRS.to_json()})
    assert r.total == 155_068


# -- PMC -----------------------------------------------------------------------

def test_policy_add_first_time_then_steady(chain):
    idx, r = add_policy(chain, LAB_POLICY)
    assert (idx, r.total) == (0, 596_483)
    other = Policy(AttributeSet.of(Org="NAIST"), AttributeSet())
    idx, r = add_policy(chain, other)
    assert (idx, r.total) == (1, 401_483)


def test_policy_add_rejects_complete_duplicate_in_any_order(chain):
    add_policy(chain, LAB_POLICY)
    reordered = Policy(AttributeSet(LAB_POLICY.sa.entries[::-1]), LAB_POLICY.oa)
    with pytest.raises(DuplicatePolicy):
        add_policy(chain, reordered)


def test_policy_update(chain):
    add_policy(chain, LAB_POLICY)
    other = Policy(AttributeSet.of(Org="NAIST"), AttributeSet())
    add_policy(chain, other)
    with pytest.raises(IndexOutOfRange):
        chain.execute(ADMIN, "PMC", "policyUpdate", {"index": 2, "policy": other.to_json()})
    with pytest.raises(DuplicatePolicy):
        chain.execute(ADMIN, "PMC", "policyUpdate", {"index": 0, "policy": other.to_json()})
    _, r = chain.execute(ADMIN, "PMC", "policyUpdate", {"index": 1, "policy": other.to_json()})
    assert r.total == 194_401 + 7_680


def test_policy_delete_swaps_last_into_hole(chain):
    ps = [Policy(AttributeSet.of(Org=v), AttributeSet()) for v in "ABC"]
    for p in ps:
        add_policy(chain, p)
    idx, r = chain.execute(ADMIN, "PMC", "policyDelete", {"policy": ps[0].to_json()})
    assert (idx, r.total) == (0, 51_529)
    assert chain.contract("PMC").policies == [ps[2], ps[1]]
    with pytest.raises(PolicyNotFound):
        chain.execute(ADMIN, "PMC", "policyDelete", {"policy": ps[0].to_json()})


def test_find_match_policy(chain):
    add_policy(chain, LAB_POLICY)
    add_policy(chain, Policy(AttributeSet.of(Org="OSAKA"), AttributeSet()))
    args = {"sa": AttributeSet.of(Org="NAIST", Dep="IS", Lab="LSM", Role="Student").to_json(),
            "oa": OBJECT_ATTRS.to_json()}
    found, r = chain.execute(ADMIN, "PMC", "findMatchPolicy", args)
    assert found == [0] and r.total == gas.g_fp(2)
    exact, _ = chain.execute(ADMIN, "PMC", "findExactMatchPolicy",
                             {"sa": LAB_POLICY.sa.to_json(), "oa": LAB_POLICY.oa.to_json()})
    assert exact == 0


# -- ACC -----------------------------------------------------------------------

def test_access_flow_gas_first_and_steady():
    c = quickstart()
    res = request(c, "read", now=1570000000)
    assert res["permitted"] and res["reason"] == "Permit"
    assert c.log[-1].receipt.total == 502_508
    assert [s[0] for s in res["steps"]] == [
        "getSubject", "getObject", "findMatchPolicy", "getPolicy", "accessControl"]
    request(c, "write")
    assert c.log[-1].receipt.total == 322_508


def test_access_denials():
    c = quickstart()
    assert request(c, "execute", now=1570000000)["reason"] == "ActionNotAllowed"
    c2 = quickstart()
    assert request(c2, "read", now=1563206775)["reason"] == "OutsideTimeWindow"
    assert request(c2, "read", now=1575483331)["reason"] == "OutsideTimeWindow"


def test_access_unknown_parties():
    c = quickstart()
    res = request(c, "read", subject="0x" + "12" * 20)
    assert res["reason"] == "UnknownSubject"
    assert c.log[-1].receipt.total == 149_467
    res = request(c, "read", obj="0x" + "12" * 20)
    assert res["reason"] == "UnknownObject"
    assert c.log[-1].receipt.total == 59_467 + 149_201


def test_access_no_matching_policy():
    c = quickstart()
    c.execute(ADMIN, "PMC", "policyDelete", {"policy": LAB_POLICY.to_json()})
    res = request(c, "read", now=1570000000)
    assert res["reason"] == "NoMatchingPolicy"
    assert c.log[-1].receipt.total == 149_467 + 149_201 + gas.g_fp(0) + 46_780 + 26_640


def test_access_is_open_to_any_sender():
    c = quickstart()
    c.execute("0x" + "99" * 20, "ACC", "accessControl", {
        "subject": SUBJECT_ID, "object": OBJECT_ID, "actions": {"read": True}})
    assert c.log[-1].ok


def test_access_charges_one_get_policy_per_tried_match():
    c = quickstart()
    deny = Policy(AttributeSet.of(Org="NAIST"), AttributeSet())  # no actions granted
    add_policy(c, deny)
    c.execute(ADMIN, "PMC", "policyDelete", {"policy": LAB_POLICY.to_json()})
    add_policy(c, LAB_POLICY)  # now second in the list
    res = request(c, "read", now=1570000000)
    assert res["matched"] == [0, 1] and res["permitted"]
    assert [s[0] for s in res["steps"]].count("getPolicy") == 2


# -- ACL baseline ----------------------------------------------------------------

def test_acl_contracts():
    c = Chain()
    assert c.deploy("RC", ADMIN).total + c.deploy("JC", ADMIN).total == 2_809_093
    r = c.deploy("ACLACC:1", ADMIN, subject=SUBJECT_ID, object=OBJECT_ID)
    _, p = c.execute(ADMIN, "ACLACC:1", "policyAdd", {"action": "read", "permission": True})
    assert r.total + p.total == 1_945_067
    assert c.call("ACLACC:1", "permits", {"action": "read"}) is True
    assert c.call("ACLACC:1", "permits", {"action": "write"}) is False


# -- metered receipts against the shadow model -----------------------------------

@pytest.mark.parametrize("seed", range(10))
def test_receipts_match_shadow_model(seed):
    steps = generate(random.Random(seed), 150)
    got = run(Chain(), steps)
    assert got == [(s.expected_error, s.expected_gas) for s in steps]
