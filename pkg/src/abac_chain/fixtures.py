"""The smart-campus example: Alice, a lab camera and the LSM student policy."""

from __future__ import annotations

from .core import AccountId, ActionFlags, AttributeSet, Policy, TimeContext
from .runtime import Chain

ADMIN = AccountId("0x" + "ad" * 20)
SUBJECT_ID = AccountId("0x3d03" + "0" * 31 + "a11ce")
OBJECT_ID = AccountId("0x272a" + "0" * 33 + "ca3")

SUBJECT_ATTRS = AttributeSet.of([
    ("Name", "Alice"), ("Org", "NAIST"), ("Dep", "IS"),
    ("Lab", "LSM"), ("Role", "student"), ("Others", ""),
])
OBJECT_ATTRS = AttributeSet.of([
    ("Name", "Camera"), ("Org", "NAIST"), ("Dep", "IS"),
    ("Lab", "LSM"), ("Place", "Room1"), ("Others", ""),
])

START_TIME = 1563206776
END_TIME = 1575483330

LAB_POLICY = Policy(
    sa=AttributeSet.of([("Name", ""), ("Org", "NAIST"), ("Dep", "IS"), ("Lab", "LSM"), ("Role", "Student")]),
    oa=AttributeSet.of([("Name", ""), ("Org", "NAIST"), ("Dep", "IS"), ("Lab", "LSM"), ("Place", "")]),
    actions=ActionFlags(read=True, write=True, execute=False),
    context=TimeContext(1, START_TIME, END_TIME),
)

PROPOSED = ("ACC", "SAMC", "OAMC", "PMC")


def deploy_all(chain: Chain, admin: str = ADMIN) -> dict[str, int]:
    return {name: chain.deploy(name, admin).total for name in PROPOSED}


def quickstart(chain: Chain | None = None, admin: str = ADMIN) -> Chain:
    """Deploy the four contracts and load the example subject, object and policy."""
    chain = chain if chain is not None else Chain()
    deploy_all(chain, admin)
    chain.execute(admin, "SAMC", "subjectAdd", {"id": SUBJECT_ID, "attrs": SUBJECT_ATTRS.to_json()})
    chain.execute(admin, "OAMC", "objectAdd", {"id": OBJECT_ID, "attrs": OBJECT_ATTRS.to_json()})
    chain.execute(admin, "PMC", "policyAdd", {"policy": LAB_POLICY.to_json()})
    return chain


def request(chain: Chain, action: str, now: int | None = None,
            subject: str = SUBJECT_ID, obj: str = OBJECT_ID) -> dict:
    """Send one access request from the subject; returns the ACC result."""
    if now is not None:
        chain.set_clock(now)
    result, _ = chain.execute(subject, "ACC", "accessControl", {
        "subject": subject, "object": obj, "actions": ActionFlags.of(action).to_json(),
    })
    return result
