"""The four ABAC contracts (SAMC, OAMC, PMC, ACC) and the ACL baseline contracts.

Decision logic lives in :mod:`abac_chain.core`; these classes only own
storage, enforce admin rights via the runtime, validate bounds and charge
gas from :mod:`abac_chain.gas`.

ABI arguments arrive JSON-decoded (see ``Transaction.args``): account ids as
hex strings, attribute sets as ``[[name, value], ...]`` lists, policies as
``{"sa", "oa", "actions", "context"}`` objects.
"""

from __future__ import annotations

from typing import Any

from . import gas
from .core import (
    AccessDecision, AccountId, ActionFlags, AttributeSet, Policy, Reason,
    attrs_match_complete, evaluate, matching_indices, normalize_record,
)
from .errors import (
    AttributeBoundsExceeded, DuplicatePolicy, IndexOutOfRange, InvalidArgument,
    NoSuchAttribute, NoSuchObject, NoSuchSubject, PolicyNotFound,
)
from .runtime import Context, Contract, abi


def _account(value: Any) -> AccountId:
    try:
        return AccountId(value)
    except ValueError as exc:
        raise InvalidArgument(str(exc)) from None


def _attrs(value: Any) -> AttributeSet:
    if isinstance(value, AttributeSet):
        return value
    try:
        return AttributeSet.from_json(value)
    except (TypeError, ValueError) as exc:
        raise InvalidArgument(f"bad attribute set: {exc}") from None


def _policy(value: Any) -> Policy:
    if isinstance(value, Policy):
        return value
    try:
        return Policy.from_json(value)
    except (AttributeError, KeyError, TypeError, ValueError) as exc:
        raise InvalidArgument(f"bad policy: {exc}") from None


def _index(value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InvalidArgument(f"index must be an integer, got {value!r}")
    return value


def _string(value: Any, what: str) -> str:
    if not isinstance(value, str):
        raise InvalidArgument(f"{what} must be a string")
    return value


class _AttributeStore(Contract):
    """Shared record logic for SAMC and OAMC; subclasses fix the names and costs."""

    missing = NoSuchSubject

    def __init__(self, name, admin, **extra):
        super().__init__(name, admin, **extra)
        self.records: dict[AccountId, AttributeSet] = {}

    def bounds(self, ctx: Context) -> tuple[int, int]:
        raise NotImplementedError

    def save(self):
        return dict(self.records)

    def load(self, saved):
        self.records = saved

    def state_json(self):
        return {k: v.to_json() for k, v in sorted(self.records.items())}

    def _check(self, ctx: Context, attrs: AttributeSet) -> None:
        problem = attrs.check_bounds(*self.bounds(ctx))
        if problem:
            raise AttributeBoundsExceeded(problem)

    def _lookup(self, id) -> tuple[AccountId, AttributeSet]:
        key = _account(id)
        try:
            return key, self.records[key]
        except KeyError:
            raise self.missing(key) from None

    def _add(self, ctx: Context, id, attrs) -> None:
        key = _account(id)
        new = normalize_record(_attrs(attrs))
        merged = self.records[key].merged(new) if key in self.records else new
        self._check(ctx, merged)
        self.records[key] = merged

    def _update(self, ctx: Context, id, name, value) -> int:
        key, current = self._lookup(id)
        name = _string(name, "name")
        value = _string(value, "value")
        if name not in current:
            raise NoSuchAttribute(f"{key} has no attribute {name!r}")
        updated = normalize_record(current.with_value(name, value))
        self._check(ctx, updated)
        self.records[key] = updated
        return len(updated.get(name))

    def _delete(self, id, name) -> None:
        key, current = self._lookup(id)
        name = _string(name, "name")
        if name not in current:
            raise NoSuchAttribute(f"{key} has no attribute {name!r}")
        self.records[key] = current.without(name)

    def _get(self, id) -> AttributeSet:
        return self._lookup(id)[1]


class SAMC(_AttributeStore):
    kind = "SAMC"
    missing = NoSuchSubject

    def bounds(self, ctx):
        return ctx.params.a_s, ctx.params.c_s

    @abi(admin=True)
    def subjectAdd(self, ctx, id, attrs):
        """Create the subject record, or overwrite its attributes per name."""
        self._add(ctx, id, attrs)
        ctx.charge("subjectAdd", gas.sa_cost(ctx.params))

    @abi(admin=True)
    def subjectUpdate(self, ctx, id, name, value):
        chars = self._update(ctx, id, name, value)
        ctx.charge("subjectUpdate", gas.su_cost(ctx.params, chars))

    @abi(admin=True)
    def subjectDelete(self, ctx, id, name):
        self._delete(id, name)
        ctx.charge("subjectDelete", gas.sd_cost())

    @abi(view=True, tx=False)
    def getSubject(self, ctx, id):
        return self._get(id)


class OAMC(_AttributeStore):
    kind = "OAMC"
    missing = NoSuchObject

    def bounds(self, ctx):
        return ctx.params.a_o, ctx.params.c_o

    @abi(admin=True)
    def objectAdd(self, ctx, id, attrs):
        self._add(ctx, id, attrs)
        ctx.charge("objectAdd", gas.oa_cost(ctx.params))

    @abi(admin=True)
    def objectUpdate(self, ctx, id, name, value):
        chars = self._update(ctx, id, name, value)
        ctx.charge("objectUpdate", gas.ou_cost(ctx.params, chars))

    @abi(admin=True)
    def objectDelete(self, ctx, id, name):
        self._delete(id, name)
        ctx.charge("objectDelete", gas.od_cost())

    @abi(view=True, tx=False)
    def getObject(self, ctx, id):
        return self._get(id)


class PMC(Contract):
    """Ordered policy list. Deletion is swap-with-last-then-pop, so indices move."""

    kind = "PMC"
    FIRST_ADD = ("PMC", "policyAdd", "init")

    def __init__(self, name, admin, **extra):
        super().__init__(name, admin, **extra)
        self.policies: list[Policy] = []

    def save(self):
        return list(self.policies)

    def load(self, saved):
        self.policies = saved

    def state_json(self):
        return [p.to_json() for p in self.policies]

    def _check(self, ctx: Context, p: Policy) -> None:
        params = ctx.params
        problem = p.sa.check_bounds(params.a_s, params.c_s) or p.oa.check_bounds(params.a_o, params.c_o)
        if problem:
            raise AttributeBoundsExceeded(problem)

    def exact_index(self, sa: AttributeSet, oa: AttributeSet) -> int | None:
        for i, p in enumerate(self.policies):
            if attrs_match_complete(p.sa, sa) and attrs_match_complete(p.oa, oa):
                return i
        return None

    def match(self, sa: AttributeSet, oa: AttributeSet) -> list[int]:
        return matching_indices(self.policies, sa, oa)

    @abi(admin=True)
    def policyAdd(self, ctx, policy):
        p = _policy(policy)
        self._check(ctx, p)
        if self.exact_index(p.sa, p.oa) is not None:
            raise DuplicatePolicy("a policy with identical attribute sets exists")
        self.policies.append(p)
        ctx.charge("policyAdd", gas.pa_cost(ctx.params, ctx.first_time(self.FIRST_ADD)))
        return len(self.policies) - 1

    @abi(admin=True)
    def policyUpdate(self, ctx, index, policy):
        index = _index(index)
        p = _policy(policy)
        if not 0 <= index < len(self.policies):
            raise IndexOutOfRange(f"index {index} with {len(self.policies)} policies")
        self._check(ctx, p)
        other = self.exact_index(p.sa, p.oa)
        if other is not None and other != index:
            raise DuplicatePolicy(f"policy {other} has identical attribute sets")
        self.policies[index] = p
        ctx.charge("policyUpdate", gas.pu_cost(index, ctx.params))

    @abi(admin=True)
    def policyDelete(self, ctx, policy):
        p = _policy(policy)
        index = self.exact_index(p.sa, p.oa)
        if index is None:
            raise PolicyNotFound("no policy with identical attribute sets")
        last = self.policies.pop()
        if index < len(self.policies):
            self.policies[index] = last
        ctx.charge("policyDelete", gas.pd_cost(index))
        return index

    @abi(view=True)
    def findMatchPolicy(self, ctx, sa, oa):
        """Indices of policies whose attribute sets are subsets of ``sa``/``oa``."""
        ctx.charge("findMatchPolicy", gas.fp_cost(len(self.policies), ctx.params))
        return self.match(_attrs(sa), _attrs(oa))

    @abi(view=True)
    def findExactMatchPolicy(self, ctx, sa, oa):
        # priced like findMatchPolicy: both scan the whole list
        ctx.charge("findExactMatchPolicy", gas.fp_cost(len(self.policies), ctx.params))
        return self.exact_index(_attrs(sa), _attrs(oa))

    @abi(view=True, tx=False)
    def getPolicy(self, ctx, index):
        index = _index(index)
        if not 0 <= index < len(self.policies):
            raise IndexOutOfRange(f"index {index} with {len(self.policies)} policies")
        return self.policies[index]

    @abi(view=True, tx=False)
    def policyCount(self, ctx):
        return len(self.policies)


class ACC(Contract):
    """Access-control orchestrator; open to any sender.

    Flow: getSubject, getObject, findMatchPolicy, getPolicy (once per matched
    index until one permits, or once on a miss), then the decision. Every
    executed step is charged to the request transaction. The decision is
    emitted as an event addressed to both the subject and the object.
    """

    kind = "ACC"
    FIRST_SUBJECT = ("ACC", "getSubject", "init")
    FIRST_OBJECT = ("ACC", "getObject", "init")

    @abi
    def accessControl(self, ctx, subject, object, actions):
        subject_id, object_id = _account(subject), _account(object)
        try:
            flags = ActionFlags.from_json(actions)
        except (AttributeError, TypeError) as exc:
            raise InvalidArgument(f"bad actions: {exc}") from None
        if not flags.requested():
            raise InvalidArgument("no action requested")
        samc, oamc, pmc = ctx.contract("SAMC"), ctx.contract("OAMC"), ctx.contract("PMC")
        params = ctx.params

        def finish(decision: AccessDecision, matched: list[int] = ()) -> dict:
            ctx.emit({
                "type": "AccessDecision",
                "to": [subject_id, object_id],
                "subject": subject_id,
                "object": object_id,
                "actions": flags.to_json(),
                "now": ctx.now,
                **decision.to_json(),
            })
            return {
                **decision.to_json(),
                "matched": list(matched),
                "steps": [[label, r.total] for label, r in ctx.steps],
            }

        ctx.charge("getSubject", gas.gs_cost(params, ctx.first_time(self.FIRST_SUBJECT)))
        s_attrs = samc.records.get(subject_id)
        if s_attrs is None:
            return finish(AccessDecision(Reason.UNKNOWN_SUBJECT))
        ctx.charge("getObject", gas.go_cost(params, ctx.first_time(self.FIRST_OBJECT)))
        o_attrs = oamc.records.get(object_id)
        if o_attrs is None:
            return finish(AccessDecision(Reason.UNKNOWN_OBJECT))

        ctx.charge("findMatchPolicy", gas.fp_cost(len(pmc.policies), params))
        matched = pmc.match(s_attrs, o_attrs)
        if not matched:
            ctx.charge("getPolicy", gas.gp_cost(False))
            ctx.charge("accessControl", gas.ac_cost(False))
            return finish(AccessDecision(Reason.NO_MATCHING_POLICY))

        decision = None
        for i in matched:
            ctx.charge("getPolicy", gas.gp_cost(True))
            result = evaluate(pmc.policies[i], flags, ctx.now)
            if result.permitted:
                decision = result
                break
            decision = decision or result
        ctx.charge("accessControl", gas.ac_cost(True))
        return finish(decision, matched)


# -- ACL baseline ------------------------------------------------------------

class RC(Contract):
    """Register contract of the ACL baseline (deployment cost only)."""

    kind = "RC"


class JC(Contract):
    """Judge contract of the ACL baseline (deployment cost only)."""

    kind = "JC"


class ACLACC(Contract):
    """Per subject-object pair access-control contract of the ACL baseline.

    Deploy as ``ACLACC:<label>`` with ``subject`` and ``object`` extras.
    """

    kind = "ACLACC"

    def __init__(self, name, admin, subject=None, object=None, **extra):
        super().__init__(name, admin, subject=subject, object=object, **extra)
        self.permissions: dict[str, bool] = {}

    def save(self):
        return dict(self.permissions)

    def load(self, saved):
        self.permissions = saved

    def state_json(self):
        return dict(sorted(self.permissions.items()))

    @abi(admin=True)
    def policyAdd(self, ctx, action, permission):
        if action not in ("read", "write", "execute") or not isinstance(permission, bool):
            raise InvalidArgument("policyAdd needs an action name and a boolean permission")
        self.permissions[action] = permission
        ctx.charge("policyAdd", gas.GasReceipt(ctx.chain.deploy_consts.acl_per_pair_policy))

    @abi(view=True, tx=False)
    def permits(self, ctx, action):
        return self.permissions.get(action, False)


REGISTRY: dict[str, type[Contract]] = {
    c.kind: c for c in (SAMC, OAMC, PMC, ACC, RC, JC, ACLACC)
}

PROPOSED_CONTRACTS = ("ACC", "SAMC", "OAMC", "PMC")
ACL_CONTRACTS = ("RC", "JC")
