"""ABAC domain model: attribute sets, policies, matching and the access decision.

Nothing in here knows about the chain or about gas. All types are immutable
and every function is pure.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

_ACCOUNT_RE = re.compile(r"^0x[0-9a-fA-F]{40}$")

#: record-side names whose value gets its first letter upper-cased on ingestion
NORMALIZED_NAMES = frozenset({"Role"})


class AccountId(str):
    """A 20-byte account address, stored as lower-case ``0x`` + 40 hex digits.

    Lower-casing on construction makes string equality coincide with
    byte-wise equality of the underlying address.
    """

    def __new__(cls, value: str) -> "AccountId":
        if isinstance(value, AccountId):
            return value
        if not isinstance(value, str) or not _ACCOUNT_RE.match(value):
            raise ValueError(f"not a 20-byte hex account id: {value!r}")
        return super().__new__(cls, value.lower())

    @property
    def raw(self) -> bytes:
        return bytes.fromhex(self[2:])

    @classmethod
    def from_int(cls, n: int) -> "AccountId":
        return cls(f"0x{n:040x}")


Pairs = Union[Mapping[str, str], Iterable[Sequence[str]]]


@dataclass(frozen=True)
class AttributeSet:
    """Ordered ``(name, value)`` pairs with unique names.

    In a policy an empty value is a wildcard; in a subject/object record it
    means the attribute is absent. Size bounds are context dependent and are
    checked with :meth:`check_bounds`.
    """

    entries: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        seen = set()
        for entry in self.entries:
            if len(entry) != 2 or not all(isinstance(x, str) for x in entry):
                raise ValueError(f"attribute entry must be a (name, value) string pair: {entry!r}")
            if entry[0] in seen:
                raise ValueError(f"duplicate attribute name {entry[0]!r}")
            seen.add(entry[0])

    @classmethod
    def of(cls, pairs: Pairs | None = None, **kw: str) -> "AttributeSet":
        if pairs is None:
            items: list = []
        elif isinstance(pairs, Mapping):
            items = list(pairs.items())
        else:
            items = [tuple(p) for p in pairs]
        items.extend(kw.items())
        return cls(tuple((str(k), str(v)) for k, v in items))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __contains__(self, name: object) -> bool:
        return any(n == name for n, _ in self.entries)

    def get(self, name: str, default: str | None = None) -> str | None:
        for n, v in self.entries:
            if n == name:
                return v
        return default

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.entries)

    def constraints(self) -> dict[str, str]:
        """Non-empty entries, i.e. what a policy-side set actually requires."""
        return {n: v for n, v in self.entries if v != ""}

    def merged(self, other: "AttributeSet") -> "AttributeSet":
        """Overwrite values per name from ``other``; new names are appended."""
        updates = dict(other.entries)
        out = [(n, updates.pop(n, v)) for n, v in self.entries]
        out.extend((n, v) for n, v in other.entries if n in updates)
        return AttributeSet(tuple(out))

    def with_value(self, name: str, value: str) -> "AttributeSet":
        if name not in self:
            raise KeyError(name)
        return AttributeSet(tuple((n, value if n == name else v) for n, v in self.entries))

    def without(self, name: str) -> "AttributeSet":
        if name not in self:
            raise KeyError(name)
        return AttributeSet(tuple(e for e in self.entries if e[0] != name))

    def check_bounds(self, max_entries: int, max_chars: int) -> str | None:
        """Return a description of the first violated bound, or None."""
        if len(self.entries) > max_entries:
            return f"{len(self.entries)} attributes exceed the bound of {max_entries}"
        for n, v in self.entries:
            if len(v) > max_chars:
                return f"value of {n!r} has {len(v)} characters, bound is {max_chars}"
        return None

    def to_json(self) -> list[list[str]]:
        return [[n, v] for n, v in self.entries]

    @classmethod
    def from_json(cls, data) -> "AttributeSet":
        return cls.of(data)


def normalize_record(attrs: AttributeSet) -> AttributeSet:
    """Capitalize the first letter of ``Role`` values on record ingestion.

    Subject records in the wild write ``student`` while policies write
    ``Student``; matching itself stays case-sensitive.
    """
    return AttributeSet(tuple(
        (n, v[:1].upper() + v[1:] if n in NORMALIZED_NAMES else v)
        for n, v in attrs.entries
    ))


@dataclass(frozen=True)
class TimeContext:
    mode: int = 0
    start_time: int = 0
    end_time: int = 0

    def __post_init__(self):
        if self.mode not in (0, 1):
            raise ValueError(f"time-context mode must be 0 or 1, got {self.mode!r}")
        if self.mode == 1 and self.start_time > self.end_time:
            raise ValueError("start_time is after end_time")

    def allows(self, now: int) -> bool:
        return self.mode == 0 or self.start_time <= now <= self.end_time

    def to_json(self) -> dict:
        return {"mode": self.mode, "start_time": self.start_time, "end_time": self.end_time}

    @classmethod
    def from_json(cls, data: Mapping) -> "TimeContext":
        return cls(int(data.get("mode", 0)), int(data.get("start_time", 0)), int(data.get("end_time", 0)))


ACTION_NAMES = ("read", "write", "execute")


@dataclass(frozen=True)
class ActionFlags:
    read: bool = False
    write: bool = False
    execute: bool = False

    @classmethod
    def of(cls, *names: str) -> "ActionFlags":
        unknown = set(names) - set(ACTION_NAMES)
        if unknown:
            raise ValueError(f"unknown action(s): {sorted(unknown)}")
        return cls(**{n: True for n in names})

    def requested(self) -> tuple[str, ...]:
        return tuple(n for n in ACTION_NAMES if getattr(self, n))

    def to_json(self) -> dict:
        return {n: getattr(self, n) for n in ACTION_NAMES}

    @classmethod
    def from_json(cls, data: Mapping) -> "ActionFlags":
        return cls(**{n: bool(data.get(n, False)) for n in ACTION_NAMES})


@dataclass(frozen=True)
class Policy:
    sa: AttributeSet = field(default_factory=AttributeSet)
    oa: AttributeSet = field(default_factory=AttributeSet)
    actions: ActionFlags = field(default_factory=ActionFlags)
    context: TimeContext = field(default_factory=TimeContext)

    def same_target(self, other: "Policy") -> bool:
        """Complete match on both attribute sets (the duplicate criterion)."""
        return attrs_match_complete(self.sa, other.sa) and attrs_match_complete(self.oa, other.oa)

    def to_json(self) -> dict:
        return {
            "sa": self.sa.to_json(),
            "oa": self.oa.to_json(),
            "actions": self.actions.to_json(),
            "context": self.context.to_json(),
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "Policy":
        return cls(
            sa=AttributeSet.from_json(data.get("sa", [])),
            oa=AttributeSet.from_json(data.get("oa", [])),
            actions=ActionFlags.from_json(data.get("actions", {})),
            context=TimeContext.from_json(data.get("context", {})),
        )


class Reason(str, enum.Enum):
    PERMIT = "Permit"
    NO_MATCHING_POLICY = "NoMatchingPolicy"
    ACTION_NOT_ALLOWED = "ActionNotAllowed"
    OUTSIDE_TIME_WINDOW = "OutsideTimeWindow"
    UNKNOWN_SUBJECT = "UnknownSubject"
    UNKNOWN_OBJECT = "UnknownObject"


@dataclass(frozen=True)
class AccessDecision:
    reason: Reason

    @property
    def permitted(self) -> bool:
        return self.reason is Reason.PERMIT

    def to_json(self) -> dict:
        return {"permitted": self.permitted, "reason": self.reason.value}

    @classmethod
    def from_json(cls, data: Mapping) -> "AccessDecision":
        return cls(Reason(data["reason"]))


PERMIT = AccessDecision(Reason.PERMIT)


def attrs_match_partial(policy_attrs: AttributeSet, presented: AttributeSet) -> bool:
    """True iff every non-wildcard policy entry appears verbatim in ``presented``."""
    have = presented.constraints()
    return all(have.get(n) == v for n, v in policy_attrs.constraints().items())


def attrs_match_complete(a: AttributeSet, b: AttributeSet) -> bool:
    """Order-insensitive equality of entries, empty values included."""
    return len(a.entries) == len(b.entries) and set(a.entries) == set(b.entries)


def evaluate(policy: Policy, action: ActionFlags, now: int) -> AccessDecision:
    """Check the requested action flag(s) against one policy, then its time window.

    Several flags may be set; all of them must be granted by this policy.
    """
    wanted = action.requested()
    if not wanted:
        raise ValueError("no action requested")
    if not all(getattr(policy.actions, n) for n in wanted):
        return AccessDecision(Reason.ACTION_NOT_ALLOWED)
    if not policy.context.allows(now):
        return AccessDecision(Reason.OUTSIDE_TIME_WINDOW)
    return PERMIT


def matching_indices(policies: Sequence[Policy], subject: AttributeSet, obj: AttributeSet) -> list[int]:
    return [
        i for i, p in enumerate(policies)
        if attrs_match_partial(p.sa, subject) and attrs_match_partial(p.oa, obj)
    ]


def decide(subject: AttributeSet, obj: AttributeSet, policies: Sequence[Policy],
           action: ActionFlags, now: int) -> AccessDecision:
    """Any-permit-wins over the attribute-matching policies.

    A denial reports the failure of the first matching policy in list order.
    """
    first_denial = None
    for i in matching_indices(policies, subject, obj):
        result = evaluate(policies[i], action, now)
        if result.permitted:
            return result
        if first_denial is None:
            first_denial = result
    return first_denial or AccessDecision(Reason.NO_MATCHING_POLICY)
