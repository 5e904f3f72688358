"""Deterministic single-process chain: a serialized, replayable transaction log.

There are no blocks or miners. State is a pure fold of the log from genesis,
so replaying a saved log reproduces every contract's storage and every gas
receipt bit for bit. Gas is charged from :mod:`abac_chain.gas` rather than
measured from execution.

The runtime is single-writer: submissions must be serialized by the caller.
"""

from __future__ import annotations

import hashlib
import inspect
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping

from . import gas
from .core import AccountId
from .errors import (
    AbacChainError, AlreadyDeployed, BadSequence, ClockRegression, CorruptLog,
    InvalidArgument, Unauthorized, UnknownAbi, UnknownContract,
)
from .gas import DEFAULT_DEPLOY, DEFAULT_PARAMS, CostParams, DeployConstants, GasReceipt

DEPLOY = "<deploy>"
CHAIN = "<chain>"


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass(frozen=True)
class Transaction:
    seq: int
    sender: str
    target: str
    abi: str
    args: Mapping[str, Any] = field(default_factory=dict)
    timestamp: int = 0

    def to_json(self) -> dict:
        return {
            "seq": self.seq,
            "sender": self.sender,
            "target": self.target,
            "abi": self.abi,
            "args": dict(self.args),
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "Transaction":
        try:
            return cls(int(data["seq"]), str(data["sender"]), str(data["target"]), str(data["abi"]),
                       dict(data["args"]), int(data["timestamp"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptLog(f"malformed transaction record: {exc}") from exc


@dataclass(frozen=True)
class LogEntry:
    tx: Transaction
    receipt: GasReceipt
    result: Any = None
    error: str | None = None
    events: tuple = ()

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_json(self) -> dict:
        return {
            "tx": self.tx.to_json(),
            "receipt": self.receipt.to_json(),
            "result": self.result,
            "error": self.error,
            "events": list(self.events),
        }


def abi(fn: Callable | None = None, *, admin: bool = False, view: bool = False,
        tx: bool = True) -> Callable:
    """Mark a contract method as callable ABI.

    ``admin``: only the contract admin may send it as a transaction.
    ``view``: may be called read-only through :meth:`Chain.call` (free).
    ``tx``: may be sent as a transaction.
    """
    def mark(f):
        f.__abi__ = {"admin": admin, "view": view, "tx": tx}
        return f
    return mark(fn) if fn is not None else mark


class Contract:
    """Base class for contract state machines.

    Subclasses keep their storage in plain attributes holding immutable
    values, and implement ``save``/``load`` (cheap container copies used for
    rollback) and ``state_json`` (used for the state digest).
    """

    kind = "Contract"

    def __init__(self, name: str, admin: AccountId, **extra: Any):
        self.name = name
        self.admin = admin
        self.extra = extra

    @classmethod
    def abis(cls) -> dict[str, dict]:
        out = {}
        for klass in reversed(cls.__mro__):
            for attr, fn in vars(klass).items():
                if callable(fn) and hasattr(fn, "__abi__"):
                    out[attr] = fn.__abi__
        return out

    def save(self) -> Any:
        return None

    def load(self, saved: Any) -> None:
        pass

    def state_json(self) -> Any:
        return {}


class Context:
    """Per-call execution context: caller, time, gas accumulator, events.

    First-time markers consumed during the call are only committed to the
    chain if the transaction succeeds.
    """

    def __init__(self, chain: "Chain", sender: AccountId, now: int, metered: bool = True):
        self.chain = chain
        self.sender = sender
        self.now = now
        self.metered = metered
        self.receipt = gas.ZERO
        self.steps: list[tuple[str, GasReceipt]] = []
        self.events: list[dict] = []
        self.consumed: set[tuple[str, str, str]] = set()

    @property
    def params(self) -> CostParams:
        return self.chain.params

    def charge(self, label: str, receipt: GasReceipt) -> None:
        self.receipt = self.receipt + receipt
        self.steps.append((label, receipt))

    def first_time(self, marker: tuple[str, str, str]) -> bool:
        """Consume a first-execution marker; True on its first use only."""
        if marker in self.chain.first_time_flags or marker in self.consumed:
            return False
        if self.metered:
            self.consumed.add(marker)
        return True

    def emit(self, event: dict) -> None:
        self.events.append(event)

    def contract(self, name: str) -> Contract:
        return self.chain.contract(name)


def _default_registry() -> dict[str, type[Contract]]:
    from .contracts import REGISTRY
    return REGISTRY


class Chain:
    """The transaction log plus the contract states it folds into."""

    def __init__(self, params: CostParams = DEFAULT_PARAMS,
                 deploy_consts: DeployConstants = DEFAULT_DEPLOY,
                 registry: Mapping[str, type[Contract]] | None = None,
                 genesis_time: int = 0):
        self.params = params
        self.deploy_consts = deploy_consts
        self.registry = dict(registry if registry is not None else _default_registry())
        self.contracts: dict[str, Contract] = {}
        self.first_time_flags: set[tuple[str, str, str]] = set()
        self.genesis_time = genesis_time
        self.clock = genesis_time
        self.log: list[LogEntry] = []

    # -- queries ---------------------------------------------------------

    def contract(self, name: str) -> Contract:
        try:
            return self.contracts[name]
        except KeyError:
            raise UnknownContract(name) from None

    def call(self, target: str, abi_name: str, args: Mapping[str, Any] | None = None,
             sender: str | None = None) -> Any:
        """Read-only invocation; no gas, nothing logged."""
        c = self.contract(target)
        meta = c.abis().get(abi_name)
        if meta is None or not meta["view"]:
            raise UnknownAbi(f"{target}.{abi_name} is not a view")
        who = AccountId(sender) if sender else c.admin
        ctx = Context(self, who, self.clock, metered=False)
        saved = c.save()
        try:
            return _invoke(getattr(c, abi_name), ctx, args)
        finally:
            c.load(saved)

    def events_for(self, account: str) -> list[dict]:
        account = AccountId(account)
        return [e for entry in self.log for e in entry.events if account in e.get("to", ())]

    def total_gas(self) -> int:
        return sum(entry.receipt.total for entry in self.log)

    # -- submission ------------------------------------------------------

    def submit(self, tx: Transaction) -> tuple[Any, GasReceipt]:
        """Apply one transaction atomically and append it to the log.

        Precondition failures (sequence, clock) raise without logging. Any
        other failure rolls state back, logs the transaction with a zero
        receipt and re-raises.
        """
        if tx.seq != len(self.log):
            raise BadSequence(f"expected seq {len(self.log)}, got {tx.seq}")
        if tx.timestamp < self.clock:
            raise ClockRegression(f"timestamp {tx.timestamp} is before clock {self.clock}")
        try:
            sender = AccountId(tx.sender)
        except ValueError as exc:
            raise InvalidArgument(str(exc)) from None

        ctx = Context(self, sender, tx.timestamp)
        saved = {name: c.save() for name, c in self.contracts.items()}
        try:
            result = self._dispatch(tx, ctx)
        except AbacChainError as exc:
            for name in list(self.contracts):
                if name in saved:
                    self.contracts[name].load(saved[name])
                else:
                    del self.contracts[name]
            self.log.append(LogEntry(tx, gas.ZERO, None, exc.code))
            self.clock = tx.timestamp
            raise
        self.first_time_flags |= ctx.consumed
        self.clock = tx.timestamp
        self.log.append(LogEntry(tx, ctx.receipt, _jsonable(result), None, tuple(ctx.events)))
        return result, ctx.receipt

    def _dispatch(self, tx: Transaction, ctx: Context) -> Any:
        if tx.target == DEPLOY:
            return self._deploy(tx, ctx)
        if tx.target == CHAIN:
            if tx.abi != "setClock":
                raise UnknownAbi(f"{CHAIN}.{tx.abi}")
            return None
        c = self.contract(tx.target)
        meta = c.abis().get(tx.abi)
        if meta is None or not meta["tx"]:
            raise UnknownAbi(f"{tx.target}.{tx.abi}")
        if meta["admin"] and ctx.sender != c.admin:
            raise Unauthorized(f"{ctx.sender} is not the admin of {tx.target}")
        return _invoke(getattr(c, tx.abi), ctx, tx.args)

    def _deploy(self, tx: Transaction, ctx: Context) -> None:
        name = tx.abi
        if name in self.contracts:
            raise AlreadyDeployed(name)
        kind = name.split(":", 1)[0]
        cls = self.registry.get(kind)
        if cls is None:
            raise UnknownContract(f"no contract kind {kind!r}")
        self.contracts[name] = cls(name, ctx.sender, **_kwargs(tx.args))
        ctx.charge("deploy", gas.deploy_cost(kind, self.deploy_consts))

    def next_tx(self, sender: str, target: str, abi_name: str,
                args: Mapping[str, Any] | None = None, timestamp: int | None = None) -> Transaction:
        return Transaction(len(self.log), str(sender), target, abi_name, dict(args or {}),
                           self.clock if timestamp is None else timestamp)

    def execute(self, sender: str, target: str, abi_name: str,
                args: Mapping[str, Any] | None = None, timestamp: int | None = None) -> tuple[Any, GasReceipt]:
        return self.submit(self.next_tx(sender, target, abi_name, args, timestamp))

    def deploy(self, contract: str, admin: str, timestamp: int | None = None, **extra: Any) -> GasReceipt:
        return self.execute(admin, DEPLOY, contract, extra, timestamp)[1]

    def set_clock(self, now: int, sender: str | None = None) -> None:
        """Advance logical time; logged as a zero-gas transaction so replays see it."""
        if now < self.clock:
            raise ClockRegression(f"{now} is before clock {self.clock}")
        if now == self.clock:
            return
        who = sender or (self.log[-1].tx.sender if self.log else AccountId.from_int(0))
        self.execute(who, CHAIN, "setClock", {"now": now}, timestamp=now)

    # -- persistence -----------------------------------------------------

    def state_json(self) -> dict:
        return {
            "contracts": {
                name: {"kind": c.kind, "admin": c.admin, "extra": c.extra, "storage": c.state_json()}
                for name, c in sorted(self.contracts.items())
            },
            "first_time_flags": sorted(list(m) for m in self.first_time_flags),
            "clock": self.clock,
            "log": [e.to_json() for e in self.log],
        }

    def digest(self) -> str:
        """SHA-256 over the canonical JSON of storage, flags, clock and receipts."""
        return hashlib.sha256(canonical_json(self.state_json()).encode()).hexdigest()

    def dump_log(self) -> str:
        lines = [canonical_json(e.tx.to_json()) for e in self.log]
        body = "".join(line + "\n" for line in lines)
        return body + hashlib.sha256(body.encode()).hexdigest() + "\n"

    def snapshot(self, path: str | os.PathLike) -> None:
        """Write the log atomically (temp file in the same directory, then rename)."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(self.dump_log())
            os.replace(tmp, path)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise

    @staticmethod
    def parse_log(text: str) -> list[Transaction]:
        lines = text.splitlines(keepends=True)
        if not lines:
            return []
        *records, trailer = lines
        body = "".join(records)
        if trailer.strip() != hashlib.sha256(body.encode()).hexdigest():
            raise CorruptLog("log digest mismatch")
        txs = []
        for line in records:
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorruptLog(f"bad record: {exc}") from exc
            if not isinstance(data, dict):
                raise CorruptLog("record is not an object")
            txs.append(Transaction.from_json(data))
        return txs

    def replay(self, txs: Iterable[Transaction]) -> "Chain":
        for tx in txs:
            try:
                self.submit(tx)
            except (BadSequence, ClockRegression) as exc:
                raise CorruptLog(f"record {tx.seq}: {exc}") from exc
            except AbacChainError:
                pass  # failed transactions replay as failures
        return self

    @classmethod
    def load_log(cls, text: str, **kw: Any) -> "Chain":
        return cls(**kw).replay(cls.parse_log(text))

    @classmethod
    def restore(cls, path: str | os.PathLike, **kw: Any) -> "Chain":
        return cls.load_log(Path(path).read_text(encoding="utf-8"), **kw)


def _invoke(method: Callable, ctx: Context, args: Mapping[str, Any] | None) -> Any:
    kwargs = _kwargs(args)
    try:
        inspect.signature(method).bind(ctx, **kwargs)
    except TypeError as exc:
        raise InvalidArgument(f"{method.__name__}: {exc}") from None
    return method(ctx, **kwargs)


def _kwargs(args: Mapping[str, Any] | None) -> dict:
    if args is None:
        return {}
    if not isinstance(args, Mapping):
        raise InvalidArgument("transaction args must be an object")
    return dict(args)


def _jsonable(value: Any) -> Any:
    if hasattr(value, "to_json"):
        return value.to_json()
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value
