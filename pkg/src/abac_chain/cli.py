"""``abac-chain`` command line: contract administration, access requests, cost reports.

State lives in a transaction-log file (``--state`` or ``$ABAC_CHAIN_STATE``).
Each mutating command loads the log, applies exactly one transaction and
writes the log back atomically under a lock file. A denied access request is
a successful command (exit 0); contract errors exit 1 and print
``error=<Name>``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from contextlib import contextmanager
from decimal import Decimal
from pathlib import Path
from typing import Any, Iterator, Sequence

from filelock import FileLock, Timeout

from . import cost_eval, gas
from .core import ACTION_NAMES, AccountId, ActionFlags, AttributeSet, Policy, TimeContext
from .errors import AbacChainError
from .fixtures import ADMIN
from .runtime import Chain, canonical_json

STATE_ENV = "ABAC_CHAIN_STATE"
SENDER_ENV = "ABAC_CHAIN_SENDER"
DEFAULT_STATE = "abac-chain.log"


class CliError(Exception):
    def __init__(self, code: str, message: str = ""):
        super().__init__(message)
        self.code = code


# -- session -------------------------------------------------------------------

@contextmanager
def session(args, mutate: bool) -> Iterator[Chain]:
    path = Path(args.state)
    lock = FileLock(str(path) + ".lock", timeout=0) if mutate and not args.dry_run else None
    try:
        if lock is not None:
            lock.acquire()
    except Timeout:
        raise CliError("StateLocked", f"{path} is being modified by another process") from None
    try:
        chain = Chain.restore(path) if path.exists() else Chain()
        yield chain
        if lock is not None:
            chain.snapshot(path)
    finally:
        if lock is not None:
            lock.release()


def params_from(args) -> gas.CostParams:
    return gas.CostParams(gas_price=Decimal(args.gas_price), usd_per_ether=Decimal(args.usd_per_ether))


def out(key: str, value: Any) -> None:
    print(f"{key}: {value}")


def fmt_usd(value: Decimal, places: int = 5) -> str:
    return str(gas.rounded(value, places))


def transact(args, chain: Chain, target: str, abi_name: str, payload: dict,
             sender: str | None = None, timestamp: int | None = None) -> tuple[Any, gas.GasReceipt]:
    sender = sender or args.sender
    tx = chain.next_tx(sender, target, abi_name, payload, timestamp)
    result, receipt = chain.submit(tx)
    out("tx", tx.seq)
    out("tx_hash", "0x" + hashlib.sha256(canonical_json(tx.to_json()).encode()).hexdigest())
    out("gas", receipt.total)
    out("fee_usd", fmt_usd(gas.usd(receipt.total, params_from(args))))
    if args.dry_run:
        out("dry_run", "true (state not saved)")
    return result, receipt


# -- argument helpers ----------------------------------------------------------

def parse_attrs(items: Sequence[str] | None) -> AttributeSet:
    pairs = []
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep or not name:
            raise CliError("InvalidArgument", f"expected name=value, got {item!r}")
        pairs.append((name, value))
    try:
        return AttributeSet.of(pairs)
    except ValueError as exc:
        raise CliError("InvalidArgument", str(exc)) from None


def policy_from(args) -> Policy:
    if args.file:
        data = json.loads(Path(args.file).read_text(encoding="utf-8"))
        return Policy.from_json(data.get("policy", data))
    try:
        ctx = TimeContext(args.mode, args.start, args.end)
    except ValueError as exc:
        raise CliError("InvalidArgument", str(exc)) from None
    return Policy(parse_attrs(args.sa), parse_attrs(args.oa),
                  ActionFlags(args.read, args.write, args.execute), ctx)


def print_attrs(attrs: AttributeSet) -> None:
    for name, value in attrs:
        out(name, json.dumps(value))


def print_policy(index: int, p: Policy) -> None:
    out("index", index)
    out("sa", json.dumps(p.sa.to_json()))
    out("oa", json.dumps(p.oa.to_json()))
    out("actions", ",".join(p.actions.requested()) or "-")
    out("context", f"mode={p.context.mode} start={p.context.start_time} end={p.context.end_time}")


# -- command handlers ------------------------------------------------------------

PROPOSED = ("ACC", "SAMC", "OAMC", "PMC")


def cmd_deploy(args) -> int:
    params = params_from(args)
    with session(args, mutate=True) as chain:
        print("contract,gas,usd")
        total = 0
        for name in PROPOSED:
            receipt = chain.deploy(name, args.sender)
            total += receipt.total
            print(f"{name},{receipt.total},{fmt_usd(gas.usd(receipt.total, params))}")
        print(f"total,{total},{fmt_usd(gas.usd(total, params))}")
    return 0


_RECORD = {
    "subject": ("SAMC", "subjectAdd", "subjectUpdate", "subjectDelete", "getSubject"),
    "object": ("OAMC", "objectAdd", "objectUpdate", "objectDelete", "getObject"),
}


def cmd_record(args) -> int:
    contract, add, update, delete, get = _RECORD[args.entity]
    if args.op == "get":
        with session(args, mutate=False) as chain:
            print_attrs(chain.call(contract, get, {"id": args.id}))
        return 0
    with session(args, mutate=True) as chain:
        if args.op == "add":
            transact(args, chain, contract, add, {"id": args.id, "attrs": parse_attrs(args.attrs).to_json()})
        elif args.op == "update":
            transact(args, chain, contract, update, {"id": args.id, "name": args.name, "value": args.value})
        else:
            transact(args, chain, contract, delete, {"id": args.id, "name": args.name})
    return 0


def cmd_policy(args) -> int:
    if args.op in ("find", "find-exact", "get"):
        with session(args, mutate=False) as chain:
            if args.op == "get":
                print_policy(args.index, chain.call("PMC", "getPolicy", {"index": args.index}))
                return 0
            q = {"sa": parse_attrs(args.sa).to_json(), "oa": parse_attrs(args.oa).to_json()}
            abi_name = "findMatchPolicy" if args.op == "find" else "findExactMatchPolicy"
            result = chain.call("PMC", abi_name, q)
            count = chain.call("PMC", "policyCount")
            if args.op == "find":
                out("indices", ",".join(map(str, result)) or "-")
            else:
                out("index", "-" if result is None else result)
            out("gas_if_sent", gas.g_fp(count, chain.params))
        return 0
    with session(args, mutate=True) as chain:
        p = policy_from(args)
        if args.op == "add":
            index, _ = transact(args, chain, "PMC", "policyAdd", {"policy": p.to_json()})
            out("index", index)
        elif args.op == "update":
            transact(args, chain, "PMC", "policyUpdate", {"index": args.index, "policy": p.to_json()})
        else:
            index, _ = transact(args, chain, "PMC", "policyDelete", {"policy": p.to_json()})
            out("deleted_index", index)
    return 0


def cmd_access(args) -> int:
    params = params_from(args)
    flags = ActionFlags.of(*args.action)
    with session(args, mutate=True) as chain:
        out("acc", f"ACC (admin {chain.contract('ACC').admin})")
        out("subject", AccountId(args.subject))
        out("object", AccountId(args.object))
        out("action", ",".join(flags.requested()))
        result, receipt = transact(
            args, chain, "ACC", "accessControl",
            {"subject": args.subject, "object": args.object, "actions": flags.to_json()},
            sender=args.sender_explicit or args.subject, timestamp=args.now,
        )
        out("now", chain.clock)
        for label, step_gas in result["steps"]:
            out(f"step.{label}", step_gas)
        out("fee_ether", gas.txfee(receipt.total, params.gas_price))
        out("reason", result["reason"])
        out("result", "true" if result["permitted"] else "false")
    return 0


def cmd_digest(args) -> int:
    with session(args, mutate=False) as chain:
        out("transactions", len(chain.log))
        out("clock", chain.clock)
        out("total_gas", chain.total_gas())
        out("digest", chain.digest())
    return 0


def _write(text: str, dest: str | None) -> None:
    if dest:
        Path(dest).parent.mkdir(parents=True, exist_ok=True)
        Path(dest).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _sharing(value: str):
    if value in ("m", cost_eval.SHARED_ALL):
        return cost_eval.SHARED_ALL
    try:
        p = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("p must be a positive integer or 'm'") from None
    if p < 1:
        raise argparse.ArgumentTypeError("p must be a positive integer or 'm'")
    return p


def cmd_cost(args) -> int:
    params = params_from(args)
    if args.report == "deploy":
        row = cost_eval.deployment_report(params, args.mode).rows[0]
        lines = ["scheme,gas,usd,reference_value",
                 f"acl,{row.acl_gas},{fmt_usd(row.acl_usd)},{cost_eval.REFERENCE_DEPLOY['acl']}",
                 f"proposed,{row.proposed_gas},{fmt_usd(row.proposed_usd)},{cost_eval.REFERENCE_DEPLOY['proposed']}"]
        _write("\n".join(lines) + "\n", args.out)
    elif args.report == "curve":
        cfg = cost_eval.ExperimentConfig(
            m_max=args.m_max, p=args.p, mode=args.mode, search_mode=args.search_mode,
            cost_params=params, include_deployment=not args.no_deployment,
            search_before_insert=args.search_before_insert,
        )
        report = cost_eval.operating_curve(cfg)
        _write(report.to_csv(), args.out)
        if args.figure:
            from .plotting import plot_curves
            plot_curves({args.p: report}, args.figure, report.title)
    elif args.report == "scenario1":
        _write(cost_eval.scenario1(params, args.mode, search_before_insert=args.search_before_insert).to_csv(),
               args.out)
    elif args.report == "scenario2":
        if args.mode != "analytic":
            raise CliError("InvalidArgument", "scenario2 is analytic only")
        _write(cost_eval.scenario2(params).to_csv(), args.out)
    elif args.report == "figures":
        render_figures(args.out_dir, params, args.search_mode)
    return 0


FIGURE_SETS = {
    "cost_small_m": ((1, 2, 3, 4, 5, cost_eval.SHARED_ALL), 10),
    "cost_large_m": ((1, 2, 3, cost_eval.SHARED_ALL), 1000),
    "cost_more_sharing": ((5, 10, 20, 50, cost_eval.SHARED_ALL), 1000),
}


def render_figures(out_dir: str, params: gas.CostParams, search_mode: str) -> None:
    """Write one CSV per curve and one PNG per figure set into ``out_dir``."""
    from .plotting import plot_curves

    base = Path(out_dir)
    base.mkdir(parents=True, exist_ok=True)
    for name, (ps, m_max) in FIGURE_SETS.items():
        curves = cost_eval.sweep(ps, m_max, search_mode=search_mode, cost_params=params)
        for p, report in curves.items():
            tag = "m" if p == cost_eval.SHARED_ALL else p
            (base / f"{name}_p{tag}.csv").write_text(report.to_csv(), encoding="utf-8")
        png = plot_curves(curves, base / f"{name}.png", f"operating cost, m <= {m_max}")
        out("figure", png)


# -- parser ----------------------------------------------------------------------

def _policy_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--file", help="policy JSON (same schema as transaction args)")
    p.add_argument("--sa", nargs="*", metavar="NAME=VALUE", help="subject attributes")
    p.add_argument("--oa", nargs="*", metavar="NAME=VALUE", help="object attributes")
    p.add_argument("--read", action="store_true")
    p.add_argument("--write", action="store_true")
    p.add_argument("--execute", action="store_true")
    p.add_argument("--mode", type=int, default=0, choices=(0, 1))
    p.add_argument("--start", type=int, default=0, help="unixtime")
    p.add_argument("--end", type=int, default=0, help="unixtime")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abac-chain", description=__doc__.splitlines()[0])
    parser.add_argument("--state", default=os.environ.get(STATE_ENV, DEFAULT_STATE),
                        help=f"transaction-log file (env {STATE_ENV})")
    parser.add_argument("--sender", dest="sender_explicit", default=None,
                        help=f"sending account (env {SENDER_ENV}; defaults to the admin account)")
    parser.add_argument("--dry-run", action="store_true", help="evaluate and report gas without saving")
    parser.add_argument("--gas-price", default="8", help="Gwei (default 8)")
    parser.add_argument("--usd-per-ether", default="132.00")
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("deploy", help="deploy ACC, SAMC, OAMC and PMC")
    d.set_defaults(func=cmd_deploy)

    for entity in ("subject", "object"):
        e = sub.add_parser(entity, help=f"{entity} attribute management")
        ops = e.add_subparsers(dest="op", required=True)
        a = ops.add_parser("add")
        a.add_argument("id")
        a.add_argument("attrs", nargs="*", metavar="NAME=VALUE")
        u = ops.add_parser("update")
        u.add_argument("id")
        u.add_argument("name")
        u.add_argument("value")
        x = ops.add_parser("delete")
        x.add_argument("id")
        x.add_argument("name")
        g = ops.add_parser("get")
        g.add_argument("id")
        e.set_defaults(func=cmd_record, entity=entity)

    pol = sub.add_parser("policy", help="policy management and search")
    pops = pol.add_subparsers(dest="op", required=True)
    for op in ("add", "delete"):
        _policy_flags(pops.add_parser(op))
    up = pops.add_parser("update")
    up.add_argument("index", type=int)
    _policy_flags(up)
    for op in ("find", "find-exact"):
        f = pops.add_parser(op)
        f.add_argument("--sa", nargs="*", metavar="NAME=VALUE")
        f.add_argument("--oa", nargs="*", metavar="NAME=VALUE")
    gp = pops.add_parser("get")
    gp.add_argument("index", type=int)
    pol.set_defaults(func=cmd_policy)

    acc = sub.add_parser("access", help="send an access request to the ACC")
    acc.add_argument("--subject", required=True)
    acc.add_argument("--object", required=True)
    acc.add_argument("--action", required=True, action="append", choices=ACTION_NAMES)
    acc.add_argument("--now", type=int, help="unixtime for this request (no regression)")
    acc.set_defaults(func=cmd_access)

    dg = sub.add_parser("digest", help="print the state digest of the log")
    dg.set_defaults(func=cmd_digest)

    cost = sub.add_parser("cost", help="cost reports")
    cost.add_argument("report", choices=("deploy", "curve", "scenario1", "scenario2", "figures"))
    cost.add_argument("--mode", choices=("analytic", "metered"), default="analytic")
    cost.add_argument("--p", type=_sharing, default=1, help="pairs per policy, or 'm' for one shared policy")
    cost.add_argument("--m-max", type=int, default=300)
    cost.add_argument("--search-mode", choices=[m.value for m in gas.SearchMode],
                      default=gas.SearchMode.PER_PAIR.value)
    cost.add_argument("--search-before-insert", action="store_true",
                      help="price each search at the list length it observes before the add")
    cost.add_argument("--no-deployment", action="store_true", help="exclude deployment cost")
    cost.add_argument("--out", help="CSV path (default stdout)")
    cost.add_argument("--figure", help="also render the curve to this image file")
    cost.add_argument("--out-dir", default="figures", help="directory for 'figures'")
    cost.set_defaults(func=cmd_cost)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.sender = args.sender_explicit or os.environ.get(SENDER_ENV) or ADMIN
    try:
        return args.func(args)
    except (AbacChainError, CliError) as exc:
        print(f"error={exc.code}", file=sys.stderr)
        if str(exc):
            print(f"message: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print("error=InvalidArgument", file=sys.stderr)
        print(f"message: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
