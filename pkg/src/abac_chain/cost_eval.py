"""Cost experiments: deployment, operating-cost curves and campus scenarios.

Every report can be produced analytically from :mod:`abac_chain.gas` or, for
deployment and curves, by driving real transactions through a
:class:`~abac_chain.runtime.Chain` and summing receipts ("metered").
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable, Sequence, Union

from . import gas
from .core import AccountId, ActionFlags, AttributeSet, Policy
from .gas import DEFAULT_DEPLOY, DEFAULT_PARAMS, CostParams, DeployConstants, SearchMode
from .runtime import Chain

SHARED_ALL = "all"
METERED_MAX_PAIRS = 1000

ADMIN = AccountId("0x" + "ad" * 20)
CURVE_HEADER = ("m", "proposed_gas", "acl_gas", "proposed_usd", "acl_usd")
SCENARIO_HEADER = ("metric", "gas", "usd", "reference_value")

# published reference values, reported next to ours
REFERENCE_DEPLOY = {"proposed": 4_943_332, "acl": 2_809_093}
REFERENCE_SCENARIO1 = {"acl": 36_701_340, "best": 310_136, "worst": 16_163_226}
REFERENCE_SCENARIO2 = {"acl": 8_257_801_500, "best": 46_520_400, "worst": 113_438_512_500}

CAMPUS_SUBJECTS = 1000
CAMPUS_OBJECTS = 150
CAMPUS_POLICIES = 100
OBJECTS_PER_SUBJECT = 15
LAB_MEMBERS = 10
NEW_LIGHTS = 2
NEW_MEMBERS = 300
# per-entity attribute cost the second scenario's best case is built from
ENTITY_GAS = 155_068

Sharing = Union[int, str]


@dataclass(frozen=True)
class ExperimentConfig:
    m_max: int
    p: Sharing = 1
    mode: str = "analytic"
    search_mode: SearchMode = SearchMode.PER_PAIR
    cost_params: CostParams = DEFAULT_PARAMS
    deploy_consts: DeployConstants = DEFAULT_DEPLOY
    include_deployment: bool = True
    search_before_insert: bool = False

    def __post_init__(self):
        object.__setattr__(self, "search_mode", SearchMode(self.search_mode))
        if self.m_max < 1:
            raise ValueError("m_max must be at least 1")
        if self.p != SHARED_ALL and (not isinstance(self.p, int) or self.p < 1):
            raise ValueError(f"p must be a positive integer or {SHARED_ALL!r}")
        if self.mode not in ("analytic", "metered"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "metered" and self.m_max > METERED_MAX_PAIRS:
            raise ValueError(f"metered runs are limited to {METERED_MAX_PAIRS} pairs")

    def policies_for(self, m: int) -> int:
        """Number of policies n needed by m pairs when p pairs share one."""
        if m == 0:
            return 0
        return 1 if self.p == SHARED_ALL else -(-m // self.p)

    @property
    def label(self) -> str:
        return "p=m" if self.p == SHARED_ALL else f"p={self.p}"


@dataclass(frozen=True)
class CostRow:
    m: int
    proposed_gas: int
    acl_gas: int
    proposed_usd: Decimal
    acl_usd: Decimal


@dataclass
class CostReport:
    rows: list[CostRow] = field(default_factory=list)
    crossovers: list[tuple[str, int]] = field(default_factory=list)
    title: str = ""

    def row(self, m: int) -> CostRow:
        for r in self.rows:
            if r.m == m:
                return r
        raise KeyError(m)

    def first_crossover(self, label: str) -> int | None:
        return next((m for lab, m in self.crossovers if lab == label), None)

    def to_csv(self) -> str:
        buf = io.StringIO()
        if self.title:
            buf.write(f"# {self.title}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for r in self.rows:
            w.writerow((r.m, r.proposed_gas, r.acl_gas, r.proposed_usd, r.acl_usd))
        for label, m in self.crossovers:
            buf.write(f"# crossover {label} m={m}\n")
        return buf.getvalue()


@dataclass(frozen=True)
class ScenarioRow:
    metric: str
    gas: int
    usd: Decimal
    reference_value: int | None = None


@dataclass
class ScenarioReport:
    rows: list[ScenarioRow] = field(default_factory=list)
    title: str = ""

    def __getitem__(self, metric: str) -> ScenarioRow:
        for r in self.rows:
            if r.metric == metric:
                return r
        raise KeyError(metric)

    def to_csv(self) -> str:
        buf = io.StringIO()
        if self.title:
            buf.write(f"# {self.title}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SCENARIO_HEADER)
        for r in self.rows:
            w.writerow((r.metric, r.gas, r.usd, "" if r.reference_value is None else r.reference_value))
        return buf.getvalue()


def _row(m: int, proposed: int, acl: int, params: CostParams) -> CostRow:
    return CostRow(m, proposed, acl, gas.usd(proposed, params), gas.usd(acl, params))


def find_crossovers(rows: Sequence[CostRow]) -> list[tuple[str, int]]:
    """Every m where proposed-above-ACL flips relative to m-1, with its direction."""
    out = []
    for prev, cur in zip(rows, rows[1:]):
        was, now = prev.proposed_gas > prev.acl_gas, cur.proposed_gas > cur.acl_gas
        if was != now:
            out.append(("proposed_above_acl" if now else "proposed_below_acl", cur.m))
    return out


# -- deployment ----------------------------------------------------------------

def _deploy_proposed(chain: Chain) -> int:
    return sum(chain.deploy(kind, ADMIN).total for kind in ("ACC", "SAMC", "OAMC", "PMC"))


def _deploy_acl(chain: Chain) -> int:
    return sum(chain.deploy(kind, ADMIN).total for kind in ("RC", "JC"))


def deployment_report(params: CostParams = DEFAULT_PARAMS, mode: str = "analytic",
                      deploy_consts: DeployConstants = DEFAULT_DEPLOY) -> CostReport:
    """Deployment cost of both schemes as a single m=0 row."""
    if mode == "analytic":
        proposed, acl = deploy_consts.proposed_total, deploy_consts.acl_total
    elif mode == "metered":
        proposed = _deploy_proposed(Chain(params, deploy_consts))
        acl = _deploy_acl(Chain(params, deploy_consts))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return CostReport([_row(0, proposed, acl, params)], [], title=f"deployment ({mode})")


# -- operating cost curves ---------------------------------------------------

def operating_curve(cfg: ExperimentConfig) -> CostReport:
    rows = _metered_rows(cfg) if cfg.mode == "metered" else _analytic_rows(cfg)
    title = f"operating cost {cfg.label} search={cfg.search_mode.value} mode={cfg.mode}"
    return CostReport(rows, find_crossovers(rows), title)


def _analytic_rows(cfg: ExperimentConfig) -> list[CostRow]:
    params, consts = cfg.cost_params, cfg.deploy_consts
    base_p = consts.proposed_total if cfg.include_deployment else 0
    base_a = consts.acl_total if cfg.include_deployment else 0
    rows = []
    for m in range(1, cfg.m_max + 1):
        proposed = base_p + gas.g_ap(m, cfg.policies_for(m), params, cfg.search_mode,
                                     search_before_insert=cfg.search_before_insert)
        rows.append(_row(m, proposed, base_a + gas.g_ap_acl(m, consts), params))
    return rows


def pair_accounts(j: int) -> tuple[AccountId, AccountId]:
    """Deterministic subject and object ids for the j-th pair of a metered run."""
    return AccountId.from_int(0x5 << 152 | j), AccountId.from_int(0xB << 152 | j)


def group_policy(g: int) -> Policy:
    tag = AttributeSet.of(Grp=f"g{g}")
    return Policy(tag, tag, ActionFlags(read=True))


def _metered_rows(cfg: ExperimentConfig) -> list[CostRow]:
    """Onboard pairs one by one on real chains, reading cumulative gas after each.

    Pair j belongs to policy group ceil(j/p) (or group 1 when all share), so
    after m pairs exactly ``policies_for(m)`` policies exist. In per-policy
    mode a search precedes only the additions; in per-pair mode every pair is
    searched and a policy is added when the search comes back empty.
    """
    params, consts = cfg.cost_params, cfg.deploy_consts
    proposed, acl = Chain(params, consts), Chain(params, consts)
    _deploy_proposed(proposed)
    _deploy_acl(acl)
    base_p = 0 if cfg.include_deployment else proposed.total_gas()
    base_a = 0 if cfg.include_deployment else acl.total_gas()

    rows = []
    for j in range(1, cfg.m_max + 1):
        g = 1 if cfg.p == SHARED_ALL else -(-j // cfg.p)
        tag = AttributeSet.of(Grp=f"g{g}")
        sid, oid = pair_accounts(j)
        proposed.execute(ADMIN, "SAMC", "subjectAdd", {"id": sid, "attrs": tag.to_json()})
        proposed.execute(ADMIN, "OAMC", "objectAdd", {"id": oid, "attrs": tag.to_json()})
        is_new = g > proposed.call("PMC", "policyCount")
        if cfg.search_mode is SearchMode.PER_PAIR or is_new:
            found, _ = proposed.execute(ADMIN, "PMC", "findMatchPolicy",
                                        {"sa": tag.to_json(), "oa": tag.to_json()})
            is_new = not found
        if is_new:
            proposed.execute(ADMIN, "PMC", "policyAdd", {"policy": group_policy(g).to_json()})

        label = f"ACLACC:{j}"
        acl.deploy(label, ADMIN, subject=sid, object=oid)
        acl.execute(ADMIN, label, "policyAdd", {"action": "read", "permission": True})
        rows.append(_row(j, proposed.total_gas() - base_p, acl.total_gas() - base_a, params))
    return rows


# -- scenarios -----------------------------------------------------------------

def _policy_adds(count: int, params: CostParams, existing: int,
                 search_before_insert: bool = False) -> int:
    """Gas for ``count`` searched-then-added policies on a list of ``existing`` length."""
    searches = gas.search_lengths(count, count, SearchMode.PER_POLICY, existing=existing,
                                  search_before_insert=search_before_insert)
    first = existing == 0 and count > 0
    return (count * gas.g_pa(params) + (gas.g_pa(params, True) - gas.g_pa(params) if first else 0)
            + sum(gas.g_fp(l, params) for l in searches))


def _srow(metric: str, value: int, params: CostParams, reference: int | None = None) -> ScenarioRow:
    return ScenarioRow(metric, value, gas.usd(value, params), reference)


def scenario1(params: CostParams = DEFAULT_PARAMS, mode: str = "analytic",
              deploy_consts: DeployConstants = DEFAULT_DEPLOY,
              search_before_insert: bool = False) -> ScenarioReport:
    """Two new lights in a lab of ten members.

    Best case only adds the two object records. Worst case also adds one
    policy per member-light pair, priced on a list starting empty and on the
    campus list of 100 existing policies.
    """
    pairs = LAB_MEMBERS * NEW_LIGHTS
    best = NEW_LIGHTS * gas.g_oa(params)
    if mode == "metered":
        return _scenario1_metered(params, deploy_consts)
    if mode != "analytic":
        raise ValueError(f"unknown mode {mode!r}")
    rows = [
        _srow("acl", gas.g_ap_acl(pairs, deploy_consts), params, REFERENCE_SCENARIO1["acl"]),
        _srow("proposed_best", best, params, REFERENCE_SCENARIO1["best"]),
        _srow("proposed_worst_empty_list",
              best + _policy_adds(pairs, params, 0, search_before_insert),
              params, REFERENCE_SCENARIO1["worst"]),
        _srow("proposed_worst_existing_list",
              best + _policy_adds(pairs, params, CAMPUS_POLICIES, search_before_insert),
              params, REFERENCE_SCENARIO1["worst"]),
    ]
    return ScenarioReport(rows, "scenario 1: two new lights, ten lab members (analytic)")


def campus_chain(params: CostParams = DEFAULT_PARAMS, deploy_consts: DeployConstants = DEFAULT_DEPLOY,
                 subjects: int = LAB_MEMBERS, policies: int = CAMPUS_POLICIES) -> Chain:
    """A deployed campus with ``subjects`` lab members and ``policies`` unrelated policies."""
    chain = Chain(params, deploy_consts)
    _deploy_proposed(chain)
    for k in range(policies):
        tag = AttributeSet.of(Grp=f"c{k}")
        chain.execute(ADMIN, "PMC", "policyAdd", {"policy": Policy(tag, tag, ActionFlags(read=True)).to_json()})
    for i in range(subjects):
        chain.execute(ADMIN, "SAMC", "subjectAdd", {
            "id": AccountId.from_int(0x3 << 156 | i),
            "attrs": AttributeSet.of(Lab="LSM", Id=f"m{i}").to_json(),
        })
    return chain


def _scenario1_metered(params: CostParams, consts: DeployConstants) -> ScenarioReport:
    chain = campus_chain(params, consts)
    start = chain.total_gas()
    lights = [AccountId.from_int(0x1 << 156 | k) for k in range(NEW_LIGHTS)]
    for k, light in enumerate(lights):
        chain.execute(ADMIN, "OAMC", "objectAdd",
                      {"id": light, "attrs": AttributeSet.of(Lab="LSM", Id=f"l{k}").to_json()})
    best = chain.total_gas() - start
    for i in range(LAB_MEMBERS):
        for k in range(NEW_LIGHTS):
            sa, oa = AttributeSet.of(Id=f"m{i}"), AttributeSet.of(Id=f"l{k}")
            chain.execute(ADMIN, "PMC", "findMatchPolicy", {"sa": sa.to_json(), "oa": oa.to_json()})
            chain.execute(ADMIN, "PMC", "policyAdd",
                          {"policy": Policy(sa, oa, ActionFlags(read=True, write=True)).to_json()})
    worst = chain.total_gas() - start

    acl = Chain(params, consts)
    _deploy_acl(acl)
    acl_start = acl.total_gas()
    for i in range(LAB_MEMBERS):
        for k, light in enumerate(lights):
            label = f"ACLACC:{i}:{k}"
            acl.deploy(label, ADMIN, subject=AccountId.from_int(0x3 << 156 | i), object=light)
            acl.execute(ADMIN, label, "policyAdd", {"action": "read", "permission": True})
    rows = [
        _srow("acl", acl.total_gas() - acl_start, params, REFERENCE_SCENARIO1["acl"]),
        _srow("proposed_best", best, params, REFERENCE_SCENARIO1["best"]),
        _srow("proposed_worst_existing_list", worst, params, REFERENCE_SCENARIO1["worst"]),
    ]
    return ScenarioReport(rows, "scenario 1: two new lights, ten lab members (metered)")


def scenario2(params: CostParams = DEFAULT_PARAMS,
              deploy_consts: DeployConstants = DEFAULT_DEPLOY) -> ScenarioReport:
    """300 new members join; analytic only (the worst case is tens of thousands of policies).

    The pair count is computed both as new subjects times all objects and as
    new subjects times the 15 objects each subject accesses.
    """
    best_entity = NEW_MEMBERS * ENTITY_GAS
    best_strict = NEW_MEMBERS * gas.g_sa(params)
    readings = {
        "all_objects": NEW_MEMBERS * CAMPUS_OBJECTS,
        "accessed_objects": NEW_MEMBERS * OBJECTS_PER_SUBJECT,
    }
    rows = [
        _srow(f"acl_{name}", gas.g_ap_acl(pairs, deploy_consts), params, REFERENCE_SCENARIO2["acl"])
        for name, pairs in readings.items()
    ]
    rows.append(_srow("proposed_best", best_entity, params, REFERENCE_SCENARIO2["best"]))
    rows.append(_srow("proposed_best_strict", best_strict, params, REFERENCE_SCENARIO2["best"]))
    for name, pairs in readings.items():
        for start, existing in (("empty_list", 0), ("existing_list", CAMPUS_POLICIES)):
            rows.append(_srow(f"proposed_worst_{name}_{start}",
                              best_strict + _policy_adds(pairs, params, existing),
                              params, REFERENCE_SCENARIO2["worst"]))
    return ScenarioReport(rows, "scenario 2: 300 new members (analytic)")


def sweep(ps: Iterable[Sharing], m_max: int, **kw) -> dict[Sharing, CostReport]:
    """One analytic curve per sharing factor."""
    return {p: operating_curve(ExperimentConfig(m_max=m_max, p=p, **kw)) for p in ps}
