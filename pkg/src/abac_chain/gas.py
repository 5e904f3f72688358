"""Integer-exact gas formulas for every ABI plus fee conversion.

The same functions meter transactions inside the runtime and serve as
standalone calculators for the cost experiments. All gas arithmetic is on
Python ints; fees are :class:`~decimal.Decimal` so reported values carry no
binary floating-point drift.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Mapping

from .errors import UnsupportedBound

# measured code-cost constants (A_s = A_o = 6)
SA_CODE_AT_6 = 151_250
OA_CODE_AT_6 = 151_228
CALIBRATED_ATTRS = 6

CHAR_GAS = 64
SLOT_GAS = 15_000

SU_CODE = 61_250
OU_CODE = 61_228
SD_GAS = 26_786
OD_GAS = 26_808

PA_CODE = 213_803
PU_CODE_INDEX0 = 194_337
PU_CODE = 194_401
PD_GAS_INDEX0 = 51_529
PD_GAS = 51_561

FP_CODE = 57_495
FP_PER_ATTR = 4_000
FP_PER_POLICY = 10_518

GS_CODE = 59_467
GO_CODE = 59_201
GP_FOUND = 53_215
GP_MISSING = 46_780
AC_FOUND = 26_932
AC_MISSING = 26_640

WEI_PER_GWEI = Decimal("1e-9")


@dataclass(frozen=True)
class GasReceipt:
    code_cost: int = 0
    storage_cost: int = 0
    init_cost: int = 0

    def __post_init__(self):
        if min(self.code_cost, self.storage_cost, self.init_cost) < 0:
            raise ValueError("gas components must be non-negative")

    @property
    def total(self) -> int:
        return self.code_cost + self.storage_cost + self.init_cost

    def __add__(self, other: "GasReceipt") -> "GasReceipt":
        return GasReceipt(
            self.code_cost + other.code_cost,
            self.storage_cost + other.storage_cost,
            self.init_cost + other.init_cost,
        )

    def to_json(self) -> dict:
        return {
            "code_cost": self.code_cost,
            "storage_cost": self.storage_cost,
            "init_cost": self.init_cost,
            "total": self.total,
        }


ZERO = GasReceipt()


@dataclass(frozen=True)
class CostParams:
    """Attribute bounds, gas price and exchange rate.

    ``sa_code``/``oa_code`` are the code cost of adding a full subject/object
    record. They are only known for 6 attributes; other bounds need them
    supplied explicitly.
    """

    a_s: int = 6
    a_o: int = 6
    c_s: int = 10
    c_o: int = 10
    gas_price: Decimal = Decimal(8)  # Gwei
    usd_per_ether: Decimal = Decimal("132.00")
    sa_code: int | None = None
    oa_code: int | None = None

    def __post_init__(self):
        for name in ("a_s", "a_o", "c_s", "c_o"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        object.__setattr__(self, "gas_price", Decimal(self.gas_price))
        object.__setattr__(self, "usd_per_ether", Decimal(self.usd_per_ether))
        if self.gas_price < 0 or self.usd_per_ether < 0:
            raise ValueError("gas_price and usd_per_ether must be non-negative")

    @property
    def policy_chars(self) -> int:
        """Maximum number of characters in one policy, A_s*C_s + A_o*C_o."""
        return self.a_s * self.c_s + self.a_o * self.c_o

    @property
    def policy_attrs(self) -> int:
        return self.a_s + self.a_o


DEFAULT_PARAMS = CostParams()


@dataclass(frozen=True)
class DeployConstants:
    """Deployment gas per contract kind.

    Only the scheme totals were measured; the per-contract split is an
    apportionment that sums to them (override freely).
    """

    proposed: Mapping[str, int] = field(default_factory=lambda: {
        "ACC": 1_235_833, "SAMC": 1_235_833, "OAMC": 1_235_833, "PMC": 1_235_833,
    })
    acl: Mapping[str, int] = field(default_factory=lambda: {"RC": 1_404_547, "JC": 1_404_546})
    acl_per_pair_acc: int = 1_706_290
    acl_per_pair_policy: int = 238_777

    @property
    def proposed_total(self) -> int:
        return sum(self.proposed.values())

    @property
    def acl_total(self) -> int:
        return sum(self.acl.values())

    @property
    def acl_per_pair(self) -> int:
        return self.acl_per_pair_acc + self.acl_per_pair_policy

    def for_contract(self, kind: str) -> int:
        if kind in self.proposed:
            return self.proposed[kind]
        if kind in self.acl:
            return self.acl[kind]
        if kind == "ACLACC":
            return self.acl_per_pair_acc
        raise KeyError(kind)


DEFAULT_DEPLOY = DeployConstants()


class SearchMode(str, enum.Enum):
    PER_POLICY = "per-policy"  # one search before each added policy
    PER_PAIR = "per-pair"      # one search for every subject-object pair


# -- fees ---------------------------------------------------------------------

def txfee(gas: int, gas_price: Decimal | int | str = DEFAULT_PARAMS.gas_price) -> Decimal:
    """Fee in Ether: gas * gasPrice[Gwei] * 1e-9, exact."""
    if gas < 0:
        raise ValueError("gas must be non-negative")
    return Decimal(gas) * Decimal(gas_price) * WEI_PER_GWEI


def usd(gas: int, params: CostParams = DEFAULT_PARAMS) -> Decimal:
    return txfee(gas, params.gas_price) * params.usd_per_ether


def rounded(value: Decimal, places: int) -> Decimal:
    return value.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP)


# -- attribute management -----------------------------------------------------

def _record_code(given: int | None, bound: int, calibrated: int, what: str) -> int:
    if given is not None:
        return given
    if bound != CALIBRATED_ATTRS:
        raise UnsupportedBound(
            f"{what} code cost is only calibrated for {CALIBRATED_ATTRS} attributes; "
            f"supply a calibration constant for {bound}"
        )
    return calibrated


def sa_cost(params: CostParams = DEFAULT_PARAMS) -> GasReceipt:
    code = _record_code(params.sa_code, params.a_s, SA_CODE_AT_6, "subjectAdd")
    return GasReceipt(code, CHAR_GAS * params.a_s * params.c_s)


def oa_cost(params: CostParams = DEFAULT_PARAMS) -> GasReceipt:
    code = _record_code(params.oa_code, params.a_o, OA_CODE_AT_6, "objectAdd")
    return GasReceipt(code, CHAR_GAS * params.a_o * params.c_o)


def su_cost(params: CostParams = DEFAULT_PARAMS, chars: int | None = None) -> GasReceipt:
    """Subject attribute rewrite; ``chars`` defaults to the bound C_s."""
    return GasReceipt(SU_CODE, CHAR_GAS * (params.c_s if chars is None else chars))


def ou_cost(params: CostParams = DEFAULT_PARAMS, chars: int | None = None) -> GasReceipt:
    return GasReceipt(OU_CODE, CHAR_GAS * (params.c_o if chars is None else chars))


def sd_cost() -> GasReceipt:
    return GasReceipt(SD_GAS)


def od_cost() -> GasReceipt:
    return GasReceipt(OD_GAS)


def g_sa(params: CostParams = DEFAULT_PARAMS) -> int:
    return sa_cost(params).total


def g_oa(params: CostParams = DEFAULT_PARAMS) -> int:
    return oa_cost(params).total


def g_su(params: CostParams = DEFAULT_PARAMS, chars: int | None = None) -> int:
    return su_cost(params, chars).total


def g_ou(params: CostParams = DEFAULT_PARAMS, chars: int | None = None) -> int:
    return ou_cost(params, chars).total


def g_sd() -> int:
    return SD_GAS


def g_od() -> int:
    return OD_GAS


# -- policy management --------------------------------------------------------

def pa_cost(params: CostParams = DEFAULT_PARAMS, first_time: bool = False) -> GasReceipt:
    storage = SLOT_GAS * params.policy_attrs + CHAR_GAS * params.policy_chars
    init = SLOT_GAS * (params.policy_attrs + 1) if first_time else 0
    return GasReceipt(PA_CODE, storage, init)


def pu_cost(index: int, params: CostParams = DEFAULT_PARAMS) -> GasReceipt:
    if index < 0:
        raise ValueError("index must be non-negative")
    return GasReceipt(PU_CODE_INDEX0 if index == 0 else PU_CODE, CHAR_GAS * params.policy_chars)


def pd_cost(index: int) -> GasReceipt:
    if index < 0:
        raise ValueError("index must be non-negative")
    return GasReceipt(PD_GAS_INDEX0 if index == 0 else PD_GAS)


def fp_cost(l: int, params: CostParams = DEFAULT_PARAMS) -> GasReceipt:
    """Policy search over a list of length ``l`` (all of it is code cost)."""
    return GasReceipt(g_fp(l, params))


def g_pa(params: CostParams = DEFAULT_PARAMS, first_time: bool = False) -> int:
    return pa_cost(params, first_time).total


def g_pu(index: int, params: CostParams = DEFAULT_PARAMS) -> int:
    return pu_cost(index, params).total


def g_pd(index: int) -> int:
    return pd_cost(index).total


def g_fp(l: int, params: CostParams = DEFAULT_PARAMS) -> int:
    if l < 0:
        raise ValueError("list length must be non-negative")
    return FP_CODE + FP_PER_ATTR * params.policy_attrs + FP_PER_POLICY * l + CHAR_GAS * params.policy_chars


# -- access control flow -----------------------------------------------------

def gs_cost(params: CostParams = DEFAULT_PARAMS, first_time: bool = False) -> GasReceipt:
    return GasReceipt(GS_CODE, 0, SLOT_GAS * params.a_s if first_time else 0)


def go_cost(params: CostParams = DEFAULT_PARAMS, first_time: bool = False) -> GasReceipt:
    return GasReceipt(GO_CODE, 0, SLOT_GAS * params.a_o if first_time else 0)


def gp_cost(found: bool) -> GasReceipt:
    return GasReceipt(GP_FOUND if found else GP_MISSING)


def ac_cost(found: bool) -> GasReceipt:
    return GasReceipt(AC_FOUND if found else AC_MISSING)


def g_gs(params: CostParams = DEFAULT_PARAMS, first_time: bool = False) -> int:
    return gs_cost(params, first_time).total


def g_go(params: CostParams = DEFAULT_PARAMS, first_time: bool = False) -> int:
    return go_cost(params, first_time).total


def g_gp(found: bool) -> int:
    return gp_cost(found).total


def g_ac(found: bool) -> int:
    return ac_cost(found).total


def deploy_cost(kind: str, consts: DeployConstants = DEFAULT_DEPLOY) -> GasReceipt:
    return GasReceipt(consts.for_contract(kind))


# -- aggregates ----------------------------------------------------------------

def g_add_n_policies(n: int, params: CostParams = DEFAULT_PARAMS,
                     first_time: bool = False) -> tuple[int, int]:
    """Cost of adding ``n`` policies to an empty list, as (summation, closed form).

    Both sides apply the first-time indicator to each of the n additions, the
    way the upper bound is written; the metered, charge-once figure is
    :func:`g_ap`.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    literal = n * g_pa(params, first_time) + sum(g_fp(k, params) for k in range(1, n + 1))
    per_policy = (
        276_557
        + 19_000 * params.policy_attrs
        + 128 * params.policy_chars
        + SLOT_GAS * (params.policy_attrs + 1) * int(first_time)
    )
    closed = 5_259 * n * n + per_policy * n
    return literal, closed


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def search_lengths(m: int, n: int, mode: SearchMode | str, *, existing: int = 0,
                   search_before_insert: bool = False) -> list[int]:
    """Policy-list length seen by each search while ``n`` policies serve ``m`` pairs.

    By default the k-th search is priced at the list length including the
    policy being added (k). With ``search_before_insert`` each search is priced
    at the length it actually observes in a search-then-add sequence.
    """
    mode = SearchMode(mode)
    shift = 1 if search_before_insert else 0
    if mode is SearchMode.PER_POLICY:
        return [existing + k - shift for k in range(1, n + 1)]
    if m == 0:
        return []
    if search_before_insert:
        return [existing + _ceil_div((j - 1) * n, m) for j in range(1, m + 1)]
    return [existing + _ceil_div(j * n, m) for j in range(1, m + 1)]


def g_ap(m: int, n: int, params: CostParams = DEFAULT_PARAMS,
         search_mode: SearchMode | str = SearchMode.PER_POLICY, *, first_time: bool = True,
         existing: int = 0, search_before_insert: bool = False) -> int:
    """Cost of onboarding ``m`` subject-object pairs that need ``n`` new policies.

    Attribute records for every pair, ``n`` policy additions (the first-time
    surcharge at most once) and the policy searches given by ``search_mode``.
    """
    if m < 0 or n < 0 or n > m:
        raise ValueError("need 0 <= n <= m")
    attrs = m * (g_sa(params) + g_oa(params))
    adds = n * g_pa(params) + (g_pa(params, True) - g_pa(params) if first_time and n else 0)
    searches = sum(g_fp(l, params) for l in search_lengths(
        m, n, search_mode, existing=existing, search_before_insert=search_before_insert))
    return attrs + adds + searches


def g_ap_acl(m: int, consts: DeployConstants = DEFAULT_DEPLOY) -> int:
    """ACL baseline: one access-control contract plus one policy per pair."""
    if m < 0:
        raise ValueError("m must be non-negative")
    return m * consts.acl_per_pair
