from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from ..config_loader import AppConfig
from ..core.distributions import TypeDistribution
from ..core.spec_parser import parse_distribution
from ..core.value_function import ValueMode, linear, zero
from ..errors import InapplicableConditionError, PosGoodsError, SizeGuardError
from ..feasibility.allocation import StatusAllocation, curve_allocation, full_separation, total_pooling
from ..feasibility.majorization import check_weak_majorization
from ..feasibility.menus import induced_status, random_menu
from ..mechanisms.exclusion import exclusion_gain, optimal_exclusion, single_good_optimum
from ..mechanisms.objectives import consumer_surplus, revenue
from ..mechanisms.welfare import cs_max_budget_balanced, cs_max_nonneg_price, social_optimum
from ..no_exclusion.conditions import chain_property
from ..no_exclusion.optimum import revmax_no_exclusion, two_level_optimum
from ..oracle.discrete import assignment_from_menu, discrete_objectives, discretize_mechanism, ic_check, status_from_assignment
from ..oracle.economy import discretize
from ..oracle.search import best_menu_search, suffering_lowering_search
from ..utils.hash_utils import config_fingerprint
from ..utils.logger import get_logger

log = get_logger(__name__)


@dataclass
class CheckResult:
    name: str
    status: str            # pass / fail / skipped
    margin: Optional[float] = None
    detail: Dict[str, Any] = field(default_factory=dict)
    reason: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "status": self.status, "margin": self.margin, "detail": self.detail, "reason": self.reason}


@dataclass
class VerifyReport:
    checks: List[CheckResult]
    inject_fault: bool
    config_fingerprint: str

    @property
    def passed(self) -> bool:
        return all(c.status != "fail" for c in self.checks)

    @property
    def counts(self) -> Dict[str, int]:
        out = {"pass": 0, "fail": 0, "skipped": 0}
        for c in self.checks:
            out[c.status] = out.get(c.status, 0) + 1
        return out

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "counts": self.counts,
            "inject_fault": self.inject_fault,
            "config_fingerprint": self.config_fingerprint,
            "checks": [c.to_dict() for c in self.checks],
        }


def _verdict(name: str, ok: bool, margin: float, **detail) -> CheckResult:
    return CheckResult(name=name, status="pass" if ok else "fail", margin=float(margin), detail=detail)


class VerifySuite:
    """
    验证电池：可行性、离散 IC、oracle 一致性、细化链单调性、半收入保证。
    SizeGuardError 与不适用的前提记为 skipped，不算失败。
    """

    def __init__(self, config: AppConfig, inject_fault: bool = False):
        self.config = config
        self.vcfg = config.verify
        self.inject_fault = inject_fault
        self.tol = config.numerics.feasibility_tol
        self._dists: Dict[str, TypeDistribution] = {}

    def dist(self, spec: str) -> TypeDistribution:
        if spec not in self._dists:
            self._dists[spec] = parse_distribution(spec)
        return self._dists[spec]

    def _rng(self) -> np.random.Generator:
        return np.random.default_rng(self.vcfg.seed)

    # ---------- 运行 ----------

    def run(self) -> VerifyReport:
        checks: List[CheckResult] = []
        for spec in self.vcfg.battery:
            checks.append(self._guarded(f"feasibility[{spec}]", lambda s=spec: self.check_feasibility(s)))
            checks.append(self._guarded(f"ic[{spec}]", lambda s=spec: self.check_ic(s)))
            checks.append(self._guarded(f"half_revenue[{spec}]", lambda s=spec: self.check_half_revenue(s)))
        for spec in self.vcfg.oracle_dists:
            checks.append(self._guarded(f"oracle_agreement[{spec}]", lambda s=spec: self.check_oracle_agreement(s)))
        checks.append(self._guarded("status_assignment[uniform(0,1)]", lambda: self.check_status_assignment("uniform(0,1)")))
        checks.append(self._guarded("exhaustive[uniform(0,1)]", lambda: self.check_exhaustive("uniform(0,1)")))
        checks.append(self._guarded("exclusion_gain_oracle[uniform(0,1)]", lambda: self.check_exclusion_gain("uniform(0,1)")))
        checks.append(self._guarded("chains[uniform(0,1)]", lambda: self.check_chains("uniform(0,1)", ifr=True)))
        checks.append(self._guarded("chains[pareto(2,1)]", lambda: self.check_chains("pareto(2,1)", ifr=False)))
        for spec in ("uniform(0,1)", "uniform(1,2)", "power(2)"):
            checks.append(self._guarded(f"budget_balance[{spec}]", lambda s=spec: self.check_budget_balance(s)))
        checks.append(self._guarded("levels_monotone[uniform(0,1)]", lambda: self.check_discrete_levels("uniform(0,1)")))
        checks.append(self._guarded("suffering_lowering[uniform(0,1)]", lambda: self.check_suffering_lowering("uniform(0,1)")))

        report = VerifyReport(
            checks=checks,
            inject_fault=self.inject_fault,
            config_fingerprint=config_fingerprint(self.config),
        )
        c = report.counts
        log.info(f"verify: {c['pass']} 通过，{c['fail']} 失败，{c['skipped']} 跳过")
        return report

    def _guarded(self, name: str, fn: Callable[[], CheckResult]) -> CheckResult:
        try:
            res = fn()
        except SizeGuardError as e:
            return CheckResult(name=name, status="skipped", reason=f"size guard: {e}")
        except InapplicableConditionError as e:
            return CheckResult(name=name, status="skipped", reason=f"inapplicable: {e}")
        except PosGoodsError as e:
            log.warning(f"{name}: {type(e).__name__}: {e}")
            return CheckResult(name=name, status="fail", reason=f"{type(e).__name__}: {e}")
        res.name = name
        if res.status == "fail":
            log.warning(f"{name} 失败，margin={res.margin}")
        return res

    # ---------- 可行性 ----------

    def _constructed_allocations(self, dist: TypeDistribution) -> Dict[str, StatusAllocation]:
        rng = self._rng()
        allocs = {
            "revenue_optimal": optimal_exclusion(dist).allocation,
            "revmax_no_exclusion": revmax_no_exclusion(dist).alloc,
            "full_separation": full_separation(dist),
            "total_pooling": total_pooling(dist),
        }
        for i in range(5):
            allocs[f"random_menu_{i}"] = induced_status(random_menu(dist, rng), dist)
        return allocs

    def _with_fault(self, alloc: StatusAllocation) -> StatusAllocation:
        shift = self.vcfg.fault_shift
        return curve_allocation(
            alloc.dist,
            lambda th, a=alloc: np.minimum(np.asarray(a(th), dtype=float) + shift, 1.0),
            cutoff=alloc.exclusion_cutoff,
            label=f"{alloc.label}+fault",
        )

    def check_feasibility(self, spec: str) -> CheckResult:
        dist = self.dist(spec)
        violations: Dict[str, float] = {}
        for name, alloc in self._constructed_allocations(dist).items():
            if self.inject_fault:
                alloc = self._with_fault(alloc)
            violations[name] = check_weak_majorization(alloc, tol=self.tol).worst_violation
        worst = max(violations.values())
        return _verdict("", worst <= self.tol, -worst, violations=violations, fault=self.inject_fault)

    # ---------- IC ----------

    def check_ic(self, spec: str) -> CheckResult:
        dist = self.dist(spec)
        econ = discretize(dist, zero(), self.vcfg.ic_K)
        mechs = {
            "revenue_optimal": optimal_exclusion(dist).mechanism,
            "revmax_no_exclusion": revmax_no_exclusion(dist),
            "cs_max_budget_balanced": cs_max_budget_balanced(dist),
            "social_optimum": social_optimum(dist),
        }
        try:
            mechs["cs_max_nonneg_price"] = cs_max_nonneg_price(dist)
        except InapplicableConditionError as e:
            log.debug(f"{spec}: 跳过 cs_max_nonneg_price（{e}）")
        tol = self.config.numerics.ic_tol
        deviations = {name: ic_check(discretize_mechanism(m, econ), econ, tol).worst_deviation for name, m in mechs.items()}
        worst = max(deviations.values())
        return _verdict("", worst <= tol, tol - worst, deviations=deviations, K=self.vcfg.ic_K)

    # ---------- 半收入保证 ----------

    def check_half_revenue(self, spec: str) -> CheckResult:
        dist = self.dist(spec)
        excl = optimal_exclusion(dist)
        single = single_good_optimum(dist, max_revenue=excl.revenue)
        two = two_level_optimum(dist)
        low = min(single.ratio, two.ratio)
        return _verdict("", low >= 0.5 - 1e-9, low - 0.5, single_good_ratio=single.ratio, two_level_ratio=two.ratio)

    # ---------- oracle 一致性 ----------

    def check_oracle_agreement(self, spec: str) -> CheckResult:
        dist = self.dist(spec)
        econ = discretize(dist, zero(), self.vcfg.oracle_K)
        excl = optimal_exclusion(dist)
        mechs = {"revenue_optimal": (excl.mechanism, excl.revenue), "revmax_no_exclusion": (revmax_no_exclusion(dist), None)}
        diffs: Dict[str, float] = {}
        for name, (mech, rev) in mechs.items():
            U0 = mech.boundary_utility
            analytic_rev = rev if rev is not None else revenue(mech.alloc, v=mech.v, U0=U0, check=False)
            analytic_cs = consumer_surplus(mech.alloc, v=mech.v, U0=U0, check=False)
            vals = discrete_objectives(discretize_mechanism(mech, econ), econ)
            diffs[f"{name}.revenue"] = abs(vals.revenue - analytic_rev)
            diffs[f"{name}.consumer_surplus"] = abs(vals.consumer_surplus - analytic_cs)
        worst = max(diffs.values())
        tol = self.vcfg.oracle_tol
        return _verdict("", worst <= tol, tol - worst, diffs=diffs, K=self.vcfg.oracle_K)

    def check_status_assignment(self, spec: str) -> CheckResult:
        dist = self.dist(spec)
        K = self.vcfg.oracle_K
        econ = discretize(dist, zero(), K)
        rng = self._rng()
        worst = 0.0
        for _ in range(10):
            menu = random_menu(dist, rng, cutoff=float(dist.quantile(rng.uniform(0.0, 0.5))))
            alloc = induced_status(menu, dist)
            direct = status_from_assignment(assignment_from_menu(menu, econ), econ, alloc.gamma)
            worst = max(worst, float(np.max(np.abs(direct - np.asarray(alloc(econ.types))))))
        bound = 1.0 / (2 * K) + 1e-12
        return _verdict("", worst <= bound, bound - worst, worst_gap=worst, K=K)

    def check_exhaustive(self, spec: str) -> CheckResult:
        dist = self.dist(spec)
        K, m = self.vcfg.exhaustive_K, self.vcfg.exhaustive_levels
        econ = discretize(dist, zero(), K)
        limit = self.config.oracle.exhaustive_max_combinations
        rev = best_menu_search(econ, "revenue", max_levels=m, method="exhaustive", max_combinations=limit)
        rev_dp = best_menu_search(econ, "revenue", max_levels=m, method="dp")
        cs = best_menu_search(econ, "cs", max_levels=m, allow_exclusion=False, method="exhaustive", max_combinations=limit)
        analytic_rev = optimal_exclusion(dist).revenue
        cs_mech = cs_max_nonneg_price(dist)
        analytic_cs = consumer_surplus(cs_mech.alloc, v=cs_mech.v, U0=cs_mech.boundary_utility, check=False)
        diffs = {
            "revenue": abs(rev.value - analytic_rev),
            "consumer_surplus": abs(cs.value - analytic_cs),
        }
        tol = self.vcfg.exhaustive_tol
        dp_gap = abs(rev.value - rev_dp.value)
        worst = max(diffs.values())
        ok = worst <= tol and dp_gap <= 1e-9
        return _verdict("", ok, tol - worst, diffs=diffs, dp_gap=dp_gap, revenue_cutoff=rev.cutoff, K=K, max_levels=m)

    def check_exclusion_gain(self, spec: str) -> CheckResult:
        dist = self.dist(spec)
        gain = exclusion_gain(dist)
        econ = discretize(dist, zero(), self.vcfg.oracle_K)
        with_ex = best_menu_search(econ, "revenue", allow_exclusion=True).value
        without = best_menu_search(econ, "revenue", allow_exclusion=False).value
        oracle_gain = with_ex / without - 1.0
        diff = abs(oracle_gain - gain.computed)
        return _verdict("", diff <= 0.005, 0.005 - diff, computed=gain.computed, oracle=oracle_gain, quoted=gain.quoted, discrepancy=gain.discrepancy)

    # ---------- 细化链 ----------

    def check_chains(self, spec: str, ifr: bool) -> CheckResult:
        dist = self.dist(spec)
        rng = self._rng()
        results = [chain_property(dist, rng=rng, steps=self.vcfg.chain_steps) for _ in range(self.vcfg.chains)]
        if ifr:
            ok = all(r.revenue_nondecreasing and r.cs_nonincreasing for r in results)
        else:
            ok = all(r.cs_nondecreasing for r in results)
        return _verdict("", ok, 0.0 if ok else -1.0, chains=len(results), ifr=ifr)

    def check_budget_balance(self, spec: str) -> CheckResult:
        dist = self.dist(spec)
        mech = cs_max_budget_balanced(dist)
        expected_payment = revenue(mech.alloc, v=mech.v, U0=mech.boundary_utility, check=False)
        return _verdict("", abs(expected_payment) < 1e-9, 1e-9 - abs(expected_payment), expected_payment=expected_payment)

    # ---------- 离散搜索 ----------

    def check_discrete_levels(self, spec: str) -> CheckResult:
        dist = self.dist(spec)
        econ = discretize(dist, zero(), 200)
        values = [best_menu_search(econ, "revenue", max_levels=m).value for m in range(1, 7)]
        drops = [a - b for a, b in zip(values, values[1:])]
        worst = max(0.0, max(drops))
        return _verdict("", worst <= 1e-12, -worst, values=values)

    def check_suffering_lowering(self, spec: str) -> CheckResult:
        dist = self.dist(spec)
        econ = discretize(dist, linear(2.0, -1.0, mode=ValueMode.SUFFERING), 8)
        res = suffering_lowering_search(econ)
        return _verdict("", not res.improved, -res.gap, **res.to_dict())
