from __future__ import annotations

import argparse
import sys
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from rich.table import Table

from .config_loader import AppConfig, RunConfig, load_config, load_run_config, resolve_path
from .core.distributions import DistributionKind, TypeDistribution
from .core.screening import classify
from .core.spec_parser import parse_distribution, parse_phi, parse_value
from .core.value_function import ValueFunction
from .errors import (
    BoundTooSmallError,
    CountervailingRegimeError,
    InapplicableConditionError,
    InfeasibleAllocationError,
    ModeError,
    SpecParseError,
    UnboundedSupportError,
)
from .extensions.negative_status import negative_status_optimum
from .extensions.phi_status import phi_transformed_optimum
from .extensions.suffering import suffering_optimum
from .ironing.ironing import iron
from .mechanisms.exclusion import exclusion_gain, optimal_exclusion, power_single_good_ratio, single_good_optimum
from .mechanisms.mechanism import Mechanism
from .mechanisms.objectives import evaluate
from .mechanisms.welfare import cs_max_budget_balanced, cs_max_nonneg_price, social_optimum
from .no_exclusion.conditions import separation_at_top_check
from .no_exclusion.optimum import power_two_level_ratio, revmax_no_exclusion, two_level_optimum
from .utils.hash_utils import config_fingerprint
from .utils.logger import get_console, get_logger, setup_logging
from .utils.report_generator import ReportGenerator
from .verify.suite import VerifySuite

log = get_logger(__name__)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_INAPPLICABLE = 3
EXIT_VERIFY = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="posgoods", description="地位商品（positional goods）机制求解与验证")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="运行配置文件（YAML，键名同命令行参数）")
    common.add_argument("--out", type=str, default=None, help="输出目录")
    common.add_argument("--grid", type=int, default=None, help="熨平网格点数")
    common.add_argument("--log-level", type=str, default=None, help="DEBUG / INFO / WARNING / ERROR")

    solve = sub.add_parser("solve", parents=[common], help="求解并评估一个最优机制")
    solve.add_argument("--dist", type=str, default=None, help='类型分布，例如 "uniform(0,1)"、"exp(1)"、"power(2)"')
    solve.add_argument("--value", type=str, default=None, help='内在价值 v(θ)，例如 "0"、"linear(0,0.5)"、"poly(2,-1)"')
    solve.add_argument("--objective", choices=["revenue", "cs", "welfare"], default=None)
    solve.add_argument("--lambda", dest="lam", type=float, default=None, help="社会福利中收入的权重 λ")
    solve.add_argument("--no-exclusion", action="store_true", default=None, help="不允许排除，最低层免费")
    solve.add_argument("--nonneg-prices", action="store_true", default=None, help="价格必须非负")
    solve.add_argument("--gamma", type=float, default=None, help="同层质量的权重 γ")
    solve.add_argument("--phi", type=str, default=None, help='地位变换，例如 "sqrt"、"pow(2)"')
    solve.add_argument("--suffering", action="store_true", default=None, help="suffering 模式（v' ≤ -1，高类型被排除）")
    solve.add_argument("--neg-status", type=float, default=None, metavar="M", help="允许负地位，下界 −M")

    ratio = sub.add_parser("ratio", parents=[common], help="单一商品 / 两层近似比值表")
    ratio.add_argument("--dists", nargs="+", default=None, help="分布列表")
    ratio.add_argument("--value", type=str, default=None)

    verify = sub.add_parser("verify", parents=[common], help="运行验证电池")
    verify.add_argument("--inject-fault", action="store_true", default=None, help="给地位加上偏移，验证检查能否发现")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    keys = ("dist", "value", "objective", "lam", "no_exclusion", "nonneg_prices", "gamma", "phi",
            "suffering", "neg_status", "grid", "out", "dists", "inject_fault")
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


# -----------------------------
# solve
# -----------------------------

def _print_summary(title: str, rows: Sequence[tuple]) -> None:
    table = Table(title=title)
    table.add_column("项目")
    table.add_column("值", justify="right")
    for k, v in rows:
        table.add_row(str(k), f"{v:.10g}" if isinstance(v, float) else str(v))
    get_console().print(table)


def _select_mechanism(run: RunConfig, dist: TypeDistribution, v: ValueFunction, grid: int) -> Dict[str, Any]:
    """按运行参数选择求解器，返回机制与分支相关的附加信息。"""
    extras: Dict[str, Any] = {}
    hull = None

    if run.suffering:
        if run.objective != "revenue":
            raise ModeError("suffering 模式只支持 revenue 目标")
        res = suffering_optimum(dist, v)
        extras["suffering"] = res.to_dict()
        return {"mechanism": res.mechanism, "hull": None, "extras": extras}

    if v.is_countervailing(dist):
        raise CountervailingRegimeError("countervailing regime, unsupported：v' 在 (−1, 0) 内取值")

    if run.neg_status is not None:
        res = negative_status_optimum(dist, v, run.neg_status)
        extras["negative_status"] = res.to_dict()
        return {"mechanism": res.mechanism, "hull": None, "extras": extras}

    if run.phi is not None:
        phi = parse_phi(run.phi)
        mech = phi_transformed_optimum(dist, v, phi)
        extras["phi"] = phi.label
        return {"mechanism": mech, "hull": None, "extras": extras}

    if run.objective == "revenue":
        if run.no_exclusion:
            mech = revmax_no_exclusion(dist, v, grid)
            extras["separation_at_top"] = separation_at_top_check(mech)
            if mech.alloc.pooled_intervals():
                hull = iron(dist, float(dist.support_lo), grid)
        else:
            res = optimal_exclusion(dist, v, grid)
            mech = res.mechanism
            extras["exclusion"] = res.to_dict()
            extras["exclusion_gain"] = exclusion_gain(dist, v).to_dict()
            hull = res.hull if res.ironed else None
        return {"mechanism": mech, "hull": hull, "extras": extras}

    if run.objective == "cs":
        mech = cs_max_nonneg_price(dist, v, run.gamma) if run.nonneg_prices else cs_max_budget_balanced(dist, v)
        return {"mechanism": mech, "hull": None, "extras": extras}

    mech = social_optimum(dist, v, run.lam, run.nonneg_prices)
    return {"mechanism": mech, "hull": None, "extras": extras}


def _has_pools(alloc) -> bool:
    if alloc.is_mixture:
        return any(_has_pools(part) for _, part in alloc.mixture)
    return bool(alloc.pooled_intervals())


def _check_gamma(run: RunConfig, mech: Mechanism) -> None:
    """γ ≠ 1/2 只有在求解器按 γ 构造混同层时才有意义（目前为非负价格的消费者剩余最优）。"""
    if run.gamma == 0.5 or mech.alloc.gamma == run.gamma:
        return
    if _has_pools(mech.alloc):
        raise ModeError(f"{mech.label}: 混同层按 γ = 1/2 求解，不支持 gamma={run.gamma:g}")


def cmd_solve(run: RunConfig, app: AppConfig) -> Dict[str, Any]:
    dist = parse_distribution(run.dist)
    v = parse_value(run.value, suffering=run.suffering)
    grid = run.grid or app.numerics.hull_grid

    chosen = _select_mechanism(run, dist, v, grid)
    mech: Mechanism = chosen["mechanism"]
    _check_gamma(run, mech)
    lambdas = sorted({1.0, float(run.lam)})
    ev = evaluate(mech, lambdas=lambdas, check=run.gamma <= 0.5)

    reporter = ReportGenerator(app, run.out)
    csv_info = reporter.write_mechanism_csv(mech)
    files = {"mechanism_csv": csv_info["path"]}
    if chosen["hull"] is not None:
        files["hull_csv"] = str(reporter.write_hull_csv(chosen["hull"]))

    report = {
        "command": "solve",
        "run": run.model_dump(by_alias=True),
        "distribution": dist.label,
        "value": v.label,
        "classification": classify(dist).to_dict(),
        "mechanism": mech.label,
        "cutoff": ev.cutoff,
        "exclusion_mass": ev.exclusion_mass,
        "boundary_utility": ev.boundary_utility,
        "revenue": ev.revenue,
        "consumer_surplus": ev.consumer_surplus,
        "social_welfare": {f"{k:g}": val for k, val in ev.social_welfare.items()},
        "pooled_intervals": [list(iv) for iv in mech.alloc.pooled_intervals()],
        "flags": {
            "ironed": chosen["hull"] is not None,
            "suffering": run.suffering,
            "negative_status": run.neg_status is not None,
            "phi": run.phi,
        },
        "extras": chosen["extras"],
        "grid_check": csv_info["grid_check"],
        "files": files,
        "config_fingerprint": config_fingerprint(app),
    }
    reporter.write_json("report.json", report)
    _print_summary(
        f"solve: {dist.label}, v={v.label}, {run.objective}",
        [("mechanism", mech.label), ("cutoff", ev.cutoff), ("revenue", ev.revenue), ("consumer_surplus", ev.consumer_surplus)],
    )
    return report


# -----------------------------
# ratio
# -----------------------------

def ratio_row(dist: TypeDistribution, v: Optional[ValueFunction] = None) -> Dict[str, Any]:
    excl = optimal_exclusion(dist, v)
    single = single_good_optimum(dist, v, max_revenue=excl.revenue)
    two = two_level_optimum(dist)
    row: Dict[str, Any] = {
        "distribution": dist.label,
        "R1": single.revenue,
        "maxR_exclusion": excl.revenue,
        "ratio_exclusion": single.ratio,
        "R2": two.revenue,
        "maxR_no_exclusion": two.max_revenue,
        "ratio_no_exclusion": two.ratio,
        "closed_form_exclusion": np.nan,
        "closed_form_no_exclusion": np.nan,
    }
    if dist.kind is DistributionKind.POWER and (v is None or v.label == "0"):
        beta = dist.params[0]
        row["closed_form_exclusion"] = power_single_good_ratio(beta)
        row["closed_form_no_exclusion"] = power_two_level_ratio(beta)
    return row


def cmd_ratio(run: RunConfig, app: AppConfig) -> List[Dict[str, Any]]:
    specs = run.dists or app.ratio.dists
    v = parse_value(run.value)
    rows = [ratio_row(parse_distribution(spec), v) for spec in specs]
    reporter = ReportGenerator(app, run.out)
    reporter.write_ratio_table(rows)

    table = Table(title="单一商品 / 两层近似比值")
    for col in ("distribution", "ratio_exclusion", "ratio_no_exclusion"):
        table.add_column(col, justify="right")
    for r in rows:
        table.add_row(r["distribution"], f"{r['ratio_exclusion']:.4f}", f"{r['ratio_no_exclusion']:.4f}")
    get_console().print(table)
    return rows


# -----------------------------
# verify
# -----------------------------

def cmd_verify(run: RunConfig, app: AppConfig) -> bool:
    report = VerifySuite(app, inject_fault=run.inject_fault).run()
    ReportGenerator(app, run.out).write_json("verify.json", report.to_dict())

    table = Table(title="verify")
    table.add_column("check")
    table.add_column("status")
    table.add_column("margin", justify="right")
    for c in report.checks:
        margin = "" if c.margin is None else f"{c.margin:.3g}"
        table.add_row(c.name, c.status, margin)
    get_console().print(table)
    return report.passed


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        app = load_config()
        run = load_run_config(args.config, _overrides(args))
    except (ValueError, FileNotFoundError) as e:
        setup_logging("INFO")
        log.error(f"配置错误: {e}")
        return EXIT_PARSE
    log_file = resolve_path(app, app.logging.file) if app.logging.file else None
    setup_logging(args.log_level or app.logging.level, log_file=log_file)

    try:
        if args.command == "solve":
            cmd_solve(run, app)
        elif args.command == "ratio":
            cmd_ratio(run, app)
        elif args.command == "verify":
            if not cmd_verify(run, app):
                return EXIT_VERIFY
        else:
            parser.error(f"未知命令: {args.command}")
    except SpecParseError as e:
        log.error(f"解析错误: {e}")
        return EXIT_PARSE
    except (InapplicableConditionError, ModeError, UnboundedSupportError, InfeasibleAllocationError, BoundTooSmallError) as e:
        log.error(f"{type(e).__name__}: {e}")
        return EXIT_INAPPLICABLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
