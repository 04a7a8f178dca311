import pytest

from posgoods.errors import InapplicableConditionError, ModeError, SizeGuardError
from posgoods.verify.suite import CheckResult, VerifyReport, VerifySuite

U = "uniform(0,1)"


@pytest.fixture
def suite(small_config):
    return VerifySuite(small_config)


def test_feasibility_passes_and_fault_is_caught(small_config):
    ok = VerifySuite(small_config).check_feasibility(U)
    assert ok.status == "pass"

    bad = VerifySuite(small_config, inject_fault=True).check_feasibility(U)
    assert bad.status == "fail"
    assert bad.detail["fault"] is True
    assert bad.detail["violations"]["full_separation"] == pytest.approx(0.04875, abs=1e-4)


def test_ic_of_constructed_mechanisms(suite):
    res = suite.check_ic(U)
    assert res.status == "pass"
    assert "cs_max_nonneg_price" in res.detail["deviations"]


def test_half_revenue_guarantee(suite):
    res = suite.check_half_revenue(U)
    assert res.status == "pass"
    assert res.detail["single_good_ratio"] == pytest.approx(0.92376, abs=1e-4)
    assert res.detail["two_level_ratio"] == pytest.approx(0.75, abs=1e-4)


def test_budget_balance(suite):
    assert suite.check_budget_balance(U).status == "pass"


def test_oracle_agreement_and_status_assignment(suite):
    assert suite.check_oracle_agreement(U).status == "pass"
    assert suite.check_status_assignment(U).status == "pass"


def test_exhaustive_agrees_with_dp(suite):
    res = suite.check_exhaustive(U)
    assert res.detail["dp_gap"] <= 1e-9
    assert res.detail["K"] == 12


def test_chains_and_levels(suite):
    assert suite.check_chains(U, ifr=True).status == "pass"
    assert suite.check_discrete_levels(U).status == "pass"


def test_suffering_lowering(suite):
    res = suite.check_suffering_lowering(U)
    assert res.status == "pass"
    assert res.detail["improved"] is False


def test_guarded_maps_errors(suite):
    def raiser(exc):
        def fn():
            raise exc("boom")
        return fn

    assert suite._guarded("a", raiser(SizeGuardError)).status == "skipped"
    assert suite._guarded("b", raiser(InapplicableConditionError)).status == "skipped"
    failed = suite._guarded("c", raiser(ModeError))
    assert failed.status == "fail"
    assert "ModeError" in failed.reason
    named = suite._guarded("d", lambda: CheckResult(name="", status="pass", margin=1.0))
    assert named.name == "d"


def test_report_summary():
    checks = [
        CheckResult(name="a", status="pass", margin=0.1),
        CheckResult(name="b", status="skipped", reason="size guard"),
    ]
    report = VerifyReport(checks=checks, inject_fault=False, config_fingerprint="x")
    assert report.passed
    d = report.to_dict()
    assert d["counts"] == {"pass": 1, "fail": 0, "skipped": 1}
    assert [c["name"] for c in d["checks"]] == ["a", "b"]

    checks.append(CheckResult(name="c", status="fail", margin=-1.0))
    assert not report.passed
