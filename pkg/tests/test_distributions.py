import numpy as np
import pytest

from posgoods.core import distributions as D
from posgoods.core.screening import (
    classify,
    exclusion_foc,
    mean_residual_life,
    regular_from,
    reverse_virtual,
    virtual_root,
    virtual_value,
    weighted_virtual_value,
)
from posgoods.core.spec_parser import parse_distribution, parse_phi, parse_value
from posgoods.core.value_function import ValueMode, linear, polynomial, sqrt_shift, zero
from posgoods.errors import ModeError, SpecParseError, UndefinedDensityError
from posgoods.extensions.phi_status import PhiShape


def test_uniform_quantities(uniform01):
    assert uniform01.bounded
    assert uniform01.tau_max == 1.0
    assert float(uniform01.cdf(0.25)) == pytest.approx(0.25)
    assert float(uniform01.quantile(0.75)) == pytest.approx(0.75)
    assert float(uniform01.virtual_value_tau(0.5)) == pytest.approx(0.0, abs=1e-12)
    assert float(uniform01.reverse_virtual_tau(0.5)) == pytest.approx(1.0)
    assert uniform01.mean() == pytest.approx(0.5)


def test_exponential_is_truncated_in_the_tail(exp1):
    assert not exp1.bounded
    assert exp1.tau_max == pytest.approx(1.0 - 1e-9)
    assert exp1.theta_max == pytest.approx(-np.log(1e-9), rel=1e-8)
    assert float(exp1.inverse_hazard_tau(0.3)) == pytest.approx(1.0)
    assert float(exp1.revenue_curve(1.0)) == 0.0


def test_pareto_is_shifted_to_origin():
    d = D.pareto(2.0, 1.0)
    assert d.support_lo == 0.0
    assert float(d.cdf(1.0)) == pytest.approx(1.0 - 2.0 ** -2)
    # (1-F)/f = (scale + θ)/shape
    assert float(d.inverse_hazard_tau(d.cdf(3.0))) == pytest.approx(2.0)


def test_power_cdf():
    d = D.power(2.0)
    assert float(d.cdf(0.5)) == pytest.approx(0.25)
    assert d.params == (2.0,)


@pytest.mark.parametrize("factory,args", [
    (D.uniform, (1.0, 0.0)),
    (D.uniform, (-1.0, 1.0)),
    (D.exponential, (0.0,)),
    (D.power, (-2.0,)),
    (D.pareto, (0.0, 1.0)),
])
def test_invalid_parameters(factory, args):
    with pytest.raises(ValueError):
        factory(*args)


def test_empirical_piecewise_linear_cdf():
    d = D.empirical([3.0, 1.0, 2.0])
    assert d.support_lo == 1.0 and d.support_hi == 3.0
    assert np.allclose(d.knot_cdf, [0.0, 0.5, 1.0])
    assert float(d.cdf(1.5)) == pytest.approx(0.25)
    assert float(d.pdf(2.5)) == pytest.approx(0.5)


def test_empirical_merges_duplicates_and_rejects_degenerate():
    d = D.empirical([1.0, 1.0, 2.0])
    assert d.knots.tolist() == [1.0, 2.0]
    with pytest.raises(ValueError):
        D.empirical([1.0, 1.0])
    with pytest.raises(ValueError):
        D.empirical([1.0, 2.0], weights=[1.0, -1.0])


def test_empirical_from_csv_with_weights(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("# 样本\n1,1\n2,1\n3,2\n", encoding="utf-8")
    d = D.empirical_from_csv(p)
    assert d.kind is D.DistributionKind.EMPIRICAL
    assert d.label == "empirical(s.csv)"
    assert d.support_hi == 3.0


def test_uniform_mixture_has_gap():
    d = D.uniform_mixture([(0.0, 1.0), (2.0, 3.0)])
    assert d.label == "mix(0,1,2,3)"
    assert d.support_lo == pytest.approx(0.0, abs=1e-3)
    assert d.support_hi == pytest.approx(3.0, abs=1e-3)
    assert float(d.cdf(1.5)) == pytest.approx(0.5, abs=1e-3)


# -----------------------------
# 分类
# -----------------------------

def test_classify_uniform(uniform01):
    c = classify(uniform01)
    assert c.regular and c.ifr and not c.dfr


def test_classify_exponential_constant_hazard(exp1):
    c = classify(exp1)
    assert c.regular and c.ifr and c.dfr


def test_classify_pareto_is_dfr():
    c = classify(D.pareto(2.0, 1.0))
    assert c.regular and c.dfr and not c.ifr


@pytest.mark.parametrize("beta,regular", [(0.5, False), (0.25, False), (2.0, True), (4.0, True)])
def test_classify_power(beta, regular):
    assert classify(D.power(beta)).regular is regular


def test_classify_mixture_is_not_regular():
    assert not classify(D.uniform_mixture([(0.0, 1.0), (4.0, 5.0)])).regular


def test_virtual_root_and_regular_from(uniform01):
    assert virtual_root(uniform01) == pytest.approx(0.5, abs=1e-10)
    assert regular_from(uniform01) == 0.0
    assert regular_from(D.power(0.5)) > 0.0


def test_mean_residual_life_uniform(uniform01):
    assert mean_residual_life(uniform01, [0.5])[0] == pytest.approx(0.25, abs=1e-10)


def test_derived_quantities_uniform(uniform01):
    assert reverse_virtual(uniform01, 0.5) == pytest.approx(1.0)
    assert float(uniform01.reverse_virtual_tau(0.5)) == pytest.approx(1.0)
    assert weighted_virtual_value(uniform01, [0.5], lam=2.0)[0] == pytest.approx(0.5)
    assert weighted_virtual_value(uniform01, [0.3], lam=1.0)[0] == pytest.approx(0.3)
    # 截断点一阶条件在 J 的零点处为 0
    assert exclusion_foc(uniform01, zero(), 0.5) == pytest.approx(0.0, abs=1e-12)
    assert exclusion_foc(uniform01, zero(), 0.25) == pytest.approx(-0.125)
    assert exclusion_foc(uniform01, linear(0.0, 0.5), 0.5) == pytest.approx(0.0, abs=1e-12)


def test_virtual_value_needs_density(uniform01):
    assert virtual_value(uniform01, 1.0) == 1.0
    assert virtual_value(uniform01, 0.25) == pytest.approx(-0.5)
    with pytest.raises(UndefinedDensityError):
        virtual_value(uniform01, -0.5)


# -----------------------------
# 文本规格
# -----------------------------

def test_parse_distribution_labels():
    assert parse_distribution(" exp(2) ").label == "exp(2)"
    assert parse_distribution("uniform").label == "uniform(0,1)"
    assert parse_distribution("pareto(3)").params == (3.0, 1.0)
    assert parse_distribution("power(0.5)").kind is D.DistributionKind.POWER


def test_parse_distribution_reports_column():
    with pytest.raises(SpecParseError) as ei:
        parse_distribution("uniform(0,x)")
    assert ei.value.line == 1
    assert ei.value.column == 11


@pytest.mark.parametrize("text", ["gamma(2)", "uniform(1,0)", "mix(0,1,2)", "uniform(0,1", "power()", ""])
def test_parse_distribution_rejects(text):
    with pytest.raises(SpecParseError):
        parse_distribution(text)


def test_parse_empirical_relative_path(tmp_path):
    (tmp_path / "samples.csv").write_text("1\n2\n4\n", encoding="utf-8")
    d = parse_distribution("empirical(samples.csv)", base_dir=tmp_path)
    assert d.kind is D.DistributionKind.EMPIRICAL
    with pytest.raises(SpecParseError):
        parse_distribution("empirical(missing.csv)", base_dir=tmp_path)


def test_parse_value_forms():
    assert parse_value("0").label == "0"
    v = parse_value("linear(0,0.5)")
    assert float(v(2.0)) == pytest.approx(1.0)
    assert float(v.slope(2.0)) == pytest.approx(0.5)
    assert parse_value("linear(2,-1)", suffering=True).mode is ValueMode.SUFFERING
    assert float(parse_value("poly(1,0,2)")(2.0)) == pytest.approx(9.0)
    with pytest.raises(SpecParseError):
        parse_value("sqrt(1)", suffering=True)


def test_parse_phi_shapes():
    assert parse_phi("pow(2)").shape is PhiShape.CONVEX
    assert parse_phi("sqrt").shape is PhiShape.CONCAVE
    assert parse_phi("identity").shape is PhiShape.CONVEX
    with pytest.raises(SpecParseError):
        parse_phi("pow(-1)")


# -----------------------------
# 内在价值
# -----------------------------

def test_value_function_validation(uniform01):
    linear(0.0, 0.5).validate(uniform01)
    sqrt_shift(1.0).validate(uniform01)
    linear(2.0, -1.0, mode=ValueMode.SUFFERING).validate(uniform01)
    with pytest.raises(ModeError):
        polynomial([0.0, -0.5]).validate(uniform01)
    with pytest.raises(ModeError):
        polynomial([0.0, 0.0, 1.0]).validate(uniform01)
    with pytest.raises(ModeError):
        linear(2.0, -0.5, mode=ValueMode.SUFFERING).validate(uniform01)


def test_countervailing_detection(uniform01):
    assert polynomial([1.0, -0.5]).is_countervailing(uniform01)
    assert not linear(2.0, -1.0).is_countervailing(uniform01)
    assert not linear(0.0, 0.5).is_countervailing(uniform01)
