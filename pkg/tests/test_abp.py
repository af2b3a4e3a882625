import math

import numpy as np
import pytest

from hlab.checks import Abp
from hlab.models import Operator
from hlab.models.Errors import HypothesisViolated, OffCone, ZeroRightHandSide
from hlab.models.Field import perturbed_quadratic, pluriharmonic, quadratic
from hlab.models.Grid import GridDomain, ball_volume
from hlab.models.Report import Status


def tensor_config(n=2, **kwargs):
    return Abp.AbpConfig(n=n, grid_kind="tensor", per_axis=9, **kwargs)


def test_config_defaults_follow_the_operator():
    cfg = Abp.AbpConfig(n=3).resolved(Operator.sigma_m(3, 2))
    assert (cfg.r_exp, cfg.p_exp, cfg.k) == (4.0, 4.0, 2.0)
    assert cfg.delta == pytest.approx(math.sqrt(3.0))
    assert cfg.q_exp == pytest.approx(4.0 / 3.0)
    cfg.validate()


@pytest.mark.parametrize("kwargs", [{"p_exp": 2.0}, {"r_exp": 2.0}, {"p_exp": 1.5}])
def test_config_rejects_small_exponents(kwargs):
    cfg = Abp.AbpConfig(n=2, **kwargs).resolved(Operator.monge_ampere(2))
    with pytest.raises(HypothesisViolated):
        cfg.validate()


def test_corollary_exponents():
    ma = Operator.monge_ampere(2)
    Abp.AbpConfig(n=2, p_exp=1.5, corollary=True).resolved(ma).validate()
    with pytest.raises(HypothesisViolated):
        Abp.AbpConfig(n=2, p_exp=1.0, corollary=True).resolved(ma).validate()


def test_boundary_minimum_of_quadratic():
    grid = GridDomain.sampled(2, center=(0.2, 0.5), radius=0.25, count=100)
    low, point = Abp.boundary_minimum(quadratic(2), grid)
    # |c| - d = sqrt(0.29) - 0.25 along the direction of -c
    assert low == pytest.approx((math.sqrt(0.29) - 0.25) ** 2, abs=1e-8)
    assert np.linalg.norm(point - grid.center) == pytest.approx(0.25)


def test_supersolution_is_shifted_to_the_boundary():
    grid = GridDomain.tensor(2, per_axis=9)
    inst = Abp.make_supersolution(Operator.monge_ampere(2), quadratic(2), grid)
    assert inst.boundary_min == 0.0
    np.testing.assert_allclose(inst.g, 1.0, atol=1e-12)
    assert inst.u.value(np.array([0.0, 0.0])) == pytest.approx(-1.0, abs=1e-12)


def test_supersolution_off_the_cone():
    grid = GridDomain.tensor(2, per_axis=5)
    with pytest.raises(OffCone):
        Abp.make_supersolution(Operator.monge_ampere(2), quadratic(2, scale=-1.0), grid)


def test_rhs_norm():
    grid = GridDomain.tensor(2, per_axis=5)
    assert Abp.rhs_norm(grid, np.ones(grid.size), 3.0) == pytest.approx(ball_volume(2) ** (1.0 / 3.0))
    with pytest.raises(ZeroRightHandSide):
        Abp.rhs_norm(grid, np.zeros(grid.size), 3.0)


def test_quadratic_instance():
    grid = GridDomain.tensor(2, per_axis=9)
    inst = Abp.make_supersolution(Operator.monge_ampere(2), quadratic(2), grid)
    report = Abp.abp_estimate_check(inst, tensor_config())
    assert report.passed, report.to_dict()
    assert report.extra["sup_neg_u"] == pytest.approx(1.0, abs=1e-12)
    assert report.extra["realized_C"] == pytest.approx((math.pi ** 2 / 2) ** (-1.0 / 3.0), rel=1e-9)
    assert report.extra["sup_neg_rho"] == pytest.approx(Abp.MAJORANT_SAFETY, rel=1e-6)
    assert report.extra["realized_C"] <= report.extra["barrier_C"]


def test_majorant_dominates_the_right_hand_side():
    grid = GridDomain.sampled(3, count=1000)
    inst = Abp.make_supersolution(Operator.sigma_m(3, 2), perturbed_quadratic(3), grid)
    radii, nodes = Abp.radial_majorant(inst)
    r = np.linalg.norm(grid.points, axis=-1)
    assert np.all(np.interp(r, radii, nodes) >= inst.g)
    assert len(radii) == Abp.MAJORANT_NODES


def test_degenerate_right_hand_side():
    grid = GridDomain.tensor(2, per_axis=9)
    inst = Abp.zero_rhs_instance(Operator.monge_ampere(2), pluriharmonic(2, "square"), grid)
    assert inst.u.value(np.array([1j, 0.0])) == pytest.approx(0.0, abs=1e-9)
    report = Abp.abp_estimate_check(inst, tensor_config())
    assert report.passed
    assert report.extra["degenerate"]
    assert report.extra["sup_neg_u"] <= 0.0
    assert math.isnan(report.extra["realized_C"])


def test_negative_boundary_values_violate_the_hypothesis():
    grid = GridDomain.tensor(2, per_axis=9)
    inst = Abp.make_supersolution(Operator.monge_ampere(2), quadratic(2), grid, shift=False)
    inst.boundary_min = -0.5
    with pytest.raises(HypothesisViolated):
        Abp.abp_estimate_check(inst, tensor_config())


@pytest.mark.parametrize("d", [0.25, 0.5, 1.0])
def test_radius_sweep_closed_form(d):
    table = Abp.constant_sweep(Abp.radius_family(Operator.monge_ampere(2), radii=(d,)), tensor_config())
    realized = table.rows[0][8]
    assert realized == pytest.approx(d * d / (math.pi ** 2 * d ** 4 / 2) ** (1.0 / 3.0), rel=1e-8)
    assert table.rows[0][-1]


def test_scaling_leaves_the_realized_constant_unchanged():
    family = Abp.scaling_family(Operator.monge_ampere(2), quadratic(2))
    table = Abp.constant_sweep(family, tensor_config())
    realized = [row[8] for row in table.rows]
    np.testing.assert_allclose(realized, realized[0], rtol=1e-8)
    assert all(row[-1] for row in table.rows)


def test_exponent_family():
    family = Abp.exponent_family(Operator.monge_ampere(2), quadratic(2))
    table = Abp.constant_sweep(family, tensor_config())
    assert [row[2] for row in table.rows] == [2.5, 3.0, 4.0]
    realized = [row[8] for row in table.rows]
    # vol(B_1) > 1 in C^2, so the bound grows with p
    assert realized[0] < realized[1] < realized[2]
    assert table.running_max == sorted(table.running_max)


def test_corollary_mode():
    grid = GridDomain.tensor(2, per_axis=9)
    inst = Abp.make_supersolution(Operator.monge_ampere(2), quadratic(2), grid)
    report = Abp.abp_estimate_check(inst, tensor_config(corollary=True))
    assert report.passed
    # F = det = 1 and k = 2
    assert report.extra["realized_C"] == pytest.approx((math.pi ** 2 / 2) ** (-1.0 / 6.0), rel=1e-9)


def test_member_hypothesis_failures_are_reported():
    member = Abp.FamilyMember("too-small-p", Operator.monge_ampere(2), quadratic(2), p=2.0)
    report = Abp.run_member(member, tensor_config())
    assert report.status == Status.HYPOTHESIS_VIOLATED
    assert report.extra["instance_id"] == "too-small-p"

    member = Abp.FamilyMember("concave", Operator.monge_ampere(2), quadratic(2, scale=-1.0))
    assert Abp.run_member(member, tensor_config()).status == Status.HYPOTHESIS_VIOLATED


def test_default_corpus_is_dominated():
    corpus = Abp.default_abp_corpus()
    assert len(corpus) == 12
    table = Abp.constant_sweep(corpus, Abp.AbpConfig(n=2, points=800), workers=2)
    for report in table.reports:
        assert report.passed, report.to_dict()
        assert report.extra["realized_C"] <= report.extra["barrier_C"] + 1e-6
    summary = Abp.corpus_summary(table)
    assert summary["outliers"] == 0
    assert summary["max_realized_C"] >= summary["median_realized_C"] > 0.0
    assert table.to_csv().splitlines()[0] == ",".join(Abp.SWEEP_COLUMNS)


def test_sweep_is_independent_of_worker_count():
    family = Abp.default_abp_corpus()[:4]
    cfg = Abp.AbpConfig(n=2, points=500)
    assert Abp.constant_sweep(family, cfg, workers=1).rows == Abp.constant_sweep(family, cfg, workers=3).rows


def test_empty_sweep():
    with pytest.raises(ValueError):
        Abp.constant_sweep([], tensor_config())


def test_max_principle_corpus():
    for case in Abp.default_max_principle_corpus(per_axis=7):
        report = Abp.run_max_principle(case)
        assert report.passed, report.to_dict()
        assert report.extra["min_trace"] >= case.M - Abp.TRACE_TOLERANCE


def test_max_principle_negative_control():
    report = Abp.run_max_principle(Abp.negative_control_case(per_axis=7))
    assert report.status == Status.HYPOTHESIS_VIOLATED
    assert report.hypothesis == "sum a^{i jbar} u_{i jbar} >= 0"
    assert report.extra["case"] == "negative-quadratic"


def test_max_principle_trace_hypothesis():
    grid = GridDomain.tensor(2, per_axis=5)
    coeffs = Operator.constant_coefficients(0.5 * np.eye(2))
    with pytest.raises(HypothesisViolated) as info:
        Abp.max_principle_check(coeffs, quadratic(2), grid, 2.0)
    assert info.value.value == pytest.approx(1.0)
    bounds = Abp.check_mp_hypotheses(coeffs, grid)
    assert bounds["min_trace"] == pytest.approx(1.0)
    assert bounds["min_eigenvalue"] == pytest.approx(0.5)
    report = Abp.max_principle_check(coeffs, quadratic(2), grid, 1.0)
    assert report.passed
    assert report.extra["min_trace"] == pytest.approx(1.0)
    assert report.extra["min_eigenvalue"] == pytest.approx(0.5)
