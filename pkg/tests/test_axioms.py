import numpy as np
import pytest

from hlab.checks import AxiomSuite
from hlab.models import Operator
from hlab.models.Hermitian import diagonal_weight_form, hermitian, identity

SAMPLES = 200


@pytest.mark.parametrize("op", [
    Operator.monge_ampere(2),
    Operator.monge_ampere(3),
    Operator.sigma_m(3, 2),
    Operator.sigma_m(4, 3),
    Operator.m_monge_ampere(3, 2),
    Operator.interp(0.0),
    Operator.interp(0.5),
    Operator.interp(1.0),
], ids=lambda op: f"{op.name}-n{op.n}")
def test_builtin_operators_meet_every_axiom(op):
    reports = AxiomSuite.run_suite(op, samples=SAMPLES, seed=7)
    assert set(reports) == {"homogeneity", "concavity", "linearized_inequality", "comparison",
                            "euler_identity", "ellipticity", "unit_value", "gradient"}
    for name, report in reports.items():
        assert report.passed, (name, report.max_violation, report.witnesses[:1])


def test_combination_meets_every_axiom():
    def tilt(z):
        return 0.5 + 0.25 * np.tanh(np.real(z[..., 0]))

    def rest(z):
        return 1.0 - tilt(z)

    members = [Operator.monge_ampere(3), Operator.sigma_m(3, 2)]
    reports = AxiomSuite.run_suite(Operator.combination(members, [tilt, rest]), samples=SAMPLES, seed=3)
    assert len(reports) == 8
    for name, report in reports.items():
        assert report.passed, (name, report.max_violation, report.witnesses[:1])


def test_gradient_check_catches_a_wrong_gradient(monkeypatch):
    op = Operator.sigma_m(3, 2)
    monkeypatch.setattr(Operator.Operator, "gradient", lambda self, z, a: 1.01 * self.numeric_gradient(z, a))
    report = AxiomSuite.check_gradient(op, samples=10, seed=2)
    assert not report.passed
    assert report.max_violation > AxiomSuite.GRADIENT_TOLERANCE


def test_weighted_background_suite():
    op = Operator.monge_ampere(2, diagonal_weight_form(2, 1.0))
    reports = AxiomSuite.run_suite(op, samples=100, seed=1)
    assert all(report.passed for report in reports.values())


def test_hessian_quotient_fails_comparison():
    op = Operator.hessian_quotient(3, 2, 1)
    witness = hermitian(np.diag([64.0, 1.0, 1.0]))
    report = AxiomSuite.check_comparison(op, samples=50, seed=0, witnesses=[witness])
    assert not report.passed
    first = report.witnesses[0]
    assert first["violation"] == pytest.approx(4.0 - 129.0 / 66.0, abs=1e-9)
    assert first["det_root"] == pytest.approx(4.0, abs=1e-12)

    assert AxiomSuite.check_homogeneity(op, SAMPLES).passed
    assert AxiomSuite.check_concavity(op, SAMPLES).passed


@pytest.mark.parametrize("diagonal, criterion", [((1.0, 1.0), 2.0), ((1.0, 4.0), 4.0)])
def test_linear_operator_meeting_criterion(diagonal, criterion):
    coeffs = Operator.constant_coefficients(np.diag(diagonal))
    assert AxiomSuite.linear_comparison_value(coeffs, np.zeros(2, dtype=complex)) == pytest.approx(criterion)
    report = AxiomSuite.check_comparison(Operator.linear(coeffs), samples=SAMPLES, seed=2)
    assert report.extra["linear_criterion"] == pytest.approx(criterion)
    assert report.passed


def test_linear_operator_below_criterion_fails():
    coeffs = Operator.constant_coefficients(np.diag([0.1, 0.1]))
    report = AxiomSuite.check_comparison(Operator.linear(coeffs), samples=SAMPLES, seed=2)
    assert report.extra["linear_criterion"] == pytest.approx(0.2)
    assert not report.passed


def test_unit_value_report():
    report = AxiomSuite.check_unit_value(Operator.sigma_m(3, 2))
    assert report.passed
    assert report.extra["min_value"] == pytest.approx(1.0, abs=1e-12)

    report = AxiomSuite.check_unit_value(Operator.linear(Operator.constant_coefficients(0.2 * identity(2))))
    assert not report.passed


def test_suite_is_deterministic_across_workers():
    op = Operator.sigma_m(3, 2)
    one = AxiomSuite.check_concavity(op, 64, seed=5, workers=1)
    four = AxiomSuite.check_concavity(op, 64, seed=5, workers=4)
    assert one.to_dict() == four.to_dict()
