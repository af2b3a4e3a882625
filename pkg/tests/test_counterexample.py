import numpy as np
import pytest

from hlab.checks import Counterexample
from hlab.models import Operator
from hlab.models.Errors import BadRadius
from hlab.models.Field import phi_R, pogorelov_f, pogorelov_u
from hlab.models.Grid import GridDomain
from hlab.models.Report import Status


@pytest.mark.parametrize("n", [2, 3, 4])
def test_ma_identity_exact(n):
    grid = GridDomain.sampled(n, count=2000, seed=n)
    report = Counterexample.verify_ma_identity(n, grid)
    assert report.passed, report.to_dict()
    assert report.extra["sobolev_range"] == [1.0, float(n * (n - 1))]


def test_ma_identity_by_finite_differences():
    grid = GridDomain.sampled(3, count=500, seed=1)
    grid = grid.excluding(lambda z: np.linalg.norm(z[..., 1:], axis=-1), 0.3)
    report = Counterexample.verify_ma_identity(3, grid, use_fd=True)
    assert report.name == "ma_identity_fd"
    assert report.passed, report.to_dict()


@pytest.mark.parametrize("n", [3, 4, 5])
def test_nonstrict_max(n):
    report = Counterexample.verify_nonstrict_max(n, 0.5, GridDomain.sampled(n, radius=0.5, count=3000))
    assert report.passed
    assert report.extra["sup_off_singular"] < 0.0
    assert report.extra["max_touching_defect"] <= 1e-12


def test_nonstrict_max_needs_positive_radius():
    with pytest.raises(BadRadius):
        Counterexample.verify_nonstrict_max(3, 0.0)


def test_closed_form_gap_at_origin():
    lu_phi, three_f = Counterexample.closed_form_gap(np.zeros((1, 3), dtype=complex), 0.5)
    assert three_f[0] - lu_phi[0] == pytest.approx(4.0 / 27.0, abs=1e-15)


def test_linearized_gap_below_critical_radius():
    report = Counterexample.verify_linearized_gap(0.5, GridDomain.sampled(3, radius=0.5, count=4000))
    assert report.passed, report.to_dict()
    assert report.epsilon >= 4.0 / 27.0 - 1e-8
    assert report.extra["route_disagreement"] <= Counterexample.ROUTE_AGREEMENT


@pytest.mark.parametrize("R", [0.71, 0.8])
def test_linearized_gap_past_critical_radius(R):
    report = Counterexample.verify_linearized_gap(R, GridDomain.sampled(3, radius=R, count=2000))
    assert report.status == Status.FAIL
    assert report.epsilon < 0.0
    with pytest.raises(BadRadius):
        Counterexample.verify_linearized_gap(R, strict=True)


def test_linearized_gap_csv():
    report, text = Counterexample.verify_linearized_gap(0.5, GridDomain.sampled(3, radius=0.5, count=100),
                                                        with_csv=True)
    lines = text.splitlines()
    assert lines[0].split(",")[-1] == "gap"
    assert len(lines) == report.grid_size + 1


@pytest.mark.parametrize("R", [0.5, 0.7])
def test_linearized_operator_matches_the_hand_computation(R):
    u, phi = pogorelov_u(3), phi_R(3, R)
    z = np.array([[0.3 + 0.1j, 0.2, -0.1j], [-0.2j, 0.05 + 0.05j, 0.3], [0.0, 0.1, 0.0]])
    t = np.abs(z[:, 0]) ** 2
    s = np.sum(np.abs(z[:, 1:]) ** 2, axis=-1)
    c = 1.0 + R * R
    expected = -(70.0 / 27.0 + 50.0 / 27.0 * t) * s + 16.0 / 27.0 * c + 8.0 / 27.0 * c * t
    coeffs = Operator.linearize(Operator.monge_ampere(3), u.hessian, normalized=False)
    np.testing.assert_allclose(coeffs.apply(z, phi.hessian(z)), expected, rtol=1e-10)
    np.testing.assert_allclose(Counterexample.closed_form_gap(z, R)[0], expected, rtol=1e-14)
    # the normalized linearization is the cofactor one over n f^{(n-1)/n}
    normalized = Operator.linearize(Operator.monge_ampere(3), u.hessian).apply(z, phi.hessian(z))
    f = pogorelov_f(3).value(z)
    np.testing.assert_allclose(normalized, expected / (3.0 * f ** (2.0 / 3.0)), rtol=1e-9)
