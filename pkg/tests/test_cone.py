import numpy as np
import pytest

from hlab.checks.ConeSuite import (check_contains_positive, check_convexity, check_unitary_invariance,
                                   sample_hermitian)
from hlab.models import Cone
from hlab.models.Cone import Membership
from hlab.models.Errors import DimensionMismatch, UnsupportedBackground
from hlab.models.Hermitian import diagonal_weight_form, hermitian, identity, random_positive

Z2 = np.zeros(2, dtype=complex)
Z3 = np.zeros(3, dtype=complex)


def diag(*values):
    return hermitian(np.diag(values))


def test_membership_examples():
    assert Cone.gamma_m(3, 3).contains(Z3, identity(3))
    assert not Cone.gamma_m(2, 2).contains(Z2, diag(-1.0, 3.0))
    assert Cone.gamma_m(2, 1).contains(Z2, diag(-1.0, 3.0))
    assert Cone.m_monge(3, 2).contains(Z3, diag(-1.0, 2.0, 3.0))
    assert not Cone.positive_cone(3).contains(Z3, diag(-1.0, 2.0, 3.0))


def test_boundary_is_indeterminate():
    cone = Cone.positive_cone(2)
    assert cone.membership(Z2, diag(0.0, 1.0)) == Membership.INDETERMINATE
    assert not cone.contains(Z2, diag(0.0, 1.0))


def test_interp_cone():
    cone = Cone.interp(0.5)
    assert cone.contains(Z2, diag(-0.4, 1.0))
    assert not cone.contains(Z2, diag(-0.6, 1.0))
    with pytest.raises(DimensionMismatch):
        Cone.interp(0.5, n=3)


@pytest.mark.parametrize("cone", [
    Cone.positive_cone(3), Cone.gamma_m(3, 1), Cone.gamma_m(3, 2), Cone.gamma_m(3, 3),
    Cone.m_monge(3, 2), Cone.interp(0.0), Cone.interp(1.0),
])
def test_scaling_and_identity(cone):
    z = np.zeros(cone.n, dtype=complex)
    assert cone.contains(z, identity(cone.n))
    rng = np.random.default_rng(8)
    for _ in range(50):
        a = sample_hermitian(cone.n, rng)
        if cone.contains(z, a):
            for t in (1e-3, 0.5, 2.0, 1e3):
                assert cone.contains(z, t * a)


def test_gamma_m_nesting():
    rng = np.random.default_rng(3)
    for _ in range(300):
        a = sample_hermitian(4, rng)
        for m in range(2, 5):
            if Cone.gamma_m(4, m).contains(np.zeros(4, dtype=complex), a):
                assert Cone.gamma_m(4, m - 1).contains(np.zeros(4, dtype=complex), a)


def test_weighted_background():
    cone = Cone.positive_cone(2, diagonal_weight_form(2, 1.0))
    z = np.array([1.0, 0.0], dtype=complex)
    # eigenvalues of diag(1, 1) relative to diag(2, 1) are (0.5, 1)
    np.testing.assert_allclose(cone.spectrum(z, identity(2)), [0.5, 1.0], atol=1e-12)
    assert cone.contains(z, random_positive(2, np.random.default_rng(0)))
    assert not cone.contains(z, diag(-1.0, 1.0))


@pytest.mark.parametrize("cone, samples", [
    (Cone.gamma_m(3, 2), 500), (Cone.positive_cone(2), 100), (Cone.interp(0.5), 200),
])
def test_unitary_invariance(cone, samples):
    report = check_unitary_invariance(cone, samples, seed=3)
    assert report.passed, report.witnesses


def test_unitary_invariance_needs_identity_background():
    with pytest.raises(UnsupportedBackground):
        check_unitary_invariance(Cone.gamma_m(2, 1, diagonal_weight_form(2, 1.0)), 10)


@pytest.mark.parametrize("cone", [Cone.gamma_m(3, 2), Cone.positive_cone(3), Cone.interp(1.0)])
def test_convexity(cone):
    report = check_convexity(cone, 500, seed=1, workers=2)
    assert report.passed, report.witnesses


@pytest.mark.parametrize("cone", [Cone.gamma_m(4, 2), Cone.m_monge(4, 3), Cone.interp(0.3)])
def test_positive_matrices_lie_in_every_cone(cone):
    assert check_contains_positive(cone, 200, seed=5).passed


def test_intersection():
    both = Cone.intersection(Cone.gamma_m(3, 2), Cone.m_monge(3, 2))
    assert both.contains(Z3, identity(3))
    assert both.contains(Z3, diag(-1.0, 2.0, 3.0))
    assert not both.contains(Z3, diag(-1.0, 1.0, 3.0))


def test_intersection_needs_members_over_one_background():
    with pytest.raises(ValueError):
        Cone.intersection()
    with pytest.raises(ValueError):
        Cone.intersection(Cone.gamma_m(3, 2), Cone.m_monge(3, 2, diagonal_weight_form(3, 1.0)))
    with pytest.raises(DimensionMismatch):
        Cone.intersection(Cone.gamma_m(3, 2), Cone.gamma_m(2, 1))
