import math

import numpy as np
import pytest

from hlab.checks import Barrier
from hlab.models import Operator, Radial
from hlab.models.Errors import BadRadius, NegativeDensity, ZeroDensity
from hlab.models.Field import perturbed_quadratic, quadratic
from hlab.models.Grid import GridDomain
from hlab.models.Hermitian import identity


@pytest.mark.parametrize("n", [2, 3, 4])
def test_constant_density_gives_quadratic(n):
    density = Radial.constant(Radial.ma_normalization(n))
    profile = Barrier.radial_ma_solve(density, n)
    np.testing.assert_allclose(profile.v, profile.r ** 2 - 1.0, atol=1e-8)
    np.testing.assert_allclose(profile.vprime, 2.0 * profile.r, atol=1e-10)
    assert profile.sup_deficit() == pytest.approx(1.0, abs=1e-8)

    tangential, radial = profile.branches(np.array([0.0, 0.3, 0.9]))
    np.testing.assert_allclose(tangential, 1.0, atol=1e-10)
    np.testing.assert_allclose(radial, 1.0, atol=1e-10)
    np.testing.assert_allclose(profile.hessian(np.array([0.3, 0.4j] + [0.0] * (n - 2))), identity(n), atol=1e-10)
    assert profile.at(np.array([0.6] + [0.0] * (n - 1))) == pytest.approx(0.36 - 1.0, abs=1e-8)


@pytest.mark.parametrize("n, c", [(2, 5.0), (3, 0.5)])
def test_sup_deficit_of_constant_density(n, c):
    profile = Barrier.radial_ma_solve(Radial.constant(c), n)
    assert Barrier.sup_deficit(profile) == pytest.approx((c / Radial.ma_normalization(n)) ** (1.0 / n), rel=1e-8)


def test_indicator_density_is_continuous_through_the_jump():
    profile = Barrier.radial_ma_solve(Radial.indicator(1.0, 0.5), 2)
    assert 0.5 in profile.r
    assert np.all(np.diff(profile.v) >= 0.0)
    assert profile.v[-1] == 0.0
    _, radial = profile.branches(np.array([0.75]))
    assert radial[0] == 0.0


def test_lq_norms():
    assert Barrier.lq_norm(Radial.constant(1.0), 1, 2) == pytest.approx(math.pi ** 2 / 2, rel=1e-10)
    assert Barrier.lq_norm(Radial.indicator(1.0, 0.5), 2, 2) == pytest.approx(math.sqrt(math.pi ** 2 / 32), rel=1e-8)
    assert Barrier.lq_norm(Radial.constant(1.0), 2, 2, radius=0.5) == pytest.approx(math.sqrt(math.pi ** 2 / 32), rel=1e-10)
    with pytest.raises(ValueError):
        Barrier.lq_norm(Radial.constant(1.0), 0.5, 2)


@pytest.mark.parametrize("density", [Radial.constant(1.0), Radial.indicator(2.0, 0.3), Radial.poly([1.0, 0.0, 3.0])])
def test_kolodziej_ratio_is_scale_invariant(density):
    base = Barrier.kolodziej_ratio(density, 2, 2)
    assert Barrier.kolodziej_ratio(density.scaled(7.0), 2, 2) == pytest.approx(base, rel=1e-9)


def test_deficit_grows_with_the_density():
    deficits = [Barrier.radial_ma_solve(Radial.poly([c, 1.0]), 3).sup_deficit() for c in range(1, 11)]
    assert all(low < high for low, high in zip(deficits, deficits[1:]))
    small = Barrier.radial_ma_solve(Radial.poly([1.0, 1.0]), 3)
    large = Barrier.radial_ma_solve(Radial.poly([2.0, 1.0]), 3)
    assert np.all(large.v <= small.v + 1e-12)


def test_refinement_order():
    density = Radial.poly([0.0, 1.0])
    reference = Barrier.radial_ma_solve(density, 3, M=4096).sup_deficit()
    coarse = abs(Barrier.radial_ma_solve(density, 3, M=128).sup_deficit() - reference)
    fine = abs(Barrier.radial_ma_solve(density, 3, M=256).sup_deficit() - reference)
    assert math.log2(coarse / fine) >= 1.8


def test_density_errors():
    with pytest.raises(NegativeDensity):
        Barrier.radial_ma_solve(Radial.poly([1.0, -2.0]), 2)
    with pytest.raises(NegativeDensity):
        Radial.from_tag("poly:-1")
    with pytest.raises(ValueError):
        Radial.from_tag("gaussian:1")
    with pytest.raises(ZeroDensity):
        Barrier.kolodziej_ratio(Radial.constant(0.0), 2, 2)
    with pytest.raises(ValueError):
        Barrier.radial_ma_solve(Radial.constant(1.0), 2, M=16)


def test_from_tag():
    assert Radial.from_tag("constant:2")(0.5) == 2.0
    assert Radial.from_tag("indicator:1:0.5")(np.array([0.2, 0.7])).tolist() == [1.0, 0.0]
    assert Radial.from_tag("poly:1,0,3")(0.5) == pytest.approx(1.75)


def test_profile_csv_header():
    text = Barrier.radial_ma_solve(Radial.constant(1.0), 2, M=64).to_csv()
    assert text.splitlines()[0] == "r,v,vprime,tangential,radial"


def test_barrier_inequality_for_quadratic():
    grid = GridDomain.tensor(2, per_axis=9)
    report = Barrier.barrier_inequality_check(Operator.monge_ampere(2), quadratic(2), Radial.constant(1.0), grid)
    assert report.passed
    assert report.epsilon == pytest.approx(0.0, abs=1e-8)


def test_barrier_inequality_for_perturbed_quadratic():
    grid = GridDomain.sampled(2, count=2000, seed=3)
    report = Barrier.barrier_inequality_check(Operator.sigma_m(2, 1), perturbed_quadratic(2),
                                              Radial.poly([1.0, 0.0, 1.0]), grid)
    assert report.passed, report.to_dict()


def test_barrier_needs_unit_ball():
    grid = GridDomain.sampled(2, center=(0.5, 0.0), count=100)
    with pytest.raises(BadRadius):
        Barrier.barrier_inequality_check(Operator.monge_ampere(2), quadratic(2), Radial.constant(1.0), grid)


@pytest.mark.parametrize("density", [Radial.poly([1.0, 0.0, 3.0]), Radial.poly([0.5, 2.0]), Radial.indicator(2.0, 0.6)],
                         ids=lambda d: d.tag)
def test_profile_reconstructs_nonconstant_densities(density):
    n = 3
    profile = Barrier.radial_ma_solve(density, n)
    r = np.array([0.05, 0.2, 0.45, 0.7, 0.95])
    z = np.zeros((len(r), n), dtype=complex)
    z[:, 0] = r * np.exp(0.3j)
    det = np.real(np.linalg.det(profile.hessian(z)))
    np.testing.assert_allclose(Radial.ma_normalization(n) * det, density(r), rtol=1e-9, atol=1e-12)
    # the cumulative quadrature of v' agrees with v' itself
    h = 1e-5
    slope = (profile.value(r + h) - profile.value(r - h)) / (2.0 * h)
    np.testing.assert_allclose(slope, profile.derivative(r), rtol=1e-6)
    np.testing.assert_allclose(profile.value(profile.r[::16]), profile.v[::16], atol=1e-12)


@pytest.mark.parametrize("t", [0.1, 10.0])
def test_solution_scales_with_the_density(t):
    n = 3
    density = Radial.poly([1.0, 0.0, 3.0])
    base = Barrier.radial_ma_solve(density, n)
    scaled = Barrier.radial_ma_solve(density.scaled(t), n)
    np.testing.assert_allclose(scaled.r, base.r)
    np.testing.assert_allclose(scaled.v, t ** (1.0 / n) * base.v, rtol=1e-10, atol=1e-14)
    assert scaled.sup_deficit() == pytest.approx(t ** (1.0 / n) * base.sup_deficit(), rel=1e-10)


def test_barrier_inequality_for_sigma_2():
    grid = GridDomain.tensor(3, per_axis=7)
    report = Barrier.barrier_inequality_check(Operator.sigma_m(3, 2), quadratic(3), Radial.poly([1.0, 0.0, 2.0]), grid)
    assert report.passed, report.to_dict()
    assert report.extra["operator"] == "sigma_2"
    assert report.epsilon >= -Barrier.BARRIER_TOLERANCE
