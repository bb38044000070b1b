import math

import numpy as np
import pytest

from bergman_lab.approx import approximate
from bergman_lab.funcmodel import FunctionModel, Polynomial, make_test_function
from bergman_lab.jordan import (
    BranchError, UnivalenceError, boundary_ls_polyfit, farrell_dilate, farrell_error, fit_study,
    jordan_approximate, make_map, next_degree, parse_domain, pullback_norm, rho_study,
)
from bergman_lab.spaces import bergman_norm
from bergman_lab.weights import parse_weight

ONE = parse_weight("catalog:constant")
LINANG = parse_weight("catalog:linang")
PHI = make_map("poly", c2=0.3)
IDENT = make_map("identity")
Z = make_test_function("monomial", {"n": 1})
UNIT = make_test_function("monomial", {"n": 0})


def pole_at(a):
    return make_test_function("pole", {"a": a.real, "a_im": a.imag})


# --- maps ----------------------------------------------------------------------

def test_identity_map():
    u = np.array([0.3 + 0.2j, -0.9j])
    assert np.array_equal(IDENT.forward(u), u) and np.array_equal(IDENT.inverse(u), u)
    assert parse_domain("disk") == IDENT and IDENT.spec() == "disk"


@pytest.mark.parametrize("c2, c3", [(0.6, 0), (0.2, 0.25), (0.5, 0)])
def test_univalence_region_enforced(c2, c3):
    with pytest.raises(UnivalenceError):
        make_map("poly", c2=c2, c3=c3)


def test_certificate_fields():
    assert PHI.min_divided_difference > 0
    # |1 + c2 (a + b)| >= 1 - 2 c2 on the circle
    assert PHI.min_divided_difference >= 1 - 2 * 0.3 - 1e-12
    assert PHI.univalence_radius == pytest.approx(1 / 0.6)


def test_parse_domain_round_trip():
    for src in ("poly:c2=0.3", "poly:c2=0.1,c3=0.2", "poly:c2=(0.1+0.2j)"):
        phi = parse_domain(src)
        assert parse_domain(phi.spec()) == phi
    for bad in ("ellipse:a=2", "poly:c4=0.1", "poly:c2"):
        with pytest.raises(UnivalenceError):
            parse_domain(bad)


def test_inverse_round_trip():
    rng = np.random.default_rng(7)
    u = np.sqrt(rng.uniform(0, 1, 500)) * np.exp(2j * np.pi * rng.uniform(0, 1, 500))
    for phi in (PHI, parse_domain("poly:c2=0.1,c3=0.2"), parse_domain("poly:c2=0.2j,c3=-0.1")):
        assert np.max(np.abs(phi.inverse(phi.forward(u)) - u)) < 1e-13


def test_inverse_continuation_fallback():
    # seed u = z lands outside the univalence disk for points near phi(-1)
    z = PHI.forward(np.array([-0.999, -0.99 + 0.1j]))
    assert np.allclose(PHI.forward(PHI.inverse(z)), z, atol=1e-14)
    assert np.all(np.abs(PHI.inverse(z)) < 1)


# --- pullback norms --------------------------------------------------------------

def test_area_of_cardioid_like_domain(rule):
    res = pullback_norm(UNIT, ONE, 2, PHI, rule)
    assert abs(res.power - 1.18 * math.pi) < 1e-12


def test_identity_pullback_equals_bergman_norm(rule):
    f = make_test_function("geometric", {"lambda": 1, "beta": 0.3})
    for w in (ONE, LINANG, parse_weight("catalog:absreal")):
        for p in (1.0, 2.0, 3.5):
            a = pullback_norm(f, w, p, IDENT, rule).value
            b = bergman_norm(f, w, p, rule).value
            assert abs(a - b) <= 1e-12 * b


def test_pullback_z_monte_carlo_oracle(rule):
    rng = np.random.default_rng(20240601)
    n = 10**6
    u = np.sqrt(rng.uniform(0, 1, n)) * np.exp(2j * np.pi * rng.uniform(0, 1, n))
    samples = math.pi * np.abs(PHI.forward(u)) ** 2 * np.abs(PHI.derivative(u)) ** 2
    mean, sigma = samples.mean(), samples.std(ddof=1) / math.sqrt(n)
    value = pullback_norm(Z, ONE, 2, PHI, rule).power
    assert abs(value - mean) <= 3 * sigma
    # closed form for c2 real: pi (1/2 + 3 c2^2 + c2^4)
    assert value == pytest.approx(math.pi * (0.5 + 3 * 0.09 + 0.0081), rel=1e-13)


# --- Farrell approximants ------------------------------------------------------------

def test_identity_farrell_is_jacobian_dilation():
    f = make_test_function("exp")
    z = np.array([0.1 + 0.2j, -0.5, 0.7j])
    for rho in (0.3, 0.9):
        F = farrell_dilate(f, IDENT, rho, 2)
        assert np.allclose(F(z), rho * f.eval(rho * z), rtol=1e-15)


@pytest.mark.parametrize("rho", [0.5, 0.8, 0.95])
def test_image_area_formula(rule, rho):
    F = farrell_dilate(UNIT, PHI, rho, 2)
    val = pullback_norm(F.to_model(), ONE, 2, PHI, rule).power
    assert abs(val - math.pi * rho**2 * (1 + 2 * 0.09 * rho**2)) < 1e-8


def test_farrell_converges_to_f_on_grid():
    r = np.linspace(0, 1, 33)
    u = (r[:, None] * np.exp(2j * np.pi * np.arange(64) / 64)[None, :]).ravel()
    z = PHI.forward(u)
    sups = [np.max(np.abs(farrell_dilate(Z, PHI, rho, 2)(z) - z)) for rho in (0.9, 0.99, 0.999)]
    assert sups[0] > sups[1] > sups[2] and sups[2] < 1e-2


def test_farrell_preimage_matches_inverse_path():
    F = farrell_dilate(make_test_function("exp"), PHI, 0.9, 1.5)
    u = np.array([0.2 + 0.1j, -0.7, 0.95j])
    assert np.allclose(F(PHI.forward(u)), F.at_preimage(u), rtol=1e-13)


def test_farrell_parameter_errors():
    for rho in (0, 1, 1.2):
        with pytest.raises(ValueError):
            farrell_dilate(Z, PHI, rho, 2)


def test_branch_guard_triggers_on_bad_map():
    # uncertified map: phi' < 0 on (-1, -0.56) while phi'(u/2) > 0, so psi' is negative there
    from bergman_lab.jordan import ConformalMap

    bad = ConformalMap("poly", 0.9 + 0j, 0j)
    with pytest.raises(BranchError):
        farrell_dilate(Z, bad, 0.5, 2)


def test_rho_stage_monotone(rule):
    corpus = (Z, make_test_function("exp"), pole_at(complex(PHI.forward(1.2))))
    for f in corpus:
        e = rho_study(f, ONE, 2, PHI, [0.5, 0.7, 0.9, 0.99], rule).column("error_p")
        assert np.all(np.diff(e) < 1e-8)


# --- boundary fits ---------------------------------------------------------------

def test_boundary_fit_recovers_polynomials():
    q = Polynomial([1, -2j, 0.5, 0.25])
    fit = boundary_ls_polyfit(q.to_model(), PHI, 3)
    assert fit.ls_residual < 1e-10 and fit.sup_residual < 1e-10
    assert np.allclose(fit.polynomial.monomial().coeffs, q.coeffs, atol=1e-10)


def test_boundary_fit_identity_geometric_decay():
    f = FunctionModel(eval=lambda z: 1 / (1 - 0.5 * np.asarray(z, dtype=complex)), deriv=None, name="1/(1-z/2)")
    fit = boundary_ls_polyfit(f, IDENT, 10)
    # truncation tail on the circle: sum_{n>10} 2^-n = 2^-10
    assert fit.sup_residual <= 2.0**-10 * 2


def test_boundary_fit_residual_decreasing():
    F = farrell_dilate(pole_at(complex(PHI.forward(1.2))), PHI, 0.99, 2)
    sups = [boundary_ls_polyfit(F, PHI, d).sup_residual for d in (5, 10, 20, 30)]
    assert all(a > b for a, b in zip(sups, sups[1:]))


def test_boundary_fit_collocation_count():
    with pytest.raises(ValueError):
        boundary_ls_polyfit(Z, PHI, 10, M=40)


# --- two-stage approximation ---------------------------------------------------------

def test_jordan_polynomial_shortcut(rule):
    res = jordan_approximate(make_test_function("monomial", {"n": 3}), ONE, 2, PHI, 1e-6, rule)
    assert res.degree == 3 and res.achieved_error < 1e-10
    q, e = res
    assert e == res.achieved_error


def test_jordan_pole_moderate_distance(rule):
    f = pole_at(complex(PHI.forward(1.3)))
    res = jordan_approximate(f, ONE, 2, PHI, 1e-3, rule)
    assert res.achieved_error <= 1e-3 and res.dilation_error <= 5e-4
    assert res.degree <= 20


def test_identity_agrees_with_disk_pipeline(rule):
    f = make_test_function("geometric", {"lambda": 0.5, "beta": 1})
    a = jordan_approximate(f, LINANG, 2, IDENT, 1e-3, rule).achieved_error
    b = approximate(f, LINANG, 2, 1e-3, rule).achieved_error
    assert 0.5 <= a / b <= 2 or max(a, b) <= 1e-3


def test_error_decreases_with_eps(rule):
    f = pole_at(complex(PHI.forward(1.5)))
    errs = [jordan_approximate(f, ONE, 2, PHI, eps, rule).achieved_error for eps in (1e-2, 1e-3, 1e-4)]
    assert errs[0] > errs[1] > errs[2] and errs[2] <= 1e-4


def test_farrell_error_is_small_near_one(rule):
    f = pole_at(complex(PHI.forward(1.2)))
    assert farrell_error(f, ONE, 2, PHI, 0.999, rule) < farrell_error(f, ONE, 2, PHI, 0.9, rule)


def test_next_degree():
    assert [next_degree(d) for d in (1, 8, 16, 40)] == [2, 9, 18, 45]


def test_fit_study_rows(rule):
    t = fit_study(pole_at(complex(PHI.forward(1.2))), ONE, 2, PHI, 0.99, [4, 8, 16], rule)
    assert list(t.column("param")) == [4, 8, 16]
    assert t.metadata["sweep"] == "degree" and t.metadata["domain"] == "poly:c2=0.3"
    assert np.all(np.diff(t.column("error_p")) < 0)
