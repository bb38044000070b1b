import math

import numpy as np
import pytest
from scipy import integrate as si

from bergman_lab.expr import ExprSyntaxError
from bergman_lab.funcmodel import PolarPoint
from bergman_lab.quadrature import build_rule
from bergman_lab.weights import (
    ANGULAR, GENERAL, PRODUCT, RADIAL, DivergentIntegralError, WeightError, WeightEvaluationError, angular_mass,
    angular_profile, eval_weight, parse_weight, radial_moment, radial_moments, radial_profile, total_mass,
)
from bergman_lab.conditions import check_radial_integrability


def test_standard_is_radial():
    w = parse_weight("catalog:standard,alpha=1")
    assert w.variant == RADIAL
    assert eval_weight(w, PolarPoint(0.5, 1.0)) == 0.75


def test_absreal_expression_stays_general():
    w = parse_weight("expr:abs(x)")
    assert w.variant == GENERAL
    assert abs(float(w.at(-0.3)) - 0.3) < 1e-16


def test_linang_expression_is_promoted_to_angular():
    w = parse_weight("expr:1 - t/(2*pi)")
    assert w.variant == ANGULAR
    # the source is kept in canonical form
    assert w.source == "expr:1 - t / (2 * pi)"
    assert parse_weight(w.source).source == w.source


@pytest.mark.parametrize("src,variant", [
    ("expr:(1 - r^2)^2", RADIAL), ("expr:exp(-x^2 - y^2)", RADIAL), ("expr:(4*pi^2 - t^2)", ANGULAR),
    ("expr:1 + x*y", GENERAL), ("product:standard,alpha=1|linang", PRODUCT), ("catalog:gaussreal", GENERAL),
])
def test_promotion(src, variant):
    assert parse_weight(src).variant == variant


@pytest.mark.parametrize("src", ["expr:(1 - r^2)^2", "expr:exp(-x^2 - y^2)", "expr:1 + r^3"])
def test_promotion_is_sound(src):
    w = parse_weight(src)
    r = np.linspace(0, 1, 64, endpoint=False)[:, None]
    t = np.linspace(0, 2 * math.pi, 64, endpoint=False)[None, :]
    vals = w.polar(r * np.ones_like(t), t * np.ones_like(r))
    assert np.max(np.abs(vals - vals[:, :1])) <= 1e-10


def test_expression_matches_catalog():
    a, b = parse_weight("expr:exp(-r^2)"), parse_weight("catalog:gaussian")
    r, t = np.linspace(0, 0.99, 50), np.linspace(0, 6.2, 50)
    assert np.allclose(a.polar(r, t), b.polar(r, t), rtol=1e-15)


@pytest.mark.parametrize("src,p,value", [
    ("catalog:gaussian", PolarPoint(1.0, 2.0), math.exp(-1)),
    ("catalog:standard,alpha=2", PolarPoint(0.6, 0.0), 0.4096),
    ("catalog:polyang,alpha=1", PolarPoint(0.3, math.pi), 3 * math.pi**2),
    ("catalog:linang", PolarPoint(0.3, math.pi), 0.5),
    ("catalog:standard,alpha=1,normalized=1", PolarPoint(0.5, 0.0), 1.5),
    ("catalog:gaussreal", PolarPoint(0.5, 0.0), math.exp(-0.25)),
])
def test_eval_weight(src, p, value):
    assert abs(eval_weight(parse_weight(src), p) - value) < 1e-12


def test_syntax_error_position():
    with pytest.raises(ExprSyntaxError) as info:
        parse_weight("expr:1 - * r")
    assert info.value.pos == 4


@pytest.mark.parametrize("src", ["expr:x", "expr:r - 0.5", "catalog:polyang,alpha=-1"])
def test_negative_or_invalid_weights_rejected(src):
    with pytest.raises(WeightError):
        parse_weight(src)


@pytest.mark.parametrize("src", ["catalog:nope", "standard", "catalog:standard,beta=1", "product:linang|standard"])
def test_bad_sources(src):
    with pytest.raises(WeightError):
        parse_weight(src)


def test_evaluation_error_names_point():
    w = parse_weight("expr:1/r")
    with pytest.raises(WeightEvaluationError, match="r=0"):
        w.checked_polar(np.array([0.0, 0.5]), np.array([0.0, 0.0]))


@pytest.mark.parametrize("src,exact", [
    ("catalog:constant", math.pi),
    ("catalog:standard,alpha=1", math.pi / 2),
    ("catalog:gaussian", math.pi * (1 - math.exp(-1))),
    ("catalog:linang", math.pi / 2),
    ("catalog:polyang,alpha=1", 16 * math.pi**3 / 6),
])
def test_total_mass(src, exact, rule):
    assert abs(total_mass(parse_weight(src), rule) / exact - 1) < 1e-12


def test_total_mass_general_weight_against_dblquad(rule):
    # independent oracle: adaptive 2-D quadrature in Cartesian coordinates
    exact, _ = si.dblquad(lambda y, x: abs(x), -1, 1, lambda x: -math.sqrt(1 - x * x), lambda x: math.sqrt(1 - x * x))
    assert abs(exact - 4 / 3) < 1e-10
    assert abs(total_mass(parse_weight("catalog:absreal"), rule) / exact - 1) < 1e-5


def test_product_mass_is_fubini(rule):
    w = parse_weight("product:standard,alpha=1|linang")
    expected = radial_moment(w, 0) * angular_mass(w)
    assert abs(total_mass(w, rule) / expected - 1) < 1e-8


def test_divergent_mass_flagged(rule):
    with pytest.raises(DivergentIntegralError):
        total_mass(parse_weight("catalog:standard,alpha=-1.5"), rule)


@pytest.mark.parametrize("src,n,exact", [("constant", 0, 0.5), ("constant", 3, 0.125), ("standard,alpha=1", 1, 1 / 12)])
def test_radial_moment(src, n, exact):
    assert abs(radial_moment(radial_profile(src), n) - exact) < 1e-14


def test_radial_moments_nonincreasing():
    m = radial_moments(radial_profile("gaussian"), 30)
    assert np.all(np.diff(m) < 0)


def test_radial_moment_divergence():
    with pytest.raises(DivergentIntegralError):
        radial_moment(radial_profile("standard,alpha=-1.5"), 0)


@pytest.mark.parametrize("src,exact", [("constant", 2 * math.pi), ("linang", math.pi), ("polyang,alpha=1", 16 * math.pi**3 / 3)])
def test_angular_mass(src, exact):
    assert abs(angular_mass(angular_profile(src)) / exact - 1) < 1e-13


@pytest.mark.parametrize("alpha,finite", [(1.0, True), (-0.5, True), (-0.9, True), (-1.0, False), (-1.5, False)])
def test_integrability_checker_agrees_with_moment(alpha, finite):
    w = parse_weight(f"catalog:standard,alpha={alpha}")
    report = check_radial_integrability(w)
    assert report.passed is finite
    if finite:
        assert report.estimated_C == radial_moment(w, 0)
        assert abs(report.estimated_C - 0.5 / (alpha + 1)) < 1e-8


def test_rule_on_truncated_disk_rejected():
    with pytest.raises(WeightError):
        total_mass(parse_weight("catalog:constant"), build_rule(8, 16, 0.5))
