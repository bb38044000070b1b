"""Weighted Bergman norms, Dirichlet and Besov seminorms, and the closed-form
series norms for angular and product weights."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .funcmodel import FunctionModel
from .quadrature import QuadratureRule, integrate
from .weights import WeightSpec, adapted_rule, angular_mass, radial_moments

SPACES = ("bergman", "dirichlet", "besov")


class NormError(ValueError):
    pass


class TailBoundError(NormError):
    """The truncated Parseval series has no convergent tail certificate."""


@dataclass(frozen=True)
class NormResult:
    """``value`` is the norm; ``power`` is the integral (the p-th power).

    For ``p < 1`` the quantity is a metric, not a norm: ``metric`` is set
    and ``value`` equals ``power`` (no root is taken).
    """

    value: float
    power: float
    p: float
    space: str
    n_r: int
    n_theta: int
    R: float
    metric: bool = False


def _result(power: float, p: float, space: str, rule: QuadratureRule) -> NormResult:
    power = max(power, 0.0)
    metric = p < 1
    value = power if metric else power ** (1.0 / p)
    return NormResult(value, power, p, space, rule.n_r, rule.n_theta, rule.R, metric)


def _check_p(p: float) -> None:
    if not p > 0:
        raise NormError(f"p must be positive, got {p}")


def lp_integral(
    values: Callable, w: WeightSpec, p: float, rule: QuadratureRule, extra: Callable | None = None,
    workers: int | None = None,
) -> float:
    """``int |values(z)|^p * extra(r) * w dA`` over the rule's disk."""
    rule = adapted_rule(rule, w)

    def g(r, t):
        z = r * np.exp(1j * t)
        out = np.abs(values(z)) ** p * w.checked_polar(r, t)
        if extra is not None:
            out = out * extra(r)
        return out

    return integrate(rule, g, workers)


def bergman_norm(f: FunctionModel, w: WeightSpec, p: float, rule: QuadratureRule, workers=None) -> NormResult:
    _check_p(p)
    return _result(lp_integral(f.eval, w, p, rule, workers=workers), p, "bergman", rule)


def dirichlet_seminorm(f: FunctionModel, w: WeightSpec, p: float, rule: QuadratureRule, workers=None) -> NormResult:
    """Seminorm ``(int |f'|^p w dA)^(1/p)``; the constant term is ignored."""
    _check_p(p)
    return _result(lp_integral(f.deriv, w, p, rule, workers=workers), p, "dirichlet", rule)


def besov_factor(p: float) -> Callable:
    return lambda r: (1.0 - r * r) ** (p - 2.0)


def besov_seminorm(f: FunctionModel, w: WeightSpec, p: float, rule: QuadratureRule, workers=None) -> NormResult:
    """Seminorm ``(int (1-|z|^2)^(p-2) |f'|^p w dA)^(1/p)``.

    Density is only established for ``p >= 2``; smaller ``p`` is computed
    with a warning. At ``p = 2`` this coincides with the Dirichlet seminorm.
    """
    _check_p(p)
    if p < 2:
        warnings.warn(f"Besov seminorm with p={p} < 2 lies outside the range where density is known")
    return _result(lp_integral(f.deriv, w, p, rule, besov_factor(p), workers), p, "besov", rule)


def space_norm(space: str, f: FunctionModel, w: WeightSpec, p: float, rule: QuadratureRule, workers=None) -> NormResult:
    if space == "bergman":
        return bergman_norm(f, w, p, rule, workers)
    if space == "dirichlet":
        return dirichlet_seminorm(f, w, p, rule, workers)
    if space == "besov":
        return besov_seminorm(f, w, p, rule, workers)
    raise NormError(f"unknown space {space!r}; expected one of {SPACES}")


def difference_power(space: str, f, g, w: WeightSpec, p: float, rule: QuadratureRule, workers=None) -> float:
    """p-th power of the (semi)norm of ``f - g`` in ``space``."""
    _check_p(p)
    if space == "bergman":
        return lp_integral(lambda z: f.eval(z) - g.eval(z), w, p, rule, workers=workers)
    if space == "dirichlet":
        return lp_integral(lambda z: f.deriv(z) - g.deriv(z), w, p, rule, workers=workers)
    if space == "besov":
        return lp_integral(lambda z: f.deriv(z) - g.deriv(z), w, p, rule, besov_factor(p), workers)
    raise NormError(f"unknown space {space!r}; expected one of {SPACES}")


@dataclass(frozen=True)
class SeriesNorm:
    """Truncated closed-form squared norm with a certified remainder estimate."""

    value: float
    tail_bound: float
    terms: int

    def __float__(self):
        return self.value


def _coefficients(taylor, N: int) -> np.ndarray:
    if isinstance(taylor, FunctionModel):
        return taylor.coefficients(N)
    return np.asarray(taylor(np.arange(N + 1)), dtype=complex)


def _geometric_tail(abs2: np.ndarray, scale: np.ndarray) -> float:
    """Remainder of ``sum_{n>N} abs2[n]*scale[n]`` assuming geometric decay.

    The ratio is the largest of the last eight consecutive ratios of
    ``|a_n|^2``, and ``scale`` is nonincreasing so its last value bounds the rest.
    """
    nz = np.flatnonzero(abs2)
    if nz.size == 0 or nz[-1] < len(abs2) - 9:
        # coefficients vanish identically near the end: polynomial input
        return 0.0
    tail = abs2[-9:]
    ratios = tail[1:] / tail[:-1]
    q = float(np.max(ratios))
    if not q < 1.0:
        raise TailBoundError(f"coefficient decay ratio {q:.6g} does not certify a convergent tail")
    return float(abs2[-1] * scale[-1] * q / (1.0 - q))


def closed_form_norm_angular(taylor, v, N: int = 200) -> SeriesNorm:
    """``(int v) * sum_{n<=N} |a_n|^2 / (2(n+1))`` for an angular weight ``v``."""
    a = _coefficients(taylor, N)
    abs2 = np.abs(a) ** 2
    n = np.arange(N + 1)
    scale = 1.0 / (2.0 * (n + 1))
    mass = angular_mass(v)
    tail = mass * _geometric_tail(abs2, scale)
    return SeriesNorm(mass * math.fsum((abs2 * scale).tolist()), tail, N + 1)


def closed_form_norm_product(taylor, omega, v, N: int = 200) -> SeriesNorm:
    """``(int v) * sum_{n<=N} |a_n|^2 omega_n`` with radial moments ``omega_n``."""
    a = _coefficients(taylor, N)
    abs2 = np.abs(a) ** 2
    moments = radial_moments(omega, N)
    mass = angular_mass(v)
    tail = mass * _geometric_tail(abs2, moments)
    return SeriesNorm(mass * math.fsum((abs2 * moments).tolist()), tail, N + 1)
