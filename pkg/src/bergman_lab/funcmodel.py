"""Polynomials and the analytic-function model shared by every other module.

All evaluation is vectorized: ``FunctionModel.eval`` and ``.deriv`` accept a
complex scalar or a NumPy array of complex points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


class FunctionModelError(ValueError):
    """Unknown catalog kind or parameters outside their admissible range."""


class PolarPoint(NamedTuple):
    r: float
    theta: float

    @classmethod
    def from_complex(cls, z: complex) -> "PolarPoint":
        theta = math.atan2(z.imag, z.real) % TWO_PI
        # atan2 can round a tiny negative angle up to exactly 2*pi
        if theta >= TWO_PI:
            theta = 0.0
        return cls(abs(z), theta)

    def to_complex(self) -> complex:
        return complex(self.r * math.cos(self.theta), self.r * math.sin(self.theta))


def polar_angle(z) -> np.ndarray:
    """Argument of ``z`` mapped into ``[0, 2*pi)``."""
    theta = np.mod(np.angle(z), TWO_PI)
    return np.where(theta >= TWO_PI, 0.0, theta)


def _trim(coeffs: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(coeffs)
    if nz.size == 0:
        return coeffs[:1] * 0
    return coeffs[: nz[-1] + 1]


@dataclass(frozen=True, eq=False)
class Polynomial:
    """Polynomial with complex coefficients; ``coeffs[n]`` multiplies ``z**n``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=complex))
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(c)):
            raise ValueError("polynomial coefficients must be finite")
        c = _trim(c.copy())
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return self.degree == 0 and self.coeffs[0] == 0

    def __call__(self, z):
        return poly_eval(self, z)

    def derivative(self) -> "Polynomial":
        if self.degree == 0:
            return Polynomial([0.0])
        return Polynomial(self.coeffs[1:] * np.arange(1, len(self.coeffs)))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        n = max(len(self.coeffs), len(other.coeffs))
        a = np.zeros(n, complex)
        a[: len(self.coeffs)] += self.coeffs
        a[: len(other.coeffs)] -= other.coeffs
        return Polynomial(a)

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return np.array_equal(self.coeffs, other.coeffs)

    def __repr__(self):
        return f"Polynomial(degree={self.degree}, coeffs={self.coeffs.tolist()})"

    def to_model(self, name: str = "polynomial") -> "FunctionModel":
        c = self.coeffs
        d = self.derivative()
        return FunctionModel(
            eval=self,
            deriv=d,
            taylor=lambda n: _padded(c, n),
            analyticity_radius=math.inf,
            degree=self.degree,
            name=name,
        )


def poly_eval(p: Polynomial, z):
    """Horner evaluation of ``p`` at ``z`` (scalar or array)."""
    z = np.asarray(z, dtype=complex)
    c = p.coeffs
    acc = np.full(z.shape, c[-1], dtype=complex)
    for a in c[-2::-1]:
        acc = acc * z + a
    return acc[()] if acc.ndim == 0 else acc


def _padded(c: np.ndarray, n):
    n_arr = np.asarray(n)
    out = np.zeros(n_arr.shape, complex)
    inside = n_arr < len(c)
    out[inside] = c[n_arr[inside]]
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class FunctionModel:
    """An analytic function on a disk centred at the origin.

    ``taylor`` maps an integer (or integer array) ``n`` to the Maclaurin
    coefficient(s) ``a_n``; it is ``None`` when coefficients are unknown.
    ``degree`` is set only for polynomials, whose tails vanish identically.
    """

    eval: Callable
    deriv: Callable
    taylor: Optional[Callable] = None
    analyticity_radius: float = math.inf
    degree: Optional[int] = None
    name: str = "f"
    params: dict = field(default_factory=dict)

    def __call__(self, z):
        return self.eval(z)

    def coefficients(self, n_max: int) -> np.ndarray:
        """Coefficients ``a_0 .. a_{n_max}`` as a complex array."""
        if self.taylor is None:
            raise FunctionModelError(f"{self.name} has no Taylor coefficient generator")
        return np.asarray(self.taylor(np.arange(n_max + 1)), dtype=complex)


def _check_int(name, value):
    if float(value) != int(value) or value < 0:
        raise FunctionModelError(f"{name} must be a non-negative integer, got {value}")
    return int(value)


def _monomial(n: int) -> FunctionModel:
    c = np.zeros(n + 1, complex)
    c[n] = 1.0
    return Polynomial(c).to_model(name=f"monomial,n={n}")


def _geometric_coeffs(lam: complex, beta: float, n):
    n_arr = np.asarray(n)
    top = int(n_arr.max()) if n_arr.size else 0
    j = np.arange(top)
    ratios = lam * (beta + j) / (j + 1.0)
    c = np.concatenate(([1.0 + 0j], np.cumprod(ratios)))
    out = c[n_arr]
    return out[()] if np.ndim(out) == 0 else out


def _geometric(lam: complex, beta: float, label: str) -> FunctionModel:
    def f(z):
        z = np.asarray(z, dtype=complex)
        return np.exp(-beta * np.log(1.0 - lam * z))

    def df(z):
        z = np.asarray(z, dtype=complex)
        return beta * lam * np.exp(-(beta + 1.0) * np.log(1.0 - lam * z))

    radius = math.inf if lam == 0 else 1.0 / abs(lam)
    return FunctionModel(
        eval=f,
        deriv=df,
        taylor=lambda n: _geometric_coeffs(lam, beta, n),
        analyticity_radius=radius,
        name=label,
        params={"lambda": lam, "beta": beta},
    )


def _exp_coeffs(n):
    n_arr = np.asarray(n)
    top = int(n_arr.max()) if n_arr.size else 0
    c = np.concatenate(([1.0], np.cumprod(1.0 / np.arange(1, top + 1))))
    out = c[n_arr].astype(complex)
    return out[()] if np.ndim(out) == 0 else out


def _pole(a: complex, label: str) -> FunctionModel:
    # 1/(a - z) = (1/a) * sum (z/a)^n
    def f(z):
        return 1.0 / (a - np.asarray(z, dtype=complex))

    def df(z):
        return 1.0 / (a - np.asarray(z, dtype=complex)) ** 2

    return FunctionModel(
        eval=f,
        deriv=df,
        taylor=lambda n: (1.0 / a) * (1.0 / a) ** np.asarray(n),
        analyticity_radius=abs(a),
        name=label,
        params={"a": a},
    )


CATALOG_KINDS = ("monomial", "geometric", "exp", "pole")


def make_test_function(kind: str, params: dict | None = None) -> FunctionModel:
    """Build a corpus function.

    Kinds
    -----
    ``monomial``  ``n``: z**n
    ``geometric`` ``lambda``, ``beta`` (and optional ``phase``): (1 - lambda e^{i phase} z)^(-beta),
                  principal branch, |lambda| <= 1, beta > 0
    ``exp``       exp(z)
    ``pole``      ``a`` (and optional ``a_im``): 1/(a - z), a != 0
    """
    params = dict(params or {})
    if kind == "monomial":
        n = _check_int("n", params.pop("n", 1))
        model = _monomial(n)
    elif kind == "geometric":
        lam_abs = float(params.pop("lambda", 1.0))
        phase = float(params.pop("phase", 0.0))
        beta = float(params.pop("beta", 1.0))
        if not abs(lam_abs) <= 1.0:
            raise FunctionModelError(f"geometric kind needs |lambda| <= 1, got {lam_abs}")
        if not beta > 0:
            raise FunctionModelError(f"geometric kind needs beta > 0, got {beta}")
        lam = lam_abs if phase == 0.0 else lam_abs * complex(math.cos(phase), math.sin(phase))
        label = f"geometric,lambda={lam_abs:g},beta={beta:g}" + (f",phase={phase:g}" if phase else "")
        model = _geometric(lam, beta, label)
    elif kind == "exp":
        model = FunctionModel(
            eval=lambda z: np.exp(np.asarray(z, dtype=complex)),
            deriv=lambda z: np.exp(np.asarray(z, dtype=complex)),
            taylor=_exp_coeffs,
            analyticity_radius=math.inf,
            name="exp",
        )
    elif kind == "pole":
        a = complex(float(params.pop("a", 2.0)), float(params.pop("a_im", 0.0)))
        if a == 0:
            raise FunctionModelError("pole kind needs a != 0")
        model = _pole(a, f"pole,a={a.real:g}" + (f",a_im={a.imag:g}" if a.imag else ""))
    else:
        raise FunctionModelError(f"unknown function kind {kind!r}; expected one of {CATALOG_KINDS}")
    if params:
        raise FunctionModelError(f"unexpected parameters for {kind}: {sorted(params)}")
    return model


def parse_function(src: str) -> FunctionModel:
    """Parse ``"kind,key=value,..."`` as used by the CLI ``--f`` flag."""
    parts = [s.strip() for s in src.split(",") if s.strip()]
    if not parts:
        raise FunctionModelError("empty function description")
    params = {}
    for item in parts[1:]:
        key, sep, value = item.partition("=")
        if not sep:
            raise FunctionModelError(f"expected key=value, got {item!r}")
        try:
            params[key.strip()] = float(value)
        except ValueError:
            raise FunctionModelError(f"parameter {key!r} is not a number: {value!r}") from None
    return make_test_function(parts[0], params)


def partial_sums(f: FunctionModel, z, n_max: int) -> np.ndarray:
    """Successive Taylor partial sums ``S_0(z) .. S_{n_max}(z)`` at a single point."""
    c = f.coefficients(n_max)
    return np.cumsum(c * complex(z) ** np.arange(n_max + 1))
