"""Bergman approximation on Jordan domains ``G = phi(D)``.

Domains are images of the unit disk under the polynomial maps
``phi(u) = u + c2 u^2 + c3 u^3`` with ``2|c2| + 3|c3| < 1``; in that range
``Re phi' > 0`` on the closed disk, so ``phi`` is univalent there and a little
beyond. Integrals over ``G`` are computed on the disk via ``z = phi(u)``,
``dA(z) = |phi'(u)|^2 dA(u)``.

The approximants are ``F_rho = f(psi_rho) (psi_rho')^(2/p)`` with
``psi_rho = phi(rho * phi^{-1}(z))``. They are analytic on a neighbourhood of
the closed domain and are then fitted by polynomials through boundary least
squares (the maximum principle turns a small boundary residual into a small
uniform error on the closure).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import ordered_map
from .approx import ApproximationError, ConvergenceTable, DilationStageError, _timed, bisect_dilation
from .arnoldi import ArnoldiPolynomial, SaturationError, arnoldi_lstsq
from .funcmodel import TWO_PI, FunctionModel, polar_angle
from .quadrature import QuadratureRule, integrate
from .spaces import NormResult, _check_p, _result
from .weights import WeightSpec, adapted_rule

CERT_POINTS = 64
NEWTON_MAX = 50
CONTINUATION_STEPS = 32


class UnivalenceError(ValueError):
    pass


class BranchError(ArithmeticError):
    """``psi_rho'`` touches the cut of the principal power."""


class NewtonError(ArithmeticError):
    pass


class IllConditionedError(ApproximationError):
    pass


@dataclass(frozen=True)
class ConformalMap:
    """``phi(u) = u + c2 u^2 + c3 u^3``; build through :func:`make_map`."""

    catalog_id: str
    c2: complex = 0j
    c3: complex = 0j
    min_divided_difference: float = field(default=1.0, compare=False)

    @property
    def is_identity(self) -> bool:
        return self.c2 == 0 and self.c3 == 0

    @property
    def univalence_radius(self) -> float:
        """Radius on which ``|2 c2 u + 3 c3 u^2| < 1`` (so ``Re phi' > 0``)."""
        a, b = 3 * abs(self.c3), 2 * abs(self.c2)
        if a == 0:
            return math.inf if b == 0 else 1.0 / b
        return (-b + math.sqrt(b * b + 4 * a)) / (2 * a)

    def forward(self, u):
        u = np.asarray(u, dtype=complex)
        if self.is_identity:
            return u
        return u + u * u * (self.c2 + self.c3 * u)

    def derivative(self, u):
        u = np.asarray(u, dtype=complex)
        return 1.0 + u * (2 * self.c2 + 3 * self.c3 * u)

    def _newton(self, z, u):
        for _ in range(NEWTON_MAX):
            step = (self.forward(u) - z) / self.derivative(u)
            u = u - step
            if np.all(np.abs(step) <= 1e-15 * np.maximum(1.0, np.abs(u))):
                return u, True
        return u, False

    def inverse(self, z):
        """``phi^{-1}(z)``; Newton from ``u = z``, then continuation from ``u = 0``."""
        z = np.asarray(z, dtype=complex)
        if self.is_identity:
            return z
        flat = z.reshape(-1)
        u = flat.copy()
        for i in range(flat.size):
            ui, ok = self._newton(flat[i], flat[i])
            if not (ok and abs(ui) < self.univalence_radius):
                ui = 0j
                for t in np.arange(1, CONTINUATION_STEPS + 1) / CONTINUATION_STEPS:
                    ui, ok = self._newton(t * flat[i], ui)
                    if not ok:
                        raise NewtonError(f"Newton inversion of phi failed at z = {flat[i]!r}")
            u[i] = ui
        out = u.reshape(z.shape)
        return out[()] if out.ndim == 0 else out

    def spec(self) -> str:
        if self.is_identity:
            return "disk"
        parts = [f"c2={_num(self.c2)}"] + ([f"c3={_num(self.c3)}"] if self.c3 != 0 else [])
        return "poly:" + ",".join(parts)


def _num(c: complex) -> str:
    return repr(c.real) if c.imag == 0 else repr(c)


def _certify(phi: ConformalMap) -> float:
    n = CERT_POINTS * CERT_POINTS
    s = TWO_PI * np.arange(n) / n
    # 4096 boundary pairs (e^{is}, e^{i(s + gap)}) with gaps spread over the circle
    a = np.exp(1j * s)
    b = np.exp(1j * (s + TWO_PI * (np.arange(n) % (n // 2) + 1) / n))
    # divided difference of a polynomial map, exact (no cancellation)
    dd = 1.0 + phi.c2 * (a + b) + phi.c3 * (a * a + a * b + b * b)
    m = float(np.min(np.abs(dd)))
    if not m > 0:
        raise UnivalenceError(f"{phi.spec()}: boundary divided differences vanish")
    r = (np.arange(CERT_POINTS) + 1) / CERT_POINTS
    t = TWO_PI * np.arange(CERT_POINTS) / CERT_POINTS
    d = phi.derivative(r[:, None] * np.exp(1j * t)[None, :])
    if not np.min(np.abs(d)) > 0 or not np.min(d.real) > 0:
        raise UnivalenceError(f"{phi.spec()}: Re phi' is not positive on the closed disk")
    return m


def make_map(catalog_id: str = "poly", c2: complex = 0.0, c3: complex = 0.0) -> ConformalMap:
    """Certified catalog map. ``"identity"`` (or ``"disk"``) is the disk itself."""
    if catalog_id in ("identity", "disk"):
        if c2 or c3:
            raise UnivalenceError("the identity map takes no coefficients")
        c2 = c3 = 0.0
    elif catalog_id != "poly":
        raise UnivalenceError(f"unknown map catalog id {catalog_id!r}")
    c2, c3 = complex(c2), complex(c3)
    if not 2 * abs(c2) + 3 * abs(c3) < 1:
        raise UnivalenceError(
            f"coefficients c2={c2}, c3={c3} violate 2|c2| + 3|c3| < 1 (univalence region)"
        )
    phi = ConformalMap(catalog_id, c2, c3)
    return ConformalMap(catalog_id, c2, c3, _certify(phi))


def parse_domain(src: str) -> ConformalMap:
    """``disk`` or ``poly:c2=..[,c3=..]`` as used by the CLI."""
    src = src.strip()
    if src == "disk":
        return make_map("identity")
    head, sep, body = src.partition(":")
    if head != "poly" or not sep:
        raise UnivalenceError(f"domain must be 'disk' or 'poly:c2=..[,c3=..]', got {src!r}")
    coeffs = {}
    for item in filter(None, (s.strip() for s in body.split(","))):
        key, eq, value = item.partition("=")
        if not eq or key not in ("c2", "c3"):
            raise UnivalenceError(f"bad domain parameter {item!r}")
        coeffs[key] = complex(value.replace("i", "j")) if "i" in value or "j" in value else float(value)
    return make_map("poly", **coeffs)


def _disk_integral(integrand_u, w: WeightSpec, p: float, phi: ConformalMap, rule: QuadratureRule, workers=None) -> float:
    """``int_D |integrand_u(u)|^p w(phi(u)) |phi'(u)|^2 dA(u)``."""
    rule = adapted_rule(rule, w)

    def g(r, t):
        u = r * np.exp(1j * t)
        if phi.is_identity:
            wz = w.checked_polar(r, t)
            jac = 1.0
        else:
            z = phi.forward(u)
            wz = w.checked_polar(np.abs(z), polar_angle(z))
            jac = np.abs(phi.derivative(u)) ** 2
        return np.abs(integrand_u(u)) ** p * wz * jac

    return integrate(rule, g, workers)


def pullback_norm(f: FunctionModel, w: WeightSpec, p: float, phi: ConformalMap, rule: QuadratureRule, workers=None) -> NormResult:
    """``(int_G |f|^p w dA)^(1/p)`` computed on the disk."""
    _check_p(p)
    power = _disk_integral(lambda u: f.eval(phi.forward(u)), w, p, phi, rule, workers)
    return _result(power, p, "bergman", rule)


@dataclass(frozen=True)
class FarrellApproximant:
    """``F_rho(z) = f(psi_rho(z)) * psi_rho'(z)^(2/p)``."""

    f: FunctionModel
    rho: float
    p: float
    map: ConformalMap

    def psi_prime_at(self, u):
        """``psi_rho'`` at ``z = phi(u)``."""
        return self.rho * self.map.derivative(self.rho * u) / self.map.derivative(u)

    def at_preimage(self, u):
        """``F_rho(phi(u))`` without inverting ``phi``."""
        u = np.asarray(u, dtype=complex)
        return self.f.eval(self.map.forward(self.rho * u)) * self.psi_prime_at(u) ** (2.0 / self.p)

    def __call__(self, z):
        return self.at_preimage(self.map.inverse(z))

    def to_model(self) -> FunctionModel:
        return FunctionModel(eval=self, deriv=None, name=f"F[{self.f.name},rho={self.rho!r},p={self.p!r}]")


def farrell_dilate(f: FunctionModel, phi: ConformalMap, rho: float, p: float) -> FarrellApproximant:
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    _check_p(p)
    F = FarrellApproximant(f, float(rho), float(p), phi)
    r = np.arange(CERT_POINTS + 1) / CERT_POINTS
    t = TWO_PI * np.arange(CERT_POINTS) / CERT_POINTS
    dpsi = F.psi_prime_at(r[:, None] * np.exp(1j * t)[None, :])
    on_cut = (dpsi.real <= 0) & (np.abs(dpsi.imag) <= 1e-14 * np.abs(dpsi))
    if np.any(on_cut):
        raise BranchError(f"psi_rho' meets (-inf, 0] for rho={rho} on {phi.spec()}")
    return F


@dataclass(frozen=True)
class BoundaryFit:
    polynomial: ArnoldiPolynomial
    ls_residual: float  # root-mean-square residual on the collocation points
    sup_residual: float  # max residual on the verification points

    @property
    def degree(self) -> int:
        return self.polynomial.degree

    def __call__(self, z):
        return self.polynomial(z)


def _boundary_values(F, phi: ConformalMap, u):
    if isinstance(F, FarrellApproximant):
        return F.at_preimage(u)
    return F.eval(phi.forward(u))


def boundary_ls_polyfit(F, phi: ConformalMap, d: int, M: int | None = None) -> BoundaryFit:
    """Least-squares polynomial of degree ``<= d`` at ``z_j = phi(e^{2 pi i j / M})``.

    ``F`` is a :class:`FarrellApproximant` or a model analytic on the closed
    domain. The sup residual is taken over ``4M`` boundary points offset from
    the collocation points.
    """
    M = 4 * (d + 1) if M is None else int(M)
    if M < 4 * (d + 1):
        raise ValueError(f"need M >= 4(d+1) = {4 * (d + 1)} collocation points, got {M}")
    u = np.exp(TWO_PI * 1j * np.arange(M) / M)
    z = phi.forward(u)
    vals = _boundary_values(F, phi, u)
    try:
        q = arnoldi_lstsq(z, np.ones(M), vals, d)
    except SaturationError as exc:
        raise IllConditionedError(f"boundary fit of degree {d}: {exc}") from None
    v = np.exp(TWO_PI * 1j * (np.arange(4 * M) + 0.5) / (4 * M))
    sup = float(np.max(np.abs(_boundary_values(F, phi, v) - q(phi.forward(v)))))
    return BoundaryFit(q, math.sqrt(q.error / M), sup)


def _root(power: float, p: float) -> float:
    return power if p < 1 else max(power, 0.0) ** (1.0 / p)


def farrell_error(f: FunctionModel, w: WeightSpec, p: float, phi: ConformalMap, rho: float, rule: QuadratureRule) -> float:
    """``||f - F_rho||_{A^p(G, w)}`` (p-th power for ``p < 1``)."""
    F = farrell_dilate(f, phi, rho, p)
    return _root(_disk_integral(lambda u: f.eval(phi.forward(u)) - F.at_preimage(u), w, p, phi, rule), p)


def polynomial_error(f: FunctionModel, q, w: WeightSpec, p: float, phi: ConformalMap, rule: QuadratureRule) -> float:
    return _root(_disk_integral(lambda u: f.eval(phi.forward(u)) - q(phi.forward(u)), w, p, phi, rule), p)


@dataclass(frozen=True)
class JordanApproximation:
    polynomial: object
    achieved_error: float
    rho: float
    dilation_error: float
    sup_residual: float

    @property
    def degree(self) -> int:
        return self.polynomial.degree

    def __iter__(self):
        return iter((self.polynomial, self.achieved_error))


def next_degree(d: int) -> int:
    return d + max(1, d // 8)


def jordan_approximate(
    f: FunctionModel, w: WeightSpec, p: float, phi: ConformalMap, eps: float, rule: QuadratureRule,
    max_degree: int = 256,
) -> JordanApproximation:
    """Polynomial ``q`` with ``||f - q||_{A^p(G, w)} <= eps``.

    Raise ``rho`` (bisection on ``-log10(1 - rho)``) until ``||f - F_rho|| <= eps/2``,
    then fit ``F_rho`` on the boundary with growing degree until the measured
    total error is at most ``eps``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if f.degree is not None:
        u = np.exp(TWO_PI * 1j * np.arange(4 * (f.degree + 1)) / (4 * (f.degree + 1)))
        fit = boundary_ls_polyfit(f, phi, f.degree, u.size)
        err = polynomial_error(f, fit.polynomial, w, p, phi, rule)
        return JordanApproximation(fit.polynomial, err, 1.0, 0.0, fit.sup_residual)
    rho, e_dil = bisect_dilation(lambda r: farrell_error(f, w, p, phi, r, rule), 0.5 * eps)
    F = farrell_dilate(f, phi, rho, p)
    d, prev, err = 1, None, math.inf
    while d <= max_degree:
        fit = boundary_ls_polyfit(F, phi, d)
        err = polynomial_error(f, fit.polynomial, w, p, phi, rule)
        if err <= eps:
            return JordanApproximation(fit.polynomial, err, rho, e_dil, fit.sup_residual)
        if prev is not None and fit.ls_residual >= prev.ls_residual and fit.sup_residual > prev.sup_residual:
            raise IllConditionedError(
                f"boundary residual stalls at degree {d} while the verification residual grows"
            )
        prev, d = fit, next_degree(d)
    raise DilationStageError(f"error {err:.6g} still exceeds {eps:g} at degree {max_degree}", err)


def rho_study(f: FunctionModel, w: WeightSpec, p: float, phi: ConformalMap, rho_list, rule: QuadratureRule, workers=None) -> ConvergenceTable:
    """Rows ``(rho, ||f - F_rho||^p, ||F_rho||^p)`` over ``G``."""

    def row(rho):
        F = farrell_dilate(f, phi, rho, p)
        err = _disk_integral(lambda u: f.eval(phi.forward(u)) - F.at_preimage(u), w, p, phi, rule)
        return err, _disk_integral(F.at_preimage, w, p, phi, rule)

    rows = ordered_map(_timed(row), [float(r) for r in rho_list], workers)
    meta = {"space": "bergman", "p": p, "weight": w.source, "function": f.name, "domain": phi.spec(),
            "sweep": "rho", **rule.metadata()}
    return ConvergenceTable(rows, meta)


def fit_study(
    f: FunctionModel, w: WeightSpec, p: float, phi: ConformalMap, rho: float, degree_list, rule: QuadratureRule, workers=None
) -> ConvergenceTable:
    """Rows ``(d, ||f - q_d||^p, ||q_d||^p)`` for boundary fits ``q_d`` of ``F_rho``."""
    F = farrell_dilate(f, phi, rho, p)

    def row(d):
        q = boundary_ls_polyfit(F, phi, int(d)).polynomial
        err = _disk_integral(lambda u: f.eval(phi.forward(u)) - q(phi.forward(u)), w, p, phi, rule)
        return err, _disk_integral(lambda u: q(phi.forward(u)), w, p, phi, rule)

    rows = ordered_map(_timed(row), [int(d) for d in degree_list], workers)
    meta = {"space": "bergman", "p": p, "weight": w.source, "function": f.name, "domain": phi.spec(),
            "sweep": "degree", "rho": rho, **rule.metadata()}
    return ConvergenceTable(rows, meta)
