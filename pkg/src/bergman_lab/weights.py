"""Weight catalog, source-string parsing and scalar weight functionals.

Source strings::

    catalog:<id>[,key=value]*           e.g. catalog:standard,alpha=1
    expr:<expression>                   e.g. expr:1 - t/(2*pi)
    product:<radial id,...>|<angular id,...>
                                        e.g. product:standard,alpha=1|linang

Radial catalog ids: ``constant`` (c), ``standard`` (alpha, normalized),
``gaussian``, ``expmod``. Angular ids: ``constant`` (c), ``polyang`` (alpha),
``linang``. Non-radial ids: ``absreal`` (|x|), ``gaussreal`` (exp(-x^2)).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate as _sint

from . import expr as _expr
from .funcmodel import TWO_PI, PolarPoint, polar_angle
from .quadrature import QuadratureRule, integrate

RADIAL, ANGULAR, PRODUCT, GENERAL = "radial", "angular", "product", "general"
PROBE_N = 16
PROMOTE_TOL = 1e-12


class WeightError(ValueError):
    pass


class WeightEvaluationError(WeightError):
    pass


class DivergentIntegralError(WeightError):
    """A weight functional failed to converge (the weight is not integrable)."""


@dataclass(frozen=True)
class Profile:
    """A one-variable catalog profile (radial in r, or angular in theta)."""

    id: str
    params: tuple
    func: Callable = field(compare=False, repr=False)

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))

    @property
    def source(self) -> str:
        return ",".join([self.id] + [f"{k}={_num(v)}" for k, v in self.params])


def _num(v) -> str:
    return repr(float(v)).removesuffix(".0")


def _standard(alpha: float, normalized: bool):
    scale = alpha + 1.0 if normalized else 1.0
    return lambda r: scale * np.power(1.0 - r * r, alpha)


RADIAL_PROFILES = {
    "constant": (("c",), {"c": 1.0}, lambda p: (lambda r: np.full(np.shape(r), p["c"]))),
    "standard": (
        ("alpha", "normalized"),
        {"alpha": 1.0, "normalized": 0.0},
        lambda p: _standard(p["alpha"], bool(p["normalized"])),
    ),
    "gaussian": ((), {}, lambda p: (lambda r: np.exp(-r * r))),
    "expmod": ((), {}, lambda p: np.exp),
}

ANGULAR_PROFILES = {
    "constant": (("c",), {"c": 1.0}, lambda p: (lambda t: np.full(np.shape(t), p["c"]))),
    "polyang": (
        ("alpha",),
        {"alpha": 1.0},
        lambda p: (lambda t: np.power(4.0 * math.pi**2 - t * t, p["alpha"])),
    ),
    "linang": ((), {}, lambda p: (lambda t: 1.0 - t / TWO_PI)),
}

GENERAL_CATALOG = {
    "absreal": "abs(x)",
    "gaussreal": "exp(-x^2)",
}


def _make_profile(table: dict, kind: str, cid: str, params: dict) -> Profile:
    if cid not in table:
        raise WeightError(f"unknown {kind} catalog id {cid!r}; expected one of {sorted(table)}")
    names, defaults, factory = table[cid]
    extra = set(params) - set(names)
    if extra:
        raise WeightError(f"unexpected parameters for {cid}: {sorted(extra)}")
    merged = {**defaults, **params}
    if cid == "standard" and not merged["alpha"] > -1.0 and merged["normalized"]:
        raise WeightError("normalized standard weight needs alpha > -1")
    if cid == "polyang" and not merged["alpha"] > 0:
        raise WeightError("polyang needs alpha > 0")
    shown = tuple((k, merged[k]) for k in names if k in params)
    return Profile(cid, shown, factory(merged))


@dataclass(frozen=True, eq=False)
class WeightSpec:
    """A nonnegative weight on the disk, tagged by variant.

    ``radial``/``angular`` hold :class:`Profile` objects for the radial,
    angular and product variants; ``ast`` holds the expression of a general
    weight. Evaluate with :meth:`polar` (vectorized) or :meth:`at` (complex
    points).
    """

    variant: str
    source: str
    radial: Optional[Profile] = None
    angular: Optional[Profile] = None
    ast: object = None
    general: Optional[Callable] = field(default=None, repr=False)

    def polar(self, r, theta) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        if self.variant == RADIAL:
            out = self.radial(r) * np.ones_like(theta)
        elif self.variant == ANGULAR:
            out = self.angular(theta) * np.ones_like(r)
        elif self.variant == PRODUCT:
            out = self.radial(r) * self.angular(theta)
        else:
            out = self.general(r, theta)
        return np.asarray(out, dtype=float)

    def at(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return self.polar(np.abs(z), polar_angle(z))

    def checked_polar(self, r, theta) -> np.ndarray:
        """Like :meth:`polar` but raise on a non-finite value, naming the point."""
        vals = self.polar(r, theta)
        bad = np.flatnonzero(~np.isfinite(np.atleast_1d(vals)))
        if bad.size:
            rb = np.broadcast_to(r, np.shape(vals)).ravel()[bad[0]]
            tb = np.broadcast_to(theta, np.shape(vals)).ravel()[bad[0]]
            raise WeightEvaluationError(
                f"weight {self.source!r} is {np.ravel(vals)[bad[0]]} at r={float(rb)!r}, theta={float(tb)!r}"
            )
        return vals

    @property
    def is_angular_type(self) -> bool:
        return self.variant in (ANGULAR, PRODUCT)

    def __str__(self):
        return self.source


def _general_evaluator(ast) -> Callable:
    names = _expr.variables(ast)

    def ev(r, theta):
        r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
        env = {"r": r, "t": theta}
        if "x" in names or "y" in names:
            env["x"] = r * np.cos(theta)
            env["y"] = r * np.sin(theta)
        with np.errstate(all="ignore"):
            val = _expr.evaluate(ast, env)
        return np.broadcast_to(np.asarray(val, dtype=float), r.shape)

    return ev


def _probe_grid(n: int):
    r = (np.arange(n) + 0.5) / n
    t = TWO_PI * np.arange(n) / n
    return np.meshgrid(r, t, indexing="ij")


def _independent_of(vals: np.ndarray, axis: int, tol: float) -> bool:
    spread = np.ptp(vals, axis=axis)
    scale = np.maximum(1.0, np.max(np.abs(vals), axis=axis))
    return bool(np.all(spread <= tol * scale))


def _from_expression(src: str, text: str) -> WeightSpec:
    ast = _expr.parse_expr(text)
    ev = _general_evaluator(ast)
    R, T = _probe_grid(PROBE_N)
    vals = ev(R, T)
    if not np.all(np.isfinite(vals)):
        i = np.flatnonzero(~np.isfinite(vals.ravel()))[0]
        raise WeightEvaluationError(
            f"weight {src!r} is not finite at r={float(R.ravel()[i])!r}, theta={float(T.ravel()[i])!r}"
        )
    if np.any(vals < 0):
        i = np.flatnonzero(vals.ravel() < 0)[0]
        raise WeightError(f"weight {src!r} is negative at r={float(R.ravel()[i])!r}, theta={float(T.ravel()[i])!r}")
    source = "expr:" + _expr.to_source(ast)
    # columns (axis 1) vary theta, rows (axis 0) vary r
    if _independent_of(vals, 1, PROMOTE_TOL):
        prof = Profile("expr", (), lambda r: ev(r, np.zeros_like(r)))
        return WeightSpec(RADIAL, source, radial=prof, ast=ast, general=ev)
    if _independent_of(vals, 0, PROMOTE_TOL):
        prof = Profile("expr", (), lambda t: ev(np.full_like(t, 0.5), t))
        return WeightSpec(ANGULAR, source, angular=prof, ast=ast, general=ev)
    return WeightSpec(GENERAL, source, ast=ast, general=ev)


def _split_params(parts: list[str]) -> dict:
    params = {}
    for item in parts:
        key, sep, value = item.partition("=")
        if not sep:
            raise WeightError(f"expected key=value, got {item!r}")
        try:
            params[key.strip()] = float(value)
        except ValueError:
            raise WeightError(f"parameter {key.strip()!r} is not a number: {value!r}") from None
    return params


def _catalog(body: str) -> WeightSpec:
    parts = [s.strip() for s in body.split(",")]
    cid, params = parts[0], _split_params(parts[1:])
    if cid in GENERAL_CATALOG:
        if params:
            raise WeightError(f"{cid} takes no parameters")
        spec = _from_expression("catalog:" + cid, GENERAL_CATALOG[cid])
        return WeightSpec(spec.variant, "catalog:" + cid, spec.radial, spec.angular, spec.ast, spec.general)
    if cid == "constant":
        prof = _make_profile(RADIAL_PROFILES, "radial", cid, params)
        return WeightSpec(RADIAL, "catalog:" + prof.source, radial=prof)
    if cid in RADIAL_PROFILES:
        prof = _make_profile(RADIAL_PROFILES, "radial", cid, params)
        return WeightSpec(RADIAL, "catalog:" + prof.source, radial=prof)
    if cid in ANGULAR_PROFILES:
        prof = _make_profile(ANGULAR_PROFILES, "angular", cid, params)
        return WeightSpec(ANGULAR, "catalog:" + prof.source, angular=prof)
    known = sorted(set(RADIAL_PROFILES) | set(ANGULAR_PROFILES) | set(GENERAL_CATALOG))
    raise WeightError(f"unknown catalog id {cid!r}; expected one of {known}")


def _product(body: str) -> WeightSpec:
    left, sep, right = body.partition("|")
    if not sep:
        raise WeightError("product weights are written product:<radial>|<angular>")
    lp = [s.strip() for s in left.split(",")]
    rp = [s.strip() for s in right.split(",")]
    rad = _make_profile(RADIAL_PROFILES, "radial", lp[0], _split_params(lp[1:]))
    ang = _make_profile(ANGULAR_PROFILES, "angular", rp[0], _split_params(rp[1:]))
    return WeightSpec(PRODUCT, f"product:{rad.source}|{ang.source}", radial=rad, angular=ang)


def _check_nonnegative(w: WeightSpec) -> None:
    R, T = _probe_grid(PROBE_N)
    vals = w.checked_polar(R, T)
    if np.any(vals < 0):
        i = np.flatnonzero(vals.ravel() < 0)[0]
        raise WeightError(f"weight {w.source!r} is negative at r={float(R.ravel()[i])!r}, theta={float(T.ravel()[i])!r}")


def parse_weight(src: str) -> WeightSpec:
    """Parse a weight source string (see module docstring)."""
    src = src.strip()
    scheme, sep, body = src.partition(":")
    if not sep:
        raise WeightError(f"weight must start with catalog:, expr: or product:, got {src!r}")
    if scheme == "expr":
        return _from_expression(src, body)
    if scheme == "catalog":
        w = _catalog(body)
    elif scheme == "product":
        w = _product(body)
    else:
        raise WeightError(f"unknown weight scheme {scheme!r}")
    _check_nonnegative(w)
    return w


def radial_weight(profile: str) -> WeightSpec:
    """Shorthand: ``radial_weight("standard,alpha=1")``."""
    return parse_weight("catalog:" + profile)


def eval_weight(w: WeightSpec, p: PolarPoint) -> float:
    if not 0.0 <= p.r <= 1.0:
        raise WeightError(f"point r={p.r} lies outside the closed unit disk")
    return float(w.checked_polar(p.r, p.theta))


def adapted_rule(rule: QuadratureRule, w: WeightSpec) -> QuadratureRule:
    """Switch a uniform angular rule to panels when ``w`` depends on the angle."""
    if w.variant == RADIAL:
        return rule
    return rule.with_theta_rule("panels")


def total_mass(w: WeightSpec, rule: QuadratureRule, check: bool = True) -> float:
    """Area integral of ``w`` over the unit disk.

    With ``check`` the integral is repeated with doubled resolution and a
    relative change above 1% raises :class:`DivergentIntegralError`.
    """
    if rule.R != 1.0:
        raise WeightError("total_mass needs a rule on the full disk (R = 1)")
    rule = adapted_rule(rule, w)
    value = integrate(rule, w.checked_polar)
    if check:
        fine = integrate(rule.refined(), w.checked_polar)
        if not math.isfinite(fine) or abs(fine - value) > 0.01 * abs(fine):
            raise DivergentIntegralError(
                f"total mass of {w.source!r} changes from {value:.6g} to {fine:.6g} under refinement"
            )
    return value


def _quad(func, a, b, points=None) -> float:
    """Adaptive quadrature that turns convergence warnings into divergence errors.

    A strict tolerance is tried first; integrable endpoint singularities
    often trip its roundoff detection, so one relaxed retry follows before
    the integral is declared divergent.
    """
    last = None
    for epsabs, epsrel in ((1e-14, 1e-13), (0.0, 1e-9)):
        with warnings.catch_warnings():
            warnings.simplefilter("error", _sint.IntegrationWarning)
            try:
                val, _ = _sint.quad(func, a, b, points=points, limit=400, epsabs=epsabs, epsrel=epsrel)
            except (_sint.IntegrationWarning, ZeroDivisionError, OverflowError) as exc:
                last = exc
                continue
        if not math.isfinite(val):
            raise DivergentIntegralError(f"integral over [{a}, {b}] is not finite")
        return val
    raise DivergentIntegralError(f"integral over [{a}, {b}] did not converge: {last}")


def _as_radial(omega) -> Profile:
    if isinstance(omega, WeightSpec):
        if omega.radial is None or omega.variant not in (RADIAL, PRODUCT):
            raise WeightError(f"{omega.source!r} has no radial profile")
        return omega.radial
    return omega


def _as_angular(v) -> Profile:
    if isinstance(v, WeightSpec):
        if v.angular is None or v.variant not in (ANGULAR, PRODUCT):
            raise WeightError(f"{v.source!r} has no angular profile")
        return v.angular
    return v


def radial_moment(omega, n: int) -> float:
    """``int_0^1 r^(2n+1) omega(r) dr`` by adaptive quadrature in ``t = r^2``."""
    if n < 0:
        raise WeightError("moment index must be >= 0")
    prof = _as_radial(omega)
    # r^(2n+1) dr = t^n dt / 2
    return 0.5 * _quad(lambda t: t**n * float(prof(math.sqrt(t))), 0.0, 1.0)


def angular_mass(v) -> float:
    """``int_0^{2 pi} v(theta) d theta`` by adaptive quadrature."""
    prof = _as_angular(v)
    pts = [k * math.pi / 4 for k in range(1, 8)]
    return _quad(lambda t: float(prof(t)), 0.0, TWO_PI, points=pts)


def radial_moments(omega, n_max: int) -> np.ndarray:
    return np.array([radial_moment(omega, n) for n in range(n_max + 1)])


def _profile(table: dict, kind: str, src: str) -> Profile:
    parts = [s.strip() for s in src.split(",")]
    return _make_profile(table, kind, parts[0], _split_params(parts[1:]))


def radial_profile(src: str) -> Profile:
    """``radial_profile("standard,alpha=1")``; for :func:`radial_moment` and the series norms."""
    return _profile(RADIAL_PROFILES, "radial", src)


def angular_profile(src: str) -> Profile:
    """``angular_profile("linang")``; ``constant`` is the angular weight ``v = c``."""
    return _profile(ANGULAR_PROFILES, "angular", src)
