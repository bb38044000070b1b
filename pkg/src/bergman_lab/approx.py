"""Constructive approximation: dilations, Taylor sums, certified uniform
truncation, the two-stage norm approximant, least-squares projection, and
convergence studies."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from ._parallel import ordered_map
from .arnoldi import ArnoldiPolynomial, SaturationError, arnoldi_lstsq
from .funcmodel import FunctionModel, FunctionModelError, Polynomial
from .quadrature import QuadratureRule
from .spaces import SPACES, NormError, bergman_norm, difference_power, lp_integral, space_norm
from .weights import DivergentIntegralError, WeightSpec, adapted_rule, total_mass

DEGREE_CAP = 4096
# known coefficients are summed this far before the Cauchy remainder takes over
SUM_CAP = 1 << 20
CIRCLE_POINTS = 512
R_CEILING = 1.0 - 1e-6


class ApproximationError(RuntimeError):
    pass


class NotCertifiedError(ApproximationError):
    pass


class DilationStageError(ApproximationError):
    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


class NotInSpaceError(ApproximationError):
    """Evidence that ``f`` is not in the space: its norm keeps growing under refinement."""


class RankDeficientError(ApproximationError):
    pass


def dilate(f: FunctionModel, r: float) -> FunctionModel:
    """``f_r(z) = f(r z)``."""
    if not 0.0 < r <= 1.0:
        raise ValueError(f"dilation parameter must lie in (0, 1], got {r}")
    if r == 1.0:
        return f
    taylor = None
    if f.taylor is not None:
        taylor = lambda n, _t=f.taylor: r ** np.asarray(n, dtype=float) * _t(n)
    return FunctionModel(
        eval=lambda z: f.eval(r * np.asarray(z, dtype=complex)),
        deriv=lambda z: r * f.deriv(r * np.asarray(z, dtype=complex)),
        taylor=taylor,
        analyticity_radius=f.analyticity_radius / r,
        degree=f.degree,
        name=f"{f.name}@r={r:g}",
        params=f.params,
    )


def taylor_partial_sum(f: FunctionModel, k: int) -> Polynomial:
    if f.taylor is None:
        raise FunctionModelError(f"{f.name} has no Taylor coefficient generator")
    return Polynomial(f.coefficients(k))


def circle_coefficients(f: FunctionModel, rho: float, n: int = CIRCLE_POINTS) -> np.ndarray:
    """``|a_k|`` estimates from ``n`` samples of ``f`` on ``|u| = rho``.

    Raises :class:`NotCertifiedError` when doubling the sample count moves any
    unscaled coefficient ``|a_k| rho^k`` by more than ``1e-10`` of the largest
    (aliasing).
    """

    def est(m):
        u = rho * np.exp(2j * np.pi * np.arange(m) / m)
        return np.abs(np.fft.fft(f.eval(u))[: m // 2]) / m

    a, b = est(n), est(2 * n)
    if np.max(np.abs(a - b[: a.size])) > 1e-10 * max(np.max(a), 1e-300):
        raise NotCertifiedError(f"circle coefficient estimates are aliased at {n} points")
    return a / rho ** np.arange(a.size)


def _max_modulus(f: FunctionModel, rho: float, n: int = CIRCLE_POINTS) -> float:
    u = rho * np.exp(2j * np.pi * np.arange(n) / n)
    return float(np.max(np.abs(f.eval(u))))


@dataclass(frozen=True)
class UniformCertificate:
    degree: int
    tail_bound: float
    rho: float


def certify_truncation(f: FunctionModel, r0: float, eps_uniform: float) -> UniformCertificate:
    """Smallest degree ``d`` with ``sum_{n>d} |a_n| r0^n <= eps_uniform``.

    Known coefficients are summed exactly up to a cutoff beyond which the
    Cauchy estimate ``|a_n| <= M(rho) / rho^n`` on ``rho = (1 + r0) / 2``
    bounds the rest geometrically.
    """
    if not 0.0 < r0 < 1.0:
        raise ValueError(f"r0 must lie in (0, 1), got {r0}")
    rho = 0.5 * (1.0 + r0)
    if f.degree is not None:
        return UniformCertificate(f.degree, 0.0, rho)
    q = r0 / rho
    M = _max_modulus(f, rho)
    cauchy = lambda n: M * q ** (n + 1) / (1.0 - q)  # bound on sum_{m>n} |a_m| r0^m
    # exact range ends where the Cauchy remainder is negligible against eps
    n_exact = int(min(SUM_CAP, max(16, math.ceil(math.log(1e-3 * eps_uniform * (1 - q) / M) / math.log(q)))))
    if f.taylor is not None:
        mags = np.abs(f.coefficients(n_exact)) * r0 ** np.arange(n_exact + 1)
    else:
        est = circle_coefficients(f, rho)
        n_exact = min(n_exact, est.size - 1)
        mags = est[: n_exact + 1] * r0 ** np.arange(n_exact + 1)
    # tails[d] = sum_{d < n <= n_exact} mags[n]
    rev = np.cumsum(mags[::-1])[::-1]
    tails = np.append(rev[1:], 0.0) + cauchy(n_exact)
    ok = np.flatnonzero(tails[: DEGREE_CAP + 1] <= eps_uniform)
    if ok.size == 0:
        raise NotCertifiedError(
            f"uniform error {eps_uniform:g} is not certified by degree {DEGREE_CAP} for r0={r0}"
        )
    d = int(ok[0])
    return UniformCertificate(d, float(tails[d]), rho)


def mergelyan_polynomial(f: FunctionModel, r0: float, eps_uniform: float) -> Polynomial:
    """Polynomial ``Q`` with ``sup_{|z|<=1} |f(r0 z) - Q(z)| <= eps_uniform``."""
    cert = certify_truncation(f, r0, eps_uniform)
    fr = dilate(f, r0)
    if fr.taylor is not None:
        return Polynomial(fr.coefficients(cert.degree))
    # coefficients of f_{r0} from samples on |u| = 1 (f_{r0} is analytic past it)
    m = max(CIRCLE_POINTS, 4 * (cert.degree + 1))
    u = np.exp(2j * np.pi * np.arange(m) / m)
    c = np.fft.fft(fr.eval(u)) / m
    return Polynomial(c[: cert.degree + 1])


def in_space_evidence(space: str, f: FunctionModel, w: WeightSpec, p: float, rule: QuadratureRule) -> tuple[float, float]:
    """(coarse, refined) p-th powers of the norm; raise if refinement moves it by > 1%."""
    coarse = space_norm(space, f, w, p, rule).power
    fine = space_norm(space, f, w, p, rule.refined()).power
    if not math.isfinite(fine) or abs(fine - coarse) > 0.01 * abs(fine):
        raise NotInSpaceError(
            f"{space} norm of {f.name} under {w.source} moves from {coarse:.6g} to {fine:.6g} "
            "when the quadrature is refined; f does not appear to belong to the space"
        )
    return coarse, fine


def _root(power: float, p: float) -> float:
    return power if p < 1 else max(power, 0.0) ** (1.0 / p)


def bisect_dilation(err_at, eps_half: float, iterations: int = 24) -> tuple[float, float]:
    """Bisect ``s = -log10(1 - r)`` for a small ``r`` with ``err_at(r) <= eps_half``."""
    r_of = lambda s: 1.0 - 10.0 ** (-s)
    s_lo, s_hi = 0.0, -math.log10(1.0 - R_CEILING)
    e_hi = err_at(r_of(s_hi))
    if e_hi > eps_half:
        raise DilationStageError(
            f"dilation error {e_hi:.6g} still exceeds {eps_half:.6g} at r = {r_of(s_hi)}", e_hi
        )
    for _ in range(iterations):
        mid = 0.5 * (s_lo + s_hi)
        e = err_at(r_of(mid))
        if e <= eps_half:
            s_hi, e_hi = mid, e
        else:
            s_lo = mid
    return r_of(s_hi), e_hi


@dataclass(frozen=True)
class Approximation:
    polynomial: Polynomial
    achieved_error: float
    r: float
    dilation_error: float
    certificate: UniformCertificate

    def __iter__(self):
        # unpacks as (polynomial, achieved_error)
        return iter((self.polynomial, self.achieved_error))


def approximate(f: FunctionModel, w: WeightSpec, p: float, eps: float, rule: QuadratureRule) -> Approximation:
    """Polynomial ``Q`` with ``||f - Q||_{A^p(w)} <= eps``.

    Dilate first (bisection on ``r`` until ``||f - f_r|| <= eps/2``), then
    truncate the Taylor series of ``f_r`` uniformly to within
    ``eps / (2 mass^(1/p))``. The returned error is measured by quadrature.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if f.degree is not None:
        Q = Polynomial(f.coefficients(f.degree))
        err = _root(difference_power("bergman", f, Q.to_model(), w, p, rule), p)
        return Approximation(Q, err, 1.0, 0.0, UniformCertificate(f.degree, 0.0, 1.0))
    in_space_evidence("bergman", f, w, p, rule)
    err_at = lambda r: _root(difference_power("bergman", f, dilate(f, r), w, p, rule), p)
    r, e_dil = bisect_dilation(err_at, 0.5 * eps)
    mass = total_mass(w, rule.truncated(1.0) if rule.R != 1.0 else rule)
    eps_uniform = 0.5 * eps / _root(mass, p) if p >= 1 else 0.5 * eps / mass
    cert = certify_truncation(f, r, eps_uniform)
    Q = mergelyan_polynomial(f, r, eps_uniform)
    achieved = _root(difference_power("bergman", f, Q.to_model(), w, p, rule), p)
    return Approximation(Q, achieved, r, e_dil, cert)


def best_l2_projection(f: FunctionModel, w: WeightSpec, d: int, rule: QuadratureRule) -> Polynomial:
    """Minimizer of the discrete ``A^2(w)`` distance over polynomials of degree ``<= d``.

    Solved by Householder QR of the weighted node Vandermonde matrix in the
    monomial basis. Columns are normalized first; a pivot below ``1e-12``
    of the largest raises :class:`RankDeficientError`. For high degrees use
    :func:`arnoldi_projection`, which never forms monomial columns.
    """
    if d < 0:
        raise ValueError("degree must be >= 0")
    rule = adapted_rule(rule, w)
    z = rule.points
    sw = np.sqrt(rule.weights * w.checked_polar(rule.r, rule.theta))
    V = sw[:, None] * z[:, None] ** np.arange(d + 1)[None, :]
    scale = np.linalg.norm(V, axis=0)
    if np.any(scale == 0):
        raise RankDeficientError(f"a monomial column vanishes on every node under {w.source}")
    Qm, Rm = np.linalg.qr(V / scale)
    diag = np.abs(np.diag(Rm))
    if diag.min() <= 1e-12 * diag.max():
        raise RankDeficientError(
            f"weighted Vandermonde matrix of degree {d} is rank deficient under {w.source}"
        )
    coeffs = solve_triangular(Rm, Qm.conj().T @ (sw * f.eval(z))) / scale
    return Polynomial(coeffs)


def arnoldi_projection(
    f: FunctionModel, w: WeightSpec, d: int, rule: QuadratureRule, stop_below: float | None = None
) -> ArnoldiPolynomial:
    """Same minimizer as :func:`best_l2_projection`, stable to degrees in the thousands.

    ``errors[k]`` of the result is the squared discrete distance from ``f``
    to polynomials of degree ``<= k``. With ``stop_below`` the degree grows
    only until that squared distance is reached.
    """
    rule = adapted_rule(rule, w)
    s = np.sqrt(rule.weights * w.checked_polar(rule.r, rule.theta))
    try:
        return arnoldi_lstsq(rule.points, s, f.eval(rule.points), d, stop_below)
    except SaturationError as exc:
        raise RankDeficientError(f"{exc} under {w.source}") from None


@dataclass
class ConvergenceTable:
    """Rows ``(param, error_p, norm_p, wall_seconds)`` sorted by ``param``."""

    rows: list
    metadata: dict = field(default_factory=dict)

    HEADER = ("param", "error_p", "norm_p", "wall_seconds")

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda row: row[0])

    def column(self, name: str) -> np.ndarray:
        return np.array([row[self.HEADER.index(name)] for row in self.rows], dtype=float)

    def to_csv(self, timings: bool = False) -> str:
        """CSV text; ``wall_seconds`` is written as ``NA`` unless ``timings``."""
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(self.HEADER)
        for param, err, norm, secs in self.rows:
            p = str(param) if isinstance(param, (int, np.integer)) else format(float(param), ".17g")
            out.writerow([p, format(err, ".17g"), format(norm, ".17g"), format(secs, ".17g") if timings else "NA"])
        return buf.getvalue()


def _timed(func):
    def run(x):
        t0 = time.perf_counter()
        err, norm = func(x)
        return (x, err, norm, time.perf_counter() - t0)

    return run


def dilation_study(
    f: FunctionModel, w: WeightSpec, p: float, space: str, r_list, rule: QuadratureRule, workers: int | None = None
) -> ConvergenceTable:
    """Rows ``(r, ||f - f_r||^p, ||f_r||^p)`` in the chosen space."""
    if space not in SPACES:
        raise NormError(f"unknown space {space!r}")
    r_list = [float(r) for r in r_list]
    if any(not 0.0 < r < 1.0 for r in r_list):
        raise ValueError("dilation parameters must lie in (0, 1)")

    def row(r):
        fr = dilate(f, r)
        return difference_power(space, f, fr, w, p, rule), space_norm(space, fr, w, p, rule).power

    rows = ordered_map(_timed(row), r_list, workers)
    meta = {"space": space, "p": p, "weight": w.source, "function": f.name, **rule.metadata()}
    return ConvergenceTable(rows, meta)


def _degree_polynomial(method: str, f: FunctionModel, w: WeightSpec, d: int, rule: QuadratureRule, r0: float):
    if method == "taylor":
        return taylor_partial_sum(f, d)
    if method == "projection":
        return best_l2_projection(f, w, d, rule)
    if method == "mergelyan":
        return taylor_partial_sum(dilate(f, r0), d)
    raise ValueError(f"unknown method {method!r}; expected taylor, projection or mergelyan")


def degree_study(
    f: FunctionModel,
    w: WeightSpec,
    p: float,
    method: str,
    degree_list,
    rule: QuadratureRule,
    r0: float = 0.95,
    workers: int | None = None,
) -> ConvergenceTable:
    """Rows ``(d, ||f - q_d||^p, ||q_d||^p)`` in ``A^p(w)``.

    ``mergelyan`` uses the degree-``d`` Taylor section of the dilation ``f_{r0}``.
    """
    if method == "projection" and p != 2:
        raise ValueError("projection is only defined for p = 2")

    def row(d):
        q = _degree_polynomial(method, f, w, int(d), rule, r0).to_model()
        return difference_power("bergman", f, q, w, p, rule), bergman_norm(q, w, p, rule).power

    rows = ordered_map(_timed(row), [int(d) for d in degree_list], workers)
    meta = {"space": "bergman", "p": p, "weight": w.source, "function": f.name, "method": method, **rule.metadata()}
    return ConvergenceTable(rows, meta)
