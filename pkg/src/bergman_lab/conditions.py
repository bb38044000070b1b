"""Grid verification of the weight hypotheses used by the density theorems.

A failing report is a certificate (an explicit witness violates the bound);
a passing report is evidence on a finite grid, not a proof.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .funcmodel import TWO_PI, FunctionModel, polar_angle
from .quadrature import QuadratureRule, build_rule, integrate
from .spaces import lp_integral
from .weights import WeightSpec, DivergentIntegralError, adapted_rule, radial_moment

SKIP_BELOW = 1e-14
MONOTONE_TOL = 1e-10
DEFAULT_CMAX = 16.0


class ConditionError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    n_radii: int = 96
    n_angles: int = 64
    n_dilations: int = 32
    delta: float = 1e-3

    def refined(self) -> "GridSpec":
        return GridSpec(2 * self.n_radii, 2 * self.n_angles, 2 * self.n_dilations, self.delta)


@dataclass(frozen=True)
class Witness:
    z: complex
    r: float
    ratio: float


@dataclass(frozen=True)
class ConditionReport:
    condition_id: str
    passed: bool
    estimated_C: float
    worst_witness: Witness | None
    grid: dict
    details: dict = field(default_factory=dict)

    def as_pairs(self) -> list[tuple[str, str]]:
        """Flat ``key, value`` pairs; numbers carry 17 significant digits."""
        rows = [
            ("condition", self.condition_id),
            ("passed", "1" if self.passed else "0"),
            ("estimated_C", fmt(self.estimated_C)),
        ]
        if self.worst_witness is not None:
            w = self.worst_witness
            rows += [
                ("witness_re", fmt(w.z.real)),
                ("witness_im", fmt(w.z.imag)),
                ("witness_r", fmt(w.r)),
                ("witness_ratio", fmt(w.ratio)),
            ]
        rows += [(f"grid_{k}", fmt(v) if isinstance(v, float) else str(v)) for k, v in self.grid.items()]
        rows += [(k, fmt(v) if isinstance(v, float) else str(v)) for k, v in self.details.items()]
        return rows

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.as_pairs())


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _dilation_values(r0: float, grid: GridSpec) -> np.ndarray:
    if not 0.0 < r0 < 1.0:
        raise ConditionError(f"r0 must lie in (0, 1), got {r0}")
    top = 1.0 - grid.delta
    if r0 > top:
        raise ConditionError(f"r0={r0} leaves no dilation values below 1 - delta")
    return np.linspace(r0, top, grid.n_dilations)


def _ratio_grid(w: WeightSpec, k: int, r0: float, grid: GridSpec, dominator: WeightSpec | None = None):
    """Arrays of ``r``, ``z`` and ``r^k w(z/r) / g(z)`` over the sampling grid.

    Points ``z = s r e^{i theta}`` with ``s = i / n_radii`` cover ``|z| < r``.
    """
    if k < 0 or int(k) != k:
        raise ConditionError(f"k must be a non-negative integer, got {k}")
    rs = _dilation_values(r0, grid)
    s = np.arange(grid.n_radii) / grid.n_radii
    th = TWO_PI * np.arange(grid.n_angles) / grid.n_angles
    R, S, T = np.meshgrid(rs, s, th, indexing="ij")
    # moduli are formed directly so angular weights see the exact same angle
    num = R**k * w.checked_polar(S, T)
    den = (dominator or w).checked_polar(S * R, T)
    keep = den >= SKIP_BELOW
    ratio = np.full(num.shape, -np.inf)
    ratio[keep] = num[keep] / den[keep]
    Z = S * R * np.exp(1j * T)
    return R, Z, ratio, keep


def _worst(R, Z, ratio) -> Witness:
    i = int(np.argmax(ratio))
    return Witness(complex(Z.ravel()[i]), float(R.ravel()[i]), float(ratio.ravel()[i]))


def _grid_meta(grid: GridSpec, r0: float) -> dict:
    return {"n_z": grid.n_radii * grid.n_angles, "n_r": grid.n_dilations, "r0": float(r0), "delta": grid.delta}


def check_dilation_bound(
    w: WeightSpec, k: int, r0: float = 0.5, Cmax: float = DEFAULT_CMAX, grid: GridSpec = GridSpec()
) -> ConditionReport:
    """Test ``r^k w(z/r) <= C w(z)`` for ``|z| < r``, ``r0 <= r < 1``.

    ``estimated_C`` is the largest ratio found; points with ``w(z) < 1e-14``
    are skipped and counted.
    """
    R, Z, ratio, keep = _ratio_grid(w, k, r0, grid)
    if not keep.any():
        raise ConditionError(f"weight {w.source!r} vanishes on the whole grid")
    c = float(ratio.max())
    return ConditionReport(
        f"dilation_bound(k={k})",
        c <= Cmax,
        c,
        _worst(R, Z, ratio),
        _grid_meta(grid, r0),
        {"Cmax": float(Cmax), "skipped": int((~keep).sum())},
    )


def check_monotone_rk(w: WeightSpec, k: int, r0: float = 0.5, grid: GridSpec = GridSpec()) -> ConditionReport:
    """Test that ``r -> r^k w(z/r)`` is nondecreasing on ``[max(|z|+delta, r0), 1)``.

    Slopes are forward differences on ``n_dilations`` points per ``z``;
    ``estimated_C`` holds the most negative slope found.
    """
    if k < 0 or int(k) != k:
        raise ConditionError(f"k must be a non-negative integer, got {k}")
    if not 0.0 < r0 < 1.0:
        raise ConditionError(f"r0 must lie in (0, 1), got {r0}")
    top = 1.0 - grid.delta
    s = np.arange(grid.n_radii) / grid.n_radii
    s = s[np.maximum(s + grid.delta, r0) < top]
    if s.size == 0:
        raise ConditionError("no grid point admits a dilation interval")
    th = TWO_PI * np.arange(grid.n_angles) / grid.n_angles
    lo = np.maximum(s + grid.delta, r0)
    u = np.linspace(0.0, 1.0, grid.n_dilations)
    rr = lo[:, None] + (top - lo)[:, None] * u[None, :]           # (n_s, n_dil)
    mod = s[:, None] / rr                                         # |z/r|
    vals = rr[:, :, None] ** k * w.checked_polar(mod[:, :, None], th[None, None, :])
    slopes = np.diff(vals, axis=1) / np.diff(rr, axis=1)[:, :, None]
    i = np.unravel_index(int(np.argmin(slopes)), slopes.shape)
    worst = float(slopes[i])
    z = s[i[0]] * complex(math.cos(th[i[2]]), math.sin(th[i[2]]))
    return ConditionReport(
        f"monotone_rk(k={k})",
        worst >= -MONOTONE_TOL,
        worst,
        Witness(z, float(rr[i[0], i[1]]), worst),
        _grid_meta(grid, r0),
    )


def circle_average(w: WeightSpec, r: float, n: int = 256) -> float:
    """``(1/2pi) int_0^{2pi} w(r e^{i theta}) d theta`` with panelled Gauss-Legendre."""
    ang = build_rule(2, n, 1.0, "panels")
    th = ang.theta[: ang.n_theta]
    wt = ang.weights[: ang.n_theta] / ang.weights[: ang.n_theta].sum() * TWO_PI
    vals = w.checked_polar(np.full_like(th, r), th)
    return math.fsum((wt * vals).tolist()) / TWO_PI


def check_boundary_vanishing(
    w: WeightSpec, r_list=(0.9, 0.99, 0.999, 0.9999), tol: float = 1e-2
) -> ConditionReport:
    """Circle averages must decrease along ``r_list`` and end below ``tol``."""
    r_list = [float(r) for r in r_list]
    if any(b <= a for a, b in zip(r_list, r_list[1:])):
        raise ConditionError("r_list must be strictly increasing")
    m = [circle_average(w, r) for r in r_list]
    decreasing = all(b < a for a, b in zip(m, m[1:]))
    passed = decreasing and m[-1] < tol
    details = {f"m({fmt(r)})": v for r, v in zip(r_list, m)}
    details["tol"] = float(tol)
    return ConditionReport(
        "boundary_vanishing",
        passed,
        m[-1],
        Witness(complex(r_list[-1], 0.0), r_list[-1], m[-1]),
        {"n_r": len(r_list)},
        details,
    )


def _finite_by_refinement(f: FunctionModel, g: WeightSpec, p: float, rule: QuadratureRule) -> tuple[bool, float, float]:
    coarse = lp_integral(f.eval, g, p, rule)
    fine = lp_integral(f.eval, g, p, rule.refined())
    ok = math.isfinite(fine) and abs(fine - coarse) <= 0.01 * abs(fine)
    return ok, coarse, fine


def check_dominated_bound(
    w: WeightSpec,
    g: WeightSpec,
    f: FunctionModel,
    p: float,
    k: int,
    r0: float = 0.5,
    grid: GridSpec = GridSpec(),
    rule: QuadratureRule | None = None,
) -> ConditionReport:
    """``r^k w(z/r) <= g(z)`` on the grid and ``int |f|^p g dA`` finite.

    Raises :class:`DivergentIntegralError` when the dominating integral
    changes by more than 1% under refinement.
    """
    R, Z, ratio, keep = _ratio_grid(w, k, r0, grid, dominator=g)
    if not keep.any():
        raise ConditionError(f"dominating weight {g.source!r} vanishes on the whole grid")
    c = float(ratio.max())
    rule = rule or build_rule(32, 64)
    ok, coarse, fine = _finite_by_refinement(f, g, p, adapted_rule(rule, g))
    if not ok:
        raise DivergentIntegralError(
            f"int |f|^p g dA changes from {coarse:.6g} to {fine:.6g} under refinement"
        )
    return ConditionReport(
        f"dominated_bound(k={k})",
        c <= 1.0 + 1e-10,
        c,
        _worst(R, Z, ratio),
        _grid_meta(grid, r0),
        {"dominating_integral": fine, "skipped": int((~keep).sum())},
    )


def bilaplacian(w: WeightSpec, x, y, h: float) -> np.ndarray:
    """13-point stencil for ``Delta^2`` with ``Delta = (d_xx + d_yy) / 4``."""

    def W(dx, dy):
        z = (x + dx * h) + 1j * (y + dy * h)
        return w.polar(np.abs(z), polar_angle(z))

    c = W(0, 0)
    near = W(1, 0) + W(-1, 0) + W(0, 1) + W(0, -1)
    diag = W(1, 1) + W(1, -1) + W(-1, 1) + W(-1, -1)
    far = W(2, 0) + W(-2, 0) + W(0, 2) + W(0, -2)
    # the standard (d_xx + d_yy)^2 stencil, times (1/4)^2
    return (20.0 * c - 8.0 * near + 2.0 * diag + far) / (16.0 * h**4)


def check_superbiharmonic(w: WeightSpec, h: float = 1e-2, grid: GridSpec = GridSpec(24, 32)) -> ConditionReport:
    """Check ``Delta^2 w >= 0`` by finite differences on an interior grid.

    The tolerance is ``1e-4 * max|Delta^2 w|`` plus the rounding level of
    the stencil, ``64 eps max|w| / (16 h^4)`` with a tenfold margin.
    """
    if not 0 < h < 0.125:
        raise ConditionError(f"step h must lie in (0, 0.125), got {h}")
    rmax = 1.0 - 4.0 * h
    s = rmax * np.arange(grid.n_radii) / max(grid.n_radii - 1, 1)
    th = TWO_PI * np.arange(grid.n_angles) / grid.n_angles
    S, T = np.meshgrid(s, th, indexing="ij")
    x, y = S * np.cos(T), S * np.sin(T)
    vals = bilaplacian(w, x, y, h)
    if not np.all(np.isfinite(vals)):
        i = np.flatnonzero(~np.isfinite(vals.ravel()))[0]
        raise ConditionError(
            f"bilaplacian of {w.source!r} is not finite at z={complex(x.ravel()[i], y.ravel()[i])}"
        )
    wmax = float(np.max(np.abs(w.polar(S, T))))
    scale = float(np.max(np.abs(vals)))
    noise = 10.0 * 64.0 * np.finfo(float).eps * max(wmax, 1.0) / (16.0 * h**4)
    tol = 1e-4 * scale + noise
    i = int(np.argmin(vals))
    worst = float(vals.ravel()[i])
    return ConditionReport(
        "superbiharmonic",
        worst >= -tol,
        worst,
        Witness(complex(x.ravel()[i], y.ravel()[i]), float(S.ravel()[i]), worst),
        {"n_z": s.size * th.size, "h": float(h), "rmax": rmax},
        {"scale": scale, "tolerance": tol},
    )


def check_radial_integrability(w: WeightSpec) -> ConditionReport:
    """Mergelyan's condition ``int_0^1 r w(r) dr < infinity`` for radial weights."""
    try:
        m0 = radial_moment(w, 0)
        ok = True
    except DivergentIntegralError:
        m0, ok = math.inf, False
    return ConditionReport("radial_integrability", ok, m0, None, {}, {"moment_0": m0})


def suggest_k(
    w: WeightSpec, kmax: int = 16, r0: float = 0.5, Cmax: float = DEFAULT_CMAX, grid: GridSpec = GridSpec()
) -> int | None:
    """Smallest ``k <= kmax`` for which :func:`check_dilation_bound` passes."""
    if kmax > 64:
        raise ConditionError("kmax must be <= 64")
    for k in range(kmax + 1):
        if check_dilation_bound(w, k, r0, Cmax, grid).passed:
            return k
    return None
