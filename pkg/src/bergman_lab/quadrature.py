"""Polar product quadrature on truncated disks ``{|z| < R}``.

The radial rule is Gauss-Legendre in ``t = r**2`` on ``[0, R**2]`` so that
``r dr = dt / 2``; monomial moments ``int r^(2n+1) dr`` are then integrated
exactly for ``n <= 2*N_r - 1``. The angular rule is either uniform (spectral
for smooth periodic integrands) or eight composite Gauss-Legendre panels,
which keeps high order for angular weights with a jump at ``theta = 0``.

Sums are formed with :func:`math.fsum` over a fixed node order, so the
result is bit-identical for any worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._parallel import ordered_map
from .funcmodel import TWO_PI

ANGULAR_PANELS = 8
CHUNK = 2048


class QuadratureError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Tensor rule; node arrays are flattened with the angular index fastest."""

    R: float
    n_r: int
    n_theta: int
    theta_rule: str
    r: np.ndarray
    theta: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def points(self) -> np.ndarray:
        return self.r * np.exp(1j * self.theta)

    def metadata(self) -> dict:
        return {"n_r": self.n_r, "n_theta": self.n_theta, "R": self.R, "theta_rule": self.theta_rule}

    def refined(self) -> "QuadratureRule":
        """Same rule family with doubled counts in both directions."""
        return build_rule(2 * self.n_r, 2 * self.n_theta, self.R, self.theta_rule)

    def with_theta_rule(self, theta_rule: str) -> "QuadratureRule":
        if theta_rule == self.theta_rule:
            return self
        return build_rule(self.n_r, self.n_theta, self.R, theta_rule)

    def truncated(self, R: float) -> "QuadratureRule":
        return build_rule(self.n_r, self.n_theta, R, self.theta_rule)


def _angular_nodes(n_theta: int, theta_rule: str):
    if theta_rule == "uniform":
        nodes = TWO_PI * np.arange(n_theta) / n_theta
        return nodes, np.full(n_theta, TWO_PI / n_theta)
    if theta_rule == "panels":
        per = max(2, -(-n_theta // ANGULAR_PANELS))
        x, w = np.polynomial.legendre.leggauss(per)
        h = TWO_PI / ANGULAR_PANELS
        starts = h * np.arange(ANGULAR_PANELS)
        nodes = (starts[:, None] + 0.5 * h * (x + 1.0)).ravel()
        return nodes, np.tile(0.5 * h * w, ANGULAR_PANELS)
    raise QuadratureError(f"unknown angular rule {theta_rule!r}")


def build_rule(n_r: int, n_theta: int, R: float = 1.0, theta_rule: str = "uniform") -> QuadratureRule:
    """Polar product rule with ``n_r`` radial and ``n_theta`` angular nodes.

    With ``theta_rule="panels"`` the angular count is rounded up to a
    multiple of eight.
    """
    if int(n_r) != n_r or n_r < 2:
        raise QuadratureError(f"n_r must be an integer >= 2, got {n_r}")
    if int(n_theta) != n_theta or n_theta < 4:
        raise QuadratureError(f"n_theta must be an integer >= 4, got {n_theta}")
    if not 0.0 < R <= 1.0:
        raise QuadratureError(f"R must lie in (0, 1], got {R}")
    n_r, n_theta = int(n_r), int(n_theta)
    x, w = np.polynomial.legendre.leggauss(n_r)
    t = 0.5 * R * R * (x + 1.0)
    wt = 0.25 * R * R * w  # (R^2/2) from [-1,1] -> [0,R^2], 1/2 from r dr = dt/2
    th, wth = _angular_nodes(n_theta, theta_rule)
    rr = np.repeat(np.sqrt(t), th.size)
    tt = np.tile(th, n_r)
    ww = np.outer(wt, wth).ravel()
    for a in (rr, tt, ww):
        a.setflags(write=False)
    return QuadratureRule(R=float(R), n_r=n_r, n_theta=th.size, theta_rule=theta_rule, r=rr, theta=tt, weights=ww)


def evaluate_nodes(rule: QuadratureRule, g: Callable, workers: int | None = None) -> np.ndarray:
    """Evaluate ``g(r, theta)`` on all nodes in fixed-size chunks."""
    bounds = [(i, min(i + CHUNK, rule.size)) for i in range(0, rule.size, CHUNK)]
    parts = ordered_map(lambda b: np.asarray(g(rule.r[b[0]:b[1]], rule.theta[b[0]:b[1]]), dtype=float)
                        * np.ones(b[1] - b[0]), bounds, workers)
    return np.concatenate(parts)


def integrate(rule: QuadratureRule, g: Callable, workers: int | None = None) -> float:
    """Approximate the area integral of ``g(r, theta)`` over ``{|z| < R}``.

    ``g`` is vectorized over node arrays. A non-finite value raises
    :class:`QuadratureError` naming the first offending node.
    """
    vals = evaluate_nodes(rule, g, workers)
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        i = bad[0]
        raise QuadratureError(
            f"integrand is {vals[i]} at node {i} (r={float(rule.r[i])!r}, theta={float(rule.theta[i])!r})"
        )
    return math.fsum((rule.weights * vals).tolist())
