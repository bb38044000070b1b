"""Polynomial least squares by Vandermonde-with-Arnoldi.

Instead of monomial columns ``z**n`` (whose conditioning grows
exponentially with the degree) the weighted Krylov vectors
``s, z s, z^2 s, ...`` are orthonormalized one at a time. The resulting
Hessenberg matrix ``H`` defines a recurrence for the discrete orthogonal
polynomials ``p_k``, which is all that is needed to evaluate the fit
anywhere else.
"""

from __future__ import annotations

import math

import numpy as np

from .funcmodel import FunctionModel, Polynomial


class SaturationError(ArithmeticError):
    """The Krylov space stops growing numerically (rank deficiency)."""


class ArnoldiPolynomial:
    """``sum_k c[k] p_k(x)`` with ``p_k`` defined by the Hessenberg recurrence.

    ``errors[k]`` is the least-squares residual (squared) at degree ``k``;
    ``error`` is the residual at the final degree, recomputed directly.
    """

    def __init__(self, H: np.ndarray, c: np.ndarray, norm0: float, errors: np.ndarray, error: float):
        self.H = H
        self.c = c
        self.norm0 = norm0
        self.errors = errors
        self.error = error

    @property
    def degree(self) -> int:
        return len(self.c) - 1

    def _basis(self, x, with_derivative: bool):
        x = np.asarray(x, dtype=complex)
        flat = x.reshape(-1)
        d = self.degree
        P = np.zeros((d + 1, flat.size), complex)
        D = np.zeros_like(P) if with_derivative else None
        P[0] = 1.0 / self.norm0
        for k in range(d):
            h = self.H[: k + 1, k]
            P[k + 1] = (flat * P[k] - h @ P[: k + 1]) / self.H[k + 1, k]
            if with_derivative:
                D[k + 1] = (P[k] + flat * D[k] - h @ D[: k + 1]) / self.H[k + 1, k]
        return x.shape, P, D

    def __call__(self, x):
        shape, P, _ = self._basis(x, False)
        out = (self.c @ P).reshape(shape)
        return out[()] if out.ndim == 0 else out

    def deriv(self, x):
        shape, _, D = self._basis(x, True)
        out = (self.c @ D).reshape(shape)
        return out[()] if out.ndim == 0 else out

    def monomial(self) -> Polynomial:
        """Monomial coefficients; only trustworthy at moderate degree."""
        coeffs = np.zeros((self.degree + 1, self.degree + 1), complex)  # row k: p_k
        coeffs[0, 0] = 1.0 / self.norm0
        for k in range(self.degree):
            nxt = np.zeros(self.degree + 1, complex)
            nxt[1:] = coeffs[k, :-1]
            nxt -= self.H[: k + 1, k] @ coeffs[: k + 1]
            coeffs[k + 1] = nxt / self.H[k + 1, k]
        return Polynomial(self.c @ coeffs)

    def to_model(self, name: str | None = None) -> FunctionModel:
        return FunctionModel(
            eval=self, deriv=self.deriv, analyticity_radius=math.inf, degree=self.degree,
            name=name or f"arnoldi(d={self.degree})",
        )

    def __repr__(self):
        return f"ArnoldiPolynomial(degree={self.degree}, residual={math.sqrt(self.error):.3g})"


def arnoldi_lstsq(z, s, values, d: int, stop_below: float | None = None) -> ArnoldiPolynomial:
    """Minimize ``sum |s_j (values_j - q(z_j))|^2`` over ``deg q <= d``.

    With ``stop_below`` the degree stops growing as soon as the squared
    residual drops to that level, so the returned degree may be below ``d``.
    """
    z = np.asarray(z, dtype=complex).ravel()
    s = np.asarray(s, dtype=float).ravel()
    b = s * np.asarray(values, dtype=complex).ravel()
    if d < 0:
        raise ValueError("degree must be >= 0")
    norm0 = float(np.linalg.norm(s))
    if norm0 == 0:
        raise SaturationError("all least-squares weights vanish")
    total = float(np.vdot(b, b).real)
    Q = np.zeros((z.size, d + 1), complex)
    H = np.zeros((d + 2, d + 1), complex)
    c = np.zeros(d + 1, complex)
    Q[:, 0] = s / norm0
    c[0] = np.vdot(Q[:, 0], b)
    captured = [abs(c[0]) ** 2]
    k = 0
    while k < d and not (stop_below is not None and total - captured[-1] <= stop_below):
        v = z * Q[:, k]
        start = np.linalg.norm(v)
        # classical Gram-Schmidt twice is enough for orthogonality to working precision
        for _ in range(2):
            h = Q[:, : k + 1].conj().T @ v
            v = v - Q[:, : k + 1] @ h
            H[: k + 1, k] += h
        hn = float(np.linalg.norm(v))
        if hn <= 1e-13 * start:
            raise SaturationError(f"Krylov space saturates at degree {k + 1}")
        H[k + 1, k] = hn
        Q[:, k + 1] = v / hn
        c[k + 1] = np.vdot(Q[:, k + 1], b)
        captured.append(captured[-1] + abs(c[k + 1]) ** 2)
        k += 1
    residual = b - Q[:, : k + 1] @ c[: k + 1]
    error = math.fsum((np.abs(residual) ** 2).tolist())
    errors = np.maximum(total - np.array(captured), 0.0)
    return ArnoldiPolynomial(H[: k + 2, : k + 1].copy(), c[: k + 1].copy(), norm0, errors, error)
