"""Bulk scaling limit of the space-time kernel.

Macroscopic data ``(S0, T, N, t, x)`` (all scaled by a small ``eps``) fix an
angle ``phi`` and two constants ``c1, c2``.  The limit kernel is a contour
integral over an arc of the unit circle between ``exp(-i phi)`` and
``exp(i phi)``: through ``+1`` (``gamma_plus``, counterclockwise) or through
``-1`` (``gamma_minus``, clockwise).  With ``z = exp(i theta)`` both become
real-line integrals ``(1/2pi) int f(e^{i theta}) e^{-i d theta} d theta``
done by adaptive Gauss-Kronrod quadrature.

The inverted factors ``(1 + c2 z^{-e})^{-1}`` and negative powers of
``1 + c1 z`` have their poles at ``-c2``, ``-1/c2`` and ``-1/c1``, which
reach the unit circle only at ``z = -1``; ``gamma_plus`` never passes
there, so no contour deformation is ever needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import quad

from .core import BoxDims
from .errors import OutsideBulkError, UnsupportedConfigurationError
from .shuffle import MarkovPlan
from .spectral import SpaceTimePoint, correlation

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class BulkRegime:
    """Macroscopic coordinates; all must be positive."""

    S0: float
    T: float
    N: float
    t: float
    x: float

    def __post_init__(self):
        for name in ("S0", "T", "N", "t", "x"):
            if not getattr(self, name) > 0:
                raise OutsideBulkError(f"{name} must be positive")

    def cos_phi(self) -> float:
        S0, T, N, t, x = self.S0, self.T, self.N, self.t, self.x
        f = (x, S0 + N - x, t + N - x, x + T - S0 - t)
        if min(f) <= 0:
            raise OutsideBulkError(f"point lies outside the hexagon slice (factors {f})")
        num = -N * (N + T) + (S0 + N - x) * (t + N - x) + x * (T + x - S0 - t)
        return num / (2 * math.sqrt(f[0] * f[1] * f[2] * f[3]))

    def in_bulk(self) -> bool:
        try:
            return abs(self.cos_phi()) < 1
        except OutsideBulkError:
            return False


@dataclass(frozen=True)
class BulkParams:
    phi: float
    c1: float
    c2: float

    @property
    def density(self) -> float:
        return self.phi / math.pi


def bulk_params(reg: BulkRegime) -> BulkParams:
    cphi = reg.cos_phi()
    if not -1 < cphi < 1:
        raise OutsideBulkError(f"cos(phi) = {cphi} is not inside (-1, 1); the point is frozen")
    S0, T, N, t, x = reg.S0, reg.T, reg.N, reg.t, reg.x
    c1 = math.sqrt(x * (S0 + N - x) / ((T - t - S0 + x) * (t + N - x)))
    c2 = math.sqrt(x * (t + N - x) / ((T - t - S0 + x) * (S0 + N - x)))
    return BulkParams(math.acos(cphi), c1, c2)


@dataclass(frozen=True, order=True)
class BulkPoint:
    """Dynamics index ``r`` and integer offsets of ``t`` and ``x``."""

    r: int
    t: int
    x: int

    @classmethod
    def coerce(cls, q) -> "BulkPoint":
        if isinstance(q, BulkPoint):
            return q
        if isinstance(q, dict):
            return cls(int(q["r"]), int(q["t"]), int(q["x"]))
        r, t, x = q
        return cls(int(r), int(t), int(x))


@dataclass(frozen=True)
class KernelValue:
    value: complex
    error: float


def _arc_integral(fn, lo: float, hi: float, tol: float) -> tuple[complex, float]:
    re, er = quad(lambda th: fn(th).real, lo, hi, epsabs=tol, epsrel=0, limit=400)
    im, ei = quad(lambda th: fn(th).imag, lo, hi, epsabs=tol, epsrel=0, limit=400)
    return complex(re, im), er + ei


def bulk_kernel_value(
    params: BulkParams, Qi, Qj, eps_seq: Sequence[int] = (), tol: float = DEFAULT_TOL
) -> KernelValue:
    """``K_bulk(Qi, Qj)`` with its quadrature error estimate.

    ``eps_seq[k-1]`` is the move ``epsilon_k`` between ``r = k-1`` and ``r = k``.
    """
    Qi, Qj = BulkPoint.coerce(Qi), BulkPoint.coerce(Qj)
    dt, d = Qi.t - Qj.t, Qi.x - Qj.x
    c1, c2, phi = params.c1, params.c2, params.phi
    if Qi.r < Qj.r or (Qi.r == Qj.r and Qi.t > Qj.t):
        if dt < 0:
            raise UnsupportedConfigurationError(f"{Qi} and {Qj} are not on a common staircase")
        moves = _moves(eps_seq, Qi.r, Qj.r)

        def f(th):
            z = complex(math.cos(th), math.sin(th))
            val = (1 + c1 * z) ** dt * z ** (-d)
            for e in moves:
                val *= 1 + c2 * z ** (-e)
            return val

        # clockwise from -phi down to phi - 2 pi
        val, err = _arc_integral(f, phi, 2 * math.pi - phi, tol)
        return KernelValue(-val / (2 * math.pi), err / (2 * math.pi))
    if Qi.r >= Qj.r and Qi.t <= Qj.t:
        moves = _moves(eps_seq, Qj.r, Qi.r)

        def f(th):
            z = complex(math.cos(th), math.sin(th))
            val = (1 + c1 * z) ** dt * z ** (-d)
            for e in moves:
                val /= 1 + c2 * z ** (-e)
            return val

        val, err = _arc_integral(f, -phi, phi, tol)
        return KernelValue(val / (2 * math.pi), err / (2 * math.pi))
    raise UnsupportedConfigurationError(f"{Qi} and {Qj} are not on a common staircase")


def _moves(eps_seq, r_from: int, r_to: int) -> list[int]:
    if r_to > len(eps_seq):
        raise UnsupportedConfigurationError(f"r={r_to} needs {r_to} moves, only {len(eps_seq)} given")
    return [int(e) for e in eps_seq[r_from:r_to]]


def bulk_kernel(reg: BulkRegime, Qi, Qj, eps_seq: Sequence[int] = (), tol: float = DEFAULT_TOL) -> complex:
    return bulk_kernel_value(bulk_params(reg), Qi, Qj, eps_seq, tol).value


def _ordered(points) -> list[BulkPoint]:
    pts = sorted((BulkPoint.coerce(q) for q in points), key=lambda q: (q.r, -q.t, q.x))
    for a, b in zip(pts, pts[1:]):
        if b.t > a.t:
            raise UnsupportedConfigurationError(f"{a} and {b} are not on a common staircase")
    return pts


def bulk_kernel_matrix(reg: BulkRegime, points, eps_seq=(), tol: float = DEFAULT_TOL):
    """Kernel matrix on the staircase-ordered points and the worst quadrature error."""
    params = bulk_params(reg)
    pts = _ordered(points)
    K = np.empty((len(pts), len(pts)), dtype=complex)
    worst = 0.0
    for i, a in enumerate(pts):
        for j, b in enumerate(pts):
            kv = bulk_kernel_value(params, a, b, eps_seq, tol)
            K[i, j] = kv.value
            worst = max(worst, kv.error)
    return pts, K, worst


def bulk_correlation(reg: BulkRegime, points, eps_seq=(), tol: float = DEFAULT_TOL) -> float:
    """Limit of ``R_n``; the determinant is real up to quadrature noise."""
    _, K, _ = bulk_kernel_matrix(reg, points, eps_seq, tol)
    val = complex(np.linalg.det(K)) if len(K) else 1.0
    if abs(val.imag) > 1e-8:
        raise ArithmeticError(f"bulk determinant has imaginary part {val.imag:.3e}")
    return float(val.real)


# -- finite-size comparison -------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceRow:
    scale: float
    N: int
    T: int
    S0: int
    finite: float
    bulk: float

    @property
    def gap(self) -> float:
        return abs(self.finite - self.bulk)


def embed(reg: BulkRegime, scale: float, points, eps_seq=()):
    """Integer box, plan and space-time points for ``eps = 1/scale``."""
    N, T, S0 = round(reg.N * scale), round(reg.T * scale), round(reg.S0 * scale)
    t0, x0 = round(reg.t * scale), round(reg.x * scale)
    pts = [BulkPoint.coerce(q) for q in points]
    R = max((q.r for q in pts), default=0)
    plan = MarkovPlan(BoxDims(N, T, S0), tuple(eps_seq[:R]))
    return plan, [SpaceTimePoint(q.r, t0 + q.t, x0 + q.x) for q in pts]


def convergence_check(reg: BulkRegime, points, scales: Sequence[float], eps_seq=()) -> list[ConvergenceRow]:
    """Finite correlation versus the bulk limit for each ``scale = 1/eps``."""
    bulk = bulk_correlation(reg, points, eps_seq)
    rows = []
    for scale in scales:
        plan, pts = embed(reg, scale, points, eps_seq)
        rows.append(ConvergenceRow(scale, plan.dims.N, plan.dims.T, plan.dims.S, correlation(plan, pts), bulk))
    return rows
