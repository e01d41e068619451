"""Hahn bases of the section ensembles and the space-time correlation kernel.

The section measure is an orthogonal polynomial ensemble for the weight

    w(x) = 1 / (x! (t+N-1-x)! (S+N-1-x)! (T-t-S+x)!)

on ``[lo, hi]``.  After the shift ``x = lo + u`` two of the factorials read
``u!`` and ``(u+B)!`` and the other two ``(M-u)!`` and ``(D-u)!``, with
``M = hi - lo <= D``.  This is the Hahn weight with ``alpha = -D-1`` and
``beta = -B-M-1`` (both below ``-M``).  The orthonormal functions
``Psi_k = H_k sqrt(w) / |H_k|`` are normalised to have positive leading
coefficient, which makes every spectral coefficient nonnegative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln, logsumexp

from .core import BoxDims, enumerate_families, section_bounds, section_states
from .errors import DomainError, SingularConfigurationError, UnsupportedConfigurationError
from .matrices import Direction, as_direction, check_direction, rho, target_of, transition_prob
from .shuffle import DOWN, UP, MarkovPlan, algorithm_step_law, as_source, run_plan_batch

# -- Hahn parameters --------------------------------------------------------------


@dataclass(frozen=True)
class HahnParams:
    lo: int
    M: int
    B: int
    D: int

    @property
    def alpha(self) -> int:
        return -self.D - 1

    @property
    def beta(self) -> int:
        return -self.B - self.M - 1


def hahn_params(dims: BoxDims, t: int) -> HahnParams:
    N, T, S = dims.N, dims.T, dims.S
    lo, hi = section_bounds(N, T, S, t)
    inc = sorted((lo, T - t - S + lo))
    dec = sorted((t + N - 1 - lo, S + N - 1 - lo))
    assert inc[0] == 0 and dec[0] == hi - lo
    return HahnParams(lo, hi - lo, inc[1], dec[1])


def recurrence_coefficients(p: HahnParams) -> tuple[np.ndarray, np.ndarray]:
    """Jacobi matrix of the weight in the ``u`` variable.

    Returns ``(b, a)`` with ``u p_n = a[n+1] p_{n+1} + b[n] p_n + a[n] p_{n-1}``
    for the orthonormal polynomials; ``a[0] = 0``.
    """
    al, be, M = p.alpha, p.beta, p.M
    s = al + be

    def A(n):
        if n == M:  # the (M - n) factor vanishes; the denominator may too
            return 0.0
        return (n + s + 1) * (n + al + 1) * (M - n) / ((2 * n + s + 1) * (2 * n + s + 2))

    def C(n):
        return n * (n + s + M + 1) * (n + be) / ((2 * n + s) * (2 * n + s + 1))

    size = M + 1
    b = np.array([A(n) + C(n) for n in range(size)], dtype=float)
    a = np.zeros(size)
    for n in range(1, size):
        prod = A(n - 1) * C(n)
        a[n] = math.sqrt(prod)
    return b, a


def log_weight_u(p: HahnParams, u: np.ndarray) -> np.ndarray:
    return -(gammaln(u + 1) + gammaln(u + p.B + 1) + gammaln(p.M - u + 1) + gammaln(p.D - u + 1))


# -- the basis ------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HahnBasis:
    """``table[k, x - lo] = Psi_k(x)`` for ``k, x - lo`` in ``0..size-1``."""

    dims: BoxDims
    t: int
    lo: int
    table: np.ndarray

    @property
    def size(self) -> int:
        return self.table.shape[0]

    @property
    def hi(self) -> int:
        return self.lo + self.size - 1

    def psi(self, k: int, x: int) -> float:
        if not 0 <= k < self.size:
            raise DomainError(f"degree {k} outside 0..{self.size - 1}")
        if not self.lo <= x <= self.hi:
            return 0.0
        return float(self.table[k, x - self.lo])

    def column(self, x: int, upto: int | None = None) -> np.ndarray:
        """``(Psi_0(x), ..., Psi_{upto-1}(x))``; zeros off the section."""
        upto = self.size if upto is None else upto
        if not self.lo <= x <= self.hi:
            return np.zeros(upto)
        return self.table[:upto, x - self.lo]

    def gram_deviation(self) -> float:
        G = self.table @ self.table.T
        return float(np.max(np.abs(G - np.eye(self.size))))


def _basis_recurrence(p: HahnParams) -> np.ndarray:
    size = p.M + 1
    u = np.arange(size, dtype=float)
    lw = log_weight_u(p, u)
    b, a = recurrence_coefficients(p)
    table = np.empty((size, size))
    table[0] = np.exp(0.5 * (lw - logsumexp(lw)))
    if size > 1:
        table[1] = (u - b[0]) * table[0] / a[1]
    for n in range(1, size - 1):
        table[n + 1] = ((u - b[n]) * table[n] - a[n] * table[n - 1]) / a[n + 1]
    return table


def _basis_jacobi(p: HahnParams) -> np.ndarray:
    """Table from the eigenvectors of the Jacobi matrix.

    Column ``u`` of the eigenvector matrix is ``(Psi_n(u))_n`` up to a sign.
    The forward recurrence is accurate wherever ``|Psi_n(u)|`` is still near
    its maximum over ``n``, so the sign is read off there.  Plain forward
    recurrence loses accuracy when ``Psi_n(u)`` decays in ``n``, which
    happens near the top degrees for off-centre sections.
    """
    size = p.M + 1
    if size == 1:
        return np.ones((1, 1))
    b, a = recurrence_coefficients(p)
    vals, vecs = eigh_tridiagonal(b, a[1:])
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    if np.max(np.abs(vals - np.arange(size))) > 1e-8 * size:
        raise ArithmeticError("Jacobi spectrum does not match the lattice")
    with np.errstate(over="ignore", invalid="ignore"):
        forward = _basis_recurrence(p)
    peak = np.argmax(np.abs(vecs), axis=0)
    ref = forward[peak, np.arange(size)]
    if not np.all(np.isfinite(ref)) or np.any(ref == 0):
        raise ArithmeticError("could not fix eigenvector signs")
    return vecs * np.sign(ref) * np.sign(vecs[peak, np.arange(size)])


@lru_cache(maxsize=4096)
def _cached_basis(N, T, S, t):
    dims = BoxDims(N, T, S)
    p = hahn_params(dims, t)
    table = _basis_jacobi(p)
    table.setflags(write=False)
    return HahnBasis(dims, t, p.lo, table)


def hahn_basis(dims: BoxDims, t: int) -> HahnBasis:
    """Orthonormal Hahn functions of the section ``t`` (cached, read-only)."""
    if not 0 <= t <= dims.T:
        raise DomainError(f"t={t} outside 0..{dims.T}")
    return _cached_basis(dims.N, dims.T, dims.S, t)


def _poch(a, k):
    out = Fraction(1)
    for i in range(k):
        out *= a + i
    return out


def hahn_direct(dims: BoxDims, t: int) -> list[list[float]]:
    """Orthonormal table from the terminating 3F2 series, in exact rationals.

    ``Q_n(u) = 3F2(-n, n+alpha+beta+1, -u; alpha+1, -M; 1)``; norms are
    computed by exact summation against the weight.  Slow, for checks only.
    """
    p = hahn_params(dims, t)
    al, be, M = p.alpha, p.beta, p.M
    size = M + 1
    # weight relative to u = 0, exact
    w = []
    for u in range(size):
        w.append(
            Fraction(
                math.factorial(p.B) * math.factorial(M) * math.factorial(p.D),
                math.factorial(u) * math.factorial(u + p.B) * math.factorial(M - u) * math.factorial(p.D - u),
            )
        )
    out = []
    for n in range(size):
        Q = []
        for u in range(size):
            s = Fraction(0)
            for k in range(min(n, u) + 1):
                s += _poch(-n, k) * _poch(n + al + be + 1, k) * _poch(-u, k) / (
                    _poch(al + 1, k) * _poch(-M, k) * math.factorial(k)
                )
            Q.append(s)
        lead = _poch(-n, n) * _poch(n + al + be + 1, n) * (-1) ** n / (_poch(al + 1, n) * _poch(-M, n) * math.factorial(n))
        sign = 1 if lead > 0 else -1
        norm = sum(wu * q * q for wu, q in zip(w, Q))
        total = sum(w)
        out.append([sign * float(q) * math.sqrt(float(wu / total)) / math.sqrt(float(norm / total)) for wu, q in zip(w, Q)])
    return out


# -- spectral coefficients ------------------------------------------------------------


def _pair_factor(i: int, p: int, q: int) -> float:
    """``sqrt((1 - i/p)(1 - i/q))``, defined for ``0 <= i <= min(p, q)``."""
    if i > min(p, q):
        raise SingularConfigurationError(f"coefficient index {i} beyond its vanishing point {min(p, q)}")
    return math.sqrt((1 - i / p) * (1 - i / q))


def coefficient_poles(dims: BoxDims, t: int, direction) -> tuple[int, int]:
    """The two integers ``(p, q)`` with ``c(i) = sqrt((1-i/p)(1-i/q))``."""
    d = check_direction(dims, t, direction)
    N, T, S = dims.N, dims.T, dims.S
    if d is Direction.T_PLUS:
        return t + N, T + N - t - 1
    if d is Direction.T_MINUS:
        return t - 1 + N, T + N - t
    if d is Direction.S_PLUS:
        return S + N, T + N - S - 1
    return S - 1 + N, T + N - S


def spectral_coeff(dims: BoxDims, t: int, direction, i: int) -> float:
    """Spectral coefficient ``c(i)`` of the one-section move ``direction``.

    The ``S-`` coefficient is taken as the ``S+`` coefficient of the box one
    step lower, mirroring the ``t-`` case.
    """
    d = as_direction(direction)
    size = hahn_basis(dims, t).size
    dims2, t2 = target_of(dims, t, d)
    size2 = hahn_basis(dims2, t2).size
    if not 0 <= i < min(size, size2):
        raise DomainError(f"index {i} outside 0..{min(size, size2) - 1}")
    return _pair_factor(i, *coefficient_poles(dims, t, d))


def v_matrix(dims: BoxDims, t: int, direction) -> tuple[HahnBasis, HahnBasis, np.ndarray]:
    """``v(x, y) = sum_i c(i) Psi_i(x) Psi'_i(y)`` between source and target sections."""
    d = check_direction(dims, t, direction)
    src = hahn_basis(dims, t)
    dims2, t2 = target_of(dims, t, d)
    tgt = hahn_basis(dims2, t2)
    m = min(src.size, tgt.size)
    c = np.array([_pair_factor(i, *coefficient_poles(dims, t, d)) for i in range(m)])
    return src, tgt, src.table[:m].T @ (c[:, None] * tgt.table[:m])


def spectral_transition(dims: BoxDims, t: int, direction, X: Sequence[int], Y: Sequence[int]) -> float:
    d = check_direction(dims, t, direction)
    src, tgt, v = v_matrix(dims, t, d)
    dims2, t2 = target_of(dims, t, d)
    M = np.array([[v[x - src.lo, y - tgt.lo] for y in Y] for x in X])
    p, q = coefficient_poles(dims, t, d)
    denom = math.prod(_pair_factor(i, p, q) for i in range(dims.N))
    ratio = math.sqrt(float(rho(dims2, t2, Y, exact=False)) / float(rho(dims, t, X, exact=False)))
    return ratio * float(np.linalg.det(M)) / denom


def verify_spectral(dims: BoxDims, t: int, direction) -> float:
    """Worst ``|P - spectral form|`` over all pairs of section states."""
    d = check_direction(dims, t, direction)
    dims2, t2 = target_of(dims, t, d)
    worst = 0.0
    targets = list(section_states(dims2, t2))
    for X in section_states(dims, t):
        for Y in targets:
            exact = float(transition_prob(dims, t, d, X, Y))
            worst = max(worst, abs(exact - spectral_transition(dims, t, d, X, Y)))
    return worst


# -- space-time points and admissible sections ---------------------------------------


@dataclass(frozen=True, order=True)
class SpaceTimePoint:
    r: int
    t: int
    x: int

    @classmethod
    def coerce(cls, q) -> "SpaceTimePoint":
        if isinstance(q, SpaceTimePoint):
            return q
        if isinstance(q, dict):
            return cls(int(q["r"]), int(q["t"]), int(q["x"]))
        r, t, x = q
        return cls(int(r), int(t), int(x))


@dataclass(frozen=True)
class AdmissibleSection:
    """Staircase of ``(r, t)`` pairs: each step is ``r+1`` or ``t-1``."""

    steps: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple((int(r), int(t)) for r, t in self.steps))
        for (r0, t0), (r1, t1) in zip(self.steps, self.steps[1:]):
            if (r1, t1) not in ((r0 + 1, t0), (r0, t0 - 1)):
                raise DomainError(f"({r0},{t0}) -> ({r1},{t1}) is not an admissible step")

    @classmethod
    def through(cls, pairs: Iterable[tuple[int, int]]) -> "AdmissibleSection":
        """Shortest staircase visiting ``pairs`` (r nondecreasing, t nonincreasing)."""
        pairs = list(pairs)
        if not pairs:
            return cls(())
        steps = [pairs[0]]
        for r, t in pairs[1:]:
            r0, t0 = steps[-1]
            if r < r0 or t > t0:
                raise UnsupportedConfigurationError(f"({r},{t}) does not follow ({r0},{t0}) on a staircase")
            for tt in range(t0 - 1, t - 1, -1):
                steps.append((r0, tt))
            for rr in range(r0 + 1, r + 1):
                steps.append((rr, t))
        return cls(tuple(steps))


def order_points(points: Sequence) -> list[SpaceTimePoint]:
    """Sort by ``(r asc, t desc)`` and check the staircase condition."""
    pts = sorted((SpaceTimePoint.coerce(q) for q in points), key=lambda q: (q.r, -q.t, q.x))
    for a, b in zip(pts, pts[1:]):
        if b.t > a.t:
            raise UnsupportedConfigurationError(
                f"points ({a.r},{a.t},{a.x}) and ({b.r},{b.t},{b.x}) have r increasing and t increasing;"
                " no admissible section holds both"
            )
    return pts


# -- correlation kernel -----------------------------------------------------------------


def _check_point(plan: MarkovPlan, q: SpaceTimePoint):
    if not 0 <= q.r <= plan.length:
        raise DomainError(f"r={q.r} outside the plan 0..{plan.length}")
    if not 0 <= q.t <= plan.dims.T:
        raise DomainError(f"t={q.t} outside 0..{plan.dims.T}")


def _path_factors(plan: MarkovPlan, first: SpaceTimePoint, second: SpaceTimePoint) -> list[tuple[int, int]]:
    """``(p, q)`` pairs of the coefficients met from ``first`` to ``second``.

    ``first`` precedes ``second`` on a staircase.  ``t-`` coefficients do not
    depend on ``S`` and ``S+/-`` ones do not depend on ``t``, so any staircase
    between the two points gives the same list.
    """
    dims = plan.dims
    N, T = dims.N, dims.T
    out = []
    for k in range(second.t + 1, first.t + 1):
        out.append((k - 1 + N, T + N - k))
    for k in range(first.r, second.r):
        S = plan.S_at(k)
        if plan.eps[k] == 1:
            out.append((S + N, T + N - S - 1))
        else:
            out.append((S - 1 + N, T + N - S))
    return out


def _coefficient_product(factors, upto: int) -> np.ndarray:
    c = np.ones(upto)
    for p, q in factors:
        i = np.arange(upto)
        c *= np.sqrt((1 - i / p) * (1 - i / q))
    return c


def kernel(plan: MarkovPlan, Q, Qp) -> float:
    """Correlation kernel ``K(Q, Q')`` of the space-time point process.

    Branch one (``r >= r'`` and ``t <= t'``) sums ``Psi Psi / c`` over
    ``i < N``; branch two (``r < r'``, or ``r = r'`` and ``t > t'``) sums
    ``-c Psi Psi`` over ``i >= N`` up to the first vanishing coefficient on
    the way, or the smaller basis, whichever comes first.
    """
    Q, Qp = SpaceTimePoint.coerce(Q), SpaceTimePoint.coerce(Qp)
    _check_point(plan, Q)
    _check_point(plan, Qp)
    N = plan.dims.N
    bq = hahn_basis(plan.dims_at(Q.r), Q.t)
    bp = hahn_basis(plan.dims_at(Qp.r), Qp.t)
    if Q.r >= Qp.r and Q.t <= Qp.t:
        factors = _path_factors(plan, Qp, Q)
        c = _coefficient_product(factors, N)
        if np.any(c <= 0):
            raise SingularConfigurationError(f"vanishing coefficient below N between {Qp} and {Q}")
        return float(np.sum(bq.column(Q.x, N) * bp.column(Qp.x, N) / c))
    if Q.r < Qp.r or (Q.r == Qp.r and Q.t > Qp.t):
        if Q.t < Qp.t:
            raise UnsupportedConfigurationError(f"{Q} and {Qp} are not on a common staircase")
        factors = _path_factors(plan, Q, Qp)
        upto = min([bq.size, bp.size] + [min(p, q) for p, q in factors])
        if upto <= N:
            return 0.0
        c = _coefficient_product(factors, upto)[N:]
        return float(-np.sum(c * bq.column(Q.x, upto)[N:] * bp.column(Qp.x, upto)[N:]))
    raise UnsupportedConfigurationError(f"{Q} and {Qp} are not on a common staircase")


def kernel_matrix(plan: MarkovPlan, points: Sequence) -> np.ndarray:
    pts = [SpaceTimePoint.coerce(q) for q in points]
    return np.array([[kernel(plan, a, b) for b in pts] for a in pts])


def correlation(plan: MarkovPlan, points: Sequence) -> float:
    """``R_n`` as the determinant of the kernel on the staircase-ordered points."""
    pts = order_points(points)
    for q in pts:
        _check_point(plan, q)
    if len(set(pts)) < len(pts):
        # a repeated point is occupied iff it is occupied once
        pts = sorted(set(pts), key=lambda q: (q.r, -q.t, q.x))
    for q in pts:
        lo, hi = section_bounds(plan.dims.N, plan.dims.T, plan.S_at(q.r), q.t)
        if not lo <= q.x <= hi:
            return 0.0
    if not pts:
        return 1.0
    return float(np.linalg.det(kernel_matrix(plan, pts)))


# -- Monte Carlo and exact oracles ----------------------------------------------------


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    trials: int


def occupation_indicators(trajectories: np.ndarray, points: Sequence) -> np.ndarray:
    """Per-trajectory indicator that every point is occupied.

    ``trajectories`` has shape ``(count, R+1, T+1, N)``.
    """
    pts = [SpaceTimePoint.coerce(q) for q in points]
    hit = np.ones(trajectories.shape[0], dtype=bool)
    for q in pts:
        hit &= np.any(trajectories[:, q.r, q.t, :] == q.x, axis=1)
    return hit


def mc_correlation(plan: MarkovPlan, points: Sequence, trials: int, rng, trajectories=None) -> Estimate:
    """Fraction of simulated trajectories occupying all points, with binomial stderr.

    Needs no ordering of the points.  Pass ``trajectories`` to reuse one
    batch for many queries.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    pts = [SpaceTimePoint.coerce(q) for q in points]
    for q in pts:
        _check_point(plan, q)
    if trajectories is None:
        trajectories = run_plan_batch(plan, trials, as_source(rng))
    hit = occupation_indicators(trajectories[:trials], pts)
    p = float(hit.mean())
    n = hit.shape[0]
    return Estimate(p, math.sqrt(max(p * (1 - p), 0.0) / n), n)


@lru_cache(maxsize=64)
def _exact_chain(plan: MarkovPlan):
    """Families at each ``r`` and sparse exact step laws between them."""
    fams = [enumerate_families(plan.dims)]
    steps = []
    for r in range(1, plan.length + 1):
        direction = UP if plan.eps[r - 1] == 1 else DOWN
        tgt = enumerate_families(plan.dims_at(r))
        index = {f.key(): j for j, f in enumerate(tgt)}
        steps.append([[(index[k], q) for k, q in algorithm_step_law(f, direction).items()] for f in fams[-1]])
        fams.append(tgt)
    return fams, steps


def exact_correlation(plan: MarkovPlan, points: Sequence) -> Fraction:
    """Exact ``R_n`` by propagating the uniform law through the exact step laws.

    Enumerates the state spaces, so only for small boxes and short plans.
    Needs no ordering of the points.
    """
    pts = [SpaceTimePoint.coerce(q) for q in points]
    for q in pts:
        _check_point(plan, q)
    last = max((q.r for q in pts), default=0)
    fams, steps = _exact_chain(plan)

    def allowed(r):
        want = [q for q in pts if q.r == r]
        return [all(q.x in f.section(q.t) for q in want) for f in fams[r]]

    ok = allowed(0)
    law = {i: Fraction(1, len(fams[0])) for i in range(len(fams[0])) if ok[i]}
    for r in range(1, last + 1):
        ok = allowed(r)
        nxt: dict[int, Fraction] = {}
        for i, p in law.items():
            for j, q in steps[r - 1][i]:
                if ok[j]:
                    nxt[j] = nxt.get(j, 0) + p * q
        law = nxt
    return sum(law.values(), Fraction(0))
