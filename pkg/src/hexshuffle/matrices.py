"""Section measures and the four one-section stochastic matrix families.

Every function takes the box ``dims = (N, T, S)`` together with a section
time ``t``.  Probabilities come back as :class:`fractions.Fraction` when
``exact=True`` (the default) and as floats otherwise; the float path works
in log space so that it survives ``N`` in the thousands.

Directions: ``t+``/``t-`` move the section time, ``S+``/``S-`` change the
box while keeping ``t``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .core import BoxDims, in_section, neighbours, section_bounds, section_domain, section_states
from .errors import DomainError

DENSE_ROW_LIMIT = 10**4


class Direction(str, enum.Enum):
    T_PLUS = "t+"
    T_MINUS = "t-"
    S_PLUS = "S+"
    S_MINUS = "S-"

    @property
    def step(self) -> int:
        return 1 if self in (Direction.T_PLUS, Direction.S_PLUS) else -1

    @property
    def offsets(self) -> tuple[int, int]:
        return (0, 1) if self.step == 1 else (-1, 0)

    def target(self, S: int, t: int) -> tuple[int, int]:
        """``(S, t)`` of the section the matrix maps into."""
        return {
            Direction.T_PLUS: (S, t + 1),
            Direction.T_MINUS: (S, t - 1),
            Direction.S_PLUS: (S + 1, t),
            Direction.S_MINUS: (S - 1, t),
        }[self]

    def swapped(self) -> "Direction":
        """Image under the ``S <-> t`` involution."""
        return {
            Direction.T_PLUS: Direction.S_PLUS,
            Direction.S_PLUS: Direction.T_PLUS,
            Direction.T_MINUS: Direction.S_MINUS,
            Direction.S_MINUS: Direction.T_MINUS,
        }[self]


def as_direction(d) -> Direction:
    return d if isinstance(d, Direction) else Direction(d)


def check_direction(dims: BoxDims, t: int, direction) -> Direction:
    d = as_direction(direction)
    section_domain(dims, t)
    S, T = dims.S, dims.T
    if d is Direction.T_PLUS and t >= T:
        raise DomainError("t+ needs t < T")
    if d is Direction.T_MINUS and t <= 0:
        raise DomainError("t- needs t > 0")
    if d is Direction.S_PLUS and S >= T:
        raise DomainError("S+ needs S < T")
    if d is Direction.S_MINUS and S <= 0:
        raise DomainError("S- needs S > 0")
    return d


def target_of(dims: BoxDims, t: int, direction) -> tuple[BoxDims, int]:
    d = check_direction(dims, t, direction)
    S2, t2 = d.target(dims.S, t)
    return dims.with_S(S2), t2


def pochhammer(a, k: int):
    out = 1
    for j in range(k):
        out *= a + j
    return out


# -- measures ------------------------------------------------------------


def weight(dims: BoxDims, t: int, x: int) -> Fraction:
    N, T, S = dims.N, dims.T, dims.S
    f = math.factorial
    return Fraction(1, f(x) * f(t + N - 1 - x) * f(S + N - 1 - x) * f(T - t - S + x))


def log_weight(dims: BoxDims, t: int, x):
    """Natural log of the one-point weight; ``x`` may be an array."""
    N, T, S = dims.N, dims.T, dims.S
    x = np.asarray(x, dtype=float)
    return -(
        gammaln(x + 1) + gammaln(t + N - x) + gammaln(S + N - x) + gammaln(T - t - S + x + 1)
    )


def normalization(dims: BoxDims, t: int) -> Fraction:
    """Closed-form normalising constant of the section measure."""
    N, T, S = dims.N, dims.T, dims.S
    f = math.factorial
    z = Fraction(1)
    for i in range(1, N + 1):
        z *= Fraction(
            pochhammer(t + 1, i - 1) * pochhammer(T - t + 1, i - 1) * f(S - i + N) * f(T - S + i - 1),
            pochhammer(T + 1, i - 1) * f(i - 1),
        )
    return z * Fraction(f(t) * f(T - t), f(T)) ** N


def log_normalization(dims: BoxDims, t: int) -> float:
    N, T, S = dims.N, dims.T, dims.S
    lg = math.lgamma
    out = N * (lg(t + 1) + lg(T - t + 1) - lg(T + 1))
    for i in range(1, N + 1):
        out += (
            lg(t + i) - lg(t + 1)
            + lg(T - t + i) - lg(T - t + 1)
            + lg(S - i + N + 1)
            + lg(T - S + i)
            - (lg(T + i) - lg(T + 1))
            - lg(i)
        )
    return out


def normalization_by_sum(dims: BoxDims, t: int) -> Fraction:
    """Reciprocal of the unnormalised total mass; cross-check only."""
    total = Fraction(0)
    for Y in section_states(dims, t):
        total += _vandermonde_sq(Y) * math.prod(weight(dims, t, y) for y in Y)
    return 1 / total


def _vandermonde(xs: Sequence[int]) -> int:
    out = 1
    n = len(xs)
    for i in range(n):
        for j in range(i + 1, n):
            out *= xs[j] - xs[i]
    return out


def _vandermonde_sq(xs):
    v = _vandermonde(xs)
    return v * v


def rho(dims: BoxDims, t: int, Y: Sequence[int], exact: bool = True):
    """Probability that the section at ``t`` of a uniform tiling equals ``Y``."""
    Y = tuple(int(y) for y in Y)
    if not in_section(dims, t, Y):
        raise DomainError(f"{Y} is not a state of section t={t} for {dims}")
    if exact:
        w = Fraction(1)
        for y in Y:
            w *= weight(dims, t, y)
        return normalization(dims, t) * _vandermonde_sq(Y) * w
    return math.exp(log_rho(dims, t, Y))


def log_rho(dims: BoxDims, t: int, Y: Sequence[int]) -> float:
    Y = np.asarray(Y, dtype=float)
    diffs = Y[None, :] - Y[:, None]
    iu = np.triu_indices(len(Y), 1)
    return (
        log_normalization(dims, t)
        + 2.0 * float(np.sum(np.log(diffs[iu])))
        + float(np.sum(log_weight(dims, t, Y)))
    )


# -- one-section transitions -----------------------------------------------


def _denominator(dims: BoxDims, t: int, d: Direction) -> int:
    N, T, S = dims.N, dims.T, dims.S
    base = {
        Direction.T_PLUS: T - t,
        Direction.S_PLUS: T - S,
        Direction.T_MINUS: t,
        Direction.S_MINUS: S,
    }[d]
    return pochhammer(base, N)


def _move_factor(dims: BoxDims, t: int, d: Direction, x: int) -> int:
    N, S = dims.N, dims.S
    if d is Direction.T_PLUS:
        return N + S - 1 - x
    if d is Direction.S_PLUS:
        return N + t - 1 - x
    return x


def _stay_factor(dims: BoxDims, t: int, d: Direction, x: int) -> int:
    N, T, S = dims.N, dims.T, dims.S
    if d in (Direction.T_PLUS, Direction.S_PLUS):
        return T - t - S + x
    if d is Direction.T_MINUS:
        return t + N - 1 - x
    return S + N - 1 - x


def _check_pair(dims, t, d, X, Y):
    if not in_section(dims, t, X):
        raise DomainError(f"{tuple(X)} is not a state of section (S={dims.S}, t={t})")
    S2, t2 = d.target(dims.S, t)
    if not in_section(dims.with_S(S2), t2, Y):
        raise DomainError(f"{tuple(Y)} is not a state of section (S={S2}, t={t2})")


def transition_prob(dims: BoxDims, t: int, direction, X, Y, exact: bool = True):
    """Entry ``P(X, Y)`` of the one-section matrix in the given direction."""
    d = check_direction(dims, t, direction)
    X = tuple(int(v) for v in X)
    Y = tuple(int(v) for v in Y)
    _check_pair(dims, t, d, X, Y)
    move = d.step
    num = _vandermonde(Y)
    for x, y in zip(X, Y):
        if y == x + move:
            num *= _move_factor(dims, t, d, x)
        elif y == x:
            num *= _stay_factor(dims, t, d, x)
        else:
            return Fraction(0) if exact else 0.0
    den = _denominator(dims, t, d) * _vandermonde(X)
    return Fraction(num, den) if exact else num / den


def u_entry(dims: BoxDims, t: int, direction, x: int, y: int) -> int:
    """Two-diagonal building block ``U(x, y)``."""
    d = check_direction(dims, t, direction)
    lo, hi = section_bounds(dims.N, dims.T, dims.S, t)
    S2, t2 = d.target(dims.S, t)
    lo2, hi2 = section_bounds(dims.N, dims.T, S2, t2)
    if not lo <= x <= hi or not lo2 <= y <= hi2:
        raise DomainError(f"({x}, {y}) outside the {d.value} domain at (S={dims.S}, t={t})")
    move = d.step
    if y == x + move:
        return _move_factor(dims, t, d, x)
    if y == x:
        return _stay_factor(dims, t, d, x)
    return 0


def u_matrix(dims: BoxDims, t: int, direction) -> tuple[range, range, np.ndarray]:
    """Dense ``U`` as an object array of Python ints, with row/column positions."""
    d = check_direction(dims, t, direction)
    lo, hi = section_bounds(dims.N, dims.T, dims.S, t)
    S2, t2 = d.target(dims.S, t)
    lo2, hi2 = section_bounds(dims.N, dims.T, S2, t2)
    rows, cols = range(lo, hi + 1), range(lo2, hi2 + 1)
    U = np.zeros((len(rows), len(cols)), dtype=object)
    for i, x in enumerate(rows):
        for j, y in enumerate(cols):
            U[i, j] = u_entry(dims, t, d, x, y)
    return rows, cols, U


def u_t_plus_s_minus(dims: BoxDims, t: int, x: int, y: int) -> int:
    """Closed form of ``U_{t+} U_{S-}`` from section ``(S, t)`` to ``(S-1, t+1)``."""
    N, T, S = dims.N, dims.T, dims.S
    if y == x + 1:
        return (N + S - 1 - x) * (N + S - 2 - x)
    if y == x:
        return (N + S - 1 - x) * (T - t - S + 2 * x + 1)
    if y == x - 1:
        return x * (T - t - S + x)
    return 0


def exact_det(M) -> Fraction:
    """Determinant of a small matrix of integers or fractions (Gaussian elimination)."""
    A = [[Fraction(v) for v in row] for row in M]
    n = len(A)
    det = Fraction(1)
    for c in range(n):
        p = next((r for r in range(c, n) if A[r][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            A[c], A[p] = A[p], A[c]
            det = -det
        det *= A[c][c]
        inv = 1 / A[c][c]
        for r in range(c + 1, n):
            f = A[r][c] * inv
            if f:
                for k in range(c, n):
                    A[r][k] -= f * A[c][k]
    return det


def det_representation(dims: BoxDims, t: int, direction, X, Y, exact: bool = True):
    """``P(X, Y)`` recomputed from the ``N x N`` minor of ``U``."""
    d = check_direction(dims, t, direction)
    X = tuple(int(v) for v in X)
    Y = tuple(int(v) for v in Y)
    _check_pair(dims, t, d, X, Y)
    minor = [[u_entry(dims, t, d, x, y) for y in Y] for x in X]
    den = _denominator(dims, t, d) * _vandermonde(X)
    if exact:
        return _vandermonde(Y) * exact_det(minor) / den
    return _vandermonde(Y) * float(np.linalg.det(np.array(minor, dtype=float))) / den


# -- sparse matrices ---------------------------------------------------------


@dataclass
class SparseMatrix:
    """Row-sparse matrix indexed by section states."""

    rows: list[tuple[int, ...]]
    cols: list[tuple[int, ...]]
    data: list[dict[int, object]] = field(default_factory=list)

    def __post_init__(self):
        self.col_index = {c: j for j, c in enumerate(self.cols)}

    def row_sums(self) -> list:
        return [sum(r.values(), Fraction(0)) for r in self.data]

    def left_apply(self, vec: dict) -> dict:
        out: dict = {}
        for i, X in enumerate(self.rows):
            p = vec.get(X, 0)
            if p:
                for j, v in self.data[i].items():
                    Y = self.cols[j]
                    out[Y] = out.get(Y, 0) + p * v
        return out

    def __matmul__(self, other: "SparseMatrix") -> "SparseMatrix":
        if self.cols != other.rows:
            raise DomainError("inner dimensions differ")
        data = []
        for row in self.data:
            acc: dict[int, object] = {}
            for k, v in row.items():
                for j, w in other.data[k].items():
                    acc[j] = acc.get(j, 0) + v * w
            data.append({j: v for j, v in acc.items() if v != 0})
        return SparseMatrix(self.rows, other.cols, data)

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return self.rows == other.rows and self.cols == other.cols and self.data == other.data

    def entry(self, X, Y):
        return self.data[self.rows.index(tuple(X))].get(self.col_index[tuple(Y)], 0)

    def to_dense(self) -> np.ndarray:
        if len(self.rows) > DENSE_ROW_LIMIT:
            raise DomainError(f"{len(self.rows)} rows exceed the dense limit {DENSE_ROW_LIMIT}")
        M = np.zeros((len(self.rows), len(self.cols)), dtype=object)
        for i, row in enumerate(self.data):
            for j, v in row.items():
                M[i, j] = v
        return M


def transition_matrix(dims: BoxDims, t: int, direction, exact: bool = True) -> SparseMatrix:
    d = check_direction(dims, t, direction)
    dims2, t2 = target_of(dims, t, d)
    rows = section_states(dims, t)
    cols = section_states(dims2, t2)
    col_index = {c: j for j, c in enumerate(cols)}
    lo2, hi2 = section_bounds(dims.N, dims.T, dims2.S, t2)
    data = []
    for X in rows:
        entries = {}
        for Y in neighbours(X, lo2, hi2, d.offsets):
            p = transition_prob(dims, t, d, X, Y, exact=exact)
            if p:
                entries[col_index[Y]] = p
        data.append(entries)
    return SparseMatrix(rows, cols, data)


@lru_cache(maxsize=4096)
def _cached_matrix(N, T, S, t, direction):
    return transition_matrix(BoxDims(N, T, S), t, direction)


def cached_transition_matrix(dims: BoxDims, t: int, direction) -> SparseMatrix:
    """Exact transition matrix memoised per ``(N, T, S, t, direction)``."""
    return _cached_matrix(dims.N, dims.T, dims.S, t, as_direction(direction).value)


def rho_vector(dims: BoxDims, t: int, exact: bool = True) -> dict:
    return {Y: rho(dims, t, Y, exact=exact) for Y in section_states(dims, t)}


COMMUTATION_PAIRS = (
    # (first, second) on the left equals (second, first) on the right
    (Direction.T_PLUS, Direction.S_MINUS),
    (Direction.T_MINUS, Direction.S_MINUS),
    (Direction.T_PLUS, Direction.S_PLUS),
    (Direction.T_MINUS, Direction.S_PLUS),
)


def commutation_sides(dims: BoxDims, t: int, tdir, sdir) -> tuple[SparseMatrix, SparseMatrix]:
    """Both products ``P_t P_S`` and ``P_S P_t`` between the same two sections."""
    a = cached_transition_matrix(dims, t, tdir)
    dims_a, t_a = target_of(dims, t, tdir)
    left = a @ cached_transition_matrix(dims_a, t_a, sdir)
    b = cached_transition_matrix(dims, t, sdir)
    dims_b, t_b = target_of(dims, t, sdir)
    right = b @ cached_transition_matrix(dims_b, t_b, tdir)
    return left, right


def commutation_meaningful(dims: BoxDims, t: int, tdir, sdir) -> bool:
    try:
        check_direction(dims, t, tdir)
        check_direction(dims, t, sdir)
        dims_a, t_a = target_of(dims, t, tdir)
        check_direction(dims_a, t_a, sdir)
        dims_b, t_b = target_of(dims, t, sdir)
        check_direction(dims_b, t_b, tdir)
    except DomainError:
        return False
    return True


def u_product(dims: BoxDims, t: int, first, second) -> tuple[range, range, np.ndarray]:
    rows, mid, A = u_matrix(dims, t, first)
    dims2, t2 = target_of(dims, t, first)
    mid2, cols, B = u_matrix(dims2, t2, second)
    if mid != mid2:
        raise DomainError("intermediate domains differ")
    return rows, cols, A.dot(B)


# -- serialisation -----------------------------------------------------------


def fraction_to_str(v) -> str:
    v = Fraction(v)
    return f"{v.numerator}/{v.denominator}"


def fraction_from_str(s: str) -> Fraction:
    return Fraction(s)


def matrix_to_json(M: SparseMatrix) -> str:
    """Golden-file form: exact entries as ``"num/den"`` strings."""
    payload = {
        "rows": [list(r) for r in M.rows],
        "cols": [list(c) for c in M.cols],
        "entries": [
            [[j, fraction_to_str(v)] for j, v in sorted(row.items())] for row in M.data
        ],
    }
    return json.dumps(payload, separators=(",", ":"))


def matrix_from_json(text: str) -> SparseMatrix:
    payload = json.loads(text)
    rows = [tuple(r) for r in payload["rows"]]
    cols = [tuple(c) for c in payload["cols"]]
    data = [{j: Fraction(v) for j, v in row} for row in payload["entries"]]
    return SparseMatrix(rows, cols, data)
