"""Lattice geometry of boxed plane partitions.

A tiling of the hexagon with sides ``a, b, c, a, b, c`` is encoded as a
family of ``N = c`` non-intersecting lattice paths.  Path ``i`` (0-based)
starts at ``(0, i)`` and ends at ``(T, S + i)``, each step is either flat
``(1, 0)`` or rising ``(1, 1)``, and ``a = T - S``, ``b = S``.  The state is
stored as a dense ``(T + 1) x N`` integer matrix whose row ``t`` is the
section ``X(t)``: the strictly increasing positions of the paths at
horizontal coordinate ``t``.

Lozenge naming convention used throughout the package:

* ``HORIZONTAL`` -- a site of a section that no path crosses.  The lozenge
  has its short (vertical) diagonal on the section line.
* ``RISING`` -- the lozenge crossed by a rising path step.
* ``FLAT`` -- the lozenge crossed by a flat path step.

For every tiling the counts are ``(ab, bc, ca)`` for
``(HORIZONTAL, RISING, FLAT)``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .errors import CapacityError, DomainError

HORIZONTAL, RISING, FLAT = 0, 1, 2
LOZENGE_NAMES = ("horizontal", "rising", "flat")

DEFAULT_ENUMERATION_CAP = 10**6


@dataclass(frozen=True)
class BoxDims:
    """Box parameters ``(N, T, S)``; hexagon sides are ``a=T-S, b=S, c=N``."""

    N: int
    T: int
    S: int

    def __post_init__(self):
        for name in ("N", "T", "S"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise DomainError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.N < 1:
            raise DomainError(f"N must be >= 1, got {self.N}")
        if self.T < 0:
            raise DomainError(f"T must be >= 0, got {self.T}")
        if not 0 <= self.S <= self.T:
            raise DomainError(f"S must satisfy 0 <= S <= T, got S={self.S}, T={self.T}")

    @property
    def a(self) -> int:
        return self.T - self.S

    @property
    def b(self) -> int:
        return self.S

    @property
    def c(self) -> int:
        return self.N

    def with_S(self, S: int) -> "BoxDims":
        return BoxDims(self.N, self.T, S)

    @classmethod
    def from_sides(cls, a: int, b: int, c: int) -> "BoxDims":
        return cls(N=c, T=a + b, S=b)


@dataclass(frozen=True)
class SectionDomain:
    """Integer interval ``[lo, hi]`` of admissible positions in one section."""

    lo: int
    hi: int

    def __len__(self) -> int:
        return self.hi - self.lo + 1

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi

    def __iter__(self):
        return iter(range(self.lo, self.hi + 1))


def section_bounds(N: int, T: int, S: int, t: int) -> tuple[int, int]:
    """Unchecked ``(lo, hi)`` of the section at ``t``; hot-path helper."""
    return max(0, t + S - T), min(t + N - 1, S + N - 1)


def section_domain(dims: BoxDims, t: int) -> SectionDomain:
    if not 0 <= t <= dims.T:
        raise DomainError(f"t must satisfy 0 <= t <= T={dims.T}, got {t}")
    return SectionDomain(*section_bounds(dims.N, dims.T, dims.S, t))


def section_size(dims: BoxDims, t: int) -> int:
    return len(section_domain(dims, t))


def section_states(dims: BoxDims, t: int) -> list[tuple[int, ...]]:
    """All strictly increasing N-tuples in the section, lexicographic."""
    dom = section_domain(dims, t)
    return list(itertools.combinations(range(dom.lo, dom.hi + 1), dims.N))


def in_section(dims: BoxDims, t: int, xs: Sequence[int]) -> bool:
    if len(xs) != dims.N:
        return False
    lo, hi = section_bounds(dims.N, dims.T, dims.S, t)
    prev = lo - 1
    for x in xs:
        if x <= prev or x > hi:
            return False
        prev = x
    return True


def neighbours(xs: Sequence[int], lo: int, hi: int, offsets=(0, 1)) -> Iterator[tuple[int, ...]]:
    """Strictly increasing tuples ``y`` in ``[lo, hi]`` with ``y_i - x_i`` in offsets.

    Tuples come out in lexicographic order when ``offsets`` is increasing.
    """
    for delta in itertools.product(offsets, repeat=len(xs)):
        ys = tuple(x + d for x, d in zip(xs, delta))
        if ys[0] < lo or ys[-1] > hi:
            continue
        if all(ys[i] < ys[i + 1] for i in range(len(ys) - 1)):
            yield ys


class PathFamily:
    """A family of N paths, stored as a read-only ``(T+1, N)`` int64 matrix.

    Construction only checks the shape; use :func:`validate` for the path
    constraints.
    """

    __slots__ = ("dims", "X")

    def __init__(self, dims: BoxDims, X):
        arr = np.array(X, dtype=np.int64)
        if arr.ndim != 2 or arr.shape != (dims.T + 1, dims.N):
            raise DomainError(
                f"section matrix must have shape {(dims.T + 1, dims.N)}, got {arr.shape}"
            )
        arr.setflags(write=False)
        self.dims = dims
        self.X = arr

    def section(self, t: int) -> tuple[int, ...]:
        return tuple(int(v) for v in self.X[t])

    def key(self) -> bytes:
        return self.X.tobytes()

    def __eq__(self, other):
        if not isinstance(other, PathFamily):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.X, other.X)

    def __hash__(self):
        return hash((self.dims, self.key()))

    def __repr__(self):
        d = self.dims
        return f"PathFamily(N={d.N}, T={d.T}, S={d.S}, X={self.X.tolist()})"

    def to_dict(self) -> dict:
        d = self.dims
        return {"N": d.N, "T": d.T, "S": d.S, "X": self.X.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "PathFamily":
        try:
            dims = BoxDims(data["N"], data["T"], data["S"])
            X = data["X"]
        except KeyError as exc:
            raise DomainError(f"path family JSON lacks field {exc.args[0]!r}") from None
        return cls(dims, X)

    @classmethod
    def from_json(cls, text: str) -> "PathFamily":
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_key(cls, dims: BoxDims, key: bytes) -> "PathFamily":
        return cls(dims, np.frombuffer(key, dtype=np.int64).reshape(dims.T + 1, dims.N))


def lowest_family(dims: BoxDims) -> PathFamily:
    """Paths that stay flat as long as possible, then rise.

    For ``S = 0`` this is the unique element of the space.
    """
    N, T, S = dims.N, dims.T, dims.S
    t = np.arange(T + 1)[:, None]
    X = np.arange(N)[None, :] + np.maximum(0, t - (T - S))
    return PathFamily(dims, X)


def highest_family(dims: BoxDims) -> PathFamily:
    """Paths that rise first, then stay flat (the "filled box")."""
    N, S = dims.N, dims.S
    t = np.arange(dims.T + 1)[:, None]
    X = np.arange(N)[None, :] + np.minimum(t, S)
    return PathFamily(dims, X)


@dataclass(frozen=True)
class Violation:
    constraint: str
    t: int | None = None
    i: int | None = None

    def __str__(self):
        where = []
        if self.t is not None:
            where.append(f"t={self.t}")
        if self.i is not None:
            where.append(f"i={self.i}")
        return self.constraint + (f" at {', '.join(where)}" if where else "")


def validate(pf: PathFamily) -> Violation | None:
    """Return ``None`` if ``pf`` lies in Omega(N,T,S), else the first violation.

    Constraints are checked in this order: left endpoints, right endpoints,
    then for increasing ``t`` strict monotonicity, section bounds and the
    step set ``{0, 1}`` towards ``t + 1``.
    """
    N, T, S = pf.dims.N, pf.dims.T, pf.dims.S
    X = pf.X
    for i in range(N):
        if X[0, i] != i:
            return Violation("wrong left endpoint", 0, i)
    for i in range(N):
        if X[T, i] != S + i:
            return Violation("wrong right endpoint", T, i)
    for t in range(T + 1):
        lo, hi = section_bounds(N, T, S, t)
        row = X[t]
        for i in range(N - 1):
            if row[i] >= row[i + 1]:
                return Violation("not strictly increasing", t, i)
        for i in range(N):
            if not lo <= row[i] <= hi:
                return Violation("outside section", t, i)
        if t < T:
            step = X[t + 1] - row
            for i in range(N):
                if step[i] not in (0, 1):
                    return Violation("step not in {0,1}", t, i)
    return None


def is_valid(pf: PathFamily) -> bool:
    return validate(pf) is None


def check(pf: PathFamily) -> PathFamily:
    v = validate(pf)
    if v is not None:
        raise DomainError(f"invalid path family: {v}")
    return pf


@dataclass(frozen=True)
class LozengeTiling:
    """Lozenges as parallel arrays ``kind``, ``t``, ``x``.

    ``HORIZONTAL`` at ``(t, x)`` is the unoccupied site ``x`` of section
    ``t``; ``RISING``/``FLAT`` at ``(t, x)`` is the step of the path that
    sits at ``x`` in section ``t``.
    """

    dims: BoxDims
    kind: np.ndarray
    t: np.ndarray
    x: np.ndarray

    def __len__(self):
        return len(self.kind)

    def counts(self) -> dict[str, int]:
        c = np.bincount(self.kind, minlength=3)
        return {name: int(c[k]) for k, name in enumerate(LOZENGE_NAMES)}

    def key(self) -> tuple:
        order = np.lexsort((self.x, self.t, self.kind))
        return tuple(zip(self.kind[order].tolist(), self.t[order].tolist(), self.x[order].tolist()))


def to_lozenges(pf: PathFamily) -> LozengeTiling:
    check(pf)
    N, T, S = pf.dims.N, pf.dims.T, pf.dims.S
    X = pf.X
    kinds, ts, xs = [], [], []
    for t in range(T + 1):
        lo, hi = section_bounds(N, T, S, t)
        occupied = np.zeros(hi - lo + 1, dtype=bool)
        occupied[X[t] - lo] = True
        holes = np.nonzero(~occupied)[0] + lo
        kinds.append(np.full(len(holes), HORIZONTAL, dtype=np.int8))
        ts.append(np.full(len(holes), t))
        xs.append(holes)
        if t < T:
            rising = X[t + 1] > X[t]
            kinds.append(np.where(rising, RISING, FLAT).astype(np.int8))
            ts.append(np.full(N, t))
            xs.append(X[t].copy())
    return LozengeTiling(
        pf.dims,
        np.concatenate(kinds),
        np.concatenate(ts).astype(np.int64),
        np.concatenate(xs).astype(np.int64),
    )


SQRT3_2 = 0.8660254037844386


def lattice_point(t, x):
    """Planar position of lattice vertex ``(t, x)`` (sections are vertical lines)."""
    return (t * SQRT3_2, x - 0.5 * t)


def lozenge_vertices(kind: int, t: int, x: int) -> list[tuple[float, float]]:
    px, py = lattice_point(t, x)
    if kind == HORIZONTAL:
        return [(px - SQRT3_2, py + 0.5), (px, py + 1.0), (px + SQRT3_2, py + 0.5), (px, py)]
    if kind == RISING:
        return [(px, py), (px, py + 1.0), (px + SQRT3_2, py + 1.5), (px + SQRT3_2, py + 0.5)]
    return [(px, py), (px, py + 1.0), (px + SQRT3_2, py + 0.5), (px + SQRT3_2, py - 0.5)]


def hexagon_vertices(dims: BoxDims) -> list[tuple[float, float]]:
    N, T, S = dims.N, dims.T, dims.S
    a = T - S
    corners = [(0, 0), (a, 0), (T, S), (T, S + N), (S, S + N), (0, N)]
    return [lattice_point(t, x) for t, x in corners]


def omega_size(dims: BoxDims) -> int:
    """Number of tilings of the a x b x c hexagon (MacMahon's box formula)."""
    a, b, c = dims.a, dims.b, dims.c
    num = den = 1
    for i in range(1, a + 1):
        for j in range(1, b + 1):
            for k in range(1, c + 1):
                num *= i + j + k - 1
                den *= i + j + k - 2
    return num // den


def enumerate_families(dims: BoxDims, cap: int = DEFAULT_ENUMERATION_CAP) -> list[PathFamily]:
    """All elements of Omega(N,T,S), lexicographic in the flattened matrix."""
    size = omega_size(dims)
    if size > cap:
        raise CapacityError(
            f"|Omega{(dims.N, dims.T, dims.S)}| = {size} exceeds the enumeration cap {cap}",
            estimate=size,
        )
    N, T, S = dims.N, dims.T, dims.S
    rows: list[tuple[int, ...]] = [tuple(range(N))]
    out: list[PathFamily] = []

    def extend(t):
        if t == T:
            out.append(PathFamily(dims, rows))
            return
        lo, hi = section_bounds(N, T, S, t + 1)
        for ys in neighbours(rows[-1], lo, hi):
            rows.append(ys)
            extend(t + 1)
            rows.pop()

    extend(0)
    return out


def marginal_table(families: Sequence[PathFamily], t: int) -> dict[tuple[int, ...], Fraction]:
    """Exact law of ``X(t)`` under the uniform measure on ``families``."""
    counts: dict[tuple[int, ...], int] = {}
    for pf in families:
        key = pf.section(t)
        counts[key] = counts.get(key, 0) + 1
    total = len(families)
    return {k: Fraction(v, total) for k, v in counts.items()}

