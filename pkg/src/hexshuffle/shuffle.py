"""The shuffling steps ``S -> S +/- 1`` and the chains built from them.

Random numbers come from a splitmix64 counter stream so that a seed fixes a
trajectory bit-for-bit on every platform.  Stream order contract: each step
visits sections ``t = 0, ..., T-1`` in increasing order; inside one section
update the blocks are visited in increasing position ``k`` and each block
consumes exactly one uniform double ``(u64 >> 11) * 2**-53``, which is turned
into a split point by inverse CDF over the weights in increasing ``j``.

Hot loops are compiled with numba; the state is updated in place, one
section at a time, with an ``O(N)`` scratch buffer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np
from numba import njit

from .core import BoxDims, PathFamily, check, enumerate_families
from .errors import DomainError, InconsistentStateError
from .matrices import Direction, cached_transition_matrix

UP, DOWN = "up", "down"

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_RESCALE_AT = 1e250


# -- random source -----------------------------------------------------------


@njit(cache=True, inline="always")
def _next_u64(state):
    s = state[0] + _GOLDEN
    state[0] = s
    z = (s ^ (s >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _next_uniform(state):
    return float(_next_u64(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


def splitmix64(value: int) -> int:
    """One splitmix64 output for the counter ``value`` (pure Python)."""
    s = (value + 0x9E3779B97F4A7C15) & _MASK64
    z = ((s ^ (s >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class RandomSource:
    """64-bit seeded splitmix64 stream; ``spawn`` gives independent children."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self.state = np.array([self.seed], dtype=np.uint64)

    def uniform(self) -> float:
        return _next_uniform(self.state)

    def spawn(self, key: int) -> "RandomSource":
        return RandomSource(splitmix64(splitmix64(self.seed) ^ (int(key) & _MASK64)))

    def __repr__(self):
        return f"RandomSource(seed={self.seed})"


def as_source(rng) -> RandomSource:
    if isinstance(rng, RandomSource):
        return rng
    if rng is None:
        raise DomainError("a RandomSource or integer seed is required")
    return RandomSource(int(rng))


# -- the split distribution ------------------------------------------------------


@njit(cache=True, inline="always")
def _sample_split(a, b, n, state, w):
    u = _next_uniform(state)
    if n == 0 or a == 0:
        return 0
    if b < 0 or a < 0:
        raise ValueError("split distribution needs a, b >= 0")
    if n == 1:
        # same floating-point operations as the general loop, without the buffer
        if b == 0:
            return 1
        return 0 if u * (1.0 + a / b) < 1.0 else 1
    # w_j / w_{j-1} = (a + j - 1) / (b + j - 1); w_0 vanishes when b == 0
    start = 1 if b == 0 else 0
    w[start] = 1.0
    total = 1.0
    for j in range(start + 1, n + 1):
        w[j] = w[j - 1] * (a + j - 1) / (b + j - 1)
        if w[j] > _RESCALE_AT:
            for m in range(start, j + 1):
                w[m] /= _RESCALE_AT
            total /= _RESCALE_AT
        total += w[j]
    target = u * total
    acc = 0.0
    for j in range(start, n + 1):
        acc += w[j]
        if target < acc:
            return j
    return n


def split_weights(a: int, b: int, n: int) -> list[int]:
    """Unnormalised integer weights ``(a)_j (b+j)_{n-j}``, ``j = 0..n``."""
    out = []
    for j in range(n + 1):
        w = 1
        for i in range(j):
            w *= a + i
        for i in range(j, n):
            w *= b + i
        out.append(w)
    return out


def split_probabilities(a: int, b: int, n: int) -> list[Fraction]:
    if a < 0 or b < 0 or n < 0:
        raise DomainError("split distribution needs a, b, n >= 0")
    w = split_weights(a, b, n)
    total = sum(w)
    if total == 0:
        raise DomainError(f"split distribution D({a},{b},{n}) has no mass")
    return [Fraction(v, total) for v in w]


def sample_split(a: int, b: int, n: int, rng) -> int:
    """Draw ``k`` with probability proportional to ``(a)_k / (b)_k`` on ``0..n``."""
    if a < 0 or b < 0 or n < 0:
        raise DomainError("split distribution needs a, b, n >= 0")
    if n > 0 and a == 0 and b == 0:
        raise DomainError(f"split distribution D(0,0,{n}) has no mass")
    src = as_source(rng)
    buf = np.empty(n + 1)
    return int(_sample_split(a, b, n, src.state, buf))


# -- step kernels --------------------------------------------------------------


@njit(cache=True)
def _check_row(z, lo, hi):
    prev = lo - 1
    for i in range(z.shape[0]):
        if z[i] <= prev or z[i] > hi:
            return False
        prev = z[i]
    return True


@njit(cache=True)
def _step_up_inplace(X, S, state, w, z, check):
    T = X.shape[0] - 1
    N = X.shape[1]
    for t in range(T):
        i = 0
        while i < N:
            x = X[t + 1, i]
            y = X[t, i]
            d = x - y
            if d == 1:
                z[i] = x
                i += 1
            elif d == -1:
                z[i] = y
                i += 1
            elif d == 0:
                j = i
                while j + 1 < N and X[t + 1, j + 1] == X[t, j + 1] and X[t + 1, j + 1] == X[t + 1, j] + 1:
                    j += 1
                l = j - i + 1
                xi = _sample_split(x + T - t - S - 1, x + 1, l, state, w)
                for m in range(l):
                    z[i + m] = X[t + 1, i + m] if m < xi else X[t + 1, i + m] + 1
                i = j + 1
            else:
                raise ValueError("inconsistent sections in S+1 step")
        if check:
            lo = max(0, t + 1 + S + 1 - T)
            hi = min(t + N, S + N)
            if not _check_row(z, lo, hi):
                raise ValueError("S+1 step left the target section")
        for i in range(N):
            X[t + 1, i] = z[i]


@njit(cache=True)
def _step_down_inplace(X, S, state, w, z, check):
    T = X.shape[0] - 1
    N = X.shape[1]
    for t in range(T):
        i = 0
        while i < N:
            x = X[t + 1, i]
            y = X[t, i]
            d = x - y
            if d == 0:
                z[i] = x
                i += 1
            elif d == 2:
                z[i] = y + 1
                i += 1
            elif d == 1:
                j = i
                while j + 1 < N and X[t + 1, j + 1] == X[t, j + 1] + 1 and X[t + 1, j + 1] == X[t + 1, j] + 1:
                    j += 1
                l = j - i + 1
                top = x + l - 1
                # number of points shifted up, counted from the top of the block
                up = _sample_split(N + S - 1 - top, N + t + 1 - top, l, state, w)
                for m in range(l):
                    z[i + m] = X[t, i + m] if m < l - up else X[t, i + m] + 1
                i = j + 1
            else:
                raise ValueError("inconsistent sections in S-1 step")
        if check:
            lo = max(0, t + 1 + S - 1 - T)
            hi = min(t + N, S + N - 2)
            if not _check_row(z, lo, hi):
                raise ValueError("S-1 step left the target section")
        for i in range(N):
            X[t + 1, i] = z[i]


@njit(cache=True)
def _fill_lowest(X):
    for t in range(X.shape[0]):
        for i in range(X.shape[1]):
            X[t, i] = i


@njit(cache=True)
def _sample_uniform_inplace(X, S, state, w, z, check):
    _fill_lowest(X)
    for s in range(S):
        _step_up_inplace(X, s, state, w, z, check)


@njit(cache=True)
def _sample_uniform_batch(N, T, S, count, state):
    out = np.empty((count, T + 1, N), dtype=np.int32)
    X = np.empty((T + 1, N), dtype=np.int64)
    w = np.empty(N + 1)
    z = np.empty(N, dtype=np.int64)
    for c in range(count):
        _sample_uniform_inplace(X, S, state, w, z, False)
        for t in range(T + 1):
            for i in range(N):
                out[c, t, i] = X[t, i]
    return out


@njit(cache=True)
def _run_plan_batch(N, T, S0, eps, count, state):
    R = eps.shape[0]
    out = np.empty((count, R + 1, T + 1, N), dtype=np.int32)
    X = np.empty((T + 1, N), dtype=np.int64)
    w = np.empty(N + 1)
    z = np.empty(N, dtype=np.int64)
    for c in range(count):
        _sample_uniform_inplace(X, S0, state, w, z, False)
        S = S0
        for r in range(R + 1):
            if r > 0:
                if eps[r - 1] == 1:
                    _step_up_inplace(X, S, state, w, z, False)
                    S += 1
                else:
                    _step_down_inplace(X, S, state, w, z, False)
                    S -= 1
            for t in range(T + 1):
                for i in range(N):
                    out[c, r, t, i] = X[t, i]
    return out


def _buffers(N):
    return np.empty(N + 1), np.empty(N, dtype=np.int64)


def _run_kernel(kernel, X, S, src, check):
    w, z = _buffers(X.shape[1])
    try:
        kernel(X, S, src.state, w, z, check)
    except ValueError as exc:
        raise InconsistentStateError(str(exc)) from None


def step_up(pf: PathFamily, rng, check_sections: bool = False) -> PathFamily:
    """One ``S -> S+1`` shuffling step; returns a new family."""
    check(pf)
    dims = pf.dims
    if dims.S >= dims.T:
        raise DomainError("S+1 step needs S < T")
    X = np.array(pf.X, dtype=np.int64)
    _run_kernel(_step_up_inplace, X, dims.S, as_source(rng), check_sections)
    return PathFamily(dims.with_S(dims.S + 1), X)


def step_down(pf: PathFamily, rng, check_sections: bool = False) -> PathFamily:
    """One ``S -> S-1`` shuffling step; returns a new family."""
    check(pf)
    dims = pf.dims
    if dims.S <= 0:
        raise DomainError("S-1 step needs S > 0")
    X = np.array(pf.X, dtype=np.int64)
    _run_kernel(_step_down_inplace, X, dims.S, as_source(rng), check_sections)
    return PathFamily(dims.with_S(dims.S - 1), X)


def sample_uniform(dims: BoxDims, rng, check_sections: bool = False) -> PathFamily:
    """Perfect sample of a uniformly random tiling: ``S`` up-steps from ``S = 0``."""
    src = as_source(rng)
    X = np.empty((dims.T + 1, dims.N), dtype=np.int64)
    w, z = _buffers(dims.N)
    try:
        _sample_uniform_inplace(X, dims.S, src.state, w, z, check_sections)
    except ValueError as exc:
        raise InconsistentStateError(str(exc)) from None
    return PathFamily(dims, X)


def sample_uniform_batch(dims: BoxDims, count: int, rng) -> np.ndarray:
    """``count`` independent samples as a ``(count, T+1, N)`` int32 array."""
    src = as_source(rng)
    return _sample_uniform_batch(dims.N, dims.T, dims.S, int(count), src.state)


# -- chains -----------------------------------------------------------------------


@dataclass(frozen=True)
class MarkovPlan:
    """Initial box ``dims`` (with ``S = S0``) and a finite sequence of +/-1 moves."""

    dims: BoxDims
    eps: tuple[int, ...] = ()
    sweep: str = "forward"

    def __post_init__(self):
        object.__setattr__(self, "eps", tuple(int(e) for e in self.eps))
        if self.sweep != "forward":
            raise DomainError("only the forward (t = 0 -> T) sweep is implemented")
        S = self.dims.S
        for r, e in enumerate(self.eps, start=1):
            if e not in (1, -1):
                raise DomainError(f"eps[{r}] = {e} is not +1 or -1")
            S += e
            if not 0 <= S <= self.dims.T:
                raise DomainError(f"plan leaves 0 <= S <= T at r={r} (S={S})")

    @property
    def S0(self) -> int:
        return self.dims.S

    @property
    def length(self) -> int:
        return len(self.eps)

    def S_at(self, r: int) -> int:
        if not 0 <= r <= len(self.eps):
            raise DomainError(f"r={r} outside the plan (length {len(self.eps)})")
        return self.dims.S + sum(self.eps[:r])

    def dims_at(self, r: int) -> BoxDims:
        return self.dims.with_S(self.S_at(r))

    @classmethod
    def grow(cls, N: int, T: int, S: int) -> "MarkovPlan":
        return cls(BoxDims(N, T, 0), (1,) * S)

    @classmethod
    def alternate(cls, dims: BoxDims, steps: int) -> "MarkovPlan":
        first = 1 if dims.S < dims.T else -1
        return cls(dims, tuple(first if r % 2 == 0 else -first for r in range(steps)))

    def to_dict(self) -> dict:
        return {"N": self.dims.N, "T": self.dims.T, "S0": self.dims.S, "eps": list(self.eps)}

    @classmethod
    def from_dict(cls, data: dict) -> "MarkovPlan":
        return cls(BoxDims(data["N"], data["T"], data["S0"]), tuple(data.get("eps", ())))


Observer = Callable[[int, PathFamily], None]


@dataclass
class ChainResult:
    final: PathFamily
    S_path: list[int] = field(default_factory=list)


def iter_chain(plan: MarkovPlan, rng, initial: PathFamily | None = None, check_sections: bool = False):
    """Yield ``(r, state)`` for ``r = 0..len(eps)``.

    The initial state is a perfect sample from the uniform measure unless
    ``initial`` is given.  The working buffer is reused between steps; each
    yielded family is an independent read-only copy.
    """
    src = as_source(rng)
    if initial is None:
        state = sample_uniform(plan.dims, src, check_sections)
    else:
        if initial.dims != plan.dims:
            raise DomainError(f"initial state lives in {initial.dims}, plan starts at {plan.dims}")
        state = check(initial)
    X = np.array(state.X, dtype=np.int64)
    w, z = _buffers(plan.dims.N)
    S = plan.dims.S
    yield 0, state
    for r, e in enumerate(plan.eps, start=1):
        kernel = _step_up_inplace if e == 1 else _step_down_inplace
        try:
            kernel(X, S, src.state, w, z, check_sections)
        except ValueError as exc:
            raise InconsistentStateError(str(exc)) from None
        S += e
        yield r, PathFamily(plan.dims.with_S(S), X)


def run_chain(
    plan: MarkovPlan,
    rng,
    observers: Iterable[Observer] = (),
    initial: PathFamily | None = None,
    check_sections: bool = False,
) -> ChainResult:
    observers = list(observers)
    S_path = []
    state = None
    for r, state in iter_chain(plan, rng, initial, check_sections):
        S_path.append(state.dims.S)
        for obs in observers:
            obs(r, state)
    return ChainResult(state, S_path)


def run_plan_batch(plan: MarkovPlan, count: int, rng) -> np.ndarray:
    """Independent trajectories as a ``(count, R+1, T+1, N)`` int32 array."""
    src = as_source(rng)
    eps = np.array(plan.eps, dtype=np.int64)
    return _run_plan_batch(plan.dims.N, plan.dims.T, plan.dims.S, eps, int(count), src.state)


def trajectory_record(r: int, pf: PathFamily) -> dict:
    return {"r": r, "S": pf.dims.S, "X": pf.X.tolist()}


# -- exact transition laws -----------------------------------------------------------


def _middle_prob(first, second, y_prev, x_next):
    """Conditional law of the middle point of ``first`` then ``second``.

    ``first`` maps ``Y(t)`` forward in ``t`` and ``second`` maps the result
    onto ``X(t+1)``.  Returns ``{Z: probability}``, empty if the two-step
    weight vanishes.
    """
    weights = {}
    for j, p in first.data[first.rows.index(y_prev)].items():
        Z = first.cols[j]
        q = second.data[j].get(second.col_index[x_next], 0)
        if p and q:
            weights[Z] = p * q
    total = sum(weights.values(), Fraction(0))
    if total == 0:
        return {}
    return {Z: v / total for Z, v in weights.items()}


def _step_matrices(dims: BoxDims, direction: str, t: int):
    """``(P_{t+} on the target box, P_{S-/S+} back to the source box)``."""
    if direction == UP:
        tgt = dims.with_S(dims.S + 1)
        return cached_transition_matrix(tgt, t, Direction.T_PLUS), cached_transition_matrix(
            tgt, t + 1, Direction.S_MINUS
        )
    tgt = dims.with_S(dims.S - 1)
    return cached_transition_matrix(tgt, t, Direction.T_PLUS), cached_transition_matrix(
        tgt, t + 1, Direction.S_PLUS
    )


def _check_step_spaces(X: PathFamily, Y: PathFamily, direction: str):
    if direction not in (UP, DOWN):
        raise DomainError(f"direction must be 'up' or 'down', got {direction!r}")
    shift = 1 if direction == UP else -1
    S2 = X.dims.S + shift
    if not 0 <= S2 <= X.dims.T or Y.dims != X.dims.with_S(S2):
        raise DomainError(f"{Y.dims} is not the {direction} neighbour of {X.dims}")


def exact_step_prob(X: PathFamily, Y: PathFamily, direction: str) -> Fraction:
    """Transition probability of the step as a product of one-section ratios."""
    _check_step_spaces(X, Y, direction)
    check(X)
    check(Y)
    T = X.dims.T
    out = Fraction(1)
    for t in range(T):
        first, second = _step_matrices(X.dims, direction, t)
        law = _middle_prob(first, second, Y.section(t), X.section(t + 1))
        p = law.get(Y.section(t + 1), 0)
        if not p:
            return Fraction(0)
        out *= p
    return out


def _update_law(N, T, S, t, y, x, direction):
    """Exact law of one section update of the block algorithm."""
    blocks = []
    fixed = {}
    i = 0
    if direction == UP:
        while i < N:
            d = x[i] - y[i]
            if d == 1:
                fixed[i] = x[i]
                i += 1
            elif d == -1:
                fixed[i] = y[i]
                i += 1
            elif d == 0:
                j = i
                while j + 1 < N and x[j + 1] == y[j + 1] and x[j + 1] == x[j] + 1:
                    j += 1
                k = x[i]
                blocks.append((i, j - i + 1, split_probabilities(k + T - t - S - 1, k + 1, j - i + 1), 0))
                i = j + 1
            else:
                raise InconsistentStateError(f"x - y = {d} in an S+1 update")
    else:
        while i < N:
            d = x[i] - y[i]
            if d == 0:
                fixed[i] = x[i]
                i += 1
            elif d == 2:
                fixed[i] = y[i] + 1
                i += 1
            elif d == 1:
                j = i
                while j + 1 < N and x[j + 1] == y[j + 1] + 1 and x[j + 1] == x[j] + 1:
                    j += 1
                l = j - i + 1
                top = x[i] + l - 1
                up = split_probabilities(N + S - 1 - top, N + t + 1 - top, l)
                blocks.append((i, l, up[::-1], -1))
                i = j + 1
            else:
                raise InconsistentStateError(f"x - y = {d} in an S-1 update")
    outcomes = [({**fixed}, Fraction(1))]
    for start, length, probs, base in blocks:
        nxt = []
        for assigned, p in outcomes:
            for xi, q in enumerate(probs):
                if q == 0:
                    continue
                a = dict(assigned)
                for m in range(length):
                    a[start + m] = x[start + m] + base + (0 if m < xi else 1)
                nxt.append((a, p * q))
        outcomes = nxt
    law = {}
    for assigned, p in outcomes:
        z = tuple(assigned[i] for i in range(N))
        law[z] = law.get(z, 0) + p
    return law


def algorithm_step_law(X: PathFamily, direction: str) -> dict[bytes, Fraction]:
    """Exact output law of the block algorithm, keyed by ``PathFamily.key()``.

    Enumerates every combination of block splits, so only for small boxes.
    """
    check(X)
    N, T, S = X.dims.N, X.dims.T, X.dims.S
    shift = 1 if direction == UP else -1
    tgt = X.dims.with_S(S + shift)
    out: dict[bytes, Fraction] = {}

    def walk(t, rows, p):
        if t == T:
            out[PathFamily(tgt, rows).key()] = out.get(PathFamily(tgt, rows).key(), 0) + p
            return
        for z, q in _update_law(N, T, S, t, rows[-1], X.section(t + 1), direction).items():
            walk(t + 1, rows + [z], p * q)

    walk(0, [tuple(range(N))], Fraction(1))
    return out


def step_matrix(dims: BoxDims, direction: str):
    """Exact step matrix over enumerated spaces: ``(rows, cols, {(i, j): p})``."""
    shift = 1 if direction == UP else -1
    rows = enumerate_families(dims)
    cols = enumerate_families(dims.with_S(dims.S + shift))
    entries = {}
    for i, X in enumerate(rows):
        for j, Y in enumerate(cols):
            p = exact_step_prob(X, Y, direction)
            if p:
                entries[i, j] = p
    return rows, cols, entries
