import itertools
import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given

from conftest import small_dims
from hexshuffle.core import (
    FLAT,
    HORIZONTAL,
    RISING,
    BoxDims,
    PathFamily,
    check,
    enumerate_families,
    hexagon_vertices,
    highest_family,
    in_section,
    lowest_family,
    marginal_table,
    neighbours,
    omega_size,
    section_domain,
    section_size,
    section_states,
    to_lozenges,
    validate,
)
from hexshuffle.errors import CapacityError, DomainError


def brute_force_count(dims):
    """Independent count: paths as 0/1 step sequences, checked pairwise."""
    N, T, S = dims.N, dims.T, dims.S
    paths = [steps for steps in itertools.product((0, 1), repeat=T) if sum(steps) == S]

    def heights(i, steps):
        h = [i]
        for s in steps:
            h.append(h[-1] + s)
        return h

    count = 0

    def extend(chosen):
        nonlocal count
        i = len(chosen)
        if i == N:
            count += 1
            return
        for p in paths:
            h = heights(i, p)
            if chosen and any(a >= b for a, b in zip(chosen[-1], h)):
                continue
            extend(chosen + [h])

    extend([])
    return count


class TestDims:
    def test_sides_round_trip(self):
        d = BoxDims.from_sides(4, 5, 5)
        assert (d.N, d.T, d.S) == (5, 9, 5)
        assert (d.a, d.b, d.c) == (4, 5, 5)

    @pytest.mark.parametrize("N,T,S", [(0, 3, 1), (2, 4, 5), (2, 4, -1), (1.5, 3, 1), (True, 3, 1)])
    def test_invalid(self, N, T, S):
        with pytest.raises(DomainError):
            BoxDims(N, T, S)

    def test_empty_space_message(self):
        with pytest.raises(DomainError, match="0 <= S <= T"):
            BoxDims(2, 4, 5)


class TestSections:
    @given(small_dims(max_N=5, max_T=8))
    def test_size_formula(self, dims):
        for t in range(dims.T + 1):
            assert section_size(dims, t) == dims.N + min(t, dims.S, dims.T - t, dims.T - dims.S)

    def test_endpoints(self):
        d = BoxDims(3, 6, 2)
        assert list(section_domain(d, 0)) == [0, 1, 2]
        assert list(section_domain(d, 6)) == [2, 3, 4]

    def test_states_are_combinations(self):
        d = BoxDims(2, 4, 2)
        states = list(section_states(d, 2))
        assert states == sorted(states)
        assert len(states) == 6  # C(4, 2)
        assert all(in_section(d, 2, s) for s in states)

    def test_neighbours(self):
        assert list(neighbours((0, 2), 0, 3)) == [(0, 2), (0, 3), (1, 2), (1, 3)]
        assert list(neighbours((0, 1), 0, 2)) == [(0, 1), (0, 2), (1, 2)]


class TestEnumeration:
    @pytest.mark.parametrize("dims,count", [((1, 2, 1), 2), ((2, 4, 2), 20), ((3, 6, 3), 980), ((2, 5, 1), 15)])
    def test_known_counts(self, dims, count):
        d = BoxDims(*dims)
        assert omega_size(d) == count
        assert len(enumerate_families(d)) == count

    @given(small_dims(max_N=3, max_T=5))
    def test_enumeration_matches_brute_force(self, dims):
        fams = enumerate_families(dims)
        assert len(fams) == omega_size(dims) == brute_force_count(dims)
        assert len({f.key() for f in fams}) == len(fams)
        assert all(validate(f) is None for f in fams)

    @given(small_dims(max_N=4, max_T=8))
    def test_reflection_symmetry(self, dims):
        assert omega_size(dims) == omega_size(dims.with_S(dims.T - dims.S))

    def test_singleton_at_zero(self):
        d = BoxDims(3, 5, 0)
        (only,) = enumerate_families(d)
        assert only == lowest_family(d) == highest_family(d)

    def test_cap(self):
        with pytest.raises(CapacityError) as info:
            enumerate_families(BoxDims(4, 8, 4), cap=100)
        assert info.value.estimate == omega_size(BoxDims(4, 8, 4))

    def test_marginals_sum_to_one(self):
        fams = enumerate_families(BoxDims(2, 4, 2))
        for t in range(5):
            table = marginal_table(fams, t)
            assert sum(table.values()) == 1
        assert marginal_table(fams, 0) == {(0, 1): Fraction(1)}


class TestFamilies:
    def test_extreme_families_valid(self):
        d = BoxDims(4, 9, 3)
        assert validate(lowest_family(d)) is None
        assert validate(highest_family(d)) is None
        assert lowest_family(d) != highest_family(d)

    @pytest.mark.parametrize(
        "X,constraint",
        [
            ([[1, 2], [1, 2], [2, 3]], "wrong left endpoint"),
            ([[0, 1], [0, 1], [1, 2]], "wrong right endpoint"),
            ([[0, 1], [1, 1], [2, 3]], "not strictly increasing"),
            ([[0, 1], [0, 3], [2, 3]], "step not in {0,1}"),
        ],
    )
    def test_violations(self, X, constraint):
        v = validate(PathFamily(BoxDims(2, 2, 2), X))
        assert v is not None and v.constraint == constraint

    def test_step_violation(self):
        X = [[0, 1], [0, 1], [0, 1], [2, 3]]
        v = validate(PathFamily(BoxDims(2, 3, 2), X))
        assert v.constraint in ("step not in {0,1}", "outside section")
        with pytest.raises(DomainError):
            check(PathFamily(BoxDims(2, 3, 2), X))

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            PathFamily(BoxDims(2, 3, 1), [[0, 1], [0, 1]])

    def test_read_only(self):
        pf = lowest_family(BoxDims(2, 3, 1))
        with pytest.raises(ValueError):
            pf.X[0, 0] = 5

    def test_json_round_trip(self):
        pf = highest_family(BoxDims(3, 5, 2))
        doc = json.loads(pf.to_json())
        assert set(doc) == {"N", "T", "S", "X"}
        assert PathFamily.from_json(pf.to_json()) == pf
        assert PathFamily.from_key(pf.dims, pf.key()) == pf

    def test_from_dict_missing_key(self):
        with pytest.raises(DomainError):
            PathFamily.from_dict({"N": 1, "T": 1})


class TestLozenges:
    @given(small_dims(max_N=4, max_T=5))
    def test_counts_and_injectivity(self, dims):
        fams = enumerate_families(dims)
        keys = set()
        for pf in fams[:200]:
            til = to_lozenges(pf)
            c = til.counts()
            assert (c["horizontal"], c["rising"], c["flat"]) == (
                dims.a * dims.b,
                dims.b * dims.c,
                dims.c * dims.a,
            )
            keys.add(til.key())
        assert len(keys) == min(len(fams), 200)

    def test_singleton_has_no_rising(self):
        til = to_lozenges(lowest_family(BoxDims(3, 4, 0)))
        assert til.counts()["rising"] == 0
        assert til.counts()["horizontal"] == 0

    def test_area_matches_hexagon(self):
        # shoelace area of the hexagon equals the number of lozenges times the lozenge area
        for dims in (BoxDims(5, 9, 5), BoxDims(2, 7, 3)):
            v = hexagon_vertices(dims)
            area = 0.5 * abs(sum(x0 * y1 - x1 * y0 for (x0, y0), (x1, y1) in zip(v, v[1:] + v[:1])))
            n = dims.a * dims.b + dims.b * dims.c + dims.c * dims.a
            assert area == pytest.approx(n * np.sqrt(3) / 2)

    def test_kind_codes(self):
        assert (HORIZONTAL, RISING, FLAT) == (0, 1, 2)
