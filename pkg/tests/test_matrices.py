import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import small_dims
from hexshuffle.core import BoxDims, enumerate_families, marginal_table, section_states
from hexshuffle.errors import DomainError
from hexshuffle.matrices import (
    COMMUTATION_PAIRS,
    Direction,
    cached_transition_matrix,
    commutation_meaningful,
    commutation_sides,
    det_representation,
    log_normalization,
    log_rho,
    matrix_from_json,
    matrix_to_json,
    normalization,
    normalization_by_sum,
    rho,
    rho_vector,
    target_of,
    transition_matrix,
    transition_prob,
    u_matrix,
    u_product,
    u_t_plus_s_minus,
)

ALL_DIRS = list(Direction)


def valid_directions(dims, t):
    out = []
    for d in ALL_DIRS:
        try:
            target_of(dims, t, d)
        except DomainError:
            continue
        out.append(d)
    return out


class TestSectionMeasure:
    @given(small_dims(max_N=3, max_T=5))
    def test_rho_matches_enumeration(self, dims):
        fams = enumerate_families(dims)
        for t in range(dims.T + 1):
            table = marginal_table(fams, t)
            assert rho_vector(dims, t) == {Y: table.get(Y, Fraction(0)) for Y in section_states(dims, t)}

    @given(small_dims(max_N=4, max_T=7))
    def test_closed_normalization(self, dims):
        for t in range(dims.T + 1):
            assert normalization(dims, t) == normalization_by_sum(dims, t)

    def test_log_forms(self):
        d = BoxDims(4, 9, 3)
        for t in range(10):
            assert log_normalization(d, t) == pytest.approx(math.log(normalization(d, t)), rel=1e-12)
            for Y in list(section_states(d, t))[:10]:
                assert log_rho(d, t, Y) == pytest.approx(math.log(rho(d, t, Y)), rel=1e-10, abs=1e-10)
                assert rho(d, t, Y, exact=False) == pytest.approx(float(rho(d, t, Y)), rel=1e-10)

    def test_rho_rejects_foreign_state(self):
        with pytest.raises(DomainError):
            rho(BoxDims(2, 4, 2), 0, (0, 2))

    @given(small_dims(max_N=3, max_T=6), st.data())
    def test_s_t_symmetry(self, dims, data):
        t = data.draw(st.integers(0, dims.T))
        swapped = dims.with_S(t)
        for Y in section_states(dims, t):
            assert rho(dims, t, Y) == rho(swapped, dims.S, Y)


class TestTransitions:
    @given(small_dims(max_N=3, max_T=5), st.data())
    def test_stochastic_and_invariant(self, dims, data):
        t = data.draw(st.integers(0, dims.T))
        for d in valid_directions(dims, t):
            P = transition_matrix(dims, t, d)
            assert all(s == 1 for s in P.row_sums())
            assert all(v > 0 for row in P.data for v in row.values())
            dims2, t2 = target_of(dims, t, d)
            assert P.left_apply(rho_vector(dims, t)) == rho_vector(dims2, t2)

    @given(small_dims(max_N=3, max_T=5), st.data())
    def test_determinant_form(self, dims, data):
        t = data.draw(st.integers(0, dims.T))
        for d in valid_directions(dims, t):
            dims2, t2 = target_of(dims, t, d)
            for X in section_states(dims, t):
                for Y in section_states(dims2, t2):
                    assert det_representation(dims, t, d, X, Y) == transition_prob(dims, t, d, X, Y)

    @given(small_dims(max_N=3, max_T=6), st.data())
    def test_swap_symmetry(self, dims, data):
        t = data.draw(st.integers(0, dims.T))
        swapped = dims.with_S(t)
        for d in valid_directions(dims, t):
            P = transition_matrix(dims, t, d)
            Q = transition_matrix(swapped, dims.S, d.swapped())
            assert P == Q

    def test_float_entries(self):
        d = BoxDims(3, 6, 2)
        for X in section_states(d, 2):
            for Y in section_states(d, 3):
                exact = transition_prob(d, 2, "t+", X, Y)
                assert transition_prob(d, 2, "t+", X, Y, exact=False) == pytest.approx(float(exact), abs=1e-15)

    @pytest.mark.parametrize(
        "dims,t,d", [((2, 4, 2), 4, "t+"), ((2, 4, 2), 0, "t-"), ((2, 4, 4), 1, "S+"), ((2, 4, 0), 1, "S-")]
    )
    def test_boundary_directions(self, dims, t, d):
        with pytest.raises(DomainError):
            transition_matrix(BoxDims(*dims), t, d)

    def test_small_example(self):
        # N=1, T=2, S=1: a single path; from x=0 at t=0 the t+ step moves up with prob 1/2
        d = BoxDims(1, 2, 1)
        assert transition_prob(d, 0, "t+", (0,), (1,)) == Fraction(1, 2)
        assert transition_prob(d, 0, "t+", (0,), (0,)) == Fraction(1, 2)

    def test_json_round_trip(self):
        P = cached_transition_matrix(BoxDims(2, 4, 2), 1, Direction.S_MINUS)
        assert matrix_from_json(matrix_to_json(P)) == P


class TestCommutativity:
    @pytest.mark.parametrize("N", [1, 2, 3])
    @pytest.mark.parametrize("T", [1, 2, 3, 4])
    def test_commuting_pairs(self, N, T):
        for S in range(T + 1):
            dims = BoxDims(N, T, S)
            for t in range(T + 1):
                for tdir, sdir in COMMUTATION_PAIRS:
                    if commutation_meaningful(dims, t, tdir, sdir):
                        left, right = commutation_sides(dims, t, tdir, sdir)
                        assert left == right

    @given(small_dims(max_N=3, max_T=8), st.data())
    def test_u_products_commute(self, dims, data):
        t = data.draw(st.integers(0, dims.T))
        for tdir, sdir in COMMUTATION_PAIRS:
            if not commutation_meaningful(dims, t, tdir, sdir):
                continue
            rows, cols, A = u_product(dims, t, tdir, sdir)
            rows2, cols2, B = u_product(dims, t, sdir, tdir)
            assert (rows, cols) == (rows2, cols2)
            assert np.array_equal(A, B)

    @given(small_dims(max_N=4, max_T=8), st.data())
    def test_closed_product(self, dims, data):
        t = data.draw(st.integers(0, dims.T))
        if not commutation_meaningful(dims, t, Direction.T_PLUS, Direction.S_MINUS):
            return
        rows, cols, A = u_product(dims, t, Direction.T_PLUS, Direction.S_MINUS)
        for i, x in enumerate(rows):
            for j, y in enumerate(cols):
                assert A[i, j] == u_t_plus_s_minus(dims, t, x, y)

    def test_u_matrix_is_two_diagonal(self):
        rows, cols, U = u_matrix(BoxDims(3, 7, 3), 2, "t-")
        for i, x in enumerate(rows):
            for j, y in enumerate(cols):
                if y not in (x - 1, x):
                    assert U[i, j] == 0
