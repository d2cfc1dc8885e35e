import json
import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from sparse_sched.lds_model import (
    ActuatorSchedule,
    DimensionError,
    GramianState,
    InfeasibleSystemError,
    LinearSystem,
    controllability_matrix,
    epsilon_auxiliary_energy,
    gramian,
    horizon_bounds,
    is_sparse_controllable,
    load_schedule,
    load_system,
    minimal_polynomial_degree,
    numerical_rank,
    save_schedule,
    save_system,
    trace_inverse,
)

from conftest import random_system


def sched(*steps, s=None):
    return ActuatorSchedule(tuple(tuple(x) for x in steps), s=s)


class TestControllabilityMatrix:
    def test_zero_A_drops_early_block(self, zero2):
        np.testing.assert_array_equal(controllability_matrix(zero2, sched([], [1, 2])), np.eye(2))

    def test_identity(self, ident2):
        np.testing.assert_array_equal(controllability_matrix(ident2, sched([1], [2])), np.eye(2))

    def test_diag21(self, diag21):
        # A^1 e1 = 2 e1 for step 0, A^0 e2 = e2 for step 1
        np.testing.assert_array_equal(controllability_matrix(diag21, sched([1], [2])), [[2.0, 0.0], [0.0, 1.0]])

    def test_column_order_within_block(self, diag21):
        C = controllability_matrix(diag21, sched([2, 1], []))
        np.testing.assert_array_equal(C, [[2.0, 0.0], [0.0, 1.0]])

    def test_out_of_range_actuator(self, diag21):
        with pytest.raises(DimensionError):
            controllability_matrix(diag21, sched([3], [1]))

    def test_empty_schedule(self, diag21):
        with pytest.raises(DimensionError):
            controllability_matrix(diag21, sched())


class TestGramian:
    def test_zero_A(self, zero2):
        np.testing.assert_array_equal(gramian(zero2, sched([], [1, 2])).W, np.eye(2))

    def test_identity(self, ident2):
        np.testing.assert_array_equal(gramian(ident2, sched([1], [2])).W, np.eye(2))

    def test_diag21(self, diag21):
        np.testing.assert_array_equal(gramian(diag21, sched([1], [2])).W, np.diag([4.0, 1.0]))

    def test_eps_fields(self, diag21):
        st_ = gramian(diag21, sched([1], [2]), epsilon=1.0)
        np.testing.assert_allclose(st_.M, np.diag([1 / 5, 1 / 2]))
        assert st_.trace_inv == pytest.approx(0.7)
        assert st_.rank == 2

    def test_eps_zero_omits_inverse(self, diag21):
        st_ = gramian(diag21, sched([1], [1]))
        assert st_.M is None and st_.trace_inv is None and st_.rank == 1

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 10), m=st.integers(1, 4))
    def test_matches_sum_of_outer_products(self, seed, n, m):
        sys = random_system(seed, n, m)
        rng = np.random.default_rng(seed + 1)
        steps = [sorted(rng.choice(m, size=rng.integers(0, m + 1), replace=False) + 1) for _ in range(n)]
        schedule = sched(*steps)
        W = gramian(sys, schedule).W
        # reference ordering: step n-k enters through A^(k-1), k = 1..n
        ref = np.zeros((n, n))
        for k in range(1, n + 1):
            Bs = sys.B[:, [j - 1 for j in schedule[n - k]]]
            P = np.linalg.matrix_power(sys.A, k - 1)
            ref += P @ Bs @ Bs.T @ P.T
        C = controllability_matrix(sys, schedule)
        scale = max(np.linalg.norm(ref), 1e-300)
        assert np.linalg.norm(W - ref) / scale <= 1e-10
        assert np.linalg.norm(W - C @ C.T) / scale <= 1e-10

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 6), eps=st.sampled_from([1.0, 0.1, 1e-3]))
    def test_state_invariants(self, seed, n, eps):
        sys = random_system(seed, n, 2)
        st_ = gramian(sys, sched(*[[1]] * (n - 1), [2]), epsilon=eps)
        I = np.eye(n)
        assert np.linalg.norm(st_.M @ (st_.W + eps * I) - I) <= 1e-8 * np.sqrt(n)
        assert st_.trace_inv == pytest.approx(np.trace(st_.M), rel=1e-10)
        assert 0 <= st_.rank <= n


class TestEpsilonEnergy:
    @pytest.mark.parametrize("W,eps,expected", [
        (np.eye(2), 1.0, 1.0),
        (np.zeros((2, 2)), 0.5, 4.0),
        (np.diag([3.0, 0.0]), 1.0, 1.25),
    ])
    def test_examples(self, W, eps, expected):
        assert epsilon_auxiliary_energy(GramianState.from_gramian(W, eps)) == pytest.approx(expected)

    def test_requires_positive_eps(self):
        with pytest.raises(ValueError):
            epsilon_auxiliary_energy(GramianState.from_gramian(np.eye(2), 0.0))

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 8), r=st.integers(0, 8),
           eps=st.sampled_from([1.0, 1e-2, 1e-4]))
    def test_rank_penalty_decomposition(self, seed, n, r, eps):
        r = min(r, n)
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((n, r))
        W = X @ X.T
        R = numerical_rank(W)
        lam = np.sort(np.linalg.eigvalsh(W))[::-1][:R]
        expected = np.sum(1.0 / (lam + eps)) + (n - R) / eps
        got = epsilon_auxiliary_energy(GramianState.from_gramian(W, eps))
        assert abs(got - expected) <= 1e-8 * expected

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 6), m=st.integers(1, 3))
    def test_monotone_under_additions(self, seed, n, m):
        sys = random_system(seed, n, m)
        rng = np.random.default_rng(seed)
        steps = [set() for _ in range(n)]
        prev = epsilon_auxiliary_energy(gramian(sys, sched(*steps), epsilon=0.1))
        for _ in range(n * m):
            k, j = int(rng.integers(n)), int(rng.integers(1, m + 1))
            steps[k].add(j)
            cur = epsilon_auxiliary_energy(gramian(sys, sched(*steps), epsilon=0.1))
            assert cur <= prev * (1 + 1e-12)
            prev = cur


class TestSparseControllability:
    def test_identity(self, ident2):
        assert is_sparse_controllable(ident2, 1)

    def test_zero_A_needs_two(self, zero2):
        rep = is_sparse_controllable(zero2, 1)
        assert not rep and rep.controllable and rep.min_sparsity == 2
        assert is_sparse_controllable(zero2, 2)

    def test_uncontrollable(self):
        sys = LinearSystem(np.eye(2), np.array([[1.0], [0.0]]))
        rep = is_sparse_controllable(sys, 1)
        assert not rep.controllable and not rep

    def test_sparsity_range(self, ident2):
        with pytest.raises(ValueError):
            is_sparse_controllable(ident2, 3)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 8), defect=st.integers(0, 3))
    def test_identity_B(self, seed, n, defect):
        rng = np.random.default_rng(seed)
        r = max(n - defect, 0)
        A = rng.standard_normal((n, r)) @ rng.standard_normal((r, n)) if r else np.zeros((n, n))
        sys = LinearSystem(A, np.eye(n))
        s = n - numerical_rank(A)
        if s >= 1:
            assert is_sparse_controllable(sys, s)
        assert is_sparse_controllable(sys, n)


def jordan_min_poly_degree(A) -> int:
    """Sum over eigenvalues of the largest Jordan block, in exact arithmetic."""
    _, J = sympy.Matrix(A).jordan_form()
    n = J.shape[0]
    blocks: dict = {}
    i = 0
    while i < n:
        size = 1
        while i + size < n and J[i + size - 1, i + size] == 1:
            size += 1
        lam = J[i, i]
        blocks[lam] = max(blocks.get(lam, 0), size)
        i += size
    return sum(blocks.values())


class TestMinimalPolynomial:
    @pytest.mark.parametrize("A,q", [
        (np.eye(2), 1),
        (np.zeros((2, 2)), 1),
        (np.diag([2.0, 1.0]), 2),
        (np.array([[0.0, 1.0], [0.0, 0.0]]), 2),
        (np.diag([3.0, 3.0, 1.0]), 2),
    ])
    def test_examples(self, A, q):
        assert minimal_polynomial_degree(A) == q
        assert jordan_min_poly_degree(A.astype(int)) == q

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 5))
    def test_against_jordan_form(self, seed, n):
        rng = np.random.default_rng(seed)
        # integer block-triangular matrices with repeated eigenvalues
        eig = rng.integers(-2, 3, size=n)
        A = np.diag(eig).astype(int) + np.triu(rng.integers(0, 2, size=(n, n)), k=1)
        assert minimal_polynomial_degree(A.astype(float)) == jordan_min_poly_degree(A)


class TestHorizonBounds:
    def test_identity(self, ident2):
        assert horizon_bounds(ident2, 1) == (2, 2)

    def test_diag21(self, diag21):
        assert horizon_bounds(diag21, 2) == (1, 1)

    def test_n20_companion(self):
        # companion matrix: minimal polynomial has full degree 20
        n = 20
        A = np.diag(np.ones(n - 1), -1)
        A[:, -1] = np.linspace(-0.5, 0.5, n)
        sys = LinearSystem(A, np.eye(n))
        assert minimal_polynomial_degree(A) == 20
        assert horizon_bounds(sys, 5) == (4, 16)

    def test_infeasible(self, zero2):
        with pytest.raises(InfeasibleSystemError):
            horizon_bounds(zero2, 1)


class TestNumericalRank:
    @pytest.mark.parametrize("M,r", [(np.eye(3), 3), (np.zeros((2, 2)), 0), (np.ones((2, 2)), 1)])
    def test_examples(self, M, r):
        assert numerical_rank(M) == r

    def test_empty(self):
        assert numerical_rank(np.zeros((3, 0))) == 0


class TestTypes:
    def test_system_validation(self):
        with pytest.raises(DimensionError):
            LinearSystem(np.zeros((2, 3)), np.zeros((2, 1)))
        with pytest.raises(DimensionError):
            LinearSystem(np.eye(2), np.zeros((3, 1)))
        with pytest.raises(ValueError):
            LinearSystem(np.array([[np.nan]]), np.ones((1, 1)))

    def test_system_is_read_only(self, diag21):
        with pytest.raises(ValueError):
            diag21.A[0, 0] = 5.0

    def test_schedule_validation(self):
        with pytest.raises(ValueError):
            sched([1, 1])
        with pytest.raises(ValueError):
            sched([0])
        with pytest.raises(ValueError):
            sched([1, 2], s=1)
        assert sched([2, 1])[0] == (1, 2)

    def test_trace_inverse(self):
        assert trace_inverse(np.diag([4.0, 1.0])) == pytest.approx(1.25)
        assert math.isinf(trace_inverse(np.diag([1.0, 0.0])))

    def test_json_round_trip(self, tmp_path, diag21):
        save_system(diag21, tmp_path / "sys.json")
        loaded = load_system(tmp_path / "sys.json")
        np.testing.assert_array_equal(loaded.A, diag21.A)
        np.testing.assert_array_equal(loaded.B, diag21.B)
        data = json.loads((tmp_path / "sys.json").read_text())
        assert data == {"n": 2, "m": 2, "A": [2.0, 0.0, 0.0, 1.0], "B": [1.0, 0.0, 0.0, 1.0]}
        s = sched([1], [2], s=1)
        save_schedule(s, tmp_path / "sched.json")
        assert json.loads((tmp_path / "sched.json").read_text()) == {"s": 1, "steps": [[1], [2]]}
        assert load_schedule(tmp_path / "sched.json") == s

    def test_descriptor_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            LinearSystem.from_dict({"n": 2, "m": 1, "A": [1, 0, 0], "B": [1, 0]})
