import json

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from sparse_sched.greedy import GreedyConfig, greedy_schedule
from sparse_sched.lds_model import ActuatorSchedule, DimensionError, controllability_matrix, gramian
from sparse_sched.synthesis import (
    InputSequence,
    UnreachableTargetError,
    control_energy,
    min_energy_inputs,
    simulate,
)

from conftest import random_system


def sched(*steps):
    return ActuatorSchedule(tuple(tuple(x) for x in steps))


class TestMinEnergyInputs:
    def test_zero_A(self, zero2):
        u = min_energy_inputs(zero2, sched([], [1, 2]), [0, 0], [1, 1])
        np.testing.assert_allclose(u.inputs, [[0, 0], [1, 1]])
        assert control_energy(u) == pytest.approx(2.0)

    def test_identity(self, ident2):
        u = min_energy_inputs(ident2, sched([1], [2]), [1, 0], [1, 1])
        np.testing.assert_allclose(u.inputs, [[0, 0], [0, 1]], atol=1e-15)
        assert control_energy(u) == pytest.approx(1.0)
        np.testing.assert_allclose(simulate(ident2, u, [1, 0]).final, [1, 1])

    def test_same_endpoints(self, ident2):
        u = min_energy_inputs(ident2, sched([1], [2]), [0.3, -2], [0.3, -2])
        assert control_energy(u) == 0.0

    def test_unreachable(self, diag21):
        with pytest.raises(UnreachableTargetError) as info:
            min_energy_inputs(diag21, sched([1], [1]), [0, 0], [1, 1])
        # lstsq residual: the e2 component cannot be reached
        assert info.value.residual == pytest.approx(1.0)
        assert info.value.rank == 1

    def test_dimension_mismatch(self, ident2):
        with pytest.raises(DimensionError):
            min_energy_inputs(ident2, sched([1], [2]), [0, 0, 0], [1, 1])

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 7), m=st.integers(1, 4))
    def test_closure_energy_and_support(self, seed, n, m):
        sys = random_system(seed, n, m)
        try:
            schedule, _ = greedy_schedule(sys, GreedyConfig(s=m))
        except Exception:
            return
        rng = np.random.default_rng(seed)
        x0, xf = rng.standard_normal(n), rng.standard_normal(n)
        u = min_energy_inputs(sys, schedule, x0, xf)
        assert u.respects_support()
        traj = simulate(sys, u, x0)
        assert np.linalg.norm(traj.final - xf) <= 1e-8 * (1 + np.linalg.norm(xf))
        d = xf - np.linalg.matrix_power(sys.A, n) @ x0
        W = gramian(sys, schedule).W
        expected = d @ scipy.linalg.solve(W, d, assume_a="pos")
        assert control_energy(u) == pytest.approx(expected, rel=1e-8)

    def test_null_space_perturbations_do_not_help(self):
        sys = random_system(5, 4, 3)
        schedule = sched([1, 2], [2, 3], [1, 3], [1, 2])
        x0, xf = np.ones(4), np.arange(4.0)
        u = min_energy_inputs(sys, schedule, x0, xf)
        C = controllability_matrix(sys, schedule)
        z = np.concatenate([u.inputs[k, [j - 1 for j in step]] for k, step in enumerate(schedule.steps)])
        N = scipy.linalg.null_space(C)
        assert N.shape[1] == 4
        rng = np.random.default_rng(0)
        for _ in range(50):
            dz = N @ rng.standard_normal(N.shape[1])
            assert np.linalg.norm(C @ (z + dz) - C @ z) <= 1e-10 * np.linalg.norm(C @ z)
            assert np.sum((z + dz) ** 2) >= np.sum(z ** 2) - 1e-12

    def test_unit_sphere_average(self):
        sys = random_system(8, 5, 2)
        schedule = sched([1, 2], [1], [2], [1, 2], [1])
        W = gramian(sys, schedule).W
        rng = np.random.default_rng(1)
        d = rng.standard_normal((4000, 5))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        energies = [control_energy(min_energy_inputs(sys, schedule, np.zeros(5), x)) for x in d]
        assert np.mean(energies) == pytest.approx(np.trace(np.linalg.inv(W)) / 5, rel=0.05)


class TestSimulate:
    def test_zero_A_collapses(self, zero2):
        traj = simulate(zero2, np.zeros((3, 2)), [1.0, 2.0])
        np.testing.assert_array_equal(traj.states[1:], 0.0)

    def test_identity_constant(self, ident2):
        traj = simulate(ident2, np.zeros((3, 2)), [1.0, 2.0])
        np.testing.assert_array_equal(traj.states, [[1, 2]] * 4)

    def test_dimension_mismatch(self, ident2):
        with pytest.raises(DimensionError):
            simulate(ident2, np.zeros((3, 3)), [1.0, 2.0])

    def test_recursion_invariant(self):
        sys = random_system(2, 4, 3)
        rng = np.random.default_rng(0)
        U = rng.standard_normal((6, 3))
        traj = simulate(sys, U, rng.standard_normal(4))
        for k in range(6):
            step = sys.A @ traj.states[k] + sys.B @ U[k]
            assert np.linalg.norm(traj.states[k + 1] - step) <= 1e-10 * max(1.0, np.linalg.norm(step))

    def test_trajectory_csv(self, tmp_path, ident2):
        simulate(ident2, np.array([[1.0, 0.0]]), [0.0, 0.5]).write_csv(tmp_path / "t.csv")
        assert (tmp_path / "t.csv").read_text() == "k,x_1,x_2\n0,0.0,0.5\n1,1.0,0.5\n"


class TestEnergy:
    def test_zero(self):
        assert control_energy(np.zeros((3, 2))) == 0.0

    def test_single(self):
        assert control_energy(np.array([[0.0, 0.0], [1.0, 1.0]])) == 2.0

    def test_input_sequence_json(self, tmp_path):
        u = InputSequence(np.array([[0.0, 0.0], [1.0, 1.0]]), sched([], [1, 2]))
        u.save(tmp_path / "u.json")
        assert json.loads((tmp_path / "u.json").read_text()) == {"inputs": [[0.0, 0.0], [1.0, 1.0]]}
        assert u.respects_support()
        bad = InputSequence(np.array([[1e-30, 0.0], [1.0, 1.0]]), sched([], [1, 2]))
        assert not bad.respects_support()
