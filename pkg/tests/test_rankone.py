import math

import numpy as np
import pytest

from qqsphere import errors as E
from qqsphere.calculus import grad_norm, multiplier, objective
from qqsphere.certify import fourth_order_necessary
from qqsphere.core import Problem, rankone_problem
from qqsphere.diagonal import solve_diagonal
from qqsphere.rankone import (RankOneVector, build_orthogonal_minimizer, make_consistent,
                              orthogonal_minimum_exists, reduced_problem, solve_rankone,
                              zero_sum_phases)
from qqsphere.solve import SolverConfig, multistart


def admissible(rng, n):
    """Random complex a with ||a||_inf <= ||a||_1 / 2."""
    while True:
        m = rng.uniform(0.1, 1.0, n)
        if n == 2:
            m[1] = m[0]
        if m.max() <= 0.5 * m.sum():
            return m * np.exp(1j * rng.uniform(0, 2 * np.pi, n))


def test_norm_cache():
    v = RankOneVector([3, 4j, 0])
    assert (v.l1, v.l2, v.linf) == (7.0, 5.0, 4.0)


class TestExistence:
    def test_examples(self):
        assert orthogonal_minimum_exists([1, 1, 1], 1.0).verdict == "BalancedPhases"
        assert orthogonal_minimum_exists([3, 1, 1], 1.0).verdict == "None"
        ex = orthogonal_minimum_exists([0, 0, 2], 1.0, 3)
        assert ex.verdict == "SingleSpike" and ex.detail["index"] == 2

    def test_spike_too_small(self):
        assert orthogonal_minimum_exists([0, 0, 0.9], 1.0).verdict == "None"


class TestZeroSum:
    def test_examples(self):
        th = zero_sum_phases([1, 1])
        assert abs(np.exp(1j * th) @ np.ones(2)) <= 1e-15
        assert abs(abs(th[0] - th[1]) - math.pi) <= 1e-15
        th = zero_sum_phases([1, 1, 1])
        assert abs(np.exp(1j * th).sum()) <= 1e-12
        d = np.sort(np.mod(th - th[0], 2 * np.pi))
        np.testing.assert_allclose(d, [0, 2 * np.pi / 3, 4 * np.pi / 3], atol=1e-12)
        th = zero_sum_phases([2, 1, 1])
        assert abs(np.exp(1j * th) @ np.array([2, 1, 1])) <= 1e-12
        assert abs(np.exp(1j * th[1]) - np.exp(1j * th[2])) <= 1e-12

    def test_random(self, rng):
        for _ in range(500):
            n = int(rng.integers(2, 11))
            a = admissible(rng, n)
            th = zero_sum_phases(a)
            assert abs(np.exp(1j * th) @ a) <= 1e-12 * np.abs(a).sum()

    def test_errors(self):
        with pytest.raises(E.ConditionViolated):
            zero_sum_phases([3, 1, 1])
        with pytest.raises(E.DegenerateTwoPoint):
            zero_sum_phases([1, 1 + 1e-6])


class TestOrthogonalMinimizer:
    def test_alternating(self):
        a = np.ones(4)
        z = build_orthogonal_minimizer(a, 1.0)
        p = rankone_problem(a, 1.0)
        assert abs(np.vdot(a, z)) <= 1e-15 and np.allclose(np.abs(z), 0.5)
        assert objective(p, z) == pytest.approx(0.125)

    def test_spike_matches_diagonal(self):
        z = build_orthogonal_minimizer([0, 0, 2], 1.0, 3)
        np.testing.assert_allclose(np.abs(z) ** 2, [0.5, 0.5, 0], atol=1e-15)
        assert objective(rankone_problem([0, 0, 2], 1.0), z) == pytest.approx(0.25)
        sol = solve_diagonal(Problem(np.diag([0.0, 0.0, 4.0]), 1.0))
        assert sol.f_star == pytest.approx(0.25)
        np.testing.assert_allclose(sol.u, np.abs(z) ** 2, atol=1e-12)

    def test_random(self, rng):
        for _ in range(100):
            n = int(rng.integers(2, 9))
            a = admissible(rng, n)
            beta = float(rng.uniform(0.1, 3))
            z = build_orthogonal_minimizer(a, beta)
            p = rankone_problem(a, beta)
            assert abs(np.vdot(a, z)) <= 1e-12
            assert grad_norm(p, z) <= 1e-10
            assert objective(p, z) == pytest.approx(beta / (2 * n), abs=1e-12)

    def test_spike_random(self, rng):
        for n in range(3, 8):
            a = np.zeros(n, dtype=complex)
            a[n // 2] = 3 * np.exp(1j)
            z = build_orthogonal_minimizer(a, 1.0)
            p = rankone_problem(a, 1.0)
            assert grad_norm(p, z) <= 1e-10
            assert objective(p, z) == pytest.approx(1 / (2 * (n - 1)), abs=1e-12)

    def test_none(self):
        with pytest.raises(E.NoOrthogonalMinimum):
            build_orthogonal_minimizer([3, 1, 1], 1.0)


class TestConsistent:
    def _z(self):
        a = np.array([3, 1, 1], dtype=complex)
        return a, solve_rankone(a, 1.0).z

    def test_idempotent_and_phase_invariant(self, rng):
        a, z = self._z()
        np.testing.assert_allclose(make_consistent(a, z), z, atol=1e-14)
        for phi in rng.uniform(0, 2 * np.pi, 5):
            np.testing.assert_allclose(make_consistent(a, np.exp(1j * phi) * z, beta=1.0), z, atol=1e-12)

    def test_random_numeric(self, rng):
        for _ in range(3):
            a = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            a[0] *= 4
            if orthogonal_minimum_exists(a, 1.0):
                continue
            p = rankone_problem(a, 1.0)
            cat = multistart(p, 200, SolverConfig(seed=3), saddles=False, maxima=False)
            for e in cat.minima:
                zc = make_consistent(a, e.z, beta=1.0)
                assert np.max(np.abs(np.imag(np.conj(a) * zc))) <= 1e-10
                assert objective(p, zc) == pytest.approx(e.f, abs=1e-12)
                assert grad_norm(p, zc) <= 1e-8

    def test_not_stationary(self, rng):
        z = rng.standard_normal(3) + 0j
        with pytest.raises(E.NotStationary):
            make_consistent([3, 1, 1], z / np.linalg.norm(z), beta=1.0)


class TestSolve:
    def test_orthogonal(self):
        s = solve_rankone([1, 1, 1], 1.0)
        assert s.mode == "Orthogonal" and s.f_star == pytest.approx(1 / 6)

    def test_numeric(self):
        a = np.array([3, 1, 1], dtype=complex)
        s = solve_rankone(a, 1.0, n_starts=500)
        assert s.mode == "ConsistentNumeric"
        p = rankone_problem(a, 1.0)
        assert fourth_order_necessary(p, s.z).passed
        cat = multistart(p, 500, SolverConfig(seed=2), saddles=False, maxima=False)
        m = [np.abs(e.z) for e in cat.minima]
        assert m and all(np.max(np.abs(x - np.abs(s.z))) <= 1e-6 for x in m)
        # the real reduction also has orthogonal local minima; the non-orthogonal ones agree
        red = multistart(reduced_problem(a, 1.0), 500, SolverConfig(seed=2), saddles=False, maxima=False)
        m = [np.abs(e.z) for e in red.minima if abs(np.abs(a) @ e.z) > 1e-8]
        assert m and all(np.max(np.abs(x - np.abs(s.z))) <= 1e-6 for x in m)

    def test_zero(self):
        s = solve_rankone(np.zeros(4), 1.0)
        np.testing.assert_allclose(np.abs(s.z) ** 2, 0.25, atol=1e-12)
        assert s.f_star == pytest.approx(1 / 8)

    def test_zero_component_moduli(self, rng):
        # components with a_k = 0 sit at |z_k|^2 = lambda / beta at every local minimum
        a = np.array([2.0, 0.3, 0.0, 0.0]) + 0j
        beta = 0.6
        p = rankone_problem(a, beta)
        cat = multistart(p, 300, SolverConfig(seed=4), saddles=False, maxima=False)
        assert cat.minima
        for e in cat.minima:
            lam = multiplier(p, e.z)
            assert np.max(np.abs(np.abs(e.z[2:]) ** 2 - lam / beta)) <= 1e-8

    def test_orthogonal_structure(self, rng):
        a = admissible(rng, 4)
        p = rankone_problem(a, 1.0)
        cat = multistart(p, 300, SolverConfig(seed=5), saddles=False, maxima=False)
        for e in cat.minima:
            if abs(np.vdot(a, e.z)) <= 1e-8:
                m = np.abs(e.z)
                assert np.sum(m < 1e-6) <= 1
                big = m[m >= 1e-6]
                assert np.ptp(big) <= 1e-8
