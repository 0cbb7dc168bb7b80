import math

import numpy as np
import pytest

from conftest import random_problem
from qqsphere import errors as E
from qqsphere.calculus import curvature_forms, objective, retract
from qqsphere.certify import (brute_force_local_check, brute_force_search, certify_point,
                              fourth_order_necessary, fourth_order_sufficient, global_certificate,
                              global_fourth_order)
from qqsphere.core import COMPLEX, FIGURE1_A, Problem
from qqsphere.diagonal import solve_diagonal
from qqsphere.landscape import saddle_counterexample
from qqsphere.solve import SolverConfig, multistart


def e(n, k):
    v = np.zeros(n)
    v[k] = 1
    return v


@pytest.fixture(scope="module")
def diag01():
    p = Problem(np.diag([0.0, 1.0]), 1.0)
    return p, np.sqrt(solve_diagonal(p).u)


@pytest.fixture(scope="module")
def ref3_catalog():
    p = Problem(FIGURE1_A, 3.25)
    return p, multistart(p, 2000, SolverConfig(seed=1))


class TestCertifyPoint:
    def test_diagonal_minimum(self, diag01):
        c = certify_point(*diag01)
        assert c.label == "StrictLocalMin" and c.global_ok == "Certified"
        assert c.h_min_eig == pytest.approx(0, abs=1e-12)

    def test_spike(self):
        c = certify_point(Problem(np.zeros((2, 2)), 1.0), e(2, 0))
        assert c.label == "Saddle" and c.mu_min == pytest.approx(-2) and c.global_ok == "Refuted"

    def test_not_stationary(self, rng):
        z = rng.standard_normal(3)
        c = certify_point(Problem(FIGURE1_A, 1.0), z / np.linalg.norm(z))
        assert c.label == "NotStationary" and c.global_ok == "NotApplicable"

    def test_complex_never_strict(self, rng):
        for _ in range(5):
            p = random_problem(rng, 3, cplx=True)
            cat = multistart(p, 100, SolverConfig(seed=1))
            for ent in cat.points:
                c = certify_point(p, ent.z)
                assert c.label in ("Degenerate", "Saddle")
                assert c.mu_min <= 1e-8

    def test_field_mismatch(self):
        with pytest.raises(E.FieldMismatch):
            certify_point(Problem(np.eye(2), 1.0), np.array([1, 1j]) / math.sqrt(2))

    def test_certified_multiplier(self, diag01):
        p, z = diag01
        c = certify_point(p, z)
        M = p.A + 2 * p.beta * np.diag(z ** 2)
        assert 2 * c.lam == pytest.approx(np.linalg.eigvalsh(M)[0], abs=1e-10)

    def test_certified_is_global(self, ref3_catalog):
        p, cat = ref3_catalog
        fmin = min(ent.f for ent in cat.points)
        for ent in cat.points:
            if global_certificate(p, ent.z):
                assert ent.f <= fmin + 1e-9

    def test_consistency_with_brute_force(self, rng):
        seen = {"StrictLocalMin": 0, "Saddle": 0}
        for _ in range(40):
            if min(seen.values()) >= 50:
                break
            p = random_problem(rng, 3)
            for ent in multistart(p, 200, SolverConfig(seed=2)).points:
                c = certify_point(p, ent.z)
                if c.label == "StrictLocalMin":
                    assert brute_force_local_check(p, ent.z)
                elif c.label == "Saddle":
                    assert not brute_force_local_check(p, ent.z)
                    xi = 1e-4 * c.v_min
                    drop = objective(p, ent.z) - objective(p, retract(ent.z, xi))
                    assert drop >= 0.25 * abs(c.mu_min) * 1e-8
                else:
                    continue
                seen[c.label] += 1
        assert min(seen.values()) >= 50


class TestFourthOrder:
    def test_necessary(self, diag01):
        assert fourth_order_necessary(*diag01).kind == "NecessaryPass"
        v = fourth_order_necessary(Problem(np.zeros((2, 2)), 1.0), e(2, 0))
        assert v.kind == "NecessaryFail"
        w = v.witness["v"]
        assert abs(abs(w[1]) - 1) <= 1e-12
        assert curvature_forms(Problem(np.zeros((2, 2)), 1.0), e(2, 0), w).hf == pytest.approx(-2)
        n = 4
        v = fourth_order_necessary(Problem(np.zeros((n, n)), 1.0), np.full(n, 0.5))
        assert v.kind == "NecessaryPass" and v.null_dim == 0

    def test_sufficient(self, diag01):
        v = fourth_order_sufficient(*diag01)
        assert v.kind == "SufficientPass" and v.null_dim == 0
        assert fourth_order_sufficient(Problem(np.zeros((2, 2)), 1.0), e(2, 0)).kind == "SufficientInconclusive"

    def test_counterexample_consistent(self):
        p, z = saddle_counterexample(3)
        suf = fourth_order_sufficient(p, z)
        nec = fourth_order_necessary(p, z)
        bf = brute_force_local_check(p, z)
        assert suf.null_dim >= 1
        if suf.passed:
            assert bf
        if not nec.passed:
            assert not bf

    def test_global(self, diag01, ref3_catalog):
        assert global_fourth_order(*diag01).kind == "GlobalPass"
        n = 3
        assert global_fourth_order(Problem(np.zeros((n, n)), 1.0), np.full(n, n ** -0.5)).kind == "GlobalPass"
        p, cat = ref3_catalog
        fmin = min(ent.f for ent in cat.minima)
        spurious = [ent for ent in cat.minima if ent.f > fmin + 1e-6]
        assert spurious
        for ent in spurious:
            v = global_fourth_order(p, ent.z)
            assert v.kind == "GlobalFail" and v.witness is not None

    def test_fail_implies_brute_force_fail(self, ref3_catalog):
        p, cat = ref3_catalog
        for ent in cat.points:
            if not fourth_order_necessary(p, ent.z).passed:
                assert not brute_force_local_check(p, ent.z)

    def test_not_stationary(self, rng):
        z = rng.standard_normal(3)
        with pytest.raises(E.NotStationary):
            fourth_order_necessary(Problem(FIGURE1_A, 1.0), z / np.linalg.norm(z))


class TestBruteForce:
    def test_examples(self, diag01):
        n = 3
        assert brute_force_local_check(Problem(np.zeros((n, n)), 1.0), np.full(n, n ** -0.5))
        assert not brute_force_local_check(Problem(np.zeros((2, 2)), 1.0), e(2, 0))
        assert brute_force_local_check(*diag01)

    def test_deterministic_sampling(self, rng):
        p = random_problem(rng, 5)
        z = rng.standard_normal(5)
        z /= np.linalg.norm(z)
        a = brute_force_search(p, z, seed=4, samples=500)
        b = brute_force_search(p, z, seed=4, samples=500)
        assert a.min_decrease == b.min_decrease and np.array_equal(a.xi, b.xi)
        assert not a.ok  # generic points are not local minima
