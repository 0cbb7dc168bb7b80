import json
import math

import numpy as np
import pytest

from qqsphere import errors as E
from qqsphere.core import (COMPLEX, FIGURE1_A, REAL, Kind, Problem, SpherePoint, as_point, dumps,
                           generate_problem, parse_point, parse_problem, serialize_point,
                           serialize_problem, spectrum)


def _doc(A, beta=1.0, field="real", im=None, n=None):
    A = np.asarray(A, dtype=float)
    d = {"n": A.shape[0] if n is None else n, "beta": beta, "field": field, "A": {"re": A.tolist()}}
    if im is not None:
        d["A"]["im"] = np.asarray(im, dtype=float).tolist()
    return json.dumps(d)


class TestParse:
    def test_one_dimensional(self):
        p = parse_problem(_doc([[0.0]]))
        assert p.n == 1
        from qqsphere.calculus import objective
        assert objective(p, np.array([1.0])) == pytest.approx(0.5)

    def test_ref3_spectrum(self):
        p = parse_problem(_doc(FIGURE1_A, 0.25))
        np.testing.assert_allclose(spectrum(p).eigenvalues, [0, 1, 2], atol=1e-12)

    def test_zero_beta(self):
        with pytest.raises(E.NonPositiveBeta):
            parse_problem(_doc(np.eye(2), 0.0))

    def test_errors(self):
        with pytest.raises(E.MalformedDocument):
            parse_problem("{not json")
        with pytest.raises(E.MalformedDocument):
            parse_problem(json.dumps({"n": 2, "beta": 1.0}))
        with pytest.raises(E.DimensionMismatch):
            parse_problem(_doc(np.eye(2), n=3))
        with pytest.raises(E.NonHermitian):
            parse_problem(_doc([[0, 1], [0, 0]]))
        with pytest.raises(E.FieldMismatch):
            parse_problem(_doc(np.eye(2), im=[[0, 1], [-1, 0]]))
        with pytest.raises(E.NonFinite):
            Problem(np.array([[np.inf]]), 1.0)

    def test_symmetrization(self):
        A = np.array([[1.0, 2.0], [2.0 + 1e-11, 0.0]])
        p = Problem(A, 1.0)
        assert np.array_equal(p.A, p.A.T)

    def test_complex_roundtrip(self, rng):
        G = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        p = Problem(G + G.conj().T, 0.7, COMPLEX)
        q = parse_problem(serialize_problem(p))
        assert np.array_equal(p.A, q.A) and q.beta == p.beta and q.field == COMPLEX

    def test_roundtrip_exact(self, rng):
        for seed in range(5):
            p = generate_problem("dense-symmetric", 6, 1.3, seed)
            q = parse_problem(serialize_problem(p))
            assert np.array_equal(p.A, q.A)


class TestSpectrum:
    def test_examples(self):
        sp = spectrum(Problem(FIGURE1_A, 0.25))
        assert sp.rho == pytest.approx(2) and sp.delta == pytest.approx(1)
        sp = spectrum(Problem(np.eye(3), 1.0))
        assert sp.rho == pytest.approx(0) and sp.delta == pytest.approx(0)
        sp = spectrum(Problem(np.diag([0.0, 1.0, 5.0]), 1.0))
        assert sp.rho == pytest.approx(5) and sp.delta == pytest.approx(1)

    @pytest.mark.parametrize("kind", list(Kind))
    def test_reconstruction(self, kind):
        n = 3 if kind is Kind.Figure1 else 5
        p = generate_problem(kind, n, 1.0, 11)
        sp = spectrum(p)
        P, lam = sp.eigenvectors, sp.eigenvalues
        err = np.max(np.abs(p.A - (P * lam) @ P.conj().T))
        assert err <= 1e-10 * (1 + np.max(np.abs(lam)))
        assert np.max(np.abs(P.conj().T @ P - np.eye(n))) <= 1e-10
        assert 0 <= sp.delta <= sp.rho + 1e-12


class TestGenerate:
    def test_ref3_kind(self):
        for seed in (0, 5):
            assert np.array_equal(generate_problem("figure1", 3, 0.25, seed).A, FIGURE1_A)
        with pytest.raises(E.BadKindDimension):
            generate_problem("figure1", 4, 0.25)

    def test_deterministic(self):
        a = generate_problem(Kind.DiagonalUniform, 4, 1.0, 7)
        b = generate_problem(Kind.DiagonalUniform, 4, 1.0, 7)
        assert np.array_equal(a.A, b.A)
        assert serialize_problem(a) == serialize_problem(b)

    def test_shift(self):
        assert spectrum(generate_problem("dense-symmetric", 5, 1.0, 3)).eigenvalues[0] == pytest.approx(0, abs=1e-10)

    def test_fields(self):
        assert generate_problem("dense-hermitian", 4, 1.0).field == COMPLEX
        assert generate_problem("rank-one", 4, 1.0).field == COMPLEX
        assert generate_problem("rank-one", 4, 1.0, field="real").field == REAL


class TestPoints:
    def test_as_point(self):
        p = Problem(np.eye(2), 1.0)
        z = as_point(p, np.array([1.0, 1e-12]))
        assert abs(np.linalg.norm(z) - 1) < 1e-15
        with pytest.raises(E.NotOnSphere):
            as_point(p, np.array([1.0, 0.1]))
        with pytest.raises(E.DimensionMismatch):
            as_point(p, np.array([1.0, 0.0, 0.0]))
        with pytest.raises(E.FieldMismatch):
            as_point(p, np.array([1.0, 1j]) / math.sqrt(2))

    def test_polar(self):
        sp = SpherePoint.from_polar([0.6, 0.8], [0.0, math.pi / 2])
        np.testing.assert_allclose(np.asarray(sp), [0.6, 0.8j], atol=1e-15)
        np.testing.assert_allclose(sp.r, [0.6, 0.8])

    def test_point_roundtrip(self):
        z = np.array([0.6, 0.8j])
        assert np.array_equal(parse_point(serialize_point(z)), z)

    def test_dumps_17_digits(self):
        assert dumps({"x": 0.1}) == '{"x": 0.10000000000000001}'
        assert float(json.loads(dumps([1 / 3]))[0]) == 1 / 3
