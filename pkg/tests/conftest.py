import numpy as np
import pytest

from qqsphere.core import COMPLEX, REAL, Problem

# acceptance criterion -> (ok, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def record(k: int, ok: bool, detail: str = ""):
    ACCEPTANCE[k] = (bool(ok), detail)
    print(f"CRITERION {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        tr.write_line(f"CRITERION {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def random_unit(rng, n, cplx=False):
    z = rng.standard_normal(n) + (1j * rng.standard_normal(n) if cplx else 0.0)
    return z / np.linalg.norm(z)


def random_tangent(rng, z):
    v = rng.standard_normal(z.size) + (1j * rng.standard_normal(z.size) if np.iscomplexobj(z) else 0.0)
    v = v - np.real(np.vdot(z, v)) * z
    return v / np.linalg.norm(v)


def random_problem(rng, n, cplx=False, beta=None):
    G = rng.standard_normal((n, n)) + (1j * rng.standard_normal((n, n)) if cplx else 0.0)
    A = (G + G.conj().T) / 2
    b = float(rng.uniform(0.2, 3.0)) if beta is None else beta
    return Problem(A, b, COMPLEX if cplx else REAL)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
