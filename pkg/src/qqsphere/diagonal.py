"""Diagonal A: closed-form global solution, stationary classes, perturbation test.

With A = diag(a) the objective depends on z only through u_k = |z_k|^2,

    f = 1/2 a.u + beta/2 ||u||^2,    u in the probability simplex,

so the global minimizers are the Euclidean projection of -a/(2 beta) onto the
simplex (with arbitrary phases).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import errors as E
from .calculus import objective
from .core import COMPLEX, Problem, rng_from_seed


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto {u >= 0, sum u = 1} by sort and threshold."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise E.DimensionMismatch("cannot project an empty vector")
    if not np.all(np.isfinite(v)):
        raise E.NonFinite("input has non-finite entries")
    s = np.sort(v)[::-1]
    css = np.cumsum(s) - 1.0
    k = np.arange(1, v.size + 1)
    m = np.nonzero(s - css / k > 0)[0][-1]
    tau = css[m] / (m + 1)
    return np.maximum(v - tau, 0.0)


def diagonal_entries(problem: Problem) -> np.ndarray:
    A = problem.A
    a = np.real(np.diag(A)).astype(float)
    off = A - np.diag(np.diag(A))
    if np.max(np.abs(off), initial=0.0) > 1e-12 * (1.0 + np.max(np.abs(a))):
        raise E.NotDiagonal("A has non-zero off-diagonal entries")
    return a


def _f_of_u(a, beta, u):
    return 0.5 * float(a @ u) + 0.5 * beta * float(u @ u)


class DiagonalSolution(NamedTuple):
    u: np.ndarray
    f_star: float
    lam: float


def solve_diagonal(problem: Problem) -> DiagonalSolution:
    """Global minimum: u = P(-a / 2 beta), f* and the multiplier."""
    a = diagonal_entries(problem)
    b = problem.beta
    u = project_simplex(-a / (2.0 * b))
    lam = 0.5 * float(a @ u) + b * float(u @ u)
    return DiagonalSolution(u, _f_of_u(a, b, u), lam)


def point_from_moduli(u, phases=None, field: str = "real") -> np.ndarray:
    r = np.sqrt(np.maximum(np.asarray(u, dtype=float), 0.0))
    if phases is None:
        return r.astype(complex) if field == COMPLEX else r
    return r * np.exp(1j * np.asarray(phases))


@dataclass(frozen=True)
class DiagonalStationaryClass:
    support: tuple
    u: np.ndarray
    lam: float
    f_value: float
    ties: bool = False

    def point(self, phases=None, field: str = "real") -> np.ndarray:
        return point_from_moduli(self.u, phases, field)

    def to_dict(self) -> dict:
        return {"support": list(self.support), "u": self.u, "lambda": self.lam,
                "f": self.f_value, "ties": self.ties}


def enumerate_stationary_diagonal(problem: Problem, n_cap: int = 20) -> list:
    """All stationary classes (support, u, lambda, f), sorted by f."""
    a = diagonal_entries(problem)
    n = a.size
    if n > n_cap:
        raise E.DimensionTooLarge(f"enumeration over 2^{n} supports exceeds the cap n <= {n_cap}")
    b = problem.beta
    tie_tol = 1e-12 * (1.0 + np.max(np.abs(a)))
    out = []
    chunk = 1 << 16
    total = 1 << n
    bitvals = 1 << np.arange(n)
    for start in range(1, total, chunk):
        masks = np.arange(start, min(start + chunk, total))
        S = (masks[:, None] & bitvals[None, :]) != 0
        cnt = S.sum(axis=1)
        lam = (2.0 * b + S @ a) / (2.0 * cnt)
        U = (2.0 * lam[:, None] - a[None, :]) / (2.0 * b)
        U = np.where(S, U, 0.0)
        valid = np.all(~S | ((U > 1e-13) & (U <= 1.0 + 1e-12)), axis=1)
        for row in np.nonzero(valid)[0]:
            sup = tuple(int(k) for k in np.nonzero(S[row])[0])
            u = np.clip(U[row], 0.0, 1.0)
            u = u / u.sum()
            asup = np.sort(a[list(sup)])
            ties = bool(np.any(np.diff(asup) <= tie_tol)) if len(sup) > 1 else False
            out.append(DiagonalStationaryClass(sup, u, float(lam[row]), _f_of_u(a, b, u), ties))
    out.sort(key=lambda c: (c.f_value, len(c.support), c.support))
    return out


# ---------------------------------------------------------------------------
# perturbation

@dataclass(frozen=True)
class PerturbationTrial:
    W: np.ndarray
    sigma: float
    y: np.ndarray
    lhs: float
    rhs: float
    z0: np.ndarray
    f_sigma_y: float
    f_sigma_ref: float
    status: str  # "improved" | "did_not_improve"

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs

    def to_dict(self) -> dict:
        return {"sigma": self.sigma, "lhs": self.lhs, "rhs": self.rhs, "holds": self.holds,
                "status": self.status, "f_sigma_y": self.f_sigma_y, "f_sigma_ref": self.f_sigma_ref,
                "y": {"re": np.real(self.y).tolist(), "im": np.imag(self.y).tolist()},
                "W": {"re": np.real(self.W).tolist(), "im": np.imag(self.W).tolist()}}


def hermitian_noise(n: int, rng: np.random.Generator) -> np.ndarray:
    """Hermitian matrix with standard complex normal off-diagonal and zero diagonal."""
    G = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2.0)
    U = np.triu(G, 1)
    return U + U.conj().T


def perturbation_check(problem: Problem, sigma: float, seed: int = 0, W=None,
                       n_starts: int = 64) -> PerturbationTrial:
    """Minimize f + sigma/2 z^*Wz and compare with the unperturbed minimizer class.

    lhs = min over the class of z0 of ||y - z||_4 = || |y| - sqrt(u) ||_4;
    rhs = (2 sigma ||W||_2 n^(1/4) / beta)^(1/3).
    """
    from .solve import SolverConfig, best_minimum, multistart

    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    a = diagonal_entries(problem)
    n = a.size
    b = problem.beta
    rng = rng_from_seed(seed)
    W = hermitian_noise(n, rng) if W is None else np.asarray(W, dtype=complex)
    sol = solve_diagonal(problem)
    z0 = point_from_moduli(sol.u, field=COMPLEX)
    wnorm = float(np.linalg.norm(W, 2)) if W.size else 0.0
    rhs = (2.0 * sigma * wnorm * n ** 0.25 / b) ** (1.0 / 3.0)
    Ps = Problem(np.diag(a).astype(complex) + sigma * W, b, COMPLEX)
    f0 = objective(Ps, z0)
    if sigma == 0 or wnorm == 0:
        return PerturbationTrial(W, float(sigma), z0, 0.0, rhs, z0, f0, f0, "improved")
    cat = multistart(Ps, n_starts, SolverConfig(seed=int(seed) + 1), saddles=False, maxima=False,
                     extra_starts=[z0])
    y = best_minimum(cat).z
    fy = objective(Ps, y)
    # member of the class of z0 carrying the phases of y
    ph = np.where(np.abs(y) > 0, y / np.where(np.abs(y) > 0, np.abs(y), 1.0), 1.0)
    zref = np.sqrt(sol.u) * ph
    fref = min(objective(Ps, zref), f0)
    if fy > fref + 1e-12:
        return PerturbationTrial(W, float(sigma), z0, 0.0, rhs, z0, f0, fref, "did_not_improve")
    lhs = float(np.sum((np.abs(y) - np.sqrt(sol.u)) ** 4) ** 0.25)
    return PerturbationTrial(W, float(sigma), y, lhs, rhs, z0, fy, fref, "improved")
