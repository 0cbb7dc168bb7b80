"""Rank-one A = a a^* (complex field).

Points with a^* z = 0 ("orthogonal" points) only see the quartic term; they
are global minima whenever they exist.  Otherwise minima are, up to phases,
the minima of a real problem in the moduli.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import errors as E
from .calculus import grad_norm, objective
from .core import COMPLEX, Problem, REAL, as_point, rankone_problem

REL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class RankOneVector:
    a: np.ndarray
    l1: float = field(init=False)
    l2: float = field(init=False)
    linf: float = field(init=False)

    def __post_init__(self):
        a = np.array(self.a, dtype=complex).ravel()
        if a.size == 0:
            raise E.DimensionMismatch("a must be non-empty")
        if not np.all(np.isfinite(a)):
            raise E.NonFinite("a has non-finite entries")
        a.setflags(write=False)
        m = np.abs(a)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "l1", float(m.sum()))
        object.__setattr__(self, "l2", float(np.linalg.norm(a)))
        object.__setattr__(self, "linf", float(m.max()))

    @property
    def n(self) -> int:
        return self.a.size


def as_rankone(a) -> RankOneVector:
    return a if isinstance(a, RankOneVector) else RankOneVector(a)


def balanced(av: RankOneVector) -> bool:
    """||a||_inf <= ||a||_1 / 2 (up to a relative rounding allowance)."""
    return av.linf <= 0.5 * av.l1 * (1.0 + REL_TOL)


@dataclass(frozen=True)
class OrthogonalExistence:
    verdict: str  # "BalancedPhases" | "SingleSpike" | "None"
    detail: dict

    def __bool__(self):
        return self.verdict != "None"


def orthogonal_minimum_exists(a, beta: float, n: int | None = None) -> OrthogonalExistence:
    av = as_rankone(a)
    n = av.n if n is None else int(n)
    if n != av.n:
        raise E.DimensionMismatch(f"a has length {av.n}, expected {n}")
    if n < 2:
        raise E.DimensionMismatch("n must be >= 2")
    if not beta > 0:
        raise E.NonPositiveBeta("beta must be positive")
    nz = np.nonzero(av.a != 0)[0]
    if balanced(av):
        return OrthogonalExistence("BalancedPhases", {"linf": av.linf, "half_l1": 0.5 * av.l1})
    if nz.size == 1:
        need = 2.0 * beta / (n - 1)
        if av.l2 ** 2 >= need:
            return OrthogonalExistence("SingleSpike", {"index": int(nz[0]), "norm_sq": av.l2 ** 2,
                                                       "required": need})
    return OrthogonalExistence("None", {"linf": av.linf, "half_l1": 0.5 * av.l1,
                                        "nonzeros": int(nz.size)})


def zero_sum_phases(a) -> np.ndarray:
    """Phases theta with sum_k exp(i theta_k) a_k = 0 (requires ||a||_inf <= ||a||_1/2)."""
    av = as_rankone(a)
    a = av.a
    n = av.n
    mod = np.abs(a)
    theta = np.zeros(n)
    nz = np.nonzero(mod > 0)[0]
    if n == 2 and nz.size == 2 and abs(mod[0] - mod[1]) > REL_TOL * av.l1:
        raise E.DegenerateTwoPoint("two non-zero entries of unequal modulus cannot cancel")
    if not balanced(av):
        raise E.ConditionViolated(f"||a||_inf = {av.linf:g} exceeds ||a||_1/2 = {0.5 * av.l1:g}")
    if nz.size == 0:
        return theta
    order = nz[np.argsort(-mod[nz], kind="stable")]
    direction = np.zeros(n)
    if order.size == 2:
        j, jp = order
        if abs(mod[j] - mod[jp]) > REL_TOL * av.l1:
            raise E.DegenerateTwoPoint("two non-zero entries of unequal modulus cannot cancel")
        direction[j], direction[jp] = 0.0, math.pi
    else:
        # three collinear groups, each of total modulus <= half the sum (triangle
        # inequality): the largest entry alone, then the longest run of the next
        # entries that fits, then the rest
        half = 0.5 * av.l1 * (1.0 + REL_TOL)
        tail = mod[order[1:]]
        k = max(1, int(np.searchsorted(np.cumsum(tail), half, side="right")))
        j, second, rest = order[0], order[1:1 + k], order[1 + k:]
        b3, b2, b1 = mod[j], float(mod[second].sum()), float(mod[rest].sum())
        # u3 + u2 + u1 = 0 with u3 = b3 on the positive axis, u2 = b2 e^{i psi}
        cpsi = (b1 * b1 - b3 * b3 - b2 * b2) / (2.0 * b2 * b3)
        psi = math.acos(min(1.0, max(-1.0, cpsi)))
        u1 = -(b3 + b2 * complex(math.cos(psi), math.sin(psi)))
        g = math.atan2(u1.imag, u1.real) if rest.size else 0.0
        # rotate so that the last group points along the positive axis
        direction[j] = -g
        direction[second] = psi - g
        direction[rest] = 0.0
    theta[nz] = direction[nz] - np.angle(a[nz])
    return np.mod(theta, 2 * math.pi)


def build_orthogonal_minimizer(a, beta: float, n: int | None = None) -> np.ndarray:
    """Constructed orthogonal global minimizer (complex unit vector)."""
    av = as_rankone(a)
    n = av.n if n is None else int(n)
    ex = orthogonal_minimum_exists(av, beta, n)
    if ex.verdict == "BalancedPhases":
        th = zero_sum_phases(av)
        # sum exp(i th) a = 0  =>  sum conj(a) exp(-i th) = 0, i.e. a^* z = 0
        return np.exp(-1j * th) / math.sqrt(n)
    if ex.verdict == "SingleSpike":
        j = ex.detail["index"]
        z = np.full(n, 1.0 / math.sqrt(n - 1), dtype=complex)
        z[j] = 0.0
        return z
    raise E.NoOrthogonalMinimum("no orthogonal local minimum exists for this a and beta")


def make_consistent(a, z, beta: float | None = None, tol: float = 1e-8) -> np.ndarray:
    """Phase-normalize z so that conj(a_k) z_k is real (and z_k real where a_k = 0).

    If ``beta`` is given, stationarity of z for A = a a^* is verified first.
    """
    av = as_rankone(a)
    z = np.array(z, dtype=complex)
    if beta is not None:
        p = rankone_problem(av.a, beta)
        z = as_point(p, z)
        g = grad_norm(p, z)
        if g > tol:
            raise E.NotStationary(f"gradient norm {g:.3e} exceeds {tol:g}")
    s = np.vdot(av.a, z)  # a^* z
    if abs(s) > 0:
        z = z * (abs(s) / s)
    zero = av.a == 0
    z[zero] = np.abs(z[zero])
    return z


class RankOneSolution(NamedTuple):
    z: np.ndarray
    f_star: float
    mode: str  # "Orthogonal" | "ConsistentNumeric"


def reduced_problem(a, beta: float) -> Problem:
    """Real problem min 1/2 (sum |a_k| x_k)^2 + beta/2 ||x||_4^4 over the real sphere."""
    m = np.abs(as_rankone(a).a)
    return Problem(np.outer(m, m), beta, REAL)


def solve_rankone(a, beta: float, n: int | None = None, cfg=None, n_starts: int = 256) -> RankOneSolution:
    from .solve import SolverConfig, best_minimum, multistart

    av = as_rankone(a)
    n = av.n if n is None else int(n)
    if not beta > 0:
        raise E.NonPositiveBeta("beta must be positive")
    p = rankone_problem(av.a, beta)
    if n >= 2 and orthogonal_minimum_exists(av, beta, n):
        z = build_orthogonal_minimizer(av, beta, n)
        return RankOneSolution(z, objective(p, z), "Orthogonal")
    if n == 1:
        z = np.ones(1, dtype=complex)
        return RankOneSolution(z, objective(p, z), "ConsistentNumeric")
    cfg = cfg or SolverConfig()
    red = reduced_problem(av, beta)
    cat = multistart(red, n_starts, cfg, saddles=False, maxima=False)
    if not cat.points:
        raise E.SolverFailed("multistart produced no stationary point")
    x = best_minimum(cat).z
    z = x * np.exp(1j * np.angle(av.a))
    z = make_consistent(av, z)
    return RankOneSolution(z, objective(p, z), "ConsistentNumeric")
