"""Objective, multiplier, Riemannian gradient and curvature forms.

Complex vectors are handled through their real coordinates x = (Re z; Im z)
whenever matrices are involved; the tangent space at z is the real hyperplane
Re(v^* z) = 0 (dimension n-1 or 2n-1).

Gradient norms follow a per-field convention: ||g|| for real problems and
||g||/sqrt(2) for complex problems (stacked Wirtinger normalization).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import errors as E
from .core import Problem, as_point

TANGENT_TOL = 1e-10


# ---------------------------------------------------------------------------
# real coordinates

def to_real(z) -> np.ndarray:
    z = np.asarray(z)
    if np.iscomplexobj(z):
        return np.concatenate([z.real, z.imag], axis=-1)
    return z.astype(float)


def from_real(x, problem: Problem) -> np.ndarray:
    x = np.asarray(x)
    if problem.is_complex:
        n = problem.n
        return x[..., :n] + 1j * x[..., n:]
    return x


def realify_matrix(K: np.ndarray) -> np.ndarray:
    """Real 2n x 2n matrix of v -> Re(v^* K v) for Hermitian K."""
    K = np.asarray(K)
    if not np.iscomplexobj(K):
        K = K.astype(complex)
    return np.block([[K.real, -K.imag], [K.imag, K.real]])


def orth_complement(V: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the orthogonal complement of span(V)."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if V.shape[0] == 1 and V.shape[1] > 1:
        V = V.T
    Q, _ = np.linalg.qr(V, mode="complete")
    return Q[:, V.shape[1]:]


class Realified:
    """Batched evaluation of f and its derivatives in real coordinates.

    Rows of ``X`` (shape (m, N)) are points; N = n or 2n.
    """

    def __init__(self, problem: Problem):
        self.problem = problem
        self.n = problem.n
        self.cplx = problem.is_complex
        self.N = 2 * self.n if self.cplx else self.n
        self.beta = problem.beta
        self.Ar = realify_matrix(problem.A) if self.cplx else np.array(problem.A, dtype=float)

    def moduli(self, X):
        X = np.asarray(X)
        if self.cplx:
            n = self.n
            return X[..., :n] ** 2 + X[..., n:] ** 2
        return X ** 2

    def ext(self, m):
        return np.concatenate([m, m], axis=-1) if self.cplx else m

    def f(self, X):
        X = np.asarray(X)
        m = self.moduli(X)
        quad = np.einsum("...i,...i->...", X @ self.Ar, X)
        return 0.5 * quad + 0.5 * self.beta * np.sum(m * m, axis=-1)

    def df(self, X, Y):
        """f(Y) - f(X) without catastrophic cancellation."""
        X = np.asarray(X)
        return self.df_step(X, np.asarray(Y) - X)

    def df_step(self, X, D):
        """f(X + D) - f(X), accurate when D is small."""
        X = np.asarray(X)
        D = np.asarray(D)
        S = 2.0 * X + D
        quad = 0.5 * np.einsum("...i,...i->...", D @ self.Ar, S)
        P = D * S
        if self.cplx:
            n = self.n
            dm = P[..., :n] + P[..., n:]
        else:
            dm = P
        sm = 2.0 * self.moduli(X) + dm
        return quad + 0.5 * self.beta * np.sum(dm * sm, axis=-1)

    def egrad(self, X):
        X = np.asarray(X)
        return X @ self.Ar + 2.0 * self.beta * self.ext(self.moduli(X)) * X

    def lam(self, X):
        X = np.asarray(X)
        return 0.5 * np.sum(X * self.egrad(X), axis=-1)

    def rgrad(self, X):
        X = np.asarray(X)
        G = self.egrad(X)
        c = np.sum(X * G, axis=-1)
        return G - c[..., None] * X

    def gnorm(self, G):
        nrm = np.linalg.norm(G, axis=-1)
        return nrm / math.sqrt(2.0) if self.cplx else nrm

    def hess(self, X):
        """Realified tangent form M (Euclidean Hessian minus 2*lambda*I)."""
        X = np.asarray(X)
        single = X.ndim == 1
        X2 = np.atleast_2d(X)
        m_, N = X2.shape
        lam = self.lam(X2)
        M = np.broadcast_to(self.Ar, (m_, N, N)).copy()
        d = 2.0 * self.beta * self.ext(self.moduli(X2)) - 2.0 * lam[:, None]
        idx = np.arange(N)
        M[:, idx, idx] += d
        b4 = 4.0 * self.beta
        if self.cplx:
            n = self.n
            xr, xi = X2[:, :n], X2[:, n:]
            k = np.arange(n)
            M[:, k, k] += b4 * xr * xr
            M[:, n + k, n + k] += b4 * xi * xi
            M[:, k, n + k] += b4 * xr * xi
            M[:, n + k, k] += b4 * xr * xi
        else:
            M[:, idx, idx] += b4 * X2 * X2
        return M[0] if single else M

    def phase_dir(self, X):
        """Real coordinates of i*z (zero for real problems)."""
        if not self.cplx:
            return np.zeros_like(X)
        n = self.n
        return np.concatenate([-X[..., n:], X[..., :n]], axis=-1)


def _model(problem: Problem) -> Realified:
    cache = problem._spec
    if "realified" not in cache:
        cache["realified"] = Realified(problem)
    return cache["realified"]


# ---------------------------------------------------------------------------
# scalar quantities

def objective(problem: Problem, z) -> float:
    z = as_point(problem, z)
    return float(_model(problem).f(to_real(z)))


def multiplier(problem: Problem, z) -> float:
    """lambda with 2*lambda = z^* A z + 2 beta ||z||_4^4."""
    z = as_point(problem, z)
    return float(_model(problem).lam(to_real(z)))


def riemannian_grad(problem: Problem, y):
    """(g, norm) with g = ghat - Re(y^* ghat) y, ghat = (A + 2 beta diag|y|^2) y."""
    y = as_point(problem, y)
    R = _model(problem)
    G = R.rgrad(to_real(y))
    return from_real(G, problem), float(R.gnorm(G))


def grad_norm(problem: Problem, y) -> float:
    return riemannian_grad(problem, y)[1]


def certification_matrix(problem: Problem, z) -> np.ndarray:
    """H = A + 2 beta diag(|z|^2) - 2 lambda I."""
    z = as_point(problem, z)
    lam = multiplier(problem, z)
    return problem.A + np.diag(2.0 * problem.beta * np.abs(z) ** 2 - 2.0 * lam)


# ---------------------------------------------------------------------------
# tangent geometry

def tangent_project(z, u) -> np.ndarray:
    z = np.asarray(z)
    u = np.asarray(u)
    return u - np.real(np.vdot(z, u)) * z


def _as_tangent(problem: Problem, z, v, name="v") -> np.ndarray:
    v = np.array(v)
    if v.shape != (problem.n,):
        raise E.DimensionMismatch(f"{name} has shape {v.shape}, expected ({problem.n},)")
    if np.iscomplexobj(v) and not problem.is_complex:
        if np.any(v.imag != 0):
            raise E.FieldMismatch(f"complex {name} on a real problem")
        v = v.real
    v = v.astype(problem.dtype)
    nrm = np.linalg.norm(v)
    if abs(nrm - 1.0) > TANGENT_TOL:
        raise E.NotUnit(f"{name} has norm {nrm!r}")
    if abs(np.real(np.vdot(z, v))) > TANGENT_TOL:
        raise E.NotTangent(f"{name} is not tangent at z (Re<z,{name}> = {np.real(np.vdot(z, v)):.3e})")
    v = tangent_project(z, v)
    return v / np.linalg.norm(v)


def retract(z, step) -> np.ndarray:
    y = np.asarray(z) + np.asarray(step)
    nrm = np.linalg.norm(y)
    if nrm == 0 or not np.isfinite(nrm):
        raise E.ZeroVector("z + step vanishes")
    return y / nrm


def geodesic(z, v, t: float) -> np.ndarray:
    z = np.asarray(z)
    v = np.asarray(v)
    if abs(np.linalg.norm(v) - 1.0) > TANGENT_TOL:
        raise E.NotUnit("geodesic direction must be a unit vector")
    if abs(np.real(np.vdot(z, v))) > TANGENT_TOL:
        raise E.NotTangent("geodesic direction must be tangent at z")
    return math.cos(t) * z + math.sin(t) * v


def equivalence_distance(y, z) -> float:
    """||(|y|^2 - |z|^2)||_2; zero iff y and z have equal moduli."""
    return float(np.linalg.norm(np.abs(np.asarray(y)) ** 2 - np.abs(np.asarray(z)) ** 2))


def symmetric_distance(y, z) -> float:
    """Distance modulo the problem's symmetry: ||y - z|| (real), sqrt(2 - 2|y^* z|) (complex)."""
    y = np.asarray(y)
    z = np.asarray(z)
    if np.iscomplexobj(y) or np.iscomplexobj(z):
        return math.sqrt(max(0.0, 2.0 - 2.0 * abs(np.vdot(y, z))))
    return float(np.linalg.norm(y - z))


# ---------------------------------------------------------------------------
# curvature

@dataclass(frozen=True)
class CurvatureReport:
    hf: float
    h3: float
    h4: float
    h3pair: float | None = None


def _re_inner(z, v):
    """Componentwise Re(conj(z_k) v_k)."""
    return np.real(np.conj(z) * v)


def h3_form(beta, z, v):
    return beta * np.sum((np.abs(v) ** 2 - np.abs(z) ** 2) * _re_inner(z, v), axis=-1)


def h4_form(beta, z, v):
    c = _re_inner(z, v)
    return beta * np.sum((np.abs(v) ** 2 - np.abs(z) ** 2) ** 2 - 4.0 * c * c, axis=-1)


def hf_form(problem: Problem, z, v, lam=None):
    if lam is None:
        lam = multiplier(problem, z)
    Av = v @ problem.A.T
    quad = np.real(np.sum(np.conj(v) * Av, axis=-1))
    b = problem.beta
    return (quad + np.sum((2 * b * np.abs(z) ** 2 - 2 * lam) * np.abs(v) ** 2, axis=-1)
            + 4 * b * np.sum(_re_inner(z, v) ** 2, axis=-1))


def h3pair_form(beta, z, v, w):
    return h3_form(beta, z, v) + 2 * beta * np.sum(_re_inner(v, w) * _re_inner(v, z), axis=-1)


def curvature_forms(problem: Problem, z, v, w=None) -> CurvatureReport:
    z = as_point(problem, z)
    v = _as_tangent(problem, z, v)
    b = problem.beta
    hf = float(hf_form(problem, z, v))
    h3 = float(h3_form(b, z, v))
    h4 = float(h4_form(b, z, v))
    pair = None
    if w is not None:
        w = _as_tangent(problem, z, w, "w")
        pair = float(h3pair_form(b, z, v, w))
    return CurvatureReport(hf, h3, h4, pair)


def require_stationary(problem: Problem, z, tol: float = 1e-8) -> float:
    g = grad_norm(problem, z)
    if g > tol:
        raise E.NotStationary(f"gradient norm {g:.3e} exceeds {tol:g}")
    return g


def g_poly(problem: Problem, z, v):
    """Coefficients (a2, a1, a0) of G(v, t) = a2 t^2 + a1 t + a0 at a stationary z."""
    z = as_point(problem, z)
    require_stationary(problem, z)
    v = _as_tangent(problem, z, v)
    rep = curvature_forms(problem, z, v)
    R = _model(problem)
    a0 = 2.0 * float(R.df(to_real(z), to_real(v)))
    return rep.hf, 4.0 * rep.h3, a0


# ---------------------------------------------------------------------------
# realified form and its tangent spectrum

@dataclass(frozen=True)
class RealifiedTangentForm:
    M: np.ndarray
    normal: np.ndarray


def realified_tangent_form(problem: Problem, z) -> RealifiedTangentForm:
    z = as_point(problem, z)
    x = to_real(z)
    M = _model(problem).hess(x)
    return RealifiedTangentForm(0.5 * (M + M.T), x)


def tangent_basis(problem: Problem, z, exclude_phase: bool = False) -> np.ndarray:
    """Orthonormal real basis (columns) of the tangent space at z.

    With ``exclude_phase`` the phase direction i*z is removed as well
    (complex problems only).
    """
    x = to_real(as_point(problem, z))
    V = [x]
    if exclude_phase and problem.is_complex:
        V.append(_model(problem).phase_dir(x))
    return orth_complement(np.stack(V, axis=1))


def projected_form(problem: Problem, z, exclude_phase: bool = False):
    """Eigen-decomposition of Q^T M Q: (eigenvalues ascending, real tangent eigenvectors)."""
    form = realified_tangent_form(problem, z)
    Q = tangent_basis(problem, z, exclude_phase)
    if Q.shape[1] == 0:
        return np.zeros(0), np.zeros((Q.shape[0], 0))
    try:
        mu, U = np.linalg.eigh(Q.T @ form.M @ Q)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise E.EigSolverFailure(str(exc)) from exc
    return mu, Q @ U


def tangent_min_curvature(problem: Problem, z, exclude_phase: bool = False):
    """(mu_min, v_min): exact minimum of H_f(z)[v] over tangent unit v."""
    z = as_point(problem, z)
    mu, V = projected_form(problem, z, exclude_phase)
    if mu.size == 0:
        return math.inf, np.zeros_like(z)
    v = from_real(V[:, 0], problem)
    return float(mu[0]), v / np.linalg.norm(v)
