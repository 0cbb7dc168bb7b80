"""Optimality certificates: first/second order, fourth order, global, and a
brute-force neighbourhood oracle.

Fourth-order and global verdicts quantify over unit spheres of tangent
subspaces.  A *Fail* verdict is always backed by an explicit witness; a *Pass*
means no violation was found by the search (exhaustive grid when the searched
sphere is a circle or a point pair, random multistart plus local refinement
otherwise).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import errors as E
from .calculus import (
    _model, from_real, h3_form, h4_form, hf_form, multiplier, orth_complement,
    projected_form, require_stationary, to_real,
)
from .core import Problem, as_point, rng_from_seed


# ---------------------------------------------------------------------------
# second order and the global certificate

@dataclass(frozen=True)
class StationaryCertificate:
    grad_norm: float
    lam: float
    mu_min: float
    label: str          # StrictLocalMin | Saddle | Degenerate | NotStationary
    global_ok: str      # Certified | Refuted | NotApplicable
    h_min_eig: float
    v_min: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "grad_norm": self.grad_norm, "lambda": self.lam, "mu_min": self.mu_min,
            "label": self.label, "global_ok": self.global_ok, "h_min_eig": self.h_min_eig,
        }


def certify_point(problem: Problem, z, tol_stat: float = 1e-8, tol_psd: float = 1e-8) -> StationaryCertificate:
    z = as_point(problem, z)
    R = _model(problem)
    x = to_real(z)
    gn = float(R.gnorm(R.rgrad(x)))
    lam = float(R.lam(x))
    mu, V = projected_form(problem, z)
    mu_min = float(mu[0]) if mu.size else math.inf
    v_min = from_real(V[:, 0], problem) if mu.size else np.zeros_like(z)
    H = problem.A + np.diag(2.0 * problem.beta * np.abs(z) ** 2 - 2.0 * lam)
    h_min = float(np.linalg.eigvalsh(H)[0])
    if gn > tol_stat:
        label, glob = "NotStationary", "NotApplicable"
    else:
        if mu_min > tol_psd:
            label = "StrictLocalMin"
        elif mu_min < -tol_psd:
            label = "Saddle"
        else:
            label = "Degenerate"
        glob = "Certified" if h_min >= -tol_psd else "Refuted"
    return StationaryCertificate(gn, lam, mu_min, label, glob, h_min, v_min)


def global_certificate(problem: Problem, z, tol_psd: float = 1e-8) -> bool:
    """True iff H = A + 2 beta diag|z|^2 - 2 lambda I is PSD within tol_psd."""
    return certify_point(problem, z, tol_stat=math.inf, tol_psd=tol_psd).global_ok == "Certified"


# ---------------------------------------------------------------------------
# fourth order

@dataclass(frozen=True)
class FourthOrderConfig:
    eps_null: float = 1e-6
    n_samples: int = 512
    polish_iters: int = 200
    seed: int = 0
    margin: float | None = None
    grid: int = 10_000
    tol_stat: float = 1e-8

    def margin_for(self, beta: float) -> float:
        return self.margin if self.margin is not None else 1e-7 * (1.0 + beta)


@dataclass(frozen=True)
class FourthOrderVerdict:
    kind: str  # NecessaryPass | NecessaryFail | SufficientPass | SufficientInconclusive | GlobalPass | GlobalFail
    witness: dict | None
    null_dim: int
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.kind.endswith("Pass")

    def to_dict(self) -> dict:
        w = None
        if self.witness is not None:
            w = {k: (_vec_dict(v) if isinstance(v, np.ndarray) else v) for k, v in self.witness.items()}
        return {"kind": self.kind, "null_dim": self.null_dim, "witness": w, "detail": dict(self.detail)}


def _vec_dict(v):
    v = np.asarray(v)
    return {"re": np.real(v).tolist(), "im": (np.imag(v) if np.iscomplexobj(v) else np.zeros(len(v))).tolist()}


def _sphere_search(fun, d: int, rng, n_samples: int, iters: int, grid: int, extra=None):
    """Approximate maximizer of a vectorized ``fun(C)`` over unit rows C in R^d.

    Returns (C_all, values, c_best, v_best) where C_all are all evaluated rows.
    """
    if d == 1:
        C = np.array([[1.0], [-1.0]])
    elif d == 2:
        ang = np.linspace(0.0, 2 * np.pi, grid, endpoint=False)
        C = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    else:
        C = rng.standard_normal((n_samples, d))
        C /= np.linalg.norm(C, axis=1, keepdims=True)
        C = np.vstack([C, np.eye(d), -np.eye(d)])
    if extra is not None and len(extra):
        E_ = np.asarray(extra, dtype=float).reshape(-1, d)
        nrm = np.linalg.norm(E_, axis=1)
        E_ = E_[nrm > 0] / nrm[nrm > 0, None]
        C = np.vstack([C, E_])
    vals = fun(C)
    if d >= 2:
        top = np.argsort(-vals)[: min(8, len(vals))]
        polished = []
        for i in top:
            def neg(c):
                c = c / np.linalg.norm(c)
                return -float(fun(c[None, :])[0])
            res = minimize(neg, C[i], method="L-BFGS-B", options={"maxiter": iters})
            c = res.x / np.linalg.norm(res.x)
            polished.append(c)
        P = np.array(polished)
        C = np.vstack([C, P])
        vals = np.concatenate([vals, fun(P)])
    k = int(np.argmax(vals))
    return C, vals, C[k], float(vals[k])


class _FourthOrder:
    """Shared machinery: projected form, nullspace and the pair-inequality."""

    def __init__(self, problem: Problem, z, cfg: FourthOrderConfig):
        self.problem = problem
        self.cfg = cfg
        self.z = as_point(problem, z)
        require_stationary(problem, self.z, cfg.tol_stat)
        self.beta = problem.beta
        self.margin = cfg.margin_for(problem.beta)
        self.R = _model(problem)
        self.lam = multiplier(problem, self.z)
        mu, V = projected_form(problem, self.z)
        self.mu, self.V = mu, V
        scale = float(np.max(np.abs(mu))) if mu.size else 0.0
        self.thr = cfg.eps_null * scale if scale > 0 else cfg.eps_null
        null = np.abs(mu) <= self.thr
        self.N = V[:, null]
        self.P = V[:, mu > self.thr]
        self.D = mu[mu > self.thr]
        self.rng = rng_from_seed(cfg.seed)
        self.small = (not problem.is_complex) and problem.n <= 3

    @property
    def null_dim(self):
        return self.N.shape[1]

    def vecs(self, C, B):
        return from_real(C @ B.T, self.problem)

    # quantities on the null sphere ------------------------------------------------
    def h3(self, C):
        return h3_form(self.beta, self.z, self.vecs(C, self.N))

    def h4(self, C):
        return h4_form(self.beta, self.z, self.vecs(C, self.N))

    def _pair_data(self, C):
        """For each null direction v: (ell in P-coords, constraint vector or None)."""
        v = self.vecs(C, self.N)
        ell = 2.0 * self.beta * to_real(v * np.real(np.conj(v) * self.z))
        Lc = ell @ self.P
        if self.problem.is_complex:
            J = self.R.phase_dir(to_real(v)) @ self.P
        else:
            J = None
        return v, Lc, J

    def pair_unit(self, C):
        """max over unit w in W(v) of 4 (ell.w)^2 - hf(w) H4(v)."""
        if self.P.shape[1] == 0:
            return np.full(len(C), -np.inf)
        _, Lc, J = self._pair_data(C)
        h4 = self.h4(C)
        Mv = 4.0 * Lc[:, :, None] * Lc[:, None, :] - h4[:, None, None] * np.diag(self.D)[None]
        if J is not None:
            Mv = _restrict(Mv, J)
        return np.linalg.eigvalsh(Mv)[:, -1]

    def pair_witness(self, c):
        _, Lc, J = self._pair_data(c[None, :])
        h4 = self.h4(c[None, :])[0]
        Mv = 4.0 * np.outer(Lc[0], Lc[0]) - h4 * np.diag(self.D)
        if J is not None:
            Q = orth_complement(J[0][:, None])
            w_c = Q @ np.linalg.eigh(Q.T @ Mv @ Q)[1][:, -1]
        else:
            w_c = np.linalg.eigh(Mv)[1][:, -1]
        return from_real(self.P @ w_c, self.problem)

    def pair_ratio(self, C):
        """sup over w in W(v) of 4 (ell.w)^2 / hf(w)."""
        if self.P.shape[1] == 0:
            return np.zeros(len(C))
        _, Lc, J = self._pair_data(C)
        Lt = Lc / np.sqrt(self.D)
        if J is not None:
            Jt = J / np.sqrt(self.D)
            jn = np.sum(Jt * Jt, axis=1)
            coef = np.where(jn > 0, np.sum(Lt * Jt, axis=1) / np.where(jn > 0, jn, 1.0), 0.0)
            Lt = Lt - coef[:, None] * Jt
        return 4.0 * np.sum(Lt * Lt, axis=1)

    def search(self, fun, extra=None):
        return _sphere_search(fun, self.null_dim, self.rng, self.cfg.n_samples,
                              self.cfg.polish_iters, self.cfg.grid, extra)


def _restrict(Mv, J):
    """Restrict each symmetric matrix in the stack to the complement of its J row."""
    out = []
    for M, j in zip(Mv, J):
        if np.linalg.norm(j) == 0:
            out.append(M)
            continue
        Q = orth_complement(j[:, None])
        out.append(Q.T @ M @ Q)
    return np.array(out)


def _necessary(fo: _FourthOrder):
    """Returns (ok, witness, detail, candidate rows)."""
    m = fo.margin
    detail = {"mu_min": float(fo.mu[0]) if fo.mu.size else math.inf, "null_threshold": fo.thr, "margin": m}
    if fo.mu.size and fo.mu[0] < -fo.thr:
        v = from_real(fo.V[:, 0], fo.problem)
        hf = float(hf_form(fo.problem, fo.z, v, fo.lam))
        return False, {"condition": "second_order", "v": v, "hf": hf}, detail, None
    if fo.null_dim == 0:
        return True, None, detail, None
    C3, a3, c3, best3 = fo.search(lambda C: np.abs(fo.h3(C)))
    detail["max_abs_h3"] = best3
    if best3 > m:
        v = fo.vecs(c3[None, :], fo.N)[0]
        return False, {"condition": "third_order", "v": v, "h3": float(h3_form(fo.beta, fo.z, v))}, detail, None
    C4, a4, c4, best4 = fo.search(lambda C: -fo.h4(C))
    detail["min_h4"] = -best4
    if -best4 < -m:
        v = fo.vecs(c4[None, :], fo.N)[0]
        return False, {"condition": "fourth_order", "v": v, "h4": float(h4_form(fo.beta, fo.z, v))}, detail, None
    Cp, ap, cp, bestp = fo.search(fo.pair_unit, extra=np.vstack([c3, c4]))
    detail["max_pair_violation"] = bestp
    if bestp > m:
        v = fo.vecs(cp[None, :], fo.N)[0]
        w = fo.pair_witness(cp)
        w = w / np.linalg.norm(w)
        h3p = float(h3_form(fo.beta, fo.z, v) + 2 * fo.beta * np.sum(np.real(np.conj(v) * w) * np.real(np.conj(v) * fo.z)))
        hfw = float(hf_form(fo.problem, fo.z, w, fo.lam))
        h4v = float(h4_form(fo.beta, fo.z, v))
        return False, {"condition": "pair", "v": v, "w": w, "h3pair": h3p, "hf_w": hfw, "h4": h4v,
                       "violation": 4 * h3p ** 2 - hfw * h4v}, detail, None
    cands = np.vstack([C3, C4, Cp])
    return True, None, detail, cands


def fourth_order_necessary(problem: Problem, z, cfg: FourthOrderConfig | None = None) -> FourthOrderVerdict:
    fo = _FourthOrder(problem, z, cfg or FourthOrderConfig())
    ok, wit, detail, _ = _necessary(fo)
    return FourthOrderVerdict("NecessaryPass" if ok else "NecessaryFail", wit, fo.null_dim, detail)


def fourth_order_sufficient(problem: Problem, z, cfg: FourthOrderConfig | None = None) -> FourthOrderVerdict:
    """Sufficient fourth-order test; never claims non-minimality."""
    fo = _FourthOrder(problem, z, cfg or FourthOrderConfig())
    ok, wit, detail, cands = _necessary(fo)
    if not ok:
        detail["reason"] = "necessary conditions fail"
        return FourthOrderVerdict("SufficientInconclusive", wit, fo.null_dim, detail)
    if fo.mu.size and fo.mu[0] <= fo.thr and fo.null_dim == 0:
        # eigenvalues between -thr and thr are classed as null, so this cannot happen
        pass  # pragma: no cover
    if fo.null_dim == 0:
        return FourthOrderVerdict("SufficientPass", None, 0, detail)
    m = fo.margin
    Cs, vals, c_s, _ = fo.search(lambda C: fo.pair_ratio(C) - fo.h4(C), extra=cands)
    C = np.vstack([cands, Cs])
    q = fo.pair_ratio(C)
    h4 = fo.h4(C)
    strict = (h4 > m) & (q < h4 - m)
    equal = (h4 <= m) & (q <= m)
    good = strict | equal
    detail["boundary_directions"] = int(np.sum(~good))
    if np.all(good):
        return FourthOrderVerdict("SufficientPass", None, fo.null_dim, detail)
    k = int(np.argmax(~good))
    v = fo.vecs(C[k][None, :], fo.N)[0]
    return FourthOrderVerdict("SufficientInconclusive", {"condition": "strictness", "v": v,
                                                         "h4": float(h4[k]), "ratio": float(q[k])},
                              fo.null_dim, detail)


def _tangent_candidates(fo: _FourthOrder, d: int):
    """Seed directions in tangent-basis coordinates: eigenvectors and projected coordinate axes."""
    Q = fo.V  # eigenbasis of the projected form (orthonormal tangent basis)
    extra = [np.eye(d)]
    E_ = np.eye(fo.R.N)
    extra.append(E_ @ Q)
    return np.vstack(extra)


def global_fourth_order(problem: Problem, z, cfg: FourthOrderConfig | None = None) -> FourthOrderVerdict:
    """Search for a tangent v with G(v, t) < 0 for some t (global optimality test)."""
    cfg = cfg or FourthOrderConfig()
    fo = _FourthOrder(problem, z, cfg)
    m = fo.margin
    detail = {"margin": m, "mu_min": float(fo.mu[0]) if fo.mu.size else math.inf}
    if fo.mu.size and fo.mu[0] < -fo.thr:
        v = from_real(fo.V[:, 0], problem)
        return FourthOrderVerdict("GlobalFail", {"condition": "second_order", "v": v,
                                                 "hf": float(fo.mu[0])}, fo.null_dim, detail)
    Q = fo.V
    d = Q.shape[1]
    if d == 0:
        return FourthOrderVerdict("GlobalPass", None, 0, detail)
    xz = to_real(fo.z)

    def viol(C):
        v = from_real(C @ Q.T, problem)
        hf = hf_form(problem, fo.z, v, fo.lam)
        h3 = h3_form(fo.beta, fo.z, v)
        dfv = fo.R.df(xz[None, :], to_real(v))
        return 2.0 * h3 ** 2 - hf * dfv

    C, vals, c, best = _sphere_search(viol, d, fo.rng, cfg.n_samples, cfg.polish_iters, cfg.grid,
                                      extra=_tangent_candidates(fo, d))
    detail["max_violation"] = best
    if best > m:
        v = from_real(Q @ c, problem)
        hf = float(hf_form(problem, fo.z, v, fo.lam))
        h3 = float(h3_form(fo.beta, fo.z, v))
        dfv = float(fo.R.df(xz, to_real(v)))
        return FourthOrderVerdict("GlobalFail", {"condition": "discriminant", "v": v, "hf": hf, "h3": h3,
                                                 "f_v_minus_f_z": dfv, "violation": 2 * h3 ** 2 - hf * dfv},
                                  fo.null_dim, detail)
    if fo.null_dim:
        ok, wit, nd, _ = _necessary(fo)
        detail.update(nd)
        if not ok:
            return FourthOrderVerdict("GlobalFail", wit, fo.null_dim, detail)
    return FourthOrderVerdict("GlobalPass", None, fo.null_dim, detail)


# ---------------------------------------------------------------------------
# brute force

@dataclass(frozen=True)
class BruteForceResult:
    ok: bool
    min_decrease: float
    xi: np.ndarray


def brute_force_search(problem: Problem, z, radius: float = 1e-3, samples: int = 20_000,
                       seed: int = 0, grid: int = 10_000) -> BruteForceResult:
    """Smallest f(retract(z, xi)) - f(z) over sampled tangent steps with ||xi|| <= radius.

    Real problems with n <= 3 use a dense grid of directions times radii
    instead of random samples.
    """
    z = as_point(problem, z)
    R = _model(problem)
    x = to_real(z)
    Q = orth_complement(x[:, None])
    d = Q.shape[1]
    if d == 0:
        return BruteForceResult(True, 0.0, np.zeros_like(z))
    if not problem.is_complex and problem.n <= 3:
        if d == 1:
            C = np.array([[1.0], [-1.0]])
        else:
            ang = np.linspace(0.0, 2 * np.pi, grid, endpoint=False)
            C = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        radii = radius * np.linspace(0.05, 1.0, 20)
        steps = (C[:, None, :] * radii[None, :, None]).reshape(-1, d)
    else:
        rng = rng_from_seed(seed)
        C = rng.standard_normal((samples, d))
        C /= np.linalg.norm(C, axis=1, keepdims=True)
        r = radius * rng.uniform(0.0, 1.0, samples)
        steps = C * r[:, None]
    Xi = steps @ Q.T
    Y = x[None, :] + Xi
    Y /= np.linalg.norm(Y, axis=1, keepdims=True)
    dfs = R.df(np.broadcast_to(x, Y.shape), Y)
    k = int(np.argmin(dfs))
    return BruteForceResult(bool(dfs[k] >= -1e-12), float(dfs[k]), from_real(Xi[k], problem))


def brute_force_local_check(problem: Problem, z, radius: float = 1e-3, samples: int = 20_000,
                            seed: int = 0) -> bool:
    """True iff no sampled nearby point lowers f by more than 1e-12."""
    return brute_force_search(problem, z, radius, samples, seed).ok
