"""Riemannian descent, Newton polishing and multistart critical-point catalogs.

All heavy lifting is vectorized over many starting points at once: points are
rows of an (m, N) array of real coordinates (see :class:`calculus.Realified`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import errors as E
from .calculus import Realified, _model, from_real, to_real, symmetric_distance
from .core import Problem, as_point, rng_from_seed

PLATEAU_GRAD = 1e-4
DESCENT_HANDOFF = 1e-8
CATALOG_GRAD = 1e-10
BASIN_GRAD = 1e-1
BASIN_CHECK = 50


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 5000
    grad_tol: float = 1e-10
    c1: float = 1e-4
    shrink: float = 0.5
    init_step: float = 1.0
    polish: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.c1 < 1:
            raise ValueError("armijo c1 must lie in (0, 1)")
        if not 0 < self.shrink < 1:
            raise ValueError("armijo shrink must lie in (0, 1)")
        if not self.grad_tol > 0 or not self.init_step > 0:
            raise ValueError("grad_tol and init_step must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")


# ---------------------------------------------------------------------------
# batched kernels

def _normalize(X):
    return X / np.linalg.norm(X, axis=-1, keepdims=True)


@dataclass
class _Descent:
    X: np.ndarray
    gnorm: np.ndarray
    iters: np.ndarray
    stalled: np.ndarray
    plateaus: np.ndarray  # rows recorded when the gradient first dipped below PLATEAU_GRAD
    plateau_f: np.ndarray
    history: list = field(default_factory=list)


ESCAPE_STEPS = (1e-3, 1e-2, 0.1, 0.3)


def _sfn(R: Realified, X, sign: float, cfg: SolverConfig, steps: int = 20):
    """Monotone saddle-free Newton on sign*f: steps -|H|^{-1} g (H the tangent
    form, phase direction excluded) with Armijo backtracking.

    Always a descent direction; Newton-fast inside convex basins and long
    strides along flat valleys.  Returns (X, gnorm).
    """
    X = np.array(X, dtype=float)
    for _ in range(steps):
        G = sign * R.rgrad(X)
        gn = R.gnorm(G)
        act = np.nonzero(gn > polish_tol(R.problem))[0]
        if act.size == 0:
            break
        w, V, scale = _tangent_eig(R, X[act], sign)
        floor = 1e-8 * scale[:, None]
        inv = 1.0 / np.maximum(np.abs(w), floor)
        Ga = G[act]
        P = -np.einsum("kij,kj,klj,kl->ki", V, inv, V, Ga)
        slope = np.sum(P * Ga, axis=1)
        t = np.ones(act.size)
        todo = np.arange(act.size)
        Y = X[act].copy()
        while todo.size:
            Yt = _normalize(X[act[todo]] + t[todo, None] * P[todo])
            dec = sign * R.df(X[act[todo]], Yt)
            ok = dec <= cfg.c1 * t[todo] * slope[todo]
            Y[todo[ok]] = Yt[ok]
            todo = todo[~ok]
            t[todo] *= cfg.shrink
            todo = todo[t[todo] >= 1e-12]
        X[act] = Y
    return X, R.gnorm(R.rgrad(X))


def _tangent_eig(R: Realified, X, sign: float):
    """Eigen-decomposition of the tangent form of sign*f with the normal (and
    phase) directions lifted to the top of the spectrum."""
    N = X.shape[1]
    M = sign * R.hess(X)
    B = X[:, :, None] * X[:, None, :]
    if R.cplx:
        J = R.phase_dir(X)
        B = B + J[:, :, None] * J[:, None, :]
    scale = 1.0 + np.max(np.abs(M), axis=(1, 2))
    P = np.eye(N)[None] - B
    Mp = P @ M @ P + 2.0 * scale[:, None, None] * B
    w, V = np.linalg.eigh(0.5 * (Mp + np.swapaxes(Mp, 1, 2)))
    return w, V, scale


def _basin_newton(R: Realified, Xa, sign: float, cfg: SolverConfig):
    """Accelerate near-stationary rows.

    Returns (done, X_new, gnorm_new): ``done`` rows sit at a strict local
    minimum of sign*f; the others were moved downhill (or left in place), and
    rows stuck on a saddle are pushed off along its most negative direction.
    """
    tol = polish_tol(R.problem)
    X, gn = _sfn(R, Xa, sign, cfg)
    w, V, scale = _tangent_eig(R, X, sign)
    lo, v = w[:, 0], V[:, :, 0]
    done = (gn <= tol) & (lo > 1e-8 * scale)
    sad = np.nonzero((gn <= 1e-8) & (lo < -1e-8 * scale))[0]
    if sad.size:
        best = X[sad].copy()
        best_d = np.zeros(sad.size)
        for t in ESCAPE_STEPS:
            for sg in (1.0, -1.0):
                Y = _normalize(X[sad] + sg * t * v[sad])
                dY = sign * R.df(X[sad], Y)
                better = dY < best_d
                best[better], best_d[better] = Y[better], dY[better]
        X[sad] = best
    return done, X, gn


def _descend(R: Realified, X0, cfg: SolverConfig, tol: float, sign: float = 1.0,
             record_plateaus: bool = False, history: bool = False,
             basin_check: int = 0) -> _Descent:
    """Armijo steepest descent of sign*f for every row of X0.

    With ``basin_check > 0``, every that many iterations rows with a small
    gradient take a burst of monotone saddle-free Newton steps; rows reaching a
    strict minimum are finished.  This keeps ill-conditioned minima, flat
    valleys and slowly repelling saddles from exhausting the iteration budget
    while preserving monotonicity of sign*f.
    """
    X = np.array(X0, dtype=float)
    m = X.shape[0]
    t = np.full(m, cfg.init_step)
    iters = np.zeros(m, dtype=int)
    stalled = np.zeros(m, dtype=bool)
    gn_out = np.zeros(m)
    snap = np.full_like(X, np.nan)
    snap_f = np.full(m, np.nan)
    have = np.zeros(m, dtype=bool)
    tried = np.full(m, np.inf)
    tried_at = np.zeros(m, dtype=int)
    hist = []
    idx = np.arange(m)
    for it in range(cfg.max_iters + 1):
        if idx.size == 0:
            break
        Xa = X[idx]
        G = sign * R.rgrad(Xa)
        gn = R.gnorm(G)
        gn_out[idx] = gn
        if history:
            hist.append(float(R.f(Xa[0])))
        if record_plateaus:
            new = (gn < PLATEAU_GRAD) & ~have[idx]
            if np.any(new):
                rows = idx[new]
                snap[rows] = Xa[new]
                snap_f[rows] = sign * R.f(Xa[new])
                have[rows] = True
        keep = (gn > tol) & (iters[idx] < cfg.max_iters)
        if basin_check and it and it % basin_check == 0:
            # retry a row once its gradient halved since its last failed attempt,
            # or after 10 check periods regardless
            retry = (gn <= 0.5 * tried[idx]) | (it - tried_at[idx] >= 10 * basin_check)
            cand = np.nonzero(keep & (gn <= BASIN_GRAD) & retry)[0]
            if cand.size:
                ok, Xn, gnn = _basin_newton(R, Xa[cand], sign, cfg)
                rows = cand[ok]
                gn_out[idx[rows]] = gnn[ok]
                keep[rows] = False
                X[idx[cand]] = Xn
                Xa[cand] = Xn
                G[cand] = sign * R.rgrad(Xn)
                fail = cand[~ok]
                tried[idx[fail]] = gn[fail]
                tried_at[idx[fail]] = it
        if not np.any(keep):
            break
        idx, Xa, G = idx[keep], Xa[keep], G[keep]
        g2 = np.sum(G * G, axis=1)
        ta = np.minimum(t[idx] / cfg.shrink, cfg.init_step)
        Y = np.empty_like(Xa)
        todo = np.arange(idx.size)
        bad = np.zeros(idx.size, dtype=bool)
        while todo.size:
            Yt = _normalize(Xa[todo] - ta[todo, None] * G[todo])
            dec = sign * R.df(Xa[todo], Yt)
            ok = dec <= -cfg.c1 * ta[todo] * g2[todo]
            Y[todo[ok]] = Yt[ok]
            todo = todo[~ok]
            ta[todo] *= cfg.shrink
            dead = ta[todo] < 1e-16
            if np.any(dead):
                bad[todo[dead]] = True
                Y[todo[dead]] = Xa[todo[dead]]
                todo = todo[~dead]
        X[idx] = Y
        t[idx] = ta
        iters[idx[~bad]] += 1
        stalled[idx[bad]] = True
        idx = idx[~bad]
    return _Descent(X, gn_out, iters, stalled, snap, snap_f, hist)


def _newton(R: Realified, X0, iters: int = 50, tol: float | None = None, step_cap: float | None = None):
    """Projected Newton on the stationarity system, batched.

    Solves the bordered system [[M, x, ix], [x^T, 0, 0], [ix^T, 0, 0]] for the
    tangent step (phase gauge row only for complex problems); steps use a
    truncated pseudo-inverse so degenerate points still make progress.
    Returns (X_best, gnorm_best, singular_flag).
    """
    X = np.array(X0, dtype=float)
    m, N = X.shape
    if tol is None:
        tol = polish_tol(R.problem)
    best = X.copy()
    G = R.rgrad(X)
    best_g = R.gnorm(G)
    singular = np.zeros(m, dtype=bool)
    b = 2 if R.cplx else 1
    for _ in range(iters):
        act = np.nonzero(best_g > tol)[0]
        if act.size == 0:
            break
        Xa = X[act]
        Ga = R.rgrad(Xa)
        M = R.hess(Xa)
        K = np.zeros((act.size, N + b, N + b))
        K[:, :N, :N] = 0.5 * (M + np.swapaxes(M, 1, 2))
        K[:, :N, N] = Xa
        K[:, N, :N] = Xa
        if R.cplx:
            J = R.phase_dir(Xa)
            K[:, :N, N + 1] = J
            K[:, N + 1, :N] = J
        rhs = np.zeros((act.size, N + b))
        rhs[:, :N] = -Ga
        U, s, Vt = np.linalg.svd(K)
        cut = s[:, :1] * 1e-14
        sinv = np.where(s > cut, 1.0 / np.where(s > cut, s, 1.0), 0.0)
        singular[act] = s[:, -1] <= s[:, 0] * 1e-14
        coef = np.einsum("kji,kj->ki", U, rhs) * sinv
        step = np.einsum("kji,kj->ki", Vt, coef)[:, :N]
        if step_cap is not None:
            sn = np.linalg.norm(step, axis=1)
            step *= np.minimum(1.0, step_cap / np.maximum(sn, 1e-300))[:, None]
        Xn = _normalize(Xa + step)
        X[act] = Xn
        gn = R.gnorm(R.rgrad(Xn))
        better = gn < best_g[act]
        rows = act[better]
        best[rows] = Xn[better]
        best_g[rows] = gn[better]
    return best, best_g, singular


def polish_tol(problem: Problem) -> float:
    """Target gradient norm for polishing: 1e-12, loosened to rounding level for large scales."""
    scale = float(np.max(np.abs(problem.A))) * problem.n + 2.0 * problem.beta
    return max(1e-12, 64 * np.finfo(float).eps * scale)


def random_sphere(rng: np.random.Generator, m: int, problem: Problem) -> np.ndarray:
    """m uniform points on the sphere, in real coordinates."""
    N = 2 * problem.n if problem.is_complex else problem.n
    return _normalize(rng.standard_normal((m, N)))


# ---------------------------------------------------------------------------
# single-point API

class DescentResult(NamedTuple):
    z: np.ndarray
    f: float
    grad_norm: float
    iters: int


def gradient_descent(problem: Problem, z0, cfg: SolverConfig | None = None,
                     return_history: bool = False):
    """Riemannian steepest descent with Armijo backtracking and retraction.

    Returns ``DescentResult(z, f, grad_norm, iters)``; with
    ``return_history`` also the list of objective values along the iterates.
    """
    cfg = cfg or SolverConfig()
    R = _model(problem)
    x0 = to_real(as_point(problem, z0))[None, :]
    res = _descend(R, x0, cfg, cfg.grad_tol, history=return_history)
    x, gn = res.X[0], float(res.gnorm[0])
    if res.stalled[0] and gn > cfg.grad_tol:
        # Armijo runs out of floating-point resolution near a critical point;
        # with polishing enabled, Newton finishes the job from inside the basin.
        if cfg.polish and gn <= PLATEAU_GRAD:
            X, gnp, _ = _newton(R, x[None, :], tol=polish_tol(problem))
            if gnp[0] <= max(cfg.grad_tol, polish_tol(problem)) and R.f(X[0]) <= R.f(x) + 1e-15 * (1 + abs(R.f(x))):
                x, gn = X[0], float(gnp[0])
        if gn > max(cfg.grad_tol, polish_tol(problem)):
            raise E.LineSearchStalled(f"Armijo step fell below 1e-16 at gradient norm {gn:.3e}")
    out = DescentResult(from_real(x, problem), float(R.f(x)), gn, int(res.iters[0]))
    return (out, res.history) if return_history else out


@dataclass(frozen=True)
class PolishResult:
    z: np.ndarray
    grad_norm: float
    converged: bool
    status: str  # "converged" | "no_convergence" | "singular"


def newton_polish(problem: Problem, z, cfg: SolverConfig | None = None, iters: int = 50) -> PolishResult:
    """Newton refinement of a near-stationary point (requires grad norm <= 1e-4)."""
    R = _model(problem)
    x = to_real(as_point(problem, z))[None, :]
    g0 = float(R.gnorm(R.rgrad(x))[0])
    if g0 > PLATEAU_GRAD:
        raise E.NotNearStationary(f"gradient norm {g0:.3e} exceeds the polishing basin 1e-4")
    tol = polish_tol(problem)
    X, gn, sing = _newton(R, x, iters=iters, tol=tol)
    ok = bool(gn[0] <= tol)
    if ok:
        status = "converged"
    elif sing[0]:
        status = "singular"
    else:
        status = "no_convergence"
    return PolishResult(from_real(X[0], problem), float(gn[0]), ok, status)


# ---------------------------------------------------------------------------
# catalogs

@dataclass(frozen=True)
class CatalogEntry:
    z: np.ndarray
    f: float
    grad_norm: float
    mu_min: float
    label: str      # certify label (StrictLocalMin / Saddle / Degenerate)
    kind: str       # "min" | "saddle" | "max" | "degenerate" (phase direction ignored)
    is_min: bool


@dataclass(frozen=True)
class CriticalCatalog:
    points: list
    n_stationary: int
    n_minima: int
    dedup_tol: float
    n_starts: int

    @property
    def minima(self):
        return [p for p in self.points if p.is_min]

    def counts(self) -> dict:
        out = {"min": 0, "saddle": 0, "max": 0, "degenerate": 0}
        for p in self.points:
            out[p.kind] += 1
        return out


def _sym_dist_rows(R: Realified, Y, x):
    if R.cplx:
        n = R.n
        yc = Y[:, :n] + 1j * Y[:, n:]
        xc = x[:n] + 1j * x[n:]
        return np.sqrt(np.maximum(0.0, 2.0 - 2.0 * np.abs(yc @ xc.conj())))
    return np.linalg.norm(Y - x[None, :], axis=1)


def _dedup(R: Realified, X, gn, tol):
    """Greedy clustering; keeps the smallest-gradient member of each cluster."""
    order = np.argsort(gn, kind="stable")
    X = X[order]
    reps = []
    alive = np.ones(len(X), dtype=bool)
    pos = 0
    while True:
        nz = np.nonzero(alive[pos:])[0]
        if nz.size == 0:
            break
        i = pos + nz[0]
        reps.append(X[i])
        d = _sym_dist_rows(R, X, X[i])
        alive &= d > tol
        pos = i + 1
    return np.array(reps).reshape(-1, X.shape[1])


def _merge(R, pool, new, tol):
    """Rows of ``new`` farther than tol from every row of ``pool``."""
    out = []
    for x in new:
        if pool.shape[0] and np.min(_sym_dist_rows(R, pool, x)) <= tol:
            continue
        out.append(x)
        pool = np.vstack([pool, x[None, :]])
    return pool, np.array(out).reshape(-1, R.N)


def _collect(R, X, tol_stat, polish_iters=50, step_cap=None):
    """Polish rows with small gradients; return the ones that became stationary."""
    if X.shape[0] == 0:
        return X
    gn = R.gnorm(R.rgrad(X))
    X = X[gn <= PLATEAU_GRAD] if step_cap is None else X
    if X.shape[0] == 0:
        return X
    Xp, g, _ = _newton(R, X, iters=polish_iters, step_cap=step_cap)
    return Xp[g <= tol_stat]


def _classify(problem, x, tol_psd):
    from .certify import certify_point
    from .calculus import projected_form

    z = from_real(x, problem)
    cert = certify_point(problem, z, tol_stat=CATALOG_GRAD * 10, tol_psd=tol_psd)
    mu, V = projected_form(problem, z, exclude_phase=problem.is_complex)
    lo = mu[0] if mu.size else math.inf
    hi = mu[-1] if mu.size else -math.inf
    if mu.size == 0:
        kind = "min"
    elif lo > tol_psd:
        kind = "min"
    elif hi < -tol_psd:
        kind = "max"
    elif lo < -tol_psd:
        kind = "saddle"
    else:
        kind = "degenerate"
    is_min = kind == "min"
    if kind == "degenerate":
        from .certify import brute_force_local_check
        is_min = brute_force_local_check(problem, z)
    return cert, kind, is_min, mu, V


def multistart(problem: Problem, n_starts: int, cfg: SolverConfig | None = None, *,
               saddles: bool = True, maxima: bool = True, extra_starts=None,
               dedup_tol: float = 1e-6, tol_psd: float = 1e-8, newton_starts: int = 2000,
               escape_rounds: int = 3) -> CriticalCatalog:
    """Catalog of stationary points found from ``n_starts`` random starts.

    Minima come from descent on f; with ``maxima`` also descent on -f; with
    ``saddles`` near-stationary plateaus met during descent are polished, up to
    ``newton_starts`` random starts are fed to a step-limited Newton iteration
    (which converges to stationary points of any index), and every saddle is
    escaped along its extreme curvature directions.
    """
    cfg = cfg or SolverConfig()
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    R = _model(problem)
    rng = rng_from_seed(cfg.seed)
    X0 = random_sphere(rng, n_starts, problem)
    if extra_starts is not None:
        ex = np.array([to_real(as_point(problem, z)) for z in extra_starts]).reshape(-1, R.N)
        X0 = np.vstack([ex, X0])
    tol_stat = CATALOG_GRAD
    handoff = max(DESCENT_HANDOFF, cfg.grad_tol)
    found = []

    def descend_collect(starts, sign):
        d = _descend(R, starts, cfg, handoff, sign=sign, record_plateaus=saddles,
                     basin_check=BASIN_CHECK)
        found.append(_collect(R, d.X, tol_stat))
        if saddles:
            rec = ~np.isnan(d.plateau_f)
            if np.any(rec):
                escaped = rec.copy()
                escaped[rec] = sign * R.f(d.X[rec]) < d.plateau_f[rec] - 1e-9
                found.append(_collect(R, d.plateaus[escaped], tol_stat))

    descend_collect(X0, 1.0)
    if maxima:
        descend_collect(X0, -1.0)
    if saddles and newton_starts > 0:
        k = min(newton_starts, X0.shape[0])
        found.append(_collect(R, X0[:k], tol_stat, polish_iters=80, step_cap=0.3))

    cand = np.vstack([f for f in found if f.size] or [np.zeros((0, R.N))])
    reps = _dedup(R, cand, R.gnorm(R.rgrad(cand)), dedup_tol) if cand.size else cand
    info = {}
    todo = reps
    for _ in range(escape_rounds if saddles or maxima else 0):
        restarts_min, restarts_max = [], []
        for x in todo:
            cert, kind, is_min, mu, V = _classify(problem, x, tol_psd)
            info[x.tobytes()] = (cert, kind, is_min)
            if mu.size and mu[0] < -tol_psd:
                for s in (1e-3, -1e-3):
                    restarts_min.append(_normalize(x + s * V[:, 0]))
            if maxima and mu.size and mu[-1] > tol_psd:
                for s in (1e-3, -1e-3):
                    restarts_max.append(_normalize(x + s * V[:, -1]))
        new_pts = []
        if restarts_min:
            d = _descend(R, np.array(restarts_min), cfg, handoff, 1.0, basin_check=BASIN_CHECK)
            new_pts.append(_collect(R, d.X, tol_stat))
        if restarts_max:
            d = _descend(R, np.array(restarts_max), cfg, handoff, -1.0, basin_check=BASIN_CHECK)
            new_pts.append(_collect(R, d.X, tol_stat))
        if not new_pts:
            break
        newX = np.vstack(new_pts)
        if newX.shape[0] == 0:
            break
        newX = _dedup(R, newX, R.gnorm(R.rgrad(newX)), dedup_tol)
        reps, todo = _merge(R, reps, newX, dedup_tol)
        if todo.shape[0] == 0:
            break

    entries = []
    for x in reps:
        key = x.tobytes()
        if key not in info:
            cert, kind, is_min, _, _ = _classify(problem, x, tol_psd)
        else:
            cert, kind, is_min = info[key]
        z = from_real(x, problem)
        entries.append(CatalogEntry(z, float(R.f(x)), cert.grad_norm, cert.mu_min,
                                    cert.label, kind, bool(is_min)))
    entries = sort_entries(entries)
    n_min = sum(e.is_min for e in entries)
    return CriticalCatalog(entries, len(entries), n_min, dedup_tol, int(X0.shape[0]))


def sort_entries(entries):
    def key(e):
        z = e.z
        return (round(e.f, 12), tuple(np.round(np.abs(z), 9)), tuple(np.round(np.real(z), 9)),
                tuple(np.round(np.imag(z), 9)) if np.iscomplexobj(z) else ())
    return sorted(entries, key=key)


def minima_gap(catalog: CriticalCatalog) -> float:
    """(max f - min f) / min f over the catalog's minima."""
    fs = [p.f for p in catalog.points if p.is_min]
    if not fs:
        raise E.EmptyCatalog("catalog contains no minima")
    lo, hi = min(fs), max(fs)
    if hi == lo:
        return 0.0
    return (hi - lo) / lo if lo != 0 else math.inf


def best_minimum(catalog: CriticalCatalog) -> CatalogEntry:
    mins = catalog.minima or catalog.points
    if not mins:
        raise E.SolverFailed("multistart produced no stationary point")
    return min(mins, key=lambda e: e.f)
