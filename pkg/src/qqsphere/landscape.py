"""Strict-saddle regions, thresholds, negative-curvature directions, the
degenerate-saddle counterexample, and empirical KL-exponent estimates.

Region tests apply to real problems.  Large-beta regions are defined through
the moduli |z_k|^2, small-beta regions through eigen-coordinates alpha = P^T z
(alpha_n belongs to the smallest eigenvalue).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import errors as E
from .calculus import (
    _model, from_real, grad_norm, hf_form, orth_complement, projected_form,
    tangent_min_curvature, to_real,
)
from .core import Problem, REAL, as_point, rng_from_seed, spectrum

LARGE = "LargeBeta"
SMALL = "SmallBeta"


def _regime(regime) -> str:
    key = str(regime).strip().lower()
    if key in ("large", "largebeta", "large-beta", "large_beta"):
        return LARGE
    if key in ("small", "smallbeta", "small-beta", "small_beta"):
        return SMALL
    raise ValueError(f"unknown regime {regime!r}")


def _real_only(problem: Problem):
    if problem.is_complex:
        raise E.ComplexNotSupported("strict-saddle regions are defined for real problems")


# ---------------------------------------------------------------------------
# thresholds

@dataclass(frozen=True)
class Thresholds:
    beta_large: float
    beta_small: float | None   # None when the spectral gap vanishes
    beta_count_lower: float
    beta_count_exact: float
    gamma: float

    def to_dict(self):
        return {"beta_large": self.beta_large, "beta_small": self.beta_small,
                "beta_count_lower": self.beta_count_lower,
                "beta_count_exact": self.beta_count_exact, "gamma": self.gamma}


def beta_small_threshold(rho: float, delta: float, gamma: float) -> float:
    if not delta > 0:
        raise E.NoSpectralGap("the spectral gap lambda_{n-1} - lambda_n is zero")
    return delta / (2.0 * (7.0 / 3.0 + gamma) + (2.0 / 3.0 + gamma) * rho / delta)


def thresholds(problem: Problem, gamma: float = 1.0, require_gap: bool = False) -> Thresholds:
    n = problem.n
    if n < 2:
        raise E.DimensionMismatch("thresholds need n >= 2")
    sp = spectrum(problem)
    rho, delta = sp.rho, sp.delta
    large = 8.0 * n / (n - 1) * (1.0 + gamma) * rho * n ** 1.5
    small = None
    if delta > 1e-14 * max(1.0, rho):
        small = beta_small_threshold(rho, delta, gamma)
    elif require_gap:
        raise E.NoSpectralGap("the spectral gap lambda_{n-1} - lambda_n is zero")
    return Thresholds(large, small, rho * n * n, 18.0 * n ** 3 / (n - 1) * rho, float(gamma))


# ---------------------------------------------------------------------------
# regions

@dataclass(frozen=True)
class RegionLabel:
    regime: str
    region: tuple
    quantities: dict = field(default_factory=dict)

    def to_dict(self):
        return {"regime": self.regime, "region": list(self.region), "quantities": dict(self.quantities)}


def _variance(A, z):
    Az = A @ z
    return float(Az @ Az - (z @ Az) ** 2)


def classify_large_beta(problem: Problem, z, gamma: float = 1.0) -> RegionLabel:
    _real_only(problem)
    z = as_point(problem, z)
    n = problem.n
    m = z * z
    dev = float(np.max(np.abs(m - 1.0 / n)))
    lo = float(np.min(m))
    cut = (n - 1) / (4.0 * n * n)
    reg = []
    if dev <= 1.0 / (2 * n):
        reg.append("R1")
    if dev >= 1.0 / (2 * n) and lo >= cut:
        reg.append("R2")
    if lo <= cut:
        reg.append("R3")
    q = {"max_dev_moduli": dev, "min_sq": lo, "variance": _variance(problem.A, z)}
    return RegionLabel(LARGE, tuple(reg), q)


def eigen_coordinates(problem: Problem, z) -> np.ndarray:
    """alpha = P^T z; alpha[0] pairs with the smallest eigenvalue."""
    return spectrum(problem).eigenvectors.T @ np.asarray(z)


def classify_small_beta(problem: Problem, z, gamma: float = 1.0) -> RegionLabel:
    _real_only(problem)
    z = as_point(problem, z)
    sp = spectrum(problem)
    rho, delta = sp.rho, sp.delta
    if not delta > 0:
        raise E.NoSpectralGap("small-beta regions need a positive spectral gap")
    b = problem.beta
    alpha = eigen_coordinates(problem, z)
    an2 = float(alpha[0] ** 2)
    var = _variance(problem.A, z)
    reg = []
    if an2 >= ((2 + gamma) * b + rho) / (delta + rho):
        reg.append("R1")
    if var >= (2.0 / 3.0 + gamma) ** 2 * b * b:
        reg.append("R2")
    if an2 <= (delta - (4 + gamma) * b) / (delta + rho):
        reg.append("R3")
    q = {"alpha_n_sq": an2, "variance": var, "max_dev_moduli": float(np.max(np.abs(z * z - 1.0 / problem.n))),
         "min_sq": float(np.min(z * z))}
    return RegionLabel(SMALL, tuple(reg), q)


# ---------------------------------------------------------------------------
# negative curvature

@dataclass(frozen=True)
class NegativeDirection:
    v: np.ndarray
    hf: float
    bound: float               # -gamma*rho (large) or -gamma*beta (small)
    precondition_met: bool
    bound_holds: bool | None   # None when the precondition fails (no assertion made)

    def __iter__(self):  # allows ``v, hf = negative_direction(...)``
        return iter((self.v, self.hf))


def negative_direction(problem: Problem, z, regime, gamma: float = 1.0) -> NegativeDirection:
    _real_only(problem)
    regime = _regime(regime)
    z = as_point(problem, z)
    n = problem.n
    sp = spectrum(problem)
    b = problem.beta
    if regime == LARGE:
        if "R3" not in classify_large_beta(problem, z, gamma).region:
            raise E.NotInRegion("point is not in the large-beta negative-curvature region")
        m = z * z
        i = int(np.argmin(m))
        if np.any(z == 0):
            v = np.zeros(n)
            v[int(np.nonzero(z == 0)[0][0])] = 1.0
        else:
            inv = 1.0 / z
            c = 1.0 / math.sqrt((n - 1) ** 2 / m[i] + float(np.sum(np.delete(1.0 / m, i))))
            v = c * inv
            v[i] = -(n - 1) * c / z[i]
        bound = -gamma * sp.rho
        pre = b >= 2.0 * (1.0 + gamma) * sp.rho * n
    else:
        if not sp.delta > 0:
            raise E.NoSpectralGap("small-beta regime needs a positive spectral gap")
        if "R3" not in classify_small_beta(problem, z, gamma).region:
            raise E.NotInRegion("point is not in the small-beta negative-curvature region")
        P = sp.eigenvectors
        alpha = P.T @ z
        an = float(alpha[0])
        if abs(an) <= 1e-15:
            v = P[:, 0].copy()
        else:
            s = math.sqrt(max(0.0, 1.0 - an * an))
            nu = (an / s) * alpha
            nu[0] = -s
            v = P @ nu
        bound = -gamma * b
        pre = b <= sp.delta / (4.0 + gamma)
    v = v - (v @ z) * z
    v /= np.linalg.norm(v)
    hf = float(hf_form(problem, z, v))
    holds = (hf <= bound) if pre else None
    return NegativeDirection(v, hf, bound, bool(pre), holds)


# ---------------------------------------------------------------------------
# counterexample

def saddle_counterexample(n: int, C: float = 1.0, eps: float = 0.25):
    """(problem, z): z is stationary with zero minimal tangent curvature for
    beta = C n^(3/2 - eps), so no strict-saddle constants can classify it."""
    if n < 2:
        raise E.DimensionMismatch("n must be >= 2")
    if not C > 0 or not eps > 0:
        raise ValueError("C and eps must be positive")
    beta = C * n ** (1.5 - eps)
    z = np.full(n, math.sqrt(3.0 / (3 * n - 2)))
    z[0] = 1.0 / math.sqrt(3 * n - 2)
    q4 = float(np.sum(z ** 4))
    u = 2 * beta * q4 * z - 2 * beta * z ** 3
    w = np.full(n, math.sqrt(1.0 / ((3 * n - 2) * (n - 1))))
    w[0] = -math.sqrt((3 * n - 3) / (3 * n - 2))
    alpha = -16.0 * beta / (3 * n - 2) ** 2
    A = alpha * np.outer(w, w) + np.outer(z, u) + np.outer(u, z)
    return Problem(A, beta, REAL), z


# ---------------------------------------------------------------------------
# KL exponent

@dataclass(frozen=True)
class KLConfig:
    r_min: float = 1e-6
    r_max: float = 1e-2
    n_radii: int = 40
    n_dirs: int = 64
    seed: int = 0
    min_df: float = 1e-14

    def radii(self):
        return np.logspace(math.log10(self.r_min), math.log10(self.r_max), self.n_radii)


@dataclass(frozen=True)
class KLEstimate:
    theta_hat: float
    slope: float
    samples: np.ndarray   # rows (radius, |df|, grad_norm)
    eta_hat: float
    eta_halves: tuple
    worst_direction: np.ndarray = field(repr=False, default=None)

    def to_dict(self, with_samples: bool = False):
        d = {"theta_hat": self.theta_hat, "slope": self.slope, "eta_hat": self.eta_hat,
             "eta_halves": list(self.eta_halves), "n_samples": int(len(self.samples))}
        if with_samples:
            d["samples"] = self.samples.tolist()
        return d


def _sphere_steps(x, V, radii):
    """Exact offsets Delta with x + Delta = (x + r v)/sqrt(1 + r^2) for every (v, r)."""
    r = radii[None, :, None]
    s = np.sqrt(1.0 + r * r)
    delta = x[None, None, :] * (-(r * r) / (s * (1.0 + s))) + r * V[:, None, :] / s
    return delta


def kl_directions(problem: Problem, z, n_random: int, rng) -> np.ndarray:
    """Unit tangent directions (real coordinates): random, curvature eigenvectors,
    and projected coordinate axes."""
    x = to_real(z)
    N = x.size
    Q = orth_complement(x[:, None])
    rnd = rng.standard_normal((n_random, Q.shape[1])) @ Q.T
    _, V = projected_form(problem, z)
    axes = np.eye(N) - np.outer(np.eye(N) @ x, x)
    D = np.vstack([rnd, V.T, axes])
    nrm = np.linalg.norm(D, axis=1)
    D = D[nrm > 1e-8] / nrm[nrm > 1e-8, None]
    return D


def kl_estimate(problem: Problem, z, cfg: KLConfig | None = None) -> KLEstimate:
    """Empirical KL exponent at a stationary point.

    Points y are placed on rays from z (random and structured tangent
    directions) at log-spaced radii.  For every ray the slope of log||grad f(y)||
    against log|f(y) - f(z)| is fitted; the exponent estimate uses the largest
    slope, i.e. the ray on which the gradient vanishes fastest relative to the
    objective gap: theta_hat = 1 - slope.
    """
    cfg = cfg or KLConfig()
    z = as_point(problem, z)
    g0 = grad_norm(problem, z)
    if g0 > 1e-10:
        raise E.NotStationary(f"gradient norm {g0:.3e} exceeds 1e-10; polish the point first")
    R = _model(problem)
    x = to_real(z)
    rng = rng_from_seed(cfg.seed)
    D = kl_directions(problem, z, cfg.n_dirs, rng)
    radii = cfg.radii()
    delta = _sphere_steps(x, D, radii)            # (k, r, N)
    X = np.broadcast_to(x, delta.shape)
    Y = X + delta
    df = np.abs(R.df_step(X, delta))
    gn = R.gnorm(R.rgrad(Y / np.linalg.norm(Y, axis=-1, keepdims=True)))
    ok = (df > cfg.min_df) & (gn > 0)
    if int(ok.sum()) < 100:
        raise E.TooFewSamples(f"only {int(ok.sum())} usable samples")
    slopes = np.full(len(D), -np.inf)
    ldf, lgn = np.log(np.where(ok, df, 1.0)), np.log(np.where(ok, gn, 1.0))
    for k in range(len(D)):
        sel = ok[k]
        if sel.sum() < 5:
            continue
        slopes[k] = np.polyfit(ldf[k, sel], lgn[k, sel], 1)[0]
    kbest = int(np.argmax(slopes))
    slope = float(slopes[kbest])
    theta = 1.0 - slope
    ratio = np.where(ok, df ** (1.0 - theta) / np.where(ok, gn, 1.0), 0.0)
    even = ratio[:, 0::2].max()
    odd = ratio[:, 1::2].max()
    rr = np.broadcast_to(radii[None, :], df.shape)
    samples = np.stack([rr[ok], df[ok], gn[ok]], axis=1)
    return KLEstimate(theta, slope, samples, float(ratio.max()), (float(even), float(odd)),
                      from_real(D[kbest], problem))


def slim_ratio(z, Y):
    """||tau||^{3/2} / ||P_y^perp diag(tau) y|| for each row y of Y, tau = |y|^2 - |z|^2."""
    z = np.asarray(z)
    Y = np.atleast_2d(np.asarray(Y))
    tau = np.abs(Y) ** 2 - np.abs(z) ** 2
    return _slim(tau, Y)


def _slim(tau, Y):
    u = tau * Y
    proj = u - np.real(np.sum(np.conj(Y) * u, axis=-1))[..., None] * Y
    den = np.linalg.norm(proj, axis=-1)
    num = np.linalg.norm(tau, axis=-1) ** 1.5
    return num, den


def kl_slim_check(z, cfg: KLConfig | None = None):
    """Empirical constant in ||tau||^{3/2} <= eta ||P_y^perp diag(tau) y|| near z.

    Returns (eta_emp, worst) where worst holds the maximizing sample.
    """
    cfg = cfg or KLConfig()
    z = np.asarray(z)
    if abs(np.linalg.norm(z) - 1.0) > 1e-10:
        raise E.NotOnSphere("z must be a unit vector")
    cplx = np.iscomplexobj(z)
    x = to_real(z)
    rng = rng_from_seed(cfg.seed)
    Q = orth_complement(x[:, None])
    V = rng.standard_normal((cfg.n_dirs, Q.shape[1])) @ Q.T
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    radii = cfg.radii()
    delta = _sphere_steps(x, V, radii)
    Yr = x[None, None, :] + delta
    n = z.size
    if cplx:
        Y = Yr[..., :n] + 1j * Yr[..., n:]
        dz = delta[..., :n] + 1j * delta[..., n:]
    else:
        Y, dz = Yr, delta
    tau = np.real(np.conj(dz) * (2.0 * z + dz))  # |y|^2 - |z|^2 without cancellation
    num, den = _slim(tau, Y)
    ok = den > 1e-14
    if int(ok.sum()) < 100:
        raise E.TooFewSamples(f"only {int(ok.sum())} usable samples")
    ratio = np.where(ok, num / np.where(ok, den, 1.0), -np.inf)
    k = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    eta = float(ratio[k])
    if not math.isfinite(eta):
        raise E.NonFinite("unbounded ratio encountered")
    return eta, {"y": Y[k], "radius": float(radii[k[1]]), "ratio": eta}
