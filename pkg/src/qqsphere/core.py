"""Problem model, file formats, spectra and problem generators.

The objective studied throughout the package is

    f(z) = 1/2 z^* A z + beta/2 * sum_k |z_k|^4,    ||z||_2 = 1,

over real or complex unit vectors z.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np

from . import errors as E

REAL = "real"
COMPLEX = "complex"

HERMITIAN_PARSE_TOL = 1e-9
SPHERE_TOL = 1e-10


# ---------------------------------------------------------------------------
# problem

@dataclass(frozen=True, eq=False)
class Problem:
    """Quartic-quadratic problem on the unit sphere of R^n or C^n."""

    A: np.ndarray
    beta: float
    field: str = REAL
    _spec: dict = dc_field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        fld = str(self.field).lower()
        if fld not in (REAL, COMPLEX):
            raise E.MalformedDocument(f"unknown field {self.field!r}")
        A = np.array(self.A)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise E.DimensionMismatch(f"A must be a non-empty square matrix, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise E.NonFinite("A has non-finite entries")
        beta = float(self.beta)
        if not math.isfinite(beta):
            raise E.NonFinite("beta is not finite")
        if not beta > 0:
            raise E.NonPositiveBeta(f"beta must be positive, got {beta}")
        if fld == REAL:
            if np.iscomplexobj(A):
                if np.any(A.imag != 0):
                    raise E.FieldMismatch("real problem with non-zero imaginary parts in A")
                A = A.real
            A = A.astype(np.float64)
        else:
            A = A.astype(np.complex128)
        scale = max(1.0, float(np.max(np.abs(A))))
        asym = float(np.max(np.abs(A - A.conj().T)))
        if asym > HERMITIAN_PARSE_TOL * scale:
            raise E.NonHermitian(f"A is not Hermitian (max asymmetry {asym:.3e})")
        A = 0.5 * (A + A.conj().T)
        if fld == COMPLEX:
            A[np.diag_indices_from(A)] = A.diagonal().real
        A.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "field", fld)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def is_complex(self) -> bool:
        return self.field == COMPLEX

    @property
    def dtype(self):
        return np.complex128 if self.is_complex else np.float64

    def shifted(self, c: float) -> "Problem":
        """Same problem with A replaced by A + cI."""
        return Problem(self.A + c * np.eye(self.n), self.beta, self.field)

    def with_beta(self, beta: float) -> "Problem":
        return Problem(self.A, beta, self.field)

    def __repr__(self):
        return f"Problem(n={self.n}, beta={self.beta:g}, field={self.field!r})"


def diagonal_problem(a, beta: float, field: str = REAL) -> Problem:
    return Problem(np.diag(np.asarray(a, dtype=float)), beta, field)


def rankone_problem(a, beta: float) -> Problem:
    """Complex problem with A = a a^*."""
    a = np.asarray(a, dtype=np.complex128).ravel()
    return Problem(np.outer(a, a.conj()), beta, COMPLEX)


# ---------------------------------------------------------------------------
# points

@dataclass(frozen=True, eq=False)
class SpherePoint:
    """Unit vector with its polar form v_k = r_k exp(i theta_k)."""

    v: np.ndarray

    def __post_init__(self):
        v = np.array(self.v)
        nrm = np.linalg.norm(v)
        if not np.isfinite(nrm) or abs(nrm - 1.0) > SPHERE_TOL:
            raise E.NotOnSphere(f"vector norm {nrm!r} is not 1")
        v = v / nrm
        v.setflags(write=False)
        object.__setattr__(self, "v", v)

    @property
    def r(self) -> np.ndarray:
        return np.abs(self.v)

    @property
    def theta(self) -> np.ndarray:
        return np.angle(self.v)

    @property
    def n(self) -> int:
        return self.v.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.v, dtype=dtype)

    @classmethod
    def from_polar(cls, r, theta) -> "SpherePoint":
        return cls(np.asarray(r) * np.exp(1j * np.asarray(theta)))


def as_point(problem: Problem, z, tol: float = SPHERE_TOL) -> np.ndarray:
    """Validate ``z`` as a point of the problem's sphere; returns a fresh array.

    Accepts anything array-like (including :class:`SpherePoint`).  Points within
    ``tol`` of unit norm are renormalized (unless already unit to rounding), others
    rejected.
    """
    z = np.array(z)
    if z.shape != (problem.n,):
        raise E.DimensionMismatch(f"point has shape {z.shape}, expected ({problem.n},)")
    if not np.all(np.isfinite(z)):
        raise E.NonFinite("point has non-finite entries")
    if np.iscomplexobj(z):
        if not problem.is_complex:
            if np.any(z.imag != 0):
                raise E.FieldMismatch("complex point on a real problem")
            z = z.real
    z = z.astype(problem.dtype)
    nrm = np.linalg.norm(z)
    if abs(nrm - 1.0) > tol:
        raise E.NotOnSphere(f"point norm {nrm!r} differs from 1 by more than {tol:g}")
    return z if abs(nrm - 1.0) <= 4 * np.finfo(float).eps else z / nrm


# ---------------------------------------------------------------------------
# spectrum

@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # columns p_k, largest-|entry| made real positive
    rho: float
    delta: float


def orient_columns(P: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real and positive."""
    P = np.array(P)
    idx = np.argmax(np.abs(P), axis=0)
    piv = P[idx, np.arange(P.shape[1])]
    ph = piv / np.abs(piv)
    return P * ph.conj()[None, :]


def spectrum(problem: Problem) -> Spectrum:
    cached = problem._spec.get("spectrum")
    if cached is not None:
        return cached
    try:
        w, P = np.linalg.eigh(problem.A)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise E.EigSolverFailure(str(exc)) from exc
    P = orient_columns(P)
    if not problem.is_complex:
        P = P.real
    rho = float(w[-1] - w[0])
    delta = float(w[1] - w[0]) if problem.n > 1 else 0.0
    spec = Spectrum(w, P, max(rho, 0.0), max(delta, 0.0))
    w.setflags(write=False)
    P.setflags(write=False)
    problem._spec["spectrum"] = spec
    return spec


# ---------------------------------------------------------------------------
# generators

class Kind(str, enum.Enum):
    DiagonalUniform = "diagonal-uniform"
    RankOne = "rank-one"
    DenseSymmetric = "dense-symmetric"
    DenseHermitian = "dense-hermitian"
    Figure1 = "figure1"

    @classmethod
    def parse(cls, s) -> "Kind":
        if isinstance(s, cls):
            return s
        key = str(s).strip().lower().replace("_", "-")
        for k in cls:
            if key in (k.value, k.name.lower(), k.value.replace("-", "")):
                return k
        raise E.MalformedDocument(f"unknown problem kind {s!r}")


FIGURE1_A = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]])


def rng_from_seed(seed) -> np.random.Generator:
    """Counter-based generator (Philox) keyed by ``seed``."""
    return np.random.Generator(np.random.Philox(int(seed) % 2**64))


def _shift_to_zero(A: np.ndarray) -> np.ndarray:
    lo = np.linalg.eigvalsh(A)[0]
    return A - lo * np.eye(A.shape[0])


def generate_problem(kind, n: int, beta: float, seed: int = 0, field: str | None = None) -> Problem:
    """Random or canonical problem, a pure function of its arguments.

    All ensembles are shifted so that the smallest eigenvalue of A is 0.
    ``field`` only matters for ``rank-one`` (default complex).
    """
    kind = Kind.parse(kind)
    n = int(n)
    if n < 1:
        raise E.DimensionMismatch("n must be >= 1")
    rng = rng_from_seed(seed)
    if kind is Kind.Figure1:
        if n != 3:
            raise E.BadKindDimension("figure1 problem is defined for n = 3 only")
        return Problem(FIGURE1_A, beta, REAL)
    if kind is Kind.DiagonalUniform:
        a = rng.uniform(0.0, 1.0, n)
        return Problem(np.diag(a - a.min()), beta, REAL)
    if kind is Kind.RankOne:
        fld = (field or COMPLEX).lower()
        a = rng.standard_normal(n)
        if fld == COMPLEX:
            a = (a + 1j * rng.standard_normal(n)) / math.sqrt(2)
            return Problem(np.outer(a, a.conj()), beta, COMPLEX)
        return Problem(_shift_to_zero(np.outer(a, a)), beta, REAL)
    if kind is Kind.DenseSymmetric:
        G = rng.standard_normal((n, n)) / math.sqrt(n)
        A = (G + G.T) / math.sqrt(2)
        return Problem(_shift_to_zero(A), beta, REAL)
    # DenseHermitian
    G = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2 * n)
    A = (G + G.conj().T) / math.sqrt(2)
    return Problem(_shift_to_zero(A), beta, COMPLEX)


# ---------------------------------------------------------------------------
# serialization

def _fmt_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if s in ("-0",):
        s = "-0.0"
    return s


def dumps(obj, indent: int | None = None) -> str:
    """JSON text with every float written to 17 significant digits."""

    def enc(o, level):
        pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
        end = "" if indent is None else "\n" + " " * (indent * level)
        sep = ", " if indent is None else ","
        if o is None or isinstance(o, (bool, np.bool_)):
            return json.dumps(None if o is None else bool(o))
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return _fmt_float(o)
        if isinstance(o, str):
            return json.dumps(o, ensure_ascii=False)
        if isinstance(o, enum.Enum):
            return json.dumps(o.value if isinstance(o.value, str) else o.name)
        if isinstance(o, np.ndarray):
            return enc(o.tolist(), level)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [pad + json.dumps(str(k)) + ": " + enc(v, level + 1) for k, v in o.items()]
            return "{" + sep.join(items) + end + "}"
        if isinstance(o, (list, tuple)):
            if not o:
                return "[]"
            items = [pad + enc(v, level + 1) for v in o]
            return "[" + sep.join(items) + end + "]"
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return enc(obj, 0)


def _load_json(text):
    try:
        return json.loads(text)
    except (json.JSONDecodeError, TypeError) as exc:
        raise E.MalformedDocument(f"invalid JSON: {exc}") from exc


def _matrix(obj, name):
    try:
        M = np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise E.MalformedDocument(f"{name} is not a numeric matrix") from exc
    return M


def problem_to_dict(p: Problem) -> dict:
    d = {"n": p.n, "beta": p.beta, "field": p.field, "A": {"re": np.real(p.A).tolist()}}
    if p.is_complex:
        d["A"]["im"] = np.imag(p.A).tolist()
    return d


def problem_from_dict(d) -> Problem:
    if not isinstance(d, dict):
        raise E.MalformedDocument("problem document must be a JSON object")
    for key in ("n", "beta", "A"):
        if key not in d:
            raise E.MalformedDocument(f"missing key {key!r}")
    n = d["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise E.MalformedDocument("n must be a positive integer")
    fld = d.get("field", REAL)
    if fld not in (REAL, COMPLEX):
        raise E.MalformedDocument(f"field must be 'real' or 'complex', got {fld!r}")
    if not isinstance(d["beta"], (int, float)) or isinstance(d["beta"], bool):
        raise E.MalformedDocument("beta must be a number")
    Ad = d["A"]
    if not isinstance(Ad, dict) or "re" not in Ad:
        raise E.MalformedDocument("A must be an object with key 're'")
    re = _matrix(Ad["re"], "A.re")
    if re.shape != (n, n):
        raise E.DimensionMismatch(f"A.re has shape {re.shape}, expected ({n}, {n})")
    A = re
    if Ad.get("im") is not None:
        im = _matrix(Ad["im"], "A.im")
        if im.shape != (n, n):
            raise E.DimensionMismatch(f"A.im has shape {im.shape}, expected ({n}, {n})")
        if fld == REAL:
            if np.any(im != 0):
                raise E.FieldMismatch("real problem with non-zero A.im")
        else:
            A = re + 1j * im
    return Problem(A, float(d["beta"]), fld)


def parse_problem(text) -> Problem:
    return problem_from_dict(_load_json(text))


def serialize_problem(p: Problem) -> str:
    return dumps(problem_to_dict(p))


def point_to_dict(z) -> dict:
    z = np.asarray(z)
    return {"re": np.real(z).tolist(), "im": np.imag(z).tolist() if np.iscomplexobj(z) else [0.0] * len(z)}


def point_from_dict(d, problem: Problem | None = None) -> np.ndarray:
    if not isinstance(d, dict) or "re" not in d:
        raise E.MalformedDocument("point document must be an object with key 're'")
    try:
        re = np.array(d["re"], dtype=float)
        im = np.array(d.get("im") or np.zeros_like(re), dtype=float)
    except (TypeError, ValueError) as exc:
        raise E.MalformedDocument("point entries must be numbers") from exc
    if re.ndim != 1 or re.shape != im.shape:
        raise E.DimensionMismatch("point 're' and 'im' must be vectors of equal length")
    z = re + 1j * im if np.any(im != 0) else re
    if problem is not None:
        z = as_point(problem, z)
    return z


def parse_point(text, problem: Problem | None = None) -> np.ndarray:
    return point_from_dict(_load_json(text), problem)


def serialize_point(z) -> str:
    return dumps(point_to_dict(z))
