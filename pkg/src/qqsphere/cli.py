"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 solver failure, 4 unmet precondition.
Errors are written to stderr as a single JSON line.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import errors as E
from .calculus import grad_norm, objective, tangent_min_curvature
from .certify import (FourthOrderConfig, certify_point, fourth_order_necessary,
                      fourth_order_sufficient)
from .core import (COMPLEX, REAL, Kind, _fmt_float, dumps, generate_problem, parse_point, parse_problem,
                   point_to_dict, problem_to_dict, rng_from_seed, serialize_point, serialize_problem)
from .schemas import COMMANDS, schema_for


class UsageError(E.ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# helpers

def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise E.MalformedDocument(f"cannot read {path}: {exc.strerror}") from exc


def _problem(args):
    return parse_problem(_read(args.problem))


def _point(args, problem):
    return parse_point(_read(args.point), problem)


def _emit(args, text: str):
    if not text.endswith("\n"):
        text += "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _jsonl(rows) -> str:
    return "".join(dumps(r) + "\n" for r in rows)


def _parse_res(s: str):
    try:
        a, b = s.lower().split("x")
        nphi, nth = int(a), int(b)
    except ValueError as exc:
        raise UsageError(f"--res must look like 400x200, got {s!r}") from exc
    if nphi < 1 or nth < 1:
        raise UsageError("--res entries must be positive")
    return nphi, nth


def _parse_vector(text: str) -> np.ndarray:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise E.MalformedDocument(f"a is not valid JSON: {exc}") from exc
    try:
        if isinstance(obj, dict):
            re = np.array(obj["re"], dtype=float)
            im = np.array(obj.get("im") or np.zeros_like(re), dtype=float)
            a = re + 1j * im
        else:
            a = np.array(obj, dtype=float).astype(complex)
    except (KeyError, TypeError, ValueError) as exc:
        raise E.MalformedDocument("a must be a numeric vector or {\"re\": [...], \"im\": [...]}") from exc
    if a.ndim != 1:
        raise E.DimensionMismatch("a must be a vector")
    return a


# ---------------------------------------------------------------------------
# commands

def cmd_gen(args):
    if args.kind is None or args.beta is None:
        raise UsageError("gen requires --kind and --beta (and --n except for figure1)")
    n = args.n
    if n is None:
        if Kind.parse(args.kind) is not Kind.Figure1:
            raise UsageError("gen requires --n for this kind")
        n = 3
    p = generate_problem(args.kind, n, args.beta, args.seed, args.field)
    _emit(args, serialize_problem(p))


def cmd_solve(args):
    from .solve import SolverConfig, gradient_descent, newton_polish, random_sphere

    p = _problem(args)
    cfg = SolverConfig(grad_tol=args.tol if args.tol is not None else 1e-10, seed=args.seed)
    if args.point:
        z0 = _point(args, p)
    else:
        x0 = random_sphere(rng_from_seed(args.seed), 1, p)[0]
        z0 = x0[: p.n] + 1j * x0[p.n:] if p.is_complex else x0
    res = gradient_descent(p, z0, cfg)
    z = res.z
    if res.grad_norm <= 1e-4:
        z = newton_polish(p, z, cfg).z
    cert = certify_point(p, z)
    _emit(args, dumps({"z": point_to_dict(z), "f": objective(p, z), "grad_norm": grad_norm(p, z),
                       "iters": res.iters, "certificate": cert.to_dict()}))


def cmd_certify(args):
    p = _problem(args)
    z = _point(args, p)
    tol = args.tol if args.tol is not None else 1e-8
    cert = certify_point(p, z, tol_stat=tol)
    nec = suf = None
    if cert.label != "NotStationary":
        cfg = FourthOrderConfig(seed=args.seed, tol_stat=tol)
        nec = fourth_order_necessary(p, z, cfg).to_dict()
        suf = fourth_order_sufficient(p, z, cfg).to_dict()
    _emit(args, dumps({"certificate": cert.to_dict(), "fourth_order_necessary": nec,
                       "fourth_order_sufficient": suf}))


def cmd_diag(args):
    from .diagonal import enumerate_stationary_diagonal

    p = _problem(args)
    _emit(args, _jsonl(c.to_dict() for c in enumerate_stationary_diagonal(p)))


def cmd_rankone(args):
    from .core import rankone_problem
    from .rankone import orthogonal_minimum_exists, solve_rankone
    from .solve import SolverConfig

    if args.beta is None:
        raise UsageError("rankone requires --beta")
    text = args.a
    if not text.lstrip().startswith(("[", "{")):
        text = _read(text)
    a = _parse_vector(text)
    n = args.n if args.n is not None else a.size
    if n != a.size:
        raise E.DimensionMismatch(f"a has length {a.size}, but --n is {n}")
    starts = args.starts if args.starts is not None else 256
    sol = solve_rankone(a, args.beta, n, SolverConfig(seed=args.seed), n_starts=starts)
    ex = orthogonal_minimum_exists(a, args.beta, n) if n >= 2 else None
    cert = certify_point(rankone_problem(a, args.beta), sol.z)
    _emit(args, dumps({"z": point_to_dict(sol.z), "f_star": sol.f_star, "mode": sol.mode,
                       "existence": ex.verdict if ex is not None else "None",
                       "certificate": cert.to_dict()}))


def cmd_classify(args):
    from .landscape import (LARGE, _regime, classify_large_beta, classify_small_beta,
                            negative_direction)

    if args.kind is None:
        raise UsageError("classify requires --kind large|small")
    try:
        regime = _regime(args.kind)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    p = _problem(args)
    z = _point(args, p)
    gamma = args.gamma if args.gamma is not None else 1.0
    lab = (classify_large_beta if regime == LARGE else classify_small_beta)(p, z, gamma)
    nd = None
    if "R3" in lab.region:
        d = negative_direction(p, z, regime, gamma)
        nd = {"v": point_to_dict(d.v), "hf": d.hf, "bound": d.bound,
              "precondition_met": d.precondition_met, "bound_holds": d.bound_holds}
    _emit(args, dumps({"label": lab.to_dict(), "negative_direction": nd}))


def cmd_count_critical(args):
    from .solve import SolverConfig, minima_gap, multistart

    p = _problem(args)
    starts = args.starts if args.starts is not None else 10_000
    if starts < 1:
        raise UsageError("--starts must be >= 1")
    tol = args.tol if args.tol is not None else 1e-6
    cat = multistart(p, starts, SolverConfig(seed=args.seed), dedup_tol=tol)
    rows = [{"z": point_to_dict(e.z), "f": e.f, "grad_norm": e.grad_norm, "mu_min": e.mu_min,
             "label": e.label, "kind": e.kind, "is_min": e.is_min} for e in cat.points]
    gap = minima_gap(cat) if cat.n_minima else None
    rows.append({"summary": {"n_stationary": cat.n_stationary, "n_minima": cat.n_minima,
                             "dedup_tol": cat.dedup_tol, "n_starts": cat.n_starts,
                             "counts": cat.counts(), "minima_gap": gap}})
    _emit(args, _jsonl(rows))


def cmd_kl(args):
    from .landscape import KLConfig, kl_estimate

    p = _problem(args)
    z = _point(args, p)
    est = kl_estimate(p, z, KLConfig(seed=args.seed))
    _emit(args, dumps(est.to_dict()))


def cmd_counterexample(args):
    from .landscape import saddle_counterexample

    if args.n is None:
        raise UsageError("counterexample requires --n")
    if not args.out:
        raise UsageError("counterexample requires --out (problem file path)")
    C = args.C if args.C is not None else 1.0
    eps = args.eps if args.eps is not None else 0.25
    p, z = saddle_counterexample(args.n, C, eps)
    out = Path(args.out)
    pt = out.with_name(out.stem + "_point.json")
    out.write_text(serialize_problem(p) + "\n", encoding="utf-8")
    pt.write_text(serialize_point(z) + "\n", encoding="utf-8")
    sys.stdout.write(dumps({"problem": str(out), "point": str(pt), "grad_norm": grad_norm(p, z),
                            "mu_min": tangent_min_curvature(p, z)[0]}) + "\n")


def cmd_perturb(args):
    from .diagonal import perturbation_check

    p = _problem(args)
    sigma = args.sigma if args.sigma is not None else 0.01
    starts = args.starts if args.starts is not None else 64
    trial = perturbation_check(p, sigma, seed=args.seed, n_starts=starts)
    _emit(args, dumps(trial.to_dict()))


def cmd_landscape_grid(args):
    p = _problem(args)
    if p.n != 3 or p.field != REAL:
        raise E.DimensionMismatch("landscape-grid needs a real problem with n = 3")
    nphi, nth = _parse_res(args.res or "400x200")
    phi = np.linspace(0.0, 2.0 * math.pi, nphi, endpoint=False)
    th = np.linspace(0.0, math.pi, nth, endpoint=False)
    P, T = np.meshgrid(phi, th, indexing="ij")
    Z = np.stack([np.cos(P), np.sin(P) * np.cos(T), np.sin(P) * np.sin(T)], axis=-1).reshape(-1, 3)
    F = 0.5 * np.einsum("ij,jk,ik->i", Z, p.A, Z) + 0.5 * p.beta * np.sum(Z ** 4, axis=1)
    lines = ["phi,theta,f"]
    lines += [f"{_fmt_float(a)},{_fmt_float(b)},{_fmt_float(c)}"
              for a, b, c in zip(P.ravel(), T.ravel(), F)]
    _emit(args, "\n".join(lines) + "\n")


_COMMANDS = {
    "gen": (cmd_gen, [], "generate a problem file"),
    "solve": (cmd_solve, ["problem", "point?"], "single Riemannian descent + Newton polish"),
    "certify": (cmd_certify, ["problem", "point"], "second/fourth-order and global certificates"),
    "diag": (cmd_diag, ["problem"], "enumerate stationary classes of a diagonal problem (JSONL)"),
    "rankone": (cmd_rankone, ["a"], "solve A = a a^* (a as JSON vector or file)"),
    "classify": (cmd_classify, ["problem", "point"], "strict-saddle region label"),
    "count-critical": (cmd_count_critical, ["problem"], "multistart critical-point catalog (JSONL)"),
    "kl": (cmd_kl, ["problem", "point"], "empirical KL exponent"),
    "counterexample": (cmd_counterexample, [], "degenerate stationary point construction"),
    "perturb": (cmd_perturb, ["problem"], "noise perturbation trial for a diagonal problem"),
    "landscape-grid": (cmd_landscape_grid, ["problem"], "objective on a (phi, theta) grid as CSV"),
}
assert set(_COMMANDS) == set(COMMANDS)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qqsphere", description="Quartic-quadratic optimization on the unit sphere.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, (_, positional, help_text) in _COMMANDS.items():
        sp = sub.add_parser(name, help=help_text, description=help_text)
        for pos in positional:
            if pos.endswith("?"):
                sp.add_argument(pos[:-1], nargs="?")
            else:
                sp.add_argument(pos)
        sp.add_argument("--beta", type=float)
        sp.add_argument("--n", type=int)
        sp.add_argument("--kind")
        sp.add_argument("--field", choices=[REAL, COMPLEX])
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--starts", type=int)
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--sigma", type=float)
        sp.add_argument("--res")
        sp.add_argument("--C", type=float)
        sp.add_argument("--eps", type=float)
        sp.add_argument("--tol", type=float)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--out")
        sp.add_argument("--print-schema", action="store_true")
    return parser


def _error_line(exc: Exception, code: int) -> str:
    return json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code})


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if "--print-schema" in argv:  # needs no inputs; first non-flag token names the command
        names = [a for a in argv if not a.startswith("-")]
        cmd = names[0] if names and names[0] in _COMMANDS else "error"
        sys.stdout.write(dumps(schema_for(cmd)) + "\n")
        return 0
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required: " + ", ".join(_COMMANDS))
        if args.print_schema:
            sys.stdout.write(dumps(schema_for(args.command)) + "\n")
            return 0
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        with np.errstate(all="ignore"):
            _COMMANDS[args.command][0](args)
        return 0
    except E.QQError as exc:
        failure, code = exc, exc.exit_code
    except ValueError as exc:
        failure, code = exc, 2
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        failure, code = exc, 3
    sys.stderr.write(_error_line(failure, code) + "\n")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
