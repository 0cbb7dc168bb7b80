"""Versioned JSON schemas for every command output (printed by ``--print-schema``).

For JSONL outputs the schema describes a single line.
"""
from __future__ import annotations

SCHEMA_VERSION = "1"
_DRAFT = "https://json-schema.org/draft/2020-12/schema"

_num = {"type": ["number", "null"]}
_vec = {"type": "array", "items": {"type": "number"}}
_mat = {"type": "array", "items": _vec}
_point = {"type": "object", "required": ["re", "im"],
          "properties": {"re": _vec, "im": _vec}, "additionalProperties": False}
_problem = {
    "type": "object", "required": ["n", "beta", "field", "A"],
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "beta": {"type": "number", "exclusiveMinimum": 0},
        "field": {"enum": ["real", "complex"]},
        "A": {"type": "object", "required": ["re"], "properties": {"re": _mat, "im": _mat}},
    },
}
_certificate = {
    "type": "object",
    "required": ["grad_norm", "lambda", "mu_min", "label", "global_ok", "h_min_eig"],
    "properties": {
        "grad_norm": _num, "lambda": _num, "mu_min": _num, "h_min_eig": _num,
        "label": {"enum": ["StrictLocalMin", "Saddle", "Degenerate", "NotStationary"]},
        "global_ok": {"enum": ["Certified", "Refuted", "NotApplicable"]},
    },
}
_verdict = {
    "type": ["object", "null"], "required": ["kind", "null_dim"],
    "properties": {"kind": {"type": "string"}, "null_dim": {"type": "integer"},
                   "witness": {}, "detail": {"type": "object"}},
}
_region = {
    "type": "object", "required": ["regime", "region", "quantities"],
    "properties": {
        "regime": {"enum": ["LargeBeta", "SmallBeta"]},
        "region": {"type": "array", "items": {"enum": ["R1", "R2", "R3"]}},
        "quantities": {"type": "object", "additionalProperties": {"type": "number"}},
    },
}

_BODIES = {
    "gen": _problem,
    "solve": {
        "type": "object", "required": ["z", "f", "grad_norm", "iters", "certificate"],
        "properties": {"z": _point, "f": {"type": "number"}, "grad_norm": {"type": "number"},
                       "iters": {"type": "integer"}, "certificate": _certificate},
    },
    "certify": {
        "type": "object",
        "required": ["certificate", "fourth_order_necessary", "fourth_order_sufficient"],
        "properties": {"certificate": _certificate, "fourth_order_necessary": _verdict,
                       "fourth_order_sufficient": _verdict},
    },
    "diag": {
        "type": "object", "required": ["support", "u", "lambda", "f", "ties"],
        "properties": {"support": {"type": "array", "items": {"type": "integer"}}, "u": _vec,
                       "lambda": {"type": "number"}, "f": {"type": "number"},
                       "ties": {"type": "boolean"}},
    },
    "rankone": {
        "type": "object", "required": ["z", "f_star", "mode", "existence", "certificate"],
        "properties": {"z": _point, "f_star": {"type": "number"},
                       "mode": {"enum": ["Orthogonal", "ConsistentNumeric"]},
                       "existence": {"enum": ["BalancedPhases", "SingleSpike", "None"]},
                       "certificate": _certificate},
    },
    "classify": {
        "type": "object", "required": ["label", "negative_direction"],
        "properties": {
            "label": _region,
            "negative_direction": {
                "type": ["object", "null"],
                "properties": {"v": _point, "hf": {"type": "number"}, "bound": {"type": "number"},
                               "precondition_met": {"type": "boolean"},
                               "bound_holds": {"type": ["boolean", "null"]}},
            },
        },
    },
    "count-critical": {
        "oneOf": [
            {"type": "object", "required": ["z", "f", "grad_norm", "mu_min", "label", "kind"],
             "properties": {"z": _point, "f": {"type": "number"}, "grad_norm": {"type": "number"},
                            "mu_min": {"type": "number"}, "label": {"type": "string"},
                            "kind": {"enum": ["min", "saddle", "max", "degenerate"]},
                            "is_min": {"type": "boolean"}},
             "not": {"required": ["summary"]}},
            {"type": "object", "required": ["summary"],
             "properties": {"summary": {
                 "type": "object",
                 "required": ["n_stationary", "n_minima", "dedup_tol", "n_starts", "counts"],
                 "properties": {"n_stationary": {"type": "integer"}, "n_minima": {"type": "integer"},
                                "dedup_tol": {"type": "number"}, "n_starts": {"type": "integer"},
                                "counts": {"type": "object"}, "minima_gap": _num}}}},
        ],
    },
    "kl": {
        "type": "object", "required": ["theta_hat", "slope", "eta_hat", "eta_halves", "n_samples"],
        "properties": {"theta_hat": {"type": "number"}, "slope": {"type": "number"},
                       "eta_hat": {"type": "number"},
                       "eta_halves": {"type": "array", "items": {"type": "number"}},
                       "n_samples": {"type": "integer"}},
    },
    "counterexample": {
        "type": "object", "required": ["problem", "point", "grad_norm", "mu_min"],
        "properties": {"problem": {"type": "string"}, "point": {"type": "string"},
                       "grad_norm": {"type": "number"}, "mu_min": {"type": "number"}},
    },
    "perturb": {
        "type": "object", "required": ["sigma", "lhs", "rhs", "holds", "status"],
        "properties": {"sigma": {"type": "number"}, "lhs": {"type": "number"},
                       "rhs": {"type": "number"}, "holds": {"type": "boolean"},
                       "status": {"enum": ["improved", "did_not_improve"]},
                       "y": _point, "W": {"type": "object"}},
    },
    "landscape-grid": {
        "type": "object", "description": "CSV output with header phi,theta,f; one row per grid node",
        "required": ["columns", "rows"],
        "properties": {"columns": {"const": ["phi", "theta", "f"]}, "rows": {"type": "integer"}},
    },
}

_ERROR = {
    "$schema": _DRAFT, "$id": f"qqsphere/error/v{SCHEMA_VERSION}",
    "type": "object", "required": ["error", "message", "exit_code"],
    "properties": {"error": {"type": "string"}, "message": {"type": "string"},
                   "exit_code": {"enum": [2, 3, 4]}},
}


def schema_for(command: str) -> dict:
    if command == "error":
        return dict(_ERROR)
    body = _BODIES[command]
    return {"$schema": _DRAFT, "$id": f"qqsphere/{command}/v{SCHEMA_VERSION}", **body}


COMMANDS = tuple(_BODIES)
