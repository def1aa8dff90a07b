"""JSON schemas for model files and emitted reports (draft 2020-12)."""

SUBSET_KEY = {"type": "string", "pattern": r"^[1-9][0-9]*(,[1-9][0-9]*)*$"}

CORRELATION_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["dim", "rho"],
    "properties": {
        "dim": {"type": "integer", "minimum": 2},
        "rho": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
    },
}

RATES_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["dim", "lambda"],
    "properties": {
        "dim": {"type": "integer", "minimum": 2},
        "lambda": {
            "type": "object",
            "propertyNames": SUBSET_KEY,
            "additionalProperties": {"type": "number", "minimum": 0},
        },
    },
}

TAIL_ORDER = {
    "type": "object",
    "required": ["subset", "kappa", "log_exponent", "method", "active_set"],
    "properties": {
        "subset": SUBSET_KEY,
        "kappa": {"type": "number", "minimum": 1},
        "log_exponent": {"type": "number"},
        "method": {"enum": ["exact-qp", "exact-exponent", "generator-analysis", "regression"]},
        "active_set": {"anyOf": [SUBSET_KEY, {"type": "null"}]},
    },
}

EVIDENCE = {
    "type": "object",
    "required": ["subset", "removed", "verdict"],
    "properties": {
        "subset": SUBSET_KEY,
        "removed": {"type": "integer", "minimum": 1},
        "verdict": {"enum": ["tends-to-zero", "positive-limit", "inconclusive"]},
        "numerator": TAIL_ORDER,
        "denominator": TAIL_ORDER,
        "trace": {
            "type": "array",
            "items": {"type": "array", "prefixItems": [{"type": "number"}, {"type": "number"}], "minItems": 2},
        },
        "note": {"type": "string"},
    },
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["pairwise", "max_k", "mutual", "evidence"],
    "properties": {
        "model": {"type": "object"},
        "dim": {"type": "integer", "minimum": 2},
        "pairwise": {"type": "boolean"},
        "max_k": {"type": "integer", "minimum": 1},
        "mutual": {"type": "boolean"},
        "inconclusive": {"type": "boolean"},
        "evidence": {"type": "array", "items": EVIDENCE},
        "tail_orders": {"type": "array", "items": TAIL_ORDER},
        "details": {"type": "object"},
    },
}

TAILORDER_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["model", "results"],
    "properties": {
        "model": {"type": "object"},
        "results": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["subset", "kappa_exact", "active_set", "log_exponent", "kappa_fitted", "fit_rms"],
                "properties": {
                    "subset": SUBSET_KEY,
                    "kappa_exact": {"type": ["number", "null"]},
                    "active_set": {"anyOf": [SUBSET_KEY, {"type": "null"}]},
                    "log_exponent": {"type": ["number", "null"]},
                    "kappa_fitted": {"type": ["number", "null"]},
                    "log_coeff_fitted": {"type": ["number", "null"]},
                    "fit_rms": {"type": ["number", "null"]},
                },
            },
        },
    },
}
