"""Command-line interface.

Exit status: 0 success, 2 invalid input (including malformed JSON and
families without a sampler), 3 numeric failure. Diagnostics go to stderr;
with ``--out`` nothing is written to stdout.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .archimedean import ArchimedeanModel, acig_tail_orders, arch_mutual_condition, make_generator
from .classify import classify_model, counterexample_model, geometric_grid
from .core import IndexSubset, enumerate_subsets, validate_correlation, validate_rates
from .empirical import diagonal_csv, fit_tail_order, sample_model
from .exceptions import NumericError, ValidationError
from .gaussian import GaussianCopulaModel, example_matrix, gaussian_mutual_check, gaussian_survival_diagonal
from .marshall_olkin import MOModel, mo_classify, mo_diagonal_exponent, mo_equal, mo_proportional
from .survival import IndependenceCopula, PrecisionRequest, diagonal_section

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERIC = 3
SUBSET_ALL_MAX_DIM = 12
MODEL_KINDS = ("gaussian", "mo", "archimedean", "independence", "counterexample")


def _load_json(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _correlation(args):
    spec = args.matrix
    if spec is None or spec == "example":
        if args.rho is None:
            raise ValidationError("--matrix example needs --rho")
        return validate_correlation(example_matrix(args.rho))
    if spec == "pair":
        if args.rho is None:
            raise ValidationError("--matrix pair needs --rho")
        return validate_correlation([[1.0, args.rho], [args.rho, 1.0]])
    if spec == "identity":
        return validate_correlation(np.eye(args.dim or 3))
    doc = _load_json(spec)
    if not isinstance(doc, dict) or "rho" not in doc:
        raise ValidationError(f"{spec}: expected an object with keys 'dim' and 'rho'")
    corr = validate_correlation(doc["rho"])
    if "dim" in doc and doc["dim"] != corr.dim:
        raise ValidationError(f"{spec}: dim {doc['dim']} does not match a {corr.dim}x{corr.dim} matrix")
    return corr


def build_model(args):
    kind = args.model
    if kind == "gaussian":
        return GaussianCopulaModel(_correlation(args), seed=args.seed)
    if kind == "mo":
        if args.rates:
            doc = _load_json(args.rates)
            if not isinstance(doc, dict) or "lambda" not in doc or "dim" not in doc:
                raise ValidationError(f"{args.rates}: expected an object with keys 'dim' and 'lambda'")
            return MOModel(validate_rates(doc["lambda"], int(doc["dim"])))
        if args.dim is None:
            raise ValidationError("--family mo-equal|mo-proportional needs --dim")
        builders = {"mo-equal": mo_equal, "mo-proportional": mo_proportional}
        if args.family not in builders:
            raise ValidationError(f"MO family must be one of {sorted(builders)} (or give --rates)")
        return builders[args.family](args.dim)
    if kind == "archimedean":
        if args.family is None:
            raise ValidationError("archimedean models need --family")
        param = args.alpha if args.family == "acig" else args.theta
        return ArchimedeanModel(make_generator(args.family, param), args.dim or 2)
    if kind == "independence":
        return IndependenceCopula(args.dim or 2)
    if kind == "counterexample":
        return counterexample_model()
    raise ValidationError(f"unknown model kind {kind!r}")


def _subsets(args, d: int, min_size: int = 2) -> list[IndexSubset]:
    if args.subset in (None, "all"):
        if d > SUBSET_ALL_MAX_DIM:
            raise ValidationError(f"--subset all is limited to d <= {SUBSET_ALL_MAX_DIM}; list subsets explicitly")
        return list(enumerate_subsets(d, min_size, d))
    return [IndexSubset.from_key(key.strip(), d) for key in args.subset.split(";") if key.strip()]


def _precision(args) -> PrecisionRequest:
    return PrecisionRequest(target_relative_error=args.precision)


def _exact_order(model, subset: IndexSubset) -> Optional[dict]:
    """Exact tail order when the model family provides one."""
    if isinstance(model, ArchimedeanModel):
        gen = model.generator
        if gen.family == "acig":
            return {"kappa": max(1.0, min(gen.param, len(subset))), "active_set": None, "log_exponent": 0.0}
        if gen.family == "independence":
            return {"kappa": float(len(subset)), "active_set": None, "log_exponent": 0.0}
        return None
    if hasattr(model, "tail_order"):
        r = model.tail_order(subset)
        return {
            "kappa": float(r.kappa),
            "active_set": None if r.active_set is None else r.active_set.key,
            "log_exponent": float(r.log_exponent),
        }
    return None


def cmd_analyze(args, model) -> dict:
    details: dict = {}
    if isinstance(model, GaussianCopulaModel):
        check = gaussian_mutual_check(model.sigma)
        report = classify_model(model, strategy="analytic")
        details = {
            "criterion_mutual": check.mutual,
            "failing_subsets": [s.key for s in check.failing_subsets],
            "boundary_subsets": [s.key for s in check.boundary_subsets],
        }
        orders = list(check.tail_orders.values())
    elif isinstance(model, MOModel):
        report = mo_classify(model)
        orders = [model.tail_order(s) for s in enumerate_subsets(model.dim, 2, model.dim)]
        details = {
            "strict": model.strict,
            "exponents": {
                s.key: str(Fraction(mo_diagonal_exponent(model, s)).limit_denominator(10**9))
                if model.exact
                else float(mo_diagonal_exponent(model, s))
                for s in enumerate_subsets(model.dim, 1, model.dim)
            },
        }
    elif isinstance(model, ArchimedeanModel) and model.generator.family == "acig":
        res = acig_tail_orders(model.generator.param, model.dim)
        report = res.report
        orders = [r for r in res.tail_orders if len(r.subset) >= 2]
        details = {"kappa_by_size": {str(k): v for k, v in res.kappas.items()}}
    elif isinstance(model, ArchimedeanModel):
        cond = arch_mutual_condition(model.generator, model.dim)
        report = classify_model(model, strategy="analytic")
        orders = []
        details = cond.to_dict()
    else:
        report = classify_model(model, strategy="analytic")
        orders = [model.tail_order(s) for s in enumerate_subsets(model.dim, 2, model.dim)]
    out = {"model": model.describe(), **report.to_dict(), "tail_orders": [r.to_dict() for r in orders]}
    out["details"] = details
    return out


def cmd_classify(args, model) -> dict:
    report = classify_model(
        model,
        max_k=args.max_k,
        strategy=args.strategy,
        u_min=args.u_min or 1e-8,
        u_max=args.u_max or 1e-1,
        points=args.points,
        prec=_precision(args),
        threads=args.threads,
    )
    return {"model": model.describe(), **report.to_dict()}


def _diag_rows(model, subset, grid, prec, warn: list):
    rows = []
    for u in grid:
        try:
            if isinstance(model, GaussianCopulaModel):
                res = gaussian_survival_diagonal(model, subset, u, model.accuracy, model.seed)
                if not res.converged:
                    raise NumericError(f"orthant integration did not converge (relative error {res.error / res.probability:.1e})")
                rows.append((u, res.probability, res.error))
            else:
                rows.append((u, diagonal_section(model, subset, u, prec), None))
        except NumericError as exc:
            warn.append(f"subset {subset.key}, u={u:.6g}: {exc}")
            rows.append((u, None, None))
    return rows


def cmd_diag(args, model) -> dict[str, list]:
    grid = geometric_grid(args.u_max or 1e-1, args.u_min or 1e-4, args.points or 10)
    prec = _precision(args)
    warn: list[str] = []
    tables = {s.key: _diag_rows(model, s, grid, prec, warn) for s in _subsets(args, model.dim, 1)}
    return {"tables": tables, "warnings": warn}


def cmd_tailorder(args, model) -> dict:
    u_min = args.u_min or 1e-8
    grid = geometric_grid(args.u_max or 1e-2, u_min, args.points or 12)
    with_log = isinstance(model, GaussianCopulaModel)
    prec = _precision(args)
    results, warn = [], []
    for s in _subsets(args, model.dim, 2):
        exact = _exact_order(model, s)
        rows = [(u, v) for u, v, _ in _diag_rows(model, s, grid, prec, warn) if v is not None and v > 0]
        fitted = rms = coeff = None
        try:
            fit = fit_tail_order(rows, with_log_term=with_log)
            fitted, rms, coeff = fit.kappa_hat, fit.residual_rms, fit.log_coeff_hat
        except NumericError as exc:
            warn.append(f"subset {s.key}: regression failed: {exc}")
        results.append(
            {
                "subset": s.key,
                "kappa_exact": None if exact is None else exact["kappa"],
                "active_set": None if exact is None else exact["active_set"],
                "log_exponent": None if exact is None else exact["log_exponent"],
                "kappa_fitted": fitted,
                "log_coeff_fitted": coeff if with_log else None,
                "fit_rms": rms,
            }
        )
    return {"model": model.describe(), "results": results, "warnings": warn}


def _tailorder_csv(results: list[dict]) -> str:
    keys = ["subset", "kappa_exact", "active_set", "log_exponent", "kappa_fitted", "fit_rms"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(keys)
    for r in results:
        writer.writerow(["" if r[k] is None else r[k] for k in keys])
    return buf.getvalue()


def _emit(text: str, args, path: Optional[str] = None):
    target = path or args.out
    if target:
        Path(target).write_text(text)
    else:
        sys.stdout.write(text)


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _table_path(out: str, key: str, many: bool) -> str:
    if not many:
        return out
    p = Path(out)
    return str(p.with_name(f"{p.stem}_S{key.replace(',', '-')}{p.suffix or '.csv'}"))


def _write_warnings(lines: list[str], args):
    if not lines:
        return
    if args.out:
        Path(str(args.out) + ".warnings.txt").write_text("\n".join(lines) + "\n")
    for line in lines:
        print(f"warning: {line}", file=sys.stderr)


def _positive_float(text: str) -> float:
    x = float(text)
    if not math.isfinite(x) or x <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return x


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--precision", type=_positive_float, default=1e-10, help="target relative error (default 1e-10)")
    g.add_argument("--seed", type=int, default=0, help="random seed for sampling and quasi-Monte Carlo")
    g.add_argument("--threads", type=int, default=1, help="worker threads")
    g.add_argument("--out", help="output file; stdout stays empty when given")
    g.add_argument("--format", choices=("json", "csv"), help="output format")

    m = common.add_argument_group("model selection")
    m.add_argument("model", choices=MODEL_KINDS, help="model kind")
    m.add_argument("--matrix", help="correlation JSON path, or 'example', 'pair', 'identity'")
    m.add_argument("--rho", type=float, help="parameter for --matrix example or pair")
    m.add_argument("--rates", help="Marshall-Olkin rate JSON path")
    m.add_argument(
        "--family",
        help="mo-equal|mo-proportional, or clayton|frank|amh|gumbel|log-generator|acig|independence",
    )
    m.add_argument("--theta", type=float, help="Archimedean parameter")
    m.add_argument("--alpha", type=float, help="ACIG shape")
    m.add_argument("--dim", type=int, help="dimension")
    m.add_argument("--subset", help="'1,2' or 'all'; several subsets separated by ';'")

    grid = argparse.ArgumentParser(add_help=False)
    gg = grid.add_argument_group("grid")
    gg.add_argument("--u-min", type=_positive_float, help="smallest u")
    gg.add_argument("--u-max", type=_positive_float, help="largest u (default 0.1; 0.01 for tailorder)")
    gg.add_argument("--points", type=int, help="number of geometric grid points")

    parser = argparse.ArgumentParser(prog="asymindep", description="Tail orders and asymptotic independence of copulas.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="classification report with tail orders")
    sub.add_parser("diag", parents=[common, grid], help="diagonal survival sections as CSV")
    sp = sub.add_parser("sample", parents=[common], help="copula-scale sample dump")
    sp.add_argument("--n", type=int, default=1000, help="number of draws")
    sub.add_parser("tailorder", parents=[common, grid], help="exact and fitted tail orders")
    cp = sub.add_parser("classify", parents=[common, grid], help="k-wise classification")
    cp.add_argument("--strategy", choices=("analytic", "numeric"), default="analytic")
    cp.add_argument("--max-k", type=int, help="largest subset size to test")
    return parser


def run(args) -> int:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        model = build_model(args)
        if args.command == "analyze":
            _emit(_json_text(cmd_analyze(args, model)), args)
        elif args.command == "classify":
            _emit(_json_text(cmd_classify(args, model)), args)
        elif args.command == "tailorder":
            res = cmd_tailorder(args, model)
            warn = res.pop("warnings")
            if args.format == "csv":
                _emit(_tailorder_csv(res["results"]), args)
            else:
                _emit(_json_text(res), args)
            _write_warnings(warn, args)
        elif args.command == "diag":
            res = cmd_diag(args, model)
            tables = res["tables"]
            if args.format == "json":
                body = {k: [{"u": u, "value": v, "se": e} for u, v, e in rows] for k, rows in tables.items()}
                _emit(_json_text({"model": model.describe(), "diagonals": body}), args)
            elif args.out:
                for key, rows in tables.items():
                    Path(_table_path(args.out, key, len(tables) > 1)).write_text(diagonal_csv(rows))
            else:
                chunks = [f"# subset={key}\n" + diagonal_csv(rows) for key, rows in tables.items()]
                sys.stdout.write(chunks[0].split("\n", 1)[1] if len(chunks) == 1 else "".join(chunks))
            _write_warnings(res["warnings"], args)
        elif args.command == "sample":
            if args.n < 1:
                raise ValidationError("--n must be >= 1")
            if args.format == "json":
                raise ValidationError("sample dumps are CSV only")
            samples = sample_model(model, args.n, args.seed, args.threads)
            _emit(samples.to_csv(), args)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except (ValidationError, NotImplementedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
