"""Command-line front end.

Subcommands: solve, classify, witness, construct, reproduce.  Every command
assembles a JSON run report whose embedded certificates are re-verified
arithmetically before the process claims success.  Exit codes are a
contract: 0 certified, 2 indeterminate or unknown, 1 error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from . import cones, discrimination as disc, ensembles as ens
from .operators import (
    BipartiteOperator,
    ValidationError,
    load_operator,
    min_eigenvalue,
    operator_from_dict,
    operator_to_dict,
    partial_transpose,
    partial_transpose_matrix,
    trace_inner,
)
from .solver import SolverError, SolverOptions

EPS_OVERRIDE_ENV = "PPTDISC_EPS_OVERRIDE"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INDETERMINATE = 2


def _solver_options(args) -> SolverOptions:
    opts = SolverOptions()
    if getattr(args, "eps_feas", None) is not None:
        opts.eps_feas = args.eps_feas
    if getattr(args, "eps_gap", None) is not None:
        opts.eps_gap = args.eps_gap
    if getattr(args, "max_iter", None) is not None:
        opts.max_iter = args.max_iter
    if getattr(args, "seed", None) is not None:
        opts.seed = args.seed
    override = os.environ.get(EPS_OVERRIDE_ENV)
    if override:
        try:
            feas, gap = (float(tok) for tok in override.split(","))
        except Exception as exc:
            raise ValidationError(
                f"{EPS_OVERRIDE_ENV} must be 'feas,gap', got {override!r}"
            ) from exc
        opts.eps_feas, opts.eps_gap = feas, gap
    return opts


def _digest(path) -> dict:
    with open(path, "rb") as fh:
        data = fh.read()
    return {"path": str(path), "sha256": hashlib.sha256(data).hexdigest()}


def _base_report(args, inputs: dict) -> dict:
    return {
        "tool": {"name": "pptdisc", "version": __version__},
        "command": [args.command] + list(args._echo),
        "inputs": inputs,
        "values": {},
        "verdicts": {},
        "certificates": {},
        "solver": {},
    }


def _cert_entry(index, w, cert: cones.ConeCertificate) -> dict:
    entry = {"index": index, "verdict": cert.verdict, "w": operator_to_dict(w),
             "residuals": cert.residuals}
    if cert.positive_part is not None:
        entry["p"] = operator_to_dict(cert.positive_part)
        entry["q"] = operator_to_dict(cert.transposed_part)
    if cert.separating is not None:
        entry["f"] = operator_to_dict(cert.separating)
    return entry


def _result_certificates(ensemble, result) -> dict:
    out = {
        "ensemble": ens.ensemble_to_dict(ensemble),
        "dual_operator": operator_to_dict(result.dual_operator),
        "mode": result.mode,
        "value": result.value,
    }
    if result.measurement is not None:
        out["measurement"] = ens.measurement_to_dict(result.measurement)
        out["slackness"] = [float(r) for r in result.slackness]
        out["require_ppt_measurement"] = result.mode == "ppt"
    if result.membership is not None:
        out["memberships"] = [
            _cert_entry(i, result.dual_operator - ensemble.weighted(i), cert)
            for i, cert in enumerate(result.membership)
        ]
    return out


def reverify(report: dict) -> list[str]:
    """Re-check a report's embedded certificates without running any solver.

    Returns a list of violations; an empty list reproduces every verdict.
    """
    problems: list[str] = []
    for name, bundle in report.get("certificates", {}).items():
        if not isinstance(bundle, dict) or "ensemble" not in bundle and "w" not in bundle:
            continue
        problems += _reverify_bundle(name, bundle)
    return problems


def _reverify_bundle(name: str, bundle: dict) -> list[str]:
    problems = []
    ensemble = None
    if "ensemble" in bundle:
        try:
            ensemble = ens.ensemble_from_dict(bundle["ensemble"])
        except ValidationError as exc:
            return [f"{name}: embedded ensemble invalid: {exc}"]
    h = None
    if "dual_operator" in bundle:
        h = operator_from_dict(bundle["dual_operator"])
        if ensemble is not None and "value" in bundle:
            if abs(h.trace - bundle["value"]) > cones.EPS_CERT:
                problems.append(f"{name}: Tr H differs from value beyond tolerance")
    if "measurement" in bundle and ensemble is not None:
        try:
            m = ens.measurement_from_dict(bundle["measurement"])
        except ValidationError as exc:
            return problems + [f"{name}: embedded measurement invalid: {exc}"]
        if bundle.get("require_ppt_measurement") and not m.is_ppt():
            problems.append(f"{name}: measurement is not PPT")
        value = disc.evaluate_measurement(ensemble, m)
        if abs(value - bundle["value"]) > cones.EPS_CERT:
            problems.append(f"{name}: measurement value {value} differs from reported {bundle['value']}")
        if h is not None:
            for i in range(len(ensemble)):
                r = trace_inner(m.elements[i], h - ensemble.weighted(i))
                if abs(r - bundle["slackness"][i]) > cones.EPS_CERT:
                    problems.append(f"{name}: slackness[{i}] does not reproduce")
    for entry in bundle.get("memberships", []):
        problems += _reverify_membership(name, entry)
    return problems


def _reverify_membership(name: str, entry: dict) -> list[str]:
    problems = []
    w = operator_from_dict(entry["w"])
    tag = f"{name}.memberships[{entry.get('index')}]"
    if entry["verdict"] == cones.MEMBER:
        p = operator_from_dict(entry["p"])
        q = operator_from_dict(entry["q"])
        recon = p.matrix + partial_transpose_matrix(q.matrix, w.dims.d1, w.dims.d2)
        if np.linalg.norm(recon - w.matrix) > cones.EPS_CERT * (1.0 + w.norm):
            problems.append(f"{tag}: decomposition does not reconstruct W")
        if min_eigenvalue(p) < -disc.TAU_PSD or min_eigenvalue(q) < -disc.TAU_PSD:
            problems.append(f"{tag}: decomposition parts are not PSD")
    elif entry["verdict"] == cones.NON_MEMBER and "f" in entry:
        f = operator_from_dict(entry["f"])
        if min_eigenvalue(f) < -disc.TAU_PSD or min_eigenvalue(partial_transpose(f)) < -disc.TAU_PSD:
            problems.append(f"{tag}: separating operator leaves the primal cone")
        if trace_inner(w, f) > -10 * disc.TAU_PSD * f.norm:
            problems.append(f"{tag}: separating operator does not witness non-membership")
    return problems


def _finish(report: dict, args, default_exit: int = EXIT_OK) -> int:
    problems = reverify(report)
    report["reverified"] = not problems
    report["reverification_problems"] = problems
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=1)
        print(f"report written to {args.out}")
    if problems:
        for p in problems:
            print(f"re-verification failed: {p}", file=sys.stderr)
        return EXIT_INDETERMINATE
    return default_exit


# --- subcommands -----------------------------------------------------------


def cmd_solve(args) -> int:
    opts = _solver_options(args)
    ensemble = ens.load_ensemble(args.ensemble)
    report = _base_report(args, {"ensemble": _digest(args.ensemble)})
    t0 = time.perf_counter()
    if args.mode == "global":
        result = disc.optimal_global(ensemble, opts)
        key = "p_global"
    elif args.mode == "ppt":
        result = disc.optimal_ppt(ensemble, opts)
        key = "p_ppt"
    else:
        result = disc.optimal_ppt_dual(ensemble, opts)
        key = "q_ppt"
    wall = 1e3 * (time.perf_counter() - t0)
    report["values"][key] = result.value
    report["values"]["duality_residual"] = result.duality_residual
    report["values"]["optimality_residual"] = result.optimality_residual
    report["solver"] = dict(result.solver, wall_ms=wall)
    report["certificates"]["solve"] = _result_certificates(ensemble, result)
    status = "optimal"
    if result.membership is not None and any(
        c.verdict == cones.UNKNOWN for c in result.membership
    ):
        status = "unknown"
    report["verdicts"]["status"] = status
    print(f"{key} = {result.value:.9f}  "
          f"(iterations {result.solver['iterations']}, wall {wall:.0f} ms)")
    return _finish(report, args, EXIT_OK if status == "optimal" else EXIT_INDETERMINATE)


def cmd_classify(args) -> int:
    opts = _solver_options(args)
    ensemble = ens.load_ensemble(args.ensemble)
    report = _base_report(args, {"ensemble": _digest(args.ensemble)})
    t0 = time.perf_counter()
    verdict = disc.classify_equality(ensemble, opts)
    wall = 1e3 * (time.perf_counter() - t0)
    report["values"].update({
        "p_ppt": verdict.p_ppt, "p_global": verdict.p_g, "margin": verdict.margin,
    })
    report["verdicts"]["equality"] = verdict.verdict
    report["verdicts"]["evidence"] = verdict.evidence
    report["solver"]["wall_ms"] = wall

    pivot = args.pivot if args.pivot is not None else 0
    guess = disc.check_guessing_optimal(ensemble, pivot, opts)
    report["verdicts"]["guessing_optimal"] = guess.verdict
    if guess.holds:
        cheap = disc.classify_from_differences(ensemble, pivot, guess, opts)
        report["verdicts"]["equality_from_differences"] = cheap.verdict
        report["values"]["p_ppt_from_pivot"] = cheap.p_ppt
        if cheap.verdict != verdict.verdict and verdict.verdict != disc.INDETERMINATE:
            print(
                f"error: difference test says {cheap.verdict}, "
                f"optimization says {verdict.verdict}",
                file=sys.stderr,
            )
            return EXIT_ERROR
        report["certificates"]["pivot_memberships"] = {
            "memberships": [
                _cert_entry(i, ensemble.weighted(pivot) - ensemble.weighted(i), cert)
                for (i, cert) in zip(
                    [j for j in range(len(ensemble)) if j != pivot], guess.certificates
                )
            ]
        }
    print(f"p_ppt = {verdict.p_ppt:.9f}  p_global = {verdict.p_g:.9f}  "
          f"verdict: {verdict.verdict} (margin {verdict.margin:.3e})")
    default = EXIT_OK if verdict.verdict != disc.INDETERMINATE else EXIT_INDETERMINATE
    return _finish(report, args, default)


def cmd_witness(args) -> int:
    opts = _solver_options(args)
    w = load_operator(args.operator)
    report = _base_report(args, {"operator": _digest(args.operator)})
    wc = cones.classify_witness(w, opts)
    report["verdicts"]["classification"] = wc.classification
    report["values"]["min_eigenvalue"] = min_eigenvalue(w)
    report["values"]["trace"] = w.trace
    cert_entry = _cert_entry(None, w, wc.certificate)
    report["certificates"]["witness"] = {"w": operator_to_dict(w),
                                         "memberships": [cert_entry]}
    if args.certificate:
        with open(args.certificate, "w") as fh:
            json.dump(cert_entry, fh, indent=1)
    print(f"classification: {wc.classification}  "
          f"(psd: {wc.is_psd}, decomposable: {wc.is_decomposable})")
    default = EXIT_OK if wc.classification != cones.UNKNOWN else EXIT_INDETERMINATE
    return _finish(report, args, default)


def cmd_construct(args) -> int:
    opts = _solver_options(args)
    inputs = {}
    if args.dew:
        inputs["dew"] = _digest(args.dew)
        w = load_operator(args.dew)
        p = load_operator(args.pos) if args.pos else None
        if args.pos:
            inputs["pos"] = _digest(args.pos)
        ensemble = ens.ensemble_from_dew(w, p, opts)
    else:
        witnesses = [load_operator(path) for path in args.dews]
        inputs["dews"] = [_digest(path) for path in args.dews]
        lambdas = args.lambdas if args.lambdas else None
        ensemble = ens.ensemble_from_dews(witnesses, lambdas, opts)
    report = _base_report(args, inputs)
    report["certificates"]["constructed"] = {"ensemble": ens.ensemble_to_dict(ensemble)}
    verdict = disc.classify_equality(ensemble, opts)
    report["values"].update({
        "p_ppt": verdict.p_ppt, "p_global": verdict.p_g, "margin": verdict.margin,
    })
    report["verdicts"]["equality"] = verdict.verdict
    if args.ensemble_out:
        ens.save_ensemble(ensemble, args.ensemble_out)
        print(f"ensemble written to {args.ensemble_out}")
    print(f"{len(ensemble)}-state ensemble constructed; equality verdict: {verdict.verdict} "
          f"(margin {verdict.margin:.3e})")
    default = EXIT_OK if verdict.verdict == disc.NOT_EQUAL else EXIT_INDETERMINATE
    return _finish(report, args, default)


def _example_grid(example: int, count: int):
    if example == 1:
        return [(k + 1) / count for k in range(count)]
    if example == 3:
        return [0.9 * k / (count - 1) if count > 1 else 0.0 for k in range(count)]
    return [k / (count - 1) if count > 1 else 0.0 for k in range(count)]


def _reproduce_point(example: int, d: int, lam: float, t: float, opts):
    """One (closed form, numeric) comparison; returns (report fragment, ok)."""
    frag = {"example": example, "d": d}
    if example == 1:
        ensemble, measurement = ens.bell_mixture_ensemble(d, lam)
        closed = ens.closed_form_bell_mixture(d, lam)
        result = disc.optimal_ppt(ensemble, opts)
        check = disc.measurement_witness_check(ensemble, measurement, opts)
        lower = disc.evaluate_measurement(ensemble, measurement)
        frag.update({
            "lam": lam, "closed_form": closed, "numeric": result.value,
            "witness_condition": check.condition_holds,
            "p_local_bounds": [lower, result.value],
        })
        numeric, certs = result.value, (ensemble, result)
    elif example == 2:
        ensemble = ens.orthogonal_triple_ensemble()
        closed = 1.0
        result = disc.optimal_ppt_dual(ensemble, opts)
        frag.update({"t": t, "closed_form": closed, "numeric": result.value})
        h = ens.orthogonal_triple_dual(t)
        diffs = [cones.check_decomposable(h - ensemble.weighted(i), opts)
                 for i in range(len(ensemble))]
        frag["dual_family"] = {
            "t": t,
            "trace": h.trace,
            "memberships": [c.verdict for c in diffs],
            "dew_at_last": min_eigenvalue(h - ensemble.weighted(2)) < -disc.TAU_PSD,
        }
        numeric, certs = result.value, (ensemble, result)
    else:
        ensemble = ens.anchored_bell_ensemble(d, lam)
        closed = ens.closed_form_anchored(d)
        result = disc.optimal_ppt(ensemble, opts)
        frag.update({"lam": lam, "closed_form": closed, "numeric": result.value,
                     "equality_threshold": ens.equality_threshold_anchored(d)})
        numeric, certs = result.value, (ensemble, result)
    frag["abs_err"] = abs(numeric - closed)
    frag["iterations"] = result.solver["iterations"]
    return frag, certs


def cmd_reproduce(args) -> int:
    opts = _solver_options(args)
    example = args.example
    d = args.d if args.d is not None else 2
    lam = args.lam if args.lam is not None else (1.0 if example == 1 else 0.5)
    t = args.t if args.t is not None else 0.0
    if example == 1 and not (0.0 < lam <= 1.0):
        raise ValidationError(f"family 1 needs 0 < lambda <= 1, got {lam}")
    if example == 3 and not (0.0 <= lam < 1.0):
        raise ValidationError(f"family 3 needs 0 <= lambda < 1, got {lam}")

    if args.table:
        rows = []
        for param in _example_grid(example, args.grid):
            t0 = time.perf_counter()
            frag, _ = _reproduce_point(example, d, param if example != 2 else lam,
                                       param if example == 2 else t, opts)
            wall = 1e3 * (time.perf_counter() - t0)
            rows.append([param, frag["closed_form"], frag["numeric"],
                         frag["abs_err"], frag["iterations"], round(wall, 1)])
        target = open(args.out, "w", newline="") if args.out else sys.stdout
        try:
            writer = csv.writer(target)
            writer.writerow(["param", "closed_form", "numeric", "abs_err",
                             "iterations", "wall_ms"])
            writer.writerows(rows)
        finally:
            if args.out:
                target.close()
                print(f"table written to {args.out}")
        worst = max(r[3] for r in rows)
        return EXIT_OK if worst <= 1e-5 else EXIT_INDETERMINATE

    report = _base_report(args, {})
    t0 = time.perf_counter()
    frag, (ensemble, result) = _reproduce_point(example, d, lam, t, opts)
    wall = 1e3 * (time.perf_counter() - t0)
    report["values"] = frag
    report["solver"] = dict(result.solver, wall_ms=wall)
    report["certificates"]["solve"] = _result_certificates(ensemble, result)
    ok = frag["abs_err"] <= 1e-5
    report["verdicts"]["reproduced"] = bool(ok)
    print(f"example {example}: closed form {frag['closed_form']:.9f}, "
          f"numeric {frag['numeric']:.9f}, abs err {frag['abs_err']:.2e}")
    return _finish(report, args, EXIT_OK if ok else EXIT_INDETERMINATE)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pptdisc",
        description="Minimum-error discrimination of bipartite ensembles "
                    "under global and PPT measurements",
    )
    parser.add_argument("--version", action="version", version=f"pptdisc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_solver_flags(p):
        p.add_argument("--eps-feas", type=float, default=None,
                       help="feasibility tolerance (default 1e-7)")
        p.add_argument("--eps-gap", type=float, default=None,
                       help="duality gap tolerance (default 1e-7)")
        p.add_argument("--max-iter", type=int, default=None,
                       help="iteration cap (default 200000)")
        p.add_argument("--seed", type=int, default=None,
                       help="seed for the optional random restart; default path is deterministic")
        p.add_argument("--out", default=None, help="write the JSON run report here")

    p = sub.add_parser("solve", help="solve one discrimination program")
    p.add_argument("--ensemble", required=True)
    p.add_argument("--mode", choices=["global", "ppt", "dual"], required=True)
    add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("classify", help="decide whether PPT measurements reach the global optimum")
    p.add_argument("--ensemble", required=True)
    p.add_argument("--pivot", type=int, default=None,
                   help="item index for the difference-based cross-check (0-based)")
    add_solver_flags(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("witness", help="classify a Hermitian operator")
    p.add_argument("--operator", required=True)
    p.add_argument("--certificate", default=None, help="write the certificate JSON here")
    add_solver_flags(p)
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("construct", help="build a nonlocal ensemble from decomposable witnesses")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--dew", default=None, help="witness operator file (two-state construction)")
    group.add_argument("--dews", nargs="+", default=None, help="witness operator files")
    p.add_argument("--pos", default=None, help="compensator operator file for --dew")
    p.add_argument("--lambdas", nargs="+", type=float, default=None,
                   help="positive scales for --dews (default: 1/max eigenvalue each)")
    p.add_argument("--ensemble-out", default=None, help="write the constructed ensemble here")
    add_solver_flags(p)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("reproduce", help="rebuild a catalog family and compare with its closed form")
    p.add_argument("--example", type=int, choices=[1, 2, 3], required=True)
    p.add_argument("--d", type=int, default=None, help="local dimension (families 1 and 3)")
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="mixing parameter")
    p.add_argument("--t", type=float, default=None, help="dual family parameter (family 2)")
    p.add_argument("--table", action="store_true", help="sweep a parameter grid and emit CSV")
    p.add_argument("--grid", type=int, default=5, help="number of grid points for --table")
    add_solver_flags(p)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args._echo = argv
    try:
        return args.func(args)
    except (ValidationError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
