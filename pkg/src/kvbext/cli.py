"""Command-line front end.

Exit codes: 0 success, 1 the mathematical verdict failed (or a pipeline
stage refused the input), 2 an input file or argument could not be parsed,
3 a parsed problem violates its invariants.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import engineering, halfline, kvb_core, linalg, relations, selftest
from .engineering import RelationBackend
from .errors import KVBError, ParseError, ValidationError
from .kvb_core import BirmanParameter, GapInterval
from .serialization import (
    csv_text,
    decode_columns,
    dumps,
    encode_columns,
    encode_gap,
    parse_lambda_list,
    parse_set_spec,
    problem_from_json,
    problem_to_json,
    targets_from_json,
)

EXIT_OK, EXIT_VERDICT, EXIT_PARSE, EXIT_INVALID = 0, 1, 2, 3
SPECTRUM_HEADER = ("eigenvalue", "multiplicity", "residual")
SWEEP_HEADER = ("lambda", "beta_closed", "beta_general", "abs_diff")


class Output:
    """Collects the payload of a command and writes it once, as JSON or CSV."""

    def __init__(self, args):
        self.format = args.format
        self.path = args.out

    def write(self, payload: dict, table: tuple[Sequence[str], list] | None = None):
        if self.format == "csv":
            if table is not None:
                text = csv_text(*table)
            else:
                rows = [(k, v) for k, v in payload.items() if not isinstance(v, (dict, list))]
                text = csv_text(("key", "value"), rows)
        else:
            text = dumps(payload) + "\n"
        if self.path:
            Path(self.path).write_text(text)
        else:
            sys.stdout.write(text)


def _load_problem(path: str):
    if not Path(path).is_file():
        raise ParseError(f"no such file: {path}")
    p = problem_from_json(Path(path))
    kvb_core.validate(p)
    return p


def _gap_arg(args, p) -> GapInterval:
    a = p.gap.a if args.a is None else float(args.a)
    b = p.gap.b if args.b is None else float(args.b)
    try:
        return GapInterval(a, b)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def _spectrum(rel) -> list[dict]:
    return [
        {"eigenvalue": e.value, "multiplicity": e.multiplicity, "residual": e.residual}
        for e in relations.eigenpairs(rel)
    ]


def _spectrum_table(spec: list[dict]):
    return SPECTRUM_HEADER, [(s["eigenvalue"], s["multiplicity"], s["residual"]) for s in spec]


def _matrix_or_none(rel):
    try:
        return encode_columns(relations.to_matrix(rel))
    except KVBError:
        return None


# ---------------------------------------------------------------------------
# commands


def cmd_check_gap(args) -> int:
    p = _load_problem(args.problem)
    gap = _gap_arg(args, p)
    verdict = kvb_core.gap_verdict(p.domain, p.action, gap)
    Output(args).write(
        {
            "gap": encode_gap(gap),
            "branch": verdict.branch,
            "margin": verdict.margin,
            "holds": verdict.holds,
            "lower_bound": kvb_core.lower_bound(p),
        }
    )
    return EXIT_OK if verdict.holds else EXIT_VERDICT


def cmd_adjoint(args) -> int:
    p = _load_problem(args.problem)
    rel = kvb_core.adjoint_relation(p)
    oracle = relations.adjoint(kvb_core.graph_of_s(p))
    payload = {
        "dim": rel.dim,
        "domain_dim": p.domain.dim,
        "deficiency_index": p.deficiency_index,
        "oracle_distance": rel.distance(oracle),
        "kernel_frame": encode_columns(p.kernel_frame.basis),
        "multivalued_part": encode_columns(relations.multivalued_part(rel).basis),
    }
    if args.psi is not None:
        psi = decode_columns([_json_arg(args.psi)], p.dim)[:, 0]
        phi = decode_columns([_json_arg(args.phi)], p.dim)[:, 0]
        triple = kvb_core.decompose(p, psi, phi)
        payload["decomposition"] = {
            "f": [[complex(x).real, complex(x).imag] for x in triple.f],
            "w": [[complex(x).real, complex(x).imag] for x in triple.w],
            "u": [[complex(x).real, complex(x).imag] for x in triple.u],
            "residual": triple.residual,
        }
    Output(args).write(payload)
    return EXIT_OK if payload["oracle_distance"] < 1e-9 else EXIT_VERDICT


def _json_arg(text):
    if text is None:
        raise ParseError("--psi and --phi must be given together")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed vector: {exc}") from None


def _parameter_from_args(args, p) -> BirmanParameter:
    if args.t_file:
        try:
            data = json.loads(Path(args.t_file).read_text())
            support = decode_columns(data["support"], p.dim)
            k = support.shape[1]
            matrix = decode_columns(data["matrix"], k) if k else np.zeros((0, 0))
        except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ParseError(f"bad parameter file: {exc}") from None
        frame = linalg.orthonormalize(support, linalg.DEFAULT_TOL, p.dim)
        # matrix is given in the supplied support basis; transport it to the frame
        t_op = support @ matrix @ np.linalg.pinv(support)
        return BirmanParameter(frame, frame.basis.conj().T @ t_op @ frame.basis)
    beta = float(args.beta)
    return kvb_core.scalar_parameter(p, beta)


def cmd_extend(args) -> int:
    p = _load_problem(args.problem)
    t = _parameter_from_args(args, p)
    ext = kvb_core.build_extension(p, t)
    inv = kvb_core.invertibility_report(ext, t)
    spec = _spectrum(ext.relation)
    defect = relations.selfadjoint_defect(ext.relation)
    payload = {
        "selfadjoint_defect": defect,
        "extends_residual": ext.relation.contains(kvb_core.graph_of_s(p)),
        "kernel_dim": inv.kernel.dim,
        "t_kernel_dim": inv.t_kernel.dim,
        "kernel_distance": inv.kernel_distance,
        "injective": inv.injective,
        "invertible": inv.invertible,
        "matrix": _matrix_or_none(ext.relation),
        "spectrum": spec,
    }
    Output(args).write(payload, _spectrum_table(spec))
    return EXIT_OK if relations.is_selfadjoint(ext.relation) and inv.consistent else EXIT_VERDICT


def cmd_kvn(args) -> int:
    p = _load_problem(args.problem)
    lam = float(args.lam)
    ext = kvb_core.krein_type_extension(p, lam)
    spec = _spectrum(ext.relation)
    mult = sum(s["multiplicity"] for s in spec if abs(s["eigenvalue"] - lam) <= relations.CLUSTER_TOL)
    payload = {
        "lambda": lam,
        "selfadjoint_defect": relations.selfadjoint_defect(ext.relation),
        "multiplicity": mult,
        "deficiency_index": p.deficiency_index,
        "matrix": _matrix_or_none(ext.relation),
        "spectrum": spec,
    }
    Output(args).write(payload, _spectrum_table(spec))
    return EXIT_OK if mult >= p.deficiency_index else EXIT_VERDICT


def cmd_beta(args) -> int:
    p = _load_problem(args.problem)
    lam = float(args.lam)
    beta = kvb_core.beta_unital(p, lam)
    via_beta = kvb_core.build_extension(p, kvb_core.scalar_parameter(p, beta)).relation
    krein = kvb_core.krein_type_extension(p, lam).relation
    distance = via_beta.distance(krein)
    Output(args).write({"lambda": lam, "beta": beta, "graph_distance": distance})
    return EXIT_OK if distance < 1e-9 else EXIT_VERDICT


def _engineer_payload(p, targets, tol):
    result = engineering.engineer(RelationBackend(p), targets)
    spec = [{"eigenvalue": s.eigenvalue, "multiplicity": s.multiplicity, "residual": s.residual} for s in result.spectrum]
    payload = {
        "targets": list(result.targets),
        "certificate": result.certificate.to_json(tol),
        "multiplicities": [
            {"lambda": lam, "observed": obs, "repeats": exp} for lam, (obs, exp) in result.multiplicities.items()
        ],
        "spectrum": spec,
    }
    ok = result.certificate.passed(tol) and result.multiplicities_ok
    return payload, spec, ok


def cmd_engineer(args) -> int:
    p = _load_problem(args.problem)
    targets = targets_from_json(args.targets)
    if len(targets) == 2 and isinstance(targets[0], engineering.SetSpec):
        spec_set, count = targets
        targets = engineering.net_targets(spec_set, count, p.gap).targets
    payload, spec, ok = _engineer_payload(p, targets, args.tol)
    Output(args).write(payload, _spectrum_table(spec))
    return EXIT_OK if ok else EXIT_VERDICT


def cmd_netspec(args) -> int:
    p = _load_problem(args.problem)
    plan = engineering.net_targets(parse_set_spec(args.set), args.count, p.gap)
    payload, spec, ok = _engineer_payload(p, plan.targets, args.tol)
    payload = {"covering_radius": plan.covering_radius, **payload}
    Output(args).write(payload, _spectrum_table(spec))
    return EXIT_OK if ok else EXIT_VERDICT


def cmd_halfline_demo(args) -> int:
    report = halfline.reproduce_example(args.lam, complex(args.p))
    Output(args).write(report.to_json())
    ok = abs(report.beta_closed - report.beta_general) < 1e-10
    ok = ok and all(v < 1e-10 for v in report.residuals.values())
    return EXIT_OK if ok else EXIT_VERDICT


def cmd_halfline_sweep(args) -> int:
    if args.endpoint:
        result, note = halfline.endpoint_probe()
    else:
        grid = np.linspace(args.start, args.stop, args.steps) if args.steps else []
        result, note = halfline.beta_sweep(grid), None
    rows = [(r.lam, r.beta_closed, r.beta_general, r.abs_diff) for r in result.rows]
    payload = {
        "rows": [dict(zip(SWEEP_HEADER, row)) for row in rows],
        "max_abs_diff": result.max_abs_diff,
        "monotone": result.monotone,
    }
    if note:
        payload["note"] = note
    Output(args).write(payload, (SWEEP_HEADER, rows))
    return EXIT_OK if result.agrees and result.monotone else EXIT_VERDICT


def cmd_halfline_engineer(args) -> int:
    backend = halfline.as_backend(args.copies, mixing=args.mixing)
    targets = parse_lambda_list(args.targets)
    result = engineering.engineer(backend, targets)
    values = linalg.hermitian_eigs(result.birman.matrix)[0].tolist() if len(targets) else []
    payload = {
        "copies": args.copies,
        "targets": list(targets),
        "certificate": result.certificate.to_json(args.tol),
        "parameter_spectrum": values,
        "eigenvectors": [rec.v.to_json() for rec in result.certificate.records],
    }
    table = (("lambda", "y_norm", "eigen_residual"), [(r.lam, r.y_norm, r.eigen_residual) for r in result.certificate.records])
    Output(args).write(payload, table)
    return EXIT_OK if result.certificate.passed(args.tol) else EXIT_VERDICT


def cmd_oracle_selftest(args) -> int:
    report = selftest.run(args.count, args.seed, inject_fault=args.inject_fault)
    print(f"oracle-selftest: {args.count} instances in {report.runtime:.2f} s", file=sys.stderr)
    Output(args).write(report.to_json(), (("invariant", "passed", "worst"), [
        (name, report.passed[name], report.worst.get(name, 0.0)) for name in selftest.INVARIANTS
    ]))
    return EXIT_OK if report.ok else EXIT_VERDICT


def cmd_make_problem(args) -> int:
    if args.kind == "toy-t2":
        p = kvb_core.toy_t2()
    elif args.kind == "toy-t4":
        p = kvb_core.toy_t4()
    else:
        p = kvb_core.random_problem(np.random.default_rng(args.seed), args.dim, args.deficiency)
    Output(args).write(problem_to_json(p))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _common(parser: argparse.ArgumentParser, top: bool):
    default = (lambda v: v) if top else (lambda v: argparse.SUPPRESS)
    parser.add_argument("--tol", type=float, default=default(1e-10), help="residual tolerance (default 1e-10)")
    parser.add_argument("--seed", type=int, default=default(42), help="random seed (default 42)")
    parser.add_argument("--format", choices=("json", "csv"), default=default("json"))
    parser.add_argument("--out", default=default(None), help="output file (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kvbext", description="Self-adjoint extensions of gapped symmetric operators.")
    _common(parser, top=True)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        sp = sub.add_parser(name, help=help_text)
        _common(sp, top=False)
        sp.set_defaults(func=func)
        return sp

    sp = add("check-gap", cmd_check_gap, "test the gap inequality on a problem")
    sp.add_argument("problem")
    sp.add_argument("--a", help='left end (number or "-inf"); default from the file')
    sp.add_argument("--b", help="right end; default from the file")

    sp = add("adjoint", cmd_adjoint, "assemble the adjoint relation and compare with the oracle")
    sp.add_argument("problem")
    sp.add_argument("--psi", help="JSON vector to decompose (needs --phi)")
    sp.add_argument("--phi", help="JSON image vector")

    sp = add("extend", cmd_extend, "build S_T for a Birman parameter")
    sp.add_argument("problem")
    group = sp.add_mutually_exclusive_group(required=True)
    group.add_argument("--beta", help='scalar parameter on all of ker S* ("inf" for S_D)')
    group.add_argument("--t-file", help='JSON {"support": columns, "matrix": columns}')

    sp = add("kvn", cmd_kvn, "Krein-type extension with eigenvalue lambda")
    sp.add_argument("problem")
    sp.add_argument("--lambda", dest="lam", type=float, required=True)

    sp = add("beta", cmd_beta, "scalar Birman parameter of the Krein-type extension (deficiency 1)")
    sp.add_argument("problem")
    sp.add_argument("--lambda", dest="lam", type=float, required=True)

    sp = add("engineer", cmd_engineer, "prescribe eigenvalues inside the gap")
    sp.add_argument("problem")
    sp.add_argument("targets", help="targets JSON file")

    sp = add("netspec", cmd_netspec, "prescribe a dyadic net of a closed set")
    sp.add_argument("problem")
    sp.add_argument("--set", required=True, help='points and intervals, e.g. "0;[0.25,0.5]"')
    sp.add_argument("--count", type=int, required=True)

    hl = sub.add_parser("halfline", help="the half-line model")
    hl_sub = hl.add_subparsers(dest="halfline_command", required=True)

    def add_hl(name, func, help_text):
        sp = hl_sub.add_parser(name, help=help_text)
        _common(sp, top=False)
        sp.set_defaults(func=func)
        return sp

    sp = add_hl("demo", cmd_halfline_demo, "unital computation at one lambda")
    sp.add_argument("--lambda", dest="lam", type=float, default=0.75)
    sp.add_argument("--p", default="1", help="deficiency coefficient (complex literal, e.g. 2j)")

    sp = add_hl("beta-sweep", cmd_halfline_sweep, "compare both beta routes on a grid")
    sp.add_argument("--from", dest="start", type=float, default=-3.0)
    sp.add_argument("--to", dest="stop", type=float, default=0.99)
    sp.add_argument("--steps", type=int, default=100)
    sp.add_argument("--endpoint", action="store_true", help="probe lambda = 1 - 10^-k, k = 2..8")

    sp = add_hl("engineer", cmd_halfline_engineer, "run the pipeline on M copies")
    sp.add_argument("--copies", type=int, default=1)
    sp.add_argument("--targets", required=True, help="comma-separated, e.g. 0.75,-3")
    sp.add_argument("--mixing", action="store_true", help="rotate deficiency frames across copies")

    sp = add("oracle-selftest", cmd_oracle_selftest, "seeded random-instance invariant suite")
    sp.add_argument("--count", type=int, default=200)
    sp.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)

    sp = add("make-problem", cmd_make_problem, "write a problem file")
    sp.add_argument("kind", choices=("toy-t2", "toy-t4", "random"))
    sp.add_argument("--dim", type=int, default=8)
    sp.add_argument("--deficiency", type=int, default=2)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    if args.tol <= 0:
        print("error: --tol must be positive", file=sys.stderr)
        return EXIT_PARSE
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"ParseError: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except KVBError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VERDICT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
