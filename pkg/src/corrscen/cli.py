"""Command-line interface.

Exit codes form a pipeline contract:
  0  success / Consistent / Classical / StarForest / Realizable
  1  input or usage error
  2  inconclusive (budget exhausted, witness not applicable)
  3  non-classicality or violation found (witness fired, correlation
     constraint broken, obstruction present, support not realizable)
All results are single JSON documents on stdout.
"""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction

import numpy as np

from . import jsonio

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INCONCLUSIVE = 2
EXIT_FINDING = 3


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> Parser:
    parser = Parser(prog="corrscen", description=__doc__,
                    formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--schema", action="store_true",
                        help="print the JSON document formats and exit")
    parser.add_argument("--deterministic", action="store_true",
                        help="force sequential deterministic search paths")
    parser.add_argument("-o", "--output", default=None, help="write JSON here instead of stdout")
    sub = parser.add_subparsers(dest="command")

    sp = sub.add_parser("validate-scenario", help="check scenario invariants")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--strict", action="store_true",
                    help="also flag unary (single-measurement) sources")

    sp = sub.add_parser("check-correlation", help="factorization constraints of a distribution")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--dist", default="-")
    sp.add_argument("--eps", type=float, default=1e-9)

    sp = sub.add_parser("classify-scenario", help="star forest or obstruction witness")
    sp.add_argument("--scenario", required=True)

    sp = sub.add_parser("decide", help="exact classicality decisions")
    sp.add_argument("kind", choices=["p4", "ak"])
    sp.add_argument("--dist", default="-")
    sp.add_argument("--arms", type=int, default=None, help="number of arms for ak")
    sp.add_argument("--strategy-budget", type=int, default=20000)

    sp = sub.add_parser("witness", help="one-sided non-classicality witnesses")
    sp.add_argument("kind", choices=["entropy", "chsh-c3", "hardy-c4", "ancestor"])
    sp.add_argument("--dist", default="-")
    sp.add_argument("--scenario", default=None)
    sp.add_argument("--eps", type=float, default=1e-9)

    sp = sub.add_parser("search-model", help="bounded hidden-variable search")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--dist", default="-")
    sp.add_argument("--k", type=int, required=True, help="hidden values per source")
    sp.add_argument("--support", action="store_true",
                    help="decide support realizability (possibilistic) instead of fitting")
    sp.add_argument("--node-budget", type=int, default=None)
    sp.add_argument("--eps-fit", type=float, default=1e-6)
    sp.add_argument("--restarts", type=int, default=40)
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("gen", help="generate reference objects")
    sp.add_argument("kind", choices=["pr-box", "perfect", "quantum-c3",
                                     "embed-bell", "embed-bgp"])
    sp.add_argument("--box", default=None, help="box JSON for embed-bell")
    sp.add_argument("--input-dists", default=None,
                    help="JSON file [[p(x)...],[p(y)...]] for embed-bell")
    sp.add_argument("--model", default=None, help="bilocal model JSON for embed-bgp")
    sp.add_argument("--emit", choices=["dist", "model"], default="dist",
                    help="quantum-c3 only: emit the distribution or the model")

    sp = sub.add_parser("transform", help="model/distribution transformations")
    sp.add_argument("kind", choices=["determinize", "interpolate", "time-reverse"])
    sp.add_argument("--model", default=None)
    sp.add_argument("--m0", default=None)
    sp.add_argument("--m1", default=None)
    sp.add_argument("--t", default=None)
    sp.add_argument("--dist", default=None)

    sp = sub.add_parser("eval", help="evaluate a model to its joint distribution")
    sp.add_argument("kind", choices=["classical", "quantum"])
    sp.add_argument("--model", default="-")
    sp.add_argument("--dimension-budget", type=int, default=4096)

    return parser


def _read(path):
    if path == "-" or path is None:
        return jsonio.load_json(sys.stdin)
    return jsonio.load_json(path)


def _emit(doc, args) -> None:
    doc.setdefault("schema", jsonio.SCHEMA)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            jsonio.dump_json(doc, fh)
    else:
        jsonio.dump_json(doc, sys.stdout)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_INPUT
    if args.schema:
        _emit(_schema_doc(), args)
        return EXIT_OK
    if not args.command:
        print("usage error: no command given (try --help)", file=sys.stderr)
        return EXIT_INPUT
    from .errors import CorrScenError, ResourceLimit, ScenarioValidationError
    try:
        return _dispatch(args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except ScenarioValidationError as err:
        _emit({"command": args.command, "valid": False,
               "violations": [{"kind": v.kind, "names": list(v.names), "message": v.message}
                              for v in err.violations]}, args)
        return EXIT_INPUT
    except ResourceLimit as err:
        _emit({"command": args.command, "verdict": "Inconclusive",
               "reason": str(err)}, args)
        return EXIT_INCONCLUSIVE
    except CorrScenError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT


def _dispatch(args) -> int:
    handler = {
        "validate-scenario": _cmd_validate,
        "check-correlation": _cmd_check_correlation,
        "classify-scenario": _cmd_classify,
        "decide": _cmd_decide,
        "witness": _cmd_witness,
        "search-model": _cmd_search,
        "gen": _cmd_gen,
        "transform": _cmd_transform,
        "eval": _cmd_eval,
    }[args.command]
    return handler(args)


def _cmd_validate(args) -> int:
    from .scenario import scenario_violations, validate_scenario

    doc = _read(args.scenario)
    violations = scenario_violations(doc, strict=args.strict)
    if violations:
        _emit({"command": "validate-scenario", "valid": False,
               "violations": [{"kind": v.kind, "names": list(v.names), "message": v.message}
                              for v in violations]}, args)
        return EXIT_INPUT
    s = validate_scenario(doc, strict=args.strict)
    _emit({"command": "validate-scenario", "valid": True,
           "scenario": jsonio.scenario_to_dict(s)}, args)
    return EXIT_OK


def _cmd_check_correlation(args) -> int:
    from .correlation import is_correlation

    s = jsonio.scenario_from_dict(_read(args.scenario))
    p = jsonio.dist_from_dict(_read(args.dist), eps=args.eps)
    report = is_correlation(s, p)
    _emit({"command": "check-correlation",
           "is_correlation": report.is_correlation,
           "checks_performed": report.checks_performed,
           "violations": [{"U": list(u), "W": list(w), "deviation": dev}
                          for u, w, dev in report.violations]}, args)
    return EXIT_OK if report.is_correlation else EXIT_FINDING


def _cmd_classify(args) -> int:
    from .scenario import StarForest, classify_graph_scenario

    s = jsonio.scenario_from_dict(_read(args.scenario))
    verdict = classify_graph_scenario(s)
    if isinstance(verdict, StarForest):
        _emit({"command": "classify-scenario", "classification": "StarForest",
               "components": [{"center": c, "leaves": list(ls)}
                              for c, ls in verdict.components]}, args)
        return EXIT_OK
    _emit({"command": "classify-scenario", "classification": "ContainsObstruction",
           "obstruction": {"kind": verdict.kind, "vertices": list(verdict.vertices)}}, args)
    return EXIT_FINDING


def _certificate_doc(cert):
    return {
        "coefficients": [float(v) for v in np.asarray(cert.coefficients).reshape(-1)],
        "classical_bound": cert.classical_bound,
        "box_value": cert.box_value,
        "gap": cert.gap,
        "exact_gap": str(cert.exact_gap),
    }


def _cmd_decide(args) -> int:
    from .bell import Classical, decide_ak, decide_p4

    p = jsonio.dist_from_dict(_read(args.dist))
    if args.kind == "p4":
        verdict = decide_p4(p, strategy_budget=args.strategy_budget)
    else:
        if args.arms is None:
            raise UsageError("decide ak needs --arms")
        verdict = decide_ak(p, args.arms, strategy_budget=args.strategy_budget)
    if isinstance(verdict, Classical):
        _emit({"command": "decide", "kind": args.kind, "verdict": "Classical",
               "n_strategies": len(verdict.weights),
               "weights": [{"strategy": [list(f) for f in strat], "weight": w}
                           for strat, w in sorted(verdict.weights.items())]}, args)
        return EXIT_OK
    _emit({"command": "decide", "kind": args.kind, "verdict": "NonClassical",
           "certificate": _certificate_doc(verdict.certificate)}, args)
    return EXIT_FINDING


def _witness_exit(report) -> int:
    return {"NonClassical": EXIT_FINDING, "Consistent": EXIT_OK,
            "Inconclusive": EXIT_INCONCLUSIVE}[report.verdict]


def _report_doc(report) -> dict:
    doc = {"verdict": report.verdict, "kind": report.kind}
    if report.slack is not None:
        doc["slack"] = report.slack
    if report.details:
        doc["details"] = _jsonable(report.details)
    return doc


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def _cmd_witness(args) -> int:
    from .witnesses import entropic_triangle_witness, hardy_c4_witness, monogamy_chsh_witness

    p = jsonio.dist_from_dict(_read(args.dist), eps=args.eps)
    if args.kind in ("entropy", "ancestor"):
        mutual, joint, triple = entropic_triangle_witness(p)
        fired = [r for r in (mutual, joint, triple) if r.non_classical]
        overall = max((mutual, joint, triple),
                      key=lambda r: (r.non_classical, r.slack or 0.0))
        doc = {"command": "witness", "kind": args.kind,
               "verdict": "NonClassical" if fired else "Consistent",
               "reports": [_report_doc(r) for r in (mutual, joint, triple)]}
        if args.kind == "ancestor":
            doc["common_ancestor_required"] = bool(
                mutual.non_classical or joint.non_classical or triple.non_classical)
        if fired:
            doc["slack"] = max(r.slack for r in fired)
        _emit(doc, args)
        return EXIT_FINDING if fired else EXIT_OK
    if args.kind == "chsh-c3":
        report = monogamy_chsh_witness(p)
    else:
        scenario = jsonio.scenario_from_dict(_read(args.scenario)) if args.scenario else None
        report = hardy_c4_witness(p, scenario=scenario)
    _emit({"command": "witness", "kind": args.kind, **_report_doc(report)}, args)
    return _witness_exit(report)


def _cmd_search(args) -> int:
    from .models import (Inconclusive, NotRealizableUpTo, Realizable, SupportPattern,
                         fit_probabilities, support_realizable)

    s = jsonio.scenario_from_dict(_read(args.scenario))
    p = jsonio.dist_from_dict(_read(args.dist))
    node_budget = args.node_budget
    if node_budget is None:
        node_budget = int(os.environ.get("CORRSCEN_BUDGET_NODES", 2_000_000))
    if args.support:
        sp = SupportPattern.of(p)
        result = support_realizable(s, sp, args.k, node_budget=node_budget)
        if isinstance(result, Realizable):
            _emit({"command": "search-model", "mode": "support", "verdict": "Realizable",
                   "model": jsonio.classical_model_to_dict(result.model)}, args)
            return EXIT_OK
        if isinstance(result, NotRealizableUpTo):
            _emit({"command": "search-model", "mode": "support",
                   "verdict": "NotRealizableUpTo", "k": result.k,
                   "complete": result.complete,
                   "support_size": len(sp.tuples)}, args)
            return EXIT_FINDING
        _emit({"command": "search-model", "mode": "support", "verdict": "Inconclusive",
               "reason": result.reason, "nodes": result.nodes}, args)
        return EXIT_INCONCLUSIVE
    result = fit_probabilities(s, p, args.k, eps_fit=args.eps_fit,
                               restarts=args.restarts, rng=args.seed)
    if result.certified:
        _emit({"command": "search-model", "mode": "fit", "verdict": "Model",
               "residual": result.residual,
               "model": jsonio.classical_model_to_dict(result.model)}, args)
        return EXIT_OK
    _emit({"command": "search-model", "mode": "fit", "verdict": "Inconclusive",
           "residual": result.residual}, args)
    return EXIT_INCONCLUSIVE


def _cmd_gen(args) -> int:
    from .bell import embed_bell_to_p4, embed_bgp_to_p5
    from .dist import perfect_correlation, pr_box_correlation
    from .quantum import build_c3_quantum, evaluate_quantum

    if args.kind == "pr-box":
        doc = jsonio.dist_to_dict(pr_box_correlation())
    elif args.kind == "perfect":
        doc = jsonio.dist_to_dict(perfect_correlation())
    elif args.kind == "quantum-c3":
        model = build_c3_quantum()
        if args.emit == "model":
            doc = jsonio.quantum_model_to_dict(model)
        else:
            doc = jsonio.dist_to_dict(evaluate_quantum(model))
    elif args.kind == "embed-bell":
        if not args.box or not args.input_dists:
            raise UsageError("gen embed-bell needs --box and --input-dists")
        box = jsonio.box_from_dict(_read(args.box))
        dists = _read(args.input_dists)
        doc = jsonio.dist_to_dict(embed_bell_to_p4(box, dists))
    else:
        if not args.model:
            raise UsageError("gen embed-bgp needs --model")
        doc = jsonio.dist_to_dict(embed_bgp_to_p5(_read(args.model)))
    doc["command"] = "gen"
    doc["kind"] = args.kind
    _emit(doc, args)
    return EXIT_OK


def _cmd_transform(args) -> int:
    from .bell import time_reverse_relabel
    from .models import determinize, interpolate

    if args.kind == "determinize":
        if not args.model:
            raise UsageError("transform determinize needs --model")
        m = jsonio.classical_model_from_dict(_read(args.model))
        doc = jsonio.classical_model_to_dict(determinize(m))
    elif args.kind == "interpolate":
        if not (args.m0 and args.m1 and args.t is not None):
            raise UsageError("transform interpolate needs --m0, --m1 and --t")
        m0 = jsonio.classical_model_from_dict(_read(args.m0))
        m1 = jsonio.classical_model_from_dict(_read(args.m1))
        t = Fraction(args.t) if "/" in str(args.t) else float(args.t)
        doc = jsonio.classical_model_to_dict(interpolate(m0, m1, t))
    else:
        if not args.dist:
            raise UsageError("transform time-reverse needs --dist")
        p = jsonio.dist_from_dict(_read(args.dist))
        doc = jsonio.dist_to_dict(time_reverse_relabel(p))
    doc["command"] = "transform"
    doc["kind"] = args.kind
    _emit(doc, args)
    return EXIT_OK


def _cmd_eval(args) -> int:
    from .models import evaluate_classical
    from .quantum import evaluate_quantum

    doc_in = _read(args.model)
    if args.kind == "classical":
        p = evaluate_classical(jsonio.classical_model_from_dict(doc_in))
    else:
        p = evaluate_quantum(jsonio.quantum_model_from_dict(doc_in),
                             dimension_budget=args.dimension_budget)
    doc = jsonio.dist_to_dict(p)
    doc["command"] = "eval"
    doc["kind"] = args.kind
    _emit(doc, args)
    return EXIT_OK


def _schema_doc() -> dict:
    return {
        "schema": jsonio.SCHEMA,
        "documents": {
            "scenario": {"measurements": [{"name": "a", "outcomes": 4}],
                         "sources": [{"name": "AB", "connects": ["a", "b"]}]},
            "distribution_dense": {"variables": ["a", "b"], "cardinalities": [2, 2],
                                   "probabilities": ["1/4 or 0.25", "..."]},
            "distribution_sparse": {"variables": ["a", "b"], "cardinalities": [2, 2],
                                    "support": [{"values": [0, 0], "p": 0.5}]},
            "box": {"parties": [{"settings": 2, "outcomes": 2}],
                    "table": ["settings-major then outcomes, last fastest"]},
            "classical_model": {"scenario": "...", "sources":
                                [{"name": "AB", "cardinality": 2, "dist": ["1/2", "1/2"]}],
                                "kernels": [{"measurement": "a", "sources": ["AB"],
                                             "table": ["rows over outcomes, last fastest"]}]},
            "quantum_model": {"scenario": "...",
                              "connection_dims": [{"source": "AB", "measurement": "a", "dim": 2}],
                              "states": [{"source": "AB", "matrix": [[["re", "im"]]]}],
                              "povms": [{"measurement": "a", "elements": ["matrices"]}]},
        },
        "exit_codes": {"0": "success / Consistent / Classical",
                       "1": "input error", "2": "inconclusive (budget)",
                       "3": "non-classical / violation found"},
        "environment": {"CORRSCEN_BUDGET_NODES": "default node budget for search-model"},
    }


if __name__ == "__main__":
    sys.exit(main())
