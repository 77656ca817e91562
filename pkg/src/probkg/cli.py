"""Command-line entry point.

Machine-readable output goes to standard output; every diagnostic goes to
standard error.  Exit codes: 0 success, 1 usage, 2 data error, 3 timeout.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .bench import report_digest, run_suite
from .boxes import finite_diff_check, fit, parse_axioms, space_to_json
from .circuits import (
    CircuitCache,
    compile as compile_formula,
    format_circuit,
    model_count,
    parse_formula,
    query_probabilities,
    safe_plan,
    SafePlan,
    fmt_safe_plan,
    triple_weights,
    wmc,
)
from .errors import ProbKgError, Timeout
from .lineage import FALSE, TRUE, fmt_lineage, formula_vars, plus_of, to_boolean
from .oracle import enumerate_worlds
from .query import PlanOptions, evaluate, parse_query, plan
from .query.planner import fmt_plan
from .sampling import SamplerConfig
from .store import graph_stats, parse_graph_file, serialize_term


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the documented code is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="base RNG seed (default 0)")
    p.add_argument(
        "--threads",
        type=int,
        default=os.cpu_count() or 1,
        help="worker budget for parallel sections (all current sections run "
        "sequentially; the flag is accepted for interface stability)",
    )
    p.add_argument(
        "--format",
        choices=("text", "json"),
        default="text",
        help="stdout format (default text)",
    )
    return p


def _build() -> argparse.ArgumentParser:
    parser = _Parser(prog="probkg", description=__doc__)
    common = _common()
    sub = parser.add_subparsers(dest="cmd", required=True, metavar="<command>")

    p_load = sub.add_parser("load", parents=[common], help="validate a graph file and print stats")
    p_load.add_argument("graph", help="path to a .pkg graph file")
    p_load.set_defaults(func=_cmd_load)

    p_query = sub.add_parser("query", parents=[common], help="evaluate a query")
    p_query.add_argument("graph", help="path to a .pkg graph file")
    p_query.add_argument("-q", "--query", required=True, help="query text, or - for stdin")
    p_query.add_argument("--prob", action="store_true", help="attach answer probabilities")
    p_query.add_argument("--no-pushdown", action="store_true", help="disable filter pushdown")
    p_query.add_argument(
        "--strategy",
        choices=("closed", "naive", "stratified", "sprt", "cascade"),
        default="closed",
        help="threshold-filter strategy (default closed-form)",
    )
    p_query.add_argument("--explain", action="store_true", help="print the plan and per-answer lineage")
    p_query.set_defaults(func=_cmd_query)

    p_compile = sub.add_parser(
        "compile", parents=[common], help="compile a formula or a query's lineage to circuits"
    )
    p_compile.add_argument("graph", nargs="?", help="path to a .pkg graph file (with -q)")
    p_compile.add_argument("-f", "--formula", help="boolean formula text, e.g. 'x1 & (x2 | ~x3)'")
    p_compile.add_argument("-q", "--query", help="query text, or - for stdin (needs a graph)")
    p_compile.set_defaults(func=_cmd_compile)

    p_oracle = sub.add_parser("oracle", parents=[common], help="brute-force world enumeration")
    p_oracle.add_argument("graph", help="path to a .pkg graph file")
    p_oracle.add_argument("-q", "--query", required=True, help="query text, or - for stdin")
    p_oracle.set_defaults(func=_cmd_oracle)

    p_bench = sub.add_parser("bench", parents=[common], help="run a benchmark suite")
    p_bench.add_argument("suite", help="path to a suite JSON file")
    p_bench.add_argument("--out", help="output directory (default: next to the suite file)")
    p_bench.set_defaults(func=_cmd_bench)

    p_fit = sub.add_parser("fit-boxes", parents=[common], help="fit concept boxes to axioms")
    p_fit.add_argument("axioms", help="path to an axiom file")
    p_fit.add_argument("-d", "--dim", type=int, required=True, help="embedding dimension")
    p_fit.add_argument("--lr", type=float, default=0.1, help="initial step size (default 0.1)")
    p_fit.add_argument("--iters", type=int, default=500, help="iteration budget (default 500)")
    p_fit.add_argument("--tau", type=float, default=0.1, help="softness temperature (default 0.1)")
    p_fit.add_argument(
        "--check", action="store_true", help="also report the finite-difference gradient error"
    )
    p_fit.set_defaults(func=_cmd_fit_boxes)

    return parser


def _read_graph(path: str):
    with open(path, encoding="utf-8") as fh:
        return parse_graph_file(fh.read())


def _read_query(text: str) -> str:
    if text == "-":
        return sys.stdin.read()
    return text


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


# --- subcommands ---------------------------------------------------------------


def _cmd_load(args) -> int:
    stats = graph_stats(_read_graph(args.graph))
    if args.format == "json":
        print(json.dumps(stats.to_dict(), sort_keys=True))
    else:
        for k, v in sorted(stats.to_dict().items()):
            print(f"{k}: {v}")
    return 0


def _plan_options(args) -> PlanOptions:
    return PlanOptions(
        pushdown=not args.no_pushdown,
        strategy=args.strategy,
        sampler=SamplerConfig(strategy="naive", seed=args.seed)
        if args.strategy != "closed"
        else None,
        seed=args.seed,
    )


def _binding_strs(bindings: dict) -> dict[str, str]:
    return {name: serialize_term(t) for name, t in sorted(bindings.items())}


def _cmd_query(args) -> int:
    graph = _read_graph(args.graph)
    ast = parse_query(_read_query(args.query))
    opts = _plan_options(args)
    pl = plan(ast, opts, graph)

    if args.explain:
        print(fmt_plan(pl))
        sp = safe_plan(ast)
        if isinstance(sp, SafePlan):
            print(fmt_safe_plan(sp))
        res = evaluate(pl, graph, mode="lineage")
        for m in res.mappings:
            row = _binding_strs(m.bindings)
            if args.format == "json":
                print(json.dumps({"bindings": row, "lineage": fmt_lineage(m.lineage)}, sort_keys=True))
            else:
                pairs = "\t".join(f"?{k}={v}" for k, v in row.items())
                print(f"{pairs}\tlineage={fmt_lineage(m.lineage)}")
        _warn_counts(res)
        return 0

    if args.prob:
        answers, route = query_probabilities(graph, ast, opts)
        _log(f"route: {route}")
        rows = sorted(
            (
                {name: serialize_term(t) for name, t in key if t is not None},
                p,
            )
            for key, p in answers.items()
        )
        for bindings, p in rows:
            if args.format == "json":
                print(json.dumps({"bindings": bindings, "probability": p}, sort_keys=True))
            else:
                pairs = "\t".join(f"?{k}={v}" for k, v in bindings.items())
                print(f"{pairs}\tp={p:.17g}" if pairs else f"p={p:.17g}")
        return 0

    res = evaluate(pl, graph, mode="plain")
    for m in res.mappings:
        row = _binding_strs(m.bindings)
        if args.format == "json":
            print(json.dumps({"bindings": row}, sort_keys=True))
        else:
            print("\t".join(f"?{k}={v}" for k, v in row.items()))
    _warn_counts(res)
    return 0


def _warn_counts(res) -> None:
    for key, n in sorted(res.warnings.items()):
        _log(f"warning: {key} x{n}")


def _cmd_compile(args) -> int:
    if args.formula and args.query:
        raise ProbKgError("give either --formula or --query, not both")
    if args.formula:
        f = parse_formula(args.formula)
        if f is TRUE or f is FALSE:
            print(json.dumps({"constant": f is TRUE, "nodes": 1, "models": 1.0 if f is TRUE else 0.0}))
            return 0
        c = compile_formula(f)
        if args.format == "json":
            print(
                json.dumps(
                    {
                        "nodes": len(c.nodes),
                        "vars": len(c.varsets[c.root]),
                        "models": model_count(c),
                        "circuit": format_circuit(c),
                    },
                    sort_keys=True,
                )
            )
        else:
            print(format_circuit(c), end="")
            _log(f"nodes={len(c.nodes)} models={model_count(c):.17g}")
        return 0
    if not args.query:
        raise ProbKgError("compile needs --formula or --query")
    if not args.graph:
        raise ProbKgError("compile --query needs a graph file")
    graph = _read_graph(args.graph)
    ast = parse_query(_read_query(args.query))
    res = evaluate(plan(ast, PlanOptions(), graph), graph, mode="lineage")
    by_answer: dict[tuple, list] = {}
    for m in res.mappings:
        key = tuple((v, m.bindings.get(v)) for v in ast.select_vars)
        by_answer.setdefault(key, []).append(m.lineage)
    cache = CircuitCache()
    for key in sorted(by_answer, key=lambda k: [(v, serialize_term(t) if t else "") for v, t in k]):
        f = to_boolean(plus_of(by_answer[key]))
        bindings = {v: serialize_term(t) for v, t in key if t is not None}
        if f is TRUE or f is FALSE:
            p, nodes = (1.0 if f is TRUE else 0.0), 1
        else:
            c = compile_formula(f, circuit_cache=cache)
            p = wmc(c, triple_weights(graph, formula_vars(f)))
            nodes = len(c.nodes)
        if p == 0.0:
            continue
        if args.format == "json":
            print(json.dumps({"bindings": bindings, "probability": p, "nodes": nodes}, sort_keys=True))
        else:
            pairs = "\t".join(f"?{k}={v}" for k, v in bindings.items())
            print(f"{pairs}\tp={p:.17g}\tnodes={nodes}" if pairs else f"p={p:.17g}\tnodes={nodes}")
    _log(f"cache: {cache.hits} hits, {cache.misses} misses")
    return 0


def _cmd_oracle(args) -> int:
    graph = _read_graph(args.graph)
    ast = parse_query(_read_query(args.query))
    report = enumerate_worlds(graph, ast)
    _log(f"worlds evaluated: {report.worlds_evaluated}")
    for key, p in report.probabilities.items():
        bindings = dict(key)
        if args.format == "json":
            print(json.dumps({"bindings": bindings, "probability": p}, sort_keys=True))
        else:
            pairs = "\t".join(f"?{k}={v}" for k, v in bindings.items())
            print(f"{pairs}\tp={p:.17g}" if pairs else f"p={p:.17g}")
    return 0


def _cmd_bench(args) -> int:
    out_dir = args.out or (os.path.dirname(os.path.abspath(args.suite)))
    report = run_suite(args.suite, out_dir=out_dir)
    _log(f"report written to {out_dir}/report.json and report.csv")
    print(report_digest(report))
    return 0


def _cmd_fit_boxes(args) -> int:
    with open(args.axioms, encoding="utf-8") as fh:
        axioms = parse_axioms(fh.read())
    space, trace = fit(
        axioms, args.dim, lr=args.lr, iters=args.iters, tau=args.tau, seed=args.seed
    )
    _log(f"iterations: {len(trace) - 1}, final loss: {trace[-1]:.6g}")
    if args.check:
        _log(f"gradient check: {finite_diff_check(space, axioms):.3g}")
    doc = space_to_json(space)
    doc["final_loss"] = trace[-1]
    print(json.dumps(doc, sort_keys=True) if args.format == "json" else json.dumps(doc, indent=2))
    return 0


def main(argv=None) -> int:
    parser = _build()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else (0 if e.code is None else 1)
    try:
        return args.func(args)
    except Timeout as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except ProbKgError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (FileNotFoundError, IsADirectoryError, PermissionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as e:
        print(f"error: invalid JSON: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        return 0


if __name__ == "__main__":
    sys.exit(main())
