"""Synthetic workload generation and the timing harness.

Each generated graph comes with a deterministic twin — every mixture
literal replaced by its scalar mean, every existence annotation dropped —
so probabilistic overhead can be measured against a like-for-like
baseline.  Variant runs of the same query must agree on results before any
timing for that query is trusted.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import statistics
import time
from dataclasses import dataclass

from .distributions import Gaussian, Gmm, mean_of
from .errors import BenchConfigError, VariantMismatch
from .query.evaluator import evaluate
from .query.parser import parse_query
from .query.planner import PlanOptions, plan
from .sampling import derive_rng
from .store import (
    NUM_DATATYPE,
    Graph,
    Iri,
    Literal,
    DistLiteral,
    ProbTriple,
    parse_graph_file,
    serialize_graph,
    serialize_term,
)

ALLOWED_K = (1, 3, 5, 10)
DEFAULT_RUNS = 7
DEFAULT_WARMUPS = 2

_VARIANT_AXES = ("pushdown", "simjoin", "strategy", "graph")
_DEFAULT_VARIANTS = {
    "pushdown": [True, False],
    "simjoin": ["dedicated"],
    "strategy": ["closed"],
    "graph": ["prob"],
}


@dataclass(frozen=True)
class GenConfig:
    n_triples: int
    k_components: int = 3
    frac_uncertain: float = 0.0
    n_entities: int = 100
    n_predicates: int = 10
    cluster_count: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_triples < 1:
            raise BenchConfigError("n_triples must be at least 1")
        if self.k_components not in ALLOWED_K:
            raise BenchConfigError(
                f"k_components must be one of {ALLOWED_K}, got {self.k_components}"
            )
        if not (0.0 <= self.frac_uncertain <= 1.0):
            raise BenchConfigError("frac_uncertain must lie in [0, 1]")
        for field_name in ("n_entities", "n_predicates", "cluster_count"):
            if getattr(self, field_name) < 1:
                raise BenchConfigError(f"{field_name} must be at least 1")


def generate(cfg: GenConfig) -> tuple[Graph, Graph]:
    """Build a probabilistic graph and its deterministic twin.

    Triple i gets subject e_{i mod E} and predicate p_{(i//E) mod P}, so
    subjects cycle fastest and (s, p) structure is identical across the
    pair.  Object mixtures cluster around cluster_count centers spaced 100
    apart.  Every triple draws from its own split RNG stream, so the
    output is independent of generation order.
    """
    n_uncertain = round(cfg.frac_uncertain * cfg.n_triples)
    pick = derive_rng(cfg.seed, "bench", "uncertain-set")
    uncertain = set(
        pick.permutation(cfg.n_triples)[:n_uncertain].tolist()
    )
    prob_triples = []
    twin_triples = []
    for i in range(cfg.n_triples):
        rng = derive_rng(cfg.seed, "bench", "triple", str(i))
        s = Iri(f"urn:e{i % cfg.n_entities}")
        p = Iri(f"urn:p{(i // cfg.n_entities) % cfg.n_predicates}")
        center = 100.0 * (i % cfg.cluster_count)
        k = cfg.k_components
        means = center + rng.uniform(-5.0, 5.0, size=k)
        varis = rng.uniform(0.25, 1.0, size=k)
        weights = rng.uniform(0.1, 1.0, size=k)
        gmm = Gmm(
            tuple(weights.tolist()),
            tuple(
                Gaussian((float(m),), (float(v),)) for m, v in zip(means, varis)
            ),
        )
        p_exist = float(rng.uniform(0.05, 0.95)) if i in uncertain else 1.0
        prob_triples.append(ProbTriple(s, p, DistLiteral(gmm), p_exist))
        twin_triples.append(
            ProbTriple(
                s, p, Literal(format(mean_of(gmm), ".17g"), NUM_DATATYPE), 1.0
            )
        )
    return Graph(prob_triples), Graph(twin_triples)


# --- suite running ------------------------------------------------------------


def _graph_digest(g: Graph) -> str:
    return hashlib.sha256(serialize_graph(g).encode()).hexdigest()


def _result_digest(mappings) -> tuple[int, str]:
    lines = sorted(
        "|".join(
            f"{name}={serialize_term(term)}"
            for name, term in sorted(m.bindings.items())
        )
        for m in mappings
    )
    digest = hashlib.sha256("\n".join(lines).encode()).hexdigest()
    return len(lines), digest


def _load_datasets(suite: dict) -> dict[str, dict]:
    datasets: dict[str, dict] = {}
    for entry in suite.get("datasets", []):
        name = entry["name"]
        if name in datasets:
            raise BenchConfigError(f"duplicate dataset name {name!r}")
        if "gen" in entry:
            cfg = GenConfig(**entry["gen"])
            prob, twin = generate(cfg)
        elif "path" in entry:
            with open(entry["path"], encoding="utf-8") as fh:
                prob = parse_graph_file(fh.read())
            twin = None
            if "twin_path" in entry:
                with open(entry["twin_path"], encoding="utf-8") as fh:
                    twin = parse_graph_file(fh.read())
        else:
            raise BenchConfigError(
                f"dataset {name!r} needs either a 'gen' config or a 'path'"
            )
        datasets[name] = {"prob": prob, "twin": twin}
    if not datasets:
        raise BenchConfigError("suite lists no datasets")
    return datasets


def _variant_matrix(suite: dict, query_entry: dict, has_twin: bool) -> list[dict]:
    axes = dict(_DEFAULT_VARIANTS)
    axes.update(suite.get("variants", {}))
    axes.update(query_entry.get("variants", {}))
    for ax in axes:
        if ax not in _VARIANT_AXES:
            raise BenchConfigError(f"unknown variant axis {ax!r}")
    combos = []
    for values in itertools.product(*(axes.get(ax, _DEFAULT_VARIANTS[ax]) for ax in _VARIANT_AXES)):
        combo = dict(zip(_VARIANT_AXES, values))
        if combo["graph"] == "twin" and not has_twin:
            continue
        combos.append(combo)
    if not combos:
        raise BenchConfigError("variant matrix is empty")
    return combos


def _time_variant(
    graph: Graph, text: str, combo: dict, runs: int, warmups: int
) -> dict:
    ast = parse_query(text)
    opts = PlanOptions(
        pushdown=bool(combo["pushdown"]),
        simjoin_dedicated=combo["simjoin"] != "naive",
        strategy=combo["strategy"],
    )
    samples = []
    result = None
    for r in range(warmups + runs):
        t0 = time.monotonic_ns()
        pl = plan(ast, opts, graph)
        result = evaluate(pl, graph, mode="plain")
        t1 = time.monotonic_ns()
        if r >= warmups:
            samples.append(t1 - t0)
    count, digest = _result_digest(result.mappings)
    row = {
        "variant": dict(combo),
        "result_count": count,
        "result_digest": digest,
        "timing": {
            "ns_median": int(statistics.median(samples)),
            "ns_min": min(samples),
            "ns_max": max(samples),
        },
    }
    if result.simjoin_stats:
        row["simjoin"] = {
            "candidates": sum(st.candidates for st in result.simjoin_stats),
            "pruned": sum(st.pruned for st in result.simjoin_stats),
            "survivors": sum(st.survivors for st in result.simjoin_stats),
            "mismatches": sum(st.mismatches for st in result.simjoin_stats),
        }
    if result.warnings:
        row["warnings"] = dict(sorted(result.warnings.items()))
    return row


def _median_ns(rows: list[dict], **match) -> int | None:
    for row in rows:
        if all(row["variant"].get(k) == v for k, v in match.items()):
            return row["timing"]["ns_median"]
    return None


def _query_ratios(rows: list[dict], base: dict) -> dict:
    """Timing ratios against the baseline variant (first prob combo)."""
    ratios = {}
    on = _median_ns(rows, **{**base, "pushdown": True})
    off = _median_ns(rows, **{**base, "pushdown": False})
    if on and off is not None:
        ratios["pushdown_speedup"] = off / on
    ded = _median_ns(rows, **{**base, "simjoin": "dedicated"})
    nai = _median_ns(rows, **{**base, "simjoin": "naive"})
    if ded and nai is not None:
        ratios["simjoin_speedup"] = nai / ded
    prob = _median_ns(rows, **base)
    twin = _median_ns(rows, **{**base, "graph": "twin"})
    if twin and prob is not None:
        ratios["overhead"] = prob / twin
    return ratios


def run_suite(suite: dict | str, out_dir: str | None = None) -> dict:
    """Run every (query, dataset) cell of the suite across its variants.

    Writes ``report.json`` and ``report.csv`` into out_dir when given,
    then raises VariantMismatch if any query's variants disagreed on
    results (the written report marks the offending cells).
    """
    suite_name = "<inline>"
    if isinstance(suite, str):
        suite_name = suite
        with open(suite, encoding="utf-8") as fh:
            suite = json.load(fh)
    runs = int(suite.get("runs", DEFAULT_RUNS))
    warmups = int(suite.get("warmups", DEFAULT_WARMUPS))
    if runs < 1 or warmups < 0:
        raise BenchConfigError("runs must be >= 1 and warmups >= 0")
    datasets = _load_datasets(suite)

    t_start = time.monotonic_ns()
    results = []
    mismatched = []
    for q in suite.get("queries", []):
        name = q["name"]
        ds_name = q["dataset"]
        if ds_name not in datasets:
            raise BenchConfigError(f"query {name!r} names unknown dataset {ds_name!r}")
        pair = datasets[ds_name]
        has_twin = pair["twin"] is not None and ("twin_text" in q or "text" in q)
        combos = _variant_matrix(suite, q, has_twin)
        rows = []
        for combo in combos:
            graph = pair[combo["graph"]]
            text = q["text"]
            if combo["graph"] == "twin":
                text = q.get("twin_text", q["text"])
            rows.append(_time_variant(graph, text, combo, runs, warmups))

        prob_digests = {
            r["result_digest"] for r in rows if r["variant"]["graph"] == "prob"
        }
        consistent = len(prob_digests) <= 1
        entry = {
            "query": name,
            "dataset": ds_name,
            "consistent": consistent,
        }
        if consistent:
            base = dict(rows[0]["variant"])
            entry["variants"] = rows
            entry["timing"] = {"ratios": _query_ratios(rows, base)}
            sj = next((r["simjoin"] for r in rows if "simjoin" in r), None)
            if sj:
                entry["pruned_fraction"] = (
                    sj["pruned"] / sj["candidates"] if sj["candidates"] else 0.0
                )
        else:
            mismatched.append(name)
            # keep identities but suppress every timing figure
            entry["variants"] = [
                {k: v for k, v in r.items() if k != "timing"} for r in rows
            ]
        results.append(entry)

    report = {
        "suite": suite_name,
        "runs": runs,
        "warmups": warmups,
        "datasets": {
            n: {
                "triples": len(p["prob"]),
                "sha256": _graph_digest(p["prob"]),
                **(
                    {"twin_sha256": _graph_digest(p["twin"])}
                    if p["twin"] is not None
                    else {}
                ),
            }
            for n, p in sorted(datasets.items())
        },
        "results": results,
        "mismatched": sorted(mismatched),
        "timing": {"total_ns": time.monotonic_ns() - t_start},
    }
    if out_dir is not None:
        write_report(report, out_dir)
    if mismatched:
        raise VariantMismatch(
            f"variants disagree on results for: {', '.join(sorted(mismatched))}"
        )
    return report


def strip_timing(doc):
    """Recursively drop every 'timing' key — the bit-reproducible skeleton."""
    if isinstance(doc, dict):
        return {k: strip_timing(v) for k, v in doc.items() if k != "timing"}
    if isinstance(doc, list):
        return [strip_timing(v) for v in doc]
    return doc


def report_digest(report: dict) -> str:
    canonical = json.dumps(strip_timing(report), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


def report_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(
        [
            "query",
            "dataset",
            "pushdown",
            "simjoin",
            "strategy",
            "graph",
            "consistent",
            "result_count",
            "ns_median",
            "ns_min",
            "ns_max",
        ]
    )
    for entry in report["results"]:
        for row in entry.get("variants", []):
            v = row["variant"]
            t = row.get("timing", {})
            writer.writerow(
                [
                    entry["query"],
                    entry["dataset"],
                    v["pushdown"],
                    v["simjoin"],
                    v["strategy"],
                    v["graph"],
                    entry["consistent"],
                    row["result_count"],
                    t.get("ns_median", ""),
                    t.get("ns_min", ""),
                    t.get("ns_max", ""),
                ]
            )
    return buf.getvalue()


def write_report(report: dict, out_dir: str) -> None:
    import os

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=False)
        fh.write("\n")
    with open(os.path.join(out_dir, "report.csv"), "w", encoding="utf-8") as fh:
        fh.write(report_csv(report))
