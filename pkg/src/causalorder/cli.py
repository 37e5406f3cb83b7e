"""Command-line entry point exposing the pipelines with reproducible configs.

Every command writes its outputs plus a ``manifest.json`` (command, argv,
seed, package version) into the output directory; ``rerun`` replays a
manifest into a fresh directory and must produce byte-identical outputs.
Credentials for LLM backends come exclusively from environment variables
and are never recorded.

Exit codes: 0 success, 2 expert failure, 3 cyclic orientation result,
64 usage error, 65 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import metadata
from pathlib import Path

from . import bn as bn_mod
from .discovery import CiTestConfig, export_level_prior, orient_with_order, pc_cpdag, write_level_prior
from .effect import ace_adjusted, epsilon_ace, minimal_backdoor, order_adjustment_set, scm_true_ace
from .elicitation import (
    pairwise_pipeline,
    read_order,
    triplet_pipeline,
    write_order,
)
from .errors import (
    AnswerTimeoutError,
    CptRowSumError,
    CyclicGraphError,
    CyclicParentsError,
    DegenerateDataError,
    EndpointError,
    MissingColumnError,
    OrientationCycleError,
    ParseError,
    SessionClosedError,
    SingularDesignError,
    UnknownGraphError,
    UnorderedNodeError,
    UnparseableAnswerError,
)
from .experts import EpsilonExpert, EpsilonExpertConfig, Expert, PerfectExpert
from .graph import (
    AdjacencyMatrix,
    MixedGraph,
    TopologicalOrder,
    dtop,
    isolated_nodes,
    parse_edge_list,
    serialize_edge_list,
    shd,
    topological_order_of,
)
from .llm import EndpointConfig, LlmExpert, ReplayTransport
from .sims import (
    sim_metric_correlation,
    sim_perfect_expert,
    sim_third_pair_error,
    sim_shd_variance,
)

EXIT_OK = 0
EXIT_EXPERT = 2
EXIT_CYCLIC = 3
EXIT_USAGE = 64
EXIT_DATA = 65

_EXPERT_ERRORS = (
    EndpointError,
    UnparseableAnswerError,
    SessionClosedError,
    AnswerTimeoutError,
)
_DATA_ERRORS = (
    ParseError,
    CptRowSumError,
    CyclicParentsError,
    UnknownGraphError,
    DegenerateDataError,
    MissingColumnError,
    SingularDesignError,
    UnorderedNodeError,
    CyclicGraphError,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


class UsageError(Exception):
    pass


def _package_version() -> str:
    try:
        return metadata.version("causalorder")
    except metadata.PackageNotFoundError:  # running from a checkout
        return "0.0.0+local"


def _load_graph(spec: str) -> AdjacencyMatrix:
    """A bundled graph name or an edge-list file path."""
    if spec in bn_mod.BUNDLED_GRAPHS:
        return bn_mod.bundled_graph(spec)
    text = Path(spec).read_text(encoding="utf-8")
    mixed = parse_edge_list(text)
    if mixed.undirected:
        raise ParseError(f"{spec}: expected a fully directed graph")
    return mixed.directed_matrix()


def _load_bn(spec: str) -> bn_mod.BayesNet:
    if spec in bn_mod.BUNDLED_GRAPHS:
        return bn_mod.bundled_bn(spec)
    return bn_mod.load_bn(Path(spec).read_text(encoding="utf-8"))


def _make_expert(spec: str, truth: AdjacencyMatrix | None, seed: int | None,
                 strategy: str, replay: str | None) -> Expert:
    if spec == "perfect":
        if truth is None:
            raise UsageError("a perfect expert needs a known graph")
        return PerfectExpert(truth)
    if spec.startswith("epsilon:"):
        epsilon = float(spec.split(":", 1)[1])
        if truth is None:
            raise UsageError("an epsilon expert needs a known graph")
        if seed is None:
            raise UsageError("--seed is required for stochastic experts")
        return EpsilonExpert(EpsilonExpertConfig(epsilon, seed, truth))
    if spec.startswith("llm"):
        llm_strategy = spec.split(":", 1)[1] if ":" in spec else strategy
        transport = None
        if replay:
            transport = ReplayTransport.from_jsonl(Path(replay).read_text())
            config = EndpointConfig(base_url="replay://", model="replay")
        else:
            config = EndpointConfig.from_env()
        return LlmExpert(config, strategy=llm_strategy, transport=transport)
    if spec == "human":
        raise UsageError(
            "live human sessions run through the annotation service "
            "(python -m causalorder.service); the CLI has no interactive mode"
        )
    raise UsageError(f"unknown expert spec {spec!r}")


def _write(out_dir: Path, name: str, text: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(text, encoding="utf-8")


def _write_manifest(out_dir: Path, command: str, args: argparse.Namespace,
                    argv: list[str]) -> None:
    manifest = {
        "command": command,
        "argv": argv,
        "seed": getattr(args, "seed", None),
        "package_version": _package_version(),
    }
    _write(out_dir, "manifest.json", json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def _graph_metrics(final: AdjacencyMatrix | None, order: TopologicalOrder | None,
                   truth: AdjacencyMatrix | None) -> dict:
    metrics: dict = {}
    if final is not None:
        mixed = MixedGraph.from_matrix(final)
        metrics["edges"] = final.n_edges()
        metrics["isolated_nodes"] = sorted(isolated_nodes(mixed, final.vars))
    if truth is not None and final is not None:
        metrics["shd"] = shd(final, truth)
    if truth is not None and order is not None:
        # Divergence over the ranked subgraph; unranked nodes already show
        # up in the isolated-node count.
        bits = truth.bits.copy()
        for name in truth.vars:
            if name not in order:
                i = truth.vars.index(name)
                bits[i, :] = False
                bits[:, i] = False
        metrics["dtop"] = dtop(order, AdjacencyMatrix(truth.vars, bits))
    return metrics


def cmd_elicit(args, argv) -> int:
    truth = _load_graph(args.graph)
    bn = _load_bn(args.graph) if args.graph in bn_mod.BUNDLED_GRAPHS else None
    context = bn.context if bn is not None else ""
    expert = _make_expert(args.expert, truth, args.seed, args.strategy, args.replay)
    out = Path(args.output)
    try:
        if args.method == "pairwise":
            report = pairwise_pipeline(truth.vars, expert, strategy=args.strategy,
                                       context=context)
        else:
            tiebreak = _make_expert(args.tiebreak, truth, args.seed, "base", args.replay)
            report = triplet_pipeline(
                truth.vars, expert, tiebreak,
                size=args.size, k=args.k, seed=args.seed, context=context,
            )
    except _EXPERT_ERRORS as exc:
        partial = getattr(exc, "partial_transcript", [])
        _write(out, "partial_transcript.json", json.dumps(
            [str(q) for q, _ in partial] if partial else [], indent=2))
        print(f"expert failure: {exc}", file=sys.stderr)
        return EXIT_EXPERT
    _write(out, "report.json", report.to_json() + "\n")
    if report.order is not None:
        _write(out, "order.txt", write_order(report.order))
    metrics = _graph_metrics(report.final_dag, report.order, truth)
    metrics["ties"] = report.ties
    metrics["calls"] = dict(report.calls)
    metrics["cycles_before_prune"] = report.cycles_before_prune
    _write(out, "metrics.json", json.dumps(metrics, sort_keys=True, indent=2) + "\n")
    _write_manifest(out, "elicit", args, argv)
    print(json.dumps(metrics, sort_keys=True))
    return EXIT_OK


def cmd_discover(args, argv) -> int:
    out = Path(args.output)
    truth = _load_graph(args.graph) if args.graph else None
    if args.data:
        table = bn_mod.SampleTable.from_csv(Path(args.data).read_text())
        variables = None
    elif args.bn:
        network = _load_bn(args.bn)
        if args.seed is None:
            raise UsageError("--seed is required when sampling from a network")
        table = bn_mod.forward_sample(network, args.n, args.seed)
        variables = network.vars
        if truth is None:
            truth = network.structure()
    else:
        table = None
        variables = None
    cfg = CiTestConfig(
        alpha=args.alpha,
        test=args.ci,
        oracle_graph=truth if args.ci == "oracle" else None,
    )
    cpdag = pc_cpdag(table, cfg, variables=variables)
    _write(out, "cpdag.edges", serialize_edge_list(cpdag))
    order = read_order(Path(args.order).read_text()) if args.order else None
    fallback = _make_expert(args.fallback, truth, args.seed, "base", args.replay)
    try:
        final = orient_with_order(cpdag, order, fallback)
    except OrientationCycleError as exc:
        _write(out, "final.edges", serialize_edge_list(MixedGraph.from_matrix(exc.result)))
        _write(out, "cycle.txt", " -> ".join(exc.cycle) + "\n")
        _write_manifest(out, "discover", args, argv)
        print(f"cyclic orientation result: {' -> '.join(exc.cycle)}", file=sys.stderr)
        return EXIT_CYCLIC
    except _EXPERT_ERRORS as exc:
        print(f"expert failure: {exc}", file=sys.stderr)
        return EXIT_EXPERT
    _write(out, "final.edges", serialize_edge_list(MixedGraph.from_matrix(final)))
    final_order = topological_order_of(final)
    _write(out, "order.txt", write_order(final_order))
    metrics = _graph_metrics(final, final_order, truth)
    _write(out, "metrics.json", json.dumps(metrics, sort_keys=True, indent=2) + "\n")
    _write_manifest(out, "discover", args, argv)
    print(json.dumps(metrics, sort_keys=True))
    return EXIT_OK


def cmd_effect(args, argv) -> int:
    scm = bn_mod.load_scm(Path(args.scm).read_text(encoding="utf-8"))
    if args.seed is None:
        raise UsageError("--seed is required to sample the model")
    table = bn_mod.sample_linear_scm(scm, args.n, args.seed)
    structure = scm.structure()
    if args.adjust == "minimal":
        members = minimal_backdoor(structure, args.treatment, args.target).members
    elif args.adjust == "none":
        members = frozenset()
    elif args.adjust.startswith("order:"):
        order = read_order(Path(args.adjust.split(":", 1)[1]).read_text())
        members = order_adjustment_set(order, args.treatment).members - {args.target}
    elif args.adjust == "order":
        order = topological_order_of(structure)
        members = order_adjustment_set(order, args.treatment).members
    elif args.adjust.startswith("set:"):
        members = frozenset(v for v in args.adjust[4:].split(",") if v)
    else:
        raise UsageError(f"unknown adjustment spec {args.adjust!r}")
    estimate = ace_adjusted(table, args.treatment, args.target, members,
                            args.x, args.xstar)
    truth_value = scm_true_ace(scm, args.treatment, args.target, args.x, args.xstar)
    row = ",".join([
        args.treatment,
        args.target,
        ";".join(sorted(members)),
        f"{estimate.value:.6f}",
        f"{estimate.stderr:.6f}",
    ])
    print("treatment,target,adjustment,value,stderr")
    print(row)
    if args.output:
        out = Path(args.output)
        payload = {
            "treatment": args.treatment,
            "target": args.target,
            "adjustment": sorted(members),
            "value": estimate.value,
            "stderr": estimate.stderr,
            "true_value": truth_value,
            "epsilon_ace": epsilon_ace(estimate, truth_value),
            "n": estimate.n_used,
        }
        _write(out, "effect.json", json.dumps(payload, sort_keys=True, indent=2) + "\n")
        _write_manifest(out, "effect", args, argv)
    return EXIT_OK


def cmd_sample(args, argv) -> int:
    network = _load_bn(args.bn)
    if args.seed is None:
        raise UsageError("--seed is required for sampling")
    table = bn_mod.forward_sample(network, args.n, args.seed)
    out = Path(args.output)
    _write(out, "samples.csv", table.to_csv())
    _write_manifest(out, "sample", args, argv)
    print(f"wrote {table.n_rows} rows x {len(table.columns)} columns")
    return EXIT_OK


def cmd_simulate(args, argv) -> int:
    if args.kind == "third-pair-error":
        report = sim_third_pair_error(args.eps, args.trials, args.seed or 0)
    elif args.kind == "shd-variance":
        report = sim_shd_variance(args.n, args.seed or 0, truths=args.truths)
    elif args.kind == "perfect-expert":
        report = sim_perfect_expert(_load_graph(args.graph))
    elif args.kind == "metric-correlation":
        report = sim_metric_correlation(
            structure=args.structure,
            treatment=args.treatment,
            target=args.target,
            trials=args.trials,
            seed=args.seed or 0,
        )
    else:
        raise UsageError(f"unknown simulation {args.kind!r}")
    out = Path(args.output)
    _write(out, "report.json", report.to_json() + "\n")
    _write(out, "records.csv", report.records_csv())
    _write_manifest(out, "simulate", args, argv)
    print(report.to_json())
    return EXIT_OK


def cmd_export_prior(args, argv) -> int:
    # Expert-merged graphs legitimately contain cycles; _load_graph keeps them.
    graph = _load_graph(args.graph)
    prior = export_level_prior(graph, args.prob)
    out = Path(args.output)
    _write(out, "prior.txt", write_level_prior(prior))
    _write_manifest(out, "export-prior", args, argv)
    print((out / "prior.txt").read_text(), end="")
    return EXIT_OK


def cmd_rerun(args, argv) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    stored = list(manifest["argv"])
    if args.output:
        # Swap the recorded output directory for the new one.
        for i, token in enumerate(stored):
            if token == "--output":
                stored[i + 1] = args.output
                break
        else:
            stored += ["--output", args.output]
    return main(stored)


def build_parser() -> _Parser:
    parser = _Parser(prog="causalorder", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    elicit = sub.add_parser("elicit", help="elicit a causal order from an expert")
    elicit.add_argument("--graph", required=True, help="bundled name or edge-list file")
    elicit.add_argument("--expert", required=True,
                        help="perfect | epsilon:<eps> | llm[:strategy] | human")
    elicit.add_argument("--method", choices=["pairwise", "triplet"], default="pairwise")
    elicit.add_argument("--strategy", choices=["base", "cot", "iterative", "one_hop"],
                        default="base")
    elicit.add_argument("--tiebreak", default="perfect")
    elicit.add_argument("--size", type=int, default=3, choices=[3, 4])
    elicit.add_argument("--k", type=int, default=None)
    elicit.add_argument("--seed", type=int, default=None)
    elicit.add_argument("--replay", default=None, help="JSONL transcript for llm replay")
    elicit.add_argument("--output", required=True)
    elicit.set_defaults(func=cmd_elicit)

    discover = sub.add_parser("discover", help="PC skeleton plus order-guided orientation")
    discover.add_argument("--data", default=None, help="CSV sample table")
    discover.add_argument("--bn", default=None, help="bundled network to sample from")
    discover.add_argument("--n", type=int, default=10_000)
    discover.add_argument("--seed", type=int, default=None)
    discover.add_argument("--ci", choices=["chi2", "fisherz", "oracle"], default="chi2")
    discover.add_argument("--alpha", type=float, default=0.05)
    discover.add_argument("--graph", default=None, help="ground truth (for oracle CI/metrics)")
    discover.add_argument("--order", default=None, help="order file to orient with")
    discover.add_argument("--fallback", default="perfect")
    discover.add_argument("--replay", default=None)
    discover.add_argument("--output", required=True)
    discover.set_defaults(func=cmd_discover)

    effect = sub.add_parser("effect", help="backdoor-adjusted effect on SCM samples")
    effect.add_argument("--scm", required=True)
    effect.add_argument("--treatment", required=True)
    effect.add_argument("--target", required=True)
    effect.add_argument("--adjust", default="order",
                        help="order | order:<file> | minimal | none | set:a,b")
    effect.add_argument("--n", type=int, default=100_000)
    effect.add_argument("--seed", type=int, default=None)
    effect.add_argument("--x", type=float, default=1.0)
    effect.add_argument("--xstar", type=float, default=0.0)
    effect.add_argument("--output", default=None)
    effect.set_defaults(func=cmd_effect)

    sample = sub.add_parser("sample", help="forward-sample a bundled network")
    sample.add_argument("--bn", required=True)
    sample.add_argument("--n", type=int, default=1000)
    sample.add_argument("--seed", type=int, default=None)
    sample.add_argument("--output", required=True)
    sample.set_defaults(func=cmd_sample)

    simulate = sub.add_parser("simulate", help="run a theory-reproduction simulation")
    simulate.add_argument("kind", choices=[
        "third-pair-error", "shd-variance", "perfect-expert", "metric-correlation",
    ])
    simulate.add_argument("--eps", type=float, default=0.3)
    simulate.add_argument("--trials", type=int, default=100_000)
    simulate.add_argument("--n", type=int, default=6)
    simulate.add_argument("--truths", type=int, default=20)
    simulate.add_argument("--graph", default="cancer")
    simulate.add_argument("--structure", default="asia")
    simulate.add_argument("--treatment", default="smoke")
    simulate.add_argument("--target", default="dysp")
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--output", required=True)
    simulate.set_defaults(func=cmd_simulate)

    export = sub.add_parser("export-prior", help="write a level-order prior file")
    export.add_argument("--graph", required=True, help="bundled name or edge-list file")
    export.add_argument("--prob", type=float, required=True)
    export.add_argument("--output", required=True)
    export.set_defaults(func=cmd_export_prior)

    rerun = sub.add_parser("rerun", help="re-execute a command from its manifest")
    rerun.add_argument("manifest")
    rerun.add_argument("--output", default=None)
    rerun.set_defaults(func=cmd_rerun)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except _EXPERT_ERRORS as exc:
        print(f"expert failure: {exc}", file=sys.stderr)
        return EXIT_EXPERT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
