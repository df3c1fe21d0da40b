"""Command-line entry point: ``gca <command> [options]``.

Commands: sample, extract, detect, calibrate, eval, dump-graph. Each run
writes into a run directory (``runs/<timestamp>`` unless ``--run-dir`` is
given) laid out as::

    config.echo  transcripts/  graphs/  figures/
    report.json  report.csv  calibration.json
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from datetime import datetime
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .config import FIELDS, load_config
from .errors import CalibrationError, ContractError, CorpusError, GcaError
from .evaluation import (
    calibration_dict,
    emit_report,
    load_corpus,
    load_report,
    report_dict,
    report_scores,
    rescore_report,
    run_corpus,
    summary_csv,
    write_text,
)
from .gateway import (
    DEFAULT_SAMPLE_MODEL,
    Gateway,
    MockChatProvider,
    MockEmbeddingProvider,
    OpenAIChatProvider,
    OpenAIEmbeddingProvider,
    TranscriptCache,
)
from .graph import build_graph, build_relation_types, graph_dump
from .pipeline import Detector, source_name
from .rgcn import init_params, propagate
from .scenario import load_scenario
from .scoring import calibrate
from .serialize import dumps, serialize
from .types import DetectorConfig

log = logging.getLogger("gca")


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _common(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("run")
    g.add_argument("--config", help="TOML file with detector settings")
    g.add_argument("--provider", choices=("openai", "mock"),
                   default=os.environ.get("GCA_PROVIDER", "openai"),
                   help="chat/embedding backend (default: openai, or $GCA_PROVIDER)")
    g.add_argument("--mock-script", help="JSON script for the mock chat provider")
    g.add_argument("--mock-scenario", help="JSON belief scenario for the mock chat provider")
    g.add_argument("--run-dir", help="output directory (default: runs/<timestamp>)")
    g.add_argument("--cache", help="transcript cache directory (default: <run-dir>/transcripts)")
    g.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                   help="samples processed concurrently")
    g.add_argument("-v", "--verbose", action="store_true")

    d = parser.add_argument_group("detector settings (override config file and GCA_* env)")
    for name in FIELDS:
        flags = ["--" + name.replace("_", "-")]
        if name == "sample_count":
            flags.append("--n")
        d.add_argument(*flags, dest=name, default=None, metavar="VALUE")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gca", description="Graph-based hallucination detection for long-form responses.")
    parser.add_argument("--version", action="version", version=f"gca {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw sampled responses for a query or corpus")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--query")
    src.add_argument("--corpus")
    _common(p)

    p = sub.add_parser("extract", help="extract and verify triples")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--text")
    src.add_argument("--corpus")
    _common(p)

    p = sub.add_parser("detect", help="run the full pipeline over a corpus and write a report")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dump-graphs", action="store_true", help="write one graph dump per response")
    p.add_argument("--no-figures", action="store_true", help="skip matplotlib figures")
    _common(p)

    p = sub.add_parser("calibrate", help="choose a threshold from a scored report")
    p.add_argument("--report", required=True)
    p.add_argument("--out", help="calibration output (default: <run-dir>/calibration.json)")
    p.add_argument("--no-figures", action="store_true")
    _common(p)

    p = sub.add_parser("eval", help="metrics for a report, optionally at another threshold")
    p.add_argument("--report", required=True)
    p.add_argument("--csv", help="summary CSV path (default: next to the report)")
    _common(p)

    p = sub.add_parser("dump-graph", help="build (and propagate) the graph for one response")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--text")
    src.add_argument("--corpus")
    p.add_argument("--id", help="sample id when reading from --corpus")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--no-propagate", action="store_true")
    _common(p)
    return parser


# ---------------------------------------------------------------------------
# Wiring
# ---------------------------------------------------------------------------


def resolve_config(args: argparse.Namespace) -> DetectorConfig:
    overrides = {name: getattr(args, name) for name in FIELDS if getattr(args, name, None) is not None}
    return load_config(args.config, os.environ, overrides)


def run_dir(args: argparse.Namespace) -> Path:
    if args.run_dir:
        path = Path(args.run_dir)
    else:
        path = Path("runs") / datetime.now().strftime("%Y%m%d-%H%M%S")
    path.mkdir(parents=True, exist_ok=True)
    return path


def build_gateway(args: argparse.Namespace, cfg: DetectorConfig, out: Path) -> Gateway:
    cache = TranscriptCache(args.cache or out / "transcripts")
    if args.provider == "mock":
        if args.mock_scenario:
            chat = load_scenario(args.mock_scenario)
        elif args.mock_script:
            chat = MockChatProvider.from_file(args.mock_script)
        else:
            chat = MockChatProvider(default="mock response")
        return Gateway(chat, MockEmbeddingProvider(seed=cfg.seed), cache, max_concurrency=cfg.max_concurrency)
    sample_model = os.environ.get("GCA_SAMPLE_MODEL", "").strip() or DEFAULT_SAMPLE_MODEL
    return Gateway(
        OpenAIChatProvider(),
        OpenAIEmbeddingProvider(),
        cache,
        sampler=OpenAIChatProvider(model=sample_model),
        max_concurrency=cfg.max_concurrency,
    )


def _echo_config(cfg: DetectorConfig, out: Path) -> None:
    write_text(out / "config.echo", serialize(cfg) + "\n")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_sample(args, cfg: DetectorConfig, out: Path) -> int:
    gateway = build_gateway(args, cfg, out)
    detector = Detector(gateway, cfg)
    if args.query:
        items = [("query", args.query)]
    else:
        items = [(s.id, s.query) for s in load_corpus(args.corpus)]
    lines, failed = [], 0
    for sid, query in items:
        try:
            samples = detector.sample_responses(query)
            lines.append({"id": sid, "query": query, "samples": samples, "error": None})
        except GcaError as exc:
            failed += 1
            log.error("sampling failed for %s: %s", sid, exc)
            lines.append({"id": sid, "query": query, "samples": [], "error": str(exc)})
    write_text(out / "samples.jsonl", "".join(dumps(x) + "\n" for x in lines))
    log.info("sampled %d queries (%d failed), %d provider calls", len(items), failed, gateway.provider_calls)
    print(out / "samples.jsonl")
    return 1 if failed else 0


def cmd_extract(args, cfg: DetectorConfig, out: Path) -> int:
    detector = Detector(build_gateway(args, cfg, out), cfg)
    items = [("text", args.text)] if args.text else [(s.id, s.response) for s in load_corpus(args.corpus)]
    lines, failed = [], 0
    for sid, text in items:
        try:
            outcome = detector.extract(text)
            lines.append({
                "id": sid,
                "triples": [[t.head, t.relation, t.tail] for t in outcome.triples],
                "corrected": list(outcome.corrected),
                "warnings": list(outcome.warnings),
                "error": None,
            })
        except GcaError as exc:
            failed += 1
            lines.append({"id": sid, "triples": [], "corrected": [], "warnings": [], "error": str(exc)})
    write_text(out / "triples.jsonl", "".join(dumps(x) + "\n" for x in lines))
    print(out / "triples.jsonl")
    return 1 if failed else 0


def _dump_graphs(run, out: Path) -> None:
    for r in run.results:
        if r.analysis is None:
            continue
        for j, view in enumerate(r.analysis.views):
            name = source_name(None if j == 0 else j - 1)
            dump = graph_dump(view.graph.base, view.graph.matrix() if view.graph.node_out else None)
            write_text(out / "graphs" / r.sample.id / f"{name}.json", dumps(dump, indent=1) + "\n")


def cmd_detect(args, cfg: DetectorConfig, out: Path) -> int:
    try:
        corpus = load_corpus(args.corpus)
    except CorpusError as exc:
        raise UsageError(str(exc)) from exc
    _echo_config(cfg, out)
    gateway = build_gateway(args, cfg, out)
    run = run_corpus(Detector(gateway, cfg), corpus, workers=args.workers)
    emit_report(run, out / "report.json")
    report = report_dict(run)
    write_text(out / "report.csv", summary_csv(report))
    if run.calibration is not None:
        write_text(out / "calibration.json", dumps(calibration_dict(run.calibration), indent=2) + "\n")
    if args.dump_graphs:
        _dump_graphs(run, out)
    if not args.no_figures:
        from .plotting import plot_calibration, plot_score_distribution

        plot_score_distribution(report, out / "figures" / "score_distribution.png")
        if run.calibration is not None:
            plot_calibration(calibration_dict(run.calibration), out / "figures" / "calibration.png")
    m = run.metrics
    log.info("%d samples, %d errored, %d provider calls", len(run.results), len(run.errored), gateway.provider_calls)
    if m is not None:
        print(f"f1={m.f1:.4f} accuracy={m.accuracy:.4f} precision={m.precision:.4f} recall={m.recall:.4f} tau={run.tau:.6g}")
    print(out / "report.json")
    return 1 if run.errored else 0


def cmd_calibrate(args, cfg: DetectorConfig, out: Path) -> int:
    report = load_report(args.report)
    scores, labels = report_scores(report)
    try:
        result = calibrate(scores, labels, cfg.objective, cfg.grid_size)
    except CalibrationError as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    data = calibration_dict(result)
    m = rescore_report(report, result.chosen_threshold)
    data["metrics"] = m.as_dict()
    target = Path(args.out) if args.out else out / "calibration.json"
    write_text(target, dumps(data, indent=2) + "\n")
    if not args.no_figures:
        from .plotting import plot_calibration

        plot_calibration(data, target.with_suffix(".png"))
    print(f"tau={result.chosen_threshold:.6g} objective={result.objective.value} "
          f"f1={m.f1:.4f} accuracy={m.accuracy:.4f}")
    print(target)
    return 0


def cmd_eval(args, cfg: DetectorConfig, out: Path) -> int:
    report = load_report(args.report)
    tau = cfg.tau if cfg.tau is not None else report.get("tau")
    if tau is None:
        raise UsageError("report has no threshold; pass --tau")
    m = rescore_report(report, tau)
    print(json.dumps({"tau": tau, **m.as_dict()}, indent=2))
    csv_path = Path(args.csv) if args.csv else Path(args.report).with_name("summary.csv")
    rescored = dict(report)
    rescored["samples"] = [
        {**s, "prediction": ("fact" if s["response_score"] >= tau else "hallucination")
         if s["error"] is None and s["response_score"] is not None else s["prediction"]}
        for s in report["samples"]
    ]
    write_text(csv_path, summary_csv(rescored))
    return 0


def cmd_dump_graph(args, cfg: DetectorConfig, out: Path) -> int:
    if args.corpus:
        if not args.id:
            raise UsageError("--id is required with --corpus")
        matches = [s for s in load_corpus(args.corpus) if s.id == args.id]
        if not matches:
            raise UsageError(f"no sample with id {args.id!r}")
        text = matches[0].response
    else:
        text = args.text
    detector = Detector(build_gateway(args, cfg, out), cfg)
    triples = detector.extract(text).triples
    embs = detector.embed_triples(triples)
    table = build_relation_types([t.relation for t in triples], [e.rel_vec for e in embs], cfg.theta_r)
    graph = build_graph(triples, embs, table)
    propagated = None
    if not args.no_propagate:
        propagated = propagate(graph, init_params(len(table), graph.dim, cfg)).matrix()
    text_out = dumps(graph_dump(graph, propagated), indent=1) + "\n"
    if args.out:
        write_text(args.out, text_out)
    else:
        sys.stdout.write(text_out)
    return 0


COMMANDS = {
    "sample": cmd_sample,
    "extract": cmd_extract,
    "detect": cmd_detect,
    "calibrate": cmd_calibrate,
    "eval": cmd_eval,
    "dump-graph": cmd_dump_graph,
}


class UsageError(GcaError):
    pass


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args)
    except (ContractError, OSError) as exc:
        parser.error(str(exc))
    if args.workers < 1:
        parser.error("--workers must be >= 1")
    try:
        return COMMANDS[args.command](args, cfg, run_dir(args))
    except UsageError as exc:
        parser.error(str(exc))
    except GcaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
