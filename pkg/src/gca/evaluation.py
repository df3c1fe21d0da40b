"""Corpus ingestion, corpus-level runs and report emission.

Corpus files are JSONL, one sample per line::

    {"id": "p1", "query": "...", "response": "...", "label": "fact",
     "samples": ["...", "..."]}

``samples`` is optional; when absent the detector draws them through the
gateway. Extra keys (span annotations etc.) are ignored.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from .errors import CorpusError, GcaError, StorageError
from .metrics import Metrics, metrics
from .pipeline import Detector, ResponseAnalysis
from .scoring import calibrate
from .serialize import dumps, register, to_plain
from .types import CalibrationResult, DetectorConfig, Verdict, record

log = logging.getLogger(__name__)

REPORT_SCHEMA = "gca-report/1"


@register
@record
class CorpusSample:
    id: str
    query: str
    response: str
    label: Verdict
    samples: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "label", Verdict(self.label))
        if self.label is Verdict.UNDECIDED:
            raise CorpusError("gold label must be fact or hallucination")
        if self.samples is not None:
            object.__setattr__(self, "samples", tuple(self.samples))


@dataclass
class CorpusDiagnostic:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


def _validate(obj, line: int) -> CorpusSample:
    if not isinstance(obj, dict):
        raise ValueError("not a JSON object")
    for key in ("id", "query", "response", "label"):
        if key not in obj:
            raise ValueError(f"missing {key!r}")
    sid = obj["id"]
    if isinstance(sid, bool) or not isinstance(sid, (str, int)) or str(sid) == "":
        raise ValueError("'id' must be a non-empty string or integer")
    if not isinstance(obj["query"], str):
        raise ValueError("'query' must be a string")
    if not isinstance(obj["response"], str) or not obj["response"].strip():
        raise ValueError("'response' must be a non-empty string")
    if obj["label"] not in (Verdict.FACT.value, Verdict.HALLUCINATION.value):
        raise ValueError(f"'label' must be 'fact' or 'hallucination', got {obj['label']!r}")
    samples = obj.get("samples")
    if samples is not None:
        if not isinstance(samples, list) or not samples or not all(isinstance(s, str) for s in samples):
            raise ValueError("'samples' must be a non-empty list of strings")
    return CorpusSample(str(sid), obj["query"], obj["response"], Verdict(obj["label"]),
                        tuple(samples) if samples is not None else None)


def read_corpus(path: Union[str, Path]) -> tuple[list[CorpusSample], list[CorpusDiagnostic]]:
    """Parse a corpus file, returning valid samples and per-line diagnostics."""
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")
    samples: list[CorpusSample] = []
    diags: list[CorpusDiagnostic] = []
    seen: dict[str, int] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                sample = _validate(json.loads(raw), lineno)
            except (json.JSONDecodeError, ValueError, GcaError) as exc:
                diags.append(CorpusDiagnostic(lineno, str(exc)))
                continue
            if sample.id in seen:
                raise CorpusError(f"duplicate sample id {sample.id!r} on lines {seen[sample.id]} and {lineno}")
            seen[sample.id] = lineno
            samples.append(sample)
    return samples, diags


def load_corpus(path: Union[str, Path]) -> list[CorpusSample]:
    samples, diags = read_corpus(path)
    for d in diags:
        log.warning("corpus %s skipped %s", path, d)
    if not samples:
        raise CorpusError(f"no valid samples in {path}")
    return samples


# ---------------------------------------------------------------------------
# Corpus runs
# ---------------------------------------------------------------------------


@dataclass
class SampleResult:
    sample: CorpusSample
    analysis: Optional[ResponseAnalysis] = None
    error: Optional[str] = None
    prediction: Verdict = Verdict.UNDECIDED
    score: Optional[float] = None


@dataclass
class CorpusRun:
    config: DetectorConfig
    results: list[SampleResult]
    tau: Optional[float] = None
    tau_source: str = "none"
    calibration: Optional[CalibrationResult] = None
    metrics: Optional[Metrics] = None
    warnings: list[str] = field(default_factory=list)

    @property
    def errored(self) -> list[SampleResult]:
        return [r for r in self.results if r.error is not None]


def analyze_sample(detector: Detector, sample: CorpusSample) -> SampleResult:
    try:
        sset = detector.sample_set(sample.query, sample.response, sample.samples)
        return SampleResult(sample, detector.analyze(sset))
    except GcaError as exc:
        log.error("sample %s failed: %s", sample.id, exc)
        return SampleResult(sample, error=f"{type(exc).__name__}: {exc}")


def run_corpus(detector: Detector, corpus: Sequence[CorpusSample], workers: int = 1) -> CorpusRun:
    """Score every sample, pick the threshold and assign verdicts.

    The threshold comes from the config when set; otherwise it is calibrated
    on this corpus's response-level scores and gold labels.
    """
    if not corpus:
        raise CorpusError("corpus is empty")
    cfg = detector.cfg
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(lambda s: analyze_sample(detector, s), corpus))
    run = CorpusRun(cfg, results)
    scored = [r for r in results if r.analysis is not None and r.analysis.details]
    for r in scored:
        r.score = r.analysis.score(cfg.response_rule_rho)
    if cfg.tau is not None:
        run.tau, run.tau_source = cfg.tau, "config"
    elif len(scored) >= 2:
        run.calibration = calibrate(
            [r.score for r in scored], [r.sample.label for r in scored], cfg.objective, cfg.grid_size
        )
        run.tau, run.tau_source = run.calibration.chosen_threshold, "calibrated"
    else:
        run.warnings.append("fewer than 2 scored samples and no tau configured; verdicts undecided")
    if run.tau is not None:
        for r in scored:
            r.prediction = r.analysis.apply_threshold(run.tau, cfg.response_rule_rho)
        judged = [r for r in scored if r.prediction is not Verdict.UNDECIDED]
        if judged:
            run.metrics = metrics([r.prediction for r in judged], [r.sample.label for r in judged])
    for r in results:
        if r.analysis is not None and not r.analysis.details:
            run.warnings.append(f"sample {r.sample.id}: no triples; verdict undecided")
    return run


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def _finite_or_none(x: Optional[float]) -> Optional[float]:
    if x is None or x != x or x in (float("inf"), float("-inf")):
        return None
    return float(x)


def _plain_config(cfg: DetectorConfig) -> dict:
    out = to_plain(cfg)
    out.pop("__type__", None)
    return out


def calibration_dict(cal: CalibrationResult, with_grid: bool = True) -> dict:
    out = {"mean": cal.mean, "std": cal.std, "chosen_threshold": cal.chosen_threshold,
           "objective": cal.objective.value}
    if with_grid:
        out["grid"] = [[a, b] for a, b in cal.grid]
    return out


def _triple_entry(detail, n: int) -> dict:
    card = detail.card
    return {
        "head": card.triple.head,
        "relation": card.triple.relation,
        "tail": card.triple.tail,
        "ordinal": card.triple.ordinal,
        "consistency": card.consistency,
        "normalized_consistency": detail.normalized_consistency,
        "per_sample_deltas": list(card.per_sample_deltas),
        "s_head": card.s_head,
        "s_rel": card.s_rel,
        "s_tail": card.s_tail,
        "fused": card.fused,
        "verdict": card.verdict.value,
        "tasks": {
            name: {"trials": t.trials, "matches": t.matches, "score": t.score, "skipped": t.skipped}
            for name, t in detail.tasks.items()
        },
    }


def report_dict(run: CorpusRun) -> dict:
    samples = []
    for r in run.results:
        entry = {
            "id": r.sample.id,
            "label": r.sample.label.value,
            "prediction": r.prediction.value,
            "response_score": _finite_or_none(r.score),
            "error": r.error,
            "sample_count": r.analysis.sample_set.sample_count if r.analysis else None,
            "warnings": list(r.analysis.warnings) if r.analysis else [],
            "triples": [_triple_entry(d, r.analysis.sample_set.sample_count) for d in r.analysis.details]
            if r.analysis else [],
        }
        samples.append(entry)
    return {
        "schema": REPORT_SCHEMA,
        "config": _plain_config(run.config),
        "tau": run.tau,
        "tau_source": run.tau_source,
        "calibration": calibration_dict(run.calibration, with_grid=False) if run.calibration else None,
        "metrics": run.metrics.as_dict() if run.metrics else None,
        "warnings": list(run.warnings),
        "samples": samples,
    }


def write_text(path: Union[str, Path], text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc
    return path


def emit_report(run: CorpusRun, path: Union[str, Path]) -> Path:
    """Write the run as deterministic JSON (fixed key order, 17-digit floats)."""
    if not run.results:
        raise CorpusError("refusing to emit a report for an empty corpus")
    return write_text(path, dumps(report_dict(run), indent=2) + "\n")


def summary_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "label", "prediction", "response_score", "triples", "hallucinated_triples", "error"])
    for s in report["samples"]:
        score = s["response_score"]
        writer.writerow([
            s["id"], s["label"], s["prediction"],
            "" if score is None else format(score, ".6g"),
            len(s["triples"]),
            sum(1 for t in s["triples"] if t["verdict"] == Verdict.HALLUCINATION.value),
            s["error"] or "",
        ])
    return buf.getvalue()


def load_report(path: Union[str, Path]) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CorpusError(f"cannot read report {path}: {exc}") from exc


def report_scores(report: dict) -> tuple[list[float], list[str]]:
    """Response scores and gold labels of the scored samples in a report."""
    scores, labels = [], []
    for s in report["samples"]:
        if s["error"] is None and s["response_score"] is not None:
            scores.append(float(s["response_score"]))
            labels.append(s["label"])
    return scores, labels


def rescore_report(report: dict, tau: float) -> Metrics:
    """Metrics for the report's response scores under threshold ``tau``."""
    scores, labels = report_scores(report)
    preds = [Verdict.FACT if s >= tau else Verdict.HALLUCINATION for s in scores]
    return metrics(preds, labels)
