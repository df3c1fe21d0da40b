from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

from .errors import ContractError
from .types import Verdict

Label = Union[Verdict, str]


def _is_positive(label: Label) -> bool:
    """Hallucination is the positive class."""
    v = Verdict(label)
    if v is Verdict.UNDECIDED:
        raise ContractError("undecided labels cannot be scored")
    return v is Verdict.HALLUCINATION


@dataclass(frozen=True)
class Metrics:
    f1: float
    accuracy: float
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int
    tn: int
    flags: tuple[str, ...] = field(default=())

    def as_dict(self) -> dict:
        return {
            "f1": self.f1, "accuracy": self.accuracy, "precision": self.precision,
            "recall": self.recall, "tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
            "flags": list(self.flags),
        }


def confusion(predictions: Sequence[Label], golds: Sequence[Label]) -> tuple[int, int, int, int]:
    if len(predictions) != len(golds):
        raise ContractError(f"{len(predictions)} predictions for {len(golds)} gold labels")
    tp = fp = fn = tn = 0
    for p, g in zip(predictions, golds):
        pp, gp = _is_positive(p), _is_positive(g)
        if pp and gp:
            tp += 1
        elif pp:
            fp += 1
        elif gp:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def metrics_from_counts(tp: int, fp: int, fn: int, tn: int) -> Metrics:
    flags = []
    if tp + fp == 0:
        precision = 0.0
        flags.append("precision-undefined")
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 0.0
        flags.append("recall-undefined")
    else:
        recall = tp / (tp + fn)
    # 2PR/(P+R) simplifies to 2TP/(2TP+FP+FN).
    if 2 * tp + fp + fn == 0:
        f1 = 0.0
        flags.append("f1-undefined")
    else:
        f1 = 2 * tp / (2 * tp + fp + fn)
    total = tp + fp + fn + tn
    if total == 0:
        accuracy = 0.0
        flags.append("accuracy-undefined")
    else:
        accuracy = (tp + tn) / total
    return Metrics(f1, accuracy, precision, recall, tp, fp, fn, tn, tuple(flags))


def metrics(predictions: Sequence[Label], golds: Sequence[Label]) -> Metrics:
    return metrics_from_counts(*confusion(predictions, golds))
