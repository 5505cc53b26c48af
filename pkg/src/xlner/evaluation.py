"""Exact-match span precision/recall/F1 in the CoNLL style, per-type
breakdown, the per-token majority baseline, and multi-run aggregation."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .conll import ENTITY_TYPES, Corpus, extract_spans, repair_bio


def _prf(correct: int, predicted: int, gold: int) -> tuple[float, float, float]:
    p = 100.0 * correct / predicted if predicted else 0.0
    r = 100.0 * correct / gold if gold else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


@dataclass(frozen=True)
class TypeScores:
    precision: float
    recall: float
    f1: float
    gold: int
    predicted: int
    correct: int


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f1: float
    gold: int
    predicted: int
    correct: int
    per_type: dict[str, TypeScores]
    repairs: int = 0  # BIO2 fixes applied to the prediction before scoring

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "gold": self.gold,
            "predicted": self.predicted,
            "correct": self.correct,
            "repairs": self.repairs,
            "per_type": {
                t: {
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                    "gold": s.gold,
                    "predicted": s.predicted,
                    "correct": s.correct,
                }
                for t, s in self.per_type.items()
            },
        }


def repair_corpus(corpus: Corpus) -> tuple[Corpus, int]:
    repaired = []
    total = 0
    for sentence in corpus:
        tags, n = repair_bio(sentence.tags)
        repaired.append(sentence.with_tags(tags))
        total += n
    return Corpus(tuple(repaired), corpus.language), total


def evaluate(gold: Corpus, pred: Corpus) -> EvalReport:
    """Exact (sentence, start, end, label) span matching, micro-averaged.
    Predictions failing BIO2 validation are repaired first (orphan/mismatched
    I becomes B), matching conlleval's tolerance."""
    if len(gold) != len(pred):
        raise ValueError(f"sentence count mismatch: gold {len(gold)} vs pred {len(pred)}")
    for si, (gs, ps) in enumerate(zip(gold, pred)):
        if gs.texts != ps.texts:
            raise ValueError(f"sentence {si}: token texts differ between gold and pred")
    gold_r, gold_fixes = repair_corpus(gold)
    pred_r, pred_fixes = repair_corpus(pred)
    if gold_fixes:
        raise ValueError(f"gold corpus is not BIO2-valid ({gold_fixes} violations)")

    gold_spans = extract_spans(gold_r)
    pred_spans = extract_spans(pred_r)
    correct_spans = gold_spans & pred_spans

    per_type = {}
    for etype in ENTITY_TYPES:
        g = sum(1 for s in gold_spans if s.label == etype)
        p = sum(1 for s in pred_spans if s.label == etype)
        c = sum(1 for s in correct_spans if s.label == etype)
        per_type[etype] = TypeScores(*_prf(c, p, g), gold=g, predicted=p, correct=c)

    prec, rec, f1 = _prf(len(correct_spans), len(pred_spans), len(gold_spans))
    return EvalReport(
        precision=prec,
        recall=rec,
        f1=f1,
        gold=len(gold_spans),
        predicted=len(pred_spans),
        correct=len(correct_spans),
        per_type=per_type,
        repairs=pred_fixes,
    )


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    std: float  # sample standard deviation; 0 for a single report


@dataclass(frozen=True)
class AggregateReport:
    runs: int
    precision: MetricSummary
    recall: MetricSummary
    f1: MetricSummary
    per_type_f1: dict[str, MetricSummary]

    def to_dict(self) -> dict:
        return {
            "runs": self.runs,
            "precision": {"mean": self.precision.mean, "std": self.precision.std},
            "recall": {"mean": self.recall.mean, "std": self.recall.std},
            "f1": {"mean": self.f1.mean, "std": self.f1.std},
            "per_type_f1": {t: {"mean": m.mean, "std": m.std} for t, m in self.per_type_f1.items()},
        }


def _summary(values: Sequence[float]) -> MetricSummary:
    n = len(values)
    mean = sum(values) / n
    std = math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1)) if n > 1 else 0.0
    return MetricSummary(mean, std)


def aggregate(reports: Sequence[EvalReport]) -> AggregateReport:
    """Mean and sample std of every headline metric over repeated runs."""
    if not reports:
        raise ValueError("no reports to aggregate")
    return AggregateReport(
        runs=len(reports),
        precision=_summary([r.precision for r in reports]),
        recall=_summary([r.recall for r in reports]),
        f1=_summary([r.f1 for r in reports]),
        per_type_f1={
            t: _summary([r.per_type[t].f1 for r in reports]) for t in ENTITY_TYPES
        },
    )


def majority_baseline(train: Corpus, corpus: Corpus) -> Corpus:
    """Tag each token with its most frequent training tag; ties and unseen
    words map to O, then BIO2 repair guarantees valid output."""
    if not len(train):
        raise ValueError("train corpus is empty")
    counts: dict[str, Counter] = defaultdict(Counter)
    for sentence in train:
        for token in sentence:
            counts[token.text][token.tag] += 1
    lexicon = {}
    for word, tag_counts in counts.items():
        best = tag_counts.most_common()
        if len(best) > 1 and best[0][1] == best[1][1]:
            lexicon[word] = "O"
        else:
            lexicon[word] = best[0][0]
    tagged = []
    for sentence in corpus:
        tags = [lexicon.get(t.text, "O") for t in sentence]
        tagged.append(sentence.with_tags(repair_bio(tags)[0]))
    return Corpus(tuple(tagged), corpus.language)


def render_report(report: EvalReport) -> str:
    """conlleval-like table; types with no gold and no predicted spans
    render as ---."""
    lines = [
        f"processed: gold {report.gold} spans, predicted {report.predicted} spans, "
        f"correct {report.correct}; BIO repairs {report.repairs}",
        f"overall  precision {report.precision:6.2f}  recall {report.recall:6.2f}  "
        f"F1 {report.f1:6.2f}",
    ]
    for etype in ENTITY_TYPES:
        s = report.per_type[etype]
        if s.gold == 0 and s.predicted == 0:
            lines.append(f"{etype:<8} ---")
        else:
            lines.append(
                f"{etype:<8} precision {s.precision:6.2f}  recall {s.recall:6.2f}  "
                f"F1 {s.f1:6.2f}  ({s.correct}/{s.predicted} pred, {s.gold} gold)"
            )
    return "\n".join(lines)
