"""Editable text identification.

Produces one edit label per span through pluggable token-level classifiers
plus span-level majority voting. The learned layout model is out of scope;
in its place we ship an oracle (reads annotated labels), a rule-based
heuristic, and a client for a remote classifier service.
"""

from __future__ import annotations

import re
import time
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

import requests

from .document import EditLabel, Page, Span, page_to_jsonable, whitespace_normalize
from .errors import TransportError, ValidationError


class ClassifierKind(Enum):
    ORACLE = "oracle"
    HEURISTIC = "heuristic"
    REMOTE = "remote"


@dataclass(frozen=True)
class TokenPrediction:
    span_id: str
    token_index: int
    label: EditLabel
    confidence: float


# Voting tie-break: a wrong INSERT_LEFT only costs generation steps, a wrong
# KEEP copies wrong text into the output, so correctness-preserving labels
# win ties.
_TIE_PRIORITY = (EditLabel.INSERT_LEFT, EditLabel.DELETE, EditLabel.KEEP)

DEFAULT_MATH_MARKERS = frozenset("$\\^_∑∫±×≤≥")
_PAGE_NUMBER_RE = re.compile(r"(?i)^(?:page\s+)?\d+(?:\s*(?:of|/)\s*\d+)?$")


@dataclass(frozen=True)
class HeuristicRules:
    header_frac: float = 0.05
    footer_frac: float = 0.05
    math_markers: frozenset[str] = DEFAULT_MATH_MARKERS
    font_size_delta: float = 2.0
    page_number_pattern: str = _PAGE_NUMBER_RE.pattern


def _modal_font_size(page: Page) -> Optional[float]:
    sizes = [s.font_size for s in page.spans if s.font_size is not None]
    if not sizes:
        return None
    counts = Counter(sizes)
    top = max(counts.values())
    # deterministic on ties: smallest of the most common sizes
    return min(size for size, c in counts.items() if c == top)


def heuristic_span_label(span: Span, page: Page, rules: HeuristicRules,
                         modal_font: Optional[float]) -> EditLabel:
    cy = span.bbox.center_y()
    if cy <= rules.header_frac * page.height or \
            cy >= (1.0 - rules.footer_frac) * page.height:
        return EditLabel.DELETE
    if re.match(rules.page_number_pattern, whitespace_normalize(span.text)):
        return EditLabel.DELETE
    if any(ch in rules.math_markers for ch in span.text):
        return EditLabel.INSERT_LEFT
    if span.font_size is not None and modal_font is not None and \
            abs(span.font_size - modal_font) > rules.font_size_delta:
        return EditLabel.INSERT_LEFT
    return EditLabel.KEEP


class RemoteClassifier:
    """Client for the JSON-over-HTTP token classifier protocol."""

    def __init__(self, endpoint: str, timeout_s: float = 10.0, retries: int = 2):
        self.endpoint = endpoint.rstrip("/")
        self.timeout_s = timeout_s
        self.retries = retries

    def classify(self, page: Page) -> list[TokenPrediction]:
        payload = {"page": page_to_jsonable(page)}
        last: BaseException | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = requests.post(self.endpoint, json=payload,
                                     timeout=self.timeout_s)
                resp.raise_for_status()
                body = resp.json()
                break
            except (requests.RequestException, ValueError) as exc:
                last = exc
                if attempt < self.retries:
                    time.sleep(min(0.1 * 2 ** attempt, 1.0))
        else:
            raise TransportError(
                f"classifier request to {self.endpoint} failed "
                f"after {self.retries + 1} attempts: {last}",
                retryable=True, cause=last)
        preds = []
        for p in body.get("predictions", []):
            preds.append(TokenPrediction(
                span_id=str(p["span_id"]),
                token_index=int(p["token_index"]),
                label=EditLabel(p["label"]),
                confidence=float(p["confidence"]),
            ))
        return preds


def classify_page(page: Page, kind: ClassifierKind,
                  rules: HeuristicRules | None = None,
                  client: RemoteClassifier | None = None) -> list[TokenPrediction]:
    """Emit exactly one prediction per token of every span on the page."""
    if kind is ClassifierKind.REMOTE:
        if client is None:
            raise ValueError("REMOTE classification requires a client")
        return client.classify(page)

    rules = rules or HeuristicRules()
    modal = _modal_font_size(page)
    preds: list[TokenPrediction] = []
    for span in page.spans:
        if kind is ClassifierKind.ORACLE:
            if span.label is None:
                raise ValidationError(
                    f"page {page.page_id!r} span {span.span_id!r} has no "
                    "oracle label", page_id=page.page_id,
                    span_id=span.span_id, rule="oracle_label_missing")
            label, conf = span.label, 1.0
        else:
            label = heuristic_span_label(span, page, rules, modal)
            conf = 0.8
        for i in range(len(span.words())):
            preds.append(TokenPrediction(span.span_id, i, label, conf))
    return preds


def vote_span_labels(predictions: Sequence[TokenPrediction],
                     page: Page) -> dict[str, EditLabel]:
    """Majority label per span over its token predictions.

    Ties break by fixed priority INSERT_LEFT > DELETE > KEEP; permutation
    invariant in prediction order.
    """
    by_span: dict[str, Counter] = {}
    for p in predictions:
        by_span.setdefault(p.span_id, Counter())[p.label] += 1
    result: dict[str, EditLabel] = {}
    for span in page.spans:
        counts = by_span.get(span.span_id)
        if not counts:
            raise ValidationError(
                f"span {span.span_id!r} has zero predictions",
                page_id=page.page_id, span_id=span.span_id,
                rule="no_predictions")
        top = max(counts.values())
        result[span.span_id] = next(
            lab for lab in _TIE_PRIORITY if counts.get(lab) == top)
    return result


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ClassifierScore:
    micro_f1: float
    per_class: Mapping[EditLabel, ClassScores] = field(default_factory=dict)


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def eval_classifier(predicted: Mapping[str, EditLabel],
                    gold: Mapping[str, EditLabel],
                    pages: Sequence[Page]) -> ClassifierScore:
    """Token-weighted micro-F1 plus a per-class P/R/F1 report.

    Token counts come from the page spans; span-level labels are expanded
    to all tokens of the span.
    """
    if set(predicted) != set(gold):
        diff = sorted(set(predicted) ^ set(gold))
        raise ValidationError(
            f"predicted/gold span_id sets differ: {diff}", rule="key_mismatch")
    token_counts = {s.span_id: len(s.words())
                    for page in pages for s in page.spans}
    missing = sorted(set(gold) - set(token_counts))
    if missing:
        raise ValidationError(
            f"span_ids not present on any page: {missing}", rule="key_mismatch")

    total = correct = 0
    tp: Counter = Counter()
    fp: Counter = Counter()
    fn: Counter = Counter()
    support: Counter = Counter()
    for span_id, g in gold.items():
        n = token_counts[span_id]
        p = predicted[span_id]
        total += n
        support[g] += n
        if p == g:
            correct += n
            tp[g] += n
        else:
            fp[p] += n
            fn[g] += n

    per_class = {}
    for lab in EditLabel:
        denom_p = tp[lab] + fp[lab]
        denom_r = tp[lab] + fn[lab]
        prec = tp[lab] / denom_p if denom_p else 0.0
        rec = tp[lab] / denom_r if denom_r else 0.0
        per_class[lab] = ClassScores(prec, rec, _f1(prec, rec), support[lab])
    micro = correct / total if total else 0.0
    return ClassifierScore(micro_f1=micro, per_class=per_class)
