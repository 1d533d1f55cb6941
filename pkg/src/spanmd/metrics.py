"""Transformation quality and efficiency metrics.

Quality: character edit-distance ratio, page-level BLEU-4 with add-one
smoothing, a METEOR-like unigram alignment score (exact + stemmed matching,
no synonym lexicon), and multiset token precision/recall/F1.

Efficiency: mean generation steps and latency for baseline vs edit-queue
runs, step-savings and reduced-latency percentages, truncation rate.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from math import exp, log
from typing import Any, Sequence

from .document import whitespace_normalize
from .errors import ValidationError


def levenshtein(a: str, b: str) -> int:
    """Character edit distance (insert/delete/substitute), two-row DP."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, cb in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1,
                         prev[j - 1] + (ca != cb))
        prev = cur
    return prev[-1]


def edit_distance_ratio(pred: str, ref: str) -> float:
    """Levenshtein(pred, ref) / max(|pred|, |ref|); 0.0 when both empty.

    The max() denominator keeps the ratio in [0, 1]; comparisons to other
    harnesses depend on this choice.
    """
    denom = max(len(pred), len(ref))
    if denom == 0:
        return 0.0
    return levenshtein(pred, ref) / denom


def _ngrams(words: Sequence[str], n: int) -> Counter:
    return Counter(tuple(words[i:i + n]) for i in range(len(words) - n + 1))


def bleu(pred: str, ref: str, max_order: int = 4) -> float:
    """Page-level BLEU with uniform weights, brevity penalty, and add-one
    smoothing on zero n-gram matches. Orders longer than the prediction are
    skipped (treated as neutral)."""
    pw = whitespace_normalize(pred).split()
    rw = whitespace_normalize(ref).split()
    if not pw or not rw:
        return 1.0 if pw == rw else 0.0
    log_sum = 0.0
    for n in range(1, max_order + 1):
        pred_counts = _ngrams(pw, n)
        total = sum(pred_counts.values())
        if total == 0:
            continue
        ref_counts = _ngrams(rw, n)
        clipped = sum(min(c, ref_counts[g]) for g, c in pred_counts.items())
        if clipped == 0:
            p = 1.0 / (total + 1)
        else:
            p = clipped / total
        log_sum += log(p) / max_order
    bp = 1.0 if len(pw) >= len(rw) else exp(1.0 - len(rw) / len(pw))
    return bp * exp(log_sum)


def _stem(word: str) -> str:
    w = word.lower()
    for suffix in ("ing", "ed", "es", "s"):
        if w.endswith(suffix) and len(w) - len(suffix) >= 3:
            return w[:-len(suffix)]
    return w


def _align(pw: Sequence[str], rw: Sequence[str],
           stem: bool = True) -> list[tuple[int, int]]:
    """Greedy unigram alignment: exact matches first, then stemmed."""
    matches: list[tuple[int, int]] = []
    used_p = [False] * len(pw)
    used_r = [False] * len(rw)
    stages = ((lambda w: w), _stem) if stem else ((lambda w: w),)
    for key in stages:
        ref_slots: dict[str, list[int]] = {}
        for j, w in enumerate(rw):
            if not used_r[j]:
                ref_slots.setdefault(key(w), []).append(j)
        for i, w in enumerate(pw):
            if used_p[i]:
                continue
            slots = ref_slots.get(key(w))
            if slots:
                j = slots.pop(0)
                used_p[i] = True
                used_r[j] = True
                matches.append((i, j))
    matches.sort()
    return matches


def _chunks(matches: Sequence[tuple[int, int]]) -> int:
    count = 0
    prev: tuple[int, int] | None = None
    for i, j in matches:
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            count += 1
        prev = (i, j)
    return count


def meteor_like(pred: str, ref: str, stem: bool = True) -> float:
    """Unigram F-mean (recall weighted 9:1) with a fragmentation penalty.

    Matching is exact plus a light suffix stemmer; no synonym resource is
    used. A fully contiguous alignment (one chunk) carries no penalty, so
    identical texts score exactly 1.0.
    """
    pw = whitespace_normalize(pred).split()
    rw = whitespace_normalize(ref).split()
    if not pw or not rw:
        return 1.0 if pw == rw else 0.0
    matches = _align(pw, rw, stem=stem)
    m = len(matches)
    if m == 0:
        return 0.0
    precision = m / len(pw)
    recall = m / len(rw)
    fmean = 10 * precision * recall / (recall + 9 * precision)
    ch = _chunks(matches)
    penalty = 0.0 if ch <= 1 else 0.5 * (ch / m) ** 3
    return fmean * (1.0 - penalty)


def token_prf(pred: str, ref: str) -> tuple[float, float, float]:
    """Multiset precision/recall/F1 over whitespace words."""
    pc = Counter(whitespace_normalize(pred).split())
    rc = Counter(whitespace_normalize(ref).split())
    inter = sum((pc & rc).values())
    np_, nr = sum(pc.values()), sum(rc.values())
    precision = inter / np_ if np_ else (1.0 if nr == 0 else 0.0)
    recall = inter / nr if nr else (1.0 if np_ == 0 else 0.0)
    f1 = 0.0 if precision + recall == 0 else \
        2 * precision * recall / (precision + recall)
    return precision, recall, f1


@dataclass(frozen=True)
class QualityReport:
    edit_dist_ratio: float
    bleu: float
    meteor: float
    precision: float
    recall: float
    f1: float

    def to_jsonable(self) -> dict[str, float]:
        return {
            "edit_dist_ratio": self.edit_dist_ratio,
            "bleu": self.bleu,
            "meteor_like": self.meteor,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def quality_report(pairs: Sequence[tuple[str, str]]) -> QualityReport:
    """Mean quality metrics over (pred, ref) page pairs."""
    if not pairs:
        raise ValidationError("no page pairs to evaluate", rule="empty_eval")
    rows = []
    for pred, ref in pairs:
        p, r, f = token_prf(pred, ref)
        rows.append((edit_distance_ratio(pred, ref), bleu(pred, ref),
                     meteor_like(pred, ref), p, r, f))
    n = len(rows)
    means = [sum(col) / n for col in zip(*rows)]
    return QualityReport(*means)


@dataclass(frozen=True)
class PageRun:
    page_id: str
    steps: int
    latency_s: float = 0.0
    truncated: bool = False


@dataclass(frozen=True)
class EfficiencyReport:
    generation_steps_baseline: float
    generation_steps_et: float
    saving_steps_pct: float
    latency_baseline_s: float
    latency_et_s: float
    reduced_latency_pct: float
    truncation_rate: float
    pages: int

    def to_jsonable(self) -> dict[str, Any]:
        return {
            "generation_steps_baseline": self.generation_steps_baseline,
            "generation_steps_et": self.generation_steps_et,
            "saving_steps_pct": self.saving_steps_pct,
            "latency_baseline_s": self.latency_baseline_s,
            "latency_et_s": self.latency_et_s,
            "reduced_latency_pct": self.reduced_latency_pct,
            "truncation_rate": self.truncation_rate,
            "pages": self.pages,
        }


def saving_pct(baseline: float, with_edits: float) -> float:
    """Percentage of steps (or seconds) saved relative to the baseline."""
    if baseline <= 0:
        return 0.0
    return 100.0 * (1.0 - with_edits / baseline)


def efficiency_report(runs_baseline: Sequence[PageRun],
                      runs_et: Sequence[PageRun]) -> EfficiencyReport:
    base_ids = {r.page_id for r in runs_baseline}
    et_ids = {r.page_id for r in runs_et}
    if base_ids != et_ids:
        raise ValidationError(
            f"page sets differ: {sorted(base_ids ^ et_ids)}",
            rule="page_set_mismatch")
    n = len(runs_et)
    if n == 0:
        raise ValidationError("no runs to report", rule="empty_eval")
    steps_base = sum(r.steps for r in runs_baseline) / n
    steps_et = sum(r.steps for r in runs_et) / n
    lat_base = sum(r.latency_s for r in runs_baseline) / n
    lat_et = sum(r.latency_s for r in runs_et) / n
    return EfficiencyReport(
        generation_steps_baseline=steps_base,
        generation_steps_et=steps_et,
        saving_steps_pct=saving_pct(steps_base, steps_et),
        latency_baseline_s=lat_base,
        latency_et_s=lat_et,
        reduced_latency_pct=saving_pct(lat_base, lat_et),
        truncation_rate=sum(r.truncated for r in runs_et) / n,
        pages=n,
    )


def format_efficiency_table(report: EfficiencyReport) -> str:
    rows = [
        ("Pages", f"{report.pages}"),
        ("Generation steps (baseline)",
         f"{report.generation_steps_baseline:.2f}"),
        ("Generation steps (edit queue)",
         f"{report.generation_steps_et:.2f}"),
        ("Saving steps", f"{report.saving_steps_pct:.1f}%"),
        ("Latency baseline (s)", f"{report.latency_baseline_s:.4f}"),
        ("Latency edit queue (s)", f"{report.latency_et_s:.4f}"),
        ("Reduced latency", f"{report.reduced_latency_pct:.1f}%"),
        ("Truncation rate", f"{100.0 * report.truncation_rate:.1f}%"),
    ]
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {v:>10}" for k, v in rows)


def format_quality_table(report: QualityReport) -> str:
    rows = [
        ("Edit Dist", f"{report.edit_dist_ratio:.3f}"),
        ("BLEU", f"{report.bleu:.3f}"),
        ("METEOR-like", f"{report.meteor:.3f}"),
        ("Precision", f"{report.precision:.3f}"),
        ("Recall", f"{report.recall:.3f}"),
        ("F1", f"{report.f1:.3f}"),
    ]
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {v:>8}" for k, v in rows)
