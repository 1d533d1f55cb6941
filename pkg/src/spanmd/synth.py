"""Seeded synthetic corpus generation.

Real arXiv page text cannot be redistributed, so benchmarks and the test
suite run on generated corpora instead. Two flavors:

* ``savings_corpus`` - pages with a known copyable fraction and long copy
  spans, for exercising the step-savings arithmetic.
* ``rich_corpus`` - pages with running heads, page numbers, headings,
  formulas, short spans and one- or two-column geometry, for round-trip
  and classifier tests.

Copied and generated content draw from disjoint, globally unique word
pools, so stop signs can never match prematurely and transcripts align
with references exactly.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

from .document import BBox, EditLabel, Page, Span, whitespace_normalize


class _Words:
    """Unique word factory; one namespace per corpus."""

    def __init__(self):
        self._copy = itertools.count()
        self._gen = itertools.count()

    def copy(self, n: int) -> list[str]:
        return [f"w{next(self._copy):04d}" for _ in range(n)]

    def gen(self, n: int) -> list[str]:
        return [f"g{next(self._gen):04d}" for _ in range(n)]


@dataclass
class _Layout:
    """Vertical span stacking inside one or two columns."""
    width: float
    height: float
    columns: int = 1
    margin: float = 40.0
    line: float = 14.0

    def __post_init__(self):
        self._y = [self.margin + 30.0] * self.columns

    def place(self, column: int, font_size: float | None = None,
              band: str = "body") -> BBox:
        if band == "header":
            y0 = 2.0
        elif band == "footer":
            y0 = self.height - 12.0
        else:
            y0 = self._y[column]
            self._y[column] += self.line
        if self.columns == 1:
            x0 = self.margin
            x1 = self.width - self.margin
        else:
            col_w = (self.width - 3 * self.margin) / 2
            x0 = self.margin + column * (col_w + self.margin)
            x1 = x0 + col_w
        return BBox(x0, y0, x1, min(y0 + 10.0, self.height))


def savings_corpus(copy_fraction: float, pages: int = 4, seed: int = 0,
                   words_per_page: int = 400,
                   copy_span_words: int = 100) -> list[Page]:
    """Pages whose reference has a known fraction of copyable words.

    Copy spans are labeled INSERT_LEFT so each is preceded by its own
    generation trigger; the gaps between them are backbone-generated
    content. Long copy spans keep the trimmed stop-sign overhead small
    relative to the copied fraction.
    """
    if not 0.0 <= copy_fraction <= 1.0:
        raise ValueError("copy_fraction must be in [0, 1]")
    rng = random.Random(seed)
    vocab = _Words()
    out = []
    k = round(copy_fraction * words_per_page / copy_span_words)
    for p in range(pages):
        layout = _Layout(612.0, 792.0)
        page = Page(page_id=f"syn{seed}c{int(copy_fraction * 100):03d}p{p:02d}",
                    width=612.0, height=792.0)
        gen_words = words_per_page - k * copy_span_words
        # split generated words over k leading gaps plus one tail
        cuts = sorted(rng.randint(0, gen_words) for _ in range(k))
        gaps = [b - a for a, b in zip([0] + cuts, cuts + [gen_words])]
        ref_parts: list[str] = []
        order = 0
        for i in range(k):
            ref_parts.extend(vocab.gen(gaps[i]))
            text = " ".join(vocab.copy(copy_span_words))
            ref_parts.append(text)
            page.spans.append(Span(
                span_id=f"{page.page_id}s{order}", text=text,
                bbox=layout.place(0), order=order,
                label=EditLabel.INSERT_LEFT, font_size=10.0))
            order += 1
        ref_parts.extend(vocab.gen(gaps[k]))
        # a page-number span keeps zero-copy pages non-degenerate
        page.spans.append(Span(
            span_id=f"{page.page_id}s{order}", text=str(p + 1),
            bbox=layout.place(0, band="footer"), order=order,
            label=EditLabel.DELETE, font_size=8.0))
        page.reference_markdown = " ".join(ref_parts)
        out.append(page)
    return out


def rich_corpus(pages: int = 8, seed: int = 0, columns: int = 1,
                body_spans: int = 3, body_words: int = 18) -> list[Page]:
    """Pages with headers, footers, headings, formulas, short spans and
    dense body text, all rule-conforming for the heuristic classifier.
    References replay exactly what a faithful backbone would emit."""
    rng = random.Random(seed)
    vocab = _Words()
    out = []
    for p in range(pages):
        layout = _Layout(612.0, 792.0, columns=columns)
        page = Page(page_id=f"rich{seed}p{p:02d}", width=612.0, height=792.0)
        ref_parts: list[str] = []
        order = 0
        formula_idx = itertools.count()

        def add(text: str, label: EditLabel, *, band: str = "body",
                font_size: float | None = 10.0, column: int = 0,
                ref: str | None = None) -> None:
            nonlocal order
            page.spans.append(Span(
                span_id=f"{page.page_id}s{order:02d}", text=text,
                bbox=layout.place(column, band=band), order=order,
                label=label, font_size=font_size))
            order += 1
            if ref is not None:
                ref_parts.append(ref)

        add(f"Running Head {p + 1}", EditLabel.DELETE, band="header",
            font_size=8.0)
        n_cols = columns
        per_col = max(1, body_spans // n_cols)
        for col in range(n_cols):
            heading = " ".join(vocab.copy(3)).title()
            add(heading, EditLabel.INSERT_LEFT, font_size=14.0, column=col,
                ref=f"## {heading}")
            for _ in range(per_col):
                body = " ".join(vocab.copy(rng.randint(
                    body_words - 4, body_words + 4)))
                add(body, EditLabel.KEEP, column=col, ref=body)
            # a short span right before a formula: too short to copy, the
            # formula's trigger generates it instead
            short = vocab.copy(1)[0][:3]
            add(short, EditLabel.KEEP, column=col, ref=short)
            fid = next(formula_idx)
            formula = f"$ q{seed}{p}{fid} ^ 2 + r{seed}{p}{fid} $"
            lead_in = " ".join(vocab.gen(2))
            add(formula, EditLabel.INSERT_LEFT, column=col,
                ref=f"{lead_in} {formula}")
            tail_body = " ".join(vocab.copy(rng.randint(
                body_words - 4, body_words + 4)))
            add(tail_body, EditLabel.KEEP, column=col, ref=tail_body)
        add(str(p + 1), EditLabel.DELETE, band="footer", font_size=8.0)
        ref_parts.extend(vocab.gen(3))  # trailing generated content
        page.reference_markdown = whitespace_normalize(" ".join(ref_parts))
        out.append(page)
    return out


def scripts_from_references(pages: list[Page]) -> dict[str, str]:
    """Faithful scripted-backbone scripts: replay the reference markdown."""
    scripts = {}
    for page in pages:
        if page.reference_markdown is None:
            raise ValueError(f"page {page.page_id!r} has no reference")
        scripts[page.page_id] = page.reference_markdown
    return scripts
