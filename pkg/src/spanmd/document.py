"""Pages, spans, labels and tokenization.

Ingests the span interchange format (JSON produced by any upstream PDF
extractor), validates its invariants, and provides the whitespace word
tokenizer the rest of the engine runs on. Also contains the reading-order
diagnostic; it flags implausible orders but never blocks processing.

Coordinates are in points with a top-left origin.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Optional, Sequence

from .errors import ParseError, UnsupportedTokenizerError, ValidationError


class EditLabel(Enum):
    KEEP = "KEEP"
    DELETE = "DELETE"
    INSERT_LEFT = "INSERT_LEFT"


class TokenizerMode(Enum):
    WHITESPACE = "whitespace"
    BACKBONE_DELEGATED = "backbone_delegated"


@dataclass(frozen=True)
class TokenizerSpec:
    mode: TokenizerMode = TokenizerMode.WHITESPACE


_DEFAULT_SPEC = TokenizerSpec()


def whitespace_normalize(text: str) -> str:
    """Collapse all whitespace runs (including newlines) to single spaces.

    This is the canonical form: detokenize(tokenize(s)) == whitespace_normalize(s).
    """
    return " ".join(text.split())


def tokenize(text: str, spec: TokenizerSpec = _DEFAULT_SPEC) -> list[str]:
    if spec.mode is not TokenizerMode.WHITESPACE:
        raise UnsupportedTokenizerError(
            "only WHITESPACE tokenization is supported in the core engine")
    return text.split()


def detokenize(tokens: Sequence[str], spec: TokenizerSpec = _DEFAULT_SPEC) -> str:
    if spec.mode is not TokenizerMode.WHITESPACE:
        raise UnsupportedTokenizerError(
            "only WHITESPACE tokenization is supported in the core engine")
    return " ".join(tokens)


@dataclass(frozen=True)
class BBox:
    x0: float
    y0: float
    x1: float
    y1: float

    def center_y(self) -> float:
        return (self.y0 + self.y1) / 2.0

    def center_x(self) -> float:
        return (self.x0 + self.x1) / 2.0


@dataclass(frozen=True)
class Span:
    span_id: str
    text: str
    bbox: BBox
    order: int
    label: Optional[EditLabel] = None
    font_size: Optional[float] = None

    def words(self) -> list[str]:
        return tokenize(self.text)


@dataclass
class Page:
    page_id: str
    width: float
    height: float
    spans: list[Span] = field(default_factory=list)
    image_ref: Optional[str] = None
    reference_markdown: Optional[str] = None


@dataclass(frozen=True)
class OrderAnomaly:
    kind: str  # "backward_jump" | "column_interleave"
    span_ids: tuple[str, ...]
    detail: str


def _validate_span(span: Span, page: Page) -> None:
    def fail(rule: str, msg: str) -> None:
        raise ValidationError(
            f"page {page.page_id!r} span {span.span_id!r}: {msg}",
            page_id=page.page_id, span_id=span.span_id, rule=rule)

    b = span.bbox
    for name, v in (("x0", b.x0), ("y0", b.y0), ("x1", b.x1), ("y1", b.y1)):
        if not math.isfinite(v):
            fail("bbox_finite", f"bbox {name}={v} is not finite")
        if v < 0:
            fail("bbox_nonnegative", f"bbox {name}={v} is negative")
    if b.x0 > b.x1 or b.y0 > b.y1:
        fail("bbox_order", f"bbox corners out of order: {b}")
    if b.x1 > page.width or b.y1 > page.height:
        fail("bbox_in_page",
             f"bbox {b} exceeds page bounds {page.width}x{page.height}")
    if not span.text.strip():
        fail("text_blank", "span text is empty or whitespace-only")
    if span.font_size is not None and (not math.isfinite(span.font_size)
                                       or span.font_size <= 0):
        fail("font_size_positive", f"font_size={span.font_size}")


def validate_page(page: Page) -> Page:
    """Check all invariants and sort spans by reading order in place."""
    if not (math.isfinite(page.width) and math.isfinite(page.height)
            and page.width > 0 and page.height > 0):
        raise ValidationError(
            f"page {page.page_id!r}: bad dimensions {page.width}x{page.height}",
            page_id=page.page_id, rule="page_dimensions")
    seen: dict[int, str] = {}
    for span in page.spans:
        _validate_span(span, page)
        if span.order in seen:
            raise ValidationError(
                f"page {page.page_id!r}: duplicate order {span.order} "
                f"(spans {seen[span.order]!r} and {span.span_id!r})",
                page_id=page.page_id, span_id=span.span_id,
                rule="order_duplicate")
        seen[span.order] = span.span_id
    page.spans.sort(key=lambda s: s.order)
    return page


def _span_from_obj(obj: dict[str, Any], page_id: str) -> Span:
    try:
        bbox_raw = obj["bbox"]
        bbox = BBox(float(bbox_raw[0]), float(bbox_raw[1]),
                    float(bbox_raw[2]), float(bbox_raw[3]))
        label_raw = obj.get("label")
        label = EditLabel(label_raw) if label_raw is not None else None
        font_size = obj.get("font_size")
        return Span(
            span_id=str(obj["span_id"]),
            text=str(obj["text"]),
            bbox=bbox,
            order=int(obj["order"]),
            label=label,
            font_size=float(font_size) if font_size is not None else None,
        )
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise ValidationError(
            f"page {page_id!r} span {obj.get('span_id')!r}: "
            f"malformed span object ({exc})",
            page_id=page_id, span_id=str(obj.get("span_id")),
            rule="span_shape") from exc


def ingest_spans(data: bytes | str) -> list[Page]:
    """Parse and validate an interchange file; returns pages with spans
    sorted by reading order. Unknown fields are ignored."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON at offset {exc.pos}: {exc.msg}",
                         offset=exc.pos) from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("pages"), list):
        raise ValidationError("interchange root must be {'pages': [...]}",
                              rule="root_shape")
    pages: list[Page] = []
    for pobj in doc["pages"]:
        if not isinstance(pobj, dict):
            raise ValidationError("page entry is not an object",
                                  rule="page_shape")
        page_id = str(pobj.get("page_id", ""))
        try:
            page = Page(
                page_id=page_id,
                width=float(pobj["width"]),
                height=float(pobj["height"]),
                image_ref=pobj.get("image_ref"),
                reference_markdown=pobj.get("reference_markdown"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(
                f"page {page_id!r}: malformed page object ({exc})",
                page_id=page_id, rule="page_shape") from exc
        spans_raw = pobj.get("spans", [])
        page.spans = [_span_from_obj(s, page_id) for s in spans_raw]
        pages.append(validate_page(page))
    return pages


def page_to_jsonable(page: Page) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "page_id": page.page_id,
        "width": page.width,
        "height": page.height,
        "spans": [
            {
                "span_id": s.span_id,
                "text": s.text,
                "bbox": [s.bbox.x0, s.bbox.y0, s.bbox.x1, s.bbox.y1],
                "order": s.order,
                **({"label": s.label.value} if s.label is not None else {}),
                **({"font_size": s.font_size} if s.font_size is not None else {}),
            }
            for s in page.spans
        ],
    }
    if page.image_ref is not None:
        obj["image_ref"] = page.image_ref
    if page.reference_markdown is not None:
        obj["reference_markdown"] = page.reference_markdown
    return obj


def serialize_pages(pages: Iterable[Page]) -> str:
    """Canonical interchange serialization; ingest/serialize is idempotent."""
    return json.dumps({"pages": [page_to_jsonable(p) for p in pages]},
                      ensure_ascii=False, sort_keys=True)


# --- reading-order diagnostics ---------------------------------------------

_BAND_GAP_FRAC = 0.2     # x-center gap (fraction of page width) that splits columns
_BACKWARD_TOL = 1.0      # points of upward movement tolerated within a band
_MARGIN_FRAC = 0.05      # header/footer zone excluded from order diagnostics


def _column_bands(spans: Sequence[Span], page_width: float) -> dict[str, int]:
    """Assign each span a column band index by clustering x-centers."""
    centers = sorted((s.bbox.center_x(), s.span_id) for s in spans)
    bands: dict[str, int] = {}
    band = 0
    prev_x: float | None = None
    for x, span_id in centers:
        if prev_x is not None and x - prev_x > _BAND_GAP_FRAC * page_width:
            band += 1
        bands[span_id] = band
        prev_x = x
    return bands


def check_reading_order(page: Page) -> list[OrderAnomaly]:
    """Flag orders that jump backward within a column or interleave columns.

    Diagnostic only: the engine consumes the order as given either way.
    """
    # running heads and folios sit outside the reading flow
    body = [s for s in page.spans
            if _MARGIN_FRAC * page.height < s.bbox.center_y()
            < (1.0 - _MARGIN_FRAC) * page.height]
    spans = sorted(body, key=lambda s: s.order)
    if len(spans) < 2:
        return []
    bands = _column_bands(spans, page.width)
    anomalies: list[OrderAnomaly] = []

    for a, b in zip(spans, spans[1:]):
        if bands[a.span_id] == bands[b.span_id] and \
                b.bbox.y0 < a.bbox.y0 - _BACKWARD_TOL:
            anomalies.append(OrderAnomaly(
                kind="backward_jump",
                span_ids=(a.span_id, b.span_id),
                detail=f"order {b.order} moves up {a.bbox.y0 - b.bbox.y0:.1f}pt "
                       f"within column {bands[a.span_id]}"))

    closed: set[int] = set()
    current = bands[spans[0].span_id]
    for s in spans[1:]:
        band = bands[s.span_id]
        if band != current:
            closed.add(current)
            if band in closed:
                anomalies.append(OrderAnomaly(
                    kind="column_interleave",
                    span_ids=(s.span_id,),
                    detail=f"order {s.order} re-enters column {band} "
                           "after it was left"))
            current = band
    return anomalies
