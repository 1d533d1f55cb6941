"""Edit queue construction.

Turns labeled, reading-ordered spans into an ordered list of Trigger and
CopySpan actions. Triggers ask the backbone to generate until a stop sign
(the first words of the next copied span) matches; copy spans are appended
verbatim. Queues always start and end with a trigger and never contain two
adjacent triggers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping, Optional, Sequence, Union

from .document import EditLabel, Span, tokenize, whitespace_normalize
from .errors import ValidationError


@dataclass(frozen=True)
class QueueConfig:
    min_copy_chars: int = 5
    stop_sign_words: int = 3    # n
    skip_window_words: int = 5  # n', must exceed n

    def __post_init__(self):
        if self.min_copy_chars < 1:
            raise ValueError("min_copy_chars must be >= 1")
        if self.stop_sign_words < 1:
            raise ValueError("stop_sign_words must be >= 1")
        if self.skip_window_words <= self.stop_sign_words:
            raise ValueError("skip_window_words must exceed stop_sign_words")


@dataclass(frozen=True)
class Trigger:
    stop_sign: tuple[str, ...] = ()  # empty = generate to EOS


@dataclass(frozen=True)
class CopySpan:
    span_id: str
    text: str
    stop_sign: tuple[str, ...]

    def words(self) -> list[str]:
        return tokenize(self.text)


EditAction = Union[Trigger, CopySpan]


@dataclass(frozen=True)
class EditQueue:
    page_id: str
    actions: tuple[EditAction, ...]

    def copy_actions(self) -> list[CopySpan]:
        return [a for a in self.actions if isinstance(a, CopySpan)]

    def validate(self, cfg: QueueConfig | None = None) -> None:
        acts = self.actions
        if not acts or not isinstance(acts[0], Trigger):
            raise ValidationError("queue must start with a Trigger",
                                  page_id=self.page_id, rule="first_trigger")
        if not isinstance(acts[-1], Trigger):
            raise ValidationError("queue must end with a Trigger",
                                  page_id=self.page_id, rule="last_trigger")
        for a, b in zip(acts, acts[1:]):
            if isinstance(a, Trigger) and isinstance(b, Trigger):
                raise ValidationError("adjacent Triggers",
                                      page_id=self.page_id,
                                      rule="adjacent_triggers")
        # every trigger's stop sign equals the next copy's, or empty
        for i, act in enumerate(acts):
            if isinstance(act, Trigger):
                nxt = next((a for a in acts[i + 1:] if isinstance(a, CopySpan)),
                           None)
                expect = nxt.stop_sign if nxt is not None else ()
                if act.stop_sign != expect:
                    raise ValidationError(
                        f"trigger {i} stop sign {act.stop_sign} != {expect}",
                        page_id=self.page_id, rule="stop_sign_backfill")
            elif cfg is not None:
                words = act.words()
                n = min(cfg.stop_sign_words, len(words))
                if act.stop_sign != tuple(words[:n]):
                    raise ValidationError(
                        f"copy {act.span_id!r} stop sign mismatch",
                        page_id=self.page_id, span_id=act.span_id,
                        rule="copy_stop_sign")
                if len(whitespace_normalize(act.text)) < cfg.min_copy_chars:
                    raise ValidationError(
                        f"copy {act.span_id!r} shorter than min_copy_chars",
                        page_id=self.page_id, span_id=act.span_id,
                        rule="copy_min_chars")


def build_edit_queue(spans: Sequence[Span],
                     labels: Optional[Mapping[str, EditLabel]],
                     cfg: QueueConfig,
                     page_id: str = "") -> EditQueue:
    """Build a queue from spans in reading order.

    ``labels`` maps span_id to its edit label; if None, the spans' own
    (oracle) labels are used. Spans shorter than ``min_copy_chars`` are not
    copied; the backbone is expected to generate them.
    """
    actions: list[EditAction] = [Trigger()]
    for span in spans:
        if labels is not None:
            label = labels.get(span.span_id)
        else:
            label = span.label
        if label is None:
            raise ValidationError(f"span {span.span_id!r} has no label",
                                  page_id=page_id, span_id=span.span_id,
                                  rule="label_missing")
        if label is EditLabel.DELETE:
            continue
        if label is EditLabel.INSERT_LEFT and \
                not isinstance(actions[-1], Trigger):
            actions.append(Trigger())
        text = whitespace_normalize(span.text)
        if len(text) < cfg.min_copy_chars:
            continue
        words = tokenize(text)
        stop = tuple(words[:min(cfg.stop_sign_words, len(words))])
        actions.append(CopySpan(span.span_id, text, stop))
    if not isinstance(actions[-1], Trigger):
        actions.append(Trigger())

    # back-fill trigger stop signs from the next copy span
    next_stop: tuple[str, ...] = ()
    filled: list[EditAction] = []
    for act in reversed(actions):
        if isinstance(act, CopySpan):
            next_stop = act.stop_sign
            filled.append(act)
        else:
            filled.append(Trigger(stop_sign=next_stop))
    filled.reverse()
    return EditQueue(page_id=page_id, actions=tuple(filled))


def queue_stats(queue: EditQueue, spans: Sequence[Span],
                labels: Optional[Mapping[str, EditLabel]] = None) -> dict[str, Any]:
    """Copy coverage for step-savings reporting.

    copy_fraction = copied characters / total non-DELETE span characters.
    """
    copied = sum(len(c.text) for c in queue.copy_actions())
    total = 0
    for span in spans:
        label = labels.get(span.span_id) if labels is not None else span.label
        if label is not EditLabel.DELETE:
            total += len(whitespace_normalize(span.text))
    return {
        "copy_chars": copied,
        "copy_fraction": copied / total if total else 0.0,
        "trigger_count": sum(1 for a in queue.actions
                             if isinstance(a, Trigger)),
    }


def queue_to_jsonable(queue: EditQueue) -> dict[str, Any]:
    actions = []
    for act in queue.actions:
        if isinstance(act, Trigger):
            actions.append({"type": "trigger", "stop": list(act.stop_sign)})
        else:
            actions.append({"type": "copy", "span_id": act.span_id,
                            "text": act.text, "stop": list(act.stop_sign)})
    return {"page_id": queue.page_id, "actions": actions}
