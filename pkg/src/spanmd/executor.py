"""Edit queue execution against a token-generating backbone.

Triggers run fill-in-the-middle generation: the backbone receives the
in-progress transcript as prefix and decodes until it matches the stop sign
(the first words of the next copied span), reaches end of page, or hits the
length limit. Copy actions append span text verbatim with COPIED provenance.

Stop matching lives in the backbone (it happens in the decoder's own token
space); the executor independently watches the emitted words for the skip
window: when the last n' generated words coincide with the next copy span's
first n' words, the backbone evidently produced that span itself, so the
redundant copy action is discarded and generation retargets the following
stop sign.
"""

from __future__ import annotations

import itertools
import time
from abc import ABC, abstractmethod
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Sequence

import requests

from .document import Page, detokenize, tokenize
from .edit_queue import CopySpan, EditQueue, Trigger
from .errors import BackboneError, ReservedTokenError, TransportError

DEFAULT_PAD_TOKEN = "<pad>"


class Finish(Enum):
    STOP_MATCHED = "stop"
    EOS = "eos"
    LENGTH = "length"


class Provenance(Enum):
    COPIED = "copied"
    GENERATED = "generated"


@dataclass(frozen=True)
class GenRequest:
    session_id: str
    page_id: str
    prefix: tuple[str, ...]
    stop_sign: tuple[str, ...]
    max_new_tokens: int
    image_ref: Optional[str] = None
    pad_token: str = DEFAULT_PAD_TOKEN


@dataclass(frozen=True)
class GenResult:
    tokens: tuple[str, ...]
    finish: Finish
    steps: int


@dataclass(frozen=True)
class TranscriptToken:
    word: str
    provenance: Provenance


@dataclass
class Transcript:
    page_id: str
    tokens: list[TranscriptToken] = field(default_factory=list)
    generated_steps: int = 0
    copied_tokens: int = 0
    truncated: bool = False
    skip_events: int = 0
    timings: dict[str, float] = field(default_factory=dict)

    def words(self) -> list[str]:
        return [t.word for t in self.tokens]

    def text(self) -> str:
        return detokenize(self.words())

    def to_jsonable(self) -> dict[str, Any]:
        return {
            "page_id": self.page_id,
            "text": self.text(),
            "generated_steps": self.generated_steps,
            "copied_tokens": self.copied_tokens,
            "truncated": self.truncated,
            "skip_events": self.skip_events,
            "timings": self.timings,
            "tokens": [{"w": t.word, "p": t.provenance.value}
                       for t in self.tokens],
        }


@dataclass(frozen=True)
class ExecConfig:
    max_new_tokens: int = 1024
    skip_window_words: int = 5  # n' from the queue config
    pad_token: str = DEFAULT_PAD_TOKEN

    def __post_init__(self):
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")


def stop_match(generated_tail: Sequence[str],
               stop_sign: Sequence[str]) -> bool:
    """True iff the tail ends with exactly the stop sign word sequence.

    Case- and whitespace-exact; an empty stop sign never matches.
    """
    n = len(stop_sign)
    if n == 0 or len(generated_tail) < n:
        return False
    return tuple(generated_tail[-n:]) == tuple(stop_sign)


@dataclass(frozen=True)
class SkipDecision:
    span_id: str            # the copy action to discard
    new_stop: tuple[str, ...]


def watch_skip(generated_tail: Sequence[str],
               pending: Sequence, cfg: ExecConfig) -> Optional[SkipDecision]:
    """Check the skip window against the next copy span in the queue.

    Fires when the last n' generated words equal the span's first n' words,
    meaning the backbone generated the span content itself (a recovery from
    classifier errors); the copy action should be discarded.
    """
    nxt = next((a for a in pending if isinstance(a, CopySpan)), None)
    if nxt is None:
        return None
    n_prime = cfg.skip_window_words
    words = nxt.words()
    if len(words) < n_prime or len(generated_tail) < n_prime:
        return None
    if tuple(generated_tail[-n_prime:]) != tuple(words[:n_prime]):
        return None
    following = next(
        (a for a in pending if isinstance(a, CopySpan) and a is not nxt), None)
    new_stop = following.stop_sign if following is not None else ()
    return SkipDecision(span_id=nxt.span_id, new_stop=new_stop)


# --- backbones --------------------------------------------------------------

class Backbone(ABC):
    """Abstract token generator consumed by the executor."""

    @abstractmethod
    def generate(self, request: GenRequest) -> GenResult:
        raise NotImplementedError

    def generate_batch(self, requests_: Sequence[GenRequest]) -> list[GenResult]:
        return [self.generate(r) for r in requests_]


@dataclass(frozen=True)
class Deviation:
    """Fault injection for scripted replay.

    ``insert`` tokens are hallucinated at script word index ``at_word``, and
    the backbone loses stop tracking around the deviation: the first stop
    match ending at or after that point goes undetected (once per session).
    This models real decoders blowing through a copy boundary.
    """
    page_id: str
    at_word: int
    insert: tuple[str, ...] = ()


class ScriptedBackbone(Backbone):
    """Deterministic replay backbone: the test oracle standing in for a
    neural PDF-to-Markdown model.

    With no deviations the emitted tokens are exactly a contiguous slice of
    the page script; the cursor is the length of the (pad-stripped) prefix,
    which stays aligned with the script because copies re-supply trimmed
    stop words verbatim.
    """

    def __init__(self, scripts: dict[str, str],
                 deviations: Sequence[Deviation] = ()):
        self._streams: dict[str, list[str]] = {}
        self._dev_points: dict[str, list[int]] = {}
        for page_id, text in scripts.items():
            stream = tokenize(text)
            points = []
            offset = 0
            for dev in sorted((d for d in deviations if d.page_id == page_id),
                              key=lambda d: d.at_word):
                at = dev.at_word + offset
                stream[at:at] = list(dev.insert)
                points.append(at)
                offset += len(dev.insert)
            self._streams[page_id] = stream
            self._dev_points[page_id] = points
        self._consumed: dict[str, set[int]] = {}

    @classmethod
    def from_jsonable(cls, obj: dict[str, Any]) -> "ScriptedBackbone":
        """Load the script file format: page_id -> markdown, plus optional
        {"deviations": [{"page_id", "at_word", "insert"}]}."""
        devs = tuple(
            Deviation(page_id=d["page_id"], at_word=int(d["at_word"]),
                      insert=tuple(d.get("insert", [])))
            for d in obj.get("deviations", []))
        scripts = {k: v for k, v in obj.items()
                   if k != "deviations" and isinstance(v, str)}
        return cls(scripts, devs)

    def generate(self, request: GenRequest) -> GenResult:
        stream = self._streams.get(request.page_id)
        if stream is None:
            raise BackboneError(f"no script for page {request.page_id!r}")
        pos = sum(1 for w in request.prefix if w != request.pad_token)
        consumed = self._consumed.setdefault(request.session_id, set())
        points = self._dev_points.get(request.page_id, [])
        emitted: list[str] = []
        stop = tuple(request.stop_sign)
        finish = Finish.LENGTH
        while len(emitted) < request.max_new_tokens:
            if pos >= len(stream):
                finish = Finish.EOS
                break
            emitted.append(stream[pos])
            pos += 1
            if stop_match(emitted, stop):
                missed = next(
                    (i for i, pt in enumerate(points)
                     if pt <= pos - 1 and i not in consumed), None)
                if missed is not None and pos - 1 >= points[missed]:
                    consumed.add(missed)
                    continue
                finish = Finish.STOP_MATCHED
                break
        return GenResult(tokens=tuple(emitted), finish=finish,
                         steps=len(emitted))


class RemoteBackbone(Backbone):
    """Client for the JSON-over-HTTP generation protocol."""

    def __init__(self, endpoint: str, timeout_s: float = 30.0, retries: int = 2):
        self.endpoint = endpoint.rstrip("/")
        self.timeout_s = timeout_s
        self.retries = retries

    def generate(self, request: GenRequest) -> GenResult:
        prefix = [w for w in request.prefix if w != request.pad_token]
        payload = {
            "session_id": request.session_id,
            "prefix_text": detokenize(prefix),
            "image_ref": request.image_ref,
            "stop_sign": list(request.stop_sign),
            "max_new_tokens": request.max_new_tokens,
        }
        last: BaseException | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = requests.post(self.endpoint + "/generate", json=payload,
                                     timeout=self.timeout_s)
                resp.raise_for_status()
                body = resp.json()
                return GenResult(
                    tokens=tuple(tokenize(body["text"])),
                    finish=Finish(body["finish"]),
                    steps=int(body["steps"]),
                )
            except (requests.RequestException, KeyError, ValueError) as exc:
                last = exc
                if attempt < self.retries:
                    time.sleep(min(0.1 * 2 ** attempt, 1.0))
        raise TransportError(
            f"generate request to {self.endpoint} failed "
            f"after {self.retries + 1} attempts: {last}",
            retryable=True, cause=last)


# --- execution --------------------------------------------------------------

_session_counter = itertools.count()


class _Run:
    """Per-page execution state machine, shared by sequential and batched
    execution so their outputs are identical by construction."""

    def __init__(self, queue: EditQueue, page: Page, cfg: ExecConfig):
        self.page = page
        self.cfg = cfg
        self.pending: deque = deque(queue.actions)
        self.transcript = Transcript(page_id=page.page_id)
        self.session_id = f"{page.page_id}#{next(_session_counter)}"
        self.active_stop: tuple[str, ...] = ()
        self.gen_tail: list[str] = []
        self.in_trigger = False
        self.done = False
        self._gen_time = 0.0
        self._copy_time = 0.0
        for act in self.pending:
            if isinstance(act, CopySpan) and cfg.pad_token in act.words():
                raise ReservedTokenError(
                    f"pad token {cfg.pad_token!r} appears in span "
                    f"{act.span_id!r} text")

    def next_request(self) -> Optional[GenRequest]:
        """Advance through copy actions; return the generate request for the
        next trigger, or None when the page is finished."""
        while not self.done:
            if self.in_trigger:
                remaining = self.cfg.max_new_tokens - \
                    self.transcript.generated_steps
                if remaining <= 0:
                    self.transcript.truncated = True
                    self._finish()
                    return None
                return GenRequest(
                    session_id=self.session_id,
                    page_id=self.page.page_id,
                    prefix=tuple(self.transcript.words()),
                    stop_sign=self.active_stop,
                    max_new_tokens=remaining,
                    image_ref=self.page.image_ref,
                    pad_token=self.cfg.pad_token,
                )
            if not self.pending:
                self._finish()
                return None
            act = self.pending.popleft()
            if isinstance(act, CopySpan):
                self._apply_copy(act)
            else:
                self.in_trigger = True
                self.active_stop = act.stop_sign
                self.gen_tail = []
        return None

    def feed(self, result: GenResult) -> None:
        t = self.transcript
        t.generated_steps += result.steps
        skipped = False
        for word in result.tokens:
            t.tokens.append(TranscriptToken(word, Provenance.GENERATED))
            self.gen_tail.append(word)
            decision = watch_skip(self.gen_tail, self.pending, self.cfg)
            if decision is not None:
                self._apply_skip(decision)
                skipped = True
        if result.finish is Finish.STOP_MATCHED:
            if skipped:
                # the backbone stopped on a stale stop sign (its copy was
                # just discarded); keep the words and continue generating
                # toward the retargeted stop
                return
            del t.tokens[len(t.tokens) - len(self.active_stop):]
            self.in_trigger = False
        elif result.finish is Finish.EOS:
            self.in_trigger = False
            self._drain()
        else:  # LENGTH
            t.truncated = True
            self._finish()

    def _apply_copy(self, act: CopySpan) -> None:
        t0 = time.monotonic()
        words = act.words()
        self.transcript.tokens.extend(
            TranscriptToken(w, Provenance.COPIED) for w in words)
        self.transcript.copied_tokens += len(words)
        self._copy_time += time.monotonic() - t0

    def _apply_skip(self, decision: SkipDecision) -> None:
        # drop everything up to and including the discarded copy, merging
        # its following trigger (if any) into the active one
        while self.pending:
            act = self.pending.popleft()
            if isinstance(act, CopySpan) and act.span_id == decision.span_id:
                break
        if self.pending and isinstance(self.pending[0], Trigger):
            self.pending.popleft()
        self.active_stop = decision.new_stop
        self.transcript.skip_events += 1

    def _drain(self) -> None:
        """End of page reached: remaining copies still carry real page
        content, so emit them; remaining triggers have nothing to generate."""
        while self.pending:
            act = self.pending.popleft()
            if isinstance(act, CopySpan):
                self._apply_copy(act)
        self._finish()

    def _finish(self) -> None:
        self.done = True
        self.in_trigger = False
        self.transcript.timings["generate_s"] = self._gen_time
        self.transcript.timings["copy_s"] = self._copy_time

    def add_gen_time(self, dt: float) -> None:
        self._gen_time += dt


def execute(queue: EditQueue, page: Page, backbone: Backbone,
            cfg: ExecConfig | None = None) -> Transcript:
    """Run one edit queue to completion; returns the page transcript."""
    cfg = cfg or ExecConfig()
    run = _Run(queue, page, cfg)
    while True:
        req = run.next_request()
        if req is None:
            break
        t0 = time.monotonic()
        try:
            result = backbone.generate(req)
        except TransportError as exc:
            raise BackboneError(
                f"backbone failed on page {page.page_id!r}: {exc}",
                partial_transcript=run.transcript, cause=exc) from exc
        run.add_gen_time(time.monotonic() - t0)
        run.feed(result)
    return run.transcript


def batch_execute(queues: Sequence[EditQueue], pages: Sequence[Page],
                  backbone: Backbone,
                  cfg: ExecConfig | None = None) -> list[Transcript]:
    """Lock-step batched execution.

    Each round collects one generate request per page that is sitting at a
    trigger, left-pads all prefixes to equal length, and issues a single
    batched call. Output transcripts are element-wise identical to
    sequential ``execute`` (padding is stripped at the wire boundary).
    """
    cfg = cfg or ExecConfig()
    if len(queues) != len(pages):
        raise ValueError("queues and pages must be parallel lists")
    runs = [_Run(q, p, cfg) for q, p in zip(queues, pages)]
    while True:
        pairs = []
        for run in runs:
            req = run.next_request()
            if req is not None:
                pairs.append((run, req))
        if not pairs:
            break
        width = max(len(req.prefix) for _, req in pairs)
        padded = []
        for run, req in pairs:
            pad = (cfg.pad_token,) * (width - len(req.prefix))
            padded.append(GenRequest(
                session_id=req.session_id, page_id=req.page_id,
                prefix=pad + req.prefix, stop_sign=req.stop_sign,
                max_new_tokens=req.max_new_tokens, image_ref=req.image_ref,
                pad_token=req.pad_token))
        t0 = time.monotonic()
        try:
            results = backbone.generate_batch(padded)
        except TransportError as exc:
            raise BackboneError(f"batched backbone call failed: {exc}",
                                partial_transcript=[r.transcript for r in runs],
                                cause=exc) from exc
        dt = time.monotonic() - t0
        for (run, _), result in zip(pairs, results):
            run.add_gen_time(dt / len(pairs))
            run.feed(result)
    return [run.transcript for run in runs]
