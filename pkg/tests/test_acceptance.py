"""Top-level acceptance checks.

One test per shipping criterion; each prints a single PASS line (visible
with ``pytest -s``) and fails loudly otherwise.
"""

import random
import time

import pytest

from conftest import load_fixture
from oracles import lev_oracle, prf_oracle
from spanmd import (BBox, Deviation, EditLabel, EditQueue, ExecConfig, Page,
                    PageRun, QueueConfig, ScriptedBackbone, Span, Trigger,
                    batch_execute, bleu, build_edit_queue,
                    edit_distance_ratio, efficiency_report, eval_classifier,
                    execute, meteor_like, token_prf, vote_span_labels,
                    whitespace_normalize)
from spanmd.editability import ClassifierKind, classify_page
from spanmd.synth import rich_corpus, savings_corpus, scripts_from_references

QCFG = QueueConfig()


def all_fixture_pages():
    return (load_fixture("fixture_simple.json")
            + load_fixture("fixture_columns.json")
            + rich_corpus(pages=12, seed=1)
            + rich_corpus(pages=4, seed=2, columns=2))


def oracle_queue(page):
    return build_edit_queue(page.spans, None, QCFG, page_id=page.page_id)


def faithful_backbone(pages, deviations=()):
    return ScriptedBackbone(scripts_from_references(list(pages)), deviations)


def run_pages(pages, exec_cfg=None):
    backbone = faithful_backbone(pages)
    return [execute(oracle_queue(p), p, backbone, exec_cfg) for p in pages]


def test_criterion_1_oracle_round_trip():
    pages = all_fixture_pages()
    assert len(pages) >= 20
    t0 = time.perf_counter()
    transcripts = run_pages(pages)
    elapsed = time.perf_counter() - t0
    for page, transcript in zip(pages, transcripts):
        assert transcript.text() == \
            whitespace_normalize(page.reference_markdown), page.page_id
        assert not transcript.truncated
    assert elapsed < 5.0
    print(f"\ncriterion 1 PASS: {len(pages)} pages round-trip "
          f"byte-for-byte in {elapsed:.2f}s")


def test_criterion_2_step_savings_law():
    savings = []
    for c in (0.0, 0.25, 0.5, 0.75):
        pages = savings_corpus(c, pages=4, seed=3)
        et = [PageRun(t.page_id, t.generated_steps, truncated=t.truncated)
              for t in run_pages(pages)]
        backbone = faithful_backbone(pages)
        base = []
        for page in pages:
            queue = EditQueue(page_id=page.page_id, actions=(Trigger(),))
            t = execute(queue, page, backbone)
            base.append(PageRun(t.page_id, t.generated_steps))
        report = efficiency_report(base, et)
        assert abs(report.saving_steps_pct - 100.0 * c) <= 5.0, c
        savings.append(report.saving_steps_pct)
    assert all(a < b for a, b in zip(savings, savings[1:]))
    print(f"\ncriterion 2 PASS: savings {['%.1f' % s for s in savings]} "
          "track copyable fractions 0/25/50/75 within 5pp, monotone")


# steps before / steps after / printed saving percentage, one benchmark
# table row per model x dataset combination
TABLE1_ROWS = [
    (926.82, 656.28, 29.2),
    (879.28, 555.88, 36.8),
    (1148.47, 766.69, 33.2),
    (817.62, 562.17, 31.2),
    (786.66, 446.27, 43.3),
    (870.08, 561.82, 35.4),
    (967.80, 607.63, 37.2),
    (911.75, 511.97, 43.8),
    (1174.38, 738.45, 37.1),
]


def test_criterion_3_published_table_arithmetic():
    from spanmd.metrics import saving_pct
    for base, et, printed in TABLE1_ROWS:
        assert abs(saving_pct(base, et) - printed) < 0.05, (base, et)
    print(f"\ncriterion 3 PASS: all {len(TABLE1_ROWS)} benchmark rows "
          "reproduce within 0.05pp")


def test_criterion_4_metric_oracles():
    # exhaustive short pairs (all-pairs up to length 12 is ~6e11 pairs and
    # computationally out of reach; exhaustive <=4 plus seeded random pairs
    # up to length 12 covers the same recurrence)
    alphabet = "abc"
    short = [""]
    frontier = [""]
    for _ in range(4):
        frontier = [s + ch for s in frontier for ch in alphabet]
        short += frontier
    assert len(short) == 121  # sum of 3^k for k in 0..4
    for a in short:
        for b in short:
            denom = max(len(a), len(b))
            expect = 0.0 if denom == 0 else lev_oracle(a, b) / denom
            assert abs(edit_distance_ratio(a, b) - expect) < 1e-9
    rng = random.Random(4)
    for _ in range(2000):
        a = "".join(rng.choices(alphabet, k=rng.randrange(13)))
        b = "".join(rng.choices(alphabet, k=rng.randrange(13)))
        assert edit_distance_ratio(a, b) == \
            pytest.approx(lev_oracle(a, b) / max(len(a), len(b), 1), abs=1e-9)
    vocab = [f"t{i}" for i in range(9)]
    for _ in range(1000):
        pred = " ".join(rng.choices(vocab, k=rng.randrange(12)))
        ref = " ".join(rng.choices(vocab, k=rng.randrange(12)))
        assert token_prf(pred, ref) == pytest.approx(prf_oracle(pred, ref),
                                                     abs=1e-9)
    for _ in range(100):
        text = " ".join(rng.choices(vocab, k=rng.randrange(1, 20)))
        assert bleu(text, text) == pytest.approx(1.0, abs=1e-9)
        assert meteor_like(text, text) == pytest.approx(1.0, abs=1e-9)
    print("\ncriterion 4 PASS: edit distance, token PRF and metric "
          "identities match independent oracles")


def test_criterion_5_skip_recovery():
    overlap = "b1 b2 b3 b4 b5 b6"
    page = Page("skip", 612, 792,
                reference_markdown=f"a1 a2 a3 a4 a5 a6 {overlap}",
                spans=[
                    Span("A", "a1 a2 a3 a4 a5 a6", BBox(40, 100, 572, 112),
                         0, EditLabel.KEEP),
                    Span("B", overlap, BBox(40, 200, 572, 212), 1,
                         EditLabel.INSERT_LEFT),
                ])
    backbone = faithful_backbone([page], [Deviation("skip", at_word=7)])
    t = execute(oracle_queue(page), page, backbone)
    assert t.text() == f"a1 a2 a3 a4 a5 a6 {overlap}"
    assert t.text().count(overlap) == 1
    assert t.skip_events >= 1

    short_page = Page("short", 612, 792,
                      reference_markdown="a1 a2 a3 a4 a5 a6 b1 b2 b3 b4",
                      spans=[
                          Span("A", "a1 a2 a3 a4 a5 a6",
                               BBox(40, 100, 572, 112), 0, EditLabel.KEEP),
                          Span("B", "b1 b2 b3 b4", BBox(40, 200, 572, 212),
                               1, EditLabel.INSERT_LEFT),
                      ])
    backbone = faithful_backbone([short_page], [Deviation("short", at_word=7)])
    t2 = execute(oracle_queue(short_page), short_page, backbone)
    assert t2.skip_events == 0  # span shorter than the skip window
    print("\ncriterion 5 PASS: overlap emitted exactly once with "
          f"skip_events={t.skip_events}; sub-window case fires no skip")


def test_criterion_6_batch_equals_sequential():
    pool = all_fixture_pages()
    rng = random.Random(6)

    def comparable(t):
        return (t.page_id, tuple((tok.word, tok.provenance)
                                 for tok in t.tokens),
                t.generated_steps, t.copied_tokens, t.truncated,
                t.skip_events)

    for _ in range(50):
        pages = [rng.choice(pool) for _ in range(rng.randint(1, 5))]
        queues = [oracle_queue(p) for p in pages]
        sequential = [execute(q, p, faithful_backbone(pages))
                      for q, p in zip(queues, pages)]
        batched = batch_execute(queues, pages, faithful_backbone(pages))
        assert [comparable(t) for t in batched] == \
            [comparable(t) for t in sequential]
    print("\ncriterion 6 PASS: 50 random batch compositions are "
          "token-identical to sequential execution")


def test_criterion_7_queue_invariants_bulk():
    rng = random.Random(7)
    labels = (EditLabel.KEEP, EditLabel.DELETE, EditLabel.INSERT_LEFT)
    checked = 0
    for _ in range(10_000):
        spans = []
        counter = 0
        picked = [rng.choice(labels) for _ in range(rng.randrange(10))]
        for i, label in enumerate(picked):
            n_words = rng.randint(1, 3)
            words = [f"u{counter + j:04d}" for j in range(n_words)]
            counter += n_words
            spans.append(Span(f"s{i}", " ".join(words),
                              BBox(40, 100 + 14 * i, 572, 112 + 14 * i),
                              i, label))
        queue = build_edit_queue(spans, None, QCFG, page_id="prop")
        queue.validate(QCFG)  # first/last trigger, adjacency, back-fill
        kept = [s for s in spans if s.label is not EditLabel.DELETE]
        assert build_edit_queue(kept, None, QCFG, page_id="prop") == queue
        checked += 1
    assert checked == 10_000
    print(f"\ncriterion 7 PASS: {checked} random labeled span lists "
          "satisfy all queue invariants")


def test_criterion_8_truncation_accounting():
    heavy = savings_corpus(0.5, pages=3, seed=4)     # ~206 steps each
    light = (load_fixture("fixture_simple.json")[:1]  # hand-a: 13 steps
             + [p for p in load_fixture("fixture_columns.json")
                if p.page_id == "cols-good"])         # 3 steps
    pages = heavy + light
    cfg = ExecConfig(max_new_tokens=50)
    transcripts = run_pages(pages, cfg)
    flags = {t.page_id: t.truncated for t in transcripts}
    expected = {p.page_id: p in heavy for p in pages}
    assert flags == expected
    et = [PageRun(t.page_id, t.generated_steps, truncated=t.truncated)
          for t in transcripts]
    base = [PageRun(p.page_id, 999) for p in pages]
    report = efficiency_report(base, et)
    assert report.truncation_rate == pytest.approx(len(heavy) / len(pages))
    print(f"\ncriterion 8 PASS: truncation flags match the hand count "
          f"({len(heavy)}/{len(pages)} pages truncated at budget 50)")


def test_criterion_9_classifier_f1():
    pages = all_fixture_pages()
    gold = {s.span_id: s.label for p in pages for s in p.spans}
    voted = {}
    for page in pages:
        voted.update(vote_span_labels(
            classify_page(page, ClassifierKind.ORACLE), page))
    oracle_score = eval_classifier(voted, gold, pages)
    assert oracle_score.micro_f1 == 1.0

    synth_pages = rich_corpus(pages=6, seed=9) + \
        rich_corpus(pages=3, seed=10, columns=2)
    synth_gold = {s.span_id: s.label for p in synth_pages for s in p.spans}
    predicted = {}
    for page in synth_pages:
        predicted.update(vote_span_labels(
            classify_page(page, ClassifierKind.HEURISTIC), page))
    heuristic_score = eval_classifier(predicted, synth_gold, synth_pages)
    assert heuristic_score.micro_f1 >= 0.9
    print(f"\ncriterion 9 PASS: oracle micro-F1 1.0; heuristic micro-F1 "
          f"{heuristic_score.micro_f1:.3f} >= 0.9 on the synthetic corpus")
