"""spanmd: span-annotated PDF pages to Markdown.

Copies editable text verbatim and delegates non-copyable regions
(formulas, tables, headings) to a pluggable token-generating backbone
under a fill-in-the-middle contract.
"""

from .document import (BBox, EditLabel, OrderAnomaly, Page, Span,
                       TokenizerMode, TokenizerSpec, check_reading_order,
                       detokenize, ingest_spans, serialize_pages, tokenize,
                       whitespace_normalize)
from .edit_queue import (CopySpan, EditQueue, QueueConfig, Trigger,
                         build_edit_queue, queue_stats)
from .editability import (ClassifierKind, HeuristicRules, TokenPrediction,
                          classify_page, eval_classifier, vote_span_labels)
from .executor import (Backbone, Deviation, ExecConfig, Finish, GenRequest,
                       GenResult, Provenance, RemoteBackbone,
                       ScriptedBackbone, Transcript, batch_execute, execute,
                       stop_match, watch_skip)
from .metrics import (EfficiencyReport, PageRun, QualityReport, bleu,
                      edit_distance_ratio, efficiency_report, levenshtein,
                      meteor_like, quality_report, token_prf)

__version__ = "0.1.0"

__all__ = [
    "BBox", "EditLabel", "OrderAnomaly", "Page", "Span", "TokenizerMode",
    "TokenizerSpec", "check_reading_order", "detokenize", "ingest_spans",
    "serialize_pages", "tokenize", "whitespace_normalize",
    "CopySpan", "EditQueue", "QueueConfig", "Trigger", "build_edit_queue",
    "queue_stats",
    "ClassifierKind", "HeuristicRules", "TokenPrediction", "classify_page",
    "eval_classifier", "vote_span_labels",
    "Backbone", "Deviation", "ExecConfig", "Finish", "GenRequest",
    "GenResult", "Provenance", "RemoteBackbone", "ScriptedBackbone",
    "Transcript", "batch_execute", "execute", "stop_match", "watch_skip",
    "EfficiencyReport", "PageRun", "QualityReport", "bleu",
    "edit_distance_ratio", "efficiency_report", "levenshtein", "meteor_like",
    "quality_report", "token_prf",
]
