"""JSON-over-HTTP backbone and classifier clients against local stub
servers."""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from spanmd import (QueueConfig, RemoteBackbone, ScriptedBackbone,
                    build_edit_queue, classify_page, execute,
                    vote_span_labels, whitespace_normalize)
from spanmd.editability import ClassifierKind, RemoteClassifier
from spanmd.errors import BackboneError, TransportError
from spanmd.executor import Finish, GenRequest, stop_match

QCFG = QueueConfig()


class _StubHandler(BaseHTTPRequestHandler):
    """Scripted replay behind the generation wire protocol, plus an oracle
    classifier. ``fail_first`` makes the next N requests return 500."""

    scripts: dict = {}
    fail_first = 0
    lock = threading.Lock()

    def log_message(self, *args):  # keep test output clean
        pass

    def _read(self):
        length = int(self.headers["Content-Length"])
        return json.loads(self.rfile.read(length))

    def _send(self, obj, code=200):
        body = json.dumps(obj).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self):
        cls = type(self)
        with cls.lock:
            if cls.fail_first > 0:
                cls.fail_first -= 1
                self._send({"error": "flaky"}, code=500)
                return
        payload = self._read()
        if self.path == "/generate":
            self._send(self._generate(payload))
        elif self.path == "/classify":
            self._send(self._classify(payload))
        else:
            self._send({"error": "not found"}, code=404)

    def _generate(self, payload):
        # pages are keyed by image_ref: the wire protocol carries no page id
        script = type(self).scripts[payload["image_ref"]].split()
        pos = len(payload["prefix_text"].split())
        stop = payload["stop_sign"]
        emitted = []
        finish = "length"
        while len(emitted) < payload["max_new_tokens"]:
            if pos >= len(script):
                finish = "eos"
                break
            emitted.append(script[pos])
            pos += 1
            if stop_match(emitted, stop):
                finish = "stop"
                break
        return {"text": " ".join(emitted), "steps": len(emitted),
                "finish": finish}

    def _classify(self, payload):
        preds = []
        for span in payload["page"]["spans"]:
            for i in range(len(span["text"].split())):
                preds.append({"span_id": span["span_id"], "token_index": i,
                              "label": span["label"], "confidence": 0.95})
        return {"predictions": preds}


@pytest.fixture
def stub_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _StubHandler.fail_first = 0
    _StubHandler.scripts = {}
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()
    server.server_close()


def _prepare(page):
    page.image_ref = page.page_id
    _StubHandler.scripts[page.page_id] = \
        whitespace_normalize(page.reference_markdown)
    return build_edit_queue(page.spans, None, QCFG, page_id=page.page_id)


def test_remote_backbone_matches_scripted(stub_server, hand_a, hand_b):
    for page in (hand_a, hand_b):
        queue = _prepare(page)
        remote = execute(queue, page, RemoteBackbone(stub_server))
        local = execute(queue, page,
                        ScriptedBackbone(
                            {page.page_id: page.reference_markdown}))
        assert remote.text() == local.text()
        assert remote.generated_steps == local.generated_steps
        assert remote.copied_tokens == local.copied_tokens


def test_remote_backbone_strips_padding(stub_server, hand_a):
    _prepare(hand_a)
    bb = RemoteBackbone(stub_server)
    res = bb.generate(GenRequest("s0", "hand-a", ("<pad>", "<pad>", "#"),
                                 ("Edit", "Queues", "For"), 10,
                                 image_ref="hand-a"))
    assert res.tokens == ("Edit", "Queues", "For")
    assert res.finish is Finish.STOP_MATCHED


def test_remote_backbone_retries_transient_failures(stub_server, hand_a):
    queue = _prepare(hand_a)
    _StubHandler.fail_first = 1
    t = execute(queue, hand_a, RemoteBackbone(stub_server, retries=2))
    assert t.text() == whitespace_normalize(hand_a.reference_markdown)


def test_remote_backbone_exhausted_retries(stub_server, hand_a):
    queue = _prepare(hand_a)
    _StubHandler.fail_first = 100
    with pytest.raises(BackboneError) as exc:
        execute(queue, hand_a, RemoteBackbone(stub_server, retries=1))
    # the partial transcript survives for debugging
    assert exc.value.partial_transcript is not None


def test_transport_error_is_retryable_flagged():
    bb = RemoteBackbone("http://127.0.0.1:1", timeout_s=0.2, retries=0)
    with pytest.raises(TransportError) as exc:
        bb.generate(GenRequest("s0", "p", (), (), 5))
    assert exc.value.retryable


def test_remote_classifier_round_trip(stub_server, hand_a):
    client = RemoteClassifier(stub_server + "/classify")
    preds = classify_page(hand_a, ClassifierKind.REMOTE, client=client)
    labels = vote_span_labels(preds, hand_a)
    assert labels == {s.span_id: s.label for s in hand_a.spans}
    assert all(p.confidence == 0.95 for p in preds)


def test_remote_classifier_failure(stub_server, hand_a):
    _StubHandler.fail_first = 100
    client = RemoteClassifier(stub_server + "/classify", retries=0)
    with pytest.raises(TransportError):
        client.classify(hand_a)
