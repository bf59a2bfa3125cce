from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from helpers import write_photo


class WireState:
    """Mutable behavior knobs + request log for the stub wire server."""

    def __init__(self):
        self.vqa_answer = "yes"
        self.iqa_score: object = 0.83
        self.llm_text = "Is there a bird?\nIs the bird red?"
        self.status = 200
        self.send_garbage = False
        self.delay = 0.0
        self.requests: list[tuple[str, dict]] = []
        self.in_flight = 0
        self.max_in_flight_seen = 0
        self._lock = threading.Lock()


class _Handler(BaseHTTPRequestHandler):
    state: WireState

    def do_POST(self):
        with self.state._lock:
            self.state.in_flight += 1
            self.state.max_in_flight_seen = max(self.state.max_in_flight_seen,
                                                self.state.in_flight)
        try:
            self._respond()
        finally:
            with self.state._lock:
                self.state.in_flight -= 1

    def _respond(self):
        if self.state.delay:
            import time

            time.sleep(self.state.delay)
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length)) if length else {}
        self.state.requests.append((self.path, body))
        if self.state.send_garbage:
            self.send_response(200)
            self.end_headers()
            self.wfile.write(b"not json at all")
            return
        if self.state.status != 200:
            payload = {"error": "scripted failure"}
            self.send_response(self.state.status)
            self.send_header("Content-Type", "application/json")
            self.end_headers()
            self.wfile.write(json.dumps(payload).encode())
            return
        if self.path == "/v1/vqa":
            payload = {"answer": self.state.vqa_answer}
        elif self.path == "/v1/iqa":
            payload = {"score": self.state.iqa_score}
        elif self.path == "/v1/generate":
            payload = {"text": self.state.llm_text}
        else:
            self.send_response(404)
            self.end_headers()
            self.wfile.write(b'{"error": "no such route"}')
            return
        body_bytes = json.dumps(payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(body_bytes)

    def log_message(self, *args):
        pass


@pytest.fixture()
def wire_server():
    state = WireState()
    handler = type("Handler", (_Handler,), {"state": state})
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    url = f"http://127.0.0.1:{server.server_address[1]}"
    yield url, state
    server.shutdown()
    server.server_close()


@pytest.fixture()
def photo_file(tmp_path):
    return write_photo(tmp_path / "photo.png", seed=0)
