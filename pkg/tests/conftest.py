"""Shared fixtures: synthetic material and a local stub generation server."""
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest
from hypothesis import settings

settings.register_profile("suite", deadline=None, max_examples=50)
settings.load_profile("suite")


@pytest.fixture
def stub_server():
    """Local HTTP endpoint with a configurable canned response.

    Yields (url, state); tests mutate state["body"] / state["content_type"]
    before the request and read state["requests"] afterwards.
    """
    state = {"body": b"", "content_type": "audio/wav", "status": 200, "requests": []}

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            state["requests"].append(self.rfile.read(length))
            self.send_response(state["status"])
            self.send_header("Content-Type", state["content_type"])
            self.send_header("Content-Length", str(len(state["body"])))
            self.end_headers()
            self.wfile.write(state["body"])

        def log_message(self, *args):
            pass

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/generate", state
    server.shutdown()
    thread.join(timeout=5)
