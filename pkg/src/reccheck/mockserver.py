"""A local HTTP server speaking the batch prediction protocol.

Used to exercise :class:`reccheck.models.RemoteModel` without a vendor
service::

    with MockRecServer(popularity_responder(["a", "b", "c"])) as srv:
        model = RemoteModel(srv.url)
"""
from __future__ import annotations

import argparse
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Sequence

Responder = Callable[[dict], "tuple[int, object]"]


class MockRecServer:
    """Serve ``responder(payload) -> (status, body)`` on 127.0.0.1.

    ``body`` is JSON-encoded unless it is already ``bytes``. Every decoded
    request payload is appended to :attr:`requests`.
    """

    def __init__(self, responder: Responder, host: str = "127.0.0.1", port: int = 0):
        self.responder = responder
        self.requests: list[dict] = []
        self._lock = threading.Lock()
        server = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                raw = self.rfile.read(length)
                try:
                    payload = json.loads(raw)
                except json.JSONDecodeError:
                    self._send(400, {"error": "invalid JSON"})
                    return
                with server._lock:
                    server.requests.append(payload)
                status, body = server.responder(payload)
                self._send(status, body)

            def _send(self, status, body):
                data = body if isinstance(body, bytes) else json.dumps(body).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):  # keep test output quiet
                pass

        self._httpd = ThreadingHTTPServer((host, port), Handler)
        self._httpd.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}/predict"

    def start(self) -> "MockRecServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, args=(0.05,), daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        if self._thread is not None:  # shutdown() blocks unless serve_forever is running
            self._httpd.shutdown()
            self._thread.join()
            self._thread = None
        self._httpd.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def fixed_responder(lists: Sequence[Sequence[dict]]) -> Responder:
    """Answer every request with the same prediction lists, verbatim."""
    return lambda payload: (200, {"predictions": [list(x) for x in lists]})


def popularity_responder(ranked: Sequence[str]) -> Responder:
    """A well-behaved model: the ranked items minus each query, top k."""

    def respond(payload):
        k = payload["k"]
        preds = []
        for q in payload["queries"]:
            items = [i for i in ranked if i not in q][:k]
            preds.append([{"item_id": i, "score": float(len(ranked) - n)} for n, i in enumerate(items)])
        return 200, {"predictions": preds}

    return respond


def flaky_responder(inner: Responder, failures: int, status: int = 503) -> Responder:
    """Fail the first ``failures`` requests with ``status``, then delegate."""
    state = {"left": failures}
    lock = threading.Lock()

    def respond(payload):
        with lock:
            fail = state["left"] > 0
            state["left"] -= fail
        if fail:
            return status, {"error": "unavailable"}
        return inner(payload)

    return respond


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description="Serve a popularity-ranked mock recommender.")
    parser.add_argument("items", nargs="+", help="items in rank order")
    parser.add_argument("--port", type=int, default=8765)
    args = parser.parse_args(argv)
    srv = MockRecServer(popularity_responder(args.items), port=args.port)
    print(f"serving on {srv.url}")
    try:
        srv._httpd.serve_forever()
    except KeyboardInterrupt:
        pass


if __name__ == "__main__":
    main()
