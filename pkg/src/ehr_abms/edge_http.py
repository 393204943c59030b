"""Local HTTP facade over an :class:`EdgeStore`.

    PUT  /objects          body = ciphertext container, header X-Owner-Gid
    POST /tokens           JSON {"object_id": ..., "ttl_seconds": ...}
    GET  /once/<token>     200 + ciphertext, or 410 with a fixed body
"""

from __future__ import annotations

import json
import threading
from datetime import timedelta
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .edge_store import EdgeStore
from .errors import MalformedCiphertextError, UnknownObjectError

GONE_BODY = b"gone\n"


def _handler_for(store: EdgeStore):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # keep test output quiet
            pass

        def _send(self, status: int, body: bytes, ctype: str = "application/json") -> None:
            self.send_response(status)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _body(self) -> bytes:
            return self.rfile.read(int(self.headers.get("Content-Length", "0")))

        def do_PUT(self):
            if self.path != "/objects":
                return self._send(404, b'{"error":"not found"}')
            data = self._body()
            try:
                oid = store.put_object(self.headers.get("X-Owner-Gid", ""), data)
            except MalformedCiphertextError as exc:
                return self._send(400, json.dumps({"error": str(exc)}).encode())
            self._send(201, json.dumps({"object_id": oid}).encode())

        def do_POST(self):
            if self.path != "/tokens":
                return self._send(404, b'{"error":"not found"}')
            try:
                req = json.loads(self._body() or b"{}")
                ttl = req.get("ttl_seconds")
                tok, url = store.issue_token(
                    req["object_id"], None if ttl is None else timedelta(seconds=float(ttl))
                )
            except UnknownObjectError:
                return self._send(404, b'{"error":"unknown object"}')
            except (KeyError, ValueError, TypeError):
                return self._send(400, b'{"error":"bad request"}')
            self._send(201, json.dumps({"token": tok.token, "url": url}).encode())

        def do_GET(self):
            if not self.path.startswith("/once/"):
                return self._send(404, b'{"error":"not found"}')
            data = store.redeem(self.path[len("/once/") :])
            if data is None:
                return self._send(410, GONE_BODY, "text/plain")
            self._send(200, data, "application/octet-stream")

    return Handler


def make_server(store: EdgeStore, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    return ThreadingHTTPServer((host, port), _handler_for(store))


def serve_in_background(store: EdgeStore, host: str = "127.0.0.1", port: int = 0):
    """Start the facade on a daemon thread; returns (server, base_url)."""
    server = make_server(store, host, port)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    h, p = server.server_address[:2]
    return server, f"http://{h}:{p}"
