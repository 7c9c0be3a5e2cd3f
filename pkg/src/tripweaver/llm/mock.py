"""Deterministic stand-in for a chat-completions endpoint.

Responses are keyed by ``(agent, day, stage)`` read from the request tag.
Each key holds a list of replies served in order; the last one repeats once
the list runs out. Unknown keys get HTTP 404.

Run standalone with ``python -m tripweaver.llm.mock --responses FILE``.
"""

from __future__ import annotations

import argparse
import json
import threading
from collections.abc import Mapping
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional, Union

from .prompts import parse_tag

Key = tuple[int, int, str]


def key_str(key: Key) -> str:
    return f"{key[0]}:{key[1]}:{key[2]}"


def parse_key(text: str) -> Key:
    agent, day, stage = text.split(":")
    return int(agent), int(day), stage


class MockLLMServer:
    def __init__(self, responses: Mapping[Key, Union[str, list[str]]], host: str = "127.0.0.1", port: int = 0):
        self._responses = {k: [v] if isinstance(v, str) else list(v) for k, v in responses.items()}
        self._served: dict[Key, int] = {}
        self._lock = threading.Lock()
        self.requests: list[Key] = []
        self._server = ThreadingHTTPServer((host, port), self._handler())
        self._server.daemon_threads = True
        self._thread: Optional[threading.Thread] = None

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/v1"

    def calls(self, key: Key) -> int:
        with self._lock:
            return self._served.get(key, 0)

    def next_reply(self, key: Key) -> Optional[str]:
        with self._lock:
            self.requests.append(key)
            replies = self._responses.get(key)
            if not replies:
                return None
            n = self._served.get(key, 0)
            self._served[key] = n + 1
            return replies[min(n, len(replies) - 1)]

    def _handler(self):
        mock = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"
            # headers and body go out in separate writes; without this each reply waits on a delayed ACK
            disable_nagle_algorithm = True

            def log_message(self, *args):
                pass

            def _send(self, status: int, body: dict):
                data = json.dumps(body).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def do_POST(self):
                if not self.path.rstrip("/").endswith("/chat/completions"):
                    return self._send(404, {"error": {"message": f"no route {self.path}"}})
                length = int(self.headers.get("Content-Length", 0))
                try:
                    payload = json.loads(self.rfile.read(length))
                    text = "\n".join(m.get("content", "") for m in payload["messages"] if m.get("role") == "user")
                except (ValueError, KeyError, TypeError):
                    return self._send(400, {"error": {"message": "malformed request"}})
                key = parse_tag(text)
                reply = mock.next_reply(key) if key else None
                if reply is None:
                    return self._send(404, {"error": {"message": f"no canned reply for {key}"}})
                self._send(200, {
                    "id": f"mock-{key_str(key)}",
                    "object": "chat.completion",
                    "model": payload.get("model", "mock"),
                    "choices": [{"index": 0, "finish_reason": "stop",
                                 "message": {"role": "assistant", "content": reply}}],
                })

        return Handler

    def start(self) -> "MockLLMServer":
        self._thread = threading.Thread(target=self._server.serve_forever, args=(0.05,), daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self) -> "MockLLMServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def save_responses(responses: Mapping[Key, list[str]], path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps({key_str(k): v for k, v in sorted(responses.items())}, indent=2))


def load_responses(path: Union[str, Path]) -> dict[Key, list[str]]:
    raw = json.loads(Path(path).read_text())
    return {parse_key(k): [v] if isinstance(v, str) else list(v) for k, v in raw.items()}


def main(argv: Optional[list[str]] = None) -> None:
    ap = argparse.ArgumentParser(description="Serve canned chat-completion replies.")
    ap.add_argument("--responses", required=True, help="JSON file mapping 'agent:day:stage' to replies")
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8765)
    args = ap.parse_args(argv)
    server = MockLLMServer(load_responses(args.responses), args.host, args.port)
    print(f"serving on {server.base_url}", flush=True)
    try:
        server._server.serve_forever()
    except KeyboardInterrupt:
        pass


if __name__ == "__main__":
    main()
