"""Deterministic local chat-completion endpoint for tests and fixtures.

Responses are pure functions of the prompt text, so recording against
this stub produces cassettes that replay byte-identically anywhere.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer


def _stable_hash(text: str) -> int:
    return int(hashlib.sha256(text.encode("utf-8")).hexdigest(), 16)


_RULE_LINE = re.compile(r"^Rule: (.+)$", re.M)

_EXPLANATION_FORMS = (
    "If the pattern {body} holds, then {head} follows.",
    "Whenever {body} is the case, the graph also records {head}.",
    "{body} implies {head} in this knowledge graph.",
)


def deterministic_response(prompt_text: str, model_name: str = "") -> str:
    """Judge prompts get an integer; explanation prompts get a sentence.

    The model name participates in the hash so that different "models"
    produce different (but stable) outputs for the same prompt.
    """
    h = _stable_hash(model_name + "\x00" + prompt_text)
    if "Rate the CORRECTNESS" in prompt_text:
        score = (h % 5) + 1
        return str(score) if h % 3 else f"Score: {score}. The explanation holds up."
    m = _RULE_LINE.search(prompt_text)
    rule = m.group(1).strip() if m else "the rule"
    if "=>" in rule:
        body, head = (part.strip() for part in rule.split("=>", 1))
    else:
        body = head = rule
    return _EXPLANATION_FORMS[h % len(_EXPLANATION_FORMS)].format(body=body, head=head)


class StubLLMServer:
    """OpenAI-shaped endpoint backed by deterministic_response."""

    def __init__(self):
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                request = json.loads(self.rfile.read(length))
                prompt = request["messages"][0]["content"]
                text = deterministic_response(prompt, request.get("model", ""))
                body = json.dumps(
                    {
                        "choices": [{"message": {"content": text}}],
                        "usage": {
                            "prompt_tokens": len(prompt) // 4,
                            "completion_tokens": len(text) // 4,
                        },
                    }
                ).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):
                pass

        self.server = HTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.server.server_port}"

    def close(self):
        self.server.shutdown()
        self.server.server_close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
