"""Native completion protocol over HTTP.

POST any path with {"prompt", "max_new_tokens", "sampling"?, "stream"?}.
Streaming replies are NDJSON lines {"token": ...} closed by {"done": true};
otherwise a single {"text": ...}. Decoding is greedy.
"""

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from . import model as models
from .prompt import layout_document

log = logging.getLogger("cwescan_trainer.serve")

# Accepted and ignored by greedy decoding; anything else earns a warning header.
KNOWN_SAMPLING = {"temperature"}
MAX_BODY = 4 * 1024 * 1024


class ProtocolError(ValueError):
    pass


def parse_request(body: bytes):
    try:
        req = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ProtocolError(f"body is not JSON: {e}") from None
    if not isinstance(req, dict):
        raise ProtocolError("body must be a JSON object")
    prompt = req.get("prompt")
    if not isinstance(prompt, str) or not prompt:
        raise ProtocolError("'prompt' must be a non-empty string")
    max_new = req.get("max_new_tokens")
    if not isinstance(max_new, int) or isinstance(max_new, bool) or max_new < 1:
        raise ProtocolError("'max_new_tokens' must be an integer >= 1")
    stream = req.get("stream", True)
    if not isinstance(stream, bool):
        raise ProtocolError("'stream' must be a boolean")
    sampling = req.get("sampling", {})
    if not isinstance(sampling, dict):
        raise ProtocolError("'sampling' must be an object")
    ignored = sorted(k for k in sampling if k not in KNOWN_SAMPLING)
    return prompt, max_new, stream, ignored


def load_artifact(path):
    path = Path(path)
    if not path.is_dir():
        raise models.ArtifactError(f"{path}: artifact directory not found")
    template_path = path / "prompt_template.json"
    if not template_path.is_file():
        raise models.ArtifactError(f"{path}: prompt_template.json missing")
    try:
        template = json.loads(template_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise models.ArtifactError(f"{template_path}: {e}") from None
    ours = layout_document()
    if any(template.get(k) != ours[k] for k in ("instruction_prefix", "input_prefix", "output_prefix")):
        raise models.ArtifactError(f"{template_path}: prompt layout differs from this server's")
    return models.load(path), template


def make_handler(model, backend_id: str):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"
        server_version = "cwescan-trainer"

        def log_message(self, fmt, *args):
            log.info("%s " + fmt, self.address_string(), *args)

        def _json(self, status, doc, headers=()):
            data = json.dumps(doc).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            for k, v in headers:
                self.send_header(k, v)
            self.end_headers()
            self.wfile.write(data)

        def do_GET(self):
            self._json(200, {"status": "ok", "backend": backend_id})

        def do_POST(self):
            length = int(self.headers.get("Content-Length") or 0)
            if length > MAX_BODY:
                self._json(413, {"error": {"code": "protocol_error", "message": "request body too large"}})
                return
            try:
                prompt, max_new, stream, ignored = parse_request(self.rfile.read(length))
            except ProtocolError as e:
                self._json(400, {"error": {"code": "protocol_error", "message": str(e)}})
                return
            headers = []
            if ignored:
                headers.append(("X-Cwescan-Warning", "ignored sampling field(s): " + ", ".join(ignored)))
            if not stream:
                self._json(200, {"text": "".join(models.stream_text(model, prompt, max_new))}, headers)
                return
            self.send_response(200)
            self.send_header("Content-Type", "application/x-ndjson")
            self.send_header("Transfer-Encoding", "chunked")
            for k, v in headers:
                self.send_header(k, v)
            self.end_headers()
            try:
                for piece in models.stream_text(model, prompt, max_new):
                    self._chunk(json.dumps({"token": piece}) + "\n")
                self._chunk(json.dumps({"done": True}) + "\n")
                self.wfile.write(b"0\r\n\r\n")
                self.wfile.flush()
            except (BrokenPipeError, ConnectionResetError):
                log.info("client went away mid-stream")

        def _chunk(self, text):
            data = text.encode("utf-8")
            self.wfile.write(f"{len(data):x}\r\n".encode("ascii") + data + b"\r\n")
            self.wfile.flush()

    return Handler


class CompletionServer:
    def __init__(self, artifact, host="127.0.0.1", port=0):
        self.model, self.template = load_artifact(artifact)
        self.httpd = ThreadingHTTPServer((host, port), make_handler(self.model, f"trainer:{Path(artifact).name}"))
        self.httpd.daemon_threads = True
        self._thread = None

    @property
    def port(self) -> int:
        return self.httpd.server_address[1]

    def serve_forever(self):
        self.httpd.serve_forever(poll_interval=0.1)

    def start(self):
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread:
            self._thread.join()
