"""A small JSON-RPC server imitating a node, backed by block fixtures.

Serves ``getblockhash``, ``getblock`` (verbosity 2), ``getblockcount`` and
``getbestblockhash`` over HTTP with JSON-RPC 1.0 envelopes.  Blocks are
kept as their original JSON text so numbers are returned verbatim.
"""

import base64
import json
import os
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .. import jsonl

RPC_INVALID_PARAMETER = -8
RPC_INVALID_ADDRESS_OR_KEY = -5
RPC_METHOD_NOT_FOUND = -32601


class BlockStore:
    def __init__(self, block_texts):
        self.by_hash = {}
        self.hash_at = {}
        for text in block_texts:
            block = jsonl.loads(text)
            self.by_hash[block["hash"]] = text
            self.hash_at[block["height"]] = block["hash"]

    @classmethod
    def from_path(cls, path):
        """Load a JSON-lines file, a JSON array file, or a directory of ``.json`` files."""
        if os.path.isdir(path):
            texts = []
            for name in sorted(os.listdir(path)):
                if name.endswith(".json"):
                    with open(os.path.join(path, name), encoding="utf-8") as fh:
                        texts.append(jsonl.dumps(jsonl.loads(fh.read())))
            return cls(texts)
        with jsonl.open_text_in(path) as fh:
            content = fh.read()
        if content.lstrip().startswith("["):
            return cls(jsonl.dumps(b) for b in jsonl.loads(content))
        return cls(line for line in content.splitlines() if line.strip())

    @property
    def tip(self):
        return max(self.hash_at) if self.hash_at else -1


class _Handler(BaseHTTPRequestHandler):
    server_version = "chainline-mockrpc/0.1"

    def log_message(self, fmt, *args):
        pass

    def _send(self, status, body):
        data = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _authorized(self):
        creds = self.server.credentials
        if creds is None:
            return True
        header = self.headers.get("Authorization", "")
        expected = "Basic " + base64.b64encode(f"{creds[0]}:{creds[1]}".encode()).decode()
        return header == expected

    def do_POST(self):
        mock = self.server.mock
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length)
        with mock.lock:
            mock.calls.append(raw)
            if mock.fail_next > 0:
                mock.fail_next -= 1
                self._send(503, "service unavailable")
                return
        if not self._authorized():
            self._send(401, "")
            return
        try:
            req = json.loads(raw)
        except ValueError:
            self._send(500, json.dumps({"result": None, "error": {"code": -32700, "message": "Parse error"}, "id": None}))
            return
        rid = json.dumps(req.get("id"))
        try:
            result_text = mock.dispatch(req.get("method"), req.get("params") or [])
        except _RpcFault as fault:
            err = json.dumps({"code": fault.code, "message": fault.message})
            self._send(500, '{"result":null,"error":%s,"id":%s}' % (err, rid))
            return
        self._send(200, '{"result":%s,"error":null,"id":%s}' % (result_text, rid))


class _RpcFault(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code
        self.message = message


class MockRpcServer:
    """Threaded mock node; use as a context manager in tests.

    ``fail_next`` makes the next N requests fail with HTTP 503;
    ``tamper`` may rewrite a block (dict) before it is returned.
    """

    def __init__(self, store, host="127.0.0.1", port=0, credentials=None, tamper=None):
        self.store = store
        self.tamper = tamper
        self.fail_next = 0
        self.calls = []
        self.lock = threading.Lock()
        self.httpd = ThreadingHTTPServer((host, port), _Handler)
        self.httpd.mock = self
        self.httpd.credentials = credentials
        self._thread = None

    @property
    def url(self):
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}/"

    def methods_called(self):
        return [json.loads(c)["method"] for c in self.calls if c.startswith(b"{")]

    def dispatch(self, method, params):
        store = self.store
        if method == "getblockhash":
            height = params[0] if params else None
            if height not in store.hash_at:
                raise _RpcFault(RPC_INVALID_PARAMETER, "Block height out of range")
            return json.dumps(store.hash_at[height])
        if method == "getblock":
            blockhash = params[0] if params else None
            verbosity = params[1] if len(params) > 1 else 1
            if verbosity != 2:
                raise _RpcFault(RPC_INVALID_PARAMETER, "only verbosity 2 is served")
            text = store.by_hash.get(blockhash)
            if text is None:
                raise _RpcFault(RPC_INVALID_ADDRESS_OR_KEY, "Block not found")
            if self.tamper is not None:
                text = jsonl.dumps(self.tamper(jsonl.loads(text)))
            return text
        if method == "getblockcount":
            return json.dumps(store.tip)
        if method == "getbestblockhash":
            return json.dumps(store.hash_at.get(store.tip))
        raise _RpcFault(RPC_METHOD_NOT_FOUND, "Method not found")

    def start(self):
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self):
        self.httpd.serve_forever()

    def stop(self):
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
