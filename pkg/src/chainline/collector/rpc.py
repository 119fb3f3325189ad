"""JSON-RPC client and backward chain collection.

Collection asks the node for the tip's hash once, then follows each
block's ``previousblockhash`` down to the genesis block, writing one JSON
line per block (newest first).  After every block a checkpoint records the
last written height, the next hash to fetch and the file offset, so an
interrupted run can resume without re-fetching.
"""

import itertools
import json
import logging
import os
import time
from dataclasses import dataclass
from typing import Optional

import requests

from .. import jsonl
from ..errors import CollectionAborted, IntegrityError, RpcError

log = logging.getLogger(__name__)


@dataclass
class RpcEndpoint:
    url: str
    user: Optional[str] = None
    password: Optional[str] = None
    timeout: float = 30.0
    retries: int = 3
    backoff: float = 0.5

    def __post_init__(self):
        if self.retries < 0:
            raise ValueError("retry budget must be >= 0")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")


class TransientRpcError(RpcError):
    pass


class RpcClient:
    """Minimal JSON-RPC 1.0 client for a bitcoin-core style node."""

    def __init__(self, endpoint, session=None):
        self.endpoint = endpoint
        self.session = session or requests.Session()
        if endpoint.user is not None:
            self.session.auth = (endpoint.user, endpoint.password or "")
        self._ids = itertools.count()
        self.requests_sent = 0

    def _call_once(self, method, params):
        payload = {"jsonrpc": "1.0", "id": next(self._ids), "method": method, "params": params}
        self.requests_sent += 1
        try:
            resp = self.session.post(self.endpoint.url, data=json.dumps(payload), timeout=self.endpoint.timeout,
                                     headers={"Content-Type": "text/plain"})
        except requests.RequestException as exc:
            raise TransientRpcError(f"{method}: {exc}") from exc
        body = None
        try:
            body = jsonl.loads(resp.content.decode("utf-8"))
        except ValueError:
            pass
        if isinstance(body, dict) and body.get("error"):
            err = body["error"]
            raise RpcError(f"{method}: error {err.get('code')}: {err.get('message')}")
        if resp.status_code == 401:
            raise RpcError(f"{method}: authentication rejected by {self.endpoint.url}")
        if resp.status_code >= 500 or body is None:
            raise TransientRpcError(f"{method}: HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise RpcError(f"{method}: HTTP {resp.status_code}")
        return body.get("result")

    def call(self, method, *params):
        attempt = 0
        while True:
            try:
                return self._call_once(method, list(params))
            except TransientRpcError as exc:
                if attempt >= self.endpoint.retries:
                    raise RpcError(f"{exc} (gave up after {attempt + 1} attempts)") from exc
                delay = self.endpoint.backoff * (2 ** attempt)
                log.warning("%s; retrying in %.2fs", exc, delay)
                time.sleep(delay)
                attempt += 1

    def getblockhash(self, height):
        return self.call("getblockhash", height)

    def getblock(self, blockhash, verbosity=2):
        return self.call("getblock", blockhash, verbosity)

    def getblockcount(self):
        return self.call("getblockcount")


def _save_checkpoint(path, state):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(state, fh)
    os.replace(tmp, path)


def load_checkpoint(path):
    with open(path) as fh:
        return json.load(fh)


def default_checkpoint_path(out_path):
    return str(out_path) + ".checkpoint"


def fetch_chain_backward(client, tip, out_path, checkpoint_path=None, resume=False):
    """Write blocks ``tip, tip-1, ..., 0`` to ``out_path``, one per line.

    Returns the number of blocks written by this call.  Raises
    :class:`CollectionAborted` (carrying the checkpoint) when the RPC
    endpoint keeps failing, and :class:`IntegrityError` when the returned
    blocks do not form a hash chain.
    """
    checkpoint_path = checkpoint_path or default_checkpoint_path(out_path)
    if resume and os.path.exists(checkpoint_path):
        state = load_checkpoint(checkpoint_path)
        if state["tip"] != tip:
            raise ValueError(f"checkpoint is for tip {state['tip']}, not {tip}")
        with open(out_path, "r+b") as fh:
            fh.truncate(state["offset"])
        height = state["last_height"] - 1
        blockhash = state["next_hash"]
        mode = "ab"
        log.info("resuming at height %d", height)
    else:
        state = {"tip": tip, "last_height": None, "next_hash": None, "offset": 0}
        height = tip
        blockhash = None
        mode = "wb"

    written = 0
    with open(out_path, mode) as out:
        try:
            if blockhash is None and height >= 0:
                blockhash = client.getblockhash(tip)
            while height >= 0:
                block = client.getblock(blockhash, 2)
                if not isinstance(block, dict) or block.get("hash") != blockhash:
                    got = block.get("hash") if isinstance(block, dict) else block
                    raise IntegrityError(f"requested block {blockhash} at height {height}, node returned {got}")
                if block.get("height") != height:
                    raise IntegrityError(f"block {blockhash} has height {block.get('height')}, expected {height}")
                prev = block.get("previousblockhash")
                if height > 0 and not prev:
                    raise IntegrityError(f"block {height} has no previousblockhash")
                if height == 0 and prev:
                    raise IntegrityError("genesis block references a previous block")
                out.write(jsonl.dumps(block).encode("utf-8") + b"\n")
                out.flush()
                written += 1
                state.update(last_height=height, next_hash=prev, offset=out.tell())
                _save_checkpoint(checkpoint_path, state)
                blockhash = prev
                height -= 1
        except RpcError as exc:
            raise CollectionAborted(f"collection aborted: {exc}", dict(state)) from exc
    return written
