"""Deterministic synthetic chains with node-like block JSON.

Generated blocks look like ``getblock <hash> 2`` output: values are
decimal bitcoin amounts, ``pubkey`` outputs carry their address only in
``asm``, and a few unknown fields (``difficulty``, ``scriptSig``, ...) are
present so that losslessness of later stages can be checked.  Every
non-coinbase input spends an existing unspent output.
"""

import hashlib
import random
from dataclasses import dataclass
from typing import Tuple

from .. import jsonl
from ..jsonl import JsonDecimal
from ..blockmodel import satoshi_to_btc
from ..errors import SpecError
from .enrich import enrich_block

B58 = "123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz"
COINBASE_REWARD = 50 * 100_000_000


@dataclass
class SynthSpec:
    blocks: int = 10
    seed: int = 0
    tx_per_block: Tuple[int, int] = (0, 4)
    inputs_per_tx: Tuple[int, int] = (1, 3)
    outputs_per_tx: Tuple[int, int] = (1, 3)
    new_address_prob: float = 0.5
    pubkey_prob: float = 0.15
    multisig_prob: float = 0.05
    nulldata_prob: float = 0.03
    nonstandard_prob: float = 0.02
    start_time: int = 1231006505
    block_interval: int = 600

    def validate(self):
        if self.blocks < 1:
            raise SpecError("block count must be positive")
        for name in ("tx_per_block", "inputs_per_tx", "outputs_per_tx"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo:
                raise SpecError(f"{name} must be a range 0 <= lo <= hi, got {(lo, hi)}")
        if self.outputs_per_tx[0] < 1:
            raise SpecError("outputs_per_tx must not allow transactions with zero outputs")
        if self.inputs_per_tx[0] < 1:
            raise SpecError("inputs_per_tx must require at least one input")
        if not 0 <= self.new_address_prob <= 1:
            raise SpecError("new_address_prob must be a probability")
        if not 0 <= self.seed < 2 ** 64:
            raise SpecError("seed must be a 64-bit unsigned integer")
        return self


class _Generator:
    def __init__(self, spec):
        self.spec = spec.validate()
        self.rng = random.Random(spec.seed)
        self.addresses = []
        self.utxo = []

    def _hash(self, *parts):
        return hashlib.sha256(":".join(map(str, (self.spec.seed,) + parts)).encode()).hexdigest()

    def _address(self):
        rng = self.rng
        if not self.addresses or rng.random() < self.spec.new_address_prob:
            n = rng.getrandbits(192)
            chars = []
            while n:
                n, r = divmod(n, 58)
                chars.append(B58[r])
            addr = "1" + "".join(chars)
            self.addresses.append(addr)
            return addr
        return rng.choice(self.addresses)

    def _output(self, n, value):
        rng, spec = self.rng, self.spec
        roll = rng.random()
        if roll < spec.nulldata_prob:
            spk = {"asm": "OP_RETURN " + self._hash("data", rng.random())[:40], "type": "nulldata"}
            return {"value": JsonDecimal("0.00000000"), "n": n, "scriptPubKey": spk}, False
        roll -= spec.nulldata_prob
        if roll < spec.nonstandard_prob:
            spk = {"asm": "OP_NOP OP_TRUE", "type": "nonstandard"}
        else:
            roll -= spec.nonstandard_prob
            if roll < spec.pubkey_prob:
                spk = {"asm": f"{self._address()} OP_CHECKSIG", "type": "pubkey"}
            elif roll - spec.pubkey_prob < spec.multisig_prob:
                keys = [self._address() for _ in range(rng.randint(2, 3))]
                spk = {"asm": "1 " + " ".join(keys) + f" {len(keys)} OP_CHECKMULTISIG",
                       "reqSigs": 1, "type": "multisig", "addresses": keys}
            else:
                addr = self._address()
                spk = {"asm": f"OP_DUP OP_HASH160 {addr} OP_EQUALVERIFY OP_CHECKSIG",
                       "reqSigs": 1, "type": "pubkeyhash", "addresses": [addr]}
        return {"value": JsonDecimal(satoshi_to_btc(value)), "n": n, "scriptPubKey": spk}, True

    def _split(self, total, parts):
        cuts = sorted(self.rng.randint(0, total) for _ in range(parts - 1))
        bounds = [0] + cuts + [total]
        return [bounds[i + 1] - bounds[i] for i in range(parts)]

    def _outputs(self, txid, height, total, count):
        vout = []
        values = self._split(total, count)
        for n, value in enumerate(values):
            out, spendable = self._output(n, value)
            if not spendable:
                value = 0
            vout.append(out)
            if spendable:
                self.utxo.append((txid, n, value))
        return vout

    def _spend(self, k):
        rng = self.rng
        picks = sorted(rng.sample(range(len(self.utxo)), k), reverse=True)
        spent = []
        for i in picks:
            self.utxo[i], self.utxo[-1] = self.utxo[-1], self.utxo[i]
            spent.append(self.utxo.pop())
        rng.shuffle(spent)
        return spent

    def block(self, height):
        rng, spec = self.rng, self.spec
        txs = []
        cb_txid = self._hash("tx", height, 0)
        cb = {"txid": cb_txid, "hash": cb_txid, "version": 1, "locktime": 0,
              "vin": [{"coinbase": format(height, "08x") + "ff", "sequence": 4294967295}]}
        cb["vout"] = self._outputs(cb_txid, height, COINBASE_REWARD, rng.randint(1, 2))
        txs.append(cb)
        for i in range(1, rng.randint(*spec.tx_per_block) + 1):
            if not self.utxo:
                break
            spent = self._spend(min(rng.randint(*spec.inputs_per_tx), len(self.utxo)))
            txid = self._hash("tx", height, i)
            vin = [{"txid": t, "vout": n, "scriptSig": {"asm": "", "hex": ""}, "sequence": 4294967295}
                   for t, n, _ in spent]
            total = sum(v for _, _, v in spent)
            fee = rng.randint(0, min(total, 5000))
            tx = {"txid": txid, "hash": txid, "version": 2, "locktime": 0, "vin": vin}
            tx["vout"] = self._outputs(txid, height, total - fee, rng.randint(*spec.outputs_per_tx))
            txs.append(tx)
        block = {
            "hash": self._hash("block", height),
            "confirmations": spec.blocks - height,
            "height": height,
            "version": 1,
            "merkleroot": self._hash("merkle", height),
            "time": spec.start_time + height * spec.block_interval + rng.randint(0, spec.block_interval // 2),
            "nonce": rng.getrandbits(32),
            "bits": "1d00ffff",
            "difficulty": JsonDecimal("1.00000000"),
            "nTx": len(txs),
            "tx": txs,
        }
        if height > 0:
            block["previousblockhash"] = self._hash("block", height - 1)
        if height < spec.blocks - 1:
            block["nextblockhash"] = self._hash("block", height + 1)
        return block


def synth_blocks(spec, enriched=True):
    """Yield the blocks of a synthetic chain in chronological order."""
    gen = _Generator(spec)
    for height in range(spec.blocks):
        block = gen.block(height)
        yield enrich_block(block) if enriched else block


def synth_chain(spec, out_path, enriched=True, compress=False):
    """Write a synthetic chain as JSON-lines; return the number of blocks."""
    return jsonl.write_lines(out_path, (jsonl.dumps(b) for b in synth_blocks(spec, enriched)), compress)
