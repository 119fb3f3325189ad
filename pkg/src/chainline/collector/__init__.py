"""Raw chain acquisition: RPC collection, reversal, enrichment, synthesis."""

from .enrich import enrich, enrich_block
from .mockrpc import BlockStore, MockRpcServer
from .reverse import reverse_blockfile, reverse_lines
from .rpc import RpcClient, RpcEndpoint, fetch_chain_backward, load_checkpoint
from .synth import SynthSpec, synth_blocks, synth_chain

__all__ = [
    "BlockStore",
    "MockRpcServer",
    "RpcClient",
    "RpcEndpoint",
    "SynthSpec",
    "enrich",
    "enrich_block",
    "fetch_chain_backward",
    "load_checkpoint",
    "reverse_blockfile",
    "reverse_lines",
    "synth_blocks",
    "synth_chain",
]
