"""``chainline`` command line: one subcommand per pipeline stage.

Typical run::

    chainline collect --rpc-url http://127.0.0.1:8332/ --out chain.rev.jsonl
    chainline reverse --in chain.rev.jsonl --out chain.raw.jsonl
    chainline enrich --in chain.raw.jsonl --out chain.jsonl
    chainline index --in chain.jsonl --out indexed.jsonl --mem 1000000000
    chainline distill --view addresses --in indexed.jsonl --out distilled.txt
    chainline cluster --in distilled.txt --kout 1..15,inf --out clusters/
    chainline stats --metric spending-delay --in tios.txt --out delays.txt

Inputs may be gzip-compressed; ``-`` means stdin/stdout where a stage is a
pure stream transform.
"""

import argparse
import logging
import os
import shutil
import sys
import tempfile

from . import __version__, analytics, cluster, distiller, extsort, indexer, jsonl
from .collector.enrich import enrich as enrich_stream
from .collector import mockrpc, reverse, rpc, synth
from .errors import ChainlineError

log = logging.getLogger("chainline")


def _int_range(text):
    lo, _, hi = text.partition(",")
    return (int(lo), int(hi or lo))


def _add_mem(p, flag="--mem", default=extsort.DEFAULT_MEMORY):
    p.add_argument(flag, type=int, default=default, metavar="BYTES",
                   help=f"memory budget in bytes (min {extsort.MIN_MEMORY}, default %(default)s)")
    p.add_argument("--tmp", default=None, metavar="DIR", help="directory for spill files")


def build_parser():
    parser = argparse.ArgumentParser(prog="chainline", description="Streaming ETL for full blockchain data.")
    parser.add_argument("--version", action="version", version=f"chainline {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("collect", help="fetch the chain backward from the tip over JSON-RPC")
    p.add_argument("--rpc-url", default="http://127.0.0.1:8332/")
    p.add_argument("--rpc-user")
    p.add_argument("--rpc-pass")
    p.add_argument("--out", required=True, metavar="FILE")
    p.add_argument("--tip", type=int, help="tip height (default: ask the node)")
    p.add_argument("--resume", action="store_true", help="continue from the checkpoint next to --out")
    p.add_argument("--checkpoint", metavar="FILE")
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--retries", type=int, default=3)

    p = sub.add_parser("reverse", help="reverse a JSON-lines file with bounded memory")
    p.add_argument("--in", dest="inp", default="-", metavar="FILE")
    p.add_argument("--out", default="-", metavar="FILE")
    p.add_argument("--memory-budget", "--mem", dest="mem", type=int, default=reverse.DEFAULT_MEMORY, metavar="BYTES")
    p.add_argument("--tmp", default=None, metavar="DIR")
    p.add_argument("--gzip", action="store_true")

    p = sub.add_parser("enrich", help="add addresses fields and convert values to satoshis")
    p.add_argument("--in", dest="inp", default="-", metavar="FILE")
    p.add_argument("--out", default="-", metavar="FILE")
    p.add_argument("--gzip", action="store_true")

    p = sub.add_parser("index", help="add prefix-consistent indexes")
    p.add_argument("--in", dest="inp", default="-", metavar="FILE")
    p.add_argument("--out", default="-", metavar="FILE")
    _add_mem(p)
    p.add_argument("--keep-intermediates", action="store_true")
    p.add_argument("--gzip", action="store_true")

    p = sub.add_parser("distill", help="extract a flat view from an indexed chain")
    p.add_argument("--view", choices=distiller.VIEWS, default="addresses")
    p.add_argument("--in", dest="inp", default="-", metavar="FILE")
    p.add_argument("--out", default="-", metavar="FILE")
    p.add_argument("--gzip", action="store_true")

    p = sub.add_parser("cluster", help="input-based clustering metrics per K_out")
    p.add_argument("--in", dest="inp", required=True, metavar="DISTILLED")
    p.add_argument("--kout", default="1..15,inf", help="thresholds, e.g. 1..15,inf")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--addresses", type=int, default=None, help="address count, enables bounds checks")
    _add_mem(p)

    p = sub.add_parser("stats", help="statistics tables from distilled views")
    p.add_argument("--metric", required=True, choices=analytics.METRICS)
    p.add_argument("--in", dest="inp", default="-", metavar="FILE")
    p.add_argument("--out", default="-", metavar="FILE")
    p.add_argument("--bin", type=int, default=analytics.DAY, metavar="SECONDS")
    p.add_argument("--per-decade", type=int, default=analytics.DEFAULT_PER_DECADE)
    p.add_argument("--top", type=int, default=10000, metavar="K")
    p.add_argument("--last", type=int, default=None, metavar="N")
    p.add_argument("--address", type=int, action="append", metavar="INDEX",
                   help="address for address-timeline (repeatable; default: two most used)")

    p = sub.add_parser("synth", help="generate a deterministic synthetic chain")
    p.add_argument("--blocks", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-", metavar="FILE")
    p.add_argument("--raw", action="store_true", help="node-style output (decimal values, no enrichment)")
    p.add_argument("--tx-per-block", type=_int_range, default=(0, 4), metavar="LO,HI")
    p.add_argument("--inputs", type=_int_range, default=(1, 3), metavar="LO,HI")
    p.add_argument("--outputs", type=_int_range, default=(1, 3), metavar="LO,HI")
    p.add_argument("--new-address-prob", type=float, default=0.5)
    p.add_argument("--gzip", action="store_true")

    p = sub.add_parser("mock-rpc", help="serve block fixtures over JSON-RPC")
    p.add_argument("--fixture", required=True, metavar="PATH", help="JSON-lines file, JSON array, or directory")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=18332)
    p.add_argument("--rpc-user")
    p.add_argument("--rpc-pass")

    p = sub.add_parser("sort", help="external sort of space-delimited records")
    p.add_argument("--key", required=True, help="key parts, e.g. 2,1n (1-based fields, n = numeric)")
    p.add_argument("--in", dest="inp", default="-", metavar="FILE")
    p.add_argument("--out", default="-", metavar="FILE")
    p.add_argument("--fan-in", type=int, default=extsort.DEFAULT_FAN_IN)
    _add_mem(p)
    return parser


def _spool(path, tmp):
    """Multi-pass stages need a real file; copy stdin to one if necessary."""
    if path != "-":
        return path, None
    fd, spooled = tempfile.mkstemp(prefix="chainline-stdin-", dir=tmp)
    with os.fdopen(fd, "wb") as out:
        shutil.copyfileobj(jsonl.open_binary_in("-"), out)
    return spooled, spooled


def cmd_collect(args):
    url = os.environ.get("CHAINLINE_RPC_URL") or args.rpc_url
    user, password = args.rpc_user, args.rpc_pass
    auth = os.environ.get("CHAINLINE_RPC_AUTH")
    if auth:
        user, _, password = auth.partition(":")
    client = rpc.RpcClient(rpc.RpcEndpoint(url, user, password, timeout=args.timeout, retries=args.retries))
    tip = args.tip
    if tip is None:
        tip = client.getblockcount()
    n = rpc.fetch_chain_backward(client, tip, args.out, args.checkpoint, resume=args.resume)
    log.info("collected %d blocks", n)


def cmd_reverse(args):
    reverse.reverse_blockfile(args.inp, args.out, args.mem, args.tmp, args.gzip)


def cmd_enrich(args):
    with jsonl.LineWriter(args.out, args.gzip) as out:
        for block in enrich_stream(jsonl.read_blocks(args.inp)):
            out.write_block(block)


def cmd_index(args):
    path, spooled = _spool(args.inp, args.tmp)
    try:
        stats = indexer.index_chain(path, args.out, memory=args.mem, tmp_dir=args.tmp,
                                    keep_intermediates=args.keep_intermediates, compress=args.gzip)
    finally:
        if spooled:
            os.remove(spooled)
    if args.keep_intermediates:
        print(f"intermediates kept in {stats.workdir}", file=sys.stderr)


def cmd_distill(args):
    jsonl.write_lines(args.out, distiller.distill(jsonl.read_blocks(args.inp), args.view), args.gzip)


def cmd_cluster(args):
    budget = extsort.SortBudget(memory=args.mem, spill_dir=args.tmp)
    written = cluster.cluster_file(args.inp, args.out, cluster.parse_kout_list(args.kout), budget, args.addresses)
    for path in written.values():
        log.info("wrote %s", path)


def cmd_stats(args):
    m = args.metric
    lines = jsonl.read_lines(args.inp)
    if m == "tx-counts":
        rows = analytics.tx_counts_over_time(lines, args.bin)
    elif m == "io-correlation":
        rows = analytics.io_correlation(lines)
    elif m == "amount-icdf":
        rows = analytics.amount_icdf(lines, args.per_decade)
    elif m in ("amounts-top", "amounts-bottom", "amounts-daily"):
        res = analytics.amounts_over_time(lines, args.top)
        rows = {"amounts-top": res.top, "amounts-bottom": res.bottom, "amounts-daily": res.daily}[m]
    elif m == "address-reuse":
        rows = analytics.address_reuse(lines)
    elif m == "address-summary":
        rows = sorted(analytics.address_summary(lines).items())
    elif m == "address-timeline":
        targets = args.address
        if not targets:
            path, spooled = _spool(args.inp, None)
            targets = analytics.top_addresses(jsonl.read_lines(path), 2)
            try:
                series = analytics.address_timeline(jsonl.read_lines(path), targets)
            finally:
                if spooled:
                    os.remove(spooled)
        else:
            series = analytics.address_timeline(lines, targets)
        rows = [(a,) + row for a in targets for row in series[a]]
    elif m == "fee-cdf":
        rows = analytics.fee_cdf(lines, args.last)
    elif m == "spending-delay":
        rows = analytics.spending_delay(lines)
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(m)
    analytics.write_table(args.out, rows)


def cmd_synth(args):
    spec = synth.SynthSpec(blocks=args.blocks, seed=args.seed, tx_per_block=args.tx_per_block,
                           inputs_per_tx=args.inputs, outputs_per_tx=args.outputs,
                           new_address_prob=args.new_address_prob)
    synth.synth_chain(spec, args.out, enriched=not args.raw, compress=args.gzip)


def cmd_mock_rpc(args):
    creds = (args.rpc_user, args.rpc_pass or "") if args.rpc_user else None
    server = mockrpc.MockRpcServer(mockrpc.BlockStore.from_path(args.fixture), args.host, args.port, creds)
    print(f"serving {len(server.store.by_hash)} blocks at {server.url}", file=sys.stderr, flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.httpd.server_close()


def cmd_sort(args):
    budget = extsort.SortBudget(memory=args.mem, spill_dir=args.tmp, fan_in=args.fan_in)
    extsort.sort_file(args.inp, args.out, args.key, budget)


COMMANDS = {
    "collect": cmd_collect,
    "reverse": cmd_reverse,
    "enrich": cmd_enrich,
    "index": cmd_index,
    "distill": cmd_distill,
    "cluster": cmd_cluster,
    "stats": cmd_stats,
    "synth": cmd_synth,
    "mock-rpc": cmd_mock_rpc,
    "sort": cmd_sort,
}


def run(argv=None):
    """Parse ``argv`` and run one stage; return the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (ChainlineError, OSError, ValueError) as exc:
        print(f"chainline {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
