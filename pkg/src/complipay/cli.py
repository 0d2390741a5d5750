"""Command line entry point.

Modes:
  scenario  run a configured purchase end to end, write transcript + snapshot
  serve     expose the gateway over HTTP for interactive clients
  inspect   answer queries against a previously written snapshot

Exit codes: 0 success, 1 a run or query failed its checks, 2 usage, config,
or environment problems.
"""

from __future__ import annotations

import argparse
import importlib.resources
import json
import logging
import os
import pathlib
import signal
import socket
import sys
import threading

from . import agents, gateway
from .errors import ComplipayError, ConfigError
from .util import canonical_json, parse_amount, sha256_hex

log = logging.getLogger("complipay")

CONFIG_ENV = "COMPLIPAY_CONFIG"
BUNDLED_SCENARIOS = ("scenario1", "scenario2")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="complipay",
        description="compliance-gated payment settlement engine",
    )
    parser.add_argument("--mode", choices=("scenario", "serve", "inspect"),
                        default="scenario", help="what to run (default: scenario)")
    parser.add_argument("--scenario", default=None,
                        help="config: a JSON file path or a bundled name "
                             f"({', '.join(BUNDLED_SCENARIOS)}); falls back to "
                             f"${CONFIG_ENV}, then scenario1")
    parser.add_argument("--listen", default="127.0.0.1:8402", metavar="HOST:PORT",
                        help="serve mode bind address (default: 127.0.0.1:8402)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config's random seed")
    parser.add_argument("--out", default="out", metavar="DIR",
                        help="directory for transcript.jsonl and snapshot.json")
    parser.add_argument("--snapshot", default=None, metavar="PATH",
                        help="inspect mode: snapshot.json to query")
    parser.add_argument("--query", nargs="+", default=None, metavar="QUERY",
                        help="inspect mode: 'conservation' or 'attestations <tx_id>'")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    return parser


def load_config(spec: str | None, seed_override: int | None) -> dict:
    """Resolve a scenario reference: explicit flag, then the environment,
    then the bundled default."""
    ref = spec or os.environ.get(CONFIG_ENV) or "scenario1"
    if ref in BUNDLED_SCENARIOS:
        text = (importlib.resources.files("complipay") / "fixtures" / f"{ref}.json").read_text()
    else:
        path = pathlib.Path(ref)
        if not path.is_file():
            raise ConfigError(f"no such scenario config: {ref}")
        text = path.read_text(encoding="utf-8")
    try:
        config = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"scenario config is not valid JSON: {err}") from err
    if not isinstance(config, dict):
        raise ConfigError("scenario config must be a JSON object")
    if seed_override is not None:
        config = {**config, "seed": seed_override}
    return config


def write_artifacts(out_dir: str, world: agents.World) -> None:
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    transcript = out / "transcript.jsonl"
    with transcript.open("w", encoding="utf-8") as fh:
        for event in world.service.events.all():
            fh.write(canonical_json(event) + "\n")
    (out / "snapshot.json").write_text(
        canonical_json(world.service.snapshot()) + "\n", encoding="utf-8"
    )
    log.info("wrote %s and %s", transcript, out / "snapshot.json")


def cmd_scenario(args) -> int:
    config = load_config(args.scenario, args.seed)
    world, result = agents.run_scenario(config)
    write_artifacts(args.out, world)
    problems = agents.check_expectations(world, result)
    label = config.get("name", "scenario")
    print(f"{label}: buyer={result.buyer_state} rounds={result.rounds_used} "
          f"quiescent={result.quiescent}")
    for account_id in world.ledger.account_ids():
        print(f"  balance {account_id} = {world.ledger.balance_of(account_id)}")
    print(f"  escrow_pool = {world.ledger.escrow_pool()}")
    if problems:
        for problem in problems:
            print(f"expectation failed: {problem}", file=sys.stderr)
        return 1
    return 0


def parse_listen(value: str) -> tuple[str, int]:
    host, sep, port = value.rpartition(":")
    if not sep or not host:
        raise ConfigError(f"--listen wants HOST:PORT, got {value!r}")
    try:
        return host, int(port)
    except ValueError as err:
        raise ConfigError(f"--listen port must be an integer, got {port!r}") from err


def cmd_serve(args) -> int:
    import uvicorn

    config = load_config(args.scenario, args.seed)
    host, port = parse_listen(args.listen)
    world = agents.build_world(config)
    app = gateway.create_app(world.service)
    # claim the port up front so a squatter is a clean usage error, not a
    # stack trace from inside the server loop
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as err:
        print(f"cannot bind {host}:{port}: {err}", file=sys.stderr)
        return 2
    finally:
        probe.close()
    print(f"complipay gateway listening on http://{host}:{port}", flush=True)
    # uvicorn replays a caught SIGTERM with the pre-run handler once its loop
    # stops; leave a no-op there so the replay cannot kill us before the
    # transcript is flushed
    if threading.current_thread() is threading.main_thread():
        signal.signal(signal.SIGTERM, lambda signum, frame: None)
    try:
        uvicorn.run(app, host=host, port=port,
                    log_level="debug" if args.verbose else "warning")
    finally:
        write_artifacts(args.out, world)
    return 0


def _snapshot_conservation(snapshot: dict) -> int:
    ledger = snapshot["ledger"]
    supply = parse_amount(ledger["total_supply"])
    held = sum(parse_amount(acc["balance"]) for acc in ledger["accounts"].values())
    pool = parse_amount(ledger["escrow_pool"])
    ok = supply == held + pool
    print(f"conservation: supply={supply} balances={held} escrow_pool={pool} "
          f"{'HOLDS' if ok else 'VIOLATED'}")
    return 0 if ok else 1


def _snapshot_attestations(snapshot: dict, tx_id: str) -> int:
    records = snapshot["compliance"]["attestations"]
    prev = "0" * 64
    for record in records:
        content = {k: v for k, v in record.items() if k != "hash"}
        if record["prev_hash"] != prev or sha256_hex(canonical_json(content).encode()) != record["hash"]:
            print(f"attestation chain broken at tx={record['tx_id']} round={record['round']}",
                  file=sys.stderr)
            return 1
        prev = record["hash"]
    matching = [r for r in records if r["tx_id"] == tx_id]
    print(f"attestations for {tx_id}: {len(matching)} (chain verified over {len(records)})")
    for record in matching:
        overall = record["aggregate"]["overall"]
        print(f"  round {record['round']}: {overall} at seq {record['recorded_at']} "
              f"hash {record['hash'][:16]}…")
    return 0


def cmd_inspect(args) -> int:
    if not args.snapshot or not args.query:
        print("inspect mode needs --snapshot PATH and --query", file=sys.stderr)
        return 2
    path = pathlib.Path(args.snapshot)
    if not path.is_file():
        print(f"no such snapshot: {path}", file=sys.stderr)
        return 2
    try:
        snapshot = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        print(f"snapshot is not valid JSON: {err}", file=sys.stderr)
        return 2
    query = args.query
    if query[0] == "conservation" and len(query) == 1:
        return _snapshot_conservation(snapshot)
    if query[0] == "attestations" and len(query) == 2:
        return _snapshot_attestations(snapshot, query[1])
    print(f"unknown query: {' '.join(query)} "
          "(try 'conservation' or 'attestations <tx_id>')", file=sys.stderr)
    return 2


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.mode == "scenario":
            return cmd_scenario(args)
        if args.mode == "serve":
            return cmd_serve(args)
        return cmd_inspect(args)
    except ConfigError as err:
        print(f"config error: {err.message}", file=sys.stderr)
        return 2
    except ComplipayError as err:
        print(f"error [{err.code}]: {err.message}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
