"""Canonical serialization, hex helpers, and injectable clocks."""

from __future__ import annotations

import hashlib
import json
import time

from .errors import SchemaViolation


def canonical_json(obj) -> str:
    """Deterministic JSON: sorted keys, compact separators, ASCII-safe.

    Snapshots, digests, and the attestation hash chain all go through here
    so that byte identity is meaningful.
    """
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest_json(obj) -> str:
    """sha256 over the canonical JSON encoding of ``obj``."""
    return sha256_hex(canonical_json(obj).encode("utf-8"))


def to_hex(data: bytes) -> str:
    """Lowercase 0x-prefixed hex, the wire form for all binary fields."""
    return "0x" + data.hex()


def from_hex(text: str, length: int | None = None) -> bytes:
    if not isinstance(text, str) or not text.startswith("0x"):
        raise SchemaViolation("binary fields must be 0x-prefixed hex strings")
    body = text[2:]
    if body != body.lower():
        raise SchemaViolation("hex must be lowercase")
    try:
        raw = bytes.fromhex(body)
    except ValueError:
        raise SchemaViolation(f"invalid hex string: {text!r}") from None
    if length is not None and len(raw) != length:
        raise SchemaViolation(f"expected {length} bytes, got {len(raw)}")
    return raw


def parse_amount(value) -> int:
    """Parse a wire amount (decimal string of an unsigned integer)."""
    if isinstance(value, bool) or not isinstance(value, str):
        raise SchemaViolation("amounts must be decimal strings")
    if not value.isdigit():
        raise SchemaViolation(f"invalid amount string: {value!r}")
    return int(value)


class SystemClock:
    """Wall clock in whole unix seconds."""

    def now(self) -> int:
        return int(time.time())


class SimClock:
    """Deterministic clock for scenario runs; advanced explicitly."""

    def __init__(self, start: int = 1_700_000_000):
        self._now = int(start)

    def now(self) -> int:
        return self._now

    def advance(self, seconds: int = 1) -> None:
        self._now += int(seconds)
