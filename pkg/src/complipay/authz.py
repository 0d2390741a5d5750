"""Payment authorizations: canonical encoding, signing, verification.

An authorization is the signed tuple (payer, payee, amount, validity window,
nonce) that lets a relayer execute a transfer on the signer's behalf. The
canonical byte encoding is length-prefixed rather than hashed per field so
test vectors stay human-auditable; the signature scheme defaults to Ed25519
but sits behind a small interface.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .errors import InvalidAuthorization, SchemaViolation
from .util import from_hex, parse_amount, to_hex

DOMAIN_TAG = b"COMPLIPAY-AUTH-V1"
NONCE_LENGTH = 32
MAX_AMOUNT = 2**128 - 1  # amount travels as a 16-byte big-endian field
MAX_TIMESTAMP = 2**64 - 1


@dataclass(frozen=True)
class PaymentAuthorization:
    payer: str
    payee: str
    amount: int
    valid_after: int
    valid_before: int
    nonce: bytes

    def validate(self) -> None:
        """Raise InvalidAuthorization unless all field invariants hold."""
        if not self.payer or not isinstance(self.payer, str):
            raise InvalidAuthorization("payer id must be a non-empty string")
        if not self.payee or not isinstance(self.payee, str):
            raise InvalidAuthorization("payee id must be a non-empty string")
        if not isinstance(self.amount, int) or isinstance(self.amount, bool):
            raise InvalidAuthorization("amount must be an integer")
        if self.amount <= 0:
            raise InvalidAuthorization("amount must be positive")
        if self.amount > MAX_AMOUNT:
            raise InvalidAuthorization("amount exceeds 16-byte range")
        for name, value in (("valid_after", self.valid_after), ("valid_before", self.valid_before)):
            if not isinstance(value, int) or isinstance(value, bool) or value < 0 or value > MAX_TIMESTAMP:
                raise InvalidAuthorization(f"{name} must be an unsigned 64-bit integer")
        if self.valid_after >= self.valid_before:
            raise InvalidAuthorization("valid_after must precede valid_before")
        if not isinstance(self.nonce, bytes) or len(self.nonce) != NONCE_LENGTH:
            raise InvalidAuthorization(f"nonce must be exactly {NONCE_LENGTH} bytes")

    def to_json(self) -> dict:
        return {
            "payer": self.payer,
            "payee": self.payee,
            "amount": str(self.amount),
            "valid_after": self.valid_after,
            "valid_before": self.valid_before,
            "nonce": to_hex(self.nonce),
        }

    @classmethod
    def from_json(cls, data) -> "PaymentAuthorization":
        """Parse the wire form. Shape errors raise SchemaViolation; a
        well-formed but invariant-breaking tuple raises InvalidAuthorization."""
        if not isinstance(data, dict):
            raise SchemaViolation("authorization must be a JSON object")
        expected = {"payer", "payee", "amount", "valid_after", "valid_before", "nonce"}
        missing = expected - set(data)
        if missing:
            raise SchemaViolation(f"authorization missing fields: {sorted(missing)}")
        payer = data["payer"]
        payee = data["payee"]
        if not isinstance(payer, str) or not isinstance(payee, str):
            raise SchemaViolation("payer and payee must be strings")
        amount = parse_amount(data["amount"])
        for name in ("valid_after", "valid_before"):
            v = data[name]
            if isinstance(v, bool) or not isinstance(v, int):
                raise SchemaViolation(f"{name} must be a decimal integer")
        nonce = from_hex(data["nonce"], NONCE_LENGTH)
        auth = cls(
            payer=payer,
            payee=payee,
            amount=amount,
            valid_after=data["valid_after"],
            valid_before=data["valid_before"],
            nonce=nonce,
        )
        auth.validate()
        return auth


def canonical_encode(auth: PaymentAuthorization) -> bytes:
    """Deterministic byte encoding the signature is computed over.

    Layout: domain tag, length-prefixed payer and payee ids (4-byte BE
    prefixes), amount as 16-byte BE, the two window timestamps as 8-byte BE,
    then the 32-byte nonce.
    """
    auth.validate()
    payer = auth.payer.encode("utf-8")
    payee = auth.payee.encode("utf-8")
    parts = [
        DOMAIN_TAG,
        struct.pack(">I", len(payer)),
        payer,
        struct.pack(">I", len(payee)),
        payee,
        auth.amount.to_bytes(16, "big"),
        struct.pack(">Q", auth.valid_after),
        struct.pack(">Q", auth.valid_before),
        auth.nonce,
    ]
    return b"".join(parts)


@dataclass(frozen=True)
class Keypair:
    secret: bytes  # 32-byte private seed
    public: bytes  # 32-byte verification key


class Ed25519Scheme:
    """Default signature backend. Deterministic: same (key, message) pair
    always yields the same signature bytes."""

    name = "ed25519"
    signature_length = 64

    def generate(self, seed: bytes | None = None) -> Keypair:
        raw = seed if seed is not None else os.urandom(32)
        if len(raw) != 32:
            raise InvalidAuthorization("key seed must be 32 bytes")
        key = Ed25519PrivateKey.from_private_bytes(raw)
        return Keypair(secret=raw, public=key.public_key().public_bytes_raw())

    def public_key(self, secret: bytes) -> bytes:
        return Ed25519PrivateKey.from_private_bytes(secret).public_key().public_bytes_raw()

    def sign(self, secret: bytes, message: bytes) -> bytes:
        return Ed25519PrivateKey.from_private_bytes(secret).sign(message)

    def verify(self, pubkey: bytes, message: bytes, signature: bytes) -> bool:
        try:
            Ed25519PublicKey.from_public_bytes(pubkey).verify(signature, message)
            return True
        except (InvalidSignature, ValueError, TypeError):
            return False


DEFAULT_SCHEME = Ed25519Scheme()


def generate_keypair(seed: bytes | None = None, scheme=DEFAULT_SCHEME) -> Keypair:
    return scheme.generate(seed)


def sign_authorization(secret: bytes, auth: PaymentAuthorization, scheme=DEFAULT_SCHEME) -> bytes:
    return scheme.sign(secret, canonical_encode(auth))


def verify_authorization(auth: PaymentAuthorization, signature, pubkey, scheme=DEFAULT_SCHEME) -> bool:
    """Total over arbitrary inputs: any malformed auth, signature, or key
    yields False, never an exception."""
    try:
        message = canonical_encode(auth)
    except Exception:
        return False
    if not isinstance(signature, (bytes, bytearray)) or not isinstance(pubkey, (bytes, bytearray)):
        return False
    return scheme.verify(bytes(pubkey), message, bytes(signature))


def signature_from_json(value) -> bytes:
    return from_hex(value, Ed25519Scheme.signature_length)
