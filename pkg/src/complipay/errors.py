"""Error hierarchy with stable machine-readable codes.

Every failure that can cross a module or wire boundary is a ComplipayError
subclass carrying a ``code`` drawn from a fixed enum-like set. The gateway
maps codes to HTTP statuses; the CLI maps them to exit codes.
"""

from __future__ import annotations


class ComplipayError(Exception):
    """Base class; ``code`` is the stable machine-readable identifier."""

    code = "INTERNAL_ERROR"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code

    def to_json(self) -> dict:
        return {"code": self.code, "message": self.message}


# --- ledger ---

class DuplicateAccount(ComplipayError):
    code = "DUPLICATE_ACCOUNT"


class UnknownAccount(ComplipayError):
    code = "UNKNOWN_ACCOUNT"


class InsufficientFunds(ComplipayError):
    code = "INSUFFICIENT_FUNDS"


class ZeroAmount(ComplipayError):
    code = "ZERO_AMOUNT"


class AmountOverflow(ComplipayError):
    code = "AMOUNT_OVERFLOW"


class NonceAlreadyUsed(ComplipayError):
    code = "NONCE_ALREADY_USED"


class UnknownLock(ComplipayError):
    code = "UNKNOWN_LOCK"


class NotAuthorizedReleaser(ComplipayError):
    code = "NOT_AUTHORIZED_RELEASER"


class LockNotActive(ComplipayError):
    code = "LOCK_NOT_ACTIVE"


# --- authz ---

class InvalidAuthorization(ComplipayError):
    code = "INVALID_AUTHORIZATION"


class BadSignature(ComplipayError):
    code = "BAD_SIGNATURE"


class AuthorizationExpired(ComplipayError):
    code = "AUTHORIZATION_EXPIRED"


class AuthorizationNotYetValid(ComplipayError):
    code = "AUTHORIZATION_NOT_YET_VALID"


# --- compliance ---

class DuplicateEvaluation(ComplipayError):
    code = "DUPLICATE_EVALUATION"


class UnknownPolicy(ComplipayError):
    code = "UNKNOWN_POLICY"


# --- gateway protocol ---

class UnknownItem(ComplipayError):
    code = "UNKNOWN_ITEM"


class UnknownChallenge(ComplipayError):
    code = "UNKNOWN_CHALLENGE"


class ChallengeMismatch(ComplipayError):
    code = "CHALLENGE_MISMATCH"


class ChallengeExpired(ComplipayError):
    code = "CHALLENGE_EXPIRED"


class ChallengeClosed(ComplipayError):
    code = "CHALLENGE_CLOSED"


class UnknownProposal(ComplipayError):
    code = "UNKNOWN_PROPOSAL"


class ProposalMismatch(ComplipayError):
    code = "PROPOSAL_MISMATCH"


class ProposalClosed(ComplipayError):
    code = "PROPOSAL_CLOSED"


class SchemaViolation(ComplipayError):
    code = "SCHEMA_VIOLATION"


# --- agents / cli ---

class BudgetExceeded(ComplipayError):
    code = "BUDGET_EXCEEDED"


class NonQuiescent(ComplipayError):
    code = "NON_QUIESCENT"


class ConfigError(ComplipayError):
    code = "CONFIG_ERROR"
