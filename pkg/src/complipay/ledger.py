"""Simulated token ledger: the stand-in for the on-chain settlement layer.

One fixed-supply asset in integer minor units. Supply is minted only at
account creation. All mutations are validate-then-apply so a failed call
leaves every observable (balances, pool, nonces, locks, sequence) exactly
as it was. The ledger is a single serialized state machine; callers that
need concurrency serialize through `gateway`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from . import authz
from .errors import (
    AmountOverflow,
    AuthorizationExpired,
    AuthorizationNotYetValid,
    BadSignature,
    DuplicateAccount,
    InsufficientFunds,
    LockNotActive,
    NonceAlreadyUsed,
    NotAuthorizedReleaser,
    UnknownAccount,
    UnknownLock,
    ZeroAmount,
)
from .util import to_hex

MAX_BALANCE = authz.MAX_AMOUNT


@dataclass
class Account:
    id: str
    pubkey: bytes
    balance: int


class LockState(str, enum.Enum):
    LOCKED = "LOCKED"
    RELEASED = "RELEASED"
    REFUNDED = "REFUNDED"


class ReceiptKind(str, enum.Enum):
    DIRECT = "DIRECT"
    ESCROW_LOCK = "ESCROW_LOCK"
    ESCROW_RELEASE = "ESCROW_RELEASE"
    ESCROW_REFUND = "ESCROW_REFUND"


@dataclass
class EscrowLock:
    lock_id: str
    tx_id: str
    payer: str
    payee: str
    amount: int
    condition_id: str
    releaser: str
    state: LockState = LockState.LOCKED

    def to_json(self) -> dict:
        return {
            "lock_id": self.lock_id,
            "tx_id": self.tx_id,
            "payer": self.payer,
            "payee": self.payee,
            "amount": str(self.amount),
            "condition_id": self.condition_id,
            "releaser": self.releaser,
            "state": self.state.value,
        }


@dataclass(frozen=True)
class SettlementReceipt:
    tx_id: str
    kind: ReceiptKind
    payer: str
    payee: str
    amount: int
    ledger_seq: int

    def to_json(self) -> dict:
        return {
            "tx_id": self.tx_id,
            "kind": self.kind.value,
            "payer": self.payer,
            "payee": self.payee,
            "amount": str(self.amount),
            "ledger_seq": self.ledger_seq,
        }


class Ledger:
    def __init__(self):
        self._accounts: dict[str, Account] = {}
        self._nonces: set[tuple[str, bytes]] = set()
        self._locks: dict[str, EscrowLock] = {}
        self._receipts: list[SettlementReceipt] = []
        self._escrow_pool = 0
        self._total_supply = 0
        self._seq = 0
        self._lock_counter = 0

    # --- accounts and reads ---

    def create_account(self, account_id: str, pubkey: bytes, initial_balance: int = 0) -> str:
        if not account_id:
            raise UnknownAccount("account id must be non-empty")
        if account_id in self._accounts:
            raise DuplicateAccount(f"account {account_id!r} already exists")
        if initial_balance < 0:
            raise ZeroAmount("initial balance cannot be negative")
        if self._total_supply + initial_balance > MAX_BALANCE:
            raise AmountOverflow("total supply would exceed the amount ceiling")
        self._accounts[account_id] = Account(account_id, bytes(pubkey), initial_balance)
        self._total_supply += initial_balance
        return account_id

    def account(self, account_id: str) -> Account:
        try:
            return self._accounts[account_id]
        except KeyError:
            raise UnknownAccount(f"no account {account_id!r}") from None

    def has_account(self, account_id: str) -> bool:
        return account_id in self._accounts

    def account_ids(self) -> list[str]:
        return list(self._accounts)

    def balance_of(self, account_id: str) -> int:
        return self.account(account_id).balance

    def total_supply(self) -> int:
        return self._total_supply

    def escrow_pool(self) -> int:
        return self._escrow_pool

    def nonce_used(self, payer: str, nonce: bytes) -> bool:
        return (payer, bytes(nonce)) in self._nonces

    @property
    def receipts(self) -> tuple[SettlementReceipt, ...]:
        return tuple(self._receipts)

    @property
    def seq(self) -> int:
        return self._seq

    def lock(self, lock_id: str) -> EscrowLock:
        try:
            return self._locks[lock_id]
        except KeyError:
            raise UnknownLock(f"no escrow lock {lock_id!r}") from None

    def locks(self) -> tuple[EscrowLock, ...]:
        return tuple(self._locks.values())

    def draw_seq(self) -> int:
        """Advance the global mutation sequence. Used by the compliance
        store so standalone attestations share the same total order."""
        self._seq += 1
        return self._seq

    # --- relayed transfer ---

    def validate_transfer(self, auth: authz.PaymentAuthorization, signature: bytes, now: int) -> None:
        """All transfer preconditions, read-only. Error precedence:
        invariants, signature, window, nonce, accounts, funds."""
        auth.validate()
        payer = self._accounts.get(auth.payer)
        pubkey = payer.pubkey if payer is not None else b""
        if payer is None or not authz.verify_authorization(auth, signature, pubkey):
            raise BadSignature("authorization signature does not verify against payer key")
        if now <= auth.valid_after:
            raise AuthorizationNotYetValid(f"not valid until after {auth.valid_after}")
        if now >= auth.valid_before:
            raise AuthorizationExpired(f"expired at {auth.valid_before}")
        if self.nonce_used(auth.payer, auth.nonce):
            raise NonceAlreadyUsed(f"nonce already consumed for payer {auth.payer!r}")
        payee = self._accounts.get(auth.payee)
        if payee is None:
            raise UnknownAccount(f"no account {auth.payee!r}")
        if payer.balance < auth.amount:
            raise InsufficientFunds(f"balance {payer.balance} < amount {auth.amount}")
        if payee.balance + auth.amount > MAX_BALANCE:
            raise AmountOverflow("payee balance would exceed the amount ceiling")

    def transfer_with_authorization(
        self, auth: authz.PaymentAuthorization, signature: bytes, now: int, tx_id: str = ""
    ) -> SettlementReceipt:
        """Relayed transfer: anyone may submit, only the payer's signature
        authorizes. Consumes the nonce on success only. ``tx_id`` stamps the
        receipt with the originating instruction id when the caller has one."""
        self.validate_transfer(auth, signature, now)
        payer = self._accounts[auth.payer]
        payee = self._accounts[auth.payee]
        payer.balance -= auth.amount
        payee.balance += auth.amount
        self._nonces.add((auth.payer, bytes(auth.nonce)))
        receipt = SettlementReceipt(
            tx_id=tx_id, kind=ReceiptKind.DIRECT, payer=auth.payer, payee=auth.payee,
            amount=auth.amount, ledger_seq=self.draw_seq(),
        )
        self._receipts.append(receipt)
        return receipt

    def consume_nonce(self, payer: str, nonce: bytes) -> None:
        if self.nonce_used(payer, nonce):
            raise NonceAlreadyUsed(f"nonce already consumed for payer {payer!r}")
        self._nonces.add((payer, bytes(nonce)))

    # --- escrow sub-ledger ---

    def escrow_lock(
        self, tx_id: str, payer: str, payee: str, amount: int, condition_id: str, releaser: str
    ) -> EscrowLock:
        """Debit the payer now and hold the funds in the escrow pool; the
        lock can only end RELEASED (to payee) or REFUNDED (to payer)."""
        if amount == 0:
            raise ZeroAmount("escrow amount must be positive")
        if amount < 0:
            raise ZeroAmount("escrow amount cannot be negative")
        payer_acct = self.account(payer)
        self.account(payee)
        self.account(releaser)
        if payer_acct.balance < amount:
            raise InsufficientFunds(f"balance {payer_acct.balance} < amount {amount}")
        payer_acct.balance -= amount
        self._escrow_pool += amount
        self._lock_counter += 1
        lock = EscrowLock(
            lock_id=f"lock-{self._lock_counter:06d}",
            tx_id=tx_id, payer=payer, payee=payee, amount=amount,
            condition_id=condition_id, releaser=releaser,
        )
        self._locks[lock.lock_id] = lock
        self._receipts.append(SettlementReceipt(
            tx_id=tx_id, kind=ReceiptKind.ESCROW_LOCK, payer=payer, payee=payee,
            amount=amount, ledger_seq=self.draw_seq(),
        ))
        return lock

    def _closable_lock(self, lock_id: str, caller: str) -> EscrowLock:
        lock = self.lock(lock_id)
        if caller != lock.releaser:
            raise NotAuthorizedReleaser(f"{caller!r} is not the authorized releaser")
        if lock.state is not LockState.LOCKED:
            raise LockNotActive(f"lock {lock_id!r} is {lock.state.value}")
        return lock

    def escrow_release(self, lock_id: str, caller: str) -> SettlementReceipt:
        lock = self._closable_lock(lock_id, caller)
        payee = self.account(lock.payee)
        if payee.balance + lock.amount > MAX_BALANCE:
            raise AmountOverflow("payee balance would exceed the amount ceiling")
        payee.balance += lock.amount
        self._escrow_pool -= lock.amount
        lock.state = LockState.RELEASED
        receipt = SettlementReceipt(
            tx_id=lock.tx_id, kind=ReceiptKind.ESCROW_RELEASE, payer=lock.payer,
            payee=lock.payee, amount=lock.amount, ledger_seq=self.draw_seq(),
        )
        self._receipts.append(receipt)
        return receipt

    def escrow_refund(self, lock_id: str, caller: str) -> SettlementReceipt:
        lock = self._closable_lock(lock_id, caller)
        payer = self.account(lock.payer)
        if payer.balance + lock.amount > MAX_BALANCE:
            raise AmountOverflow("payer balance would exceed the amount ceiling")
        payer.balance += lock.amount
        self._escrow_pool -= lock.amount
        lock.state = LockState.REFUNDED
        receipt = SettlementReceipt(
            tx_id=lock.tx_id, kind=ReceiptKind.ESCROW_REFUND, payer=lock.payer,
            payee=lock.payee, amount=lock.amount, ledger_seq=self.draw_seq(),
        )
        self._receipts.append(receipt)
        return receipt

    # --- snapshots ---

    def snapshot(self) -> dict:
        """Canonical-JSON-ready view of the full ledger state."""
        return {
            "accounts": {
                a.id: {"balance": str(a.balance), "pubkey": to_hex(a.pubkey)}
                for a in self._accounts.values()
            },
            "escrow_pool": str(self._escrow_pool),
            "total_supply": str(self._total_supply),
            "nonces": sorted(f"{payer}:{to_hex(nonce)}" for payer, nonce in self._nonces),
            "locks": {lock_id: lock.to_json() for lock_id, lock in self._locks.items()},
            "receipts": [r.to_json() for r in self._receipts],
            "seq": self._seq,
        }
