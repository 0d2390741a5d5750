"""Programmable compliance: modular checks, the evaluate-then-settle policy
wrapper, transaction-linked attestations, and the source-of-funds evidence
registry.

The policy manager is the ordered check registry driven by `evaluate`; the
policy wrapper is `execute_with_policy`, the single entry point through
which value may move. Every evaluation round appends an attestation to a
hash-chained, append-only store so outcomes stay inspectable after the fact.
"""

from __future__ import annotations

import dataclasses
import enum
import json
from dataclasses import dataclass, field

from . import authz, ledger as ledger_mod
from .errors import (
    DuplicateEvaluation,
    LockNotActive,
    NotAuthorizedReleaser,
    SchemaViolation,
    UnknownAccount,
    UnknownPolicy,
)
from .util import canonical_json, digest_json, sha256_hex

SOF_EVIDENCE_KIND = "source-of-funds"
GENESIS_HASH = "0" * 64


class Verdict(str, enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    PENDING = "PENDING"

    @property
    def rank(self) -> int:
        # severity order: PASS < PENDING < FAIL
        return {"PASS": 0, "PENDING": 1, "FAIL": 2}[self.value]


class Outcome(str, enum.Enum):
    SETTLED = "SETTLED"
    BLOCKED_PENDING = "BLOCKED_PENDING"
    REJECTED_FAIL = "REJECTED_FAIL"


@dataclass(frozen=True)
class PolicyVerdict:
    policy_id: str
    value: Verdict
    reason: str
    required_evidence: str | None = None

    def __post_init__(self):
        pending = self.value is Verdict.PENDING
        if pending != (self.required_evidence is not None):
            raise ValueError("required_evidence present exactly when verdict is PENDING")

    def to_json(self) -> dict:
        out = {"policy_id": self.policy_id, "value": self.value.value, "reason": self.reason}
        if self.required_evidence is not None:
            out["required_evidence"] = self.required_evidence
        return out


@dataclass(frozen=True)
class AggregateVerdict:
    overall: Verdict
    parts: tuple[PolicyVerdict, ...]

    @classmethod
    def combine(cls, parts) -> "AggregateVerdict":
        """FAIL dominates PENDING dominates PASS."""
        parts = tuple(parts)
        values = [p.value for p in parts]
        if any(v is Verdict.FAIL for v in values):
            overall = Verdict.FAIL
        elif any(v is Verdict.PENDING for v in values):
            overall = Verdict.PENDING
        else:
            overall = Verdict.PASS
        return cls(overall=overall, parts=parts)

    def to_json(self) -> dict:
        return {"overall": self.overall.value, "parts": [p.to_json() for p in self.parts]}


@dataclass(frozen=True)
class Instruction:
    """The payment instruction a policy evaluation is about."""

    tx_id: str
    payer: str
    payee: str
    amount: int

    def to_json(self) -> dict:
        return {"tx_id": self.tx_id, "payer": self.payer, "payee": self.payee, "amount": str(self.amount)}

    def digest(self) -> str:
        return digest_json(self.to_json())


@dataclass(frozen=True)
class SanctionsList:
    version: str
    entries: frozenset[str]

    @classmethod
    def from_json(cls, data) -> "SanctionsList":
        if not isinstance(data, dict) or "version" not in data or "entries" not in data:
            raise SchemaViolation('sanctions list must be {"version": ..., "entries": [...]}')
        version = data["version"]
        entries = data["entries"]
        if not isinstance(version, str) or not isinstance(entries, list):
            raise SchemaViolation("sanctions list fields have wrong types")
        if not all(isinstance(e, str) for e in entries):
            raise SchemaViolation("sanctions entries must be account id strings")
        return cls(version=version, entries=frozenset(entries))

    @classmethod
    def load(cls, path) -> "SanctionsList":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class SofEvidence:
    evidence_id: str
    subject: str
    declared_source: str
    covering_amount: int
    submitted_at: int

    def to_json(self) -> dict:
        return {
            "evidence_id": self.evidence_id,
            "subject": self.subject,
            "declared_source": self.declared_source,
            "covering_amount": str(self.covering_amount),
            "submitted_at": self.submitted_at,
        }


@dataclass(frozen=True)
class PolicyConfig:
    sof_threshold: int = 10_000
    enabled_policies: tuple[str, ...] = ("sanctions", SOF_EVIDENCE_KIND)

    def __post_init__(self):
        if self.sof_threshold <= 0:
            raise SchemaViolation("sof_threshold must be positive")


def sanctions_check(payer: str, payee: str, sanctions: SanctionsList) -> PolicyVerdict:
    """FAIL when either party is listed; never PENDING."""
    listed = [p for p in (payer, payee) if p in sanctions.entries]
    if listed:
        return PolicyVerdict(
            policy_id="sanctions",
            value=Verdict.FAIL,
            reason=f"listed on sanctions list {sanctions.version}: {', '.join(listed)}",
        )
    return PolicyVerdict(
        policy_id="sanctions",
        value=Verdict.PASS,
        reason=f"no party listed on sanctions list {sanctions.version}",
    )


def source_of_funds_check(
    payer: str, amount: int, config: PolicyConfig, evidence: "EvidenceStore"
) -> PolicyVerdict:
    """Amounts at or below the threshold pass outright; above it, recorded
    evidence covering the full amount is required, else PENDING."""
    if amount <= config.sof_threshold:
        return PolicyVerdict(
            policy_id=SOF_EVIDENCE_KIND,
            value=Verdict.PASS,
            reason=f"amount {amount} within threshold {config.sof_threshold}",
        )
    covering = evidence.covering(payer, amount)
    if covering is not None:
        return PolicyVerdict(
            policy_id=SOF_EVIDENCE_KIND,
            value=Verdict.PASS,
            reason=f"evidence {covering.evidence_id} covers amount {amount}",
        )
    return PolicyVerdict(
        policy_id=SOF_EVIDENCE_KIND,
        value=Verdict.PENDING,
        reason=f"amount {amount} exceeds threshold {config.sof_threshold}; evidence required",
        required_evidence=SOF_EVIDENCE_KIND,
    )


@dataclass(frozen=True)
class ComplianceAttestation:
    tx_id: str
    round: int
    instruction_digest: str
    aggregate: AggregateVerdict
    recorded_at: int
    payer: str
    payee: str
    prev_hash: str
    hash: str = field(default="", compare=False)

    def content(self) -> dict:
        return {
            "tx_id": self.tx_id,
            "round": self.round,
            "instruction_digest": self.instruction_digest,
            "aggregate": self.aggregate.to_json(),
            "recorded_at": self.recorded_at,
            "payer": self.payer,
            "payee": self.payee,
            "prev_hash": self.prev_hash,
        }

    def compute_hash(self) -> str:
        return sha256_hex(canonical_json(self.content()).encode("utf-8"))

    def to_json(self) -> dict:
        out = self.content()
        out["hash"] = self.hash
        return out


class AttestationStore:
    """Append-only, hash-chained attestation records."""

    def __init__(self):
        self._records: list[ComplianceAttestation] = []
        self._by_tx: dict[str, list[ComplianceAttestation]] = {}

    def append(self, tx_id: str, instruction: Instruction, aggregate: AggregateVerdict,
               recorded_at: int) -> ComplianceAttestation:
        rounds = self._by_tx.get(tx_id, [])
        round_no = len(rounds)
        if any(r.round == round_no for r in rounds):
            raise DuplicateEvaluation(f"attestation for ({tx_id!r}, round {round_no}) exists")
        prev_hash = self._records[-1].hash if self._records else GENESIS_HASH
        record = ComplianceAttestation(
            tx_id=tx_id, round=round_no, instruction_digest=instruction.digest(),
            aggregate=aggregate, recorded_at=recorded_at,
            payer=instruction.payer, payee=instruction.payee, prev_hash=prev_hash,
        )
        record = dataclasses.replace(record, hash=record.compute_hash())
        self._records.append(record)
        self._by_tx.setdefault(tx_id, []).append(record)
        return record

    def by_tx(self, tx_id: str) -> list[ComplianceAttestation]:
        return list(self._by_tx.get(tx_id, []))

    def by_subject(self, account_id: str) -> list[ComplianceAttestation]:
        return [r for r in self._records if account_id in (r.payer, r.payee)]

    def all(self) -> list[ComplianceAttestation]:
        return list(self._records)

    def verify_chain(self) -> bool:
        prev = GENESIS_HASH
        for record in self._records:
            if record.prev_hash != prev or record.compute_hash() != record.hash:
                return False
            prev = record.hash
        return True

    def to_json(self) -> list[dict]:
        return [r.to_json() for r in self._records]


class EvidenceStore:
    """Append-only store of source-of-funds evidence, indexed by subject."""

    def __init__(self):
        self._records: list[SofEvidence] = []
        self._counter = 0

    def append(self, subject: str, declared_source: str, covering_amount: int,
               submitted_at: int) -> SofEvidence:
        self._counter += 1
        record = SofEvidence(
            evidence_id=f"ev-{self._counter:06d}", subject=subject,
            declared_source=declared_source, covering_amount=covering_amount,
            submitted_at=submitted_at,
        )
        self._records.append(record)
        return record

    def for_subject(self, subject: str) -> list[SofEvidence]:
        return [r for r in self._records if r.subject == subject]

    def covering(self, subject: str, amount: int) -> SofEvidence | None:
        for record in self._records:
            if record.subject == subject and record.covering_amount >= amount:
                return record
        return None

    def all(self) -> list[SofEvidence]:
        return list(self._records)

    def to_json(self) -> list[dict]:
        return [r.to_json() for r in self._records]


@dataclass
class PolicyOutcome:
    outcome: Outcome
    attestation: ComplianceAttestation
    receipt: ledger_mod.SettlementReceipt | None = None


class ComplianceEngine:
    """Policy manager plus policy wrapper over a ledger.

    All mutations here happen in the ledger's total order; callers needing
    concurrency must serialize (the gateway holds the lock).
    """

    def __init__(self, ledger: ledger_mod.Ledger, config: PolicyConfig, sanctions: SanctionsList):
        self.ledger = ledger
        self.config = config
        self.sanctions = sanctions
        self.attestations = AttestationStore()
        self.evidence = EvidenceStore()
        self._original: dict[str, Instruction] = {}
        self._checks = {
            "sanctions": lambda instr: sanctions_check(instr.payer, instr.payee, self.sanctions),
            SOF_EVIDENCE_KIND: lambda instr: source_of_funds_check(
                instr.payer, instr.amount, self.config, self.evidence
            ),
        }
        for policy_id in config.enabled_policies:
            if policy_id not in self._checks:
                raise UnknownPolicy(f"no registered check {policy_id!r}")

    def register_check(self, policy_id: str, check) -> None:
        """Extension point: check is instruction -> PolicyVerdict."""
        self._checks[policy_id] = check

    # --- evaluation ---

    def evaluate_only(self, instruction: Instruction) -> AggregateVerdict:
        """Run all enabled checks in configured order without recording."""
        parts = [self._checks[pid](instruction) for pid in self.config.enabled_policies]
        return AggregateVerdict.combine(parts)

    def evaluate(self, instruction: Instruction) -> ComplianceAttestation:
        """Evaluate and record an attestation regardless of outcome."""
        verdict = self.evaluate_only(instruction)
        self._original.setdefault(instruction.tx_id, instruction)
        return self.attestations.append(
            instruction.tx_id, instruction, verdict, recorded_at=self.ledger.draw_seq()
        )

    def original_instruction(self, tx_id: str) -> Instruction | None:
        return self._original.get(tx_id)

    # --- the policy wrapper ---

    def execute_with_policy(
        self, tx_id: str, auth: authz.PaymentAuthorization, signature: bytes, now: int
    ) -> PolicyOutcome:
        """Single public settlement path: authorization checks come first
        (a cryptographically invalid submission records no attestation),
        then policy evaluation; funds move only on an aggregate PASS."""
        self.ledger.validate_transfer(auth, signature, now)
        instruction = Instruction(tx_id=tx_id, payer=auth.payer, payee=auth.payee, amount=auth.amount)
        verdict = self.evaluate_only(instruction)
        self._original.setdefault(tx_id, instruction)
        if verdict.overall is Verdict.PASS:
            receipt = self.ledger.transfer_with_authorization(auth, signature, now, tx_id=tx_id)
            attestation = self.attestations.append(
                tx_id, instruction, verdict, recorded_at=receipt.ledger_seq
            )
            return PolicyOutcome(Outcome.SETTLED, attestation, receipt)
        attestation = self.attestations.append(
            tx_id, instruction, verdict, recorded_at=self.ledger.draw_seq()
        )
        if verdict.overall is Verdict.FAIL:
            return PolicyOutcome(Outcome.REJECTED_FAIL, attestation)
        return PolicyOutcome(Outcome.BLOCKED_PENDING, attestation)

    # --- escrow mediation paths ---

    def lock_pending_tranche(
        self,
        tx_id: str,
        auth: authz.PaymentAuthorization,
        signature: bytes,
        now: int,
        releaser: str,
        condition_id: str = SOF_EVIDENCE_KIND,
    ) -> ledger_mod.EscrowLock:
        """Custody the escrowed tranche under a signed authorization: verify
        it like a transfer, consume its nonce, then lock the funds."""
        self.ledger.validate_transfer(auth, signature, now)
        self.ledger.consume_nonce(auth.payer, auth.nonce)
        return self.ledger.escrow_lock(
            tx_id=tx_id, payer=auth.payer, payee=auth.payee, amount=auth.amount,
            condition_id=condition_id, releaser=releaser,
        )

    def try_release(self, lock_id: str, caller: str):
        """Release iff a fresh evaluation of the original instruction passes
        every enabled policy. Returns (receipt, attestation) or None when the
        condition is still unmet. Authorization and state errors raise."""
        lock = self.ledger.lock(lock_id)
        if caller != lock.releaser:
            raise NotAuthorizedReleaser(f"{caller!r} is not the authorized releaser")
        if lock.state is not ledger_mod.LockState.LOCKED:
            raise LockNotActive(f"lock {lock_id!r} is {lock.state.value}")
        instruction = self._original.get(lock.tx_id) or Instruction(
            tx_id=lock.tx_id, payer=lock.payer, payee=lock.payee, amount=lock.amount
        )
        verdict = self.evaluate_only(instruction)
        if verdict.overall is not Verdict.PASS:
            return None
        receipt = self.ledger.escrow_release(lock_id, caller)
        attestation = self.attestations.append(
            lock.tx_id, instruction, verdict, recorded_at=receipt.ledger_seq
        )
        return receipt, attestation

    # --- evidence ---

    def submit_sof_evidence(self, subject: str, declared_source: str,
                            covering_amount: int, now: int) -> SofEvidence:
        if not self.ledger.has_account(subject):
            raise UnknownAccount(f"no account {subject!r}")
        return self.evidence.append(subject, declared_source, covering_amount, submitted_at=now)

    # --- reads ---

    def get_attestations(self, tx_id: str) -> list[ComplianceAttestation]:
        return self.attestations.by_tx(tx_id)

    def list_attestations(self, subject: str) -> list[ComplianceAttestation]:
        return self.attestations.by_subject(subject)

    def snapshot(self) -> dict:
        return {
            "attestations": self.attestations.to_json(),
            "evidence": self.evidence.to_json(),
            "policy": {
                "sof_threshold": str(self.config.sof_threshold),
                "enabled_policies": list(self.config.enabled_policies),
                "sanctions_version": self.sanctions.version,
                "sanctions_entries": sorted(self.sanctions.entries),
            },
        }
