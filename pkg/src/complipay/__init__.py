"""Compliance-gated payment settlement for agentic commerce.

Signed single-use payment authorizations settle instantly when every policy
check passes; payments that block pending evidence are split into tranches,
with the held tranche custodied in escrow until a fresh evaluation clears
it. Every evaluation leaves a hash-chained attestation tied to the
transaction id.
"""

from .authz import (
    DOMAIN_TAG,
    Ed25519Scheme,
    Keypair,
    NONCE_LENGTH,
    PaymentAuthorization,
    canonical_encode,
    generate_keypair,
    sign_authorization,
    verify_authorization,
)
from .compliance import (
    AggregateVerdict,
    AttestationStore,
    ComplianceAttestation,
    ComplianceEngine,
    EvidenceStore,
    Instruction,
    Outcome,
    PolicyConfig,
    PolicyVerdict,
    SanctionsList,
    SofEvidence,
    Verdict,
    sanctions_check,
    source_of_funds_check,
)
from .errors import ComplipayError
from .gateway import GatewayService, create_app
from .ledger import EscrowLock, Ledger, LockState, ReceiptKind, SettlementReceipt
from .agents import (
    BuyerAgent,
    ComplianceAgent,
    PurchaseIntent,
    SellerAgent,
    World,
    build_world,
    check_expectations,
    run_orchestration,
    run_scenario,
)

__version__ = "1.0.0"

__all__ = [
    "AggregateVerdict",
    "AttestationStore",
    "BuyerAgent",
    "ComplianceAgent",
    "ComplianceAttestation",
    "ComplianceEngine",
    "ComplipayError",
    "DOMAIN_TAG",
    "Ed25519Scheme",
    "EscrowLock",
    "EvidenceStore",
    "GatewayService",
    "Instruction",
    "Keypair",
    "Ledger",
    "LockState",
    "NONCE_LENGTH",
    "Outcome",
    "PaymentAuthorization",
    "PolicyConfig",
    "PolicyVerdict",
    "PurchaseIntent",
    "ReceiptKind",
    "SanctionsList",
    "SellerAgent",
    "SettlementReceipt",
    "SofEvidence",
    "Verdict",
    "World",
    "build_world",
    "canonical_encode",
    "check_expectations",
    "create_app",
    "generate_keypair",
    "run_orchestration",
    "run_scenario",
    "sign_authorization",
    "source_of_funds_check",
    "sanctions_check",
    "verify_authorization",
]
