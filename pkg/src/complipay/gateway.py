"""Payment gateway: the HTTP-facing service that sells catalog items behind
a 402 challenge, routes signed authorizations through the policy wrapper,
proposes tranche splits when a payment blocks PENDING, custodies the held
tranche in escrow, and releases it once evidence satisfies a fresh
evaluation.

`GatewayService` is the in-process state machine; `create_app` wraps it in
FastAPI. Every mutating call runs under one re-entrant lock, so observable
state moves through a single total order. Agent code drives the service
object directly; remote clients get identical behavior over HTTP.
"""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass, field

from . import authz
from .compliance import (
    ComplianceAttestation,
    ComplianceEngine,
    Outcome,
    SOF_EVIDENCE_KIND,
)
from .errors import (
    ChallengeClosed,
    ChallengeExpired,
    ChallengeMismatch,
    ComplipayError,
    ProposalClosed,
    ProposalMismatch,
    SchemaViolation,
    UnknownChallenge,
    UnknownItem,
    UnknownProposal,
)
from .util import digest_json, parse_amount, to_hex

CHALLENGE_TTL = 300  # seconds a payment challenge stays payable
PAYMENT_SCHEME = "ed25519-authorization-v1"

# outcome strings on the pay wire
OUTCOME_SETTLED = "SETTLED"
OUTCOME_PENDING = "PENDING"
OUTCOME_FAILED = "FAILED"


class CaseState(str, enum.Enum):
    OPEN = "OPEN"
    TRANCHING = "TRANCHING"      # proposal accepted, first tranche unpaid
    TRANCHE1_PAID = "TRANCHE1_PAID"
    LOCKED = "LOCKED"            # second tranche held in escrow
    SETTLED = "SETTLED"
    FAILED = "FAILED"


@dataclass
class Challenge:
    tx_id: str
    item_id: str
    amount: int
    payee: str
    issued_at: int
    expires_at: int

    def requirements(self) -> dict:
        return {
            "scheme": PAYMENT_SCHEME,
            "tx_id": self.tx_id,
            "item_id": self.item_id,
            "amount": str(self.amount),
            "payee": self.payee,
            "pay_to": "/pay",
            "issued_at": self.issued_at,
            "expires_at": self.expires_at,
        }


@dataclass
class TrancheProposal:
    proposal_id: str
    tx_id: str
    tranche1_amount: int
    tranche2_amount: int
    condition_id: str
    releaser: str
    accepted: bool = False

    def to_json(self) -> dict:
        return {
            "proposal_id": self.proposal_id,
            "tx_id": self.tx_id,
            "tranches": [
                {"tranche": 1, "kind": "direct", "amount": str(self.tranche1_amount)},
                {
                    "tranche": 2,
                    "kind": "escrow",
                    "amount": str(self.tranche2_amount),
                    "condition_id": self.condition_id,
                    "releaser": self.releaser,
                },
            ],
            "accepted": self.accepted,
        }


@dataclass
class PaymentCase:
    """Everything the gateway tracks about one challenge's lifecycle."""

    challenge: Challenge
    state: CaseState = CaseState.OPEN
    proposal: TrancheProposal | None = None
    lock_id: str | None = None
    receipts: list = field(default_factory=list)


class EventLog:
    """Ordered transcript of service-level events. Payload digests let
    downstream consumers spot any later rewriting."""

    def __init__(self, clock):
        self._clock = clock
        self._events: list[dict] = []

    def append(self, kind: str, payload: dict) -> dict:
        event = {
            "seq": len(self._events) + 1,
            "at": self._clock.now(),
            "kind": kind,
            "payload": payload,
            "digest": digest_json(payload),
        }
        self._events.append(event)
        return event

    def all(self) -> list[dict]:
        return list(self._events)


class GatewayService:
    """Single-writer payment gateway over a compliance engine.

    The gateway also plays mediator for the configured releaser account:
    after any evidence submission or escrow lock it re-runs the policy
    evaluation for held tranches and releases those that now pass.
    """

    def __init__(self, engine: ComplianceEngine, clock, catalog: dict[str, int],
                 seller: str, releaser: str, challenge_ttl: int = CHALLENGE_TTL):
        self.engine = engine
        self.clock = clock
        self.catalog = dict(catalog)
        self.seller = seller
        self.releaser = releaser
        self.challenge_ttl = challenge_ttl
        self.events = EventLog(clock)
        self._mutex = threading.RLock()
        self._cases: dict[str, PaymentCase] = {}
        self._proposals: dict[str, TrancheProposal] = {}
        self._settled_responses: dict[tuple[str, str], dict] = {}
        self._tx_counter = 0
        self._proposal_counter = 0

    # --- resource / challenge ---

    def request_resource(self, item_id: str, tx_id: str | None = None) -> dict:
        """x402 entry point. Without tx_id, issue a fresh challenge. With a
        tx_id, deliver if that challenge settled in full, else repeat its
        payment requirements."""
        with self._mutex:
            if item_id not in self.catalog:
                raise UnknownItem(f"no catalog item {item_id!r}")
            if tx_id is not None:
                case = self._case(tx_id)
                if case.challenge.item_id != item_id:
                    raise ChallengeMismatch(
                        f"challenge {tx_id!r} was issued for {case.challenge.item_id!r}"
                    )
                if case.state is CaseState.SETTLED:
                    return {
                        "status": "delivered",
                        "item_id": item_id,
                        "tx_id": tx_id,
                        "content": f"contents of {item_id}",
                    }
                if case.state is CaseState.FAILED:
                    raise ChallengeClosed(f"challenge {tx_id!r} failed compliance")
                return {"status": "payment_required",
                        "requirements": case.challenge.requirements()}
            self._tx_counter += 1
            now = self.clock.now()
            challenge = Challenge(
                tx_id=f"tx-{self._tx_counter:06d}", item_id=item_id,
                amount=self.catalog[item_id], payee=self._payee_for(item_id),
                issued_at=now, expires_at=now + self.challenge_ttl,
            )
            self._cases[challenge.tx_id] = PaymentCase(challenge=challenge)
            self.events.append("challenge_issued", challenge.requirements())
            return {"status": "payment_required", "requirements": challenge.requirements()}

    def _payee_for(self, item_id: str) -> str:
        # single-merchant gateway: all items settle to the seller account
        return self.seller

    # --- payment ---

    def pay(self, tx_id: str, auth: authz.PaymentAuthorization, signature: bytes) -> dict:
        with self._mutex:
            case = self._case(tx_id)
            cached = self._settled_responses.get((tx_id, to_hex(auth.nonce)))
            if cached is not None:
                return cached
            if case.state in (CaseState.SETTLED, CaseState.FAILED, CaseState.LOCKED):
                raise ChallengeClosed(f"challenge {tx_id!r} accepts no further payment")
            now = self.clock.now()
            if now >= case.challenge.expires_at:
                raise ChallengeExpired(f"challenge {tx_id!r} expired at {case.challenge.expires_at}")
            if auth.payee != case.challenge.payee:
                raise ChallengeMismatch(
                    f"authorization pays {auth.payee!r}, challenge expects {case.challenge.payee!r}"
                )
            self.events.append("payment_submitted", {
                "tx_id": tx_id, "payer": auth.payer, "payee": auth.payee,
                "amount": str(auth.amount), "nonce": to_hex(auth.nonce),
            })
            try:
                if case.state is CaseState.OPEN:
                    return self._pay_full(case, auth, signature, now)
                return self._pay_tranche(case, auth, signature, now)
            except ComplipayError as err:
                self.events.append("payment_rejected", {"tx_id": tx_id, "code": err.code})
                raise

    def _pay_full(self, case: PaymentCase, auth: authz.PaymentAuthorization,
                  signature: bytes, now: int) -> dict:
        tx_id = case.challenge.tx_id
        if auth.amount != case.challenge.amount:
            raise ChallengeMismatch(
                f"authorization amount {auth.amount} differs from challenge amount "
                f"{case.challenge.amount}"
            )
        result = self.engine.execute_with_policy(tx_id, auth, signature, now)
        if result.outcome is Outcome.SETTLED:
            case.state = CaseState.SETTLED
            case.receipts.append(result.receipt)
            response = {
                "outcome": OUTCOME_SETTLED, "tx_id": tx_id,
                "receipt": result.receipt.to_json(),
                "attestation": result.attestation.to_json(),
            }
            self._settled_responses[(tx_id, to_hex(auth.nonce))] = response
            self.events.append("settled", {"tx_id": tx_id, "receipt": result.receipt.to_json()})
            return response
        if result.outcome is Outcome.REJECTED_FAIL:
            case.state = CaseState.FAILED
            self.events.append("payment_failed", {
                "tx_id": tx_id, "attestation_hash": result.attestation.hash,
            })
            return {
                "outcome": OUTCOME_FAILED, "tx_id": tx_id,
                "attestation": result.attestation.to_json(),
            }
        # blocked pending: propose the tranche split once, then reuse it
        response = {
            "outcome": OUTCOME_PENDING, "tx_id": tx_id,
            "attestation": result.attestation.to_json(),
            "required_evidence": self._required_evidence(result.attestation),
        }
        self.events.append("payment_pending", {
            "tx_id": tx_id, "attestation_hash": result.attestation.hash,
            "required_evidence": response["required_evidence"],
        })
        if case.proposal is None:
            case.proposal = self._issue_proposal(tx_id, auth.amount)
        response["proposal"] = case.proposal.to_json()
        return response

    def _required_evidence(self, attestation: ComplianceAttestation) -> list[str]:
        return sorted({
            p.required_evidence for p in attestation.aggregate.parts
            if p.required_evidence is not None
        })

    def _issue_proposal(self, tx_id: str, amount: int) -> TrancheProposal:
        threshold = self.engine.config.sof_threshold
        tranche1 = min(amount, threshold)
        self._proposal_counter += 1
        proposal = TrancheProposal(
            proposal_id=f"prop-{self._proposal_counter:06d}", tx_id=tx_id,
            tranche1_amount=tranche1, tranche2_amount=amount - tranche1,
            condition_id=SOF_EVIDENCE_KIND, releaser=self.releaser,
        )
        self._proposals[proposal.proposal_id] = proposal
        self.events.append("proposal_issued", proposal.to_json())
        return proposal

    def _pay_tranche(self, case: PaymentCase, auth: authz.PaymentAuthorization,
                     signature: bytes, now: int) -> dict:
        tx_id = case.challenge.tx_id
        proposal = case.proposal
        if case.state is CaseState.TRANCHING:
            if auth.amount != proposal.tranche1_amount:
                raise ProposalMismatch(
                    f"expected first tranche of {proposal.tranche1_amount}, got {auth.amount}"
                )
            result = self.engine.execute_with_policy(tx_id, auth, signature, now)
            if result.outcome is Outcome.SETTLED:
                case.state = CaseState.TRANCHE1_PAID
                case.receipts.append(result.receipt)
                response = {
                    "outcome": OUTCOME_SETTLED, "tx_id": tx_id, "tranche": 1,
                    "receipt": result.receipt.to_json(),
                    "attestation": result.attestation.to_json(),
                }
                self._settled_responses[(tx_id, to_hex(auth.nonce))] = response
                self.events.append("tranche_settled", {
                    "tx_id": tx_id, "tranche": 1, "receipt": result.receipt.to_json(),
                })
                return response
            if result.outcome is Outcome.REJECTED_FAIL:
                case.state = CaseState.FAILED
                self.events.append("payment_failed", {
                    "tx_id": tx_id, "attestation_hash": result.attestation.hash,
                })
                return {"outcome": OUTCOME_FAILED, "tx_id": tx_id,
                        "attestation": result.attestation.to_json()}
            return {
                "outcome": OUTCOME_PENDING, "tx_id": tx_id, "tranche": 1,
                "attestation": result.attestation.to_json(),
                "required_evidence": self._required_evidence(result.attestation),
            }
        # second tranche: custody under escrow, condition carried on the lock
        if auth.amount != proposal.tranche2_amount:
            raise ProposalMismatch(
                f"expected second tranche of {proposal.tranche2_amount}, got {auth.amount}"
            )
        lock = self.engine.lock_pending_tranche(
            tx_id, auth, signature, now,
            releaser=proposal.releaser, condition_id=proposal.condition_id,
        )
        case.state = CaseState.LOCKED
        case.lock_id = lock.lock_id
        governing = self.engine.get_attestations(tx_id)[0]
        response = {
            "outcome": OUTCOME_PENDING, "tx_id": tx_id, "tranche": 2,
            "lock": lock.to_json(), "attestation": governing.to_json(),
        }
        self._settled_responses[(tx_id, to_hex(auth.nonce))] = response
        self.events.append("escrow_locked", {"tx_id": tx_id, "lock": lock.to_json()})
        self._poll_releases()
        return response

    # --- proposals ---

    def accept_proposal(self, proposal_id: str) -> dict:
        with self._mutex:
            proposal = self._proposals.get(proposal_id)
            if proposal is None:
                raise UnknownProposal(f"no proposal {proposal_id!r}")
            case = self._case(proposal.tx_id)
            if case.state in (CaseState.SETTLED, CaseState.FAILED):
                raise ProposalClosed(f"proposal {proposal_id!r} is no longer actionable")
            if not proposal.accepted:
                if self.clock.now() >= case.challenge.expires_at:
                    raise ChallengeExpired(
                        f"challenge {proposal.tx_id!r} expired before acceptance"
                    )
                proposal.accepted = True
                case.state = CaseState.TRANCHING
                self.events.append("proposal_accepted", {
                    "proposal_id": proposal_id, "tx_id": proposal.tx_id,
                })
            return {"accepted": True, "proposal": proposal.to_json()}

    # --- evidence and mediation ---

    def submit_evidence(self, subject: str, declared_source: str, covering_amount: int) -> dict:
        with self._mutex:
            record = self.engine.submit_sof_evidence(
                subject, declared_source, covering_amount, now=self.clock.now()
            )
            self.events.append("evidence_submitted", record.to_json())
            released = self._poll_releases()
            return {"evidence": record.to_json(), "released": released}

    def poll_releases(self) -> list[str]:
        """Mediator sweep: release every held tranche whose original
        instruction now passes a fresh evaluation."""
        with self._mutex:
            return self._poll_releases()

    def _poll_releases(self) -> list[str]:
        released = []
        for case in self._cases.values():
            if case.state is not CaseState.LOCKED:
                continue
            lock = self.engine.ledger.lock(case.lock_id)
            if lock.releaser != self.releaser:
                continue
            result = self.engine.try_release(case.lock_id, self.releaser)
            if result is None:
                continue
            receipt, attestation = result
            case.state = CaseState.SETTLED
            case.receipts.append(receipt)
            released.append(case.lock_id)
            self.events.append("escrow_released", {
                "tx_id": case.challenge.tx_id, "lock_id": case.lock_id,
                "receipt": receipt.to_json(), "attestation_hash": attestation.hash,
            })
        return released

    # --- reads ---

    def _case(self, tx_id: str) -> PaymentCase:
        case = self._cases.get(tx_id)
        if case is None:
            raise UnknownChallenge(f"no payment challenge {tx_id!r}")
        return case

    def get_attestations(self, tx_id: str) -> dict:
        with self._mutex:
            return {
                "tx_id": tx_id,
                "attestations": [a.to_json() for a in self.engine.get_attestations(tx_id)],
            }

    def get_balance(self, account_id: str) -> dict:
        with self._mutex:
            return {"account_id": account_id,
                    "balance": str(self.engine.ledger.balance_of(account_id))}

    def get_lock(self, lock_id: str) -> dict:
        with self._mutex:
            return self.engine.ledger.lock(lock_id).to_json()

    def get_transcript(self) -> dict:
        with self._mutex:
            return {"events": self.events.all()}

    def get_catalog(self) -> dict:
        with self._mutex:
            return {
                "items": [
                    {"item_id": item_id, "price": str(price)}
                    for item_id, price in sorted(self.catalog.items())
                ],
                "payee": self.seller,
                "sof_threshold": str(self.engine.config.sof_threshold),
            }

    def case_status(self, tx_id: str) -> dict:
        with self._mutex:
            case = self._case(tx_id)
            out = {
                "tx_id": tx_id, "state": case.state.value,
                "item_id": case.challenge.item_id,
                "amount": str(case.challenge.amount),
            }
            if case.proposal is not None:
                out["proposal"] = case.proposal.to_json()
            if case.lock_id is not None:
                out["lock"] = self.engine.ledger.lock(case.lock_id).to_json()
            return out

    def snapshot(self) -> dict:
        with self._mutex:
            return {
                "ledger": self.engine.ledger.snapshot(),
                "compliance": self.engine.snapshot(),
                "cases": {
                    tx_id: {
                        "state": case.state.value,
                        "item_id": case.challenge.item_id,
                        "amount": str(case.challenge.amount),
                        "lock_id": case.lock_id,
                        "proposal_id": case.proposal.proposal_id if case.proposal else None,
                    }
                    for tx_id, case in sorted(self._cases.items())
                },
                "events": self.events.all(),
            }


# --- HTTP layer ---

STATUS_BY_CODE = {
    "UNKNOWN_ACCOUNT": 404,
    "UNKNOWN_LOCK": 404,
    "UNKNOWN_ITEM": 404,
    "UNKNOWN_CHALLENGE": 404,
    "UNKNOWN_PROPOSAL": 404,
    "UNKNOWN_POLICY": 404,
    "BAD_SIGNATURE": 401,
    "NOT_AUTHORIZED_RELEASER": 403,
    "CHALLENGE_MISMATCH": 409,
    "PROPOSAL_MISMATCH": 409,
    "DUPLICATE_ACCOUNT": 409,
    "DUPLICATE_EVALUATION": 409,
    "NONCE_ALREADY_USED": 400,
    "INSUFFICIENT_FUNDS": 400,
    "ZERO_AMOUNT": 400,
    "AMOUNT_OVERFLOW": 400,
    "INVALID_AUTHORIZATION": 400,
    "AUTHORIZATION_EXPIRED": 400,
    "AUTHORIZATION_NOT_YET_VALID": 400,
    "LOCK_NOT_ACTIVE": 409,
    "CHALLENGE_EXPIRED": 410,
    "CHALLENGE_CLOSED": 410,
    "PROPOSAL_CLOSED": 410,
    "SCHEMA_VIOLATION": 422,
    "CONFIG_ERROR": 500,
}

PAY_STATUS = {OUTCOME_SETTLED: 200, OUTCOME_PENDING: 202, OUTCOME_FAILED: 403}


def _require(data, key, kind=str):
    if not isinstance(data, dict) or key not in data:
        raise SchemaViolation(f"missing field {key!r}")
    value = data[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise SchemaViolation(f"field {key!r} must be {kind.__name__}")
    return value


def create_app(service: GatewayService):
    """Wrap a GatewayService in a FastAPI application."""
    from fastapi import Body, FastAPI
    from fastapi.middleware.cors import CORSMiddleware
    from fastapi.responses import JSONResponse

    app = FastAPI(title="complipay gateway", version="1.0.0", docs_url=None, redoc_url=None)
    app.state.service = service
    # demo service: the bundled browser console calls it from another origin
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])

    @app.exception_handler(ComplipayError)
    async def complipay_error(_request, err: ComplipayError):
        status = STATUS_BY_CODE.get(err.code, 500)
        return JSONResponse(status_code=status, content={"error": err.to_json()})

    @app.get("/catalog")
    def catalog():
        return service.get_catalog()

    @app.get("/resource/{item_id}")
    def resource(item_id: str, tx_id: str | None = None):
        result = service.request_resource(item_id, tx_id=tx_id)
        if result["status"] == "payment_required":
            return JSONResponse(status_code=402, content=result)
        return result

    @app.post("/pay")
    def pay(body: dict = Body(...)):
        tx_id = _require(body, "tx_id")
        auth_data = body.get("authorization")
        if not isinstance(auth_data, dict):
            raise SchemaViolation("field 'authorization' must be an object")
        auth = authz.PaymentAuthorization.from_json(auth_data)
        signature = authz.signature_from_json(_require(body, "signature"))
        result = service.pay(tx_id, auth, signature)
        return JSONResponse(status_code=PAY_STATUS[result["outcome"]], content=result)

    @app.post("/proposals/{proposal_id}/accept")
    def accept(proposal_id: str):
        return service.accept_proposal(proposal_id)

    @app.post("/evidence")
    def evidence(body: dict = Body(...)):
        subject = _require(body, "subject")
        declared_source = _require(body, "declared_source")
        covering_amount = parse_amount(_require(body, "covering_amount", object))
        return service.submit_evidence(subject, declared_source, covering_amount)

    @app.get("/attestations/{tx_id}")
    def attestations(tx_id: str):
        return service.get_attestations(tx_id)

    @app.get("/accounts/{account_id}/balance")
    def balance(account_id: str):
        return service.get_balance(account_id)

    @app.get("/escrow/{lock_id}")
    def escrow(lock_id: str):
        return service.get_lock(lock_id)

    @app.get("/payments/{tx_id}")
    def payment(tx_id: str):
        return service.case_status(tx_id)

    @app.get("/transcript")
    def transcript():
        return service.get_transcript()

    return app
