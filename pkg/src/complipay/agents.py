"""Deterministic agents that drive the gateway end to end.

Each agent exposes `step() -> bool` making at most one state transition per
call; the orchestrator runs agents round-robin until a full round passes
with no transitions (quiescence) or the round budget runs out. All
randomness flows from one seeded generator and time from one shared clock,
so a given configuration always produces the same transcript bytes.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import authz
from .compliance import ComplianceEngine, PolicyConfig, SanctionsList
from .errors import BudgetExceeded, ComplipayError, ConfigError
from .gateway import CHALLENGE_TTL, GatewayService
from .ledger import Ledger
from .util import SimClock, from_hex, parse_amount


@dataclass(frozen=True)
class PurchaseIntent:
    item_id: str
    budget: int
    evidence_source: str | None = None
    evidence_amount: int | None = None
    auto_accept: bool = True


@dataclass
class AgentIdentity:
    account_id: str
    keypair: authz.Keypair


class BuyerAgent:
    """Walks one purchase through challenge, payment, tranching, evidence,
    and delivery verification. States: NEED, CHALLENGED, PROPOSED,
    TRANCHING, TRANCHE1_DONE, AWAIT_RELEASE, VERIFY, DONE, FAILED, HALTED."""

    def __init__(self, identity: AgentIdentity, intent: PurchaseIntent,
                 service: GatewayService, rng: random.Random):
        self.identity = identity
        self.intent = intent
        self.service = service
        self.rng = rng
        self.state = "NEED"
        self.tx_id: str | None = None
        self.requirements: dict | None = None
        self.proposal: dict | None = None
        self.authorized_total = 0
        self.evidence_submitted = False
        self.last_error: str | None = None

    def authorize(self, payee: str, amount: int) -> tuple[authz.PaymentAuthorization, bytes]:
        """Sign a fresh single-use authorization, refusing to exceed budget."""
        if self.authorized_total + amount > self.intent.budget:
            raise BudgetExceeded(
                f"authorizing {amount} would take total {self.authorized_total + amount} "
                f"past budget {self.intent.budget}"
            )
        now = self.service.clock.now()
        auth = authz.PaymentAuthorization(
            payer=self.identity.account_id, payee=payee, amount=amount,
            valid_after=now - 1, valid_before=now + CHALLENGE_TTL,
            nonce=self.rng.randbytes(authz.NONCE_LENGTH),
        )
        signature = authz.sign_authorization(self.identity.keypair.secret, auth)
        self.authorized_total += amount
        return auth, signature

    def step(self) -> bool:
        try:
            return self._step()
        except BudgetExceeded as err:
            self.last_error = str(err)
            self.state = "HALTED"
            return True
        except ComplipayError as err:
            self.last_error = f"{err.code}: {err.message}"
            self.state = "HALTED"
            return True

    def _step(self) -> bool:
        if self.state == "NEED":
            result = self.service.request_resource(self.intent.item_id)
            self.requirements = result["requirements"]
            self.tx_id = self.requirements["tx_id"]
            self.state = "CHALLENGED"
            return True
        if self.state == "CHALLENGED":
            amount = parse_amount(self.requirements["amount"])
            auth, sig = self.authorize(self.requirements["payee"], amount)
            result = self.service.pay(self.tx_id, auth, sig)
            if result["outcome"] == "SETTLED":
                self.state = "VERIFY"
            elif result["outcome"] == "FAILED":
                self.state = "FAILED"
                self.authorized_total -= amount
            else:
                # the blocked authorization is superseded by the tranche
                # plan, so its amount goes back into the budget
                self.authorized_total -= amount
                self.proposal = result["proposal"]
                self.state = "PROPOSED"
            return True
        if self.state == "PROPOSED":
            if not self.intent.auto_accept:
                # declining is a client-side decision; the proposal simply
                # goes unanswered and the challenge expires on its own
                self.state = "HALTED"
                self.last_error = "proposal declined by configuration"
                return True
            self.service.accept_proposal(self.proposal["proposal_id"])
            self.state = "TRANCHING"
            return True
        if self.state == "TRANCHING":
            tranche = self.proposal["tranches"][0]
            auth, sig = self.authorize(self.requirements["payee"], parse_amount(tranche["amount"]))
            result = self.service.pay(self.tx_id, auth, sig)
            self.state = "TRANCHE1_DONE" if result["outcome"] == "SETTLED" else "HALTED"
            return True
        if self.state == "TRANCHE1_DONE":
            tranche = self.proposal["tranches"][1]
            auth, sig = self.authorize(self.requirements["payee"], parse_amount(tranche["amount"]))
            result = self.service.pay(self.tx_id, auth, sig)
            self.state = "AWAIT_RELEASE" if result["outcome"] == "PENDING" else "HALTED"
            return True
        if self.state == "AWAIT_RELEASE":
            if not self.evidence_submitted and self.intent.evidence_source is not None:
                self.service.submit_evidence(
                    subject=self.identity.account_id,
                    declared_source=self.intent.evidence_source,
                    covering_amount=self.intent.evidence_amount,
                )
                self.evidence_submitted = True
                self.state = "VERIFY"
                return True
            # nothing to submit: poll for delivery without counting as a step
            result = self.service.request_resource(self.intent.item_id, tx_id=self.tx_id)
            if result["status"] == "delivered":
                self.state = "DONE"
                return True
            return False
        if self.state == "VERIFY":
            result = self.service.request_resource(self.intent.item_id, tx_id=self.tx_id)
            if result["status"] == "delivered":
                self.state = "DONE"
                return True
            return False
        return False  # DONE, FAILED, HALTED are terminal


class SellerAgent:
    """Fulfills orders off the gateway transcript: full settlement means
    fulfill outright; an escrow lock covering the held tranche means ship
    conditionally; the release completes the order."""

    def __init__(self, identity: AgentIdentity, service: GatewayService):
        self.identity = identity
        self.service = service
        self.orders: dict[str, str] = {}
        self._cursor = 0

    def step(self) -> bool:
        events = self.service.events.all()
        while self._cursor < len(events):
            event = events[self._cursor]
            self._cursor += 1
            if self._apply(event):
                return True
        return False

    def _apply(self, event: dict) -> bool:
        kind, payload = event["kind"], event["payload"]
        tx_id = payload.get("tx_id")
        if kind == "settled" and payload["receipt"]["payee"] == self.identity.account_id:
            self.orders[tx_id] = "FULFILLED"
            return True
        if kind == "escrow_locked" and payload["lock"]["payee"] == self.identity.account_id:
            self.orders[tx_id] = "FULFILLED_CONDITIONAL"
            return True
        if kind == "escrow_released" and self.orders.get(tx_id) == "FULFILLED_CONDITIONAL":
            self.orders[tx_id] = "FULFILLED"
            return True
        return False


class ComplianceAgent:
    """Safety-net mediator: sweeps held tranches each step in case a release
    became possible outside the gateway's inline paths."""

    def __init__(self, identity: AgentIdentity, service: GatewayService):
        self.identity = identity
        self.service = service

    def step(self) -> bool:
        return bool(self.service.poll_releases())


@dataclass
class OrchestrationResult:
    rounds_used: int
    quiescent: bool
    buyer_state: str
    seller_orders: dict[str, str]
    buyer_error: str | None = None


def run_orchestration(agents, max_rounds: int, clock) -> OrchestrationResult:
    """Round-robin the agents until a full idle round or the round budget.
    The clock advances once per round so event times are reproducible."""
    buyer = next(a for a in agents if isinstance(a, BuyerAgent))
    seller = next(a for a in agents if isinstance(a, SellerAgent))
    rounds_used = 0
    quiescent = False
    for _ in range(max_rounds):
        acted = False
        for agent in agents:
            acted = agent.step() or acted
        clock.advance()
        if not acted:
            quiescent = True
            break
        rounds_used += 1
    return OrchestrationResult(
        rounds_used=rounds_used, quiescent=quiescent, buyer_state=buyer.state,
        seller_orders=dict(seller.orders), buyer_error=buyer.last_error,
    )


# --- configuration and world building ---

@dataclass
class World:
    config: dict
    clock: SimClock
    ledger: Ledger
    engine: ComplianceEngine
    service: GatewayService
    agents: list = field(default_factory=list)
    identities: dict[str, AgentIdentity] = field(default_factory=dict)

    @property
    def buyer(self) -> BuyerAgent:
        return next(a for a in self.agents if isinstance(a, BuyerAgent))


def _config_str(config: dict, key: str) -> str:
    value = config.get(key)
    if not isinstance(value, str) or not value:
        raise ConfigError(f"config field {key!r} must be a non-empty string")
    return value


def build_world(config: dict) -> World:
    """Construct ledger, engine, gateway, and agents from one config dict.
    Fixture secrets are demonstration values; nothing here manages real keys."""
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    try:
        clock = SimClock(start=int(config.get("clock", {}).get("start", 1_700_000_000)))
        seed = int(config.get("seed", 0))
        rng = random.Random(seed)
        ledger = Ledger()
        identities: dict[str, AgentIdentity] = {}
        for entry in config.get("accounts", []):
            account_id = _config_str(entry, "id")
            keypair = authz.generate_keypair(seed=from_hex(_config_str(entry, "secret"), 32))
            ledger.create_account(account_id, keypair.public,
                                  parse_amount(entry.get("balance", "0")))
            identities[account_id] = AgentIdentity(account_id, keypair)
        policy = PolicyConfig(sof_threshold=parse_amount(config.get("sof_threshold", "10000")))
        sanctions = SanctionsList.from_json(
            config.get("sanctions", {"version": "empty", "entries": []})
        )
        engine = ComplianceEngine(ledger, policy, sanctions)
        catalog = {
            _config_str(item, "item_id"): parse_amount(item.get("price", "0"))
            for item in config.get("catalog", [])
        }
        seller_id = _config_str(config, "seller")
        releaser_id = _config_str(config, "releaser")
        for needed in (seller_id, releaser_id):
            if needed not in identities:
                raise ConfigError(f"account {needed!r} is not defined in config")
        service = GatewayService(engine, clock, catalog, seller=seller_id,
                                 releaser=releaser_id)
        world = World(config=config, clock=clock, ledger=ledger, engine=engine,
                      service=service, identities=identities)
        buyer_cfg = config.get("buyer")
        if buyer_cfg is not None:
            buyer_id = _config_str(buyer_cfg, "id")
            if buyer_id not in identities:
                raise ConfigError(f"buyer account {buyer_id!r} is not defined in config")
            evidence = buyer_cfg.get("evidence")
            intent = PurchaseIntent(
                item_id=_config_str(buyer_cfg, "item_id"),
                budget=parse_amount(buyer_cfg.get("budget", "0")),
                evidence_source=evidence.get("declared_source") if evidence else None,
                evidence_amount=(
                    parse_amount(evidence["covering_amount"]) if evidence else None
                ),
                auto_accept=bool(config.get("auto_accept", True)),
            )
            world.agents = [
                BuyerAgent(identities[buyer_id], intent, service, rng),
                SellerAgent(identities[seller_id], service),
                ComplianceAgent(identities[releaser_id], service),
            ]
        return world
    except ConfigError:
        raise
    except ComplipayError as err:
        # duplicate accounts, bad amounts, unknown policies: all config faults
        raise ConfigError(f"bad config [{err.code}]: {err.message}") from err
    except (KeyError, TypeError, ValueError, AttributeError) as err:
        raise ConfigError(f"malformed config: {err}") from err


def run_scenario(config: dict) -> tuple[World, OrchestrationResult]:
    world = build_world(config)
    if not world.agents:
        raise ConfigError("config defines no buyer to run a scenario with")
    result = run_orchestration(world.agents, int(config.get("max_rounds", 12)), world.clock)
    return world, result


def check_expectations(world: World, result: OrchestrationResult) -> list[str]:
    """Compare the run against the config's expect block. Returns mismatch
    descriptions; empty means the run met every expectation."""
    expect = world.config.get("expect", {})
    problems = []
    for account_id, want in expect.get("balances", {}).items():
        got = world.ledger.balance_of(account_id)
        if got != parse_amount(want):
            problems.append(f"balance[{account_id}] = {got}, expected {want}")
    if "escrow_pool" in expect:
        if world.ledger.escrow_pool() != parse_amount(expect["escrow_pool"]):
            problems.append(
                f"escrow_pool = {world.ledger.escrow_pool()}, expected {expect['escrow_pool']}"
            )
    if "buyer_state" in expect and result.buyer_state != expect["buyer_state"]:
        problems.append(f"buyer_state = {result.buyer_state}, expected {expect['buyer_state']}")
    if "max_rounds_used" in expect and result.rounds_used > int(expect["max_rounds_used"]):
        problems.append(
            f"rounds_used = {result.rounds_used}, expected at most {expect['max_rounds_used']}"
        )
    if expect.get("quiescent", True) and not result.quiescent:
        problems.append("run ended without reaching quiescence")
    if "event_kinds" in expect:
        got_kinds = [e["kind"] for e in world.service.events.all()]
        if got_kinds != list(expect["event_kinds"]):
            problems.append(f"event kinds {got_kinds} differ from expected {expect['event_kinds']}")
    if not world.engine.attestations.verify_chain():
        problems.append("attestation chain failed verification")
    supply = world.ledger.total_supply()
    held = sum(world.ledger.balance_of(a) for a in world.ledger.account_ids())
    if supply != held + world.ledger.escrow_pool():
        problems.append("conservation violated: supply != balances + escrow pool")
    return problems
