"""Agent orchestration: both bundled purchases, guardrails, quiescence."""

import json

import pytest
from importlib.resources import files

from complipay import agents
from complipay.errors import BudgetExceeded, ConfigError

from conftest import conserved


def bundled(name):
    return json.loads((files("complipay") / "fixtures" / f"{name}.json").read_text())


def run(config):
    world, result = agents.run_scenario(config)
    problems = agents.check_expectations(world, result)
    return world, result, problems


class TestSmallPurchase:
    def test_settles_in_three_rounds(self):
        world, result, problems = run(bundled("scenario1"))
        assert problems == []
        assert result.rounds_used == 3
        assert result.buyer_state == "DONE"
        assert world.ledger.balance_of("buyer") == 900
        assert world.ledger.balance_of("seller") == 100

    def test_transcript_is_exactly_three_events(self):
        world, result, _ = run(bundled("scenario1"))
        kinds = [e["kind"] for e in world.service.events.all()]
        assert kinds == ["challenge_issued", "payment_submitted", "settled"]

    def test_seller_fulfills(self):
        _, result, _ = run(bundled("scenario1"))
        assert list(result.seller_orders.values()) == ["FULFILLED"]


class TestLargePurchase:
    def test_full_tranche_lifecycle(self):
        world, result, problems = run(bundled("scenario2"))
        assert problems == []
        assert result.buyer_state == "DONE"
        assert world.ledger.balance_of("buyer") == 5_000
        assert world.ledger.balance_of("seller") == 15_000
        assert world.ledger.escrow_pool() == 0
        assert conserved(world.ledger)

    def test_seller_ships_conditionally_then_completes(self):
        world, result, _ = run(bundled("scenario2"))
        assert list(result.seller_orders.values()) == ["FULFILLED"]
        kinds = [e["kind"] for e in world.service.events.all()]
        assert kinds.index("escrow_locked") < kinds.index("evidence_submitted")
        assert kinds[-1] == "escrow_released"

    def test_attestation_rounds_tell_the_story(self):
        world, _, _ = run(bundled("scenario2"))
        attestations = world.engine.get_attestations("tx-000001")
        overall = [a.aggregate.overall.value for a in attestations]
        assert overall == ["PENDING", "PASS", "PASS"]
        assert world.engine.attestations.verify_chain()

    def test_no_funds_move_before_acceptance(self):
        config = bundled("scenario2")
        config["max_rounds"] = 2  # stop right after the PENDING verdict
        world, result = agents.run_scenario(config)
        assert world.ledger.balance_of("buyer") == 20_000
        assert world.ledger.escrow_pool() == 0


class TestGuardrails:
    def test_budget_guard_halts_the_buyer(self):
        config = bundled("scenario1")
        config["buyer"]["budget"] = "99"
        world, result, _ = run(config)
        assert result.buyer_state == "HALTED"
        assert "budget" in result.buyer_error
        assert world.ledger.balance_of("buyer") == 1_000

    def test_authorize_raises_past_budget(self, keys, clock, rng):
        from conftest import build_service

        service = build_service(keys, clock)
        buyer = agents.BuyerAgent(
            agents.AgentIdentity("buyer", keys["buyer"]),
            agents.PurchaseIntent(item_id="widget", budget=50),
            service, rng,
        )
        with pytest.raises(BudgetExceeded):
            buyer.authorize("seller", 51)

    def test_declined_proposal_leaves_funds_untouched(self):
        config = bundled("scenario2")
        config["auto_accept"] = False
        world, result, _ = run(config)
        assert result.buyer_state == "HALTED"
        assert world.ledger.balance_of("buyer") == 20_000
        assert world.ledger.escrow_pool() == 0
        assert conserved(world.ledger)

    def test_sanctioned_buyer_is_rejected(self):
        config = bundled("scenario1")
        config["sanctions"]["entries"].append("buyer")
        world, result = agents.run_scenario(config)
        assert result.buyer_state == "FAILED"
        assert world.ledger.balance_of("buyer") == 1_000
        attestations = world.engine.get_attestations("tx-000001")
        assert attestations[0].aggregate.overall.value == "FAIL"

    def test_missing_evidence_keeps_funds_locked(self):
        config = bundled("scenario2")
        del config["buyer"]["evidence"]
        world, result, _ = run(config)
        assert world.ledger.escrow_pool() == 5_000
        assert world.ledger.balance_of("seller") == 10_000
        assert result.buyer_state == "AWAIT_RELEASE"
        assert result.quiescent
        assert conserved(world.ledger)


class TestOrchestration:
    def test_agents_take_one_transition_per_step(self):
        config = bundled("scenario1")
        world = agents.build_world(config)
        buyer = world.buyer
        assert buyer.state == "NEED"
        buyer.step()
        assert buyer.state == "CHALLENGED"
        buyer.step()
        assert buyer.state == "VERIFY"

    def test_quiescence_is_reported(self):
        _, result, _ = run(bundled("scenario1"))
        assert result.quiescent

    def test_round_budget_stops_runaways(self):
        config = bundled("scenario2")
        config["max_rounds"] = 3
        world, result = agents.run_scenario(config)
        assert not result.quiescent
        assert result.rounds_used == 3

    def test_same_seed_same_transcript(self):
        world_a, _, _ = run(bundled("scenario2"))
        world_b, _, _ = run(bundled("scenario2"))
        assert world_a.service.events.all() == world_b.service.events.all()
        assert world_a.service.snapshot() == world_b.service.snapshot()

    def test_different_seed_different_nonces(self):
        config_b = bundled("scenario1")
        config_b["seed"] = 43
        world_a, _, _ = run(bundled("scenario1"))
        world_b, _, _ = run(config_b)
        nonce_a = world_a.service.events.all()[1]["payload"]["nonce"]
        nonce_b = world_b.service.events.all()[1]["payload"]["nonce"]
        assert nonce_a != nonce_b


class TestConfigValidation:
    def test_config_must_be_object(self):
        with pytest.raises(ConfigError):
            agents.build_world([])

    def test_seller_account_must_exist(self):
        config = bundled("scenario1")
        config["seller"] = "nobody"
        with pytest.raises(ConfigError):
            agents.build_world(config)

    def test_scenario_needs_a_buyer(self):
        config = bundled("scenario1")
        del config["buyer"]
        with pytest.raises(ConfigError):
            agents.run_scenario(config)

    def test_malformed_secret_rejected(self):
        config = bundled("scenario1")
        config["accounts"][0]["secret"] = "0xzz"
        with pytest.raises(ConfigError):
            agents.build_world(config)
