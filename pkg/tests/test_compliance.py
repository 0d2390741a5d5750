"""Policy checks, verdict aggregation, attestations, and the policy wrapper."""

import dataclasses

import pytest
from hypothesis import given, settings, strategies as st

from complipay import authz
from complipay.compliance import (
    AggregateVerdict,
    AttestationStore,
    ComplianceEngine,
    EvidenceStore,
    Instruction,
    Outcome,
    PolicyConfig,
    PolicyVerdict,
    SanctionsList,
    Verdict,
    sanctions_check,
    source_of_funds_check,
)
from complipay.errors import (
    BadSignature,
    LockNotActive,
    NonceAlreadyUsed,
    NotAuthorizedReleaser,
    SchemaViolation,
    UnknownAccount,
    UnknownPolicy,
)
from complipay.ledger import ReceiptKind

from conftest import build_engine, conserved, make_auth, signed

NOW = 1_700_000_000
SANCTIONS = SanctionsList(version="test-1", entries=frozenset({"mixer-x"}))


def instr(amount=100, payer="buyer", payee="seller", tx_id="tx-000001"):
    return Instruction(tx_id=tx_id, payer=payer, payee=payee, amount=amount)


class TestVerdictAlgebra:
    def test_dominance_order(self):
        assert Verdict.PASS.rank < Verdict.PENDING.rank < Verdict.FAIL.rank

    def test_all_pass(self):
        parts = [PolicyVerdict("a", Verdict.PASS, "ok"), PolicyVerdict("b", Verdict.PASS, "ok")]
        assert AggregateVerdict.combine(parts).overall is Verdict.PASS

    def test_fail_beats_pending(self):
        parts = [
            PolicyVerdict("a", Verdict.PENDING, "wait", required_evidence="doc"),
            PolicyVerdict("b", Verdict.FAIL, "no"),
        ]
        assert AggregateVerdict.combine(parts).overall is Verdict.FAIL

    def test_pending_beats_pass(self):
        parts = [
            PolicyVerdict("a", Verdict.PASS, "ok"),
            PolicyVerdict("b", Verdict.PENDING, "wait", required_evidence="doc"),
        ]
        assert AggregateVerdict.combine(parts).overall is Verdict.PENDING

    def test_empty_parts_pass(self):
        assert AggregateVerdict.combine([]).overall is Verdict.PASS

    @given(st.lists(st.sampled_from(list(Verdict)), min_size=1, max_size=6))
    @settings(max_examples=120)
    def test_combine_matches_max_by_rank(self, values):
        parts = [
            PolicyVerdict(f"p{i}", v, "r",
                          required_evidence="e" if v is Verdict.PENDING else None)
            for i, v in enumerate(values)
        ]
        combined = AggregateVerdict.combine(parts).overall
        assert combined is max(values, key=lambda v: v.rank)

    def test_required_evidence_only_when_pending(self):
        with pytest.raises(ValueError):
            PolicyVerdict("a", Verdict.PASS, "ok", required_evidence="doc")
        with pytest.raises(ValueError):
            PolicyVerdict("a", Verdict.PENDING, "wait")


class TestSanctionsCheck:
    def test_clean_parties_pass(self):
        verdict = sanctions_check("buyer", "seller", SANCTIONS)
        assert verdict.value is Verdict.PASS
        assert "test-1" in verdict.reason

    def test_listed_payer_fails(self):
        assert sanctions_check("mixer-x", "seller", SANCTIONS).value is Verdict.FAIL

    def test_listed_payee_fails(self):
        assert sanctions_check("buyer", "mixer-x", SANCTIONS).value is Verdict.FAIL

    def test_never_pending(self):
        for payer in ("buyer", "mixer-x"):
            for payee in ("seller", "mixer-x"):
                assert sanctions_check(payer, payee, SANCTIONS).value is not Verdict.PENDING


class TestSourceOfFundsCheck:
    def check(self, amount, threshold=1_000, evidence=None):
        store = EvidenceStore()
        if evidence is not None:
            store.append("buyer", "declared", evidence, submitted_at=NOW)
        config = PolicyConfig(sof_threshold=threshold)
        return source_of_funds_check("buyer", amount, config, store)

    def test_at_threshold_passes(self):
        assert self.check(1_000).value is Verdict.PASS

    def test_above_threshold_pends_without_evidence(self):
        verdict = self.check(1_001)
        assert verdict.value is Verdict.PENDING
        assert verdict.required_evidence == "source-of-funds"

    def test_covering_evidence_passes(self):
        assert self.check(1_001, evidence=1_001).value is Verdict.PASS

    def test_partial_evidence_still_pends(self):
        assert self.check(1_001, evidence=1_000).value is Verdict.PENDING

    def test_evidence_for_other_subject_ignored(self):
        store = EvidenceStore()
        store.append("someone-else", "declared", 10_000, submitted_at=NOW)
        config = PolicyConfig(sof_threshold=100)
        assert source_of_funds_check("buyer", 200, config, store).value is Verdict.PENDING


class TestAttestationStore:
    def test_chain_links_and_verifies(self):
        store = AttestationStore()
        verdict = AggregateVerdict.combine([PolicyVerdict("a", Verdict.PASS, "ok")])
        first = store.append("tx-000001", instr(), verdict, recorded_at=1)
        second = store.append("tx-000002", instr(tx_id="tx-000002"), verdict, recorded_at=2)
        assert first.prev_hash == "0" * 64
        assert second.prev_hash == first.hash
        assert store.verify_chain()

    def test_rounds_count_per_transaction(self):
        store = AttestationStore()
        verdict = AggregateVerdict.combine([PolicyVerdict("a", Verdict.PASS, "ok")])
        store.append("tx-000001", instr(), verdict, recorded_at=1)
        store.append("tx-000002", instr(tx_id="tx-000002"), verdict, recorded_at=2)
        again = store.append("tx-000001", instr(), verdict, recorded_at=3)
        assert again.round == 1
        assert [a.round for a in store.by_tx("tx-000001")] == [0, 1]

    def test_tamper_breaks_verification(self):
        store = AttestationStore()
        verdict = AggregateVerdict.combine([PolicyVerdict("a", Verdict.PASS, "ok")])
        store.append("tx-000001", instr(), verdict, recorded_at=1)
        store.append("tx-000001", instr(), verdict, recorded_at=2)
        tampered = dataclasses.replace(store._records[0], recorded_at=99)
        store._records[0] = tampered
        assert not store.verify_chain()

    def test_unknown_tx_is_empty(self):
        assert AttestationStore().by_tx("tx-404") == []


class TestEngineWrapper:
    def test_pass_settles_and_attests_at_same_seq(self, keys):
        engine = build_engine(keys)
        auth = make_auth(amount=100)
        result = engine.execute_with_policy("tx-000001", auth, signed(keys, auth), NOW)
        assert result.outcome is Outcome.SETTLED
        assert result.receipt.ledger_seq == result.attestation.recorded_at
        assert result.attestation.aggregate.overall is Verdict.PASS
        assert conserved(engine.ledger)

    def test_fail_blocks_and_attests(self, keys):
        engine = build_engine(keys, sanctioned=("seller",))
        auth = make_auth(amount=100)
        result = engine.execute_with_policy("tx-000001", auth, signed(keys, auth), NOW)
        assert result.outcome is Outcome.REJECTED_FAIL
        assert result.receipt is None
        assert engine.ledger.balance_of("buyer") == 20_000
        assert not engine.ledger.nonce_used("buyer", auth.nonce)
        assert len(engine.get_attestations("tx-000001")) == 1

    def test_pending_blocks_and_attests(self, keys):
        engine = build_engine(keys, threshold=50)
        auth = make_auth(amount=100)
        result = engine.execute_with_policy("tx-000001", auth, signed(keys, auth), NOW)
        assert result.outcome is Outcome.BLOCKED_PENDING
        assert engine.ledger.balance_of("seller") == 0
        attestation = engine.get_attestations("tx-000001")[0]
        assert attestation.aggregate.overall is Verdict.PENDING

    def test_crypto_invalid_records_no_attestation(self, keys):
        engine = build_engine(keys)
        auth = make_auth(amount=100)
        sig = signed(keys, auth)
        with pytest.raises(BadSignature):
            engine.execute_with_policy("tx-000001", auth, bytes(64), NOW)
        assert engine.get_attestations("tx-000001") == []
        # the authorization still works afterwards
        result = engine.execute_with_policy("tx-000001", auth, sig, NOW)
        assert result.outcome is Outcome.SETTLED

    def test_replay_through_wrapper_rejected(self, keys):
        engine = build_engine(keys)
        auth = make_auth(amount=100)
        sig = signed(keys, auth)
        engine.execute_with_policy("tx-000001", auth, sig, NOW)
        with pytest.raises(NonceAlreadyUsed):
            engine.execute_with_policy("tx-000002", auth, sig, NOW)

    def test_resubmission_after_evidence_settles(self, keys):
        engine = build_engine(keys, threshold=50)
        auth = make_auth(amount=100)
        sig = signed(keys, auth)
        assert engine.execute_with_policy("tx-000001", auth, sig, NOW).outcome \
            is Outcome.BLOCKED_PENDING
        engine.submit_sof_evidence("buyer", "payroll", 100, now=NOW)
        result = engine.execute_with_policy("tx-000001", auth, sig, NOW)
        assert result.outcome is Outcome.SETTLED
        rounds = [a.round for a in engine.get_attestations("tx-000001")]
        assert rounds == [0, 1]

    def test_unknown_policy_in_config(self, keys):
        from complipay.ledger import Ledger

        with pytest.raises(UnknownPolicy):
            ComplianceEngine(Ledger(), PolicyConfig(enabled_policies=("nope",)), SANCTIONS)

    def test_custom_check_participates(self, keys):
        engine = build_engine(keys)
        engine.register_check("velocity", lambda i: PolicyVerdict(
            "velocity", Verdict.FAIL, "too many payments"))
        engine.config = PolicyConfig(enabled_policies=("sanctions", "velocity"))
        auth = make_auth(amount=10)
        result = engine.execute_with_policy("tx-000001", auth, signed(keys, auth), NOW)
        assert result.outcome is Outcome.REJECTED_FAIL


class TestEscrowMediation:
    def pend_and_lock(self, keys, threshold=1_000, amount=1_500):
        engine = build_engine(keys, threshold=threshold)
        auth = make_auth(amount=amount, nonce=bytes([0x0A]) * 32)
        engine.execute_with_policy("tx-000001", auth, signed(keys, auth), NOW)
        tranche2 = make_auth(amount=amount - threshold, nonce=bytes([0x0B]) * 32)
        lock = engine.lock_pending_tranche(
            "tx-000001", tranche2, signed(keys, tranche2), NOW,
            releaser="compliance-agent",
        )
        return engine, lock

    def test_lock_consumes_nonce_and_custodies(self, keys):
        engine, lock = self.pend_and_lock(keys)
        assert engine.ledger.escrow_pool() == 500
        assert engine.ledger.nonce_used("buyer", bytes([0x0B]) * 32)
        assert conserved(engine.ledger)

    def test_release_requires_passing_reevaluation(self, keys):
        engine, lock = self.pend_and_lock(keys)
        assert engine.try_release(lock.lock_id, "compliance-agent") is None
        engine.submit_sof_evidence("buyer", "invoice", 1_500, now=NOW)
        receipt, attestation = engine.try_release(lock.lock_id, "compliance-agent")
        assert receipt.kind is ReceiptKind.ESCROW_RELEASE
        assert receipt.ledger_seq == attestation.recorded_at
        assert attestation.aggregate.overall is Verdict.PASS
        assert engine.ledger.balance_of("seller") == 500

    def test_release_reevaluates_original_amount(self, keys):
        # evidence covering only the held tranche must not unlock a larger
        # original instruction
        engine, lock = self.pend_and_lock(keys, threshold=1_000, amount=1_500)
        engine.submit_sof_evidence("buyer", "invoice", 500, now=NOW)
        assert engine.try_release(lock.lock_id, "compliance-agent") is None

    def test_release_denied_to_non_releaser(self, keys):
        engine, lock = self.pend_and_lock(keys)
        with pytest.raises(NotAuthorizedReleaser):
            engine.try_release(lock.lock_id, "buyer")

    def test_release_twice_raises(self, keys):
        engine, lock = self.pend_and_lock(keys)
        engine.submit_sof_evidence("buyer", "invoice", 1_500, now=NOW)
        engine.try_release(lock.lock_id, "compliance-agent")
        with pytest.raises(LockNotActive):
            engine.try_release(lock.lock_id, "compliance-agent")

    def test_evidence_needs_known_subject(self, keys):
        engine = build_engine(keys)
        with pytest.raises(UnknownAccount):
            engine.submit_sof_evidence("ghost", "invoice", 10, now=NOW)


def test_sanctions_list_parses_and_rejects_garbage():
    parsed = SanctionsList.from_json({"version": "v9", "entries": ["a", "b"]})
    assert parsed.entries == frozenset({"a", "b"})
    for bad in ({}, {"version": "v"}, {"version": 1, "entries": []},
                {"version": "v", "entries": [1]}, []):
        with pytest.raises(SchemaViolation):
            SanctionsList.from_json(bad)


def test_policy_config_rejects_nonpositive_threshold():
    with pytest.raises(SchemaViolation):
        PolicyConfig(sof_threshold=0)
