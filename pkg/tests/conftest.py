import json
import pathlib
import random

import pytest

from complipay import authz
from complipay.compliance import ComplianceEngine, PolicyConfig, SanctionsList
from complipay.gateway import GatewayService
from complipay.ledger import Ledger
from complipay.util import SimClock

FIXTURES = pathlib.Path(__file__).parent / "fixtures"

# deterministic demo seeds, matching the bundled scenario fixtures
BUYER_SEED = bytes([0x11]) * 32
SELLER_SEED = bytes([0x22]) * 32
AGENT_SEED = bytes([0x33]) * 32


@pytest.fixture
def keys():
    return {
        "buyer": authz.generate_keypair(seed=BUYER_SEED),
        "seller": authz.generate_keypair(seed=SELLER_SEED),
        "compliance-agent": authz.generate_keypair(seed=AGENT_SEED),
    }


@pytest.fixture
def clock():
    return SimClock()


@pytest.fixture
def rng():
    return random.Random(1234)


def build_ledger(keys, balances=None):
    balances = balances or {"buyer": 20_000, "seller": 0, "compliance-agent": 0}
    ledger = Ledger()
    for account_id, balance in balances.items():
        ledger.create_account(account_id, keys[account_id].public, balance)
    return ledger


def build_engine(keys, balances=None, threshold=10_000, sanctioned=()):
    ledger = build_ledger(keys, balances)
    config = PolicyConfig(sof_threshold=threshold)
    sanctions = SanctionsList(version="test-1", entries=frozenset(sanctioned))
    return ComplianceEngine(ledger, config, sanctions)


def build_service(keys, clock, balances=None, threshold=10_000, sanctioned=(),
                  catalog=None):
    engine = build_engine(keys, balances, threshold, sanctioned)
    catalog = catalog or {"widget": 100, "bulk-widget": 15_000}
    return GatewayService(engine, clock, catalog, seller="seller",
                          releaser="compliance-agent")


@pytest.fixture
def engine(keys):
    return build_engine(keys)


@pytest.fixture
def service(keys, clock):
    return build_service(keys, clock)


def make_auth(payer="buyer", payee="seller", amount=100, now=1_700_000_000,
              nonce=None, window=300):
    return authz.PaymentAuthorization(
        payer=payer, payee=payee, amount=amount,
        valid_after=now - 1, valid_before=now + window,
        nonce=nonce if nonce is not None else bytes([0x05]) * 32,
    )


def signed(keys, auth):
    return authz.sign_authorization(keys[auth.payer].secret, auth)


def golden_vector():
    return json.loads((FIXTURES / "auth_golden_vector.json").read_text())


def conserved(ledger):
    held = sum(ledger.balance_of(a) for a in ledger.account_ids())
    return ledger.total_supply() == held + ledger.escrow_pool()
