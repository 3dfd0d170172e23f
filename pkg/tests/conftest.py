import random
from dataclasses import dataclass

import pytest

from ugw.curve import PAPER160
from ugw.protocol import (
    FreshnessPolicy,
    Identity,
    register_gateway_issue_card,
    register_user_finalize,
    register_user_request,
    setup_gateway_respond,
    setup_user_begin,
    setup_user_finish,
)
from ugw.registry import Registry


class FakeClock:
    def __init__(self, t=1_700_000_000):
        self.t = t

    def __call__(self):
        return self.t

    def advance(self, seconds):
        self.t += seconds


@dataclass
class World:
    identity: Identity
    password: str
    user: object
    gw: object
    card: object
    registry: Registry
    clock: FakeClock
    policy: FreshnessPolicy
    rng: random.Random


def make_world(seed=0, params=PAPER160, name="alice", password="correct horse", registry=None):
    rng = random.Random(seed)
    clock = FakeClock()
    policy = FreshnessPolicy(5, clock)
    registry = Registry() if registry is None else registry
    identity = Identity(name)
    partial, d_u = setup_user_begin(rng, params)
    gw, s_i = setup_gateway_respond(d_u, rng, params)
    user = setup_user_finish(partial, s_i)
    req = register_user_request(identity, password, user)
    issue = register_gateway_issue_card(req, gw, registry, clock.t)
    card = register_user_finalize(issue, password, user)
    return World(identity, password, user, gw, card, registry, clock, policy, rng)


@pytest.fixture
def world():
    return make_world()


@pytest.fixture
def clock():
    return FakeClock()


# -- acceptance verdicts ------------------------------------------------------

ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one acceptance line, then fail the test if the criterion failed."""

    def record(number, title, ok, detail):
        line = f"ACCEPTANCE {number} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        request.config.stash.setdefault(ACCEPTANCE, []).append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
