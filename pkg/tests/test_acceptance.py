"""Acceptance criteria, one test each, at their stated tolerances.

Every test records a single ``ACCEPTANCE <n> PASS|FAIL`` line (printed, and
repeated in the terminal summary) before asserting.
"""

import random
import time
import traceback
from concurrent.futures import ThreadPoolExecutor

from ugw import adversary as A
from ugw import cost
from ugw.curve import IDENTITY, PAPER160, TINY97, point_add, scalar_mul
from ugw.errors import LocalAuthenticationFailure
from ugw.gateway import GatewayService, ServiceConfig
from ugw.messages import AuthResponse, LoginRequest
from ugw.protocol import Identity, password_update
from ugw.transport import LoopbackBroker
from ugw.user import UserAgent


def judge(verdict, number, title, body):
    try:
        ok, detail = body()
    except Exception as exc:  # a crash is a failed criterion, with the cause on record
        traceback.print_exc()
        ok, detail = False, f"raised {type(exc).__name__}: {exc}"
    verdict(number, title, ok, detail)


def test_1_key_agreement(verdict):
    def body():
        t0 = time.perf_counter()
        agree = 0
        for seed in range(1000):
            user_key, gw_key, _ = A.run_honest(seed, PAPER160)
            agree += gw_key is not None and user_key.s_k == gw_key.s_k
        elapsed = time.perf_counter() - t0
        return agree == 1000 and elapsed < 30.0, f"{agree}/1000 runs agree, {elapsed:.1f}s (limit 30s)"

    judge(verdict, 1, "key agreement", body)


def test_2_communication_cost(verdict):
    def body():
        bad = []
        for seed in range(50):
            _, _, transcript = A.run_honest(seed)
            rep = cost.account_bits(transcript)
            widths = [bits for _, bits, _ in rep.messages]
            if rep.count != 2 or rep.total != 992 or widths != [672, 320]:
                bad.append((seed, widths))
        ok = not bad and 8 * LoginRequest.size() == 672 and 8 * AuthResponse.size() == 320
        return ok, f"50 transcripts, 2 messages, 672 + 320 = 992 bits each; mismatches: {bad or 'none'}"

    judge(verdict, 2, "communication cost", body)


def test_3_hash_count(verdict):
    def body():
        counts = [cost.count_ops(seed) for seed in range(100)]
        hashes = {c.raw["hash"] for c in counts}
        frozen = all(c.raw.get(op, 0) == n for c in counts for op, n in cost.EXPECTED_OPS.items())
        report = counts[0].report()
        print(report)
        delta = counts[0].delta()
        ok = hashes == {11} and frozen and "published" in report
        return ok, (f"hash={sorted(hashes)} over 100 seeds; point_mul={counts[0].raw['point_mul']} "
                    f"sym={counts[0].raw['sym']} (frozen {cost.EXPECTED_OPS['point_mul']}/"
                    f"{cost.EXPECTED_OPS['sym']}); delta vs published 2T_Pm+5T_Syn: "
                    f"point_mul {delta['point_mul']:+d}, sym {delta['sym']:+d}")

    judge(verdict, 3, "hash-count reproduction", body)


def test_4_attack_suite(verdict):
    def body():
        replays = [A.attack_replay(seed, 6 + seed % 50) for seed in range(100)]
        replay_ok = sum(not o.succeeded for o in replays)
        sweep = A.tamper_sweep(0)
        tamper_ok = (sweep.stats["request_bits"] == 672 and sweep.stats["response_bits"] == 320
                     and not sweep.succeeded)
        tb = A.Testbed(0)
        words = A.wordlist(10_000, 1, exclude=[tb.password])
        stolen = A.attack_stolen_card(0, words)
        imp_user = A.attack_impersonate(0, "user", 10_000)
        imp_gw = A.attack_impersonate(0, "gateway", 10_000)
        controls = [A.attack_stolen_card(0, [tb.password]),
                    A.attack_impersonate(0, "user", control=True),
                    A.attack_impersonate(0, "gateway", control=True)]
        live = all(c.succeeded for c in controls)
        ok = (replay_ok == 100 and tamper_ok and stolen.stats["accepted"] == 0 and stolen.stats["guesses"] == 10_000
              and imp_user.stats["accepted"] == 0 and imp_gw.stats["accepted"] == 0 and live)
        return ok, (f"replay>dT rejected {replay_ok}/100; tamper accepted {sweep.stats['request_accepted']}/672 + "
                    f"{sweep.stats['response_accepted']}/320; stolen card {stolen.stats['accepted']} accepted of "
                    f"{stolen.stats['guesses']}; forgeries accepted user-side {imp_user.stats['accepted']}/10000, "
                    f"gateway-side {imp_gw.stats['accepted']}/10000; control arms live: {live}")

    judge(verdict, 4, "attack suite", body)


def test_5_small_curve_oracle(verdict):
    def body():
        t0 = time.perf_counter()
        p, a, b = TINY97.p, TINY97.a, TINY97.b
        # independent enumeration: every (x, y) pair checked against the equation
        points = [(x, y) for x in range(p) for y in range(p) if (y * y - x ** 3 - a * x - b) % p == 0]
        order_e = len(points) + 1  # plus the point at infinity
        # order of G from repeated addition
        g_order, acc = 1, TINY97.G
        while not acc.is_identity:
            acc = point_add(acc, TINY97.G, TINY97)
            g_order += 1
        mismatches = 0
        for x, y in points:
            P = type(TINY97.G)(x, y)
            acc = IDENTITY
            for k in range(1, g_order):
                acc = point_add(acc, P, TINY97)
                mismatches += scalar_mul(k, P, TINY97) != acc
        elapsed = time.perf_counter() - t0
        ok = mismatches == 0 and g_order == TINY97.n and elapsed < 10.0
        return ok, (f"#E={order_e}, ord(G)={g_order}; {len(points)} points x k in [1,{g_order}): "
                    f"{mismatches} mismatches, {elapsed:.2f}s (limit 10s)")

    judge(verdict, 5, "small-curve oracle equivalence", body)


def test_6_password_update(verdict):
    def body():
        passed = 0
        for seed in range(100):
            tb = A.Testbed(seed)
            old, new = tb.password, f"new-password-{seed}"
            tb.card = password_update(tb.card, tb.identity, old, new, tb.params)
            tb.password = new
            user_key, gw_key = tb.login()
            try:
                tb.start_login(password=old)
                old_rejected = False
            except LocalAuthenticationFailure:
                old_rejected = True
            passed += gw_key is not None and user_key.s_k == gw_key.s_k and old_rejected
        return passed == 100, f"{passed}/100 trials: new password agrees on S_k, old password refused locally"

    judge(verdict, 6, "password update", body)


def test_7_benchmark_ordering(verdict):
    def body():
        rows = cost.bench_primitives(2000)
        print(cost.bench_report(rows))
        measured = ", ".join(f"{r.name}={r.median_ms:.4f}ms (published {r.published_ms})" for r in rows)
        return cost.ordering_holds(rows), f"T_Pm > T_Pa > max(T_h, T_Syn); {measured}"

    judge(verdict, 7, "benchmark ordering", body)


def test_8_service_durability(verdict, tmp_path):
    def body():
        config = ServiceConfig(registry_path=tmp_path / "r.bin", secrets_path=tmp_path / "s.bin",
                               gateway_id="gw-acc", loopback=True, workers=8)
        broker = LoopbackBroker()
        users = []
        with GatewayService(config, broker, "acceptance", rng=random.Random(0)) as svc:
            for i in range(100):
                ua = UserAgent(broker, "gw-acc", PAPER160, rng=random.Random(i), timeout=10)
                ident, pw = Identity(f"acc-{i}"), f"acc-password-{i}"
                card, secrets = ua.register(ident, pw)
                users.append((ua, ident, pw, card, secrets))
            before = list(svc.registry)
        with GatewayService(config, broker, "acceptance") as svc2:
            after = list(svc2.registry)

            def login(u):
                ua, ident, pw, card, secrets = u
                return ua.login(ident, pw, card, secrets).key.s_k

            with ThreadPoolExecutor(max_workers=32) as pool:
                keys = list(pool.map(login, users))
            gw_keys = {rec.key.s_k for rec in svc2.gateway.sessions.values()}
        ok = before == after and len(after) == 100 and len(set(keys)) == 100 and set(keys) == gw_keys
        return ok, (f"registry round trip {'equal' if before == after else 'DIFFERS'} ({len(after)} users); "
                    f"{len(set(keys))}/100 concurrent logins with distinct keys, all matched at the gateway: "
                    f"{set(keys) == gw_keys}")

    judge(verdict, 8, "service durability", body)


if __name__ == "__main__":
    import sys

    import pytest

    sys.exit(pytest.main([__file__, "-q"]))
