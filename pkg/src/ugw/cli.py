"""``ugw`` command line: user agent, gateway daemon, cost analyzer and attack harness.

Exit codes: 0 ok, 1 usage or local file error, 2 identity not available,
3 transport failure, 4 local authentication failure (wrong password,
unreadable card), 5 gateway authentication failure (rejected login,
bad gateway reply, echo integrity error).
"""

from __future__ import annotations

import argparse
import contextlib
import getpass
import logging
import os
import sys
from pathlib import Path

from .curve import get_profile
from .errors import (
    GatewayAuthenticationFailure,
    IdentityNotAvailable,
    IntegrityError,
    LocalAuthenticationFailure,
    MalformedMessage,
    ProtocolError,
)
from .gateway import GatewayService, SecretStoreError, ServiceConfig, serve
from .protocol import Identity, open_card, password_update
from .registry import RegistryCorrupt
from .transport import LoopbackBroker, MqttTransport, TransportError, new_nonce
from .user import RegistrationError, UserAgent, load_card, load_device, save_card, save_device

EXIT_OK, EXIT_USAGE, EXIT_DUPLICATE, EXIT_TRANSPORT, EXIT_LOCAL_AUTH, EXIT_GATEWAY_AUTH = 0, 1, 2, 3, 4, 5
MIN_PASSWORD = 8
DEFAULT_HOME = Path("~/.ugw")


class CliError(Exception):
    def __init__(self, message, code=EXIT_USAGE):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- passwords --------------------------------------------------------------

def _password(env: str, prompt: str, confirm: bool = False) -> str:
    value = os.environ.get(env)
    if value is not None:
        return value
    if not sys.stdin.isatty():
        raise CliError(f"no terminal for the password prompt; set {env}")
    value = getpass.getpass(prompt)
    if confirm and getpass.getpass("Repeat: ") != value:
        raise CliError("passwords do not match")
    return value


def _check_strength(pw: str) -> None:
    if len(pw) < MIN_PASSWORD:
        raise CliError(f"password must be at least {MIN_PASSWORD} characters")


# -- transports ---------------------------------------------------------------

@contextlib.contextmanager
def _user_transport(args, profile: str):
    """MQTT client, or an in-process gateway on a loopback broker."""
    if not args.loopback:
        host, _, port = args.broker.rpartition(":")
        transport = MqttTransport(host or "localhost", int(port or 1883), f"ugw-user-{new_nonce()}",
                                  connect_timeout=args.timeout)
        try:
            yield transport
        finally:
            transport.close()
        return
    state = Path(args.gateway_state).expanduser()
    config = ServiceConfig(gateway_id=args.gateway_id, profile=profile, loopback=True,
                           registry_path=state / "registry.bin", secrets_path=state / "secrets.bin",
                           topic_prefix=args.prefix)
    broker = LoopbackBroker()
    with GatewayService(config, broker, os.environ.get("UGW_GATEWAY_SECRET")):
        yield broker


def _device_path(args) -> Path:
    if args.device:
        return Path(args.device).expanduser()
    return Path(args.card).expanduser().with_name("device.bin")


def _load_credentials(args):
    card_path = Path(args.card).expanduser()
    try:
        card = load_card(card_path)
        secrets = load_device(_device_path(args))
    except FileNotFoundError as exc:
        raise CliError(f"{exc.filename}: not found (register first)") from None
    except MalformedMessage as exc:
        raise CliError(f"card rejected: {exc}", EXIT_LOCAL_AUTH) from None
    if card.profile_id != secrets.params.profile_id:
        raise CliError("card and device file belong to different curve profiles", EXIT_LOCAL_AUTH)
    return card, secrets


def _agent(args, transport, params) -> UserAgent:
    return UserAgent(transport, args.gateway_id, params, prefix=args.prefix, timeout=args.timeout)


# -- user commands --------------------------------------------------------

def cmd_register(args) -> int:
    params = get_profile(args.profile)
    card_path, device_path = Path(args.card).expanduser(), _device_path(args)
    if card_path.exists() and not args.force:
        raise CliError(f"{card_path} already exists (use --force to overwrite)")
    pw = _password("UGW_PASSWORD", "New password: ", confirm=True)
    _check_strength(pw)
    with _user_transport(args, params.profile_id) as transport:
        card, secrets = _agent(args, transport, params).register(Identity(args.identity), pw)
    save_device(device_path, secrets)
    save_card(card_path, card)
    print(f"registered {args.identity}; card written to {card_path}")
    return EXIT_OK


def _login(args, transport, card, secrets, pw):
    agent = _agent(args, transport, secrets.params)
    return agent.login(Identity(args.identity), pw, card, secrets)


def _checked_password(args, card, secrets) -> str:
    pw = _password("UGW_PASSWORD", "Password: ")
    if not pw:
        raise CliError("empty password", EXIT_LOCAL_AUTH)
    # card-reader gate before any transport is opened
    open_card(card, Identity(args.identity), pw, secrets.params)
    return pw


def cmd_login(args) -> int:
    card, secrets = _load_credentials(args)
    pw = _checked_password(args, card, secrets)
    with _user_transport(args, secrets.params.profile_id) as transport:
        session = _login(args, transport, card, secrets, pw)
    print(session.fingerprint)
    return EXIT_OK


def cmd_echo(args) -> int:
    card, secrets = _load_credentials(args)
    pw = _checked_password(args, card, secrets)
    message = args.message.encode("utf-8")
    with _user_transport(args, secrets.params.profile_id) as transport:
        session = _login(args, transport, card, secrets, pw)
        print(f"session {session.fingerprint}", file=sys.stderr)
        reply = session.echo(message)
    sys.stdout.write(reply.decode("utf-8", errors="replace") + "\n")
    return EXIT_OK


def cmd_update_password(args) -> int:
    card_path = Path(args.card).expanduser()
    card, secrets = _load_credentials(args)
    old = _password("UGW_PASSWORD", "Current password: ")
    if not old:
        raise CliError("empty password", EXIT_LOCAL_AUTH)
    identity = Identity(args.identity)
    open_card(card, identity, old, secrets.params)
    new = _password("UGW_NEW_PASSWORD", "New password: ", confirm=True)
    _check_strength(new)
    save_card(card_path, password_update(card, identity, old, new, secrets.params))
    print(f"password updated; {card_path} rewritten")
    return EXIT_OK


# -- gateway --------------------------------------------------------------

def cmd_gateway_serve(args) -> int:
    overrides = dict(broker=args.broker, profile=args.profile, delta_t=args.delta_t, gateway_id=args.gateway_id,
                     registry_path=args.registry, secrets_path=args.secrets, workers=args.workers,
                     loopback=args.loopback or None)
    if args.config:
        config = ServiceConfig.from_file(args.config, **overrides)
    else:
        config = ServiceConfig(**{k: v for k, v in overrides.items() if v is not None})
    serve(config, os.environ.get("UGW_GATEWAY_SECRET"))
    return EXIT_OK


# -- cost / attack ----------------------------------------------------------

def cmd_cost_count(args) -> int:
    from . import cost

    counts = [cost.count_ops(seed, get_profile(args.profile)) for seed in range(args.seed, args.seed + args.runs)]
    print(counts[0].report())
    stable = all(c.raw == counts[0].raw for c in counts)
    print(f"counts identical across {args.runs} seeds: {stable}")
    matches = {op: counts[0].raw.get(op, 0) == n for op, n in cost.EXPECTED_OPS.items()}
    print("frozen expectation " + ", ".join(f"{op}={n} {'ok' if matches[op] else 'MISMATCH'}"
                                            for op, n in cost.EXPECTED_OPS.items()))
    return EXIT_OK if stable and all(matches.values()) else EXIT_USAGE


def cmd_cost_bits(args) -> int:
    from . import cost
    from .adversary import run_honest

    _, _, transcript = run_honest(args.seed, get_profile(args.profile))
    print(cost.account_bits(transcript).report())
    return EXIT_OK


def cmd_cost_bench(args) -> int:
    from . import cost

    rows = cost.bench_primitives(args.iters)
    print(cost.bench_report(rows))
    return EXIT_OK if cost.ordering_holds(rows) else EXIT_USAGE


def cmd_attack_run(args) -> int:
    from . import adversary

    outcomes = adversary.run_suite(args.seed, get_profile(args.profile), quick=args.quick)
    print(adversary.format_report(outcomes))
    if args.json:
        adversary.write_summary(outcomes, args.json)
    return EXIT_OK if not adversary.unexpected(outcomes) else EXIT_USAGE


def cmd_attack_script(args) -> int:
    from . import adversary

    try:
        script = adversary.ChannelScript.load(args.file)
    except ValueError as exc:
        raise CliError(f"{args.file}: {exc}") from None
    outcome = adversary.run_script(script, args.seed, get_profile(args.profile))
    for event in outcome.stats["events"]:
        print(f"  {event}")
    print(outcome.line())
    if args.json:
        adversary.write_summary([outcome], args.json)
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ugw", description="User-gateway authentication over MQTT.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (-vv for debug)")
    top = p.add_subparsers(dest="group", required=True, parser_class=_Parser)

    user = top.add_parser("user", help="user agent")
    ucmd = user.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _Parser(add_help=False)
    common.add_argument("--identity", required=True)
    common.add_argument("--card", default=str(DEFAULT_HOME / "card.bin"))
    common.add_argument("--device", help="device secrets file (default: device.bin next to the card)")
    common.add_argument("--gateway-id", default="gw1")
    common.add_argument("--broker", default="localhost:1883", help="host:port")
    common.add_argument("--prefix", default="ugw", help="topic prefix")
    common.add_argument("--timeout", type=float, default=10.0)
    common.add_argument("--loopback", action="store_true",
                        help="run the gateway in-process (state from --gateway-state)")
    common.add_argument("--gateway-state", default=str(DEFAULT_HOME / "gateway"))

    reg = ucmd.add_parser("register", parents=[common], help="setup + registration; writes the card")
    reg.add_argument("--profile", default="paper160", choices=["paper160", "tiny97"])
    reg.add_argument("--force", action="store_true")
    reg.set_defaults(func=cmd_register)
    ucmd.add_parser("login", parents=[common], help="print the session-key fingerprint").set_defaults(func=cmd_login)
    upd = ucmd.add_parser("update-password", parents=[common], help="re-key the card offline")
    upd.set_defaults(func=cmd_update_password)
    ech = ucmd.add_parser("echo", parents=[common], help="log in, then echo MESSAGE under the session key")
    ech.add_argument("message", nargs="?", default="")
    ech.set_defaults(func=cmd_echo)

    gw = top.add_parser("gateway", help="gateway daemon")
    gcmd = gw.add_subparsers(dest="command", required=True, parser_class=_Parser)
    srv = gcmd.add_parser("serve", help="serve until SIGINT/SIGTERM")
    srv.add_argument("--config", help="INI file with a [gateway] section")
    srv.add_argument("--broker")
    srv.add_argument("--gateway-id")
    srv.add_argument("--profile", choices=["paper160", "tiny97"])
    srv.add_argument("--delta-t", type=int)
    srv.add_argument("--registry")
    srv.add_argument("--secrets")
    srv.add_argument("--workers", type=int)
    srv.add_argument("--loopback", action="store_true")
    srv.set_defaults(func=cmd_gateway_serve)

    cost = top.add_parser("cost", help="operation counts, bit accounting, benchmarks")
    ccmd = cost.add_subparsers(dest="command", required=True, parser_class=_Parser)
    cnt = ccmd.add_parser("count")
    cnt.add_argument("--runs", type=int, default=10)
    bits = ccmd.add_parser("bits")
    for sp in (cnt, bits):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--profile", default="paper160", choices=["paper160", "tiny97"])
    cnt.set_defaults(func=cmd_cost_count)
    bits.set_defaults(func=cmd_cost_bits)
    bench = ccmd.add_parser("bench")
    bench.add_argument("--iters", type=int, default=1000)
    bench.set_defaults(func=cmd_cost_bench)

    atk = top.add_parser("attack", help="Dolev-Yao attack harness")
    acmd = atk.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = acmd.add_parser("run", help="every scripted attack with control arms")
    run.add_argument("--quick", action="store_true", help="smaller dictionaries and budgets")
    run.set_defaults(func=cmd_attack_run)
    scr = acmd.add_parser("script", help="run a channel scenario file")
    scr.add_argument("file")
    scr.set_defaults(func=cmd_attack_script)
    for sp in (run, scr):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--profile", default="paper160", choices=["paper160", "tiny97"])
        sp.add_argument("--json", help="write a JSON summary here")
    return p


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, CliError):
        return exc.code
    if isinstance(exc, IdentityNotAvailable):
        return EXIT_DUPLICATE
    if isinstance(exc, TransportError):
        return EXIT_TRANSPORT
    if isinstance(exc, LocalAuthenticationFailure):
        return EXIT_LOCAL_AUTH
    if isinstance(exc, (GatewayAuthenticationFailure, IntegrityError, RegistrationError, ProtocolError)):
        return EXIT_GATEWAY_AUTH
    return EXIT_USAGE


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    default_level = logging.INFO if args.group == "gateway" else logging.WARNING
    level = {0: default_level, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except IdentityNotAvailable:
        print("identity not available", file=sys.stderr)
        return EXIT_DUPLICATE
    except (CliError, TransportError, ProtocolError, SecretStoreError, RegistryCorrupt,
            PermissionError, ValueError) as exc:
        print(f"ugw: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
