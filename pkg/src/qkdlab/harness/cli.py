"""qkdlab command line.

Exit codes: 0 completed (an aborted key exchange is a completed run),
1 usage or spec error, 2 transport or protocol error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from .. import classical
from ..channel import EveStrategy, SourceConfig
from ..qkd.messages import NegotiationError, ProtocolViolation
from .net import connect_alice, eve_proxy, serve_bob
from .runner import run, sweep
from .spec import RUN_PROTOCOLS, SWEEPABLE, RunSpec, SpecError, load_spec, render
from .wire import TransportError

EXIT_OK, EXIT_USAGE, EXIT_TRANSPORT = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _endpoint(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    try:
        return host or "127.0.0.1", int(port)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected host:port, got {text!r}") from None


def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file mirroring RunSpec field names; flags override it")
    p.add_argument("--protocol", choices=RUN_PROTOCOLS)
    p.add_argument("--pulses", type=int, help="number of pulses")
    p.add_argument("--eve", help="none | ir-random | ir-rect | ir-diag | pns")
    p.add_argument("--noise", type=float, help="bit- and phase-flip probability per photon")
    p.add_argument("--loss", type=float, help="per-photon loss probability (1 - survive_prob)")
    p.add_argument("--mu", type=float, help="weak coherent source mean photon number (default: ideal single photons)")
    p.add_argument("--threshold", type=float, help="abort when the estimated error rate exceeds this")
    p.add_argument("--sample-fraction", type=float)
    p.add_argument("--pa-safety", type=int)
    p.add_argument("--ec-passes", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="stats file; key files go next to it as <stem>.alice.key / <stem>.bob.key")
    p.add_argument("--format", choices=("json", "csv"))


def build_spec(args) -> RunSpec:
    spec = load_spec(args.config) if getattr(args, "config", None) else RunSpec()
    cfg, chan = spec.config, spec.channel
    try:
        if args.protocol is not None:
            spec.protocol = args.protocol
        if args.pulses is not None:
            cfg = replace(cfg, n_pulses=args.pulses)
        if args.threshold is not None:
            cfg = replace(cfg, abort_threshold=args.threshold)
        if args.sample_fraction is not None:
            cfg = replace(cfg, sample_fraction=args.sample_fraction)
        if args.pa_safety is not None:
            cfg = replace(cfg, pa_safety=args.pa_safety)
        if args.ec_passes is not None:
            cfg = replace(cfg, ec_passes=args.ec_passes)
    except ValueError as exc:
        raise SpecError("config", str(exc)) from exc
    try:
        if args.noise is not None:
            chan = replace(chan, flip_x_prob=args.noise, flip_z_prob=args.noise)
        if args.loss is not None:
            chan = replace(chan, survive_prob=1.0 - args.loss)
    except ValueError as exc:
        raise SpecError("channel", str(exc)) from exc
    if args.mu is not None:
        try:
            spec.source = SourceConfig(args.mu)
        except ValueError as exc:
            raise SpecError("source.mu", str(exc)) from exc
    if args.eve is not None:
        try:
            spec.eve = EveStrategy.parse(args.eve)
        except ValueError as exc:
            raise SpecError("eve", str(exc)) from exc
    spec.config, spec.channel = cfg, chan
    for name in ("seed", "out", "format"):
        if getattr(args, name, None) is not None:
            setattr(spec, name, getattr(args, name))
    return spec


def _parse_values(text: str) -> list[float]:
    if not text.strip():
        return []
    if ":" in text:
        # start:stop:step, inclusive of stop within rounding
        start, stop, step = (float(x) for x in text.split(":"))
        out, k = [], 0
        while start + k * step <= stop + 1e-12:
            out.append(round(start + k * step, 12))
            k += 1
        return out
    return [float(x) for x in text.split(",")]


def cmd_run(args) -> int:
    spec = build_spec(args)
    run(spec, timing=args.timing)
    return EXIT_OK


def cmd_commit(args) -> int:
    spec = build_spec(args)
    spec.protocol = "commit-demo"
    spec.commit = replace(spec.commit, cheat=args.cheat, photons=args.photons, trials=args.trials)
    run(spec)
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = build_spec(args)
    try:
        values = _parse_values(args.values)
    except ValueError as exc:
        raise SpecError("values", str(exc)) from exc
    text = sweep(spec, args.param, values, jobs=args.jobs)
    if spec.out:
        with open(spec.out, "w") as f:
            f.write(text)
    else:
        print(text, end="")
    return EXIT_OK


def cmd_serve_bob(args) -> int:
    spec = build_spec(args)
    host, port = args.listen
    recs = serve_bob(spec, host, port, sessions=args.sessions)
    if not spec.out:
        print(render(recs, spec.format), end="")
    return EXIT_OK


def cmd_alice(args) -> int:
    spec = build_spec(args)
    host, port = args.connect
    rec = connect_alice(spec, host, port)
    if not spec.out:
        print(render([rec], spec.format), end="")
    return EXIT_OK


def cmd_eve_proxy(args) -> int:
    strategy = EveStrategy.parse(args.eve or "ir-random")
    if args.seed is None:
        raise SpecError("seed", "required (runs are never seeded from the clock)")
    reps = eve_proxy(args.listen, args.forward, strategy, args.seed, protocol=args.protocol,
                     sessions=args.sessions, transcript=args.transcript)
    text = "".join(json.dumps(r) + "\n" for r in reps)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    else:
        print(text, end="")
    return EXIT_OK


def cmd_crypto(args) -> int:
    op = args.op
    a = args.args
    if op == "otp":
        out = classical.otp_apply(bytes.fromhex(a[0]), bytes.fromhex(a[1])).hex()
    elif op == "two-time-pad":
        out = classical.two_time_pad(bytes.fromhex(a[0]), bytes.fromhex(a[1])).hex()
    elif op == "caesar":
        direction = "decode" if args.decode else "encode"
        out = classical.caesar(" ".join(a), args.shift, direction)
    elif op == "rsa-keygen":
        pub, priv = classical.rsa_keygen(*(int(x) for x in a[:3]))
        out = json.dumps({"N": pub.N, "e": pub.e, "d": priv.d})
    elif op == "rsa-encrypt":
        m, n, e = (int(x) for x in a[:3])
        out = str(classical.rsa_encrypt(m, classical.RsaPublicKey(n, e)))
    elif op == "rsa-decrypt":
        y, n, d = (int(x) for x in a[:3])
        out = str(classical.rsa_decrypt(y, classical.RsaPrivateKey(d, n)))
    elif op == "rsa-crack":
        n, e = (int(x) for x in a[:2])
        priv = classical.rsa_crack(classical.RsaPublicKey(n, e))
        out = json.dumps({"N": n, "e": e, "d": priv.d})
    else:  # search-cost
        c, g = classical.search_cost(int(a[0]))
        out = json.dumps({"key_bits": int(a[0]), "classical_queries": c, "grover_queries": g})
    print(out)
    return EXIT_OK


CRYPTO_OPS = ("otp", "two-time-pad", "caesar", "rsa-keygen", "rsa-encrypt", "rsa-decrypt", "rsa-crack", "search-cost")
CRYPTO_ARITY = {"otp": 2, "two-time-pad": 2, "rsa-keygen": 3, "rsa-encrypt": 3, "rsa-decrypt": 3,
                "rsa-crack": 2, "search-cost": 1}


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qkdlab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run one session in-process")
    _run_flags(r)
    r.add_argument("--timing", action="store_true", help="add wall_time to the stats (breaks byte-reproducibility)")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="one run per parameter value, CSV out")
    _run_flags(s)
    s.add_argument("--param", required=True, choices=SWEEPABLE)
    s.add_argument("--values", required=True, help="comma list or start:stop:step")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    b = sub.add_parser("serve-bob", help="listen and act as Bob")
    _run_flags(b)
    b.add_argument("--listen", type=_endpoint, default=("127.0.0.1", 7084))
    b.add_argument("--sessions", type=int, default=1)
    b.set_defaults(func=cmd_serve_bob)

    a = sub.add_parser("alice", help="connect to Bob (or a proxy) and act as Alice")
    _run_flags(a)
    a.add_argument("--connect", type=_endpoint, default=("127.0.0.1", 7084))
    a.set_defaults(func=cmd_alice)

    e = sub.add_parser("eve-proxy", help="man-in-the-middle between Alice and Bob")
    e.add_argument("--listen", type=_endpoint, required=True)
    e.add_argument("--forward", type=_endpoint, required=True)
    e.add_argument("--eve", default="ir-random")
    e.add_argument("--protocol", choices=("bb84", "b92"), default="bb84")
    e.add_argument("--seed", type=int)
    e.add_argument("--sessions", type=int, default=1)
    e.add_argument("--transcript", help="append forwarded classical lines to this file")
    e.add_argument("--out")
    e.set_defaults(func=cmd_eve_proxy)

    c = sub.add_parser("commit-demo", help="bit commitment: honest, classical cheat or EPR cheat")
    _run_flags(c)
    c.add_argument("--cheat", choices=("none", "classical", "epr"), default="epr")
    c.add_argument("--photons", type=int, default=20)
    c.add_argument("--trials", type=int, default=20)
    c.set_defaults(func=cmd_commit)

    k = sub.add_parser("crypto", help="classical companions (hex for byte strings)")
    k.add_argument("op", choices=CRYPTO_OPS)
    k.add_argument("args", nargs="*")
    k.add_argument("--shift", type=int, default=3)
    k.add_argument("--decode", action="store_true")
    k.set_defaults(func=cmd_crypto)
    return p


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "crypto" and args.op in CRYPTO_ARITY and len(args.args) < CRYPTO_ARITY[args.op]:
        parser.error(f"crypto {args.op} needs {CRYPTO_ARITY[args.op]} arguments")
    try:
        return args.func(args)
    except SpecError as exc:
        print(f"qkdlab: invalid spec: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TransportError, ProtocolViolation, NegotiationError) as exc:
        print(f"qkdlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except ValueError as exc:
        print(f"qkdlab: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
