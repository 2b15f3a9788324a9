"""Command-line entry points.

Subcommands:
  dealer  - pre-generate per-party preprocessing material files
  party   - run one monitor party over TCP
  system  - run the System client over TCP (file or generated trace)
  bench   - in-process benchmark, one CSV row per scenario size
  oracle  - plaintext reference monitor over a trace file

Session configs are key-value text files; see `demos/session.cfg` for a
worked example.  Log verbosity comes from the MPCMON_LOG environment
variable (DEBUG/INFO/WARNING).
"""

from __future__ import annotations

import argparse
import logging
import os
import random
import sys
import time

from . import vm
from .compiler import parse_config_text, parse_modulus, scenario_from_config
from .dealer import (Dealer, load_party_material, report_csv_header,
                     report_csv_row, save_party_material)
from .errors import MonitorError
from .oracle import run_oracle
from .runtime import (SessionConfig, collect_metrics, run_local_session,
                      run_party_tcp, run_system_tcp)


def _setup_logging():
    level = os.environ.get("MPCMON_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def load_session_config(path: str):
    """Parse a session config file into (SessionConfig, raw key-values)."""
    with open(path) as f:
        text = f.read()
    kv = parse_config_text(text)
    program, scenario = scenario_from_config(text)
    return SessionConfig(
        program=program,
        scenario=scenario,
        parties=int(kv.get("parties", "3")),
        threshold=int(kv.get("threshold", "1")),
        scheme=kv.get("scheme", "shamir"),
        modulus=parse_modulus(kv["modulus"]) if "modulus" in kv else scenario.modulus,
        rounds=int(kv.get("rounds", "0")),
        stop_on_violation=kv.get("mode", "stop") != "continue",
        seed=int(kv.get("seed", "1")),
        host=kv.get("host", "127.0.0.1"),
        base_port=int(kv.get("base_port", "15000")),
    ), kv


def _material_path(prefix: str, party: int) -> str:
    return f"{prefix}.p{party}.mat"


def cmd_dealer(args):
    cfg, kv = load_session_config(args.config)
    prefix = kv.get("material", "material")
    rounds = cfg.rounds or 64
    est = vm.cost_estimate(cfg.program, cfg.modulus)
    counts = est.scaled(rounds)
    arith, boolean = cfg.make_schemes()
    dealer_rng, _ = cfg.derive_rngs()
    dealer = Dealer(arith, boolean, dealer_rng)

    def pad(n):
        return n + max(1, n // 10) if n else 0

    triples = dealer.issue_triples(pad(counts["triples"]))
    bit_triples = dealer.issue_bit_triples(pad(counts["bit_triples"]))
    dabits = dealer.issue_dabits(pad(counts["dabits"]))
    edabits = []
    for width, cnt in counts["edabits"].items():
        edabits.extend(dealer.issue_edabits(pad(cnt), width))
    for p in range(1, cfg.parties + 1):
        path = _material_path(prefix, p)
        save_party_material(path, p, arith, boolean, triples, bit_triples,
                            dabits, edabits)
        print(f"wrote {path}")
    print(f"issued: {len(triples)} triples, {len(bit_triples)} bit triples, "
          f"{len(dabits)} daBits, {len(edabits)} edaBits "
          f"(for {rounds} rounds plus slack)")
    return 0


def cmd_party(args):
    cfg, kv = load_session_config(args.config)
    arith, boolean = cfg.make_schemes()
    queue = load_party_material(_material_path(kv.get("material", "material"), args.id),
                                arith, boolean)
    result = run_party_tcp(cfg, args.id, queue)
    print(f"party {args.id}: {len(result['flags'])} rounds, "
          f"flags={''.join(str(f) for f in result['flags'])}")
    return 0


def _read_trace(path: str):
    trace = []
    with open(path) as f:
        for line in f:
            line = line.split("#", 1)[0].strip()
            if line:
                trace.append([int(tok) for tok in line.split()])
    return trace


def cmd_system(args):
    cfg, kv = load_session_config(args.config)
    if args.trace:
        trace = _read_trace(args.trace)
    else:
        rng = random.Random(args.random)
        rounds = cfg.rounds or 16
        trace = cfg.scenario.random_trace(rng, rounds)
    flags = run_system_tcp(cfg, trace)
    for t, f in enumerate(flags, start=1):
        print(f"round {t}: flag {f}")
    if flags and flags[-1] == 1 and cfg.stop_on_violation:
        print(f"violation detected at round {len(flags)}")
    return 0


def cmd_bench(args):
    scenario_kw = {}
    if args.scenario == "car":
        scenario_kw["r_max"] = 40000
        scenario_kw["r_base"] = 40000
    from .compiler import build_scenario
    program, scenario = build_scenario(args.scenario, args.size, rounds=args.rounds,
                                       **scenario_kw)
    cfg = SessionConfig(program=program, scenario=scenario, rounds=args.rounds,
                        scheme=args.scheme, modulus=scenario.modulus,
                        stop_on_violation=False, seed=args.seed,
                        record_views=False)
    trace = scenario.random_trace(random.Random(args.seed), args.rounds)
    t0 = time.perf_counter()
    result = run_local_session(cfg, trace)
    elapsed = time.perf_counter() - t0
    report = collect_metrics(result, args.scenario, args.size)
    row = report_csv_row(report)
    if args.out:
        new = not os.path.exists(args.out)
        with open(args.out, "a") as f:
            if new:
                f.write(report_csv_header() + "\n")
            f.write(row + "\n")
    print(report_csv_header())
    print(row)
    print(f"({result.rounds_executed} rounds in {elapsed:.3f}s, "
          f"{report['total_s'] * 1000:.1f} ms/iteration)")
    return 0


def cmd_oracle(args):
    from .compiler import build_scenario
    _, scenario = build_scenario(args.scenario, args.size)
    trace = _read_trace(args.trace)
    flags = run_oracle(scenario, trace)
    for t, f in enumerate(flags, start=1):
        print(f"round {t}: flag {f}")
    return 0


def main(argv=None):
    _setup_logging()
    parser = argparse.ArgumentParser(prog="mpcmon",
                                     description="privacy-preserving distributed runtime monitor")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dealer", help="pre-generate preprocessing material files")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_dealer)

    p = sub.add_parser("party", help="run one monitor party (TCP)")
    p.add_argument("--id", type=int, required=True)
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_party)

    p = sub.add_parser("system", help="run the System client (TCP)")
    p.add_argument("--config", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--trace", help="trace file, one observation vector per line")
    src.add_argument("--random", type=int, help="seed for a generated trace")
    p.set_defaults(fn=cmd_system)

    p = sub.add_parser("bench", help="benchmark a scenario in-process")
    p.add_argument("--scenario", required=True)
    p.add_argument("--size", type=int, default=10)
    p.add_argument("--rounds", type=int, default=20)
    p.add_argument("--scheme", default="shamir")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", help="append a CSV row to this file")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("oracle", help="plaintext reference monitor over a trace")
    p.add_argument("--scenario", required=True)
    p.add_argument("--size", type=int, default=1)
    p.add_argument("--trace", required=True)
    p.set_defaults(fn=cmd_oracle)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except MonitorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
