"""The online monitoring protocol: System client, party processes, rounds.

Each round has three phases: the System secret-shares the observation
vector and sends share i to party i; the parties run the compiled
program in lockstep, exchanging only masked openings; they jointly
reconstruct the one violation flag and report it back to the System.
State shares carry over to the next round; nothing else persists.

Two transports implement the same party logic (which is written as
generators in :mod:`mpcmon.engine`): an in-process lockstep pump used
for tests and benchmarks, and length-prefixed TCP for separate
processes.
"""

from __future__ import annotations

import logging
import random
import socket
import time
from dataclasses import dataclass, field

from . import vm, wire
from .algebra import DEFAULT_PRIME, Element, Modulus
from .dealer import (Dealer, MaterialQueue, ResourceLedger,
                     bind_streaming_dealer, ledger_report, stock_parties)
from .engine import Exchange, PartyContext, run_lockstep
from .errors import MonitorError, ProtocolError
from .sharing import (AdditiveScheme, BooleanScheme, ShamirScheme, SType,
                      TypedShare, public_share)

log = logging.getLogger("mpcmon")

_KIND_TAG = {Exchange.MASKED: wire.MASKED_OPEN, Exchange.FLAG: wire.FLAG_SHARE}


@dataclass
class SessionConfig:
    """Parameters shared by every process of one monitoring session."""

    program: object
    parties: int = 3
    threshold: int = 1
    scheme: str = "shamir"              # "shamir" | "additive"
    modulus: Modulus = None
    rounds: int = 0                     # 0 = bounded only by the trace
    stop_on_violation: bool = True
    seed: int = 1
    record_views: bool = False
    scenario: object = None             # ScenarioConfig, if scenario-driven
    slack: float = 0.10
    host: str = "127.0.0.1"
    base_port: int = 15000
    timeout: float = 30.0

    def __post_init__(self):
        if self.modulus is None:
            self.modulus = (self.scenario.modulus if self.scenario is not None
                            else Modulus.prime(DEFAULT_PRIME))
        if self.parties < 2:
            raise MonitorError("need at least 2 parties")
        if not 0 < self.threshold < self.parties:
            raise MonitorError("corruption threshold must satisfy 0 < t < k")
        issues = vm.typecheck(self.program)
        if issues:
            raise MonitorError(f"program does not typecheck: {issues[0]}")

    def make_schemes(self):
        boolean = BooleanScheme(self.parties)
        if self.scheme == "shamir":
            return ShamirScheme(self.modulus, self.threshold, self.parties), boolean
        if self.scheme == "additive":
            return AdditiveScheme(self.modulus, self.parties), boolean
        raise MonitorError(f"unknown scheme {self.scheme!r}")

    def params_fn(self, t: int) -> dict:
        return self.scenario.params(t) if self.scenario is not None else {}

    def derive_rngs(self):
        """Deterministic per-role PRGs; the session seed fixes the transcript."""
        root = random.Random(self.seed)
        dealer_rng = random.Random(root.randrange(2**63))
        system_rng = random.Random(root.randrange(2**63))
        return dealer_rng, system_rng

    def initial_state(self) -> dict:
        values = (self.scenario.initial_state if self.scenario is not None
                  else [0] * len(self.program.state_regs))
        if len(values) != len(self.program.state_regs):
            raise MonitorError("initial state length does not match the program")
        return dict(zip(self.program.state_regs, values))


@dataclass
class Verdict:
    round: int
    flag: int
    terminal: bool


@dataclass
class SessionResult:
    config: SessionConfig
    verdicts: list = field(default_factory=list)
    ledgers: list = field(default_factory=list)       # per party
    views: list = field(default_factory=list)         # per party (PartyView)
    system_log: list = field(default_factory=list)    # inbound messages at the System
    system_bytes: int = 0
    round_times: list = field(default_factory=list)   # wall seconds per round
    compute_times: list = field(default_factory=list)
    exchanges_per_round: list = field(default_factory=list)

    @property
    def flags(self):
        return [v.flag for v in self.verdicts]

    @property
    def rounds_executed(self):
        return len(self.verdicts)


class SystemClient:
    """The monitored System: shares observations, receives only flags."""

    def __init__(self, cfg: SessionConfig, arith, boolean, rng):
        self.cfg = cfg
        self.program = cfg.program
        self.arith = arith
        self.boolean = boolean
        self.rng = rng
        self.bytes_sent = 0
        self.inbound = []  # (round, tag, values) - must only ever hold flags
        self._arith_obs = [r for r in self.program.obs_regs
                           if self.program.reg_types[r] is SType.ARITH]
        self._bool_obs = [r for r in self.program.obs_regs
                          if self.program.reg_types[r] is SType.BOOL]

    def share_observations(self, obs):
        """Fresh sharings of one observation vector; returns per-party maps.

        Raises before sharing anything if a value is out of range.
        """
        if self.cfg.scenario is not None:
            self.cfg.scenario.validate_obs(obs)
        program = self.program
        if len(obs) != len(program.obs_regs):
            raise MonitorError(f"expected {len(program.obs_regs)} observation values")
        per_party = [dict() for _ in range(self.cfg.parties)]
        for reg, value in zip(program.obs_regs, obs):
            if program.reg_types[reg] is SType.ARITH:
                sv = self.arith.share(Element(value % self.arith.modulus.value,
                                              self.arith.modulus), self.rng)
            else:
                if value not in (0, 1):
                    raise MonitorError(f"Boolean observation must be 0/1, got {value}")
                sv = self.boolean.share(Element(value, self.boolean.modulus), self.rng)
            for p in range(self.cfg.parties):
                per_party[p][reg] = sv.typed(p + 1)
        # wire accounting: one OBS_SHARE message per domain per party
        n_a, n_b = len(self._arith_obs), len(self._bool_obs)
        per_msg = 0
        if n_a:
            per_msg += wire.message_size(n_a, self.arith.modulus.octets)
        if n_b:
            per_msg += wire.message_size(n_b, 1)
        self.bytes_sent += per_msg * self.cfg.parties
        return per_party

    def receive_flag(self, round_, flags):
        if len(set(flags)) != 1:
            raise ProtocolError(f"parties reported diverging flags {flags} in round {round_}")
        self.inbound.append((round_, wire.FLAG_SHARE, (flags[0],)))
        return flags[0]


class PartyRuntime:
    """One monitor party's per-session state: context plus carried shares."""

    def __init__(self, cfg: SessionConfig, party: int, arith, boolean, material):
        self.cfg = cfg
        self.party = party
        self.ctx = PartyContext(party, arith, boolean, material, ResourceLedger(),
                                record_view=cfg.record_views)
        self.state = {reg: public_share(arith if cfg.program.reg_types[reg] is SType.ARITH
                                        else boolean, value, party)
                      for reg, value in cfg.initial_state().items()}

    def round_gen(self, t: int, obs_shares):
        self.ctx.round = t
        if self.ctx.record_view:
            for reg, share in obs_shares.items():
                self.ctx.view.inputs.append((t, f"obs{reg}", share.value.value))
        flag, next_state = yield from vm.execute_round(
            self.cfg.program, self.ctx, self.state, obs_shares, self.cfg.params_fn(t))
        self.state = next_state
        if flag:
            log.info("party %d: violation flag at round %d", self.party, t)
        return flag


def _provision(cfg: SessionConfig, arith, boolean, dealer_rng):
    """Dealer, per-party queues, and streaming refill hooks."""
    dealer = Dealer(arith, boolean, dealer_rng)
    queues = [MaterialQueue(p) for p in range(1, cfg.parties + 1)]
    est = vm.cost_estimate(cfg.program, cfg.modulus)
    batch = est.scaled(max(1, min(cfg.rounds or 8, 64)))
    stock_parties(queues, dealer, batch, cfg.slack)
    bind_streaming_dealer(queues, dealer, batch, cfg.slack)
    return dealer, queues


class LocalSession:
    """All parties, the System, and the dealer in one process, lockstep."""

    def __init__(self, cfg: SessionConfig):
        self.cfg = cfg
        arith, boolean = cfg.make_schemes()
        dealer_rng, system_rng = cfg.derive_rngs()
        self.dealer, queues = _provision(cfg, arith, boolean, dealer_rng)
        self.system = SystemClient(cfg, arith, boolean, system_rng)
        self.parties = [PartyRuntime(cfg, p + 1, arith, boolean, queues[p])
                        for p in range(cfg.parties)]

    def run(self, trace) -> SessionResult:
        cfg = self.cfg
        res = SessionResult(cfg)
        for t, obs in enumerate(trace, start=1):
            if cfg.rounds and t > cfg.rounds:
                break
            t0 = time.perf_counter()
            shares = self.system.share_observations(obs)
            t1 = time.perf_counter()
            counter = [0]

            def on_exchange(req):
                counter[0] += 1

            gens = [p.round_gen(t, shares[i]) for i, p in enumerate(self.parties)]
            flags = run_lockstep(gens, on_exchange)
            t2 = time.perf_counter()
            flag = self.system.receive_flag(t, flags)
            terminal = bool(flag) and cfg.stop_on_violation
            res.verdicts.append(Verdict(t, flag, terminal))
            res.round_times.append(t2 - t0)
            res.compute_times.append(t2 - t1)
            res.exchanges_per_round.append(counter[0])
            if terminal:
                log.info("session terminated: violation at round %d", t)
                break
        res.ledgers = [p.ctx.ledger for p in self.parties]
        res.views = [p.ctx.view for p in self.parties]
        res.system_log = self.system.inbound
        res.system_bytes = self.system.bytes_sent
        return res


def run_local_session(cfg: SessionConfig, trace) -> SessionResult:
    return LocalSession(cfg).run(trace)


def random_trace(cfg: SessionConfig, seed: int, rounds: int | None = None):
    if cfg.scenario is None:
        raise MonitorError("random traces need a scenario config")
    rng = random.Random(seed)
    return cfg.scenario.random_trace(rng, rounds or cfg.rounds)


# ---------------------------------------------------------------------------
# Transcript probe and metrics


def transcript_probe(result: SessionResult, corrupted):
    """Serialized adversary view for offline indistinguishability testing.

    ``corrupted`` is a set of party ids; it must be a strict subset of the
    parties and within the sharing scheme's privacy threshold.
    """
    cfg = result.config
    corrupted = sorted(set(corrupted))
    if len(corrupted) >= cfg.parties:
        raise MonitorError("corrupted set must be a strict subset of the parties")
    if len(corrupted) > cfg.threshold:
        raise MonitorError(f"corrupted set exceeds the scheme threshold t={cfg.threshold}")
    if any(not 1 <= p <= cfg.parties for p in corrupted):
        raise MonitorError("corrupted set names an unknown party")
    if not result.views or all(not v.received and not v.inputs for v in result.views):
        raise MonitorError("session was run without view recording")
    view = {}
    for p in corrupted:
        for key, value in result.views[p - 1].coordinates().items():
            view[f"P{p}.{key}"] = value
    view["flags"] = tuple(result.flags)
    return view


def collect_metrics(result: SessionResult, scenario: str = "", size: int = 0) -> dict:
    """One report row: per-iteration means plus material and traffic totals."""
    n = max(1, result.rounds_executed)
    rep = ledger_report(result.ledgers, scenario, size,
                        compute_s=sum(result.compute_times) / n,
                        total_s=sum(result.round_times) / n)
    rep["rounds"] = result.rounds_executed
    rep["bytes_sent"] = rep["bytes_sent"] + result.system_bytes
    return rep


# ---------------------------------------------------------------------------
# TCP transport: the same party logic over sockets


def _party_port(cfg: SessionConfig, party: int) -> int:
    return cfg.base_port + party


def _send(sock, round_, tag, values, octets):
    sock.sendall(wire.encode_message(round_, tag, values, octets))


class _PeerLink:
    """One party's socket to a peer, with per-sender round monotonicity."""

    def __init__(self, sock):
        self.sock = sock
        self.last_round = 0

    def recv(self, octets):
        round_, tag, values = wire.decode_message(wire.read_frame(self.sock), octets)
        if tag == wire.ABORT:
            raise ProtocolError("peer aborted")
        if round_ < self.last_round:
            raise ProtocolError(f"round counter went backwards: {round_} < {self.last_round}")
        self.last_round = round_
        return round_, tag, values


def _connect_mesh(cfg: SessionConfig, party: int):
    """Full pairwise mesh: lower ids listen, higher ids dial.

    Inbound connections (higher-id peers plus the System, hello byte 0)
    can arrive in any order, so they are classified by their hello byte.
    """
    links = {}
    system_link = None
    server = socket.create_server((cfg.host, _party_port(cfg, party)))
    server.settimeout(cfg.timeout)
    try:
        expected_inbound = (cfg.parties - party) + 1
        for _ in range(expected_inbound):
            conn, _ = server.accept()
            conn.settimeout(cfg.timeout)
            hello = conn.recv(1)
            if not hello:
                raise ProtocolError("empty hello")
            if hello[0] == 0:
                system_link = _PeerLink(conn)
            else:
                links[hello[0]] = _PeerLink(conn)
        for peer in range(1, party):
            s = _dial(cfg, _party_port(cfg, peer))
            s.sendall(bytes([party]))
            links[peer] = _PeerLink(s)
        if system_link is None or len(links) != cfg.parties - 1:
            raise ProtocolError("mesh setup incomplete")
        return links, system_link
    finally:
        server.close()


def _dial(cfg: SessionConfig, port: int):
    deadline = time.monotonic() + cfg.timeout
    while True:
        try:
            s = socket.create_connection((cfg.host, port), timeout=cfg.timeout)
            s.settimeout(cfg.timeout)
            return s
        except OSError:
            if time.monotonic() > deadline:
                raise
            time.sleep(0.05)


def run_party_tcp(cfg: SessionConfig, party: int, material_queue=None) -> dict:
    """One monitor party over TCP; blocks until the session ends.

    Preprocessing material is taken from ``material_queue`` (a
    MaterialQueue, e.g. loaded from a dealer file); omitting it requires
    the local test shortcut where the dealer seed is shared.
    """
    arith, boolean = cfg.make_schemes()
    if material_queue is None:
        raise MonitorError("TCP parties need pre-distributed material (run the dealer first)")
    runtime = PartyRuntime(cfg, party, arith, boolean, material_queue)
    links, system_link = _connect_mesh(cfg, party)
    peers = sorted(links)
    flags = []
    octets_a = cfg.modulus.octets
    try:
        while True:
            round_, tag, values = system_link.recv(octets_a)
            if tag == wire.SYNC:
                break
            if tag != wire.OBS_SHARE:
                raise ProtocolError(f"unexpected tag {wire.TAG_NAMES.get(tag, tag)} from System")
            obs_shares = _decode_obs(cfg, arith, boolean, runtime.party,
                                     system_link, round_, values)
            gen = runtime.round_gen(round_, obs_shares)
            try:
                request = gen.send(None)
                while True:
                    octets = request.octets
                    tag_out = _KIND_TAG[request.kind]
                    for peer in peers:
                        _send(links[peer].sock, round_, tag_out, request.payload, octets)
                    inbox = [None] * cfg.parties
                    inbox[party - 1] = request.payload
                    for peer in peers:
                        r_round, r_tag, r_values = links[peer].recv(octets)
                        if r_round != round_ or r_tag != tag_out:
                            raise ProtocolError(
                                f"desynchronized: peer {peer} sent round {r_round} tag {r_tag}")
                        inbox[peer - 1] = r_values
                    request = gen.send(inbox)
            except StopIteration as stop:
                flag = stop.value
            flags.append(flag)
            _send(system_link.sock, round_, wire.FLAG_SHARE, [flag], 1)
            if flag and cfg.stop_on_violation:
                break
    except Exception:
        for peer in peers:
            try:
                _send(links[peer].sock, 0, wire.ABORT, [], 1)
            except OSError:
                pass
        raise
    finally:
        for link in links.values():
            link.sock.close()
        system_link.sock.close()
    return {"party": party, "flags": flags, "ledger": runtime.ctx.ledger}


def _decode_obs(cfg, arith, boolean, party, system_link, round_, first_values):
    """Rebuild this party's observation share map from OBS_SHARE payloads.

    The System sends the arithmetic components first (if any), then the
    Boolean components in a second message.
    """
    program = cfg.program
    arith_regs = [r for r in program.obs_regs if program.reg_types[r] is SType.ARITH]
    bool_regs = [r for r in program.obs_regs if program.reg_types[r] is SType.BOOL]
    obs_shares = {}
    values = first_values
    if arith_regs:
        if len(values) != len(arith_regs):
            raise ProtocolError("OBS_SHARE arity mismatch (arith)")
        for reg, v in zip(arith_regs, values):
            obs_shares[reg] = _typed(arith, party, v)
        if bool_regs:
            r2, tag2, values = system_link.recv(1)
            if tag2 != wire.OBS_SHARE or r2 != round_:
                raise ProtocolError("expected the Boolean OBS_SHARE message")
    if bool_regs:
        if len(values) != len(bool_regs):
            raise ProtocolError("OBS_SHARE arity mismatch (bool)")
        for reg, v in zip(bool_regs, values):
            obs_shares[reg] = _typed(boolean, party, v)
    return obs_shares


def _typed(scheme, party, raw):
    return TypedShare(party, Element(raw % scheme.modulus.value, scheme.modulus),
                      scheme.stype, scheme)


def run_system_tcp(cfg: SessionConfig, trace) -> list:
    """The System client over TCP; returns the flag sequence."""
    arith, boolean = cfg.make_schemes()
    _, system_rng = cfg.derive_rngs()
    client = SystemClient(cfg, arith, boolean, system_rng)
    socks = []
    links = []
    octets_a = cfg.modulus.octets
    program = cfg.program
    arith_regs = [r for r in program.obs_regs if program.reg_types[r] is SType.ARITH]
    bool_regs = [r for r in program.obs_regs if program.reg_types[r] is SType.BOOL]
    try:
        for p in range(1, cfg.parties + 1):
            s = _dial(cfg, _party_port(cfg, p))
            s.sendall(bytes([0]))
            socks.append(s)
            links.append(_PeerLink(s))
        flags = []
        last_round = 0
        for t, obs in enumerate(trace, start=1):
            if cfg.rounds and t > cfg.rounds:
                break
            per_party = client.share_observations(obs)
            for p, s in enumerate(socks, start=1):
                shares = per_party[p - 1]
                if arith_regs:
                    _send(s, t, wire.OBS_SHARE,
                          [shares[r].value.value for r in arith_regs], octets_a)
                if bool_regs:
                    _send(s, t, wire.OBS_SHARE,
                          [shares[r].value.value for r in bool_regs], 1)
            round_flags = []
            for link in links:
                r_round, r_tag, r_values = link.recv(1)
                if r_tag != wire.FLAG_SHARE or r_round != t or len(r_values) != 1:
                    raise ProtocolError("expected a flag message")
                round_flags.append(r_values[0])
            flag = client.receive_flag(t, round_flags)
            flags.append(flag)
            last_round = t
            if flag and cfg.stop_on_violation:
                return flags
        for s in socks:
            _send(s, last_round + 1, wire.SYNC, [], 1)
        return flags
    finally:
        for s in socks:
            s.close()
