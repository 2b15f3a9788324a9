"""Interactive secure operations among the monitor parties.

Every interactive operation is a generator.  At each interaction point it
yields an :class:`Exchange` carrying this party's contribution and is
resumed with the list of all k parties' contributions (its own included,
indexed by party).  This makes the protocol code transport-agnostic: the
in-process lockstep pump and the TCP pump both drive the same generators.

Masked openings are the only values ever published by these operations:
Beaver's e = x-a and f = y-b, the mask sum c = z+r of a bit
decomposition, and the b XOR d masks of daBit conversion.  The final
violation flag is opened unmasked, and nothing else is.
"""

from __future__ import annotations

from .algebra import BIT, Element
from .errors import MaterialError, ProtocolError, SchemeError
from .sharing import (BooleanScheme, SType, TypedShare, local_add,
                      local_add_const, local_scale, local_sub,
                      local_xor_const, public_share)

# statistical masking slack (bits) for decomposition over prime fields;
# power-of-two rings mask the full ring and hide perfectly
MASK_SLACK_BITS = 40


class Exchange:
    """One synchronized all-to-all step: every party broadcasts ``payload``."""

    __slots__ = ("kind", "label", "round", "payload", "octets")

    # kinds map onto wire tags: masked openings and the flag opening
    MASKED = "masked"
    FLAG = "flag"

    def __init__(self, kind, label, round_, payload, octets):
        self.kind = kind
        self.label = label
        self.round = round_
        self.payload = payload
        self.octets = octets


class PartyView:
    """Everything one party sees: inputs, material, received messages, opens.

    Used by the transcript probe for statistical indistinguishability
    tests; recording can be disabled for benchmarks.
    """

    __slots__ = ("inputs", "material", "received", "opens", "flags")

    def __init__(self):
        self.inputs = []    # (round, label, value) share values received as inputs
        self.material = []  # (round, kind, values...) own preprocessing shares
        self.received = []  # (round, label, sender, values) peer exchange payloads
        self.opens = []     # (round, label, masked, values) public results
        self.flags = []     # (round, bit)

    def coordinates(self):
        """Flatten received-message elements into labelled scalar coordinates,
        the projections used for TV-distance testing."""
        out = {}
        for rnd, label, sender, values in self.received:
            for i, v in enumerate(values):
                out[f"r{rnd}.{label}.p{sender}.{i}"] = v
        for rnd, label, v in self.inputs:
            out[f"r{rnd}.in.{label}"] = v
        for rnd, kind, values in self.material:
            for i, v in enumerate(values):
                out[f"r{rnd}.mat.{kind}.{i}"] = v
        return out


class PartyContext:
    """One party's handles: schemes, material, ledger, transcript."""

    __slots__ = ("party", "nparties", "arith", "boolean", "material", "ledger",
                 "view", "round", "record_view", "_label_seq")

    def __init__(self, party, arith_scheme, bool_scheme, material, ledger,
                 record_view=True):
        self.party = party
        self.nparties = arith_scheme.parties
        self.arith = arith_scheme
        self.boolean = bool_scheme
        self.material = material
        self.ledger = ledger
        self.view = PartyView()
        self.round = 0
        self.record_view = record_view
        self._label_seq = 0

    def fresh_label(self, stem: str) -> str:
        self._label_seq += 1
        return f"{stem}.{self._label_seq}"

    # material accessors: consumption is counted at the moment of use

    def take_triple(self):
        t = self.material.take("triple")
        self.ledger.triples += 1
        if self.record_view:
            self.view.material.append(
                (self.round, "triple", (t[0].value.value, t[1].value.value, t[2].value.value)))
        return t

    def take_bit_triples(self, n):
        out = [self.material.take("bit_triple") for _ in range(n)]
        self.ledger.bit_triples += n
        return out

    def take_dabits(self, n):
        out = [self.material.take("dabit") for _ in range(n)]
        self.ledger.dabits += n
        return out

    def take_edabit(self, width):
        e = self.material.take("edabit", width=width)
        self.ledger.edabits += 1
        return e


def mask_width(modulus, n: int) -> int:
    """Width of the edaBit mask used to open a value below 2^n.

    Power-of-two rings mask across the whole ring, so the opened sum is
    uniform (perfect hiding).  Prime fields cannot wrap, so the mask gets
    up to MASK_SLACK_BITS of statistical slack subject to 2^n + 2^m <= p;
    tiny fields degrade to m = n.
    """
    if not modulus.is_prime_field:
        if n > modulus.width:
            raise SchemeError(f"width {n} exceeds ring width {modulus.width}")
        return modulus.width
    room = modulus.value - (1 << n)
    if room <= 0:
        raise SchemeError(f"width {n} too large for field {modulus}")
    m = min(n + 1 + MASK_SLACK_BITS, room.bit_length() - 1)
    if m < n:
        raise SchemeError(f"width {n} too large for field {modulus}")
    return m


def _exchange(ctx: PartyContext, kind, label, payload, octets):
    """Account one exchange and yield it; returns all parties' payloads."""
    ctx.ledger.exchanges += 1
    msg_bytes = 11 + len(payload) * octets  # 4B length + 4B round + 1B tag + 2B count
    ctx.ledger.bytes_sent += (ctx.nparties - 1) * msg_bytes
    inbox = yield Exchange(kind, label, ctx.round, payload, octets)
    if len(inbox) != ctx.nparties:
        raise ProtocolError(f"expected {ctx.nparties} contributions, got {len(inbox)}")
    if ctx.record_view:
        rec = ctx.view.received
        for sender, values in enumerate(inbox, start=1):
            if sender != ctx.party:
                rec.append((ctx.round, label, sender, tuple(values)))
    return inbox


def open_raw(ctx: PartyContext, scheme, values, label, masked: bool):
    """Jointly open shared values; returns the public ints.

    All parties must call with the same label in the same order; the
    transport layer enforces this in lockstep mode.
    """
    kind = Exchange.MASKED if masked else Exchange.FLAG
    inbox = yield from _exchange(ctx, kind, label, values, scheme.modulus.octets)
    out = []
    for pos in range(len(values)):
        out.append(scheme.reconstruct_raw([inbox[p][pos] for p in range(ctx.nparties)]))
    if ctx.record_view:
        ctx.view.opens.append((ctx.round, label, masked, tuple(out)))
    return out


def open_value(ctx: PartyContext, x: TypedShare, label=None, masked=False):
    """Open a single shared value to all parties."""
    label = label or ctx.fresh_label("open")
    vals = yield from open_raw(ctx, x.scheme, [x.value.value], label, masked)
    return Element(vals[0], x.scheme.modulus)


def beaver_mul(ctx: PartyContext, x: TypedShare, y: TypedShare) -> TypedShare:
    """Secure multiplication: z = c + e*b + f*a + e*f with e = x-a, f = y-b.

    Consumes one Beaver triple; one communication round (e and f are
    opened in the same message).
    """
    if x.stype is not SType.ARITH or y.stype is not SType.ARITH:
        raise SchemeError("beaver_mul needs arithmetic shares")
    a, b, c = ctx.take_triple()
    e_sh = local_sub(x, a)
    f_sh = local_sub(y, b)
    label = ctx.fresh_label("mul.ef")
    e, f = yield from open_raw(ctx, x.scheme, [e_sh.value.value, f_sh.value.value],
                               label, masked=True)
    m = x.scheme.modulus
    z = local_add(c, local_scale(b, Element(e, m)))
    z = local_add(z, local_scale(a, Element(f, m)))
    z = local_add_const(z, Element(e * f % m.value, m))
    return z


def bool_and_many(ctx: PartyContext, pairs, label=None):
    """AND of many Boolean share pairs; one round, one bit triple each."""
    if not pairs:
        return []
    label = label or ctx.fresh_label("and.ef")
    trips = ctx.take_bit_triples(len(pairs))
    payload = []
    for (x, y), (a, b, c) in zip(pairs, trips):
        payload.append(x.value.value ^ a.value.value)
        payload.append(y.value.value ^ b.value.value)
    opened = yield from open_raw(ctx, ctx.boolean, payload, label, masked=True)
    out = []
    for i, ((x, y), (a, b, c)) in enumerate(zip(pairs, trips)):
        e, f = opened[2 * i], opened[2 * i + 1]
        v = c.value.value
        if e:
            v ^= b.value.value
        if f:
            v ^= a.value.value
        z = TypedShare(ctx.party, Element(v, BIT), SType.BOOL, ctx.boolean)
        if e and f:
            z = local_xor_const(z, 1)
        out.append(z)
    return out


def bool_and(ctx: PartyContext, x: TypedShare, y: TypedShare) -> TypedShare:
    if x.stype is not SType.BOOL or y.stype is not SType.BOOL:
        raise SchemeError("bool_and needs Boolean shares")
    res = yield from bool_and_many(ctx, [(x, y)])
    return res[0]


def _zero_bit(ctx):
    return public_share(ctx.boolean, 0, ctx.party)


def _select_pub(ctx, share, bit):
    """share if public bit is 1 else a public zero share; local."""
    return share if bit else _zero_bit(ctx)


def _mask_and_open(ctx, x: TypedShare, n_eff: int):
    """Open c = x + r for an edaBit mask r; returns (c, low bit shares of r).

    The mask either covers the whole ring (perfect hiding) or carries
    statistical slack over a prime field; see :func:`mask_width`.
    """
    m = x.scheme.modulus
    width = mask_width(m, n_eff)
    r_arith, r_bits = ctx.take_edabit(width)
    c_sh = local_add(x, r_arith)
    label = ctx.fresh_label("dec.c")
    (c,) = yield from open_raw(ctx, x.scheme, [c_sh.value.value], label, masked=True)
    return c, r_bits


def _borrow_gp(ctx, c: int, r_bits, positions):
    """Generate/propagate pairs for the borrow chain of (c - r) per position.

    c is public, so g_i = ~c_i AND r_i and p_i = ~(c_i XOR r_i) are local.
    """
    gs, ps = [], []
    for i in positions:
        ci = (c >> i) & 1
        gs.append(_select_pub(ctx, r_bits[i], 1 - ci))
        ps.append(local_xor_const(r_bits[i], ci ^ 1))
    return gs, ps


def _combine_level(ctx, items, is_root):
    """Combine adjacent (g, p) pairs; one communication round per level.

    combine(lo, hi): g' = g_hi XOR (p_hi AND g_lo); p' = p_hi AND p_lo.
    The root combine skips p'.
    """
    nxt = []
    pairs = []
    slots = []
    for i in range(0, len(items) - 1, 2):
        (g_lo, p_lo), (g_hi, p_hi) = items[i], items[i + 1]
        pairs.append((p_hi, g_lo))
        if not is_root:
            pairs.append((p_hi, p_lo))
        slots.append((g_hi, p_hi, p_lo))
    ands = yield from bool_and_many(ctx, pairs)
    step = 1 if is_root else 2
    for j, (g_hi, p_hi, p_lo) in enumerate(slots):
        g = local_add(g_hi, ands[j * step])
        p = ands[j * step + 1] if not is_root else None
        nxt.append((g, p))
    if len(items) % 2:
        nxt.append(items[-1])
    return nxt


def _borrow_tree(ctx, gs, ps):
    """Final borrow out of the full position range; ceil(log2 n) rounds."""
    items = list(zip(gs, ps))
    while len(items) > 1:
        items = yield from _combine_level(ctx, items, is_root=(len(items) == 2))
    return items[0][0]


def _borrow_prefix(ctx, gs, ps):
    """Kogge-Stone: borrow out of positions [0..i] for every i."""
    n = len(gs)
    g = list(gs)
    p = list(ps)
    d = 1
    while d < n:
        last = d * 2 >= n
        pairs = []
        for i in range(d, n):
            pairs.append((p[i], g[i - d]))
            if not last:
                pairs.append((p[i], p[i - d]))
        ands = yield from bool_and_many(ctx, pairs)
        step = 1 if last else 2
        for j, i in enumerate(range(d, n)):
            g[i] = local_add(g[i], ands[j * step])
            if not last:
                p[i] = ands[j * step + 1]
        d *= 2
    return g


def _or_tree(ctx, bits):
    """OR of many Boolean shares via De Morgan; n-1 ANDs, log depth."""
    items = [local_xor_const(b, 1) for b in bits]  # work on complements
    while len(items) > 1:
        pairs = [(items[i], items[i + 1]) for i in range(0, len(items) - 1, 2)]
        ands = yield from bool_and_many(ctx, pairs)
        if len(items) % 2:
            ands.append(items[-1])
        items = ands
    return local_xor_const(items[0], 1)


def bit_decompose(ctx: PartyContext, x: TypedShare, n: int):
    """Boolean shares of the n-bit binary expansion of x, LSB first.

    Requires x < 2^n.  Opens the masked sum c = x + r, then computes
    x = c - r bit by bit: x_i = c_i XOR r_i XOR borrow_{i-1}, with the
    borrow chain evaluated by a log-depth prefix circuit.  Consumes one
    edaBit.
    """
    if x.stype is not SType.ARITH:
        raise SchemeError("bit_decompose needs an arithmetic share")
    if n < 1:
        raise SchemeError("width must be positive")
    c, r_bits = yield from _mask_and_open(ctx, x, n)
    bits = [local_xor_const(r_bits[0], c & 1)]
    if n == 1:
        return bits
    gs, ps = _borrow_gp(ctx, c, r_bits, range(n - 1))
    borrows = yield from _borrow_prefix(ctx, gs, ps)
    for i in range(1, n):
        t = local_xor_const(r_bits[i], (c >> i) & 1)
        bits.append(local_add(t, borrows[i - 1]))
    return bits


def bits_to_arith(ctx: PartyContext, bits) -> TypedShare:
    """Arithmetic share of sum(b_i * 2^i); one daBit per bit, one round."""
    if not bits:
        raise SchemeError("empty bit vector")
    dabits = ctx.take_dabits(len(bits))
    payload = [b.value.value ^ d[1].value.value for b, d in zip(bits, dabits)]
    label = ctx.fresh_label("b2a.e")
    opened = yield from open_raw(ctx, ctx.boolean, payload, label, masked=True)
    m = ctx.arith.modulus
    acc = None
    for i, (e, (d_arith, _)) in enumerate(zip(opened, dabits)):
        # b = e + (1-2e)*d, all public scalars
        if e:
            term = local_add_const(local_scale(d_arith, Element(m.value - 1, m)),
                                   Element(1, m))
        else:
            term = d_arith
        term = local_scale(term, Element((1 << i) % m.value, m))
        acc = term if acc is None else local_add(acc, term)
    return acc


def _difference_point(ctx, x, y, n):
    """z = 2^n + x - y, a nonnegative integer below 2^{n+1} whose bit n
    is [x >= y] and whose low n bits are (x - y) mod 2^n."""
    m = x.scheme.modulus
    if m.is_prime_field:
        if (1 << (n + 1)) >= m.value:
            raise SchemeError(f"width {n} too large for field {m}")
    elif n + 1 > m.width:
        raise SchemeError(f"width {n} needs ring width >= {n + 1}")
    z = local_sub(x, y)
    return local_add_const(z, Element((1 << n) % m.value, m))


def secure_lt(ctx: PartyContext, x: TypedShare, y: TypedShare, n: int) -> TypedShare:
    """Boolean share of [x < y] for values below 2^n (1 = true).

    Decomposes the single difference point z = 2^n + x - y and negates
    its bit n, so the whole comparison runs in 1 + ceil(log2 n) rounds
    and consumes one edaBit plus the borrow tree's AND gates.
    """
    if n < 1:
        raise SchemeError("width must be positive")
    z = _difference_point(ctx, x, y, n)
    c, r_bits = yield from _mask_and_open(ctx, z, n + 1)
    if n == 1:
        # borrow out of position 0 is g_0, which is local
        gs, _ = _borrow_gp(ctx, c, r_bits, [0])
        borrow = gs[0]
    else:
        gs, ps = _borrow_gp(ctx, c, r_bits, range(n))
        borrow = yield from _borrow_tree(ctx, gs, ps)
    bit_n = local_xor_const(r_bits[n], (c >> n) & 1)
    bit_n = local_add(bit_n, borrow)
    return local_xor_const(bit_n, 1)


def secure_eq(ctx: PartyContext, x: TypedShare, y: TypedShare, n: int) -> TypedShare:
    """Boolean share of [x = y] for values below 2^n (1 = equal).

    x = y iff the low n bits of z = 2^n + x - y are all zero, i.e. iff
    c and r agree bitwise mod 2^n after the masked opening; the bitwise
    XORs are local and the OR-tree output is negated.
    """
    if n < 1:
        raise SchemeError("width must be positive")
    z = _difference_point(ctx, x, y, n)
    c, r_bits = yield from _mask_and_open(ctx, z, n + 1)
    ds = [local_xor_const(r_bits[i], (c >> i) & 1) for i in range(n)]
    if n == 1:
        return local_xor_const(ds[0], 1)
    or_out = yield from _or_tree(ctx, ds)
    return local_xor_const(or_out, 1)


# ---------------------------------------------------------------------------
# Static circuit-size mirrors.  These must track the circuits above exactly;
# the cost estimator and the material provisioner rely on them, and the test
# suite checks them against observed ledger deltas.

def tree_levels(n: int) -> int:
    lv = 0
    while n > 1:
        n = (n + 1) // 2
        lv += 1
    return lv


def borrow_tree_ands(n: int) -> int:
    c = 0
    while n > 1:
        pairs = n // 2
        c += pairs if n == 2 else 2 * pairs
        n = pairs + (n % 2)
    return c


def prefix_ands(n: int) -> int:
    c = 0
    d = 1
    while d < n:
        c += n - d
        if d * 2 < n:
            c += n - d
        d *= 2
    return c


def prefix_levels(n: int) -> int:
    lv = 0
    d = 1
    while d < n:
        lv += 1
        d *= 2
    return lv


def or_tree_ands(n: int) -> int:
    return n - 1


def lt_cost(modulus, n: int):
    """(bit_triple ANDs, edabit widths, exchange rounds) of one secure_lt."""
    ands = 0 if n == 1 else borrow_tree_ands(n)
    rounds = 1 + (0 if n == 1 else tree_levels(n))
    return ands, [mask_width(modulus, n + 1)], rounds


def eq_cost(modulus, n: int):
    ands = 0 if n == 1 else or_tree_ands(n)
    rounds = 1 + (0 if n == 1 else tree_levels(n))
    return ands, [mask_width(modulus, n + 1)], rounds


def decompose_cost(modulus, n: int):
    ands = 0 if n == 1 else prefix_ands(n - 1)
    rounds = 1 + (0 if n == 1 else prefix_levels(n - 1))
    return ands, [mask_width(modulus, n)], rounds


# ---------------------------------------------------------------------------
# Lockstep pump: run k party generators against each other in-process.

def run_lockstep(generators, on_exchange=None):
    """Drive k protocol generators to completion, delivering exchanges.

    Enforces that all parties request the same (kind, label, round) at
    every step -- the in-process analogue of the wire-level consistency
    checks.  ``on_exchange``, if given, is called once per delivered
    exchange (the channel layer's own round counter).  Returns the
    generators' results in party order.
    """
    k = len(generators)
    results = [None] * k
    requests = []
    live = []
    for i, g in enumerate(generators):
        try:
            requests.append(g.send(None))
            live.append(True)
        except StopIteration as stop:
            results[i] = stop.value
            requests.append(None)
            live.append(False)
    while any(live):
        if not all(live):
            raise ProtocolError("parties desynchronized: some finished early")
        first = requests[0]
        for r in requests[1:]:
            if (r.kind, r.label, r.round) != (first.kind, first.label, first.round):
                raise ProtocolError(
                    f"label mismatch across parties: {(first.kind, first.label, first.round)}"
                    f" vs {(r.kind, r.label, r.round)}")
            if len(r.payload) != len(first.payload):
                raise ProtocolError("payload size mismatch across parties")
        if on_exchange is not None:
            on_exchange(first)
        inbox = [r.payload for r in requests]
        for i, g in enumerate(generators):
            try:
                requests[i] = g.send(inbox)
            except StopIteration as stop:
                results[i] = stop.value
                live[i] = False
    return results
