"""Semi-honest trusted dealer for correlated preprocessing material.

The dealer runs offline (or streams concurrently) and issues Beaver
triples, bit triples, daBits and edaBits as full k-party share vectors.
The runtime slices them into per-party queues; each party consumes its
slice exactly once.  A :class:`ResourceLedger` tracks consumption and
traffic for the resource-accounting reports.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .algebra import BIT, Element, Modulus, decode_element
from .errors import MaterialError, SchemeError
from .sharing import BooleanScheme, ShareVector, SType, TypedShare

# file format magic for persisted material
_MAGIC = b"MPCMAT1\n"


@dataclass
class BeaverTriple:
    """Sharings a, b, c with c = a*b and a, b uniform."""

    a: ShareVector
    b: ShareVector
    c: ShareVector


@dataclass
class BitTriple:
    """Boolean sharings a, b, c with c = a AND b."""

    a: ShareVector
    b: ShareVector
    c: ShareVector


@dataclass
class DaBit:
    """One random bit shared in both domains: arithmetic and Boolean."""

    b_arith: ShareVector
    b_bool: ShareVector


@dataclass
class EdaBit:
    """Random value r with arithmetic sharing plus Boolean sharings of its bits.

    ``r_bits`` is least-significant first and composes to r: r = sum(b_i 2^i).
    """

    width: int
    r_arith: ShareVector
    r_bits: list  # list[ShareVector] over BooleanXor


class Dealer:
    """Generates material for one (arithmetic scheme, Boolean scheme) pair."""

    def __init__(self, arith_scheme, bool_scheme: BooleanScheme, rng):
        if arith_scheme.stype is not SType.ARITH:
            raise SchemeError("dealer needs an arithmetic scheme for triples")
        if arith_scheme.parties != bool_scheme.parties:
            raise SchemeError("schemes must have the same party count")
        self.arith = arith_scheme
        self.boolean = bool_scheme
        self.rng = rng

    def issue_triples(self, n: int):
        m = self.arith.modulus
        out = []
        for _ in range(n):
            a = self.rng.randrange(m.value)
            b = self.rng.randrange(m.value)
            out.append(BeaverTriple(
                self.arith.share(Element(a, m), self.rng),
                self.arith.share(Element(b, m), self.rng),
                self.arith.share(Element(a * b % m.value, m), self.rng),
            ))
        return out

    def issue_bit_triples(self, n: int):
        out = []
        for _ in range(n):
            a = self.rng.randrange(2)
            b = self.rng.randrange(2)
            out.append(BitTriple(
                self.boolean.share(Element(a, BIT), self.rng),
                self.boolean.share(Element(b, BIT), self.rng),
                self.boolean.share(Element(a & b, BIT), self.rng),
            ))
        return out

    def issue_dabits(self, n: int):
        m = self.arith.modulus
        out = []
        for _ in range(n):
            b = self.rng.randrange(2)
            out.append(DaBit(
                self.arith.share(Element(b, m), self.rng),
                self.boolean.share(Element(b, BIT), self.rng),
            ))
        return out

    def issue_edabits(self, n: int, width: int):
        m = self.arith.modulus
        self._check_edabit_width(width)
        out = []
        for _ in range(n):
            r = self.rng.randrange(1 << width)
            bits = [self.boolean.share(Element((r >> i) & 1, BIT), self.rng)
                    for i in range(width)]
            out.append(EdaBit(width, self.arith.share(Element(r, m), self.rng), bits))
        return out

    def _check_edabit_width(self, width: int):
        m = self.arith.modulus
        if width < 1:
            raise MaterialError("edaBit width must be positive")
        if m.is_prime_field:
            if (1 << width) >= m.value:
                raise MaterialError(f"edaBit width {width} too large for {m}")
        elif width > m.width:
            raise MaterialError(f"edaBit width {width} exceeds ring width {m.width}")


# ---------------------------------------------------------------------------
# Per-party material


class _Item:
    """A single party's slice of one correlation; consumable exactly once."""

    __slots__ = ("payload", "_consumed")

    def __init__(self, payload):
        self.payload = payload
        self._consumed = False

    def consume(self):
        if self._consumed:
            raise MaterialError("preprocessing item consumed twice")
        self._consumed = True
        return self.payload


def _slice_triple(t, party, scheme):
    return (t.a.typed(party), t.b.typed(party), t.c.typed(party))


def _slice_dabit(d, party, scheme):
    return (d.b_arith.typed(party), d.b_bool.typed(party))


def _slice_edabit(e, party, scheme):
    return (e.r_arith.typed(party), [b.typed(party) for b in e.r_bits])


class MaterialQueue:
    """One party's stock of preprocessing material.

    Queues may be bound to a dealer-backed streamer that refills them in
    batches; without a streamer (e.g. file-loaded stock) exhaustion is an
    error.
    """

    def __init__(self, party: int):
        self.party = party
        self._queues = {}          # key -> list[_Item] (consumed from the end)
        self._streamers = {}       # key -> (refill_callable, batch_size)

    @staticmethod
    def _key(kind, width=None):
        return (kind, width)

    def put(self, kind, items, width=None):
        self._queues.setdefault(self._key(kind, width), []).extend(
            _Item(i) for i in reversed(items))

    def bind_streamer(self, kind, refill, batch: int, width=None):
        self._streamers[self._key(kind, width)] = (refill, max(1, batch))

    def take(self, kind, width=None):
        key = self._key(kind, width)
        q = self._queues.get(key)
        if not q:
            st = self._streamers.get(key)
            if st is None:
                raise MaterialError(f"out of {kind}" + (f"(width={width})" if width else ""))
            refill, batch = st
            self.put(kind, refill(batch, width), width)
            q = self._queues[key]
        return q.pop().consume()

    def counts(self):
        return {k: len(v) for k, v in self._queues.items() if v}


def split_by_party(items, kind, parties, scheme=None):
    """Slice dealer output into per-party payload lists."""
    slicer = {"triple": _slice_triple, "bit_triple": _slice_triple,
              "dabit": _slice_dabit, "edabit": _slice_edabit}[kind]
    return [[slicer(it, p, scheme) for it in items] for p in range(1, parties + 1)]


def stock_parties(queues, dealer: Dealer, counts, slack: float = 0.10):
    """Issue ``counts`` of each kind (plus slack) and distribute to queues.

    ``counts`` maps "triples"/"bit_triples"/"dabits" to ints and "edabits"
    to a {width: count} dict, mirroring CostEstimate.
    """
    k = dealer.arith.parties

    def pad(n):
        return n + max(1, int(n * slack)) if n else 0

    n = pad(counts.get("triples", 0))
    if n:
        per = split_by_party(dealer.issue_triples(n), "triple", k)
        for q, items in zip(queues, per):
            q.put("triple", items)
    n = pad(counts.get("bit_triples", 0))
    if n:
        per = split_by_party(dealer.issue_bit_triples(n), "bit_triple", k)
        for q, items in zip(queues, per):
            q.put("bit_triple", items)
    n = pad(counts.get("dabits", 0))
    if n:
        per = split_by_party(dealer.issue_dabits(n), "dabit", k)
        for q, items in zip(queues, per):
            q.put("dabit", items)
    for width, cnt in counts.get("edabits", {}).items():
        n = pad(cnt)
        if n:
            per = split_by_party(dealer.issue_edabits(n, width), "edabit", k)
            for q, items in zip(queues, per):
                q.put("edabit", items, width=width)


def bind_streaming_dealer(queues, dealer: Dealer, counts, slack: float = 0.10):
    """Attach refill hooks so queues restock themselves in static-size batches."""
    k = dealer.arith.parties

    def mk(kind, issue):
        def refill_factory(q_index):
            def refill(batch, width):
                items = issue(batch) if width is None else issue(batch, width)
                return split_by_party(items, kind, k)[q_index]
            return refill
        return refill_factory

    factories = {
        "triple": mk("triple", dealer.issue_triples),
        "bit_triple": mk("bit_triple", dealer.issue_bit_triples),
        "dabit": mk("dabit", dealer.issue_dabits),
        "edabit": mk("edabit", dealer.issue_edabits),
    }
    batches = {
        "triple": counts.get("triples", 0),
        "bit_triple": counts.get("bit_triples", 0),
        "dabit": counts.get("dabits", 0),
    }
    for i, q in enumerate(queues):
        for kind, n in batches.items():
            q.bind_streamer(kind, factories[kind](i), max(1, int(n * (1 + slack))))
        for width, cnt in counts.get("edabits", {}).items():
            q.bind_streamer("edabit", factories["edabit"](i),
                            max(1, int(cnt * (1 + slack))), width=width)


# ---------------------------------------------------------------------------
# Resource ledger

LEDGER_CSV_COLUMNS = ("scenario", "size", "triples", "bit_triples", "dabits",
                      "bytes_sent", "compute_s", "total_s")


@dataclass
class ResourceLedger:
    """Monotone consumption counters plus per-party traffic."""

    triples: int = 0
    bit_triples: int = 0
    dabits: int = 0
    edabits: int = 0
    exchanges: int = 0
    bytes_sent: int = 0

    def snapshot(self) -> dict:
        return {"triples": self.triples, "bit_triples": self.bit_triples,
                "dabits": self.dabits, "edabits": self.edabits,
                "exchanges": self.exchanges, "bytes_sent": self.bytes_sent}

    def delta_since(self, snap: dict) -> dict:
        now = self.snapshot()
        return {k: now[k] - snap[k] for k in now}


def ledger_report(ledgers, scenario: str = "", size: int = 0,
                  compute_s: float = 0.0, total_s: float = 0.0) -> dict:
    """Aggregate per-party ledgers into one report record.

    Material counters are per party and identical across parties (the
    protocol is symmetric), so the maximum is reported; traffic is summed.
    """
    report = {
        "scenario": scenario,
        "size": size,
        "triples": max((l.triples for l in ledgers), default=0),
        "bit_triples": max((l.bit_triples for l in ledgers), default=0),
        "dabits": max((l.dabits for l in ledgers), default=0),
        "edabits": max((l.edabits for l in ledgers), default=0),
        "bytes_sent": sum(l.bytes_sent for l in ledgers),
        "compute_s": compute_s,
        "total_s": total_s,
    }
    return report


def report_csv_row(report: dict) -> str:
    vals = []
    for col in LEDGER_CSV_COLUMNS:
        v = report.get(col, 0)
        vals.append(f"{v:.6f}" if isinstance(v, float) else str(v))
    return ",".join(vals)


def report_csv_header() -> str:
    return ",".join(LEDGER_CSV_COLUMNS)


# ---------------------------------------------------------------------------
# Optional material persistence

def _encode_vec(sv: ShareVector) -> bytes:
    return b"".join(s.encode() for s in sv.shares)


def _decode_vec(data: bytes, scheme, offset: int):
    octets = scheme.modulus.octets
    shares = []
    for i in range(scheme.parties):
        shares.append(decode_element(data[offset:offset + octets], scheme.modulus))
        offset += octets
    return ShareVector(scheme, shares), offset


def save_material(path, arith_scheme, triples=(), bit_triples=(), dabits=(), edabits=()):
    """Persist dealer output: JSON header line, then items in wire encoding."""
    m = arith_scheme.modulus
    header = {
        "scheme": type(arith_scheme).__name__,
        "modulus": {"kind": "prime" if m.is_prime_field else "pow2",
                    "value": m.value if m.is_prime_field else m.width},
        "parties": arith_scheme.parties,
        "threshold": getattr(arith_scheme, "threshold", arith_scheme.parties - 1),
        "counts": {"triples": len(triples), "bit_triples": len(bit_triples),
                   "dabits": len(dabits), "edabits": len(edabits)},
    }
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(json.dumps(header).encode() + b"\n")
        for t in triples:
            f.write(_encode_vec(t.a) + _encode_vec(t.b) + _encode_vec(t.c))
        for t in bit_triples:
            f.write(_encode_vec(t.a) + _encode_vec(t.b) + _encode_vec(t.c))
        for d in dabits:
            f.write(_encode_vec(d.b_arith) + _encode_vec(d.b_bool))
        for e in edabits:
            f.write(e.width.to_bytes(2, "big"))
            f.write(_encode_vec(e.r_arith))
            for b in e.r_bits:
                f.write(_encode_vec(b))


def save_party_material(path, party: int, arith_scheme, bool_scheme,
                        triples=(), bit_triples=(), dabits=(), edabits=()):
    """Persist one party's slice of dealer output.

    Unlike :func:`save_material` (the dealer's own archive), a party file
    contains only that party's share of every item, so distributing the
    files leaks nothing beyond the party's legitimate view.
    """
    m = arith_scheme.modulus
    octets = m.octets
    header = {
        "party": party,
        "modulus": {"kind": "prime" if m.is_prime_field else "pow2",
                    "value": m.value if m.is_prime_field else m.width},
        "counts": {"triples": len(triples), "bit_triples": len(bit_triples),
                   "dabits": len(dabits), "edabits": len(edabits)},
    }

    def elem(sv):
        return sv.shares[party - 1].encode()

    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(json.dumps(header).encode() + b"\n")
        for t in triples:
            f.write(elem(t.a) + elem(t.b) + elem(t.c))
        for t in bit_triples:
            f.write(elem(t.a) + elem(t.b) + elem(t.c))
        for d in dabits:
            f.write(elem(d.b_arith) + elem(d.b_bool))
        for e in edabits:
            f.write(e.width.to_bytes(2, "big"))
            f.write(elem(e.r_arith))
            f.write(bytes(b.shares[party - 1].value for b in e.r_bits))


def load_party_material(path, arith_scheme, bool_scheme) -> "MaterialQueue":
    """Load one party's material file into a ready-to-consume queue."""
    with open(path, "rb") as f:
        if f.read(len(_MAGIC)) != _MAGIC:
            raise MaterialError("not a material file")
        header = json.loads(f.readline())
        data = f.read()
    mk = header["modulus"]
    want = (Modulus.prime(mk["value"]) if mk["kind"] == "prime"
            else Modulus.power_of_two(mk["value"]))
    if want != arith_scheme.modulus:
        raise MaterialError("modulus mismatch")
    party = header["party"]
    octets = arith_scheme.modulus.octets
    q = MaterialQueue(party)
    off = 0

    def arith_share():
        nonlocal off
        e = decode_element(data[off:off + octets], arith_scheme.modulus)
        off += octets
        return TypedShare(party, e, SType.ARITH, arith_scheme)

    def bool_share():
        nonlocal off
        e = decode_element(data[off:off + 1], BIT)
        off += 1
        return TypedShare(party, e, SType.BOOL, bool_scheme)

    items = [arith_share() for _ in range(3 * header["counts"]["triples"])]
    q.put("triple", [tuple(items[i:i + 3]) for i in range(0, len(items), 3)])
    items = [bool_share() for _ in range(3 * header["counts"]["bit_triples"])]
    q.put("bit_triple", [tuple(items[i:i + 3]) for i in range(0, len(items), 3)])
    pairs = []
    for _ in range(header["counts"]["dabits"]):
        a = arith_share()
        b = bool_share()
        pairs.append((a, b))
    q.put("dabit", pairs)
    by_width = {}
    for _ in range(header["counts"]["edabits"]):
        w = int.from_bytes(data[off:off + 2], "big")
        off += 2
        r = arith_share()
        bits = []
        for i in range(w):
            bits.append(TypedShare(party, Element(data[off + i], BIT),
                                   SType.BOOL, bool_scheme))
        off += w
        by_width.setdefault(w, []).append((r, bits))
    for w, items in by_width.items():
        q.put("edabit", items, width=w)
    return q


def load_material(path, arith_scheme, bool_scheme):
    """Load persisted material; schemes must match the header."""
    with open(path, "rb") as f:
        magic = f.read(len(_MAGIC))
        if magic != _MAGIC:
            raise MaterialError("not a material file")
        header = json.loads(f.readline())
        data = f.read()
    if header["parties"] != arith_scheme.parties:
        raise MaterialError("party count mismatch")
    mk = header["modulus"]
    want = (Modulus.prime(mk["value"]) if mk["kind"] == "prime"
            else Modulus.power_of_two(mk["value"]))
    if want != arith_scheme.modulus:
        raise MaterialError("modulus mismatch")
    off = 0
    triples, bit_triples, dabits, edabits = [], [], [], []
    for _ in range(header["counts"]["triples"]):
        a, off = _decode_vec(data, arith_scheme, off)
        b, off = _decode_vec(data, arith_scheme, off)
        c, off = _decode_vec(data, arith_scheme, off)
        triples.append(BeaverTriple(a, b, c))
    for _ in range(header["counts"]["bit_triples"]):
        a, off = _decode_vec(data, bool_scheme, off)
        b, off = _decode_vec(data, bool_scheme, off)
        c, off = _decode_vec(data, bool_scheme, off)
        bit_triples.append(BitTriple(a, b, c))
    for _ in range(header["counts"]["dabits"]):
        a, off = _decode_vec(data, arith_scheme, off)
        b, off = _decode_vec(data, bool_scheme, off)
        dabits.append(DaBit(a, b))
    for _ in range(header["counts"]["edabits"]):
        w = int.from_bytes(data[off:off + 2], "big")
        off += 2
        r, off = _decode_vec(data, arith_scheme, off)
        bits = []
        for _ in range(w):
            b, off = _decode_vec(data, bool_scheme, off)
            bits.append(b)
        edabits.append(EdaBit(w, r, bits))
    return triples, bit_triples, dabits, edabits
