"""Tests for preprocessing material generation and the resource ledger."""

import random

import pytest

from mpcmon.algebra import BIT, Element, Modulus
from mpcmon.dealer import (Dealer, MaterialQueue, ResourceLedger, _Item,
                           ledger_report, load_material, load_party_material,
                           report_csv_header, report_csv_row, save_material,
                           save_party_material, split_by_party, stock_parties)
from mpcmon.errors import MaterialError, SchemeError
from mpcmon.sharing import AdditiveScheme, BooleanScheme, ShamirScheme, ShareVector

F7 = Modulus.prime(7)
F17 = Modulus.prime(17)
Z64 = Modulus.power_of_two(6)


def make_dealer(seed=0, arith=None):
    arith = arith or ShamirScheme(F17, 1, 3)
    return Dealer(arith, BooleanScheme(3), random.Random(seed))


class TestDefiningEquations:
    def test_triples_1000(self):
        d = make_dealer(1)
        for t in d.issue_triples(1000):
            a, b, c = t.a.reconstruct(), t.b.reconstruct(), t.c.reconstruct()
            assert c.value == a.value * b.value % 17

    def test_forced_triple_product(self):
        # a = 2, b = 5 forces c = 3 over F_7 (2*5 mod 7)
        scheme = ShamirScheme(F7, 1, 3)
        rng = random.Random(3)
        from mpcmon.dealer import BeaverTriple
        t = BeaverTriple(scheme.share(F7.element(2), rng),
                         scheme.share(F7.element(5), rng),
                         scheme.share(F7.element(2 * 5 % 7), rng))
        assert t.c.reconstruct().value == 3

    def test_bit_triples_1000(self):
        d = make_dealer(2)
        for t in d.issue_bit_triples(1000):
            a, b, c = (t.a.reconstruct().value, t.b.reconstruct().value,
                       t.c.reconstruct().value)
            assert c == (a & b)

    def test_dabits_1000(self):
        d = make_dealer(3)
        for t in d.issue_dabits(1000):
            a, b = t.b_arith.reconstruct().value, t.b_bool.reconstruct().value
            assert a == b and a in (0, 1)

    def test_edabits_1000(self):
        d = make_dealer(4)
        for e in d.issue_edabits(1000, 4):
            r = e.r_arith.reconstruct().value
            bits = [b.reconstruct().value for b in e.r_bits]
            assert sum(bit << i for i, bit in enumerate(bits)) == r

    def test_edabit_width3_composition(self):
        # bits (1,0,1) compose to 5
        assert sum(b << i for i, b in enumerate((1, 0, 1))) == 5
        d = make_dealer(5)
        (e,) = d.issue_edabits(1, 3)
        assert len(e.r_bits) == 3

    def test_edabit_width1_is_dabit_shaped(self):
        d = make_dealer(6)
        (e,) = d.issue_edabits(1, 1)
        assert e.r_arith.reconstruct().value == e.r_bits[0].reconstruct().value

    def test_issue_zero_is_empty(self):
        d = make_dealer(7)
        assert d.issue_triples(0) == []
        assert d.issue_edabits(0, 4) == []

    def test_width_limits(self):
        d = make_dealer(8)
        with pytest.raises(MaterialError):
            d.issue_edabits(1, 5)  # 2^5 > 17
        ring_dealer = Dealer(AdditiveScheme(Z64, 3), BooleanScheme(3), random.Random(0))
        with pytest.raises(MaterialError):
            ring_dealer.issue_edabits(1, 7)
        ring_dealer.issue_edabits(1, 6)  # full ring width is fine

    def test_dealer_needs_arith_scheme(self):
        with pytest.raises(SchemeError):
            Dealer(BooleanScheme(3), BooleanScheme(3), random.Random(0))


class TestUniformity:
    def test_triple_share_marginal_chi_square(self):
        scipy_stats = pytest.importorskip("scipy.stats")
        d = make_dealer(11, arith=AdditiveScheme(F17, 3))
        counts = [0] * 17
        n = 100_000
        for t in d.issue_triples(n):
            counts[t.a.shares[0].value] += 1
        result = scipy_stats.chisquare(counts)
        assert result.pvalue > 1e-4, f"party share of a not uniform: {result}"


class TestConsumption:
    def test_double_consumption_rejected(self):
        item = _Item(("x",))
        assert item.consume() == ("x",)
        with pytest.raises(MaterialError):
            item.consume()

    def test_exhaustion_rejected(self):
        q = MaterialQueue(1)
        q.put("triple", ["t1"])
        q.take("triple")
        with pytest.raises(MaterialError):
            q.take("triple")

    def test_streamer_refills_in_batches(self):
        calls = []

        def refill(batch, width):
            calls.append(batch)
            return [f"item{len(calls)}-{i}" for i in range(batch)]

        q = MaterialQueue(1)
        q.bind_streamer("triple", refill, batch=4)
        for _ in range(9):
            q.take("triple")
        assert calls == [4, 4, 4]

    def test_stock_parties_distributes(self):
        d = make_dealer(12)
        queues = [MaterialQueue(p) for p in (1, 2, 3)]
        stock_parties(queues, d, {"triples": 10, "edabits": {3: 2}}, slack=0.1)
        for q in queues:
            a, b, c = q.take("triple")
            assert a.party == q.party
            r, bits = q.take("edabit", width=3)
            assert len(bits) == 3


class TestLedger:
    def test_fresh_ledger_zeros(self):
        led = ResourceLedger()
        assert led.snapshot() == {"triples": 0, "bit_triples": 0, "dabits": 0,
                                  "edabits": 0, "exchanges": 0, "bytes_sent": 0}

    def test_delta(self):
        led = ResourceLedger()
        snap = led.snapshot()
        led.triples += 100
        assert led.delta_since(snap)["triples"] == 100

    def test_report_and_csv(self):
        l1 = ResourceLedger(triples=5, bit_triples=2, bytes_sent=100)
        l2 = ResourceLedger(triples=5, bit_triples=2, bytes_sent=120)
        rep = ledger_report([l1, l2], scenario="acs", size=10,
                            compute_s=0.25, total_s=0.5)
        assert rep["triples"] == 5
        assert rep["bytes_sent"] == 220
        header = report_csv_header()
        assert header == "scenario,size,triples,bit_triples,dabits,bytes_sent,compute_s,total_s"
        row = report_csv_row(rep)
        assert row.startswith("acs,10,5,2,0,220,")


class TestPersistence:
    def test_dealer_archive_roundtrip(self, tmp_path):
        arith = ShamirScheme(F17, 1, 3)
        boolean = BooleanScheme(3)
        d = Dealer(arith, boolean, random.Random(13))
        triples = d.issue_triples(5)
        bit_triples = d.issue_bit_triples(4)
        dabits = d.issue_dabits(3)
        edabits = d.issue_edabits(2, 3) + d.issue_edabits(1, 2)
        path = tmp_path / "dealer.mat"
        save_material(path, arith, triples, bit_triples, dabits, edabits)
        t2, bt2, da2, ed2 = load_material(path, arith, boolean)
        assert len(t2) == 5 and len(bt2) == 4 and len(da2) == 3 and len(ed2) == 3
        for orig, loaded in zip(triples, t2):
            assert loaded.c.reconstruct() == orig.c.reconstruct()
        for e in ed2:
            bits = [b.reconstruct().value for b in e.r_bits]
            assert sum(b << i for i, b in enumerate(bits)) == e.r_arith.reconstruct().value

    def test_party_slice_roundtrip(self, tmp_path):
        arith = ShamirScheme(F17, 1, 3)
        boolean = BooleanScheme(3)
        d = Dealer(arith, boolean, random.Random(14))
        triples = d.issue_triples(3)
        edabits = d.issue_edabits(2, 3)
        dabits = d.issue_dabits(2)
        bit_triples = d.issue_bit_triples(2)
        queues = []
        for p in (1, 2, 3):
            path = tmp_path / f"p{p}.mat"
            save_party_material(path, p, arith, boolean, triples, bit_triples,
                                dabits, edabits)
            queues.append(load_party_material(path, arith, boolean))
        # consuming the same item at every party reconstructs the dealer value
        parts = [q.take("triple") for q in queues]
        a = ShareVector(arith, [parts[p][0].value for p in range(3)])
        assert a.reconstruct() == triples[0].a.reconstruct()
        eda = [q.take("edabit", width=3) for q in queues]
        r = ShareVector(arith, [eda[p][0].value for p in range(3)])
        assert r.reconstruct() == edabits[0].r_arith.reconstruct()

    def test_modulus_mismatch_rejected(self, tmp_path):
        arith = ShamirScheme(F17, 1, 3)
        boolean = BooleanScheme(3)
        d = Dealer(arith, boolean, random.Random(15))
        path = tmp_path / "m.mat"
        save_material(path, arith, d.issue_triples(1))
        other = ShamirScheme(F7, 1, 3)
        with pytest.raises(MaterialError):
            load_material(path, other, boolean)

    def test_not_a_material_file(self, tmp_path):
        path = tmp_path / "bogus"
        path.write_bytes(b"hello world")
        with pytest.raises(MaterialError):
            load_material(path, ShamirScheme(F17, 1, 3), BooleanScheme(3))
