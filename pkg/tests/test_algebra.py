"""Tests for exact modular arithmetic."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpcmon.algebra import (BIT, DEFAULT_PRIME, Element, Modulus,
                            decode_element, is_prime, lagrange_weight,
                            lagrange_weights_at_zero)
from mpcmon.errors import ModulusError

F7 = Modulus.prime(7)
F17 = Modulus.prime(17)
Z256 = Modulus.power_of_two(8)

SMALL_PRIMES = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31]


def egcd_inverse(a, p):
    """Extended Euclid, the independent oracle for inverses."""
    old_r, r = a, p
    old_s, s = 1, 0
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
    assert old_r == 1
    return old_s % p


class TestModulus:
    def test_interned(self):
        assert Modulus.prime(17) is Modulus.prime(17)
        assert Modulus.power_of_two(8) is Modulus.power_of_two(8)

    def test_rejects_composite(self):
        with pytest.raises(ModulusError):
            Modulus.prime(15)

    def test_rejects_oversized(self):
        with pytest.raises(ModulusError):
            Modulus.power_of_two(129)
        with pytest.raises(ModulusError):
            Modulus.prime(2**128 + 51)  # prime, but above the width cap

    def test_width_bounds(self):
        with pytest.raises(ModulusError):
            Modulus.power_of_two(0)
        assert Modulus.power_of_two(128).octets == 16
        assert F17.octets == 1
        assert Modulus.prime(DEFAULT_PRIME).octets == 16

    def test_default_prime_is_smallest_above_2_127(self):
        sympy = pytest.importorskip("sympy")
        assert sympy.isprime(DEFAULT_PRIME)
        assert sympy.nextprime(2**127) == DEFAULT_PRIME

    def test_is_prime_agrees_with_sympy(self):
        sympy = pytest.importorskip("sympy")
        for n in list(range(2, 500)) + [2**61 - 1, 2**61 + 15, 2**89 - 1]:
            assert is_prime(n) == sympy.isprime(n), n


class TestArithmetic:
    def test_modular_wraparound(self):
        assert (Z256.element(200) + Z256.element(100)).value == 44

    def test_field_add(self):
        assert (F7.element(4) + F7.element(6)).value == 3

    def test_additive_identity(self):
        for m in (F7, Z256):
            for v in range(min(m.value, 40)):
                assert (m.element(v) + m.element(0)).value == v

    def test_field_mul(self):
        assert (F7.element(3) * F7.element(4)).value == 5

    def test_nilpotent_wrap(self):
        assert (Z256.element(16) * Z256.element(16)).value == 0

    def test_multiplicative_identity(self):
        for m in (F7, Z256):
            for v in range(min(m.value, 40)):
                assert (m.element(v) * m.element(1)).value == v

    def test_modulus_mismatch_rejected(self):
        with pytest.raises(ModulusError):
            F7.element(1) + F17.element(1)
        with pytest.raises(ModulusError):
            Z256.element(1) * F7.element(1)

    def test_out_of_range_rejected(self):
        with pytest.raises(ModulusError):
            Element(7, F7)
        with pytest.raises(ModulusError):
            Element(-1, F7)

    @pytest.mark.parametrize("p", SMALL_PRIMES)
    def test_field_axioms_exhaustive(self, p):
        m = Modulus.prime(p)
        els = [m.element(v) for v in range(p)]
        for a in els:
            for b in els:
                assert (a + b).value == (b + a).value
                assert (a * b).value == (b * a).value
                for c in els:
                    assert ((a + b) + c).value == (a + (b + c)).value
                    assert ((a * b) * c).value == (a * (b * c)).value
                    assert (a * (b + c)).value == (a * b + a * c).value
        for a in els[1:]:
            assert (a * a.inverse()).value == 1


class TestInverse:
    def test_inv_3_mod_7(self):
        assert F7.element(3).inverse().value == egcd_inverse(3, 7) == 5

    def test_inv_identity(self):
        assert F7.element(1).inverse().value == 1

    def test_inv_2_mod_17(self):
        assert F17.element(2).inverse().value == egcd_inverse(2, 17) == 9

    def test_inv_matches_euclid_oracle(self):
        p = 1009
        m = Modulus.prime(p)
        for a in range(1, p, 7):
            assert m.element(a).inverse().value == egcd_inverse(a, p)

    def test_inv_errors(self):
        with pytest.raises(ModulusError):
            F7.element(0).inverse()
        with pytest.raises(ModulusError):
            Z256.element(3).inverse()


class TestLagrange:
    def test_weights_f7_points_123(self):
        # hand interpolation at 0: L_0 = 3, L_1 = 4 over F_7
        pts = [F7.element(x) for x in (1, 2, 3)]
        assert lagrange_weight(pts, 0).value == 3
        assert lagrange_weight(pts, 1).value == 4

    def test_single_point(self):
        assert lagrange_weight([F7.element(1)], 0).value == 1

    def test_rejects_duplicate_and_zero_points(self):
        pts = [F7.element(1), F7.element(1)]
        with pytest.raises(ModulusError):
            lagrange_weight(pts, 0)
        with pytest.raises(ModulusError):
            lagrange_weight([F7.element(0), F7.element(2)], 0)

    @pytest.mark.parametrize("p,t,k", [(17, 1, 3), (31, 2, 5), (101, 3, 7)])
    def test_interpolation_recovers_p0(self, p, t, k):
        import itertools
        import random
        rng = random.Random(42)
        m = Modulus.prime(p)
        for _ in range(20):
            coeffs = [rng.randrange(p) for _ in range(t + 1)]

            def poly(x):
                acc = 0
                for c in reversed(coeffs):
                    acc = (acc * x + c) % p
                return acc

            for subset in itertools.combinations(range(1, k + 1), t + 1):
                ws = lagrange_weights_at_zero(list(subset), m)
                got = sum(w * poly(x) for w, x in zip(ws, subset)) % p
                assert got == coeffs[0]


class TestEncoding:
    def test_roundtrip_f17_exhaustive(self):
        for v in range(17):
            e = F17.element(v)
            assert decode_element(e.encode(), F17) == e

    def test_big_endian_fixed_width(self):
        m = Modulus.power_of_two(16)
        assert m.element(0x0102).encode() == b"\x01\x02"
        assert m.element(5).encode() == b"\x00\x05"
        assert BIT.element(1).encode() == b"\x01"

    def test_decode_length_check(self):
        with pytest.raises(ModulusError):
            decode_element(b"\x00\x01", F17)

    @given(st.integers(min_value=0, max_value=DEFAULT_PRIME - 1))
    @settings(max_examples=200, deadline=None)
    def test_roundtrip_default_prime(self, v):
        m = Modulus.prime(DEFAULT_PRIME)
        e = m.element(v)
        assert decode_element(e.encode(), m) == e
        assert len(e.encode()) == 16
