"""Tests for the three sharing schemes and share-local operations."""

import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpcmon.algebra import BIT, Element, Modulus
from mpcmon.errors import ModulusError, SchemeError
from mpcmon.sharing import (AdditiveScheme, BooleanScheme, ShamirScheme,
                            ShareVector, SType, TypedShare, local_add,
                            local_add_const, local_scale, local_sub,
                            local_xor_const, public_share)
from mpcmon.stats import exact_distribution, tv_distance

F7 = Modulus.prime(7)
F17 = Modulus.prime(17)
Z16 = Modulus.power_of_two(4)
Z256 = Modulus.power_of_two(8)


class FixedRng:
    """Feeds a scripted sequence of 'random' values."""

    def __init__(self, values):
        self.values = list(values)

    def randrange(self, n):
        v = self.values.pop(0)
        assert 0 <= v < n
        return v


def schemes_under_test():
    return [
        AdditiveScheme(Z256, 3),
        AdditiveScheme(F17, 3),
        ShamirScheme(F17, 1, 3),
        ShamirScheme(F17, 2, 4),
        BooleanScheme(3),
    ]


class TestShareReconstruct:
    @pytest.mark.parametrize("scheme", schemes_under_test(), ids=repr)
    def test_roundtrip_random(self, scheme):
        rng = random.Random(1234)
        m = scheme.modulus.value
        for _ in range(10_000):
            v = Element(rng.randrange(m), scheme.modulus)
            assert scheme.reconstruct(scheme.share(v, rng)) == v

    def test_additive_complement_share(self):
        scheme = AdditiveScheme(Z256, 3)
        sv = scheme.share(Z256.element(5), FixedRng([17, 200]))
        assert [s.value for s in sv.shares] == [17, 200, 44]
        assert sv.reconstruct().value == 5

    def test_shamir_zero_randomness_constant_poly(self):
        scheme = ShamirScheme(F7, 1, 3)
        sv = scheme.share(F7.element(4), FixedRng([0]))
        assert [s.value for s in sv.shares] == [4, 4, 4]

    def test_boolean_vector(self):
        scheme = BooleanScheme(3)
        sv = ShareVector(scheme, [BIT.element(1), BIT.element(0), BIT.element(0)])
        assert sv.reconstruct().value == 1
        sv = ShareVector(scheme, [BIT.element(1), BIT.element(1), BIT.element(0)])
        assert sv.reconstruct().value == 0

    def test_shamir_hand_interpolation(self):
        # shares (4, 6, 1) at points (1, 2, 3) lie on p(x) = 2 + 2x
        scheme = ShamirScheme(F7, 1, 3)
        sv = ShareVector(scheme, [F7.element(4), F7.element(6), F7.element(1)])
        assert sv.reconstruct().value == 2

    def test_wrong_share_count(self):
        scheme = AdditiveScheme(Z256, 3)
        with pytest.raises(SchemeError):
            ShareVector(scheme, [Z256.element(1)] * 2)

    def test_value_domain_enforced(self):
        scheme = AdditiveScheme(Z256, 3)
        with pytest.raises(ModulusError):
            scheme.share(F7.element(1), random.Random(0))

    def test_scheme_invariants(self):
        with pytest.raises(SchemeError):
            ShamirScheme(F17, 3, 3)  # t < k required
        with pytest.raises(SchemeError):
            ShamirScheme(Z256, 1, 3)  # prime field required
        with pytest.raises(SchemeError):
            AdditiveScheme(Z256, 1)
        with pytest.raises(SchemeError):
            ShamirScheme(Modulus.prime(3), 1, 3)  # needs k distinct nonzero points

    @given(st.integers(min_value=0, max_value=16 - 1), st.integers())
    @settings(max_examples=100, deadline=None)
    def test_roundtrip_property(self, v, seed):
        rng = random.Random(seed)
        for scheme in (AdditiveScheme(Z16, 3), ShamirScheme(F17, 1, 3)):
            e = Element(v, scheme.modulus)
            assert scheme.reconstruct(scheme.share(e, rng)) == e


class TestPrivacy:
    """Prop 2: strict-subset share distributions are independent of the secret.

    Where the joint domain is at most 17^2 the check is exact: the
    scheme's randomness is enumerated and the resulting distributions
    compared for equality.  A sampled TV check covers one larger case.
    """

    def test_additive_exact_all_strict_subsets(self):
        scheme = AdditiveScheme(Z16, 3)
        for subset in ([0], [1], [2], [0, 1], [0, 2], [1, 2]):
            dists = []
            for secret in (3, 9):
                outcomes = []
                for r1 in range(16):
                    for r2 in range(16):
                        shares = [r1, r2, (secret - r1 - r2) % 16]
                        outcomes.append(tuple(shares[i] for i in subset))
                dists.append(exact_distribution(outcomes))
            assert dists[0] == dists[1], f"subset {subset} leaks"

    def test_boolean_exact_all_strict_subsets(self):
        scheme = BooleanScheme(3)
        for subset in ([0], [1], [2], [0, 1], [0, 2], [1, 2]):
            dists = []
            for secret in (0, 1):
                outcomes = []
                for r1 in range(2):
                    for r2 in range(2):
                        shares = [r1, r2, (secret - r1 - r2) % 2]
                        outcomes.append(tuple(shares[i] for i in subset))
                dists.append(exact_distribution(outcomes))
            assert dists[0] == dists[1]

    def test_shamir_exact_at_threshold(self):
        # t = 1: single-party views must be independent of the secret;
        # two shares determine a degree-1 polynomial, so subsets are
        # tested only up to the threshold.
        for party in (1, 2, 3):
            dists = []
            for secret in (5, 11):
                outcomes = [(secret + r * party) % 17 for r in range(17)]
                dists.append(exact_distribution(outcomes))
            assert dists[0] == dists[1]

    def test_shamir_t2_pairs_exact(self):
        # t = 2 over F_17, k = 4: pairs of shares still below threshold
        for pair in itertools.combinations((1, 2, 3, 4), 2):
            dists = []
            for secret in (0, 7):
                outcomes = []
                for c1 in range(17):
                    for c2 in range(17):
                        outcomes.append(tuple((secret + c1 * x + c2 * x * x) % 17
                                              for x in pair))
                dists.append(exact_distribution(outcomes))
            assert dists[0] == dists[1]

    def test_sampled_tv_single_share(self):
        scheme = AdditiveScheme(F17, 3)
        rng = random.Random(99)
        n = 100_000
        samples = {}
        for secret in (2, 13):
            v = F17.element(secret)
            samples[secret] = [scheme.share(v, rng).shares[0].value for _ in range(n)]
        assert tv_distance(samples[2], samples[13]) < 0.02


class TestLocalOps:
    def test_boolean_xor_share(self):
        scheme = BooleanScheme(3)
        a = TypedShare(1, BIT.element(1), SType.BOOL, scheme)
        b = TypedShare(1, BIT.element(1), SType.BOOL, scheme)
        assert local_add(a, b).value.value == 0

    def test_additive_share_add(self):
        scheme = AdditiveScheme(Z256, 3)
        a = TypedShare(2, Z256.element(200), SType.ARITH, scheme)
        b = TypedShare(2, Z256.element(100), SType.ARITH, scheme)
        assert local_add(a, b).value.value == 44

    def test_shamir_share_add(self):
        scheme = ShamirScheme(F7, 1, 3)
        a = TypedShare(1, F7.element(4), SType.ARITH, scheme)
        b = TypedShare(1, F7.element(6), SType.ARITH, scheme)
        assert local_add(a, b).value.value == 3

    def test_scale_examples(self):
        scheme = AdditiveScheme(Z256, 3)
        a = TypedShare(1, Z256.element(17), SType.ARITH, scheme)
        assert local_scale(a, Z256.element(2)).value.value == 34
        sh = ShamirScheme(F7, 1, 3)
        b = TypedShare(1, F7.element(4), SType.ARITH, sh)
        assert local_scale(b, F7.element(0)).value.value == 0
        assert local_scale(b, F7.element(2)).value.value == 1

    def test_add_const_placement(self):
        scheme = AdditiveScheme(Z256, 3)
        p1 = TypedShare(1, Z256.element(17), SType.ARITH, scheme)
        p2 = TypedShare(2, Z256.element(17), SType.ARITH, scheme)
        c = Z256.element(5)
        assert local_add_const(p1, c).value.value == 22
        assert local_add_const(p2, c).value.value == 17  # only party 1 shifts
        sh = ShamirScheme(F7, 1, 3)
        for party in (1, 2, 3):
            s = TypedShare(party, F7.element(4), SType.ARITH, sh)
            assert local_add_const(s, F7.element(5)).value.value == 2  # all shift
        assert local_add_const(p2, Z256.element(0)).value.value == 17

    def test_type_guards(self):
        bsch = BooleanScheme(3)
        asch = AdditiveScheme(Z256, 3)
        bit = TypedShare(1, BIT.element(1), SType.BOOL, bsch)
        num = TypedShare(1, Z256.element(3), SType.ARITH, asch)
        with pytest.raises(SchemeError):
            local_scale(bit, BIT.element(1))
        with pytest.raises(SchemeError):
            local_add_const(bit, BIT.element(1))
        with pytest.raises(SchemeError):
            local_xor_const(num, 1)
        with pytest.raises(SchemeError):
            local_add(bit, num)
        with pytest.raises(SchemeError):
            local_add(num, TypedShare(2, Z256.element(1), SType.ARITH, asch))
        with pytest.raises(SchemeError):
            TypedShare(1, BIT.element(0), SType.BOOL, asch)

    @pytest.mark.parametrize("scheme", [AdditiveScheme(F7, 3), ShamirScheme(F7, 1, 3)],
                             ids=repr)
    def test_homomorphism_exhaustive_f7(self, scheme):
        """Reconstruction commutes with local ops, for all pairs over F_7."""
        rng = random.Random(5)
        for a in range(7):
            for b in range(7):
                sa = scheme.share(F7.element(a), rng)
                sb = scheme.share(F7.element(b), rng)
                summed = ShareVector(scheme, [
                    local_add(sa.typed(p), sb.typed(p)).value for p in range(1, 4)])
                assert summed.reconstruct().value == (a + b) % 7
                diff = ShareVector(scheme, [
                    local_sub(sa.typed(p), sb.typed(p)).value for p in range(1, 4)])
                assert diff.reconstruct().value == (a - b) % 7
                scaled = ShareVector(scheme, [
                    local_scale(sa.typed(p), F7.element(b)).value for p in range(1, 4)])
                assert scaled.reconstruct().value == (a * b) % 7
                shifted = ShareVector(scheme, [
                    local_add_const(sa.typed(p), F7.element(b)).value for p in range(1, 4)])
                assert shifted.reconstruct().value == (a + b) % 7

    def test_boolean_homomorphism_exhaustive(self):
        scheme = BooleanScheme(3)
        rng = random.Random(6)
        for a in range(2):
            for b in range(2):
                sa = scheme.share(BIT.element(a), rng)
                sb = scheme.share(BIT.element(b), rng)
                x = ShareVector(scheme, [
                    local_add(sa.typed(p), sb.typed(p)).value for p in range(1, 4)])
                assert x.reconstruct().value == a ^ b

    def test_public_share(self):
        for scheme in (AdditiveScheme(Z256, 3), ShamirScheme(F7, 1, 3), BooleanScheme(3)):
            shares = [public_share(scheme, 1, p).value for p in range(1, scheme.parties + 1)]
            assert ShareVector(scheme, shares).reconstruct().value == 1


class TestShamirThreshold:
    def test_any_t_plus_1_subset_reconstructs(self):
        rng = random.Random(7)
        scheme = ShamirScheme(F17, 2, 5)
        for _ in range(50):
            v = F17.element(rng.randrange(17))
            sv = scheme.share(v, rng)
            full = scheme.reconstruct(sv)
            assert full == v
            for subset in itertools.combinations(range(1, 6), 3):
                pairs = [(p, sv.shares[p - 1]) for p in subset]
                assert scheme.reconstruct_from(pairs) == v

    def test_reconstruct_from_wrong_count(self):
        scheme = ShamirScheme(F17, 1, 3)
        sv = scheme.share(F17.element(3), random.Random(0))
        with pytest.raises(SchemeError):
            scheme.reconstruct_from([(1, sv.shares[0])])
