"""Secret sharing schemes and share-local operations.

Three schemes share a common interface: additive sharing over an arbitrary
ring/field, Shamir polynomial sharing over a prime field, and Boolean XOR
sharing over Z_2.  ``share`` splits a value into one share per party;
``reconstruct`` recovers it from the full share vector.  Linear operations
(add, subtract, scale, add-constant) are local: each party transforms its
own share without interaction.

Randomness is injected as a ``random.Random``-like object so protocol
transcripts are replayable in tests.
"""

from __future__ import annotations

import enum

from .algebra import BIT, Element, Modulus, lagrange_weights_at_zero
from .errors import ModulusError, SchemeError


class SType(enum.Enum):
    """Sharing type tag carried by registers and shares."""

    ARITH = "arith"
    BOOL = "bool"

    def __repr__(self):
        return self.value


class AdditiveScheme:
    """Shares sum to the secret modulo the ring size.

    Party k's share is the complement ``v - sum(others)``; parties 1..k-1
    hold uniform ring elements, so any strict subset sees pure noise.
    """

    stype = SType.ARITH

    def __init__(self, modulus: Modulus, parties: int):
        if parties < 2:
            raise SchemeError("need at least 2 parties")
        self.modulus = modulus
        self.parties = parties
        # every strict subset of parties learns nothing
        self.threshold = parties - 1

    def share(self, value: Element, rng) -> "ShareVector":
        if value.modulus != self.modulus:
            raise ModulusError("value outside the scheme's domain")
        m = self.modulus.value
        raw = [rng.randrange(m) for _ in range(self.parties - 1)]
        raw.append((value.value - sum(raw)) % m)
        return ShareVector(self, [Element(r, self.modulus) for r in raw])

    def reconstruct_raw(self, values) -> int:
        return sum(values) % self.modulus.value

    def reconstruct(self, sv: "ShareVector") -> Element:
        self._check_vector(sv)
        return Element(self.reconstruct_raw([s.value for s in sv.shares]), self.modulus)

    def _check_vector(self, sv):
        if sv.scheme is not self:
            raise SchemeError("share vector belongs to a different scheme")
        if len(sv.shares) != self.parties:
            raise SchemeError(f"expected {self.parties} shares, got {len(sv.shares)}")

    def public_share_raw(self, value: int, party: int) -> int:
        """Canonical (randomness-free) sharing of a public value: party 1
        holds it, everyone else holds zero."""
        return value if party == 1 else 0

    def __repr__(self):
        return f"Additive({self.modulus}, k={self.parties})"


class ShamirScheme:
    """Degree-t polynomial sharing over a prime field.

    Evaluation points are fixed in advance as the party indices 1..k.
    Reconstruction interpolates at x=0 using the first t+1 shares.
    """

    stype = SType.ARITH

    def __init__(self, modulus: Modulus, threshold: int, parties: int):
        if parties < 2:
            raise SchemeError("need at least 2 parties")
        if not modulus.is_prime_field:
            raise SchemeError("Shamir sharing requires a prime field")
        if not 0 < threshold < parties:
            raise SchemeError(f"threshold must satisfy 0 < t < k, got t={threshold} k={parties}")
        if modulus.value <= parties:
            raise SchemeError("field too small for distinct nonzero evaluation points")
        self.modulus = modulus
        self.threshold = threshold
        self.parties = parties
        # weights for the default reconstruction from parties 1..t+1
        self._weights = lagrange_weights_at_zero(list(range(1, threshold + 2)), modulus)

    def share(self, value: Element, rng) -> "ShareVector":
        if value.modulus != self.modulus:
            raise ModulusError("value outside the scheme's domain")
        p = self.modulus.value
        coeffs = [value.value] + [rng.randrange(p) for _ in range(self.threshold)]
        shares = []
        for x in range(1, self.parties + 1):
            acc = 0
            for c in reversed(coeffs):
                acc = (acc * x + c) % p
            shares.append(Element(acc, self.modulus))
        return ShareVector(self, shares)

    def reconstruct_raw(self, values) -> int:
        p = self.modulus.value
        return sum(w * v for w, v in zip(self._weights, values)) % p

    def reconstruct(self, sv: "ShareVector") -> Element:
        if sv.scheme is not self:
            raise SchemeError("share vector belongs to a different scheme")
        if len(sv.shares) != self.parties:
            raise SchemeError(f"expected {self.parties} shares, got {len(sv.shares)}")
        return Element(self.reconstruct_raw([s.value for s in sv.shares]), self.modulus)

    def reconstruct_from(self, pairs) -> Element:
        """Interpolate from any t+1 (party, share) pairs."""
        if len(pairs) != self.threshold + 1:
            raise SchemeError(f"need exactly t+1={self.threshold + 1} shares")
        xs = [party for party, _ in pairs]
        ws = lagrange_weights_at_zero(xs, self.modulus)
        p = self.modulus.value
        return Element(sum(w * s.value for w, (_, s) in zip(ws, pairs)) % p, self.modulus)

    def public_share_raw(self, value: int, party: int) -> int:
        # a public constant is the degree-0 polynomial: same value everywhere
        return value

    def __repr__(self):
        return f"Shamir({self.modulus}, t={self.threshold}, k={self.parties})"


class BooleanScheme:
    """XOR sharing of single bits: additive sharing over Z_2."""

    stype = SType.BOOL
    modulus = BIT

    def __init__(self, parties: int):
        if parties < 2:
            raise SchemeError("need at least 2 parties")
        self.parties = parties
        self.threshold = parties - 1

    def share(self, value: Element, rng) -> "ShareVector":
        if value.modulus != BIT:
            raise ModulusError("Boolean scheme shares bits")
        raw = [rng.randrange(2) for _ in range(self.parties - 1)]
        raw.append((value.value - sum(raw)) % 2)
        return ShareVector(self, [Element(r, BIT) for r in raw])

    def reconstruct_raw(self, values) -> int:
        acc = 0
        for v in values:
            acc ^= v
        return acc

    def reconstruct(self, sv: "ShareVector") -> Element:
        if sv.scheme is not self:
            raise SchemeError("share vector belongs to a different scheme")
        if len(sv.shares) != self.parties:
            raise SchemeError(f"expected {self.parties} shares, got {len(sv.shares)}")
        return Element(self.reconstruct_raw([s.value for s in sv.shares]), BIT)

    def public_share_raw(self, value: int, party: int) -> int:
        return value if party == 1 else 0

    def __repr__(self):
        return f"BooleanXor(k={self.parties})"


class ShareVector:
    """All k shares of one secret, as held by the dealer or a test harness."""

    __slots__ = ("scheme", "shares")

    def __init__(self, scheme, shares):
        if len(shares) != scheme.parties:
            raise SchemeError(f"expected {scheme.parties} shares, got {len(shares)}")
        self.scheme = scheme
        self.shares = list(shares)

    def reconstruct(self) -> Element:
        return self.scheme.reconstruct(self)

    def typed(self, party: int) -> "TypedShare":
        return TypedShare(party, self.shares[party - 1], self.scheme.stype, self.scheme)

    def __repr__(self):
        return f"[[{'|'.join(str(s.value) for s in self.shares)}]] {self.scheme}"


class TypedShare:
    """One party's share plus its sharing-type tag and scheme."""

    __slots__ = ("party", "value", "stype", "scheme")

    def __init__(self, party: int, value: Element, stype: SType, scheme):
        if (stype is SType.BOOL) != isinstance(scheme, BooleanScheme):
            raise SchemeError("stype Bool iff scheme is BooleanXor")
        self.party = party
        self.value = value
        self.stype = stype
        self.scheme = scheme

    def __repr__(self):
        return f"<P{self.party} {self.stype.value} {self.value.value}>"


def _check_pair(a: TypedShare, b: TypedShare):
    if a.party != b.party:
        raise SchemeError("shares belong to different parties")
    if a.scheme is not b.scheme:
        raise SchemeError("shares belong to different schemes")
    if a.stype is not b.stype:
        raise SchemeError("sharing-type mismatch")


def local_add(a: TypedShare, b: TypedShare) -> TypedShare:
    """Share-wise addition (XOR for Boolean shares); no interaction."""
    _check_pair(a, b)
    return TypedShare(a.party, a.value + b.value, a.stype, a.scheme)


def local_sub(a: TypedShare, b: TypedShare) -> TypedShare:
    """Share-wise subtraction; equals XOR for Boolean shares."""
    _check_pair(a, b)
    return TypedShare(a.party, a.value - b.value, a.stype, a.scheme)


def local_scale(a: TypedShare, c: Element) -> TypedShare:
    """Multiply a share by a public constant; arithmetic schemes only."""
    if a.stype is not SType.ARITH:
        raise SchemeError("scaling is defined for arithmetic shares only")
    return TypedShare(a.party, a.value * c, a.stype, a.scheme)


def local_add_const(a: TypedShare, c: Element) -> TypedShare:
    """Add a public constant to a shared value; arithmetic schemes only.

    Additive sharing: only party 1 shifts its share.  Shamir: every party
    shifts, which adds the degree-0 polynomial c.
    """
    if a.stype is not SType.ARITH:
        raise SchemeError("ADDC is defined for arithmetic shares only")
    if isinstance(a.scheme, ShamirScheme) or a.party == 1:
        return TypedShare(a.party, a.value + c, a.stype, a.scheme)
    return TypedShare(a.party, a.value, a.stype, a.scheme)


def local_xor_const(a: TypedShare, bit: int) -> TypedShare:
    """XOR a public bit into a Boolean share; party 1 flips."""
    if a.stype is not SType.BOOL:
        raise SchemeError("XOR-with-constant is defined for Boolean shares only")
    if a.party == 1 and bit:
        return TypedShare(a.party, Element(a.value.value ^ 1, BIT), a.stype, a.scheme)
    return a


def public_share(scheme, value: int, party: int) -> TypedShare:
    """The canonical randomness-free sharing of a public value."""
    raw = scheme.public_share_raw(value % scheme.modulus.value, party)
    return TypedShare(party, Element(raw, scheme.modulus), scheme.stype, scheme)
