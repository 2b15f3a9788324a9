"""Exact modular arithmetic for the two computation domains.

Values live either in a ring Z_{2^w} or in a prime field F_p.  Both are
represented by :class:`Element` instances tied to a :class:`Modulus`.  All
operations are exact; mixing elements of different moduli raises
:class:`~mpcmon.errors.ModulusError`.

Moduli are capped at 128 bits so every element has a fixed-width wire
encoding (big-endian, ``ceil(width/8)`` octets).
"""

from __future__ import annotations

from .errors import ModulusError

MAX_BITS = 128

# Smallest prime above 2^127; the default session field.  A session that
# wants a different field passes its own Modulus everywhere.
DEFAULT_PRIME = 2**127 + 29

_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin for the supported range (n < 2^128).

    The first 12 prime bases decide primality for all n < 3.3 * 10^24;
    beyond that we add fixed bases 41..97, which has no known composite
    survivor and is deterministic as a procedure.
    """
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    bases = _SMALL_PRIMES if n < 3_317_044_064_679_887_385_961_981 else (
        _SMALL_PRIMES + (41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97))
    for a in bases:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


class Modulus:
    """A computation domain: either PowerOfTwo(w) or Prime(p).

    Instances are interned so that modulus checks are identity checks on
    the hot path.  ``value`` is the modulus itself, ``width`` the bit width
    of the largest representable element.
    """

    __slots__ = ("value", "width", "is_prime_field")

    _cache: dict = {}

    def __init__(self, value: int, width: int, is_prime_field: bool):
        self.value = value
        self.width = width
        self.is_prime_field = is_prime_field

    @classmethod
    def power_of_two(cls, width: int) -> "Modulus":
        if not 1 <= width <= MAX_BITS:
            raise ModulusError(f"power-of-two width must be in 1..{MAX_BITS}, got {width}")
        key = ("pow2", width)
        m = cls._cache.get(key)
        if m is None:
            m = cls._cache[key] = cls(1 << width, width, False)
        return m

    @classmethod
    def prime(cls, p: int) -> "Modulus":
        if p >= 1 << MAX_BITS:
            raise ModulusError(f"prime modulus must be below 2^{MAX_BITS}")
        key = ("prime", p)
        m = cls._cache.get(key)
        if m is None:
            if not is_prime(p):
                raise ModulusError(f"{p} is not prime")
            m = cls._cache[key] = cls(p, p.bit_length(), True)
        return m

    @property
    def octets(self) -> int:
        """Fixed wire width of one element, in octets."""
        return (self.width + 7) // 8

    def element(self, value: int) -> "Element":
        return Element(value % self.value, self)

    def __eq__(self, other):
        return self is other or (isinstance(other, Modulus)
                                 and self.value == other.value
                                 and self.is_prime_field == other.is_prime_field)

    def __hash__(self):
        return hash((self.value, self.is_prime_field))

    def __repr__(self):
        if self.is_prime_field:
            return f"F_{self.value}"
        return f"Z_2^{self.width}"


# The Boolean share domain Z_2, used pervasively.
BIT = Modulus.power_of_two(1)


class Element:
    """A fully reduced value in Z_{2^w} or F_p."""

    __slots__ = ("value", "modulus")

    def __init__(self, value: int, modulus: Modulus):
        if not 0 <= value < modulus.value:
            raise ModulusError(f"value {value} out of range for {modulus}")
        self.value = value
        self.modulus = modulus

    def _check(self, other: "Element") -> None:
        if self.modulus is not other.modulus and self.modulus != other.modulus:
            raise ModulusError(f"modulus mismatch: {self.modulus} vs {other.modulus}")

    def __add__(self, other: "Element") -> "Element":
        self._check(other)
        return Element((self.value + other.value) % self.modulus.value, self.modulus)

    def __sub__(self, other: "Element") -> "Element":
        self._check(other)
        return Element((self.value - other.value) % self.modulus.value, self.modulus)

    def __mul__(self, other: "Element") -> "Element":
        self._check(other)
        return Element((self.value * other.value) % self.modulus.value, self.modulus)

    def __neg__(self) -> "Element":
        return Element(-self.value % self.modulus.value, self.modulus)

    def inverse(self) -> "Element":
        """Multiplicative inverse; prime fields only, nonzero only."""
        if not self.modulus.is_prime_field:
            raise ModulusError("inverse requires a prime field")
        if self.value == 0:
            raise ModulusError("zero has no inverse")
        return Element(pow(self.value, -1, self.modulus.value), self.modulus)

    def __eq__(self, other):
        return (isinstance(other, Element) and self.value == other.value
                and self.modulus == other.modulus)

    def __hash__(self):
        return hash((self.value, self.modulus.value))

    def __repr__(self):
        return f"{self.value} ({self.modulus})"

    def encode(self) -> bytes:
        """Fixed-width big-endian octet string."""
        return self.value.to_bytes(self.modulus.octets, "big")


def decode_element(data: bytes, modulus: Modulus) -> Element:
    if len(data) != modulus.octets:
        raise ModulusError(f"expected {modulus.octets} octets, got {len(data)}")
    return Element(int.from_bytes(data, "big"), modulus)


def lagrange_weight(points, i: int) -> Element:
    """Interpolation weight L_i at x=0 for the given evaluation points.

    With weights L_i, any polynomial p of degree < len(points) satisfies
    sum(L_i * p(points[i])) == p(0).  Points must be distinct and nonzero
    elements of a prime field.
    """
    modulus = points[i].modulus
    if not modulus.is_prime_field:
        raise ModulusError("Lagrange interpolation requires a prime field")
    p = modulus.value
    xi = points[i].value
    if xi == 0:
        raise ModulusError("evaluation points must be nonzero")
    num = den = 1
    for j, pt in enumerate(points):
        if j == i:
            continue
        xj = pt.value
        if xj == xi:
            raise ModulusError("evaluation points must be distinct")
        if xj == 0:
            raise ModulusError("evaluation points must be nonzero")
        num = num * (-xj) % p
        den = den * (xi - xj) % p
    return Element(num * pow(den, -1, p) % p, modulus)


def lagrange_weights_at_zero(xs, modulus: Modulus):
    """Raw-int weights for interpolating at 0 from points ``xs``; fast path."""
    p = modulus.value
    out = []
    for i, xi in enumerate(xs):
        num = den = 1
        for j, xj in enumerate(xs):
            if j == i:
                continue
            num = num * (-xj) % p
            den = den * (xi - xj) % p
        out.append(num * pow(den, -1, p) % p)
    return out
