"""Just enough GF(p^k) arithmetic for Paley conference matrices."""

from __future__ import annotations

import itertools
from functools import cached_property


def prime_power(q: int) -> tuple[int, int] | None:
    """Return ``(p, k)`` with ``q == p**k`` for prime ``p``, else ``None``."""
    if q < 2:
        return None
    p = next(d for d in range(2, q + 1) if q % d == 0)
    k, rest = 0, q
    while rest % p == 0:
        rest //= p
        k += 1
    return (p, k) if rest == 1 else None


def is_prime(q: int) -> bool:
    pk = prime_power(q)
    return pk is not None and pk[1] == 1


def _polymulmod(a, b, modulus, p):
    k = len(modulus) - 1
    prod = [0] * (2 * k - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                prod[i + j] = (prod[i + j] + ai * bj) % p
    # modulus is monic: x^k = -(lower terms)
    for deg in range(len(prod) - 1, k - 1, -1):
        c = prod[deg]
        if c:
            for i in range(k + 1):
                prod[deg - k + i] = (prod[deg - k + i] - c * modulus[i]) % p
    return tuple(prod[:k])


def _is_irreducible(poly, p, k):
    # brute force: irreducible iff no monic factor of degree 1..k//2
    for d in range(1, k // 2 + 1):
        for low in itertools.product(range(p), repeat=d):
            divisor = list(low) + [1]
            rem = list(poly)
            for deg in range(len(rem) - 1, d - 1, -1):
                c = rem[deg]
                if c:
                    for i in range(d + 1):
                        rem[deg - d + i] = (rem[deg - d + i] - c * divisor[i]) % p
            if not any(rem[:d]):
                return False
    return True


class GaloisField:
    """GF(q) with elements encoded as integers ``0..q-1`` (base-p digits)."""

    def __init__(self, q: int):
        pk = prime_power(q)
        if pk is None:
            raise ValueError(f"{q} is not a prime power")
        self.q = q
        self.p, self.k = pk
        self.modulus = self._find_modulus()

    def _find_modulus(self):
        p, k = self.p, self.k
        if k == 1:
            return (0, 1)
        for low in itertools.product(range(p), repeat=k):
            poly = tuple(low) + (1,)
            if low[0] and _is_irreducible(poly, p, k):
                return poly
        raise RuntimeError("no irreducible polynomial found")

    def digits(self, a: int) -> tuple[int, ...]:
        out = []
        for _ in range(self.k):
            out.append(a % self.p)
            a //= self.p
        return tuple(out)

    def encode(self, digits) -> int:
        a = 0
        for d in reversed(digits):
            a = a * self.p + d
        return a

    def sub(self, a: int, b: int) -> int:
        if self.k == 1:
            return (a - b) % self.p
        da, db = self.digits(a), self.digits(b)
        return self.encode(tuple((x - y) % self.p for x, y in zip(da, db)))

    def square(self, a: int) -> int:
        if self.k == 1:
            return a * a % self.p
        d = self.digits(a)
        return self.encode(_polymulmod(d, d, self.modulus, self.p))

    @cached_property
    def nonzero_squares(self) -> frozenset[int]:
        return frozenset(self.square(a) for a in range(1, self.q))

    def chi(self, a: int) -> int:
        """Quadratic character: 0 at 0, +1 on nonzero squares, -1 otherwise."""
        if a == 0:
            return 0
        return 1 if a in self.nonzero_squares else -1
