"""Small finite fields GF(p^m) with elements encoded as integers.

An element is the integer whose base-p digits are the coefficients of its
polynomial representative (constant term first).  Multiplication uses
log/antilog tables, so this is meant for q up to a few thousand.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

from .errors import StrataError


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % d for d in range(2, int(n ** 0.5) + 1))


def _poly_mulmod(a: list[int], b: list[int], mod: list[int], p: int) -> list[int]:
    m = len(mod) - 1
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] = (out[i + j] + x * y) % p
    # mod is monic of degree m
    for d in range(len(out) - 1, m - 1, -1):
        c = out[d]
        if c:
            for k in range(m + 1):
                out[d - m + k] = (out[d - m + k] - c * mod[k]) % p
    return (out + [0] * m)[:m]


def _irreducible(p: int, m: int) -> list[int]:
    """Least monic irreducible of degree m (coefficients low to high)."""
    if m == 1:
        return [0, 1]
    for tail in itertools.product(range(p), repeat=m):
        poly = list(tail) + [1]
        if poly[0] == 0:
            continue
        if _has_no_factor(poly, p, m):
            return poly
    raise StrataError("no irreducible polynomial")  # pragma: no cover


def _has_no_factor(poly: list[int], p: int, m: int) -> bool:
    # trial division by every monic polynomial of degree <= m/2
    for d in range(1, m // 2 + 1):
        for tail in itertools.product(range(p), repeat=d):
            div = list(tail) + [1]
            r = list(poly)
            for top in range(len(r) - 1, d - 1, -1):
                c = r[top]
                if c:
                    for k in range(d + 1):
                        r[top - d + k] = (r[top - d + k] - c * div[k]) % p
            if not any(r[:d]):
                return False
    return True


class GF:
    """The field with q = p^m elements."""

    def __init__(self, p: int, m: int = 1):
        if not is_prime(p) or m < 1:
            raise StrataError("invalid field", f"GF({p}^{m})")
        self.p, self.m = p, m
        self.q = p ** m
        if self.q > 1 << 16:
            raise StrataError("invalid field", "field too large for table arithmetic")
        self.modulus = _irreducible(p, m)
        self._build_tables()

    def _digits(self, x: int) -> list[int]:
        out = []
        for _ in range(self.m):
            out.append(x % self.p)
            x //= self.p
        return out

    def _undigits(self, ds: list[int]) -> int:
        return sum(d * self.p ** i for i, d in enumerate(ds))

    def _build_tables(self) -> None:
        q = self.q
        for g in range(1, q):
            exp = [1]
            gd = self._digits(g)
            cur = [1] + [0] * (self.m - 1)
            for _ in range(q - 2):
                cur = _poly_mulmod(cur, gd, self.modulus, self.p)
                exp.append(self._undigits(cur))
            if len(set(exp)) == q - 1:
                break
        self.gen = g
        self._exp = exp + exp
        self._log = [0] * q
        for i, v in enumerate(exp):
            self._log[v] = i

    def __repr__(self) -> str:
        return f"GF({self.p}^{self.m})" if self.m > 1 else f"GF({self.p})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, GF) and (self.p, self.m) == (other.p, other.m)

    def __hash__(self) -> int:
        return hash((self.p, self.m))

    @property
    def elements(self) -> range:
        return range(self.q)

    def add(self, a: int, b: int) -> int:
        if self.m == 1:
            return (a + b) % self.p
        p, out, k = self.p, 0, 1
        while a or b:
            out += ((a % p + b % p) % p) * k
            a //= p
            b //= p
            k *= p
        return out

    def neg(self, a: int) -> int:
        if self.m == 1:
            return (-a) % self.p
        p, out, k = self.p, 0, 1
        while a:
            out += ((-(a % p)) % p) * k
            a //= p
            k *= p
        return out

    def sub(self, a: int, b: int) -> int:
        return self.add(a, self.neg(b))

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return self._exp[self._log[a] + self._log[b]]

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("inverse of zero")
        return self._exp[(self.q - 1 - self._log[a]) % (self.q - 1)]

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, n: int) -> int:
        if a == 0:
            return 0 if n > 0 else 1
        return self._exp[(self._log[a] * n) % (self.q - 1)]

    def frob(self, a: int, twist: int = 1) -> int:
        """sigma^twist(a) with sigma(a) = a^p; negative twists allowed."""
        t = twist % self.m
        return self.pow(a, self.p ** t) if t else a


@lru_cache(maxsize=None)
def field(p: int, m: int = 1) -> GF:
    return GF(p, m)
