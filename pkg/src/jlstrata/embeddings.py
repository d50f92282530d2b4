"""Embedding sets of a totally real field, the shift phi, and signatures.

Every prime above p carries e*f embeddings.  We index them by
``(prime, frob, ram)`` with ``frob`` in ``[0, f)`` and ``ram`` in ``[1, e]``.
Inside one prime the shift phi walks ``ram`` upwards and then moves to the
next Frobenius slot, so the orbit position ``frob*e + ram - 1`` increases by
one under phi.  Position sets are therefore independent of how ``e*f``
factors, which is what the ramification-agnostic tests rely on.
"""

from __future__ import annotations

import re
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, NamedTuple

from .errors import StrataError

PLAIN = "plain"
CONJUGATE = "conjugate"
SIDES = (PLAIN, CONJUGATE)

_LABEL_RE = re.compile(r"^p(\d+)\.t(\d+)\.i(\d+)$")


@dataclass(frozen=True)
class PrimeShape:
    e: int
    f: int

    def __post_init__(self) -> None:
        if not (isinstance(self.e, int) and isinstance(self.f, int)):
            raise StrataError("invalid shape", "e and f must be integers")
        if self.e < 1 or self.f < 1:
            raise StrataError("invalid shape", f"need e, f >= 1, got e={self.e}, f={self.f}")

    @property
    def size(self) -> int:
        return self.e * self.f


class Embedding(NamedTuple):
    """A ramified embedding theta^ram in Frobenius slot ``frob`` of ``prime``.

    A named tuple rather than a dataclass: these are hashed constantly.
    """

    prime: int
    frob: int
    ram: int

    @property
    def label(self) -> str:
        return f"p{self.prime}.t{self.frob}.i{self.ram}"

    @property
    def slot(self) -> tuple[int, int]:
        return (self.prime, self.frob)

    def __str__(self) -> str:
        return self.label

    @classmethod
    def parse(cls, text: str) -> "Embedding":
        m = _LABEL_RE.match(text.strip())
        if m is None:
            raise StrataError("bad label", f"cannot parse embedding label {text!r}")
        return cls(int(m.group(1)), int(m.group(2)), int(m.group(3)))


@dataclass(frozen=True)
class FieldShape:
    primes: tuple[PrimeShape, ...]

    def __post_init__(self) -> None:
        prs = tuple(self.primes)
        if not prs:
            raise StrataError("invalid shape", "a field shape needs at least one prime")
        object.__setattr__(self, "primes", prs)

    @classmethod
    def of(cls, *pairs: tuple[int, int]) -> "FieldShape":
        """``FieldShape.of((e1, f1), (e2, f2))``."""
        return cls(tuple(PrimeShape(e, f) for e, f in pairs))

    @property
    def degree(self) -> int:
        return sum(p.size for p in self.primes)

    def prime(self, k: int) -> PrimeShape:
        if not 0 <= k < len(self.primes):
            raise StrataError("invalid index", f"prime index {k} out of range")
        return self.primes[k]

    def check(self, beta: Embedding) -> Embedding:
        pr = self.prime(beta.prime)
        if not (0 <= beta.frob < pr.f and 1 <= beta.ram <= pr.e):
            raise StrataError("invalid index", f"{beta.label} is not an embedding of this shape")
        return beta

    def position(self, beta: Embedding) -> int:
        """Index of beta along the phi-orbit of its prime."""
        self.check(beta)
        return beta.frob * self.primes[beta.prime].e + beta.ram - 1

    def at(self, prime: int, pos: int) -> Embedding:
        pr = self.prime(prime)
        pos %= pr.size
        return Embedding(prime, pos // pr.e, pos % pr.e + 1)

    def embeddings(self, prime: int | None = None) -> tuple[Embedding, ...]:
        """All embeddings in canonical order (by prime, then orbit position)."""
        return _embeddings(self, prime)

    def slots(self, prime: int | None = None) -> tuple[tuple[int, int], ...]:
        ks = range(len(self.primes)) if prime is None else (prime,)
        return tuple((k, j) for k in ks for j in range(self.prime(k).f))

    def theta(self, k: int, prime: int = 0) -> Embedding:
        """1-based orbit numbering, theta_1 = first embedding of the prime.

        Indices wrap around, so ``theta(0)`` is the last embedding.
        """
        return self.at(prime, k - 1)

    def thetas(self, ks: Iterable[int], prime: int = 0) -> frozenset[Embedding]:
        return frozenset(self.theta(k, prime) for k in ks)

    def numbers(self, S: Iterable[Embedding]) -> list[int]:
        """Inverse of ``thetas``: sorted 1-based orbit numbers."""
        return sorted(self.position(b) + 1 for b in S)

    def key(self, beta: Embedding) -> tuple[int, int]:
        return (beta.prime, self.position(beta))


@lru_cache(maxsize=1024)
def _embeddings(shape: FieldShape, prime: int | None) -> tuple[Embedding, ...]:
    if prime is not None:
        shape.prime(prime)
    ks = range(len(shape.primes)) if prime is None else (prime,)
    return tuple(shape.at(k, n) for k in ks for n in range(shape.prime(k).size))


def phi(shape: FieldShape, beta: Embedding) -> Embedding:
    """theta^{i+1} for i < e, and (phi theta)^1 for i = e."""
    return shape.at(beta.prime, shape.position(beta) + 1)


def phi_inv(shape: FieldShape, beta: Embedding) -> Embedding:
    return shape.at(beta.prime, shape.position(beta) - 1)


def phi_cycle(shape: FieldShape, beta: Embedding, avoid: Iterable[Embedding] = (),
              inverse: bool = False) -> Embedding:
    """phi^n(beta) for the least n >= 1 with phi^n(beta) outside ``avoid``.

    ``beta`` itself may lie in ``avoid``.
    """
    avoid = frozenset(avoid)
    step = -1 if inverse else 1
    pos = shape.position(beta)
    size = shape.prime(beta.prime).size
    for n in range(1, size + 1):
        cand = shape.at(beta.prime, pos + step * n)
        if cand not in avoid:
            return cand
    raise StrataError("degenerate cycle",
                      f"avoid set covers every embedding of prime {beta.prime}")


@dataclass(frozen=True)
class Chain:
    """A maximal run ``phi'^{-n}(tail), ..., tail`` inside a set."""

    tail: Embedding
    members: tuple[Embedding, ...]  # head first, tail last
    whole_cycle: bool = False

    @property
    def length(self) -> int:
        return len(self.members)

    @property
    def n(self) -> int:
        return len(self.members) - 1


def chains(shape: FieldShape, S: Iterable[Embedding],
           avoid: Iterable[Embedding] = ()) -> list[Chain]:
    """Partition S into maximal chains for the cycle skipping ``avoid``."""
    S = frozenset(S)
    avoid = frozenset(avoid)
    if S & avoid:
        raise StrataError("invalid index", "chains: S meets the avoid set")
    for b in S:
        shape.check(b)
    out: list[Chain] = []
    seen: set[Embedding] = set()
    for b in sorted(S, key=shape.key):
        if b in seen:
            continue
        # walk forward to the tail
        tail = b
        whole = False
        steps = 0
        while True:
            nxt = phi_cycle(shape, tail, avoid)
            if nxt not in S:
                break
            if nxt == b:
                whole = True
                break
            tail = nxt
            steps += 1
        if whole:
            # report a whole cycle with its tail at the canonical last element
            members = [b]
            cur = phi_cycle(shape, b, avoid)
            while cur != b:
                members.append(cur)
                cur = phi_cycle(shape, cur, avoid)
            members.sort(key=shape.key)
            tail = members[-1]
            ordered = [tail]
            cur = phi_cycle(shape, tail, avoid, inverse=True)
            while cur != tail:
                ordered.append(cur)
                cur = phi_cycle(shape, cur, avoid, inverse=True)
            ch = Chain(tail, tuple(reversed(ordered)), True)
        else:
            members = [tail]
            cur = phi_cycle(shape, tail, avoid, inverse=True)
            while cur in S:
                members.append(cur)
                cur = phi_cycle(shape, cur, avoid, inverse=True)
            ch = Chain(tail, tuple(reversed(members)), False)
        seen.update(ch.members)
        out.append(ch)
    out.sort(key=lambda c: shape.key(c.tail))
    return out


@dataclass(frozen=True)
class InfinityType:
    """Archimedean ramification Sigma_infty with CM lifts, plus a finite count."""

    members: frozenset[Embedding] = frozenset()
    lift: Mapping[Embedding, str] = field(default_factory=dict)
    finite_count: int = 0

    def __post_init__(self) -> None:
        members = frozenset(self.members)
        lift = dict(self.lift)
        if set(lift) != set(members):
            raise StrataError("invalid infinity type", "lift must be defined exactly on members")
        for b, side in lift.items():
            if side not in SIDES:
                raise StrataError("invalid infinity type", f"bad lift {side!r} for {b.label}")
        if self.finite_count < 0:
            raise StrataError("invalid infinity type", "finite_count must be >= 0")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "lift", lift)

    def __hash__(self) -> int:
        return hash((self.members, tuple(sorted(self.lift.items())), self.finite_count))

    @classmethod
    def plain(cls, members: Iterable[Embedding] = (), finite_count: int = 0) -> "InfinityType":
        members = frozenset(members)
        return cls(members, {b: PLAIN for b in members}, finite_count)

    @property
    def parity_ok(self) -> bool:
        return (len(self.members) + self.finite_count) % 2 == 0

    def require_even(self) -> "InfinityType":
        if not self.parity_ok:
            raise StrataError("parity", "ramification set of a quaternion algebra must have even size")
        return self

    def validate(self, shape: FieldShape) -> "InfinityType":
        for b in self.members:
            shape.check(b)
        return self


def signature(beta: Embedding, sigma: InfinityType, side: str = PLAIN) -> int:
    """s_beta on the requested side of the CM lift."""
    if side not in SIDES:
        raise StrataError("invalid side", side)
    if beta not in sigma.members:
        return 1
    return 0 if sigma.lift[beta] == side else 2


def signature_sum(shape: FieldShape, sigma: InfinityType, slot: tuple[int, int],
                  side: str = PLAIN) -> int:
    """s(e) = sum over ram of the signatures in one Frobenius slot."""
    k, j = slot
    e = shape.prime(k).e
    return sum(signature(Embedding(k, j, i), sigma, side) for i in range(1, e + 1))


def complement(shape: FieldShape, S: Iterable[Embedding], prime: int | None = None) -> frozenset[Embedding]:
    S = frozenset(S)
    return frozenset(b for b in shape.embeddings(prime) if b not in S)


def restrict(S: Iterable[Embedding], prime: int) -> frozenset[Embedding]:
    return frozenset(b for b in S if b.prime == prime)


def sort_embeddings(shape: FieldShape, S: Iterable[Embedding]) -> list[Embedding]:
    return sorted(S, key=shape.key)


def iter_orbit(shape: FieldShape, beta: Embedding) -> Iterator[Embedding]:
    """beta, phi(beta), ... once around the cycle."""
    cur = beta
    for _ in range(shape.prime(beta.prime).size):
        yield cur
        cur = phi(shape, cur)
