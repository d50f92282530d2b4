"""Partial Raynaud data in characteristic p.

Line bundles are trivialized, so a datum over a point is a support set J of
Frobenius slots and two scalars s_theta, t_theta per slot.  Slot theta feeds
slot theta+1 (mod f) under phi.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .embeddings import Embedding, FieldShape, InfinityType
from .errors import StrataError
from .gf import GF, is_prime
from .jl_combinatorics import _free, compute_Tprime_T1, restrict

TRIVIAL = "trivial"


@dataclass(frozen=True)
class CharacterGroup:
    p: int
    f: int

    def __post_init__(self) -> None:
        if not is_prime(self.p) or self.f < 1:
            raise StrataError("invalid character group", f"p={self.p}, f={self.f}")

    @property
    def order(self) -> int:
        return self.p ** self.f - 1

    def fundamental(self, theta: int) -> int:
        """Residue of chi_theta = chi_0^(p^theta)."""
        return pow(self.p, theta % self.f, self.order) if self.order > 1 else 0


def padic_expansion(group: CharacterGroup, chi: int) -> tuple[int, ...] | str:
    """Digits n_theta with chi = prod chi_theta^n_theta, or ``"trivial"``."""
    q1 = group.order
    if not 0 <= chi < max(q1, 1):
        raise StrataError("invalid character", f"residue {chi} out of range mod {q1}")
    if chi == 0:
        return TRIVIAL
    digits = []
    x = chi
    for _ in range(group.f):
        digits.append(x % group.p)
        x //= group.p
    return tuple(digits)


def character_of(group: CharacterGroup, digits: Sequence[int]) -> int:
    """Residue of prod chi_theta^digits[theta]."""
    q1 = group.order
    total = sum(d * group.p ** i for i, d in enumerate(digits))
    return total % q1 if q1 > 1 else 0


@dataclass(frozen=True)
class RaynaudDatum:
    field: GF
    f: int
    support: frozenset[int]
    s: tuple[int, ...]
    t: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "support", frozenset(self.support))
        object.__setattr__(self, "s", tuple(self.s))
        object.__setattr__(self, "t", tuple(self.t))
        if self.f < 1 or len(self.s) != self.f or len(self.t) != self.f:
            raise StrataError("invalid datum", "need one s and one t per slot")
        if not all(0 <= j < self.f for j in self.support):
            raise StrataError("invalid datum", "support outside the slot range")
        if not all(0 <= x < self.field.q for x in self.s + self.t):
            raise StrataError("invalid datum", "scalar outside the field")

    @property
    def p(self) -> int:
        return self.field.p

    def nxt(self, j: int) -> int:
        return (j + 1) % self.f


def validate_datum(d: RaynaudDatum) -> list[tuple[int, str]]:
    """Violations as (slot, reason); empty means valid."""
    out = []
    for j in range(d.f):
        if d.s[j] and d.t[j]:
            out.append((j, "s*t != 0"))
        if (j not in d.support or d.nxt(j) not in d.support) and (d.s[j] or d.t[j]):
            out.append((j, "nonzero scalar off the support"))
    return out


def _require_valid(d: RaynaudDatum) -> None:
    bad = validate_datum(d)
    if bad:
        j, why = bad[0]
        raise StrataError("invalid datum", f"slot {j}: {why}")


def dual_datum(d: RaynaudDatum) -> RaynaudDatum:
    _require_valid(d)
    return RaynaudDatum(d.field, d.f, d.support, d.t, d.s)


def order(d: RaynaudDatum) -> int:
    _require_valid(d)
    return len(d.support)


def sub_conditions(d: RaynaudDatum, sub: Iterable[int]) -> list[tuple[int, str]]:
    """(slot, 's' or 't') for each scalar that must vanish to cut out ``sub``."""
    sub = frozenset(sub)
    out = []
    for j in range(d.f):
        a, b = j in sub, d.nxt(j) in sub
        if not a and b:
            out.append((j, "s"))
        if a and not b:
            out.append((j, "t"))
    return out


def sub_datum(d: RaynaudDatum, sub: Iterable[int]) -> RaynaudDatum:
    _require_valid(d)
    sub = frozenset(sub)
    if not sub <= d.support:
        raise StrataError("invalid sub-support", "J' must lie inside J")
    for j, which in sub_conditions(d, sub):
        val = d.s[j] if which == "s" else d.t[j]
        if val:
            raise StrataError("sub-datum condition", f"slot {j}: {which}_{j} must vanish")
    s = tuple(d.s[j] if j in sub and d.nxt(j) in sub else 0 for j in range(d.f))
    t = tuple(d.t[j] if j in sub and d.nxt(j) in sub else 0 for j in range(d.f))
    return RaynaudDatum(d.field, d.f, sub, s, t)


def is_morphism(d: RaynaudDatum, e: RaynaudDatum, maps: Sequence[int]) -> bool:
    """Check s'_j f_j^p = f_{j+1} s_j and t'_j f_{j+1} = f_j^p t_j."""
    F = d.field
    for j in range(d.f):
        fj, fn = maps[j], maps[d.nxt(j)]
        fp = F.pow(fj, d.p)
        if F.mul(e.s[j], fp) != F.mul(fn, d.s[j]):
            return False
        if F.mul(e.t[j], fn) != F.mul(fp, d.t[j]):
            return False
    return True


@dataclass(frozen=True)
class ScalarCrystal:
    """One line per occupied slot; Phi and V are scalars between neighbours."""

    dims: tuple[int, ...]
    phi: tuple[int, ...]  # phi[j]: slot j -> slot j+1
    v: tuple[int, ...]    # v[j]: slot j+1 -> slot j


def dieudonne_of(d: RaynaudDatum) -> ScalarCrystal:
    """The line L_theta sits at slot phi(theta)."""
    _require_valid(d)
    f = d.f
    dims = tuple(1 if (j - 1) % f in d.support else 0 for j in range(f))
    phi = tuple(d.s[(j - 1) % f] for j in range(f))
    v = tuple(d.t[(j - 1) % f] for j in range(f))
    return ScalarCrystal(dims, phi, v)


Monomial = tuple[int, ...]


def basis_monomials(d: RaynaudDatum) -> list[Monomial]:
    """Digit tuples with 0 <= m_j < p and m_j = 0 off the support."""
    out: list[Monomial] = [()]
    for j in range(d.f):
        rng = range(d.p) if j in d.support else range(1)
        out = [m + (x,) for m in out for x in rng]
    return out


def algebra_multiply(d: RaynaudDatum, m1: Monomial, m2: Monomial) -> tuple[int, Monomial | None]:
    """(coefficient, monomial) for m1*m2 after reducing x_j^p -> s_j x_{j+1}.

    A zero product is returned as ``(0, None)``.
    """
    _require_valid(d)
    F = d.field
    for m in (m1, m2):
        if len(m) != d.f or any(x and j not in d.support for j, x in enumerate(m)):
            raise StrataError("invalid monomial", str(m))
    digits = [a + b for a, b in zip(m1, m2)]
    coeff = 1
    while True:
        j = next((i for i, x in enumerate(digits) if x >= d.p), None)
        if j is None:
            return coeff, tuple(digits)
        coeff = F.mul(coeff, d.s[j])
        if coeff == 0:
            return 0, None
        digits[j] -= d.p
        digits[d.nxt(j)] += 1


def _slot_free(shape: FieldShape, sigma: InfinityType, slot: tuple[int, int]) -> list[Embedding]:
    k, j = slot
    e = shape.prime(k).e
    return [Embedding(k, j, i) for i in range(1, e + 1) if Embedding(k, j, i) not in sigma.members]


NO_CONSTRAINT = "no constraint"


def kernel_vanishing(shape: FieldShape, sigma: InfinityType, I: Iterable[Embedding],
                     J: Iterable[Embedding], theta: tuple[int, int]) -> tuple[bool, bool, str | None]:
    """(s vanishes, t vanishes, marker) for the scalars at phi^{-1}(theta)."""
    I, J = frozenset(I), frozenset(J)
    k = theta[0]
    if not _free(shape, sigma, k):
        return False, False, NO_CONSTRAINT
    cands = _slot_free(shape, sigma, theta)
    if not cands:
        return False, False, None
    b = cands[0]
    return b in I, b in J, None


def admissible_CT_support(shape: FieldShape, sigma: InfinityType, I: Iterable[Embedding],
                          J: Iterable[Embedding], T: Iterable[Embedding]) -> frozenset[tuple[int, int]]:
    """Slots phi^{-1}(T^1), after checking the sub-datum conditions."""
    I, J, T = frozenset(I), frozenset(J), frozenset(T)
    free = _free(shape, sigma)
    if not (free - I <= T <= J):
        raise StrataError("invalid T", "need I^c <= T <= J")
    _, T1 = compute_Tprime_T1(shape, sigma.members, T)
    support = set()
    for k, pr in enumerate(shape.primes):
        if not restrict(free, k):
            continue
        for j in range(pr.f):
            here = (k, j) in T1
            there = (k, (j + 1) % pr.f) in T1
            if here == there:
                continue
            s0, t0, _ = kernel_vanishing(shape, sigma, I, J, (k, j))
            prev = (j - 1) % pr.f
            if there and not s0:
                raise StrataError("sub-datum condition", f"slot p{k}.t{prev}: s must vanish")
            if here and not t0:
                raise StrataError("sub-datum condition", f"slot p{k}.t{prev}: t must vanish")
        support.update((k, (j - 1) % pr.f) for (kk, j) in T1 if kk == k)
    return frozenset(support)
