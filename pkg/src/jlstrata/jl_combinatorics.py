"""Jacquet-Langlands target data for Iwahori and Goren-Oort strata.

Given a field shape, an infinity type Sigma and a stratum pair (I, J) with
I u J = Theta minus Sigma_infty, compute the splice support T, its extension
T', the slot set T^1, the new ramification Sigma_IJ = Sigma u Sigma^+ with
lifts, and the P^1-bundle index set R.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .embeddings import (CONJUGATE, PLAIN, Embedding, FieldShape, InfinityType,
                         chains, phi, phi_cycle, restrict)
from .errors import StrataError

NORMAL = "normal"
BOTTOM = "bottom"
BOTTOM_EVEN = "bottom_even_iwahori"
BOTTOM_ODD = "bottom_odd_extra_place"
NO_CHANGE = "no_change"

OMEGA = "omega"
DELTA_OMEGA_INV = "delta_omega_inv"
DELTA_MINUS_ONE = "delta_minus_one"
TAUT_ONE = "taut_one"

Slot = tuple[int, int]


def _free(shape: FieldShape, sigma: InfinityType, prime: int | None = None) -> frozenset[Embedding]:
    """Theta minus Sigma_infty, optionally at one prime."""
    return _free_cached(shape, sigma.members, prime)


@lru_cache(maxsize=4096)
def _free_cached(shape: FieldShape, members: frozenset[Embedding], prime: int | None) -> frozenset[Embedding]:
    return frozenset(b for b in shape.embeddings(prime) if b not in members)


def validate_pair(shape: FieldShape, sigma: InfinityType, I: Iterable[Embedding],
                  J: Iterable[Embedding]) -> tuple[str, ...]:
    """Per-prime classification: ``normal`` or ``bottom``."""
    I, J = frozenset(I), frozenset(J)
    free = _free(shape, sigma)
    for b in I | J:
        shape.check(b)
    if not (I <= free and J <= free):
        raise StrataError("not a stratum pair", "I and J must avoid Sigma_infty")
    out = []
    for k in range(len(shape.primes)):
        fk = _free(shape, sigma, k)
        Ik, Jk = restrict(I, k), restrict(J, k)
        if Ik | Jk != fk:
            missing = sorted(b.label for b in fk - (Ik | Jk))
            raise StrataError("not a stratum pair", f"I u J misses {', '.join(missing)}")
        out.append(BOTTOM if Ik == fk and Jk == fk else NORMAL)
    return tuple(out)


def compute_T(shape: FieldShape, sigma: InfinityType, I: Iterable[Embedding],
              J: Iterable[Embedding]) -> frozenset[Embedding]:
    """Canonical T with I^c <= T <= J, built chain by chain on I n J."""
    I, J = frozenset(I), frozenset(J)
    flags = validate_pair(shape, sigma, I, J)
    free = _free(shape, sigma)
    T = set(free - I)
    avoid = sigma.members
    for ch in chains(shape, I & J, avoid):
        if ch.whole_cycle or flags[ch.tail.prime] == BOTTOM:
            raise StrataError("bottom stratum, use classify_bottom",
                              f"I n J covers prime {ch.tail.prime}")
        beta = ch.tail
        nxt = phi_cycle(shape, beta, avoid)
        back = list(reversed(ch.members))  # back[m] = phi'^{-m}(beta)
        n = ch.n
        if nxt not in J:
            T.update(back[2 * k] for k in range(n // 2 + 1))
        elif nxt not in I:
            if n >= 1:
                T.update(back[2 * k + 1] for k in range((n - 1) // 2 + 1))
        else:  # pragma: no cover - excluded by the cover condition
            raise StrataError("not a stratum pair", "chain successor lies in I n J")
    return frozenset(T)


def compute_Tprime_T1(shape: FieldShape, sigma_members: Iterable[Embedding],
                      T: Iterable[Embedding]) -> tuple[frozenset[Embedding], frozenset[Slot]]:
    """Absorb the Sigma_infty chains whose phi-successor lies in T."""
    T = frozenset(T)
    sm = frozenset(sigma_members)
    Tp = set(T)
    for ch in chains(shape, sm):
        if ch.whole_cycle:
            continue
        if phi(shape, ch.tail) in T:
            Tp.update(ch.members)
    Tp = frozenset(Tp)
    T1 = frozenset((b.prime, b.frob) for b in Tp if b.ram == 1)
    return Tp, T1


@dataclass(frozen=True)
class SigmaData:
    sigma_plus: frozenset[Embedding]
    lifts: Mapping[Embedding, str]
    sigma_ij: InfinityType
    R: frozenset[Embedding]
    admissible: bool


def compute_sigma(shape: FieldShape, sigma: InfinityType, T: Iterable[Embedding],
                  IJ: Iterable[Embedding]) -> SigmaData:
    """Sigma^+ (boundary of T along phi'), its lifts, Sigma_IJ and R."""
    T = frozenset(T)
    IJ = frozenset(IJ)
    free = _free(shape, sigma)
    if not T <= free:
        raise StrataError("invalid T", "T must avoid Sigma_infty")
    plus = set()
    for k in range(len(shape.primes)):
        fk = _free(shape, sigma, k)
        if not fk:
            continue
        for b in fk:
            nb = phi_cycle(shape, b, sigma.members)
            if (b in T) != (nb in T):
                plus.add(b)
    plus = frozenset(plus)
    lifts = {b: (CONJUGATE if b in T else PLAIN) for b in plus}
    merged = dict(sigma.lift)
    merged.update(lifts)
    sij = InfinityType(sigma.members | plus, merged, sigma.finite_count)
    return SigmaData(plus, lifts, sij, plus - IJ, IJ <= plus)


@dataclass(frozen=True)
class BundleClass:
    kind: str
    anchor: Embedding
    exponent: int


@dataclass(frozen=True)
class JLTarget:
    T: frozenset[Embedding]
    Tprime: frozenset[Embedding]
    T1: frozenset[Slot]
    Sigma_plus: frozenset[Embedding]
    lifts: Mapping[Embedding, str]
    R: frozenset[Embedding]
    stratum_dim: int
    target_base_dim: int
    per_prime_flags: tuple[str, ...]
    sigma_ij: InfinityType
    admissible: bool = True
    I: frozenset[Embedding] = field(default_factory=frozenset)
    J: frozenset[Embedding] = field(default_factory=frozenset)

    @property
    def sigma_ij_infty(self) -> frozenset[Embedding]:
        return self.sigma_ij.members


def classify_bottom(shape: FieldShape, sigma: InfinityType, prime: int,
                    I: Iterable[Embedding] | None = None,
                    J: Iterable[Embedding] | None = None) -> tuple[str, frozenset[Embedding], int]:
    """(flag, embeddings gained, finite places gained) for a bottom prime."""
    fk = _free(shape, sigma, prime)
    if I is not None and J is not None:
        if restrict(I, prime) != fk or restrict(J, prime) != fk:
            raise StrataError("not a bottom prime", f"prime {prime} is normal")
    if not fk:
        return NO_CHANGE, frozenset(), 0
    if len(fk) % 2 == 0:
        return BOTTOM_EVEN, fk, 0
    return BOTTOM_ODD, fk, 1


def _check_cycles(shape: FieldShape, sigma: InfinityType) -> None:
    for k in range(len(shape.primes)):
        if not _free(shape, sigma, k):
            raise StrataError("degenerate cycle", f"Sigma_infty covers prime {k}")


def jl_target(shape: FieldShape, sigma: InfinityType, I: Iterable[Embedding],
              J: Iterable[Embedding], T: Iterable[Embedding] | None = None) -> JLTarget:
    """Full target bundle; pass ``T`` to override the canonical choice."""
    I, J = frozenset(I), frozenset(J)
    sigma.validate(shape)
    _check_cycles(shape, sigma)
    flags = list(validate_pair(shape, sigma, I, J))
    normal = [k for k, fl in enumerate(flags) if fl == NORMAL]
    bottom = [k for k, fl in enumerate(flags) if fl == BOTTOM]
    In = frozenset(b for b in I if b.prime in normal)
    Jn = frozenset(b for b in J if b.prime in normal)
    if T is None:
        Tn = _compute_T_normal(shape, sigma, In, Jn, normal)
    else:
        Tn = frozenset(T)
        if any(b.prime not in normal for b in Tn):
            raise StrataError("invalid T", "T must live on normal primes")
    sig_normal = frozenset(b for b in sigma.members if b.prime in normal)
    Tp, T1 = compute_Tprime_T1(shape, sig_normal, Tn)
    sd = compute_sigma(shape, sigma, Tn, In & Jn)
    # compute_sigma sees bottom primes as fully outside T; drop them
    plus = frozenset(b for b in sd.sigma_plus if b.prime in normal)
    lifts = {b: sd.lifts[b] for b in plus}
    finite = sigma.finite_count
    for k in bottom:
        fl, gained, extra = classify_bottom(shape, sigma, k)
        flags[k] = fl
        plus |= gained
        lifts.update({b: PLAIN for b in gained})
        finite += extra
    merged = dict(sigma.lift)
    merged.update(lifts)
    sij = InfinityType(sigma.members | plus, merged, finite)
    IJ = I & J
    R = plus - IJ
    free = _free(shape, sigma)
    stratum_dim = len(free) - len(IJ)
    base_dim = shape.degree - len(sij.members)
    return JLTarget(T=Tn, Tprime=Tp, T1=T1, Sigma_plus=plus, lifts=lifts, R=R,
                    stratum_dim=stratum_dim, target_base_dim=base_dim,
                    per_prime_flags=tuple(flags), sigma_ij=sij,
                    admissible=IJ <= plus, I=I, J=J)


def _compute_T_normal(shape, sigma, In, Jn, normal) -> frozenset[Embedding]:
    # Bottom primes are excluded by pretending they are covered by J only.
    fill = frozenset(b for b in _free(shape, sigma) if b.prime not in normal)
    T = compute_T(shape, sigma, In, Jn | fill)
    return frozenset(b for b in T if b.prime in normal)


def goren_oort_target(shape: FieldShape, sigma: InfinityType,
                      T_go: Iterable[Embedding]) -> JLTarget:
    """A GO stratum is the Iwahori stratum with I = Theta - Sigma_infty, J = T_GO."""
    return jl_target(shape, sigma, _free(shape, sigma), frozenset(T_go))


def _class_kind(in_R: bool, next_in_T: bool) -> str:
    if not in_R:
        return DELTA_OMEGA_INV if next_in_T else OMEGA
    return DELTA_MINUS_ONE if next_in_T else TAUT_ONE


def _slot_crossings(shape: FieldShape, start: Embedding, end: Embedding) -> int:
    """Slot boundaries crossed walking phi forward from ``start`` to ``end``."""
    n = 0
    cur = start
    for _ in range(shape.prime(start.prime).size + 1):
        if cur == end:
            return n
        nxt = phi(shape, cur)
        if nxt.ram == 1:
            n += 1
        cur = nxt
    raise StrataError("invalid index", "embeddings lie on different primes")


def raynaud_bundle_class(shape: FieldShape, sigma: InfinityType, I: Iterable[Embedding],
                         J: Iterable[Embedding], theta: Slot) -> BundleClass:
    """Class of the line bundle attached to the slot ``theta``."""
    I, J = frozenset(I), frozenset(J)
    tgt = jl_target(shape, sigma, I, J)
    k, j = theta
    pr = shape.prime(k)
    if tgt.per_prime_flags[k] != NORMAL:
        raise StrataError("bottom stratum, use classify_bottom", f"prime {k} is not normal")
    nxt = Embedding(k, (j + 1) % pr.f, 1)
    beta = phi_cycle(shape, nxt, sigma.members | (I & J), inverse=True)
    n = (j - beta.frob) % pr.f
    kind = _class_kind(beta in tgt.R, (k, nxt.frob) in tgt.T1)
    return BundleClass(kind, beta, n)


def tame_bundle_class(shape: FieldShape, sigma: InfinityType, J: Iterable[Embedding],
                      beta: Embedding) -> BundleClass:
    """Class of the pushed-forward Hodge line at ``beta`` on a GO stratum J."""
    J = frozenset(J)
    if beta in sigma.members:
        raise StrataError("invalid embedding", f"{beta.label} lies in Sigma_infty")
    tgt = goren_oort_target(shape, sigma, J)
    if tgt.per_prime_flags[beta.prime] != NORMAL:
        raise StrataError("bottom stratum, use classify_bottom", f"prime {beta.prime} is not normal")
    nb = phi_cycle(shape, beta, sigma.members)
    bp = phi_cycle(shape, nb, sigma.members | J, inverse=True)
    n = _slot_crossings(shape, bp, beta)
    kind = _class_kind(bp in tgt.R, nb in tgt.T)
    return BundleClass(kind, bp, n)


def iter_pairs(shape: FieldShape, sigma: InfinityType) -> Iterator[tuple[frozenset, frozenset]]:
    """All 3^n stratum pairs (I, J) in a fixed order.

    Each free embedding is tagged 0 (I only), 1 (J only) or 2 (both).
    """
    free = sorted(_free(shape, sigma), key=shape.key)
    for tags in itertools.product((0, 1, 2), repeat=len(free)):
        I = frozenset(b for b, t in zip(free, tags) if t != 1)
        J = frozenset(b for b, t in zip(free, tags) if t != 0)
        yield I, J


def rotate(shape: FieldShape, S: Iterable[Embedding], steps: Mapping[int, int]) -> frozenset[Embedding]:
    """Shift positions prime by prime."""
    return frozenset(shape.at(b.prime, shape.position(b) + steps.get(b.prime, 0)) for b in S)


def rotation_group(shape: FieldShape, sigma: InfinityType) -> list[dict[int, int]]:
    """Per-prime rotations that fix Sigma_infty with its lifts."""
    per_prime = []
    for k, pr in enumerate(shape.primes):
        ok = []
        for r in range(pr.size):
            moved = {shape.at(k, shape.position(b) + r): sigma.lift[b]
                     for b in sigma.members if b.prime == k}
            here = {b: sigma.lift[b] for b in sigma.members if b.prime == k}
            if moved == here:
                ok.append(r)
        per_prime.append(ok)
    return [dict(enumerate(combo)) for combo in itertools.product(*per_prime)]
