"""Mod-p Dieudonne modules of rank two over k[u]/u^e, one block per prime.

Conventions
-----------
* ``D_j`` is ``k^{2e}`` in the basis e1, u e1, ..., u^{e-1} e1, e2, ..., u^{e-1} e2.
* ``Phi_j : D_j -> D_{j+1}`` is ``x -> phi[j] . sigma(x)`` and
  ``V_j : D_{j+1} -> D_j`` is ``y -> v[j] . sigma^{-1}(y)``.
* The Hodge piece is ``omega_j = V_j(D_{j+1})``.
* Maps between the rank-two pieces H^1 are stored as a 2x2 matrix ``M``
  and a Frobenius twist ``t`` acting on coordinates as ``c -> M sigma^t(c)``.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from . import linalg as la
from .embeddings import Embedding, FieldShape, InfinityType, PLAIN, signature
from .errors import InvariantViolation, StrataError
from .gf import GF, field as gf_field

Mat = la.Mat
Vec = la.Vec
Slot = tuple[int, int]


@dataclass(frozen=True)
class TruncRing:
    """k[u]/u^e together with the free module of rank two over it."""

    field: GF
    e: int

    def __post_init__(self) -> None:
        if self.e < 1:
            raise StrataError("invalid ring", "e must be >= 1")

    @property
    def dim(self) -> int:
        return 2 * self.e

    @property
    def N(self) -> Mat:
        e = self.e
        rows = [[0] * (2 * e) for _ in range(2 * e)]
        for blk in (0, e):
            for a in range(e - 1):
                rows[blk + a + 1][blk + a] = 1
        return tuple(tuple(r) for r in rows)

    def upow(self, k: int) -> Mat:
        M = la.identity(self.dim)
        for _ in range(k):
            M = la.matmul(self.field, self.N, M)
        return M

    def matrix(self, G: Sequence[Sequence[Sequence[int]]]) -> Mat:
        """k-matrix of the 2x2 matrix G over k[u]/u^e (entries as coefficient lists)."""
        e = self.e
        rows = [[0] * (2 * e) for _ in range(2 * e)]
        for i in range(2):
            for j in range(2):
                coeffs = list(G[i][j])[:e]
                for b in range(e):
                    for c in range(b, e):
                        if c - b < len(coeffs):
                            rows[i * e + c][j * e + b] = coeffs[c - b]
        return tuple(tuple(r) for r in rows)

    def diag_upow(self, a: int, c: int) -> Mat:
        """diag(u^a, u^c), with u^e = 0."""
        def mono(k: int) -> list[int]:
            return [0] * self.e if k >= self.e else [0] * k + [1]
        zero = [0] * self.e
        return self.matrix([[mono(a), zero], [zero, mono(c)]])

    def vec(self, c1: Sequence[int], c2: Sequence[int]) -> Vec:
        """Vector c1(u) e1 + c2(u) e2."""
        e = self.e
        v = [0] * (2 * e)
        for k, x in enumerate(list(c1)[:e]):
            v[k] = x
        for k, x in enumerate(list(c2)[:e]):
            v[e + k] = x
        return tuple(v)

    def whole(self) -> Mat:
        return la.identity(self.dim)

    def times_u(self, W: Sequence[Vec], k: int = 1) -> Mat:
        return la.image_of(self.field, self.upow(k), W)

    def u_inverse(self, W: Sequence[Vec], k: int = 1) -> Mat:
        return la.preimage(self.field, self.upow(k), W, self.dim)

    def ker_u(self, k: int = 1) -> Mat:
        return la.nullspace(self.field, self.upow(k), self.dim)

    def is_u_linear(self, A: Mat) -> bool:
        F = self.field
        return la.matmul(F, A, self.N) == la.matmul(F, self.N, A)


@dataclass(frozen=True)
class Block:
    """One prime: f Frobenius slots over the ring k[u]/u^e."""

    ring: TruncRing
    phi: tuple[Mat, ...]
    v: tuple[Mat, ...]

    @property
    def f(self) -> int:
        return len(self.phi)


@dataclass(frozen=True)
class DModule:
    field: GF
    blocks: tuple[Block, ...]

    @property
    def shape(self) -> FieldShape:
        return FieldShape.of(*((b.ring.e, b.f) for b in self.blocks))

    def slots(self) -> list[Slot]:
        return [(k, j) for k, b in enumerate(self.blocks) for j in range(b.f)]

    def ring(self, k: int) -> TruncRing:
        return self.blocks[k].ring

    def nxt(self, slot: Slot) -> Slot:
        k, j = slot
        return (k, (j + 1) % self.blocks[k].f)

    def prev(self, slot: Slot) -> Slot:
        k, j = slot
        return (k, (j - 1) % self.blocks[k].f)

    def Phi(self, slot: Slot) -> Mat:
        return self.blocks[slot[0]].phi[slot[1]]

    def V(self, slot: Slot) -> Mat:
        return self.blocks[slot[0]].v[slot[1]]

    def omega(self, slot: Slot) -> Mat:
        """V(D_{next}) inside D_slot."""
        return la.image(self.field, self.V(slot), self.ring(slot[0]).dim)


def validate(D: DModule) -> list[tuple[Slot, str]]:
    """Violations of the Dieudonne axioms, as (slot, reason)."""
    F = D.field
    out: list[tuple[Slot, str]] = []
    for slot in D.slots():
        R = D.ring(slot[0])
        n = R.dim
        A, B = D.Phi(slot), D.V(slot)
        if len(A) != n or len(B) != n:
            out.append((slot, "matrix size"))
            continue
        if not (R.is_u_linear(A) and R.is_u_linear(B)):
            out.append((slot, "not u-linear"))
        if not la.is_zero(la.matmul(F, B, la.frob_mat(F, A, -1))):
            out.append((slot, "V Phi != 0"))
        if not la.is_zero(la.matmul(F, A, la.frob_mat(F, B, 1))):
            out.append((slot, "Phi V != 0"))
        im_phi = la.image(F, A, n)
        ker_v = la.span(F, [la.frob_vec(F, x, 1) for x in la.nullspace(F, B, n)], n)
        if im_phi != ker_v:
            out.append((slot, "im Phi != ker V"))
        ker_phi = la.span(F, [la.frob_vec(F, x, -1) for x in la.nullspace(F, A, n)], n)
        im_v = la.image(F, B, n)
        if ker_phi != im_v:
            out.append((slot, "ker Phi != im V"))
    return out


# ----------------------------------------------------------------------------
# Filtrations


@dataclass(frozen=True)
class PRFiltration:
    """Per slot a chain omega(0) = 0 <= ... <= omega(e), as rref bases."""

    chains: Mapping[Slot, tuple[Mat, ...]]

    def chain(self, slot: Slot) -> tuple[Mat, ...]:
        return self.chains[slot]

    def type(self, slot: Slot) -> tuple[int, ...]:
        ch = self.chains[slot]
        return tuple(len(ch[i]) - len(ch[i - 1]) for i in range(1, len(ch)))

    def s(self, beta: Embedding) -> int:
        return self.type((beta.prime, beta.frob))[beta.ram - 1]

    def sigma_infty(self, shape: FieldShape) -> frozenset[Embedding]:
        return frozenset(b for b in shape.embeddings() if self.s(b) != 1)


def check_filtration(D: DModule, filt: PRFiltration) -> list[tuple[Slot, str]]:
    F = D.field
    out = []
    for slot in D.slots():
        R = D.ring(slot[0])
        ch = filt.chains.get(slot)
        if ch is None or len(ch) != R.e + 1:
            out.append((slot, "chain length"))
            continue
        if ch[0]:
            out.append((slot, "omega(0) != 0"))
        if la.span(F, ch[-1], R.dim) != D.omega(slot):
            out.append((slot, "omega(e) != V(D)"))
        for i in range(1, R.e + 1):
            if not la.contains(F, ch[i], ch[i - 1], R.dim):
                out.append((slot, f"not increasing at {i}"))
            if not la.contains(F, ch[i - 1], R.times_u(ch[i]), R.dim):
                out.append((slot, f"u omega({i}) not in omega({i - 1})"))
            if len(ch[i]) - len(ch[i - 1]) not in (0, 1, 2):
                out.append((slot, f"graded piece {i} has bad dimension"))
    return out


def forced_filtration(ring: TruncRing, omega: Sequence[Vec], typ: Sequence[int]) -> tuple[Mat, ...]:
    """The unique chain of type ``typ`` ending at omega, built from the top.

    s_j = 0: omega(j-1) = omega(j); s_j = 2: omega(j-1) = u omega(j);
    s_j = 1: omega(j-1) = u omega(j) + ker u^{d_{j-1}} with d_{j-1} the
    number of 2's among s_1..s_{j-1}.
    """
    F = ring.field
    e, n = ring.e, ring.dim
    typ = tuple(typ)
    if len(typ) != e or any(s not in (0, 1, 2) for s in typ):
        raise StrataError("invalid type", str(typ))
    top = la.span(F, omega, n)
    if len(top) != sum(typ):
        raise StrataError("no filtration of this type exists", "dim omega != s(e)")
    # the descent is only forced when omega ~ <u^b e1, u^{e-d} e2> with b, d
    # the numbers of 0s and 2s in the type; otherwise chains may exist but
    # are not unique
    b, d = typ.count(0), typ.count(2)
    want_dims = [max(0, e - b - k) + max(0, d - k) for k in range(e + 1)]
    if [len(ring.times_u(top, k)) for k in range(e + 1)] != want_dims:
        raise StrataError("type does not match omega",
                          f"omega is not of Rapoport form (b={b}, d={d}) for type {typ}")
    chain = [top]
    cur = top
    for j in range(e, 0, -1):
        s = typ[j - 1]
        d_prev = sum(1 for x in typ[: j - 1] if x == 2)
        if s == 0:
            nxt = cur
        elif s == 2:
            nxt = ring.times_u(cur)
        else:
            nxt = la.subspace_sum(F, ring.times_u(cur), ring.ker_u(d_prev) if d_prev else (), n)
        want = sum(typ[: j - 1])
        ok = (len(nxt) == want and la.contains(F, cur, nxt, n)
              and la.contains(F, nxt, ring.times_u(cur), n))
        if not ok:
            raise StrataError("no filtration of this type exists", f"step {j} of type {typ}")
        chain.append(nxt)
        cur = nxt
    if chain[-1]:
        raise StrataError("no filtration of this type exists", "omega(0) != 0")
    return tuple(reversed(chain))


def all_subspaces(F: GF, n: int, k: int) -> Iterator[Mat]:
    """Every k-dimensional subspace of F^n, as an rref basis."""
    for pivots in itertools.combinations(range(n), k):
        slots = [(r, c) for r, p in enumerate(pivots) for c in range(p + 1, n) if c not in pivots]
        for vals in itertools.product(F.elements, repeat=len(slots)):
            rows = [[0] * n for _ in range(k)]
            for r, p in enumerate(pivots):
                rows[r][p] = 1
            for (r, c), x in zip(slots, vals):
                rows[r][c] = x
            yield tuple(tuple(r) for r in rows)


def brute_force_filtrations(ring: TruncRing, omega: Sequence[Vec], typ: Sequence[int]) -> list[tuple[Mat, ...]]:
    """All chains of type ``typ`` below omega, found by enumeration."""
    F = ring.field
    n = ring.dim
    typ = tuple(typ)
    top = la.span(F, omega, n)
    if len(top) != sum(typ):
        return []
    results = []

    def descend(j: int, cur: Mat, acc: list[Mat]) -> None:
        if j == 0:
            if not cur:
                results.append(tuple(reversed(acc)))
            return
        want = sum(typ[: j - 1])
        floor = ring.times_u(cur)
        if len(floor) > want:
            return
        # every admissible X satisfies u omega(j) <= X <= omega(j), so run
        # over all subspaces of the quotient omega(j) / u omega(j)
        extra: list[Vec] = []
        for x in cur:
            if not la.contains(F, list(floor) + extra, [x], n):
                extra.append(x)
        for sub in all_subspaces(F, len(extra), want - len(floor)):
            X = la.span(F, list(floor) + [_combine(F, extra, c) for c in sub], n)
            descend(j - 1, X, acc + [X])

    descend(len(typ), top, [top])
    return results


def _combine(F: GF, basis: Sequence[Vec], coeffs: Sequence[int]) -> Vec:
    out = [0] * len(basis[0])
    for c, b in zip(coeffs, basis):
        if c:
            out = [F.add(x, F.mul(c, y)) for x, y in zip(out, b)]
    return tuple(out)


def rapoport_form(ring: TruncRing, b: int, d: int) -> Mat:
    """omega = <u^b e1, u^{e-d} e2> as a k-subspace."""
    return submodule_generated(ring, _rap_gens(ring, b, d))


def submodule_generated(ring: TruncRing, gens: Sequence[Vec]) -> Mat:
    F = ring.field
    vecs = []
    for g in gens:
        for k in range(ring.e):
            vecs.append(la.matvec(F, ring.upow(k), g))
    return la.span(F, vecs, ring.dim)


def gl2_generators(ring: TruncRing) -> list[Mat]:
    F, e = ring.field, ring.e
    zero = [0] * e
    one = [1] + [0] * (e - 1)
    scalars = sorted({1, F.gen})
    gens = []
    for k in range(e):
        for c in scalars:
            mono = [0] * k + [c] + [0] * (e - k - 1)
            gens.append(ring.matrix([[one, mono], [zero, one]]))
            gens.append(ring.matrix([[one, zero], [mono, one]]))
            if k > 0:
                unit = list(one)
                unit[k] = c
                gens.append(ring.matrix([[unit, zero], [zero, one]]))
    gens.append(ring.matrix([[[F.gen] + [0] * (e - 1), zero], [zero, one]]))
    return gens


def rapoport_orbit(ring: TruncRing, b: int, d: int, limit: int = 100000) -> list[Mat]:
    """GL_2(k[u]/u^e)-orbit of <u^b e1, u^{e-d} e2>, by breadth-first search."""
    F = ring.field
    start = submodule_generated(ring, _rap_gens(ring, b, d))
    gens = gl2_generators(ring)
    seen = {start}
    queue = deque([start])
    while queue:
        W = queue.popleft()
        for g in gens:
            X = la.image_of(F, g, W)
            if X not in seen:
                seen.add(X)
                if len(seen) > limit:
                    raise StrataError("size guard", "orbit too large")
                queue.append(X)
    return sorted(seen)


def _rap_gens(ring: TruncRing, b: int, d: int) -> list[Vec]:
    e = ring.e
    gens = []
    if b < e:
        gens.append(ring.vec([0] * b + [1], []))
    if d > 0:
        gens.append(ring.vec([], [0] * (e - d) + [1]))
    return gens


# ----------------------------------------------------------------------------
# H^1 pieces and the essential maps


@dataclass(frozen=True)
class H1Space:
    slot: Slot
    i: int
    num: Mat
    den: Mat
    basis: tuple[Vec, ...]
    F: GF = field(repr=False, compare=False, default=None)  # type: ignore[assignment]

    @property
    def n(self) -> int:
        return len(self.basis[0]) if self.basis else 0

    def coords(self, x: Sequence[int]) -> Vec:
        F = self.F
        cols = list(self.basis) + list(self.den)
        sol = la.solve(F, la.from_columns(cols, len(x)), x, len(cols))
        if sol is None:
            raise InvariantViolation(f"vector not in H1 numerator at {self.slot}, i={self.i}")
        return tuple(sol[: len(self.basis)])

    def contains(self, x: Sequence[int]) -> bool:
        return la.contains(self.F, self.num, [tuple(x)], len(x))


@dataclass(frozen=True)
class H1Map:
    src: H1Space
    dst: H1Space
    M: Mat
    twist: int
    label: str = ""

    @property
    def field(self) -> GF:
        return self.src.F

    def __call__(self, c: Sequence[int]) -> Vec:
        F = self.field
        return la.matvec(F, self.M, la.frob_vec(F, c, self.twist))

    def then(self, other: "H1Map") -> "H1Map":
        """``other`` after ``self``."""
        F = self.field
        M = la.matmul(F, other.M, la.frob_mat(F, self.M, other.twist))
        return H1Map(self.src, other.dst, M, self.twist + other.twist,
                     f"{other.label}*{self.label}")

    @property
    def rank(self) -> int:
        return la.rank(self.field, self.M)

    @property
    def invertible(self) -> bool:
        return self.rank == len(self.M)

    def is_zero(self) -> bool:
        return la.is_zero(self.M)

    def inverse(self) -> "H1Map":
        F = self.field
        try:
            Minv = la.inverse(F, self.M)
        except ZeroDivisionError:
            raise StrataError("not invertible", f"{self.label} at {self.dst.slot}") from None
        return H1Map(self.dst, self.src, la.frob_mat(F, Minv, -self.twist), -self.twist,
                     f"({self.label})^-1")

    def kernel(self) -> Mat:
        """Kernel in source coordinates."""
        F = self.field
        K = la.nullspace(F, self.M, len(self.M[0]))
        return la.span(F, [la.frob_vec(F, x, -self.twist) for x in K], len(self.M[0]))

    def image(self) -> Mat:
        return la.image(self.field, self.M, len(self.M))


def _space(D: DModule, filt: PRFiltration, slot: Slot, i: int) -> H1Space:
    F = D.field
    R = D.ring(slot[0])
    if not 1 <= i <= R.e:
        raise StrataError("invalid index", f"i={i} outside [1, {R.e}]")
    below = filt.chain(slot)[i - 1]
    num = R.u_inverse(below)
    if len(num) - len(below) != 2:
        raise InvariantViolation(f"H1 at {slot}, i={i} has dimension {len(num) - len(below)}")
    chosen: list[Vec] = []
    for x in num:
        if not la.contains(F, list(below) + chosen, [x], R.dim):
            chosen.append(x)
    return H1Space(slot, i, num, below, tuple(chosen), F)


def h1_at(D: DModule, filt: PRFiltration, slot: Slot, i: int) -> H1Space:
    """u^{-1} omega(i-1) / omega(i-1); always two-dimensional on valid input."""
    return _space(D, filt, slot, i)


def _induced(src: H1Space, dst: H1Space, images: Sequence[Vec], twist: int, label: str) -> H1Map:
    cols = []
    for y in images:
        if not dst.contains(y):
            raise InvariantViolation(f"{label} leaves the H1 numerator at {dst.slot}")
        cols.append(dst.coords(y))
    return H1Map(src, dst, la.from_columns(cols, 2), twist, label)


def _check_den(F: GF, A: Mat, twist: int, src: H1Space, dst: H1Space, label: str) -> None:
    for x in src.den:
        y = la.matvec(F, A, la.frob_vec(F, x, twist))
        if not la.contains(F, dst.den, [y], len(y)):
            raise InvariantViolation(f"{label} is not well defined on the quotient")


def _prev_space(D: DModule, filt: PRFiltration, slot: Slot, i: int) -> tuple[H1Space, int]:
    """H^1 at phi^{-1}(tau^i) and the signature s there."""
    if i > 1:
        return _space(D, filt, slot, i - 1), filt.type(slot)[i - 2]
    ps = D.prev(slot)
    e = D.ring(slot[0]).e
    return _space(D, filt, ps, e), filt.type(ps)[e - 1]


def mult_u(D: DModule, filt: PRFiltration, slot: Slot, i: int) -> H1Map:
    """[u]: H^1_{tau^i} -> H^1_{tau^{i-1}}, i > 1."""
    F = D.field
    R = D.ring(slot[0])
    src, dst = _space(D, filt, slot, i), _space(D, filt, slot, i - 1)
    _check_den(F, R.N, 0, src, dst, "u")
    return _induced(src, dst, [la.matvec(F, R.N, b) for b in src.basis], 0, "u")


def inclusion(D: DModule, filt: PRFiltration, slot: Slot, i: int) -> H1Map:
    """Map H^1_{tau^{i-1}} -> H^1_{tau^i} induced by the identity, i > 1."""
    src, dst = _space(D, filt, slot, i - 1), _space(D, filt, slot, i)
    _check_den(D.field, la.identity(src.n), 0, src, dst, "incl")
    return _induced(src, dst, list(src.basis), 0, "incl")


def frob_map(D: DModule, filt: PRFiltration, slot: Slot) -> H1Map:
    """F: H^1_{(phi^{-1} tau)^e} -> H^1_{tau^1}."""
    F = D.field
    ps = D.prev(slot)
    e = D.ring(slot[0]).e
    src, dst = _space(D, filt, ps, e), _space(D, filt, slot, 1)
    A = D.Phi(ps)
    _check_den(F, A, 1, src, dst, "F")
    imgs = [la.matvec(F, A, la.frob_vec(F, b, 1)) for b in src.basis]
    return _induced(src, dst, imgs, 1, "F")


def _lift(R: TruncRing, x: Vec) -> Vec:
    """First basis solution x' of u^{e-1} x' = x."""
    sol = la.solve(R.field, R.upow(R.e - 1), x, R.dim)
    if sol is None:
        raise InvariantViolation("vector not divisible by u^{e-1}")
    return sol


def v_prime(D: DModule, filt: PRFiltration, slot: Slot, lift_shift: Sequence[int] | None = None) -> H1Map:
    """V': H^1_{tau^1} -> H^1_{(phi^{-1} tau)^e}, x -> V(x') with u^{e-1} x' = x.

    ``lift_shift`` adds a fixed element of uD to every lift; the result must
    not depend on it.
    """
    F = D.field
    R = D.ring(slot[0])
    ps = D.prev(slot)
    src, dst = _space(D, filt, slot, 1), _space(D, filt, ps, R.e)
    B = D.V(ps)
    imgs = []
    for b in src.basis:
        xp = _lift(R, b)
        if lift_shift is not None:
            shift = la.matvec(F, R.N, lift_shift)
            xp = tuple(F.add(a, c) for a, c in zip(xp, shift))
        imgs.append(la.matvec(F, B, la.frob_vec(F, xp, -1)))
    return _induced(src, dst, imgs, -1, "V'")


def f_es(D: DModule, filt: PRFiltration, slot: Slot, i: int) -> H1Map:
    """Essential Frobenius into H^1_{tau^i}."""
    _, s_prev = _prev_space(D, filt, slot, i)
    if i > 1:
        if s_prev in (0, 1):
            return inclusion(D, filt, slot, i)
        return mult_u(D, filt, slot, i).inverse()
    if s_prev in (0, 1):
        return frob_map(D, filt, slot)
    return v_prime(D, filt, slot).inverse()


def v_es(D: DModule, filt: PRFiltration, slot: Slot, i: int) -> H1Map:
    """Essential Verschiebung out of H^1_{tau^i}."""
    _, s_prev = _prev_space(D, filt, slot, i)
    if i > 1:
        if s_prev in (1, 2):
            return mult_u(D, filt, slot, i)
        m = inclusion(D, filt, slot, i)  # identity between equal quotients
        return m.inverse()
    if s_prev in (1, 2):
        return v_prime(D, filt, slot)
    return frob_map(D, filt, slot).inverse()


def es_inverse(D: DModule, filt: PRFiltration, slot: Slot, i: int, which: str = "f") -> H1Map:
    _, s_prev = _prev_space(D, filt, slot, i)
    if s_prev == 1:
        raise StrataError("inverse requested where the case table forbids it",
                          f"s = 1 before slot {slot}, i={i}")
    m = f_es(D, filt, slot, i) if which == "f" else v_es(D, filt, slot, i)
    return m.inverse()


def omega_line(D: DModule, filt: PRFiltration, beta: Embedding) -> Mat:
    """omega_beta inside H^1_beta, in H^1 coordinates."""
    slot = (beta.prime, beta.frob)
    H = _space(D, filt, slot, beta.ram)
    top = filt.chain(slot)[beta.ram]
    return la.span(D.field, [H.coords(x) for x in top], 2)


@dataclass(frozen=True)
class HasseResult:
    beta: Embedding
    target: Embedding
    composite: H1Map
    image: Vec
    vanishes: bool


def partial_hasse(D: DModule, filt: PRFiltration, beta: Embedding) -> HasseResult:
    shape = D.shape
    if filt.s(beta) != 1:
        raise StrataError("signature not 1", f"s at {beta.label} is {filt.s(beta)}")
    from .embeddings import phi_cycle, phi_inv

    avoid = filt.sigma_infty(shape)
    target = phi_cycle(shape, beta, avoid, inverse=True)
    cur = beta
    comp: H1Map | None = None
    while True:
        m = v_es(D, filt, (cur.prime, cur.frob), cur.ram)
        comp = m if comp is None else comp.then(m)
        cur = phi_inv(shape, cur)
        if cur == target:
            break
    line = omega_line(D, filt, beta)
    img = comp(line[0])
    return HasseResult(beta, target, comp, img, not any(img))


def go_type(D: DModule, filt: PRFiltration) -> frozenset[Embedding]:
    out = set()
    shape = D.shape
    for b in shape.embeddings():
        if filt.s(b) != 1:
            continue
        if partial_hasse(D, filt, b).vanishes:
            out.add(b)
    return frozenset(out)


# ----------------------------------------------------------------------------
# Duality


@dataclass(frozen=True)
class PairingData:
    """2x2 matrix G over k[u]/u^e; <x, y> is the u^{e-1} coefficient of x^T G y."""

    ring: TruncRing
    G: tuple

    @classmethod
    def standard(cls, ring: TruncRing) -> "PairingData":
        F, e = ring.field, ring.e
        one = [1] + [0] * (e - 1)
        mone = [F.neg(1)] + [0] * (e - 1)
        zero = [0] * e
        return cls(ring, ((tuple(zero), tuple(one)), (tuple(mone), tuple(zero))))

    @property
    def P(self) -> Mat:
        R = self.ring
        e = R.e
        rows = [[0] * (2 * e) for _ in range(2 * e)]
        for i in range(2):
            for j in range(2):
                g = list(self.G[i][j]) + [0] * e
                for a in range(e):
                    for b in range(e):
                        deg = e - 1 - a - b
                        if deg >= 0:
                            rows[i * e + a][j * e + b] = g[deg]
        return tuple(tuple(r) for r in rows)

    def is_perfect(self) -> bool:
        return la.rank(self.ring.field, self.P) == self.ring.dim

    def transpose(self) -> "PairingData":
        """The same pairing read from the other side."""
        G = self.G
        return PairingData(self.ring, ((G[0][0], G[1][0]), (G[0][1], G[1][1])))

    def perp(self, W: Sequence[Vec]) -> Mat:
        F = self.ring.field
        n = self.ring.dim
        if not W:
            return la.identity(n)
        rows = la.matmul(F, W, self.P)
        return la.nullspace(F, rows, n)


def _pairing_for(D: DModule, pairing: Mapping[int, PairingData] | PairingData | None, k: int) -> PairingData:
    if pairing is None:
        return PairingData.standard(D.ring(k))
    if isinstance(pairing, PairingData):
        return pairing
    return pairing[k]


def dual_filtration(D: DModule, filt: PRFiltration,
                    pairing: Mapping[int, PairingData] | PairingData | None = None) -> PRFiltration:
    """omega^c(i) = u^{e-i} . omega(i)^perp on every slot."""
    chains = {}
    for slot in D.slots():
        pd = _pairing_for(D, pairing, slot[0])
        if not pd.is_perfect():
            raise StrataError("pairing not perfect", f"prime {slot[0]}")
        R = pd.ring
        ch = filt.chain(slot)
        chains[slot] = tuple(R.times_u(pd.perp(ch[i]), R.e - i) for i in range(R.e + 1))
    return PRFiltration(chains)


def dual_module(D: DModule, pairing: Mapping[int, PairingData] | PairingData | None = None) -> DModule:
    """The conjugate side, with Phi^c and V^c adjoint to V and Phi."""
    F = D.field
    blocks = []
    for k, blk in enumerate(D.blocks):
        pd = _pairing_for(D, pairing, k)
        if not pd.is_perfect():
            raise StrataError("pairing not perfect", f"prime {k}")
        P = pd.P
        if la.frob_mat(F, P, 1) != P:
            raise StrataError("pairing not Frobenius-stable", "use prime-field pairing entries")
        Pinv = la.inverse(F, P)

        def adj(M: Mat) -> Mat:
            return la.matmul(F, Pinv, la.matmul(F, la.transpose(M), P))

        phi_c = tuple(la.frob_mat(F, adj(B), 1) for B in blk.v)
        v_c = tuple(la.frob_mat(F, adj(A), -1) for A in blk.phi)
        blocks.append(Block(blk.ring, phi_c, v_c))
    return DModule(F, tuple(blocks))


# ----------------------------------------------------------------------------
# Isogenies


def _induced_plain(F: GF, A: Mat, src: H1Space, dst: H1Space) -> H1Map:
    _check_den(F, A, 0, src, dst, "f*")
    return _induced(src, dst, [la.matvec(F, A, b) for b in src.basis], 0, "f*")


def stratum_of_isogeny(D1: DModule, filt1: PRFiltration, D2: DModule, filt2: PRFiltration,
                       f_map: Mapping[Slot, Mat]) -> tuple[frozenset[Embedding], frozenset[Embedding]]:
    """(I_x, J_x) for a map f*: D2 -> D1 respecting the filtrations."""
    F = D1.field
    shape = D1.shape
    I, J = set(), set()
    for slot in D1.slots():
        A = f_map[slot]
        R = D1.ring(slot[0])
        if la.rank(F, A) == R.dim:
            continue  # outside the prime of the isogeny
        for i in range(1, R.e + 1):
            beta = Embedding(slot[0], slot[1], i)
            src, dst = _space(D2, filt2, slot, i), _space(D1, filt1, slot, i)
            m = _induced_plain(F, A, src, dst)
            if m.rank != 1:
                raise StrataError("cokernel rank != expected", f"rank {m.rank} at {beta.label}")
            if filt1.s(beta) != 1:
                continue
            line = omega_line(D2, filt2, beta)
            if not any(m(line[0])):
                I.add(beta)
            target_line = omega_line(D1, filt1, beta)
            if la.contains(F, target_line, la.columns(m.M), 2):
                J.add(beta)
    if not (I | J) >= {b for b in shape.embeddings()
                       if filt1.s(b) == 1 and la.rank(F, f_map[(b.prime, b.frob)]) < D1.ring(b.prime).dim}:
        raise InvariantViolation("I_x u J_x does not cover")
    return frozenset(I), frozenset(J)


def frobenius_pair(D: DModule, filt: PRFiltration) -> tuple[DModule, PRFiltration, dict, dict]:
    """(D2, filt2, f*, g*) for the Frobenius isogeny A -> A^(p) and its dual.

    D2 at slot j is the Frobenius twist of D at slot j-1; f* is Phi
    linearized and g* is V linearized.  Only meaningful for e = 1.
    """
    F = D.field
    if any(b.ring.e != 1 for b in D.blocks):
        raise StrataError("unsupported", "frobenius_pair needs e = 1")
    blocks = []
    for blk in D.blocks:
        f = blk.f
        phi2 = tuple(la.frob_mat(F, blk.phi[(j - 1) % f], 1) for j in range(f))
        v2 = tuple(la.frob_mat(F, blk.v[(j - 1) % f], 1) for j in range(f))
        blocks.append(Block(blk.ring, phi2, v2))
    D2 = DModule(F, tuple(blocks))
    chains = {}
    fmap, gmap = {}, {}
    for slot in D.slots():
        ps = D.prev(slot)
        chains[slot] = tuple(la.span(F, [la.frob_vec(F, x, 1) for x in W], D.ring(slot[0]).dim)
                             for W in filt.chain(ps))
        fmap[slot] = D.Phi(ps)
        gmap[slot] = la.frob_mat(F, D.V(ps), 1)
    return D2, PRFiltration(chains), fmap, gmap


# ----------------------------------------------------------------------------
# Constructors


def _filtration_from_types(D: DModule, types: Mapping[Slot, Sequence[int]]) -> PRFiltration:
    chains = {}
    for slot in D.slots():
        chains[slot] = forced_filtration(D.ring(slot[0]), D.omega(slot), types[slot])
    return PRFiltration(chains)


def slot_types(shape: FieldShape, sigma: InfinityType | None = None,
               side: str = PLAIN) -> dict[Slot, tuple[int, ...]]:
    sigma = sigma or InfinityType()
    out = {}
    for k, pr in enumerate(shape.primes):
        for j in range(pr.f):
            out[(k, j)] = tuple(signature(Embedding(k, j, i), sigma, side) for i in range(1, pr.e + 1))
    return out


def ordinary(F: GF, shape: FieldShape, sigma: InfinityType | None = None) -> tuple[DModule, PRFiltration]:
    """Diagonal module with omega_j = <u^b e1, u^{e-d} e2> in Rapoport form.

    b and d count the signatures 0 and 2 in slot j.
    """
    types = slot_types(shape, sigma)
    blocks = []
    for k, pr in enumerate(shape.primes):
        R = TruncRing(F, pr.e)
        phis, vs = [], []
        for j in range(pr.f):
            t = types[(k, j)]
            b, d = t.count(0), t.count(2)
            phis.append(R.diag_upow(pr.e - b, d))
            vs.append(R.diag_upow(b, pr.e - d))
        blocks.append(Block(R, tuple(phis), tuple(vs)))
    D = DModule(F, tuple(blocks))
    return D, _filtration_from_types(D, types)


def supersingular(F: GF) -> tuple[DModule, PRFiltration]:
    """e = f = 1 with Phi = V sending e2 to e1 and killing e1."""
    R = TruncRing(F, 1)
    E12 = ((0, 1), (0, 0))
    D = DModule(F, (Block(R, (E12,), (E12,)),))
    return D, _filtration_from_types(D, {(0, 0): (1,)})


def from_lines(F: GF, L: Sequence[Vec], M: Sequence[Vec]) -> tuple[DModule, PRFiltration]:
    """e = 1, f = len(L): omega_j = L_j and im Phi_{j-1} = M_j.

    The partial Hasse invariant at slot j vanishes exactly when L_j = M_j.
    """
    f = len(L)
    R = TruncRing(F, 1)

    def killer(w: Vec) -> Vec:
        return (F.neg(w[1]), w[0])

    phis, vs = [], []
    for j in range(f):
        m_next = M[(j + 1) % f]
        fa = killer(la.frob_vec(F, L[j], 1))
        A = tuple(tuple(F.mul(m_next[r], fa[c]) for c in range(2)) for r in range(2))
        fb = killer(la.frob_vec(F, m_next, -1))
        B = tuple(tuple(F.mul(L[j][r], fb[c]) for c in range(2)) for r in range(2))
        phis.append(A)
        vs.append(B)
    D = DModule(F, (Block(R, tuple(phis), tuple(vs)),))
    return D, _filtration_from_types(D, {(0, j): (1,) for j in range(f)})


def block_product(*parts: tuple[DModule, PRFiltration]) -> tuple[DModule, PRFiltration]:
    """Put independent primes side by side."""
    F = parts[0][0].field
    blocks: list[Block] = []
    chains: dict[Slot, tuple[Mat, ...]] = {}
    for D, filt in parts:
        if D.field != F:
            raise StrataError("field mismatch")
        off = len(blocks)
        blocks.extend(D.blocks)
        for (k, j), ch in filt.chains.items():
            chains[(k + off, j)] = ch
    return DModule(F, tuple(blocks)), PRFiltration(chains)


def change_basis(D: DModule, filt: PRFiltration, g: Mapping[Slot, Mat]) -> tuple[DModule, PRFiltration]:
    """Transport along u-linear automorphisms g_j of each D_j."""
    F = D.field
    blocks = []
    chains = {}
    for k, blk in enumerate(D.blocks):
        f = blk.f
        ginv = {j: la.inverse(F, g[(k, j)]) for j in range(f)}
        phis = tuple(la.matmul(F, g[(k, (j + 1) % f)], la.matmul(F, blk.phi[j], la.frob_mat(F, ginv[j], 1)))
                     for j in range(f))
        vs = tuple(la.matmul(F, g[(k, j)], la.matmul(F, blk.v[j], la.frob_mat(F, ginv[(j + 1) % f], -1)))
                   for j in range(f))
        blocks.append(Block(blk.ring, phis, vs))
        for j in range(f):
            chains[(k, j)] = tuple(la.image_of(F, g[(k, j)], W) for W in filt.chain((k, j)))
    return DModule(F, tuple(blocks)), PRFiltration(chains)


# ----------------------------------------------------------------------------
# Plain-text dump


def _hexw(F: GF) -> int:
    return max(1, len(format(F.q - 1, "x")))


def _mat_hex(F: GF, M: Mat) -> str:
    w = _hexw(F)
    return "/".join("".join(format(x, f"0{w}x") for x in row) for row in M)


def _hex_mat(F: GF, text: str, n: int) -> Mat:
    w = _hexw(F)
    rows = text.split("/")
    if len(rows) != n or any(len(r) != n * w for r in rows):
        raise StrataError("parse error", f"bad matrix {text!r}")
    return tuple(tuple(int(r[c * w:(c + 1) * w], 16) for c in range(n)) for r in rows)


def dump(D: DModule, filt: PRFiltration | None = None) -> str:
    F = D.field
    lines = [f"dmodule p={F.p} m={F.m} primes={len(D.blocks)}"]
    for k, blk in enumerate(D.blocks):
        lines.append(f"prime {k} e={blk.ring.e} f={blk.f}")
        for j in range(blk.f):
            lines.append(f"phi {k} {j} {_mat_hex(F, blk.phi[j])}")
            lines.append(f"v {k} {j} {_mat_hex(F, blk.v[j])}")
            if filt is not None:
                lines.append(f"type {k} {j} {''.join(map(str, filt.type((k, j))))}")
    return "\n".join(lines) + "\n"


def load(text: str) -> tuple[DModule, PRFiltration | None]:
    """Inverse of ``dump``; filtrations are rebuilt from the recorded types."""
    lines = [ln.split("#")[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or not lines[0].startswith("dmodule"):
        raise StrataError("parse error", "missing dmodule header")
    kv = dict(tok.split("=") for tok in lines[0].split()[1:])
    try:
        F = gf_field(int(kv["p"]), int(kv.get("m", 1)))
        nprimes = int(kv["primes"])
    except (KeyError, ValueError) as exc:
        raise StrataError("parse error", f"bad header: {exc}") from None
    shapes: dict[int, tuple[int, int]] = {}
    phis: dict[Slot, Mat] = {}
    vs: dict[Slot, Mat] = {}
    types: dict[Slot, tuple[int, ...]] = {}
    for ln in lines[1:]:
        parts = ln.split()
        try:
            if parts[0] == "prime":
                kv = dict(tok.split("=") for tok in parts[2:])
                shapes[int(parts[1])] = (int(kv["e"]), int(kv["f"]))
            elif parts[0] in ("phi", "v", "type"):
                k, j = int(parts[1]), int(parts[2])
                e = shapes[k][0]
                if parts[0] == "type":
                    types[(k, j)] = tuple(int(c) for c in parts[3])
                else:
                    (phis if parts[0] == "phi" else vs)[(k, j)] = _hex_mat(F, parts[3], 2 * e)
            else:
                raise StrataError("parse error", f"unknown record {parts[0]!r}")
        except (IndexError, KeyError, ValueError) as exc:
            raise StrataError("parse error", f"line {ln!r}: {exc}") from None
    blocks = []
    for k in range(nprimes):
        if k not in shapes:
            raise StrataError("parse error", f"prime {k} missing")
        e, f = shapes[k]
        try:
            blocks.append(Block(TruncRing(F, e), tuple(phis[(k, j)] for j in range(f)),
                                tuple(vs[(k, j)] for j in range(f))))
        except KeyError as exc:
            raise StrataError("parse error", f"missing matrix {exc}") from None
    D = DModule(F, tuple(blocks))
    filt = _filtration_from_types(D, types) if types else None
    return D, filt
