"""Lattice strata of the rank-two local model and Smith forms over k[y]/y^n.

Elements of k[y]/y^n are coefficient tuples, constant term first.  The
deformation check flattens k[y]/y^n (x) k[u]/u^d to matrices over k[y]/y^n in
the basis e1, u e1, ..., u^{d-1} e1, e2, ..., u^{d-1} e2.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from . import linalg as la
from .dieudonne_sim import TruncRing
from .errors import InvariantViolation, StrataError
from .gf import GF

Poly = tuple[int, ...]


@dataclass(frozen=True)
class TruncPoly:
    """Arithmetic in k[y]/y^n."""

    field: GF
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise StrataError("invalid ring", "n must be >= 1")

    def zero(self) -> Poly:
        return (0,) * self.n

    def one(self) -> Poly:
        return (1,) + (0,) * (self.n - 1)

    def const(self, c: int) -> Poly:
        return (c,) + (0,) * (self.n - 1)

    def ypow(self, k: int) -> Poly:
        if k >= self.n:
            return self.zero()
        return (0,) * k + (1,) + (0,) * (self.n - k - 1)

    def add(self, a: Poly, b: Poly) -> Poly:
        return tuple(self.field.add(x, y) for x, y in zip(a, b))

    def sub(self, a: Poly, b: Poly) -> Poly:
        return tuple(self.field.sub(x, y) for x, y in zip(a, b))

    def mul(self, a: Poly, b: Poly) -> Poly:
        F = self.field
        out = [0] * self.n
        for i, x in enumerate(a):
            if x:
                for j in range(self.n - i):
                    if b[j]:
                        out[i + j] = F.add(out[i + j], F.mul(x, b[j]))
        return tuple(out)

    def val(self, a: Poly) -> int:
        """y-adic valuation; n for zero."""
        return next((i for i, x in enumerate(a) if x), self.n)

    def is_unit(self, a: Poly) -> bool:
        return a[0] != 0

    def inv(self, a: Poly) -> Poly:
        if not self.is_unit(a):
            raise ZeroDivisionError("not a unit")
        F = self.field
        c0 = F.inv(a[0])
        out = [c0] + [0] * (self.n - 1)
        for k in range(1, self.n):
            acc = 0
            for i in range(1, k + 1):
                acc = F.add(acc, F.mul(a[i], out[k - i]))
            out[k] = F.neg(F.mul(c0, acc))
        return tuple(out)

    def shift_down(self, a: Poly, v: int) -> Poly:
        """a / y^v, assuming val(a) >= v (the top coefficients become 0)."""
        return tuple(a[v:]) + (0,) * v

    def random(self, rng: random.Random) -> Poly:
        return tuple(rng.randrange(self.field.q) for _ in range(self.n))


PolyMat = tuple[tuple[Poly, ...], ...]


@dataclass(frozen=True)
class LocalRingMatrix:
    ring: TruncPoly
    rows: PolyMat

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.rows[0]) if self.rows else 0

    @classmethod
    def from_ints(cls, ring: TruncPoly, M: Sequence[Sequence[Sequence[int] | int]]) -> "LocalRingMatrix":
        def conv(x: Sequence[int] | int) -> Poly:
            if isinstance(x, int):
                return ring.const(x)
            return tuple(list(x)[: ring.n]) + (0,) * max(0, ring.n - len(x))
        return cls(ring, tuple(tuple(conv(x) for x in row) for row in M))


def pmatmul(R: TruncPoly, A: PolyMat, B: PolyMat) -> PolyMat:
    cols = list(zip(*B)) if B else []
    out = []
    for row in A:
        r = []
        for col in cols:
            acc = R.zero()
            for x, y in zip(row, col):
                acc = R.add(acc, R.mul(x, y))
            r.append(acc)
        out.append(tuple(r))
    return tuple(out)


def pidentity(R: TruncPoly, n: int) -> PolyMat:
    return tuple(tuple(R.one() if i == j else R.zero() for j in range(n)) for i in range(n))


def is_invertible(R: TruncPoly, A: PolyMat) -> bool:
    """Invertible over k[y]/y^n iff invertible mod y."""
    n = len(A)
    if any(len(r) != n for r in A):
        return False
    return la.rank(R.field, [[x[0] for x in row] for row in A]) == n


@dataclass(frozen=True)
class SNFResult:
    P: PolyMat
    Q: PolyMat
    D: PolyMat
    exponents: tuple[int | None, ...]  # y-power on the diagonal, None for 0

    def render(self) -> tuple[str, ...]:
        sup = str.maketrans("0123456789", "⁰¹²³⁴⁵⁶⁷⁸⁹")
        out = []
        for k in self.exponents:
            if k is None:
                out.append("0")
            elif k == 0:
                out.append("1")
            elif k == 1:
                out.append("y")
            else:
                out.append("y" + str(k).translate(sup))
        return tuple(out)


def snf(M: LocalRingMatrix) -> SNFResult:
    """Smith form P M Q = D with pivots of least valuation, row-major ties."""
    R = M.ring
    r, c = M.shape
    A = [list(row) for row in M.rows]
    P = [list(row) for row in pidentity(R, r)]
    Q = [list(row) for row in pidentity(R, c)]
    exps: list[int | None] = []

    def row_axpy(Mx: list[list[Poly]], dst: int, src: int, coef: Poly) -> None:
        Mx[dst] = [R.sub(a, R.mul(coef, b)) for a, b in zip(Mx[dst], Mx[src])]

    def col_axpy(Mx: list[list[Poly]], dst: int, src: int, coef: Poly) -> None:
        for row in Mx:
            row[dst] = R.sub(row[dst], R.mul(coef, row[src]))

    for t in range(min(r, c)):
        best = None
        for i in range(t, r):
            for j in range(t, c):
                v = R.val(A[i][j])
                if v < R.n and (best is None or v < best[0]):
                    best = (v, i, j)
        if best is None:
            exps.extend([None] * (min(r, c) - t))
            break
        v, i, j = best
        A[t], A[i] = A[i], A[t]
        P[t], P[i] = P[i], P[t]
        for row in A:
            row[t], row[j] = row[j], row[t]
        for row in Q:
            row[t], row[j] = row[j], row[t]
        unit = R.shift_down(A[t][t], v)
        uinv = R.inv(unit)
        A[t] = [R.mul(uinv, x) for x in A[t]]
        P[t] = [R.mul(uinv, x) for x in P[t]]
        for i2 in range(r):
            if i2 != t and R.val(A[i2][t]) < R.n:
                coef = R.shift_down(A[i2][t], v)
                row_axpy(A, i2, t, coef)
                row_axpy(P, i2, t, coef)
        for j2 in range(c):
            if j2 != t and R.val(A[t][j2]) < R.n:
                coef = R.shift_down(A[t][j2], v)
                col_axpy(A, j2, t, coef)
                col_axpy(Q, j2, t, coef)
        exps.append(v)
    D = tuple(tuple(row) for row in A)
    Pt = tuple(tuple(row) for row in P)
    Qt = tuple(tuple(row) for row in Q)
    if pmatmul(R, pmatmul(R, Pt, M.rows), Qt) != D:
        raise InvariantViolation("P M Q != D")
    if not (is_invertible(R, Pt) and is_invertible(R, Qt)):
        raise InvariantViolation("transformation not invertible")
    for a in range(r):
        for b in range(c):
            if a != b and R.val(D[a][b]) < R.n:
                raise InvariantViolation("result not diagonal")
    return SNFResult(Pt, Qt, D, tuple(exps))


def is_projective(M: LocalRingMatrix) -> bool:
    """Whether the cokernel of M is free: every Smith entry is 0 or a unit."""
    return all(k is None or k == 0 for k in snf(M).exponents)


def random_invertible(R: TruncPoly, n: int, rng: random.Random) -> PolyMat:
    while True:
        A = tuple(tuple(R.random(rng) for _ in range(n)) for _ in range(n))
        if is_invertible(R, A):
            return A


# ----------------------------------------------------------------------------
# Lattice strata


@dataclass(frozen=True)
class LatticeSubmodule:
    """A k[u]-submodule of (k[u]/u^d)^2, stored as an rref k-basis."""

    ring: TruncRing
    basis: tuple[tuple[int, ...], ...]

    @classmethod
    def generated_by(cls, ring: TruncRing, gens: Sequence[Sequence[int]]) -> "LatticeSubmodule":
        from .dieudonne_sim import submodule_generated
        return cls(ring, submodule_generated(ring, [tuple(g) for g in gens]))

    @property
    def d(self) -> int:
        return self.ring.e

    def check(self) -> None:
        R = self.ring
        if len(self.basis) != R.e:
            raise StrataError("dimension mismatch", f"dim F = {len(self.basis)}, expected {R.e}")
        if not la.contains(R.field, self.basis, R.times_u(self.basis), R.dim):
            raise StrataError("not a submodule", "F is not stable under u")


def elementary_pair(F: LatticeSubmodule) -> tuple[int, int]:
    """(i, j), i <= j, i + j = d, with F generated by u^i e1, u^j e2 in some basis."""
    F.check()
    R = F.ring
    d = R.e
    # dim u^k F = sum over the two cyclic parts of max(len - k, 0)
    dims = [len(R.times_u(F.basis, k)) for k in range(d + 1)]
    parts = sorted((sum(1 for k in range(d) if dims[k] - dims[k + 1] > m) for m in range(2)),
                   reverse=True)
    l1, l2 = parts
    if l1 + l2 != d:
        raise InvariantViolation("cyclic decomposition does not add up")
    return d - l1, d - l2


def stratum_index(F: LatticeSubmodule) -> int:
    return min(elementary_pair(F))


def standard_submodule(ring: TruncRing, i: int, j: int) -> LatticeSubmodule:
    gens = []
    if i < ring.e:
        gens.append(ring.vec([0] * i + [1], []))
    if j < ring.e:
        gens.append(ring.vec([], [0] * j + [1]))
    return LatticeSubmodule.generated_by(ring, gens)


# ----------------------------------------------------------------------------
# Non-liftability


@dataclass(frozen=True)
class ObstructionReport:
    d: int
    i: int
    j: int
    matrix: LocalRingMatrix
    snf: SNFResult
    is_projective: bool


def _gen_matrix(R: TruncPoly, d: int, gens: Sequence[tuple[dict[int, Poly], dict[int, Poly]]]) -> LocalRingMatrix:
    """Columns u^a g for each generator g = (e1 part, e2 part), a = 0..d-1.

    A part is a map from u-degree to a coefficient in k[y]/y^n.
    """
    cols = []
    for g1, g2 in gens:
        for a in range(d):
            col = [R.zero()] * (2 * d)
            for off, part in ((0, g1), (d, g2)):
                for deg, coef in part.items():
                    if deg + a < d:
                        col[off + deg + a] = R.add(col[off + deg + a], coef)
            cols.append(tuple(col))
    rows = tuple(tuple(col[r] for col in cols) for r in range(2 * d))
    return LocalRingMatrix(R, rows)


def obstruction_witness(d: int, i: int, j: int, field: GF, n: int = 3) -> ObstructionReport:
    """Canonical lift of F' = <u^i e1 + y e2, u^j e2 + y e1> over k[y]/y^n.

    For i = 0 the module is generated by e1 alone and its lift by e1 + y e2.
    """
    if i + j != d or not 0 <= i <= j or (i >= 1 and j >= d):
        raise StrataError("invalid parameters", f"need i + j = d and 0 <= i <= j < d (d={d}, i={i}, j={j})")
    R = TruncPoly(field, n)
    y = R.ypow(1)
    one = R.one()
    if i == 0:
        M = _gen_matrix(R, d, [({0: one}, {0: y})])
    else:
        M = _gen_matrix(R, d, [({i: one}, {0: y}), ({0: y}, {j: one})])
    res = snf(M)
    proj = all(k is None or k == 0 for k in res.exponents)
    if i >= 1:
        want = (0,) * d + (2,) * d
        if res.exponents != want:
            raise InvariantViolation(f"Smith form {res.render()} is not diag(I, y^2 I)")
        if proj:
            raise InvariantViolation("non-projectivity expected for i >= 1")
    elif not proj:
        raise InvariantViolation("smooth-locus lift is not projective")
    return ObstructionReport(d, i, j, M, res, proj)
