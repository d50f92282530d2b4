"""Dense linear algebra over a GF instance.

Matrices are tuples of row tuples and act on column vectors.  Subspaces are
stored as reduced row echelon bases, so equal subspaces compare equal.
"""

from __future__ import annotations

from typing import Sequence

from .gf import GF

Vec = tuple[int, ...]
Mat = tuple[Vec, ...]


def zeros(r: int, c: int) -> Mat:
    return tuple((0,) * c for _ in range(r))


def identity(n: int) -> Mat:
    return tuple(tuple(1 if i == j else 0 for j in range(n)) for i in range(n))


def transpose(M: Sequence[Sequence[int]], ncols: int | None = None) -> Mat:
    if not M:
        return tuple(() for _ in range(ncols or 0))
    return tuple(zip(*M))


def matmul(F: GF, A: Sequence[Sequence[int]], B: Sequence[Sequence[int]]) -> Mat:
    Bt = transpose(B)
    out = []
    for row in A:
        out_row = []
        for col in Bt:
            acc = 0
            for x, y in zip(row, col):
                if x and y:
                    acc = F.add(acc, F.mul(x, y))
            out_row.append(acc)
        out.append(tuple(out_row))
    return tuple(out)


def matvec(F: GF, A: Sequence[Sequence[int]], v: Sequence[int]) -> Vec:
    out = []
    for row in A:
        acc = 0
        for x, y in zip(row, v):
            if x and y:
                acc = F.add(acc, F.mul(x, y))
        out.append(acc)
    return tuple(out)


def matadd(F: GF, A: Mat, B: Mat) -> Mat:
    return tuple(tuple(F.add(x, y) for x, y in zip(r, s)) for r, s in zip(A, B))


def frob_mat(F: GF, A: Sequence[Sequence[int]], twist: int = 1) -> Mat:
    return tuple(tuple(F.frob(x, twist) for x in row) for row in A)


def frob_vec(F: GF, v: Sequence[int], twist: int = 1) -> Vec:
    return tuple(F.frob(x, twist) for x in v)


def is_zero(M: Sequence[Sequence[int]]) -> bool:
    return all(x == 0 for row in M for x in row)


def rref(F: GF, rows: Sequence[Sequence[int]], ncols: int | None = None) -> tuple[Mat, list[int]]:
    """Reduced row echelon form, dropping zero rows, plus pivot columns."""
    M = [list(r) for r in rows]
    if ncols is None:
        ncols = len(M[0]) if M else 0
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(M)) if M[i][c]), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        inv = F.inv(M[r][c])
        M[r] = [F.mul(inv, x) for x in M[r]]
        for i in range(len(M)):
            if i != r and M[i][c]:
                f = M[i][c]
                M[i] = [F.sub(x, F.mul(f, y)) for x, y in zip(M[i], M[r])]
        pivots.append(c)
        r += 1
        if r == len(M):
            break
    return tuple(tuple(row) for row in M[:r]), pivots


def rank(F: GF, M: Sequence[Sequence[int]]) -> int:
    return len(rref(F, M)[1])


def span(F: GF, vecs: Sequence[Sequence[int]], n: int) -> Mat:
    """Canonical basis of the span, as an rref tuple."""
    return rref(F, [tuple(v) for v in vecs], n)[0]


def nullspace(F: GF, M: Sequence[Sequence[int]], ncols: int) -> Mat:
    """Basis (rref) of {x : M x = 0}."""
    R, piv = rref(F, M, ncols)
    free = [c for c in range(ncols) if c not in piv]
    basis = []
    for fc in free:
        v = [0] * ncols
        v[fc] = 1
        for row, pc in zip(R, piv):
            v[pc] = F.neg(row[fc])
        basis.append(tuple(v))
    return span(F, basis, ncols)


def image(F: GF, M: Sequence[Sequence[int]], nrows: int) -> Mat:
    return span(F, transpose(M) if M and M[0] else [], nrows)


def columns(M: Sequence[Sequence[int]]) -> list[Vec]:
    return list(transpose(M)) if M and M[0] else []


def from_columns(cols: Sequence[Sequence[int]], n: int) -> Mat:
    if not cols:
        return tuple(() for _ in range(n))
    return transpose(cols)


def apply(F: GF, A: Mat, vecs: Sequence[Sequence[int]], twist: int = 0) -> list[Vec]:
    """Images of vectors under x -> A sigma^twist(x)."""
    return [matvec(F, A, frob_vec(F, v, twist)) for v in vecs]


def image_of(F: GF, A: Mat, W: Sequence[Sequence[int]], twist: int = 0) -> Mat:
    n = len(A)
    return span(F, apply(F, A, W, twist), n)


def preimage(F: GF, A: Mat, W: Sequence[Sequence[int]], ncols: int, twist: int = 0) -> Mat:
    """{x : A sigma^twist(x) in W}."""
    n = len(A)
    # x in preimage iff A y lies in W where y = sigma^twist(x); W is closed
    # under nothing in particular, so solve for y and then undo the twist.
    Wc = complement_functionals(F, W, n)
    cond = matmul(F, Wc, A) if Wc else ()
    ys = nullspace(F, cond, ncols) if cond else tuple(identity(ncols))
    return span(F, [frob_vec(F, y, -twist) for y in ys], ncols)


def complement_functionals(F: GF, W: Sequence[Sequence[int]], n: int) -> Mat:
    """Rows f with f(w) = 0 for w in W, spanning the annihilator."""
    return nullspace(F, W, n) if W else identity(n)


def contains(F: GF, W: Sequence[Sequence[int]], vecs: Sequence[Sequence[int]], n: int) -> bool:
    base = rank(F, W) if W else 0
    return rank(F, list(W) + list(vecs)) == base if vecs else True


def subspace_sum(F: GF, A: Sequence[Sequence[int]], B: Sequence[Sequence[int]], n: int) -> Mat:
    return span(F, list(A) + list(B), n)


def intersect(F: GF, A: Sequence[Sequence[int]], B: Sequence[Sequence[int]], n: int) -> Mat:
    ann = list(complement_functionals(F, A, n)) + list(complement_functionals(F, B, n))
    return nullspace(F, ann, n) if ann else tuple(identity(n))


def equal(F: GF, A: Sequence[Sequence[int]], B: Sequence[Sequence[int]], n: int) -> bool:
    return span(F, A, n) == span(F, B, n)


def inverse(F: GF, A: Mat) -> Mat:
    n = len(A)
    aug = [tuple(A[i]) + identity(n)[i] for i in range(n)]
    R, piv = rref(F, aug, 2 * n)
    if piv[:n] != list(range(n)) or len(R) < n:
        raise ZeroDivisionError("singular matrix")
    return tuple(tuple(row[n:]) for row in R[:n])


def solve(F: GF, A: Sequence[Sequence[int]], b: Sequence[int], ncols: int) -> Vec | None:
    """One solution x of A x = b (free variables zero), or None."""
    aug = [tuple(r) + (bi,) for r, bi in zip(A, b)]
    R, piv = rref(F, aug, ncols + 1)
    if ncols in piv:
        return None
    x = [0] * ncols
    for row, pc in zip(R, piv):
        x[pc] = row[ncols]
    return tuple(x)


def coords(F: GF, basis: Sequence[Sequence[int]], v: Sequence[int]) -> Vec | None:
    """Coordinates of v in the given (independent) basis."""
    n = len(v)
    A = from_columns(basis, n)
    return solve(F, A, v, len(basis))
