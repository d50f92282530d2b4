"""Zig-zag completion of the two-row splice diagram.

Row 1 holds the pieces of the first Dieudonne module, row 2 those of the
second, both indexed by phi'-positions on Theta minus Sigma_infty.  A filled
entry carries a formal expression recording how it was obtained.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

from .embeddings import Embedding, FieldShape, InfinityType, phi_cycle, signature_sum
from .errors import StrataError
from .jl_combinatorics import Slot, _free, compute_sigma, jl_target

Pos = tuple[int, Embedding]

_SUB = str.maketrans("0123456789", "₀₁₂₃₄₅₆₇₈₉")


@dataclass(frozen=True)
class SpliceBase:
    row: int
    beta: Embedding

    @property
    def depth(self) -> int:
        return 0


@dataclass(frozen=True)
class BundleLine:
    beta: Embedding

    @property
    def depth(self) -> int:
        return 0


@dataclass(frozen=True)
class FrobOf:
    """Phi applied to the row-1 entry at ``src``."""

    src: Pos
    expr: "LatticeExpr"

    @property
    def depth(self) -> int:
        return 1 + self.expr.depth


@dataclass(frozen=True)
class FrobInvTimesP:
    """p^{-1} Phi applied to the row-2 entry at ``src``."""

    src: Pos
    expr: "LatticeExpr"

    @property
    def depth(self) -> int:
        return 1 + self.expr.depth


LatticeExpr = Union[SpliceBase, BundleLine, FrobOf, FrobInvTimesP]


@dataclass(frozen=True)
class DiagramState:
    shape: FieldShape
    sigma: InfinityType
    entries: Mapping[Pos, LatticeExpr]

    @property
    def positions(self) -> list[Pos]:
        free = sorted(_free(self.shape, self.sigma), key=self.shape.key)
        return [(r, b) for b in free for r in (1, 2)]

    def filled(self, row: int | None = None) -> frozenset[Embedding]:
        return frozenset(b for (r, b) in self.entries if row is None or r == row)

    def unfilled(self) -> list[Pos]:
        return [p for p in self.positions if p not in self.entries]

    def with_entries(self, entries: Mapping[Pos, LatticeExpr]) -> "DiagramState":
        return DiagramState(self.shape, self.sigma, dict(entries))


@dataclass(frozen=True)
class CompletionReport:
    complete: bool
    unfilled: tuple[Pos, ...]
    recipe: Mapping[Pos, LatticeExpr] = field(default_factory=dict)
    state: DiagramState | None = None


def init_diagram(shape: FieldShape, sigma: InfinityType, T: Iterable[Embedding]) -> DiagramState:
    T = frozenset(T)
    free = _free(shape, sigma)
    if not T <= free:
        raise StrataError("invalid T", "T must avoid Sigma_infty")
    entries: dict[Pos, LatticeExpr] = {}
    for b in free:
        row = 2 if b in T else 1
        entries[(row, b)] = SpliceBase(row, b)
    return DiagramState(shape, sigma, entries)


def propagate(state: DiagramState, I: Iterable[Embedding], J: Iterable[Embedding],
              order: str = "label") -> DiagramState:
    """Saturate under the two Frobenius rules; existing fills are kept.

    ``order`` is ``"label"`` or ``"reverse"`` and only changes which of two
    competing derivations is recorded.
    """
    I, J = frozenset(I), frozenset(J)
    shape, avoid = state.shape, state.sigma.members
    entries = dict(state.entries)
    scan = state.positions
    if order == "reverse":
        scan = scan[::-1]
    elif order != "label":
        raise StrataError("bad order", order)
    changed = True
    while changed:
        changed = False
        for pos in scan:
            if pos not in entries:
                continue
            row, b = pos
            if row == 1 and b in I:
                tgt = (2, phi_cycle(shape, b, avoid))
                if tgt not in entries:
                    entries[tgt] = FrobOf(pos, entries[pos])
                    changed = True
            elif row == 2 and b in J:
                tgt = (1, phi_cycle(shape, b, avoid))
                if tgt not in entries:
                    entries[tgt] = FrobInvTimesP(pos, entries[pos])
                    changed = True
    return state.with_entries(entries)


def apply_bundles(state: DiagramState, R: Iterable[Embedding], T: Iterable[Embedding]) -> DiagramState:
    """Each beta in R gives back the entry at phi'(beta), in row 2 iff beta in T."""
    T = frozenset(T)
    entries = dict(state.entries)
    for b in sorted(frozenset(R), key=state.shape.key):
        tgt = (2 if b in T else 1, phi_cycle(state.shape, b, state.sigma.members))
        if tgt not in entries:
            entries[tgt] = BundleLine(b)
    return state.with_entries(entries)


def complete(shape: FieldShape, sigma: InfinityType, I: Iterable[Embedding],
             J: Iterable[Embedding], T: Iterable[Embedding], R: Iterable[Embedding],
             order: str = "label") -> CompletionReport:
    T = frozenset(T)
    st = init_diagram(shape, sigma, T)
    st = apply_bundles(st, R, T)
    st = propagate(st, I, J, order=order)
    missing = tuple(st.unfilled())
    return CompletionReport(not missing, missing, dict(st.entries), st)


def complete_canonical(shape: FieldShape, sigma: InfinityType, I: Iterable[Embedding],
                       J: Iterable[Embedding], order: str = "label") -> CompletionReport:
    tgt = jl_target(shape, sigma, I, J)
    return complete(shape, sigma, tgt.I, tgt.J, tgt.T, tgt.R, order=order)


def reachable(shape: FieldShape, sigma: InfinityType, I: Iterable[Embedding],
              J: Iterable[Embedding], seeds: Iterable[Pos]) -> frozenset[Pos]:
    """Plain graph reachability for the two propagation rules."""
    I, J = frozenset(I), frozenset(J)
    seen = set(seeds)
    stack = list(seen)
    while stack:
        row, b = stack.pop()
        nxt = None
        if row == 1 and b in I:
            nxt = (2, phi_cycle(shape, b, sigma.members))
        elif row == 2 and b in J:
            nxt = (1, phi_cycle(shape, b, sigma.members))
        if nxt is not None and nxt not in seen:
            seen.add(nxt)
            stack.append(nxt)
    return frozenset(seen)


@dataclass(frozen=True)
class Candidate:
    T: frozenset[Embedding]
    sigma_plus: frozenset[Embedding]
    R: frozenset[Embedding]
    admissible: bool
    completes: bool


def search_admissible(shape: FieldShape, sigma: InfinityType, I: Iterable[Embedding],
                      J: Iterable[Embedding], limit: int = 20) -> list[Candidate]:
    """Brute force over every T with I^c <= T <= J."""
    I, J = frozenset(I), frozenset(J)
    free = _free(shape, sigma)
    if len(free) > limit:
        raise StrataError("size guard", f"{len(free)} free embeddings exceeds {limit}")
    canon = jl_target(shape, sigma, I, J)
    if any(fl != "normal" for fl in canon.per_prime_flags):
        raise StrataError("bottom stratum, use classify_bottom")
    base = free - I
    optional = sorted((I & J), key=shape.key)
    out = []
    for mask in range(1 << len(optional)):
        T = base | frozenset(b for n, b in enumerate(optional) if mask >> n & 1)
        sd = compute_sigma(shape, sigma, T, I & J)
        rep = complete(shape, sigma, I, J, T, sd.R)
        out.append(Candidate(T, sd.sigma_plus, sd.R, sd.admissible, rep.complete))
    if not any(c.T == canon.T and c.completes for c in out):
        raise StrataError("invariant violation", "canonical T missing or incomplete")
    return out


def splice_hodge_dims(shape: FieldShape, sigma: InfinityType, T1: Iterable[Slot],
                      theta: Slot) -> tuple[int, int]:
    """dim of the splice Hodge piece at theta~ and at its conjugate."""
    T1 = frozenset(T1)
    k, j = theta
    pr = shape.prime(k)
    s = signature_sum(shape, sigma, theta)
    here = theta in T1
    there = (k, (j + 1) % pr.f) in T1
    if here and not there:
        val = 2 * s + 2
    elif there and not here:
        val = 2 * s - 2
    else:
        val = 2 * s
    if not 0 <= val <= 4 * pr.e:
        raise StrataError("inconsistent with T' construction",
                          f"dimension {val} outside [0, {4 * pr.e}]")
    return val, 4 * pr.e - val


def pretty(shape: FieldShape, b: Embedding) -> str:
    """theta with a subscript for a single unramified prime, else the label."""
    if len(shape.primes) == 1 and shape.primes[0].e == 1:
        return "θ" + str(b.frob + 1).translate(_SUB)
    return b.label


def render_expr(shape: FieldShape, pos: Pos, expr: LatticeExpr) -> str:
    row, b = pos
    lhs = f"D({row}, {pretty(shape, b)})"
    if isinstance(expr, SpliceBase):
        rhs = f"splice({row}, {pretty(shape, b)})"
    elif isinstance(expr, BundleLine):
        rhs = f"bundle({pretty(shape, expr.beta)})"
    elif isinstance(expr, FrobOf):
        rhs = f"Φ · D({expr.src[0]}, {pretty(shape, expr.src[1])})"
    else:
        rhs = f"p⁻¹Φ · D({expr.src[0]}, {pretty(shape, expr.src[1])})"
    return f"{lhs} = {rhs}"


def render_recipe(report: CompletionReport) -> list[str]:
    st = report.state
    if st is None:
        return []
    lines = [render_expr(st.shape, p, report.recipe[p]) for p in st.positions if p in report.recipe]
    lines += [f"D({r}, {pretty(st.shape, b)}) = ?" for r, b in report.unfilled]
    return lines
