"""Command line front end.

Every subcommand reads one JSON config (``--config path``, ``-`` for stdin)
and writes a deterministic report to stdout.  Exit status is 0 on success,
2 when the config cannot be parsed and 3 when a module rejects the input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from . import dieudonne_sim as ds
from . import local_model as lm
from . import raynaud as ry
from .diagram_splice import apply_bundles, init_diagram, propagate, pretty, render_recipe, complete
from .embeddings import CONJUGATE, PLAIN, Embedding, FieldShape, InfinityType
from .errors import StrataError
from .gf import field as gf_field
from .jl_combinatorics import (JLTarget, compute_sigma, goren_oort_target, iter_pairs, jl_target,
                               rotate, rotation_group)

EXIT_OK, EXIT_PARSE, EXIT_SEMANTIC = 0, 2, 3


class ConfigError(Exception):
    """Malformed config; carries the offending field."""

    def __init__(self, where: str, why: str):
        super().__init__(f"config: {where}: {why}")


# ----------------------------------------------------------------------------
# Config parsing


@dataclass
class RunConfig:
    raw: dict
    shape: FieldShape
    sigma: InfinityType

    def get(self, key: str, default: Any = None) -> Any:
        return self.raw.get(key, default)

    def require(self, key: str) -> Any:
        if key not in self.raw:
            raise ConfigError(key, "missing")
        return self.raw[key]

    def embeddings(self, key: str, default: Iterable[Embedding] | None = None) -> frozenset[Embedding]:
        if key not in self.raw:
            if default is None:
                raise ConfigError(key, "missing")
            return frozenset(default)
        return parse_embeddings(self.shape, self.raw[key], key)


def parse_embedding(shape: FieldShape, item: Any, where: str) -> Embedding:
    """An int k means theta_k of the first prime; a string is a label."""
    try:
        if isinstance(item, bool):
            raise ConfigError(where, f"bad embedding {item!r}")
        if isinstance(item, int):
            if not 1 <= item <= shape.prime(0).size:
                raise ConfigError(where, f"theta index {item} out of range")
            return shape.theta(item)
        if isinstance(item, str):
            return shape.check(Embedding.parse(item))
    except StrataError as exc:
        raise ConfigError(where, str(exc)) from None
    raise ConfigError(where, f"bad embedding {item!r}")


def parse_embeddings(shape: FieldShape, items: Any, where: str) -> frozenset[Embedding]:
    if items == "all":
        return frozenset(shape.embeddings())
    if not isinstance(items, list):
        raise ConfigError(where, "expected a list of embeddings or \"all\"")
    return frozenset(parse_embedding(shape, x, f"{where}[{n}]") for n, x in enumerate(items))


def parse_shape(raw: Any) -> FieldShape:
    if not isinstance(raw, list) or not raw:
        raise ConfigError("shape", "expected a non-empty list of [e, f] pairs")
    pairs = []
    for n, pr in enumerate(raw):
        if (not isinstance(pr, list) or len(pr) != 2
                or not all(isinstance(x, int) and not isinstance(x, bool) and x >= 1 for x in pr)):
            raise ConfigError(f"shape[{n}]", "expected [e, f] with positive integers")
        pairs.append((pr[0], pr[1]))
    return FieldShape.of(*pairs)


def parse_sigma(shape: FieldShape, raw: Any) -> InfinityType:
    if raw is None:
        return InfinityType()
    if not isinstance(raw, dict):
        raise ConfigError("sigma", "expected an object")
    members = raw.get("members", {})
    lifts: dict[Embedding, str] = {}
    if members == "all":
        lifts = {b: PLAIN for b in shape.embeddings()}
    elif isinstance(members, list):
        for n, x in enumerate(members):
            lifts[parse_embedding(shape, x, f"sigma.members[{n}]")] = PLAIN
    elif isinstance(members, dict):
        for key, side in members.items():
            b = parse_embedding(shape, int(key) if key.isdigit() else key, f"sigma.members.{key}")
            if side not in (PLAIN, CONJUGATE):
                raise ConfigError(f"sigma.members.{key}", f"lift must be {PLAIN!r} or {CONJUGATE!r}")
            lifts[b] = side
    else:
        raise ConfigError("sigma.members", "expected a list or an object")
    fc = raw.get("finite_count", 0)
    if not isinstance(fc, int) or fc < 0:
        raise ConfigError("sigma.finite_count", "expected a non-negative integer")
    sig = InfinityType(frozenset(lifts), lifts, fc)
    if raw.get("check_parity", True) and not sig.parity_ok:
        raise ConfigError("sigma", "ramification set of a quaternion algebra must have even size")
    return sig


def load_config(text: str) -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}", exc.msg) from None
    if not isinstance(raw, dict):
        raise ConfigError("top level", "expected an object")
    shape = parse_shape(raw.get("shape", [[1, 1]]))
    return RunConfig(raw, shape, parse_sigma(shape, raw.get("sigma")))


# ----------------------------------------------------------------------------
# Output


def fmt_set(shape: FieldShape, S: Iterable[Embedding]) -> str:
    S = list(S)
    if len(shape.primes) == 1:
        return "{" + ",".join(str(n) for n in shape.numbers(S)) + "}"
    return "{" + ",".join(b.label for b in sorted(S, key=shape.key)) + "}"


def fmt_slots(S: Iterable[tuple[int, int]]) -> str:
    return "{" + ",".join(f"p{k}.t{j}" for k, j in sorted(S)) + "}"


def emit_table(header: Sequence[str], rows: Sequence[Sequence[Any]], fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return buf.getvalue()
    if fmt == "md":
        lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        lines += ["| " + " | ".join(str(x) for x in r) + " |" for r in rows]
        return "\n".join(lines) + "\n"
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    out = ["  ".join(str(h).ljust(w) for h, w in zip(header, widths)).rstrip()]
    out += ["  ".join(str(x).ljust(w) for x, w in zip(r, widths)).rstrip() for r in rows]
    return "\n".join(out) + "\n"


def emit_kv(pairs: Sequence[tuple[str, Any]], fmt: str) -> str:
    if fmt == "txt":
        width = max((len(k) for k, _ in pairs), default=0)
        return "".join(f"{k.ljust(width)}  {v}\n" for k, v in pairs)
    return emit_table(["key", "value"], [list(p) for p in pairs], fmt)


def target_pairs(shape: FieldShape, tgt: JLTarget) -> list[tuple[str, Any]]:
    lifts = ",".join(f"{b.label}:{side}" for b, side in sorted(tgt.lifts.items(), key=lambda x: shape.key(x[0])))
    return [
        ("I", fmt_set(shape, tgt.I)),
        ("J", fmt_set(shape, tgt.J)),
        ("T", fmt_set(shape, tgt.T)),
        ("T'", fmt_set(shape, tgt.Tprime)),
        ("T1", fmt_slots(tgt.T1)),
        ("Sigma+", fmt_set(shape, tgt.Sigma_plus)),
        ("lifts", lifts or "-"),
        ("R", fmt_set(shape, tgt.R)),
        ("stratum_dim", tgt.stratum_dim),
        ("target_base_dim", tgt.target_base_dim),
        ("flags", ",".join(tgt.per_prime_flags)),
        ("finite_count", tgt.sigma_ij.finite_count),
        ("admissible", str(tgt.admissible).lower()),
    ]


# ----------------------------------------------------------------------------
# Subcommands


def cmd_jl(cfg: RunConfig, args: argparse.Namespace) -> str:
    I = cfg.embeddings("I")
    J = cfg.embeddings("J")
    T = cfg.embeddings("T") if "T" in cfg.raw else None
    return emit_kv(target_pairs(cfg.shape, jl_target(cfg.shape, cfg.sigma, I, J, T)), args.format)


def cmd_go(cfg: RunConfig, args: argparse.Namespace) -> str:
    T = cfg.embeddings("T")
    return emit_kv(target_pairs(cfg.shape, goren_oort_target(cfg.shape, cfg.sigma, T)), args.format)


TABLE_HEADER = ["I", "J", "T", "Sigma+", "R", "stratum_dim", "target_base_dim", "flags"]


def cmd_tables(cfg: RunConfig, args: argparse.Namespace) -> str:
    shape, sigma = cfg.shape, cfg.sigma
    pairs = list(iter_pairs(shape, sigma))
    header = list(TABLE_HEADER)
    counts: dict[tuple, int] = {}
    if args.collapse_rotations:
        group = rotation_group(shape, sigma)
        reps = []
        for I, J in pairs:
            orbit = {(rotate(shape, I, g), rotate(shape, J, g)) for g in group}
            rep = min(orbit, key=lambda ij: (shape.numbers(ij[0]), shape.numbers(ij[1]))
                      if len(shape.primes) == 1 else
                      (sorted(shape.key(b) for b in ij[0]), sorted(shape.key(b) for b in ij[1])))
            if rep not in counts:
                reps.append(rep)
            counts[rep] = counts.get(rep, 0) + 1
        pairs = reps
        header.append("orbit_size")
    rows = []
    for I, J in pairs:
        t = jl_target(shape, sigma, I, J)
        row = [fmt_set(shape, I), fmt_set(shape, J), fmt_set(shape, t.T), fmt_set(shape, t.Sigma_plus),
               fmt_set(shape, t.R), t.stratum_dim, t.target_base_dim, ",".join(t.per_prime_flags)]
        if args.collapse_rotations:
            row.append(counts[(I, J)])
        rows.append(row)
    return emit_table(header, rows, "csv" if args.format == "txt" else args.format)


def _diagram_sets(shape: FieldShape, entries: Iterable[tuple[int, Embedding]]) -> tuple[str, str]:
    entries = list(entries)
    return (fmt_set(shape, [b for r, b in entries if r == 1]),
            fmt_set(shape, [b for r, b in entries if r == 2]))


def cmd_diagram(cfg: RunConfig, args: argparse.Namespace) -> str:
    shape, sigma = cfg.shape, cfg.sigma
    I = cfg.embeddings("I")
    J = cfg.embeddings("J")
    if "T" in cfg.raw:
        T = cfg.embeddings("T")
        R = cfg.embeddings("R") if "R" in cfg.raw else compute_sigma(shape, sigma, T, I & J).R
    else:
        tgt = jl_target(shape, sigma, I, J)
        T, R = tgt.T, tgt.R
    order = cfg.get("order", "label")
    st0 = init_diagram(shape, sigma, T)
    st1 = propagate(st0, I, J, order=order)
    st2 = propagate(apply_bundles(st1, R, T), I, J, order=order)
    rep = complete(shape, sigma, I, J, T, R, order=order)
    stages = []
    for name, st in (("initial", st0), ("propagated", st1), ("completed", st2)):
        r1, r2 = _diagram_sets(shape, st.entries)
        stages += [(f"{name}.row1", r1), (f"{name}.row2", r2)]
    unfilled = ",".join(f"({r}, {pretty(shape, b)})" for r, b in rep.unfilled) or "-"
    pairs = [("status", "complete" if rep.complete else "incomplete"),
             ("T", fmt_set(shape, T)), ("R", fmt_set(shape, R))] + stages + [("unfilled", unfilled)]
    out = emit_kv(pairs, args.format)
    recipe = render_recipe(rep)
    if args.format == "md":
        return out + "\n" + "".join(f"- {ln}\n" for ln in recipe)
    if args.format == "csv":
        return out + emit_table(["recipe"], [[ln] for ln in recipe], "csv")
    return out + "recipe\n" + "".join(f"  {ln}\n" for ln in recipe)


def _int_list(cfg: RunConfig, key: str, n: int | None = None) -> list[int]:
    v = cfg.require(key)
    if not isinstance(v, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in v):
        raise ConfigError(key, "expected a list of integers")
    if n is not None and len(v) != n:
        raise ConfigError(key, f"expected {n} entries")
    return v


def _field(cfg: RunConfig):
    raw = cfg.get("field", {"p": 2, "m": 1})
    if not isinstance(raw, dict) or not isinstance(raw.get("p"), int):
        raise ConfigError("field", "expected {\"p\": prime, \"m\": degree}")
    return gf_field(raw["p"], raw.get("m", 1))


def cmd_raynaud(cfg: RunConfig, args: argparse.Namespace) -> str:
    F = _field(cfg)
    f = cfg.require("f")
    if not isinstance(f, int) or f < 1:
        raise ConfigError("f", "expected a positive integer")
    pairs: list[tuple[str, Any]] = []
    if "character" in cfg.raw:
        grp = ry.CharacterGroup(F.p, f)
        exp = ry.padic_expansion(grp, cfg.raw["character"])
        pairs.append(("expansion", exp if isinstance(exp, str) else ",".join(map(str, exp))))
    if "support" in cfg.raw:
        d = ry.RaynaudDatum(F, f, frozenset(_int_list(cfg, "support")),
                            _int_list(cfg, "s", f), _int_list(cfg, "t", f))
        bad = ry.validate_datum(d)
        pairs.append(("valid", "true" if not bad else "; ".join(f"slot {j}: {w}" for j, w in bad)))
        if not bad:
            dd = ry.dual_datum(d)
            pairs += [("order", ry.order(d)),
                      ("dual.s", ",".join(map(str, dd.s))), ("dual.t", ",".join(map(str, dd.t))),
                      ("algebra_dim", len(ry.basis_monomials(d)))]
            dm = ry.dieudonne_of(d)
            pairs += [("dieudonne.dims", ",".join(map(str, dm.dims))),
                      ("dieudonne.phi", ",".join(map(str, dm.phi))),
                      ("dieudonne.v", ",".join(map(str, dm.v)))]
            if "sub" in cfg.raw:
                sub = ry.sub_datum(d, _int_list(cfg, "sub"))
                pairs += [("sub.support", "{" + ",".join(map(str, sorted(sub.support))) + "}"),
                          ("sub.s", ",".join(map(str, sub.s))), ("sub.t", ",".join(map(str, sub.t)))]
    if "I" in cfg.raw and "J" in cfg.raw:
        shape, sigma = cfg.shape, cfg.sigma
        I, J = cfg.embeddings("I"), cfg.embeddings("J")
        tgt = jl_target(shape, sigma, I, J)
        supp = ry.admissible_CT_support(shape, sigma, I, J, tgt.T)
        pairs.append(("C_T.support", fmt_slots(supp)))
    if not pairs:
        raise ConfigError("raynaud", "nothing to do: give character, support or I/J")
    return emit_kv(pairs, args.format)


def _build_dmodule(cfg: RunConfig):
    kind = cfg.get("constructor", "ordinary")
    if kind == "dump":
        path = cfg.require("path")
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError("path", str(exc)) from None
        D, filt = ds.load(text)
        if filt is None:
            raise StrataError("dump has no type records", path)
        return D, filt
    F = _field(cfg)
    if kind == "ordinary":
        return ds.ordinary(F, cfg.shape, cfg.sigma)
    if kind == "supersingular":
        return ds.supersingular(F)
    if kind == "lines":
        L = cfg.require("L")
        M = cfg.require("M")
        try:
            return ds.from_lines(F, [tuple(x) for x in L], [tuple(x) for x in M])
        except (TypeError, IndexError):
            raise ConfigError("L/M", "expected lists of 2-vectors") from None
    raise ConfigError("constructor", f"unknown constructor {kind!r}")


def cmd_dmod(cfg: RunConfig, args: argparse.Namespace) -> str:
    D, filt = _build_dmodule(cfg)
    bad = ds.validate(D) + ds.check_filtration(D, filt)
    if bad:
        slot, why = bad[0]
        raise StrataError("invalid Dieudonne module", f"slot {slot}: {why}")
    shape = D.shape
    Dc, fc = ds.dual_module(D), ds.dual_filtration(D, filt)
    pairs: list[tuple[str, Any]] = [("field", repr(D.field)),
                                    ("shape", ",".join(f"({p.e},{p.f})" for p in shape.primes))]
    for slot in D.slots():
        pairs.append((f"type.p{slot[0]}.t{slot[1]}", "".join(map(str, filt.type(slot)))))
    for b in shape.embeddings():
        if filt.s(b) == 1:
            h = ds.partial_hasse(D, filt, b)
            pairs.append((f"hasse.{b.label}", "vanishes" if h.vanishes else "nonzero"))
    pairs.append(("go_type", fmt_set(shape, ds.go_type(D, filt))))
    pairs.append(("dual.go_type", fmt_set(shape, ds.go_type(Dc, fc))))
    out = emit_kv(pairs, args.format)
    if cfg.get("emit_dump", False):
        out += ds.dump(D, filt)
    return out


def _poly_matrix(cfg: RunConfig, R: lm.TruncPoly) -> lm.LocalRingMatrix:
    raw = cfg.require("matrix")
    if not isinstance(raw, list) or not raw or not all(isinstance(r, list) for r in raw):
        raise ConfigError("matrix", "expected a list of rows")
    if len({len(r) for r in raw}) != 1:
        raise ConfigError("matrix", "rows have different lengths")
    try:
        return lm.LocalRingMatrix.from_ints(R, raw)
    except TypeError:
        raise ConfigError("matrix", "entries must be ints or coefficient lists") from None


def cmd_localmodel(cfg: RunConfig, args: argparse.Namespace) -> str:
    F = _field(cfg)
    mode = cfg.get("mode", "obstruction")
    if mode == "obstruction":
        d, i, j = (cfg.require(k) for k in ("d", "i", "j"))
        rep = lm.obstruction_witness(d, i, j, F, n=cfg.get("n", 3))
        pairs = [("d", d), ("i", i), ("j", j), ("snf", ",".join(rep.snf.render())),
                 ("projective", str(rep.is_projective).lower())]
    elif mode == "snf":
        R = lm.TruncPoly(F, cfg.require("n"))
        res = lm.snf(_poly_matrix(cfg, R))
        pairs = [("snf", ",".join(res.render())),
                 ("projective", str(all(k in (0, None) for k in res.exponents)).lower())]
    elif mode == "pair":
        d = cfg.require("d")
        ring = ds.TruncRing(F, d)
        gens = cfg.require("generators")
        try:
            Fm = lm.LatticeSubmodule.generated_by(ring, [ring.vec(a, b) for a, b in gens])
        except (TypeError, ValueError):
            raise ConfigError("generators", "expected [[e1 coeffs], [e2 coeffs]] pairs") from None
        i, j = lm.elementary_pair(Fm)
        pairs = [("pair", f"({i},{j})"), ("stratum_index", min(i, j))]
    else:
        raise ConfigError("mode", f"unknown mode {mode!r}")
    return emit_kv(pairs, args.format)


COMMANDS: dict[str, Callable[[RunConfig, argparse.Namespace], str]] = {
    "jl": cmd_jl,
    "go": cmd_go,
    "tables": cmd_tables,
    "diagram": cmd_diagram,
    "raynaud": cmd_raynaud,
    "dmod": cmd_dmod,
    "localmodel": cmd_localmodel,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jlstrata", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON config file, '-' for stdin")
    ap.add_argument("--format", choices=("csv", "md", "txt"), default="txt")
    ap.add_argument("--collapse-rotations", action="store_true",
                    help="tables: one row per rotation orbit")
    return ap


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    try:
        text = sys.stdin.read() if args.config == "-" else Path(args.config).read_text()
    except OSError as exc:
        print(f"config: {exc}", file=stderr)
        return EXIT_PARSE
    try:
        cfg = load_config(text)
        out = COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(str(exc), file=stderr)
        return EXIT_PARSE
    except StrataError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_SEMANTIC
    stdout.write(out)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
