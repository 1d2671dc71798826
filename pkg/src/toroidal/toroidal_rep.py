from __future__ import annotations

import os
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

from . import __version__
from .fock_space import (
    apply_quad_mode,
    as_vector,
    enumerate_states,
    mode_commutator,
    vec_scale,
    vec_sub,
)
from .root_data import (
    Coeff,
    ConfigError,
    LatticeContext,
    build_lattice,
    eps,
    eps_star,
    eps_vec,
    epsbar,
    epsbar_star,
    ghost,
)
from .wick_engine import (
    LocalField,
    ad_power,
    apply_mode,
    beta_field,
    betabar_field,
    bracket,
    is_null,
    lin,
    mod_null,
    normal_quad,
)

HALF = Coeff(Fraction(1, 2))
SQRT2 = Coeff(0, 1)
TWO = Coeff(2)

ENTRY_ORDER = ("R1", "R2", "R3", "R4", "NULLROOT", "CENTRAL", "LEVEL", "SWEEP")


@dataclass
class GeneratorSet:
    """Chevalley-style generator fields, indexed by node 0..num_nodes-1."""
    ctx: LatticeContext
    xp: tuple
    xm: tuple
    h: tuple

    def all_fields(self):
        """Deterministic (name, field) listing of every generator."""
        out = []
        for i, f in enumerate(self.xp):
            out.append((f"X+({i})", f))
        for i, f in enumerate(self.xm):
            out.append((f"X-({i})", f))
        for i, f in enumerate(self.h):
            out.append((f"H({i})", f))
        return out

    def node_names(self):
        return tuple(range(len(self.h)))


def _E(i):
    return normal_quad(lin(eps(i)), lin(eps_star(i)))


def _Ebar(i):
    return normal_quad(lin(epsbar(i)), lin(epsbar_star(i)))


def build_generators(ctx: LatticeContext) -> GeneratorSet:
    typ, n = ctx.typ, ctx.n
    N = ctx.num_nodes
    xp = [None] * N
    xm = [None] * N
    h = [None] * N

    if typ == "C":
        for i in range(1, n):
            xp[i] = (normal_quad(lin(eps(i)), lin(eps_star(i + 1)))
                     - normal_quad(lin(epsbar(i + 1)), lin(epsbar_star(i))))
            xm[i] = (normal_quad(lin(eps_star(i)), lin(eps(i + 1)))
                     - normal_quad(lin(epsbar_star(i + 1)), lin(epsbar(i))))
            h[i] = HALF * (_E(i) - _E(i + 1) - _Ebar(i) + _Ebar(i + 1))
        xp[n] = normal_quad(lin(eps(n)), lin(epsbar_star(n)))
        xm[n] = normal_quad(lin(eps_star(n)), lin(epsbar(n)))
        h[n] = _E(n) - _Ebar(n)
        b, bs = beta_field(ctx), beta_field(ctx, star=True)
        bb, bbs = betabar_field(ctx), betabar_field(ctx, star=True)
        xp[0] = HALF * (normal_quad(bs, lin(epsbar(1)))
                        + normal_quad(lin(eps_star(1)), bb))
        xm[0] = HALF * (normal_quad(b, lin(epsbar_star(1)))
                        + normal_quad(lin(eps(1)), bbs))
        h[0] = HALF * (normal_quad(bs, b) + normal_quad(lin(eps_star(1)), lin(eps(1)))
                       - normal_quad(bbs, bb)
                       - normal_quad(lin(epsbar_star(1)), lin(epsbar(1))))
        return GeneratorSet(ctx, tuple(xp), tuple(xm), tuple(h))

    for i in range(1, n):
        xp[i] = normal_quad(lin(eps(i)), lin(eps_star(i + 1)))
        xm[i] = normal_quad(lin(eps_star(i)), lin(eps(i + 1)))
        h[i] = _E(i) - _E(i + 1)

    b, bs = beta_field(ctx), beta_field(ctx, star=True)
    if typ == "A":
        xp[0] = normal_quad(lin(eps(n)), bs)
        xm[0] = normal_quad(lin(eps_star(n)), b)
        h[0] = _E(n) - normal_quad(b, bs)
    else:
        # types B and D share the affine node attached through eps_2
        xp[0] = normal_quad(bs, lin(eps_star(2)))
        xm[0] = normal_quad(b, lin(eps(2)))
        h[0] = normal_quad(bs, b) + normal_quad(lin(eps_star(2)), lin(eps(2)))
        if typ == "B":
            xp[n] = SQRT2 * normal_quad(lin(eps(n)), lin(ghost()))
            xm[n] = SQRT2 * normal_quad(lin(ghost()), lin(eps_star(n)))
            h[n] = _E(n)
        else:
            xp[n] = normal_quad(lin(eps(n - 1)), lin(eps(n)))
            xm[n] = normal_quad(lin(eps_star(n - 1)), lin(eps_star(n)))
            h[n] = _E(n - 1) + _E(n)
    return GeneratorSet(ctx, tuple(xp), tuple(xm), tuple(h))


def strip_generators(gens: GeneratorSet) -> GeneratorSet:
    return GeneratorSet(
        gens.ctx,
        tuple(mod_null(f) for f in gens.xp),
        tuple(mod_null(f) for f in gens.xm),
        tuple(mod_null(f) for f in gens.h),
    )


### relation checks ###


def _status(diff: LocalField, ddiff: Coeff, mode: str):
    """Classify a residue. The d_delta component must always cancel exactly."""
    if ddiff:
        return "fail", f"d_delta residue {ddiff}"
    if diff.is_zero():
        return "pass", None
    if mode == "full" and is_null(diff):
        return "pass_mod_null", str(diff)
    return "fail", str(diff)


def _entry(eid, params, status, residue, t0):
    return {
        "id": eid,
        "params": params,
        "status": status,
        "residue": residue,
        "millis": round((time.perf_counter() - t0) * 1000.0, 3),
    }


def _check_r1(ctx, gens, mode, i, j):
    t0 = time.perf_counter()
    res = bracket(gens.h[i], gens.h[j])
    want = ctx.simple[i].form(ctx.simple[j])
    status, residue = _status(apply_mode(res.delta_part, mode),
                              res.ddelta_part - want, mode)
    return _entry("R1", {"i": i, "j": j}, status, residue, t0)


def _check_r2(ctx, gens, mode, i, j, sign):
    t0 = time.perf_counter()
    x = gens.xp[j] if sign > 0 else gens.xm[j]
    res = bracket(gens.h[i], x)
    scale = ctx.simple[i].form(ctx.simple[j])
    if sign < 0:
        scale = -scale
    diff = apply_mode(res.delta_part - scale * x, mode)
    status, residue = _status(diff, res.ddelta_part, mode)
    return _entry("R2", {"i": i, "j": j, "sign": "+" if sign > 0 else "-"},
                  status, residue, t0)


def _check_r2_extended(ctx, gens, mode, i, k, el):
    # weight action on the non-simple root vector X(eps_k - eps_l)
    t0 = time.perf_counter()
    x = normal_quad(lin(eps(k)), lin(eps_star(el)))
    if mode == "strict":
        x = mod_null(x)
    res = bracket(gens.h[i], x)
    scale = ctx.simple[i].form(eps_vec(k) - eps_vec(el))
    diff = apply_mode(res.delta_part - scale * x, mode)
    status, residue = _status(diff, res.ddelta_part, mode)
    return _entry("R2", {"i": i, "root": f"eps({k})-eps({el})"}, status, residue, t0)


def _check_r3(ctx, gens, mode, i, j):
    t0 = time.perf_counter()
    res = bracket(gens.xp[i], gens.xm[j])
    if i == j:
        norm = ctx.simple[i].form(ctx.simple[i])
        c2 = TWO / norm
        diff = apply_mode(res.delta_part + c2 * gens.h[i], mode)
        ddiff = res.ddelta_part + c2
    else:
        diff = apply_mode(res.delta_part, mode)
        ddiff = res.ddelta_part
    status, residue = _status(diff, ddiff, mode)
    return _entry("R3", {"i": i, "j": j}, status, residue, t0)


def _check_r4(ctx, gens, mode, i, j, sign):
    t0 = time.perf_counter()
    p = 1 - ctx.cartan_entry(i, j)
    if sign > 0:
        res = ad_power(gens.xp[i], gens.xp[j], p, mode)
    else:
        res = ad_power(gens.xm[i], gens.xm[j], p, mode)
    status, residue = _status(res.delta_part, res.ddelta_part, mode)
    params = {"i": i, "j": j, "sign": "+" if sign > 0 else "-", "power": p}
    return _entry("R4", params, status, residue, t0)


def _null_root_field(ctx, gens):
    total = LocalField()
    for a, hf in zip(ctx.marks, gens.h):
        total = total + Coeff(a) * hf
    return total


def _check_nullroot(ctx, gens, mode, seed):
    t0 = time.perf_counter()
    D = _null_root_field(ctx, gens)
    problems = []
    if not mod_null(D).is_zero():
        problems.append(f"marks combination is not null: {mod_null(D)}")
    for name, g in gens.all_fields():
        res = bracket(D, g)
        if not is_null(res.delta_part) or res.ddelta_part:
            problems.append(f"bracket with {name} leaves the null span")
            break
    # state-level action: the zero mode must vanish on the quotient module,
    # i.e. outputs on null-free states never leave the null sector.
    rng = random.Random(seed ^ 0xD00D)
    states = enumerate_states(ctx, 3, include_null=False)
    sample = [states[0]] + rng.sample(states, min(8, len(states)))
    for st in sample:
        out = apply_quad_mode(ctx, D, 0, st)
        for out_st in out:
            if all(a.partner() is not None for _, a, _h in out_st):
                problems.append("zero mode acts inside the quotient module")
                break
    status = "pass" if not problems else "fail"
    residue = None if not problems else "; ".join(problems)
    return _entry("NULLROOT", {"marks": list(ctx.marks)}, status, residue, t0)


def _check_central(gens, source, residue_field):
    t0 = time.perf_counter()
    bad = None
    if not is_null(residue_field):
        bad = "residue is not null"
    else:
        for name, g in gens.all_fields():
            res = bracket(residue_field, g)
            if not is_null(res.delta_part) or res.ddelta_part:
                bad = f"bracket with {name} leaves the null span"
                break
    status = "pass" if bad is None else "fail"
    return _entry("CENTRAL", {"source": source, "residue": str(residue_field)},
                  status, bad, t0)


def _check_level(ctx, gens, mode, i, seed):
    t0 = time.perf_counter()
    res = bracket(gens.xp[i], gens.xm[i])
    norm = ctx.simple[i].form(ctx.simple[i])
    level = -res.ddelta_part * norm / TWO
    problems = []
    if level != Coeff(1):
        problems.append(f"central coefficient gives level {level}")
    include_null = mode == "full"
    states = enumerate_states(ctx, 3, include_null=include_null)
    rng = random.Random((seed * 1000003) ^ i)
    sample = [states[0]] + rng.sample(states, min(5, len(states)))
    for k in (1, 2):
        for st in sample:
            got = mode_commutator(ctx, gens.xp[i], k, gens.xm[i], -k, st)
            want = apply_quad_mode(ctx, res.delta_part, 0, st)
            central = res.ddelta_part * Coeff(k)
            want = vec_sub(want, vec_scale(-central, as_vector(st)))
            if got != want:
                problems.append(f"mode commutator mismatch at k={k}")
                break
    status = "pass" if not problems else "fail"
    residue = None if not problems else "; ".join(problems)
    return _entry("LEVEL", {"i": i, "level": "1"}, status, residue, t0)


### verification driver ###


def _relation_jobs(ctx, gens, mode, seed):
    nodes = range(ctx.num_nodes)
    jobs = []
    for i in nodes:
        for j in nodes:
            jobs.append(lambda i=i, j=j: _check_r1(ctx, gens, mode, i, j))
    for i in nodes:
        for j in nodes:
            for sign in (1, -1):
                jobs.append(lambda i=i, j=j, s=sign: _check_r2(ctx, gens, mode, i, j, s))
    if ctx.typ in ("A", "B", "D"):
        for i in nodes:
            for k in range(1, ctx.n + 1):
                for el in range(1, ctx.n + 1):
                    if k != el:
                        jobs.append(lambda i=i, k=k, el=el:
                                    _check_r2_extended(ctx, gens, mode, i, k, el))
    for i in nodes:
        for j in nodes:
            jobs.append(lambda i=i, j=j: _check_r3(ctx, gens, mode, i, j))
    for i in nodes:
        for j in nodes:
            if i != j:
                for sign in (1, -1):
                    jobs.append(lambda i=i, j=j, s=sign:
                                _check_r4(ctx, gens, mode, i, j, s))
    jobs.append(lambda: _check_nullroot(ctx, gens, mode, seed))
    return jobs


def _thread_count(threads):
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("TOROIDAL_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"TOROIDAL_THREADS must be an integer, got {env!r}")
    return 1


def _format_energy(e2max: int) -> str:
    frac = Fraction(e2max, 2)
    return str(frac.numerator) if frac.denominator == 1 else f"{frac.numerator}/{frac.denominator}"


def verify(typ: str, rank: int, mode: str = "full", K: int = 3, e2max: int = 7,
           sweep: bool = True, seed: int = 0, threads: int = None,
           block_cols: int = 800) -> dict:
    """Machine-check the presentation relations for one lattice configuration.

    mode "full" works with the complete fermionic alphabet and records null
    residues; mode "strict" quotients the cbar pair away first, so every
    relation must close exactly. Returns a JSON-ready report dict.
    """
    if mode not in ("strict", "full"):
        raise ConfigError(f"unknown mode {mode!r}")
    if K < 0 or e2max < 0:
        raise ConfigError("K and the energy bound must be nonnegative")
    ctx = build_lattice(typ, rank)
    gens = build_generators(ctx)
    if mode == "strict":
        gens = strip_generators(gens)

    nthreads = _thread_count(threads)
    jobs = _relation_jobs(ctx, gens, mode, seed)
    if nthreads > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            entries = list(pool.map(lambda fn: fn(), jobs))
    else:
        entries = [fn() for fn in jobs]

    if mode == "full":
        residues = []
        for e in entries:
            if e["status"] == "pass_mod_null" and e["id"] in ("R1", "R2", "R3", "R4"):
                src = e["id"] + "".join(f",{k}={v}" for k, v in sorted(e["params"].items()))
                residues.append((src, e["residue"]))
        if residues:
            from .wick_engine import parse_field
            for src, expr in residues:
                entries.append(_check_central(gens, src, parse_field(ctx, expr)))
        else:
            t0 = time.perf_counter()
            entries.append(_entry("CENTRAL", {"residues": 0}, "pass", None, t0))

    for i in range(ctx.num_nodes):
        entries.append(_check_level(ctx, gens, mode, i, seed))

    if sweep:
        from ._sweep import run_sweep
        t0 = time.perf_counter()
        results = run_sweep(ctx, gens.all_fields(), e2max=e2max, K=K,
                            include_null=(mode == "full"), block_cols=block_cols)
        for r in results:
            entries.append({
                "id": "SWEEP",
                "params": {"left": r["left"], "right": r["right"]},
                "status": r["status"],
                "residue": r["residue"],
                "millis": r["millis"],
            })

    counts = {"pass": 0, "pass_mod_null": 0, "fail": 0}
    for e in entries:
        counts[e["status"]] += 1
    notes = [
        "middle Cartan fields H(i) cover nodes 1..n-1; the end node carries "
        "its own normalization",
        "sweep checks every mode pair |k|,|m| <= K with |k+m| <= K on every "
        f"state with 2E <= {e2max}, exactly and in full",
    ]
    report = {
        "schema": 1,
        "header": {
            "type": ctx.typ,
            "rank": ctx.n,
            "mode": mode,
            "K": K,
            "E": _format_energy(e2max),
            "cartan": [list(row) for row in ctx.cartan],
            "d": [str(d) for d in ctx.dvec],
            "marks": list(ctx.marks),
            "engine": __version__,
            "notes": notes,
        },
        "entries": entries,
        "summary": {
            "pass": counts["pass"],
            "pass_mod_null": counts["pass_mod_null"],
            "fail": counts["fail"],
            "total": len(entries),
            "ok": counts["fail"] == 0,
        },
    }
    return report
