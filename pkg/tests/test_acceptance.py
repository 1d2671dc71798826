"""Acceptance gate: one test per stated criterion, each printing a
pass/fail line with its runtime.

The expensive shared artifacts (full-mode verification reports with the
exhaustive mode-pair sweep) are built once per session and reused.
"""

import random
import time
from fractions import Fraction

import pytest

import _bracket_fixtures as fixtures
import test_root_data as root_tables
from toroidal.fock_space import (
    apply_atom_mode,
    apply_quad_mode,
    as_vector,
    dump_state,
    enumerate_states,
    mode_commutator,
    vec_scale,
    vec_sub,
)
from toroidal.root_data import Coeff, build_lattice, ghost, pair_atoms
from toroidal.toroidal_rep import build_generators, strip_generators, verify
from toroidal.wick_engine import LocalField, bracket, quad_canon

CONFIGS = [("A", 2), ("A", 3), ("A", 4), ("B", 2), ("B", 3),
           ("C", 2), ("C", 3), ("D", 4)]

SWEEP_BUDGET_SECONDS = 15 * 60


def _stamp(name, t0):
    print(f"{name}: PASS in {time.perf_counter() - t0:.2f}s")


@pytest.fixture(scope="session")
def full_reports():
    """Full-mode verification with the exhaustive sweep, per configuration."""
    out = {}
    t0 = time.perf_counter()
    for typ, rank in CONFIGS:
        t1 = time.perf_counter()
        out[(typ, rank)] = verify(typ, rank, mode="full", sweep=True)
        print(f"  full verify {typ}{rank}: {time.perf_counter() - t1:.1f}s")
    out["elapsed"] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="session")
def strict_reports():
    return {(typ, rank): verify(typ, rank, mode="strict", sweep=False)
            for typ, rank in CONFIGS}


def test_criterion_1_lattice_tables():
    # Exact Cartan matrices, d-vectors, marks, and bilinear forms for all
    # eight configurations, in under a second.
    t0 = time.perf_counter()
    for typ, rank in CONFIGS:
        ctx = build_lattice(typ, rank)
        key = (typ, rank)
        assert [list(row) for row in ctx.cartan] == root_tables.EXPECTED_CARTAN[key]
        assert ctx.marks == root_tables.EXPECTED_MARKS[key]
        assert tuple(str(d) for d in ctx.dvec) == tuple(
            str(Coeff(d)) for d in root_tables.EXPECTED_D[key])
        for i in range(ctx.num_nodes):
            for j in range(ctx.num_nodes):
                form = ctx.simple[i].form(ctx.simple[j])
                assert form == Coeff(ctx.dvec[i]) * ctx.cartan_entry(i, j)
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    _stamp("criterion 1 (lattice tables, < 1s)", t0)


def test_criterion_2_displayed_brackets():
    # Every frozen bracket computation, in both quotients, in under 5s.
    t0 = time.perf_counter()
    for check in fixtures.ALL_CHECKS:
        check()
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    _stamp(f"criterion 2 ({len(fixtures.ALL_CHECKS)} bracket fixtures, < 5s)", t0)


def test_criterion_3_mode_sweep_equivalence(full_reports):
    # For every configuration, every ordered generator pair, every mode pair
    # |k|,|m| <= 3 with |k+m| <= 3, and every state of energy <= 7/2, the
    # commutator of mode operators equals the bracket's mode action plus its
    # central term — checked exactly by the sweep entries of the full reports.
    t0 = time.perf_counter()
    for typ, rank in CONFIGS:
        report = full_reports[(typ, rank)]
        ctx = build_lattice(typ, rank)
        nfields = 3 * ctx.num_nodes
        sweep = [e for e in report["entries"] if e["id"] == "SWEEP"]
        assert len(sweep) == nfields * nfields, (typ, rank)
        bad = [e for e in sweep if e["status"] != "pass"]
        assert not bad, (typ, rank, bad[:3])
        assert report["header"]["K"] == 3
        assert report["header"]["E"] == "7/2"
    assert full_reports["elapsed"] < SWEEP_BUDGET_SECONDS
    _stamp(f"criterion 3 (mode sweep, all configs, "
           f"{full_reports['elapsed']:.0f}s of {SWEEP_BUDGET_SECONDS}s budget)", t0)


def test_criterion_4_relation_suite(full_reports, strict_reports):
    # Strict mode: every relation closes exactly (no failures, no residues).
    # Full mode: no failures, and every recorded null residue is re-proven
    # central against all generator fields.
    t0 = time.perf_counter()
    for typ, rank in CONFIGS:
        strict = strict_reports[(typ, rank)]["summary"]
        assert strict["ok"], (typ, rank)
        assert strict["fail"] == 0, (typ, rank)
        assert strict["pass_mod_null"] == 0, (typ, rank)

        report = full_reports[(typ, rank)]
        assert report["summary"]["fail"] == 0, (typ, rank)
        residues = [e for e in report["entries"] if e["status"] == "pass_mod_null"
                    and e["id"] in ("R1", "R2", "R3", "R4")]
        central = [e for e in report["entries"] if e["id"] == "CENTRAL"]
        assert len(central) == len(residues) or (not residues and len(central) == 1)
        assert all(e["status"] == "pass" for e in central), (typ, rank)
    _stamp("criterion 4 (relation suite, strict and full)", t0)


def test_criterion_5_level(full_reports, strict_reports):
    # The central coefficient of [X+_i, X-_i] is -2/(alpha_i|alpha_i), i.e.
    # the central element acts as 1; and the marks combination of Cartan
    # fields has zero mode 0 action on the quotient module.
    t0 = time.perf_counter()
    for typ, rank in CONFIGS:
        ctx = build_lattice(typ, rank)
        gens = strip_generators(build_generators(ctx))
        # level coordinate along the first central direction
        for i in range(ctx.num_nodes):
            norm = ctx.simple[i].form(ctx.simple[i])
            dd = bracket(gens.xp[i], gens.xm[i]).ddelta_part
            assert dd == Coeff(-2) / norm, (typ, rank, i)
        # level coordinate along the second: the null-root combination
        # annihilates every test state at mode 0
        D = LocalField()
        for mark, hf in zip(ctx.marks, gens.h):
            D = D + Coeff(mark) * hf
        for st in enumerate_states(ctx, 3, include_null=False):
            assert apply_quad_mode(ctx, D, 0, st) == {}, (typ, rank, dump_state(st))
        # and the reports agree
        for reports in (full_reports, strict_reports):
            entries = reports[(typ, rank)]["entries"]
            levels = [e for e in entries if e["id"] == "LEVEL"]
            assert len(levels) == ctx.num_nodes
            assert all(e["status"] == "pass" for e in levels), (typ, rank)
            nullroot = [e for e in entries if e["id"] == "NULLROOT"]
            assert all(e["status"] == "pass" for e in nullroot), (typ, rank)
    _stamp("criterion 5 (level normalization and null-root action)", t0)


def _apply_pair(ctx, state, u, hu, v, hv):
    r1 = apply_atom_mode(ctx, state, v, hv)
    if r1 is None:
        return {}
    r2 = apply_atom_mode(ctx, r1[1], u, hu)
    if r2 is None:
        return {}
    return {r2[1]: Coeff(r1[0] * r2[0])}


def test_criterion_6_fermionic_kernel():
    # Anticommutators on states for every atomic pair and |k|,|l| <= 5/2,
    # including the ghost's negative pairing; double creation annihilates;
    # Jacobi identity on 50 seeded mode-level triples. All exact.
    t0 = time.perf_counter()
    assert pair_atoms(ghost(), ghost()) == -1

    for typ, rank in [("B", 2), ("C", 2)]:
        ctx = build_lattice(typ, rank)
        atoms = list(ctx.atoms)
        states = enumerate_states(ctx, 2)
        for u in atoms:
            for v in atoms:
                scalar = pair_atoms(u, v)
                for hk in (-5, -3, -1, 1, 3, 5):
                    for hl in (-5, -3, -1, 1, 3, 5):
                        expect = scalar if hk + hl == 0 else 0
                        for st in states:
                            total = dict(_apply_pair(ctx, st, u, hk, v, hl))
                            for out_st, val in _apply_pair(ctx, st, v, hl, u, hk).items():
                                acc = total.get(out_st, Coeff(0)) + val
                                if acc:
                                    total[out_st] = acc
                                else:
                                    total.pop(out_st, None)
                            want = {st: Coeff(expect)} if expect else {}
                            assert total == want, (typ, u, v, hk, hl, dump_state(st))
        # double creation of the same mode annihilates everything
        for u in atoms:
            for h in (-5, -3, -1):
                for st in states:
                    first = apply_atom_mode(ctx, st, u, h)
                    if first is None:
                        continue
                    assert apply_atom_mode(ctx, first[1], u, h) is None

    # Jacobi identity for nested mode commutators
    rng = random.Random(0xACC6)
    ctx = build_lattice("B", 2)
    atoms = list(ctx.atoms)
    states = enumerate_states(ctx, 4)

    def rand_field():
        u, v = rng.sample(atoms, 2)
        sign, mono = quad_canon(u, v)
        c = Coeff(Fraction(rng.randint(-3, 3), rng.randint(1, 2)),
                  Fraction(rng.randint(-1, 1), 1))
        return LocalField({mono: Coeff(sign)}) * c

    def nested(A, k, B, m, C, p, st):
        inner = mode_commutator(ctx, B, m, C, p, st)
        out = apply_quad_mode(ctx, A, k, inner)
        swap = apply_quad_mode(ctx, A, k, as_vector(st))
        outer = mode_commutator(ctx, B, m, C, p, swap)
        return vec_sub(out, outer)

    for trial in range(50):
        A, B, C = rand_field(), rand_field(), rand_field()
        k, m, p = (rng.randint(-2, 2) for _ in range(3))
        st = rng.choice(states)
        total = nested(A, k, B, m, C, p, st)
        total = vec_sub(total, vec_scale(-1, nested(B, m, C, p, A, k, st)))
        total = vec_sub(total, vec_scale(-1, nested(C, p, A, k, B, m, st)))
        assert total == {}, (trial, k, m, p, dump_state(st))

    _stamp("criterion 6 (fermionic kernel sanity)", t0)
