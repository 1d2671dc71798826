"""Generator tables, relation checks, and verification reports."""

import copy
import json

import pytest

import _bracket_fixtures as fixtures
from toroidal.root_data import ConfigError, build_lattice
from toroidal.toroidal_rep import (
    ENTRY_ORDER,
    build_generators,
    strip_generators,
    verify,
)
from toroidal.wick_engine import has_null_part

CONFIGS = [("A", 2), ("A", 3), ("A", 4), ("B", 2), ("B", 3),
           ("C", 2), ("C", 3), ("D", 4)]


# --- displayed bracket computations --------------------------------------------

@pytest.mark.parametrize("check", fixtures.ALL_CHECKS, ids=lambda fn: fn.__name__)
def test_displayed_bracket(check):
    check()


# --- generator tables -----------------------------------------------------------

@pytest.mark.parametrize("typ,rank", CONFIGS)
def test_generator_table_shape(typ, rank):
    ctx = build_lattice(typ, rank)
    gens = build_generators(ctx)
    assert len(gens.xp) == len(gens.xm) == len(gens.h) == ctx.num_nodes
    names = [name for name, _ in gens.all_fields()]
    assert names == ([f"X+({i})" for i in range(ctx.num_nodes)]
                     + [f"X-({i})" for i in range(ctx.num_nodes)]
                     + [f"H({i})" for i in range(ctx.num_nodes)])


@pytest.mark.parametrize("typ,rank", CONFIGS)
def test_stripped_generators_are_null_free(typ, rank):
    ctx = build_lattice(typ, rank)
    gens = build_generators(ctx)
    stripped = strip_generators(gens)
    assert any(has_null_part(f) for _, f in gens.all_fields())
    assert not any(has_null_part(f) for _, f in stripped.all_fields())


# --- report shape ---------------------------------------------------------------

def strip_millis(report):
    out = copy.deepcopy(report)
    for e in out["entries"]:
        e.pop("millis")
    return out


def test_report_shape_and_entry_order():
    report = verify("A", 2, mode="full", sweep=False)
    assert report["schema"] == 1

    header = report["header"]
    assert header["type"] == "A" and header["rank"] == 2
    assert header["mode"] == "full"
    assert header["K"] == 3 and header["E"] == "7/2"
    assert header["cartan"] == [[2, -2], [-2, 2]]
    assert header["marks"] == [1, 1]
    assert all(isinstance(row, str) for row in header["d"])
    assert header["notes"]

    ids = [e["id"] for e in report["entries"]]
    assert set(ids) <= set(ENTRY_ORDER)
    # entries come in homogeneous blocks following the canonical order
    block_order = [eid for n, eid in enumerate(ids) if n == 0 or ids[n - 1] != eid]
    assert block_order == [eid for eid in ENTRY_ORDER if eid in ids]

    for e in report["entries"]:
        assert set(e) == {"id", "params", "status", "residue", "millis"}
        assert e["status"] in ("pass", "pass_mod_null", "fail")

    summary = report["summary"]
    assert summary["total"] == len(report["entries"])
    for status in ("pass", "pass_mod_null", "fail"):
        assert summary[status] == sum(1 for e in report["entries"]
                                      if e["status"] == status)
    assert summary["ok"] is (summary["fail"] == 0)
    assert summary["ok"]


@pytest.mark.parametrize("typ,rank", [("A", 2), ("C", 2)])
def test_strict_mode_closes_exactly(typ, rank):
    report = verify(typ, rank, mode="strict", sweep=False)
    assert report["summary"]["ok"]
    assert report["summary"]["fail"] == 0
    assert report["summary"]["pass_mod_null"] == 0
    # the null-residue centrality entries only exist in full mode
    assert all(e["id"] != "CENTRAL" for e in report["entries"])


def test_full_mode_records_null_residues():
    report = verify("A", 2, mode="full", sweep=False)
    assert report["summary"]["ok"]
    mod_null_entries = [e for e in report["entries"]
                        if e["status"] == "pass_mod_null"]
    assert mod_null_entries
    assert all(e["residue"] for e in mod_null_entries)

    central = [e for e in report["entries"] if e["id"] == "CENTRAL"]
    assert len(central) == len(mod_null_entries)
    assert all(e["status"] == "pass" for e in central)
    sources = {e["params"]["source"].split(",")[0] for e in central}
    assert sources <= {"R1", "R2", "R3", "R4"}


@pytest.mark.parametrize("typ,rank", CONFIGS)
def test_every_null_residue_gets_a_centrality_entry(typ, rank):
    report = verify(typ, rank, mode="full", sweep=False)
    assert report["summary"]["ok"]
    residues = report["summary"]["pass_mod_null"]
    central = [e for e in report["entries"] if e["id"] == "CENTRAL"]
    if residues:
        assert len(central) == residues
        assert all("source" in e["params"] for e in central)
    else:
        assert len(central) == 1 and central[0]["params"] == {"residues": 0}
    assert all(e["status"] == "pass" for e in central)


def test_weight_action_entries_by_type():
    # the eps-root weight-action checks exist for A, B, D but not C
    rep_a = verify("A", 3, mode="full", sweep=False)
    assert any(e["id"] == "R2" and "root" in e["params"]
               for e in rep_a["entries"])
    rep_c = verify("C", 2, mode="full", sweep=False)
    assert not any(e["id"] == "R2" and "root" in e["params"]
                   for e in rep_c["entries"])


def test_nullroot_and_level_entries():
    report = verify("B", 2, mode="full", sweep=False)
    ctx = build_lattice("B", 2)

    nullroot = [e for e in report["entries"] if e["id"] == "NULLROOT"]
    assert len(nullroot) == 1
    assert nullroot[0]["status"] == "pass"
    assert nullroot[0]["params"]["marks"] == list(ctx.marks)

    level = [e for e in report["entries"] if e["id"] == "LEVEL"]
    assert [e["params"]["i"] for e in level] == list(range(ctx.num_nodes))
    assert all(e["status"] == "pass" for e in level)
    assert all(e["params"]["level"] == "1" for e in level)


def test_report_is_deterministic_and_json_ready():
    a = verify("A", 3, mode="full", sweep=False, seed=7)
    b = verify("A", 3, mode="full", sweep=False, seed=7)
    assert strip_millis(a) == strip_millis(b)
    assert json.loads(json.dumps(a)) == a


def test_thread_pool_matches_serial(monkeypatch):
    serial = verify("A", 3, mode="full", sweep=False, threads=1)
    pooled = verify("A", 3, mode="full", sweep=False, threads=3)
    assert strip_millis(serial) == strip_millis(pooled)

    monkeypatch.setenv("TOROIDAL_THREADS", "2")
    from_env = verify("A", 3, mode="full", sweep=False)
    assert strip_millis(serial) == strip_millis(from_env)

    monkeypatch.setenv("TOROIDAL_THREADS", "two")
    with pytest.raises(ConfigError):
        verify("A", 3, mode="full", sweep=False)


def test_energy_header_formats_integers():
    report = verify("A", 2, mode="strict", sweep=False, e2max=6)
    assert report["header"]["E"] == "3"


def test_sweep_entries_in_report():
    report = verify("A", 2, mode="full", K=1, e2max=2, sweep=True)
    sweep = [e for e in report["entries"] if e["id"] == "SWEEP"]
    assert len(sweep) == 36  # six generator fields, all ordered pairs
    assert all(e["status"] == "pass" for e in sweep)
    names = {f"X+({i})" for i in range(2)} | {f"X-({i})" for i in range(2)} \
        | {f"H({i})" for i in range(2)}
    assert {e["params"]["left"] for e in sweep} == names
    assert {e["params"]["right"] for e in sweep} == names
    assert report["summary"]["ok"]


def test_verify_rejects_bad_parameters():
    with pytest.raises(ConfigError):
        verify("A", 2, mode="loose")
    with pytest.raises(ConfigError):
        verify("D", 3)
    with pytest.raises(ConfigError):
        verify("A", 2, K=-1, sweep=False)
