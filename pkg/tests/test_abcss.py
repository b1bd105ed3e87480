import pytest

from conftest import cyclic_module
from phantomcastle.abcss import (adjunction_check, cellular_couple, collapse_report, edge_map_agrees,
                                 ext_sequences, run_abc, verify_e2)
from phantomcastle.chaincx import ChainComplex, ChainMap, cone, ho_hom
from phantomcastle.couples import page_entry
from phantomcastle.errors import DepthExceeded
from phantomcastle.ideals import make_power_projective


def test_acyclic_base(fix1, Z):
    A = cone(ChainMap.identity(fix1)).complex
    run = run_abc(A, cyclic_module(Z, 2), depth=2, r_max=2)
    assert all(nf == [] for pg in run.pages.values() for nf in pg.normal_forms().values())
    assert run.all_verified()
    assert all(v.status == "converged" for v in run.convergence.values())


def test_fix1_universal_coefficients(fix1, Z):
    run = run_abc(fix1, cyclic_module(Z, 2), "homological", 3, 3)
    assert run.all_verified()
    v0, v1 = run.convergence[0], run.convergence[1]
    assert v0.status == v1.status == "converged"
    assert v0.value == [2] and v1.value == [2]
    # H_1(Fix1 ⊗ Z/2) comes entirely from Tor(H_0, Z/2), sitting in column 1
    assert v1.pieces[0] == [] and v1.pieces[1] == [2]
    assert v0.pieces[0] == [2]
    for q in (0, 1):
        assert edge_map_agrees(run.couple, q, run.stable[(0, q)].value)


def test_fix1_cohomological(fix1, Z):
    run = run_abc(fix1, cyclic_module(Z, 2), "cohomological", 3, 3)
    assert run.all_verified()
    assert {v.status for v in run.convergence.values()} == {"converged"}
    for c in verify_e2(run).values():
        assert c.ok


def test_fix2_partial_window(fix2, Z4):
    run = run_abc(fix2, cyclic_module(Z4, 2), "homological", 3, 3)
    assert run.all_verified()
    assert run.convergence[0].status == "converged"
    assert any(v.status == "partial-at-depth" for v in run.convergence.values())
    co = run_abc(fix2, cyclic_module(Z4, 2), "cohomological", 3, 3)
    assert {v.status for v in co.convergence.values()} == {"caveat"}
    assert co.convergence[0].notes


def test_e2_columns_beyond_resolution(fix1, Z):
    run = run_abc(fix1, cyclic_module(Z, 3), "homological", 4, 2)
    e2 = verify_e2(run)
    for (p, q), c in e2.items():
        assert c.ok
        if p >= 2:
            assert c.page_form == c.oracle_form == []


def test_depth_guard(fix1, Z):
    with pytest.raises(DepthExceeded):
        run_abc(fix1, cyclic_module(Z, 2), depth=0)
    with pytest.raises(ValueError):
        run_abc(fix1, cyclic_module(Z, 2), r_max=1)


def test_grading(fix2, Z4):
    for variance, step in (("homological", -1), ("cohomological", 1)):
        run = run_abc(fix2, cyclic_module(Z4, 2), variance, 4, 3, certify_pages=False)
        for r in (2, 3):
            dp, dq = run.couple.differential_degree(r)
            assert dp + dq == step
            assert (dp, dq) == ((-r, r - 1) if step < 0 else (r, 1 - r))


def test_cellular_comparison(fix1, fix2, Z, Z4):
    for A, M in ((fix1, cyclic_module(Z, 2)), (fix2, cyclic_module(Z4, 2))):
        run = run_abc(A, M, "homological", 4, 3, certify_pages=False)
        rep = cellular_couple(run)
        assert rep.ok()
        assert {r for r, _, _ in rep.page_isomorphisms} == {1, 2, 3}


def test_ext_sequences(fix1, Z):
    es = ext_sequences(fix1, fix1)
    assert es.ok()
    assert es.ext0.normal_form() == [2] and es.ext1.normal_form() == []
    # nothing maps from A to a complex concentrated far away
    far = ChainComplex(Z, {5: 1})
    assert ho_hom(fix1, far).is_zero()
    es = ext_sequences(fix1, far)
    assert es.ok()
    assert all(t.is_zero() for t in es.seq0.terms + es.seq1.terms)
    # a projective source: Ext^0 is everything and Ext^1 vanishes
    P = ChainComplex(Z, {0: 1})
    es = ext_sequences(P, fix1)
    assert es.ok()
    assert es.ext0.normal_form() == ho_hom(P, fix1).normal_form() == [2]
    assert es.ext1.is_zero()


def test_adjunction_examples(fix1, fix2, Z, Z4):
    ad = adjunction_check((Z, {0: 1}), fix1)
    assert ad.ok() and ad.left.normal_form() == ad.right.normal_form() == [2]
    ad = adjunction_check((Z, {}), fix1)
    assert ad.ok() and ad.left.is_zero()
    ad = adjunction_check((Z4, {0: 1, 2: 1}), fix2)
    assert ad.ok() and ad.left.normal_form() == [2]
    with pytest.raises(ValueError):
        adjunction_check(fix1, fix1)


@pytest.mark.parametrize("m", [0, 1, 2])
def test_collapse(Z4, m):
    blocks = [{0: 1}] + [{j: 1} for j in range(1, m + 1)]
    att = [{j - 1: [[2]]} for j in range(1, m + 1)]
    A = make_power_projective(Z4, blocks, att)
    rep = collapse_report(A, m, cyclic_module(Z4, 2))
    assert rep.ok()
    assert all(nf == [] for (p, q), (nf, s) in rep.entries.items() if p > m)


def test_stable_band_from_run(fix2, Z4):
    run = run_abc(fix2, cyclic_module(Z4, 2), "homological", 6, 5, certify_pages=False)
    assert run.stable[(5, 0)].stabilized_at is None
    assert page_entry(run.couple, 2, 4, 1).normal_form() == [2]
