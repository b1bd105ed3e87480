import pytest

from conftest import complex_from, cyclic_module
from phantomcastle.chaincx import ChainComplex, ChainMap, cone, direct_sum, homotopic, is_null_homotopic
from phantomcastle.errors import DepthExceeded, MalformedRecipe
from phantomcastle.fgmod import span_contains
from phantomcastle.ideals import (HomologyWithCoefficients, filtration_cohomological,
                                  filtration_homological, filtration_step, in_ideal, in_power,
                                  is_projective, make_power_projective, power_witness,
                                  projective_cover)
from phantomcastle.towers import build_tower, in_power_projective_class


def test_in_ideal_examples(fix1, Z):
    acyclic = cone(ChainMap.identity(fix1)).complex
    assert in_ideal(ChainMap.identity(acyclic))
    assert not in_ideal(ChainMap.identity(fix1))
    assert in_ideal(build_tower(fix1, 1).iota(0, 1))


def test_in_power_examples(fix1, fix2):
    t = build_tower(fix2, 3)
    f = ChainMap.identity(fix2)
    assert in_power(f, 0, t) is f
    assert in_power(f, 1, t) is None
    comp = t.iota(1, 2).after(t.iota(0, 1))
    h = in_power(comp, 2, t)
    assert h is not None
    assert homotopic(h.after(t.iota(0, 2)), comp) is not None
    with pytest.raises(DepthExceeded):
        in_power(comp, 4, t)


def test_power_witness_factors_are_phantoms(fix2):
    t = build_tower(fix2, 3)
    comp = t.iota(0, 3)
    w = power_witness(comp, 3, t)
    assert w is not None and len(w.chain) == 3
    assert all(in_ideal(g) for g in w.chain)
    assert homotopic(w.composite(), comp) is not None
    # monotone in the exponent
    assert all(in_power(comp, n, t) is not None for n in range(4))


def test_projectivity(fix1, Z, Z4):
    free = ChainComplex(Z, {0: 2, 3: 1})
    assert is_projective(free)
    assert not is_projective(fix1)
    assert is_projective(direct_sum(free, ChainComplex(Z, {1: 1})))
    assert not is_projective(complex_from(Z4, {0: 1, 1: 1}, {1: [[2]]}))


def test_fix1_rebuilt_from_two_blocks(fix1, Z):
    X = make_power_projective(Z, [{0: 1}, {1: 1}], [{0: [[2]]}])
    assert X.homology().normal_forms() == fix1.homology().normal_forms()
    assert in_power_projective_class(X, 2)
    assert not in_power_projective_class(X, 1)


def test_bad_recipes(Z):
    with pytest.raises(MalformedRecipe):
        make_power_projective(Z, [], [])
    with pytest.raises(MalformedRecipe):
        make_power_projective(Z, [{0: 1}, {1: 1}], [])
    with pytest.raises(MalformedRecipe):
        make_power_projective(Z, [{0: 1}, {1: 1}], [{0: [[1, 2]]}])


def test_projective_cover(fix1, fix2, Z):
    acyclic = cone(ChainMap.identity(fix1)).complex
    P, pi = projective_cover(acyclic)
    assert P.is_zero_object()
    P, pi = projective_cover(fix1)
    assert P.ranks == {0: 1}
    P, pi = projective_cover(fix2)
    assert P.ranks == {0: 1, 1: 1}


def test_filtration_fix1(fix1, Z):
    M = cyclic_module(Z, 2)
    rep = filtration_homological(fix1, M, 3)
    nf = rep.normal_forms()
    assert nf[(0, 0)] == [] and nf[(1, 0)] == []
    assert nf[(1, 1)] == [] and nf[(1, 2)] == [2]
    assert nf[(0, 1)] == [2]
    assert rep.is_monotone()
    co = filtration_cohomological(fix1, M, 3)
    for m in (0, 1):
        assert co.normal_forms()[(m, 0)] == [2]
    assert co.is_monotone()
    with pytest.raises(DepthExceeded):
        filtration_homological(fix1, M, 5, tower=build_tower(fix1, 2))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_power_projectives_have_short_towers(Z4, k):
    blocks = [{0: 1}] + [{j: 1} for j in range(1, k)]
    att = [{j - 1: [[2]]} for j in range(1, k)]
    A = make_power_projective(Z4, blocks, att)
    assert in_power_projective_class(A, k)
    t = build_tower(A, k + 2)
    for m in range(0, t.depth - k + 1):
        assert is_null_homotopic(t.iota(m, m + k))


def test_ideal_action_on_filtration(fix2, Z4):
    """f in I^b sends F:I^(a+b) of the source into F:I^a of the target."""
    F = HomologyWithCoefficients(cyclic_module(Z4, 2))
    t = build_tower(fix2, 4)
    f = t.iota(0, 1)  # in I^1, lands in N_1
    t1 = build_tower(t.N(1), 3)
    for m in (0, 1, 2):
        src = filtration_step(F, t, m, 2)
        tgt = F.value(t.N(1), m)
        allowed = filtration_step(F, t1, m, 1) + tgt.denominator
        mat = F.induced_matrix(f, m)
        for v in src:
            assert span_contains(tgt.ambient, allowed, mat.apply(v))
