import random
from itertools import product

import pytest
from hypothesis import given, settings, strategies as st

import oracles
from conftest import cyclic_module
from phantomcastle.errors import RingMismatch
from phantomcastle.fgmod import (FgModule, ModuleMap, direct_sum, ext, free_module, hom,
                                 map_cokernel, map_image, map_kernel, minimal_resolution,
                                 naive_resolution, tensor, tor)
from phantomcastle.ringlin import IntegersMod, PrimeField, RMatrix, TruncatedPoly


def test_normal_forms(Z):
    assert free_module(Z, 2).normal_form() == [0, 0]
    assert cyclic_module(Z, 2).normal_form() == [2]
    assert FgModule(Z, 2, RMatrix.from_rows(Z, [[2, 0], [0, 4]])).normal_form() == [2, 4]


def test_tensor_hom_sum(Z):
    assert tensor(cyclic_module(Z, 2), cyclic_module(Z, 3)).is_zero()
    M = FgModule(Z, 2, RMatrix.from_rows(Z, [[2, 0], [0, 6]]))
    assert tensor(M, free_module(Z, 1)).normal_form() == M.normal_form()
    assert hom(cyclic_module(Z, 2), cyclic_module(Z, 4)).normal_form() == [2]
    assert direct_sum(cyclic_module(Z, 2), cyclic_module(Z, 3)).normal_form() == [6]


def test_ring_mismatch(Z, Z4):
    with pytest.raises(RingMismatch):
        tensor(cyclic_module(Z, 2), cyclic_module(Z4, 2))


def test_tor_examples(Z, Z4):
    assert tor(1, cyclic_module(Z, 2), cyclic_module(Z, 2)).normal_form() == [2]
    for p in (1, 2, 3):
        assert tor(p, free_module(Z, 2), cyclic_module(Z, 6)).is_zero()
    k = cyclic_module(Z4, 2)
    for p in range(6):
        assert tor(p, k, k).normal_form() == [2]
        assert ext(p, k, k).normal_form() == [2]


def test_map_kernels(Z, Z4):
    Zf = free_module(Z, 1)
    idm = ModuleMap(Zf, Zf, RMatrix.identity(Z, 1))
    assert map_kernel(idm).is_zero() and map_cokernel(idm).is_zero()
    assert map_image(idm).normal_form() == [0]
    two = ModuleMap(Zf, Zf, RMatrix.from_rows(Z, [[2]]))
    assert map_kernel(two).is_zero()
    assert map_cokernel(two).normal_form() == [2]
    R = free_module(Z4, 1)
    two4 = ModuleMap(R, R, RMatrix.from_rows(Z4, [[2]]))
    assert map_kernel(two4).normal_form() == [2]
    assert map_cokernel(two4).normal_form() == [2]


def test_two_resolutions_of_the_same_module(Z):
    N = FgModule(Z, 2, RMatrix.from_rows(Z, [[2, 4], [6, 8]]))
    a, b = minimal_resolution(N, 3), naive_resolution(N, 3)
    for res in (a, b):
        for i in range(1, 3):
            if res.rank(i - 1) and res.rank(i) and res.rank(i + 1):
                assert (res.differential(i) @ res.differential(i + 1)).is_zero()
    assert tor(1, cyclic_module(Z, 4), N, "minimal").normal_form() == \
        tor(1, cyclic_module(Z, 4), N, "naive").normal_form()


FINITE = [IntegersMod(4), PrimeField(2), TruncatedPoly(2, 2)]


@st.composite
def finite_modules(draw, ring=None):
    ring = ring or draw(st.sampled_from(FINITE))
    g = draw(st.integers(1, 2))
    r = draw(st.integers(0, 2))
    rng = random.Random(draw(st.integers(0, 2**32)))
    rel = RMatrix(ring, g, r, [[ring.random_element(rng, 9) for _ in range(r)] for _ in range(g)])
    return FgModule(ring, g, rel)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(FINITE).flatmap(lambda R: st.tuples(finite_modules(R), finite_modules(R))))
def test_functor_identities(pair):
    M, N = pair
    assert tor(0, M, N).normal_form() == tensor(M, N).normal_form()
    assert ext(0, M, N).normal_form() == hom(M, N).normal_form()
    for p in range(3):
        assert tor(p, M, N).normal_form() == tor(p, N, M).normal_form()
        assert tor(p, M, N, "naive").normal_form() == tor(p, M, N).normal_form()


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(FINITE), st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32))
def test_kernel_image_counts(ring, g, h, seed):
    """|ker f| * |im f| = |source| on free modules, by enumeration."""
    rng = random.Random(seed)
    mat = RMatrix(ring, h, g, [[ring.random_element(rng, 9) for _ in range(g)] for _ in range(h)])
    f = ModuleMap(free_module(ring, g), free_module(ring, h), mat)
    R = oracles.finite_ring_from(ring)
    size = lambda nf: oracles.profile_of_normal_form(R, nf)[0]
    ker, im = size(map_kernel(f).normal_form()), size(map_image(f).normal_form())
    assert ker * im == len(R.elements) ** g
    rows = [[R.coerce(ring.to_json(x)) for x in row] for row in mat.data]
    assert im == len({R.apply(rows, v) for v in product(R.elements, repeat=g)})
