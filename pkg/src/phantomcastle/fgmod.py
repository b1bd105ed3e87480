"""Finitely generated modules as cokernels of relation matrices.

A module ``FgModule(ring, g, R)`` is R^g modulo the columns of ``R``.  Elements
are coordinate vectors (plain lists) over the generators.  Submodules of such
an ambient module are given by generator lists, and a :class:`Subquotient` is a
pair numerator/denominator inside one ambient.  Nothing is minimized until
:meth:`FgModule.normal_form` is asked for.

>>> from phantomcastle.ringlin import Integers
>>> Z = Integers()
>>> tor(1, cyclic(Z, 2), cyclic(Z, 2)).normal_form()
[2]
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import DimensionMismatch, RingMismatch
from .ringlin import (CoefficientRing, RMatrix, block_diag, kernel_basis, snf, solve,
                      sparse_kernel, sparse_solve)


def _vec_add(ring, v, w):
    return [ring.add(a, b) for a, b in zip(v, w)]


def _vec_sub(ring, v, w):
    return [ring.sub(a, b) for a, b in zip(v, w)]


def _vec_scale(ring, c, v):
    return [ring.mul(c, a) for a in v]


def _is_zero_vec(ring, v):
    return all(ring.is_zero(a) for a in v)


def _columns_matrix(ring, cols, n) -> RMatrix:
    return RMatrix.from_columns(ring, cols, n)


def _solve_cols(ring, n, gens: list, targets: list):
    """Solve sum c_i gens_i = t for each target; gens/targets are dense columns."""
    rows = [dict() for _ in range(n)]
    zero = ring.zero
    for j, g in enumerate(gens):
        for i, x in enumerate(g):
            if x != zero:
                rows[i][j] = x
    return sparse_solve(ring, n, len(gens), rows, targets)


def _kernel_cols(ring, n, gens: list) -> list:
    rows = [dict() for _ in range(n)]
    zero = ring.zero
    for j, g in enumerate(gens):
        for i, x in enumerate(g):
            if x != zero:
                rows[i][j] = x
    return sparse_kernel(ring, n, len(gens), rows)


class FgModule:
    """cokernel(relations) with ``generators`` rows."""

    def __init__(self, ring: CoefficientRing, generators: int, relations: RMatrix | None = None):
        if relations is None:
            relations = RMatrix(ring, generators, 0)
        if relations.rows != generators:
            raise DimensionMismatch(
                f"relation matrix has {relations.rows} rows for {generators} generators")
        if relations.ring != ring:
            raise RingMismatch("relations over a different ring")
        self.ring = ring
        self.generators = generators
        self.relations = relations
        self._nf = None

    def __repr__(self):
        return f"FgModule({self.ring.name()}, {self.normal_form_str()})"

    @property
    def relation_columns(self) -> list:
        return self.relations.columns()

    def zero_vector(self) -> list:
        return [self.ring.zero] * self.generators

    def basis_vector(self, i) -> list:
        v = self.zero_vector()
        v[i] = self.ring.one
        return v

    def normal_form(self) -> list:
        """Invariant factors in divisibility order; zero entries mean free summands."""
        if self._nf is None:
            ring = self.ring
            g, r = self.generators, self.relations.cols
            if r == 0:
                self._nf = [ring.zero] * g
            else:
                factors = snf(self.relations).invariant_factors
                out = [d for d in factors if not ring.is_unit(d)]
                out += [ring.zero] * (g - min(g, r))
                nonzero = [d for d in out if not ring.is_zero(d)]
                self._nf = nonzero + [d for d in out if ring.is_zero(d)]
        return list(self._nf)

    def normal_form_str(self) -> str:
        nf = self.normal_form()
        if not nf:
            return "0"
        return " + ".join(f"R/({self.ring.fmt(d)})" if not self.ring.is_zero(d) else "R" for d in nf)

    def is_zero(self) -> bool:
        return not self.normal_form()

    def is_isomorphic(self, other: "FgModule") -> bool:
        return self.ring == other.ring and self.normal_form() == other.normal_form()

    def free_rank(self) -> int:
        return sum(1 for d in self.normal_form() if self.ring.is_zero(d))

    def cardinality(self) -> int:
        ring = self.ring
        n = 1
        for d in self.normal_form():
            n *= ring.size() if ring.is_zero(d) else ring.quotient_size(d)
        return n

    def is_zero_element(self, v) -> bool:
        if _is_zero_vec(self.ring, v):
            return True
        if self.relations.cols == 0:
            return False
        return solve(self.relations, v) is not None

    def equal_elements(self, v, w) -> bool:
        return self.is_zero_element(_vec_sub(self.ring, v, w))

    def to_json(self):
        return {"generators": self.generators, "relations": self.relations.to_json(),
                "normal_form": [self.ring.to_json(d) for d in self.normal_form()]}


def free_module(ring, n: int) -> FgModule:
    return FgModule(ring, n)


def cyclic(ring, d) -> FgModule:
    """R/(d)."""
    return FgModule(ring, 1, RMatrix.from_rows(ring, [[d]]))


def from_invariants(ring, factors: Sequence) -> FgModule:
    factors = [ring.coerce(d) for d in factors]
    rel = RMatrix.diagonal(ring, factors) if factors else RMatrix(ring, 0, 0)
    return FgModule(ring, len(factors), rel)


def _same_ring(M, N):
    if M.ring != N.ring:
        raise RingMismatch(f"{M.ring} vs {N.ring}")


def direct_sum(M: FgModule, N: FgModule) -> FgModule:
    _same_ring(M, N)
    return FgModule(M.ring, M.generators + N.generators,
                    block_diag(M.ring, [M.relations, N.relations]))


def tensor(M: FgModule, N: FgModule) -> FgModule:
    """Generators are pairs (a, b), indexed a*gN + b."""
    _same_ring(M, N)
    ring = M.ring
    IM = RMatrix.identity(ring, M.generators)
    IN = RMatrix.identity(ring, N.generators)
    rel = M.relations.kron(IN).hstack(IM.kron(N.relations))
    return FgModule(ring, M.generators * N.generators, rel)


def hom_subquotient(M: FgModule, N: FgModule) -> "Subquotient":
    """Hom(M, N) inside the free module of gN x gM matrices (column-major)."""
    _same_ring(M, N)
    ring = M.ring
    gM, gN, rM = M.generators, N.generators, M.relations.cols
    amb = free_module(ring, gM * gN)
    IN = RMatrix.identity(ring, gN)
    act = M.relations.transpose().kron(IN)  # vec(X R_M)
    target_rel = RMatrix.identity(ring, rM).kron(N.relations)
    system = act.hstack(target_rel)
    ker = kernel_basis(system)
    num = [c[: gM * gN] for c in ker.columns()]
    den = RMatrix.identity(ring, gM).kron(N.relations).columns()
    return Subquotient(amb, num, den)


def hom(M: FgModule, N: FgModule) -> FgModule:
    return hom_subquotient(M, N).as_module()


# ---------------------------------------------------------------------------
# submodules of an ambient module


def span_contains(ambient: FgModule, gens: list, v) -> bool:
    if _is_zero_vec(ambient.ring, v):
        return True
    allg = list(gens) + ambient.relation_columns
    if not allg:
        return False
    return _solve_cols(ambient.ring, ambient.generators, allg, [list(v)])[0] is not None


def span_contains_all(ambient: FgModule, gens: list, vs: list) -> bool:
    vs = [v for v in vs if not _is_zero_vec(ambient.ring, v)]
    if not vs:
        return True
    allg = list(gens) + ambient.relation_columns
    if not allg:
        return False
    return all(s is not None for s in _solve_cols(ambient.ring, ambient.generators, allg, vs))


def span_coordinates(ambient: FgModule, gens: list, vs: list):
    """Coefficients c with gens*c = v modulo the ambient relations (or None)."""
    n = len(gens)
    allg = list(gens) + ambient.relation_columns
    if not allg:
        return [[] if _is_zero_vec(ambient.ring, v) else None for v in vs]
    sols = _solve_cols(ambient.ring, ambient.generators, allg, [list(v) for v in vs])
    return [None if s is None else s[:n] for s in sols]


def spans_equal(ambient: FgModule, a: list, b: list) -> bool:
    return span_contains_all(ambient, a, b) and span_contains_all(ambient, b, a)


def intersect(ambient: FgModule, a: list, b: list) -> list:
    """Generators of span(a) ∩ span(b) (modulo the ambient relations)."""
    if not a or not b:
        return []
    ring = ambient.ring
    cols = list(a) + [_vec_scale(ring, ring.neg(ring.one), v) for v in b] + ambient.relation_columns
    ker = _kernel_cols(ring, ambient.generators, cols)
    A = _columns_matrix(ring, a, ambient.generators)
    out = []
    for k in ker:
        v = A.apply(k[: len(a)])
        if not _is_zero_vec(ring, v):
            out.append(v)
    return out


def preimage(matrix: RMatrix, source: FgModule, target: FgModule, gens: list) -> list:
    """Generators of {x in source : matrix*x in span(gens)} (ambient coordinates)."""
    ring = source.ring
    n = source.generators
    cols = matrix.columns() + [_vec_scale(ring, ring.neg(ring.one), v) for v in gens] \
        + target.relation_columns
    if n == 0:
        return []
    ker = _kernel_cols(ring, target.generators, cols) if cols else []
    out = []
    for k in ker:
        v = k[:n]
        if not _is_zero_vec(ring, v):
            out.append(v)
    return out


def image(matrix: RMatrix, gens: list) -> list:
    ring = matrix.ring
    out = []
    for g in gens:
        v = matrix.apply(g)
        if not _is_zero_vec(ring, v):
            out.append(v)
    return out


class Subquotient:
    """span(numerator)/span(denominator) inside ``ambient`` (relations implicit).

    The denominator must lie in the numerator span; :meth:`is_valid` checks it.
    """

    def __init__(self, ambient: FgModule, numerator: list, denominator: list | None = None):
        ring = ambient.ring
        self.ambient = ambient
        self.numerator = [list(v) for v in numerator if not _is_zero_vec(ring, v)]
        self.denominator = [list(v) for v in (denominator or []) if not _is_zero_vec(ring, v)]
        self._module = None

    @property
    def ring(self):
        return self.ambient.ring

    def __repr__(self):
        return f"Subquotient({self.as_module().normal_form_str()})"

    def is_valid(self) -> bool:
        return span_contains_all(self.ambient, self.numerator, self.denominator)

    def contains(self, v) -> bool:
        """v lies in the numerator (so it defines a class)."""
        return span_contains(self.ambient, self.numerator, v)

    def is_zero_class(self, v) -> bool:
        return span_contains(self.ambient, self.denominator, v)

    def as_module(self) -> FgModule:
        if self._module is None:
            ring = self.ring
            s = len(self.numerator)
            cols = self.numerator + self.denominator + self.ambient.relation_columns
            if s == 0:
                self._module = FgModule(ring, 0)
            else:
                ker = _kernel_cols(ring, self.ambient.generators, cols)
                rel = [k[:s] for k in ker if not _is_zero_vec(ring, k[:s])]
                self._module = FgModule(ring, s, RMatrix.from_columns(ring, rel, s))
        return self._module

    def normal_form(self) -> list:
        return self.as_module().normal_form()

    def is_zero(self) -> bool:
        return self.as_module().is_zero()

    def coordinates(self, vs: list):
        """Coordinates in ``as_module()`` generators of numerator elements."""
        n = len(self.numerator)
        allg = self.numerator + self.denominator + self.ambient.relation_columns
        if not allg:
            return [[] if _is_zero_vec(self.ring, v) else None for v in vs]
        sols = _solve_cols(self.ring, self.ambient.generators, allg, [list(v) for v in vs])
        return [None if s is None else s[:n] for s in sols]

    def element(self, coords) -> list:
        """Ambient vector for a coordinate vector over the numerator generators."""
        ring = self.ring
        v = self.ambient.zero_vector()
        for c, g in zip(coords, self.numerator):
            if not ring.is_zero(c):
                v = _vec_add(ring, v, _vec_scale(ring, c, g))
        return v

    def same_as(self, other: "Subquotient") -> bool:
        """Equal numerators and denominators as submodules of one ambient."""
        return (spans_equal(self.ambient, self.numerator, other.numerator)
                and spans_equal(self.ambient, self.denominator, other.denominator))

    def to_json(self):
        return {"normal_form": [self.ring.to_json(d) for d in self.normal_form()]}


def submodule_quotient(ambient: FgModule, big: list, small: list) -> Subquotient:
    """span(big)/span(big ∩ small)-free variant: requires small ⊆ big."""
    return Subquotient(ambient, big, small)


class ModuleMap:
    """Homomorphism given by a matrix on generator coordinates."""

    def __init__(self, source: FgModule, target: FgModule, matrix: RMatrix):
        if matrix.shape != (target.generators, source.generators):
            raise DimensionMismatch(
                f"map matrix {matrix.shape} for {source.generators} -> {target.generators} generators")
        _same_ring(source, target)
        self.source = source
        self.target = target
        self.matrix = matrix

    def __repr__(self):
        return f"ModuleMap({self.source!r} -> {self.target!r})"

    def is_well_defined(self) -> bool:
        imgs = (self.matrix @ self.source.relations).columns()
        return all(self.target.is_zero_element(v) for v in imgs)

    def __call__(self, v):
        return self.matrix.apply(v)

    def compose(self, other: "ModuleMap") -> "ModuleMap":
        """self ∘ other."""
        return ModuleMap(other.source, self.target, self.matrix @ other.matrix)

    def kernel(self) -> Subquotient:
        return map_kernel(self)

    def image(self) -> Subquotient:
        return map_image(self)

    def cokernel(self) -> FgModule:
        return map_cokernel(self)

    def is_zero(self) -> bool:
        return all(self.target.is_zero_element(c) for c in self.matrix.columns())

    def is_injective(self) -> bool:
        return self.kernel().is_zero()

    def is_surjective(self) -> bool:
        return self.cokernel().is_zero()

    def is_isomorphism(self) -> bool:
        return self.is_injective() and self.is_surjective()


def map_kernel(f: ModuleMap) -> Subquotient:
    gens = preimage(f.matrix, f.source, f.target, [])
    return Subquotient(f.source, gens, [])


def map_image(f: ModuleMap) -> Subquotient:
    return Subquotient(f.target, f.matrix.columns(), [])


def map_cokernel(f: ModuleMap) -> FgModule:
    return FgModule(f.source.ring, f.target.generators, f.target.relations.hstack(f.matrix))


class SubquotientMap:
    """Map between subquotients given by ambient images of numerator generators.

    ``images[i]`` is an ambient vector of the target representing the image of
    ``source.numerator[i]``.  Well-definedness is checked, not assumed.
    """

    def __init__(self, source: Subquotient, target: Subquotient, images: list):
        if len(images) != len(source.numerator):
            raise DimensionMismatch("one image per numerator generator is required")
        self.source = source
        self.target = target
        self.images = [list(v) for v in images]
        self._mm = None

    @classmethod
    def from_ambient_matrix(cls, source: Subquotient, target: Subquotient, matrix: RMatrix):
        return cls(source, target, [matrix.apply(v) for v in source.numerator])

    def images_in_target(self) -> bool:
        return span_contains_all(self.target.ambient, self.target.numerator, self.images)

    def as_module_map(self) -> ModuleMap:
        if self._mm is None:
            S, T = self.source.as_module(), self.target.as_module()
            coords = self.target.coordinates(self.images)
            if any(c is None for c in coords):
                raise ValueError("an image lies outside the target numerator")
            mat = RMatrix.from_columns(S.ring, coords, T.generators) if coords else RMatrix(
                S.ring, T.generators, 0)
            self._mm = ModuleMap(S, T, mat)
        return self._mm

    def is_well_defined(self) -> bool:
        if not self.images_in_target():
            return False
        return self.as_module_map().is_well_defined()

    def is_injective(self) -> bool:
        return self.as_module_map().is_injective()

    def is_surjective(self) -> bool:
        return self.as_module_map().is_surjective()

    def is_isomorphism(self) -> bool:
        return self.is_well_defined() and self.as_module_map().is_isomorphism()

    def agrees_with(self, other: "SubquotientMap") -> bool:
        """Same map: images differ by elements of the target denominator."""
        ring = self.source.ring
        return all(self.target.is_zero_class(_vec_sub(ring, a, b))
                   for a, b in zip(self.images, other.images))

    def kernel_subquotient(self) -> Subquotient:
        mm = self.as_module_map()
        k = mm.kernel()
        src = self.source
        gens = [src.element(c) for c in k.numerator]
        return Subquotient(src.ambient, gens + src.denominator, src.denominator)

    def image_subquotient(self) -> Subquotient:
        tgt = self.target
        return Subquotient(tgt.ambient, self.images + tgt.denominator, tgt.denominator)


def homology_at(ambient: FgModule, outgoing: RMatrix | None, out_target: FgModule | None,
                incoming: RMatrix | None) -> Subquotient:
    """ker(outgoing)/im(incoming) inside ``ambient`` for a complex of presented modules."""
    n = ambient.generators
    if outgoing is None or outgoing.rows == 0:
        num = [ambient.basis_vector(i) for i in range(n)]
    else:
        num = preimage(outgoing, ambient, out_target, [])
    den = incoming.columns() if incoming is not None else []
    return Subquotient(ambient, num, den)


# ---------------------------------------------------------------------------
# resolutions and derived functors


@dataclass
class FreeResolution:
    """... -> R^{n_2} -> R^{n_1} -> R^{n_0} -> N -> 0.

    ``differentials[i]`` maps R^{n_{i+1}} to R^{n_i}; ``augmentation`` maps
    R^{n_0} onto the generators of ``module``.
    """

    module: FgModule
    ranks: list
    differentials: list
    augmentation: RMatrix
    kind: str = "minimal"

    @property
    def length(self):
        return len(self.differentials)

    def differential(self, i) -> RMatrix:
        """Map R^{n_i} -> R^{n_{i-1}} (zero matrix outside the computed range)."""
        ring = self.module.ring
        if i <= 0:
            return RMatrix(ring, 0, self.rank(0)) if i == 0 else RMatrix(ring, 0, 0)
        if i - 1 < len(self.differentials):
            return self.differentials[i - 1]
        return RMatrix(ring, self.rank(i - 1), 0)

    def rank(self, i) -> int:
        if i < 0:
            return 0
        return self.ranks[i] if i < len(self.ranks) else 0


def minimal_resolution(N: FgModule, length: int) -> FreeResolution:
    """Resolution from the Smith form of the presentation, one summand per invariant factor.

    Cyclic summands R/(d) get the periodic resolution
    ... -> R --ann(ann d)--> R --ann(d)--> R --d--> R over rings with zero divisors.
    """
    ring = N.ring
    g, r = N.generators, N.relations.cols
    if r:
        dec = snf(N.relations)
        diag = [dec.D[i, i] for i in range(min(g, r))]
        Uinv = dec.Uinv
    else:
        diag = []
        Uinv = RMatrix.identity(ring, g)
    summands = []  # (index in SNF coordinates, chain of annihilating elements)
    for i in range(g):
        d = diag[i] if i < len(diag) else ring.zero
        if ring.is_unit(d):
            continue
        chain = []
        cur = d
        while not ring.is_zero(cur) and len(chain) < length:
            chain.append(cur)
            cur = ring.annihilator(cur)
        summands.append((i, chain))
    aug = Uinv.select_columns([i for i, _ in summands])
    ranks = [len(summands)]
    diffs = []
    for step in range(length):
        idx = [s for s, (_, ch) in enumerate(summands) if len(ch) > step]
        prev = [s for s, (_, ch) in enumerate(summands) if len(ch) > step - 1] if step > 0 else \
            list(range(len(summands)))
        mat = RMatrix(ring, len(prev), len(idx))
        for col, s in enumerate(idx):
            mat.data[prev.index(s)][col] = summands[s][1][step]
        if not idx:
            break
        ranks.append(len(idx))
        diffs.append(mat)
    return FreeResolution(N, ranks, diffs, aug, "minimal")


def naive_resolution(N: FgModule, length: int) -> FreeResolution:
    """Resolution built from the raw presentation and iterated kernel generators."""
    ring = N.ring
    ranks = [N.generators]
    diffs = []
    cur = N.relations
    for step in range(length):
        if cur.cols == 0:
            break
        diffs.append(cur)
        ranks.append(cur.cols)
        cur = kernel_basis(cur)
    return FreeResolution(N, ranks, diffs, RMatrix.identity(ring, N.generators), "naive")


def tensor_complex_homology(p: int, M: FgModule, res: FreeResolution) -> Subquotient:
    """H_p(M ⊗ F) with generators of M ⊗ R^n indexed a*n + i."""
    ring = M.ring
    IM = RMatrix.identity(ring, M.generators)

    def term(i):
        return FgModule(ring, M.generators * res.rank(i),
                        M.relations.kron(RMatrix.identity(ring, res.rank(i))))

    amb = term(p)
    out = IM.kron(res.differential(p)) if p > 0 else None
    inc = IM.kron(res.differential(p + 1))
    return homology_at(amb, out, term(p - 1) if p > 0 else None, inc)


def hom_complex_cohomology(p: int, res: FreeResolution, N: FgModule) -> Subquotient:
    """H^p(Hom(F, N)); Hom(R^n, N) has generators indexed i*gN + a."""
    ring = N.ring
    IN = RMatrix.identity(ring, N.generators)

    def term(i):
        return FgModule(ring, res.rank(i) * N.generators,
                        RMatrix.identity(ring, res.rank(i)).kron(N.relations))

    amb = term(p)
    out = res.differential(p + 1).transpose().kron(IN)
    inc = res.differential(p).transpose().kron(IN) if p > 0 else None
    return homology_at(amb, out, term(p + 1), inc)


def tor(p: int, M: FgModule, N: FgModule, resolution: str = "minimal") -> FgModule:
    """Tor_p(M, N) from a free resolution of N."""
    _same_ring(M, N)
    build = minimal_resolution if resolution == "minimal" else naive_resolution
    res = build(N, p + 1)
    return tensor_complex_homology(p, M, res).as_module()


def ext(p: int, M: FgModule, N: FgModule, resolution: str = "minimal") -> FgModule:
    """Ext^p(M, N) from a free resolution of M."""
    _same_ring(M, N)
    build = minimal_resolution if resolution == "minimal" else naive_resolution
    res = build(M, p + 1)
    return hom_complex_cohomology(p, res, N).as_module()
