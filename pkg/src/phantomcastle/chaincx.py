"""Bounded chain complexes of free modules, chain maps and homotopies.

Conventions used everywhere in the package:

* ``A.shift(k)`` has ``A[k]_n = A_{n-k}`` and differential ``(-1)^k d``.
* A chain map of degree ``s`` is a map ``A -> B[s]``; its component at ``n``
  goes ``A_n -> B_{n-s}`` and satisfies ``f d = (-1)^s d f``.
* Composites carry no extra sign: ``(g f)_n = g_{n-s} f_n``.
* ``cone(f)_n = A_{n-1} + B_n`` with ``d(a, b) = (-d a, f a + d b)``.
* A homotopy between degree ``s`` maps is ``h_n: A_n -> B_{n+1-s}`` with
  ``f - g = (-1)^s d h + h d``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DegreeMismatch, DimensionMismatch, Incomposable, RingMismatch
from .fgmod import FgModule, Subquotient, SubquotientMap, homology_at
from .ringlin import (CoefficientRing, LinearSystem, RMatrix, block_matrix, sparse_kernel)


def _sign(ring, k):
    return ring.one if k % 2 == 0 else ring.neg(ring.one)


class ChainComplex:
    """Finitely supported complex of free modules R^{rank(n)}.

    ``differentials[n]`` is the matrix of ``d_n: A_n -> A_{n-1}``.
    """

    def __init__(self, ring: CoefficientRing, ranks: dict, differentials: dict | None = None,
                 *, check: bool = True):
        self.ring = ring
        self.ranks = {int(n): int(r) for n, r in ranks.items() if r}
        self.differentials = {}
        for n, d in (differentials or {}).items():
            n = int(n)
            shape = (self.rank(n - 1), self.rank(n))
            if d.shape != shape:
                raise DimensionMismatch(f"d_{n} has shape {d.shape}, expected {shape}")
            if d.ring != ring:
                raise RingMismatch(f"d_{n} over a different ring")
            if shape[0] and shape[1] and not d.is_zero():
                self.differentials[n] = d
        if check:
            for n in self.differentials:
                if n - 1 in self.differentials:
                    if not (self.differentials[n - 1] @ self.differentials[n]).is_zero():
                        raise DimensionMismatch(f"d_{n - 1} d_{n} is not zero")
        self._homology = {}

    @classmethod
    def zero(cls, ring) -> "ChainComplex":
        return cls(ring, {})

    @classmethod
    def concentrated(cls, ring, degree: int, rank: int) -> "ChainComplex":
        return cls(ring, {degree: rank})

    @classmethod
    def from_graded(cls, ring, ranks: dict) -> "ChainComplex":
        """Complex with zero differential."""
        return cls(ring, ranks)

    def __repr__(self):
        if not self.ranks:
            return f"ChainComplex({self.ring.name()}, 0)"
        lo, hi = self.support
        rk = ",".join(str(self.rank(n)) for n in range(lo, hi + 1))
        return f"ChainComplex({self.ring.name()}, degrees {lo}..{hi}, ranks [{rk}])"

    @property
    def support(self):
        if not self.ranks:
            return (0, -1)
        return (min(self.ranks), max(self.ranks))

    def degrees(self) -> list:
        return sorted(self.ranks)

    def rank(self, n) -> int:
        return self.ranks.get(n, 0)

    def total_rank(self) -> int:
        return sum(self.ranks.values())

    def d(self, n) -> RMatrix:
        m = self.differentials.get(n)
        if m is None:
            return RMatrix(self.ring, self.rank(n - 1), self.rank(n))
        return m

    def is_zero_object(self) -> bool:
        return not self.ranks

    def has_zero_differential(self) -> bool:
        return not self.differentials

    def shift(self, k: int) -> "ChainComplex":
        sgn = _sign(self.ring, k)
        diffs = {n + k: (d if k % 2 == 0 else d.scale(sgn)) for n, d in self.differentials.items()}
        return ChainComplex(self.ring, {n + k: r for n, r in self.ranks.items()}, diffs,
                            check=False)

    def ambient(self, n) -> FgModule:
        return FgModule(self.ring, self.rank(n))

    def homology_subquotient(self, n) -> Subquotient:
        if n not in self._homology:
            amb = self.ambient(n)
            out = self.d(n) if self.rank(n - 1) else None
            inc = self.d(n + 1) if self.rank(n + 1) else None
            self._homology[n] = homology_at(amb, out, self.ambient(n - 1), inc)
        return self._homology[n]

    def homology(self) -> "GradedModule":
        return GradedModule(self.ring, {n: self.homology_subquotient(n).as_module()
                                        for n in self.degrees()})

    def is_acyclic(self) -> bool:
        return all(self.homology_subquotient(n).is_zero() for n in self.degrees())

    def same_as(self, other: "ChainComplex") -> bool:
        if self.ring != other.ring or self.ranks != other.ranks:
            return False
        return all(self.d(n) == other.d(n) for n in set(self.differentials) | set(other.differentials))

    def to_json(self):
        return {"ranks": {str(n): r for n, r in sorted(self.ranks.items())},
                "differentials": {str(n): d.to_json() for n, d in sorted(self.differentials.items())}}


@dataclass
class GradedModule:
    """Degreewise finitely generated modules with finite support."""

    ring: CoefficientRing
    parts: dict

    def __getitem__(self, n) -> FgModule:
        return self.parts.get(n, FgModule(self.ring, 0))

    def degrees(self) -> list:
        return sorted(n for n, m in self.parts.items() if not m.is_zero())

    def is_zero(self) -> bool:
        return not self.degrees()

    def normal_forms(self) -> dict:
        return {n: self.parts[n].normal_form() for n in self.degrees()}

    def is_isomorphic(self, other: "GradedModule") -> bool:
        return self.normal_forms() == other.normal_forms()

    def to_json(self):
        return {str(n): [self.ring.to_json(d) for d in nf] for n, nf in self.normal_forms().items()}


def direct_sum(*complexes: ChainComplex) -> ChainComplex:
    if not complexes:
        raise ValueError("direct_sum needs at least one complex")
    ring = complexes[0].ring
    for c in complexes:
        if c.ring != ring:
            raise RingMismatch("direct sum over different rings")
    degs = sorted(set().union(*[c.ranks for c in complexes]))
    ranks = {n: sum(c.rank(n) for c in complexes) for n in degs}
    diffs = {}
    for n in degs:
        if ranks.get(n - 1, 0):
            diffs[n] = block_matrix(ring, [c.rank(n - 1) for c in complexes],
                                    [c.rank(n) for c in complexes],
                                    {(i, i): c.d(n) for i, c in enumerate(complexes)})
    return ChainComplex(ring, ranks, diffs, check=False)


class ChainMap:
    """Strict chain map of ``degree`` s: components ``A_n -> B_{n-s}``."""

    def __init__(self, source: ChainComplex, target: ChainComplex, components: dict | None = None,
                 degree: int = 0, *, check: bool = True):
        if source.ring != target.ring:
            raise RingMismatch("chain map between complexes over different rings")
        self.source = source
        self.target = target
        self.degree = degree
        self.ring = source.ring
        self.components = {}
        for n, m in (components or {}).items():
            shape = (target.rank(n - degree), source.rank(n))
            if m.shape != shape:
                raise DimensionMismatch(f"component {n} has shape {m.shape}, expected {shape}")
            if shape[0] and shape[1] and not m.is_zero():
                self.components[n] = m
        if check and not self.is_chain_map():
            raise DimensionMismatch("components do not commute with the differentials")

    def __repr__(self):
        return f"ChainMap(degree {self.degree}, {self.source!r} -> {self.target!r})"

    @classmethod
    def identity(cls, A: ChainComplex) -> "ChainMap":
        return cls(A, A, {n: RMatrix.identity(A.ring, A.rank(n)) for n in A.degrees()}, check=False)

    @classmethod
    def zero(cls, A: ChainComplex, B: ChainComplex, degree: int = 0) -> "ChainMap":
        return cls(A, B, {}, degree, check=False)

    def __getitem__(self, n) -> RMatrix:
        m = self.components.get(n)
        if m is None:
            return RMatrix(self.ring, self.target.rank(n - self.degree), self.source.rank(n))
        return m

    def chain_defect(self, n) -> RMatrix:
        s = self.degree
        lhs = self[n - 1] @ self.source.d(n)
        rhs = self.target.d(n - s) @ self[n]
        return lhs - rhs.scale(_sign(self.ring, s))

    def is_chain_map(self) -> bool:
        for n in set(self.source.degrees()) | {k + 1 for k in self.source.degrees()}:
            if self.source.rank(n) and self.target.rank(n - 1 - self.degree):
                if not self.chain_defect(n).is_zero():
                    return False
        return True

    def _like(self, other: "ChainMap"):
        if other.source is not self.source and not other.source.same_as(self.source):
            raise DegreeMismatch("maps have different sources")
        if other.target is not self.target and not other.target.same_as(self.target):
            raise DegreeMismatch("maps have different targets")
        if other.degree != self.degree:
            raise DegreeMismatch(f"degrees {self.degree} and {other.degree} differ")

    def __add__(self, other):
        self._like(other)
        comps = {n: self[n] + other[n] for n in set(self.components) | set(other.components)}
        return ChainMap(self.source, self.target, comps, self.degree, check=False)

    def __sub__(self, other):
        self._like(other)
        comps = {n: self[n] - other[n] for n in set(self.components) | set(other.components)}
        return ChainMap(self.source, self.target, comps, self.degree, check=False)

    def __neg__(self):
        return ChainMap(self.source, self.target, {n: -m for n, m in self.components.items()},
                        self.degree, check=False)

    def scale(self, c):
        return ChainMap(self.source, self.target, {n: m.scale(c) for n, m in self.components.items()},
                        self.degree, check=False)

    def after(self, other: "ChainMap") -> "ChainMap":
        """self ∘ other."""
        if other.target is not self.source and not other.target.same_as(self.source):
            raise Incomposable("target of the first map is not the source of the second")
        s = other.degree
        comps = {}
        for n, m in other.components.items():
            g = self.components.get(n - s)
            if g is not None:
                comps[n] = g @ m
        return ChainMap(other.source, self.target, comps, s + self.degree, check=False)

    def __matmul__(self, other):
        return self.after(other)

    def is_zero(self) -> bool:
        return all(m.is_zero() for m in self.components.values())

    def shifted(self, k: int) -> "ChainMap":
        """f[k]: A[k] -> B[k], same components relabelled."""
        return ChainMap(self.source.shift(k), self.target.shift(k),
                        {n + k: m for n, m in self.components.items()}, self.degree, check=False)

    def as_degree_zero(self) -> "ChainMap":
        """The same components read as a degree-0 map into ``target.shift(degree)``."""
        return ChainMap(self.source, self.target.shift(self.degree), dict(self.components), 0,
                        check=False)

    def retarget(self, source: ChainComplex | None = None, target: ChainComplex | None = None,
                 degree: int | None = None) -> "ChainMap":
        return ChainMap(source or self.source, target or self.target, dict(self.components),
                        self.degree if degree is None else degree, check=False)

    def induced_on_homology(self, n) -> SubquotientMap:
        """H_n(A) -> H_{n-s}(B)."""
        src = self.source.homology_subquotient(n)
        tgt = self.target.homology_subquotient(n - self.degree)
        return SubquotientMap.from_ambient_matrix(src, tgt, self[n])

    def induced_on_homology_all(self) -> dict:
        return {n: self.induced_on_homology(n) for n in self.source.degrees()}

    def is_zero_on_homology(self) -> bool:
        for n in self.source.degrees():
            src = self.source.homology_subquotient(n)
            tgt = self.target.homology_subquotient(n - self.degree)
            m = self[n]
            if any(not tgt.is_zero_class(m.apply(v)) for v in src.numerator):
                return False
        return True

    def to_json(self):
        return {"degree": self.degree,
                "components": {str(n): m.to_json() for n, m in sorted(self.components.items())}}


# ---------------------------------------------------------------------------
# homotopies


class Homotopy:
    """Components ``h_n: A_n -> B_{n+1-s}`` certifying ``f - g = (-1)^s d h + h d``."""

    def __init__(self, source, target, degree, components):
        self.source = source
        self.target = target
        self.degree = degree
        self.components = components

    def __getitem__(self, n) -> RMatrix:
        m = self.components.get(n)
        if m is None:
            return RMatrix(self.source.ring, self.target.rank(n + 1 - self.degree),
                           self.source.rank(n))
        return m

    def boundary(self) -> ChainMap:
        """The null-homotopic map (-1)^s d h + h d."""
        A, B, s = self.source, self.target, self.degree
        sg = _sign(A.ring, s)
        comps = {}
        for n in A.degrees():
            if B.rank(n - s):
                comps[n] = (B.d(n + 1 - s) @ self[n]).scale(sg) + self[n - 1] @ A.d(n)
        return ChainMap(A, B, comps, s, check=False)

    def certifies(self, f: ChainMap, g: ChainMap) -> bool:
        return (f - g - self.boundary()).is_zero()

    def to_json(self):
        return {str(n): m.to_json() for n, m in sorted(self.components.items()) if not m.is_zero()}


def _homotopy_unknowns(system: LinearSystem, A, B, s):
    hid = {}
    for n in A.degrees():
        r = B.rank(n + 1 - s)
        if r:
            hid[n] = system.unknown(r, A.rank(n))
    return hid


def _homotopy_terms(A, B, s, hid, n):
    """Terms of ((-1)^s d h + h d)_n as LinearSystem terms."""
    ring = A.ring
    terms = []
    if n in hid:
        terms.append((B.d(n + 1 - s).scale(_sign(ring, s)), hid[n], None))
    if n - 1 in hid:
        terms.append((None, hid[n - 1], A.d(n)))
    return terms


def _map_positions(A, B, s):
    return [n for n in A.degrees() if B.rank(n - s)]


def homotopic(f: ChainMap, g: ChainMap) -> Homotopy | None:
    """A homotopy from g to f (f - g = dh + hd up to the degree sign), or None."""
    f._like(g)
    return null_homotopy(f - g)


def null_homotopy(f: ChainMap) -> Homotopy | None:
    A, B, s = f.source, f.target, f.degree
    system = LinearSystem(A.ring)
    hid = _homotopy_unknowns(system, A, B, s)
    for n in _map_positions(A, B, s):
        system.equation(_homotopy_terms(A, B, s, hid, n), f[n])
    sol = system.solve()
    if sol is None:
        return None
    return Homotopy(A, B, s, {n: sol[b] for n, b in hid.items()})


def is_null_homotopic(f: ChainMap) -> bool:
    if f.is_zero():
        return True
    return null_homotopy(f) is not None


# ---------------------------------------------------------------------------
# the Hom complex in one degree


class MapSpace:
    """Coordinates on degree-s component tuples ``A -> B`` and Ho(A, B[s]) as a subquotient."""

    def __init__(self, A: ChainComplex, B: ChainComplex, degree: int = 0):
        self.A, self.B, self.degree = A, B, degree
        self.layout = []
        off = 0
        for n in _map_positions(A, B, degree):
            r, c = B.rank(n - degree), A.rank(n)
            self.layout.append((n, r, c, off))
            off += r * c
        self.size = off
        self.ring = A.ring
        self._sq = None

    def vector(self, f: ChainMap) -> list:
        v = [self.ring.zero] * self.size
        for n, r, c, off in self.layout:
            m = f[n]
            for j in range(c):
                for i in range(r):
                    v[off + j * r + i] = m.data[i][j]
        return v

    def chain_map(self, v) -> ChainMap:
        comps = {}
        for n, r, c, off in self.layout:
            m = RMatrix(self.ring, r, c)
            for j in range(c):
                for i in range(r):
                    m.data[i][j] = v[off + j * r + i]
            comps[n] = m
        return ChainMap(self.A, self.B, comps, self.degree, check=False)

    def _cycle_system(self) -> LinearSystem:
        A, B, s = self.A, self.B, self.degree
        sys_ = LinearSystem(self.ring)
        ids = {}
        for n, r, c, _ in self.layout:
            ids[n] = sys_.unknown(r, c)
        sg = _sign(self.ring, s)
        for n in set(A.degrees()) | {k + 1 for k in A.degrees()}:
            rows, cols = B.rank(n - 1 - s), A.rank(n)
            if not rows or not cols:
                continue
            terms = []
            if n - 1 in ids:
                terms.append((None, ids[n - 1], A.d(n)))
            if n in ids:
                terms.append((B.d(n - s).scale(self.ring.neg(sg)), ids[n], None))
            if terms:
                sys_.equation(terms, None, shape=(rows, cols))
        return sys_

    def boundaries(self) -> list:
        """Vectors of (-1)^s d h + h d for h running over a basis of homotopies."""
        A, B, s = self.A, self.B, self.degree
        sys_ = LinearSystem(self.ring)
        hid = _homotopy_unknowns(sys_, A, B, s)
        for n, r, c, _ in self.layout:
            sys_.equation(_homotopy_terms(A, B, s, hid, n), None, shape=(r, c))
        cols = [dict() for _ in range(sys_.nvars)]
        for i, row in enumerate(sys_.rows):
            for j, x in row.items():
                cols[j][i] = x
        z = self.ring.zero
        return [[col.get(i, z) for i in range(self.size)] for col in cols if col]

    def cycles(self) -> list:
        sys_ = self._cycle_system()
        if not sys_.rows:
            return [[self.ring.one if i == k else self.ring.zero for i in range(self.size)]
                    for k in range(self.size)]
        return sparse_kernel(self.ring, len(sys_.rows), sys_.nvars, sys_.rows)

    def subquotient(self) -> Subquotient:
        if self._sq is None:
            amb = FgModule(self.ring, self.size)
            self._sq = Subquotient(amb, self.cycles(), self.boundaries())
        return self._sq


def ho_hom_subquotient(A: ChainComplex, B: ChainComplex, degree: int = 0) -> Subquotient:
    return MapSpace(A, B, degree).subquotient()


def ho_hom(A: ChainComplex, B: ChainComplex, degree: int = 0) -> FgModule:
    """Homotopy classes of degree-``degree`` chain maps A -> B, i.e. Ho(A, B[degree])."""
    return ho_hom_subquotient(A, B, degree).as_module()


# ---------------------------------------------------------------------------
# cones


@dataclass
class Cone:
    """cone(f) with its canonical triangle maps ``A -f-> B -incl-> C -proj-> A[1]``."""

    map: ChainMap
    complex: ChainComplex
    inclusion: ChainMap
    projection: ChainMap  # degree 1


def cone(f: ChainMap) -> Cone:
    if f.degree != 0:
        raise DegreeMismatch(f"cone needs a degree-0 map, got degree {f.degree}")
    A, B = f.source, f.target
    ring = A.ring
    degs = sorted({n + 1 for n in A.degrees()} | set(B.degrees()))
    ranks = {n: A.rank(n - 1) + B.rank(n) for n in degs}
    diffs = {}
    for n in degs:
        if ranks.get(n - 1, 0):
            diffs[n] = block_matrix(ring, [A.rank(n - 2), B.rank(n - 1)], [A.rank(n - 1), B.rank(n)],
                                    {(0, 0): -A.d(n - 1), (1, 0): f[n - 1], (1, 1): B.d(n)})
    C = ChainComplex(ring, ranks, diffs, check=False)
    inc = {}
    proj = {}
    for n in degs:
        a, b = A.rank(n - 1), B.rank(n)
        if b:
            inc[n] = block_matrix(ring, [a, b], [b], {(1, 0): RMatrix.identity(ring, b)})
        if a:
            proj[n] = block_matrix(ring, [a], [a, b], {(0, 0): RMatrix.identity(ring, a)})
    return Cone(f, C, ChainMap(B, C, inc, 0, check=False), ChainMap(C, A, proj, 1, check=False))


def sum_inclusion(parts: list, k: int) -> ChainMap:
    """Inclusion of the k-th summand into direct_sum(*parts)."""
    S = direct_sum(*parts)
    ring = S.ring
    comps = {}
    for n in parts[k].degrees():
        comps[n] = block_matrix(ring, [p.rank(n) for p in parts], [parts[k].rank(n)],
                                {(k, 0): RMatrix.identity(ring, parts[k].rank(n))})
    return ChainMap(parts[k], S, comps, 0, check=False)


def sum_projection(parts: list, k: int) -> ChainMap:
    S = direct_sum(*parts)
    ring = S.ring
    comps = {}
    for n in parts[k].degrees():
        comps[n] = block_matrix(ring, [parts[k].rank(n)], [p.rank(n) for p in parts],
                                {(0, k): RMatrix.identity(ring, parts[k].rank(n))})
    return ChainMap(S, parts[k], comps, 0, check=False)


def map_direct_sum(maps: list) -> ChainMap:
    """Block-diagonal f_1 + f_2 + ... between direct sums (equal degrees)."""
    s = maps[0].degree
    if any(m.degree != s for m in maps):
        raise DegreeMismatch("block-diagonal maps need equal degrees")
    S = direct_sum(*[m.source for m in maps])
    T = direct_sum(*[m.target for m in maps])
    ring = S.ring
    comps = {}
    for n in S.degrees():
        if T.rank(n - s):
            comps[n] = block_matrix(ring, [m.target.rank(n - s) for m in maps],
                                    [m.source.rank(n) for m in maps],
                                    {(i, i): m[n] for i, m in enumerate(maps)})
    return ChainMap(S, T, comps, s, check=False)


def map_into_sum(maps: list) -> ChainMap:
    """(f_1, f_2, ...): A -> B_1 + B_2 + ... (common source and degree)."""
    s = maps[0].degree
    A = maps[0].source
    T = direct_sum(*[m.target for m in maps])
    ring = A.ring
    comps = {}
    for n in A.degrees():
        if T.rank(n - s):
            comps[n] = block_matrix(ring, [m.target.rank(n - s) for m in maps], [A.rank(n)],
                                    {(i, 0): m[n] for i, m in enumerate(maps)})
    return ChainMap(A, T, comps, s, check=False)


def map_from_sum(maps: list) -> ChainMap:
    """[g_1, g_2, ...]: A_1 + A_2 + ... -> B (common target and degree)."""
    s = maps[0].degree
    B = maps[0].target
    S = direct_sum(*[m.source for m in maps])
    ring = B.ring
    comps = {}
    for n in S.degrees():
        if B.rank(n - s):
            comps[n] = block_matrix(ring, [B.rank(n - s)], [m.source.rank(n) for m in maps],
                                    {(0, i): m[n] for i, m in enumerate(maps)})
    return ChainMap(S, B, comps, s, check=False)


# ---------------------------------------------------------------------------
# equivalences


def is_quasi_iso(f: ChainMap) -> bool:
    if f.degree != 0:
        raise DegreeMismatch("quasi-isomorphism test needs a degree-0 map")
    return cone(f).complex.is_acyclic()


def homotopy_inverse(f: ChainMap) -> ChainMap | None:
    """Some g with f g ~ id (solved jointly with its homotopy), or None."""
    A, B = f.source, f.target
    ring = A.ring
    system = LinearSystem(ring)
    gid = {}
    for n in B.degrees():
        if A.rank(n):
            gid[n] = system.unknown(A.rank(n), B.rank(n))
    hid = _homotopy_unknowns(system, B, B, 0)
    # g is a chain map
    for n in set(B.degrees()) | {k + 1 for k in B.degrees()}:
        rows, cols = A.rank(n - 1), B.rank(n)
        if not rows or not cols:
            continue
        terms = []
        if n - 1 in gid:
            terms.append((None, gid[n - 1], B.d(n)))
        if n in gid:
            terms.append((-A.d(n), gid[n], None))
        if terms:
            system.equation(terms, None, shape=(rows, cols))
    # f g - (d h + h d) = id
    for n in B.degrees():
        terms = []
        if n in gid:
            terms.append((f[n], gid[n], None))
        for L, blk, R in _homotopy_terms(B, B, 0, hid, n):
            terms.append((-L if L is not None else RMatrix.identity(ring, B.rank(n)).scale(ring.neg(ring.one)),
                          blk, R))
        system.equation(terms, RMatrix.identity(ring, B.rank(n)))
    sol = system.solve()
    if sol is None:
        return None
    return ChainMap(B, A, {n: sol[b] for n, b in gid.items()}, 0, check=False)


def is_ho_equivalence(f: ChainMap) -> ChainMap | None:
    """A homotopy inverse of ``f`` if it is a homotopy equivalence, else None."""
    if f.degree != 0:
        raise DegreeMismatch("equivalence test needs a degree-0 map")
    if not is_quasi_iso(f):
        return None
    g = homotopy_inverse(f)
    if g is None:
        return None
    if homotopic(g.after(f), ChainMap.identity(f.source)) is None:
        return None
    return g


def solve_factorization(f: ChainMap, X_source: ChainComplex, X_target: ChainComplex,
                        left: ChainMap | None = None, right: ChainMap | None = None,
                        *, want_all: bool = False):
    """Find a degree-0 chain map X with ``left ∘ X ∘ right ~ f``.

    ``left``/``right`` are degree-0 maps (None for identities) and ``f`` has
    degree 0.  Returns ``(X, homotopy)`` or None.  With ``want_all`` the
    homogeneous solutions (pairs of maps and homotopies) are returned too.
    """
    if f.degree != 0:
        raise DegreeMismatch("factorization targets must have degree 0")
    A, B = f.source, f.target
    ring = A.ring
    system = LinearSystem(ring)
    xid = {n: system.unknown(X_target.rank(n), X_source.rank(n))
           for n in X_source.degrees() if X_target.rank(n)}
    hid = _homotopy_unknowns(system, A, B, 0)
    for n in set(X_source.degrees()) | {k + 1 for k in X_source.degrees()}:
        rows, cols = X_target.rank(n - 1), X_source.rank(n)
        if not rows or not cols:
            continue
        terms = []
        if n - 1 in xid:
            terms.append((None, xid[n - 1], X_source.d(n)))
        if n in xid:
            terms.append((-X_target.d(n), xid[n], None))
        if terms:
            system.equation(terms, None, shape=(rows, cols))
    for n in A.degrees():
        if not B.rank(n):
            continue
        terms = []
        if n in xid:
            L = left[n] if left is not None else None
            R = right[n] if right is not None else None
            terms.append((L, xid[n], R))
        for L, b, R in _homotopy_terms(A, B, 0, hid, n):
            terms.append(((-L) if L is not None else RMatrix.identity(ring, B.rank(n)).scale(
                ring.neg(ring.one)), b, R))
        system.equation(terms, f[n])
    sol = system.solve()
    if sol is None:
        return None

    def unpack(s):
        X = ChainMap(X_source, X_target, {n: s[b] for n, b in xid.items()}, 0, check=False)
        H = Homotopy(A, B, 0, {n: s[b] for n, b in hid.items()})
        return X, H

    if not want_all:
        return unpack(sol)
    return unpack(sol), [unpack(s) for s in system.homogeneous_solutions()]
