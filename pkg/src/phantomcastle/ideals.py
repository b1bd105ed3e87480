"""Phantom maps, powers of the homology ideal, and the induced filtrations.

A map is phantom when it is zero on homology.  Membership in the n-th power
is decided by factoring through the n-fold tower composite A -> N_n, and the
filtrations of a (co)homological functor are read off the same composites.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .chaincx import (ChainComplex, ChainMap, MapSpace, cone, solve_factorization)
from .errors import DepthExceeded, MalformedRecipe
from .fgmod import FgModule, Subquotient, SubquotientMap, homology_at, span_contains_all
from .ringlin import RMatrix, snf


# ---------------------------------------------------------------------------
# functors on complexes


class HomologyWithCoefficients:
    """F_m(X) = H_m(X ⊗ M); generators of X_n ⊗ M are indexed basis*gM + mgen."""

    variance = "homological"

    def __init__(self, M: FgModule):
        self.M = M
        self.ring = M.ring
        self._cache = {}

    def describe(self) -> str:
        return f"H_m(- ⊗ {self.M.normal_form_str()})"

    def term(self, X: ChainComplex, n) -> FgModule:
        return FgModule(self.ring, X.rank(n) * self.M.generators,
                        RMatrix.identity(self.ring, X.rank(n)).kron(self.M.relations))

    def _lift(self, m: RMatrix) -> RMatrix:
        return m.kron(RMatrix.identity(self.ring, self.M.generators))

    def value(self, X: ChainComplex, m) -> Subquotient:
        key = (id(X), m)
        if key not in self._cache:
            amb = self.term(X, m)
            out = self._lift(X.d(m)) if X.rank(m - 1) else None
            inc = self._lift(X.d(m + 1)) if X.rank(m + 1) else None
            self._cache[key] = (X, homology_at(amb, out, self.term(X, m - 1), inc))
        return self._cache[key][1]

    def induced_matrix(self, f: ChainMap, m) -> RMatrix:
        """Ambient matrix of F_m(X) -> F_{m-s}(Y)."""
        return self._lift(f[m])

    def target_degree(self, f: ChainMap, m):
        return m - f.degree


class CohomologyWithCoefficients:
    """G^m(X) = H^m(Hom(X, M)); Hom(X_n, M) has generators indexed basis*gM + mgen."""

    variance = "cohomological"

    def __init__(self, M: FgModule):
        self.M = M
        self.ring = M.ring
        self._cache = {}

    def describe(self) -> str:
        return f"H^m(Hom(-, {self.M.normal_form_str()}))"

    def term(self, X: ChainComplex, n) -> FgModule:
        return FgModule(self.ring, X.rank(n) * self.M.generators,
                        RMatrix.identity(self.ring, X.rank(n)).kron(self.M.relations))

    def _lift(self, m: RMatrix) -> RMatrix:
        return m.transpose().kron(RMatrix.identity(self.ring, self.M.generators))

    def value(self, X: ChainComplex, m) -> Subquotient:
        key = (id(X), m)
        if key not in self._cache:
            amb = self.term(X, m)
            out = self._lift(X.d(m + 1)) if X.rank(m + 1) else None
            inc = self._lift(X.d(m)) if X.rank(m - 1) else None
            self._cache[key] = (X, homology_at(amb, out, self.term(X, m + 1), inc))
        return self._cache[key][1]

    def induced_matrix(self, f: ChainMap, m) -> RMatrix:
        """Ambient matrix of G^m(Y) -> G^{m+s}(X) (precomposition with f)."""
        return self._lift(f[m + f.degree])

    def target_degree(self, f: ChainMap, m):
        return m + f.degree


class Representable:
    """G^m(X) = Ho(X, B[m]), homotopy classes of degree-m maps X -> B."""

    variance = "cohomological"

    def __init__(self, B: ChainComplex):
        self.B = B
        self.ring = B.ring
        self._spaces = {}

    def describe(self) -> str:
        return f"Ho(-, B[m]) for {self.B!r}"

    def space(self, X: ChainComplex, m) -> MapSpace:
        key = (id(X), m)
        if key not in self._spaces:
            self._spaces[key] = (X, MapSpace(X, self.B, m))
        return self._spaces[key][1]

    def value(self, X: ChainComplex, m) -> Subquotient:
        return self.space(X, m).subquotient()

    def induced_matrix(self, f: ChainMap, m) -> RMatrix:
        """phi -> phi ∘ f from degree-m maps on Y to degree-(m+s) maps on X."""
        src = self.space(f.target, m)
        tgt = self.space(f.source, m + f.degree)
        ring = self.ring
        out = RMatrix(ring, tgt.size, src.size)
        pos = {n: (r, c, off) for n, r, c, off in src.layout}
        for n, r, c, off in tgt.layout:
            k = n - f.degree
            if k not in pos:
                continue
            r2, c2, off2 = pos[k]
            # vec(phi_k f_n) = (f_n^T kron I_r) vec(phi_k)
            block = f[n].transpose().kron(RMatrix.identity(ring, r))
            for i in range(block.rows):
                row = out.data[off + i]
                for j, x in enumerate(block.data[i]):
                    if x != ring.zero:
                        row[off2 + j] = x
        return out

    def target_degree(self, f: ChainMap, m):
        return m + f.degree


def induced_subquotient_map(functor, f: ChainMap, m):
    """The map F(f) in degree m as (source subquotient, target subquotient, matrix)."""
    if functor.variance == "homological":
        src = functor.value(f.source, m)
        tgt = functor.value(f.target, functor.target_degree(f, m))
    else:
        src = functor.value(f.target, m)
        tgt = functor.value(f.source, functor.target_degree(f, m))
    return SubquotientMap.from_ambient_matrix(src, tgt, functor.induced_matrix(f, m))


def kernel_of_induced(functor, f: ChainMap, m) -> list:
    """Numerator generators (ambient vectors) of ker F(f) on the source value."""
    mp = induced_subquotient_map(functor, f, m)
    return mp.kernel_subquotient().numerator


def image_of_induced(functor, f: ChainMap, m) -> list:
    mp = induced_subquotient_map(functor, f, m)
    return mp.images + mp.target.denominator


# ---------------------------------------------------------------------------
# membership


def in_ideal(f: ChainMap) -> bool:
    """Zero on homology in every degree."""
    return f.is_zero_on_homology()


@dataclass
class IdealPowerWitness:
    exponent: int
    factor: ChainMap  # h with h ∘ iota^n ~ f
    chain: list = field(default_factory=list)  # n factors, first applied first

    def composite(self) -> ChainMap:
        out = self.chain[0]
        for g in self.chain[1:]:
            out = g.after(out)
        return out


def in_power(f: ChainMap, n: int, tower) -> ChainMap | None:
    """h: N_n -> C with h ∘ iota^n ~ f, or None when f is not in the n-th power."""
    if n < 0:
        raise ValueError("exponent must be nonnegative")
    if n > tower.depth:
        raise DepthExceeded(f"exponent {n} exceeds tower depth {tower.depth}")
    if f.degree != 0:
        f = f.as_degree_zero()
    if n == 0:
        return f
    res = solve_factorization(f, tower.N(n), f.target, right=tower.iota(0, n))
    return None if res is None else res[0]


def power_witness(f: ChainMap, n: int, tower) -> IdealPowerWitness | None:
    h = in_power(f, n, tower)
    if h is None:
        return None
    if n == 0:
        return IdealPowerWitness(0, h, [])
    chain = [tower.iota(k, k + 1) for k in range(n - 1)]
    chain.append(h.after(tower.iota(n - 1, n)))
    return IdealPowerWitness(n, h, chain)


def power_obstruction(f: ChainMap, k: int, tower, functor, degrees) -> list:
    """Classes x in F:I^{k+1}(A) with f_*(x) != 0, over the given degrees.

    Any such class shows f is not in the (k+1)-st power, independently of the
    factoring system.
    """
    out = []
    for m in degrees:
        filt = filtration_step(functor, tower, m, k + 1)
        mp = induced_subquotient_map(functor, f, m)
        for v in filt:
            if not mp.target.is_zero_class(functor.induced_matrix(f, m).apply(v)):
                out.append((m, v))
    return out


def projective_cover(A: ChainComplex):
    """(P, pi): zero-differential P with one generator per invariant factor of H(A)."""
    ring = A.ring
    ranks, comps = {}, {}
    for n in A.degrees():
        sq = A.homology_subquotient(n)
        M = sq.as_module()
        g, r = M.generators, M.relations.cols
        if g == 0:
            continue
        if r:
            dec = snf(M.relations)
            diag = [dec.D[i, i] for i in range(min(g, r))]
            Uinv = dec.Uinv
        else:
            diag, Uinv = [], RMatrix.identity(ring, g)
        keep = [i for i in range(g) if not (i < len(diag) and ring.is_unit(diag[i]))]
        if not keep:
            continue
        cols = [sq.element(Uinv.column(i)) for i in keep]
        ranks[n] = len(keep)
        comps[n] = RMatrix.from_columns(ring, cols, A.rank(n))
    P = ChainComplex(ring, ranks)
    return P, ChainMap(P, A, comps, 0)


def is_projective(P: ChainComplex) -> bool:
    """Homology free in each degree and the identity factors through a free cover."""
    ring = P.ring
    for n in P.degrees():
        if any(not ring.is_zero(d) for d in P.homology_subquotient(n).normal_form()):
            return False
    Q, q = projective_cover(P)
    return solve_factorization(ChainMap.identity(P), P, Q, left=q) is not None


def make_power_projective(ring, blocks: list, attachments: list) -> ChainComplex:
    """Iterated cones of zero-differential blocks.

    ``blocks[0]`` starts the object; for j >= 1, ``attachments[j-1]`` maps the
    block ``blocks[j]`` shifted down by one (component at n goes from block
    degree n+1 to the current object in degree n) and the next stage is its
    cone.  With k blocks the result lies in the k-th power-projective class.
    """
    if not blocks:
        raise MalformedRecipe("at least one block is required")
    if len(attachments) != len(blocks) - 1:
        raise MalformedRecipe("need one attaching map per extra block")
    A = ChainComplex(ring, blocks[0])
    for Qr, att in zip(blocks[1:], attachments):
        Q1 = ChainComplex(ring, {n - 1: r for n, r in Qr.items()})
        comps = {}
        for n, m in att.items():
            m = m if isinstance(m, RMatrix) else RMatrix.from_rows(ring, m)
            if m.shape != (A.rank(n), Q1.rank(n)):
                raise MalformedRecipe(f"attaching component {n} has shape {m.shape}")
            comps[n] = m
        g = ChainMap(Q1, A, comps, 0, check=False)
        if not g.is_chain_map():
            raise MalformedRecipe("attaching map must send generators to cycles")
        A = cone(g).complex
    return A


# ---------------------------------------------------------------------------
# filtrations


def filtration_step(functor, tower, m, p) -> list:
    """Generators of the p-th filtration piece in degree m (ambient vectors of F_m(A)).

    Homological: kernel of F_m(iota^p).  Cohomological: image of G^m(iota^p).
    """
    if p > tower.depth:
        raise DepthExceeded(f"filtration index {p} exceeds depth {tower.depth}")
    val = functor.value(tower.base, m)
    if functor.variance == "homological":
        if p == 0:
            return list(val.denominator)
        return kernel_of_induced(functor, tower.iota(0, p), m)
    if p == 0:
        return list(val.numerator)
    return image_of_induced(functor, tower.iota(0, p), m)


@dataclass
class FiltrationReport:
    base: ChainComplex
    functor: object
    depth: int
    pieces: dict  # (m, p) -> Subquotient (piece over the functor's zero)

    def normal_forms(self) -> dict:
        return {k: v.normal_form() for k, v in self.pieces.items()}

    def is_monotone(self) -> bool:
        ps = sorted(self.pieces)
        for (m, p) in ps:
            nxt = self.pieces.get((m, p + 1))
            if nxt is None:
                continue
            cur = self.pieces[(m, p)]
            if self.functor.variance == "homological":
                ok = span_contains_all(cur.ambient, nxt.numerator, cur.numerator)
            else:
                ok = span_contains_all(cur.ambient, cur.numerator, nxt.numerator)
            if not ok:
                return False
        return True

    def to_json(self):
        out = {}
        for (m, p), sq in sorted(self.pieces.items()):
            out.setdefault(str(m), {})[str(p)] = [sq.ring.to_json(d) for d in sq.normal_form()]
        return {"variance": self.functor.variance, "functor": self.functor.describe(),
                "depth": self.depth, "pieces": out}


def _filtration(functor, tower, degrees, depth) -> FiltrationReport:
    if depth > tower.depth:
        raise DepthExceeded(f"depth {depth} exceeds tower depth {tower.depth}")
    pieces = {}
    for m in degrees:
        val = functor.value(tower.base, m)
        for p in range(depth + 1):
            gens = filtration_step(functor, tower, m, p)
            pieces[(m, p)] = Subquotient(val.ambient, gens + val.denominator, val.denominator)
    return FiltrationReport(tower.base, functor, depth, pieces)


def filtration_homological(A: ChainComplex, M: FgModule, depth: int, tower=None) -> FiltrationReport:
    from .towers import build_tower
    tower = tower or build_tower(A, depth)
    F = HomologyWithCoefficients(M)
    lo, hi = A.support
    return _filtration(F, tower, range(lo, hi + 1), depth)


def filtration_cohomological(A: ChainComplex, M: FgModule, depth: int, tower=None) -> FiltrationReport:
    from .towers import build_tower
    tower = tower or build_tower(A, depth)
    G = CohomologyWithCoefficients(M)
    lo, hi = A.support
    return _filtration(G, tower, range(lo, hi + 1), depth)
