"""Reference computations that do not go through the package's linear algebra.

Integer questions go through sympy's Smith form.  Questions over finite rings
are answered by enumerating vectors, so they only scale to tiny ranks.
"""

from __future__ import annotations

from itertools import product
from math import gcd

from sympy import Matrix, ZZ
from sympy.matrices.normalforms import invariant_factors


# ---------------------------------------------------------------------------
# integers


def int_invariants(rows, nrows=None, ncols=None):
    """Nonzero invariant factors of an integer matrix (sympy)."""
    if not rows or not rows[0]:
        return []
    return [abs(int(d)) for d in invariant_factors(Matrix(rows), domain=ZZ) if d != 0]


def int_rank(rows):
    if not rows or not rows[0]:
        return 0
    return Matrix(rows).rank()


def canonical_group(cyclics):
    """Invariant-factor list of a direct sum of cyclic groups Z/c (c = 0 means Z).

    Units are dropped, torsion comes first in divisibility order, then zeros.
    """
    free = sum(1 for c in cyclics if c == 0)
    tors = [c for c in cyclics if c not in (0, 1)]
    if tors:
        inv = int_invariants([[c if i == j else 0 for j in range(len(tors))]
                              for i, c in enumerate(tors)])
        tors = [d for d in inv if d != 1]
    return sorted(tors) + [0] * free


def int_homology(ranks: dict, diffs: dict) -> dict:
    """H_n of a complex of free abelian groups as canonical invariant lists."""
    out = {}
    degs = set(ranks)
    for n in sorted(degs | {k - 1 for k in degs}):
        r = ranks.get(n, 0)
        if r == 0:
            continue
        d_out = diffs.get(n)
        d_in = diffs.get(n + 1)
        rk_out = int_rank(d_out) if d_out else 0
        inv_in = int_invariants(d_in) if d_in else []
        free = r - rk_out - len(inv_in)
        tors = [d for d in inv_in if d != 1]
        grp = canonical_group(tors + [0] * free)
        if grp:
            out[n] = grp
    return out


def tensor_cyclic(a, b):
    """Z/a ⊗ Z/b with 0 standing for Z."""
    return gcd(a, b)


def tor_cyclic(a, b):
    if a == 0 or b == 0:
        return 1
    return gcd(a, b)


def group_tensor(G, m):
    """G ⊗ Z/m for a canonical group list G (m = 0 for Z)."""
    return canonical_group([tensor_cyclic(a, m) for a in G])


def group_tor(G, m):
    return canonical_group([tor_cyclic(a, m) for a in G])


def uct(H: dict, m: int) -> dict:
    """H_n(A ⊗ Z/m) from the universal coefficient sequence (split over Z)."""
    out = {}
    for n in sorted(set(H) | {k + 1 for k in H}):
        grp = canonical_group(group_tensor(H.get(n, []), m) + group_tor(H.get(n - 1, []), m))
        if grp:
            out[n] = grp
    return out


# ---------------------------------------------------------------------------
# finite rings by enumeration


class FiniteRing:
    """Arithmetic of Z/m or F_p[x]/(x^k) on plain tuples, written independently."""

    def __init__(self, kind, m=None, p=None, k=None):
        self.kind = kind
        if kind == "mod":
            self.m = m
            self.elements = list(range(m))
        else:
            self.p, self.k = p, k
            self.elements = list(product(range(p), repeat=k))

    def coerce(self, x):
        if self.kind == "mod":
            return x % self.m
        c = list(x) + [0] * self.k
        return tuple(v % self.p for v in c[: self.k])

    def add(self, a, b):
        if self.kind == "mod":
            return (a + b) % self.m
        return tuple((x + y) % self.p for x, y in zip(a, b))

    def mul(self, a, b):
        if self.kind == "mod":
            return (a * b) % self.m
        out = [0] * self.k
        for i, x in enumerate(a):
            for j, y in enumerate(b):
                if i + j < self.k:
                    out[i + j] = (out[i + j] + x * y) % self.p
        return tuple(out)

    @property
    def zero(self):
        return 0 if self.kind == "mod" else (0,) * self.k

    def vec_zero(self, n):
        return tuple([self.zero] * n)

    def vec_add(self, v, w):
        return tuple(self.add(a, b) for a, b in zip(v, w))

    def scale(self, c, v):
        return tuple(self.mul(c, a) for a in v)

    def apply(self, rows, v):
        """rows: list of rows (already coerced); v: tuple."""
        out = []
        for row in rows:
            acc = self.zero
            for a, x in zip(row, v):
                acc = self.add(acc, self.mul(a, x))
            out.append(acc)
        return tuple(out)

    def vectors(self, n):
        return [tuple(v) for v in product(self.elements, repeat=n)]

    def span(self, gens, n):
        """Submodule generated by ``gens`` inside R^n (closure under + and scalars)."""
        S = {self.vec_zero(n)}
        for g in gens:
            multiples = {self.scale(c, g) for c in self.elements}
            S = {self.vec_add(s, t) for s in S for t in multiples}
        return S


def finite_ring_from(ring):
    """Independent arithmetic for a package ring object."""
    d = ring.descriptor()
    if d["kind"] in ("IntegersMod",):
        return FiniteRing("mod", m=d["m"])
    if d["kind"] == "PrimeField":
        return FiniteRing("mod", m=d["p"])
    if d["kind"] == "TruncatedPoly":
        return FiniteRing("poly", p=d["p"], k=d["k"])
    raise ValueError("not a finite ring")


def _coerce_rows(R, rows):
    return [[R.coerce(x) for x in row] for row in rows]


def quotient_profile(R: FiniteRing, ambient_n, sub, big=None, probes=()):
    """(|big/sub|, |{x in big/sub : r x in sub}| for r in probes) by enumeration."""
    big = big if big is not None else set(R.vectors(ambient_n))
    size = len(big) // len(sub)
    out = [size]
    for r in probes:
        killed = sum(1 for v in big if R.scale(r, v) in sub)
        out.append(killed // len(sub))
    return tuple(out)


def probes_for(R: FiniteRing):
    if R.kind == "mod":
        return [d for d in range(2, R.m) if R.m % d == 0]
    x = tuple([0, 1] + [0] * (R.k - 2))
    probes, cur = [], x
    for _ in range(R.k - 1):
        probes.append(cur)
        cur = R.mul(cur, x)
    return probes


def module_profile(R: FiniteRing, gens: int, relation_rows):
    """Profile of coker(relations) for a relation matrix given as rows (gens x r)."""
    rows = _coerce_rows(R, relation_rows)
    cols = [tuple(row[j] for row in rows) for j in range(len(rows[0]) if rows else 0)]
    sub = R.span(cols, gens)
    return quotient_profile(R, gens, sub, probes=probes_for(R))


def profile_of_normal_form(R: FiniteRing, nf):
    """Profile predicted by an invariant-factor list in the package's encoding."""
    probes = probes_for(R)
    size = 1
    counts = [1] * len(probes)
    for d in nf:
        cyc = R.span([(R.coerce(d),)], 1)  # the ideal (d)
        elems = set(R.vectors(1))
        size *= len(elems) // len(cyc)
        for i, r in enumerate(probes):
            counts[i] *= sum(1 for v in elems if R.scale(r, v) in cyc) // len(cyc)
    return (size, *counts)


def homology_profile(R: FiniteRing, ranks: dict, diffs: dict, n: int):
    """Profile of H_n of a complex of free R-modules by enumeration."""
    r = ranks.get(n, 0)
    if r == 0:
        return profile_of_normal_form(R, [])
    vecs = R.vectors(r)
    d_out = diffs.get(n)
    if d_out is not None and ranks.get(n - 1, 0):
        rows = _coerce_rows(R, d_out)
        cycles = {v for v in vecs if R.apply(rows, v) == R.vec_zero(ranks[n - 1])}
    else:
        cycles = set(vecs)
    d_in = diffs.get(n + 1)
    if d_in is not None and ranks.get(n + 1, 0):
        rows = _coerce_rows(R, d_in)
        cols = [tuple(row[j] for row in rows) for j in range(ranks[n + 1])]
        bounds = R.span(cols, r)
    else:
        bounds = {R.vec_zero(r)}
    return quotient_profile(R, r, bounds, big=cycles, probes=probes_for(R))


def tensor_homology_profile(R: FiniteRing, ranks: dict, diffs: dict, n: int, mod: int):
    """H_n(A ⊗ R/(mod)) for R = Z/m, computed over R with the quotient ring Z/gcd."""
    g = gcd(R.m, mod)
    Q = FiniteRing("mod", m=g)
    return homology_profile(Q, ranks, {k: [[x % g for x in row] for row in m]
                                       for k, m in diffs.items()}, n)


def count_module_homs(R: FiniteRing, gM, relM, gN, relN):
    """|Hom_R(coker relM, coker relN)| by enumerating images of generators."""
    rowsM = _coerce_rows(R, relM) if relM else []
    rowsN = _coerce_rows(R, relN) if relN else []
    colsN = [tuple(row[j] for row in rowsN) for j in range(len(rowsN[0]) if rowsN else 0)]
    subN = R.span(colsN, gN)
    reps = sorted({min((R.vec_add(v, s) for s in subN), key=repr) for v in R.vectors(gN)},
                  key=repr)
    colsM = [[row[j] for row in rowsM] for j in range(len(rowsM[0]) if rowsM else 0)]
    count = 0
    for imgs in product(reps, repeat=gM):
        ok = True
        for col in colsM:
            acc = R.vec_zero(gN)
            for c, w in zip(col, imgs):
                acc = R.vec_add(acc, R.scale(c, w))
            if acc not in subN:
                ok = False
                break
        count += ok
    return count


def group_order(nf_profile):
    return nf_profile[0]
