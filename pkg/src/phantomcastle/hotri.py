"""Homotopy classes, exact triangles, octahedra and finite telescopes."""

from __future__ import annotations

from dataclasses import dataclass, field

from .chaincx import (ChainComplex, ChainMap, Cone, Homotopy, _homotopy_terms,
                      _homotopy_unknowns, cone, direct_sum, homotopic, homotopy_inverse,
                      is_quasi_iso, map_from_sum, map_into_sum, sum_inclusion)
from .errors import DegreeMismatch, EmptyTower, Incomposable
from .fgmod import SubquotientMap, spans_equal
from .ringlin import LinearSystem, RMatrix, block_matrix


class HtpyClass:
    """A chain map read up to homotopy; equality asks the homotopy solver."""

    def __init__(self, representative: ChainMap):
        self.rep = representative
        self.witnesses = {}

    @property
    def source(self):
        return self.rep.source

    @property
    def target(self):
        return self.rep.target

    @property
    def degree(self):
        return self.rep.degree

    def __eq__(self, other):
        if not isinstance(other, HtpyClass):
            return NotImplemented
        h = homotopic(self.rep, other.rep)
        if h is not None:
            self.witnesses[id(other)] = h
        return h is not None

    __hash__ = None

    def __matmul__(self, other: "HtpyClass") -> "HtpyClass":
        return HtpyClass(self.rep.after(other.rep))

    def is_zero(self) -> bool:
        return self == HtpyClass(ChainMap.zero(self.source, self.target, self.degree))


@dataclass
class Triangle:
    """X -u-> Y -v-> Z -w-> X[1] with u, v of degree 0 and w of degree 1."""

    u: ChainMap
    v: ChainMap
    w: ChainMap
    name: str = ""

    def __post_init__(self):
        if self.u.degree != 0 or self.v.degree != 0 or self.w.degree != 1:
            raise DegreeMismatch("a triangle needs degrees (0, 0, 1)")
        for a, b in ((self.u, self.v), (self.v, self.w), (self.w, self.u)):
            if a.target.ranks != b.source.ranks:
                raise Incomposable(f"triangle {self.name!r} does not close up")

    @property
    def X(self):
        return self.u.source

    @property
    def Y(self):
        return self.u.target

    @property
    def Z(self):
        return self.v.target

    def rotate(self) -> "Triangle":
        """Y -v-> Z -w-> X[1] -(-u[1])-> Y[1]."""
        X1 = self.X.shift(1)
        w0 = self.w.retarget(target=X1, degree=0)
        u1 = (-self.u).shifted(1).retarget(target=self.Y, degree=1)
        return Triangle(self.v, w0, u1, self.name + "'")


@dataclass
class ExactnessCertificate:
    comparison: ChainMap  # cone(u) -> Z
    inverse: ChainMap
    incl_homotopy: Homotopy  # comparison ∘ incl ~ v
    proj_homotopy: Homotopy  # w ∘ comparison ~ proj


def cone_triangle(f: ChainMap) -> Triangle:
    c = cone(f)
    return Triangle(f, c.inclusion, c.projection, "cone")


def long_sequence_exact(T: Triangle) -> bool:
    """Homology long exact sequence check (necessary for exactness)."""
    for f, g in ((T.u, T.v), (T.v, T.w), (T.w, T.u)):
        mid = f.target
        degs = set(mid.degrees())
        for n in degs:
            h_mid = mid.homology_subquotient(n)
            fn_src = n + f.degree
            h_src = f.source.homology_subquotient(fn_src)
            img = [f[fn_src].apply(v) for v in h_src.numerator] + h_mid.denominator
            h_tgt = g.target.homology_subquotient(n - g.degree)
            ker_gens = SubquotientMap.from_ambient_matrix(h_mid, h_tgt, g[n]) \
                .kernel_subquotient().numerator
            if not spans_equal(h_mid.ambient, img, ker_gens):
                return False
    return True


def is_exact(T: Triangle, prefilter: bool = True) -> ExactnessCertificate | None:
    """Compare the triangle with the cone of ``u``.

    Solves for phi: cone(u) -> Z with phi∘incl ~ v and w∘phi ~ proj (one joint
    system).  Any such phi is a homotopy equivalence exactly when the triangle
    is exact, so a quasi-isomorphism test finishes the decision.
    """
    if prefilter and not long_sequence_exact(T):
        return None
    c = cone(T.u)
    C, Y, Z, X = c.complex, T.Y, T.Z, T.X
    ring = C.ring
    system = LinearSystem(ring)
    phi = {n: system.unknown(Z.rank(n), C.rank(n)) for n in C.degrees() if Z.rank(n)}
    h1 = _homotopy_unknowns(system, Y, Z, 0)
    h2 = _homotopy_unknowns(system, C, X, 1)
    # phi is a chain map
    for n in set(C.degrees()) | {k + 1 for k in C.degrees()}:
        rows, cols = Z.rank(n - 1), C.rank(n)
        if not rows or not cols:
            continue
        terms = []
        if n - 1 in phi:
            terms.append((None, phi[n - 1], C.d(n)))
        if n in phi:
            terms.append((-Z.d(n), phi[n], None))
        if terms:
            system.equation(terms, None, shape=(rows, cols))
    # phi incl - (d h1 + h1 d) = v
    for n in Y.degrees():
        if not Z.rank(n):
            continue
        terms = []
        if n in phi:
            terms.append((None, phi[n], c.inclusion[n]))
        for L, b, R in _homotopy_terms(Y, Z, 0, h1, n):
            terms.append(_negate_term(ring, L, b, R, Z.rank(n)))
        system.equation(terms, T.v[n])
    # w phi - (-d h2 + h2 d) = proj
    for n in C.degrees():
        if not X.rank(n - 1):
            continue
        terms = []
        if n in phi:
            terms.append((T.w[n], phi[n], None))
        for L, b, R in _homotopy_terms(C, X, 1, h2, n):
            terms.append(_negate_term(ring, L, b, R, X.rank(n - 1)))
        system.equation(terms, c.projection[n])
    sol = system.solve()
    if sol is None:
        return None
    comp = ChainMap(C, Z, {n: sol[b] for n, b in phi.items()}, 0, check=False)
    if not is_quasi_iso(comp):
        return None
    inv = homotopy_inverse(comp)
    if inv is None:
        return None
    H1 = Homotopy(Y, Z, 0, {n: sol[b] for n, b in h1.items()})
    H2 = Homotopy(C, X, 1, {n: sol[b] for n, b in h2.items()})
    return ExactnessCertificate(comp, inv, H1, H2)


def _negate_term(ring, L, b, R, nrows):
    if L is None:
        L = RMatrix.identity(ring, nrows)
    return (-L, b, R)


def commutes(f: ChainMap, g: ChainMap) -> Homotopy | None:
    """Homotopy witnessing f ~ g (both already composed)."""
    return homotopic(f, g)


# ---------------------------------------------------------------------------
# octahedron


@dataclass
class Octahedron:
    f: ChainMap
    g: ChainMap
    cone_f: Cone
    cone_g: Cone
    cone_gf: Cone
    alpha: ChainMap  # C_f -> C_gf
    beta: ChainMap  # C_gf -> C_g
    delta: ChainMap  # C_g -> C_f[1], degree 1
    triangles: dict = field(default_factory=dict)
    relations: dict = field(default_factory=dict)

    def certify(self) -> dict:
        """Exactness of the four triangles and homotopies for the five relations."""
        out = {}
        for name, T in self.triangles.items():
            out["exact:" + name] = is_exact(T) is not None
        for name, (lhs, rhs) in self.relations.items():
            out["commutes:" + name] = homotopic(lhs, rhs) is not None
        return out


def octahedron(f: ChainMap, g: ChainMap) -> Octahedron:
    if f.degree or g.degree:
        raise DegreeMismatch("octahedron needs degree-0 maps")
    if not f.target.same_as(g.source):
        raise Incomposable("g cannot follow f")
    X, Y, Z = f.source, f.target, g.target
    ring = X.ring
    gf = g.after(f)
    cf, cg, cgf = cone(f), cone(g), cone(gf)
    Cf, Cg, Cgf = cf.complex, cg.complex, cgf.complex
    alpha, beta, delta = {}, {}, {}
    for n in sorted(set(Cf.degrees()) | set(Cgf.degrees()) | set(Cg.degrees())):
        x, y, z = X.rank(n - 1), Y.rank(n), Z.rank(n)
        if Cf.rank(n) and Cgf.rank(n):
            alpha[n] = block_matrix(ring, [x, z], [x, y],
                                    {(0, 0): RMatrix.identity(ring, x), (1, 1): g[n]})
        if Cgf.rank(n) and Cg.rank(n):
            beta[n] = block_matrix(ring, [Y.rank(n - 1), z], [x, z],
                                   {(0, 0): f[n - 1], (1, 1): RMatrix.identity(ring, z)})
        if Cg.rank(n) and Cf.rank(n - 1):
            yy = Y.rank(n - 1)
            delta[n] = block_matrix(ring, [X.rank(n - 2), yy], [yy, z],
                                    {(1, 0): RMatrix.identity(ring, yy)})
    a = ChainMap(Cf, Cgf, alpha, 0)
    b = ChainMap(Cgf, Cg, beta, 0)
    dl = ChainMap(Cg, Cf, delta, 1)
    oc = Octahedron(f, g, cf, cg, cgf, a, b, dl)
    oc.triangles = {
        "f": Triangle(f, cf.inclusion, cf.projection, "f"),
        "g": Triangle(g, cg.inclusion, cg.projection, "g"),
        "gf": Triangle(gf, cgf.inclusion, cgf.projection, "gf"),
        "cones": Triangle(a, b, dl, "cones"),
    }
    oc.relations = {
        "alpha_incl": (a.after(cf.inclusion), cgf.inclusion.after(g)),
        "proj_alpha": (cgf.projection.after(a), cf.projection),
        "beta_incl": (b.after(cgf.inclusion), cg.inclusion),
        "proj_beta": (cg.projection.after(b), f.after(cgf.projection)),
        "delta": (dl, cf.inclusion.after(cg.projection)),
    }
    pb = pullback_triangle(oc)
    oc.triangles["pullback"] = pb
    return oc


def pullback_triangle(oc: Octahedron) -> Triangle:
    """Y[-1] -> C_gf[-1] -> X + C_g[-1] -> Y for the middle square of an octahedron."""
    f, g = oc.f, oc.g
    X, Y = f.source, f.target
    ring = X.ring
    W = oc.cone_gf.complex.shift(-1)
    Cg1 = oc.cone_g.complex.shift(-1)
    Ym = Y.shift(-1)
    p_gf = ChainMap(W, X, {n - 1: m for n, m in oc.cone_gf.projection.components.items()}, 0)
    b1 = ChainMap(W, Cg1, {n - 1: m for n, m in oc.beta.components.items()}, 0)
    p_g = ChainMap(Cg1, Y, {n - 1: m for n, m in oc.cone_g.projection.components.items()}, 0)
    middle = map_into_sum([p_gf, b1])
    last = map_from_sum([f, -p_g])
    # Y[-1] -> W = C_gf[-1]: y -> (0, g y)
    comps = {}
    Z = g.target
    for n in Ym.degrees():
        if W.rank(n):
            comps[n] = block_matrix(ring, [X.rank(n), Z.rank(n + 1)], [Y.rank(n + 1)],
                                    {(1, 0): g[n + 1]})
    first = ChainMap(Ym, W, comps, 0)
    closing = last.retarget(target=Ym, degree=1)
    return Triangle(first, middle, closing, "pullback")


# ---------------------------------------------------------------------------
# telescopes


@dataclass
class Telescope:
    complex: ChainComplex
    cone: Cone
    inclusions: list  # D_n -> telescope
    to_last: ChainMap  # telescope -> D_T
    equivalence_certified: bool


def telescope(objects: list, maps: list) -> Telescope:
    """cone(id - S) for the truncated tower D_0 -> ... -> D_T.

    ``id - S`` maps the sum of D_0..D_{T-1} into the sum of D_0..D_T; the
    comparison to D_T sends the summand D_n along the composite tower map.
    """
    if not objects:
        raise EmptyTower("telescope of an empty tower")
    if len(maps) != len(objects) - 1:
        raise ValueError("need one map between each consecutive pair")
    T = len(objects) - 1
    ring = objects[0].ring
    top = objects
    if T == 0:
        src = ChainComplex.zero(ring)
        f = ChainMap.zero(src, objects[0])
    else:
        src_parts = objects[:T]
        src = direct_sum(*src_parts)
        tgt = direct_sum(*top)
        comps = {}
        for n in src.degrees():
            blocks = {}
            for k in range(T):
                if objects[k].rank(n):
                    blocks[(k, k)] = RMatrix.identity(ring, objects[k].rank(n))
                    if objects[k + 1].rank(n):
                        blocks[(k + 1, k)] = -maps[k][n]
            if tgt.rank(n):
                comps[n] = block_matrix(ring, [o.rank(n) for o in top],
                                        [o.rank(n) for o in src_parts], blocks)
        f = ChainMap(src, tgt, comps, 0)
    c = cone(f)
    incl = []
    for k in range(T + 1):
        inc = sum_inclusion(top, k) if T else ChainMap.identity(objects[0])
        incl.append(c.inclusion.after(inc))
    # composites D_k -> D_T
    to_T = [None] * (T + 1)
    to_T[T] = ChainMap.identity(objects[T])
    for k in range(T - 1, -1, -1):
        to_T[k] = to_T[k + 1].after(maps[k])
    comps = {}
    C = c.complex
    for n in C.degrees():
        if not objects[T].rank(n):
            continue
        a = f.source.rank(n - 1)
        blocks = {(0, 0): RMatrix(ring, objects[T].rank(n), a)}
        blocks.update({(0, k + 1): to_T[k][n] for k in range(T + 1)})
        comps[n] = block_matrix(ring, [objects[T].rank(n)], [a] + [o.rank(n) for o in top], blocks)
    psi = ChainMap(C, objects[T], comps, 0)
    return Telescope(C, c, incl, psi, is_quasi_iso(psi))
