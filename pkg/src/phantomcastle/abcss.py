"""The ABC spectral sequence of a complex and the checks around it.

``run_abc`` builds the phantom tower and castle of a complex, the couple of a
(co)homological functor on it, its pages and the stable entries, and then
compares the stable entries with the phantom filtration of the functor on the
base complex.  The remaining entry points check single statements: the second
page against Tor/Ext, the cellular couple against the tower couple, the two
low-degree Ext sequences, and the adjunction for zero-differential complexes.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .chaincx import ChainComplex, ChainMap, MapSpace, is_null_homotopic
from .couples import (CoupleMorphism, ExactCouple, LegMap, TowerCouple, _combine,
                      certify_page, differential, page, page_entry, stable_entry,
                      tower_morphism_couple_map,
                      COHOMOLOGICAL, HOMOLOGICAL)
from .errors import CertificateFailure, DepthExceeded, WindowTooSmall
from .fgmod import (FgModule, Subquotient, SubquotientMap, hom_complex_cohomology,
                    minimal_resolution, span_coordinates, spans_equal, tensor_complex_homology,
                    ext, tor)
from .ideals import (CohomologyWithCoefficients, HomologyWithCoefficients, Representable,
                     filtration_step, image_of_induced, in_ideal, in_power, kernel_of_induced,
                     _filtration)
from .ringlin import RMatrix, solve_matrix
from .towers import PhantomTower, build_castle, build_tower, lift_morphism


# ---------------------------------------------------------------------------
# exact sequences of subquotients


def exact_at(f: SubquotientMap, g: SubquotientMap) -> bool:
    """ker g = im f inside the common middle term."""
    mid = g.source
    ker = g.kernel_subquotient().numerator if mid.numerator else list(mid.denominator)
    return spans_equal(mid.ambient, ker, f.images + mid.denominator)


@dataclass
class ExactSequence:
    """0 -> T_0 -> T_1 -> ... -> T_n -> 0 with explicit maps."""

    name: str
    terms: list
    maps: list
    labels: list = field(default_factory=list)

    def certify(self) -> dict:
        out = {}
        for i, f in enumerate(self.maps):
            out[f"well_defined:{i}"] = f.is_well_defined()
        if not all(out.values()):
            return out
        out["injective:0"] = self.maps[0].is_injective()
        for i in range(len(self.maps) - 1):
            out[f"exact:{i + 1}"] = exact_at(self.maps[i], self.maps[i + 1])
        out[f"surjective:{len(self.maps) - 1}"] = self.maps[-1].is_surjective()
        return out

    def is_exact(self) -> bool:
        return all(self.certify().values())

    def normal_forms(self) -> list:
        return [t.normal_form() for t in self.terms]

    def to_json(self, ring):
        return {"name": self.name, "labels": self.labels,
                "terms": [[ring.to_json(x) for x in nf] for nf in self.normal_forms()],
                "certificates": self.certify()}


def _solve_through(target_amb: FgModule, sources: list, images: list, den: list, vs: list,
                   what: str) -> list:
    """For each v find c with sum c_i images_i = v modulo ``den``; return sum c_i sources_i."""
    if not vs:
        return []
    ring = target_amb.ring
    n = len(sources[0]) if sources else 0
    coords = span_coordinates(target_amb, images + den, vs)
    out = []
    for c in coords:
        if c is None:
            raise CertificateFailure(f"no preimage while building {what}")
        out.append(_combine(ring, n, c[: len(sources)], sources) if sources else [])
    return out


# ---------------------------------------------------------------------------
# the homological sequences with finite r


def abc_sequence(couple: TowerCouple, p: int, q: int, r: int) -> ExactSequence:
    """0 -> F(N_p)/F:I^{r+1} -> F(N_{p+1})/F:I^r -> E^{r+1}_{pq} -> F:I^{r+1}(N_b)/F:I^r(N_b) -> 0.

    Here b = p - r; for b < 0 the last term is F:I^{p+1}(A)/F:I^p(A).
    """
    if r < 1 or p < 0:
        raise ValueError("needs r >= 1 and p >= 0")
    t, F = couple.tower, couple.functor
    m = p + q
    b = p - r
    S1 = F.value(t.N(p), m + 1)
    T1 = Subquotient(S1.ambient, S1.numerator, kernel_of_induced(F, t.iota(p, p + r + 1), m + 1))
    S2 = F.value(t.N(p + 1), m + 1)
    T2 = Subquotient(S2.ambient, S2.numerator, kernel_of_induced(F, t.iota(p + 1, p + r + 1), m + 1))
    T3 = page_entry(couple, r + 1, p, q).value
    S4 = F.value(t.N(b), m)
    T4 = Subquotient(S4.ambient, kernel_of_induced(F, t.iota(b, p + 1), m),
                     kernel_of_induced(F, t.iota(b, p), m))
    f1 = SubquotientMap.from_ambient_matrix(T1, T2, F.induced_matrix(t.iota(p, p + 1), m + 1))
    f2 = SubquotientMap.from_ambient_matrix(T2, T3, F.induced_matrix(t.eps(p), m + 1))
    io = F.induced_matrix(t.iota(b, p), m)
    Dk = F.value(t.N(p), m)
    kx = couple.k_map(p, q)(T3.numerator)
    ys = S4.numerator
    lifts = _solve_through(Dk.ambient, ys, [io.apply(y) for y in ys], Dk.denominator, kx,
                           f"the edge map at {(p, q)}")
    f3 = SubquotientMap(T3, T4, lifts)
    return ExactSequence(f"abc(p={p},q={q},r={r})", [T1, T2, T3, T4], [f1, f2, f3],
                         [f"F_{m + 1}(N_{p})/I^{r + 1}", f"F_{m + 1}(N_{p + 1})/I^{r}",
                          f"E^{r + 1}_({p},{q})", f"I^{r + 1}/I^{r} F_{m}(N_{b})"])


def dual_sequence(couple: TowerCouple, p: int, q: int, r: int) -> ExactSequence:
    """0 -> I^{p-b}G/I^{p-b+1}G (N_b) -> E_{r+1}^{pq} -> I^r G(N_{p+1}) -> I^{r+1} G(N_p) -> 0."""
    if r < 1 or p < 0:
        raise ValueError("needs r >= 1 and p >= 0")
    t, G = couple.tower, couple.functor
    m = p + q
    b = p - r
    S1 = G.value(t.N(b), m)
    T1 = Subquotient(S1.ambient, image_of_induced(G, t.iota(b, p), m),
                     image_of_induced(G, t.iota(b, p + 1), m))
    T2 = page_entry(couple, r + 1, p, q).value
    S3 = G.value(t.N(p + 1), m + 1)
    T3 = Subquotient(S3.ambient, image_of_induced(G, t.iota(p + 1, p + 1 + r), m + 1),
                     S3.denominator)
    S4 = G.value(t.N(p), m + 1)
    T4 = Subquotient(S4.ambient, image_of_induced(G, t.iota(p, p + r + 1), m + 1), S4.denominator)
    # a = (iota_b^p)^* c  maps to  pi_p^* c
    Sp = G.value(t.N(p), m)
    io = G.induced_matrix(t.iota(b, p), m)
    cs = _solve_through(S1.ambient, Sp.numerator, [io.apply(c) for c in Sp.numerator],
                        S1.denominator, T1.numerator, f"the filtration map at {(p, q)}")
    pim = G.induced_matrix(t.pi(p), m)
    f1 = SubquotientMap(T1, T2, [pim.apply(c) for c in cs])
    f2 = SubquotientMap.from_ambient_matrix(T2, T3, G.induced_matrix(t.eps(p), m))
    f3 = SubquotientMap.from_ambient_matrix(T3, T4, G.induced_matrix(t.iota(p, p + 1), m + 1))
    return ExactSequence(f"dual(p={p},q={q},r={r})", [T1, T2, T3, T4], [f1, f2, f3],
                         [f"I^{min(r, p + 1)}/I^{min(r, p + 1) + 1} G^{m}(N_{b})", f"E_{r + 1}^({p},{q})",
                          f"I^{r} G^{m + 1}(N_{p + 1})", f"I^{r + 1} G^{m + 1}(N_{p})"])


def bad_group(tower: PhantomTower, functor, p: int, m: int, depth: int | None = None) -> Subquotient:
    """The obstruction quotient at (p, m), with the union (or intersection) cut at ``depth``.

    Homological: F_m(N_p) / ker F(iota_p^depth).  Cohomological: im G(iota_p^depth).
    """
    T = tower.depth if depth is None else depth
    X = tower.N(p)
    val = functor.value(X, m)
    if functor.variance == "homological":
        return Subquotient(val.ambient, val.numerator, kernel_of_induced(functor, tower.iota(p, T), m))
    return Subquotient(val.ambient, image_of_induced(functor, tower.iota(p, T), m), val.denominator)


# ---------------------------------------------------------------------------
# convergence


def convergence_map(couple: TowerCouple, p: int, q: int, entry: Subquotient) -> SubquotientMap:
    """Homological: E_{pq} -> F:I^{p+1}/F:I^p on F_{p+q}(A), x -> a with iota^p a = k x.

    Cohomological: I^p G/I^{p+1} G on G^{p+q}(A) -> E^{pq}, (iota^p)^* c -> pi_p^* c.
    """
    t, F = couple.tower, couple.functor
    m = p + q
    A = t.base
    val = F.value(A, m)
    if couple.variance == "homological":
        quot = Subquotient(val.ambient, filtration_step(F, t, m, p + 1), filtration_step(F, t, m, p))
        io = F.induced_matrix(t.iota(0, p), m)
        Dk = F.value(t.N(p), m)
        kx = couple.k_map(p, q)(entry.numerator)
        ys = val.numerator
        lifts = _solve_through(Dk.ambient, ys, [io.apply(y) for y in ys], Dk.denominator, kx,
                               f"the convergence map at {(p, q)}")
        return SubquotientMap(entry, quot, lifts)
    quot = Subquotient(val.ambient, filtration_step(F, t, m, p), filtration_step(F, t, m, p + 1))
    Sp = F.value(t.N(p), m)
    io = F.induced_matrix(t.iota(0, p), m)
    cs = _solve_through(val.ambient, Sp.numerator, [io.apply(c) for c in Sp.numerator],
                        val.denominator, quot.numerator, f"the convergence map at {(p, q)}")
    pim = F.induced_matrix(t.pi(p), m)
    return SubquotientMap(quot, entry, [pim.apply(c) for c in cs])


def edge_map_agrees(couple: TowerCouple, q: int, entry: Subquotient) -> bool:
    """At p = 0 the convergence map is F(pi_0) followed by the filtration inclusion."""
    F = couple.functor
    mp = convergence_map(couple, 0, q, entry)
    direct = SubquotientMap.from_ambient_matrix(entry, mp.target,
                                                F.induced_matrix(couple.tower.pi(0), q))
    return mp.agrees_with(direct)


@dataclass
class DegreeVerdict:
    degree: int
    status: str  # converged | partial-at-depth | caveat | failed
    value: list  # normal form of F_m(A) (or G^m(A))
    pieces: dict  # p -> normal form of the filtration quotient
    entries: dict  # p -> (normal form of the stable entry, stabilized_at)
    certificates: dict
    bad: dict  # p -> normal form of the obstruction group at depth
    notes: list = field(default_factory=list)

    def ok(self) -> bool:
        return all(self.certificates.values())

    def to_json(self, ring):
        f = lambda nf: [ring.to_json(x) for x in nf]
        return {"degree": self.degree, "status": self.status, "value": f(self.value),
                "pieces": {str(p): f(nf) for p, nf in self.pieces.items()},
                "entries": {str(p): {"normal_form": f(nf), "stabilized_at": s}
                            for p, (nf, s) in self.entries.items()},
                "bad_at_depth": {str(p): f(nf) for p, nf in self.bad.items()},
                "certificates": self.certificates, "notes": self.notes}


def verify_convergence(run: "AbcRun") -> dict:
    """Per total degree: stable entries against the filtration quotients, Bad groups, sequences."""
    couple, t, F = run.couple, run.tower, run.functor
    T = t.depth
    lo, hi = couple.qrange
    out = {}
    homological = couple.variance == "homological"
    # columns at or past a collapse are zero, and there F:I^p (or I^p G) is already final
    cap = t.collapsed_at()
    for m in range(lo, hi + T):
        certs, pieces, entries, bad, notes = {}, {}, {}, {}, []
        val = F.value(t.base, m)
        complete = True
        ps = range(max(0, m - hi), m - lo + 1)
        for p in ps:
            q = m - p
            if cap is not None and p >= cap:
                entries[p] = ([], 1)
                pieces[p] = []
                continue
            st = run.stable.get((p, q)) or stable_entry(couple, p, q, run.r_max)
            entries[p] = (st.normal_form(), st.stabilized_at)
            if p + 1 > T:
                complete = False
                notes.append(f"filtration step {p + 1} is beyond depth {T}")
                continue
            if homological:
                quot = Subquotient(val.ambient, filtration_step(F, t, m, p + 1),
                                   filtration_step(F, t, m, p))
            else:
                quot = Subquotient(val.ambient, filtration_step(F, t, m, p),
                                   filtration_step(F, t, m, p + 1))
            pieces[p] = quot.normal_form()
            if st.stabilized_at is None:
                complete = False
                notes.append(f"E at ({p},{q}) not stabilized within the window")
                continue
            try:
                mp = convergence_map(couple, p, q, st.value)
                certs[f"iso:E_inf({p},{q})"] = mp.is_isomorphism()
            except CertificateFailure as exc:
                certs[f"iso:E_inf({p},{q})"] = False
                notes.append(str(exc))
            if p == 0 and homological:
                certs[f"edge:{q}"] = edge_map_agrees(couple, q, st.value)
        top = max(ps, default=-1) + 1
        if cap is not None:
            top = min(top, cap)
        if top <= T:
            last = filtration_step(F, t, m, top) if top > 0 or not homological else []
            if homological:
                certs["exhaustive"] = spans_equal(val.ambient, last + val.denominator, val.numerator)
            else:
                certs["separated"] = spans_equal(val.ambient, last + val.denominator, val.denominator)
        else:
            complete = False
        for p in range(0, T + 1):
            bad[p] = bad_group(t, F, p, m + 1).normal_form()
        # Bad sequences with the longest r the window allows
        for p in ps:
            q = m - p
            r = T - p - 1
            if r < 1:
                continue
            try:
                if homological:
                    seq = abc_sequence(couple, p, q, r)
                    c = seq.certify()
                    c["bad_first"] = seq.terms[0].same_as(bad_group(t, F, p, m + 1))
                    c["bad_second"] = seq.terms[1].same_as(bad_group(t, F, p + 1, m + 1))
                else:
                    seq = dual_sequence(couple, p, q, r)
                    c = seq.certify()
                    c["bad_third"] = seq.terms[2].same_as(bad_group(t, F, p + 1, m + 1))
                    c["bad_fourth"] = seq.terms[3].same_as(bad_group(t, F, p, m + 1))
                for k, v in c.items():
                    certs[f"seq({p},{q},r={r}):{k}"] = v
            except (WindowTooSmall, DepthExceeded):
                continue
        if not all(certs.values()):
            status = "failed"
        elif not homological and t.collapsed_at() is None:
            status = "caveat"
            notes.append("infinite tower: limits of the cohomological filtration are not certified")
        elif complete:
            status = "converged"
        else:
            status = "partial-at-depth"
        out[m] = DegreeVerdict(m, status, val.normal_form(), pieces, entries, certs, bad, notes)
    return out


# ---------------------------------------------------------------------------
# a full run


@dataclass
class AbcRun:
    base: ChainComplex
    coefficients: object
    variance: str
    depth: int
    r_max: int
    tower: PhantomTower
    castle: object
    functor: object
    couple: TowerCouple
    validation: list
    pages: dict
    page_certificates: dict
    stable: dict
    filtration: object
    convergence: dict = field(default_factory=dict)

    @property
    def ring(self):
        return self.base.ring

    def certificates(self) -> dict:
        out = {f"couple:{c.pos}:{c.leg}": c.ok for c in self.validation}
        for r, cs in self.page_certificates.items():
            out.update({f"page:{k}": v for k, v in cs.items()})
        for m, v in self.convergence.items():
            out.update({f"degree{m}:{k}": x for k, x in v.certificates.items()})
        return out

    def all_verified(self) -> bool:
        return all(self.certificates().values()) and all(
            v.status != "failed" for v in self.convergence.values())

    def to_json(self):
        ring = self.ring
        return {
            "variance": self.variance, "depth": self.depth, "r_max": self.r_max,
            "functor": self.functor.describe(),
            "couple_valid": all(c.ok for c in self.validation),
            "pages": [self.pages[r].to_json(ring) for r in sorted(self.pages)],
            "stable": [s.to_json(ring) for _, s in sorted(self.stable.items())],
            "filtration": self.filtration.to_json(),
            "convergence": {str(m): v.to_json(ring) for m, v in sorted(self.convergence.items())},
        }


def make_functor(variance: str, M=None, B=None):
    if B is not None:
        return Representable(B)
    if variance == "homological":
        return HomologyWithCoefficients(M)
    if variance == "cohomological":
        return CohomologyWithCoefficients(M)
    raise ValueError(f"unknown variance {variance!r}")


def run_abc(A: ChainComplex, M: FgModule | None = None, variance: str = "homological",
            depth: int = 3, r_max: int = 3, *, functor=None, tower: PhantomTower | None = None,
            certify_pages: bool = True, seed: int = 0) -> AbcRun:
    if depth < 1:
        raise DepthExceeded("the ABC couple needs tower depth at least 1")
    if r_max < 2:
        raise ValueError("r_max must be at least 2")
    functor = functor or make_functor(variance, M)
    if tower is None:
        tower = build_tower(A, depth)
    elif tower.depth < depth:
        tower.extend(depth)
    castle = build_castle(tower)
    couple = TowerCouple(tower, functor)
    validation = couple.validate()
    pages, certs = {}, {}
    for r in range(1, r_max + 1):
        pages[r] = page(couple, r)
        if certify_pages:
            certs[r] = certify_page(couple, r, seed=seed)
    stable = {}
    lo, hi = couple.qrange
    for p in range(0, depth):
        for q in range(lo, hi + 1):
            stable[(p, q)] = stable_entry(couple, p, q, r_max)
    filt = _filtration(functor, tower, range(lo, hi + depth), depth)
    run = AbcRun(A, M, functor.variance, depth, r_max, tower, castle, functor, couple, validation,
                 pages, certs, stable, filt)
    run.convergence = verify_convergence(run)
    return run


# ---------------------------------------------------------------------------
# the second page


def _strand(tower: PhantomTower, q: int, length: int):
    """Ranks and differentials of the free resolution of H_q(A) inside the tower."""
    ranks = [tower.P(i).rank(i + q) for i in range(length + 1)]
    diffs = [tower.delta(i)[i + q] for i in range(1, length + 1)]
    return ranks, diffs


def resolution_comparison(tower: PhantomTower, q: int, length: int):
    """Chain map from the tower strand to the minimal resolution of H_q(A), lifting the identity."""
    A = tower.base
    ring = A.ring
    H = A.homology_subquotient(q)
    N = H.as_module()
    res = minimal_resolution(N, length + 1)
    ranks, diffs = _strand(tower, q, length)
    cols = tower.pi(0)[q].columns() if ranks[0] else []
    aug = H.coordinates(cols)
    if any(c is None for c in aug):
        raise CertificateFailure("cover generators are not cycles")
    phis = []
    gens = res.augmentation.columns()
    coords = span_coordinates(N, gens, aug)
    if any(c is None for c in coords):
        raise CertificateFailure("cover does not map into the resolution")
    phis.append(RMatrix.from_columns(ring, coords, res.rank(0)) if coords else
                RMatrix(ring, res.rank(0), 0))
    for i in range(1, length + 1):
        rhs = phis[i - 1] @ diffs[i - 1]
        if rhs.cols == 0 or res.rank(i) == 0:
            if not rhs.is_zero():
                raise CertificateFailure(f"comparison fails at step {i}")
            phis.append(RMatrix(ring, res.rank(i), ranks[i]))
            continue
        X = solve_matrix(res.differential(i), rhs)
        if X is None:
            raise CertificateFailure(f"comparison fails at step {i}")
        phis.append(X)
    return res, phis, ranks


def _swap_tensor(ring, phi: RMatrix, gM: int) -> RMatrix:
    """Matrix from (R_i ⊗ M, index b*gM + a) to (M ⊗ R'_i, index a*n + i) induced by phi."""
    n, nb = phi.shape
    out = RMatrix(ring, gM * n, nb * gM)
    for i in range(n):
        for b in range(nb):
            x = phi[i, b]
            if ring.is_zero(x):
                continue
            for a in range(gM):
                out.data[a * n + i][b * gM + a] = x
    return out


@dataclass
class E2Certificate:
    pos: tuple
    page_form: list
    oracle_form: list
    isomorphism: bool

    @property
    def ok(self) -> bool:
        return self.isomorphism and self.page_form == self.oracle_form


def verify_e2(run: AbcRun) -> dict:
    """E^2 against Tor_p(M, H_q) or Ext^p(H_q, M) through an explicit comparison map."""
    M = run.coefficients
    if M is None:
        raise ValueError("the E^2 comparison needs a coefficient module")
    couple, t = run.couple, run.tower
    ring = run.ring
    lo, hi = couple.qrange
    out = {}
    for q in range(lo, hi + 1):
        length = max(0, t.depth - 2)
        res, phis, ranks = resolution_comparison(t, q, length)
        Hq = t.base.homology_subquotient(q).as_module()
        for p in range(0, length + 1):
            ent = page_entry(couple, 2, p, q).value
            if run.variance == "homological":
                tq = tensor_complex_homology(p, M, res)
                mp = SubquotientMap.from_ambient_matrix(ent, tq, _swap_tensor(ring, phis[p], M.generators))
                oracle = tor(p, M, Hq)
            else:
                eq = hom_complex_cohomology(p, res, M)
                mat = phis[p].transpose().kron(RMatrix.identity(ring, M.generators))
                mp = SubquotientMap.from_ambient_matrix(eq, ent, mat)
                oracle = ext(p, Hq, M)
            out[(p, q)] = E2Certificate((p, q), ent.normal_form(), oracle.normal_form(),
                                        mp.is_isomorphism())
    return out


# ---------------------------------------------------------------------------
# the cellular couple


class CellularCouple(ExactCouple):
    """Couple of the castle triangles At_n -> At_{n+1} -> P_n -> At_n[1].

    Homological: D'(p,q) = F_{p+q}(At_{p+1}), i' = alpha_{p+1}^{p+2}, j' = sigma_p,
    k' = kappa_p.  Cohomological: D'(p,q) = G^{p+q}(At_{p+1}), i' = alpha_p^{p+1},
    j' = kappa_{p+1}, k' = sigma_p.  E is literally the E of the tower couple.
    """

    name = "cellular"

    def __init__(self, castle, functor, tower_couple: TowerCouple | None = None):
        t = castle.tower
        self.castle = castle
        self.tower = t
        self.functor = functor
        self.homological = functor.variance == "homological"
        self.base_couple = tower_couple or TowerCouple(t, functor)
        degs = HOMOLOGICAL if self.homological else COHOMOLOGICAL
        super().__init__(t.ring, functor.variance, degs, self.base_couple.qrange,
                         self.base_couple.collapse, self.base_couple.prange)
        # one shared zero object: functor caches key on the complex
        self._zero = castle.stages[0].At
        self._alphas = {}

    def At(self, n) -> ChainComplex:
        if n <= 0:
            return self._zero
        if n > self.castle.depth:
            raise DepthExceeded(f"castle stage {n} beyond depth {self.castle.depth}")
        return self.castle.stages[n].At

    def _stage(self, n):
        if n >= self.castle.depth:
            raise DepthExceeded(f"castle maps out of stage {n} need depth {n + 1}")
        return self.castle.stages[n]

    def alpha(self, a, b) -> ChainMap:
        """At_a -> At_b for a <= b."""
        key = (a, b)
        if key not in self._alphas:
            src, tgt = self.At(a), self.At(b)
            if a <= 0 or b <= 0:
                f = ChainMap.zero(src, tgt)
            elif a == b:
                f = ChainMap.identity(src)
            else:
                f = self._stage(a).step
                for k in range(a + 1, b):
                    f = self._stage(k).step.after(f)
            self._alphas[key] = f
        return self._alphas[key]

    def sigma(self, n) -> ChainMap:
        if n < 0:
            return ChainMap.zero(self.At(n + 1), self.tower.P(n))
        return self._stage(n).sigma

    def kappa(self, n) -> ChainMap:
        if n < 0:
            return ChainMap.zero(self.tower.P(n), self.At(n), 1)
        return self._stage(n).kappa

    def gamma(self, n) -> ChainMap:
        if n < 0:
            return ChainMap.zero(self.tower.N(n), self._zero, 1)
        return self.castle.stages[n].gamma

    def _leg(self, f, m, S, T, sp, tp):
        return LegMap(S, T, sp, tp, matrix=self.functor.induced_matrix(f, m))

    def _D(self, p, q):
        return self.functor.value(self.At(p + 1), p + q)

    def _E(self, p, q):
        return self.base_couple.E(p, q)

    def E(self, p, q):
        return self.base_couple.E(p, q)

    def _i(self, p, q, n):
        if self.homological:
            f, tgt = self.alpha(p + 1, p + 1 + n), (p + n, q - n)
        else:
            f, tgt = self.alpha(p + 1 - n, p + 1), (p - n, q + n)
        return self._leg(f, p + q, self.D(p, q), self.D(*tgt), (p, q), tgt)

    def _j(self, p, q):
        if self.homological:
            return self._leg(self.sigma(p), p + q, self.D(p, q), self.E(p, q), (p, q), (p, q))
        return self._leg(self.kappa(p + 1), p + q, self.D(p, q), self.E(p + 1, q), (p, q),
                         (p + 1, q))

    def _k(self, p, q):
        if self.homological:
            return self._leg(self.kappa(p), p + q, self.E(p, q), self.D(p - 1, q), (p, q),
                             (p - 1, q))
        return self._leg(self.sigma(p), p + q, self.E(p, q), self.D(p, q), (p, q), (p, q))

    def validation_positions(self):
        return self.base_couple.validation_positions()

    def comparison(self) -> CoupleMorphism:
        """Identity on E and gamma on D; tower -> cellular (homological) or back (cohomological)."""
        F = self.functor
        tc = self.base_couple

        def e_map(p, q):
            E = tc.E(p, q)
            return LegMap(E, E, (p, q), (p, q),
                          matrix=RMatrix.identity(self.ring, E.ambient.generators))

        if self.homological:
            def d_map(p, q):
                return LegMap(tc.D(p, q), self.D(p, q), (p, q), (p, q),
                              matrix=F.induced_matrix(self.gamma(p + 1), p + q + 1))
            return CoupleMorphism(tc, self, d_map, e_map, "gamma")

        def d_map(p, q):
            return LegMap(self.D(p, q), tc.D(p, q), (p, q), (p, q),
                          matrix=F.induced_matrix(self.gamma(p + 1), p + q))
        return CoupleMorphism(self, tc, d_map, e_map, "gamma")

    def l_filtration(self, m: int, p: int) -> list:
        """Image of F_m(At_p) in F_m(A) along alpha_p (homological only)."""
        if not self.homological:
            raise ValueError("the increasing L-filtration is defined for homological functors")
        F = self.functor
        A = self.tower.base
        if p <= 0:
            return list(F.value(A, m).denominator)
        return image_of_induced(F, self.castle.stages[p].alpha, m)


@dataclass
class CellularReport:
    couple: CellularCouple
    morphism_certificates: dict
    validation_ok: bool
    page_isomorphisms: dict  # (r, p, q) -> bool
    l_filtration: dict  # (m, p) -> bool (equals the phantom filtration)
    e_inf: dict  # (p, q) -> bool

    def ok(self) -> bool:
        return (all(self.morphism_certificates.values()) and self.validation_ok
                and all(self.page_isomorphisms.values()) and all(self.l_filtration.values())
                and all(self.e_inf.values()))

    def to_json(self):
        return {"validation_ok": self.validation_ok,
                "morphism_ok": all(self.morphism_certificates.values()),
                "page_isomorphisms": {f"{r}:{p},{q}": v for (r, p, q), v in
                                      sorted(self.page_isomorphisms.items())},
                "l_filtration_ok": all(self.l_filtration.values()),
                "e_inf_ok": all(self.e_inf.values())}


def cellular_convergence_map(cc: CellularCouple, p: int, q: int, entry: Subquotient) -> SubquotientMap:
    """E_{pq} -> L_{p+1}/L_p on F_{p+q}(A): x -> alpha_{p+1}(y) with sigma_p y = x."""
    F = cc.functor
    m = p + q
    A = cc.tower.base
    val = F.value(A, m)
    quot = Subquotient(val.ambient, cc.l_filtration(m, p + 1), cc.l_filtration(m, p))
    D = cc.D(p, q)
    jm = cc.j_map(p, q)
    E = cc.E(p, q)
    ys = D.numerator
    lifts = _solve_through(E.ambient, ys, jm(ys), E.denominator, entry.numerator,
                           f"the cellular edge at {(p, q)}")
    am = F.induced_matrix(cc.castle.stages[p + 1].alpha, m)
    return SubquotientMap(entry, quot, [am.apply(y) for y in lifts])


def cellular_couple(run: AbcRun, r_max: int | None = None) -> CellularReport:
    r_max = r_max or run.r_max
    cc = CellularCouple(run.castle, run.functor, run.couple)
    mor = cc.comparison()
    mcert = mor.certify(cc.validation_positions())
    valid = cc.is_valid()
    isos = {}
    for r in range(1, r_max + 1):
        for pos in run.couple.window_positions():
            try:
                isos[(r,) + pos] = mor.page_map(r, *pos).is_isomorphism()
            except WindowTooSmall:
                continue
    lf, einf = {}, {}
    lo, hi = run.couple.qrange
    if cc.homological:
        F, t = run.functor, run.tower
        for m in range(lo, hi + 1):
            val = F.value(t.base, m)
            for p in range(0, t.depth + 1):
                lf[(m, p)] = spans_equal(val.ambient, cc.l_filtration(m, p) + val.denominator,
                                         filtration_step(F, t, m, p) + val.denominator)
        for (p, q), st in run.stable.items():
            if st.stabilized_at is None or p + 1 > t.depth - 1:
                continue
            try:
                einf[(p, q)] = cellular_convergence_map(cc, p, q, st.value).is_isomorphism()
            except CertificateFailure:
                einf[(p, q)] = False
    return CellularReport(cc, mcert, valid, isos, lf, einf)


# ---------------------------------------------------------------------------
# Ext^0 and Ext^1 sequences


@dataclass
class ExtSequences:
    ext0: Subquotient
    ext1: Subquotient
    seq0: ExactSequence
    seq1: ExactSequence
    ideal_checks: dict

    def certify(self) -> dict:
        out = {f"ext0:{k}": v for k, v in self.seq0.certify().items()}
        out.update({f"ext1:{k}": v for k, v in self.seq1.certify().items()})
        out.update(self.ideal_checks)
        return out

    def ok(self) -> bool:
        return all(self.certify().values())

    def to_json(self, ring):
        return {"ext0": [ring.to_json(x) for x in self.ext0.normal_form()],
                "ext1": [ring.to_json(x) for x in self.ext1.normal_form()],
                "seq0": self.seq0.to_json(ring), "seq1": self.seq1.to_json(ring),
                "ok": self.ok()}


def ext_sequences(A: ChainComplex, B: ChainComplex, tower: PhantomTower | None = None) -> ExtSequences:
    """0 -> Ho/I (A,B) -> Ext^0 -> I(N_1[-1],B) -> I^2(A[-1],B) -> 0 and the Ext^1 analogue.

    Ext^0 is the entry (0,0) and Ext^1 the entry (1,-1) of the second page for
    G^m = Ho(-, B[m]).  The I(A,B) and I^2(A,B) subgroups are images along the
    tower maps, and every generator is re-checked with the factoring test.
    """
    if tower is None:
        tower = build_tower(A, 3)
    elif tower.depth < 3:
        tower.extend(3)
    G = Representable(B)
    couple = TowerCouple(tower, G)
    seq0 = dual_sequence(couple, 0, 0, 1)
    seq1 = dual_sequence(couple, 1, -1, 1)
    checks = {}
    space = G.space(A, 0)
    for k in (1, 2):
        gens = image_of_induced(G, tower.iota(0, k), 0)
        den = G.value(A, 0).denominator
        for n, v in enumerate(gens):
            if any(v == d for d in den):
                continue
            f = space.chain_map(v)
            if k == 1:
                checks[f"in_ideal:{n}"] = in_ideal(f)
            checks[f"in_power{k}:{n}"] = in_power(f, k, tower) is not None
    return ExtSequences(page_entry(couple, 2, 0, 0).value, page_entry(couple, 2, 1, -1).value,
                        seq0, seq1, checks)


# ---------------------------------------------------------------------------
# the adjunction for zero-differential complexes


def adjoint_on_projectives(P) -> ChainComplex:
    """The complex with the given free graded pieces and zero differential.

    ``P`` is a ChainComplex with zero differential, or a pair (ring, {degree: rank}).
    """
    if isinstance(P, ChainComplex):
        if not P.has_zero_differential():
            raise ValueError("expected a zero-differential complex")
        return P
    ring, ranks = P
    return ChainComplex(ring, {n: r for n, r in ranks.items() if r})


@dataclass
class AdjunctionCertificate:
    left: Subquotient  # Ho(P, B)
    right: Subquotient  # graded homs P -> H(B)
    forward: SubquotientMap
    backward: SubquotientMap
    checks: dict

    def ok(self) -> bool:
        return all(self.checks.values())


def adjunction_check(P, B: ChainComplex) -> AdjunctionCertificate:
    """Ho(P, B) against graded homs P -> H(B): evaluation on generators and cycle choice."""
    P = adjoint_on_projectives(P)
    ring = B.ring
    space = MapSpace(P, B, 0)
    left = space.subquotient()
    # right side: for each degree n and each generator of P_n a copy of H_n(B)
    blocks = []  # (n, j, offset in the right ambient, offset in the map vector, rows)
    size = 0
    for n, r, c, off in space.layout:
        for j in range(c):
            blocks.append((n, j, size, off + j * r, r))
            size += r
    amb = FgModule(ring, size)
    num, den = [], []
    for n, j, roff, _, r in blocks:
        H = B.homology_subquotient(n)
        for v in H.numerator:
            w = [ring.zero] * size
            w[roff: roff + r] = v
            num.append(w)
        for v in H.denominator:
            w = [ring.zero] * size
            w[roff: roff + r] = v
            den.append(w)
    right = Subquotient(amb, num + den, den)

    def fwd(v):
        w = [ring.zero] * size
        for n, j, roff, voff, r in blocks:
            w[roff: roff + r] = v[voff: voff + r]
        return w

    def bwd(w):
        v = [ring.zero] * space.size
        for n, j, roff, voff, r in blocks:
            v[voff: voff + r] = w[roff: roff + r]
        return v

    forward = SubquotientMap(left, right, [fwd(v) for v in left.numerator])
    backward = SubquotientMap(right, left, [bwd(w) for w in right.numerator])
    checks = {"forward_well_defined": forward.is_well_defined(),
              "backward_well_defined": backward.is_well_defined()}
    if checks["forward_well_defined"] and checks["backward_well_defined"]:
        back_fwd = SubquotientMap(left, left, [bwd(fwd(v)) for v in left.numerator])
        fwd_back = SubquotientMap(right, right, [fwd(bwd(w)) for w in right.numerator])
        checks["unit"] = back_fwd.agrees_with(SubquotientMap(left, left, left.numerator))
        checks["counit"] = fwd_back.agrees_with(SubquotientMap(right, right, right.numerator))
        checks["same_size"] = left.normal_form() == right.normal_form()
    return AdjunctionCertificate(left, right, forward, backward, checks)


# ---------------------------------------------------------------------------
# functoriality and collapse


@dataclass
class FunctorialityReport:
    agree: dict  # (p, q) -> two lifts give the same E^2 map
    commutes: dict  # (name, p, q) -> d^2 commutes with the induced map
    morphism: dict

    def ok(self) -> bool:
        return all(self.agree.values()) and all(self.commutes.values()) and all(self.morphism.values())


def e2_functoriality(f: ChainMap, M: FgModule, depth: int = 4, variance: str = "homological",
                     seed: int = 0) -> FunctorialityReport:
    """Two lifts of f (plain and randomized) induce one map on E^2 commuting with d^2."""
    ts = build_tower(f.source, depth)
    tt = build_tower(f.target, depth)
    F = make_functor(variance, M)
    cs, ct = TowerCouple(ts, F), TowerCouple(tt, F)
    lift1 = lift_morphism(f, ts, tt)
    lift2 = lift_morphism(f, ts, tt, rng=random.Random(seed))
    m1 = tower_morphism_couple_map(lift1, cs, ct)
    m2 = tower_morphism_couple_map(lift2, cs, ct)
    agree, comm = {}, {}
    mor = {}
    for name, mm in (("plain", m1), ("random", m2)):
        for k, v in mm.certify(mm.source.window_positions()).items():
            mor[f"{name}:{k}"] = v
    for pos in m1.source.window_positions():
        try:
            a = m1.page_map(2, *pos)
            b = m2.page_map(2, *pos)
        except WindowTooSmall:
            continue
        agree[pos] = a.is_well_defined() and b.is_well_defined() and a.agrees_with(b)
        for name, mm in (("plain", m1), ("random", m2)):
            try:
                comm[(name,) + pos] = mm.commutes_with_differential(2, *pos)
            except WindowTooSmall:
                continue
    return FunctorialityReport(agree, comm, mor)


@dataclass
class CollapseReport:
    m: int
    iota_null: dict  # n -> iota_n^{n+m+1} null-homotopic
    entries: dict  # (p, q) -> (normal form at E^{m+2}, stabilized_at)
    checks: dict

    def ok(self) -> bool:
        return all(self.iota_null.values()) and all(self.checks.values())


def collapse_report(A: ChainComplex, m: int, M: FgModule, depth: int | None = None,
                    variance: str = "homological") -> CollapseReport:
    """For A projective for the (m+1)-st power: null composites and collapse at E^{m+2}."""
    T = depth or 2 * m + 5
    t = build_tower(A, T)
    F = make_functor(variance, M)
    C = TowerCouple(t, F)
    null = {}
    for n in range(0, T - m):
        null[n] = is_null_homotopic(t.iota(n, n + m + 1))
    entries, checks = {}, {}
    lo, hi = C.qrange
    R = m + 2
    for p in range(0, T - R + 1):
        for q in range(lo, hi + 1):
            ent = page_entry(C, R, p, q)
            st = stable_entry(C, p, q, R)
            entries[(p, q)] = (ent.normal_form(), st.stabilized_at)
            if p > m:
                checks[f"zero:{p},{q}"] = ent.is_zero()
            if st.stabilized_at is not None:
                checks[f"stable_by:{p},{q}"] = st.stabilized_at <= R
            for r in range(R, R + 2):
                try:
                    checks[f"d{r}_zero:{p},{q}"] = differential(C, r, p, q).is_zero()
                except WindowTooSmall:
                    pass
    return CollapseReport(m, null, entries, checks)
