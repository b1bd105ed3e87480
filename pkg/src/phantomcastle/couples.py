"""Bigraded exact couples, their pages, and stabilization of single entries.

Entries of D and E are subquotients of ambient modules, and the structure maps
act on ambient vectors.  Page r is read off directly from

    Z_r = k^{-1}(i^{r-1} D),    B_r = j(ker i^{r-1}),    E^r = (Z_r + B_r) / B_r

and the recursion E^{r+1} = H(E^r, d^r) is checked as a certificate.  It is
never used to compute anything.

Bidegrees: homological couples have i: (1,-1), j: (0,0), k: (-1,0), so d^r
moves by (-r, r-1).  Cohomological couples have i: (-1,1), j: (1,0), k: (0,0),
so d^r moves by (r, 1-r).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .errors import CertificateFailure, DepthExceeded, WindowTooSmall
from .fgmod import (FgModule, Subquotient, SubquotientMap, _vec_add, _vec_scale, _vec_sub,
                    preimage, span_coordinates, spans_equal)
from .ringlin import RMatrix

HOMOLOGICAL = {"i": (1, -1), "j": (0, 0), "k": (-1, 0)}
COHOMOLOGICAL = {"i": (-1, 1), "j": (1, 0), "k": (0, 0)}


def _shift(pos, deg, n=1):
    return (pos[0] + n * deg[0], pos[1] + n * deg[1])


def _combine(ring, n, coords, vectors):
    out = [ring.zero] * n
    for c, v in zip(coords, vectors):
        if not ring.is_zero(c):
            out = _vec_add(ring, out, _vec_scale(ring, c, v))
    return out


def apply_map(mp: SubquotientMap, vs: list) -> list:
    """Images of arbitrary numerator elements under a SubquotientMap."""
    coords = mp.source.coordinates(vs)
    n = mp.target.ambient.generators
    out = []
    for v, c in zip(vs, coords):
        if c is None:
            raise CertificateFailure("vector outside the source numerator")
        out.append(_combine(mp.source.ring, n, c, mp.images))
    return out


class LegMap:
    """One structure map between two couple entries, acting on ambient vectors."""

    def __init__(self, source: Subquotient, target: Subquotient, src_pos, tgt_pos, *,
                 matrix: RMatrix | None = None, func=None):
        self.source = source
        self.target = target
        self.src_pos = tuple(src_pos)
        self.tgt_pos = tuple(tgt_pos)
        self.matrix = matrix
        self._func = func
        self._sq = None

    def __call__(self, vs: list) -> list:
        if self.matrix is not None:
            return [self.matrix.apply(v) for v in vs]
        return self._func(vs)

    def as_subquotient_map(self) -> SubquotientMap:
        if self._sq is None:
            self._sq = SubquotientMap(self.source, self.target, self(self.source.numerator))
        return self._sq


def _zero_sq(ring) -> Subquotient:
    return Subquotient(FgModule(ring, 0), [], [])


@dataclass
class ExactnessCheck:
    pos: tuple
    leg: str
    ok: bool

    def to_json(self):
        return {"p": self.pos[0], "q": self.pos[1], "leg": self.leg, "ok": self.ok}


class ExactCouple:
    """Base class; subclasses supply ``_D``, ``_E``, ``_i``, ``_j`` and ``_k``.

    ``qrange`` bounds the rows where E can be nonzero, ``collapse`` is a column
    index from which E vanishes (or None), and E vanishes for p < 0.
    """

    name = "couple"

    def __init__(self, ring, variance: str, degrees: dict, qrange=None, collapse=None,
                 prange=(0, 0)):
        self.ring = ring
        self.variance = variance
        self.degrees = dict(degrees)
        self.qrange = qrange
        self.collapse = collapse
        self.prange = prange
        self._cache = {}
        self._pages = {}

    # subclasses -------------------------------------------------------
    def _D(self, p, q) -> Subquotient:
        raise NotImplementedError

    def _E(self, p, q) -> Subquotient:
        raise NotImplementedError

    def _i(self, p, q, n) -> LegMap:
        """n-fold iterate of i; the default composes single steps."""
        pos = (p, q)
        vs_map = []
        cur = pos
        for _ in range(n):
            vs_map.append(self.i_map(*cur))
            cur = _shift(cur, self.degrees["i"])

        def run(vs):
            for m in vs_map:
                vs = m(vs)
            return vs

        return LegMap(self.D(p, q), self.D(*cur), pos, cur, func=run)

    def _j(self, p, q) -> LegMap:
        raise NotImplementedError

    def _k(self, p, q) -> LegMap:
        raise NotImplementedError

    # cached, window-checked access --------------------------------------
    def _get(self, key, build):
        if key not in self._cache:
            try:
                self._cache[key] = build()
            except DepthExceeded as exc:
                raise WindowTooSmall(f"{key[0]} at {key[1:]} needs {exc}") from None
        return self._cache[key]

    def D(self, p, q) -> Subquotient:
        return self._get(("D", p, q), lambda: self._D(p, q))

    def E(self, p, q) -> Subquotient:
        if self.e1_vanishes(p, q):
            return self._get(("E0", p, q), lambda: self._zero_E(p, q))
        return self._get(("E", p, q), lambda: self._E(p, q))

    def _zero_E(self, p, q):
        try:
            return self._E(p, q)
        except DepthExceeded:
            return _zero_sq(self.ring)

    def i_map(self, p, q, power: int = 1) -> LegMap:
        if power == 0:
            def build():
                D = self.D(p, q)
                return LegMap(D, D, (p, q), (p, q),
                              matrix=RMatrix.identity(self.ring, D.ambient.generators))
            return self._get(("i0", p, q), build)
        if power == 1:
            return self._get(("i", p, q), lambda: self._i1(p, q))
        return self._get(("i", p, q, power), lambda: self._i(p, q, power))

    def _i1(self, p, q):
        return self._i(p, q, 1)

    def j_map(self, p, q) -> LegMap:
        return self._get(("j", p, q), lambda: self._j(p, q))

    def k_map(self, p, q) -> LegMap:
        return self._get(("k", p, q), lambda: self._k(p, q))

    # support ------------------------------------------------------------
    def e1_vanishes(self, p, q) -> bool:
        if p < 0:
            return True
        if self.collapse is not None and p >= self.collapse:
            return True
        if self.qrange is not None:
            lo, hi = self.qrange
            return not lo <= q <= hi
        return False

    def differential_degree(self, r) -> tuple:
        """Bidegree of d^r: k, then r-1 backwards steps of i, then j."""
        di, dj, dk = self.degrees["i"], self.degrees["j"], self.degrees["k"]
        return (dk[0] - (r - 1) * di[0] + dj[0], dk[1] - (r - 1) * di[1] + dj[1])

    def window_positions(self):
        """Positions (p, q) of E that are nonzero on E^1 and inside the column window."""
        if self.qrange is None:
            return []
        lo, hi = self.qrange
        p0, p1 = self.prange
        return [(p, q) for p in range(p0, p1 + 1) for q in range(lo, hi + 1)
                if not self.e1_vanishes(p, q)]

    def validation_positions(self):
        if self.qrange is None:
            return []
        lo, hi = self.qrange
        p0, p1 = self.prange
        pad = p1 - p0 + 2
        return [(p, q) for p in range(p0 - 2, p1 + 2) for q in range(lo - pad, hi + pad + 1)]

    def bidegree_ok(self, leg: LegMap, name: str) -> bool:
        return _shift(leg.src_pos, self.degrees[name]) == leg.tgt_pos

    # exactness ----------------------------------------------------------
    def validate(self, positions=None) -> list:
        """Kernel = image at D (twice) and at E, wherever both legs are computable."""
        out = []
        di, dj, dk = self.degrees["i"], self.degrees["j"], self.degrees["k"]
        for pos in positions if positions is not None else self.validation_positions():
            legs = [
                ("D:ker j = im i", lambda: self.D(*pos), lambda: self.i_map(*_shift(pos, di, -1)),
                 lambda: self.j_map(*pos)),
                ("E:ker k = im j", lambda: self.E(*pos), lambda: self.j_map(*_shift(pos, dj, -1)),
                 lambda: self.k_map(*pos)),
                ("D:ker i = im k", lambda: self.D(*pos), lambda: self.k_map(*_shift(pos, dk, -1)),
                 lambda: self.i_map(*pos)),
            ]
            for name, mid, inc, outg in legs:
                try:
                    M, a, b = mid(), inc(), outg()
                except WindowTooSmall:
                    continue
                if not M.numerator and not a.source.numerator:
                    continue
                ker = b.as_subquotient_map().kernel_subquotient().numerator
                img = a(a.source.numerator) + M.denominator
                out.append(ExactnessCheck(pos, name, spans_equal(M.ambient, ker, img)))
        return out

    def is_valid(self, positions=None) -> bool:
        return all(c.ok for c in self.validate(positions))


class ZeroCouple(ExactCouple):
    name = "zero"

    def __init__(self, ring, variance="homological", prange=(0, 3), qrange=(0, 1)):
        degs = HOMOLOGICAL if variance == "homological" else COHOMOLOGICAL
        super().__init__(ring, variance, degs, qrange, None, prange)

    def _D(self, p, q):
        return _zero_sq(self.ring)

    _E = _D

    def _leg(self, name, p, q, src, tgt_kind):
        tgt = _shift((p, q), self.degrees[name])
        S, T = src, (self.D(*tgt) if tgt_kind == "D" else self.E(*tgt))
        return LegMap(S, T, (p, q), tgt, matrix=RMatrix(self.ring, 0, 0))

    def _i(self, p, q, n):
        tgt = _shift((p, q), self.degrees["i"], n)
        return LegMap(self.D(p, q), self.D(*tgt), (p, q), tgt, matrix=RMatrix(self.ring, 0, 0))

    def _j(self, p, q):
        return self._leg("j", p, q, self.D(p, q), "E")

    def _k(self, p, q):
        return self._leg("k", p, q, self.E(p, q), "D")


class ModifiedCouple(ExactCouple):
    """Copy of a couple with j replaced by zero at one position (a deliberate defect)."""

    name = "modified"

    def __init__(self, base: ExactCouple, zero_j_at):
        super().__init__(base.ring, base.variance, base.degrees, base.qrange, base.collapse,
                         base.prange)
        self.base = base
        self.zero_j_at = tuple(zero_j_at)

    def _D(self, p, q):
        return self.base.D(p, q)

    def _E(self, p, q):
        return self.base.E(p, q)

    def _i(self, p, q, n):
        return self.base.i_map(p, q, n)

    def _j(self, p, q):
        leg = self.base.j_map(p, q)
        if (p, q) != self.zero_j_at:
            return leg
        z = RMatrix(self.ring, leg.target.ambient.generators, leg.source.ambient.generators)
        return LegMap(leg.source, leg.target, leg.src_pos, leg.tgt_pos, matrix=z)

    def _k(self, p, q):
        return self.base.k_map(p, q)


# ---------------------------------------------------------------------------
# pages


@dataclass
class PageEntry:
    r: int
    pos: tuple
    Z: list
    B: list
    value: Subquotient

    @property
    def module(self) -> FgModule:
        return self.value.as_module()

    def normal_form(self) -> list:
        return self.value.normal_form()

    def is_zero(self) -> bool:
        return self.value.is_zero()


def page_entry(couple: ExactCouple, r: int, p: int, q: int) -> PageEntry:
    """E^r at (p, q) from the subquotient formulas."""
    if r < 1:
        raise ValueError("pages start at r = 1")
    key = ("entry", r, p, q)
    if key in couple._pages:
        return couple._pages[key]
    ring = couple.ring
    pos = (p, q)
    E = couple.E(p, q)
    if not E.numerator:
        ent = PageEntry(r, pos, [], [], E)
        couple._pages[key] = ent
        return ent
    di, dj = couple.degrees["i"], couple.degrees["j"]
    if r == 1:
        Z = list(E.numerator)
        B = list(E.denominator)
    else:
        k = couple.k_map(p, q)
        kpos = k.tgt_pos
        src = _shift(kpos, di, -(r - 1))
        ip = couple.i_map(*src, power=r - 1)
        Dk = couple.D(*kpos)
        gens = ip(ip.source.numerator) + Dk.denominator
        kim = k(E.numerator)
        s = len(E.numerator)
        mat = RMatrix.from_columns(ring, kim, Dk.ambient.generators) if kim else \
            RMatrix(ring, Dk.ambient.generators, 0)
        coords = preimage(mat, FgModule(ring, s), Dk.ambient, gens)
        Z = [E.element(c) for c in coords]
        dpos = _shift(pos, dj, -1)
        ipj = couple.i_map(*dpos, power=r - 1)
        ker = ipj.as_subquotient_map().kernel_subquotient().numerator
        B = couple.j_map(*dpos)(ker) + E.denominator
    ent = PageEntry(r, pos, Z, B, Subquotient(E.ambient, Z + B, B))
    couple._pages[key] = ent
    return ent


@dataclass
class Differential:
    r: int
    source_pos: tuple
    target_pos: tuple
    map: SubquotientMap
    lifts: list  # preimages y with i^{r-1} y = k x, one per source generator
    kernel_gens: list  # generators of ker i^{r-1} at the lift position

    def is_zero(self) -> bool:
        return all(self.map.target.is_zero_class(v) for v in self.map.images)


def differential(couple: ExactCouple, r: int, p: int, q: int) -> Differential:
    """d^r out of (p, q): x -> j(y) where i^{r-1} y = k x."""
    key = ("d", r, p, q)
    if key in couple._pages:
        return couple._pages[key]
    ring = couple.ring
    pos = (p, q)
    di = couple.degrees["i"]
    tpos = _shift(pos, couple.differential_degree(r))
    src_ent = page_entry(couple, r, p, q)
    if couple.e1_vanishes(*tpos):
        T = Subquotient(couple.E(*tpos).ambient, [], [])
        zero = [T.ambient.zero_vector() for _ in src_ent.value.numerator]
        d = Differential(r, pos, tpos, SubquotientMap(src_ent.value, T, zero), [], [])
        couple._pages[key] = d
        return d
    tgt_ent = page_entry(couple, r, *tpos)
    xs = src_ent.value.numerator
    if not xs:
        d = Differential(r, pos, tpos, SubquotientMap(src_ent.value, tgt_ent.value, []), [], [])
        couple._pages[key] = d
        return d
    k = couple.k_map(p, q)
    kpos = k.tgt_pos
    lpos = _shift(kpos, di, -(r - 1))
    ip = couple.i_map(*lpos, power=r - 1)
    Dk = couple.D(*kpos)
    ys = ip.source.numerator
    imgs = ip(ys)
    coords = span_coordinates(Dk.ambient, imgs + Dk.denominator, k(xs))
    nl = ip.source.ambient.generators
    lifts = []
    for c in coords:
        if c is None:
            raise CertificateFailure(f"page {r} class at {pos} has no lift along i^{r - 1}")
        lifts.append(_combine(ring, nl, c[: len(ys)], ys))
    j = couple.j_map(*lpos)
    if j.tgt_pos != tpos:
        raise CertificateFailure("bidegree bookkeeping of d^r is inconsistent")
    mp = SubquotientMap(src_ent.value, tgt_ent.value, j(lifts))
    kern = ip.as_subquotient_map().kernel_subquotient().numerator
    d = Differential(r, pos, tpos, mp, lifts, kern)
    couple._pages[key] = d
    return d


def incoming_differential(couple: ExactCouple, r: int, p: int, q: int) -> Differential | None:
    """d^r into (p, q), or None when its source vanishes on E^1."""
    deg = couple.differential_degree(r)
    spos = (p - deg[0], q - deg[1])
    if couple.e1_vanishes(*spos):
        return None
    return differential(couple, r, *spos)


def lift_independence(couple: ExactCouple, r: int, p: int, q: int, trials: int = 3,
                      seed: int = 0) -> bool:
    """d^r does not depend on the chosen lift: perturbing by ker i^{r-1} keeps the class."""
    d = differential(couple, r, p, q)
    if not d.lifts:
        return True
    ring = couple.ring
    rng = random.Random(seed * 7919 + 31 * r + 17 * p + q)
    lpos = _shift(d.target_pos, couple.degrees["j"], -1)
    j = couple.j_map(*lpos)
    n = len(d.lifts[0])
    for _ in range(max(trials, 3)):
        for y, base in zip(d.lifts, d.map.images):
            if d.kernel_gens:
                cs = [ring.random_element(rng, 5) for _ in d.kernel_gens]
                y2 = _vec_add(ring, y, _combine(ring, n, cs, d.kernel_gens))
            else:
                y2 = y
            other = j([y2])[0]
            if not d.map.target.is_zero_class(_vec_sub(ring, other, base)):
                return False
    return True


def recursion_holds(couple: ExactCouple, r: int, p: int, q: int) -> bool:
    """E^{r+1} at (p, q) equals ker d^r / im d^r as subquotients of E^1."""
    cur = page_entry(couple, r, p, q)
    nxt = page_entry(couple, r + 1, p, q)
    amb = cur.value.ambient
    dout = differential(couple, r, p, q)
    ker = dout.map.kernel_subquotient().numerator if cur.value.numerator else []
    din = incoming_differential(couple, r, p, q)
    img = (din.map.images if din else []) + cur.B
    return spans_equal(amb, ker, nxt.value.numerator) and spans_equal(amb, img, nxt.value.denominator)


def square_zero(couple: ExactCouple, r: int, p: int, q: int) -> bool:
    d1 = differential(couple, r, p, q)
    if couple.e1_vanishes(*d1.target_pos):
        return True
    d2 = differential(couple, r, *d1.target_pos)
    vals = apply_map(d2.map, d1.map.images)
    return all(d2.map.target.is_zero_class(v) for v in vals)


@dataclass
class Page:
    r: int
    entries: dict  # (p, q) -> PageEntry
    differentials: dict  # (p, q) -> Differential
    bidegree: tuple

    def normal_forms(self) -> dict:
        return {pos: e.normal_form() for pos, e in self.entries.items()}

    def to_json(self, ring):
        ents = []
        for (p, q), e in sorted(self.entries.items()):
            item = {"p": p, "q": q, "normal_form": [ring.to_json(x) for x in e.normal_form()]}
            d = self.differentials.get((p, q))
            if d is not None and d.map.source.numerator:
                mm = d.map.as_module_map()
                item["differential"] = {"target": list(d.target_pos),
                                        "matrix": mm.matrix.to_json()}
            ents.append(item)
        return {"r": self.r, "bidegree": list(self.bidegree), "entries": ents}


def page(couple: ExactCouple, r: int, positions=None) -> Page:
    """E^r and d^r on every computable position of the window."""
    ents, diffs = {}, {}
    for pos in positions if positions is not None else couple.window_positions():
        try:
            ents[pos] = page_entry(couple, r, *pos)
        except WindowTooSmall:
            continue
        try:
            diffs[pos] = differential(couple, r, *pos)
        except WindowTooSmall:
            pass
    return Page(r, ents, diffs, couple.differential_degree(r))


def certify_page(couple: ExactCouple, r: int, positions=None, seed: int = 0) -> dict:
    """d∘d = 0, the homology recursion and lift independence on each computable entry."""
    out = {}
    for pos in positions if positions is not None else couple.window_positions():
        tag = f"r{r}@{pos[0]},{pos[1]}"
        for name, fn in (("dd", square_zero), ("recursion", recursion_holds)):
            try:
                out[f"{name}:{tag}"] = fn(couple, r, *pos)
            except WindowTooSmall:
                pass
        try:
            out[f"lift:{tag}"] = lift_independence(couple, r, *pos, seed=seed)
        except WindowTooSmall:
            pass
    return out


class DerivedCouple(ExactCouple):
    """The (r-1)-fold derived couple: D^r = i^{r-1} D and E^r, with j read through i^{r-1}."""

    name = "derived"

    def __init__(self, base: ExactCouple, r: int = 2):
        if r < 1:
            raise ValueError("r must be at least 1")
        di = base.degrees["i"]
        degs = dict(base.degrees)
        degs["j"] = (base.degrees["j"][0] - (r - 1) * di[0], base.degrees["j"][1] - (r - 1) * di[1])
        super().__init__(base.ring, base.variance, degs, base.qrange, base.collapse, base.prange)
        self.base = base
        self.r = r

    def e1_vanishes(self, p, q):
        return self.base.e1_vanishes(p, q)

    def _D(self, p, q):
        b = self.base
        D = b.D(p, q)
        src = _shift((p, q), b.degrees["i"], -(self.r - 1))
        ip = b.i_map(*src, power=self.r - 1)
        return Subquotient(D.ambient, ip(ip.source.numerator) + D.denominator, D.denominator)

    def _E(self, p, q):
        return page_entry(self.base, self.r, p, q).value

    def _i(self, p, q, n):
        leg = self.base.i_map(p, q, n)
        return LegMap(self.D(p, q), self.D(*leg.tgt_pos), (p, q), leg.tgt_pos, matrix=leg.matrix,
                      func=None if leg.matrix is not None else leg)

    def _j(self, p, q):
        b = self.base
        ring = self.ring
        src = _shift((p, q), b.degrees["i"], -(self.r - 1))
        ip = b.i_map(*src, power=self.r - 1)
        jb = b.j_map(*src)
        D = b.D(p, q)
        ys = ip.source.numerator
        imgs = ip(ys)
        n = ip.source.ambient.generators

        def run(vs):
            if not vs:
                return []
            coords = span_coordinates(D.ambient, imgs + D.denominator, vs)
            lifts = []
            for c in coords:
                if c is None:
                    raise CertificateFailure("element outside i^{r-1} D")
                lifts.append(_combine(ring, n, c[: len(ys)], ys))
            return jb(lifts)

        return LegMap(self.D(p, q), self.E(*jb.tgt_pos), (p, q), jb.tgt_pos, func=run)

    def _k(self, p, q):
        leg = self.base.k_map(p, q)
        return LegMap(self.E(p, q), self.D(*leg.tgt_pos), (p, q), leg.tgt_pos, matrix=leg.matrix,
                      func=None if leg.matrix is not None else leg)


def derived_couple(couple: ExactCouple) -> DerivedCouple:
    return DerivedCouple(couple, 2)


# ---------------------------------------------------------------------------
# stabilization


@dataclass
class StableEntry:
    pos: tuple
    value: Subquotient
    page: int
    stabilized_at: int | None
    nonzero_differentials: list = field(default_factory=list)
    reason: str = ""

    @property
    def module(self) -> FgModule:
        return self.value.as_module()

    def normal_form(self) -> list:
        return self.value.normal_form()

    def __iter__(self):
        yield self.module
        yield self.stabilized_at

    def to_json(self, ring):
        return {"p": self.pos[0], "q": self.pos[1], "page": self.page,
                "stabilized_at": self.stabilized_at,
                "normal_form": [ring.to_json(x) for x in self.normal_form()],
                "nonzero_differentials": [list(x) for x in self.nonzero_differentials],
                "reason": self.reason}


def _first_vanishing(couple, pos, sign, bound) -> int:
    """Least R such that the d^r partner of ``pos`` vanishes on E^1 for every r >= R."""
    least = bound + 1
    for r in range(bound, 0, -1):
        deg = couple.differential_degree(r)
        other = (pos[0] + sign * deg[0], pos[1] + sign * deg[1])
        if couple.e1_vanishes(*other):
            least = r
        else:
            break
    return least


def stable_entry(couple: ExactCouple, p: int, q: int, r_max: int) -> StableEntry:
    """E^r at (p, q) for the least r after which every d^r through (p, q) is zero.

    Differentials are ruled out either by support (their other end vanishes on
    E^1 for every larger r) or by explicit computation.  When the answer needs
    a page beyond ``r_max`` or data outside the window the entry is returned
    at the largest computable page with ``stabilized_at=None``.  Entries with
    p >= 0 never report stabilization before page 2, since E^1 still depends on
    the tower.
    """
    if r_max < 2:
        raise ValueError("r_max must be at least 2")
    pos = (p, q)
    if couple.e1_vanishes(p, q) and (p < 0 or couple.qrange is None
                                      or not couple.qrange[0] <= q <= couple.qrange[1]):
        return StableEntry(pos, _zero_sq(couple.ring), 1, 1, [], "zero by support")
    lo, hi = couple.qrange if couple.qrange is not None else (q, q)
    bound = (hi - lo) + abs(p) + 4
    if couple.collapse is not None:
        bound = max(bound, couple.collapse + 2)
    r_out = _first_vanishing(couple, pos, 1, bound)
    r_in = _first_vanishing(couple, pos, -1, bound)
    r_support = max(r_out, r_in)
    nonzero = []
    last = 0
    try:
        for r in range(1, r_support):
            if r > r_max:
                raise _Abstain(f"d^{r} is not excluded by support and r_max = {r_max}")
            ent = page_entry(couple, r, p, q)
            if ent.is_zero():
                break
            if r < r_out and not differential(couple, r, p, q).is_zero():
                nonzero.append((r, "out"))
                last = r
            if r < r_in:
                din = incoming_differential(couple, r, p, q)
                if din is not None and not din.is_zero():
                    nonzero.append((r, "in"))
                    last = r
        at = max(last + 1, 2)
        if at > r_max:
            raise _Abstain(f"stabilizes after r_max = {r_max}")
        ent = page_entry(couple, at, p, q)
        return StableEntry(pos, ent.value, at, at, nonzero, "support and computed differentials")
    except (WindowTooSmall, _Abstain) as exc:
        best = None
        for r in range(1, r_max + 1):
            try:
                best = page_entry(couple, r, p, q)
            except WindowTooSmall:
                break
            if best.is_zero():
                # later pages are subquotients of a zero group
                at = max(r, 2)
                return StableEntry(pos, best.value, at, at, nonzero, f"E^{r} vanishes")
        if best is None:
            return StableEntry(pos, _zero_sq(couple.ring), 0, None, nonzero, f"outside window: {exc}")
        return StableEntry(pos, best.value, best.r, None, nonzero, str(exc))


class _Abstain(Exception):
    pass


# ---------------------------------------------------------------------------
# morphisms of couples


class CoupleMorphism:
    """Maps D -> D' and E -> E' (given per position) commuting with i, j, k."""

    def __init__(self, source: ExactCouple, target: ExactCouple, d_map, e_map, name="morphism"):
        self.source = source
        self.target = target
        self._d = d_map
        self._e = e_map
        self.name = name

    def d(self, p, q) -> LegMap:
        return self._d(p, q)

    def e(self, p, q) -> LegMap:
        return self._e(p, q)

    def _agree(self, T: Subquotient, a: list, b: list) -> bool:
        ring = self.source.ring
        return all(T.is_zero_class(_vec_sub(ring, x, y)) for x, y in zip(a, b))

    def certify(self, positions=None) -> dict:
        """phi i = i' phi, phi j = j' phi and phi k = k' phi on numerator generators."""
        S, T = self.source, self.target
        out = {}
        for pos in positions if positions is not None else S.validation_positions():
            tag = f"{pos[0]},{pos[1]}"
            checks = (
                ("i", lambda: S.D(*pos).numerator, lambda: S.i_map(*pos), lambda: self.d(*pos),
                 lambda leg: self.d(*leg.tgt_pos), lambda phi: T.i_map(*phi.tgt_pos)),
                ("j", lambda: S.D(*pos).numerator, lambda: S.j_map(*pos), lambda: self.d(*pos),
                 lambda leg: self.e(*leg.tgt_pos), lambda phi: T.j_map(*phi.tgt_pos)),
                ("k", lambda: S.E(*pos).numerator, lambda: S.k_map(*pos), lambda: self.e(*pos),
                 lambda leg: self.d(*leg.tgt_pos), lambda phi: T.k_map(*phi.tgt_pos)),
            )
            for name, gens, leg_f, phi_f, phi2_f, leg2_f in checks:
                try:
                    xs = gens()
                    if not xs:
                        continue
                    leg = leg_f()
                    phi = phi_f()
                    one = phi2_f(leg)(leg(xs))
                    leg2 = leg2_f(phi)
                    two = leg2(phi(xs))
                    out[f"{name}:{tag}"] = self._agree(leg2.target, one, two)
                except WindowTooSmall:
                    continue
        return out

    def page_map(self, r: int, p: int, q: int) -> SubquotientMap:
        src = page_entry(self.source, r, p, q)
        phi = self.e(p, q)
        tgt = page_entry(self.target, r, *phi.tgt_pos)
        return SubquotientMap(src.value, tgt.value, phi(src.value.numerator))

    def commutes_with_differential(self, r: int, p: int, q: int) -> bool:
        d = differential(self.source, r, p, q)
        if not d.map.source.numerator:
            return True
        phi = self.page_map(r, p, q)
        d2 = differential(self.target, r, *self.e(p, q).tgt_pos)
        one = apply_map(d2.map, phi.images)
        far = self.e(*d.target_pos)
        if self.source.e1_vanishes(*d.target_pos):
            two = [d2.map.target.ambient.zero_vector() for _ in one]
        else:
            two = far(d.map.images)
        return self._agree(d2.map.target, one, two)


# ---------------------------------------------------------------------------
# the couple of a phantom tower


def functor_rows(functor, A) -> tuple:
    """Rows q where E^1 of the tower couple can be nonzero."""
    lo, hi = A.support
    if lo > hi:
        return (0, -1)
    B = getattr(functor, "B", None)
    if B is not None:
        blo, bhi = B.support
        if blo > bhi:
            return (0, -1)
        return (lo - bhi, hi - blo)
    return (lo, hi)


class TowerCouple(ExactCouple):
    """The couple of a (co)homological functor on a phantom tower.

    Homological:   D(p,q) = F_{p+q+1}(N_{p+1}),  E(p,q) = F_{p+q}(P_p),
                   i = iota_{p+1}^{p+2},  j = eps_p,  k = pi_p.
    Cohomological: D(p,q) = G^{p+q+1}(N_{p+1}),  E(p,q) = G^{p+q}(P_p),
                   i = iota_p^{p+1},  j = pi_{p+1},  k = eps_p.
    Negative columns use N_n = A and P_n = 0.
    """

    name = "tower"

    def __init__(self, tower, functor):
        degs = HOMOLOGICAL if functor.variance == "homological" else COHOMOLOGICAL
        super().__init__(tower.ring, functor.variance, degs, functor_rows(functor, tower.base),
                         tower.collapsed_at(), (0, tower.depth - 1))
        self.tower = tower
        self.functor = functor
        self.homological = functor.variance == "homological"

    def _leg(self, f, m, src, tgt, src_pos, tgt_pos):
        return LegMap(src, tgt, src_pos, tgt_pos, matrix=self.functor.induced_matrix(f, m))

    def _D(self, p, q):
        return self.functor.value(self.tower.N(p + 1), p + q + 1)

    def _E(self, p, q):
        return self.functor.value(self.tower.P(p), p + q)

    def _i(self, p, q, n):
        t = self.tower
        if self.homological:
            f = t.iota(p + 1, p + 1 + n)
            tgt = (p + n, q - n)
        else:
            f = t.iota(p + 1 - n, p + 1)
            tgt = (p - n, q + n)
        return self._leg(f, p + q + 1, self.D(p, q), self.D(*tgt), (p, q), tgt)

    def _j(self, p, q):
        t = self.tower
        if self.homological:
            return self._leg(t.eps(p), p + q + 1, self.D(p, q), self.E(p, q), (p, q), (p, q))
        return self._leg(t.pi(p + 1), p + q + 1, self.D(p, q), self.E(p + 1, q), (p, q), (p + 1, q))

    def _k(self, p, q):
        t = self.tower
        if self.homological:
            return self._leg(t.pi(p), p + q, self.E(p, q), self.D(p - 1, q), (p, q), (p - 1, q))
        return self._leg(t.eps(p), p + q, self.E(p, q), self.D(p, q), (p, q), (p, q))

    def validation_positions(self):
        lo, hi = self.qrange
        if lo > hi:
            return []
        T = self.tower.depth
        return [(p, q) for p in range(-1, T) for q in range(lo - T - 1, hi + 2)]


def tower_couple(tower, functor) -> TowerCouple:
    return TowerCouple(tower, functor)


def tower_morphism_couple_map(mor, src_couple: TowerCouple, tgt_couple: TowerCouple) -> CoupleMorphism:
    """The couple morphism induced by a lifted tower map.

    Covariant functors go from the source couple to the target couple; for
    contravariant ones the arrow is reversed.
    """
    F = src_couple.functor

    def nmap(n):
        return mor.Nf[max(n, 0)]

    def pmap(n):
        return mor.Pf[n]

    cov = F.variance == "homological"
    dom, cod = (src_couple, tgt_couple) if cov else (tgt_couple, src_couple)

    def d_map(p, q):
        m = p + q + 1
        f = nmap(p + 1)
        return LegMap(dom.D(p, q), cod.D(p, q), (p, q), (p, q), matrix=F.induced_matrix(f, m))

    def e_map(p, q):
        if p < 0:
            S, T = dom.E(p, q), cod.E(p, q)
            return LegMap(S, T, (p, q), (p, q),
                          matrix=RMatrix(F.ring, T.ambient.generators, S.ambient.generators))
        return LegMap(dom.E(p, q), cod.E(p, q), (p, q), (p, q),
                      matrix=F.induced_matrix(pmap(p), p + q))

    return CoupleMorphism(dom, cod, d_map, e_map, "tower lift")
