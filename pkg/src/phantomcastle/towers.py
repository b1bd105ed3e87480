"""Phantom towers and castles built from explicit cones.

Stage n of a tower takes a free cover ``pi_n: P_n -> N_n`` of the homology of
``N_n`` and sets ``N_{n+1} = cone(pi_n)``; ``iota`` is the cone inclusion and
``eps`` the degree-1 projection.  For n < 0 the tower is constant: ``N_n = A``,
``P_n = 0`` and ``iota`` is the identity.

The castle object ``At_n`` is ``cone(iota^n)`` shifted down once, so
``At_{n,k} = A_k + N_{n,k+1}`` with ``d(a, y) = (d a, -iota^n a - d y)``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .chaincx import (ChainComplex, ChainMap, Homotopy, cone, homotopic,
                      is_null_homotopic, map_from_sum, map_into_sum,
                      solve_factorization)
from .errors import CertificateFailure, DepthExceeded
from .fgmod import SubquotientMap, spans_equal
from .hotri import Triangle, is_exact
from .ideals import in_ideal, in_power, is_projective, projective_cover
from .ringlin import RMatrix, block_matrix


class PhantomTower:
    def __init__(self, base: ChainComplex, depth: int = 0):
        self.base = base
        self.ring = base.ring
        self.Ns = [base]
        self.Ps = []
        self.pis = []
        self.iotas = []
        self.epss = []
        self._iota_cache = {}
        self.extend(depth)

    def __repr__(self):
        return f"PhantomTower(depth {self.depth}, P ranks {[p.total_rank() for p in self.Ps]})"

    @property
    def depth(self) -> int:
        return len(self.Ns) - 1

    def extend(self, depth: int) -> "PhantomTower":
        while self.depth < depth:
            N = self.Ns[-1]
            P, pi = projective_cover(N)
            c = cone(pi)
            self.Ps.append(P)
            self.pis.append(pi)
            self.Ns.append(c.complex)
            self.iotas.append(c.inclusion)
            self.epss.append(c.projection)
        return self

    def _need(self, n):
        if n > self.depth:
            raise DepthExceeded(f"stage {n} beyond tower depth {self.depth}")

    def N(self, n) -> ChainComplex:
        if n < 0:
            return self.base
        self._need(n)
        return self.Ns[n]

    def P(self, n) -> ChainComplex:
        if n < 0:
            return ChainComplex.zero(self.ring)
        self._need(n + 1)
        return self.Ps[n]

    def pi(self, n) -> ChainMap:
        if n < 0:
            return ChainMap.zero(self.P(n), self.base)
        self._need(n + 1)
        return self.pis[n]

    def eps(self, n) -> ChainMap:
        """N_{n+1} -> P_n, degree 1."""
        if n < 0:
            return ChainMap.zero(self.N(n + 1), self.P(n), 1)
        self._need(n + 1)
        return self.epss[n]

    def iota(self, a, b) -> ChainMap:
        """Composite N_a -> N_b for a <= b (identity on the constant negative part)."""
        if a > b:
            raise ValueError("iota needs a <= b")
        a0 = max(a, 0)
        b0 = max(b, 0)
        self._need(b0)
        key = (a0, b0)
        if key not in self._iota_cache:
            if a0 == b0:
                f = ChainMap.identity(self.Ns[a0])
            else:
                f = self.iotas[a0]
                for k in range(a0 + 1, b0):
                    f = self.iotas[k].after(f)
            self._iota_cache[key] = f
        return self._iota_cache[key]

    def delta(self, n) -> ChainMap:
        """P_n -> P_{n-1} of degree 1 (eps_{n-1} ∘ pi_n)."""
        return self.eps(n - 1).after(self.pi(n))

    def triangle(self, n) -> Triangle:
        return Triangle(self.pi(n), self.iota(n, n + 1), self.eps(n), f"tower {n}")

    def collapsed_at(self) -> int | None:
        """Least n with N_n acyclic, if any within the depth."""
        for n, N in enumerate(self.Ns):
            if N.is_acyclic():
                return n
        return None

    def certify(self) -> dict:
        out = {}
        for n in range(self.depth):
            out[f"exact:tower{n}"] = is_exact(self.triangle(n)) is not None
            out[f"phantom:iota{n}"] = in_ideal(self.iota(n, n + 1))
            out[f"projective:P{n}"] = is_projective(self.P(n))
        out["resolution_exact"] = spliced_resolution_exact(self)
        return out


def build_tower(A: ChainComplex, depth: int) -> PhantomTower:
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    return PhantomTower(A, depth)


def spliced_resolution_exact(tower: PhantomTower) -> bool:
    """... -> H(P_1) -> H(P_0) -> H(A) -> 0 is exact up to the tower depth.

    The maps are H(delta) (lowering degree by one) and H(pi_0).
    """
    A = tower.base
    T = tower.depth
    if T == 0:
        return True
    # surjectivity of H(pi_0)
    for m in A.degrees():
        if not tower.pi(0).induced_on_homology(m).is_surjective():
            return False
    # exactness at P_n in each degree: ker(out) = im(in)
    for n in range(T):
        P = tower.P(n)
        out_map = tower.pi(0) if n == 0 else tower.delta(n)
        for m in P.degrees():
            sq = P.homology_subquotient(m)
            ker = SubquotientMap.from_ambient_matrix(
                sq, out_map.target.homology_subquotient(m - out_map.degree),
                out_map[m]).kernel_subquotient().numerator
            if n + 1 <= T - 1:
                inc = tower.delta(n + 1)
                src = inc.source.homology_subquotient(m + 1)
                img = [inc[m + 1].apply(v) for v in src.numerator]
                if not spans_equal(sq.ambient, ker, img):
                    return False
    return True


# ---------------------------------------------------------------------------
# castle


@dataclass
class CastleStage:
    n: int
    At: ChainComplex  # At_n
    alpha: ChainMap  # At_n -> A
    gamma: ChainMap  # N_n -> At_n, degree 1
    step: ChainMap | None = None  # At_n -> At_{n+1}
    sigma: ChainMap | None = None  # At_{n+1} -> P_n
    kappa: ChainMap | None = None  # P_n -> At_n, degree 1


class PhantomCastle:
    def __init__(self, tower: PhantomTower):
        self.tower = tower
        self.ring = tower.ring
        self.stages = {}
        for n in range(tower.depth + 1):
            self._stage(n)
        for n in range(tower.depth):
            self._connect(n)

    @property
    def depth(self):
        return self.tower.depth

    def At(self, n) -> ChainComplex:
        if n <= 0:
            return ChainComplex.zero(self.ring)
        return self.stages[n].At

    def _stage(self, n):
        t, ring = self.tower, self.ring
        A = t.base
        if n == 0:
            Z = ChainComplex.zero(ring)
            self.stages[0] = CastleStage(0, Z, ChainMap.zero(Z, A), ChainMap.zero(A, Z, 1))
            return
        N = t.N(n)
        io = t.iota(0, n)
        degs = sorted(set(A.degrees()) | {k - 1 for k in N.degrees()})
        ranks = {k: A.rank(k) + N.rank(k + 1) for k in degs}
        diffs = {}
        for k in degs:
            if ranks.get(k - 1):
                diffs[k] = block_matrix(ring, [A.rank(k - 1), N.rank(k)], [A.rank(k), N.rank(k + 1)],
                                        {(0, 0): A.d(k), (1, 0): -io[k], (1, 1): -N.d(k + 1)})
        At = ChainComplex(ring, ranks, diffs, check=False)
        alpha, gamma = {}, {}
        for k in degs:
            if A.rank(k):
                alpha[k] = block_matrix(ring, [A.rank(k)], [A.rank(k), N.rank(k + 1)],
                                        {(0, 0): -RMatrix.identity(ring, A.rank(k))})
        for k in N.degrees():
            if At.rank(k - 1):
                gamma[k] = block_matrix(ring, [A.rank(k - 1), N.rank(k)], [N.rank(k)],
                                        {(1, 0): RMatrix.identity(ring, N.rank(k))})
        self.stages[n] = CastleStage(n, At, ChainMap(At, A, alpha, 0), ChainMap(N, At, gamma, 1))

    def _connect(self, n):
        """alpha_n^{n+1}, sigma_n and kappa_n between stages n and n+1."""
        t, ring = self.tower, self.ring
        A = t.base
        S0, S1 = self.stages[n], self.stages[n + 1]
        P, N = t.P(n), t.N(n)
        At0, At1 = S0.At, S1.At
        # At_{n+1,k} = A_k + P_{n,k} + N_{n,k+1}
        sigma = {}
        for k in P.degrees():
            sigma[k] = block_matrix(ring, [P.rank(k)], [A.rank(k), P.rank(k), N.rank(k + 1)],
                                    {(0, 1): RMatrix.identity(ring, P.rank(k))})
        if n == 0:
            step = ChainMap.zero(At0, At1)
            kappa = ChainMap.zero(P, At0, 1)
        else:
            io = t.iota(n, n + 1)
            comps = {}
            for k in At0.degrees():
                if At1.rank(k):
                    comps[k] = block_matrix(ring, [A.rank(k), t.N(n + 1).rank(k + 1)],
                                            [A.rank(k), N.rank(k + 1)],
                                            {(0, 0): RMatrix.identity(ring, A.rank(k)),
                                             (1, 1): io[k + 1]})
            step = ChainMap(At0, At1, comps, 0, check=False)
            pi = t.pi(n)
            kc = {}
            for k in P.degrees():
                if At0.rank(k - 1):
                    kc[k] = block_matrix(ring, [A.rank(k - 1), N.rank(k)], [P.rank(k)],
                                         {(1, 0): pi[k]})
            kappa = ChainMap(P, At0, kc, 1, check=False)
        S0.step = step
        S0.sigma = ChainMap(At1, P, sigma, 0, check=False)
        S0.kappa = kappa

    # the three triangles of each stage
    def triangle_AAN(self, n) -> Triangle:
        S = self.stages[n]
        return Triangle(S.alpha, self.tower.iota(0, n), S.gamma, f"approx {n}")

    def triangle_AAP(self, n) -> Triangle:
        S = self.stages[n]
        return Triangle(S.step, S.sigma, S.kappa, f"cellular {n}")

    def pullback_maps(self, n):
        """N_n[-1] -> At_{n+1} -> A + P_n -> N_n."""
        t, ring = self.tower, self.ring
        A, P, N = t.base, t.P(n), t.N(n)
        At1 = self.stages[n + 1].At
        Nm = N.shift(-1)
        comps = {}
        for k in Nm.degrees():
            if At1.rank(k):
                comps[k] = block_matrix(ring, [A.rank(k), P.rank(k), N.rank(k + 1)], [N.rank(k + 1)],
                                        {(2, 0): RMatrix.identity(ring, N.rank(k + 1))})
        first = ChainMap(Nm, At1, comps, 0)
        middle = map_into_sum([self.stages[n + 1].alpha, self.stages[n].sigma])
        last = map_from_sum([t.iota(0, n), -t.pi(n)])
        return first, middle, last.retarget(target=Nm, degree=1)

    def triangle_pullback(self, n) -> Triangle:
        u, v, w = self.pullback_maps(n)
        return Triangle(u, v, w, f"pullback {n}")

    def relations(self, n) -> dict:
        """(lhs, rhs) pairs of the commuting diagram around stage n."""
        t = self.tower
        S0, S1 = self.stages[n], self.stages[n + 1]
        return {
            "gamma_iota": (S1.gamma.after(t.iota(n, n + 1)), S0.step.after(S0.gamma)),
            "sigma_gamma": (S0.sigma.after(S1.gamma), t.eps(n)),
            "alpha_step": (S1.alpha.after(S0.step), S0.alpha),
            "iota_alpha": (t.iota(0, n).after(S1.alpha), t.pi(n).after(S0.sigma)),
            "kappa": (S0.kappa, S0.gamma.after(t.pi(n))),
            "iota_composite": (t.iota(0, n + 1), t.iota(n, n + 1).after(t.iota(0, n))),
        }

    def certify_stage(self, n) -> dict:
        out = {f"exact:approx{n}": is_exact(self.triangle_AAN(n)) is not None}
        if n < self.depth:
            out[f"exact:cellular{n}"] = is_exact(self.triangle_AAP(n)) is not None
            out[f"exact:pullback{n}"] = is_exact(self.triangle_pullback(n)) is not None
            for name, (lhs, rhs) in self.relations(n).items():
                out[f"commutes:{name}{n}"] = homotopic(lhs, rhs) is not None
        return out

    def certify(self, power_projective: bool = True) -> dict:
        out = {}
        for n in range(self.depth + 1):
            out.update(self.certify_stage(n))
            if power_projective:
                out[f"power_projective:At{n}"] = approximation_in_power_class(self.At(n), n)
        return out


def build_castle(tower: PhantomTower) -> PhantomCastle:
    return PhantomCastle(tower)


def in_power_projective_class(X: ChainComplex, k: int) -> bool:
    """X is projective for the k-th power: the k-fold composite of its own tower is null."""
    if k == 0:
        return X.is_acyclic()
    tw = build_tower(X, k)
    return is_null_homotopic(tw.iota(0, k))


def approximation_in_power_class(X: ChainComplex, n: int) -> bool:
    if n == 0:
        return X.is_zero_object()
    return in_power_projective_class(X, n)


# ---------------------------------------------------------------------------
# sparse towers


@dataclass
class SparseTower:
    base: ChainComplex
    stride: int
    objects: list  # N_0, N_k, N_2k, ...
    maps: list  # iota_{jk}^{jk+k}
    blocks: list  # cone(iota)[-1] for each step, the I^k-projective pieces
    source: PhantomTower

    def certify(self) -> dict:
        out = {}
        for j, Q in enumerate(self.blocks):
            out[f"block_power_projective:{j}"] = in_power_projective_class(Q, self.stride)
        for j, f in enumerate(self.maps):
            out[f"power:{j}"] = in_power(f, self.stride, build_tower(f.source, self.stride)) is not None
        return out


def sparse_tower(tower: PhantomTower, k: int) -> SparseTower:
    if k < 1:
        raise ValueError("stride must be at least 1")
    steps = tower.depth // k
    if steps < 1:
        raise DepthExceeded(f"stride {k} exceeds tower depth {tower.depth}")
    objs = [tower.N(j * k) for j in range(steps + 1)]
    maps = [tower.iota(j * k, (j + 1) * k) for j in range(steps)]
    blocks = [cone(f).complex.shift(-1) for f in maps]
    return SparseTower(tower.base, k, objs, maps, blocks, tower)


# ---------------------------------------------------------------------------
# lifting morphisms


@dataclass
class TowerMorphism:
    f: ChainMap
    Pf: list
    Nf: list  # Nf[0] = f
    homotopies: list  # h_n with N_n(f) pi - pi' P_n(f) = d h + h d

    def certify(self, src: PhantomTower, tgt: PhantomTower) -> dict:
        out = {}
        for n, Pf in enumerate(self.Pf):
            lhs = self.Nf[n].after(src.pi(n))
            rhs = tgt.pi(n).after(Pf)
            out[f"pi_square{n}"] = homotopic(lhs, rhs) is not None
            out[f"iota_square{n}"] = homotopic(tgt.iota(n, n + 1).after(self.Nf[n]),
                                               self.Nf[n + 1].after(src.iota(n, n + 1))) is not None
            out[f"eps_square{n}"] = homotopic(tgt.eps(n).after(self.Nf[n + 1]),
                                              Pf.after(src.eps(n))) is not None
        return out


def lift_morphism(f: ChainMap, src: PhantomTower, tgt: PhantomTower, *,
                  rng: random.Random | None = None) -> TowerMorphism:
    """Lift f: A -> A' stagewise; with ``rng`` random homogeneous solutions are added."""
    if f.degree != 0:
        raise ValueError("tower lifts need a degree-0 map")
    depth = min(src.depth, tgt.depth)
    ring = f.ring
    Nf = [f]
    Pfs, hs = [], []
    for n in range(depth):
        P, P2 = src.P(n), tgt.P(n)
        target = Nf[n].after(src.pi(n))
        res = solve_factorization(target, P, P2, left=tgt.pi(n), want_all=rng is not None)
        if res is None:
            raise CertificateFailure(f"stage {n} of the lift has no solution")
        if rng is not None:
            (Pf, H), hom = res
            for X, K in hom:
                c = ring.random_element(rng, 5)
                Pf = Pf + X.scale(c)
                H = Homotopy(H.source, H.target, 0,
                             {k: H[k] + K[k].scale(c) for k in set(H.components) | set(K.components)})
        else:
            Pf, H = res
        # N_{n+1}(f)(p, y) = (P(f) p, N(f) y - H p), where pi' P(f) - N(f) pi = d H
        C, C2 = src.N(n + 1), tgt.N(n + 1)
        N, N2 = src.N(n), tgt.N(n)
        comps = {}
        for k in C.degrees():
            if C2.rank(k):
                comps[k] = block_matrix(ring, [P2.rank(k - 1), N2.rank(k)], [P.rank(k - 1), N.rank(k)],
                                        {(0, 0): Pf[k - 1], (1, 0): -H[k - 1], (1, 1): Nf[n][k]})
        Nf.append(ChainMap(C, C2, comps, 0))
        Pfs.append(Pf)
        hs.append(H)
    return TowerMorphism(f, Pfs, Nf, hs)
