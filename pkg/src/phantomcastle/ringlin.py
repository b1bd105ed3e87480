"""Exact linear algebra over the supported coefficient rings.

Four rings are supported, all quotients of a Euclidean domain:

* ``Integers()`` with Python integers,
* ``IntegersMod(m)`` with residues in ``[0, m)``,
* ``PrimeField(p)``,
* ``TruncatedPoly(p, k)`` = F_p[x]/(x^k), elements are coefficient tuples
  (constant term first, trailing zeros stripped, length at most ``k``).

Everything else in the package reduces to :func:`snf`, :func:`solve` and
:func:`kernel_basis`.  The elimination works on sparse rows (dicts keyed by
column) and runs the Euclidean algorithm on canonical representatives, so
the same code serves every ring.

>>> Z = Integers()
>>> snf(RMatrix.from_rows(Z, [[2, 4], [6, 8]])).invariant_factors
[2, 4]
>>> solve(RMatrix.from_rows(Z, [[2]]), [3]) is None
True
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Iterator, Sequence

from .errors import DimensionMismatch, RingMismatch, UnsupportedRing


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


# ---------------------------------------------------------------------------
# rings


class CoefficientRing:
    """Common interface; concrete rings override the arithmetic."""

    kind = "abstract"
    is_finite = False
    is_field = False
    integral = True  # elements are Python ints
    modulus = 0  # 0 for the integers

    zero = 0
    one = 1

    def descriptor(self) -> dict:
        raise NotImplementedError

    def __eq__(self, other):
        return isinstance(other, CoefficientRing) and self.descriptor() == other.descriptor()

    def __hash__(self):
        return hash(tuple(sorted(self.descriptor().items())))

    def __repr__(self):
        return self.name()

    def name(self) -> str:
        raise NotImplementedError

    # integer-backed rings share these
    def coerce(self, x):
        if isinstance(x, bool) or not isinstance(x, int):
            raise TypeError(f"{self.name()} entries must be integers, got {x!r}")
        return x % self.modulus if self.modulus else x

    def add(self, a, b):
        return (a + b) % self.modulus if self.modulus else a + b

    def sub(self, a, b):
        return (a - b) % self.modulus if self.modulus else a - b

    def neg(self, a):
        return (-a) % self.modulus if self.modulus else -a

    def mul(self, a, b):
        return (a * b) % self.modulus if self.modulus else a * b

    def is_zero(self, a) -> bool:
        return a == self.zero

    def to_json(self, a):
        return a

    def from_json(self, x):
        return self.coerce(x)

    def fmt(self, a) -> str:
        return str(a)

    def elements(self) -> Iterator:
        raise UnsupportedRing(f"{self.name()} is infinite")

    def size(self) -> int:
        raise UnsupportedRing(f"{self.name()} is infinite")

    def quotient_size(self, d) -> int:
        """Number of elements of R/(d) (finite rings only, or d a unit)."""
        raise NotImplementedError


class Integers(CoefficientRing):
    kind = "Integers"

    def descriptor(self):
        return {"kind": "Integers"}

    def name(self):
        return "Integers"

    def norm(self, a):
        return abs(a)

    def divmod(self, a, b):
        q = a // b
        return q, a - q * b

    def is_unit(self, a):
        return a in (1, -1)

    def associate(self, a):
        return abs(a)

    def unit_to_associate(self, a):
        return -1 if a < 0 else 1

    def inverse(self, a):
        if a not in (1, -1):
            raise ZeroDivisionError(f"{a} is not a unit")
        return a

    def exact_div(self, b, a):
        if a == 0:
            return 0 if b == 0 else None
        q, r = divmod(b, a)
        return q if r == 0 else None

    def annihilator(self, a):
        return 1 if a == 0 else 0

    def random_element(self, rng: random.Random, bound: int = 50):
        return rng.randint(-bound, bound)

    def quotient_size(self, d):
        if d == 0:
            raise UnsupportedRing("Z/(0) is infinite")
        return abs(d)


class IntegersMod(CoefficientRing):
    kind = "IntegersMod"
    is_finite = True

    def __init__(self, m: int):
        if isinstance(m, bool) or not isinstance(m, int) or m < 2:
            raise UnsupportedRing(f"modulus must be an integer >= 2, got {m!r}")
        self.modulus = m

    def descriptor(self):
        return {"kind": "IntegersMod", "m": self.modulus}

    def name(self):
        return f"IntegersMod({self.modulus})"

    def norm(self, a):
        return a

    def divmod(self, a, b):
        q = a // b
        return q, a - q * b

    def is_unit(self, a):
        return math.gcd(a, self.modulus) == 1

    def associate(self, a):
        return math.gcd(a, self.modulus) % self.modulus

    def unit_to_associate(self, a):
        """A unit u with u*a equal to ``associate(a)``."""
        m = self.modulus
        g = math.gcd(a, m)
        if a == 0 or g == m:
            return 1
        mp = m // g
        s = pow(a // g, -1, mp) if mp > 1 else 0
        u = s
        while math.gcd(u, m) != 1:
            u += mp
        return u % m

    def inverse(self, a):
        return pow(a, -1, self.modulus)

    def exact_div(self, b, a):
        m = self.modulus
        g = math.gcd(a, m)
        if b % g:
            return None
        if a == 0:
            return 0
        # s*a + t*m = g
        s = pow(a // g, -1, m // g) if m // g > 1 else 0
        return (s * (b // g)) % m

    def annihilator(self, a):
        return (self.modulus // math.gcd(a, self.modulus)) % self.modulus

    def elements(self):
        return iter(range(self.modulus))

    def size(self):
        return self.modulus

    def random_element(self, rng: random.Random, bound: int = 50):
        return rng.randrange(self.modulus)

    def quotient_size(self, d):
        return math.gcd(d, self.modulus)


class PrimeField(IntegersMod):
    kind = "PrimeField"
    is_field = True

    def __init__(self, p: int):
        if isinstance(p, bool) or not isinstance(p, int) or not _is_prime(p):
            raise UnsupportedRing(f"PrimeField needs a prime, got {p!r}")
        self.modulus = p

    def descriptor(self):
        return {"kind": "PrimeField", "p": self.modulus}

    def name(self):
        return f"PrimeField({self.modulus})"

    def unit_to_associate(self, a):
        return pow(a, -1, self.modulus) if a else 1


def _poly_trim(c) -> tuple:
    c = list(c)
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


class TruncatedPoly(CoefficientRing):
    """F_p[x]/(x^k)."""

    kind = "TruncatedPoly"
    is_finite = True
    integral = False
    zero = ()

    def __init__(self, p: int, k: int):
        if isinstance(p, bool) or not isinstance(p, int) or not _is_prime(p):
            raise UnsupportedRing(f"TruncatedPoly needs a prime p, got {p!r}")
        if isinstance(k, bool) or not isinstance(k, int) or k < 1:
            raise UnsupportedRing(f"TruncatedPoly needs k >= 1, got {k!r}")
        self.p = p
        self.k = k
        self.one = (1,)
        self.modulus = None

    def descriptor(self):
        return {"kind": "TruncatedPoly", "p": self.p, "k": self.k}

    def name(self):
        return f"TruncatedPoly({self.p},{self.k})"

    def coerce(self, x):
        if isinstance(x, bool):
            raise TypeError(f"bad polynomial entry {x!r}")
        if isinstance(x, int):
            x = [x]
        if not isinstance(x, (list, tuple)):
            raise TypeError(f"polynomial entries are coefficient lists, got {x!r}")
        coeffs = [int(c) % self.p for c in list(x)[: self.k]]
        return _poly_trim(coeffs)

    def add(self, a, b):
        p = self.p
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for i, c in enumerate(b):
            out[i] = (out[i] + c) % p
        return _poly_trim(out)

    def neg(self, a):
        p = self.p
        return tuple((-c) % p for c in a)

    def sub(self, a, b):
        return self.add(a, self.neg(b))

    def mul(self, a, b):
        if not a or not b:
            return ()
        p, k = self.p, self.k
        out = [0] * min(k, len(a) + len(b) - 1)
        n = len(out)
        for i, x in enumerate(a):
            if x == 0:
                continue
            for j, y in enumerate(b):
                if i + j >= n:
                    break
                out[i + j] = (out[i + j] + x * y) % p
        return _poly_trim(out)

    def is_zero(self, a):
        return not a

    def valuation(self, a) -> int:
        for i, c in enumerate(a):
            if c:
                return i
        return self.k

    def norm(self, a):
        # degree first, then lexicographic from the leading coefficient
        return (len(a), tuple(reversed(a)))

    def divmod(self, a, b):
        """Division with remainder in F_p[x] on representatives."""
        p = self.p
        r = list(a)
        db = len(b) - 1
        inv = pow(b[-1], -1, p)
        q = [0] * max(0, len(a) - db)
        while len(r) - 1 >= db and r:
            shift = len(r) - 1 - db
            c = (r[-1] * inv) % p
            q[shift] = c
            for i, y in enumerate(b):
                r[i + shift] = (r[i + shift] - c * y) % p
            r = list(_poly_trim(r))
        return _poly_trim(q), _poly_trim(r)

    def is_unit(self, a):
        return bool(a) and a[0] != 0

    def inverse(self, a):
        """Power-series inverse of a unit, truncated at x^k."""
        if not self.is_unit(a):
            raise ZeroDivisionError(f"{a} is not a unit")
        p, k = self.p, self.k
        inv0 = pow(a[0], -1, p)
        out = [0] * k
        out[0] = inv0
        for n in range(1, k):
            s = 0
            for i in range(1, min(n, len(a) - 1) + 1):
                s += a[i] * out[n - i]
            out[n] = (-s * inv0) % p
        return _poly_trim(out)

    def associate(self, a):
        v = self.valuation(a)
        if v >= self.k:
            return ()
        return tuple([0] * v + [1])

    def unit_to_associate(self, a):
        v = self.valuation(a)
        if v >= self.k:
            return self.one
        return self.inverse(a[v:])

    def exact_div(self, b, a):
        va, vb = self.valuation(a), self.valuation(b)
        if not b:
            return ()
        if vb < va:
            return None
        unit = a[va:]
        # unit is invertible mod x^(k - va); lift via the full inverse
        inv = self.inverse(unit) if unit[0] else None
        shifted = b[va:]
        return self.mul(shifted, inv)

    def annihilator(self, a):
        v = self.valuation(a)
        if v == 0:
            return ()
        if v >= self.k:
            return self.one
        return tuple([0] * (self.k - v) + [1])

    def to_json(self, a):
        return list(a)

    def from_json(self, x):
        return self.coerce(x)

    def fmt(self, a):
        if not a:
            return "0"
        terms = []
        for i, c in enumerate(a):
            if c == 0:
                continue
            if i == 0:
                terms.append(str(c))
            else:
                mon = "x" if i == 1 else f"x^{i}"
                terms.append(mon if c == 1 else f"{c}{mon}")
        return "+".join(terms)

    def elements(self):
        for coeffs in product(range(self.p), repeat=self.k):
            yield _poly_trim(coeffs)

    def size(self):
        return self.p ** self.k

    def random_element(self, rng: random.Random, bound: int = 50):
        return _poly_trim(rng.randrange(self.p) for _ in range(self.k))

    def quotient_size(self, d):
        return self.p ** min(self.valuation(d), self.k)


def ring_from_descriptor(desc) -> CoefficientRing:
    """Build a ring from a dict like ``{"kind": "IntegersMod", "m": 4}``."""
    if isinstance(desc, CoefficientRing):
        return desc
    if not isinstance(desc, dict) or "kind" not in desc:
        raise UnsupportedRing(f"bad ring descriptor {desc!r}")
    kind = desc["kind"]
    if kind == "Integers":
        return Integers()
    if kind == "IntegersMod":
        return IntegersMod(desc.get("m"))
    if kind == "PrimeField":
        return PrimeField(desc.get("p"))
    if kind == "TruncatedPoly":
        return TruncatedPoly(desc.get("p"), desc.get("k"))
    raise UnsupportedRing(f"unknown ring kind {kind!r}")


def _check_ring(ring):
    if not isinstance(ring, (Integers, IntegersMod, TruncatedPoly)):
        raise UnsupportedRing(f"unsupported ring {ring!r}")


# ---------------------------------------------------------------------------
# dense matrices


class RMatrix:
    """Dense immutable matrix over a coefficient ring, stored row-major."""

    __slots__ = ("ring", "rows", "cols", "data")

    def __init__(self, ring: CoefficientRing, rows: int, cols: int, data=None, *, _trusted=False):
        self.ring = ring
        self.rows = rows
        self.cols = cols
        if data is None:
            z = ring.zero
            data = [[z] * cols for _ in range(rows)]
        elif not _trusted:
            if len(data) != rows or any(len(r) != cols for r in data):
                raise DimensionMismatch(f"expected {rows}x{cols} entries")
            data = [[ring.coerce(x) for x in r] for r in data]
        self.data = data

    # constructors
    @classmethod
    def from_rows(cls, ring, rows: Sequence[Sequence]) -> "RMatrix":
        rows = [list(r) for r in rows]
        ncols = len(rows[0]) if rows else 0
        return cls(ring, len(rows), ncols, rows)

    @classmethod
    def from_flat(cls, ring, rows: int, cols: int, entries: Sequence) -> "RMatrix":
        entries = list(entries)
        if len(entries) != rows * cols:
            raise DimensionMismatch(
                f"{rows}x{cols} matrix needs {rows * cols} entries, got {len(entries)}")
        return cls(ring, rows, cols, [entries[i * cols:(i + 1) * cols] for i in range(rows)])

    @classmethod
    def from_columns(cls, ring, columns: Sequence[Sequence], nrows: int) -> "RMatrix":
        columns = [list(c) for c in columns]
        for c in columns:
            if len(c) != nrows:
                raise DimensionMismatch("column length does not match row count")
        data = [[c[i] for c in columns] for i in range(nrows)]
        return cls(ring, nrows, len(columns), data)

    @classmethod
    def zeros(cls, ring, rows: int, cols: int) -> "RMatrix":
        return cls(ring, rows, cols)

    @classmethod
    def identity(cls, ring, n: int) -> "RMatrix":
        m = cls(ring, n, n)
        for i in range(n):
            m.data[i][i] = ring.one
        return m

    @classmethod
    def diagonal(cls, ring, entries: Sequence) -> "RMatrix":
        n = len(entries)
        m = cls(ring, n, n)
        for i, e in enumerate(entries):
            m.data[i][i] = ring.coerce(e)
        return m

    # accessors
    @property
    def shape(self):
        return (self.rows, self.cols)

    def __getitem__(self, ij):
        i, j = ij
        return self.data[i][j]

    def row(self, i) -> list:
        return list(self.data[i])

    def column(self, j) -> list:
        return [r[j] for r in self.data]

    def columns(self) -> list:
        return [[r[j] for r in self.data] for j in range(self.cols)]

    def flat(self) -> list:
        return [x for r in self.data for x in r]

    def to_json(self) -> dict:
        to = self.ring.to_json
        return {"rows": self.rows, "cols": self.cols,
                "entries": [to(x) for r in self.data for x in r]}

    def sparse_rows(self) -> list:
        z = self.ring.zero
        return [{j: x for j, x in enumerate(r) if x != z} for r in self.data]

    def is_zero(self) -> bool:
        z = self.ring.zero
        return all(x == z for r in self.data for x in r)

    def __eq__(self, other):
        return (isinstance(other, RMatrix) and self.ring == other.ring
                and self.shape == other.shape and self.data == other.data)

    def __hash__(self):
        return hash((self.rows, self.cols, tuple(tuple(r) for r in self.data)))

    def __repr__(self):
        body = "; ".join(" ".join(self.ring.fmt(x) for x in r) for r in self.data)
        return f"RMatrix({self.rows}x{self.cols} over {self.ring.name()}: [{body}])"

    # arithmetic
    def _same(self, other):
        if self.ring != other.ring:
            raise RingMismatch(f"{self.ring} vs {other.ring}")
        if self.shape != other.shape:
            raise DimensionMismatch(f"{self.shape} vs {other.shape}")

    def __add__(self, other):
        self._same(other)
        add = self.ring.add
        return RMatrix(self.ring, self.rows, self.cols,
                       [[add(x, y) for x, y in zip(r, s)] for r, s in zip(self.data, other.data)],
                       _trusted=True)

    def __sub__(self, other):
        self._same(other)
        sub = self.ring.sub
        return RMatrix(self.ring, self.rows, self.cols,
                       [[sub(x, y) for x, y in zip(r, s)] for r, s in zip(self.data, other.data)],
                       _trusted=True)

    def __neg__(self):
        neg = self.ring.neg
        return RMatrix(self.ring, self.rows, self.cols,
                       [[neg(x) for x in r] for r in self.data], _trusted=True)

    def scale(self, c) -> "RMatrix":
        ring = self.ring
        c = ring.coerce(c)
        mul = ring.mul
        return RMatrix(ring, self.rows, self.cols,
                       [[mul(c, x) for x in r] for r in self.data], _trusted=True)

    def __matmul__(self, other) -> "RMatrix":
        if self.ring != other.ring:
            raise RingMismatch(f"{self.ring} vs {other.ring}")
        if self.cols != other.rows:
            raise DimensionMismatch(f"cannot multiply {self.shape} by {other.shape}")
        ring = self.ring
        n, m = self.rows, other.cols
        if ring.integral:
            mod = ring.modulus
            ocols = list(zip(*other.data)) if other.rows else [()] * m
            out = []
            for r in self.data:
                nz = [(k, x) for k, x in enumerate(r) if x]
                row = []
                for col in ocols:
                    s = 0
                    for k, x in nz:
                        y = col[k]
                        if y:
                            s += x * y
                    row.append(s % mod if mod else s)
                out.append(row)
            return RMatrix(ring, n, m, out, _trusted=True)
        add, mul, zero = ring.add, ring.mul, ring.zero
        out = []
        for r in self.data:
            nz = [(k, x) for k, x in enumerate(r) if x != zero]
            row = []
            for j in range(m):
                s = zero
                for k, x in nz:
                    y = other.data[k][j]
                    if y != zero:
                        s = add(s, mul(x, y))
                row.append(s)
            out.append(row)
        return RMatrix(ring, n, m, out, _trusted=True)

    def apply(self, v: Sequence) -> list:
        """Matrix times column vector (given as a list)."""
        if len(v) != self.cols:
            raise DimensionMismatch(f"vector of length {len(v)} for {self.shape} matrix")
        ring = self.ring
        if ring.integral:
            mod = ring.modulus
            out = []
            for r in self.data:
                s = 0
                for x, y in zip(r, v):
                    if x and y:
                        s += x * y
                out.append(s % mod if mod else s)
            return out
        add, mul, zero = ring.add, ring.mul, ring.zero
        out = []
        for r in self.data:
            s = zero
            for x, y in zip(r, v):
                if x != zero and y != zero:
                    s = add(s, mul(x, y))
            out.append(s)
        return out

    def transpose(self) -> "RMatrix":
        return RMatrix(self.ring, self.cols, self.rows,
                       [list(c) for c in zip(*self.data)] if self.rows else
                       [[] for _ in range(self.cols)], _trusted=True)

    def submatrix(self, rows: Iterable[int], cols: Iterable[int]) -> "RMatrix":
        rows, cols = list(rows), list(cols)
        return RMatrix(self.ring, len(rows), len(cols),
                       [[self.data[i][j] for j in cols] for i in rows], _trusted=True)

    def select_columns(self, cols: Iterable[int]) -> "RMatrix":
        return self.submatrix(range(self.rows), cols)

    def hstack(self, *others) -> "RMatrix":
        mats = [self, *others]
        for m in others:
            if m.ring != self.ring:
                raise RingMismatch("hstack over different rings")
            if m.rows != self.rows:
                raise DimensionMismatch("hstack needs equal row counts")
        data = [sum((list(m.data[i]) for m in mats), []) for i in range(self.rows)]
        return RMatrix(self.ring, self.rows, sum(m.cols for m in mats), data, _trusted=True)

    def vstack(self, *others) -> "RMatrix":
        mats = [self, *others]
        for m in others:
            if m.ring != self.ring:
                raise RingMismatch("vstack over different rings")
            if m.cols != self.cols:
                raise DimensionMismatch("vstack needs equal column counts")
        data = [list(r) for m in mats for r in m.data]
        return RMatrix(self.ring, len(data), self.cols, data, _trusted=True)

    def kron(self, other) -> "RMatrix":
        ring = self.ring
        mul = ring.mul
        rows = self.rows * other.rows
        cols = self.cols * other.cols
        out = RMatrix(ring, rows, cols)
        for i, r in enumerate(self.data):
            for j, x in enumerate(r):
                if ring.is_zero(x):
                    continue
                for k, s in enumerate(other.data):
                    row = out.data[i * other.rows + k]
                    for l, y in enumerate(s):
                        if not ring.is_zero(y):
                            row[j * other.cols + l] = mul(x, y)
        return out


def block_diag(ring, blocks: Sequence[RMatrix]) -> RMatrix:
    rows = sum(b.rows for b in blocks)
    cols = sum(b.cols for b in blocks)
    out = RMatrix(ring, rows, cols)
    r0 = c0 = 0
    for b in blocks:
        for i in range(b.rows):
            out.data[r0 + i][c0:c0 + b.cols] = list(b.data[i])
        r0 += b.rows
        c0 += b.cols
    return out


def block_matrix(ring, row_sizes: Sequence[int], col_sizes: Sequence[int], blocks: dict) -> RMatrix:
    """Assemble a matrix from blocks keyed by (block_row, block_col)."""
    out = RMatrix(ring, sum(row_sizes), sum(col_sizes))
    roff = [sum(row_sizes[:i]) for i in range(len(row_sizes))]
    coff = [sum(col_sizes[:j]) for j in range(len(col_sizes))]
    for (bi, bj), b in blocks.items():
        if b is None:
            continue
        if b.shape != (row_sizes[bi], col_sizes[bj]):
            raise DimensionMismatch(
                f"block ({bi},{bj}) has shape {b.shape}, expected {(row_sizes[bi], col_sizes[bj])}")
        for i in range(b.rows):
            out.data[roff[bi] + i][coff[bj]:coff[bj] + b.cols] = list(b.data[i])
    return out


# ---------------------------------------------------------------------------
# sparse Euclidean elimination


class _Eliminator:
    """Smith-form elimination on sparse rows with optional bookkeeping.

    After :meth:`run`, ``pivots`` lists ``(row, col, value)`` such that
    U*A*V has exactly these nonzero entries, the values forming a divisibility
    chain.  ``U`` is tracked as sparse rows, ``V`` as sparse columns, and
    right-hand sides are carried through the row operations.
    """

    def __init__(self, ring, nrows, ncols, rows, *, track_u=False, track_uinv=False,
                 track_v=False, track_vinv=False, rhs=None, normalize=True):
        self.ring = ring
        self.nrows = nrows
        self.ncols = ncols
        self.A = [dict(r) for r in rows]
        self.colidx = [set() for _ in range(ncols)]
        for i, r in enumerate(self.A):
            for j in r:
                self.colidx[j].add(i)
        one = ring.one
        self.U = [{i: one} for i in range(nrows)] if track_u else None
        self.Uinv = [{i: one} for i in range(nrows)] if track_uinv else None  # columns
        self.V = [{j: one} for j in range(ncols)] if track_v else None  # columns
        self.Vinv = [{j: one} for j in range(ncols)] if track_vinv else None  # rows
        self.rhs = rhs  # list of per-row lists
        self.normalize = normalize
        self.pivots = []

    # vector helpers on dicts
    def _axpy(self, target: dict, source: dict, q):
        """target += q*source (in place)."""
        ring = self.ring
        if ring.integral:
            mod = ring.modulus
            for j, y in source.items():
                v = target.get(j, 0) + q * y
                if mod:
                    v %= mod
                if v:
                    target[j] = v
                else:
                    target.pop(j, None)
            return
        add, mul, zero = ring.add, ring.mul, ring.zero
        for j, y in source.items():
            v = add(target.get(j, zero), mul(q, y))
            if v != zero:
                target[j] = v
            else:
                target.pop(j, None)

    def _row_op(self, i, r, q):
        """row_i += q * row_r."""
        ring = self.ring
        if ring.is_zero(q):
            return
        Ai, Ar = self.A[i], self.A[r]
        before = set(Ai)
        self._axpy(Ai, Ar, q)
        after = set(Ai)
        for j in before - after:
            self.colidx[j].discard(i)
        for j in after - before:
            self.colidx[j].add(i)
        if self.U is not None:
            self._axpy(self.U[i], self.U[r], q)
        if self.Uinv is not None:
            self._axpy(self.Uinv[r], self.Uinv[i], ring.neg(q))
        if self.rhs is not None:
            ri, rr = self.rhs[i], self.rhs[r]
            add, mul = ring.add, ring.mul
            for k in range(len(ri)):
                if not ring.is_zero(rr[k]):
                    ri[k] = add(ri[k], mul(q, rr[k]))

    def _col_op(self, j, c, q):
        """col_j += q * col_c."""
        ring = self.ring
        if ring.is_zero(q):
            return
        add, mul, zero = ring.add, ring.mul, ring.zero
        for i in list(self.colidx[c]):
            row = self.A[i]
            v = add(row.get(j, zero), mul(q, row[c]))
            if v != zero:
                if j not in row:
                    self.colidx[j].add(i)
                row[j] = v
            elif j in row:
                del row[j]
                self.colidx[j].discard(i)
        if self.V is not None:
            self._axpy(self.V[j], self.V[c], q)
        if self.Vinv is not None:
            self._axpy(self.Vinv[c], self.Vinv[j], ring.neg(q))

    def _scale_row(self, r, u):
        ring = self.ring
        mul = ring.mul
        row = self.A[r]
        for j in list(row):
            row[j] = mul(u, row[j])
        if self.U is not None:
            ur = self.U[r]
            for j in list(ur):
                ur[j] = mul(u, ur[j])
        if self.Uinv is not None:
            inv = ring.inverse(u)
            col = self.Uinv[r]
            for j in list(col):
                col[j] = mul(inv, col[j])
        if self.rhs is not None:
            rr = self.rhs[r]
            for k in range(len(rr)):
                rr[k] = mul(u, rr[k])

    def run(self):
        ring = self.ring
        norm, dm = ring.norm, ring.divmod
        active_rows = set(range(self.nrows))
        active_cols = set(range(self.ncols))
        A = self.A
        while True:
            best = None
            for i in sorted(active_rows):
                for j, x in A[i].items():
                    key = (norm(x), i, j)
                    if best is None or key < best:
                        best = key
            if best is None:
                break
            _, r, c = best
            while True:
                a = A[r][c]
                for i in sorted(self.colidx[c] - {r}):
                    q, _ = dm(A[i][c], a)
                    self._row_op(i, r, ring.neg(q))
                rest = self.colidx[c] - {r}
                if rest:
                    _, r, c = min((norm(A[i][c]), i, c) for i in rest)
                    continue
                for j in sorted(set(A[r]) - {c}):
                    q, _ = dm(A[r][j], a)
                    self._col_op(j, c, ring.neg(q))
                rest = set(A[r]) - {c}
                if rest:
                    _, r, c = min((norm(A[r][j]), r, j) for j in rest)
                    continue
                bad = None
                for i in sorted(active_rows - {r}):
                    for j in sorted(A[i]):
                        if not ring.is_zero(dm(A[i][j], a)[1]):
                            bad = i
                            break
                    if bad is not None:
                        break
                if bad is not None:
                    self._row_op(r, bad, ring.one)
                    continue
                break
            if self.normalize:
                u = ring.unit_to_associate(A[r][c])
                if u != ring.one:
                    self._scale_row(r, u)
            self.pivots.append((r, c, A[r][c]))
            active_rows.discard(r)
            active_cols.discard(c)
        return self


def _dense_from_rows(ring, rows, nrows, ncols):
    out = RMatrix(ring, nrows, ncols)
    for i, r in enumerate(rows):
        for j, x in r.items():
            out.data[i][j] = x
    return out


def _dense_from_cols(ring, cols, nrows, ncols):
    out = RMatrix(ring, nrows, ncols)
    for j, c in enumerate(cols):
        for i, x in c.items():
            out.data[i][j] = x
    return out


@dataclass(frozen=True)
class SnfDecomposition:
    """U*A*V = D with U, V invertible; ``Uinv``/``Vinv`` are their inverses."""

    U: RMatrix
    D: RMatrix
    V: RMatrix
    Uinv: RMatrix
    Vinv: RMatrix
    invariant_factors: list
    rank: int


def snf(A: RMatrix) -> SnfDecomposition:
    """Smith normal form with transforms; deterministic for fixed input."""
    ring = A.ring
    _check_ring(ring)
    n, m = A.rows, A.cols
    el = _Eliminator(ring, n, m, A.sparse_rows(), track_u=True, track_uinv=True,
                     track_v=True, track_vinv=True).run()
    prow = [r for r, _, _ in el.pivots]
    pcol = [c for _, c, _ in el.pivots]
    row_order = prow + [i for i in range(n) if i not in set(prow)]
    col_order = pcol + [j for j in range(m) if j not in set(pcol)]
    U = _dense_from_rows(ring, [el.U[i] for i in row_order], n, n)
    Uinv = _dense_from_cols(ring, [el.Uinv[i] for i in row_order], n, n)
    V = _dense_from_cols(ring, [el.V[j] for j in col_order], m, m)
    Vinv = _dense_from_rows(ring, [el.Vinv[j] for j in col_order], m, m)
    D = RMatrix(ring, n, m)
    for t, (_, _, d) in enumerate(el.pivots):
        D.data[t][t] = d
    factors = [ring.associate(d) for _, _, d in el.pivots]
    factors += [ring.zero] * (min(n, m) - len(factors))
    return SnfDecomposition(U, D, V, Uinv, Vinv, factors, len(el.pivots))


def sparse_solve(ring, nrows: int, ncols: int, rows: list, rhs_columns: list):
    """Solve A x = b for each b in ``rhs_columns`` (dense lists).

    Returns a list with one solution (dense list) or ``None`` per right-hand side.
    Free parameters of the SNF change of basis are set to zero.
    """
    _check_ring(ring)
    k = len(rhs_columns)
    for b in rhs_columns:
        if len(b) != nrows:
            raise DimensionMismatch(f"right-hand side of length {len(b)} for {nrows} rows")
    rhs = [[rhs_columns[t][i] for t in range(k)] for i in range(nrows)]
    el = _Eliminator(ring, nrows, ncols, rows, track_v=True, rhs=rhs, normalize=False).run()
    pivot_rows = {r for r, _, _ in el.pivots}
    out = []
    zero = ring.zero
    for t in range(k):
        ok = all(ring.is_zero(el.rhs[i][t]) for i in range(nrows) if i not in pivot_rows)
        if not ok:
            out.append(None)
            continue
        x = {}
        for r, c, d in el.pivots:
            y = ring.exact_div(el.rhs[r][t], d)
            if y is None:
                ok = False
                break
            if not ring.is_zero(y):
                el._axpy(x, el.V[c], y)
        if not ok:
            out.append(None)
            continue
        out.append([x.get(j, zero) for j in range(ncols)])
    return out


def sparse_kernel(ring, nrows: int, ncols: int, rows: list) -> list:
    """Module generators (dense lists) of {x : A x = 0}."""
    _check_ring(ring)
    el = _Eliminator(ring, nrows, ncols, rows, track_v=True, normalize=False).run()
    zero = ring.zero
    pivot_of = {c: d for _, c, d in el.pivots}
    gens = []
    for j in range(ncols):
        if j in pivot_of:
            a = ring.annihilator(pivot_of[j])
            if ring.is_zero(a):
                continue
            vec = {}
            el._axpy(vec, el.V[j], a)
        else:
            vec = el.V[j]
        if vec:
            gens.append([vec.get(i, zero) for i in range(ncols)])
    return gens


def solve(A: RMatrix, b: Sequence):
    """Some x with A x = b, or None."""
    b = [A.ring.coerce(x) for x in b]
    if len(b) != A.rows:
        raise DimensionMismatch(f"b has length {len(b)}, A has {A.rows} rows")
    return sparse_solve(A.ring, A.rows, A.cols, A.sparse_rows(), [b])[0]


def solve_matrix(A: RMatrix, B: RMatrix):
    """Some X with A X = B, or None if any column is unsolvable."""
    if A.ring != B.ring:
        raise RingMismatch(f"{A.ring} vs {B.ring}")
    if A.rows != B.rows:
        raise DimensionMismatch(f"A has {A.rows} rows, B has {B.rows}")
    if B.cols == 0:
        return RMatrix(A.ring, A.cols, 0)
    sols = sparse_solve(A.ring, A.rows, A.cols, A.sparse_rows(), B.columns())
    if any(s is None for s in sols):
        return None
    return RMatrix.from_columns(A.ring, sols, A.cols)


def kernel_basis(A: RMatrix) -> RMatrix:
    """Matrix whose columns generate the kernel of A as a module."""
    gens = sparse_kernel(A.ring, A.rows, A.cols, A.sparse_rows())
    return RMatrix.from_columns(A.ring, gens, A.cols)


def in_column_span(A: RMatrix, v: Sequence) -> bool:
    return solve(A, v) is not None


# ---------------------------------------------------------------------------
# block linear systems  sum_t L_t X_t R_t = C


class LinearSystem:
    """Joint linear system in matrix unknowns.

    Each equation is a matrix identity ``sum L @ X @ R = rhs``.  Unknowns and
    equations are flattened column-major, so ``vec(L X R) = (R^T kron L) vec(X)``.
    """

    def __init__(self, ring: CoefficientRing):
        self.ring = ring
        self.blocks = []  # (rows, cols, offset)
        self.nvars = 0
        self.rows = []  # sparse equation rows
        self.rhs = []

    def unknown(self, rows: int, cols: int) -> int:
        self.blocks.append((rows, cols, self.nvars))
        self.nvars += rows * cols
        return len(self.blocks) - 1

    def equation(self, terms, rhs: RMatrix | None = None, shape=None):
        """Add ``sum L X R = rhs``; a term is ``(L, block, R)`` with None meaning identity."""
        ring = self.ring
        if rhs is None:
            if shape is None:
                raise ValueError("homogeneous equations need an explicit shape")
            p, q = shape
        else:
            p, q = rhs.shape
        base = len(self.rows)
        rows = [dict() for _ in range(p * q)]
        add, mul = ring.add, ring.mul
        for L, blk, R in terms:
            r, c, off = self.blocks[blk]
            Lnz = _nonzeros(ring, L, p, r)
            Rnz = _nonzeros(ring, R, c, q)
            if Lnz is None or Rnz is None:
                continue
            for (a, i, x) in Lnz:
                for (j, b, y) in Rnz:
                    row = rows[b * p + a]
                    var = off + j * r + i
                    v = mul(x, y)
                    old = row.get(var)
                    v = v if old is None else add(old, v)
                    if ring.is_zero(v):
                        row.pop(var, None)
                    else:
                        row[var] = v
        self.rows.extend(rows)
        zero = ring.zero
        if rhs is None:
            self.rhs.extend([zero] * (p * q))
        else:
            self.rhs.extend(rhs.data[a][b] for b in range(q) for a in range(p))
        return base

    def _unpack(self, x) -> list:
        out = []
        for r, c, off in self.blocks:
            m = RMatrix(self.ring, r, c)
            for j in range(c):
                for i in range(r):
                    m.data[i][j] = x[off + j * r + i]
            out.append(m)
        return out

    def solve(self):
        """One solution (list of matrices per unknown block) or None."""
        if not self.rows:
            return self._unpack([self.ring.zero] * self.nvars)
        sol = sparse_solve(self.ring, len(self.rows), self.nvars, self.rows, [self.rhs])[0]
        return None if sol is None else self._unpack(sol)

    def homogeneous_solutions(self) -> list:
        """Generators of the solution module of the homogeneous system."""
        if not self.rows:
            return [self._unpack([self.ring.one if k == t else self.ring.zero
                                  for k in range(self.nvars)]) for t in range(self.nvars)]
        return [self._unpack(g) for g in sparse_kernel(self.ring, len(self.rows), self.nvars,
                                                       self.rows)]


def _nonzeros(ring, M, n, m):
    """(row, col, value) triples of M, with None meaning the n x n identity."""
    if M is None:
        if n != m:
            raise DimensionMismatch(f"implicit identity of shape {(n, m)}")
        return [(i, i, ring.one) for i in range(n)]
    if M.shape != (n, m):
        raise DimensionMismatch(f"term factor has shape {M.shape}, expected {(n, m)}")
    z = ring.zero
    out = [(i, j, x) for i, r in enumerate(M.data) for j, x in enumerate(r) if x != z]
    return out if out else None
