"""Phantom towers, phantom castles and ABC spectral sequences for chain complexes.

Everything is exact: complexes are finitely supported and built from free
modules over Z, Z/m, F_p or F_p[x]/(x^k), and every claim the engine makes is
backed by a certificate that can be re-checked.
"""

from .errors import (CertificateFailure, DegreeMismatch, DepthExceeded, DimensionMismatch,
                     DocumentError, EmptyTower, Incomposable, MalformedRecipe, PhantomCastleError,
                     RingMismatch, UnknownFixture, UnsupportedRing, WindowTooSmall)
from .ringlin import Integers, IntegersMod, PrimeField, RMatrix, TruncatedPoly, snf
from .fgmod import FgModule, Subquotient, SubquotientMap, cyclic, ext, free_module, tor
from .chaincx import ChainComplex, ChainMap, ho_hom, homotopic, null_homotopy
from .towers import PhantomCastle, PhantomTower, build_castle, build_tower, lift_morphism
from .couples import ExactCouple, TowerCouple, page, page_entry, stable_entry
from .abcss import AbcRun, run_abc, verify_convergence, verify_e2

__all__ = [
    "CertificateFailure", "DegreeMismatch", "DepthExceeded", "DimensionMismatch", "DocumentError",
    "EmptyTower", "Incomposable", "MalformedRecipe", "PhantomCastleError", "RingMismatch",
    "UnknownFixture", "UnsupportedRing", "WindowTooSmall",
    "Integers", "IntegersMod", "PrimeField", "RMatrix", "TruncatedPoly", "snf",
    "FgModule", "Subquotient", "SubquotientMap", "cyclic", "ext", "free_module", "tor",
    "ChainComplex", "ChainMap", "ho_hom", "homotopic", "null_homotopy",
    "PhantomCastle", "PhantomTower", "build_castle", "build_tower", "lift_morphism",
    "ExactCouple", "TowerCouple", "page", "page_entry", "stable_entry",
    "AbcRun", "run_abc", "verify_convergence", "verify_e2",
]

__version__ = "0.1.0"
