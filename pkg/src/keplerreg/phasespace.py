"""
Exact polynomial algebra on the linearizing phase space C^2 x C^2.

Functions of the spinor pair (eta, zeta) are represented as polynomials in
the eight complex generators ``eta1, eta2, zeta1, zeta2`` and their complex
conjugates.  Coefficients are Gaussian rationals (exact real and imaginary
parts), so brackets, closure checks and the Jacobi identity are computed
with zero round-off.

The Poisson bracket uses the normalization

    {eta_i, conj(eta_j)} = -i delta_ij,   {zeta_i, conj(zeta_j)} = +i delta_ij,

i.e. the eta and zeta blocks carry opposite symplectic signs.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ClosureError, DomainError, StructuralError

__all__ = [
    "GaussianRational",
    "PhasePolynomial",
    "SpinorPoint",
    "SymplecticSignature",
    "AlgebraTable",
    "VARIABLES",
    "GENERATOR_NAMES",
    "variable",
    "poisson_bracket",
    "structure_table",
    "momentum_map_polynomials",
    "sample_constraint_point",
]


class GaussianRational:
    """Exact complex number ``re + i*im`` with rational parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        if isinstance(re, GaussianRational):
            re, im = re.re, re.im
        elif isinstance(re, complex):
            re, im = Fraction(re.real), Fraction(re.imag) + Fraction(im)
        self.re = Fraction(re)
        self.im = Fraction(im)

    @classmethod
    def coerce(cls, value) -> "GaussianRational":
        if isinstance(value, GaussianRational):
            return value
        if isinstance(value, tuple):
            return cls(*value)
        return cls(value)

    def __add__(self, other):
        o = GaussianRational.coerce(other)
        return GaussianRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = GaussianRational.coerce(other)
        return GaussianRational(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return GaussianRational.coerce(other) - self

    def __mul__(self, other):
        o = GaussianRational.coerce(other)
        return GaussianRational(self.re * o.re - self.im * o.im,
                                self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = GaussianRational.coerce(other)
        den = o.re * o.re + o.im * o.im
        if den == 0:
            raise ZeroDivisionError("division by zero Gaussian rational")
        num = self * o.conjugate()
        return GaussianRational(num.re / den, num.im / den)

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __eq__(self, other):
        try:
            o = GaussianRational.coerce(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def conjugate(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    def __repr__(self):
        if not self.im:
            return str(self.re)
        return f"({self.re}{'+' if self.im >= 0 else '-'}{abs(self.im)}i)"


I_UNIT = GaussianRational(0, 1)
ZERO = GaussianRational(0)
ONE = GaussianRational(1)

VARIABLES: tuple[str, ...] = (
    "eta1", "eta2", "zeta1", "zeta2",
    "eta1*", "eta2*", "zeta1*", "zeta2*",
)
GENERATOR_NAMES: tuple[str, ...] = (
    "I", "J", "M1", "M2", "M3", "N1", "N2", "N3",
    "Q0", "Q1", "Q2", "Q3", "P0", "P1", "P2", "P3",
)


def _conj_name(name: str) -> str:
    return name[:-1] if name.endswith("*") else name + "*"


class PhasePolynomial:
    """
    Immutable sparse polynomial with Gaussian-rational coefficients.

    Parameters
    ----------
    terms : Mapping[tuple[int, ...], coefficient]
        Exponent vector (one entry per variable) -> coefficient.  Zero
        coefficients are dropped.
    variables : Sequence[str]
        Variable names.  A trailing ``*`` marks the complex conjugate of the
        unstarred variable; every variable must have its partner present.
    """

    __slots__ = ("_terms", "variables", "_hash")

    def __init__(self, terms: Mapping | None = None, variables: Sequence[str] = VARIABLES):
        self.variables = tuple(variables)
        n = len(self.variables)
        clean: dict[tuple[int, ...], GaussianRational] = {}
        for exps, c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != n or min(exps, default=0) < 0:
                raise StructuralError(f"bad exponent vector {exps!r} for {n} variables")
            c = GaussianRational.coerce(c)
            if c:
                clean[exps] = clean.get(exps, ZERO) + c
                if not clean[exps]:
                    del clean[exps]
        self._terms = MappingProxyType(clean)
        self._hash = None

    # construction helpers -------------------------------------------------
    @classmethod
    def constant(cls, c, variables: Sequence[str] = VARIABLES) -> "PhasePolynomial":
        return cls({(0,) * len(variables): c}, variables)

    @classmethod
    def zero(cls, variables: Sequence[str] = VARIABLES) -> "PhasePolynomial":
        return cls({}, variables)

    @property
    def terms(self) -> Mapping[tuple[int, ...], GaussianRational]:
        return self._terms

    def _index(self, name: str) -> int:
        try:
            return self.variables.index(name)
        except ValueError:
            raise StructuralError(f"unknown variable {name!r}") from None

    def _check_same(self, other: "PhasePolynomial"):
        if self.variables != other.variables:
            raise StructuralError("polynomials are over different variable sets")

    def _lift(self, other) -> "PhasePolynomial":
        if isinstance(other, PhasePolynomial):
            self._check_same(other)
            return other
        return PhasePolynomial.constant(other, self.variables)

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        other = self._lift(other)
        out = dict(self._terms)
        for e, c in other._terms.items():
            out[e] = out.get(e, ZERO) + c
        return PhasePolynomial(out, self.variables)

    __radd__ = __add__

    def __neg__(self):
        return PhasePolynomial({e: -c for e, c in self._terms.items()}, self.variables)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, PhasePolynomial):
            c = GaussianRational.coerce(other)
            return PhasePolynomial({e: c * v for e, v in self._terms.items()}, self.variables)
        self._check_same(other)
        out: dict[tuple[int, ...], GaussianRational] = {}
        for (e1, c1), (e2, c2) in itertools.product(self._terms.items(), other._terms.items()):
            e = tuple(a + b for a, b in zip(e1, e2))
            out[e] = out.get(e, ZERO) + c1 * c2
        return PhasePolynomial(out, self.variables)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        out = PhasePolynomial.constant(1, self.variables)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, PhasePolynomial):
            return self.variables == other.variables and dict(self._terms) == dict(other._terms)
        try:
            return self == self._lift(other)
        except (TypeError, ValueError):
            return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.variables, frozenset(self._terms.items())))
        return self._hash

    def __bool__(self):
        return bool(self._terms)

    def __repr__(self):
        if not self._terms:
            return "PhasePolynomial(0)"
        parts = []
        for e, c in sorted(self._terms.items()):
            mono = "*".join(
                v if k == 1 else f"{v}^{k}" for v, k in zip(self.variables, e) if k
            )
            parts.append(f"{c!r}" + (f"*{mono}" if mono else ""))
        return "PhasePolynomial(" + " + ".join(parts) + ")"

    # calculus and structure -----------------------------------------------
    def diff(self, name: str) -> "PhasePolynomial":
        """Wirtinger-style partial derivative with respect to ``name``."""
        k = self._index(name)
        out = {}
        for e, c in self._terms.items():
            if e[k]:
                ne = list(e)
                ne[k] -= 1
                out[tuple(ne)] = c * e[k]
        return PhasePolynomial(out, self.variables)

    def conjugate(self) -> "PhasePolynomial":
        perm = [self._index(_conj_name(v)) for v in self.variables]
        out = {}
        for e, c in self._terms.items():
            out[tuple(e[perm[i]] for i in range(len(e)))] = c.conjugate()
        return PhasePolynomial(out, self.variables)

    def real_part(self) -> "PhasePolynomial":
        return (self + self.conjugate()) * Fraction(1, 2)

    def imag_part(self) -> "PhasePolynomial":
        return (self - self.conjugate()) * GaussianRational(0, Fraction(-1, 2))

    def is_real(self) -> bool:
        return self == self.conjugate()

    def degree(self) -> int:
        return max((sum(e) for e in self._terms), default=-1)

    def homogeneous_part(self, d: int) -> "PhasePolynomial":
        return PhasePolynomial({e: c for e, c in self._terms.items() if sum(e) == d},
                               self.variables)

    # evaluation -----------------------------------------------------------
    def _values(self, point) -> list:
        if isinstance(point, SpinorPoint):
            base = [*point.eta, *point.zeta]
            vals = base + [complex(b).conjugate() for b in base]
            if self.variables != VARIABLES:
                raise StructuralError("SpinorPoint evaluation needs the standard variables")
            return vals
        if isinstance(point, Mapping):
            return [point[v] for v in self.variables]
        vals = list(point)
        if len(vals) != len(self.variables):
            raise StructuralError("point has the wrong number of coordinates")
        return vals

    def __call__(self, point) -> complex:
        vals = self._values(point)
        total = 0j
        for e, c in self._terms.items():
            term = complex(c)
            for v, k in zip(vals, e):
                if k:
                    term *= v ** k
            total += term
        return total

    def evaluate_exact(self, point) -> GaussianRational:
        """Evaluate with exact rational arithmetic (floats converted exactly)."""
        vals = [GaussianRational(complex(v)) if not isinstance(v, GaussianRational) else v
                for v in self._values(point)]
        total = ZERO
        for e, c in self._terms.items():
            term = c
            for v, k in zip(vals, e):
                for _ in range(k):
                    term = term * v
            total = total + term
        return total


def variable(name: str, variables: Sequence[str] = VARIABLES) -> PhasePolynomial:
    """The coordinate function ``name`` as a polynomial."""
    variables = tuple(variables)
    e = [0] * len(variables)
    try:
        e[variables.index(name)] = 1
    except ValueError:
        raise StructuralError(f"unknown variable {name!r}") from None
    return PhasePolynomial({tuple(e): 1}, variables)


@dataclass(frozen=True)
class SpinorPoint:
    """A point (eta, zeta) of C^2 x C^2."""

    eta: tuple[complex, complex]
    zeta: tuple[complex, complex]

    def __post_init__(self):
        object.__setattr__(self, "eta", tuple(complex(v) for v in self.eta))
        object.__setattr__(self, "zeta", tuple(complex(v) for v in self.zeta))
        if len(self.eta) != 2 or len(self.zeta) != 2:
            raise StructuralError("eta and zeta must each have two components")

    @property
    def eta_array(self) -> np.ndarray:
        return np.asarray(self.eta, dtype=complex)

    @property
    def zeta_array(self) -> np.ndarray:
        return np.asarray(self.zeta, dtype=complex)

    def norm2(self) -> float:
        return float(sum(abs(v) ** 2 for v in (*self.eta, *self.zeta)))

    def require_punctured(self):
        if self.norm2() == 0.0:
            raise DomainError("operation requires a nonzero spinor point")
        return self

    def scaled(self, factor) -> "SpinorPoint":
        return SpinorPoint(tuple(factor * v for v in self.eta),
                           tuple(factor * v for v in self.zeta))


@dataclass(frozen=True)
class SymplecticSignature:
    """
    Conjugate-pair descriptors ``(variable, conjugate, sign)``.

    The bracket rule is ``{x, conj(x)} = -i * sign``.
    """

    pairs: tuple[tuple[str, str, int], ...]

    def __post_init__(self):
        seen = set()
        for v, cv, s in self.pairs:
            if s not in (1, -1):
                raise StructuralError(f"sign must be +1 or -1, got {s}")
            if v in seen or cv in seen:
                raise StructuralError(f"variable {v!r} listed twice")
            seen.update((v, cv))

    @classmethod
    def kepler(cls) -> "SymplecticSignature":
        """eta pairs carry +1 and zeta pairs -1, as in Im(<eta,d eta> - <zeta,d zeta>)."""
        return cls((("eta1", "eta1*", 1), ("eta2", "eta2*", 1),
                    ("zeta1", "zeta1*", -1), ("zeta2", "zeta2*", -1)))

    def variables(self) -> set[str]:
        return {v for p in self.pairs for v in p[:2]}


def poisson_bracket(f: PhasePolynomial, g: PhasePolynomial,
                    sig: SymplecticSignature | None = None) -> PhasePolynomial:
    """
    Exact Poisson bracket of two phase polynomials.

    ``{f, g} = sum_pairs (-i s) (df/dx dg/dx* - df/dx* dg/dx)``

    Parameters
    ----------
    f, g : PhasePolynomial
        Polynomials over the same variables.
    sig : SymplecticSignature, optional
        Defaults to :meth:`SymplecticSignature.kepler`.

    Returns
    -------
    PhasePolynomial

    Raises
    ------
    StructuralError
        If ``f`` and ``g`` (or ``sig``) disagree on the variable set.
    """
    sig = sig or SymplecticSignature.kepler()
    if f.variables != g.variables:
        raise StructuralError("poisson_bracket: polynomials over different variable sets")
    if sig.variables() != set(f.variables):
        raise StructuralError("poisson_bracket: signature does not match the variable set")
    out = PhasePolynomial.zero(f.variables)
    for x, xc, s in sig.pairs:
        term = f.diff(x) * g.diff(xc) - f.diff(xc) * g.diff(x)
        out = out + term * GaussianRational(0, -s)
    return out


# -- exact linear algebra over Gaussian rationals ---------------------------

def _solve_in_span(basis: Sequence[PhasePolynomial], target: PhasePolynomial):
    """Express ``target`` in span(basis + {1}); return (coeffs, const, residual)."""
    variables = target.variables
    one = PhasePolynomial.constant(1, variables)
    cols = list(basis) + [one]
    monos = sorted({e for p in cols for e in p.terms} | set(target.terms))
    rows = [[p.terms.get(m, ZERO) for p in cols] + [target.terms.get(m, ZERO)] for m in monos]
    ncol = len(cols)
    pivots = []
    r = 0
    for c in range(ncol):
        piv = next((i for i in range(r, len(rows)) if rows[i][c]), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        inv = ONE / rows[r][c]
        rows[r] = [v * inv for v in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c]:
                fac = rows[i][c]
                rows[i] = [a - fac * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
    coeffs = [ZERO] * ncol
    for i, c in enumerate(pivots):
        coeffs[c] = rows[i][-1]
    fitted = PhasePolynomial.zero(variables)
    for c, p in zip(coeffs, cols):
        fitted = fitted + p * c
    residual = target - fitted
    return coeffs[:-1], coeffs[-1], residual


@dataclass
class AlgebraTable:
    """
    Structure constants ``[X_i, X_j] = sum_k f[i, j, k] X_k + const[i, j]``.

    ``f`` has shape (n, n, n) and ``const`` shape (n, n), both complex.
    """

    generators: tuple[str, ...]
    f: np.ndarray
    const: np.ndarray = None
    tolerance: float = 0.0
    max_residual: float = 0.0

    def __post_init__(self):
        self.generators = tuple(self.generators)
        n = len(self.generators)
        self.f = np.asarray(self.f, dtype=complex).reshape(n, n, n)
        if self.const is None:
            self.const = np.zeros((n, n), dtype=complex)
        self.const = np.asarray(self.const, dtype=complex).reshape(n, n)

    def index(self, name: str) -> int:
        return self.generators.index(name)

    def coefficient(self, a: str, b: str, c: str) -> complex:
        return complex(self.f[self.index(a), self.index(b), self.index(c)])

    def antisymmetry_residual(self) -> float:
        return float(max(np.abs(self.f + self.f.transpose(1, 0, 2)).max(initial=0.0),
                         np.abs(self.const + self.const.T).max(initial=0.0)))

    def jacobi_residual(self) -> float:
        """Max over (i, j, k, m) of the cyclic Jacobi sum on the linear part."""
        f = self.f
        # J[i,j,k,m] = sum_l f[i,j,l] f[l,k,m]
        a = np.einsum("ijl,lkm->ijkm", f, f)
        cyc = a + a.transpose(1, 2, 0, 3) + a.transpose(2, 0, 1, 3)
        return float(np.abs(cyc).max(initial=0.0))

    def is_zero(self, tol: float | None = None) -> bool:
        tol = self.tolerance if tol is None else tol
        return bool(np.abs(self.f).max(initial=0.0) <= tol
                    and np.abs(self.const).max(initial=0.0) <= tol)

    def scaled(self, factor: complex) -> "AlgebraTable":
        return AlgebraTable(self.generators, self.f * factor, self.const * factor,
                            self.tolerance, self.max_residual)

    def max_difference(self, other: "AlgebraTable") -> float:
        if self.generators != other.generators:
            raise StructuralError("tables over different generator lists")
        return float(max(np.abs(self.f - other.f).max(initial=0.0),
                         np.abs(self.const - other.const).max(initial=0.0)))

    def to_json(self) -> str:
        def pairs(a):
            return [[float(v.real), float(v.imag)] for v in a]

        doc = {
            "generators": list(self.generators),
            "f": [[pairs(self.f[i, j]) for j in range(len(self.generators))]
                  for i in range(len(self.generators))],
            "const": [pairs(row) for row in self.const],
            "tolerance": self.tolerance,
            "max_residual": self.max_residual,
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "AlgebraTable":
        doc = json.loads(text)
        n = len(doc["generators"])
        f = np.array([[[complex(re, im) for re, im in cell] for cell in row] for row in doc["f"]],
                     dtype=complex).reshape(n, n, n)
        const = doc.get("const")
        if const is not None:
            const = np.array([[complex(re, im) for re, im in row] for row in const])
        return cls(doc["generators"], f, const, doc.get("tolerance", 0.0),
                   doc.get("max_residual", 0.0))


def structure_table(generators: Mapping[str, PhasePolynomial] | Sequence[PhasePolynomial],
                    sig: SymplecticSignature | None = None) -> AlgebraTable:
    """
    Exact structure constants of a set of phase polynomials under the bracket.

    Every pairwise bracket must lie in span(generators) plus constants.

    Raises
    ------
    ClosureError
        When a bracket leaves the span; carries the pair and the residual.
    """
    if isinstance(generators, Mapping):
        names = list(generators)
        polys = list(generators.values())
    else:
        polys = list(generators)
        names = [f"X{i}" for i in range(len(polys))]
    n = len(polys)
    f = np.zeros((n, n, n), dtype=complex)
    const = np.zeros((n, n), dtype=complex)
    for i, j in itertools.combinations(range(n), 2):
        br = poisson_bracket(polys[i], polys[j], sig)
        if not br:
            continue
        coeffs, c0, residual = _solve_in_span(polys, br)
        if residual:
            raise ClosureError(
                f"bracket {{{names[i]}, {names[j]}}} leaves the span of the generators",
                pair=(names[i], names[j]), residual=residual)
        for k, c in enumerate(coeffs):
            f[i, j, k] = complex(c)
            f[j, i, k] = -complex(c)
        const[i, j] = complex(c0)
        const[j, i] = -complex(c0)
    return AlgebraTable(tuple(names), f, const, tolerance=0.0, max_residual=0.0)


def momentum_map_polynomials() -> dict[str, PhasePolynomial]:
    """
    The 16 u(2,2) momentum-map components as exact phase polynomials.

    Returns
    -------
    dict
        Ordered as :data:`GENERATOR_NAMES`: I, J, M1..M3, N1..N3, Q0..Q3,
        P0..P3.
    """
    eta = [variable("eta1"), variable("eta2")]
    zeta = [variable("zeta1"), variable("zeta2")]
    etab = [variable("eta1*"), variable("eta2*")]
    zetab = [variable("zeta1*"), variable("zeta2*")]
    i = GaussianRational(0, 1)
    sigma = [
        [[0, 1], [1, 0]],
        [[0, -i], [i, 0]],
        [[1, 0], [0, -1]],
    ]

    def bra_ket(left_bar, mat, right):
        out = PhasePolynomial.zero()
        for a in range(2):
            for b in range(2):
                m = mat[a][b] if mat is not None else (1 if a == b else 0)
                if m != 0:
                    out = out + left_bar[a] * right[b] * m
        return out

    half = Fraction(1, 2)
    ee = bra_ket(etab, None, eta)
    zz = bra_ket(zetab, None, zeta)
    ez = bra_ket(etab, None, zeta)
    ezs = [bra_ket(etab, s, zeta) for s in sigma]
    gens = {
        "I": (ee - zz) * half,
        "J": (ee + zz) * half,
    }
    for k, s in enumerate(sigma, start=1):
        gens[f"M{k}"] = bra_ket(etab, s, eta) * Fraction(-1, 2)
    for k, s in enumerate(sigma, start=1):
        gens[f"N{k}"] = bra_ket(zetab, s, zeta) * half
    gens["Q0"] = -ez.imag_part()
    for k in range(3):
        gens[f"Q{k + 1}"] = ezs[k].real_part()
    gens["P0"] = ez.real_part()
    for k in range(3):
        gens[f"P{k + 1}"] = ezs[k].imag_part()
    return gens


# -- sampling ----------------------------------------------------------------

def _quat_mul(a, b):
    a0, a1, a2, a3 = a
    b0, b1, b2, b3 = b
    return (a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
            a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
            a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
            a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0)


def sample_constraint_point(seed: int, scale_bits: int = 8) -> SpinorPoint:
    """
    Deterministic pseudo-random point with <eta,eta> = <zeta,zeta> != 0.

    The equality is exact in floating point: eta and zeta are quaternion
    products of small random integers, ``eta = a*b`` and ``zeta = b'*a'``
    with ``a', b'`` signed permutations of ``a, b`` (so both have norm
    |a|^2 |b|^2), divided by a power of two.
    """
    rng = np.random.default_rng(seed)
    while True:
        a = tuple(int(v) for v in rng.integers(-15, 16, size=4))
        b = tuple(int(v) for v in rng.integers(-15, 16, size=4))
        if any(a) and any(b):
            break
    a2 = (a[2], -a[0], a[3], a[1])
    b2 = (-b[1], b[3], b[0], -b[2])
    eta_q = _quat_mul(a, b)
    zeta_q = _quat_mul(b2, a2)
    scale = 2.0 ** -scale_bits
    eta = (complex(eta_q[0], eta_q[1]) * scale, complex(eta_q[2], eta_q[3]) * scale)
    zeta = (complex(zeta_q[0], zeta_q[1]) * scale, complex(zeta_q[2], zeta_q[3]) * scale)
    return SpinorPoint(eta, zeta)
