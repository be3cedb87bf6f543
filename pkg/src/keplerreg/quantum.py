"""
Quantum representations of the linearized Kepler problem.

Three truncated representations of the same 16 quadratic generators:

``fock4``
    Four harmonic-oscillator modes, C = (eta, conj(zeta)) -> annihilators.
    Used for E < 0.
``monomial4``
    Polynomials in nu_1..nu_4; nu acts by multiplication and alpha = i d/dnu.
    Used for E > 0.
``polyAB``
    Polynomials in (A0, A1, B0, B1); a = -(i/2) d/dA, b = +(i/2) d/dB.
    Used for E = 0.

All bases are truncated at total degree ``cutoff``.  Quadratic operators are
assembled one degree beyond the cutoff and then sliced, so degree-preserving
operators are exact on the whole basis, a general quadratic operator on
degree <= cutoff - 2 and a product of two of them on degree <= cutoff - 4.
Assertions are made on those sub-bases only.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Literal, Mapping, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.special import comb

from .errors import ClosureError, StructuralError, UnsupportedError
from .phasespace import (
    GENERATOR_NAMES,
    AlgebraTable,
    GaussianRational,
    PhasePolynomial,
    momentum_map_polynomials,
    structure_table,
)

__all__ = [
    "GradedBasis", "SparseOperator", "SpectrumLine", "KernelProjection", "Representation",
    "CasimirReport", "fock_rep", "monomial_rep_positive", "rep_zero", "representation",
    "ladder_ops", "weyl_quantize", "su22_generators", "constraint_kernel",
    "hydrogen_spectrum_neg", "positive_spectrum", "commutator_table", "casimir_check",
    "killing_form", "lorentz_closure", "e3_closure", "su2_identity_residual",
    "zero_energy_shell", "spectrum_to_json", "REGIME_KIND",
]

Kind = Literal["fock4", "monomial4", "polyAB"]
REGIME_KIND = {"neg": "fock4", "pos": "monomial4", "zero": "polyAB"}
EPS3 = np.zeros((3, 3, 3))
for _i, _j, _k in itertools.permutations(range(3)):
    EPS3[_i, _j, _k] = np.linalg.det(np.eye(3)[[_i, _j, _k]])


@dataclass(frozen=True)
class GradedBasis:
    """
    Multi-indices n in N^4 with |n| <= cutoff, ordered by degree then lexicographically.
    """

    kind: str
    cutoff: int

    def __post_init__(self):
        if self.kind not in ("fock4", "monomial4", "polyAB"):
            raise StructuralError(f"unknown basis kind {self.kind!r}")
        if self.cutoff < 0:
            raise StructuralError("cutoff must be non-negative")

    @cached_property
    def multi(self) -> tuple[tuple[int, int, int, int], ...]:
        out = []
        for d in range(self.cutoff + 1):
            out.extend(sorted((n for n in itertools.product(range(d + 1), repeat=4) if sum(n) == d),
                              reverse=True))
        return tuple(out)

    @cached_property
    def index(self) -> dict:
        return {n: i for i, n in enumerate(self.multi)}

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([sum(n) for n in self.multi])

    @property
    def dim(self) -> int:
        return len(self.multi)

    @staticmethod
    def expected_dim(cutoff: int) -> int:
        return int(comb(cutoff + 4, 4, exact=True))

    def safe_mask(self, n_factors: int = 1) -> np.ndarray:
        """States on which a product of ``n_factors`` quadratic operators is exact."""
        return self.degrees <= self.cutoff - 2 * n_factors

    def _shift(self, k: int, delta: int, weight) -> sp.csr_matrix:
        rows, cols, vals = [], [], []
        for j, n in enumerate(self.multi):
            m = list(n)
            m[k] += delta
            if m[k] < 0:
                continue
            i = self.index.get(tuple(m))
            if i is None:
                continue
            w = weight(n[k])
            if w:
                rows.append(i)
                cols.append(j)
                vals.append(w)
        return sp.csr_matrix((np.asarray(vals, complex), (rows, cols)), shape=(self.dim, self.dim))

    def raising(self, k: int) -> sp.csr_matrix:
        """a_k^dagger (fock4) or multiplication by x_k (polynomial kinds)."""
        if self.kind == "fock4":
            return self._shift(k, 1, lambda n: math.sqrt(n + 1))
        return self._shift(k, 1, lambda n: 1.0)

    def lowering(self, k: int) -> sp.csr_matrix:
        """a_k (fock4) or d/dx_k (polynomial kinds)."""
        if self.kind == "fock4":
            return self._shift(k, -1, lambda n: math.sqrt(n))
        return self._shift(k, -1, lambda n: float(n))

    def identity(self) -> sp.csr_matrix:
        return sp.identity(self.dim, dtype=complex, format="csr")


class SparseOperator:
    """Complex sparse matrix acting on a :class:`GradedBasis`."""

    __array_priority__ = 100

    def __init__(self, basis: GradedBasis, matrix, name: str = "", hermitian: bool = False):
        self.basis = basis
        self.matrix = sp.csr_matrix(matrix, dtype=complex)
        if self.matrix.shape != (basis.dim, basis.dim):
            raise StructuralError("operator shape does not match its basis")
        self.name = name
        self.hermitian = hermitian

    def _other(self, other):
        if isinstance(other, SparseOperator):
            if other.basis != self.basis:
                raise StructuralError("operators on different bases")
            return other.matrix
        return other

    def __add__(self, other):
        if not isinstance(other, SparseOperator):
            return SparseOperator(self.basis, self.matrix + other * self.basis.identity())
        return SparseOperator(self.basis, self.matrix + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1) * other

    def __rsub__(self, other):
        return (-1) * self + other

    def __neg__(self):
        return SparseOperator(self.basis, -self.matrix)

    def __mul__(self, c):
        if isinstance(c, SparseOperator):
            return NotImplemented
        return SparseOperator(self.basis, self.matrix * complex(c))

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, SparseOperator):
            return SparseOperator(self.basis, self.matrix @ self._other(other))
        return self.matrix @ other

    def dagger(self) -> "SparseOperator":
        return SparseOperator(self.basis, self.matrix.conj().T, self.name + "^+")

    def commutator(self, other: "SparseOperator") -> "SparseOperator":
        return SparseOperator(self.basis, self.matrix @ other.matrix - other.matrix @ self.matrix)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def hermiticity_defect(self) -> float:
        d = self.matrix - self.matrix.conj().T
        return float(np.abs(d.data).max(initial=0.0))

    def columns(self, mask) -> sp.csr_matrix:
        return self.matrix[:, np.flatnonzero(mask)]

    def __repr__(self):
        return f"SparseOperator({self.name or '?'}, dim={self.basis.dim}, nnz={self.matrix.nnz})"


# -- representations -------------------------------------------------------------

def _lin(**terms) -> dict:
    return {k: GaussianRational.coerce(v) for k, v in terms.items()}


def _lin_add(*forms, scale=None) -> dict:
    out: dict = {}
    for f, s in zip(forms, scale or [1] * len(forms)):
        for k, v in f.items():
            out[k] = out.get(k, GaussianRational(0)) + v * s
    return {k: v for k, v in out.items() if v}


def _complex_vars_from_qp(q, p):
    """sqrt(2)*eta, sqrt(2)*zeta and conjugates as linear forms over real chart coords."""
    i = GaussianRational(0, 1)
    z = [_lin_add(q[0], q[1], scale=[1, i]), _lin_add(q[2], q[3], scale=[1, i])]
    w = [_lin_add(p[0], p[1], scale=[1, i]), _lin_add(p[2], p[3], scale=[1, i])]

    def conj(f):
        return {k: v.conjugate() for k, v in f.items()}

    eta = [_lin_add(z[j], w[j]) for j in range(2)]
    zeta = [_lin_add(z[j], w[j], scale=[1, -1]) for j in range(2)]
    return {"eta1": eta[0], "eta2": eta[1], "zeta1": zeta[0], "zeta2": zeta[1],
            "eta1*": conj(eta[0]), "eta2*": conj(eta[1]),
            "zeta1*": conj(zeta[0]), "zeta2*": conj(zeta[1])}


class Representation:
    """
    A truncated representation: a basis plus an operator for each chart coordinate
    and a linear dictionary expressing the eight complex phase variables in them.

    ``var_forms[v]`` is a linear form over chart coordinates equal to
    ``v / var_scale``.
    """

    def __init__(self, basis: GradedBasis, regime: str, coord_ops: dict, var_forms: dict,
                 var_scale2: Fraction):
        # coord_ops live on a basis padded by one degree; products are sliced back
        self.basis = basis
        self.regime = regime
        self.coord_ops = coord_ops
        self.var_forms = var_forms
        self.var_scale2 = Fraction(var_scale2)

    @property
    def kind(self) -> str:
        return self.basis.kind

    @property
    def cutoff(self) -> int:
        return self.basis.cutoff

    def _pullback(self, f: PhasePolynomial):
        """Exact (constant, linear, symmetric quadratic) coefficients over chart coords."""
        if f.degree() > 2:
            raise UnsupportedError("Weyl quantization implemented for degree <= 2 only")
        const = GaussianRational(0)
        linear: dict = {}
        quad: dict = {}
        for e, c in f.terms.items():
            names = [v for v, k in zip(f.variables, e) for _ in range(k)]
            if not names:
                const = const + c
            elif len(names) == 1:
                for k, v in self.var_forms[names[0]].items():
                    linear[k] = linear.get(k, GaussianRational(0)) + c * v
            else:
                fa, fb = self.var_forms[names[0]], self.var_forms[names[1]]
                for (ka, va), (kb, vb) in itertools.product(fa.items(), fb.items()):
                    key = tuple(sorted((ka, kb)))
                    quad[key] = quad.get(key, GaussianRational(0)) + c * va * vb * self.var_scale2
        return const, linear, quad

    def quantize(self, f: PhasePolynomial, name: str = "") -> SparseOperator:
        """Weyl (symmetric) quantization of a polynomial of degree <= 2."""
        const, linear, quad = self._pullback(f)
        b = self.basis
        n = b.dim
        big = next(iter(self.coord_ops.values())).shape[0]
        mat = complex(const) * sp.identity(big, dtype=complex, format="csr")
        lin_scale = math.sqrt(float(self.var_scale2))
        for k, v in linear.items():
            if v:
                mat = mat + complex(v) * lin_scale * self.coord_ops[k]
        for (ka, kb), v in quad.items():
            if v:
                A, B = self.coord_ops[ka], self.coord_ops[kb]
                mat = mat + complex(v) * 0.5 * (A @ B + B @ A)
        mat = sp.csr_matrix(mat)[:n, :n]
        mat.eliminate_zeros()
        return SparseOperator(b, mat, name, hermitian=(self.kind == "fock4" and f.is_real()))

    @cached_property
    def generators(self) -> dict[str, SparseOperator]:
        return {name: self.quantize(poly, name) for name, poly in momentum_map_polynomials().items()}

    def zero_energy_operator(self) -> SparseOperator:
        """E0 = (J - P0)/2 quantized."""
        g = momentum_map_polynomials()
        return self.quantize((g["J"] - g["P0"]) * Fraction(1, 2), "E0")


def fock_rep(cutoff: int) -> Representation:
    basis = GradedBasis("fock4", cutoff)
    pad = GradedBasis("fock4", cutoff + 1)
    ops = {}
    for k in range(4):
        ops[f"a{k}"] = pad.lowering(k)
        ops[f"ad{k}"] = pad.raising(k)
    one = {"eta1": "a0", "eta2": "a1", "zeta1": "ad2", "zeta2": "ad3",
           "eta1*": "ad0", "eta2*": "ad1", "zeta1*": "a2", "zeta2*": "a3"}
    forms = {v: {c: GaussianRational(1)} for v, c in one.items()}
    return Representation(basis, "neg", ops, forms, Fraction(1))


def monomial_rep_positive(cutoff: int) -> Representation:
    """
    nu_k act by multiplication, alpha_k = i d/dnu_k (so [alpha, nu] = i {alpha, nu} = i).

    ``-P0 = -sum(alpha nu)/2`` becomes ``-(i/2)(D + 2)`` on degree-D
    polynomials; the level label is ``tau = 2i(-P0) = D + 2``.
    """
    basis = GradedBasis("monomial4", cutoff)
    pad = GradedBasis("monomial4", cutoff + 1)
    ops = {}
    for k in range(4):
        ops[f"nu{k + 1}"] = pad.raising(k)
        ops[f"alpha{k + 1}"] = 1j * pad.lowering(k)
    h = Fraction(1, 2)
    al = [_lin(**{f"alpha{k}": h}) for k in range(1, 5)]
    nu = [_lin(**{f"nu{k}": h}) for k in range(1, 5)]
    q = [_lin_add(al[i], nu[i]) for i in range(4)]
    p = [_lin_add(al[1], nu[1], scale=[1, -1]), _lin_add(nu[0], al[0], scale=[1, -1]),
         _lin_add(al[3], nu[3], scale=[1, -1]), _lin_add(nu[2], al[2], scale=[1, -1])]
    return Representation(basis, "pos", ops, _complex_vars_from_qp(q, p), Fraction(1, 2))


def rep_zero(cutoff: int) -> Representation:
    """
    Polynomials in (A0, A1, B0, B1): A, B multiply, a = -(i/2) d/dA, b = (i/2) d/dB.

    The relabeling is b0=q0, a0=q1, B0=p1, A0=p0, b1=q2, a1=q3, B1=p3, A1=p2.
    """
    basis = GradedBasis("polyAB", cutoff)
    pad = GradedBasis("polyAB", cutoff + 1)
    ops = {}
    for k in range(2):
        ops[f"A{k}"] = pad.raising(k)
        ops[f"B{k}"] = pad.raising(2 + k)
        ops[f"a{k}"] = -0.5j * pad.lowering(k)
        ops[f"b{k}"] = 0.5j * pad.lowering(2 + k)
    one = {n: _lin(**{n: 1}) for n in ("a0", "a1", "b0", "b1", "A0", "A1", "B0", "B1")}
    q = [one["b0"], one["a0"], one["b1"], one["a1"]]
    p = [one["A0"], one["B0"], one["A1"], one["B1"]]
    return Representation(basis, "zero", ops, _complex_vars_from_qp(q, p), Fraction(1, 2))


def representation(regime: str, cutoff: int) -> Representation:
    try:
        return {"neg": fock_rep, "pos": monomial_rep_positive, "zero": rep_zero}[regime](cutoff)
    except KeyError:
        raise StructuralError(f"unknown regime {regime!r}") from None


def _rep_for_basis(basis: GradedBasis) -> Representation:
    regime = {v: k for k, v in REGIME_KIND.items()}[basis.kind]
    return representation(regime, basis.cutoff)


def ladder_ops(basis: GradedBasis) -> tuple[list[SparseOperator], list[SparseOperator]]:
    """Annihilation and creation operators of a ``fock4`` basis."""
    if basis.kind != "fock4":
        raise StructuralError("ladder_ops needs a fock4 basis")
    ann = [SparseOperator(basis, basis.lowering(k), f"a{k}") for k in range(4)]
    cre = [SparseOperator(basis, basis.raising(k), f"a{k}^+") for k in range(4)]
    return ann, cre


def weyl_quantize(f: PhasePolynomial, basis: GradedBasis | Representation) -> SparseOperator:
    """Symmetric-ordering quantization of a polynomial of degree <= 2."""
    rep = basis if isinstance(basis, Representation) else _rep_for_basis(basis)
    return rep.quantize(f)


# -- algebra tables ---------------------------------------------------------------

def commutator_table(ops: Mapping[str, SparseOperator], n_factors: int = 2) -> AlgebraTable:
    """
    Commutator structure constants of ``ops`` on the truncation-safe columns.

    Each ``[X_i, X_j]`` is fitted by least squares to span(ops, identity); the
    largest entrywise fitting residual is stored in ``max_residual``.
    """
    names = list(ops)
    mats = [ops[n] for n in names]
    basis = mats[0].basis
    cols = np.flatnonzero(basis.safe_mask(n_factors))
    if cols.size == 0:
        raise StructuralError("cutoff too small: no truncation-safe states")

    def vec(m):
        return m[:, cols].toarray().ravel()

    design = np.column_stack([vec(m.matrix) for m in mats] + [vec(basis.identity())])
    Qm, R = np.linalg.qr(design)
    n = len(names)
    f = np.zeros((n, n, n), complex)
    const = np.zeros((n, n), complex)
    worst = 0.0
    for i, j in itertools.combinations(range(n), 2):
        c = mats[i].matrix @ mats[j].matrix - mats[j].matrix @ mats[i].matrix
        target = vec(c)
        if not np.any(target):
            continue
        coef = scipy.linalg.solve_triangular(R, Qm.conj().T @ target)
        resid = np.abs(target - design @ coef).max()
        worst = max(worst, float(resid))
        f[i, j], f[j, i] = coef[:-1], -coef[:-1]
        const[i, j], const[j, i] = coef[-1], -coef[-1]
    return AlgebraTable(tuple(names), f, const, tolerance=1e-12, max_residual=worst)


_CLASSICAL_TABLE: AlgebraTable | None = None


def classical_table() -> AlgebraTable:
    """Exact Poisson structure constants of the 16 generators (cached)."""
    global _CLASSICAL_TABLE
    if _CLASSICAL_TABLE is None:
        _CLASSICAL_TABLE = structure_table(momentum_map_polynomials())
    return _CLASSICAL_TABLE


def su22_generators(basis: GradedBasis, regime: str, verify: bool = True,
                    tol: float = 1e-12) -> dict[str, SparseOperator]:
    """
    The 16 quantized momentum-map components in the representation for ``regime``.

    Raises
    ------
    StructuralError
        If ``basis.kind`` does not belong to ``regime``.
    ClosureError
        If ``verify`` and the commutators fail to close within ``tol``.
    """
    if REGIME_KIND.get(regime) != basis.kind:
        raise StructuralError(f"regime {regime!r} needs a {REGIME_KIND.get(regime)} basis")
    ops = representation(regime, basis.cutoff).generators
    if verify and basis.cutoff >= 6:
        table = commutator_table(ops)
        if table.max_residual > tol:
            raise ClosureError(f"su(2,2) commutators do not close (residual {table.max_residual:.3g})",
                               residual=table.max_residual)
    return dict(ops)


def killing_form(table: AlgebraTable, names: Sequence[str]) -> np.ndarray:
    """tr(ad_a ad_b) restricted to the sub-algebra spanned by ``names``."""
    idx = [table.index(n) for n in names]
    f = table.f[np.ix_(idx, idx, idx)]
    return np.einsum("acd,bdc->ab", f, f)


# -- constraint, spectra, Casimirs ---------------------------------------------------

@dataclass
class KernelProjection:
    """Orthonormal columns ``V`` spanning ker(I) in each degree block up to ``max_degree``."""

    basis: GradedBasis
    V: np.ndarray
    degrees: np.ndarray
    labels: list = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.V.shape[1]

    def restrict(self, max_degree: int) -> "KernelProjection":
        keep = self.degrees <= max_degree
        labels = [lab for lab, k in zip(self.labels, keep) if k] if self.labels else []
        return KernelProjection(self.basis, self.V[:, keep], self.degrees[keep], labels)


def constraint_kernel(I_hat: SparseOperator, max_degree: int | None = None,
                      tol: float = 1e-10) -> KernelProjection:
    """
    Null space of the constraint operator, computed block by block in degree.

    On a ``fock4`` basis the constraint is diagonal and the kernel is spanned
    by number states with n1 + n2 = n3 + n4.
    """
    basis = I_hat.basis
    max_degree = basis.cutoff if max_degree is None else max_degree
    M = I_hat.matrix.tocsc()
    blocks, degs, labels = [], [], []
    for d in range(max_degree + 1):
        idx = np.flatnonzero(basis.degrees == d)
        sub = M[idx][:, idx].toarray()
        if np.abs(sub - np.diag(np.diag(sub))).max(initial=0.0) == 0.0:
            null = [j for j in range(len(idx)) if abs(sub[j, j]) <= tol]
            ns = np.eye(len(idx))[:, null]
            labels.extend(basis.multi[idx[j]] for j in null)
        else:
            ns = scipy.linalg.null_space(sub, rcond=tol)
            labels.extend([None] * ns.shape[1])
        full = np.zeros((basis.dim, ns.shape[1]), complex)
        full[idx] = ns
        blocks.append(full)
        degs.extend([d] * ns.shape[1])
    V = np.hstack(blocks) if blocks else np.zeros((basis.dim, 0))
    return KernelProjection(basis, V, np.asarray(degs), labels)


@dataclass(frozen=True)
class SpectrumLine:
    n: int
    energy: float
    degeneracy: int
    truncation_complete: bool

    def to_dict(self) -> dict:
        return {"n": int(self.n), "energy": float(f"{self.energy:.17g}"),
                "degeneracy": int(self.degeneracy),
                "truncation_complete": bool(self.truncation_complete)}


def spectrum_to_json(lines: Sequence[SpectrumLine]) -> str:
    return json.dumps([ln.to_dict() for ln in lines])


def _group_levels(values: np.ndarray, rtol: float = 1e-9):
    vals = np.sort(values)
    groups: list[list[float]] = []
    for v in vals:
        if groups and abs(v - groups[-1][0]) <= rtol * max(1.0, abs(v)):
            groups[-1].append(v)
        else:
            groups.append([v])
    return [(float(np.mean(g)), len(g)) for g in groups]


def hydrogen_spectrum_neg(cutoff: int, m: float = 1.0, gamma: float = 1.0) -> list[SpectrumLine]:
    """
    Bound spectrum: diagonalize H = -m gamma^2 / (2 J^2) on the I-kernel of the Fock space.

    Levels with ``n <= 1 + cutoff/2`` are flagged complete.
    """
    if cutoff < 2:
        raise ValueError("cutoff must be >= 2")
    rep = fock_rep(cutoff)
    g = rep.generators
    kern = constraint_kernel(g["I"])
    V = kern.V
    JK = V.conj().T @ (g["J"].matrix @ V)
    JK = 0.5 * (JK + JK.conj().T)
    Jinv = np.linalg.inv(JK)
    HK = -0.5 * m * gamma ** 2 * (Jinv @ Jinv)
    HK = 0.5 * (HK + HK.conj().T)
    energies = np.linalg.eigvalsh(HK)
    lines = []
    for e, deg in _group_levels(energies):
        n = int(round(math.sqrt(-m * gamma ** 2 / (2.0 * e))))
        lines.append(SpectrumLine(n, e, deg, n <= 1 + cutoff / 2))
    return sorted(lines, key=lambda ln: ln.n)


def positive_spectrum(cutoff: int, m: float = 1.0, gamma: float = 1.0) -> list[SpectrumLine]:
    """
    Formal positive-energy levels E_tau = m gamma^2 / (2 tau^2) on the I-kernel
    of the monomial representation, with ``tau = 2i(-P0)`` (= degree + 2).
    """
    if cutoff < 2:
        raise ValueError("cutoff must be >= 2")
    rep = monomial_rep_positive(cutoff)
    g = rep.generators
    kern = constraint_kernel(g["I"])
    V = kern.V
    tau_op = 2j * (-1) * g["P0"].matrix
    TK = V.conj().T @ (tau_op @ V)
    taus = np.linalg.eigvals(TK)
    if np.abs(taus.imag).max(initial=0.0) > 1e-9:
        raise ClosureError("tau operator has non-real eigenvalues on the kernel")
    lines = []
    for tau, deg in _group_levels(taus.real):
        t = int(round(tau))
        lines.append(SpectrumLine(t, m * gamma ** 2 / (2.0 * tau ** 2), deg, t - 2 <= cutoff))
    return sorted(lines, key=lambda ln: ln.n)


def zero_energy_shell(m: float, gamma: float, k: float) -> float:
    """Squared radius of the zero-energy sphere: sum(A_i^2 + B_i^2) = 2 gamma sqrt(m) / k."""
    return 2.0 * gamma * math.sqrt(m) / k


def _max_abs(m) -> float:
    if sp.issparse(m):
        return float(np.abs(m.data).max(initial=0.0)) if m.nnz else 0.0
    return float(np.abs(m).max(initial=0.0))


def su2_identity_residual(rep: Representation) -> dict:
    """Max residual of M^2 - J^2/4 + 1/4 and N^2 - J^2/4 + 1/4 on the I-kernel."""
    g = rep.generators
    kern = constraint_kernel(g["I"], max_degree=rep.cutoff - 4)
    V = kern.V
    J2 = g["J"].matrix @ g["J"].matrix
    out = {}
    for label in ("M", "N"):
        sq = sum(g[f"{label}{k}"].matrix @ g[f"{label}{k}"].matrix for k in (1, 2, 3))
        op = sq - 0.25 * J2 + 0.25 * rep.basis.identity()
        out[label] = _max_abs(op @ V)
    return out


def _scaled_vectors(g):
    L = [2 * (g[f"M{k}"] + g[f"N{k}"]) for k in (1, 2, 3)]
    Q = [2 * g[f"Q{k}"] for k in (1, 2, 3)]
    S = [2 * (g[f"M{k}"] - g[f"N{k}"] + g[f"Q{k}"]) for k in (1, 2, 3)]
    return L, Q, S


def _closure_residual(X, Y, expected, mask) -> float:
    """max |[X_i, Y_j] - sum_k expected[i,j,k] Z_k| on safe columns (expected: callable)."""
    worst = 0.0
    cols = np.flatnonzero(mask)
    for i in range(3):
        for j in range(3):
            c = X[i].matrix @ Y[j].matrix - Y[j].matrix @ X[i].matrix
            c = c - expected(i, j)
            worst = max(worst, _max_abs(c[:, cols]))
    return worst


def lorentz_closure(rep: Representation) -> dict:
    """
    Residuals of [L_i, L_j] = -2i eps L_k, [L_i, Q_j] = -2i eps Q_k, [Q_i, Q_j] = +2i eps L_k,
    with L = 2(M + N) and Q = 2 Q_vec, on the truncation-safe columns.
    """
    L, Q, _ = _scaled_vectors(rep.generators)
    mask = rep.basis.safe_mask(2)
    zero = sp.csr_matrix((rep.basis.dim, rep.basis.dim), dtype=complex)

    def comb(vecs, sign):
        return lambda i, j: sum((sign * 2j * EPS3[i, j, k] * vecs[k].matrix
                                 for k in range(3) if EPS3[i, j, k]), zero)

    return {
        "[L,L]": _closure_residual(L, L, comb(L, -1), mask),
        "[L,Q]": _closure_residual(L, Q, comb(Q, -1), mask),
        "[Q,Q]": _closure_residual(Q, Q, comb(L, +1), mask),
    }


def e3_closure(rep: Representation) -> dict:
    """Residuals of [S_i, S_j] = 0 and [L_i, S_j] = -2i eps S_k with S = 2(R' + Q)."""
    L, _, S = _scaled_vectors(rep.generators)
    mask = rep.basis.safe_mask(2)
    zero = sp.csr_matrix((rep.basis.dim, rep.basis.dim), dtype=complex)
    return {
        "[S,S]": _closure_residual(S, S, lambda i, j: zero, mask),
        "[L,S]": _closure_residual(L, S, lambda i, j: sum(
            (-2j * EPS3[i, j, k] * S[k].matrix for k in range(3) if EPS3[i, j, k]), zero), mask),
        "[L,L]": _closure_residual(L, L, lambda i, j: sum(
            (-2j * EPS3[i, j, k] * L[k].matrix for k in range(3) if EPS3[i, j, k]), zero), mask),
    }


@dataclass(frozen=True)
class CasimirReport:
    value: complex
    residual: float
    is_scalar: bool
    n_states: int


SU22_NAMES = GENERATOR_NAMES[1:]


def casimir_operator(ops: Mapping[str, SparseOperator]) -> SparseOperator:
    """Quadratic su(2,2) Casimir sum g^{ab} X_a X_b from the inverse Killing form."""
    g = killing_form(classical_table(), SU22_NAMES)
    ginv = np.linalg.inv(g)
    basis = ops[SU22_NAMES[0]].basis
    mat = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for a, b in itertools.product(range(len(SU22_NAMES)), repeat=2):
        if abs(ginv[a, b]) > 1e-15:
            mat = mat + ginv[a, b] * (ops[SU22_NAMES[a]].matrix @ ops[SU22_NAMES[b]].matrix)
    return SparseOperator(basis, mat, "C2")


def casimir_check(ops: Mapping[str, SparseOperator], basis: GradedBasis | None = None,
                  constrained: bool = True, tol: float = 1e-10) -> CasimirReport:
    """
    Test whether the quadratic Casimir acts as a scalar.

    With ``constrained`` the test space is the I-kernel; otherwise all
    truncation-safe states (a negative control).
    """
    basis = basis or ops["J"].basis
    C = casimir_operator(ops)
    max_deg = basis.cutoff - 4
    if constrained:
        V = constraint_kernel(ops["I"], max_degree=max_deg).V
    else:
        V = np.eye(basis.dim)[:, basis.degrees <= max_deg]
    CV = C.matrix @ V
    value = complex(np.vdot(V.ravel(), np.asarray(CV).ravel()) / np.vdot(V.ravel(), V.ravel()))
    residual = _max_abs(np.asarray(CV) - value * V)
    return CasimirReport(value, residual, residual < tol, V.shape[1])
