"""
Kustaanheimo-Stiefel maps and the dictionary to physical Kepler variables.

Conventions: ``<a, b> = sum(conj(a_i) * b_i)`` and 4-vectors are ordered
``(scalar, x, y, z)``.  ``||P||`` always means the 4-vector norm
``sqrt(P0**2 + |P|**2)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np

from .errors import CollisionError, ConstraintError, DomainError, SingularChartError
from .phasespace import SpinorPoint

__all__ = [
    "PAULI",
    "CotangentPoint",
    "KeplerState",
    "MomentumMapValue",
    "hopf",
    "ks_pi",
    "collision_injection",
    "collision_extraction",
    "momentum_map",
    "to_physical",
    "lift",
    "runge_lenz",
    "runge_lenz_table",
    "calibrate_k",
    "kepler_energy",
    "table_energy",
    "canonical_one_form",
]

PAULI = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)

_SQRT2 = math.sqrt(2.0)


def _fmt(x: float) -> float:
    # 17 significant digits round-trips every double
    return float(f"{x:.17g}")


@dataclass(frozen=True)
class CotangentPoint:
    """A point (z, w) of T*C^2, with z the configuration spinor."""

    z: tuple[complex, complex]
    w: tuple[complex, complex]

    def __post_init__(self):
        object.__setattr__(self, "z", tuple(complex(v) for v in self.z))
        object.__setattr__(self, "w", tuple(complex(v) for v in self.w))

    @property
    def z_array(self) -> np.ndarray:
        return np.asarray(self.z, dtype=complex)

    @property
    def w_array(self) -> np.ndarray:
        return np.asarray(self.w, dtype=complex)


@dataclass(frozen=True)
class KeplerState:
    """Physical Kepler state with H = |Y|^2 / 2m - gamma / |X|."""

    X: tuple[float, float, float]
    Y: tuple[float, float, float]
    m: float = 1.0
    gamma: float = 1.0
    k: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "X", tuple(float(v) for v in self.X))
        object.__setattr__(self, "Y", tuple(float(v) for v in self.Y))
        if len(self.X) != 3 or len(self.Y) != 3:
            raise ValueError("X and Y must be 3-vectors")
        if not (self.m > 0 and self.gamma > 0 and self.k > 0):
            raise ValueError("m, gamma and k must be positive")
        if math.hypot(*self.X) == 0.0:
            raise CollisionError("KeplerState at the origin (collision)")

    @property
    def x(self) -> np.ndarray:
        return np.asarray(self.X)

    @property
    def y(self) -> np.ndarray:
        return np.asarray(self.Y)

    @property
    def r(self) -> float:
        return float(np.linalg.norm(self.X))

    def energy(self) -> float:
        return kepler_energy(self)

    def angular_momentum(self) -> np.ndarray:
        return np.cross(self.x, self.y)

    def to_dict(self) -> dict:
        return {"X": [_fmt(v) for v in self.X], "Y": [_fmt(v) for v in self.Y],
                "m": _fmt(self.m), "gamma": _fmt(self.gamma), "k": _fmt(self.k)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "KeplerState":
        return cls(tuple(doc["X"]), tuple(doc["Y"]), float(doc.get("m", 1.0)),
                   float(doc.get("gamma", 1.0)), float(doc.get("k", 1.0)))

    @classmethod
    def from_json(cls, text: str) -> "KeplerState":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class MomentumMapValue:
    """Values of the 16 momentum-map components at a point."""

    I: float
    J: float
    M: tuple[float, float, float]
    N: tuple[float, float, float]
    Q: tuple[float, float, float, float]
    P: tuple[float, float, float, float]

    @property
    def P_norm(self) -> float:
        """4-vector norm sqrt(P0^2 + |P|^2)."""
        return float(math.sqrt(sum(v * v for v in self.P)))

    @property
    def R_prime(self) -> np.ndarray:
        return np.asarray(self.M) - np.asarray(self.N)

    @property
    def L(self) -> np.ndarray:
        return np.asarray(self.M) + np.asarray(self.N)

    def as_vector(self) -> np.ndarray:
        """Components in the order I, J, M1..3, N1..3, Q0..3, P0..3."""
        return np.array([self.I, self.J, *self.M, *self.N, *self.Q, *self.P])

    def to_dict(self) -> dict:
        return {k: ([_fmt(x) for x in v] if isinstance(v, tuple) else _fmt(v))
                for k, v in asdict(self).items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "MomentumMapValue":
        d = json.loads(text)
        return cls(d["I"], d["J"], tuple(d["M"]), tuple(d["N"]), tuple(d["Q"]), tuple(d["P"]))


def hopf(z) -> np.ndarray:
    """Hopf map z -> <z, sigma z>; |hopf(z)| = <z, z>."""
    z = np.asarray(z, dtype=complex)
    if not np.any(z):
        raise DomainError("hopf: z must be nonzero")
    return np.einsum("i,kij,j->k", z.conj(), PAULI, z).real


def ks_pi(p: CotangentPoint) -> tuple[np.ndarray, np.ndarray]:
    """KS projection (z, w) -> (x, y) = (hopf(z), Im<w, sigma z> / <z, z>)."""
    z, w = p.z_array, p.w_array
    x = hopf(z)
    y = np.einsum("i,kij,j->k", w.conj(), PAULI, z).imag / np.vdot(z, z).real
    return x, y


def collision_injection(p: CotangentPoint) -> SpinorPoint:
    """(z, w) -> (eta, zeta) = ((z + w)/sqrt2, (z - w)/sqrt2)."""
    z, w = p.z_array, p.w_array
    return SpinorPoint(tuple((z + w) / _SQRT2), tuple((z - w) / _SQRT2))


def collision_extraction(s: SpinorPoint) -> CotangentPoint:
    """Inverse of :func:`collision_injection` (the same matrix, it squares to one)."""
    eta, zeta = s.eta_array, s.zeta_array
    return CotangentPoint(tuple((eta + zeta) / _SQRT2), tuple((eta - zeta) / _SQRT2))


def momentum_map(p: SpinorPoint) -> MomentumMapValue:
    """Evaluate I, J, M, N, Q, P at a spinor point."""
    eta, zeta = p.eta_array, p.zeta_array
    ee = np.vdot(eta, eta).real
    zz = np.vdot(zeta, zeta).real
    ez = np.vdot(eta, zeta)
    esz = np.einsum("i,kij,j->k", eta.conj(), PAULI, zeta)
    M = -0.5 * np.einsum("i,kij,j->k", eta.conj(), PAULI, eta).real
    N = 0.5 * np.einsum("i,kij,j->k", zeta.conj(), PAULI, zeta).real
    return MomentumMapValue(
        I=float(0.5 * (ee - zz)),
        J=float(0.5 * (ee + zz)),
        M=tuple(float(v) for v in M),
        N=tuple(float(v) for v in N),
        Q=(float(-ez.imag), *(float(v) for v in esz.real)),
        P=(float(ez.real), *(float(v) for v in esz.imag)),
    )


def to_physical(mm: MomentumMapValue, m: float, gamma: float, k: float) -> KeplerState:
    """
    Physical state from momentum-map values.

    ``X = (Q - R') / (sqrt(m) k)`` and ``Y = k sqrt(m) P / (||P|| + P0)``
    with ``R' = M - N``.

    Raises
    ------
    SingularChartError
        If ``||P|| + P0 == 0``.
    CollisionError
        If ``Q == R'`` (spatial parts).
    """
    denom = mm.P_norm + mm.P[0]
    if denom <= 0.0:
        raise SingularChartError("||P|| + P0 vanishes")
    xq = np.asarray(mm.Q[1:]) - mm.R_prime
    if not np.any(xq):
        raise CollisionError("Q == R': collision point")
    sm = math.sqrt(m)
    X = xq / (sm * k)
    Y = k * sm * np.asarray(mm.P[1:]) / denom
    return KeplerState(tuple(X), tuple(Y), m, gamma, k)


def kepler_energy(state: KeplerState) -> float:
    y = state.y
    return float(y @ y / (2.0 * state.m) - state.gamma / state.r)


def table_energy(mm: MomentumMapValue, m: float, gamma: float, k: float) -> float:
    """Hamiltonian written in momentum-map variables: k(k(||P||-P0) - 2 gamma sqrt m) / 2(||P||+P0)."""
    pn, p0 = mm.P_norm, mm.P[0]
    return k * (k * (pn - p0) - 2.0 * gamma * math.sqrt(m)) / (2.0 * (pn + p0))


def runge_lenz(state: KeplerState) -> np.ndarray:
    """Runge-Lenz vector Y x L / m - gamma X / |X|."""
    if state.r == 0.0:
        raise CollisionError("runge_lenz at the origin")
    L = state.angular_momentum()
    return np.cross(state.y, L) / state.m - state.gamma * state.x / state.r


def runge_lenz_table(mm: MomentumMapValue, m: float, gamma: float, k: float) -> np.ndarray:
    """Runge-Lenz vector written in momentum-map variables."""
    pn, p0 = mm.P_norm, mm.P[0]
    sm = math.sqrt(m)
    Rp = mm.R_prime
    Q = np.asarray(mm.Q[1:])
    return (Rp * (k * p0 + gamma * sm) + Q * (k * pn - gamma * sm)) / (sm * (pn + p0))


EnergySign = Literal["neg", "pos"]


def calibrate_k(mm: MomentumMapValue, m: float, gamma: float,
                energy_sign: EnergySign, tol: float = 1e-12) -> float:
    """
    Scale ``k`` putting the state on the energy shell H = -k^2/2 or +k^2/2.

    For ``neg`` this is ``gamma sqrt(m) / J``; for ``pos`` it is
    ``gamma sqrt(m) / (-P0)``.

    Raises
    ------
    ConstraintError
        If |I| > tol, or the regime-specific sign condition fails.
    """
    if abs(mm.I) > tol * max(1.0, abs(mm.J)):
        raise ConstraintError(f"calibrate_k needs I = 0, got I = {mm.I!r}")
    sm = math.sqrt(m)
    if energy_sign == "neg":
        if mm.J <= 0.0:
            raise ConstraintError("calibrate_k(neg) needs J > 0")
        return gamma * sm / mm.J
    if energy_sign == "pos":
        if -mm.P[0] <= 0.0:
            raise ConstraintError("calibrate_k(pos) needs -P0 > 0")
        return gamma * sm / (-mm.P[0])
    raise ValueError(f"unknown energy sign {energy_sign!r}")


def _fiber_section(x: np.ndarray) -> np.ndarray:
    """A spinor z with hopf(z) = x; the larger component is made real and non-negative."""
    r = float(np.linalg.norm(x))
    if r == 0.0:
        raise CollisionError("cannot lift the origin")
    c = complex(x[0], x[1]) / 2.0  # conj(z1) z2
    if x[2] >= 0.0:
        z1 = math.sqrt((r + x[2]) / 2.0)
        return np.array([z1, c / z1], dtype=complex)
    z2 = math.sqrt((r - x[2]) / 2.0)
    return np.array([np.conj(c) / z2, z2], dtype=complex)


def lift(state: KeplerState, k: float | None = None) -> SpinorPoint:
    """
    Spinor point on I = 0 whose physical image (at scale ``k``) is ``state``.

    The U(1) fiber is fixed by :func:`_fiber_section`; ``w`` solves the
    linear system ``Im<w, sigma z> = |z|^2 y``, ``Re<z, w> = 0``.
    """
    k = state.k if k is None else k
    sm = math.sqrt(state.m)
    x = sm * k * state.x
    y = state.y / (k * sm)
    z = _fiber_section(x)
    zz = float(np.vdot(z, z).real)
    # w = u + i v; unknowns (u1, u2, v1, v2), equations linear in them
    A = np.zeros((4, 4))
    for j in range(4):
        e = np.zeros(4)
        e[j] = 1.0
        w = e[:2] + 1j * e[2:]
        A[:3, j] = np.einsum("i,kij,j->k", w.conj(), PAULI, z).imag
        A[3, j] = np.vdot(z, w).real
    rhs = np.concatenate([zz * y, [0.0]])
    sol = np.linalg.solve(A, rhs)
    w = sol[:2] + 1j * sol[2:]
    return collision_injection(CotangentPoint(tuple(z), tuple(w)))


def canonical_one_form(p: SpinorPoint, dp: SpinorPoint) -> float:
    """Im(<eta, d eta> - <zeta, d zeta>) evaluated on the tangent vector ``dp``."""
    return float((np.vdot(p.eta_array, dp.eta_array) - np.vdot(p.zeta_array, dp.zeta_array)).imag)
