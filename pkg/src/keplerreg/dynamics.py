"""
Exact linearized Kepler flows and physical-time propagation.

Three regimes share one pipeline: lift a physical state to a spinor point
on I = 0, move it with the closed-form linear flow of the regime, and read
the physical state back through the momentum map.

* ``neg`` (H < 0): four resonant harmonic oscillators, C = (eta, conj(zeta)).
* ``pos`` (H > 0): four resonant repulsive oscillators in (alpha, nu).
* ``zero`` (H = 0): four free particles in (a, b, A, B).

The fictitious time ``s`` used by :func:`propagate_physical` satisfies
``dt/ds = sqrt(m) r / k``; physical time is recovered by trapezoidal
quadrature of that relation.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import ConstraintError, DomainError
from .ks_map import PAULI, KeplerState, kepler_energy, lift
from .phasespace import SpinorPoint

__all__ = [
    "physical_time",
    "HarmonicElement", "RepulsiveElement", "FreeElement",
    "OscillatorState", "RepulsiveState", "FreeState", "Trajectory",
    "group_compose_harmonic", "group_compose_repulsive", "group_compose_free",
    "group_inverse",
    "flow_harmonic", "flow_repulsive", "flow_free",
    "oscillator_from_spinor", "spinor_from_oscillator",
    "change_variables_positive", "spinor_from_repulsive",
    "spinor_to_qp", "qp_to_spinor", "change_variables_zero", "qp_from_free",
    "theta_free", "theta_spinor",
    "propagate_physical", "direct_kepler_oracle",
    "kepler_period", "kepler_closed_form", "circular_state", "periapsis_state",
    "TRAJECTORY_HEADER",
]

Regime = Literal["neg", "pos", "zero"]
_SQRT2 = math.sqrt(2.0)
MAX_DLAMBDA = 600.0


# -- group laws ------------------------------------------------------------

@dataclass(frozen=True)
class HarmonicElement:
    """Element (lambda, C, phase) of the extended oscillator group; C in C^4."""

    lam: float
    C: np.ndarray
    phase: complex = 1.0

    @classmethod
    def identity(cls) -> "HarmonicElement":
        return cls(0.0, np.zeros(4, dtype=complex), 1.0 + 0j)


@dataclass(frozen=True)
class RepulsiveElement:
    lam: float
    alpha: np.ndarray
    nu: np.ndarray
    phase: complex = 1.0

    @classmethod
    def identity(cls) -> "RepulsiveElement":
        return cls(0.0, np.zeros(4), np.zeros(4), 1.0 + 0j)


@dataclass(frozen=True)
class FreeElement:
    lam: float
    a: np.ndarray
    b: np.ndarray
    A: np.ndarray
    B: np.ndarray
    phase: complex = 1.0

    @classmethod
    def identity(cls) -> "FreeElement":
        z = np.zeros(2)
        return cls(0.0, z, z, z, z, 1.0 + 0j)


def group_compose_harmonic(g2: HarmonicElement, g1: HarmonicElement) -> HarmonicElement:
    """Product g2 * g1 of the centrally extended oscillator group."""
    lam = g1.lam
    C2, C1 = np.asarray(g2.C, complex), np.asarray(g1.C, complex)
    C2d, C1d = C2.conj(), C1.conj()
    e = np.exp(-1j * lam)
    C = C2 * e + C1
    expo = 0.5j * (1j * (C2 @ C1d) * e - 1j * (C2d @ C1) / e)
    return HarmonicElement(g2.lam + lam, C, g2.phase * g1.phase * np.exp(expo))


def group_compose_repulsive(g2: RepulsiveElement, g1: RepulsiveElement) -> RepulsiveElement:
    """Product g2 * g1 of the extended repulsive-oscillator group."""
    lam = g1.lam
    a2, n2 = np.asarray(g2.alpha, float), np.asarray(g2.nu, float)
    a1, n1 = np.asarray(g1.alpha, float), np.asarray(g1.nu, float)
    alpha = a2 * math.exp(lam) + a1
    nu = n2 * math.exp(-lam) + n1
    expo = 0.5j * ((a1 @ n2) * math.exp(-lam) - (a2 @ n1) * math.exp(lam))
    return RepulsiveElement(g2.lam + lam, alpha, nu, g2.phase * g1.phase * np.exp(expo))


def group_compose_free(g2: FreeElement, g1: FreeElement) -> FreeElement:
    """Product g2 * g1 of the extended free-particle group (opposite-sign (a, A) cocycle)."""
    lam = g1.lam
    a = g1.a + g2.a + g2.A * lam
    b = g1.b + g2.b + g2.B * lam
    A = g1.A + g2.A
    B = g1.B + g2.B
    ph = np.exp(1j * (g2.a @ g1.A + lam * (g2.A @ g1.A + 0.5 * g2.A @ g2.A)))
    ph *= np.exp(1j * (g1.b @ g2.B + 0.5 * (g2.B @ g2.B) * lam))
    return FreeElement(g2.lam + lam, a, b, A, B, g2.phase * g1.phase * ph)


def group_inverse(g):
    """Two-sided inverse for any of the three element types."""
    if isinstance(g, HarmonicElement):
        probe = HarmonicElement(-g.lam, -np.asarray(g.C) * np.exp(1j * g.lam), 1.0)
        compose = group_compose_harmonic
    elif isinstance(g, RepulsiveElement):
        probe = RepulsiveElement(-g.lam, -np.asarray(g.alpha) * math.exp(-g.lam),
                                 -np.asarray(g.nu) * math.exp(g.lam), 1.0)
        compose = group_compose_repulsive
    elif isinstance(g, FreeElement):
        probe = FreeElement(-g.lam, -g.a + g.A * g.lam, -g.b + g.B * g.lam, -g.A, -g.B, 1.0)
        compose = group_compose_free
    else:
        raise TypeError(f"not a group element: {type(g).__name__}")
    phase = compose(probe, g).phase
    return type(g)(**{**probe.__dict__, "phase": 1.0 / phase})


# -- linear states and exact flows -------------------------------------------

@dataclass(frozen=True)
class OscillatorState:
    """C = (eta, conj(zeta)) at fictitious time ``lam``; C may carry a leading sample axis."""

    C: np.ndarray
    lam: float | np.ndarray = 0.0


@dataclass(frozen=True)
class RepulsiveState:
    alpha: np.ndarray
    nu: np.ndarray
    lam: float | np.ndarray = 0.0


@dataclass(frozen=True)
class FreeState:
    a: np.ndarray
    b: np.ndarray
    A: np.ndarray
    B: np.ndarray
    lam: float | np.ndarray = 0.0


def _col(dlambda):
    d = np.asarray(dlambda, dtype=float)
    return d[..., None] if d.ndim else d


def flow_harmonic(s0: OscillatorState, dlambda) -> OscillatorState:
    """C -> C exp(-i dlambda).  ``dlambda`` may be an array (one state per entry)."""
    C = np.asarray(s0.C, complex) * np.exp(-1j * _col(dlambda))
    return OscillatorState(C, s0.lam + np.asarray(dlambda, float))


def flow_repulsive(s0: RepulsiveState, dlambda, max_dlambda: float = MAX_DLAMBDA) -> RepulsiveState:
    """alpha -> alpha e^dlambda, nu -> nu e^-dlambda; products alpha_i nu_i are invariant."""
    d = np.asarray(dlambda, float)
    if np.any(np.abs(d) > max_dlambda):
        raise DomainError(f"|dlambda| exceeds {max_dlambda} (exp overflow guard)")
    dc = _col(d)
    return RepulsiveState(np.asarray(s0.alpha, float) * np.exp(dc),
                          np.asarray(s0.nu, float) * np.exp(-dc), s0.lam + d)


def flow_free(s0: FreeState, dlambda) -> FreeState:
    """a -> a + A dlambda, b -> b + B dlambda; momenta constant."""
    dc = _col(dlambda)
    A = np.asarray(s0.A, float)
    B = np.asarray(s0.B, float)
    return FreeState(np.asarray(s0.a, float) + A * dc, np.asarray(s0.b, float) + B * dc,
                     A * np.ones_like(dc), B * np.ones_like(dc),
                     s0.lam + np.asarray(dlambda, float))


# -- changes of variables ----------------------------------------------------

def oscillator_from_spinor(p: SpinorPoint, lam: float = 0.0) -> OscillatorState:
    return OscillatorState(np.concatenate([p.eta_array, p.zeta_array.conj()]), lam)


def _spinor_arrays_from_C(C: np.ndarray):
    C = np.asarray(C, complex)
    return C[..., :2], C[..., 2:].conj()


def spinor_from_oscillator(s: OscillatorState) -> SpinorPoint:
    eta, zeta = _spinor_arrays_from_C(s.C)
    return SpinorPoint(tuple(eta), tuple(zeta))


def _qp_from_eta_zeta(eta, zeta):
    z = (eta + zeta) / _SQRT2
    w = (eta - zeta) / _SQRT2
    q = np.stack([z[..., 0].real, z[..., 0].imag, z[..., 1].real, z[..., 1].imag], axis=-1)
    p = np.stack([w[..., 0].real, w[..., 0].imag, w[..., 1].real, w[..., 1].imag], axis=-1)
    return q, p


def _eta_zeta_from_qp(q, p):
    q = np.asarray(q, float)
    p = np.asarray(p, float)
    z = np.stack([q[..., 0] + 1j * q[..., 1], q[..., 2] + 1j * q[..., 3]], axis=-1)
    w = np.stack([p[..., 0] + 1j * p[..., 1], p[..., 2] + 1j * p[..., 3]], axis=-1)
    return (z + w) / _SQRT2, (z - w) / _SQRT2


def spinor_to_qp(p: SpinorPoint) -> np.ndarray:
    """Real chart (q0..q3, p0..p3) with z = (q0 + i q1, q2 + i q3), w likewise."""
    q, pp = _qp_from_eta_zeta(p.eta_array, p.zeta_array)
    return np.concatenate([q, pp])


def qp_to_spinor(qp) -> SpinorPoint:
    qp = np.asarray(qp, float)
    eta, zeta = _eta_zeta_from_qp(qp[:4], qp[4:])
    return SpinorPoint(tuple(eta), tuple(zeta))


def _alpha_nu_from_qp(q, p):
    alpha = np.stack([q[..., 0] - p[..., 1], q[..., 1] + p[..., 0],
                      q[..., 2] - p[..., 3], q[..., 3] + p[..., 2]], axis=-1)
    nu = np.stack([q[..., 0] + p[..., 1], q[..., 1] - p[..., 0],
                   q[..., 2] + p[..., 3], q[..., 3] - p[..., 2]], axis=-1)
    return alpha, nu


def _qp_from_alpha_nu(alpha, nu):
    alpha = np.asarray(alpha, float)
    nu = np.asarray(nu, float)
    q = 0.5 * (alpha + nu)
    p = np.stack([0.5 * (alpha[..., 1] - nu[..., 1]), 0.5 * (nu[..., 0] - alpha[..., 0]),
                  0.5 * (alpha[..., 3] - nu[..., 3]), 0.5 * (nu[..., 2] - alpha[..., 2])], axis=-1)
    return q, p


def change_variables_positive(p: SpinorPoint, lam: float = 0.0) -> RepulsiveState:
    """
    Spinor point -> repulsive-oscillator variables (alpha, nu).

    Inverts ``q_i = (alpha_{i+1} + nu_{i+1})/2``, ``p_0 = (alpha_2 - nu_2)/2``,
    ``p_1 = (nu_1 - alpha_1)/2``, ``p_2 = (alpha_4 - nu_4)/2``,
    ``p_3 = (nu_3 - alpha_3)/2``.  In these variables ``-P0 = -sum(alpha*nu)/2``.
    """
    q, pp = _qp_from_eta_zeta(p.eta_array, p.zeta_array)
    alpha, nu = _alpha_nu_from_qp(q, pp)
    return RepulsiveState(alpha, nu, lam)


def spinor_from_repulsive(s: RepulsiveState) -> SpinorPoint:
    eta, zeta = _eta_zeta_from_qp(*_qp_from_alpha_nu(s.alpha, s.nu))
    return SpinorPoint(tuple(eta), tuple(zeta))


def change_variables_zero(qp, lam: float = 0.0) -> FreeState:
    """Relabel (q, p) as b0=q0, a0=q1, B0=p1, A0=p0, b1=q2, a1=q3, B1=p3, A1=p2."""
    qp = np.asarray(qp, float)
    q, p = qp[..., :4], qp[..., 4:]
    return FreeState(a=np.stack([q[..., 1], q[..., 3]], -1), b=np.stack([q[..., 0], q[..., 2]], -1),
                     A=np.stack([p[..., 0], p[..., 2]], -1), B=np.stack([p[..., 1], p[..., 3]], -1),
                     lam=lam)


def qp_from_free(s: FreeState) -> np.ndarray:
    a, b, A, B = (np.asarray(v, float) for v in (s.a, s.b, s.A, s.B))
    q = np.stack([b[..., 0], a[..., 0], b[..., 1], a[..., 1]], -1)
    p = np.stack([A[..., 0], B[..., 0], A[..., 1], B[..., 1]], -1)
    return np.concatenate([q, p], axis=-1)


def theta_spinor(p: SpinorPoint, dp: SpinorPoint) -> float:
    """Im(<eta, d eta> - <zeta, d zeta>) on the tangent vector ``dp``."""
    return float((np.vdot(p.eta_array, dp.eta_array) - np.vdot(p.zeta_array, dp.zeta_array)).imag)


def theta_free(s: FreeState, ds: FreeState) -> float:
    """Free-particle potential form: -B db + b dB (b-pairs) and A da - a dA (a-pairs)."""
    return float(np.sum(-s.B * ds.b + s.b * ds.B) + np.sum(s.A * ds.a - s.a * ds.A))


# -- physical propagation ------------------------------------------------------

TRAJECTORY_HEADER = ["s", "t", "x1", "x2", "x3", "y1", "y2", "y3",
                     "H", "L1", "L2", "L3", "RL1", "RL2", "RL3"]


@dataclass
class Trajectory:
    """
    Sampled physical trajectory.

    Arrays share a leading sample axis: ``s`` and ``t`` have shape (n,),
    ``X, Y, L, RL`` shape (n, 3), ``H`` shape (n,).
    """

    s: np.ndarray
    t: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    H: np.ndarray
    L: np.ndarray
    RL: np.ndarray
    m: float = 1.0
    gamma: float = 1.0
    regime: str = "direct"
    diverged: bool = False
    events: list = field(default_factory=list)
    linear_norm: np.ndarray | None = None
    wall_time: float = 0.0

    def __len__(self):
        return len(self.s)

    @property
    def samples(self):
        for i in range(len(self.s)):
            state = KeplerState(tuple(self.X[i]), tuple(self.Y[i]), self.m, self.gamma)
            yield (float(self.s[i]), float(self.t[i]), state, float(self.H[i]), self.L[i], self.RL[i])

    def drift(self) -> dict:
        """Max deviation of H, L and RL from their initial values."""
        return {
            "H": float(np.max(np.abs(self.H - self.H[0]))),
            "L": float(np.max(np.abs(self.L - self.L[0]))),
            "RL": float(np.max(np.abs(self.RL - self.RL[0]))),
        }

    def rows(self):
        for i in range(len(self.s)):
            yield [self.s[i], self.t[i], *self.X[i], *self.Y[i], self.H[i], *self.L[i], *self.RL[i]]

    def to_csv(self, handle=None) -> str | None:
        """Write the CSV (17 significant digits); returns the text if no handle is given."""
        buf = io.StringIO() if handle is None else handle
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRAJECTORY_HEADER)
        for row in self.rows():
            writer.writerow([f"{float(v):.17g}" for v in row])
        return buf.getvalue() if handle is None else None

    @classmethod
    def from_csv(cls, text: str, m: float = 1.0, gamma: float = 1.0) -> "Trajectory":
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        reader = csv.reader(lines)
        header = next(reader)
        if header != TRAJECTORY_HEADER:
            raise ValueError("unexpected trajectory header")
        data = np.array([[float(v) for v in row] for row in reader]).reshape(-1, len(header))
        return cls(data[:, 0], data[:, 1], data[:, 2:5], data[:, 5:8], data[:, 8],
                   data[:, 9:12], data[:, 12:15], m, gamma)


def _physical_arrays(eta, zeta, m, gamma, k):
    """Vectorized momentum map + physical chart; returns X, Y, r_lin, collision mask."""
    ez = np.einsum("ni,ni->n", eta.conj(), zeta)
    esz = np.einsum("ni,kij,nj->nk", eta.conj(), PAULI, zeta)
    M = -0.5 * np.einsum("ni,kij,nj->nk", eta.conj(), PAULI, eta).real
    N = 0.5 * np.einsum("ni,kij,nj->nk", zeta.conj(), PAULI, zeta).real
    P0 = ez.real
    Pv = esz.imag
    Qv = esz.real
    Pn = np.sqrt(P0 ** 2 + np.sum(Pv ** 2, axis=1))
    sm = math.sqrt(m)
    Xlin = Qv - (M - N)
    X = Xlin / (sm * k)
    denom = Pn + P0
    with np.errstate(divide="ignore", invalid="ignore"):
        Y = k * sm * Pv / denom[:, None]
    collision = ~(np.linalg.norm(Xlin, axis=1) > 0)
    return X, Y, collision


def _derived(X, Y, m, gamma):
    r = np.linalg.norm(X, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        H = np.sum(Y * Y, axis=1) / (2 * m) - gamma / r
        L = np.cross(X, Y)
        RL = np.cross(Y, L) / m - gamma * X / r[:, None]
    return H, L, RL


def _regime_of(H: float, scale: float, tol: float = 1e-12) -> str:
    if abs(H) <= tol * scale:
        return "zero"
    return "neg" if H < 0 else "pos"


def propagate_physical(initial: KeplerState, regime: Regime, n_steps: int,
                       dlambda: float, k: float | None = None,
                       time_quadrature: str = "exact") -> Trajectory:
    """
    Propagate a Kepler state through the exact linearized flow.

    Parameters
    ----------
    initial : KeplerState
        Off-collision initial state.
    regime : {"neg", "pos", "zero"}
        Must agree with the sign of the initial energy.
    n_steps : int
        Number of fictitious-time steps; ``n_steps + 1`` samples are returned.
    dlambda : float
        Fictitious-time step ``ds``.
    k : float, optional
        Scale for the zero-energy regime (defaults to ``initial.k``).  For
        ``neg``/``pos`` the scale is fixed by the energy, ``k = sqrt(2|H|)``.
    time_quadrature : {"exact", "trapezoid"}
        ``exact`` uses :func:`physical_time`; ``trapezoid`` applies the
        trapezoidal rule to ``dt/ds = sqrt(m) r / k``.

    Returns
    -------
    Trajectory
        Samples at ``s = j * dlambda`` with physical time from
        :func:`physical_time`.

    Raises
    ------
    ConstraintError
        If ``regime`` disagrees with the energy of ``initial``.
    """
    if time_quadrature not in ("exact", "trapezoid"):
        raise ValueError(f"unknown time_quadrature {time_quadrature!r}")
    t0 = time.perf_counter()
    m, gamma = initial.m, initial.gamma
    H0 = kepler_energy(initial)
    scale = float(initial.y @ initial.y / (2 * m) + gamma / initial.r)
    actual = _regime_of(H0, scale)
    if actual != regime:
        raise ConstraintError(f"regime {regime!r} does not match initial energy H = {H0!r}")
    if regime == "zero":
        k = initial.k if k is None else k
    else:
        k = math.sqrt(2.0 * abs(H0))
    p0 = lift(initial, k)
    s = np.arange(n_steps + 1, dtype=float) * dlambda

    if regime == "neg":
        # physical time runs against the group-law phase: C(s) = C0 e^{+is/2}
        st = flow_harmonic(oscillator_from_spinor(p0), -0.5 * s)
        eta, zeta = _spinor_arrays_from_C(st.C)
    elif regime == "pos":
        st = flow_repulsive(change_variables_positive(p0), 0.5 * s)
        eta, zeta = _eta_zeta_from_qp(*_qp_from_alpha_nu(st.alpha, st.nu))
    else:
        fs = change_variables_zero(spinor_to_qp(p0))
        # the (b, B) pairs carry the opposite symplectic sign, so b drifts along -B
        moved = flow_free(FreeState(fs.a, fs.b, fs.A, -fs.B), 0.5 * s)
        qp = qp_from_free(FreeState(moved.a, moved.b, moved.A, -moved.B))
        eta, zeta = _eta_zeta_from_qp(qp[..., :4], qp[..., 4:])

    X, Y, collision = _physical_arrays(eta, zeta, m, gamma, k)
    H, L, RL = _derived(X, Y, m, gamma)
    r = np.linalg.norm(X, axis=1)
    if time_quadrature == "exact":
        t = physical_time(s, X, Y, r, 0.0 if regime == "zero" else H0, m, gamma, k)
    else:
        t = np.zeros_like(s)
        t[1:] = np.cumsum(0.5 * (r[1:] + r[:-1]) * np.diff(s)) * math.sqrt(m) / k
    events = [{"kind": "collision", "s": float(s[i])} for i in np.flatnonzero(collision)]
    for i in range(1, len(r) - 1):
        if r[i] < r[i - 1] and r[i] <= r[i + 1]:
            events.append({"kind": "pericenter", "s": float(s[i]), "t": float(t[i]), "r": float(r[i])})
    lin = np.sqrt(np.sum(np.abs(eta) ** 2 + np.abs(zeta) ** 2, axis=1))
    return Trajectory(s, t, X, Y, H, L, RL, m, gamma, regime, False, events, lin,
                      time.perf_counter() - t0)


def physical_time(s, X, Y, r, H, m, gamma, k) -> np.ndarray:
    """
    Physical time along a regularized orbit, ``dt/ds = sqrt(m) r / k``, in closed form.

    For ``H != 0`` the virial identity ``d(x.y)/dt = 2H + gamma/r`` integrates
    to ``t = (x.y - x0.y0) / (2H) - sqrt(m) gamma s / (2 H k)``.  For ``H = 0``
    the radius is a quadratic polynomial in ``s`` and is integrated exactly.
    """
    s = np.asarray(s, dtype=float)
    if H != 0.0 and len(s) > 0:
        with np.errstate(invalid="ignore"):
            xy = np.einsum("ij,ij->i", X, Y)
        # x.y -> 0 at a collision (|y| grows like r^-1/2)
        xy = np.where(np.asarray(r) == 0.0, 0.0, xy)
        return (xy - xy[0]) / (2.0 * H) - math.sqrt(m) * gamma * (s - s[0]) / (2.0 * H * k)
    if len(s) < 3:
        # fewer than three samples: trapezoid (exact for linear r)
        t = np.zeros_like(s)
        if len(s) == 2:
            t[1] = 0.5 * (r[0] + r[1]) * (s[1] - s[0]) * math.sqrt(m) / k
        return t
    c2, c1, c0 = np.polyfit(s - s[0], r, 2)
    u = s - s[0]
    return (c0 * u + c1 * u ** 2 / 2 + c2 * u ** 3 / 3) * math.sqrt(m) / k


def _accel(x, m, gamma):
    r = math.sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
    return -gamma * x / (r ** 3), r


def direct_kepler_oracle(initial: KeplerState, t_end: float, n_steps: int) -> Trajectory:
    """
    Classic fixed-step RK4 on X' = Y/m, Y' = -gamma X/|X|^3.

    Stops early and sets ``diverged`` if the state becomes non-finite, falls
    into the origin, or a single step changes the energy by more than the
    initial scale ``|Y|^2/2m + gamma/r`` (a step taken through the collision).
    """
    t0 = time.perf_counter()
    m, gamma = initial.m, initial.gamma
    h = t_end / n_steps
    X = np.empty((n_steps + 1, 3))
    Y = np.empty((n_steps + 1, 3))
    x = initial.x.astype(float).copy()
    y = initial.y.astype(float).copy()
    X[0], Y[0] = x, y
    diverged = False
    n_done = n_steps
    scale = float(y @ y / (2 * m) + gamma / np.linalg.norm(x))
    e_prev = float(y @ y / (2 * m) - gamma / np.linalg.norm(x))
    for i in range(n_steps):
        try:
            a1, r = _accel(x, m, gamma)
            k1x, k1y = y / m, a1
            a2, _ = _accel(x + 0.5 * h * k1x, m, gamma)
            k2x, k2y = (y + 0.5 * h * k1y) / m, a2
            a3, _ = _accel(x + 0.5 * h * k2x, m, gamma)
            k3x, k3y = (y + 0.5 * h * k2y) / m, a3
            a4, _ = _accel(x + h * k3x, m, gamma)
            k4x, k4y = (y + h * k3y) / m, a4
        except ZeroDivisionError:
            diverged = True
        else:
            x = x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
            y = y + h / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))) or not np.any(x):
                diverged = True
            else:
                e_new = float(y @ y / (2 * m) - gamma / math.sqrt(x @ x))
                diverged = abs(e_new - e_prev) > scale
                e_prev = e_new
        if diverged:
            n_done = i
            break
        X[i + 1], Y[i + 1] = x, y
    X, Y = X[: n_done + 1], Y[: n_done + 1]
    t = np.arange(n_done + 1) * h
    H, L, RL = _derived(X, Y, m, gamma)
    return Trajectory(t.copy(), t, X, Y, H, L, RL, m, gamma, "direct", diverged, [], None,
                      time.perf_counter() - t0)


# -- closed-form references ------------------------------------------------------

def kepler_period(state: KeplerState) -> float:
    """2 pi sqrt(m a^3 / gamma) for a bound state, a = gamma / (2|H|)."""
    H = kepler_energy(state)
    if H >= 0:
        raise ConstraintError("period requires a bound (H < 0) state")
    a = state.gamma / (-2.0 * H)
    return 2.0 * math.pi * math.sqrt(state.m * a ** 3 / state.gamma)


def kepler_closed_form(state: KeplerState, t: float, tol: float = 1e-15, max_iter: int = 100) -> np.ndarray:
    """
    Position of a bound orbit after time ``t`` from Kepler's equation.

    Solves ``n t = dE + (sigma0 / sqrt(mu a)) (1 - cos dE) - (1 - r0/a) sin dE``
    for the eccentric-anomaly increment by Newton iteration and applies the
    Lagrange f and g coefficients.  ``mu = gamma / m``.
    """
    mu = state.gamma / state.m
    x0 = state.x
    v0 = state.y / state.m
    r0 = float(np.linalg.norm(x0))
    H = kepler_energy(state)
    if H >= 0:
        raise ConstraintError("closed form implemented for bound orbits only")
    a = state.gamma / (-2.0 * H)
    n = math.sqrt(mu / a ** 3)
    sig = float(x0 @ v0) / math.sqrt(mu * a)
    c = 1.0 - r0 / a
    Mt = n * t
    # f is increasing (f' >= 1 - e > 0) and |f(dE) - dE + Mt| <= 2, so [Mt-2, Mt+2] brackets the root
    lo, hi = Mt - 2.0, Mt + 2.0
    dE = Mt
    for _ in range(max_iter):
        f = dE + sig * (1 - math.cos(dE)) - c * math.sin(dE) - Mt
        if f > 0:
            hi = dE
        else:
            lo = dE
        fp = 1 + sig * math.sin(dE) - c * math.cos(dE)
        nxt = dE - f / fp
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        step = nxt - dE
        dE = nxt
        if abs(step) < tol * max(1.0, abs(dE)) or hi - lo < tol * max(1.0, abs(dE)):
            break
    fcoef = 1.0 - a / r0 * (1.0 - math.cos(dE))
    gcoef = t - (dE - math.sin(dE)) / n
    return fcoef * x0 + gcoef * v0


def circular_state(m: float = 1.0, gamma: float = 1.0, radius: float = 1.0) -> KeplerState:
    """Circular orbit in the xy-plane, speed chosen so that |Y|^2/m = gamma/r."""
    speed = math.sqrt(m * gamma / radius)
    return KeplerState((radius, 0.0, 0.0), (0.0, speed, 0.0), m, gamma)


def periapsis_state(e: float, a: float = 1.0, m: float = 1.0, gamma: float = 1.0) -> KeplerState:
    """Bound orbit of eccentricity ``e`` and semi-major axis ``a`` starting at pericenter."""
    mu = gamma / m
    rp = a * (1.0 - e)
    vp = math.sqrt(mu * (1.0 + e) / rp)
    return KeplerState((rp, 0.0, 0.0), (0.0, m * vp, 0.0), m, gamma)
