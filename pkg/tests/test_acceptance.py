"""
Acceptance suite: one test per criterion, each recording a PASS/FAIL line
(printed in the pytest terminal summary) before asserting.
"""

import math
import time

import numpy as np
import pytest

import oracles
from acceptance_log import record
from keplerreg import dynamics, ks_map, quantum
from keplerreg.phasespace import SpinorPoint, sample_constraint_point

REGIMES = ("neg", "pos", "zero")
CUTOFF = 8
N_POINTS = 120


@pytest.fixture(scope="module")
def reps():
    return {r: quantum.representation(r, CUTOFF) for r in REGIMES}


def test_criterion_01_hydrogen_spectrum():
    t0 = time.perf_counter()
    lines = quantum.hydrogen_spectrum_neg(10, 1.0, 1.0)
    elapsed = time.perf_counter() - t0
    by_n = {l.n: l for l in lines}
    err = max(abs(by_n[n].energy - e) for n, e, _ in oracles.hydrogen_levels(5))
    degs = [by_n[n].degeneracy for n in range(1, 6)]
    ok = err < 1e-12 and degs == [1, 4, 9, 16, 25] and elapsed < 10.0
    record(1, "hydrogen spectrum E_n = -1/2n^2, degeneracy n^2", ok,
           f"max |E - E_n| = {err:.2e}, degeneracies {degs}, {elapsed:.2f} s")
    assert ok


def test_criterion_02_su2_identity(reps):
    res = quantum.su2_identity_residual(reps["neg"])
    worst = max(res.values())
    ok = worst < 1e-12
    record(2, "(M)^2 = (N)^2 = J^2/4 - 1/4 on the I-kernel", ok, f"residual {worst:.2e}")
    assert ok


def test_criterion_03_lorentz_closure(reps):
    res = quantum.lorentz_closure(reps["pos"])
    worst = max(res.values())
    ok = worst < 1e-12 and len(res) == 3
    record(3, "Lorentz closure [L,L], [L,Q], [Q,Q] (E > 0)", ok, f"residual {worst:.2e}")
    assert ok


def test_criterion_04_e3_closure(reps):
    res = quantum.e3_closure(reps["zero"])
    worst = max(res["[S,S]"], res["[L,S]"])
    ok = worst < 1e-12
    record(4, "e(3) closure [S,S] = 0, [L,S] = -2i eps S (E = 0)", ok, f"residual {worst:.2e}")
    assert ok


def test_criterion_05_oracle_equivalence(reps):
    classical = quantum.classical_table().scaled(1j)
    diffs = {}
    for r in REGIMES:
        qt = quantum.commutator_table(reps[r].generators)
        diffs[r] = max(qt.max_difference(classical), qt.max_residual)
    worst = max(diffs.values())
    ok = worst < 1e-12
    record(5, "quantum table = i x Poisson table, all regimes", ok,
           ", ".join(f"{r} {d:.1e}" for r, d in diffs.items()))
    assert ok


def _rel(a, b):
    return abs(a - b) / max(1.0, abs(b))


def test_criterion_06_table_one():
    rng = np.random.default_rng(2024)
    eh = el = erl = 0.0
    for seed in range(N_POINTS):
        mm = ks_map.momentum_map(sample_constraint_point(seed))
        for m, g in ((1.0, 1.0), (2.0, 0.7)):
            k = float(rng.uniform(0.3, 3.0))
            st = ks_map.to_physical(mm, m, g, k)
            eh = max(eh, _rel(ks_map.kepler_energy(st), ks_map.table_energy(mm, m, g, k)))
            el = max(el, float(np.abs(st.angular_momentum() - mm.L).max()) / max(1.0, mm.J))
            rl = ks_map.runge_lenz(st)
            erl = max(erl, float(np.abs(rl - ks_map.runge_lenz_table(mm, m, g, k)).max())
                      / max(1.0, float(np.abs(rl).max())))
    ok = max(eh, el, erl) < 1e-12
    record(6, f"physical dictionary H, L, RL on {N_POINTS} I=0 points", ok,
           f"H {eh:.1e}, L {el:.1e}, RL {erl:.1e}")
    assert ok


def test_criterion_07_energy_shells():
    en = ep = 0.0
    n_pos = 0
    for seed in range(N_POINTS):
        mm = ks_map.momentum_map(sample_constraint_point(seed))
        for m, g in ((1.0, 1.0), (3.0, 0.5)):
            k = ks_map.calibrate_k(mm, m, g, "neg")
            en = max(en, _rel(ks_map.kepler_energy(ks_map.to_physical(mm, m, g, k)),
                              -m * g * g / (2 * mm.J ** 2)))
            if -mm.P[0] > 0:
                n_pos += 1
                k = ks_map.calibrate_k(mm, m, g, "pos")
                ep = max(ep, _rel(ks_map.kepler_energy(ks_map.to_physical(mm, m, g, k)),
                                  m * g * g / (2 * mm.P[0] ** 2)))
    ok = en < 1e-12 and ep < 1e-12 and n_pos > 0
    record(7, "energy shells H = -m g^2/2J^2 and +m g^2/2P0^2", ok,
           f"neg {en:.1e}, pos {ep:.1e} on {n_pos} pos samples")
    assert ok


def test_criterion_08_pullbacks():
    rng = np.random.default_rng(8)
    h = 1e-5
    ks_res = free_res = 0.0
    for seed in range(100):
        p = sample_constraint_point(seed)
        cp = ks_map.collision_extraction(p)
        z, w = cp.z_array, cp.w_array
        dz = rng.normal(size=2) + 1j * rng.normal(size=2)
        _, y = ks_map.ks_pi(cp)
        xp, _ = ks_map.ks_pi(ks_map.CotangentPoint(tuple(z + h * dz), tuple(w)))
        xm, _ = ks_map.ks_pi(ks_map.CotangentPoint(tuple(z - h * dz), tuple(w)))
        ks_res = max(ks_res, abs(y @ ((xp - xm) / (2 * h)) - 2 * np.vdot(w, dz).imag))

        qp = dynamics.spinor_to_qp(p)
        dqp = rng.normal(size=8)
        sp_, sm_ = dynamics.qp_to_spinor(qp + h * dqp), dynamics.qp_to_spinor(qp - h * dqp)
        dp = SpinorPoint(tuple((sp_.eta_array - sm_.eta_array) / (2 * h)),
                         tuple((sp_.zeta_array - sm_.zeta_array) / (2 * h)))
        fp, fm = dynamics.change_variables_zero(qp + h * dqp), dynamics.change_variables_zero(qp - h * dqp)
        dfs = dynamics.FreeState(*((getattr(fp, n) - getattr(fm, n)) / (2 * h) for n in ("a", "b", "A", "B")))
        free_res = max(free_res, abs(dynamics.theta_spinor(p, dp)
                                     - dynamics.theta_free(dynamics.change_variables_zero(qp), dfs)))
    ok = ks_res < 1e-9 and free_res < 1e-9
    record(8, "pullbacks pi*theta = 2 Im<w,dz> and the free-particle 1-form", ok,
           f"KS {ks_res:.1e}, free {free_res:.1e}")
    assert ok


def test_criterion_09_casimir(reps):
    on = {r: quantum.casimir_check(reps[r].generators) for r in REGIMES}
    off = {r: quantum.casimir_check(reps[r].generators, constrained=False) for r in REGIMES}
    ok = all(c.is_scalar and c.residual < 1e-10 for c in on.values()) and not any(
        c.is_scalar for c in off.values())
    record(9, "Casimir scalar on I-kernel, non-scalar off it", ok,
           "constrained " + ", ".join(f"{r} {c.residual:.1e}" for r, c in on.items())
           + "; unconstrained " + ", ".join(f"{r} {c.residual:.2f}" for r, c in off.items()))
    assert ok


def test_criterion_10_propagation():
    n = 10_000
    circ = dynamics.propagate_physical(dynamics.circular_state(), "neg", n, 2 * math.pi / n)
    drift = max(circ.drift().values())

    ecc = dynamics.periapsis_state(0.99)
    T = oracles.period_closed_form(ecc.x, ecc.y, ecc.m, ecc.gamma)
    nodes = 100_000
    trap = dynamics.propagate_physical(ecc, "neg", nodes, 2 * math.pi / nodes, time_quadrature="trapezoid")
    period_err = abs(trap.t[-1] - T) / T

    reg = dynamics.propagate_physical(ecc, "neg", n, 2 * math.pi / n)
    rk = dynamics.direct_kepler_oracle(ecc, T, n)
    reg_drift, rk_drift = reg.drift()["H"], rk.drift()["H"]
    ratio = rk_drift / reg_drift if reg_drift > 0 else math.inf
    ok = drift < 1e-12 and period_err < 1e-6 and ratio >= 1e3
    record(10, "propagation: circular drift, period, RK/regularized drift ratio at e=0.99", ok,
           f"drift {drift:.1e}, period rel err {period_err:.1e}, "
           f"ratio {ratio:.2e} (RK {rk_drift:.2e} vs {reg_drift:.2e}, {n} steps each)")
    assert ok
