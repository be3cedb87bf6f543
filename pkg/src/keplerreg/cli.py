"""
Batch command-line front end.

    keplerreg <verify|spectrum|propagate|benchmark> [--config FILE] [flags]

Exit codes: 0 success, 1 check failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import dynamics, ks_map, phasespace, quantum
from .errors import ConstraintError, KeplerRegError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
COMMANDS = ("verify", "spectrum", "propagate", "benchmark")
REGIMES = ("neg", "pos", "zero")


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    command: str = "verify"
    m: float = 1.0
    gamma: float = 1.0
    k: float = 1.0
    regime: str = "neg"
    cutoff: int = 8
    n_steps: int = 10000
    dlambda: float | None = None
    seed: int = 0
    out: str | None = None
    format: str = "json"
    state: str | None = None
    n_points: int = 100
    eccentricities: list = field(default_factory=lambda: [0.5, 0.9, 0.99])
    timing: bool = False
    inject_fault: bool = False

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.regime not in REGIMES:
            raise ConfigError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        for name in ("m", "gamma", "k"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be a positive number")
        if self.cutoff < 2:
            raise ConfigError("cutoff must be >= 2")
        if self.command == "verify" and self.cutoff < 6:
            raise ConfigError("verify needs cutoff >= 6 (truncation-safe products)")
        if self.n_steps < 1:
            raise ConfigError("n_steps must be positive")
        if any(not (0.0 <= e < 1.0) for e in self.eccentricities):
            raise ConfigError("eccentricities must lie in [0, 1)")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_sources(cls, command: str, config_path: str | None, overrides: dict) -> "RunConfig":
        data: dict = {}
        if config_path:
            try:
                with open(config_path) as fh:
                    data = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
            if not isinstance(data, dict):
                raise ConfigError("config file must hold a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        data["command"] = command
        try:
            cfg = cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        return cfg.validate()


# -- verify --------------------------------------------------------------------

def _check(name, residual, tol, detail=None):
    residual = float(residual)
    entry = {"name": name, "residual": residual, "tolerance": tol,
             "passed": bool(math.isfinite(residual) and residual <= tol)}
    if detail is not None:
        entry["detail"] = detail
    return entry


def _rel(a, b):
    """Error relative to max(1, |b|)."""
    return abs(a - b) / max(1.0, abs(b))


def _random_constraint_states(cfg, rng):
    out = []
    for i in range(cfg.n_points):
        p = phasespace.sample_constraint_point(cfg.seed * 100003 + i)
        out.append((p, ks_map.momentum_map(p), float(rng.uniform(0.25, 4.0))))
    return out


def _pullback_residuals(cfg, rng, h=1e-4):
    ks, free = 0.0, 0.0
    for i in range(cfg.n_points):
        p = phasespace.sample_constraint_point(cfg.seed * 7919 + i)
        cp = ks_map.collision_extraction(p)
        z, w = cp.z_array, cp.w_array
        dz = rng.normal(size=2) + 1j * rng.normal(size=2)
        dw = rng.normal(size=2) + 1j * rng.normal(size=2)
        # tangent to Re<z, w> = 0
        g = np.concatenate([w, z])
        v = np.concatenate([dz, dw])
        v = v - np.vdot(g, v).real * g / np.vdot(g, g).real
        dz, dw = v[:2], v[2:]
        x_plus, y0 = ks_map.ks_pi(ks_map.CotangentPoint(tuple(z + h * dz), tuple(w)))
        x_minus, _ = ks_map.ks_pi(ks_map.CotangentPoint(tuple(z - h * dz), tuple(w)))
        _, y = ks_map.ks_pi(cp)
        dx = (x_plus - x_minus) / (2 * h)
        ks = max(ks, abs(float(y @ dx) - 2 * float(np.vdot(w, dz).imag)))

        qp = dynamics.spinor_to_qp(p)
        dqp = rng.normal(size=8)
        fs = dynamics.change_variables_zero(qp)
        dfs_plus = dynamics.change_variables_zero(qp + h * dqp)
        dfs_minus = dynamics.change_variables_zero(qp - h * dqp)
        dfs = dynamics.FreeState(*((getattr(dfs_plus, a) - getattr(dfs_minus, a)) / (2 * h)
                                   for a in ("a", "b", "A", "B")))
        sp_plus = dynamics.qp_to_spinor(qp + h * dqp)
        sp_minus = dynamics.qp_to_spinor(qp - h * dqp)
        dsp = phasespace.SpinorPoint(tuple((sp_plus.eta_array - sp_minus.eta_array) / (2 * h)),
                                     tuple((sp_plus.zeta_array - sp_minus.zeta_array) / (2 * h)))
        free = max(free, abs(dynamics.theta_spinor(p, dsp) - dynamics.theta_free(fs, dfs)))
    return ks, free


def _faulty_generators(rep):
    """Generators with a sign error planted in one monomial of M1 (negative control)."""
    polys = phasespace.momentum_map_polynomials()
    m1 = polys["M1"]
    first = sorted(m1.terms)[0]
    terms = dict(m1.terms)
    terms[first] = -terms[first]
    ops = dict(rep.generators)
    ops["M1"] = rep.quantize(phasespace.PhasePolynomial(terms), "M1")
    return ops


def cmd_verify(cfg: RunConfig) -> tuple[int, dict]:
    """Run every invariant check; exit 0 iff all pass."""
    rng = np.random.default_rng(cfg.seed)
    checks = []
    polys = phasespace.momentum_map_polynomials()
    table = quantum.classical_table()
    central = max(
        (0.0 if not phasespace.poisson_bracket(polys["I"], p) else 1.0) for p in polys.values())
    checks.append(_check("poisson.I_central", central, 0.0))
    checks.append(_check("poisson.antisymmetry", table.antisymmetry_residual(), 0.0))
    checks.append(_check("poisson.jacobi", table.jacobi_residual(), 0.0))

    sm = math.sqrt(cfg.m)
    tab_h = tab_l = tab_rl = shell_neg = shell_pos = pnorm = 0.0
    for p, mm, k in _random_constraint_states(cfg, rng):
        pnorm = max(pnorm, abs(mm.P_norm - mm.J))
        st = ks_map.to_physical(mm, cfg.m, cfg.gamma, k)
        h_phys = ks_map.kepler_energy(st)
        tab_h = max(tab_h, _rel(h_phys, ks_map.table_energy(mm, cfg.m, cfg.gamma, k)))
        tab_l = max(tab_l, float(np.abs(st.angular_momentum() - mm.L).max()))
        tab_rl = max(tab_rl, float(np.abs(ks_map.runge_lenz(st)
                                          - ks_map.runge_lenz_table(mm, cfg.m, cfg.gamma, k)).max()))
        kn = ks_map.calibrate_k(mm, cfg.m, cfg.gamma, "neg")
        hn = ks_map.kepler_energy(ks_map.to_physical(mm, cfg.m, cfg.gamma, kn))
        shell_neg = max(shell_neg, _rel(hn, -cfg.m * cfg.gamma ** 2 / (2 * mm.J ** 2)))
        if -mm.P[0] > 0:
            kp = ks_map.calibrate_k(mm, cfg.m, cfg.gamma, "pos")
            hp = ks_map.kepler_energy(ks_map.to_physical(mm, cfg.m, cfg.gamma, kp))
            shell_pos = max(shell_pos, _rel(hp, cfg.m * cfg.gamma ** 2 / (2 * mm.P[0] ** 2)))
    checks += [
        _check("dictionary.P_norm_equals_J", pnorm, 1e-12),
        _check("dictionary.hamiltonian", tab_h, 1e-12),
        _check("dictionary.angular_momentum", tab_l, 1e-12),
        _check("dictionary.runge_lenz", tab_rl, 1e-12),
        _check("shell.neg", shell_neg, 1e-12),
        _check("shell.pos", shell_pos, 1e-12),
    ]
    ks_res, free_res = _pullback_residuals(cfg, rng)
    checks += [_check("pullback.ks", ks_res, 1e-9), _check("pullback.free", free_res, 1e-9)]

    for regime in REGIMES:
        rep = quantum.representation(regime, cfg.cutoff)
        ops = _faulty_generators(rep) if (cfg.inject_fault and regime == "neg") else rep.generators
        qt = quantum.commutator_table(ops)
        checks.append(_check(f"closure.{regime}", qt.max_residual, 1e-12))
        checks.append(_check(f"oracle.{regime}", qt.max_difference(table.scaled(1j)), 1e-12))
        cas = quantum.casimir_check(ops)
        checks.append(_check(f"casimir.{regime}", cas.residual, 1e-10))
        neg_ctrl = quantum.casimir_check(ops, constrained=False)
        checks.append(_check(f"casimir.{regime}.unconstrained_nonscalar",
                             0.0 if not neg_ctrl.is_scalar else 1.0, 0.0))
    fock = quantum.fock_rep(cfg.cutoff)
    su2 = quantum.su2_identity_residual(fock)
    checks.append(_check("su2xsu2.identity", max(su2.values()), 1e-12))
    lor = quantum.lorentz_closure(quantum.monomial_rep_positive(cfg.cutoff))
    checks.append(_check("lorentz.pos", max(lor.values()), 1e-12))
    e3 = quantum.e3_closure(quantum.rep_zero(cfg.cutoff))
    checks.append(_check("e3.zero", max(e3[k] for k in ("[S,S]", "[L,S]")), 1e-12))

    failed = [c["name"] for c in checks if not c["passed"]]
    report = {"command": "verify", "seed": cfg.seed, "cutoff": cfg.cutoff,
              "checks": checks, "failed": failed, "passed": not failed}
    return (EXIT_OK if not failed else EXIT_FAIL), report


# -- spectrum ----------------------------------------------------------------------

def cmd_spectrum(cfg: RunConfig) -> tuple[int, dict | list]:
    if cfg.regime == "zero":
        r2 = quantum.zero_energy_shell(cfg.m, cfg.gamma, cfg.k)
        return EXIT_OK, {
            "regime": "zero",
            "message": "E = 0 has no discrete levels; the constraint is the sphere "
                       "sum(A_i^2 + B_i^2) = 2 gamma sqrt(m) / k",
            "k": cfg.k, "sphere_radius2": r2,
        }
    if cfg.regime == "neg":
        lines = quantum.hydrogen_spectrum_neg(cfg.cutoff, cfg.m, cfg.gamma)
        closed = [-cfg.m * cfg.gamma ** 2 / (2 * ln.n ** 2) for ln in lines]
    else:
        lines = quantum.positive_spectrum(cfg.cutoff, cfg.m, cfg.gamma)
        closed = [cfg.m * cfg.gamma ** 2 / (2 * ln.n ** 2) for ln in lines]
    records = [{**ln.to_dict(), "closed_form": c} for ln, c in zip(lines, closed)]
    return EXIT_OK, records


# -- propagate -------------------------------------------------------------------------

def _load_state(cfg: RunConfig) -> ks_map.KeplerState:
    if cfg.state is None:
        return dynamics.circular_state(cfg.m, cfg.gamma)
    try:
        with open(cfg.state) as fh:
            doc = json.load(fh)
        return ks_map.KeplerState.from_dict(doc)
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"cannot parse state file {cfg.state}: {exc}") from exc


def cmd_propagate(cfg: RunConfig) -> tuple[int, dynamics.Trajectory]:
    state = _load_state(cfg)
    dl = cfg.dlambda
    if dl is None:
        dl = 2 * math.pi / cfg.n_steps if cfg.regime == "neg" else 1e-2
    try:
        traj = dynamics.propagate_physical(state, cfg.regime, cfg.n_steps, dl, k=cfg.k)
    except ConstraintError as exc:
        raise ConfigError(str(exc)) from exc
    return EXIT_OK, traj


# -- benchmark ---------------------------------------------------------------------------

def _scenario(e: float, cfg: RunConfig) -> dict:
    state = dynamics.periapsis_state(e, 1.0, cfg.m, cfg.gamma)
    period = dynamics.kepler_period(state)
    n = cfg.n_steps
    reg = dynamics.propagate_physical(state, "neg", n, 2 * math.pi / n)
    rk = dynamics.direct_kepler_oracle(state, period, n)
    stride = max(1, n // 500)

    def pos_err(tr):
        idx = range(0, len(tr.t), stride)
        return max(float(np.abs(dynamics.kepler_closed_form(state, tr.t[i]) - tr.X[i]).max())
                   for i in idx)

    reg_drift = reg.drift()["H"]
    rk_drift = rk.drift()["H"] if np.all(np.isfinite(rk.H)) else math.inf
    out = {
        "eccentricity": e,
        "n_steps": n,
        "regularized": {"energy_drift": reg_drift, "position_error": pos_err(reg),
                        "t_end": float(reg.t[-1])},
        "direct_rk4": {"energy_drift": rk_drift, "position_error": pos_err(rk),
                       "diverged": rk.diverged},
        "drift_ratio": (rk_drift / reg_drift) if reg_drift > 0 else math.inf,
        "period": period,
    }
    if cfg.timing:
        out["timing"] = {"regularized_s_per_step": reg.wall_time / n,
                         "direct_rk4_s_per_step": rk.wall_time / n}
    return out


def cmd_benchmark(cfg: RunConfig) -> tuple[int, dict]:
    threads = max(1, int(os.environ.get("KEPLERREG_THREADS", "1") or 1))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda e: _scenario(e, cfg), cfg.eccentricities))
    rk = [r["direct_rk4"]["energy_drift"] for r in results]
    report = {
        "command": "benchmark",
        "config": cfg.to_dict(),
        "scenarios": results,
        "direct_drift_monotone": all(a <= b for a, b in zip(rk, rk[1:])),
    }
    return EXIT_OK, report


# -- plumbing -------------------------------------------------------------------------------

def _emit(cfg: RunConfig, text: str):
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _to_csv(records: list[dict]) -> str:
    import csv

    buf = io.StringIO()
    if records:
        writer = csv.DictWriter(buf, fieldnames=list(records[0]), lineterminator="\n")
        writer.writeheader()
        for r in records:
            writer.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=float) + "\n"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="keplerreg", description=__doc__.strip().splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON config file (flags override it)")
    ap.add_argument("--m", type=float)
    ap.add_argument("--gamma", type=float)
    ap.add_argument("--k", type=float)
    ap.add_argument("--regime", choices=REGIMES)
    ap.add_argument("--cutoff", type=int)
    ap.add_argument("--n-steps", dest="n_steps", type=int)
    ap.add_argument("--dlambda", type=float)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--n-points", dest="n_points", type=int)
    ap.add_argument("--out")
    ap.add_argument("--format", choices=("csv", "json"))
    ap.add_argument("--state", help="initial KeplerState JSON (propagate)")
    ap.add_argument("--eccentricities", type=lambda s: [float(v) for v in s.split(",")])
    ap.add_argument("--timing", action="store_true", default=None,
                    help="include wall-clock timings (makes output non-deterministic)")
    ap.add_argument("--inject-fault", dest="inject_fault", action="store_true", default=None,
                    help="plant a sign error in one generator (verify negative control)")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        cfg = RunConfig.from_sources(args.command, args.config, overrides)
        if cfg.command == "verify":
            code, report = cmd_verify(cfg)
            _emit(cfg, _json(report))
            for c in report["checks"]:
                if not c["passed"]:
                    print(f"FAILED {c['name']}: residual {c['residual']:.3g} > {c['tolerance']:g}",
                          file=sys.stderr)
            return code
        if cfg.command == "spectrum":
            code, rec = cmd_spectrum(cfg)
            text = _to_csv(rec) if (cfg.format == "csv" and isinstance(rec, list)) else _json(rec)
            _emit(cfg, text)
            return code
        if cfg.command == "propagate":
            code, traj = cmd_propagate(cfg)
            drift = traj.drift()
            if cfg.format == "csv":
                text = traj.to_csv()
                text += "".join(f"# max_drift_{k}={v:.17g}\n" for k, v in drift.items())
            else:
                text = _json({"regime": traj.regime, "drift": drift, "events": traj.events,
                              "header": dynamics.TRAJECTORY_HEADER,
                              "rows": [[float(v) for v in row] for row in traj.rows()]})
            _emit(cfg, text)
            return code
        code, report = cmd_benchmark(cfg)
        _emit(cfg, _json(report))
        return code
    except ConfigError as exc:
        print(f"keplerreg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeplerRegError as exc:
        print(f"keplerreg: check failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
