import math

import numpy as np
import pytest
from scipy.special import comb

import oracles
from keplerreg.errors import StructuralError, UnsupportedError
from keplerreg.phasespace import GENERATOR_NAMES, momentum_map_polynomials, variable
from keplerreg.quantum import (
    GradedBasis,
    SparseOperator,
    casimir_check,
    classical_table,
    commutator_table,
    constraint_kernel,
    e3_closure,
    fock_rep,
    hydrogen_spectrum_neg,
    ladder_ops,
    lorentz_closure,
    monomial_rep_positive,
    positive_spectrum,
    rep_zero,
    representation,
    spectrum_to_json,
    su2_identity_residual,
    su22_generators,
    weyl_quantize,
    zero_energy_shell,
)

CUTOFF = 8


@pytest.fixture(scope="module", params=["neg", "pos", "zero"])
def rep(request):
    return representation(request.param, CUTOFF)


# -- basis ----------------------------------------------------------------------------------

@pytest.mark.parametrize("kind", ["fock4", "monomial4", "polyAB"])
@pytest.mark.parametrize("cutoff", [0, 2, 5])
def test_basis_dimension_and_bijection(kind, cutoff):
    b = GradedBasis(kind, cutoff)
    assert b.dim == comb(cutoff + 4, 4, exact=True) == GradedBasis.expected_dim(cutoff)
    assert len(set(b.multi)) == b.dim
    assert all(b.index[m] == i for i, m in enumerate(b.multi))
    assert np.all(b.degrees == [sum(m) for m in b.multi])


def test_safe_mask():
    b = GradedBasis("fock4", 6)
    np.testing.assert_array_equal(b.safe_mask(1), b.degrees <= 4)
    np.testing.assert_array_equal(b.safe_mask(2), b.degrees <= 2)


def test_operator_shape_checked():
    b = GradedBasis("fock4", 2)
    with pytest.raises(StructuralError):
        SparseOperator(b, np.eye(3))
    other = GradedBasis("fock4", 3)
    with pytest.raises(StructuralError):
        SparseOperator(b, np.eye(b.dim)) + SparseOperator(other, np.eye(other.dim))


# -- ladder operators -------------------------------------------------------------------------

def test_ladder_conventions():
    b = GradedBasis("fock4", 4)
    a, ad = ladder_ops(b)
    vac = np.zeros(b.dim)
    vac[b.index[(0, 0, 0, 0)]] = 1
    assert not np.any(a[0] @ vac)
    out = ad[0] @ vac
    assert out[b.index[(1, 0, 0, 0)]] == 1 and np.count_nonzero(out) == 1
    v = np.zeros(b.dim)
    v[b.index[(2, 0, 0, 0)]] = 1
    assert (ad[0] @ v)[b.index[(3, 0, 0, 0)]] == pytest.approx(math.sqrt(3))


def test_ccr_on_safe_subbasis():
    b = GradedBasis("fock4", 5)
    a, ad = ladder_ops(b)
    cols = b.degrees <= b.cutoff - 1
    eye = np.eye(b.dim)[:, cols]
    for i in range(4):
        for j in range(4):
            c = a[i].commutator(ad[j]).dense()[:, cols]
            np.testing.assert_allclose(c, eye if i == j else 0 * eye, atol=0)
    with pytest.raises(StructuralError):
        ladder_ops(GradedBasis("polyAB", 2))


# -- Weyl quantization ---------------------------------------------------------------------------

def test_weyl_one_mode_number_plus_half():
    b = GradedBasis("fock4", 4)
    n_op = weyl_quantize(variable("eta1*") * variable("eta1"), b)
    expect = np.diag([m[0] + 0.5 for m in b.multi])
    np.testing.assert_allclose(n_op.dense(), expect, atol=0)
    assert n_op.hermiticity_defect() == 0


def test_weyl_J_and_I_eigenvalues():
    g = momentum_map_polynomials()
    b = GradedBasis("fock4", 6)
    J = weyl_quantize(g["J"], b)
    I = weyl_quantize(g["I"], b)
    np.testing.assert_allclose(J.dense(), np.diag([0.5 * (2 + sum(m)) for m in b.multi]), atol=1e-15)
    np.testing.assert_allclose(I.dense(), np.diag([0.5 * (m[0] + m[1] - m[2] - m[3]) for m in b.multi]),
                               atol=1e-15)


def test_weyl_rejects_cubic():
    with pytest.raises(UnsupportedError):
        weyl_quantize(variable("eta1") ** 3, GradedBasis("fock4", 3))


def test_real_generators_hermitian_in_fock():
    ops = fock_rep(CUTOFF).generators
    for name in GENERATOR_NAMES:
        assert ops[name].hermiticity_defect() < 1e-15, name


# -- commutator tables vs Poisson oracle ---------------------------------------------------------

def test_commutator_table_equals_i_poisson(rep):
    qt = commutator_table(rep.generators)
    assert qt.max_residual < 1e-12
    assert qt.max_difference(classical_table().scaled(1j)) < 1e-12


def test_I_hat_central(rep):
    ops = rep.generators
    mask = rep.basis.safe_mask(2)
    for name in GENERATOR_NAMES:
        c = ops["I"].commutator(ops[name]).matrix[:, np.flatnonzero(mask)]
        assert (abs(c).max() if c.nnz else 0.0) < 1e-12


def test_commuting_pair_table_zero(rep):
    t = commutator_table({"I": rep.generators["I"], "J": rep.generators["J"]})
    assert t.is_zero(1e-12)


def test_su2_triple_table():
    ops = fock_rep(6).generators
    t = commutator_table({k: ops[k] for k in ("M1", "M2", "M3")})
    assert t.coefficient("M1", "M2", "M3") == pytest.approx(-1j, abs=1e-13)
    assert t.coefficient("M2", "M1", "M3") == pytest.approx(1j, abs=1e-13)
    assert t.antisymmetry_residual() < 1e-13


def test_su22_generators_verify_and_mismatch():
    ops = su22_generators(GradedBasis("fock4", 6), "neg")
    assert set(ops) == set(GENERATOR_NAMES)
    with pytest.raises(StructuralError):
        su22_generators(GradedBasis("fock4", 6), "pos")


def test_non_closing_set_reports_residual():
    r = fock_rep(6)
    bad = dict(r.generators)
    bad["M1"] = r.quantize(variable("eta1") * variable("zeta1"), "M1")
    assert commutator_table(bad).max_residual > 1e-3


def test_M_N_commute_neg():
    ops = fock_rep(CUTOFF).generators
    mask = np.flatnonzero(fock_rep(CUTOFF).basis.safe_mask(2))
    for i in range(1, 4):
        for j in range(1, 4):
            c = ops[f"M{i}"].commutator(ops[f"N{j}"]).matrix[:, mask]
            assert (abs(c).max() if c.nnz else 0.0) == 0.0


# -- kernel -------------------------------------------------------------------------------------------

def test_kernel_cutoff_two():
    rep2 = fock_rep(2)
    K = constraint_kernel(rep2.generators["I"])
    assert sorted(K.labels) == oracles.fock_kernel_states(2)
    assert set(K.labels) == {(0, 0, 0, 0), (1, 0, 1, 0), (1, 0, 0, 1), (0, 1, 1, 0), (0, 1, 0, 1)}


@pytest.mark.parametrize("cutoff", [4, 7])
def test_kernel_matches_enumeration(cutoff):
    K = constraint_kernel(fock_rep(cutoff).generators["I"])
    assert sorted(K.labels) == oracles.fock_kernel_states(cutoff)


def test_kernel_sector_dimension_n_squared():
    K = constraint_kernel(fock_rep(10).generators["I"])
    for n in range(1, 7):
        assert sum(1 for m in K.labels if m[0] + m[1] == n - 1) == n * n


@pytest.mark.parametrize("regime", ["pos", "zero"])
def test_kernel_contains_vacuum(regime):
    r = representation(regime, 6)
    K = constraint_kernel(r.generators["I"])
    vac = np.zeros(r.basis.dim)
    vac[0] = 1
    # projection of the constant polynomial onto the kernel is itself
    proj = K.V @ np.linalg.lstsq(K.V, vac, rcond=None)[0]
    np.testing.assert_allclose(proj, vac, atol=1e-12)


def test_zero_rep_rotation_invariants_in_kernel():
    r = rep_zero(4)
    b = r.basis
    I = r.generators["I"]

    def poly(terms):
        v = np.zeros(b.dim, complex)
        for m, c in terms.items():
            v[b.index[m]] = c
        return v

    # (A0, A1, B0, B1) exponents
    for v in (poly({(2, 0, 0, 0): 1, (0, 0, 2, 0): 1}),
              poly({(0, 2, 0, 0): 1, (0, 0, 0, 2): 1}),
              poly({(1, 1, 0, 0): 1, (0, 0, 1, 1): 1})):
        np.testing.assert_allclose(I @ v, 0, atol=1e-14)
    assert np.abs(I @ poly({(1, 0, 0, 0): 1})).max() > 0.1


def test_zero_energy_operator_is_multiplication():
    r = rep_zero(6)
    b = r.basis
    E0 = r.zero_energy_operator()
    expect = sum(0.5 * (b.raising(k) @ b.raising(k)) for k in range(4)).toarray()
    cols = b.degrees <= b.cutoff - 2
    np.testing.assert_allclose(E0.dense()[:, cols], expect[:, cols], atol=1e-14)


def test_zero_energy_shell_golden():
    assert zero_energy_shell(1, 1, 1) == 2
    assert zero_energy_shell(4, 0.5, 2) == pytest.approx(1.0)


# -- spectra -----------------------------------------------------------------------------------------------

def test_hydrogen_spectrum_golden():
    lines = hydrogen_spectrum_neg(8)
    complete = [l for l in lines if l.truncation_complete]
    assert [l.n for l in complete] == [1, 2, 3, 4, 5]
    for l, (n, e, deg) in zip(complete, oracles.hydrogen_levels(5)):
        assert l.n == n and l.degeneracy == deg
        assert l.energy == pytest.approx(e, rel=1e-13)
    assert lines[2].energy == pytest.approx(-1 / 18, rel=1e-13)


def test_hydrogen_spectrum_scaling():
    lines = hydrogen_spectrum_neg(4, m=2.0, gamma=3.0)
    assert lines[0].energy == pytest.approx(-2 * 9 / 2)


def test_truncation_complete_levels_stable_under_cutoff():
    a = {l.n: l for l in hydrogen_spectrum_neg(6) if l.truncation_complete}
    b = {l.n: l for l in hydrogen_spectrum_neg(8)}
    for n, l in a.items():
        assert b[n].degeneracy == l.degeneracy
        assert b[n].energy == pytest.approx(l.energy, rel=1e-14)


def test_positive_spectrum_golden():
    lines = positive_spectrum(6)
    assert lines[0].n == 2 and lines[0].degeneracy == 1
    assert lines[0].energy == pytest.approx(0.125, rel=1e-14)
    complete = [l for l in lines if l.truncation_complete]
    assert [l.n for l in complete] == [2, 4, 6, 8]
    assert [l.degeneracy for l in complete] == [1, 4, 9, 16]


def test_positive_constant_polynomial_tau_two():
    r = monomial_rep_positive(4)
    P0 = r.generators["P0"]
    vac = np.zeros(r.basis.dim)
    vac[0] = 1
    tau = 2j * (-(P0 @ vac))[0]
    assert tau == pytest.approx(2.0)


def test_spectrum_json_schema():
    import json

    doc = json.loads(spectrum_to_json(hydrogen_spectrum_neg(4)))
    assert set(doc[0]) == {"n", "energy", "degeneracy", "truncation_complete"}
    assert doc[0]["n"] == 1 and doc[0]["degeneracy"] == 1


# -- closures, identities, Casimir --------------------------------------------------------------------------

def test_su2_identity_on_kernel():
    res = su2_identity_residual(fock_rep(CUTOFF))
    assert max(res.values()) < 1e-12


@pytest.mark.parametrize("regime", ["neg", "pos", "zero"])
def test_lorentz_closure_scaled_normalization(regime):
    res = lorentz_closure(representation(regime, CUTOFF))
    assert set(res) == {"[L,L]", "[L,Q]", "[Q,Q]"}
    assert max(res.values()) < 1e-12


def test_e3_closure_zero_regime():
    res = e3_closure(rep_zero(CUTOFF))
    assert res["[S,S]"] < 1e-12 and res["[L,S]"] < 1e-12


def test_casimir_scalar_on_kernel_and_negative_control(rep):
    ops = rep.generators
    on = casimir_check(ops)
    assert on.is_scalar and on.residual < 1e-10
    off = casimir_check(ops, constrained=False)
    assert not off.is_scalar and off.residual > 1e-3


def test_casimir_value_same_across_regimes():
    vals = [casimir_check(representation(r, 8).generators).value for r in ("neg", "pos", "zero")]
    np.testing.assert_allclose(vals, vals[0], atol=1e-12)
