# %% [markdown]
# Certifying the symmetry algebra
# ===============================
#
# The 16 quadratic momentum-map components close a u(2,2) algebra under the
# Poisson bracket. The exact polynomial engine gives the structure constants
# with rational coefficients. Each quantum representation must reproduce
# them as i times the classical table.

# %%
from keplerreg import phasespace, quantum

gens = phasespace.momentum_map_polynomials()
table = phasespace.structure_table(gens)
print("generators:", table.generators)
print("Jacobi residual (exact):", table.jacobi_residual())
print("{M1, M2} = -M3:", phasespace.poisson_bracket(gens["M1"], gens["M2"]) == -gens["M3"])

# %% [markdown]
# Quantum tables in each energy regime, on truncation-safe states.

# %%
for regime in ("neg", "pos", "zero"):
    rep = quantum.representation(regime, 8)
    qt = quantum.commutator_table(rep.generators)
    diff = qt.max_difference(table.scaled(1j))
    print(f"{regime:4s}  {rep.kind:9s}  span residual {qt.max_residual:.1e}  |table - i*Poisson| {diff:.1e}")

# %% [markdown]
# With L = 2(M + N) and Q = 2(Q1, Q2, Q3) the commutators close the Lorentz
# algebra; with S = 2(M - N + Q) they close e(3).

# %%
print("Lorentz (pos):", quantum.lorentz_closure(quantum.monomial_rep_positive(8)))
print("e(3) (zero):", quantum.e3_closure(quantum.rep_zero(8)))

# %% [markdown]
# The table serializes to JSON and reloads losslessly.

# %%
text = table.to_json()
print(len(text), "bytes;", phasespace.AlgebraTable.from_json(text).max_difference(table))
