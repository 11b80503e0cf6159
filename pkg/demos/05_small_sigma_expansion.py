"""
Weak-payoff expansion
=====================

When the payoff scale sigma is small the free energy is the entropy
baseline plus corrections linear and quadratic in sigma with closed-form
coefficients. Compare them with full solves.
"""

from dataclasses import replace

from thermal_minmax.finite_temperature import ModelParams, sigma_expansion, solve_finite_t

params = ModelParams.from_k(1e-3, 1.0, 1.0, -1.0)
ex = sigma_expansion(params)
print(f"nu_ent = {ex.v_ent:.6f}  v1 = {ex.v1:.6f} (beta_max - beta_min/2)  v2 = {ex.v2:.6f}")

print("\n  sigma        nu        linear remainder   quadratic remainder")
for sigma in (1e-4, 1e-3, 1e-2, 1e-1):
    nu = solve_finite_t(replace(params, sigma=sigma)).nu
    lin = ex.v_ent + ex.v1 * sigma
    print(f"{sigma:7.0e} {nu:12.8f}   {nu - lin:14.3e}   {nu - lin - ex.v2 * sigma ** 2:14.3e}")
