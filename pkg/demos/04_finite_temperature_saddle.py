"""
Two-temperature free energy
===========================

At finite inverse temperatures the minimizer samples strategies from a
Boltzmann law over the maximizer's log-partition function. The free energy
density nu follows from self-consistent overlap equations. This script
solves them across the temperature ratio k = -beta_min / beta_max and
shows the approach to the Nash value as both temperatures drop.
"""

from thermal_minmax.finite_temperature import ModelParams, solve_finite_t
from thermal_minmax.zero_temperature import solve_zero_t, zero_t_observables

print("   k        nu        e      Q_x     q_x     Q_y     iterations")
for k in (-0.75, -1.0, -1.25):
    sol = solve_finite_t(ModelParams.from_k(1.0, 1.0, 0.5, k))
    t = sol.theta
    print(f"{k:5.2f} {sol.nu:9.4f} {sol.e:8.4f} {t.Q_x:7.3f} {t.q_x:7.3f} {t.Q_y:7.3f}  {sol.iterations:5d}")

# Ordered low-temperature limit: beta_max = 2 beta_min -> infinity
gamma = 0.8
v0 = zero_t_observables(solve_zero_t(gamma)).value_density
print(f"\nNash value density at gamma = {gamma}: {v0:.4f}")
for beta_min in (5.0, 10.0, 20.0, 40.0):
    nu = solve_finite_t(ModelParams(1.0, gamma, 2 * beta_min, beta_min)).nu
    print(f"beta_min = {beta_min:5.1f}   nu = {nu:.4f}   gap = {nu - v0:.4f}")
