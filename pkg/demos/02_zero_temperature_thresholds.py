"""
Nash equilibrium statistics in the large-game limit
===================================================

For an N x M game with i.i.d. Gaussian payoffs and gamma = N/M, two
thresholds determine the fraction of pure strategies each player uses,
the spread of the equilibrium mixtures and the normalized game value.
"""

import numpy as np

from thermal_minmax.zero_temperature import gamma_expansion, solve_zero_t, zero_t_observables

print(" gamma   alpha_x   alpha_y    value    rho_x   rho_y    q_x     q_y")
for gamma in (0.25, 0.5, 1.0, 2.0, 4.0):
    s = solve_zero_t(gamma)
    o = zero_t_observables(s)
    print(f"{gamma:6.2f} {s.alpha_x:9.5f} {s.alpha_y:9.5f} {o.value_density:8.4f} "
          f"{o.rho_x:8.4f} {o.rho_y:7.4f} {o.q_x:7.3f} {o.q_y:7.3f}")

# Swapping the roles of the players maps gamma to 1/gamma and flips the value
v = zero_t_observables(solve_zero_t(1.7)).value_density
v_inv = zero_t_observables(solve_zero_t(1 / 1.7)).value_density
print("\nvalue(1.7) + value(1/1.7) =", v + v_inv)

# Both supports have the same size, so rho_y / rho_x = gamma
o = zero_t_observables(solve_zero_t(1.7))
print("rho_y / rho_x at gamma = 1.7:", o.rho_y / o.rho_x)

# Near the square case the thresholds and value are linear in eps = gamma - 1
print("\n   eps     value    linear   with eps^2")
for eps in (0.05, 0.02, 0.01, 0.001):
    v = zero_t_observables(solve_zero_t(1 + eps)).value_density
    print(f"{eps:6.3f} {v:9.6f} {gamma_expansion(eps)[2]:9.6f} {gamma_expansion(eps, value_order=2)[2]:9.6f}")
