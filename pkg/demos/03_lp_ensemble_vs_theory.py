"""
Finite random games against the large-game predictions
======================================================

Sample Gaussian payoff matrices, solve each game exactly by linear
programming and compare the seed-averaged equilibrium statistics with the
zero-temperature predictions. The command-line equivalent is

    thermal-minmax compare --mode zero-t --m 200 --gammas 0.5,0.75,1,1.5,2 --seeds 10
"""

from thermal_minmax.game_ensemble import ensemble_run
from thermal_minmax.zero_temperature import solve_zero_t, zero_t_observables

M = 120
res = ensemble_run(M, [0.5, 1.0, 2.0], seeds=range(8))

for summ in res.summary:
    o = zero_t_observables(solve_zero_t(summ["gamma"]))
    theory = {"norm_value": o.value_density, "rho_x": o.rho_x, "rho_y": o.rho_y, "q_x": o.q_x, "q_y": o.q_y}
    print(f"\ngamma = {summ['gamma']}  (N = {summ['N']}, M = {summ['M']}, {summ['n_ok']} games)")
    for key, th in theory.items():
        emp, se = summ[key], summ[key + "_se"]
        print(f"  {key:10s} theory {th:8.4f}   ensemble {emp:8.4f} +/- {se:.4f}   z = {(emp - th) / se:+.2f}")
    print(f"  support ratio rho_y/rho_x = {summ['support_ratio']:.6f}")
