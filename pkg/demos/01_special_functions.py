"""
Truncated Gaussian building blocks
==================================

The equilibrium thresholds are expressed through A(a) = E[(Z+a)_+],
B(a) = E[(Z+a)_+^2] and their ratio q(a) = B/A^2. This script evaluates
them, checks them against brute-force quadrature and follows the ratio
into the lower tail, where A and B themselves underflow.
"""

import math

import numpy as np
from numpy.polynomial.legendre import leggauss

from thermal_minmax.scalar_tools import gauss_hermite_rule, q_ratio, trunc_gauss_A, trunc_gauss_B

# Values on a small grid
for a in (-3.0, -1.0, 0.0, 1.0, 3.0):
    print(f"a={a:+.1f}  A={trunc_gauss_A(a):.6f}  B={trunc_gauss_B(a):.6f}  q={q_ratio(a):.6f}")

# Brute force: Gauss-Legendre on [-a, 40], which starts at the kink of (z+a)_+
t, w = leggauss(128)
a = 0.7
z = 0.5 * (40 + a) * t + 0.5 * (40 - a)
wz = 0.5 * (40 + a) * w * np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
print("\nA(0.7) closed form vs quadrature:", trunc_gauss_A(a), wz @ (z + a))

# Gauss-Hermite rules are exact for polynomials but see the kink as a discontinuity
rule = gauss_hermite_rule(128)
print("A(0.7) by Gauss-Hermite-128:      ", rule.weights @ np.maximum(rule.nodes + a, 0.0))

# In the lower tail q grows like 2 |a| sqrt(2 pi) exp(a^2/2); it is computed
# from log A and log B, so it stays accurate until the ratio itself overflows
for a in (-10.0, -20.0, -35.0):
    approx = 2 * abs(a) * math.sqrt(2 * math.pi) * math.exp(0.5 * a * a)
    print(f"q({a:.0f}) = {q_ratio(a):.6e}   leading asymptote {approx:.6e}   A = {trunc_gauss_A(a):.3e}")
