"""
Pair copulas, h-functions and Kendall's tau
============================================

The building blocks of a vine: one-parameter bivariate copulas with their
conditional distribution functions (h-functions) and inverses.
"""
import numpy as np

from vinelab import PairCopula, param_to_tau, tau_range, tau_to_param
from vinelab.fitting import empirical_tau

rng = np.random.default_rng(0)

# A Gumbel copula with tau = 0.5, built by inverting Kendall's tau
gumbel = tau_to_param("gumbel", 0.5)
print(gumbel, "tau =", gumbel.tau(), "upper tail =", gumbel.tail_lambda_upper())

# Rotating by 90 degrees gives negative dependence
rotated = PairCopula("gumbel", gumbel.par, 90)
print(rotated, "tau =", rotated.tau())

# h1(u, v) = P(V <= v | U = u); hinv1 undoes it, which is all sampling needs
u, w = rng.random(5), rng.random(5)
v = gumbel.hinv1(u, w)
print("roundtrip error:", np.max(np.abs(gumbel.hfunc1(u, v) - w)))

# Draw a sample and compare the empirical tau with the model tau
s = gumbel.sample(10_000, rng)
print("empirical tau:", round(empirical_tau(s), 4), "model tau:", gumbel.tau())

# Families reach different tau ranges; AMH stops at 1/3
for fam, par in (("clayton", 2.0), ("frank", 5.0), ("amh", 0.9), ("gaussian", 0.7)):
    pc = PairCopula(fam, par)
    print(f"{fam:9s} par={par:<4} tau={param_to_tau(pc):.4f} attainable={tau_range(fam)}")
