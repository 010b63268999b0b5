"""
Regular vines: structure, density and simulation
=================================================

A vine copula factorizes a d-dimensional density into pair copulas arranged
on a nested sequence of trees.
"""
import numpy as np

from vinelab import Edge, PairCopula, VineModel, cvine, dvine, validate

rng = np.random.default_rng(1)

# D-vine on 4 variables: a path in the first tree
s = dvine(4)
for k in range(1, 4):
    print(f"tree {k}:", ", ".join(str(e) for e in s.edges_of(k)))
print("valid:", bool(validate(s)))
print("structure matrix:\n", s.to_matrix())

# Attach a pair copula to each edge
pairs = {e: PairCopula("clayton", 2.0) for e in s.edges_of(1)}
pairs.update({e: PairCopula("frank", 3.0) for e in s.edges_of(2)})
pairs[Edge(1, 4, (2, 3))] = PairCopula("gaussian", 0.2)
m = VineModel(s, pairs)

# Simulate through the inverse Rosenblatt transform, then map back
x = m.simulate(5000, rng)
w = m.rosenblatt(x)
print("Rosenblatt residuals are uniform: means", np.round(w.mean(axis=0), 3))
print("log-likelihood of the sample:", round(m.loglik(x), 2))

# Conditional pseudo-observations feed each higher-tree pair copula
po = m.pseudo_obs(x, Edge(1, 3, (2,)))
print("pseudo-observations for 1,3|2:", po.shape)

# A C-vine puts one root variable at the center of each tree
print("C-vine first tree:", cvine(4, root=2).edges_of(1))
