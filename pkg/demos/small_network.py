"""Exact analysis of a three-student school.

Enumerates every action/link state, lists the k-player stable equilibria,
and compares a long simulated chain with the Gibbs distribution.
"""
import numpy as np

from netgame.dynamics import (ChainConfig, empirical_distribution, run_chain,
                              stationary_closed_form, total_variation)
from netgame.equilibrium import enumerate_neksn, pairwise_stable_mask
from netgame.model import AttributeTable, ModelParameters, NetworkState, potential

X = AttributeTable.uniform(3)
theta = ModelParameters(v0=-0.4, w0=-0.2, q=0.5, h=0.3, phi=0.6)

for k in (2, 3):
    eq = enumerate_neksn(X, theta, k)
    print(f"k={k}: {len(eq)} equilibria")
    for S in eq:
        print(f"   {S.bitstring()}  potential {potential(S, X, theta):6.2f}")
print("pairwise stable states:", int(pairwise_stable_mask(X, theta).sum()))

pi = stationary_closed_form(X, theta)
top = np.argsort(pi)[::-1][:3]
print("most likely states:",
      ", ".join(f"{NetworkState.from_index(3, s).bitstring()} ({pi[s]:.3f})" for s in top))

res = run_chain(NetworkState.empty(3), X, theta, ChainConfig(k_process=2, steps=200_000, seed=1))
emp = empirical_distribution(res.state_indices()[1:], 3)
print(f"TV(simulated, closed form) after 2e5 steps: {total_variation(emp, pi):.4f}")
