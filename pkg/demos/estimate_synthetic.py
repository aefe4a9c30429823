"""Draw a few synthetic schools and fit them by double Metropolis-Hastings.

Deliberately small (8 schools of 20, a short chain) so it finishes in
about a minute; the recovery experiment in the test suite uses 16 x 30
and T = 20000.
"""
from netgame.estimation import EstimationConfig, PriorSpec, double_mh, posterior_summary
from netgame.model import COEF_NAMES
from netgame.synthetic import RECOVERY_PROFILE, RECOVERY_THETA, generate_synthetic

data = generate_synthetic(8, 20, RECOVERY_THETA, RECOVERY_PROFILE, seed=5,
                          burn_in_sweeps=5_000)
print("prevalence by school:",
      " ".join(f"{S.actions.mean():.2f}" for S, _ in data.pairs()))

chain = double_mh(data.pairs(), PriorSpec.normal(0.0, 10.0),
                  EstimationConfig(T=4_000, R=200, seed=1))
print(f"acceptance rate {chain.acceptance_rate():.2f}")
print(f"{'coefficient':12s} {'truth':>8s} {'mean':>8s}   90% set")
for row, name in zip(posterior_summary(chain, levels=(0.9,)), COEF_NAMES):
    lo, hi = row.intervals[0.9]
    print(f"{name:12s} {getattr(RECOVERY_THETA, name):8.3f} {row.mean:8.3f}   [{lo:.3f}, {hi:.3f}]")
