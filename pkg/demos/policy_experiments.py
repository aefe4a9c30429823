"""Price increases and an abstinence campaign on synthetic schools.

Compares the prevalence response when friendships adjust, when they are
held fixed, and when peers are held at their baseline behaviour.
"""
from netgame.experiments import ScenarioConfig, campaign_experiment, price_experiment
from netgame.synthetic import RECOVERY_PROFILE, RECOVERY_THETA, generate_synthetic

schools = generate_synthetic(6, 20, RECOVERY_THETA, RECOVERY_PROFILE, seed=2,
                             burn_in_sweeps=5_000)
short = dict(replications=10, steps=10_000, thin=20, burn_in=10_000)

price = price_experiment(schools, RECOVERY_THETA, [10, 30, 60],
                         config=ScenarioConfig(kind="price_shift", seed=3, **short))
print("prevalence drop (percentage points) per price increase")
print("cents  " + "  ".join(f"{m:>13s}" for m in price.modes))
for d, r in zip(price.increases, range(len(price.increases))):
    print(f"{d:5.0f}  " + "  ".join(f"{price.drop(m)[r]:13.2f}" for m in price.modes))

camp = campaign_experiment(schools, RECOVERY_THETA, [0.05, 0.2, 0.5],
                           config=ScenarioConfig(kind="campaign", seed=4, **short))
print(f"\nbaseline prevalence {camp.baseline:.3f}")
for f, m in zip(camp.fractions, camp.multiplier):
    print(f"treated {f:4.0%}: spillover multiplier {m:.2f}")
