"""Synthetic school networks drawn from the model.

Covariates are drawn independently per student from configurable marginals
(defaults mimic a sample of US high schools: about half male, mostly white,
a school-level cigarette price around 168 cents per pack).  Each school's
state is then the end point of a long perturbed consensual-dynamics run
started from the empty network.  One *sweep* is n revisions, so every
student gets one revision opportunity per sweep on average.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import ChainConfig, run_chain
from .io import DatasetBundle, School
from .model import DEFAULT_SPEC, AttributeTable, ModelParameters, NetworkState, Specification


@dataclass(frozen=True)
class CovariateProfile:
    """Marginal distributions of the student covariates.

    School price is drawn once per school from a scaled Beta on
    [price_min, price_max] with mean ``price_mean``; ``price_within_sd`` adds
    student-level normal noise (cents).  Income is lognormal, clipped.
    """

    male: float = 0.504
    race_shares: tuple = (0.867, 0.086, 0.047)
    grade_min: int = 7
    grade_max: int = 12
    price_mean: float = 167.8
    price_min: float = 137.3
    price_max: float = 220.1
    price_within_sd: float = 0.0
    hh_smokes: float = 0.430
    mom_edu: float = 0.762
    income_mean: float = 72.1
    income_sigma: float = 0.6
    income_min: float = 17.1
    income_max: float = 145.8

    def __post_init__(self):
        shares = np.asarray(self.race_shares, float)
        if shares.shape != (3,) or (shares < 0).any() or shares.sum() <= 0:
            raise ValueError("race_shares needs three non-negative entries")
        for name in ("male", "hh_smokes", "mom_edu"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must be a probability")
        if not 7 <= self.grade_min <= self.grade_max <= 12:
            raise ValueError("grades must satisfy 7 <= grade_min <= grade_max <= 12")
        if not 0 < self.price_min < self.price_mean < self.price_max:
            raise ValueError("need 0 < price_min < price_mean < price_max")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "CovariateProfile":
        m = dict(mapping)
        if "race_shares" in m:
            m["race_shares"] = tuple(m["race_shares"])
        return cls(**m)

    def to_mapping(self) -> dict:
        d = asdict(self)
        d["race_shares"] = list(self.race_shares)
        return d


#: Parameter vector used by the recovery and counterfactual experiments.  Signs
#: follow the usual empirical pattern (price lowers smoking, friends who
#: differ in sex, grade or race are less attractive, positive conformity and
#: aggregate peer effects); magnitudes are chosen so that 16 schools of 30
#: students pin down every coefficient.
RECOVERY_THETA = ModelParameters(
    v0=2.4, v_price=-0.024, v_hhsmokes=1.0, v_momeduc=-1.0, v_black=-1.2, v_grade9p=1.0,
    w0=-1.4, w_sex=-0.8, w_grade=-1.2, w_race=-0.9, q=0.6, h=0.09, phi=0.5)

#: Covariate marginals for the recovery experiments: balanced race shares and
#: within-school price dispersion separate the price slope from the intercept.
RECOVERY_PROFILE = CovariateProfile(race_shares=(0.5, 0.3, 0.2), price_within_sd=40.0)


def draw_covariates(n: int, profile: CovariateProfile, rng: np.random.Generator,
                    school_id: str = "0") -> AttributeTable:
    shares = np.asarray(profile.race_shares, float)
    shares = shares / shares.sum()
    frac = (profile.price_mean - profile.price_min) / (profile.price_max - profile.price_min)
    alpha = 2.0
    beta_ = alpha * (1 - frac) / frac
    price = profile.price_min + (profile.price_max - profile.price_min) * rng.beta(alpha, beta_)
    prices = np.full(n, price)
    if profile.price_within_sd > 0:
        prices = prices + profile.price_within_sd * rng.standard_normal(n)
        prices = np.maximum(prices, 1.0)
    mu = np.log(profile.income_mean) - 0.5 * profile.income_sigma ** 2
    income = np.clip(rng.lognormal(mu, profile.income_sigma, n), profile.income_min,
                     profile.income_max)
    return AttributeTable(
        sex=(rng.random(n) < profile.male).astype(int),
        grade=rng.integers(profile.grade_min, profile.grade_max + 1, n),
        race=rng.choice(3, size=n, p=shares),
        price_cents=prices,
        hh_smokes=(rng.random(n) < profile.hh_smokes).astype(int),
        mom_edu=(rng.random(n) < profile.mom_edu).astype(int),
        income=income,
        school_id=school_id,
    )


def sample_state(X, theta: ModelParameters, sweeps: int, seed: int, k_process=2,
                 spec: Specification = DEFAULT_SPEC, start: NetworkState | None = None
                 ) -> NetworkState:
    n = X.n
    S0 = NetworkState.empty(n) if start is None else start
    cfg = ChainConfig(k_process=k_process, steps=int(sweeps) * n, seed=seed,
                      thin=max(1, int(sweeps) * n), record_states=False)
    return run_chain(S0, X, theta, cfg, spec).final


def generate_synthetic(n_schools: int, sizes, theta: ModelParameters,
                       profile: CovariateProfile | None = None, seed: int = 0,
                       burn_in_sweeps: int = 100_000, k_process=2,
                       spec: Specification = DEFAULT_SPEC) -> DatasetBundle:
    """Draw ``n_schools`` schools at ``theta``.

    ``sizes`` is one integer for every school or a sequence of per-school sizes.
    """
    profile = profile or CovariateProfile()
    sizes = [int(sizes)] * n_schools if np.isscalar(sizes) else [int(s) for s in sizes]
    if len(sizes) != n_schools:
        raise ValueError("need one size per school")
    if min(sizes) < 2:
        raise ValueError("school sizes must be >= 2")
    rng = np.random.default_rng(seed)
    schools = []
    for s, n in enumerate(sizes):
        sid = f"s{s:02d}"
        X = draw_covariates(n, profile, rng, sid)
        S = sample_state(X, theta, burn_in_sweeps, int(rng.integers(0, 2**32 - 1)), k_process,
                         spec)
        schools.append(School(sid, X, S))
    prov = {"generator": "generate_synthetic", "seed": int(seed), "theta": theta.to_mapping(),
            "profile": profile.to_mapping(), "burn_in_sweeps": int(burn_in_sweeps),
            "k_process": k_process if not isinstance(k_process, dict) else
            {str(k): v for k, v in k_process.items()},
            "sizes": sizes, "covariate_spec": spec.covariate_spec,
            "q_grade_min": spec.q_grade_min}
    return DatasetBundle(schools, prov)
