import numpy as np
import pytest
from scipy import stats

from netgame.dynamics import stationary_closed_form
from netgame.experiments import (ScenarioConfig, campaign_experiment, composition_experiment,
                                 fit_statistics, ks_two_sample, pooled_fit_statistics,
                                 price_experiment, simulate_distribution, swap_students,
                                 welch_t)
from netgame.model import AttributeTable, ModelParameters, NetworkState, n_links
from netgame.statespace import all_bits

from conftest import random_state, random_table, random_theta

U = AttributeTable.uniform
PEER = ModelParameters(v0=-0.6, w0=-0.8, phi=0.5, h=0.08, v_price=-0.01, q=0.2)


def batch_se(values, reps):
    b = np.asarray(values).reshape(reps, -1).mean(axis=1)
    return b.mean(), b.std(ddof=1) / np.sqrt(reps)


def small_schools(rng, count=3, n=8):
    return [(random_state(n, rng), random_table(n, rng)) for _ in range(count)]


# -------------------------------------------------------- configuration

def test_scenario_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(kind="campaign", magnitude=1.5)
    with pytest.raises(ValueError):
        ScenarioConfig(replications=0)
    with pytest.raises(ValueError):
        ScenarioConfig(mode="wobbly")
    assert ScenarioConfig().replace(seed=4).seed == 4


# -------------------------------------------------- stationary sampling

def test_flat_prevalence_and_density_half():
    cfg = ScenarioConfig(replications=20, steps=3000, thin=10, burn_in=500, seed=1)
    smp = simulate_distribution(U(6), ModelParameters(), config=cfg)
    assert abs(smp.prevalence.mean() - 0.5) < 0.02
    assert abs(smp.density.mean() - 0.5) < 0.02


def test_small_network_moments_match_exact(rng):
    X, th = random_table(3, rng), random_theta(rng, 0.8)
    pi = stationary_closed_form(X, th)
    bits = all_bits(3)
    exact_prev = pi @ bits[:, :3].mean(axis=1)
    exact_dens = pi @ bits[:, 3:].mean(axis=1)
    reps = 40
    cfg = ScenarioConfig(replications=reps, steps=5000, thin=5, burn_in=1000, seed=2)
    smp = simulate_distribution(X, th, config=cfg)
    for series, exact in ((smp.prevalence, exact_prev), (smp.density, exact_dens),
                          (smp.rb_prevalence, exact_prev)):
        m, se = batch_se(series, reps)
        assert abs(m - exact) < 3 * se + 1e-9


def test_fixed_network_links_constant(rng):
    X, th = random_table(6, rng), random_theta(rng)
    ref = random_state(6, rng)
    cfg = ScenarioConfig(replications=5, steps=1000, thin=10, burn_in=100)
    smp = simulate_distribution(X, th, "fixed_network", cfg, reference=ref)
    assert (smp.bits[:, 6:] == ref.links).all()
    assert smp.prevalence.std() > 0
    auto = simulate_distribution(X, th, "fixed_network", cfg)
    assert (auto.bits[:, 6:] == auto.bits[0, 6:]).all()


def test_zeroed_pe_off_matches_closed_form_without_peers(rng):
    X, th = random_table(3, rng), random_theta(rng, 0.8)
    reps = 40
    cfg = ScenarioConfig(replications=reps, steps=4000, thin=4, burn_in=500, seed=5,
                         pe_off="zeroed")
    smp = simulate_distribution(X, th, "pe_off", cfg)
    pi = stationary_closed_form(X, th.replace(h=0.0, phi=0.0))
    exact = pi @ all_bits(3)[:, :3].mean(axis=1)
    m, se = batch_se(smp.prevalence, reps)
    assert abs(m - exact) < 3 * se


def test_sampling_deterministic(rng):
    X, th = random_table(5, rng), random_theta(rng)
    cfg = ScenarioConfig(replications=3, steps=500, thin=5, burn_in=100, seed=9)
    for mode in ("endogenous", "fixed_network", "pe_off"):
        a = simulate_distribution(X, th, mode, cfg)
        b = simulate_distribution(X, th, mode, cfg)
        assert np.array_equal(a.bits, b.bits) and np.array_equal(a.rb_prevalence,
                                                                  b.rb_prevalence)


# ------------------------------------------------------------------ price

def test_zero_price_increase_is_exactly_zero(rng):
    cfg = ScenarioConfig(kind="price_shift", replications=3, steps=1000, thin=10, burn_in=200)
    tab = price_experiment(small_schools(rng), PEER, [0.0, 30.0], config=cfg)
    for m in tab.modes:
        assert tab.change_ppt[m][0] == pytest.approx(0.0, abs=1e-12)
    assert tab.header() == ["increase_cents", "endogenous", "fixed_network", "pe_off"]


def test_price_decline_monotone(rng):
    th = PEER.replace(v_price=-0.03)
    cfg = ScenarioConfig(kind="price_shift", replications=6, steps=3000, thin=10,
                         burn_in=1000, seed=3)
    tab = price_experiment(small_schools(rng), th, [20, 40, 80], modes=["endogenous"],
                           config=cfg)
    drops = tab.drop("endogenous")
    assert (drops > 0).all() and (np.diff(drops) > 0).all()


def test_price_requires_live_coefficient(rng):
    with pytest.raises(ValueError):
        price_experiment(small_schools(rng), PEER.replace(v_price=0.0), [10])


def test_price_extra_column_for_alternative_theta(rng):
    cfg = ScenarioConfig(kind="price_shift", replications=2, steps=500, thin=10, burn_in=100)
    tab = price_experiment(small_schools(rng), PEER, [10], modes=["endogenous"], config=cfg,
                           theta_no_pe=PEER.replace(phi=0.0, h=0.0))
    assert "no_pe_model" in tab.modes


# --------------------------------------------------------------- campaign

def test_campaign_edge_fractions(rng):
    cfg = ScenarioConfig(kind="campaign", replications=3, steps=1000, thin=10, burn_in=200)
    tab = campaign_experiment(small_schools(rng), PEER, [0.0, 0.25, 1.0], config=cfg)
    assert tab.actual[0] == 0.0 and tab.multiplier[0] is None and tab.proportional[0] == 0.0
    assert tab.prevalence[-1] == 0.0 and tab.actual[-1] == tab.baseline
    assert tab.multiplier[-1] == pytest.approx(1.0)
    assert tab.header()[-1] == "multiplier"


def test_campaign_deterministic_and_spillover(rng):
    schools = small_schools(rng, count=4, n=10)
    th = ModelParameters(v0=-0.3, w0=-0.5, phi=0.8, h=0.1)
    cfg = ScenarioConfig(kind="campaign", replications=8, steps=3000, thin=10, burn_in=1000,
                         seed=6)
    a = campaign_experiment(schools, th, [0.2], config=cfg)
    b = campaign_experiment(schools, th, [0.2], config=cfg)
    assert a.rows() == b.rows()
    assert a.actual[0] > a.proportional[0]


def test_campaign_without_peer_effects_is_proportional(rng):
    """Independent smokers: removing a share f removes f of the prevalence."""
    schools = small_schools(rng, count=4, n=10)
    th = ModelParameters(v0=0.2, w0=-0.5)
    cfg = ScenarioConfig(kind="campaign", replications=30, steps=2000, thin=10, burn_in=500,
                         seed=8)
    tab = campaign_experiment(schools, th, [0.25], config=cfg)
    assert abs(tab.actual[0] - tab.proportional[0]) < 4 * tab.se_actual[0] + 1e-9


# ------------------------------------------------------------ composition

def _race_school(n, race, rng):
    X = random_table(n, rng)
    return AttributeTable(X.sex, X.grade, np.full(n, race), X.price_cents, X.hh_smokes,
                          X.mom_edu, X.income, f"r{race}")


def test_swap_students_moves_covariates(rng):
    A, B = _race_school(6, 0, rng), _race_school(6, 1, rng)
    A2, B2 = swap_students(A, B, 2, np.random.default_rng(0))
    assert (A2.race == 1).sum() == 2 and (B2.race == 0).sum() == 2
    assert A2.n == 6 and B2.n == 6 and A2.school_id == A.school_id
    with pytest.raises(ValueError):
        swap_students(A, B, 7, np.random.default_rng(0))


def test_composition_zero_swap_self_comparison(rng):
    A, B = _race_school(6, 0, rng), _race_school(6, 1, rng)
    cfg = ScenarioConfig(kind="composition_swap", replications=8, steps=1000, thin=10,
                         burn_in=200)
    res = composition_experiment(A, B, PEER, [0.0, 0.5], config=cfg)
    for i in range(2):
        assert res.welch[i, i, 1] == 1.0 and res.ks[i, i, 1] == 1.0 and res.ks[i, i, 0] == 0.0
    assert len(res.test_rows()) == 4 and res.rows()[0][1] == 1.0


def test_half_swaps_with_different_seeds_agree(rng):
    A, B = _race_school(8, 0, rng), _race_school(8, 1, rng)
    th = PEER.replace(w_race=-1.0, v_black=-1.0)
    series = []
    for seed in (11, 12):
        cfg = ScenarioConfig(kind="composition_swap", replications=30, steps=1500, thin=10,
                             burn_in=300, seed=seed)
        series.append(composition_experiment(A, B, th, [0.5], config=cfg).overall_series[0])
    assert ks_two_sample(*series)[1] > 0.05


def test_identical_schools_overall_invariant(rng):
    A = _race_school(8, 0, rng)
    B = AttributeTable(A.sex, A.grade, A.race, A.price_cents, A.hh_smokes, A.mom_edu,
                       A.income, "copy")
    cfg = ScenarioConfig(kind="composition_swap", replications=20, steps=1500, thin=10,
                         burn_in=300, seed=4)
    res = composition_experiment(A, B, PEER, [0.0, 0.25, 0.5], config=cfg)
    for j in (1, 2):
        assert res.welch[0, j, 1] > 0.001


def test_composition_rejects_oversized_swap(rng):
    with pytest.raises(ValueError):
        composition_experiment(_race_school(8, 0, rng), _race_school(3, 1, rng), PEER, [0.5])


# ------------------------------------------------------------ fit report

def test_fit_empty_graph():
    S = NetworkState(np.array([1, 0, 0, 1]), np.zeros(6))
    rep = fit_statistics([S, S])
    assert rep.density == 0 and rep.avg_degree == 0 and rep.max_degree == 0
    assert rep.triangles_per_node == 0
    assert rep.homophily is None and rep.coleman is None and rep.freeman is None
    assert rep.mixing_shares == ((None, None), (None, None))
    assert rep.prevalence == 0.5 and rep.n_samples == 2


def test_fit_complete_graph_no_sorting():
    n = 6
    S = NetworkState(np.array([1, 1, 1, 0, 0, 0]), np.ones(n_links(n)))
    rep = fit_statistics(S)
    assert rep.density == 1.0 and rep.max_degree == n - 1
    assert rep.homophily == pytest.approx((3 - 1) / (n - 1))
    assert rep.coleman == pytest.approx(0.0, abs=1e-12)
    assert rep.freeman == pytest.approx(0.0, abs=1e-12)


def test_fit_hand_fixture():
    """Smokers {0, 1}; edges 0-1, 0-2, 1-2, 2-3, 3-4."""
    adj = np.zeros((5, 5), int)
    for i, j in [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4)]:
        adj[i, j] = adj[j, i] = 1
    S = NetworkState.from_adjacency(np.array([1, 1, 0, 0, 0]), adj)
    rep = fit_statistics(S)
    assert rep.prevalence == 0.4
    assert rep.density == 0.5
    assert rep.avg_degree == 2.0 and rep.max_degree == 3.0
    assert rep.ss_edges_per_node == pytest.approx(0.2)
    assert rep.nn_edges_per_node == pytest.approx(0.4)
    assert rep.triangles_per_node == pytest.approx(0.2)
    assert rep.homophily == pytest.approx(0.6)
    # expected cross links at random: 5 * 2*2*3 / 20 = 3, observed 2
    assert rep.freeman == pytest.approx(1 / 3)
    # smokers: H = 2/4, w = 1/4; nonsmokers: H = 4/6, w = 2/4; both give 1/3
    assert rep.coleman == pytest.approx(1 / 3)
    assert rep.mixing_counts == ((2.0, 2.0), (2.0, 4.0))
    assert rep.mixing_shares[0] == pytest.approx((0.5, 0.5))
    assert rep.mixing_shares[1] == pytest.approx((1 / 3, 2 / 3))
    assert [r[0] for r in rep.as_rows()][:3] == ["prevalence", "density", "avg_degree"]


def test_fit_invariants_on_samples(rng):
    X, th = random_table(6, rng), random_theta(rng)
    smp = simulate_distribution(X, th, config=ScenarioConfig(replications=2, steps=500, thin=50,
                                                             burn_in=0))
    rep = fit_statistics(smp)
    assert 0 <= rep.prevalence <= 1 and 0 <= rep.density <= 1
    for row in rep.mixing_shares:
        if row[0] is not None:
            assert sum(row) == pytest.approx(1.0, abs=1e-9)
    pooled = pooled_fit_statistics([smp, smp])
    assert pooled.n_samples == 2 * len(smp)
    with pytest.raises(ValueError):
        fit_statistics([])


def test_fit_statistics_converge_to_exact(rng):
    X, th = random_table(3, rng), random_theta(rng, 0.8)
    pi = stationary_closed_form(X, th)
    states = [NetworkState.from_bits(3, b) for b in all_bits(3)]
    tri = np.array([fit_statistics(S).triangles_per_node for S in states])
    deg = np.array([fit_statistics(S).avg_degree for S in states])
    reps = 40
    smp = simulate_distribution(X, th, config=ScenarioConfig(replications=reps, steps=4000,
                                                             thin=20, burn_in=500, seed=3))
    vals = [fit_statistics(S) for S in smp]
    for series, exact in (([v.triangles_per_node for v in vals], pi @ tri),
                          ([v.avg_degree for v in vals], pi @ deg)):
        m, se = batch_se(series, reps)
        assert abs(m - exact) < 3 * se + 1e-9


# -------------------------------------------------------- hypothesis tests

def test_identical_samples():
    x = np.random.default_rng(0).normal(size=50)
    assert ks_two_sample(x, x) == (0.0, 1.0)
    assert welch_t(x, x) == (0.0, 1.0)
    assert welch_t(np.ones(5), np.ones(7)) == (0.0, 1.0)
    assert welch_t(np.ones(5), np.zeros(7))[1] == 0.0


def test_shifted_normals_rejected():
    r = np.random.default_rng(1)
    x, y = r.normal(0, 1, 10_000), r.normal(1, 1, 10_000)
    assert welch_t(x, y)[1] < 0.001 and ks_two_sample(x, y)[1] < 0.001


def test_against_reference_implementations():
    r = np.random.default_rng(2)
    x, y = r.normal(0, 1, 40), r.normal(0.3, 2, 25)
    t, p = welch_t(x, y)
    ref = stats.ttest_ind(x, y, equal_var=False)
    assert t == pytest.approx(ref.statistic) and p == pytest.approx(ref.pvalue)
    D, pk = ks_two_sample(x, y)
    ref = stats.ks_2samp(x, y, method="asymp")
    assert D == pytest.approx(ref.statistic)
    assert pk == pytest.approx(ref.pvalue, abs=0.02)


def test_welch_size_calibration():
    r = np.random.default_rng(3)
    rej = sum(welch_t(r.normal(0, 1, 15), r.normal(0, 3, 40))[1] < 0.05 for _ in range(1000))
    # binomial(1000, 0.05): sd 6.9
    assert abs(rej - 50) < 3 * 6.9


def test_test_input_errors():
    with pytest.raises(ValueError):
        welch_t([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        ks_two_sample([], [1.0])
