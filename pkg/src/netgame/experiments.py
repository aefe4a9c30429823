"""Counterfactual policy experiments and descriptive fit statistics.

All experiments run the perturbed consensual dynamics school by school.
A policy and its baseline are simulated from the same starting state with
the same random stream (common random numbers), so their difference has
far less Monte Carlo noise than two independent runs.  Prevalence is the
Rao-Blackwellized average of each student's conditional smoking
probability.

Three network modes are available:

``endogenous``
    actions and links both adjust to the policy.
``fixed_network``
    links are frozen at a reference network drawn from the baseline chain;
    only actions move.
``pe_off``
    no peer feedback.  The default ``"frozen"`` variant evaluates each
    student's choice probability on baseline states with friendships,
    friends' actions and the number of smokers held fixed.  The
    ``"zeroed"`` variant instead simulates with ``phi = h = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import special, stats

from . import _kernels as K
from .dynamics import _cum, k_distribution
from .model import (DEFAULT_SPEC, AttributeTable, ModelParameters, NetworkState,
                    Specification, concat_tables, model_terms, n_links)

KINDS = ("baseline", "price_shift", "composition_swap", "campaign")
MODES = ("endogenous", "fixed_network", "pe_off")
PE_OFF_VARIANTS = ("frozen", "zeroed")


@dataclass(frozen=True)
class ScenarioConfig:
    """Simulation settings shared by the experiments.

    Each replication is a segment of ``steps`` revisions recorded every
    ``thin`` steps; segments follow one another after an initial
    ``burn_in``.  ``magnitude`` is in cents for price shifts and a fraction
    for swaps and campaigns.
    """

    kind: str = "baseline"
    magnitude: float = 0.0
    mode: str = "endogenous"
    replications: int = 20
    steps: int = 30_000
    thin: int = 30
    burn_in: int = 30_000
    k_process: object = 2
    seed: int = 0
    pe_off: str = "frozen"
    targeted: bool = False
    exact_max_bits: int = 12

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.pe_off not in PE_OFF_VARIANTS:
            raise ValueError(f"pe_off must be one of {PE_OFF_VARIANTS}")
        if self.replications < 1:
            raise ValueError("need at least one replication")
        if self.steps < 1 or self.thin < 1 or self.burn_in < 0:
            raise ValueError("steps and thin must be >= 1, burn_in >= 0")
        if self.kind in ("composition_swap", "campaign") and not 0 <= self.magnitude <= 1:
            raise ValueError("fractions must lie in [0, 1]")

    def replace(self, **changes) -> "ScenarioConfig":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(changes)
        return ScenarioConfig(**d)


# ------------------------------------------------------------------ chains

class _Sim:
    """Kernel-level chain state for one school under fixed terms."""

    def __init__(self, X, theta: ModelParameters, spec: Specification, k_process,
                 exact_max_bits: int):
        self.X = X
        self.theta = theta
        self.spec = spec
        self.t = model_terms(X, theta, spec)
        self.n = self.t.n
        self.ks, ps = k_distribution(self.n, k_process)
        self.kc = _cum(ps)
        self.exact_max_bits = exact_max_bits

    def with_v(self, v: np.ndarray, h=None, phi=None) -> "_Sim":
        out = object.__new__(_Sim)
        out.__dict__.update(self.__dict__)
        t = self.t
        out.t = type(t)(np.ascontiguousarray(v, float), t.w, t.gate, t.q,
                        t.h if h is None else float(h), t.phi if phi is None else float(phi),
                        t.beta)
        return out

    def potential(self, a, G) -> float:
        t = self.t
        return K.full_potential(a, G, t.v, t.w, t.gate, t.q, t.h, t.phi)

    def run(self, a, G, steps: int, thin: int, seed: int, act_free=None, links_free=True,
            record: bool = False):
        """Advance (a, G) in place; returns (rb per record, prevalence, state bits)."""
        t = self.t
        n = self.n
        free = np.ones(n, np.int8) if act_free is None else act_free
        n_rec = steps // thin + 1
        nb = n + n_links(n)
        states = np.zeros((n_rec if record else 1, nb), np.int8)
        pot = np.empty(n_rec)
        prev = np.empty(n_rec)
        rb = np.empty(n_rec)
        r, _, _ = K.kcd_chain(a, G, t.v, t.w, t.gate, t.q, t.h, t.phi, t.beta, self.ks,
                              self.kc, steps, thin, seed, free, links_free, False,
                              self.exact_max_bits, self.potential(a, G), record, states, pot,
                              prev, rb, 0)
        # record 0 is the starting state, which the previous segment already counted
        return rb[1:r], prev[1:r], (states[1:r] if record else None)


def _node_probs(sim: _Sim, bits: np.ndarray) -> np.ndarray:
    """Pr(a_i = 1 | rest) for every node of every recorded state, shape (R, n)."""
    n = sim.n
    t = sim.t
    a = bits[:, :n].astype(np.float64)
    G = np.zeros((len(bits), n, n))
    iu = np.triu_indices(n, 1)
    G[:, iu[0], iu[1]] = bits[:, n:]
    G = G + G.transpose(0, 2, 1)
    m = a.sum(axis=1, keepdims=True)
    d = t.v[None, :] + t.h * (m - a) + t.phi * np.einsum("rij,rj->ri", G, 2 * a - 1)
    return special.expit(d / t.beta)


def _rb_on_states(sim: _Sim, bits: np.ndarray) -> np.ndarray:
    """Conditional prevalence mean_i Pr(a_i=1 | rest) on each recorded state."""
    return _node_probs(sim, bits).mean(axis=1)


def _draw_actions(sim: _Sim, bits: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independent action draws given each recorded state's environment."""
    out = bits.copy()
    p = _node_probs(sim, bits)
    out[:, :sim.n] = rng.random(p.shape) < p
    return out


def _as_schools(schools) -> list[tuple[NetworkState | None, AttributeTable]]:
    """Accept one table, a list of tables, (S, X) pairs or a dataset bundle."""
    if hasattr(schools, "pairs") and callable(schools.pairs):
        return [(S, X) for S, X in schools.pairs()]
    if isinstance(schools, AttributeTable):
        return [(None, schools)]
    out = []
    for item in schools:
        if isinstance(item, AttributeTable):
            out.append((None, item))
        else:
            S, X = item
            out.append((S, X))
    if not out:
        raise ValueError("need at least one school")
    return out


def _start(S: NetworkState | None, n: int):
    S = NetworkState.empty(n) if S is None else S
    return S.actions.copy(), S.adjacency()


def _seeds(ss: np.random.SeedSequence, count: int) -> list[int]:
    return [int(x) for x in ss.generate_state(count, np.uint32)]


# ------------------------------------------------------------ distribution

@dataclass
class StateSample:
    """Recorded states of one school (rows of canonical bits)."""

    n: int
    bits: np.ndarray
    rb_prevalence: np.ndarray
    mode: str

    def __len__(self) -> int:
        return len(self.bits)

    def __iter__(self):
        for b in self.bits:
            yield NetworkState.from_bits(self.n, b)

    @property
    def prevalence(self) -> np.ndarray:
        return self.bits[:, :self.n].mean(axis=1)

    @property
    def density(self) -> np.ndarray:
        return self.bits[:, self.n:].mean(axis=1) if self.bits.shape[1] > self.n else \
            np.zeros(len(self.bits))


def simulate_distribution(X, theta: ModelParameters, mode: str = "endogenous",
                          config: ScenarioConfig | None = None,
                          spec: Specification = DEFAULT_SPEC,
                          start: NetworkState | None = None,
                          reference: NetworkState | None = None) -> StateSample:
    """Thinned draws from the stationary distribution under a network mode.

    ``config.replications`` segments of ``config.steps`` revisions follow a
    burn-in of ``config.burn_in`` from ``start`` (empty by default).  In
    ``fixed_network`` mode the links stay at ``reference``; without one the
    network at the end of an endogenous burn-in is used.
    """
    cfg = config or ScenarioConfig()
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if not np.isfinite(theta.as_vector()).all():
        raise ValueError("theta must be finite")
    sim = _Sim(X, theta, spec, cfg.k_process, cfg.exact_max_bits)
    ss = np.random.SeedSequence(cfg.seed)
    burn_seed, draw_seed = _seeds(ss, 2)
    rep_seeds = _seeds(ss.spawn(1)[0], cfg.replications)
    a, G = _start(start, sim.n)
    if mode == "pe_off" and cfg.pe_off == "zeroed":
        sim = sim.with_v(sim.t.v, h=0.0, phi=0.0)
    links_free = True
    if mode == "fixed_network":
        if reference is not None:
            a, G = reference.actions.copy(), reference.adjacency()
        else:
            sim.run(a, G, max(cfg.burn_in, 1), max(cfg.burn_in, 1), burn_seed)
        links_free = False
    if cfg.burn_in:
        sim.run(a, G, cfg.burn_in, cfg.burn_in, burn_seed ^ 0x5EED, links_free=links_free)
    rbs, bits = [], []
    for s in rep_seeds:
        rb, _, st = sim.run(a, G, cfg.steps, cfg.thin, s, links_free=links_free, record=True)
        rbs.append(rb)
        bits.append(st)
    bits = np.concatenate(bits)
    rb = np.concatenate(rbs)
    if mode == "pe_off" and cfg.pe_off == "frozen":
        bits = _draw_actions(sim, bits, np.random.default_rng(draw_seed))
    return StateSample(sim.n, bits, rb, mode)


# ------------------------------------------------------------------- price

@dataclass
class PriceTable:
    """Prevalence change (percentage points, negative = decline) per increase and mode."""

    increases: list[float]
    modes: list[str]
    baseline: dict[str, float]
    change_ppt: dict[str, list[float]]
    se_ppt: dict[str, list[float]]

    def header(self) -> list[str]:
        return ["increase_cents"] + list(self.modes)

    def rows(self) -> list[list]:
        return [[d] + [self.change_ppt[m][r] for m in self.modes]
                for r, d in enumerate(self.increases)]

    def drop(self, mode: str) -> np.ndarray:
        return -np.asarray(self.change_ppt[mode])


def _weighted(values: list[np.ndarray], sizes: list[int]) -> np.ndarray:
    """Pool per-school replication series into node-weighted overall prevalence."""
    w = np.asarray(sizes, float) / float(sum(sizes))
    return sum(wi * v for wi, v in zip(w, values))


def price_experiment(schools, theta: ModelParameters, increases_cents: Sequence[float],
                     modes: Sequence[str] = MODES, config: ScenarioConfig | None = None,
                     spec: Specification = DEFAULT_SPEC,
                     theta_no_pe: ModelParameters | None = None) -> PriceTable:
    """Shift every student's price and record the change in overall prevalence.

    Modes are any of :data:`MODES`; with ``theta_no_pe`` an extra column
    ``no_pe_model`` reports the endogenous response under that parameter
    vector (for example one estimated without peer effects).
    """
    cfg = config or ScenarioConfig(kind="price_shift")
    for m in modes:
        if m not in MODES:
            raise ValueError(f"unknown mode {m!r}")
    if spec.covariate_spec != "price":
        raise ValueError("price experiments need the price covariate specification")
    if theta.v_price == 0:
        raise ValueError("v_price is zero, so a price shift has no effect")
    increases = [float(d) for d in increases_cents]
    items = _as_schools(schools)
    sizes = [X.n for _, X in items]
    cols = list(modes) + (["no_pe_model"] if theta_no_pe is not None else [])
    ss = np.random.SeedSequence(cfg.seed)
    school_ss = ss.spawn(len(items))
    # per column: per school arrays (reps,) of baseline and (reps, n_inc) of shifted
    base = {c: [] for c in cols}
    shifted = {c: [] for c in cols}
    for (S0, X), sss in zip(items, school_ss):
        burn_seed, = _seeds(sss, 1)
        rep_seeds = _seeds(sss.spawn(1)[0], cfg.replications)
        params = {c: theta for c in modes}
        if theta_no_pe is not None:
            params["no_pe_model"] = theta_no_pe
        cache = {}
        for c in cols:
            th = params[c]
            key = id(th), c == "pe_off" and cfg.pe_off == "zeroed"
            if key not in cache:
                sim = _Sim(X, th, spec, cfg.k_process, cfg.exact_max_bits)
                if key[1]:
                    sim = sim.with_v(sim.t.v, h=0.0, phi=0.0)
                cache[key] = sim
            sim = cache[key]
            sims = [sim.with_v(sim.t.v + th.v_price * d) for d in increases]
            a, G = _start(S0, X.n)
            if cfg.burn_in:
                sim.run(a, G, cfg.burn_in, cfg.burn_in, burn_seed)
            b_rep = np.empty(cfg.replications)
            s_rep = np.empty((cfg.replications, len(increases)))
            for r in range(cfg.replications):
                seed = rep_seeds[r]
                a0, G0 = a.copy(), G.copy()
                if c == "fixed_network":
                    rb, _, _ = sim.run(a0.copy(), G0.copy(), cfg.steps, cfg.thin, seed,
                                       links_free=False)
                    b_rep[r] = rb.mean()
                    for j, sj in enumerate(sims):
                        rb, _, _ = sj.run(a0.copy(), G0.copy(), cfg.steps, cfg.thin, seed,
                                          links_free=False)
                        s_rep[r, j] = rb.mean()
                    sim.run(a, G, cfg.steps, cfg.thin, seed)   # advance the baseline
                elif c == "pe_off" and cfg.pe_off == "frozen":
                    rb, _, bits = sim.run(a, G, cfg.steps, cfg.thin, seed, record=True)
                    b_rep[r] = rb.mean()
                    for j, sj in enumerate(sims):
                        s_rep[r, j] = _rb_on_states(sj, bits).mean()
                else:
                    rb, _, _ = sim.run(a, G, cfg.steps, cfg.thin, seed)
                    b_rep[r] = rb.mean()
                    for j, sj in enumerate(sims):
                        rb, _, _ = sj.run(a0.copy(), G0.copy(), cfg.steps, cfg.thin, seed)
                        s_rep[r, j] = rb.mean()
            base[c].append(b_rep)
            shifted[c].append(s_rep)
    baseline, change, se = {}, {}, {}
    for c in cols:
        b = _weighted(base[c], sizes)
        s = _weighted(shifted[c], sizes)
        diff = 100.0 * (s - b[:, None])
        baseline[c] = float(b.mean())
        change[c] = [float(x) for x in diff.mean(axis=0)]
        sd = diff.std(axis=0, ddof=1) if cfg.replications > 1 else np.zeros(len(increases))
        se[c] = [float(x) for x in sd / np.sqrt(cfg.replications)]
    return PriceTable(increases, cols, baseline, change, se)


# ------------------------------------------------------------- composition

@dataclass
class CompositionResult:
    """Per swap fraction: mean prevalences and the replication-level overall series."""

    fractions: list[float]
    prevalence_a: list[float]
    prevalence_b: list[float]
    prevalence_overall: list[float]
    overall_series: list[np.ndarray]
    welch: np.ndarray          # (F, F, 2): t, p
    ks: np.ndarray             # (F, F, 2): D, p

    def header(self) -> list[str]:
        return ["swap_fraction", "cap_same_race", "prevalence_a", "prevalence_b",
                "prevalence_overall"]

    def rows(self) -> list[list]:
        return [[f, 1.0 - f, a, b, o] for f, a, b, o in
                zip(self.fractions, self.prevalence_a, self.prevalence_b,
                    self.prevalence_overall)]

    def test_header(self) -> list[str]:
        return ["fraction_i", "fraction_j", "welch_t", "welch_p", "ks_d", "ks_p"]

    def test_rows(self) -> list[list]:
        out = []
        F = len(self.fractions)
        for i in range(F):
            for j in range(F):
                out.append([self.fractions[i], self.fractions[j], self.welch[i, j, 0],
                            self.welch[i, j, 1], self.ks[i, j, 0], self.ks[i, j, 1]])
        return out


def swap_students(X_a: AttributeTable, X_b: AttributeTable, size: int,
                  rng: np.random.Generator) -> tuple[AttributeTable, AttributeTable]:
    """Exchange ``size`` uniformly chosen students; covariates travel with them."""
    if size > X_a.n or size > X_b.n:
        raise ValueError(f"swap size {size} exceeds a school size ({X_a.n}, {X_b.n})")
    ia = np.sort(rng.choice(X_a.n, size, replace=False))
    ib = np.sort(rng.choice(X_b.n, size, replace=False))
    keep_a = np.setdiff1d(np.arange(X_a.n), ia)
    keep_b = np.setdiff1d(np.arange(X_b.n), ib)
    new_a = concat_tables([X_a.subset(keep_a), X_b.subset(ib)], X_a.school_id)
    new_b = concat_tables([X_b.subset(keep_b), X_a.subset(ia)], X_b.school_id)
    return new_a, new_b


def composition_experiment(X_a: AttributeTable, X_b: AttributeTable, theta: ModelParameters,
                           swap_fractions: Sequence[float],
                           config: ScenarioConfig | None = None,
                           spec: Specification = DEFAULT_SPEC) -> CompositionResult:
    """Swap a fraction of school A's students with as many from school B.

    The swap size is ``round(fraction * n_A)``.  Each replication draws a
    fresh swap, simulates both schools independently from empty networks
    and records the prevalence of each.  All fraction pairs are compared
    with Welch t and two-sample KS tests on the per-replication overall
    prevalence.
    """
    cfg = config or ScenarioConfig(kind="composition_swap")
    fr = [float(f) for f in swap_fractions]
    for f in fr:
        if not 0 <= f <= 1:
            raise ValueError("swap fractions must lie in [0, 1]")
        if round(f * X_a.n) > X_b.n:
            raise ValueError(f"swap of {round(f * X_a.n)} students exceeds school B size {X_b.n}")
    ss = np.random.SeedSequence(cfg.seed)
    pa, pb, po, series = [], [], [], []
    for f, fss in zip(fr, ss.spawn(len(fr))):
        rng = np.random.default_rng(fss.spawn(1)[0])
        seeds = _seeds(fss, 4 * cfg.replications)
        ra = np.empty(cfg.replications)
        rb_ = np.empty(cfg.replications)
        for r in range(cfg.replications):
            A, B = swap_students(X_a, X_b, int(round(f * X_a.n)), rng)
            vals = []
            for s, X in enumerate((A, B)):
                sim = _Sim(X, theta, spec, cfg.k_process, cfg.exact_max_bits)
                a, G = _start(None, X.n)
                if cfg.burn_in:
                    sim.run(a, G, cfg.burn_in, cfg.burn_in, seeds[4 * r + 2 * s])
                rb, _, _ = sim.run(a, G, cfg.steps, cfg.thin, seeds[4 * r + 2 * s + 1])
                vals.append(rb.mean())
            ra[r], rb_[r] = vals
        overall = (X_a.n * ra + X_b.n * rb_) / (X_a.n + X_b.n)
        pa.append(float(ra.mean()))
        pb.append(float(rb_.mean()))
        po.append(float(overall.mean()))
        series.append(overall)
    F = len(fr)
    welch = np.empty((F, F, 2))
    ks = np.empty((F, F, 2))
    for i in range(F):
        for j in range(F):
            welch[i, j] = welch_t(series[i], series[j])
            ks[i, j] = ks_two_sample(series[i], series[j])
    return CompositionResult(fr, pa, pb, po, series, welch, ks)


# ---------------------------------------------------------------- campaign

@dataclass
class CampaignTable:
    """Campaign outcomes per treated fraction.

    ``actual`` is the control-variate estimate of the prevalence drop and
    ``actual_raw`` the plain replication average; ``prevalence`` is
    ``baseline - actual``.
    """

    fractions: list[float]
    baseline: float
    prevalence: list[float]
    proportional: list[float]
    actual: list[float]
    multiplier: list[float | None]
    actual_raw: list[float] = field(default_factory=list)
    se_actual: list[float] = field(default_factory=list)

    def header(self) -> list[str]:
        return ["treated_fraction", "prevalence", "proportional_effect", "actual_effect",
                "multiplier"]

    def rows(self) -> list[list]:
        return [list(r) for r in zip(self.fractions, self.prevalence, self.proportional,
                                     self.actual, self.multiplier)]


def _control_variate(y: np.ndarray, x: np.ndarray, x_mean: float) -> tuple[float, float]:
    """Mean of ``y`` corrected by a covariate ``x`` with known expectation."""
    if len(y) < 3 or np.var(x) == 0:
        se = y.std(ddof=1) / np.sqrt(len(y)) if len(y) > 1 else 0.0
        return float(y.mean()), float(se)
    c = np.cov(y, x)[0, 1] / np.var(x, ddof=1)
    adj = y - c * (x - x_mean)
    return float(adj.mean()), float(adj.std(ddof=2) / np.sqrt(len(y)))


def campaign_experiment(schools, theta: ModelParameters, treated_fractions: Iterable[float],
                        config: ScenarioConfig | None = None,
                        spec: Specification = DEFAULT_SPEC) -> CampaignTable:
    """Force a random subset of students to abstain and record the spillover.

    The treated set is drawn uniformly from all students pooled across
    schools, afresh in every replication (from current smokers first when
    ``config.targeted``).  Treated students stay non-smokers while everyone
    else keeps revising actions and links.

    Most of the replication noise at small fractions comes from which
    students happen to be treated.  The treated students' baseline smoking
    probabilities give a covariate whose expectation over uniform draws is
    known exactly (``size/N`` times the baseline mean), used as a control
    variate; targeted campaigns report the plain average.  Schools without a
    treated student follow their baseline path exactly and are not re-run.
    """
    cfg = config or ScenarioConfig(kind="campaign")
    fr = [float(f) for f in treated_fractions]
    if any(not 0 <= f <= 1 for f in fr):
        raise ValueError("treated fractions must lie in [0, 1]")
    items = _as_schools(schools)
    sizes = [X.n for _, X in items]
    N = sum(sizes)
    offsets = np.cumsum([0] + sizes)
    ss = np.random.SeedSequence(cfg.seed)
    sset, pick_ss = ss.spawn(2)
    pick = np.random.default_rng(pick_ss)
    sims = [_Sim(X, theta, spec, cfg.k_process, cfg.exact_max_bits) for _, X in items]
    school_seeds = [_seeds(s, 1 + cfg.replications) for s in sset.spawn(len(items))]
    chains = []
    for (S0, X), sim, seeds in zip(items, sims, school_seeds):
        a, G = _start(S0, X.n)
        if cfg.burn_in:
            sim.run(a, G, cfg.burn_in, cfg.burn_in, seeds[0])
        chains.append((a, G))
    R = cfg.replications
    base = np.empty(R)
    base_node = np.zeros(N)
    school_base = np.empty((R, len(items)))
    treat = np.empty((R, len(fr)))
    sets = []
    for r in range(R):
        starts = [(a.copy(), G.copy()) for a, G in chains]
        smokers = np.concatenate([a for a, _ in starts]).astype(bool)
        for s, (sim, (a, G)) in enumerate(zip(sims, chains)):
            rb, _, bits = sim.run(a, G, cfg.steps, cfg.thin, school_seeds[s][1 + r],
                                  record=True)
            school_base[r, s] = rb.mean()
            base_node[offsets[s]:offsets[s + 1]] += _node_probs(sim, bits).mean(axis=0)
        base[r] = school_base[r] @ np.asarray(sizes, float) / N
        row_sets = []
        for j, f in enumerate(fr):
            size = int(round(f * N))
            if cfg.targeted:
                sm = pick.permutation(np.flatnonzero(smokers))
                rest = pick.permutation(np.flatnonzero(~smokers))
                chosen = np.concatenate([sm, rest])[:size]
            else:
                chosen = pick.choice(N, size, replace=False)
            treated = np.zeros(N, bool)
            treated[chosen] = True
            row_sets.append(treated)
            tot = 0.0
            for s, (sim, (a0, G0)) in enumerate(zip(sims, starts)):
                mask = treated[offsets[s]:offsets[s + 1]]
                if not mask.any():
                    tot += sizes[s] * school_base[r, s]
                    continue
                a = a0.copy()
                a[mask] = 0
                rb, _, _ = sim.run(a, G0.copy(), cfg.steps, cfg.thin, school_seeds[s][1 + r],
                                   act_free=(~mask).astype(np.int8))
                tot += sizes[s] * rb.mean()
            treat[r, j] = tot / N
        sets.append(row_sets)
    p_node = base_node / R
    B = float(base.mean())
    actual, raw, se = [], [], []
    for j, f in enumerate(fr):
        y = base - treat[:, j]
        raw.append(float(y.mean()))
        if cfg.targeted or f in (0.0, 1.0):
            est = float(y.mean())
            sd = float(y.std(ddof=1) / np.sqrt(R)) if R > 1 else 0.0
        else:
            x = np.array([p_node[sets[r][j]].sum() / N for r in range(R)])
            size = int(round(f * N))
            est, sd = _control_variate(y, x, size / N * p_node.mean())
        actual.append(est)
        se.append(sd)
    # at full coverage every student is clamped: prevalence is exactly zero
    prevalence = [0.0 if f == 1.0 else B - e for f, e in zip(fr, actual)]
    actual = [B if f == 1.0 else e for f, e in zip(fr, actual)]
    # the benchmark uses the realized treated share round(f N) / N
    prop = [B * int(round(f * N)) / N for f in fr]
    mult = [None if p == 0 else e / p for e, p in zip(actual, prop)]
    return CampaignTable(fr, B, prevalence, prop, actual, mult, raw, se)


# -------------------------------------------------------------- fit report

@dataclass(frozen=True)
class FitReport:
    """Sample averages of descriptive network statistics.

    ``homophily`` is the share of nominations that go to a friend with the
    same smoking status.  ``coleman`` compares each group's same-type share
    ``H_s`` with the share of same-type potential partners
    ``w_s = (n_s - 1)/(n - 1)`` as ``(H_s - w_s)/(1 - w_s)``, averaged over
    the two groups with weights ``n_s/n``.  ``freeman`` is one minus the
    ratio of observed cross-status links to the number expected when the
    same number of links is placed at random.  Indices are ``None`` when
    undefined (no links, or one group only).

    ``mixing_counts[r][c]`` counts nominations from status r to status c
    (row/column 0 = smoker); every link yields one nomination per endpoint.
    """

    prevalence: float
    density: float
    avg_degree: float
    max_degree: float
    ss_edges_per_node: float
    nn_edges_per_node: float
    triangles_per_node: float
    homophily: float | None
    coleman: float | None
    freeman: float | None
    mixing_counts: tuple
    mixing_shares: tuple
    n_samples: int

    def as_rows(self) -> list[list]:
        rows = [["prevalence", self.prevalence], ["density", self.density],
                ["avg_degree", self.avg_degree], ["max_degree", self.max_degree],
                ["smoker_smoker_edges_per_node", self.ss_edges_per_node],
                ["nonsmoker_nonsmoker_edges_per_node", self.nn_edges_per_node],
                ["triangles_per_node", self.triangles_per_node],
                ["homophily_index", self.homophily], ["coleman_index", self.coleman],
                ["freeman_segregation_index", self.freeman]]
        labels = ("smoker", "nonsmoker")
        for r in range(2):
            for c in range(2):
                rows.append([f"mixing_count_{labels[r]}_{labels[c]}",
                             self.mixing_counts[r][c]])
        for r in range(2):
            for c in range(2):
                rows.append([f"mixing_share_{labels[r]}_{labels[c]}",
                             self.mixing_shares[r][c]])
        return rows


def _state_stats(a: np.ndarray, G: np.ndarray) -> dict:
    n = a.shape[0]
    A = G.astype(np.int64)
    deg = A.sum(axis=1)
    M = int(deg.sum()) // 2
    s = a.astype(bool)
    ns = int(s.sum())
    nd = n - ns
    ss = int(A[np.ix_(s, s)].sum()) // 2
    nn = int(A[np.ix_(~s, ~s)].sum()) // 2
    cross = M - ss - nn
    tri = int(np.trace(A @ A @ A)) // 6
    out = {"prevalence": ns / n,
           "density": M / (n * (n - 1) / 2) if n > 1 else 0.0,
           "avg_degree": float(deg.mean()), "max_degree": float(deg.max()),
           "ss": ss / n, "nn": nn / n, "tri": tri / n,
           "counts": np.array([[2 * ss, cross], [cross, 2 * nn]], float)}
    hom = col = fre = None
    if M > 0:
        hom = (2 * ss + 2 * nn) / (2 * M)
        if ns > 0 and nd > 0:
            expected = M * 2 * ns * nd / (n * (n - 1))
            fre = 1.0 - cross / expected
            acc, wt = 0.0, 0.0
            for size, same in ((ns, 2 * ss), (nd, 2 * nn)):
                noms = same + cross
                w = (size - 1) / (n - 1)
                if noms == 0 or w >= 1:
                    continue
                acc += size / n * ((same / noms - w) / (1 - w))
                wt += size / n
            col = acc / wt if wt > 0 else None
    out.update(homophily=hom, coleman=col, freeman=fre)
    return out


def _mean_defined(vals: list) -> float | None:
    ok = [v for v in vals if v is not None]
    return float(np.mean(ok)) if ok else None


def fit_statistics(sample, X=None) -> FitReport:
    """Average the descriptive statistics over a sample of states.

    ``sample`` is a :class:`StateSample`, one state, or any iterable of
    :class:`NetworkState`.  ``X`` is accepted for interface symmetry; the
    statistics depend only on smoking status and links.
    """
    if isinstance(sample, NetworkState):
        sample = [sample]
    states = list(sample)
    if not states:
        raise ValueError("fit statistics need a non-empty sample")
    recs = [_state_stats(S.actions, S.adjacency()) for S in states]
    counts = np.mean([r["counts"] for r in recs], axis=0)
    shares = []
    for row in counts:
        tot = row.sum()
        shares.append(tuple(float(x / tot) for x in row) if tot > 0 else (None, None))
    mean = lambda key: float(np.mean([r[key] for r in recs]))
    return FitReport(
        prevalence=mean("prevalence"), density=mean("density"), avg_degree=mean("avg_degree"),
        max_degree=mean("max_degree"), ss_edges_per_node=mean("ss"),
        nn_edges_per_node=mean("nn"), triangles_per_node=mean("tri"),
        homophily=_mean_defined([r["homophily"] for r in recs]),
        coleman=_mean_defined([r["coleman"] for r in recs]),
        freeman=_mean_defined([r["freeman"] for r in recs]),
        mixing_counts=tuple(tuple(float(x) for x in row) for row in counts),
        mixing_shares=tuple(shares), n_samples=len(states))


def pooled_fit_statistics(samples: Sequence) -> FitReport:
    """Average FitReports of several schools, weighting every state equally."""
    states = [S for smp in samples for S in smp]
    return fit_statistics(states)


# ------------------------------------------------------------------- tests

def welch_t(sample_a, sample_b) -> tuple[float, float]:
    """Two-sided t test for unequal variances with Welch-Satterthwaite df.

    Two constant samples give ``(0, 1)`` when their values agree and an
    infinite statistic with ``p = 0`` otherwise.
    """
    x = np.asarray(sample_a, float)
    y = np.asarray(sample_b, float)
    if x.size < 2 or y.size < 2:
        raise ValueError("each sample needs at least two observations")
    mx, my = x.mean(), y.mean()
    vx, vy = x.var(ddof=1) / x.size, y.var(ddof=1) / y.size
    se2 = vx + vy
    if se2 == 0:
        if mx == my:
            return 0.0, 1.0
        return float(np.sign(mx - my) * np.inf), 0.0
    t = (mx - my) / np.sqrt(se2)
    df = se2 ** 2 / (vx ** 2 / (x.size - 1) + vy ** 2 / (y.size - 1))
    p = 2.0 * stats.t.sf(abs(t), df)
    return float(t), float(min(p, 1.0))


def ks_two_sample(sample_a, sample_b) -> tuple[float, float]:
    """Kolmogorov-Smirnov distance with the asymptotic Kolmogorov p-value."""
    x = np.sort(np.asarray(sample_a, float))
    y = np.sort(np.asarray(sample_b, float))
    if x.size < 1 or y.size < 1:
        raise ValueError("each sample needs at least one observation")
    grid = np.concatenate([x, y])
    fx = np.searchsorted(x, grid, side="right") / x.size
    fy = np.searchsorted(y, grid, side="right") / y.size
    D = float(np.abs(fx - fy).max())
    ne = x.size * y.size / (x.size + y.size)
    p = float(special.kolmogorov(np.sqrt(ne) * D))
    return D, min(max(p, 0.0), 1.0)
