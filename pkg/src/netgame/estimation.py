"""Bayesian estimation of the structural coefficients.

The likelihood of an observed state is the Gibbs measure exp(theta . s / beta)
/ H(theta), whose normalizer sums over every network and action profile.
The double Metropolis-Hastings sampler sidesteps H: for a proposal theta' it
runs a short auxiliary chain at theta' from the observed state and uses its
end point S^R in an exchange-type acceptance ratio

    log r = [theta . s(S^R) - theta . s(S) + theta' . s(S) - theta' . s(S^R)] / beta
            + log p(theta') - log p(theta).

The auxiliary chain draws the meeting dimension from a mixture, proposes a
uniform configuration of the meeting neighborhood (or, rarely, the complement
of the whole state) and accepts by the potential difference; all proposals
are symmetric so no proposal ratio enters.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np
from scipy import optimize
from scipy.special import expit, logit, logsumexp

from . import _kernels as K
from .dynamics import _cum, k_distribution, kernel_seed
from .model import (COEF_NAMES, DEFAULT_SPEC, N_COEF, AttributeTable, Design, ModelParameters,
                    NetworkState, Specification, as_design, statistics_arrays)
from .statespace import statistics_table

SCENARIOS = ("full", "no_net_data", "fixed_net", "no_pe", "no_tri")
LIKELIHOODS = ("double_mh", "exact", "none")
_IDX = {name: r for r, name in enumerate(COEF_NAMES)}


# ------------------------------------------------------------------ priors

@dataclass
class PriorSpec:
    """Independent normal priors, one per coefficient in :data:`COEF_NAMES` order."""

    mean: np.ndarray
    sd: np.ndarray

    def __post_init__(self):
        self.mean = np.broadcast_to(np.asarray(self.mean, float), (N_COEF,)).copy()
        self.sd = np.broadcast_to(np.asarray(self.sd, float), (N_COEF,)).copy()
        if not (self.sd > 0).all():
            raise ValueError("prior standard deviations must be positive")

    @classmethod
    def normal(cls, mean: float | Sequence[float] = 0.0,
               sd: float | Sequence[float] = 10.0) -> "PriorSpec":
        return cls(np.asarray(mean, float), np.asarray(sd, float))

    @classmethod
    def from_mapping(cls, mapping: Mapping, default_sd: float = 10.0) -> "PriorSpec":
        mean = np.zeros(N_COEF)
        sd = np.full(N_COEF, default_sd)
        for name, spec in mapping.items():
            if name not in _IDX:
                raise ValueError(f"unknown coefficient {name!r} in prior")
            mean[_IDX[name]] = float(spec.get("mean", 0.0))
            sd[_IDX[name]] = float(spec.get("sd", default_sd))
        return cls(mean, sd)

    def logpdf(self, theta: np.ndarray, mask: np.ndarray | None = None) -> float:
        z = (np.asarray(theta) - self.mean) / self.sd
        terms = -0.5 * z * z - np.log(self.sd) - 0.5 * np.log(2 * np.pi)
        return float(terms[mask].sum() if mask is not None else terms.sum())


def prior_from_data(data, sd: float = 10.0) -> PriorSpec:
    """Normal priors centered at logit frequencies for the two intercepts."""
    smokes = np.concatenate([S.actions for S, _ in data]).mean()
    links = np.concatenate([S.links for S, _ in data])
    dens = links.mean() if links.size else 0.5
    eps = 1e-3
    mean = np.zeros(N_COEF)
    mean[_IDX["v0"]] = logit(np.clip(smokes, eps, 1 - eps))
    mean[_IDX["w0"]] = logit(np.clip(dens, eps, 1 - eps))
    return PriorSpec(mean, np.full(N_COEF, sd))


# --------------------------------------------------------------- scenarios

def scenario_masks(scenario: str) -> tuple[np.ndarray, bool]:
    """Free-coefficient mask and whether links move in the auxiliary chain."""
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    free = np.ones(N_COEF, bool)
    links_free = True
    if scenario == "no_pe":
        free[[_IDX["phi"], _IDX["h"]]] = False
    elif scenario == "no_tri":
        free[_IDX["q"]] = False
    elif scenario == "fixed_net":
        free[6:11] = False
        links_free = False
    elif scenario == "no_net_data":
        free[6:11] = False
        free[_IDX["phi"]] = False
        links_free = False
    return free, links_free


@dataclass
class EstimationConfig:
    """Outer and auxiliary chain settings.

    ``proposal_scale`` holds random-walk standard deviations (scalar or one
    per coefficient); ``proposal_cov`` overrides it with a full covariance.
    With ``adapt`` the proposal is tuned during burn-in only and frozen
    afterwards.  ``free`` restricts the sampled coefficients further;
    every non-free coefficient sits at ``clamp`` (default 0).
    """

    T: int = 100_000
    R: int = 1_000
    k_process: object = "mixture"
    large_step_prob: float = 0.02
    proposal_scale: float | Sequence[float] = 0.05
    proposal_cov: np.ndarray | None = None
    adapt: bool = True
    target_accept: float = 0.234
    burn_in_frac: float = 0.2
    seed: int = 0
    scenario: str = "full"
    init: str | Sequence[float] = "mple"
    likelihood: str = "double_mh"
    free: Sequence[str] | None = None
    clamp: Mapping[str, float] = field(default_factory=dict)
    beta: float = 1.0
    potential_offset: float = 0.0

    def __post_init__(self):
        if self.T < 1 or self.R < 1:
            raise ValueError("T and R must be >= 1")
        scale = np.asarray(self.proposal_scale, float)
        if (scale <= 0).any():
            raise ValueError("proposal scales must be positive")
        if not 0.0 <= self.burn_in_frac < 1.0:
            raise ValueError("burn_in_frac must lie in [0, 1)")
        if self.likelihood not in LIKELIHOODS:
            raise ValueError(f"likelihood must be one of {LIKELIHOODS}")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        scenario_masks(self.scenario)
        for name in list(self.free or []) + list(self.clamp):
            if name not in _IDX:
                raise ValueError(f"unknown coefficient {name!r}")

    def masks(self) -> tuple[np.ndarray, bool]:
        free, links_free = scenario_masks(self.scenario)
        if self.free is not None:
            sel = np.zeros(N_COEF, bool)
            sel[[_IDX[nm] for nm in self.free]] = True
            free &= sel
        return free, links_free

    def clamp_vector(self) -> np.ndarray:
        out = np.zeros(N_COEF)
        for nm, val in self.clamp.items():
            out[_IDX[nm]] = float(val)
        return out


# ----------------------------------------------------------------- data prep

@dataclass(eq=False)
class _Net:
    a: np.ndarray
    G: np.ndarray
    d: Design
    stats: np.ndarray
    total_zw: np.ndarray
    act_free: np.ndarray


def _prepare(data, spec: Specification, links_free: bool, drop_links: bool) -> list[_Net]:
    if not data:
        raise ValueError("need at least one network")
    nets = []
    for S, X in data:
        d = as_design(X, spec)
        if S.n != d.n:
            raise ValueError("state and attributes disagree on n")
        a = S.actions.astype(np.int8).copy()
        G = np.zeros((S.n, S.n), np.int8) if drop_links else S.adjacency().astype(np.int8)
        iu = np.triu_indices(S.n, k=1)
        nets.append(_Net(a, G, d, statistics_arrays(a, G, d), d.zw[iu].sum(axis=0),
                         np.ones(S.n, np.int8)))
    return nets


def change_statistics(a: np.ndarray, G: np.ndarray, d: Design,
                      include_links: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Rows s(bit=1) - s(bit=0) for every bit, with the observed bit values."""
    n = d.n
    a = a.astype(np.float64)
    Gf = G.astype(np.float64)
    m = a.sum()
    act = np.zeros((n, N_COEF))
    act[:, :6] = d.zv
    act[:, 11] = m - a
    act[:, 12] = Gf @ (2 * a - 1)
    rows, ys = [act], [a]
    if include_links and n > 1:
        iu, ju = np.triu_indices(n, k=1)
        gg = d.gate.astype(np.float64)
        common = (Gf * gg[None, :]) @ Gf
        lk = np.zeros((iu.size, N_COEF))
        lk[:, 6:10] = d.zw[iu, ju]
        lk[:, 10] = gg[iu] * gg[ju] * common[iu, ju]
        lk[:, 12] = a[iu] * a[ju] + (1 - a[iu]) * (1 - a[ju])
        rows.append(lk)
        ys.append(Gf[iu, ju])
    return np.vstack(rows), np.concatenate(ys)


def pseudo_likelihood_fit(data, free: np.ndarray | None = None,
                          clamp: np.ndarray | None = None, spec: Specification = DEFAULT_SPEC,
                          links_free: bool = True, ridge_sd: float = 10.0,
                          beta: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Maximum pseudo-likelihood estimate (each bit logit on its change statistic).

    A weak ridge N(0, ridge_sd^2) keeps the optimum finite under separation.
    Returns the full coefficient vector and the inverse Hessian on the free block.
    """
    free = np.ones(N_COEF, bool) if free is None else np.asarray(free, bool)
    clamp = np.zeros(N_COEF) if clamp is None else np.asarray(clamp, float)
    Xs, ys = [], []
    for S, X in data:
        d = as_design(X, spec)
        x, y = change_statistics(S.actions, S.adjacency(), d, include_links=links_free)
        Xs.append(x)
        ys.append(y)
    Z = np.vstack(Xs) / beta
    y = np.concatenate(ys)
    off = Z[:, ~free] @ clamp[~free]
    Zf = Z[:, free]
    scale = np.maximum(np.abs(Zf).max(axis=0), 1e-12)
    Zs = Zf / scale
    lam = 1.0 / (ridge_sd ** 2)

    def f(b):
        eta = off + Zs @ b
        return float(np.sum(np.logaddexp(0, eta) - y * eta) + 0.5 * lam * np.sum((b / scale) ** 2))

    def grad(b):
        p = expit(off + Zs @ b)
        return Zs.T @ (p - y) + lam * b / scale ** 2

    def hess(b):
        p = expit(off + Zs @ b)
        return (Zs * (p * (1 - p))[:, None]).T @ Zs + np.diag(lam / scale ** 2)

    res = optimize.minimize(f, np.zeros(Zs.shape[1]), jac=grad, hess=hess,
                            method="trust-exact")
    b = res.x / scale
    H = hess(res.x) * np.outer(scale, scale)
    theta = clamp.copy()
    theta[free] = b
    cov = np.linalg.inv(H)
    return theta, 0.5 * (cov + cov.T)


# ------------------------------------------------------------------- chains

@dataclass
class PosteriorSample:
    iteration: int
    theta: np.ndarray
    accepted: bool
    log_prior: float
    terminal_potential: np.ndarray

    def parameters(self, beta: float = 1.0) -> ModelParameters:
        return ModelParameters.from_vector(self.theta, beta)


@dataclass
class PosteriorChain:
    theta: np.ndarray
    accepted: np.ndarray
    log_prior: np.ndarray
    terminal_potential: np.ndarray
    free: np.ndarray
    burn_in: int
    proposal_cov: np.ndarray
    config: EstimationConfig

    names = COEF_NAMES

    def __len__(self) -> int:
        return self.theta.shape[0]

    def samples(self) -> Iterator[PosteriorSample]:
        for t in range(len(self)):
            yield PosteriorSample(t, self.theta[t], bool(self.accepted[t]),
                                  float(self.log_prior[t]), self.terminal_potential[t])

    def post_burn_in(self) -> np.ndarray:
        return self.theta[self.burn_in:]

    def acceptance_rate(self, after_burn_in: bool = True) -> float:
        acc = self.accepted[self.burn_in:] if after_burn_in else self.accepted
        return float(acc.mean()) if acc.size else float("nan")

    def posterior_mean(self) -> ModelParameters:
        return ModelParameters.from_vector(self.post_burn_in().mean(axis=0), self.config.beta)


def _exact_tables(nets: list[_Net], links_free: bool) -> list[np.ndarray]:
    out = []
    for net in nets:
        if net.d.n > 5:
            raise ValueError("the exact-normalizer route needs n <= 5")
        tab = statistics_table(net.d)
        if not links_free:
            from .statespace import all_bits
            n = net.d.n
            iu = np.triu_indices(n, k=1)
            keep = (all_bits(n)[:, n:] == net.G[iu]).all(axis=1)
            tab = tab[keep]
        out.append(tab)
    return out


def _exact_loglik(theta, nets, tables, beta) -> float:
    return float(sum(theta @ net.stats / beta - logsumexp(tab @ theta / beta)
                     for net, tab in zip(nets, tables)))


def _initial_theta(data, nets, cfg: EstimationConfig, prior: PriorSpec, free, links_free,
                   clamp, spec) -> tuple[np.ndarray, np.ndarray | None]:
    if isinstance(cfg.init, str):
        if cfg.init == "prior_mean":
            th = clamp.copy()
            th[free] = prior.mean[free]
            return th, None
        if cfg.init == "mple":
            pseudo_data = [(NetworkState.from_adjacency(net.a, net.G), net.d) for net in nets]
            th, cov = pseudo_likelihood_fit(pseudo_data, free, clamp, spec, links_free,
                                            beta=cfg.beta)
            return th, cov
        raise ValueError(f"unknown init {cfg.init!r}")
    th = np.asarray(cfg.init, float).copy()
    if th.shape != (N_COEF,):
        raise ValueError("init vector must have one entry per coefficient")
    th[~free] = clamp[~free]
    return th, None


def double_mh(data, prior: PriorSpec, config: EstimationConfig,
              spec: Specification = DEFAULT_SPEC) -> PosteriorChain:
    """Varying double Metropolis-Hastings posterior sampler.

    ``data`` is a sequence of (NetworkState, AttributeTable) pairs, one per
    independent school network.  ``config.likelihood`` switches to the exact
    normalizer (small n only) or to a prior-only run; the proposal stream is
    the same in every case so runs can be compared draw by draw.
    """
    cfg = config
    free, links_free = cfg.masks()
    clamp = cfg.clamp_vector()
    nets = _prepare(data, spec, links_free, drop_links=cfg.scenario == "no_net_data")
    d_free = int(free.sum())
    theta, mple_cov = _initial_theta(data, nets, cfg, prior, free, links_free, clamp, spec)
    beta = cfg.beta

    if cfg.proposal_cov is not None:
        cov = np.asarray(cfg.proposal_cov, float)
        if cov.shape == (N_COEF, N_COEF):
            cov = cov[np.ix_(free, free)]
    elif mple_cov is not None:
        cov = mple_cov * (2.38 ** 2 / max(d_free, 1))
    else:
        sc = np.broadcast_to(np.asarray(cfg.proposal_scale, float), (N_COEF,))
        cov = np.diag(sc[free] ** 2)
    if cov.shape != (d_free, d_free):
        raise ValueError("proposal covariance has the wrong shape")
    chol = np.linalg.cholesky(cov + 1e-14 * np.eye(d_free))

    kdist = []
    for net in nets:
        kv, kp = k_distribution(net.d.n, cfg.k_process) if net.d.n >= 2 else \
            (np.array([2]), np.array([1.0]))
        kdist.append((kv, _cum(kp)))

    tables = _exact_tables(nets, links_free) if cfg.likelihood == "exact" else None
    rng = np.random.default_rng(cfg.seed)
    T = cfg.T
    burn = int(cfg.burn_in_frac * T)
    out_theta = np.empty((T, N_COEF))
    out_acc = np.zeros(T, bool)
    out_lp = np.empty(T)
    out_term = np.zeros((T, len(nets)))
    lp = prior.logpdf(theta, free)
    ll = _exact_loglik(theta, nets, tables, beta) if tables is not None else 0.0
    log_scale = 0.0
    batch, batch_acc = 50, 0
    refits = {burn // 4, burn // 2, (3 * burn) // 4} - {0}
    c = cfg.potential_offset
    work_a = [net.a.copy() for net in nets]
    work_G = [net.G.copy() for net in nets]
    work_s = [net.stats.copy() for net in nets]
    term = np.zeros(len(nets))

    for t in range(T):
        z = rng.standard_normal(d_free)
        seeds = [kernel_seed(rng) for _ in nets]
        log_u = np.log(rng.random())
        prop = theta.copy()
        prop[free] = theta[free] + np.exp(log_scale) * (chol @ z)
        lp_prop = prior.logpdf(prop, free)
        log_r = lp_prop - lp
        if cfg.likelihood == "double_mh":
            for w, net in enumerate(nets):
                a = work_a[w]
                G = work_G[w]
                s = work_s[w]
                a[:] = net.a
                G[:] = net.G
                s[:] = net.stats
                kv, kc = kdist[w]
                K.mh_chain(a, G, net.d.zv, net.d.zw, net.d.gate, prop, beta, kv, kc,
                           cfg.large_step_prob, cfg.R, seeds[w], net.act_free, links_free,
                           net.total_zw, s)
                phi_old_R = theta @ s + c
                phi_old_S = theta @ net.stats + c
                phi_new_S = prop @ net.stats + c
                phi_new_R = prop @ s + c
                log_r += (phi_old_R - phi_old_S + phi_new_S - phi_new_R) / beta
                term[w] = phi_new_R - c
        elif cfg.likelihood == "exact":
            ll_prop = _exact_loglik(prop, nets, tables, beta)
            log_r += ll_prop - ll
        accept = log_u < log_r
        if accept:
            theta = prop
            lp = lp_prop
            if tables is not None:
                ll = ll_prop
            batch_acc += 1
        out_theta[t] = theta
        out_acc[t] = accept
        out_lp[t] = lp
        out_term[t] = term

        if cfg.adapt and t < burn:
            if (t + 1) % batch == 0:
                rate = batch_acc / batch
                log_scale += (rate - cfg.target_accept) / np.sqrt((t + 1) / batch)
                batch_acc = 0
            if (t + 1) in refits and d_free > 0:
                half = out_theta[(t + 1) // 2: t + 1][:, free]
                emp = np.cov(half, rowvar=False).reshape(d_free, d_free)
                if np.all(np.isfinite(emp)) and np.linalg.matrix_rank(emp) == d_free:
                    cov = emp * (2.38 ** 2 / d_free)
                    chol = np.linalg.cholesky(cov + 1e-12 * np.eye(d_free))
                    log_scale = 0.0

    return PosteriorChain(out_theta, out_acc, out_lp, out_term, free, burn,
                          np.exp(2 * log_scale) * (chol @ chol.T), cfg)


def exact_mh(data, prior: PriorSpec, config: EstimationConfig,
             spec: Specification = DEFAULT_SPEC) -> PosteriorChain:
    """Same outer chain with the exact normalizer computed by enumeration."""
    from dataclasses import replace
    return double_mh(data, prior, replace(config, likelihood="exact"), spec)


def restricted_fits(data, prior: PriorSpec, scenario: str, config: EstimationConfig,
                    spec: Specification = DEFAULT_SPEC) -> PosteriorChain:
    """Posterior under one of the restricted model variants.

    ``no_net_data`` replaces each network by the empty graph held fixed and
    samples only action coefficients and h; ``fixed_net`` holds the observed
    network fixed and samples action coefficients, h and phi; ``no_pe``
    clamps phi and h; ``no_tri`` clamps q; ``full`` frees everything.
    """
    from dataclasses import replace
    scenario_masks(scenario)
    return double_mh(data, prior, replace(config, scenario=scenario), spec)


def inner_chain_step(S: NetworkState, X, theta: ModelParameters, rng: np.random.Generator,
                     k_process="mixture", large_step_prob: float = 0.02, steps: int = 1,
                     spec: Specification = DEFAULT_SPEC) -> NetworkState:
    """Advance the auxiliary Metropolis-Hastings chain by ``steps`` proposals."""
    d = as_design(X, spec)
    a = S.actions.copy()
    G = S.adjacency()
    kv, kp = k_distribution(S.n, k_process)
    iu = np.triu_indices(S.n, k=1)
    stats = statistics_arrays(a, G, d)
    K.mh_chain(a, G, d.zv, d.zw, d.gate, theta.as_vector(), theta.beta, kv, _cum(kp),
               large_step_prob, steps, kernel_seed(rng), np.ones(S.n, np.int8), True,
               d.zw[iu].sum(axis=0), stats)
    return NetworkState.from_adjacency(a, G)


def run_inner_chain(S: NetworkState, X, theta: ModelParameters, steps: int, seed: int,
                    k_process="mixture", large_step_prob: float = 0.02, thin: int = 1,
                    spec: Specification = DEFAULT_SPEC) -> np.ndarray:
    """Canonical indices visited by the auxiliary chain (small n diagnostics)."""
    d = as_design(X, spec)
    a = S.actions.copy()
    G = S.adjacency()
    kv, kp = k_distribution(S.n, k_process)
    kc = _cum(kp)
    iu = np.triu_indices(S.n, k=1)
    tzw = d.zw[iu].sum(axis=0)
    stats = statistics_arrays(a, G, d)
    rng = np.random.default_rng(seed)
    nrec = steps // thin
    out = np.empty(nrec, np.int64)
    w = 1 << np.arange(S.n + iu[0].size, dtype=np.int64)
    vec = theta.as_vector()
    free = np.ones(S.n, np.int8)
    for r in range(nrec):
        K.mh_chain(a, G, d.zv, d.zw, d.gate, vec, theta.beta, kv, kc, large_step_prob, thin,
                   kernel_seed(rng), free, True, tzw, stats)
        out[r] = int(np.concatenate([a, G[iu]]).astype(np.int64) @ w)
    return out


def inner_proposal_matrix(n: int, k_process="mixture", large_step_prob: float = 0.02) -> np.ndarray:
    """Exact proposal kernel Q[S, S'] of the auxiliary chain (n <= 4)."""
    from math import comb
    from .statespace import iter_meetings, meeting_bit_positions, n_states, neighborhood_indices
    if n > 4:
        raise ValueError("exact proposal matrices support n <= 4")
    N = n_states(n)
    Q = np.zeros((N, N))
    rows = np.arange(N)[:, None]
    ks, ps = k_distribution(n, k_process)
    for kk, pk in zip(ks, ps):
        pr = (1 - large_step_prob) * pk / (n * comb(n - 1, int(kk) - 1))
        for i, partners in iter_meetings(n, int(kk)):
            nb = neighborhood_indices(n, meeting_bit_positions(n, i, partners))
            np.add.at(Q, (np.broadcast_to(rows, nb.shape), nb), pr / nb.shape[1])
    comp = (N - 1) ^ np.arange(N)
    Q[np.arange(N), comp] += large_step_prob
    return Q


# --------------------------------------------------------------- summaries

def shortest_interval(x: np.ndarray, level: float) -> tuple[float, float]:
    """Narrowest window containing ceil(level * N) sorted draws."""
    x = np.sort(np.asarray(x, float))
    N = x.size
    if N == 0:
        raise ValueError("empty sample")
    m = min(N, max(1, int(np.ceil(level * N))))
    widths = x[m - 1:] - x[:N - m + 1]
    j = int(np.argmin(widths))
    return float(x[j]), float(x[j + m - 1])


@dataclass
class SummaryRow:
    coefficient: str
    mean: float
    intervals: dict


def posterior_summary(chain, burn_in_frac: float = 0.2,
                      levels: Sequence[float] = (0.90, 0.95, 0.99),
                      names: Sequence[str] = COEF_NAMES) -> list[SummaryRow]:
    """Posterior means and shortest credible sets after dropping a burn-in."""
    draws = chain.theta if isinstance(chain, PosteriorChain) else np.asarray(chain, float)
    if draws.ndim == 1:
        draws = draws[:, None]
    cut = int(burn_in_frac * draws.shape[0])
    post = draws[cut:]
    if post.shape[0] == 0:
        raise ValueError("no draws left after burn-in")
    rows = []
    for r in range(post.shape[1]):
        col = post[:, r]
        rows.append(SummaryRow(names[r] if r < len(names) else f"c{r}", float(col.mean()),
                               {lv: shortest_interval(col, lv) for lv in levels}))
    return rows


def effective_sample_size(x: np.ndarray) -> float:
    """Initial-positive-sequence ESS of a scalar chain."""
    x = np.asarray(x, float) - np.mean(x)
    N = x.size
    if N < 4 or np.allclose(x, 0):
        return float(N)
    f = np.fft.rfft(x, 2 * N)
    acf = np.fft.irfft(f * np.conj(f))[:N]
    acf /= acf[0]
    s = 0.0
    for lag in range(1, N - 1, 2):
        pair = acf[lag] + acf[lag + 1]
        if pair < 0:
            break
        s += pair
    tau = -1.0 + 2.0 * (1.0 + s) if s > 0 else 1.0
    return float(N / max(tau, 1.0))


# -------------------------------------------------------------- transforms

TRANSFORM_NAMES = (
    "baseline_smoking", "price", "hh_smokes_mp", "mom_edu_mp", "black_mp", "grade9p_mp",
    "school_30pct_mp", "baseline_friends", "diff_sex_mp_pct", "diff_grade_mp_pct",
    "diff_race_mp_pct", "triangles_mp_pct", "phi_mp",
)


@dataclass(frozen=True)
class TransformedEstimates:
    """Interpretable re-parametrization; bijective given the network size n.

    baseline_smoking = sigmoid(v0); baseline_friends = (n-1) sigmoid(w0);
    *_mp = sigmoid(v0 + coef) - sigmoid(v0) (h enters as 30% of the other
    n-1 students smoking); *_mp_pct = sigmoid(w0 + coef) / sigmoid(w0) - 1;
    price is kept on its raw scale.
    """

    values: tuple
    n: int

    def as_dict(self) -> dict:
        return dict(zip(TRANSFORM_NAMES, self.values))


def transform(theta: ModelParameters, n: int) -> TransformedEstimates:
    if n < 2:
        raise ValueError("transform needs n >= 2")
    v = theta.as_vector()
    p0 = expit(v[0])
    f0 = expit(v[6])
    out = [p0, v[1]]
    out += [expit(v[0] + v[r]) - p0 for r in (2, 3, 4, 5)]
    out.append(expit(v[0] + 0.3 * (n - 1) * v[11]) - p0)
    out.append((n - 1) * f0)
    out += [expit(v[6] + v[r]) / f0 - 1.0 for r in (7, 8, 9, 10)]
    out.append(expit(v[0] + v[12]) - p0)
    return TransformedEstimates(tuple(float(x) for x in out), n)


def inverse_transform(est: TransformedEstimates, n: int | None = None,
                      beta: float = 1.0) -> ModelParameters:
    n = est.n if n is None else n
    x = np.asarray(est.values, float)
    if not 0 < x[0] < 1:
        raise ValueError("baseline smoking probability must lie in (0, 1)")
    if not 0 < x[7] < n - 1:
        raise ValueError("baseline friend count must lie in (0, n-1)")
    v = np.zeros(N_COEF)
    v[0] = logit(x[0])
    v[1] = x[1]

    def from_mp(mp):
        p = x[0] + mp
        if not 0 < p < 1:
            raise ValueError("marginal probability leaves (0, 1)")
        return logit(p) - v[0]

    for r, c in zip((2, 3, 4, 5), (2, 3, 4, 5)):
        v[r] = from_mp(x[c])
    v[11] = from_mp(x[6]) / (0.3 * (n - 1))
    f0 = x[7] / (n - 1)
    v[6] = logit(f0)
    for r, c in zip((7, 8, 9, 10), (8, 9, 10, 11)):
        p = f0 * (1 + x[c])
        if not 0 < p < 1:
            raise ValueError("relative marginal probability leaves (0, 1)")
        v[r] = logit(p) - v[6]
    v[12] = from_mp(x[12])
    return ModelParameters.from_vector(v, beta)
