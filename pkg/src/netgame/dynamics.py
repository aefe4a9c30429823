"""The k-player consensual dynamic and its exact small-n analysis.

Each period a uniformly drawn chooser meets ``k-1`` uniformly drawn
partners and revises her action and those links.  In deterministic mode she
best-responds; in perturbed mode (Gumbel shocks of scale beta) she draws from
the logit over the ``2^k`` neighborhood.  The perturbed chain is reversible
with respect to exp(Phi / beta), whatever the distribution of k.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Mapping, Union

import numpy as np

from . import _kernels as K
from .equilibrium import MeetingEvent, neksn_mask, pairwise_stable_mask, is_neksn
from .model import (DEFAULT_SPEC, ModelParameters, NetworkState, Specification, as_design,
                    model_terms, n_links)
from .statespace import (all_bits, gibbs_distribution, iter_meetings, meeting_bit_positions,
                         n_states, neighborhood_indices, potential_table)

KProcess = Union[int, str, Mapping[int, float]]
MAX_EXACT_N = 4


def k_distribution(n: int, k_process: KProcess = "mixture") -> tuple[np.ndarray, np.ndarray]:
    """Support and probabilities of the meeting dimension.

    ``"mixture"`` puts 0.75 on k=2 and spreads 0.25 uniformly on {2..n-1};
    when that range is empty (n=2) all mass goes to k=2.
    """
    if n < 2:
        raise ValueError("meetings need n >= 2")
    if isinstance(k_process, str):
        if k_process != "mixture":
            raise ValueError(f"unknown k process {k_process!r}")
        w = {2: 0.75}
        upper = list(range(2, n))
        if not upper:
            w = {2: 1.0}
        for k in upper:
            w[k] = w.get(k, 0.0) + 0.25 / len(upper)
    elif isinstance(k_process, Mapping):
        w = {int(k): float(p) for k, p in k_process.items()}
    else:
        w = {int(k_process): 1.0}
    ks = np.array(sorted(w), dtype=np.int64)
    ps = np.array([w[k] for k in ks], dtype=np.float64)
    if ks.min() < 2 or ks.max() > n:
        raise ValueError(f"meeting dimensions must lie in 2..{n}")
    if (ps < 0).any() or abs(ps.sum() - 1.0) > 1e-9:
        raise ValueError("k weights must be non-negative and sum to 1")
    return ks, ps


def _cum(ps: np.ndarray) -> np.ndarray:
    c = np.cumsum(ps)
    c[-1] = 1.0
    return c


@dataclass
class ChainConfig:
    """Settings of one consensual-dynamics run.

    ``large_step_prob`` is used only by the Metropolis-Hastings sampler of the
    estimation module; the consensual dynamic itself never proposes jumps.
    """

    k_process: KProcess = 2
    steps: int = 10_000
    seed: int = 0
    large_step_prob: float = 0.02
    mode: str = "perturbed"
    thin: int = 1
    record_states: bool = True
    exact_max_bits: int = 12
    patience: int | None = None
    max_steps: int = 10_000_000

    def __post_init__(self):
        if self.mode not in ("perturbed", "deterministic"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.steps < 0 or self.thin < 1:
            raise ValueError("steps must be >= 0 and thin >= 1")
        if not 0.0 <= self.large_step_prob <= 1.0:
            raise ValueError("large_step_prob must lie in [0, 1]")


@dataclass
class ChainResult:
    steps: np.ndarray
    potentials: np.ndarray
    prevalence: np.ndarray
    rb_prevalence: np.ndarray
    states: np.ndarray | None
    final: NetworkState
    steps_run: int
    converged: bool | None = None

    def state_indices(self) -> np.ndarray:
        if self.states is None:
            raise ValueError("states were not recorded")
        w = (1 << np.arange(self.states.shape[1], dtype=np.int64))
        return self.states.astype(np.int64) @ w

    def state_at(self, r: int) -> NetworkState:
        return NetworkState.from_bits(self.final.n, self.states[r])


def kernel_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**32 - 1))


def sample_meeting(n: int, k: int, rng: np.random.Generator) -> MeetingEvent:
    """Uniform over the n * C(n-1, k-1) meetings."""
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    i = int(rng.integers(n))
    others = np.array([j for j in range(n) if j != i])
    partners = np.sort(rng.choice(others, size=k - 1, replace=False))
    return MeetingEvent(i, tuple(int(p) for p in partners))


def kcd_step(S: NetworkState, X, theta: ModelParameters, meeting: MeetingEvent,
             rng: np.random.Generator, mode: str = "perturbed",
             spec: Specification = DEFAULT_SPEC, exact_max_bits: int = 12) -> NetworkState:
    meeting.validate(S.n)
    if mode not in ("perturbed", "deterministic"):
        raise ValueError(f"unknown mode {mode!r}")
    t = model_terms(X, theta, spec)
    a = S.actions.copy()
    G = S.adjacency()
    K.single_meeting(a, G, t.v, t.w, t.gate, t.q, t.h, t.phi, t.beta, meeting.chooser,
                     np.array(meeting.partners, dtype=np.int64), kernel_seed(rng),
                     mode == "deterministic", exact_max_bits)
    return NetworkState.from_adjacency(a, G)


def _absorbing(S: NetworkState, X, theta, ks, spec) -> bool:
    n = S.n
    for k in ks:
        if n * comb(n - 1, int(k) - 1) * (1 << int(k)) > 2_000_000:
            return True  # unverifiable at this size; rely on the no-change streak
        if not is_neksn(S, X, theta, int(k), spec).is_equilibrium:
            return False
    return True


def run_chain(S0: NetworkState, X, theta: ModelParameters, config: ChainConfig,
              spec: Specification = DEFAULT_SPEC, act_free: np.ndarray | None = None,
              links_free: bool = True) -> ChainResult:
    """Iterate draw k, draw meeting, revise.

    ``act_free`` / ``links_free`` freeze parts of the state (used by the
    counterfactual modes).  Records every ``thin`` steps including step 0.
    Deterministic runs stop at an absorbing state or at ``max_steps``.
    """
    t = model_terms(X, theta, spec)
    if S0.n != t.n:
        raise ValueError("state and attributes disagree on n")
    n = S0.n
    ks, ps = k_distribution(n, config.k_process) if n >= 2 else (np.array([2]), np.array([1.0]))
    det = config.mode == "deterministic"
    if det and ks.max() > 24:
        raise ValueError("deterministic mode enumerates neighborhoods; needs k <= 24")
    a = S0.actions.copy()
    G = S0.adjacency()
    free = np.ones(n, np.int8) if act_free is None else np.asarray(act_free, np.int8)
    rng = np.random.default_rng(config.seed)
    phi0 = K.full_potential(a, G, t.v, t.w, t.gate, t.q, t.h, t.phi)
    nb = n + n_links(n)

    if n < 2:
        st = S0.bits()[None, :] if config.record_states else None
        return ChainResult(np.zeros(1, np.int64), np.array([phi0]), np.array([a.mean()]),
                           np.array([a.mean()]), st, S0, 0, True if det else None)

    if not det:
        n_rec = config.steps // config.thin + 1
        states = np.zeros((n_rec if config.record_states else 1, nb), np.int8)
        pot = np.empty(n_rec)
        prev = np.empty(n_rec)
        rb = np.empty(n_rec)
        r, steps_run, _ = K.kcd_chain(a, G, t.v, t.w, t.gate, t.q, t.h, t.phi, t.beta, ks,
                                      _cum(ps), config.steps, config.thin, kernel_seed(rng),
                                      free, links_free, False, config.exact_max_bits, phi0,
                                      config.record_states, states, pot, prev, rb, 0)
        return ChainResult(np.arange(r) * config.thin, pot, prev, rb,
                           states if config.record_states else None,
                           NetworkState.from_adjacency(a, G), steps_run)

    # deterministic: run in chunks, stop after a verified absorbing state
    patience = config.patience or max(50, 20 * sum(n * comb(n - 1, int(k) - 1) for k in ks))
    chunks = {"steps": [], "pot": [], "prev": [], "rb": [], "states": []}
    done = 0
    converged = False
    while done < config.max_steps:
        budget = min(config.max_steps - done, max(config.steps, 10 * patience))
        n_rec = budget + 1
        states = np.zeros((n_rec if config.record_states else 1, nb), np.int8)
        pot = np.empty(n_rec)
        prev = np.empty(n_rec)
        rb = np.empty(n_rec)
        r, steps_run, phi0 = K.kcd_chain(a, G, t.v, t.w, t.gate, t.q, t.h, t.phi, t.beta, ks,
                                         _cum(ps), budget, 1, kernel_seed(rng), free,
                                         links_free, True, 0, phi0, config.record_states,
                                         states, pot, prev, rb, patience)
        first = 0 if done == 0 else 1
        chunks["steps"].append(done + np.arange(first, r))
        chunks["pot"].append(pot[first:r])
        chunks["prev"].append(prev[first:r])
        chunks["rb"].append(rb[first:r])
        if config.record_states:
            chunks["states"].append(states[first:r])
        done += steps_run
        S = NetworkState.from_adjacency(a, G)
        if steps_run < budget:
            if act_free is None and links_free and _absorbing(S, X, theta, ks, spec):
                converged = True
                break
            if act_free is not None or not links_free:
                converged = True
                break
    cat = {key: np.concatenate(v) for key, v in chunks.items() if v}
    return ChainResult(cat["steps"], cat["pot"], cat["prev"], cat["rb"],
                       cat.get("states"), NetworkState.from_adjacency(a, G), done, converged)


# ------------------------------------------------------------ exact analysis

def _check_exact(n: int):
    if n > MAX_EXACT_N:
        raise ValueError(f"exact transition matrices support n <= {MAX_EXACT_N}, got n={n}")


def exact_transition_matrix(X, theta: ModelParameters, k: KProcess,
                            spec: Specification = DEFAULT_SPEC,
                            phi_table: np.ndarray | None = None) -> np.ndarray:
    """Dense perturbed-dynamics kernel P[S, S'] with the meeting integrated out."""
    d = as_design(X, spec)
    n = d.n
    _check_exact(n)
    if phi_table is None:
        phi_table = potential_table(d, theta.as_vector())
    z = phi_table / theta.beta
    N = n_states(n)
    P = np.zeros((N, N))
    rows = np.arange(N)[:, None]
    ks, ps = k_distribution(n, k)
    for kk, pk in zip(ks, ps):
        pr = pk / (n * comb(n - 1, int(kk) - 1))
        for i, partners in iter_meetings(n, int(kk)):
            nb = neighborhood_indices(n, meeting_bit_positions(n, i, partners))
            zz = z[nb]
            w = np.exp(zz - zz.max(axis=1, keepdims=True))
            w /= w.sum(axis=1, keepdims=True)
            np.add.at(P, (np.broadcast_to(rows, nb.shape), nb), pr * w)
    return P


def stationary_closed_form(X, theta: ModelParameters,
                           spec: Specification = DEFAULT_SPEC) -> np.ndarray:
    """exp(Phi / beta) / H over every canonical state (n <= 4)."""
    d = as_design(X, spec)
    _check_exact(d.n)
    return gibbs_distribution(potential_table(d, theta.as_vector()), theta.beta)


def stationary_from_matrix(P: np.ndarray) -> np.ndarray:
    """Left eigenvector of P for the eigenvalue closest to 1, normalized."""
    vals, vecs = np.linalg.eig(P.T)
    v = np.real(vecs[:, np.argmin(np.abs(vals - 1.0))])
    return v / v.sum()


def empirical_distribution(indices: np.ndarray, n: int) -> np.ndarray:
    counts = np.bincount(np.asarray(indices, dtype=np.int64), minlength=n_states(n))
    return counts / counts.sum()


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


# ------------------------------------------------------- flat-potential spectra

def _index_sets(n: int):
    """Yield (action set mask, link-incidence count per node) for every I."""
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    nb = n + len(pairs)
    for s in range(1 << nb):
        acts = [(s >> i) & 1 for i in range(n)]
        deg = [0] * n
        for c, (i, j) in enumerate(pairs):
            if (s >> (n + c)) & 1:
                deg[i] += 1
                deg[j] += 1
        yield acts, deg


def flat_eigenvalue(n: int, k: int, actions_in_index: list[int], link_degree: list[int]) -> float:
    """Eigenvalue of the parity function e_I under a flat potential.

    e_I survives a revision only when the meeting leaves every bit of I
    alone: the chooser's action is outside I and none of the chooser's
    revised links belongs to I (a link counts at both of its endpoints).
    """
    tot = comb(n - 1, k - 1)
    return sum(comb(n - 1 - link_degree[i], k - 1) / tot
               for i in range(n) if not actions_in_index[i]) / n


def spectrum_flat(n: int, k: int) -> np.ndarray:
    """Closed-form eigenvalue multiset, sorted in decreasing order (n <= 5)."""
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    if n > 5:
        raise ValueError("the full multiset has 2^(n(n+1)/2) entries; use n <= 5")
    vals = np.array([flat_eigenvalue(n, k, acts, deg) for acts, deg in _index_sets(n)])
    return np.sort(vals)[::-1]


def spectrum_numeric(n: int, k: int) -> np.ndarray:
    """Eigenvalues of the exact flat-potential kernel (symmetric), decreasing."""
    from .model import AttributeTable
    P = exact_transition_matrix(AttributeTable.uniform(n), ModelParameters(), k)
    return np.sort(np.linalg.eigvalsh(0.5 * (P + P.T)))[::-1]


def second_eigenvalue(n: int, k: int) -> float:
    """Largest non-unit flat-potential eigenvalue, any n.

    The candidates are a single action bit, (n-1)/n, and a single link,
    (n - 2 + 2 (n-k)/(n-1)) / n; larger index sets only shrink the value.
    """
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    single_action = (n - 1) / n
    single_link = (n - 2 + 2 * (n - k) / (n - 1)) / n
    return max(single_action, single_link)


def one_sided_second_eigenvalue(n: int, k: int) -> float:
    """(1/n)(n - 1 + (n-k)/(n-1)): the value obtained when each link is
    charged to a single endpoint.  Kept for comparison with the symmetric
    undirected kernel, whose true value is :func:`second_eigenvalue`.
    """
    return (n - 1 + (n - k) / (n - 1)) / n


# ------------------------------------------------------- ranking of states

def local_mode_mask(X, theta: ModelParameters, spec: Specification = DEFAULT_SPEC) -> np.ndarray:
    """States whose stationary mass is maximal on their one-toggle neighborhood."""
    d = as_design(X, spec)
    pi = stationary_closed_form(d, theta, spec) if d.n <= MAX_EXACT_N else None
    if pi is None:
        raise ValueError(f"n <= {MAX_EXACT_N} required")
    from .statespace import one_toggle_indices
    nb = one_toggle_indices(d.n)
    return (pi[nb] <= pi[:, None] * (1 + 1e-9)).all(axis=1)
