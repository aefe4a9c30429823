"""Constrained best responses and k-player stable equilibria.

A meeting lets chooser ``i`` revise her action and her links to ``k-1``
partners.  Because every unilateral utility increment equals the potential
increment, her constrained optimum is the potential maximizer over the
``2^k`` states of the meeting neighborhood, and the consent constraint never
binds at that maximizer.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from . import _kernels as K
from .model import (DEFAULT_SPEC, ModelParameters, NetworkState, Specification,
                    as_design, model_terms)
from .statespace import (iter_meetings, meeting_bit_positions, n_states, neighborhood_indices,
                         one_toggle_indices, potential_table, MAX_N)

TOL = K.TIE_TOL


@dataclass(frozen=True)
class MeetingEvent:
    """Chooser ``i`` reconsidering her action and links to ``partners``."""

    chooser: int
    partners: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "partners", tuple(int(p) for p in self.partners))
        if len(set(self.partners)) != len(self.partners):
            raise ValueError("partners must be distinct")
        if self.chooser in self.partners:
            raise ValueError("chooser cannot be her own partner")
        if not self.partners:
            raise ValueError("a meeting needs at least one partner (k >= 2)")

    @property
    def k(self) -> int:
        return len(self.partners) + 1

    def validate(self, n: int):
        if self.k > n:
            raise ValueError(f"meeting dimension k={self.k} exceeds n={n}")
        if not 0 <= self.chooser < n or any(not 0 <= p < n for p in self.partners):
            raise ValueError("meeting references a node outside 0..n-1")


@dataclass(frozen=True)
class EquilibriumReport:
    state: NetworkState
    k: int
    is_equilibrium: bool
    witness: tuple[int, tuple[int, ...], NetworkState] | None = None

    def __bool__(self) -> bool:
        return self.is_equilibrium


def _arrays(S: NetworkState):
    return S.actions.astype(np.int8).copy(), S.adjacency().astype(np.int8)


def _state(a, G) -> NetworkState:
    return NetworkState.from_adjacency(a, G)


def best_response(S: NetworkState, X, theta: ModelParameters, meeting: MeetingEvent,
                  spec: Specification = DEFAULT_SPEC) -> NetworkState:
    """Potential maximizer on the meeting neighborhood.

    Ties keep the current state when it is maximal, otherwise the maximizer
    with the smallest canonical index wins.
    """
    meeting.validate(S.n)
    if meeting.k > 24:
        raise ValueError("exhaustive best response limited to k <= 24")
    t = model_terms(X, theta, spec)
    a, G = _arrays(S)
    K.single_meeting(a, G, t.v, t.w, t.gate, t.q, t.h, t.phi, t.beta, meeting.chooser,
                     np.array(meeting.partners, dtype=np.int64), 0, True, 0)
    return _state(a, G)


def is_neksn(S: NetworkState, X, theta: ModelParameters, k: int,
             spec: Specification = DEFAULT_SPEC) -> EquilibriumReport:
    """Check every chooser and every partner set of size k-1."""
    n = S.n
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    t = model_terms(X, theta, spec)
    a, G = _arrays(S)
    for i in range(n):
        others = [j for j in range(n) if j != i]
        for partners in combinations(others, k - 1):
            p = np.array(partners, dtype=np.int64)
            gain, mask = K.meeting_max_gain(a, G, t.v, t.w, t.gate, t.q, t.h, t.phi, i, p)
            if gain > TOL:
                dev = S
                if mask & 1:
                    dev = dev.with_action(i, 1 - S.actions[i])
                for b, j in enumerate(partners):
                    if (mask >> (b + 1)) & 1:
                        dev = dev.with_link(i, j, 1 - S.link(i, j))
                return EquilibriumReport(S, k, False, (i, tuple(partners), dev))
    return EquilibriumReport(S, k, True, None)


def neksn_mask(X, theta: ModelParameters, k: int, spec: Specification = DEFAULT_SPEC,
               phi_table: np.ndarray | None = None) -> np.ndarray:
    """Boolean vector over all canonical states: passes the k-player check."""
    d = as_design(X, spec)
    n = d.n
    if n > MAX_N:
        raise ValueError(f"exhaustive enumeration supports n <= {MAX_N}")
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    if phi_table is None:
        phi_table = potential_table(d, theta.as_vector())
    ok = np.ones(n_states(n), dtype=bool)
    for i, partners in iter_meetings(n, k):
        nb = neighborhood_indices(n, meeting_bit_positions(n, i, partners))
        ok &= phi_table[nb].max(axis=1) <= phi_table + TOL
    return ok


def enumerate_neksn(X, theta: ModelParameters, k: int,
                    spec: Specification = DEFAULT_SPEC) -> frozenset[NetworkState]:
    """Every k-player stable equilibrium of a small network (n <= 5)."""
    d = as_design(X, spec)
    idx = np.flatnonzero(neksn_mask(d, theta, k, spec))
    return frozenset(NetworkState.from_index(d.n, int(s)) for s in idx)


def neksn_indices(X, theta: ModelParameters, k: int,
                  spec: Specification = DEFAULT_SPEC) -> np.ndarray:
    return np.flatnonzero(neksn_mask(X, theta, k, spec))


def is_pairwise_stable(S: NetworkState, X, theta: ModelParameters,
                       spec: Specification = DEFAULT_SPEC) -> bool:
    """No profitable single action flip or link deletion, no mutual link gain."""
    t = model_terms(X, theta, spec)
    a, G = _arrays(S)
    n = S.n
    m = int(a.sum())
    for i in range(n):
        d = K.delta_action(a, G, t.v, t.h, t.phi, i, m)
        if (d > TOL and a[i] == 0) or (d < -TOL and a[i] == 1):
            return False
    for i in range(n):
        for j in range(i + 1, n):
            # the increment is the same for both endpoints
            d = K.delta_link(a, G, t.w, t.gate, t.q, t.phi, i, j)
            if G[i, j] and d < -TOL:
                return False
            if not G[i, j] and d > TOL:
                return False
    return True


def pairwise_stable_mask(X, theta: ModelParameters, spec: Specification = DEFAULT_SPEC,
                         phi_table: np.ndarray | None = None) -> np.ndarray:
    """Pairwise stability for every state of a small network."""
    d = as_design(X, spec)
    if phi_table is None:
        phi_table = potential_table(d, theta.as_vector())
    nb = one_toggle_indices(d.n)
    return (phi_table[nb] <= phi_table[:, None] + TOL).all(axis=1)


def n_meetings(n: int, k: int) -> int:
    return n * comb(n - 1, k - 1)
