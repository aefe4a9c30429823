"""Payoffs, potential function and sufficient statistics.

A game state holds one binary action per node and one binary status per
unordered pair.  Utilities follow

    u_i = a_i v_i + sum_j g_ij w_ij + sum_{j<k} q_ijk g_ij g_jk g_ki
          + a_i h sum_{j!=i} a_j + phi sum_j g_ij [a_i a_j + (1-a_i)(1-a_j)]

and every unilateral increment of u_i equals the increment of the potential

    Phi = sum_i a_i v_i + sum_{i<j} g_ij w_ij + q_gated * #triangles
          + h sum_{i<j} a_i a_j + phi sum_{i<j} g_ij [a_i a_j + (1-a_i)(1-a_j)].

The nonsmoker-match half of the local term is kept in the potential so the
delta identity holds for the full utility.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

COEF_NAMES: tuple[str, ...] = (
    "v0", "v_price", "v_hhsmokes", "v_momeduc", "v_black", "v_grade9p",
    "w0", "w_sex", "w_grade", "w_race",
    "q", "h", "phi",
)
ACTION_COEFS = COEF_NAMES[:6]
LINK_COEFS = COEF_NAMES[6:10]
N_COEF = len(COEF_NAMES)

RACES = ("White", "Black", "AsHiOt")
SEXES = ("F", "M")


def coef_names(covariate_spec: str = "price") -> tuple[str, ...]:
    """Column labels for the coefficient vector under a covariate spec."""
    if covariate_spec == "price":
        return COEF_NAMES
    if covariate_spec == "log_income":
        return ("v0", "v_logincome") + COEF_NAMES[2:]
    raise ValueError(f"unknown covariate_spec {covariate_spec!r}")


def n_links(n: int) -> int:
    return n * (n - 1) // 2


def link_index(n: int, i: int, j: int) -> int:
    """Position of pair (i, j) in row-major upper-triangular order."""
    if i == j:
        raise ValueError("no self links")
    if i > j:
        i, j = j, i
    return i * n - i * (i + 1) // 2 + (j - i - 1)


@lru_cache(maxsize=None)
def _triu(n: int) -> tuple[np.ndarray, np.ndarray]:
    iu = np.triu_indices(n, k=1)
    for x in iu:
        x.setflags(write=False)
    return iu


def link_pairs(n: int) -> np.ndarray:
    """(m, 2) array of pairs i<j in canonical order."""
    iu, ju = np.triu_indices(n, k=1)
    return np.stack([iu, ju], axis=1)


# --------------------------------------------------------------------------
# state
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NetworkState:
    """Actions plus undirected links, stored as the i<j upper triangle.

    The canonical bit order puts the n action bits first, followed by the
    link bits in row-major upper-triangular order.
    """

    actions: np.ndarray
    links: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.actions, dtype=np.int8).copy()
        g = np.asarray(self.links, dtype=np.int8).copy()
        if a.ndim != 1 or g.ndim != 1:
            raise ValueError("actions and links must be 1-d")
        if g.size != n_links(a.size):
            raise ValueError(f"expected {n_links(a.size)} link bits for n={a.size}, got {g.size}")
        if not (((a == 0) | (a == 1)).all() and ((g == 0) | (g == 1)).all()):
            raise ValueError("state entries must be 0/1")
        a.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "actions", a)
        object.__setattr__(self, "links", g)

    @property
    def n(self) -> int:
        return self.actions.size

    @property
    def n_bits(self) -> int:
        return self.n + self.links.size

    # -- constructors ------------------------------------------------------
    @classmethod
    def empty(cls, n: int) -> "NetworkState":
        return cls(np.zeros(n, np.int8), np.zeros(n_links(n), np.int8))

    @classmethod
    def from_adjacency(cls, actions, adjacency) -> "NetworkState":
        adj = np.asarray(adjacency)
        if adj.shape[0] != adj.shape[1] or not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be square and symmetric")
        return cls(actions, adj[_triu(adj.shape[0])])

    @classmethod
    def from_bits(cls, n: int, bits) -> "NetworkState":
        bits = np.asarray(bits, dtype=np.int8)
        return cls(bits[:n], bits[n:])

    @classmethod
    def from_index(cls, n: int, index: int) -> "NetworkState":
        nb = n + n_links(n)
        bits = [(index >> b) & 1 for b in range(nb)]
        return cls.from_bits(n, bits)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, p_action: float = 0.5,
               p_link: float = 0.5) -> "NetworkState":
        return cls((rng.random(n) < p_action).astype(np.int8),
                   (rng.random(n_links(n)) < p_link).astype(np.int8))

    # -- views -------------------------------------------------------------
    def adjacency(self) -> np.ndarray:
        n = self.n
        adj = np.zeros((n, n), dtype=np.int8)
        adj[_triu(n)] = self.links
        return adj + adj.T

    def bits(self) -> np.ndarray:
        return np.concatenate([self.actions, self.links])

    def index(self) -> int:
        out = 0
        for b, bit in enumerate(self.bits()):
            if bit:
                out |= 1 << b
        return out

    def bitstring(self) -> str:
        """Bits in canonical order, bit 0 first."""
        return "".join(str(int(b)) for b in self.bits())

    def link(self, i: int, j: int) -> int:
        return int(self.links[link_index(self.n, i, j)])

    # -- edits (return new states) ----------------------------------------
    def with_action(self, i: int, value: int) -> "NetworkState":
        a = self.actions.copy()
        a[i] = value
        return NetworkState(a, self.links)

    def with_link(self, i: int, j: int, value: int) -> "NetworkState":
        g = self.links.copy()
        g[link_index(self.n, i, j)] = value
        return NetworkState(self.actions, g)

    def complement(self) -> "NetworkState":
        return NetworkState(1 - self.actions, 1 - self.links)

    def __eq__(self, other) -> bool:
        if not isinstance(other, NetworkState):
            return NotImplemented
        return (np.array_equal(self.actions, other.actions)
                and np.array_equal(self.links, other.links))

    def __hash__(self) -> int:
        return hash((self.actions.tobytes(), self.links.tobytes()))

    def __repr__(self) -> str:
        return f"NetworkState(n={self.n}, bits={self.bitstring()})"


# --------------------------------------------------------------------------
# covariates
# --------------------------------------------------------------------------

def _encode(values, labels, what) -> np.ndarray:
    arr = np.asarray(values)
    if arr.dtype.kind in "iu":
        codes = arr.astype(np.int64)
    else:
        lookup = {lab: c for c, lab in enumerate(labels)}
        try:
            codes = np.array([lookup[str(v)] for v in arr], dtype=np.int64)
        except KeyError as exc:
            raise ValueError(f"unknown {what} label {exc.args[0]!r}") from None
    if codes.size and (codes.min() < 0 or codes.max() >= len(labels)):
        raise ValueError(f"{what} codes out of range")
    return codes


@dataclass(eq=False)
class AttributeTable:
    """Exogenous covariates for the nodes of one school network.

    ``sex`` and ``race`` accept labels (``"F"/"M"``, ``"White"/"Black"/"AsHiOt"``)
    or integer codes into :data:`SEXES` / :data:`RACES`.
    """

    sex: np.ndarray
    grade: np.ndarray
    race: np.ndarray
    price_cents: np.ndarray
    hh_smokes: np.ndarray
    mom_edu: np.ndarray
    income: np.ndarray | None = None
    school_id: str = "0"

    def __post_init__(self):
        self.sex = _encode(self.sex, SEXES, "sex")
        self.race = _encode(self.race, RACES, "race")
        self.grade = np.asarray(self.grade, dtype=np.int64)
        self.price_cents = np.asarray(self.price_cents, dtype=np.float64)
        self.hh_smokes = np.asarray(self.hh_smokes, dtype=np.int64)
        self.mom_edu = np.asarray(self.mom_edu, dtype=np.int64)
        if self.income is not None:
            self.income = np.asarray(self.income, dtype=np.float64)
        self.school_id = str(self.school_id)
        n = self.sex.size
        cols = [self.grade, self.race, self.price_cents, self.hh_smokes, self.mom_edu]
        if self.income is not None:
            cols.append(self.income)
        if any(c.shape != (n,) for c in cols):
            raise ValueError("all attribute columns must have the same length")
        if n and ((self.grade < 7) | (self.grade > 12)).any():
            raise ValueError("grade must lie in 7..12")
        if n and (self.price_cents <= 0).any():
            raise ValueError("price_cents must be positive")
        if self.income is not None and n and (self.income <= 0).any():
            raise ValueError("income must be positive")
        for name in ("hh_smokes", "mom_edu"):
            if not np.isin(getattr(self, name), (0, 1)).all():
                raise ValueError(f"{name} must be 0/1")

    @property
    def n(self) -> int:
        return self.sex.size

    @classmethod
    def uniform(cls, n: int, **overrides) -> "AttributeTable":
        """Homogeneous table: same sex, grade 10, white, unit covariates off.

        With these covariates w(X_i, X_j) = w0 and v(X_i) = v0 + v_price * price
        + v_grade9p, which is handy for hand-checkable fixtures (set the
        extra coefficients to zero).
        """
        cols = dict(sex=np.zeros(n, int), grade=np.full(n, 10), race=np.zeros(n, int),
                    price_cents=np.full(n, 100.0), hh_smokes=np.zeros(n, int),
                    mom_edu=np.zeros(n, int), income=None, school_id="0")
        cols.update(overrides)
        return cls(**cols)

    def subset(self, idx, school_id: str | None = None) -> "AttributeTable":
        idx = np.asarray(idx)
        return AttributeTable(
            self.sex[idx], self.grade[idx], self.race[idx], self.price_cents[idx],
            self.hh_smokes[idx], self.mom_edu[idx],
            None if self.income is None else self.income[idx],
            self.school_id if school_id is None else school_id)

    def with_price_shift(self, cents: float) -> "AttributeTable":
        return replace(self, price_cents=self.price_cents + cents, sex=self.sex.copy(),
                       race=self.race.copy())

    def equals(self, other: "AttributeTable") -> bool:
        same_income = (self.income is None and other.income is None) or (
            self.income is not None and other.income is not None
            and np.array_equal(self.income, other.income))
        return (self.school_id == other.school_id and same_income and all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("sex", "grade", "race", "price_cents", "hh_smokes", "mom_edu")))


def concat_tables(tables: Sequence[AttributeTable], school_id: str) -> AttributeTable:
    with_income = all(t.income is not None for t in tables)
    return AttributeTable(
        np.concatenate([t.sex for t in tables]),
        np.concatenate([t.grade for t in tables]),
        np.concatenate([t.race for t in tables]),
        np.concatenate([t.price_cents for t in tables]),
        np.concatenate([t.hh_smokes for t in tables]),
        np.concatenate([t.mom_edu for t in tables]),
        np.concatenate([t.income for t in tables]) if with_income else None,
        school_id)


# --------------------------------------------------------------------------
# parameters
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelParameters:
    """Structural coefficients.  ``beta`` is the Gumbel scale, not estimated."""

    v0: float = 0.0
    v_price: float = 0.0
    v_hhsmokes: float = 0.0
    v_momeduc: float = 0.0
    v_black: float = 0.0
    v_grade9p: float = 0.0
    w0: float = 0.0
    w_sex: float = 0.0
    w_grade: float = 0.0
    w_race: float = 0.0
    q: float = 0.0
    h: float = 0.0
    phi: float = 0.0
    beta: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        vec = self.as_vector()
        if not np.isfinite(vec).all():
            raise ValueError("coefficients must be finite")

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in COEF_NAMES], dtype=np.float64)

    @classmethod
    def from_vector(cls, vec, beta: float = 1.0) -> "ModelParameters":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (N_COEF,):
            raise ValueError(f"expected {N_COEF} coefficients")
        return cls(**{name: float(x) for name, x in zip(COEF_NAMES, vec)}, beta=beta)

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ModelParameters":
        allowed = {f.name for f in fields(cls)}
        alias = {"v_logincome": "v_price"}
        kwargs = {}
        for key, val in mapping.items():
            key = alias.get(key, key)
            if key not in allowed:
                raise ValueError(f"unknown parameter {key!r}")
            kwargs[key] = float(val)
        return cls(**kwargs)

    def to_mapping(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def replace(self, **changes) -> "ModelParameters":
        return replace(self, **changes)


# --------------------------------------------------------------------------
# design: covariate-dependent pieces of v, w, q for one network
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Specification:
    """Functional-form switches.

    ``q_grade_min``: triangle coefficient applies only when all three
    members are in grade >= this value.  ``grade9p_min`` defines the
    'grade 9+' action covariate.
    """

    covariate_spec: str = "price"
    q_grade_min: int = 9
    grade9p_min: int = 9

    def __post_init__(self):
        coef_names(self.covariate_spec)


DEFAULT_SPEC = Specification()


@dataclass(eq=False)
class Design:
    """Covariate arrays for one network, independent of the coefficients.

    zv: (n, 6) action design; zw: (n, n, 4) pair design with zero diagonal;
    gate: (n,) int8 triangle eligibility.
    """

    zv: np.ndarray
    zw: np.ndarray
    gate: np.ndarray
    spec: Specification = DEFAULT_SPEC

    @property
    def n(self) -> int:
        return self.zv.shape[0]


def build_design(X: AttributeTable, spec: Specification = DEFAULT_SPEC) -> Design:
    n = X.n
    if spec.covariate_spec == "price":
        cov = X.price_cents
    else:
        if X.income is None:
            raise ValueError("log_income specification needs an income column")
        cov = np.log(X.income)
    zv = np.column_stack([
        np.ones(n), cov, X.hh_smokes, X.mom_edu,
        (X.race == RACES.index("Black")).astype(float),
        (X.grade >= spec.grade9p_min).astype(float),
    ]).astype(np.float64)
    zw = np.empty((n, n, 4))
    zw[:, :, 0] = 1.0
    zw[:, :, 1] = X.sex[:, None] != X.sex[None, :]
    zw[:, :, 2] = X.grade[:, None] != X.grade[None, :]
    zw[:, :, 3] = X.race[:, None] != X.race[None, :]
    zw[np.arange(n), np.arange(n), :] = 0.0
    gate = (X.grade >= spec.q_grade_min).astype(np.int8)
    return Design(np.ascontiguousarray(zv), np.ascontiguousarray(zw), gate, spec)


def as_design(X, spec: Specification = DEFAULT_SPEC) -> Design:
    return X if isinstance(X, Design) else build_design(X, spec)


@dataclass(eq=False)
class Terms:
    """Coefficient-evaluated payoff pieces: v_i, w_ij, and the scalars."""

    v: np.ndarray
    w: np.ndarray
    gate: np.ndarray
    q: float
    h: float
    phi: float
    beta: float

    @property
    def n(self) -> int:
        return self.v.size


def model_terms(X, theta: ModelParameters, spec: Specification = DEFAULT_SPEC) -> Terms:
    d = as_design(X, spec)
    vec = theta.as_vector()
    v = d.zv @ vec[:6]
    w = d.zw @ vec[6:10]
    return Terms(np.ascontiguousarray(v), np.ascontiguousarray(w), d.gate,
                 theta.q, theta.h, theta.phi, theta.beta)


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

def _check_n(S: NetworkState, t: Terms):
    if S.n != t.n:
        raise ValueError(f"state has n={S.n} but attributes have n={t.n}")


def _match(a: np.ndarray) -> np.ndarray:
    return np.outer(a, a) + np.outer(1 - a, 1 - a)


def utility(S: NetworkState, X, theta: ModelParameters, i: int,
            spec: Specification = DEFAULT_SPEC) -> float:
    t = model_terms(X, theta, spec)
    _check_n(S, t)
    if not 0 <= i < S.n:
        raise IndexError(f"node {i} out of range")
    a = S.actions.astype(np.float64)
    g = S.adjacency().astype(np.float64)
    gi = g[i]
    tri_w = t.q * t.gate[i] * np.outer(t.gate, t.gate)
    # sum over j<k of g_ij g_jk g_ki
    tri = 0.5 * float(gi @ (g * tri_w) @ gi)
    match_i = a[i] * a + (1 - a[i]) * (1 - a)
    return float(a[i] * t.v[i] + gi @ t.w[i] + tri
                 + a[i] * t.h * (a.sum() - a[i]) + t.phi * (gi @ match_i))


def _potential_terms(a: np.ndarray, g: np.ndarray, t: Terms) -> float:
    iu = _triu(t.n)
    gu = g[iu]
    m = a.sum()
    gg = g * t.gate[:, None] * t.gate[None, :]
    triangles = np.trace(gg @ gg @ gg) / 6.0
    return float(a @ t.v + gu @ t.w[iu] + t.q * triangles
                 + t.h * m * (m - 1) / 2.0 + t.phi * (gu @ _match(a)[iu]))


def potential(S: NetworkState, X, theta: ModelParameters,
              spec: Specification = DEFAULT_SPEC) -> float:
    t = model_terms(X, theta, spec)
    _check_n(S, t)
    return _potential_terms(S.actions.astype(np.float64), S.adjacency().astype(np.float64), t)


def delta_action_terms(a: np.ndarray, g: np.ndarray, t: Terms, i: int) -> float:
    others = a.sum() - a[i]
    return float(t.v[i] + t.h * others + t.phi * (g[i] @ (2 * a - 1)))


def delta_link_terms(a: np.ndarray, g: np.ndarray, t: Terms, i: int, j: int) -> float:
    if i == j:
        raise ValueError("delta_link needs i != j")
    match = a[i] * a[j] + (1 - a[i]) * (1 - a[j])
    common = 0.0
    if t.gate[i] and t.gate[j]:
        common = float((g[i] * g[j]) @ t.gate)
    return float(t.w[i, j] + t.phi * match + t.q * common)


def delta_action(S: NetworkState, X, theta: ModelParameters, i: int,
                 spec: Specification = DEFAULT_SPEC) -> float:
    """u_i(a_i=1) - u_i(a_i=0), which is also the potential increment."""
    t = model_terms(X, theta, spec)
    _check_n(S, t)
    return delta_action_terms(S.actions.astype(np.float64), S.adjacency().astype(np.float64), t, i)


def delta_link(S: NetworkState, X, theta: ModelParameters, i: int, j: int,
               spec: Specification = DEFAULT_SPEC) -> float:
    """u_i(g_ij=1) - u_i(g_ij=0); identical for i and j and for the potential."""
    t = model_terms(X, theta, spec)
    _check_n(S, t)
    return delta_link_terms(S.actions.astype(np.float64), S.adjacency().astype(np.float64), t, i, j)


def statistics_arrays(a: np.ndarray, g: np.ndarray, d: Design) -> np.ndarray:
    n = d.n
    iu = np.triu_indices(n, k=1)
    a = a.astype(np.float64)
    g = g.astype(np.float64)
    gu = g[iu]
    m = a.sum()
    gg = g * d.gate[:, None] * d.gate[None, :]
    out = np.empty(N_COEF)
    out[:6] = a @ d.zv
    out[6:10] = gu @ d.zw[iu]
    out[10] = np.trace(gg @ gg @ gg) / 6.0
    out[11] = m * (m - 1) / 2.0
    out[12] = gu @ _match(a)[iu]
    return out


def sufficient_statistics(S: NetworkState, X, spec: Specification = DEFAULT_SPEC) -> np.ndarray:
    """Statistics aligned with :data:`COEF_NAMES`; ``theta . stats == potential``."""
    d = as_design(X, spec)
    if S.n != d.n:
        raise ValueError(f"state has n={S.n} but attributes have n={d.n}")
    return statistics_arrays(S.actions, S.adjacency(), d)
