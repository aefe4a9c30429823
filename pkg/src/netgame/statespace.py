"""Exhaustive state-space tables for small networks.

State ``s`` has bit ``b`` equal to ``(s >> b) & 1`` in canonical order:
actions first, then links in row-major upper-triangular order.
"""
from __future__ import annotations

from functools import lru_cache
from itertools import combinations

import numpy as np

from .model import N_COEF, Design, n_links

MAX_N = 5


def n_states(n: int) -> int:
    return 1 << (n + n_links(n))


def _check(n: int, limit: int = MAX_N):
    if n < 1 or n > limit:
        raise ValueError(f"exhaustive scan supports 1 <= n <= {limit}, got n={n}")


@lru_cache(maxsize=8)
def all_bits(n: int) -> np.ndarray:
    """(2^B, B) int8 table of every state's bits."""
    _check(n)
    nb = n + n_links(n)
    idx = np.arange(1 << nb, dtype=np.int64)
    bits = ((idx[:, None] >> np.arange(nb)) & 1).astype(np.int8)
    bits.setflags(write=False)
    return bits


def statistics_table(d: Design) -> np.ndarray:
    """(2^B, 13) sufficient statistics of every state."""
    n = d.n
    bits = all_bits(n).astype(np.float64)
    a = bits[:, :n]
    g = bits[:, n:]
    iu, ju = np.triu_indices(n, k=1)
    out = np.empty((bits.shape[0], N_COEF))
    out[:, :6] = a @ d.zv
    out[:, 6:10] = g @ d.zw[iu, ju]
    tri = np.zeros(bits.shape[0])
    lid = {(int(i), int(j)): c for c, (i, j) in enumerate(zip(iu, ju))}
    for i, j, k in combinations(range(n), 3):
        if d.gate[i] and d.gate[j] and d.gate[k]:
            tri += g[:, lid[i, j]] * g[:, lid[i, k]] * g[:, lid[j, k]]
    out[:, 10] = tri
    m = a.sum(axis=1)
    out[:, 11] = m * (m - 1) / 2.0
    match = a[:, iu] * a[:, ju] + (1 - a[:, iu]) * (1 - a[:, ju])
    out[:, 12] = (g * match).sum(axis=1)
    return out


def potential_table(d: Design, theta_vec: np.ndarray) -> np.ndarray:
    return statistics_table(d) @ np.asarray(theta_vec, dtype=np.float64)


def meeting_bit_positions(n: int, i: int, partners) -> list[int]:
    """Canonical bit positions revised in meeting (i, partners)."""
    from .model import link_index
    return [i] + [n + link_index(n, i, j) for j in partners]


def iter_meetings(n: int, k: int):
    """All (chooser, partners) pairs of dimension k in a fixed order."""
    for i in range(n):
        others = [j for j in range(n) if j != i]
        for partners in combinations(others, k - 1):
            yield i, partners


def neighborhood_indices(n: int, positions) -> np.ndarray:
    """(2^B, 2^|positions|) indices of every state's meeting neighborhood.

    Column ``c`` sets the local bits to the binary digits of ``c``.
    """
    idx = np.arange(n_states(n), dtype=np.int64)
    mask = 0
    for p in positions:
        mask |= 1 << p
    base = idx & ~mask
    k = len(positions)
    sub = np.zeros(1 << k, dtype=np.int64)
    for c in range(1 << k):
        for b, p in enumerate(positions):
            if (c >> b) & 1:
                sub[c] |= 1 << p
    return base[:, None] | sub[None, :]


def one_toggle_indices(n: int) -> np.ndarray:
    """(2^B, B) indices reached by flipping each single bit."""
    nb = n + n_links(n)
    idx = np.arange(n_states(n), dtype=np.int64)
    return idx[:, None] ^ (1 << np.arange(nb, dtype=np.int64))[None, :]


def gibbs_distribution(phi: np.ndarray, beta: float = 1.0) -> np.ndarray:
    """exp(phi / beta) normalized, with a max shift against overflow."""
    z = np.asarray(phi, dtype=np.float64) / beta
    w = np.exp(z - z.max())
    return w / w.sum()
