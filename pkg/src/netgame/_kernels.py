"""Compiled inner loops.

States are held as an int8 action vector ``a`` and a symmetric int8
adjacency ``G``.  Kernels draw from numba's internal generator, which each
entry point seeds from an explicit integer so runs are reproducible.
"""
import numpy as np
from numba import njit

TIE_TOL = 1e-10


@njit(cache=True)
def seed_rng(seed):
    np.random.seed(seed)


@njit(cache=True)
def link_pos(n, i, j):
    if i > j:
        i, j = j, i
    return n + i * n - i * (i + 1) // 2 + (j - i - 1)


# ---------------------------------------------------------------- deltas

@njit(cache=True)
def delta_action(a, G, v, h, phi, i, m):
    n = a.shape[0]
    s = 0
    for j in range(n):
        if G[i, j]:
            s += 2 * a[j] - 1
    return v[i] + h * (m - a[i]) + phi * s


@njit(cache=True)
def common_gated(G, gate, i, j):
    if gate[i] == 0 or gate[j] == 0:
        return 0
    n = G.shape[0]
    c = 0
    for k in range(n):
        if gate[k] and G[i, k] and G[j, k]:
            c += 1
    return c


@njit(cache=True)
def delta_link(a, G, W, gate, q, phi, i, j):
    match = 1.0 if a[i] == a[j] else 0.0
    return W[i, j] + phi * match + q * common_gated(G, gate, i, j)


# ------------------------------------------------------- full evaluation

@njit(cache=True)
def gated_triangles(G, gate):
    n = G.shape[0]
    t = 0
    for i in range(n):
        if not gate[i]:
            continue
        for j in range(i + 1, n):
            if not (gate[j] and G[i, j]):
                continue
            for k in range(j + 1, n):
                if gate[k] and G[i, k] and G[j, k]:
                    t += 1
    return t


@njit(cache=True)
def phi_statistic(a, G):
    n = a.shape[0]
    s = 0
    for i in range(n):
        for j in range(i + 1, n):
            if G[i, j] and a[i] == a[j]:
                s += 1
    return s


@njit(cache=True)
def full_statistics(a, G, zv, zw, gate, out):
    n = a.shape[0]
    for r in range(out.shape[0]):
        out[r] = 0.0
    m = 0
    for i in range(n):
        if a[i]:
            m += 1
            for c in range(6):
                out[c] += zv[i, c]
        for j in range(i + 1, n):
            if G[i, j]:
                for c in range(4):
                    out[6 + c] += zw[i, j, c]
    out[10] = gated_triangles(G, gate)
    out[11] = m * (m - 1) / 2.0
    out[12] = phi_statistic(a, G)


@njit(cache=True)
def full_potential(a, G, v, W, gate, q, h, phi):
    n = a.shape[0]
    s = 0.0
    m = 0
    for i in range(n):
        if a[i]:
            m += 1
            s += v[i]
        for j in range(i + 1, n):
            if G[i, j]:
                s += W[i, j]
                if a[i] == a[j]:
                    s += phi
    s += q * gated_triangles(G, gate)
    s += h * m * (m - 1) / 2.0
    return s


# ------------------------------------------- toggles with statistic updates

@njit(cache=True)
def toggle_action_stats(a, G, zv, i, m, ds):
    """Flip a_i, add the statistic change to ``ds``; return new smoker count."""
    n = a.shape[0]
    sgn = 1.0 if a[i] == 0 else -1.0
    s = 0
    for j in range(n):
        if G[i, j]:
            s += 2 * a[j] - 1
    for c in range(6):
        ds[c] += sgn * zv[i, c]
    ds[11] += sgn * (m - a[i])
    ds[12] += sgn * s
    if a[i] == 0:
        a[i] = 1
        return m + 1
    a[i] = 0
    return m - 1


@njit(cache=True)
def toggle_link_stats(a, G, zw, gate, i, j, ds):
    sgn = 1.0 if G[i, j] == 0 else -1.0
    for c in range(4):
        ds[6 + c] += sgn * zw[i, j, c]
    if a[i] == a[j]:
        ds[12] += sgn
    ds[10] += sgn * common_gated(G, gate, i, j)
    G[i, j] = 1 - G[i, j]
    G[j, i] = G[i, j]


@njit(cache=True)
def complement_statistics(a, G, zv, zw, gate, cur, flip_actions, act_free,
                          flip_links, total_zw, out):
    """Statistics after flipping the free bits, in O(n^2).

    Applies the flip to ``a``/``G`` in place.  Triangles of the complemented
    gated subgraph follow from T(G) + T(G^c) = C(m,3) - sum_v d_v (m-1-d_v) / 2.
    """
    n = a.shape[0]
    for r in range(out.shape[0]):
        out[r] = cur[r]
    if flip_links:
        mg = 0
        for i in range(n):
            if gate[i]:
                mg += 1
        half = 0.0
        for i in range(n):
            if not gate[i]:
                continue
            d = 0
            for j in range(n):
                if j != i and gate[j] and G[i, j]:
                    d += 1
            half += d * (mg - 1 - d)
        out[10] = mg * (mg - 1) * (mg - 2) / 6.0 - half / 2.0 - cur[10]
        for c in range(4):
            out[6 + c] = total_zw[c] - cur[6 + c]
        for i in range(n):
            for j in range(i + 1, n):
                G[i, j] = 1 - G[i, j]
                G[j, i] = G[i, j]
    if flip_actions:
        for i in range(n):
            if act_free[i]:
                sgn = 1.0 if a[i] == 0 else -1.0
                for c in range(6):
                    out[c] += sgn * zv[i, c]
                a[i] = 1 - a[i]
    m = 0
    for i in range(n):
        m += a[i]
    out[11] = m * (m - 1) / 2.0
    out[12] = phi_statistic(a, G)
    return m


# ---------------------------------------------------------------- meetings

@njit(cache=True)
def draw_k(kvals, kcum):
    u = np.random.random()
    for t in range(kcum.shape[0]):
        if u < kcum[t]:
            return kvals[t]
    return kvals[kvals.shape[0] - 1]


@njit(cache=True)
def draw_meeting(n, k, scratch, partners):
    """Uniform chooser and k-1 distinct partners; returns the chooser."""
    i = np.random.randint(n)
    c = 0
    for j in range(n):
        if j != i:
            scratch[c] = j
            c += 1
    for t in range(k - 1):
        r = t + np.random.randint(n - 1 - t)
        tmp = scratch[t]
        scratch[t] = scratch[r]
        scratch[r] = tmp
        partners[t] = scratch[t]
    return i


@njit(cache=True)
def _local_bits(i, partners, kp, act_free, links_free, bit_node):
    """Free local bits of a meeting; returns count.  -1 codes the action."""
    f = 0
    if act_free[i]:
        bit_node[f] = -1
        f += 1
    if links_free:
        for t in range(kp):
            bit_node[f] = partners[t]
            f += 1
    return f


@njit(cache=True)
def _flip_bit(a, G, v, W, gate, q, h, phi, i, node, m):
    """Toggle one local bit; returns (potential change, new smoker count)."""
    if node < 0:
        d = delta_action(a, G, v, h, phi, i, m)
        if a[i] == 0:
            a[i] = 1
            return d, m + 1
        a[i] = 0
        return -d, m - 1
    d = delta_link(a, G, W, gate, q, phi, i, node)
    if G[i, node] == 0:
        G[i, node] = 1
        G[node, i] = 1
        return d, m
    G[i, node] = 0
    G[node, i] = 0
    return -d, m


@njit(cache=True)
def _trailing_zeros(t):
    c = 0
    while (t & 1) == 0:
        t >>= 1
        c += 1
    return c


@njit(cache=True)
def neighborhood_gains(a, G, v, W, gate, q, h, phi, i, bit_node, f, m, gains):
    """Potential change for every flip mask over the f local bits (Gray walk).

    Leaves the state as it was on entry and returns the smoker count.
    """
    gains[0] = 0.0
    cur = 0.0
    mask = 0
    for t in range(1, 1 << f):
        b = _trailing_zeros(t)
        d, m = _flip_bit(a, G, v, W, gate, q, h, phi, i, bit_node[b], m)
        cur += d
        mask ^= 1 << b
        gains[mask] = cur
    for b in range(f):
        if (mask >> b) & 1:
            d, m = _flip_bit(a, G, v, W, gate, q, h, phi, i, bit_node[b], m)
    return m


@njit(cache=True)
def _canonical_key(a, G, i, bit_node, f, mask):
    """Rank of the resulting state in canonical bit order among local configs."""
    n = a.shape[0]
    pos = np.empty(f, np.int64)
    val = np.empty(f, np.int64)
    for b in range(f):
        node = bit_node[b]
        flip = (mask >> b) & 1
        if node < 0:
            pos[b] = i
            val[b] = a[i] ^ flip
        else:
            pos[b] = link_pos(n, i, node)
            val[b] = G[i, node] ^ flip
    key = 0
    for b in range(f):
        rank = 0
        for c in range(f):
            if pos[c] < pos[b]:
                rank += 1
        key += val[b] << rank
    return key


@njit(cache=True)
def best_mask(a, G, i, bit_node, f, gains):
    nconf = 1 << f
    best = gains[0]
    for c in range(1, nconf):
        if gains[c] > best:
            best = gains[c]
    if gains[0] >= best - TIE_TOL:
        return 0
    choice = -1
    ckey = 0
    for c in range(nconf):
        if gains[c] >= best - TIE_TOL:
            key = _canonical_key(a, G, i, bit_node, f, c)
            if choice < 0 or key < ckey:
                choice = c
                ckey = key
    return choice


@njit(cache=True)
def _sample_mask(gains, f, beta):
    nconf = 1 << f
    mx = gains[0]
    for c in range(1, nconf):
        if gains[c] > mx:
            mx = gains[c]
    tot = 0.0
    for c in range(nconf):
        tot += np.exp((gains[c] - mx) / beta)
    u = np.random.random() * tot
    acc = 0.0
    for c in range(nconf):
        acc += np.exp((gains[c] - mx) / beta)
        if u < acc:
            return c
    return nconf - 1


@njit(cache=True)
def apply_mask(a, G, v, W, gate, q, h, phi, i, bit_node, f, mask, m):
    dphi = 0.0
    for b in range(f):
        if (mask >> b) & 1:
            d, m = _flip_bit(a, G, v, W, gate, q, h, phi, i, bit_node[b], m)
            dphi += d
    return dphi, m


@njit(cache=True)
def meeting_update(a, G, v, W, gate, q, h, phi, beta, i, partners, kp,
                   act_free, links_free, deterministic, exact_max_bits,
                   bit_node, gains, m):
    """One consensual-dynamics revision.  Returns (potential change, m, changed)."""
    f = _local_bits(i, partners, kp, act_free, links_free, bit_node)
    if f == 0:
        return 0.0, m, False
    if deterministic or f <= exact_max_bits:
        m = neighborhood_gains(a, G, v, W, gate, q, h, phi, i, bit_node, f, m, gains)
        if deterministic:
            c = best_mask(a, G, i, bit_node, f, gains)
        else:
            c = _sample_mask(gains, f, beta)
        dphi, m = apply_mask(a, G, v, W, gate, q, h, phi, i, bit_node, f, c, m)
        return dphi, m, c != 0
    # single-site heat-bath sweep over the local bits
    dphi = 0.0
    changed = False
    for b in range(f):
        node = bit_node[b]
        if node < 0:
            d = delta_action(a, G, v, h, phi, i, m)
            on = a[i] == 1
        else:
            d = delta_link(a, G, W, gate, q, phi, i, node)
            on = G[i, node] == 1
        p_on = 1.0 / (1.0 + np.exp(-d / beta))
        want = np.random.random() < p_on
        if want != on:
            dd, m = _flip_bit(a, G, v, W, gate, q, h, phi, i, node, m)
            dphi += dd
            changed = True
    return dphi, m, changed


@njit(cache=True)
def rb_prevalence(a, G, v, h, phi, beta, act_free, m):
    """Mean over nodes of Pr(a_i = 1 | rest); frozen nodes count at their value."""
    n = a.shape[0]
    s = 0.0
    for i in range(n):
        if act_free[i]:
            d = delta_action(a, G, v, h, phi, i, m)
            s += 1.0 / (1.0 + np.exp(-d / beta))
        else:
            s += a[i]
    return s / n


@njit(cache=True)
def _record(a, G, out_states, r):
    n = a.shape[0]
    for i in range(n):
        out_states[r, i] = a[i]
    p = n
    for i in range(n):
        for j in range(i + 1, n):
            out_states[r, p] = G[i, j]
            p += 1


@njit(cache=True)
def kcd_chain(a, G, v, W, gate, q, h, phi, beta, kvals, kcum, steps, thin, seed,
              act_free, links_free, deterministic, exact_max_bits, phi0,
              record_states, out_states, out_pot, out_prev, out_rb, patience):
    """Run the consensual dynamics in place.

    Records every ``thin`` steps starting at step 0.  In deterministic mode
    the run stops once ``patience`` consecutive revisions leave the state
    unchanged.  Returns (records written, last step, final potential).
    """
    seed_rng(seed)
    n = a.shape[0]
    m = 0
    for i in range(n):
        m += a[i]
    scratch = np.empty(max(n - 1, 1), np.int64)
    partners = np.empty(max(n - 1, 1), np.int64)
    bit_node = np.empty(n, np.int64)
    kmax = 0
    for t in range(kvals.shape[0]):
        kmax = max(kmax, kvals[t])
    if not deterministic:
        kmax = min(kmax, exact_max_bits)
    gains = np.empty(1 << max(kmax, 1), np.float64)
    pot = phi0
    r = 0
    streak = 0
    t = 0
    while True:
        if t % thin == 0:
            if record_states:
                _record(a, G, out_states, r)
            out_pot[r] = pot
            out_prev[r] = m / n
            out_rb[r] = rb_prevalence(a, G, v, h, phi, beta, act_free, m)
            r += 1
        if t >= steps:
            break
        if deterministic and streak >= patience:
            break
        k = draw_k(kvals, kcum)
        i = draw_meeting(n, k, scratch, partners)
        d, m, changed = meeting_update(a, G, v, W, gate, q, h, phi, beta, i, partners, k - 1,
                                       act_free, links_free, deterministic, exact_max_bits,
                                       bit_node, gains, m)
        pot += d
        if changed:
            streak = 0
        else:
            streak += 1
        t += 1
    return r, t, pot


@njit(cache=True)
def single_meeting(a, G, v, W, gate, q, h, phi, beta, i, partners, seed,
                   deterministic, exact_max_bits):
    seed_rng(seed)
    n = a.shape[0]
    act_free = np.ones(n, np.int8)
    bit_node = np.empty(n, np.int64)
    gains = np.empty(1 << (partners.shape[0] + 1), np.float64)
    m = 0
    for j in range(n):
        m += a[j]
    d, m, changed = meeting_update(a, G, v, W, gate, q, h, phi, beta, i, partners,
                                   partners.shape[0], act_free, True, deterministic,
                                   exact_max_bits, bit_node, gains, m)
    return d


@njit(cache=True)
def meeting_max_gain(a, G, v, W, gate, q, h, phi, i, partners):
    """Max potential gain over the neighborhood and the arg flip mask."""
    n = a.shape[0]
    act_free = np.ones(n, np.int8)
    bit_node = np.empty(n, np.int64)
    kp = partners.shape[0]
    f = _local_bits(i, partners, kp, act_free, True, bit_node)
    gains = np.empty(1 << f, np.float64)
    m = 0
    for j in range(n):
        m += a[j]
    neighborhood_gains(a, G, v, W, gate, q, h, phi, i, bit_node, f, m, gains)
    best = 0
    for c in range(1, 1 << f):
        if gains[c] > gains[best]:
            best = c
    return gains[best], best


# ---------------------------------------------------- inner MH chain (ERGM)

@njit(cache=True)
def mh_chain(a, G, zv, zw, gate, theta, beta, kvals, kcum, large_p, R, seed,
             act_free, links_free, total_zw, stats):
    """Metropolis-Hastings on the potential with consensual proposals.

    Each step either proposes the complement of all free bits (probability
    ``large_p``) or draws k and a uniform meeting and proposes a uniform
    configuration of the meeting's free bits.  Updates ``a``, ``G`` and the
    running statistics ``stats`` in place; returns the acceptance count.
    """
    seed_rng(seed)
    n = a.shape[0]
    nstat = stats.shape[0]
    m = 0
    for i in range(n):
        m += a[i]
    scratch = np.empty(max(n - 1, 1), np.int64)
    partners = np.empty(max(n - 1, 1), np.int64)
    bit_node = np.empty(n, np.int64)
    flips = np.empty(n, np.int64)
    ds = np.empty(nstat)
    newstats = np.empty(nstat)
    any_free = links_free
    for i in range(n):
        if act_free[i]:
            any_free = True
    accepted = 0
    for it in range(R):
        if not any_free:
            break
        if np.random.random() < large_p:
            m_new = complement_statistics(a, G, zv, zw, gate, stats, True, act_free,
                                          links_free, total_zw, newstats)
            dphi = 0.0
            for r in range(nstat):
                dphi += theta[r] * (newstats[r] - stats[r])
            if np.log(np.random.random()) < dphi / beta:
                for r in range(nstat):
                    stats[r] = newstats[r]
                m = m_new
                accepted += 1
            else:
                complement_statistics(a, G, zv, zw, gate, newstats, True, act_free,
                                      links_free, total_zw, ds)
            continue
        k = draw_k(kvals, kcum)
        i = draw_meeting(n, k, scratch, partners)
        f = _local_bits(i, partners, k - 1, act_free, links_free, bit_node)
        if f == 0:
            continue
        nf = 0
        for b in range(f):
            if np.random.random() < 0.5:
                flips[nf] = bit_node[b]
                nf += 1
        if nf == 0:
            accepted += 1
            continue
        for r in range(nstat):
            ds[r] = 0.0
        m0 = m
        for t in range(nf):
            node = flips[t]
            if node < 0:
                m = toggle_action_stats(a, G, zv, i, m, ds)
            else:
                toggle_link_stats(a, G, zw, gate, i, node, ds)
        dphi = 0.0
        for r in range(nstat):
            dphi += theta[r] * ds[r]
        if np.log(np.random.random()) < dphi / beta:
            for r in range(nstat):
                stats[r] += ds[r]
            accepted += 1
        else:
            for t in range(nf - 1, -1, -1):
                node = flips[t]
                if node < 0:
                    a[i] = 1 - a[i]
                else:
                    G[i, node] = 1 - G[i, node]
                    G[node, i] = G[i, node]
            m = m0
    return accepted
