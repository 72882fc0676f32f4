"""Slow, direct re-implementations used as references in the tests.

Each one is written from the definitions with plain Python loops and shares no
code with the package.
"""

import itertools
import math
import statistics
from collections import Counter
from datetime import datetime, timedelta, timezone
from fractions import Fraction


def haversine(lat1, lon1, lat2, lon2, radius=6371008.8):
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp, dl = p2 - p1, math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * radius * math.asin(math.sqrt(a))


# Gibbs sampling

def _log_dirmult(counts, prior):
    k = len(counts)
    return (math.lgamma(k * prior) - math.lgamma(sum(counts) + k * prior)
            + sum(math.lgamma(c + prior) - math.lgamma(prior) for c in counts))


def enumerate_joint(users, times, cats, K, V, alpha, beta, gamma, temporal=True):
    """Exact normalised probability of every assignment vector under the collapsed
    model: a Dirichlet-multinomial over patterns per user (and per time token),
    times one over categories per pattern."""
    n = len(users)
    logp = {}
    for z in itertools.product(range(K), repeat=n):
        lp = 0.0
        for u in set(users):
            lp += _log_dirmult([sum(1 for i in range(n) if users[i] == u and z[i] == k) for k in range(K)], alpha)
        if temporal:
            for t in set(times):
                lp += _log_dirmult([sum(1 for i in range(n) if times[i] == t and z[i] == k) for k in range(K)], gamma)
        for k in range(K):
            lp += _log_dirmult([sum(1 for i in range(n) if z[i] == k and cats[i] == v) for v in range(V)], beta)
        logp[z] = lp
    top = max(logp.values())
    w = {z: math.exp(lp - top) for z, lp in logp.items()}
    s = sum(w.values())
    return {z: x / s for z, x in w.items()}


# POPTICS

def dist(a, b):
    # sqrt of the sum of squares, not hypot: exact ties must round identically
    return math.sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]))


def neighbour_rank(n, eta):
    """ceil(n * eta) in exact decimal arithmetic, clamped to [1, n - 1]."""
    k = math.ceil(Fraction(n) * Fraction(repr(eta)))
    return min(max(1, k), max(n - 1, 1))


def core_distances(points, eta):
    n = len(points)
    if n == 1:
        return [0.0]
    k = neighbour_rank(n, eta)
    out = []
    for i, p in enumerate(points):
        ds = sorted(dist(p, q) for j, q in enumerate(points) if j != i)
        out.append(ds[k - 1])
    return out


def optics(points, core, max_dist=math.inf):
    """Textbook ordering with a single global seed list."""
    n = len(points)
    reach = [max_dist] * n
    reach[0] = 0.0
    visited = [False] * n
    order, plot = [], []
    current = 0
    while True:
        visited[current] = True
        order.append(current)
        plot.append(reach[current])
        if len(order) == n:
            return order, plot
        for j in range(n):
            if not visited[j]:
                d = dist(points[j], points[current])
                reach[j] = min(reach[j], max(core[current], d))
        best = None
        for j in range(n):
            if not visited[j] and (best is None or reach[j] < reach[best]):
                best = j
        current = best


def threshold_choice(plot):
    """(threshold, score) minimising std(RD*) * N / |RD*| over the unique finite
    reach values and +inf, each as an exclusive bound; None if no candidate has
    two or more values below it."""
    n = len(plot)
    cands = sorted(set(r for r in plot if math.isfinite(r))) + [math.inf]
    best = None
    for c in cands:
        kept = [r for r in plot if r < c]
        if len(kept) < 2:
            continue
        score = statistics.pstdev(kept) * n / len(kept)
        if best is None or score < best[1]:
            best = (c, score)
    return best


def clusters(order, plot, threshold):
    out, cur = [], []
    for idx, r in zip(order, plot):
        if r < threshold:
            cur.append(idx)
        else:
            if cur:
                out.append(cur)
            cur = []
    if cur:
        out.append(cur)
    return out


# coherence

def windows(event_users, tokens, size):
    """Per-user sliding windows (step one) as sets of tokens."""
    by_user = {}
    for u, tok in zip(event_users, tokens):
        by_user.setdefault(u, []).append(tok)
    out = []
    for u in sorted(by_user):
        seq = by_user[u]
        if len(seq) <= size:
            out.append(set(seq))
        else:
            out.extend(set(seq[i:i + size]) for i in range(len(seq) - size + 1))
    return out


def npmi(p_joint, p_a, p_b, eps, tau=1.0):
    if p_a == 0 or p_b == 0 or p_joint >= 1:
        return 0.0
    x = math.log((p_joint + eps) / (p_a * p_b)) / -math.log(p_joint + eps)
    return math.copysign(abs(x) ** tau, x)


def _cos(a, b):
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    if na == 0 or nb == 0:
        return 0.0
    return sum(x * y for x, y in zip(a, b)) / (na * nb)


def tcv(event_users, event_cats, event_times, top_venues, top_times, size, eps, tau=1.0):
    wins = windows(event_users, list(zip(event_cats, event_times)), size)
    q = len(wins)
    cat_sets = [{c for c, _ in w} for w in wins]
    time_sets = [{t for _, t in w} for w in wins]
    scores = []
    for vs, ts in zip(top_venues, top_times):
        vec = {}
        for v in vs:
            pv = sum(v in s for s in cat_sets) / q
            row = []
            for t in ts:
                pt = sum(t in s for s in time_sets) / q
                pvt = sum(v in a and t in b for a, b in zip(cat_sets, time_sets)) / q
                row.append(npmi(pvt, pv, pt, eps, tau))
            vec[v] = row
        total = [sum(vec[v][j] for v in vs) for j in range(len(ts))]
        scores.extend(_cos(vec[v], total) for v in vs)
    return sum(scores) / len(scores)


def cv(event_users, event_cats, top_venues, size, eps, tau=1.0):
    wins = windows(event_users, event_cats, size)
    q = len(wins)
    scores = []
    for vs in top_venues:
        vec = {}
        for a in vs:
            pa = sum(a in w for w in wins) / q
            row = []
            for b in vs:
                pb = sum(b in w for w in wins) / q
                pab = sum(a in w and b in w for w in wins) / q
                row.append(npmi(pab, pa, pb, eps, tau))
            vec[a] = row
        total = [sum(vec[a][j] for a in vs) for j in range(len(vs))]
        scores.extend(_cos(vec[a], total) for a in vs)
    return sum(scores) / len(scores)


# demand and supply

def layers(users, venues, origin, cell, n_cols, n_rows):
    """users: (x, y, r); venues: (x, y, sigma).  Row-major lists of demand,
    supply and ratio (None where supply is not positive)."""
    demand, supply, ratio = [], [], []
    for row in range(n_rows):
        for col in range(n_cols):
            cx = origin[0] + cell * col + cell / 2
            cy = origin[1] + cell * row + cell / 2
            d_sum = 0.0
            for ux, uy, r in users:
                d = math.sqrt((cx - ux) ** 2 + (cy - uy) ** 2)
                if d <= r:
                    d_sum += math.exp(-d * d / (2 * r * r)) / (math.sqrt(2 * math.pi) * r)
            s_sum = 0.0
            for vx, vy, s in venues:
                d = math.sqrt((cx - vx) ** 2 + (cy - vy) ** 2)
                s_sum += math.exp(-d * d / (2 * s * s)) / (math.sqrt(2 * math.pi) * s)
            demand.append(d_sum)
            supply.append(s_sum)
            ratio.append(d_sum / s_sum if s_sum > 1e-12 else None)
    return demand, supply, ratio


# calendar heatmap

def heatmap(timestamps, tz_offset):
    tz = timezone(timedelta(seconds=tz_offset))
    c = Counter()
    for ts in timestamps:
        dt = datetime.fromtimestamp(ts, tz)
        c[(dt.date(), dt.hour)] += 1
    return c


def pearson(x, y):
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)
