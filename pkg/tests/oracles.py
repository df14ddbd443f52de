"""Slow, loop-based reference implementations used as test oracles."""
import math


def naive_percentile(xs, p):
    s = sorted(xs)
    rank = p / 100.0 * (len(s) - 1)
    lo = math.floor(rank)
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (rank - lo) * (s[hi] - s[lo])


def naive_features(xs):
    m = len(xs)
    mean = math.fsum(xs) / m
    var = math.fsum((x - mean) ** 2 for x in xs) / m
    energy = math.fsum(x * x for x in xs)
    return {
        "MEAN": mean,
        "STD": math.sqrt(var),
        "VAR": var,
        "MIN": min(xs),
        "MEDIAN": naive_percentile(xs, 50),
        "P25": naive_percentile(xs, 25),
        "P10": naive_percentile(xs, 10),
        "MAD": math.fsum(abs(x - mean) for x in xs) / m,
        "RMS": math.sqrt(energy / m),
        "ENERGY": energy,
        "RANGE": max(xs) - min(xs),
    }


def naive_scatter(rows, labels):
    """Between- and within-class scatter by explicit loops."""
    n, d = len(rows), len(rows[0])
    classes = sorted(set(labels))
    mu = [math.fsum(r[j] for r in rows) / n for j in range(d)]
    sb = [[0.0] * d for _ in range(d)]
    sw = [[0.0] * d for _ in range(d)]
    for c in classes:
        members = [r for r, lab in zip(rows, labels) if lab == c]
        mc = [math.fsum(r[j] for r in members) / len(members) for j in range(d)]
        for a in range(d):
            for b in range(d):
                sb[a][b] += len(members) * (mc[a] - mu[a]) * (mc[b] - mu[b])
                sw[a][b] += math.fsum((r[a] - mc[a]) * (r[b] - mc[b]) for r in members)
    return sb, sw


def naive_velocity(v, p, pbest, gbest, w, c1, c2, r1, r2, vmax):
    out = []
    for vi, pi, bi, gi in zip(v, p, pbest, gbest):
        nv = w * vi + c1 * r1 * (bi - pi) + c2 * r2 * (gi - pi)
        out.append(max(-vmax, min(vmax, nv)))
    return out
