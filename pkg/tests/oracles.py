"""Independent slow reimplementations used as test oracles."""

import math

import numpy as np

CHANNEL_ORDER = ["TP9", "AF7", "AF8", "TP10"]
SIGNAL_ORDER = ["Theta", "Alpha", "Beta", "Gamma", "Raw"]


def enumerate_frames(n, frame_len, hop):
    starts = []
    s = 0
    while s + frame_len <= n:
        starts.append(s)
        s += hop
    return starts


def zcr_loop(xs):
    sign = [1 if v >= 0 else -1 for v in xs]
    changes = sum(1 for a, b in zip(sign, sign[1:]) if a != b)
    return changes / (len(xs) - 1)


def features_loop(values, frame_len=40, hop=20):
    """``values[t][signal][channel]`` over the 5 reduced signals -> list of dicts per frame."""
    out = []
    for start in enumerate_frames(len(values), frame_len, hop):
        feats = {}
        for ci, ch in enumerate(CHANNEL_ORDER):
            for si, sig in enumerate(SIGNAL_ORDER):
                xs = [float(values[t][si][ci]) for t in range(start, start + frame_len)]
                feats[f"mean_{sig}_{ch}"] = math.fsum(xs) / len(xs)
                feats[f"max_{sig}_{ch}"] = max(xs)
                feats[f"min_{sig}_{ch}"] = min(xs)
                feats[f"zcr_{sig}_{ch}"] = zcr_loop(xs)
        out.append(feats)
    return out


def gini_loop(labels):
    n = len(labels)
    return 1.0 - sum((labels.count(c) / n) ** 2 for c in set(labels))


def best_split_loop(rows, labels):
    """Exhaustive search: (feature, threshold, decrease) with the lowest feature then threshold on ties."""
    n = len(rows)
    parent = gini_loop(list(labels))
    best = None
    for f in range(len(rows[0])):
        vals = sorted(set(r[f] for r in rows))
        for lo, hi in zip(vals, vals[1:]):
            thr = lo + (hi - lo) / 2
            left = [labels[i] for i in range(n) if rows[i][f] <= thr]
            right = [labels[i] for i in range(n) if rows[i][f] > thr]
            dec = parent - (len(left) * gini_loop(left) + len(right) * gini_loop(right)) / n
            if dec > 1e-12 and (best is None or dec > best[2] + 1e-12):
                best = (f, thr, dec)
    return best


def anova_loop(groups):
    allv = [v for g in groups for v in g]
    grand = sum(allv) / len(allv)
    ssb = sum(len(g) * (sum(g) / len(g) - grand) ** 2 for g in groups)
    ssw = sum((v - sum(g) / len(g)) ** 2 for g in groups for v in g)
    dfb, dfw = len(groups) - 1, len(allv) - len(groups)
    return (ssb / dfb) / (ssw / dfw), dfb, dfw


def f_density(x, d1, d2):
    lg = math.lgamma
    logc = lg((d1 + d2) / 2) - lg(d1 / 2) - lg(d2 / 2) + (d1 / 2) * math.log(d1 / d2)
    return math.exp(logc + (d1 / 2 - 1) * math.log(x) - ((d1 + d2) / 2) * math.log1p(d1 * x / d2))


def f_upper_tail_quad(f, d1, d2):
    """Upper tail of the F distribution by adaptive quadrature of the density."""
    from scipy.integrate import quad

    if f <= 0:
        return 1.0
    lower, _ = quad(f_density, 0.0, f, args=(d1, d2), epsabs=1e-14, epsrel=1e-12, limit=500)
    upper, _ = quad(f_density, f, np.inf, args=(d1, d2), epsabs=1e-14, epsrel=1e-12, limit=500)
    return upper if upper < 0.5 else 1.0 - lower

