"""Pure-Python generation kernel.

Consumes the same streams in the same order as the compiled kernel and
performs the same floating point operations in the same order, so both
backends return bit-identical martingale paths.  It is also the only
backend that accepts user-supplied samplers.
"""

from __future__ import annotations

import math

import numpy as np

from .rng import child_label, particle_stream

K_DIRECT = 16
BAND_EXACT = 32
KIND_AGGREGATE, KIND_IID, KIND_INFINITE = 0, 1, 2
COUNT_PARETO = 0


class FallbackLaw:
    """Python view of a law table dictionary."""

    def __init__(self, spec: dict):
        self.__dict__.update(spec)
        for name in ("small_v", "band_lo", "band_hi", "fin_v"):
            setattr(self, name, [int(v) for v in spec[name]])
        for name in ("small_p", "small_tail", "band_p", "band_glo", "band_mean", "band_var",
                     "fin_cum", "fin_p", "fin_tail"):
            setattr(self, name, [float(v) for v in spec[name]])
        for name in ("kind", "count_type", "c_min", "disp_type", "lattice_len"):
            setattr(self, name, int(spec[name]))


def _binom(g, n, p):
    if p >= 1.0:
        return n
    return int(g.binomial(n, p))


def _pareto_one(L, g):
    u = 1.0 - g.random()
    v = int(math.floor(math.pow(L.c_d / u, L.c_inv_alpha)))
    return L.c_min if v < L.c_min else v


def _pareto_in_band(L, g, b):
    u = L.band_glo[b] - L.band_p[b] * g.random()
    x = math.floor(math.pow(L.c_d / u, L.c_inv_alpha))
    if x < L.band_lo[b]:
        return L.band_lo[b]
    if x > L.band_hi[b]:
        return L.band_hi[b]
    return int(x)


def _finite_one(L, g):
    u = g.random()
    for i in range(len(L.fin_v) - 1):
        if u < L.fin_cum[i]:
            return L.fin_v[i]
    return L.fin_v[-1]


def count_one(L, g):
    return _pareto_one(L, g) if L.count_type == COUNT_PARETO else _finite_one(L, g)


def count_sum(L, g, k):
    if k <= K_DIRECT:
        return sum(count_one(L, g) for _ in range(k))
    rem, tot = k, 0
    if L.count_type != COUNT_PARETO:
        last = len(L.fin_v) - 1
        for j, v in enumerate(L.fin_v):
            if rem == 0:
                break
            c = rem if j == last else _binom(g, rem, L.fin_p[j] / L.fin_tail[j])
            tot += v * c
            rem -= c
        return tot
    for j, v in enumerate(L.small_v):
        if rem == 0:
            return tot
        c = _binom(g, rem, L.small_p[j] / L.small_tail[j])
        tot += v * c
        rem -= c
    nb = len(L.band_lo)
    for b in range(nb):
        if rem == 0:
            return tot
        last = b == nb - 1
        c = rem if last else _binom(g, rem, L.band_p[b] / L.band_glo[b])
        if c <= BAND_EXACT or last:
            for _ in range(c):
                tot += _pareto_in_band(L, g, b)
        else:
            x = c * L.band_mean[b] + math.sqrt(c * L.band_var[b]) * g.standard_normal()
            x = math.floor(x + 0.5)
            lo = float(c) * float(L.band_lo[b])
            hi = float(c) * float(L.band_hi[b])
            x = min(max(x, lo), hi)
            tot += int(x)
        rem -= c
    return tot


def displacement(L, g):
    t = L.disp_type
    if t == 1:
        return L.dp1 + L.dp2 * g.standard_normal()
    if t == 2:
        return g.standard_exponential() / L.dp1
    if t == 3:
        return L.dp1 + (L.dp2 - L.dp1) * g.random()
    return L.dp1


def _seq_sum(values) -> float:
    acc = 0.0
    for v in values:
        acc += v
    return acc


def apply_cap(wt, wa, cnt, lab, cap, dropped=0.0):
    """Keep the ``cap`` heaviest atoms, ties broken by position.

    The dropped mass is added onto ``dropped`` one atom at a time.
    """
    if len(wt) <= cap:
        return wt, wa, cnt, lab, dropped, False
    thr = sorted(wt, reverse=True)[cap - 1]
    ties = cap - sum(1 for w in wt if w > thr)
    keep_idx = []
    for i, w in enumerate(wt):
        keep = w > thr
        if not keep and w == thr and ties > 0:
            ties -= 1
            keep = True
        if keep:
            keep_idx.append(i)
        else:
            dropped += float(cnt[i]) * w
    pick = lambda xs: [xs[i] for i in keep_idx]  # noqa: E731
    return pick(wt), pick(wa), pick(cnt), pick(lab), dropped, True


def step(L, wt, wa, cnt, lab, generation, seed, replicate, prune_eps, cap, custom=None,
         pruned=0.0):
    """One generation on Python lists.

    Returns the child lists, the running pruned mass (starting from ``pruned``)
    and the cap flag.
    """
    total = _seq_sum(float(c) * w for c, w in zip(cnt, wt))
    thr = prune_eps * total
    cw, ca, cc, cl = [], [], [], []

    def emit(w, a, c, label):
        nonlocal pruned
        if float(c) * w < thr:
            pruned += float(c) * w
        else:
            cw.append(w)
            ca.append(a)
            cc.append(c)
            cl.append(label)

    for i in range(len(wt)):
        g = particle_stream(seed, replicate, generation, lab[i])
        w0, a0, parent = wt[i], wa[i], lab[i]
        if custom is not None:
            if cnt[i] != 1:
                raise ValueError("custom laws do not aggregate particles")
            xs = np.asarray(custom(g), dtype=float)
            for j, x in enumerate(xs.tolist()):
                emit(w0 * math.exp(-L.theta * x) / L.m_theta,
                     a0 * math.exp(-L.atheta * x) / L.m_atheta, 1, child_label(parent, j))
        elif L.kind == KIND_AGGREGATE:
            n = count_sum(L, g, cnt[i])
            if n > 0:
                emit(w0 * L.point_wt, a0 * L.point_wa, n, child_label(parent, 0))
        else:
            n = count_one(L, g)
            for j in range(n):
                x = displacement(L, g)
                emit(w0 * math.exp(-L.theta * x) / L.m_theta,
                     a0 * math.exp(-L.atheta * x) / L.m_atheta, 1, child_label(parent, j))
            if L.kind == KIND_INFINITE:
                for k in range(n + 1, n + 1 + L.lattice_len):
                    x = L.a * float(k)
                    emit(w0 * math.exp(-L.theta * x) / L.m_theta,
                         a0 * math.exp(-L.atheta * x) / L.m_atheta, 1, child_label(parent, k - 1))
                x = L.a * float(n + 1 + L.lattice_len)
                pruned += w0 * math.exp(-L.theta * x) / L.one_minus_q / L.m_theta
    return apply_cap(cw, ca, cc, cl, cap, pruned)


def simulate_batch(L, max_generation, seed, rep_start, rep_stop, prune_eps, cap, root_label,
                   custom=None):
    """Same contract as the compiled ``simulate_batch``."""
    R, M = rep_stop - rep_start, max_generation
    Wt = np.zeros((R, M + 1))
    Wa = np.zeros((R, M + 1))
    ext = np.full(R, -1, dtype=np.int64)
    capv = np.zeros(R, dtype=bool)
    prv = np.zeros(R)
    for r in range(R):
        wt, wa, cnt, lab = [1.0], [1.0], [1], [root_label]
        pruned, capped = 0.0, False
        for g in range(M + 1):
            if not wt:
                ext[r] = g
                break
            Wt[r, g] = _seq_sum(float(c) * w for c, w in zip(cnt, wt))
            Wa[r, g] = _seq_sum(float(c) * a for c, a in zip(cnt, wa))
            if g == M:
                break
            wt, wa, cnt, lab, pruned, c = step(L, wt, wa, cnt, lab, g, seed, rep_start + r,
                                               prune_eps, cap, custom, pruned)
            capped = capped or c
        capv[r] = capped
        prv[r] = pruned
    return Wt, Wa, ext, capv, prv
