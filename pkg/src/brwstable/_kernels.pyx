# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled generation-step and replicate kernels.

Mirrors :mod:`brwstable._fallback` draw for draw; both consume the same
per-particle Philox streams through numpy's C distribution library.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, floor, pow, sqrt
from libc.stdint cimport int64_t, uint64_t, uint8_t
from libc.stdlib cimport free, malloc, qsort, realloc

cnp.import_array()

cdef extern from "numpy/random/bitgen.h":
    ctypedef struct bitgen_t:
        pass

cdef extern from "numpy/random/distributions.h":
    ctypedef struct binomial_t:
        pass
    double random_standard_uniform(bitgen_t *bitgen_state) nogil
    double random_standard_normal(bitgen_t *bitgen_state) nogil
    double random_standard_exponential(bitgen_t *bitgen_state) nogil
    int64_t random_binomial(bitgen_t *bitgen_state, double p, int64_t n,
                            binomial_t *binomial) nogil

cdef extern from "_brwcore.h":
    ctypedef struct brw_philox_t:
        pass
    ctypedef struct brw_stream_t:
        brw_philox_t ph
        bitgen_t bitgen
        binomial_t binom
    void brw_stream_init(brw_stream_t *s, uint64_t seed, uint64_t replicate,
                         uint64_t generation, uint64_t label) nogil
    uint64_t brw_next_uint64(void *st) nogil
    uint64_t brw_child_label(uint64_t parent, uint64_t j) nogil

DEF K_DIRECT = 16
DEF BAND_EXACT = 32

cdef enum:
    KIND_AGGREGATE = 0
    KIND_IID = 1
    KIND_INFINITE = 2

cdef enum:
    COUNT_PARETO = 0
    COUNT_FINITE = 1

cdef enum:
    DISP_POINT = 0
    DISP_NORMAL = 1
    DISP_EXPONENTIAL = 2
    DISP_UNIFORM = 3


cdef struct LawC:
    int kind
    int count_type
    double c_d
    double c_inv_alpha
    int64_t c_min
    int64_t n_small
    const int64_t *small_v
    const double *small_p
    const double *small_tail
    int64_t n_bands
    const int64_t *band_lo
    const int64_t *band_hi
    const double *band_p
    const double *band_glo
    const double *band_mean
    const double *band_var
    int64_t n_fin
    const int64_t *fin_v
    const double *fin_cum
    const double *fin_p
    const double *fin_tail
    int disp_type
    double dp1
    double dp2
    double a
    int64_t lattice_len
    double one_minus_q
    double theta
    double atheta
    double m_theta
    double m_atheta
    double point_wt
    double point_wa


cdef struct PopC:
    double *wt
    double *wa
    int64_t *cnt
    uint64_t *lab
    Py_ssize_t n
    Py_ssize_t cap


cdef int pop_reserve(PopC *p, Py_ssize_t need) noexcept nogil:
    cdef Py_ssize_t newcap
    cdef void *t
    if need <= p.cap:
        return 0
    newcap = p.cap * 2 if p.cap > 0 else 64
    while newcap < need:
        newcap *= 2
    t = realloc(p.wt, newcap * sizeof(double))
    if t == NULL:
        return -1
    p.wt = <double *> t
    t = realloc(p.wa, newcap * sizeof(double))
    if t == NULL:
        return -1
    p.wa = <double *> t
    t = realloc(p.cnt, newcap * sizeof(int64_t))
    if t == NULL:
        return -1
    p.cnt = <int64_t *> t
    t = realloc(p.lab, newcap * sizeof(uint64_t))
    if t == NULL:
        return -1
    p.lab = <uint64_t *> t
    p.cap = newcap
    return 0


cdef void pop_free(PopC *p) noexcept nogil:
    free(p.wt)
    free(p.wa)
    free(p.cnt)
    free(p.lab)
    p.wt = NULL
    p.wa = NULL
    p.cnt = NULL
    p.lab = NULL
    p.n = 0
    p.cap = 0


cdef inline int pop_push(PopC *p, double wt, double wa, int64_t cnt, uint64_t lab) noexcept nogil:
    if p.n >= p.cap:
        if pop_reserve(p, p.n + 1) != 0:
            return -1
    p.wt[p.n] = wt
    p.wa[p.n] = wa
    p.cnt[p.n] = cnt
    p.lab[p.n] = lab
    p.n += 1
    return 0


# ---------------------------------------------------------------- counts

cdef inline int64_t binom(brw_stream_t *s, int64_t n, double p) noexcept nogil:
    if p >= 1.0:
        return n
    return random_binomial(&s.bitgen, p, n, &s.binom)


cdef inline int64_t pareto_one(const LawC *L, brw_stream_t *s) noexcept nogil:
    cdef double u = 1.0 - random_standard_uniform(&s.bitgen)
    cdef int64_t v = <int64_t> floor(pow(L.c_d / u, L.c_inv_alpha))
    if v < L.c_min:
        return L.c_min
    return v


cdef inline int64_t pareto_in_band(const LawC *L, brw_stream_t *s, Py_ssize_t b) noexcept nogil:
    cdef double u = L.band_glo[b] - L.band_p[b] * random_standard_uniform(&s.bitgen)
    cdef double x = floor(pow(L.c_d / u, L.c_inv_alpha))
    if x < <double> L.band_lo[b]:
        return L.band_lo[b]
    if x > <double> L.band_hi[b]:
        return L.band_hi[b]
    return <int64_t> x


cdef inline int64_t finite_one(const LawC *L, brw_stream_t *s) noexcept nogil:
    cdef double u = random_standard_uniform(&s.bitgen)
    cdef Py_ssize_t i
    for i in range(L.n_fin - 1):
        if u < L.fin_cum[i]:
            return L.fin_v[i]
    return L.fin_v[L.n_fin - 1]


cdef inline int64_t count_one(const LawC *L, brw_stream_t *s) noexcept nogil:
    if L.count_type == COUNT_PARETO:
        return pareto_one(L, s)
    return finite_one(L, s)


cdef int64_t pareto_sum(const LawC *L, brw_stream_t *s, int64_t k) noexcept nogil:
    cdef int64_t rem = k, tot = 0, c, i
    cdef Py_ssize_t j, b
    cdef double x, lo, hi
    if k <= K_DIRECT:
        for i in range(k):
            tot += pareto_one(L, s)
        return tot
    for j in range(L.n_small):
        if rem == 0:
            return tot
        c = binom(s, rem, L.small_p[j] / L.small_tail[j])
        tot += L.small_v[j] * c
        rem -= c
    for b in range(L.n_bands):
        if rem == 0:
            return tot
        if b == L.n_bands - 1:
            c = rem
        else:
            c = binom(s, rem, L.band_p[b] / L.band_glo[b])
        if c <= BAND_EXACT or b == L.n_bands - 1:
            for i in range(c):
                tot += pareto_in_band(L, s, b)
        else:
            x = c * L.band_mean[b] + sqrt(c * L.band_var[b]) * random_standard_normal(&s.bitgen)
            x = floor(x + 0.5)
            lo = <double> c * <double> L.band_lo[b]
            hi = <double> c * <double> L.band_hi[b]
            if x < lo:
                x = lo
            if x > hi:
                x = hi
            tot += <int64_t> x
        rem -= c
    return tot


cdef int64_t finite_sum(const LawC *L, brw_stream_t *s, int64_t k) noexcept nogil:
    cdef int64_t rem = k, tot = 0, c, i
    cdef Py_ssize_t j
    if k <= K_DIRECT:
        for i in range(k):
            tot += finite_one(L, s)
        return tot
    for j in range(L.n_fin):
        if rem == 0:
            return tot
        if j == L.n_fin - 1:
            c = rem
        else:
            c = binom(s, rem, L.fin_p[j] / L.fin_tail[j])
        tot += L.fin_v[j] * c
        rem -= c
    return tot


cdef inline int64_t count_sum(const LawC *L, brw_stream_t *s, int64_t k) noexcept nogil:
    if L.count_type == COUNT_PARETO:
        return pareto_sum(L, s, k)
    return finite_sum(L, s, k)


cdef inline double displacement(const LawC *L, brw_stream_t *s) noexcept nogil:
    if L.disp_type == DISP_NORMAL:
        return L.dp1 + L.dp2 * random_standard_normal(&s.bitgen)
    if L.disp_type == DISP_EXPONENTIAL:
        return random_standard_exponential(&s.bitgen) / L.dp1
    if L.disp_type == DISP_UNIFORM:
        return L.dp1 + (L.dp2 - L.dp1) * random_standard_uniform(&s.bitgen)
    return L.dp1


# ---------------------------------------------------------------- step

cdef int cmp_desc(const void *a, const void *b) noexcept nogil:
    cdef double x = (<const double *> a)[0]
    cdef double y = (<const double *> b)[0]
    if x > y:
        return -1
    if x < y:
        return 1
    return 0


cdef int apply_cap(PopC *ch, Py_ssize_t cap, double *pruned) noexcept nogil:
    """Keep the ``cap`` heaviest atoms in their original order."""
    cdef double *tmp
    cdef double thr
    cdef Py_ssize_t i, j = 0, n_gt = 0, ties
    cdef bint keep
    if ch.n <= cap:
        return 0
    tmp = <double *> malloc(ch.n * sizeof(double))
    if tmp == NULL:
        return -1
    for i in range(ch.n):
        tmp[i] = ch.wt[i]
    qsort(tmp, ch.n, sizeof(double), cmp_desc)
    thr = tmp[cap - 1]
    free(tmp)
    for i in range(ch.n):
        if ch.wt[i] > thr:
            n_gt += 1
    ties = cap - n_gt
    for i in range(ch.n):
        keep = ch.wt[i] > thr
        if not keep and ch.wt[i] == thr and ties > 0:
            ties -= 1
            keep = True
        if keep:
            ch.wt[j] = ch.wt[i]
            ch.wa[j] = ch.wa[i]
            ch.cnt[j] = ch.cnt[i]
            ch.lab[j] = ch.lab[i]
            j += 1
        else:
            pruned[0] += <double> ch.cnt[i] * ch.wt[i]
    ch.n = j
    return 1


cdef inline int emit(PopC *ch, double wt, double wa, int64_t cnt, uint64_t lab,
                     double thr, double *pruned) noexcept nogil:
    if <double> cnt * wt < thr:
        pruned[0] += <double> cnt * wt
        return 0
    return pop_push(ch, wt, wa, cnt, lab)


cdef int step_c(const LawC *L, PopC *par, PopC *ch, uint64_t seed, uint64_t rep,
                uint64_t gen, double prune_eps, Py_ssize_t cap,
                double *pruned, int *capped) noexcept nogil:
    cdef brw_stream_t s
    cdef Py_ssize_t i
    cdef int64_t n, j, k
    cdef double total = 0.0, thr, x, wt, wa
    ch.n = 0
    for i in range(par.n):
        total += <double> par.cnt[i] * par.wt[i]
    thr = prune_eps * total
    for i in range(par.n):
        brw_stream_init(&s, seed, rep, gen, par.lab[i])
        wt = par.wt[i]
        wa = par.wa[i]
        if L.kind == KIND_AGGREGATE:
            n = count_sum(L, &s, par.cnt[i])
            if n > 0:
                if emit(ch, wt * L.point_wt, wa * L.point_wa, n,
                        brw_child_label(par.lab[i], 0), thr, pruned) != 0:
                    return -1
        elif L.kind == KIND_IID:
            n = count_one(L, &s)
            for j in range(n):
                x = displacement(L, &s)
                if emit(ch, wt * exp(-L.theta * x) / L.m_theta,
                        wa * exp(-L.atheta * x) / L.m_atheta, 1,
                        brw_child_label(par.lab[i], j), thr, pruned) != 0:
                    return -1
        else:
            n = count_one(L, &s)
            for j in range(n):
                x = displacement(L, &s)
                if emit(ch, wt * exp(-L.theta * x) / L.m_theta,
                        wa * exp(-L.atheta * x) / L.m_atheta, 1,
                        brw_child_label(par.lab[i], j), thr, pruned) != 0:
                    return -1
            for k in range(n + 1, n + 1 + L.lattice_len):
                x = L.a * <double> k
                if emit(ch, wt * exp(-L.theta * x) / L.m_theta,
                        wa * exp(-L.atheta * x) / L.m_atheta, 1,
                        brw_child_label(par.lab[i], k - 1), thr, pruned) != 0:
                    return -1
            x = L.a * <double> (n + 1 + L.lattice_len)
            pruned[0] += wt * exp(-L.theta * x) / L.one_minus_q / L.m_theta
    k = apply_cap(ch, cap, pruned)
    if k < 0:
        return -1
    if k == 1:
        capped[0] = 1
    return 0


cdef void pop_totals(PopC *p, double *wt_tot, double *wa_tot) noexcept nogil:
    cdef Py_ssize_t i
    cdef double a = 0.0, b = 0.0
    for i in range(p.n):
        a += <double> p.cnt[i] * p.wt[i]
        b += <double> p.cnt[i] * p.wa[i]
    wt_tot[0] = a
    wa_tot[0] = b


# ---------------------------------------------------------------- python surface

cdef class KernelLaw:
    """C view of a law table dictionary built by :mod:`brwstable.models`."""

    cdef LawC c
    cdef dict _keep

    def __init__(self, dict spec):
        cdef cnp.ndarray arr
        self._keep = {}
        for name in ("small_v", "band_lo", "band_hi", "fin_v"):
            self._keep[name] = np.ascontiguousarray(spec[name], dtype=np.int64)
        for name in ("small_p", "small_tail", "band_p", "band_glo", "band_mean",
                     "band_var", "fin_cum", "fin_p", "fin_tail"):
            self._keep[name] = np.ascontiguousarray(spec[name], dtype=np.float64)
        self.c.kind = spec["kind"]
        self.c.count_type = spec["count_type"]
        self.c.c_d = spec["c_d"]
        self.c.c_inv_alpha = spec["c_inv_alpha"]
        self.c.c_min = spec["c_min"]
        self.c.n_small = len(self._keep["small_v"])
        self.c.n_bands = len(self._keep["band_lo"])
        self.c.n_fin = len(self._keep["fin_v"])
        arr = self._keep["small_v"]; self.c.small_v = <const int64_t *> cnp.PyArray_DATA(arr)
        arr = self._keep["small_p"]; self.c.small_p = <const double *> cnp.PyArray_DATA(arr)
        arr = self._keep["small_tail"]; self.c.small_tail = <const double *> cnp.PyArray_DATA(arr)
        arr = self._keep["band_lo"]; self.c.band_lo = <const int64_t *> cnp.PyArray_DATA(arr)
        arr = self._keep["band_hi"]; self.c.band_hi = <const int64_t *> cnp.PyArray_DATA(arr)
        arr = self._keep["band_p"]; self.c.band_p = <const double *> cnp.PyArray_DATA(arr)
        arr = self._keep["band_glo"]; self.c.band_glo = <const double *> cnp.PyArray_DATA(arr)
        arr = self._keep["band_mean"]; self.c.band_mean = <const double *> cnp.PyArray_DATA(arr)
        arr = self._keep["band_var"]; self.c.band_var = <const double *> cnp.PyArray_DATA(arr)
        arr = self._keep["fin_v"]; self.c.fin_v = <const int64_t *> cnp.PyArray_DATA(arr)
        arr = self._keep["fin_cum"]; self.c.fin_cum = <const double *> cnp.PyArray_DATA(arr)
        arr = self._keep["fin_p"]; self.c.fin_p = <const double *> cnp.PyArray_DATA(arr)
        arr = self._keep["fin_tail"]; self.c.fin_tail = <const double *> cnp.PyArray_DATA(arr)
        self.c.disp_type = spec["disp_type"]
        self.c.dp1 = spec["dp1"]
        self.c.dp2 = spec["dp2"]
        self.c.a = spec["a"]
        self.c.lattice_len = spec["lattice_len"]
        self.c.one_minus_q = spec["one_minus_q"]
        self.c.theta = spec["theta"]
        self.c.atheta = spec["atheta"]
        self.c.m_theta = spec["m_theta"]
        self.c.m_atheta = spec["m_atheta"]
        self.c.point_wt = spec["point_wt"]
        self.c.point_wa = spec["point_wa"]


def raw_stream(uint64_t seed, uint64_t replicate, uint64_t generation, uint64_t label,
               Py_ssize_t n):
    """First ``n`` raw 64-bit outputs of one particle stream."""
    cdef brw_stream_t s
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] out = np.empty(n, dtype=np.uint64)
    cdef Py_ssize_t i
    brw_stream_init(&s, seed, replicate, generation, label)
    for i in range(n):
        out[i] = brw_next_uint64(&s.ph)
    return out


def child_label(uint64_t parent, uint64_t j):
    return brw_child_label(parent, j)


def count_sum_draw(KernelLaw law, int64_t k, uint64_t seed, uint64_t replicate,
                   uint64_t generation, uint64_t label):
    """Total offspring of ``k`` exchangeable particles on one stream."""
    cdef brw_stream_t s
    brw_stream_init(&s, seed, replicate, generation, label)
    return count_sum(&law.c, &s, k)


def step(KernelLaw law, wt, wa, cnt, lab, uint64_t generation, uint64_t seed,
         uint64_t replicate, double prune_eps, Py_ssize_t cap):
    """One generation; returns child arrays, pruned mass and the cap flag."""
    cdef PopC par, ch
    cdef double pruned = 0.0
    cdef int capped = 0, rc
    cdef double[::1] wt_v = np.ascontiguousarray(wt, dtype=np.float64)
    cdef double[::1] wa_v = np.ascontiguousarray(wa, dtype=np.float64)
    cdef int64_t[::1] cnt_v = np.ascontiguousarray(cnt, dtype=np.int64)
    cdef uint64_t[::1] lab_v = np.ascontiguousarray(lab, dtype=np.uint64)
    cdef Py_ssize_t n = wt_v.shape[0], i
    par.wt = NULL; par.wa = NULL; par.cnt = NULL; par.lab = NULL; par.n = 0; par.cap = 0
    ch.wt = NULL; ch.wa = NULL; ch.cnt = NULL; ch.lab = NULL; ch.n = 0; ch.cap = 0
    if pop_reserve(&par, n if n > 0 else 1) != 0:
        raise MemoryError()
    for i in range(n):
        par.wt[i] = wt_v[i]
        par.wa[i] = wa_v[i]
        par.cnt[i] = cnt_v[i]
        par.lab[i] = lab_v[i]
    par.n = n
    with nogil:
        rc = step_c(&law.c, &par, &ch, seed, replicate, generation, prune_eps, cap,
                    &pruned, &capped)
    try:
        if rc != 0:
            raise MemoryError()
        out_wt = np.empty(ch.n, dtype=np.float64)
        out_wa = np.empty(ch.n, dtype=np.float64)
        out_cnt = np.empty(ch.n, dtype=np.int64)
        out_lab = np.empty(ch.n, dtype=np.uint64)
        for i in range(ch.n):
            out_wt[i] = ch.wt[i]
            out_wa[i] = ch.wa[i]
            out_cnt[i] = ch.cnt[i]
            out_lab[i] = ch.lab[i]
    finally:
        pop_free(&par)
        pop_free(&ch)
    return out_wt, out_wa, out_cnt, out_lab, pruned, bool(capped)


def simulate_batch(KernelLaw law, Py_ssize_t max_generation, uint64_t seed,
                   uint64_t rep_start, uint64_t rep_stop, double prune_eps,
                   Py_ssize_t cap, uint64_t root_label):
    """Simulate replicates ``rep_start <= r < rep_stop`` to generation M."""
    cdef Py_ssize_t R = <Py_ssize_t> (rep_stop - rep_start)
    cdef Py_ssize_t M = max_generation
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Wt_a = np.zeros((R, M + 1), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Wa_a = np.zeros((R, M + 1), dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ext_a = np.full(R, -1, dtype=np.int64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] cap_a = np.zeros(R, dtype=np.uint8)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pr_a = np.zeros(R, dtype=np.float64)
    cdef double[:, ::1] Wt = Wt_a
    cdef double[:, ::1] Wa = Wa_a
    cdef int64_t[::1] ext = ext_a
    cdef uint8_t[::1] capv = cap_a
    cdef double[::1] prv = pr_a
    cdef PopC par, ch, tmp
    cdef Py_ssize_t r, g
    cdef double pruned, a, b
    cdef int capped, rc = 0
    par.wt = NULL; par.wa = NULL; par.cnt = NULL; par.lab = NULL; par.n = 0; par.cap = 0
    ch.wt = NULL; ch.wa = NULL; ch.cnt = NULL; ch.lab = NULL; ch.n = 0; ch.cap = 0
    with nogil:
        for r in range(R):
            par.n = 0
            if pop_push(&par, 1.0, 1.0, 1, root_label) != 0:
                rc = -1
                break
            pruned = 0.0
            capped = 0
            for g in range(M + 1):
                if par.n == 0:
                    ext[r] = g
                    break
                pop_totals(&par, &a, &b)
                Wt[r, g] = a
                Wa[r, g] = b
                if g == M:
                    break
                rc = step_c(&law.c, &par, &ch, seed, rep_start + r, g, prune_eps, cap,
                            &pruned, &capped)
                if rc != 0:
                    break
                tmp = par
                par = ch
                ch = tmp
            if rc != 0:
                break
            capv[r] = capped
            prv[r] = pruned
    pop_free(&par)
    pop_free(&ch)
    if rc != 0:
        raise MemoryError("population buffer allocation failed")
    return Wt_a, Wa_a, ext_a, cap_a.astype(bool), pr_a
