/*
 * Counter-based random streams for the branching random walk kernels.
 *
 * One stream per (seed, replicate, generation, particle label).  The block
 * function is Philox4x64-10 and the buffering mirrors numpy.random.Philox
 * exactly, so a stream here and numpy.random.Generator(Philox(key=...,
 * counter=...)) yield the same variates through numpy's C distributions.
 */
#ifndef BRWSTABLE_BRWCORE_H
#define BRWSTABLE_BRWCORE_H

#include <stdint.h>
#include <string.h>
#include "numpy/random/bitgen.h"
#include "numpy/random/distributions.h"

#define BRW_PHILOX_M0 0xD2E7470EE14C6C93ULL
#define BRW_PHILOX_M1 0xCA5A826395121157ULL
#define BRW_PHILOX_W0 0x9E3779B97F4A7C15ULL
#define BRW_PHILOX_W1 0xBB67AE8584CAA73BULL

typedef struct {
    uint64_t ctr[4];
    uint64_t key[2];
    uint64_t buffer[4];
    int buffer_pos;
    int has_uint32;
    uint32_t uinteger;
} brw_philox_t;

typedef struct {
    brw_philox_t ph;
    bitgen_t bitgen;
    binomial_t binom;
} brw_stream_t;

static inline uint64_t brw_mulhilo(uint64_t a, uint64_t b, uint64_t *hi) {
    __uint128_t p = (__uint128_t)a * (__uint128_t)b;
    *hi = (uint64_t)(p >> 64);
    return (uint64_t)p;
}

static inline void brw_philox_block(const uint64_t *ctr_in, const uint64_t *key_in,
                                    uint64_t *out) {
    uint64_t c0 = ctr_in[0], c1 = ctr_in[1], c2 = ctr_in[2], c3 = ctr_in[3];
    uint64_t k0 = key_in[0], k1 = key_in[1];
    int r;
    for (r = 0; r < 10; r++) {
        uint64_t hi0, hi1, lo0, lo1;
        if (r > 0) {
            k0 += BRW_PHILOX_W0;
            k1 += BRW_PHILOX_W1;
        }
        lo0 = brw_mulhilo(BRW_PHILOX_M0, c0, &hi0);
        lo1 = brw_mulhilo(BRW_PHILOX_M1, c2, &hi1);
        c0 = hi1 ^ c1 ^ k0;
        c1 = lo1;
        c2 = hi0 ^ c3 ^ k1;
        c3 = lo0;
    }
    out[0] = c0;
    out[1] = c1;
    out[2] = c2;
    out[3] = c3;
}

static inline uint64_t brw_philox_next64(brw_philox_t *s) {
    int i;
    if (s->buffer_pos < 4) {
        return s->buffer[s->buffer_pos++];
    }
    for (i = 0; i < 4; i++) {
        s->ctr[i]++;
        if (s->ctr[i] != 0) break;
    }
    brw_philox_block(s->ctr, s->key, s->buffer);
    s->buffer_pos = 1;
    return s->buffer[0];
}

static uint64_t brw_next_uint64(void *st) {
    return brw_philox_next64((brw_philox_t *)st);
}

static uint32_t brw_next_uint32(void *st) {
    brw_philox_t *s = (brw_philox_t *)st;
    uint64_t next;
    if (s->has_uint32) {
        s->has_uint32 = 0;
        return s->uinteger;
    }
    next = brw_philox_next64(s);
    s->has_uint32 = 1;
    s->uinteger = (uint32_t)(next >> 32);
    return (uint32_t)(next & 0xffffffffULL);
}

static double brw_next_double(void *st) {
    return (brw_philox_next64((brw_philox_t *)st) >> 11) * (1.0 / 9007199254740992.0);
}

static inline void brw_stream_init(brw_stream_t *s, uint64_t seed, uint64_t replicate,
                                   uint64_t generation, uint64_t label) {
    s->ph.ctr[0] = 0;
    s->ph.ctr[1] = label;
    s->ph.ctr[2] = generation;
    s->ph.ctr[3] = 0;
    s->ph.key[0] = seed;
    s->ph.key[1] = replicate;
    s->ph.buffer_pos = 4;
    s->ph.has_uint32 = 0;
    s->ph.uinteger = 0;
    s->bitgen.state = &s->ph;
    s->bitgen.next_uint64 = brw_next_uint64;
    s->bitgen.next_uint32 = brw_next_uint32;
    s->bitgen.next_double = brw_next_double;
    s->bitgen.next_raw = brw_next_uint64;
    memset(&s->binom, 0, sizeof(binomial_t));
}

/* Ulam-Harris label of the j-th child, hashed to 64 bits (splitmix64 finalizer). */
static inline uint64_t brw_child_label(uint64_t parent, uint64_t j) {
    uint64_t z = parent + (j + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

#endif
