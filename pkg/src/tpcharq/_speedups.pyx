# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled decoding kernels; semantics match tpcharq._kernels_py."""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()

ctypedef cnp.uint8_t u8
ctypedef cnp.int64_t i64
ctypedef cnp.float64_t f64


cdef inline bint _row_ok(u8* row, Py_ssize_t n, i64* synd_col) noexcept:
    cdef i64 s = 0
    cdef int par = 0
    cdef Py_ssize_t j
    for j in range(n):
        if row[j]:
            s ^= synd_col[j]
            par ^= 1
    return s == 0 and par == 0


cdef bint _matrix_valid(u8[:, ::1] bits, i64[::1] synd_col) noexcept:
    cdef Py_ssize_t n = bits.shape[0]
    cdef Py_ssize_t r, c
    cdef i64 s
    cdef int par
    for r in range(n):
        if not _row_ok(&bits[r, 0], n, &synd_col[0]):
            return False
    for c in range(n):
        s = 0
        par = 0
        for r in range(n):
            if bits[r, c]:
                s ^= synd_col[r]
                par ^= 1
        if s != 0 or par != 0:
            return False
    return True


def matrix_valid(bits, synd_col):
    cdef u8[:, ::1] b = np.ascontiguousarray(bits, dtype=np.uint8)
    cdef i64[::1] sc = np.ascontiguousarray(synd_col, dtype=np.int64)
    return bool(_matrix_valid(b, sc))


cdef void _hdd_rows_inplace(u8[:, ::1] bits, i64[::1] synd_col,
                            i64[::1] pos_of_synd) noexcept:
    cdef Py_ssize_t nrows = bits.shape[0]
    cdef Py_ssize_t n = bits.shape[1]
    cdef Py_ssize_t r, j
    cdef i64 s
    cdef int par
    for r in range(nrows):
        s = 0
        par = 0
        for j in range(n):
            if bits[r, j]:
                s ^= synd_col[j]
                par ^= 1
        if par == 1:
            if s == 0:
                bits[r, n - 1] ^= 1
            else:
                bits[r, pos_of_synd[s]] ^= 1
        # s != 0 and par == 0: detected uncorrectable, leave unchanged


def hiho_decode_matrix(bits, synd_col, pos_of_synd, int max_half_iters):
    d_arr = np.array(bits, dtype=np.uint8, copy=True, order="C")
    cdef u8[:, ::1] d = d_arr
    cdef i64[::1] sc = np.ascontiguousarray(synd_col, dtype=np.int64)
    cdef i64[::1] pos = np.ascontiguousarray(pos_of_synd, dtype=np.int64)
    cdef int half_used = 0
    cdef bint converged = False
    cdef int h
    dt_arr = np.empty_like(d_arr)
    cdef u8[:, ::1] dt = dt_arr
    for h in range(max_half_iters):
        if _matrix_valid(d, sc):
            converged = True
            break
        if h % 2 == 0:
            _hdd_rows_inplace(d, sc, pos)
        else:
            dt_arr[...] = d_arr.T
            _hdd_rows_inplace(dt, sc, pos)
            d_arr[...] = dt_arr.T
        half_used += 1
    if not converged:
        converged = _matrix_valid(d, sc)
    return d_arr, half_used, bool(converged)


cdef void _chase_rows_core(f64[:, ::1] r_in, i64[::1] synd_col,
                           i64[::1] pos_of_synd, int p, double beta,
                           u8[:, ::1] dec, f64[:, ::1] w, u8[::1] ok,
                           u8[:, ::1] cand, f64[::1] corr, u8[::1] valid,
                           f64[::1] rel, Py_ssize_t[::1] lr_pos) noexcept:
    cdef Py_ssize_t B = r_in.shape[0]
    cdef Py_ssize_t n = r_in.shape[1]
    cdef int T = 1 << p
    cdef Py_ssize_t r, j
    cdef int t, b, best_t
    cdef i64 s0, s
    cdef int par0, par
    cdef double v, best_corr, comp_corr, sym, x
    cdef Py_ssize_t mpos

    for r in range(B):
        # hard slice and p least reliable positions (ties -> lowest index)
        for j in range(n):
            x = r_in[r, j]
            rel[j] = -x if x < 0.0 else x
        for b in range(p):
            mpos = 0
            v = INFINITY
            for j in range(n):
                if rel[j] < v:
                    v = rel[j]
                    mpos = j
            lr_pos[b] = mpos
            rel[mpos] = INFINITY

        s0 = 0
        par0 = 0
        for j in range(n):
            if r_in[r, j] < 0.0:
                s0 ^= synd_col[j]
                par0 ^= 1

        for t in range(T):
            for j in range(n):
                cand[t, j] = 1 if r_in[r, j] < 0.0 else 0
            s = s0
            par = par0
            for b in range(p):
                if (t >> b) & 1:
                    j = lr_pos[b]
                    cand[t, j] ^= 1
                    s ^= synd_col[j]
                    par ^= 1
            if par == 1:
                if s == 0:
                    cand[t, n - 1] ^= 1
                else:
                    cand[t, pos_of_synd[s]] ^= 1
                valid[t] = 1
            else:
                valid[t] = 0 if s != 0 else 1
            v = 0.0
            for j in range(n):
                v += r_in[r, j] * (1.0 - 2.0 * cand[t, j])
            corr[t] = v

        best_t = -1
        best_corr = -INFINITY
        for t in range(T):
            if valid[t] and corr[t] > best_corr:
                best_corr = corr[t]
                best_t = t
        if best_t < 0:
            ok[r] = 0
            for j in range(n):
                dec[r, j] = 1 if r_in[r, j] < 0.0 else 0
                w[r, j] = 0.0
            continue
        ok[r] = 1
        for j in range(n):
            dec[r, j] = cand[best_t, j]

        for j in range(n):
            comp_corr = -INFINITY
            for t in range(T):
                if valid[t] and cand[t, j] != dec[r, j] and corr[t] > comp_corr:
                    comp_corr = corr[t]
            sym = 1.0 - 2.0 * dec[r, j]
            if comp_corr > -INFINITY:
                w[r, j] = 0.5 * (best_corr - comp_corr) * sym - r_in[r, j]
            else:
                w[r, j] = beta * sym


def chase_rows(r_in, synd_col, pos_of_synd, int p, double beta):
    r_arr = np.ascontiguousarray(r_in, dtype=np.float64)
    cdef f64[:, ::1] r = r_arr
    cdef i64[::1] sc = np.ascontiguousarray(synd_col, dtype=np.int64)
    cdef i64[::1] pos = np.ascontiguousarray(pos_of_synd, dtype=np.int64)
    cdef Py_ssize_t B = r.shape[0]
    cdef Py_ssize_t n = r.shape[1]
    cdef int T = 1 << p

    dec_arr = np.empty((B, n), dtype=np.uint8)
    w_arr = np.empty((B, n), dtype=np.float64)
    ok_arr = np.empty(B, dtype=np.uint8)
    cand_arr = np.empty((T, n), dtype=np.uint8)
    corr_arr = np.empty(T, dtype=np.float64)
    valid_arr = np.empty(T, dtype=np.uint8)
    rel_arr = np.empty(n, dtype=np.float64)
    lr_arr = np.empty(p, dtype=np.intp)

    _chase_rows_core(r, sc, pos, p, beta, dec_arr, w_arr, ok_arr,
                     cand_arr, corr_arr, valid_arr, rel_arr, lr_arr)
    return dec_arr, w_arr, ok_arr.astype(bool)


def chase_decode_matrix(r_ch, synd_col, pos_of_synd, int p,
                        int max_half_iters, alpha, beta):
    r_arr = np.ascontiguousarray(r_ch, dtype=np.float64)
    cdef f64[:, ::1] rc = r_arr
    cdef i64[::1] sc = np.ascontiguousarray(synd_col, dtype=np.int64)
    cdef i64[::1] pos = np.ascontiguousarray(pos_of_synd, dtype=np.int64)
    cdef f64[::1] al = np.ascontiguousarray(alpha, dtype=np.float64)
    cdef f64[::1] be = np.ascontiguousarray(beta, dtype=np.float64)
    cdef Py_ssize_t n = rc.shape[0]
    cdef int T = 1 << p

    d_arr = (r_arr < 0).astype(np.uint8)
    w_arr = np.zeros((n, n), dtype=np.float64)
    r_in_arr = np.empty((n, n), dtype=np.float64)
    buf_d = np.empty((n, n), dtype=np.uint8)
    buf_w = np.empty((n, n), dtype=np.float64)
    ok_arr = np.empty(n, dtype=np.uint8)
    cand_arr = np.empty((T, n), dtype=np.uint8)
    corr_arr = np.empty(T, dtype=np.float64)
    valid_arr = np.empty(T, dtype=np.uint8)
    rel_arr = np.empty(n, dtype=np.float64)
    lr_arr = np.empty(p, dtype=np.intp)

    cdef u8[:, ::1] d = d_arr
    cdef f64[:, ::1] w = w_arr
    cdef f64[:, ::1] r_in = r_in_arr
    cdef u8[:, ::1] bd = buf_d
    cdef f64[:, ::1] bw = buf_w

    cdef int half_used = 0
    cdef bint converged = False
    cdef int h
    cdef double a, b
    cdef Py_ssize_t na = al.shape[0]
    cdef Py_ssize_t nb = be.shape[0]

    for h in range(max_half_iters):
        if _matrix_valid(d, sc):
            converged = True
            break
        a = al[h if h < na else na - 1]
        b = be[h if h < nb else nb - 1]
        if h % 2 == 0:
            r_in_arr[...] = r_arr + a * w_arr
            _chase_rows_core(r_in, sc, pos, p, b, d, w, ok_arr,
                             cand_arr, corr_arr, valid_arr, rel_arr, lr_arr)
        else:
            r_in_arr[...] = (r_arr + a * w_arr).T
            _chase_rows_core(r_in, sc, pos, p, b, bd, bw, ok_arr,
                             cand_arr, corr_arr, valid_arr, rel_arr, lr_arr)
            d_arr[...] = buf_d.T
            w_arr[...] = buf_w.T
        half_used += 1
    if not converged:
        converged = _matrix_valid(d, sc)
    return d_arr, half_used, bool(converged)
