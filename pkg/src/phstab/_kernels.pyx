# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled propagator sweep.

For each t the fundamental matrix at b is the ordered product of matrix
exponentials exp(L_j (B + i t A_j)) over the pieces.  Matrices are kept in
column-major scratch buffers so they can be handed to LAPACK directly.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport ceil, log2, sqrt, fabs, isfinite
from libc.stdlib cimport malloc, free
from libc.string cimport memcpy, memset
from scipy.linalg.cython_lapack cimport zgesv, zheev

cnp.import_array()

ctypedef double complex cplx

cdef double THETA3 = 1.495585217958292e-2
cdef double THETA5 = 2.539398330063230e-1
cdef double THETA7 = 9.504178996162932e-1
cdef double THETA9 = 2.097847961257068e0
cdef double THETA13 = 5.371920351148152e0

cdef double B3[4]
cdef double B5[6]
cdef double B7[8]
cdef double B9[10]
cdef double B13[14]
B3[:] = [120.0, 60.0, 12.0, 1.0]
B5[:] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0]
B7[:] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0]
B9[:] = [17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
         2162160.0, 110880.0, 3960.0, 90.0, 1.0]
B13[:] = [64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
          1187353796428800.0, 129060195264000.0, 10559470521600.0, 670442572800.0,
          33522128640.0, 1323241920.0, 40840800.0, 960960.0, 16380.0, 182.0, 1.0]


cdef inline void matmul(const cplx* a, const cplx* b, cplx* out, int d) noexcept nogil:
    # column-major: out[i + j d] = sum_k a[i + k d] b[k + j d]
    cdef int i, j, k
    cdef cplx bkj
    memset(out, 0, d * d * sizeof(cplx))
    for j in range(d):
        for k in range(d):
            bkj = b[k + j * d]
            for i in range(d):
                out[i + j * d] += a[i + k * d] * bkj


cdef inline double norm1(const cplx* a, int d) noexcept nogil:
    cdef int i, j
    cdef double s, best = 0.0
    cdef cplx z
    for j in range(d):
        s = 0.0
        for i in range(d):
            z = a[i + j * d]
            s += sqrt(z.real * z.real + z.imag * z.imag)
        if s > best:
            best = s
    return best


cdef struct Work:
    int d
    cplx* a2
    cplx* a4
    cplx* a6
    cplx* u
    cplx* v
    cplx* tmp
    cplx* tmp2
    cplx* svd_a
    cplx* zwork
    double* rwork
    double* sv
    int* ipiv
    int lwork


cdef int work_init(Work* w, int d) noexcept nogil:
    cdef int n = d * d
    w.d = d
    w.lwork = 8 * d + 64
    w.a2 = <cplx*> malloc(n * sizeof(cplx))
    w.a4 = <cplx*> malloc(n * sizeof(cplx))
    w.a6 = <cplx*> malloc(n * sizeof(cplx))
    w.u = <cplx*> malloc(n * sizeof(cplx))
    w.v = <cplx*> malloc(n * sizeof(cplx))
    w.tmp = <cplx*> malloc(n * sizeof(cplx))
    w.tmp2 = <cplx*> malloc(n * sizeof(cplx))
    w.svd_a = <cplx*> malloc(n * sizeof(cplx))
    w.zwork = <cplx*> malloc(w.lwork * sizeof(cplx))
    w.rwork = <double*> malloc(5 * d * sizeof(double))
    w.sv = <double*> malloc(d * sizeof(double))
    w.ipiv = <int*> malloc(d * sizeof(int))
    if (w.a2 == NULL or w.a4 == NULL or w.a6 == NULL or w.u == NULL or w.v == NULL
            or w.tmp == NULL or w.tmp2 == NULL or w.svd_a == NULL or w.zwork == NULL
            or w.rwork == NULL or w.sv == NULL or w.ipiv == NULL):
        return -1
    return 0


cdef void work_free(Work* w) noexcept nogil:
    free(w.a2); free(w.a4); free(w.a6); free(w.u); free(w.v)
    free(w.tmp); free(w.tmp2); free(w.svd_a); free(w.zwork)
    free(w.rwork); free(w.sv); free(w.ipiv)


cdef double norm2(const cplx* a, Work* w) noexcept nogil:
    """Spectral norm as sqrt(lambda_max(a^H a)); negative on failure."""
    cdef int d = w.d, info = 0, i, j, k
    cdef char jobn = b'N'
    cdef char upl = b'U'
    cdef cplx s
    for i in range(d * d):
        if not (isfinite(a[i].real) and isfinite(a[i].imag)):
            return -2.0
    if d == 1:
        return sqrt(a[0].real * a[0].real + a[0].imag * a[0].imag)
    # upper triangle of the Gram matrix, column-major
    for j in range(d):
        for i in range(j + 1):
            s = 0.0
            for k in range(d):
                s += a[k + i * d].conjugate() * a[k + j * d]
            w.svd_a[i + j * d] = s
    zheev(&jobn, &upl, &d, w.svd_a, &d, w.sv, w.zwork, &w.lwork, w.rwork, &info)
    if info != 0:
        return -1.0
    return sqrt(w.sv[d - 1]) if w.sv[d - 1] > 0 else 0.0


cdef int expm(cplx* a, cplx* out, Work* w) noexcept nogil:
    """out = exp(a); a is overwritten (scaled).  Returns 0 on success."""
    cdef int d = w.d, n = d * d, i, k, s = 0, m, info = 0
    cdef double nrm = norm1(a, d), scale
    cdef const double* b
    cdef cplx* src
    if not isfinite(nrm):
        return -2
    if nrm <= THETA3:
        m = 3; b = B3
    elif nrm <= THETA5:
        m = 5; b = B5
    elif nrm <= THETA7:
        m = 7; b = B7
    elif nrm <= THETA9:
        m = 9; b = B9
    else:
        m = 13; b = B13
        if nrm > THETA13:
            s = <int> ceil(log2(nrm / THETA13))
            scale = 1.0
            for i in range(s):
                scale *= 0.5
            for i in range(n):
                a[i] = a[i] * scale

    matmul(a, a, w.a2, d)
    if m == 13:
        matmul(w.a2, w.a2, w.a4, d)
        matmul(w.a2, w.a4, w.a6, d)
        for i in range(n):
            w.tmp[i] = b[13] * w.a6[i] + b[11] * w.a4[i] + b[9] * w.a2[i]
            w.tmp2[i] = b[12] * w.a6[i] + b[10] * w.a4[i] + b[8] * w.a2[i]
        matmul(w.a6, w.tmp, w.u, d)
        matmul(w.a6, w.tmp2, w.v, d)
        for i in range(n):
            w.tmp[i] = w.u[i] + b[7] * w.a6[i] + b[5] * w.a4[i] + b[3] * w.a2[i]
            w.v[i] = w.v[i] + b[6] * w.a6[i] + b[4] * w.a4[i] + b[2] * w.a2[i]
        for i in range(d):
            w.tmp[i + i * d] += b[1]
            w.v[i + i * d] += b[0]
        matmul(a, w.tmp, w.u, d)
    else:
        # even powers accumulate in a4 (current power), odd/even sums in tmp / v
        for i in range(n):
            w.tmp[i] = b[3] * w.a2[i]
            w.v[i] = b[2] * w.a2[i]
            w.a4[i] = w.a2[i]
        for i in range(d):
            w.tmp[i + i * d] += b[1]
            w.v[i + i * d] += b[0]
        k = 2
        while 2 * k < m + 1:
            matmul(w.a4, w.a2, w.a6, d)
            memcpy(w.a4, w.a6, n * sizeof(cplx))
            for i in range(n):
                w.tmp[i] += b[2 * k + 1] * w.a4[i]
                w.v[i] += b[2 * k] * w.a4[i]
            k += 1
        matmul(a, w.tmp, w.u, d)

    # solve (V - U) X = (V + U)
    for i in range(n):
        w.tmp[i] = w.v[i] - w.u[i]
        out[i] = w.v[i] + w.u[i]
    zgesv(&d, &d, w.tmp, &d, w.ipiv, out, &d, &info)
    if info != 0:
        return -3
    for k in range(s):
        matmul(out, out, w.tmp, d)
        memcpy(out, w.tmp, n * sizeof(cplx))
    for i in range(n):
        if not (isfinite(out[i].real) and isfinite(out[i].imag)):
            return -2
    return 0


def sweep(double[:, :, ::1] a_mats, double[:, ::1] b_mat, double[::1] lengths,
          double[::1] ts, int n_interior=8, bint want_sup=True):
    """Phi_t(b) for every t, and (optionally) the sup of ||Phi_t(x)||_2 over
    breakpoints plus ``n_interior`` equispaced interior points per piece.

    a_mats[j] = -P1^{-1} H_j^{-1}, b_mat = -P1^{-1} P0.
    Returns (phi (T, d, d) complex, sup_norm (T,) float; NaN if not requested).
    """
    cdef int n_pieces = a_mats.shape[0], d = a_mats.shape[1], n = d * d
    cdef Py_ssize_t n_t = ts.shape[0]
    cdef Py_ssize_t ti
    cdef int j, i, r, c, sub, status = 0
    cdef int n_sub = n_interior + 1 if want_sup else 1
    cdef double t, h, nrm, best
    cdef Work w
    cdef cplx* gen
    cdef cplx* step
    cdef cplx* phi
    cdef cplx* nxt

    out_phi = np.empty((n_t, d, d), dtype=np.complex128)
    out_sup = np.full(n_t, np.nan)
    cdef cplx[:, :, ::1] phi_view = out_phi
    cdef double[::1] sup_view = out_sup

    cdef int winit = work_init(&w, d)
    gen = <cplx*> malloc(n * sizeof(cplx))
    step = <cplx*> malloc(n * sizeof(cplx))
    phi = <cplx*> malloc(n * sizeof(cplx))
    nxt = <cplx*> malloc(n * sizeof(cplx))
    if gen == NULL or step == NULL or phi == NULL or nxt == NULL or winit != 0:
        free(gen); free(step); free(phi); free(nxt); work_free(&w)
        raise MemoryError()

    with nogil:
        for ti in range(n_t):
            t = ts[ti]
            memset(phi, 0, n * sizeof(cplx))
            for i in range(d):
                phi[i + i * d] = 1.0
            best = 1.0
            for j in range(n_pieces):
                h = lengths[j] / n_sub
                for c in range(d):
                    for r in range(d):
                        gen[r + c * d] = h * (b_mat[r, c] + 1j * t * a_mats[j, r, c])
                status = expm(gen, step, &w)
                if status != 0:
                    break
                for sub in range(n_sub):
                    matmul(step, phi, nxt, d)
                    memcpy(phi, nxt, n * sizeof(cplx))
                    if want_sup:
                        nrm = norm2(phi, &w)
                        if nrm < 0:
                            status = -2 if nrm == -2.0 else -4
                            break
                        if nrm > best:
                            best = nrm
                if status != 0:
                    break
            if status != 0:
                break
            for c in range(d):
                for r in range(d):
                    phi_view[ti, r, c] = phi[r + c * d]
                    if not (isfinite(phi[r + c * d].real) and isfinite(phi[r + c * d].imag)):
                        status = -2
            if status != 0:
                break
            if want_sup:
                sup_view[ti] = best

    free(gen); free(step); free(phi); free(nxt)
    work_free(&w)
    if status == -2:
        from .errors import Overflow
        raise Overflow("matrix exponential overflowed in the propagator sweep")
    if status != 0:
        raise ArithmeticError(f"LAPACK failure in propagator sweep (status {status})")
    return out_phi, out_sup
