# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Same algorithms and summation order as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, tanh, log1p, fabs, sqrt, NAN

cnp.import_array()

PICARD = 0
BRENT = 1
cdef double EPS = 2.220446049250313e-16
cdef double EPS_SING = 1e-8


cdef inline double _sigma(int code, double z) nogil:
    cdef double e
    if code == 0:
        return z
    if code == 1:
        if z >= 0.0:
            return 1.0 / (1.0 + exp(-z))
        e = exp(z)
        return e / (1.0 + e)
    if code == 2:
        return tanh(z)
    return (z if z > 0.0 else 0.0) + log1p(exp(-fabs(z)))


cdef inline double _dsigma(int code, double z) nogil:
    cdef double s, t
    if code == 0:
        return 1.0
    if code == 1:
        s = _sigma(1, z)
        return s * (1.0 - s)
    if code == 2:
        t = tanh(z)
        return 1.0 - t * t
    return _sigma(1, z)


cdef int _picard(int code, double a, double t2, double y0, double tol,
                 long max_iter, double* out, long* iters) nogil:
    cdef double y = y0, yn
    cdef long k
    for k in range(1, max_iter + 1):
        yn = _sigma(code, a + t2 * y)
        if fabs(yn - y) <= tol:
            out[0] = yn
            iters[0] = k
            return 0
        y = yn
    out[0] = y
    iters[0] = max_iter
    return 1


cdef int _brent(int code, double a, double t2, double lo, double hi, double tol,
                long max_iter, double* out, long* iters) nogil:
    cdef double xa = lo, xb = hi, xc, fa, fb, fc, d, e, tol1, xm, s, p, q, r, tmp, lim
    cdef long it
    fa = xa - _sigma(code, a + t2 * xa)
    fb = xb - _sigma(code, a + t2 * xb)
    iters[0] = 0
    if fa == 0.0:
        out[0] = xa
        return 0
    if fb == 0.0:
        out[0] = xb
        return 0
    if (fa > 0.0) == (fb > 0.0):
        out[0] = xb
        return 2
    xc = xa
    fc = fa
    d = xb - xa
    e = d
    for it in range(1, max_iter + 1):
        if (fb > 0.0) == (fc > 0.0):
            xc = xa
            fc = fa
            d = xb - xa
            e = d
        if fabs(fc) < fabs(fb):
            tmp = xb
            xa = xb
            xb = xc
            xc = tmp
            tmp = fb
            fa = fb
            fb = fc
            fc = tmp
        tol1 = 2.0 * EPS * fabs(xb) + 1e-300
        xm = 0.5 * (xc - xb)
        if fabs(fb) <= tol or fabs(xm) <= tol1:
            out[0] = xb
            iters[0] = it
            return 0
        if fabs(e) >= tol1 and fabs(fa) > fabs(fb):
            s = fb / fa
            if xa == xc:
                p = 2.0 * xm * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * xm * q * (q - r) - (xb - xa) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0.0:
                q = -q
            p = fabs(p)
            lim = 3.0 * xm * q - fabs(tol1 * q)
            if fabs(e * q) < lim:
                lim = fabs(e * q)
            if 2.0 * p < lim:
                e = d
                d = p / q
            else:
                d = xm
                e = d
        else:
            d = xm
            e = d
        xa = xb
        fa = fb
        if fabs(d) > tol1:
            xb += d
        else:
            xb += tol1 if xm > 0.0 else -tol1
        fb = xb - _sigma(code, a + t2 * xb)
    out[0] = xb
    iters[0] = max_iter
    return 1


cdef inline double _scaled_norm_row(const double[:, ::1] xs, Py_ssize_t i) noexcept nogil:
    cdef Py_ssize_t j, n = xs.shape[1]
    cdef double m = 0.0, s = 0.0, t
    for j in range(n):
        if fabs(xs[i, j]) > m:
            m = fabs(xs[i, j])
    if m == 0.0:
        return 0.0
    for j in range(n):
        t = xs[i, j] / m
        s += t * t
    return m * sqrt(s)


cdef inline double _scaled_norm_vec(const double[::1] v) noexcept nogil:
    cdef Py_ssize_t j, n = v.shape[0]
    cdef double m = 0.0, s = 0.0, t
    for j in range(n):
        if fabs(v[j]) > m:
            m = fabs(v[j])
    if m == 0.0:
        return 0.0
    for j in range(n):
        t = v[j] / m
        s += t * t
    return m * sqrt(s)


def sigma(int code, double z):
    return _sigma(code, z)


def dsigma(int code, double z):
    return _dsigma(code, z)


def picard(int code, double a, double t2, double y0, double tol, long max_iter):
    cdef double y
    cdef long k
    cdef int st = _picard(code, a, t2, y0, tol, max_iter, &y, &k)
    return y, k, st


def brent(int code, double a, double t2, double lo, double hi, double tol, long max_iter):
    cdef double y
    cdef long k
    cdef int st = _brent(code, a, t2, lo, hi, tol, max_iter, &y, &k)
    return y, k, st


def solve_batch(int code, theta1, double theta2, X, int method, double tol, long max_iter):
    cdef const double[::1] t1 = np.ascontiguousarray(theta1, dtype=np.float64)
    cdef const double[:, ::1] xs = np.ascontiguousarray(X, dtype=np.float64)
    cdef Py_ssize_t n = xs.shape[0], dim = xs.shape[1], i, j
    y_arr = np.empty(n, dtype=np.float64)
    it_arr = np.zeros(n, dtype=np.int64)
    st_arr = np.zeros(n, dtype=np.int8)
    cdef double[::1] y = y_arr
    cdef long long[::1] iters = it_arr
    cdef signed char[::1] status = st_arr
    cdef double lip = 0.25 if code == 1 else 1.0
    cdef double s0 = fabs(_sigma(code, 0.0))
    cdef double norm_t1, denom, a, bound, yi
    cdef long k
    norm_t1 = _scaled_norm_vec(t1)
    denom = 1.0 - lip * fabs(theta2)
    with nogil:
        for i in range(n):
            a = 0.0
            for j in range(dim):
                a += t1[j] * xs[i, j]
            if method == 0:
                status[i] = _picard(code, a, theta2, _sigma(code, a), tol, max_iter, &yi, &k)
            else:
                bound = 1.01 * (s0 + lip * norm_t1 * _scaled_norm_row(xs, i)) / denom
                status[i] = _brent(code, a, theta2, -bound, bound, tol, max_iter, &yi, &k)
            y[i] = yi
            iters[i] = k
    return y_arr, it_arr, st_arr


def risk_grad_batch(int code, theta1, double theta2, X, f, y):
    cdef const double[::1] t1 = np.ascontiguousarray(theta1, dtype=np.float64)
    cdef const double[:, ::1] xs = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[::1] fv = np.ascontiguousarray(f, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = xs.shape[0], dim = xs.shape[1], i, j
    grad_arr = np.zeros(dim + 1, dtype=np.float64)
    cdef double[::1] grad = grad_arr
    cdef double risk = 0.0, a, yi, e, s, den, c
    cdef Py_ssize_t bad = -1
    with nogil:
        for i in range(n):
            a = 0.0
            for j in range(dim):
                a += t1[j] * xs[i, j]
            yi = yv[i]
            e = yi - fv[i]
            s = _dsigma(code, a + theta2 * yi)
            den = 1.0 - theta2 * s
            if fabs(den) < EPS_SING:
                bad = i
                break
            c = 2.0 * e * s / den
            risk += e * e
            for j in range(dim):
                grad[j] += c * xs[i, j]
            grad[dim] += c * yi
    if bad >= 0:
        return NAN, np.full(dim + 1, np.nan), bad
    return risk / n, grad_arr / n, -1


cdef inline void _linear_grad(const double[:, ::1] S, const double[::1] xi, double* th,
                              Py_ssize_t d, double* phi, double* out) noexcept nogil:
    cdef double a = 1.0 - th[d], s, dot = 0.0
    cdef Py_ssize_t i, j
    for j in range(d):
        phi[j] = th[j] / a
    for i in range(d):
        s = 0.0
        for j in range(d):
            s += S[i, j] * (phi[j] - xi[j])
        out[i] = 2.0 * s / a
        dot += phi[i] * s
    out[d] = 2.0 * dot / a


def linear_rk4(S, xi, theta0, double h, long n_steps, long record_every, double grad_tol, double guard):
    cdef const double[:, ::1] Sv = np.ascontiguousarray(S, dtype=np.float64)
    cdef const double[::1] xv = np.ascontiguousarray(xi, dtype=np.float64)
    cdef Py_ssize_t d = xv.shape[0], m = d + 1, j
    cdef double[::1] th = np.array(theta0, dtype=np.float64)
    cdef double[::1] comp = np.zeros(m)
    cdef double[::1] k1 = np.zeros(m)
    cdef double[::1] k2 = np.zeros(m)
    cdef double[::1] k3 = np.zeros(m)
    cdef double[::1] k4 = np.zeros(m)
    cdef double[::1] tmp = np.zeros(m)
    cdef double[::1] phi = np.zeros(m)
    cdef long max_rec = n_steps // record_every + 2, nrec = 0, k
    rec_steps = np.zeros(max_rec, dtype=np.int64)
    rec_rows = np.zeros((max_rec, m), dtype=np.float64)
    cdef long long[::1] rs = rec_steps
    cdef double[:, ::1] rr = rec_rows
    cdef int status = 0, bad, stage
    cdef double gn, gtol2 = grad_tol * grad_tol, inc, y, t, c
    cdef bint done
    cdef double* kin
    cdef double* kout
    with nogil:
        for k in range(n_steps + 1):
            if fabs(1.0 - th[d]) < guard:
                status = 1
                break
            _linear_grad(Sv, xv, &th[0], d, &phi[0], &k1[0])
            gn = 0.0
            for j in range(m):
                gn += k1[j] * k1[j]
            done = k == n_steps or (grad_tol > 0.0 and gn < gtol2)
            if k % record_every == 0 or done:
                rs[nrec] = k
                for j in range(m):
                    rr[nrec, j] = th[j]
                nrec += 1
            if done:
                break
            bad = 0
            for stage in range(3):
                if stage == 0:
                    kin = &k1[0]
                    kout = &k2[0]
                    c = 0.5 * h
                elif stage == 1:
                    kin = &k2[0]
                    kout = &k3[0]
                    c = 0.5 * h
                else:
                    kin = &k3[0]
                    kout = &k4[0]
                    c = h
                for j in range(m):
                    tmp[j] = th[j] - c * kin[j]
                if fabs(1.0 - tmp[d]) < guard:
                    bad = 1
                    break
                _linear_grad(Sv, xv, &tmp[0], d, &phi[0], kout)
            if bad:
                status = 1
                break
            for j in range(m):
                inc = -(h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
                y = inc - comp[j]
                t = th[j] + y
                comp[j] = (t - th[j]) - y
                th[j] = t
    return rec_steps[:nrec].copy(), rec_rows[:nrec].copy(), status
