"""Pure-Python kernels. Reference twin of ``_kernels.pyx``; keep the two in lockstep.

Activation codes: 0 linear, 1 sigmoid, 2 tanh, 3 softplus.
Solver status codes: 0 ok, 1 iteration cap reached, 2 bracket has no sign change.
"""

import math

import numpy as np

PICARD = 0
BRENT = 1
EPS = 2.220446049250313e-16
EPS_SING = 1e-8


def sigma(code, z):
    if code == 0:
        return z
    if code == 1:
        if z >= 0.0:
            return 1.0 / (1.0 + math.exp(-z))
        e = math.exp(z)
        return e / (1.0 + e)
    if code == 2:
        return math.tanh(z)
    return max(z, 0.0) + math.log1p(math.exp(-abs(z)))


def dsigma(code, z):
    if code == 0:
        return 1.0
    if code == 1:
        s = sigma(1, z)
        return s * (1.0 - s)
    if code == 2:
        t = math.tanh(z)
        return 1.0 - t * t
    return sigma(1, z)


def _scaled_norm(v):
    m = 0.0
    for t in v:
        if abs(t) > m:
            m = abs(t)
    if m == 0.0:
        return 0.0
    s = 0.0
    for t in v:
        s += (t / m) * (t / m)
    return m * math.sqrt(s)


def picard(code, a, t2, y0, tol, max_iter):
    """Iterate ``y <- sigma(a + t2*y)`` until successive iterates differ by <= tol."""
    y = y0
    for k in range(1, max_iter + 1):
        yn = sigma(code, a + t2 * y)
        if abs(yn - y) <= tol:
            return yn, k, 0
        y = yn
    return y, max_iter, 1


def brent(code, a, t2, lo, hi, tol, max_iter):
    """Brent's method on ``h(y) = y - sigma(a + t2*y)`` over ``[lo, hi]``."""
    xa, xb = lo, hi
    fa = xa - sigma(code, a + t2 * xa)
    fb = xb - sigma(code, a + t2 * xb)
    if fa == 0.0:
        return xa, 0, 0
    if fb == 0.0:
        return xb, 0, 0
    if (fa > 0.0) == (fb > 0.0):
        return xb, 0, 2
    xc, fc = xa, fa
    d = e = xb - xa
    for it in range(1, max_iter + 1):
        if (fb > 0.0) == (fc > 0.0):
            xc, fc = xa, fa
            d = e = xb - xa
        if abs(fc) < abs(fb):
            xa, xb, xc = xb, xc, xb
            fa, fb, fc = fb, fc, fb
        tol1 = 2.0 * EPS * abs(xb) + 1e-300
        xm = 0.5 * (xc - xb)
        if abs(fb) <= tol or abs(xm) <= tol1:
            return xb, it, 0
        if abs(e) >= tol1 and abs(fa) > abs(fb):
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
            p = abs(p)
            if 2.0 * p < min(3.0 * xm * q - abs(tol1 * q), abs(e * q)):
                e = d
                d = p / q
            else:
                d = xm
                e = d
        else:
            d = xm
            e = d
        xa, fa = xb, fb
        if abs(d) > tol1:
            xb += d
        else:
            xb += tol1 if xm > 0.0 else -tol1
        fb = xb - sigma(code, a + t2 * xb)
    return xb, max_iter, 1


def solve_batch(code, theta1, theta2, X, method, tol, max_iter):
    """Equilibria for every row of ``X``. Returns ``(y, iterations, status)`` arrays."""
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    theta1 = np.asarray(theta1, dtype=float).tolist()
    rows = X.tolist()
    theta2 = float(theta2)
    y = np.empty(n)
    iters = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int8)
    lip = 0.25 if code == 1 else 1.0
    s0 = abs(sigma(code, 0.0))
    norm_t1 = _scaled_norm(theta1)
    denom = 1.0 - lip * abs(theta2)
    for i in range(n):
        row = rows[i]
        a = 0.0
        for j in range(d):
            a += theta1[j] * row[j]
        if method == PICARD:
            yi, k, st = picard(code, a, theta2, sigma(code, a), tol, max_iter)
        else:
            bound = 1.01 * (s0 + lip * norm_t1 * _scaled_norm(row)) / denom
            yi, k, st = brent(code, a, theta2, -bound, bound, tol, max_iter)
        y[i] = yi
        iters[i] = k
        status[i] = st
    return y, iters, status


def risk_grad_batch(code, theta1, theta2, X, f, y):
    """Mean squared residual and its IFT gradient, summed in sample order.

    Returns ``(risk, grad, bad)`` where ``bad`` is the first sample index whose
    IFT denominator ``1 - theta2*sigma'(omega)`` fell below ``EPS_SING`` (else -1).
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    theta1 = np.asarray(theta1, dtype=float).tolist()
    rows = X.tolist()
    f = np.asarray(f, dtype=float).tolist()
    y = np.asarray(y, dtype=float).tolist()
    theta2 = float(theta2)
    grad = [0.0] * (d + 1)
    risk = 0.0
    for i in range(n):
        row = rows[i]
        a = 0.0
        for j in range(d):
            a += theta1[j] * row[j]
        yi = y[i]
        e = yi - f[i]
        s = dsigma(code, a + theta2 * yi)
        den = 1.0 - theta2 * s
        if abs(den) < EPS_SING:
            return math.nan, np.full(d + 1, math.nan), i
        c = 2.0 * e * s / den
        risk += e * e
        for j in range(d):
            grad[j] += c * row[j]
        grad[d] += c * yi
    return risk / n, np.array(grad) / n, -1


def _linear_grad(S, xi, th, d, out):
    a = 1.0 - th[d]
    phi = [th[j] / a for j in range(d)]
    v = [phi[j] - xi[j] for j in range(d)]
    dot = 0.0
    for i in range(d):
        s = 0.0
        for j in range(d):
            s += S[i][j] * v[j]
        out[i] = 2.0 * s / a
        dot += phi[i] * s
    out[d] = 2.0 * dot / a


def linear_rk4(S, xi, theta0, h, n_steps, record_every, grad_tol, guard):
    """RK4 for the linear-DEQ population flow with compensated state updates.

    Records the state at every ``record_every``-th step and at the last one.
    Stops early once ``|grad| < grad_tol`` (when ``grad_tol > 0``). Returns
    ``(steps, thetas, status)`` with status 0 ok, 1 singularity guard tripped.
    """
    S = np.asarray(S, dtype=float).tolist()
    xi = np.asarray(xi, dtype=float).tolist()
    th = np.asarray(theta0, dtype=float).tolist()
    d = len(xi)
    m = d + 1
    comp = [0.0] * m
    k1, k2, k3, k4 = ([0.0] * m for _ in range(4))
    tmp = [0.0] * m
    steps, rows = [], []
    status = 0
    gtol2 = grad_tol * grad_tol
    for k in range(n_steps + 1):
        if abs(1.0 - th[d]) < guard:
            status = 1
            break
        _linear_grad(S, xi, th, d, k1)
        gn = 0.0
        for j in range(m):
            gn += k1[j] * k1[j]
        done = k == n_steps or (grad_tol > 0.0 and gn < gtol2)
        if k % record_every == 0 or done:
            steps.append(k)
            rows.append(list(th))
        if done:
            break
        bad = False
        for kin, kout, c in ((k1, k2, 0.5 * h), (k2, k3, 0.5 * h), (k3, k4, h)):
            for j in range(m):
                tmp[j] = th[j] - c * kin[j]
            if abs(1.0 - tmp[d]) < guard:
                bad = True
                break
            _linear_grad(S, xi, tmp, d, kout)
        if bad:
            status = 1
            break
        for j in range(m):
            inc = -(h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            y = inc - comp[j]
            t = th[j] + y
            comp[j] = (t - th[j]) - y
            th[j] = t
    return np.array(steps, dtype=np.int64), np.array(rows, dtype=float).reshape(-1, m), status
