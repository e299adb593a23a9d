"""Pure numpy implementation of the per-cell solves (fallback for _ckernels).

Both backends implement the same algorithms:

closure_solve
    Root of ``h(x) = K + g+ softplus(-x) - g- softplus(x)`` where ``x`` is the
    logit of the volume fraction and ``K = g+ ln R+ + S+ - g- ln R- - S-``.
    ``h`` is the log-pressure difference ``ln p+ - ln p-``; it decreases with
    slope in ``[-max(g), -min(g)]`` so safeguarded Newton converges in a few
    iterations.

relax_solve
    Integrates ``dalpha/dt = alpha (1-alpha) (p+ - p-)`` over a pseudo-time
    ``h`` (physical dt already divided by eps^2 tau).  Each chunk is an
    extrapolated implicit Euler step (harmonic substep sequence 1..6,
    Aitken-Neville in the step size); every implicit Euler stage is a
    bracketed Newton solve.  The result is clipped to the interval between
    the start value and the equilibrium fraction, so the update is monotone.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

STATUS_OK = 0
STATUS_VANISHING = 1
STATUS_NOCONV = 2

# logit(1e-14), the search window for the volume fraction
XBOUND = 32.23619130191664
N_EXTRAP = 6
CHUNK_STIFFNESS = 0.25
STIFF_CUTOFF = 40.0
MAX_CHUNKS = 4096


def _softplus(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _sigmoid(x):
    # exact 0.5 at x == 0
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def closure_solve(R_plus, R_minus, S_plus, S_minus, gamma_plus, gamma_minus, maxiter=100):
    """Vectorized equilibrium volume fraction.  Returns (alpha, iters, status)."""
    Rp = np.ascontiguousarray(R_plus, dtype=float)
    Rm = np.ascontiguousarray(R_minus, dtype=float)
    n = Rp.shape[0]
    Sp = np.broadcast_to(np.asarray(S_plus, dtype=float), (n,))
    Sm = np.broadcast_to(np.asarray(S_minus, dtype=float), (n,))
    gp = float(gamma_plus)
    gm = float(gamma_minus)
    alpha = np.full(n, np.nan)
    iters = np.zeros(n, dtype=np.int64)
    status = np.full(n, STATUS_OK, dtype=np.int64)

    bad = ~((Rp > 0) & (Rm > 0))
    status[bad] = STATUS_VANISHING
    live = ~bad
    with np.errstate(divide="ignore", invalid="ignore"):
        lnRp = np.log(Rp)
        lnRm = np.log(Rm)
    K = gp * lnRp + Sp - gm * lnRm - Sm
    x = lnRp - lnRm
    lo = np.full(n, -XBOUND)
    hi = np.full(n, XBOUND)

    def h_of(xv):
        return K + gp * _softplus(-xv) - gm * _softplus(xv)

    h_lo = h_of(lo)
    h_hi = h_of(hi)
    outside = live & ~((h_lo > 0) & (h_hi < 0))
    status[outside] = STATUS_NOCONV
    live &= ~outside
    x = np.clip(x, -XBOUND, XBOUND)
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha0 = Rp / (Rp + Rm)

    done = ~live
    exact0 = np.zeros(n, dtype=bool)
    for it in range(maxiter):
        act = ~done
        if not act.any():
            break
        xa = x[act]
        h = h_of(xa) if act.all() else (K[act] + gp * _softplus(-xa) - gm * _softplus(xa))
        a = _sigmoid(xa)
        dh = -gp * (1.0 - a) - gm * a
        scale = np.abs(K[act]) + gp * _softplus(-xa) + gm * _softplus(xa) + 1.0
        conv = np.abs(h) <= 4e-16 * scale
        if it == 0:
            exact0[act] = h == 0.0
        lo_a = np.where(h > 0, xa, lo[act])
        hi_a = np.where(h < 0, xa, hi[act])
        step = -h / dh
        xn = xa + step
        out = ~((xn > lo_a) & (xn < hi_a))
        xn = np.where(out, 0.5 * (lo_a + hi_a), xn)
        small = np.abs(xn - xa) <= 1e-15 * (1.0 + np.abs(xa))
        finished = conv | small
        iters[act] = it + 1
        xn = np.where(conv, xa, xn)
        x[act] = xn
        lo[act] = lo_a
        hi[act] = hi_a
        idx = np.flatnonzero(act)
        done[idx[finished]] = True
    else:
        status[~done] = STATUS_NOCONV

    alpha[live] = _sigmoid(x[live])
    use0 = live & exact0
    alpha[use0] = alpha0[use0]
    return alpha, iters, status


def _pressures(a, A, B, gp, gm):
    return A * a ** (-gp), B * (1.0 - a) ** (-gm)


def _phi(a, A, B, gp, gm):
    pp, pm = _pressures(a, A, B, gp, gm)
    return a * (1.0 - a) * (pp - pm)


def _dphi(a, A, B, gp, gm):
    pp, pm = _pressures(a, A, B, gp, gm)
    return -pp * (a + (1.0 - a) * (gp - 1.0)) - pm * ((1.0 - a) + a * (gm - 1.0))


def _implicit_euler(c, astar, k, A, B, gp, gm, maxiter, status):
    """Solve a - c - k phi(a) = 0 inside [c, astar] for every entry."""
    lo = np.minimum(c, astar)
    hi = np.maximum(c, astar)
    a = c.copy()
    done = (lo == hi) | (k == 0)
    iters = 0
    for it in range(maxiter):
        act = ~done
        if not act.any():
            break
        iters = it + 1
        aa = a[act]
        kk = k[act]
        Aa, Ba = A[act], B[act]
        r = aa - c[act] - kk * _phi(aa, Aa, Ba, gp, gm)
        dr = 1.0 - kk * _dphi(aa, Aa, Ba, gp, gm)
        lo_a = np.where(r < 0, aa, lo[act])
        hi_a = np.where(r > 0, aa, hi[act])
        an = aa - r / dr
        out = ~((an >= lo_a) & (an <= hi_a))
        an = np.where(out, 0.5 * (lo_a + hi_a), an)
        fin = (r == 0) | (np.abs(an - aa) <= 1e-15 * aa) | (hi_a - lo_a <= 1e-15 * hi_a)
        an = np.where(r == 0, aa, an)
        a[act] = an
        lo[act] = lo_a
        hi[act] = hi_a
        idx = np.flatnonzero(act)
        done[idx[fin]] = True
    else:
        status[~done] = STATUS_NOCONV
    return np.clip(a, np.minimum(c, astar), np.maximum(c, astar)), iters


def relax_solve(R_plus, R_minus, S_plus, S_minus, alpha_old, alpha_star, h,
                gamma_plus, gamma_minus, maxiter=100):
    """Advance the relaxation ODE by pseudo-time h.  Returns (alpha, iters, status)."""
    Rp = np.ascontiguousarray(R_plus, dtype=float)
    n = Rp.shape[0]
    Rm = np.ascontiguousarray(R_minus, dtype=float)
    Sp = np.broadcast_to(np.asarray(S_plus, dtype=float), (n,))
    Sm = np.broadcast_to(np.asarray(S_minus, dtype=float), (n,))
    a0 = np.array(alpha_old, dtype=float)
    ast = np.asarray(alpha_star, dtype=float)
    gp = float(gamma_plus)
    gm = float(gamma_minus)
    status = np.zeros(n, dtype=np.int64)
    A = Rp ** gp * np.exp(Sp)
    B = Rm ** gm * np.exp(Sm)
    out = a0.copy()
    if h <= 0:
        return out, 0, status

    moving = a0 != ast
    pp0, pm0 = _pressures(a0, A, B, gp, gm)
    pps, pms = _pressures(ast, A, B, gp, gm)
    lam_lo = (np.minimum(pp0, pps) * min(1.0, gp - 1.0)
              + np.minimum(pm0, pms) * min(1.0, gm - 1.0))
    lam_hi = (np.maximum(pp0, pps) * max(1.0, gp - 1.0)
              + np.maximum(pm0, pms) * max(1.0, gm - 1.0))
    stiff = moving & (h * lam_lo >= STIFF_CUTOFF)
    out[stiff] = ast[stiff]
    work = moving & ~stiff
    if not work.any():
        return out, 0, status

    chunks = np.clip(np.ceil(h * lam_hi / CHUNK_STIFFNESS), 1, MAX_CHUNKS).astype(np.int64)
    chunks[~work] = 0
    H = np.where(work, h / np.maximum(chunks, 1), 0.0)
    a = a0.copy()
    max_iters = 0
    for j in range(int(chunks.max())):
        act = chunks > j
        idx = np.flatnonzero(act)
        c = a[idx]
        s = ast[idx]
        Ai, Bi, Hi = A[idx], B[idx], H[idx]
        st = np.zeros(idx.size, dtype=np.int64)
        T = np.empty((N_EXTRAP, idx.size))
        for q in range(N_EXTRAP):
            nsub = q + 1
            k = Hi / nsub
            v = c.copy()
            for _ in range(nsub):
                v, it = _implicit_euler(v, s, k, Ai, Bi, gp, gm, maxiter, st)
                max_iters = max(max_iters, it)
            T[q] = v
        # Aitken-Neville for an error expansion in powers of the step size
        for kcol in range(1, N_EXTRAP):
            for q in range(N_EXTRAP - 1, kcol - 1, -1):
                ratio = (q + 1) / (q + 1 - kcol)
                T[q] = T[q] + (T[q] - T[q - 1]) / (ratio - 1.0)
        res = np.clip(T[N_EXTRAP - 1], np.minimum(c, s), np.maximum(c, s))
        a[idx] = res
        status[idx] = np.maximum(status[idx], st)
    out[work] = a[work]
    return out, max_iters, status
