"""Hot numerical loops: exact OU stepping, reflection policies, cost scans.

Each kernel consumes a pre-drawn standard-normal noise block of shape
(n_paths, n_steps, n_modes), so two policies evaluated on the same block see
identical randomness.  Kernels are numba-compiled when numba is available;
the numpy fallbacks implement the same recurrences step by step.

Policy codes: 0 = no action; 1 = reflect the control mode at a constant
threshold p1; 2 = constant intensity rate p1 with an initial jump p2;
3 = reflect at a threshold interpolated from a table (bx, by) evaluated at
the partner mode's current value.

The unified running cost is G(x) = 1/2 sum_k W_k (x_k - m_k)^2
+ 1/2 r1 <h, x>^2, which covers every shipped CostSpec kind.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


@njit(cache=True, inline="always")
def _interp_table(x, bx, by):
    if x <= bx[0]:
        return by[0]
    if x >= bx[-1]:
        return by[-1]
    lo = 0
    hi = len(bx) - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if bx[mid] <= x:
            lo = mid
        else:
            hi = mid
    t = (x - bx[lo]) / (bx[lo + 1] - bx[lo])
    return by[lo] + t * (by[lo + 1] - by[lo])


@njit(cache=True, inline="always")
def _gval(x, W, m, r1, hvec):
    acc = 0.0
    dot = 0.0
    for k in range(len(x)):
        d = x[k] - m[k]
        acc += W[k] * d * d
        if r1 != 0.0:
            dot += hvec[k] * x[k]
    return 0.5 * acc + 0.5 * r1 * dot * dot


@njit(cache=True, inline="always")
def _policy_dnu(pmode, p1, p2, h, i, ypre, partner_val, nk, bx, by):
    if pmode == 0:
        return 0.0
    if pmode == 1:
        gap = p1 - ypre
        return gap / nk if gap > 0.0 else 0.0
    if pmode == 2:
        return p2 if i == 0 else p1 * h
    b = _interp_table(partner_val, bx, by)
    gap = b - ypre
    return gap / nk if gap > 0.0 else 0.0


@njit(cache=True)
def ou_fill(noise, a, s, x0):
    """Exact OU paths: X[:, i] = a * X[:, i-1] + s * noise[:, i-1], X[:, 0] = x0."""
    n, msteps, nm = noise.shape
    out = np.empty((n, msteps + 1, nm))
    for p in range(n):
        for k in range(nm):
            out[p, 0, k] = x0[p, k]
        for i in range(1, msteps + 1):
            for k in range(nm):
                out[p, i, k] = a[k] * out[p, i - 1, k] + s[k] * noise[p, i - 1, k]
    return out


@njit(cache=True)
def policy_cost(
    noise, a, s, x0, kctl, nk, pmode, p1, p2, partner, bx, by,
    W, m, r1, hvec, h, wG, dj,
):
    """Per-path discounted running cost and intensity cost under a policy.

    Returns (total, g_part, nu_part) with g_part = sum_i wG[i] G(X_i) and
    nu_part = sum_i dj[i] dnu_i; jumps land at grid times and post-jump
    states enter G.
    """
    n, msteps, nm = noise.shape
    g_part = np.empty(n)
    nu_part = np.empty(n)
    total = np.empty(n)
    for p in range(n):
        x = np.empty(nm)
        for k in range(nm):
            x[k] = x0[k]
        ypre = x[kctl]
        pv = x[partner] if partner >= 0 else 0.0
        dnu = _policy_dnu(pmode, p1, p2, h, 0, ypre, pv, nk, bx, by)
        x[kctl] = ypre + nk * dnu
        gacc = wG[0] * _gval(x, W, m, r1, hvec)
        nuacc = dj[0] * dnu
        for i in range(1, msteps + 1):
            for k in range(nm):
                x[k] = a[k] * x[k] + s[k] * noise[p, i - 1, k]
            ypre = x[kctl]
            pv = x[partner] if partner >= 0 else 0.0
            dnu = _policy_dnu(pmode, p1, p2, h, i, ypre, pv, nk, bx, by)
            x[kctl] = ypre + nk * dnu
            gacc += wG[i] * _gval(x, W, m, r1, hvec)
            nuacc += dj[i] * dnu
        g_part[p] = gacc
        nu_part[p] = nuacc
        total[p] = gacc + nuacc
    return total, g_part, nu_part


@njit(cache=True)
def policy_scan(
    noise, a, s, x0, kctl, nk, pmode, p1, p2, partner, bx, by,
    W, m, r1, hvec, aq, bq, rho, lam, sig2, h, cpidx, wG, dj,
):
    """Policy run with checkpoint snapshots and quadratic-test-function terms.

    Returns per path: checkpoint states, running plain sums of e^{-rho t}G
    and of e^{-rho t} dnu up to each checkpoint, G at checkpoints, G at time
    zero, the discounted test value at the horizon, the trapezoid integral
    of e^{-rho t}[(generator - rho) phi](X_t) for phi = sum aq x^2 + bq x,
    the jump term sum_i e^{-rho t_i} <Dphi(midpoint), n> dnu_i (midpoint
    gradients make the identity exact for quadratics across jumps), and the
    total discounted cost.
    """
    n, msteps, nm = noise.shape
    ncp = len(cpidx)
    cp_states = np.empty((n, ncp, nm))
    g_plain = np.empty((n, ncp))
    nu_run = np.empty((n, ncp))
    g_at = np.empty((n, ncp))
    g0 = np.empty(n)
    dyn_lhs = np.empty(n)
    dyn_int = np.empty(n)
    dyn_jump = np.empty(n)
    cost = np.empty(n)
    for p in range(n):
        x = np.empty(nm)
        for k in range(nm):
            x[k] = x0[k]
        ypre = x[kctl]
        pv = x[partner] if partner >= 0 else 0.0
        dnu = _policy_dnu(pmode, p1, p2, h, 0, ypre, pv, nk, bx, by)
        ymid = ypre + 0.5 * nk * dnu
        x[kctl] = ypre + nk * dnu
        gv = _gval(x, W, m, r1, hvec)
        g0[p] = gv
        gsum = gv
        nusum = dnu
        jacc = nk * (2.0 * aq[kctl] * ymid + bq[kctl]) * dnu
        gacc_w = wG[0] * gv
        nuacc_w = dj[0] * dnu
        gen = 0.0
        phi0 = 0.0
        for k in range(nm):
            gen += lam[k] * x[k] * (2.0 * aq[k] * x[k] + bq[k]) + aq[k] * sig2[k]
            phi0 += aq[k] * x[k] * x[k] + bq[k] * x[k]
        phi_int = 0.5 * h * (gen - rho * phi0)
        ci = 0
        while ci < ncp and cpidx[ci] == 0:
            for k in range(nm):
                cp_states[p, ci, k] = x[k]
            g_plain[p, ci] = gsum
            nu_run[p, ci] = nusum
            g_at[p, ci] = gv
            ci += 1
        for i in range(1, msteps + 1):
            for k in range(nm):
                x[k] = a[k] * x[k] + s[k] * noise[p, i - 1, k]
            ypre = x[kctl]
            pv = x[partner] if partner >= 0 else 0.0
            dnu = _policy_dnu(pmode, p1, p2, h, i, ypre, pv, nk, bx, by)
            ymid = ypre + 0.5 * nk * dnu
            x[kctl] = ypre + nk * dnu
            disc = dj[i]
            gv = _gval(x, W, m, r1, hvec)
            gsum += disc * gv
            nusum += disc * dnu
            jacc += disc * nk * (2.0 * aq[kctl] * ymid + bq[kctl]) * dnu
            gacc_w += wG[i] * gv
            nuacc_w += dj[i] * dnu
            gen = 0.0
            phiv = 0.0
            for k in range(nm):
                gen += lam[k] * x[k] * (2.0 * aq[k] * x[k] + bq[k]) + aq[k] * sig2[k]
                phiv += aq[k] * x[k] * x[k] + bq[k] * x[k]
            wtrap = 0.5 * h if i == msteps else h
            phi_int += wtrap * disc * (gen - rho * phiv)
            while ci < ncp and cpidx[ci] == i:
                for k in range(nm):
                    cp_states[p, ci, k] = x[k]
                g_plain[p, ci] = gsum
                nu_run[p, ci] = nusum
                g_at[p, ci] = gv
                ci += 1
        phiT = 0.0
        for k in range(nm):
            phiT += aq[k] * x[k] * x[k] + bq[k] * x[k]
        dyn_lhs[p] = dj[msteps] * phiT
        dyn_int[p] = phi_int
        dyn_jump[p] = jacc
        cost[p] = gacc_w + nuacc_w
    return cp_states, g_plain, nu_run, g_at, g0, dyn_lhs, dyn_int, dyn_jump, cost


@njit(cache=True)
def affine_payoff_scan(noise, a, s, x0, g, c0, w):
    """Per-path sum_i w[i] (<g, X_i> + c0) along uncontrolled exact OU paths."""
    n, msteps, nm = noise.shape
    out = np.empty(n)
    for p in range(n):
        x = np.empty(nm)
        dot = 0.0
        for k in range(nm):
            x[k] = x0[k]
            dot += g[k] * x[k]
        acc = w[0] * (dot + c0)
        for i in range(1, msteps + 1):
            dot = 0.0
            for k in range(nm):
                x[k] = a[k] * x[k] + s[k] * noise[p, i - 1, k]
                dot += g[k] * x[k]
            acc += w[i] * (dot + c0)
        out[p] = acc
    return out


def ou_fill_numpy(noise, a, s, x0):
    n, msteps, nm = noise.shape
    out = np.empty((n, msteps + 1, nm))
    out[:, 0, :] = x0
    for i in range(1, msteps + 1):
        out[:, i, :] = a * out[:, i - 1, :] + s * noise[:, i - 1, :]
    return out
