"""Hot kernels for the non-dimensional PIPF transcription.

State ``s = [r, beta, gamma, r', beta', gamma']`` and control ``u = [F, tau]``
are non-dimensional; time is in units of ``T_C``, so the dynamics depend on
the inertia ratio only::

    r''     = r a'^2 - sin(a) + F
    a''     = (tau - 2 r r' a' - r cos(a)) / r^2
    gamma'' = -tau / I
    beta''  = a'' - gamma''

Each kernel exists twice: a scalar-loop version compiled with numba and a
batched numpy version.  ``al_eval`` and ``rollout`` point at the numba
versions unless ``PIPF_LANDING_NO_NUMBA`` is set or numba is missing.
"""
import numpy as np

from ._jit import USE_NUMBA, jit

NX = 6
NU = 2


# ---------------------------------------------------------------------------
# numba (scalar loop) versions

@jit
def _rhs_jac_nb(s, u, inertia, f, A, B):
    r = s[0]
    a = s[1] + s[2]
    rd = s[3]
    ad = s[4] + s[5]
    F = u[0]
    tau = u[1]
    sa = np.sin(a)
    ca = np.cos(a)
    ir = 1.0 / r
    ir2 = ir * ir
    rdd = r * ad * ad - sa + F
    add = (tau - 2.0 * r * rd * ad - r * ca) * ir2
    gdd = -tau / inertia
    f[0] = s[3]
    f[1] = s[4]
    f[2] = s[5]
    f[3] = rdd
    f[4] = add - gdd
    f[5] = gdd
    for i in range(NX):
        for j in range(NX):
            A[i, j] = 0.0
        for j in range(NU):
            B[i, j] = 0.0
    A[0, 3] = 1.0
    A[1, 4] = 1.0
    A[2, 5] = 1.0
    A[3, 0] = ad * ad
    A[3, 1] = -ca
    A[3, 2] = -ca
    A[3, 4] = 2.0 * r * ad
    A[3, 5] = 2.0 * r * ad
    add_r = -2.0 * tau * ir2 * ir + 2.0 * rd * ad * ir2 + ca * ir2
    add_a = sa * ir
    add_rd = -2.0 * ad * ir
    add_ad = -2.0 * rd * ir
    A[4, 0] = add_r
    A[4, 1] = add_a
    A[4, 2] = add_a
    A[4, 3] = add_rd
    A[4, 4] = add_ad
    A[4, 5] = add_ad
    B[3, 0] = 1.0
    B[4, 1] = ir2 + 1.0 / inertia
    B[5, 1] = -1.0 / inertia


@jit
def _rhs_nb(s, u, inertia, f):
    r = s[0]
    a = s[1] + s[2]
    rd = s[3]
    ad = s[4] + s[5]
    sa = np.sin(a)
    ca = np.cos(a)
    rdd = r * ad * ad - sa + u[0]
    add = (u[1] - 2.0 * r * rd * ad - r * ca) / (r * r)
    gdd = -u[1] / inertia
    f[0] = s[3]
    f[1] = s[4]
    f[2] = s[5]
    f[3] = rdd
    f[4] = add - gdd
    f[5] = gdd


@jit
def _rk4_nb(s, u, h, inertia, out):
    k1 = np.empty(NX)
    k2 = np.empty(NX)
    k3 = np.empty(NX)
    k4 = np.empty(NX)
    y = np.empty(NX)
    _rhs_nb(s, u, inertia, k1)
    for i in range(NX):
        y[i] = s[i] + 0.5 * h * k1[i]
    _rhs_nb(y, u, inertia, k2)
    for i in range(NX):
        y[i] = s[i] + 0.5 * h * k2[i]
    _rhs_nb(y, u, inertia, k3)
    for i in range(NX):
        y[i] = s[i] + h * k3[i]
    _rhs_nb(y, u, inertia, k4)
    for i in range(NX):
        out[i] = s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@jit
def _rk4_jac_nb(s, u, h, inertia, out, Ps, Pu):
    f = np.empty(NX)
    A = np.empty((NX, NX))
    B = np.empty((NX, NU))
    y = np.empty(NX)
    Kprev = np.zeros((NX, NX))
    Lprev = np.zeros((NX, NU))
    K = np.empty((NX, NX))
    L = np.empty((NX, NU))
    acc = np.zeros(NX)
    for i in range(NX):
        for j in range(NX):
            Ps[i, j] = 0.0
        for j in range(NU):
            Pu[i, j] = 0.0
    kprev = np.zeros(NX)
    coef = (0.0, 0.5, 0.5, 1.0)
    wts = (1.0, 2.0, 2.0, 1.0)
    for stage in range(4):
        c = coef[stage] * h
        for i in range(NX):
            y[i] = s[i] + c * kprev[i]
        _rhs_jac_nb(y, u, inertia, f, A, B)
        # K = A (I + c Kprev), L = A (c Lprev) + B
        for i in range(NX):
            for j in range(NX):
                v = A[i, j]
                for k in range(NX):
                    v += c * A[i, k] * Kprev[k, j]
                K[i, j] = v
            for j in range(NU):
                v = B[i, j]
                for k in range(NX):
                    v += c * A[i, k] * Lprev[k, j]
                L[i, j] = v
        w = wts[stage]
        for i in range(NX):
            acc[i] += w * f[i]
            kprev[i] = f[i]
            for j in range(NX):
                Ps[i, j] += w * K[i, j]
                Kprev[i, j] = K[i, j]
            for j in range(NU):
                Pu[i, j] += w * L[i, j]
                Lprev[i, j] = L[i, j]
    for i in range(NX):
        out[i] = s[i] + h / 6.0 * acc[i]
        for j in range(NX):
            Ps[i, j] *= h / 6.0
        Ps[i, i] += 1.0
        for j in range(NU):
            Pu[i, j] *= h / 6.0


@jit
def _al_eval_nb(z, s0, h, inertia, wz, wg, wgd, zd, gd, gdd, wu, uref, lam, rho):
    p = wz.shape[0]
    nS = p * NX
    grad = np.zeros(z.shape[0])
    c = np.empty((p, NX))
    nxt = np.empty(NX)
    Ps = np.empty((NX, NX))
    Pu = np.empty((NX, NU))
    sprev = np.empty(NX)
    u = np.empty(NU)
    cost = 0.0
    pen = 0.0
    reg = 0.0
    for n in range(p):
        if n == 0:
            for i in range(NX):
                sprev[i] = s0[i]
        else:
            for i in range(NX):
                sprev[i] = z[(n - 1) * NX + i]
        u[0] = z[nS + n * NU]
        u[1] = z[nS + n * NU + 1]
        _rk4_jac_nb(sprev, u, h, inertia, nxt, Ps, Pu)
        base = n * NX
        for i in range(NX):
            ci = z[base + i] - nxt[i]
            c[n, i] = ci
            y = lam[n, i] + rho * ci
            pen += lam[n, i] * ci + 0.5 * rho * ci * ci
            grad[base + i] += y
        for j in range(NX):
            acc = 0.0
            for i in range(NX):
                acc += Ps[i, j] * (lam[n, i] + rho * c[n, i])
            if n > 0:
                grad[(n - 1) * NX + j] -= acc
        for j in range(NU):
            acc = 0.0
            for i in range(NX):
                acc += Pu[i, j] * (lam[n, i] + rho * c[n, i])
            grad[nS + n * NU + j] -= acc
        # tracking cost on knot n + 1
        r = z[base]
        a = z[base + 1] + z[base + 2]
        rd = z[base + 3]
        ad = z[base + 4] + z[base + 5]
        g = z[base + 2]
        gdt = z[base + 5]
        sa = np.sin(a)
        ca = np.cos(a)
        zdot = rd * sa + r * ad * ca
        ez = zdot - zd
        eg = g - gd
        egd = gdt - gdd
        cost += wz[n] * ez * ez + wg[n] * eg * eg + wgd[n] * egd * egd
        kz = 2.0 * wz[n] * ez
        grad[base] += kz * ad * ca
        da = kz * (rd * ca - r * ad * sa)
        grad[base + 1] += da
        grad[base + 2] += da + 2.0 * wg[n] * eg
        grad[base + 3] += kz * sa
        dad = kz * r * ca
        grad[base + 4] += dad
        grad[base + 5] += dad + 2.0 * wgd[n] * egd
        for j in range(NU):
            eu = u[j] - uref[j]
            reg += wu[j] * eu * eu
            grad[nS + n * NU + j] += 2.0 * wu[j] * eu
    return cost + pen + reg, grad, cost, c


@jit
def _rollout_nb(s0, U, h, inertia):
    p = U.shape[0]
    S = np.empty((p + 1, NX))
    for i in range(NX):
        S[0, i] = s0[i]
    for n in range(p):
        _rk4_nb(S[n], U[n], h, inertia, S[n + 1])
    return S


@jit
def _al_residuals_nb(z, s0, h, inertia, sz, sg, sgd, zd, gd, gdd, su, uref, lam, rho):
    """Residual vector ``R`` and Jacobian with ``0.5 |R|^2`` equal to the
    augmented Lagrangian up to a constant.  ``sz, sg, sgd`` are the square
    roots of twice the per-knot weights and ``su`` those of the control
    regularisation toward ``uref``."""
    p = sz.shape[0]
    nS = p * NX
    nz = z.shape[0]
    nR = p * NX + 3 * p + NU * p
    R = np.empty(nR)
    J = np.zeros((nR, nz))
    nxt = np.empty(NX)
    Ps = np.empty((NX, NX))
    Pu = np.empty((NX, NU))
    sprev = np.empty(NX)
    u = np.empty(NU)
    sr = np.sqrt(rho)
    for n in range(p):
        if n == 0:
            for i in range(NX):
                sprev[i] = s0[i]
        else:
            for i in range(NX):
                sprev[i] = z[(n - 1) * NX + i]
        u[0] = z[nS + n * NU]
        u[1] = z[nS + n * NU + 1]
        _rk4_jac_nb(sprev, u, h, inertia, nxt, Ps, Pu)
        base = n * NX
        for i in range(NX):
            row = base + i
            R[row] = sr * (z[base + i] - nxt[i] + lam[n, i] / rho)
            J[row, base + i] = sr
            if n > 0:
                for j in range(NX):
                    J[row, (n - 1) * NX + j] = -sr * Ps[i, j]
            for j in range(NU):
                J[row, nS + n * NU + j] = -sr * Pu[i, j]
        r = z[base]
        a = z[base + 1] + z[base + 2]
        rd = z[base + 3]
        ad = z[base + 4] + z[base + 5]
        sa = np.sin(a)
        ca = np.cos(a)
        row = nS + 3 * n
        R[row] = sz[n] * (rd * sa + r * ad * ca - zd)
        J[row, base] = sz[n] * ad * ca
        da = sz[n] * (rd * ca - r * ad * sa)
        J[row, base + 1] = da
        J[row, base + 2] = da
        J[row, base + 3] = sz[n] * sa
        dad = sz[n] * r * ca
        J[row, base + 4] = dad
        J[row, base + 5] = dad
        R[row + 1] = sg[n] * (z[base + 2] - gd)
        J[row + 1, base + 2] = sg[n]
        R[row + 2] = sgd[n] * (z[base + 5] - gdd)
        J[row + 2, base + 5] = sgd[n]
        for j in range(NU):
            row = nS + 3 * p + n * NU + j
            R[row] = su[j] * (u[j] - uref[j])
            J[row, nS + n * NU + j] = su[j]
    return R, J


@jit
def _normal_equations_nb(R, J):
    """``J^T J`` and ``J^T R`` skipping structural zeros of ``J``."""
    m, n = J.shape
    H = np.zeros((n, n))
    g = np.zeros(n)
    idx = np.empty(n, dtype=np.int64)
    for row in range(m):
        k = 0
        for j in range(n):
            if J[row, j] != 0.0:
                idx[k] = j
                k += 1
        r = R[row]
        for a in range(k):
            ja = idx[a]
            va = J[row, ja]
            g[ja] += va * r
            for b in range(k):
                H[ja, idx[b]] += va * J[row, idx[b]]
    return H, g


@jit
def _pgn_nb(z, lo, hi, s0, h, inertia, sz, sg, sgd, zd, gd, gdd, su, uref, lam, rho, gtol, max_iter):
    """Projected Gauss-Newton with Levenberg damping for
    ``min 0.5 |R(z)|^2`` subject to ``lo <= z <= hi``.

    Returns ``(z, iterations, projected_gradient_norm)``.
    """
    n = z.shape[0]
    z = np.minimum(np.maximum(z, lo), hi)
    R, J = _al_residuals_nb(z, s0, h, inertia, sz, sg, sgd, zd, gd, gdd, su, uref, lam, rho)
    f = 0.5 * np.dot(R, R)
    mu = 1e-8
    pgn = np.inf
    it = 0
    while it < max_iter:
        H, g = _normal_equations_nb(R, J)
        pgn = 0.0
        for i in range(n):
            v = abs(z[i] - min(max(z[i] - g[i], lo[i]), hi[i]))
            if v > pgn:
                pgn = v
        if pgn <= gtol:
            break
        it += 1
        eps = min(1e-3, pgn)
        free = np.ones(n, dtype=np.bool_)
        for i in range(n):
            if (z[i] - lo[i] <= eps and g[i] > 0.0) or (hi[i] - z[i] <= eps and g[i] < 0.0):
                free[i] = False
        fi = np.nonzero(free)[0]
        d = np.zeros(n)
        for i in range(n):
            if not free[i]:
                d[i] = -g[i] / max(H[i, i], 1e-12)
        accepted = False
        while not accepted:
            if fi.shape[0] > 0:
                Hf = H[fi][:, fi].copy()
                for a in range(fi.shape[0]):
                    Hf[a, a] += mu * (Hf[a, a] + 1e-12)
                gf = g[fi]
                ok = True
                try:
                    Lc = np.linalg.cholesky(Hf)
                except Exception:
                    ok = False
                if not ok:
                    mu = max(mu * 100.0, 1e-10)
                    if mu > 1e12:
                        break
                    continue
                y = np.linalg.solve(Lc, -gf)
                df = np.linalg.solve(Lc.T, y)
                for a in range(fi.shape[0]):
                    d[fi[a]] = df[a]
            t = 1.0
            while t > 1e-8:
                zt = np.minimum(np.maximum(z + t * d, lo), hi)
                dz = zt - z
                slope = np.dot(g, dz)
                if slope >= 0.0:
                    t *= 0.25
                    continue
                Rt, Jt = _al_residuals_nb(zt, s0, h, inertia, sz, sg, sgd, zd, gd, gdd, su, uref, lam, rho)
                ft = 0.5 * np.dot(Rt, Rt)
                if ft <= f + 1e-4 * slope:
                    accepted = True
                    break
                t *= 0.25
            if accepted:
                if t == 1.0:
                    mu = max(mu / 10.0, 1e-12)
                break
            mu *= 100.0
            if mu > 1e12:
                break
        if not accepted:
            break
        stall = abs(f - ft) <= 1e-16 * max(1.0, f) and np.max(np.abs(zt - z)) <= 1e-15
        z = zt
        R = Rt
        J = Jt
        f = ft
        if stall:
            break
    return z, it, pgn


# ---------------------------------------------------------------------------
# numpy (batched over knots) versions

def rhs_batch(S, U, inertia):
    S = np.atleast_2d(S)
    U = np.atleast_2d(U)
    r = S[:, 0]
    a = S[:, 1] + S[:, 2]
    rd = S[:, 3]
    ad = S[:, 4] + S[:, 5]
    sa, ca = np.sin(a), np.cos(a)
    rdd = r * ad * ad - sa + U[:, 0]
    add = (U[:, 1] - 2.0 * r * rd * ad - r * ca) / (r * r)
    gdd = -U[:, 1] / inertia
    return np.column_stack([S[:, 3], S[:, 4], S[:, 5], rdd, add - gdd, gdd])


def rhs_jac_batch(S, U, inertia):
    n = S.shape[0]
    f = rhs_batch(S, U, inertia)
    r = S[:, 0]
    a = S[:, 1] + S[:, 2]
    rd = S[:, 3]
    ad = S[:, 4] + S[:, 5]
    tau = U[:, 1]
    sa, ca = np.sin(a), np.cos(a)
    A = np.zeros((n, NX, NX))
    B = np.zeros((n, NX, NU))
    A[:, 0, 3] = A[:, 1, 4] = A[:, 2, 5] = 1.0
    A[:, 3, 0] = ad * ad
    A[:, 3, 1] = A[:, 3, 2] = -ca
    A[:, 3, 4] = A[:, 3, 5] = 2.0 * r * ad
    A[:, 4, 0] = (-2.0 * tau / r + 2.0 * rd * ad + ca) / (r * r)
    A[:, 4, 1] = A[:, 4, 2] = sa / r
    A[:, 4, 3] = -2.0 * ad / r
    A[:, 4, 4] = A[:, 4, 5] = -2.0 * rd / r
    B[:, 3, 0] = 1.0
    B[:, 4, 1] = 1.0 / (r * r) + 1.0 / inertia
    B[:, 5, 1] = -1.0 / inertia
    return f, A, B


def rk4_batch(S, U, h, inertia):
    k1 = rhs_batch(S, U, inertia)
    k2 = rhs_batch(S + 0.5 * h * k1, U, inertia)
    k3 = rhs_batch(S + 0.5 * h * k2, U, inertia)
    k4 = rhs_batch(S + h * k3, U, inertia)
    return S + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_jac_batch(S, U, h, inertia):
    """RK4 step and its Jacobians for every knot: ``(S+, dS+/dS, dS+/dU)``."""
    n = S.shape[0]
    eye = np.broadcast_to(np.eye(NX), (n, NX, NX))
    acc = np.zeros_like(S)
    Ps = np.zeros((n, NX, NX))
    Pu = np.zeros((n, NX, NU))
    kprev = np.zeros_like(S)
    Kprev = np.zeros((n, NX, NX))
    Lprev = np.zeros((n, NX, NU))
    for c, w in ((0.0, 1.0), (0.5, 2.0), (0.5, 2.0), (1.0, 1.0)):
        c = c * h
        f, A, B = rhs_jac_batch(S + c * kprev, U, inertia)
        K = A @ (eye + c * Kprev)
        L = c * (A @ Lprev) + B
        acc += w * f
        Ps += w * K
        Pu += w * L
        kprev, Kprev, Lprev = f, K, L
    return S + h / 6.0 * acc, eye + h / 6.0 * Ps, h / 6.0 * Pu


def _al_eval_np(z, s0, h, inertia, wz, wg, wgd, zd, gd, gdd, wu, uref, lam, rho):
    p = wz.shape[0]
    nS = p * NX
    S = z[:nS].reshape(p, NX)
    U = z[nS:].reshape(p, NU)
    Sprev = np.vstack([s0[None, :], S[:-1]])
    nxt, Ps, Pu = rk4_jac_batch(Sprev, U, h, inertia)
    c = S - nxt
    y = lam + rho * c
    pen = float(np.sum(lam * c) + 0.5 * rho * np.sum(c * c))
    gS = y.copy()
    gS[:-1] -= np.einsum("nij,ni->nj", Ps[1:], y[1:])
    gU = -np.einsum("nij,ni->nj", Pu, y)

    r, rd = S[:, 0], S[:, 3]
    a = S[:, 1] + S[:, 2]
    ad = S[:, 4] + S[:, 5]
    sa, ca = np.sin(a), np.cos(a)
    ez = rd * sa + r * ad * ca - zd
    eg = S[:, 2] - gd
    egd = S[:, 5] - gdd
    cost = float(np.sum(wz * ez * ez + wg * eg * eg + wgd * egd * egd))
    kz = 2.0 * wz * ez
    da = kz * (rd * ca - r * ad * sa)
    dad = kz * r * ca
    gS[:, 0] += kz * ad * ca
    gS[:, 1] += da
    gS[:, 2] += da + 2.0 * wg * eg
    gS[:, 3] += kz * sa
    gS[:, 4] += dad
    gS[:, 5] += dad + 2.0 * wgd * egd
    eu = U - uref
    reg = float(np.sum(wu * eu * eu))
    gU += 2.0 * wu * eu
    return cost + pen + reg, np.concatenate([gS.ravel(), gU.ravel()]), cost, c


def _rollout_np(s0, U, h, inertia):
    S = np.empty((U.shape[0] + 1, NX))
    S[0] = s0
    for n in range(U.shape[0]):
        S[n + 1] = rk4_batch(S[n][None, :], U[n][None, :], h, inertia)[0]
    return S


def _al_residuals_np(z, s0, h, inertia, sz, sg, sgd, zd, gd, gdd, su, uref, lam, rho):
    p = sz.shape[0]
    nS = p * NX
    S = z[:nS].reshape(p, NX)
    U = z[nS:].reshape(p, NU)
    Sprev = np.vstack([s0[None, :], S[:-1]])
    nxt, Ps, Pu = rk4_jac_batch(Sprev, U, h, inertia)
    sr = np.sqrt(rho)
    J = np.zeros((nS + 3 * p + NU * p, z.shape[0]))
    Rc = sr * (S - nxt + lam / rho)
    idx = np.arange(p)
    blk = J[:nS].reshape(p, NX, z.shape[0])
    for i in range(NX):
        blk[idx, i, idx * NX + i] = sr
    for n in range(1, p):
        blk[n, :, (n - 1) * NX:n * NX] = -sr * Ps[n]
    for n in range(p):
        blk[n, :, nS + n * NU:nS + (n + 1) * NU] = -sr * Pu[n]
    r, rd = S[:, 0], S[:, 3]
    a = S[:, 1] + S[:, 2]
    ad = S[:, 4] + S[:, 5]
    sa, ca = np.sin(a), np.cos(a)
    Rt = np.empty((p, 3))
    Rt[:, 0] = sz * (rd * sa + r * ad * ca - zd)
    Rt[:, 1] = sg * (S[:, 2] - gd)
    Rt[:, 2] = sgd * (S[:, 5] - gdd)
    tr = J[nS:nS + 3 * p].reshape(p, 3, z.shape[0])
    col = idx * NX
    da = sz * (rd * ca - r * ad * sa)
    dad = sz * r * ca
    tr[idx, 0, col] = sz * ad * ca
    tr[idx, 0, col + 1] = da
    tr[idx, 0, col + 2] = da
    tr[idx, 0, col + 3] = sz * sa
    tr[idx, 0, col + 4] = dad
    tr[idx, 0, col + 5] = dad
    tr[idx, 1, col + 2] = sg
    tr[idx, 2, col + 5] = sgd
    Ru = su * (U - uref)
    ur = J[nS + 3 * p:].reshape(p, NU, z.shape[0])
    for j in range(NU):
        ur[idx, j, nS + idx * NU + j] = su[j]
    return np.concatenate([Rc.ravel(), Rt.ravel(), Ru.ravel()]), J


def _pgn_np(z, lo, hi, s0, h, inertia, sz, sg, sgd, zd, gd, gdd, su, uref, lam, rho, gtol, max_iter):
    args = (s0, h, inertia, sz, sg, sgd, zd, gd, gdd, su, uref, lam, rho)
    z = np.clip(z, lo, hi)
    R, J = _al_residuals_np(z, *args)
    f = 0.5 * R @ R
    mu = 1e-8
    pgn = np.inf
    it = 0
    while it < max_iter:
        H = J.T @ J
        g = J.T @ R
        pgn = np.max(np.abs(z - np.clip(z - g, lo, hi)))
        if pgn <= gtol:
            break
        it += 1
        eps = min(1e-3, pgn)
        active = ((z - lo <= eps) & (g > 0)) | ((hi - z <= eps) & (g < 0))
        fi = np.flatnonzero(~active)
        d = np.where(active, -g / np.maximum(np.diag(H), 1e-12), 0.0)
        accepted = False
        while not accepted:
            if fi.size:
                Hf = H[np.ix_(fi, fi)]
                Hf = Hf + np.diag(mu * (np.diag(Hf) + 1e-12))
                try:
                    Lc = np.linalg.cholesky(Hf)
                except np.linalg.LinAlgError:
                    mu = max(mu * 100.0, 1e-10)
                    if mu > 1e12:
                        break
                    continue
                d[fi] = np.linalg.solve(Lc.T, np.linalg.solve(Lc, -g[fi]))
            t = 1.0
            while t > 1e-8:
                zt = np.clip(z + t * d, lo, hi)
                slope = g @ (zt - z)
                if slope >= 0.0:
                    t *= 0.25
                    continue
                Rt, Jt = _al_residuals_np(zt, *args)
                ft = 0.5 * Rt @ Rt
                if ft <= f + 1e-4 * slope:
                    accepted = True
                    break
                t *= 0.25
            if accepted:
                if t == 1.0:
                    mu = max(mu / 10.0, 1e-12)
                break
            mu *= 100.0
            if mu > 1e12:
                break
        if not accepted:
            break
        stall = abs(f - ft) <= 1e-16 * max(1.0, f) and np.max(np.abs(zt - z)) <= 1e-15
        z, R, J, f = zt, Rt, Jt, ft
        if stall:
            break
    return z, it, pgn


if USE_NUMBA:
    al_eval = _al_eval_nb
    al_residuals = _al_residuals_nb
    projected_gauss_newton = _pgn_nb
    rollout = _rollout_nb
else:
    al_eval = _al_eval_np
    al_residuals = _al_residuals_np
    projected_gauss_newton = _pgn_np
    rollout = _rollout_np

al_eval_numba = _al_eval_nb
al_eval_numpy = _al_eval_np
al_residuals_numba = _al_residuals_nb
al_residuals_numpy = _al_residuals_np
pgn_numba = _pgn_nb
pgn_numpy = _pgn_np
rollout_numba = _rollout_nb
rollout_numpy = _rollout_np


def defects(S, U, s0, h, inertia):
    """Transcription defects ``s_{n+1} - RK4(s_n, u_n)`` for ``n = 0..p-1``."""
    Sprev = np.vstack([np.asarray(s0)[None, :], S[:-1]])
    return S - rk4_batch(Sprev, U, h, inertia)
