"""Numba kernels for the penalized solvers.

Everything here is deliberately loop-heavy: the kernels compile once
(cache=True) and are then called tens of thousands of times from the
simulation step, so per-call cost matters more than vectorized elegance.
Design matrices are expected in Fortran order so column access is contiguous.

All path kernels share the same structure: warm starts along a decreasing
penalty grid, coordinate sweeps restricted to a candidate set chosen by the
sequential strong rule, and one full-gradient pass per grid point that both
certifies the KKT conditions (admitting any strong-rule misses) and feeds the
next grid point's screening.  Two modes exist for the linear lasso: a Gram
("covariance updating") kernel on X'X/n and X'y/n, cheap when p <= n, and a
residual-updating kernel for p > n and for certified final fits.

Logistic and Cox fits run iteratively reweighted least squares with an inner
weighted coordinate descent; in certified mode, step halving on the true
penalized objective makes the outer iterations non-increasing by
construction.
"""

import numpy as np
from numba import njit

OK = 0
MAX_SWEEPS = 2


@njit(cache=True, nogil=True)
def lasso_path_gram(G, c, lams, tol, max_sweeps):
    """Lasso path by coordinate descent on sufficient statistics.

    Minimizes (1/2) theta' G theta - c' theta + lam ||theta||_1, which for
    G = X'X/n, c = X'y/n is (1/2n)||y - X theta||^2 + lam||theta||_1 up to a
    constant.  The full gradient g = c - G theta is maintained, so sweeps
    cost O(p) plus O(p) per coefficient change and the KKT residual is free.

    Returns (coefs, kkt, status).
    """
    p = G.shape[0]
    m = lams.shape[0]
    coefs = np.zeros((m, p))
    kkt = np.zeros(m)
    status = OK

    theta = np.zeros(p)
    g = c.copy()
    cand = np.zeros(p, dtype=np.bool_)
    lam_prev = 0.0
    for j in range(p):
        if abs(g[j]) > lam_prev:
            lam_prev = abs(g[j])

    for il in range(m):
        lam = lams[il]
        thr = 2.0 * lam - lam_prev
        for j in range(p):
            cand[j] = theta[j] != 0.0 or abs(g[j]) >= thr
        total = 0
        while True:
            for _ in range(max_sweeps):
                dmax = 0.0
                for j in range(p):
                    if not cand[j]:
                        continue
                    gjj = G[j, j]
                    if gjj <= 0.0:
                        continue
                    u = g[j] + gjj * theta[j]
                    if u > lam:
                        t_new = (u - lam) / gjj
                    elif u < -lam:
                        t_new = (u + lam) / gjj
                    else:
                        t_new = 0.0
                    d = t_new - theta[j]
                    if d != 0.0:
                        theta[j] = t_new
                        for k in range(p):
                            g[k] -= d * G[k, j]
                        move = abs(d) * np.sqrt(gjj)
                        if move > dmax:
                            dmax = move
                total += 1
                if dmax < tol:
                    break
            # full check over all coordinates; g is exact, so this both
            # certifies KKT and collects strong-rule misses
            worst = 0.0
            added = False
            for j in range(p):
                if theta[j] > 0.0:
                    v = abs(g[j] - lam)
                elif theta[j] < 0.0:
                    v = abs(g[j] + lam)
                else:
                    v = abs(g[j]) - lam
                    if v < 0.0:
                        v = 0.0
                if v > worst:
                    worst = v
                if not cand[j] and abs(g[j]) > lam:
                    cand[j] = True
                    added = True
            if not added or total >= max_sweeps:
                if total >= max_sweeps:
                    status = MAX_SWEEPS
                kkt[il] = worst
                break
        for j in range(p):
            coefs[il, j] = theta[j]
        lam_prev = lam
    return coefs, kkt, status


@njit(cache=True, nogil=True)
def lasso_path_resid(X, y, lams, theta0, tol, kkt_tol, max_sweeps, dfmax):
    """Lasso path with residual updates; certifies KKT at every grid point.

    Minimizes (1/2n)||y - X theta||^2 + lam||theta||_1 with warm starts from
    theta0.  With dfmax > 0 the path stops once the active set exceeds dfmax
    (remaining grid entries repeat the last iterate; used for fold fits whose
    deep-overfit tail is never selected).  Returns (coefs, kkt, mono_viol, status).
    """
    n, p = X.shape
    m = lams.shape[0]
    coefs = np.zeros((m, p))
    kkt = np.zeros(m)
    status = OK
    mono_viol = 0

    theta = theta0.copy()
    r = y.copy()
    for j in range(p):
        if theta[j] != 0.0:
            for i in range(n):
                r[i] -= theta[j] * X[i, j]
    xv = np.empty(p)
    g = np.empty(p)
    for j in range(p):
        s = 0.0
        u = 0.0
        for i in range(n):
            s += X[i, j] * X[i, j]
            u += X[i, j] * r[i]
        xv[j] = s / n
        g[j] = u / n
    cand = np.zeros(p, dtype=np.bool_)
    lam_prev = 0.0
    for j in range(p):
        if abs(g[j]) > lam_prev:
            lam_prev = abs(g[j])

    prev_obj = np.inf
    truncated = False
    for il in range(m):
        lam = lams[il]
        if truncated:
            for j in range(p):
                coefs[il, j] = theta[j]
            kkt[il] = kkt[il - 1]
            continue
        thr = 2.0 * lam - lam_prev
        for j in range(p):
            cand[j] = theta[j] != 0.0 or abs(g[j]) >= thr
        total = 0
        while True:
            for _ in range(max_sweeps):
                dmax = 0.0
                for j in range(p):
                    if not cand[j] or xv[j] <= 0.0:
                        continue
                    u = 0.0
                    for i in range(n):
                        u += X[i, j] * r[i]
                    u = u / n + xv[j] * theta[j]
                    if u > lam:
                        t_new = (u - lam) / xv[j]
                    elif u < -lam:
                        t_new = (u + lam) / xv[j]
                    else:
                        t_new = 0.0
                    d = t_new - theta[j]
                    if d != 0.0:
                        for i in range(n):
                            r[i] -= d * X[i, j]
                        theta[j] = t_new
                        move = abs(d) * np.sqrt(xv[j])
                        if move > dmax:
                            dmax = move
                total += 1
                if dmax < tol:
                    break
            worst = 0.0
            added = False
            for j in range(p):
                u = 0.0
                for i in range(n):
                    u += X[i, j] * r[i]
                u /= n
                g[j] = u
                if theta[j] > 0.0:
                    v = abs(u - lam)
                elif theta[j] < 0.0:
                    v = abs(u + lam)
                else:
                    v = abs(u) - lam
                    if v < 0.0:
                        v = 0.0
                if v > worst:
                    worst = v
                if not cand[j] and abs(u) > lam:
                    cand[j] = True
                    added = True
            if (not added and worst <= kkt_tol) or total >= max_sweeps:
                if total >= max_sweeps and worst > kkt_tol:
                    status = MAX_SWEEPS
                kkt[il] = worst
                break
        rss = 0.0
        for i in range(n):
            rss += r[i] * r[i]
        pen = 0.0
        for j in range(p):
            pen += abs(theta[j])
            coefs[il, j] = theta[j]
        obj = 0.5 * rss / n + lam * pen
        if il > 0 and lam == lams[il - 1] and obj > prev_obj * (1.0 + 1e-12) + 1e-300:
            mono_viol += 1
        prev_obj = obj
        lam_prev = lam
        if dfmax > 0:
            nnz = 0
            for j in range(p):
                if theta[j] != 0.0:
                    nnz += 1
            if nnz > dfmax:
                truncated = True
    return coefs, kkt, mono_viol, status


@njit(cache=True, nogil=True)
def _wls_sweep(X, rw, theta, wxv, lam, cand, w, fit_intercept, b0):
    """Sweep for (1/2n) sum_i w_i (z_i - b0 - x_i'theta)^2 + lam||theta||_1.

    rw holds the weighted working residual w_i * (z_i - b0 - x_i'theta).
    Only candidate coordinates are visited.
    """
    n, p = X.shape
    dmax = 0.0
    for j in range(p):
        if not cand[j]:
            continue
        if wxv[j] <= 0.0:
            continue
        u = 0.0
        for i in range(n):
            u += X[i, j] * rw[i]
        u = u / n + wxv[j] * theta[j]
        if u > lam:
            t_new = (u - lam) / wxv[j]
        elif u < -lam:
            t_new = (u + lam) / wxv[j]
        else:
            t_new = 0.0
        d = t_new - theta[j]
        if d != 0.0:
            for i in range(n):
                rw[i] -= d * w[i] * X[i, j]
            theta[j] = t_new
            move = abs(d) * np.sqrt(wxv[j])
            if move > dmax:
                dmax = move
    if fit_intercept:
        sw = 0.0
        sr = 0.0
        for i in range(n):
            sw += w[i]
            sr += rw[i]
        if sw > 0.0:
            db = sr / sw
            if db != 0.0:
                b0 += db
                for i in range(n):
                    rw[i] -= db * w[i]
                move = abs(db) * np.sqrt(sw / n)
                if move > dmax:
                    dmax = move
    return dmax, b0


@njit(cache=True, nogil=True)
def _eta_from(X, theta, b0, eta):
    n, p = X.shape
    for i in range(n):
        eta[i] = b0
    for j in range(p):
        t = theta[j]
        if t != 0.0:
            for i in range(n):
                eta[i] += X[i, j] * t


@njit(cache=True, nogil=True)
def _logistic_nll(eta, y):
    """Mean Bernoulli negative log-likelihood at linear predictor eta."""
    n = eta.shape[0]
    nll = 0.0
    for i in range(n):
        e = eta[i]
        if e > 0.0:
            nll += (1.0 - y[i]) * e + np.log1p(np.exp(-e))
        else:
            nll += -y[i] * e + np.log1p(np.exp(e))
    return nll / n


@njit(cache=True, nogil=True)
def lasso_path_logistic(X, y, lams, theta0, b0_init, tol, kkt_tol, max_sweeps,
                        max_irls, b0_cap, certify):
    """IRLS + coordinate descent path for the l1-penalized logistic model.

    Minimizes (1/n) * negative Bernoulli log-likelihood + lam||theta||_1 with
    an unpenalized intercept, warm started from (theta0, b0_init).  In
    certified mode, step halving keeps the penalized objective non-increasing
    across IRLS iterations and the outer loop runs until the true KKT
    residual is below kkt_tol.  In fast mode (certify=False) iteration counts
    are capped and the path stops early once the deviance is essentially
    saturated (remaining grid entries repeat the last iterate; the
    surrounding cross-validation never selects that region).

    Returns (coefs, intercepts, objs, kkt, mono_viol, status, capped).
    """
    n, p = X.shape
    m = lams.shape[0]
    coefs = np.zeros((m, p))
    b0s = np.zeros(m)
    objs = np.zeros(m)
    kkts = np.zeros(m)
    status = OK
    mono_viol = 0
    capped = False

    theta = theta0.copy()
    theta_old = np.empty(p)
    cand = np.zeros(p, dtype=np.bool_)
    eta = np.empty(n)
    w = np.empty(n)
    rw = np.empty(n)
    resid = np.empty(n)
    wxv = np.empty(p)
    g = np.empty(p)

    ybar = 0.0
    for i in range(n):
        ybar += y[i]
    ybar /= n
    b0 = b0_init
    if ybar <= 0.0 or ybar >= 1.0:
        b0 = b0_cap if ybar >= 0.5 else -b0_cap
        capped = True

    eps = 1e-5
    _eta_from(X, theta, b0, eta)
    nll_null = _logistic_nll(eta, y)
    for i in range(n):
        resid[i] = y[i] - 1.0 / (1.0 + np.exp(-eta[i]))
    lam_prev = 0.0
    for j in range(p):
        u = 0.0
        for i in range(n):
            u += X[i, j] * resid[i]
        g[j] = u / n
        if abs(g[j]) > lam_prev:
            lam_prev = abs(g[j])
    saturated = False

    for il in range(m):
        lam = lams[il]
        if saturated:
            for j in range(p):
                coefs[il, j] = theta[j]
            b0s[il] = b0
            objs[il] = objs[il - 1]
            continue
        thr = 2.0 * lam - lam_prev
        for j in range(p):
            cand[j] = theta[j] != 0.0 or abs(g[j]) >= thr
        pen = 0.0
        for j in range(p):
            pen += abs(theta[j])
        nll = _logistic_nll(eta, y)
        obj = nll + lam * pen
        outer_rounds = 0
        while True:
            for it in range(max_irls):
                for j in range(p):
                    theta_old[j] = theta[j]
                b0_old = b0
                obj_old = obj
                for i in range(n):
                    pi = 1.0 / (1.0 + np.exp(-eta[i]))
                    if pi < eps:
                        pi = eps
                    elif pi > 1.0 - eps:
                        pi = 1.0 - eps
                    wi = pi * (1.0 - pi)
                    w[i] = wi
                    rw[i] = y[i] - pi
                for j in range(p):
                    if cand[j]:
                        s = 0.0
                        for i in range(n):
                            s += w[i] * X[i, j] * X[i, j]
                        wxv[j] = s / n
                for _ in range(max_sweeps):
                    d, b0 = _wls_sweep(X, rw, theta, wxv, lam, cand, w, True, b0)
                    if d < tol:
                        break
                _eta_from(X, theta, b0, eta)
                pen = 0.0
                for j in range(p):
                    pen += abs(theta[j])
                nll = _logistic_nll(eta, y)
                obj = nll + lam * pen
                if certify:
                    halvings = 0
                    while obj > obj_old and halvings < 30:
                        for j in range(p):
                            theta[j] = 0.5 * (theta[j] + theta_old[j])
                        b0 = 0.5 * (b0 + b0_old)
                        _eta_from(X, theta, b0, eta)
                        pen = 0.0
                        for j in range(p):
                            pen += abs(theta[j])
                        nll = _logistic_nll(eta, y)
                        obj = nll + lam * pen
                        halvings += 1
                    if obj > obj_old:
                        # quadratic model exhausted at this precision
                        for j in range(p):
                            theta[j] = theta_old[j]
                        b0 = b0_old
                        _eta_from(X, theta, b0, eta)
                        nll = _logistic_nll(eta, y)
                        obj = obj_old
                        break
                if abs(b0) > b0_cap:
                    b0 = b0_cap if b0 > 0.0 else -b0_cap
                    capped = True
                    _eta_from(X, theta, b0, eta)
                    nll = _logistic_nll(eta, y)
                    obj = nll + lam * pen
                moved = abs(b0 - b0_old)
                for j in range(p):
                    dj = abs(theta[j] - theta_old[j])
                    if dj > moved:
                        moved = dj
                if moved < tol or abs(obj_old - obj) < 1e-12 * (1.0 + abs(obj)):
                    break
            outer_rounds += 1
            # full-gradient pass: certifies KKT, admits strong-rule misses,
            # and feeds the next grid point's screening
            for i in range(n):
                resid[i] = y[i] - 1.0 / (1.0 + np.exp(-eta[i]))
            worst = 0.0
            added = False
            for j in range(p):
                u = 0.0
                for i in range(n):
                    u += X[i, j] * resid[i]
                u /= n
                g[j] = u
                if theta[j] > 0.0:
                    v = abs(u - lam)
                elif theta[j] < 0.0:
                    v = abs(u + lam)
                else:
                    v = abs(u) - lam
                    if v < 0.0:
                        v = 0.0
                if v > worst:
                    worst = v
                slack = 0.0 if certify else 1e-3 * lam
                if not cand[j] and abs(u) > lam + slack:
                    cand[j] = True
                    added = True
            done = not added
            if certify and worst > kkt_tol and not capped and outer_rounds < 40:
                done = False
            max_rounds = 40 if certify else 2
            if done or outer_rounds >= max_rounds:
                kkts[il] = worst
                break
        for j in range(p):
            coefs[il, j] = theta[j]
        b0s[il] = b0
        objs[il] = obj
        if il > 0 and lams[il] == lams[il - 1] and obj > objs[il - 1] * (1.0 + 1e-12):
            mono_viol += 1
        if not certify and nll_null > 0.0 and nll / nll_null < 0.10:
            saturated = True
        lam_prev = lam
    return coefs, b0s, objs, kkts, mono_viol, status, capped


@njit(cache=True, nogil=True)
def cox_eta_stats(eta, event, group_start, group_events):
    """Breslow risk-set statistics with observations sorted by ascending time.

    group_start marks the first sorted index of each tie group, group_events
    the number of events in it.  Returns (loglik, cumhaz, cumhaz2) where
    cumhaz[i] = sum over event groups k with t_k <= y_i of d_k / S_k, and
    cumhaz2 uses d_k / S_k^2; S_k is the risk-set sum of exp(eta).
    """
    n = eta.shape[0]
    ngroups = group_start.shape[0]
    S = np.zeros(ngroups)
    total = 0.0
    for k in range(ngroups - 1, -1, -1):
        hi = group_start[k + 1] if k + 1 < ngroups else n
        for i in range(group_start[k], hi):
            total += np.exp(eta[i])
        S[k] = total
    loglik = 0.0
    cumhaz = np.zeros(n)
    cumhaz2 = np.zeros(n)
    ch = 0.0
    ch2 = 0.0
    for k in range(ngroups):
        d = group_events[k]
        if d > 0:
            ch += d / S[k]
            ch2 += d / (S[k] * S[k])
            loglik -= d * np.log(S[k])
        hi = group_start[k + 1] if k + 1 < ngroups else n
        for i in range(group_start[k], hi):
            if event[i]:
                loglik += eta[i]
            cumhaz[i] = ch
            cumhaz2[i] = ch2
    return loglik, cumhaz, cumhaz2


@njit(cache=True, nogil=True)
def lasso_path_cox(X, event, group_start, group_events, lams, theta0, tol,
                   kkt_tol, max_sweeps, max_irls, certify):
    """Penalized Cox partial likelihood (Breslow ties) along a penalty grid.

    X must be sorted by ascending observed time.  Minimizes
    -(1/n) log PL(theta) + lam||theta||_1, warm started from theta0, with the
    same candidate-set and certification scheme as the logistic kernel.

    Returns (coefs, objs, kkt, mono_viol, status).
    """
    n, p = X.shape
    m = lams.shape[0]
    coefs = np.zeros((m, p))
    objs = np.zeros(m)
    kkts = np.zeros(m)
    status = OK
    mono_viol = 0

    theta = theta0.copy()
    theta_old = np.empty(p)
    cand = np.zeros(p, dtype=np.bool_)
    eta = np.zeros(n)
    _eta_from(X, theta, 0.0, eta)
    w = np.empty(n)
    rw = np.empty(n)
    resid = np.empty(n)
    wxv = np.empty(p)
    g = np.empty(p)
    wfloor = 1e-8

    loglik, cumhaz, cumhaz2 = cox_eta_stats(eta, event, group_start, group_events)
    lam_prev = 0.0
    for j in range(p):
        u = 0.0
        for i in range(n):
            di = 1.0 if event[i] else 0.0
            u += X[i, j] * (di - np.exp(eta[i]) * cumhaz[i])
        g[j] = u / n
        if abs(g[j]) > lam_prev:
            lam_prev = abs(g[j])

    for il in range(m):
        lam = lams[il]
        thr = 2.0 * lam - lam_prev
        for j in range(p):
            cand[j] = theta[j] != 0.0 or abs(g[j]) >= thr
        pen = 0.0
        for j in range(p):
            pen += abs(theta[j])
        obj = -loglik / n + lam * pen
        outer_rounds = 0
        while True:
            for it in range(max_irls):
                for j in range(p):
                    theta_old[j] = theta[j]
                obj_old = obj
                for i in range(n):
                    ee = np.exp(eta[i])
                    wi = ee * cumhaz[i] - ee * ee * cumhaz2[i]
                    if wi < wfloor:
                        wi = wfloor
                    w[i] = wi
                    di = 1.0 if event[i] else 0.0
                    rw[i] = di - ee * cumhaz[i]
                for j in range(p):
                    if cand[j]:
                        s = 0.0
                        for i in range(n):
                            s += w[i] * X[i, j] * X[i, j]
                        wxv[j] = s / n
                b0 = 0.0
                for _ in range(max_sweeps):
                    d, b0 = _wls_sweep(X, rw, theta, wxv, lam, cand, w, False, b0)
                    if d < tol:
                        break
                _eta_from(X, theta, 0.0, eta)
                loglik, cumhaz, cumhaz2 = cox_eta_stats(eta, event, group_start, group_events)
                pen = 0.0
                for j in range(p):
                    pen += abs(theta[j])
                obj = -loglik / n + lam * pen
                if certify:
                    halvings = 0
                    while obj > obj_old and halvings < 30:
                        for j in range(p):
                            theta[j] = 0.5 * (theta[j] + theta_old[j])
                        _eta_from(X, theta, 0.0, eta)
                        loglik, cumhaz, cumhaz2 = cox_eta_stats(eta, event, group_start, group_events)
                        pen = 0.0
                        for j in range(p):
                            pen += abs(theta[j])
                        obj = -loglik / n + lam * pen
                        halvings += 1
                    if obj > obj_old:
                        for j in range(p):
                            theta[j] = theta_old[j]
                        _eta_from(X, theta, 0.0, eta)
                        loglik, cumhaz, cumhaz2 = cox_eta_stats(eta, event, group_start, group_events)
                        obj = obj_old
                        break
                moved = 0.0
                for j in range(p):
                    dj = abs(theta[j] - theta_old[j])
                    if dj > moved:
                        moved = dj
                if moved < tol or abs(obj_old - obj) < 1e-12 * (1.0 + abs(obj)):
                    break
            outer_rounds += 1
            for i in range(n):
                di = 1.0 if event[i] else 0.0
                resid[i] = di - np.exp(eta[i]) * cumhaz[i]
            worst = 0.0
            added = False
            for j in range(p):
                u = 0.0
                for i in range(n):
                    u += X[i, j] * resid[i]
                u /= n
                g[j] = u
                if theta[j] > 0.0:
                    v = abs(u - lam)
                elif theta[j] < 0.0:
                    v = abs(u + lam)
                else:
                    v = abs(u) - lam
                    if v < 0.0:
                        v = 0.0
                if v > worst:
                    worst = v
                slack = 0.0 if certify else 1e-3 * lam
                if not cand[j] and abs(u) > lam + slack:
                    cand[j] = True
                    added = True
            done = not added
            if certify and worst > kkt_tol and outer_rounds < 40:
                done = False
            max_rounds = 40 if certify else 2
            if done or outer_rounds >= max_rounds:
                kkts[il] = worst
                break
        for j in range(p):
            coefs[il, j] = theta[j]
        objs[il] = obj
        if il > 0 and lams[il] == lams[il - 1] and obj > objs[il - 1] * (1.0 + 1e-12):
            mono_viol += 1
        lam_prev = lam
    return coefs, objs, kkts, mono_viol, status


@njit(cache=True, nogil=True)
def sgl_path(Phi, y, group_start, group_size, gram_blocks, L, kappas, alpha,
             tol, max_outer, max_inner):
    """Blockwise proximal descent for sum-of-squares sparse group lasso.

    Minimizes ||y - Phi beta||^2 + (1-alpha)*kappa*sum_j ||beta_j||_2
    + alpha*kappa*sum_jk |beta_jk| along the kappa grid with warm starts.

    gram_blocks[j] holds Phi_j' Phi_j and L[j] = 2 * lambda_max(Phi_j' Phi_j),
    both precomputed by the caller.  A block update applies entrywise soft
    thresholding followed by groupwise shrinkage at step 1/L[j]; that compound
    prox step never increases the objective.  Returns (coefs, kkt, objs, status).
    """
    n, P = Phi.shape
    ngroups = group_start.shape[0]
    m = kappas.shape[0]
    coefs = np.zeros((m, P))
    kkts = np.zeros(m)
    objs = np.zeros(m)
    status = OK

    beta = np.zeros(P)
    r = y.copy()
    maxsize = 0
    for gj in range(ngroups):
        if group_size[gj] > maxsize:
            maxsize = group_size[gj]
    cbuf = np.empty(maxsize)
    ubuf = np.empty(maxsize)
    bwork = np.empty(maxsize)

    for il in range(m):
        kappa = kappas[il]
        l1 = alpha * kappa
        l2 = (1.0 - alpha) * kappa
        converged = False
        for outer in range(max_outer):
            dmax = 0.0
            for gj in range(ngroups):
                start = group_start[gj]
                size = group_size[gj]
                step = 1.0 / L[gj]
                # c = Phi_j' (r + Phi_j beta_j), fixed during the block solve
                for k in range(size):
                    col = start + k
                    s = 0.0
                    for i in range(n):
                        s += Phi[i, col] * r[i]
                    cbuf[k] = s
                for k in range(size):
                    s = cbuf[k]
                    for k2 in range(size):
                        b2 = beta[start + k2]
                        if b2 != 0.0:
                            s += gram_blocks[gj, k, k2] * b2
                    ubuf[k] = s
                    bwork[k] = beta[start + k]
                blockmove = 0.0
                for inner in range(max_inner):
                    nrm = 0.0
                    moved = 0.0
                    for k in range(size):
                        gk = ubuf[k]
                        for k2 in range(size):
                            b2 = bwork[k2]
                            if b2 != 0.0:
                                gk -= gram_blocks[gj, k, k2] * b2
                        v = bwork[k] + 2.0 * step * gk
                        t = step * l1
                        if v > t:
                            v -= t
                        elif v < -t:
                            v += t
                        else:
                            v = 0.0
                        cbuf[k] = v
                        nrm += v * v
                    nrm = np.sqrt(nrm)
                    shrink = 0.0
                    if nrm > 0.0:
                        shrink = 1.0 - step * l2 / nrm
                        if shrink < 0.0:
                            shrink = 0.0
                    for k in range(size):
                        new = shrink * cbuf[k]
                        d = new - bwork[k]
                        if abs(d) > moved:
                            moved = abs(d)
                        bwork[k] = new
                    if moved > blockmove:
                        blockmove = moved
                    if moved < 0.1 * tol:
                        break
                for k in range(size):
                    col = start + k
                    d = bwork[k] - beta[col]
                    if d != 0.0:
                        for i in range(n):
                            r[i] -= d * Phi[i, col]
                        beta[col] = bwork[k]
                if blockmove > dmax:
                    dmax = blockmove
            if dmax < tol:
                converged = True
                break
        if not converged:
            status = MAX_SWEEPS
        # KKT certificate and objective at the returned point
        worst = 0.0
        for gj in range(ngroups):
            start = group_start[gj]
            size = group_size[gj]
            nrm = 0.0
            for k in range(size):
                nrm += beta[start + k] * beta[start + k]
            nrm = np.sqrt(nrm)
            if nrm == 0.0:
                s = 0.0
                for k in range(size):
                    col = start + k
                    u = 0.0
                    for i in range(n):
                        u += Phi[i, col] * r[i]
                    exc = abs(2.0 * u) - l1
                    if exc > 0.0:
                        s += exc * exc
                v = np.sqrt(s) - l2
                if v > worst:
                    worst = v
            else:
                for k in range(size):
                    col = start + k
                    u = 0.0
                    for i in range(n):
                        u += Phi[i, col] * r[i]
                    core = -2.0 * u + l2 * beta[col] / nrm
                    if beta[col] != 0.0:
                        v = abs(core + l1 * np.sign(beta[col]))
                    else:
                        v = abs(core) - l1
                        if v < 0.0:
                            v = 0.0
                    if v > worst:
                        worst = v
        kkts[il] = worst
        rss = 0.0
        for i in range(n):
            rss += r[i] * r[i]
        pen = 0.0
        for gj in range(ngroups):
            start = group_start[gj]
            size = group_size[gj]
            nrm = 0.0
            for k in range(size):
                b = beta[start + k]
                pen += l1 * abs(b)
                nrm += b * b
            pen += l2 * np.sqrt(nrm)
        objs[il] = rss + pen
        for col in range(P):
            coefs[il, col] = beta[col]
    return coefs, kkts, objs, status


@njit(cache=True, nogil=True)
def bspline_design(x, knots, order):
    """Cox-de Boor evaluation of all B-splines of the given order.

    knots is the full nondecreasing knot vector; returns the
    n x (len(knots) - order) design matrix.  Points must already lie inside
    the base interval; the right boundary is treated as inclusive.
    """
    n = x.shape[0]
    nk = knots.shape[0]
    nbasis = nk - order
    out = np.zeros((n, nbasis))
    hi = knots[nk - 1]
    work = np.empty(nk - 1)
    for row in range(n):
        xv = x[row]
        for i in range(nk - 1):
            if knots[i] <= xv < knots[i + 1]:
                work[i] = 1.0
            elif xv == hi and knots[i] < knots[i + 1] and knots[i + 1] == hi:
                # make the last nonempty interval right-closed
                work[i] = 1.0
            else:
                work[i] = 0.0
        for k in range(2, order + 1):
            for i in range(nk - k):
                left = 0.0
                den1 = knots[i + k - 1] - knots[i]
                if den1 > 0.0:
                    left = (xv - knots[i]) / den1 * work[i]
                right = 0.0
                den2 = knots[i + k] - knots[i + 1]
                if den2 > 0.0:
                    right = (knots[i + k] - xv) / den2 * work[i + 1]
                work[i] = left + right
        for i in range(nbasis):
            out[row, i] = work[i]
    return out
