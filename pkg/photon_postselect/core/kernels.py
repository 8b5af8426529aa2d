# photon_postselect/core/kernels.py

# Numba kernels for the photon-number Theta transforms. All terms are built
# in log space from a precomputed log-factorial vector `lf`; `logp` is the
# elementwise log of the input vector (-inf where the entry is zero).

import numpy as np
from numba import njit

# exp(-700) ~ 1e-304: terms below this are dropped from a window.
LOG_TERM_FLOOR = -700.0


@njit(nogil=True, cache=True)
def _kahan_add(total, compensation, value):
    y = value - compensation
    t = total + y
    compensation = (t - total) - y
    return t, compensation


@njit(nogil=True, cache=True)
def _subtract_log_weight(n, l, lf, log_r, log_t):
    # ln[ C(n+l, n) T^n R^l ]
    return lf[n + l] - lf[n] - lf[l] + n * log_t + l * log_r


@njit(nogil=True, cache=True)
def _subtract_theta_numba(logp, lf, log_r, log_t, k, resolving):
    """
    Theta_n = sum_{l>=k} Y_l C(n+l, n) T^n R^l p_{n+l}, n = 0 .. N-k.

    For the nonresolving sum the weight C(n+l, l) R^l T^(n+1) is a
    negative-binomial pmf in l, hence bounded by 1 and log-concave, so the
    l-window is grown outward from its mode until the weight falls below
    LOG_TERM_FLOOR.
    """
    cutoff = logp.size - 1
    n_out = cutoff - k + 1
    out = np.zeros(max(n_out, 0), dtype=np.float64)
    for n in range(n_out):
        l_max = cutoff - n
        if resolving:
            lo = k
            hi = k
        else:
            mode = int(n * np.exp(log_r - log_t))
            if mode < k:
                mode = k
            if mode > l_max:
                mode = l_max
            lo = mode
            while lo > k and _subtract_log_weight(n, lo - 1, lf, log_r, log_t) >= LOG_TERM_FLOOR:
                lo -= 1
            hi = mode
            while hi < l_max and _subtract_log_weight(n, hi + 1, lf, log_r, log_t) >= LOG_TERM_FLOOR:
                hi += 1
        total = 0.0
        comp = 0.0
        for l in range(lo, hi + 1):
            log_term = _subtract_log_weight(n, l, lf, log_r, log_t) + logp[n + l]
            if log_term > -np.inf:
                total, comp = _kahan_add(total, comp, np.exp(log_term))
        out[n] = total
    return out


@njit(nogil=True, cache=True)
def _add_log_weight(n, l, lf, log_r, log_t):
    # ln[ C(n, l) t^(n+1) r^l ]
    return lf[n] - lf[l] - lf[n - l] + (n + 1) * log_t + l * log_r


@njit(nogil=True, cache=True)
def _add_theta_numba(logp, lf, log_r, log_t, k, resolving, n_start, n_end):
    """
    Theta_n = sum_{l=k}^{n} Y_l C(n, l) t^(n+1) r^l p_{n-l} for n in [n_start, n_end).

    C(n, l) t^n r^l is Binomial(n, 1-t) in l (because r t = 1 - t), so the
    same mode-outward window applies.
    """
    cutoff = logp.size - 1
    out = np.zeros(n_end - n_start, dtype=np.float64)
    p_succ = 1.0 - np.exp(log_t)
    for n in range(n_start, n_end):
        l_min = k
        if n - cutoff > l_min:
            l_min = n - cutoff
        l_max = n
        if resolving:
            l_max = k if k <= n else -1
        if l_min > l_max:
            continue
        if resolving:
            lo = l_min
            hi = l_max
        else:
            mode = int((n + 1) * p_succ)
            if mode < l_min:
                mode = l_min
            if mode > l_max:
                mode = l_max
            lo = mode
            while lo > l_min and _add_log_weight(n, lo - 1, lf, log_r, log_t) >= LOG_TERM_FLOOR:
                lo -= 1
            hi = mode
            while hi < l_max and _add_log_weight(n, hi + 1, lf, log_r, log_t) >= LOG_TERM_FLOOR:
                hi += 1
        total = 0.0
        comp = 0.0
        for l in range(lo, hi + 1):
            log_term = _add_log_weight(n, l, lf, log_r, log_t) + logp[n - l]
            if log_term > -np.inf:
                total, comp = _kahan_add(total, comp, np.exp(log_term))
        out[n - n_start] = total
    return out


@njit(nogil=True, cache=True)
def _kahan_sum_numba(values):
    total = 0.0
    comp = 0.0
    for i in range(values.size):
        total, comp = _kahan_add(total, comp, values[i])
    return total


@njit(nogil=True, cache=True)
def _moments_numba(probs):
    """Compensated sums of p, n p and n(n-1) p."""
    s0 = 0.0
    c0 = 0.0
    s1 = 0.0
    c1 = 0.0
    s2 = 0.0
    c2 = 0.0
    for n in range(probs.size):
        p = probs[n]
        s0, c0 = _kahan_add(s0, c0, p)
        s1, c1 = _kahan_add(s1, c1, n * p)
        s2, c2 = _kahan_add(s2, c2, n * (n - 1.0) * p)
    return s0, s1, s2


@njit(nogil=True, cache=True)
def _lachs_pmf_numba(n_c, n_t, epsilon, n_ceiling):
    """
    Mixed-light pmf p_n = e^{-n_c/(1+n_t)} c^n L_n(x) / (1+n_t), with
    c = n_t/(1+n_t) and x = -n_c/(n_t(1+n_t)).

    Runs the Laguerre recurrence on q_n = c^n L_n(x) and rescales q when it
    grows large, so neither the prefactor nor L_n leaves the double range.
    Stops once past the mode with the geometric tail estimate
    p_N rho/(1-rho) <= epsilon, rho = p_N/p_{N-1}, and the matching tail mean
    estimate tail * (N + 1/(1-rho)) <= epsilon * (1 + n_c + n_t).

    Returns (probs, tail_estimate, converged).
    """
    c = n_t / (1.0 + n_t)
    mean_tolerance = epsilon * (1.0 + n_c + n_t)
    xc = -n_c / ((1.0 + n_t) * (1.0 + n_t))
    log_pref = -n_c / (1.0 + n_t) - np.log1p(n_t)
    size = 1024
    probs = np.zeros(size, dtype=np.float64)
    q_prev = 1.0
    q_cur = c - xc
    log_scale = 0.0
    probs[0] = np.exp(log_pref)
    total = probs[0]
    comp = 0.0
    n = 0
    tail = 0.0
    converged = False
    seen_mass = probs[0] > 0.0
    while n + 1 < n_ceiling:
        if n >= 1:
            q_next = (((2.0 * n + 1.0) * c - xc) * q_cur - n * c * c * q_prev) / (n + 1.0)
            q_prev = q_cur
            q_cur = q_next
        if q_cur > 1e200:
            q_cur *= 1e-200
            q_prev *= 1e-200
            log_scale += 200.0 * np.log(10.0)
        n += 1
        if n >= size:
            grown = np.zeros(2 * size, dtype=np.float64)
            grown[:size] = probs
            probs = grown
            size *= 2
        if q_cur > 0.0:
            probs[n] = np.exp(log_pref + log_scale + np.log(q_cur))
        else:
            probs[n] = 0.0
        total, comp = _kahan_add(total, comp, probs[n])
        if probs[n] > 0.0:
            seen_mass = True
        elif seen_mass and probs[n - 1] < 1e-300:
            tail = 0.0
            converged = True
            break
        if probs[n - 1] > 0.0:
            rho = probs[n] / probs[n - 1]
            if rho < 1.0:
                tail = probs[n] * rho / (1.0 - rho)
                tail_mean = tail * (n + 1.0 / (1.0 - rho))
                if tail <= epsilon and tail_mean <= mean_tolerance and total + tail >= 1.0 - 1e-12:
                    converged = True
                    break
    return probs[: n + 1].copy(), tail, converged
