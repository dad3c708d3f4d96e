"""Compiled per-path simulation kernels.

Each path seeds the kernel RNG once from its derived stream seed and then
draws sequentially, so output depends only on (seed, scheme, model) and is
independent of batching or worker layout.

Modes: 0 marginal (fixed step list), 1 exit of (-alpha, alpha), 2 occupation
in [-eps_i, eps_i] until exit of (-1, 1). Exit and hit events are located by
step halving down to h_min inside the detecting step; if the refinement
walk loses the event, the coarse detection stands.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

MODE_MARGINAL = 0
MODE_EXIT = 1
MODE_OCCUPATION = 2

KIND_SINGLE = 0
KIND_CONCAT = 1
KIND_SKEW = 2
KIND_MIXTURE = 3


@njit(cache=True, inline="always")
def _drift(x, n, bp, vals, c_minus, c_plus):
    nx = n * x
    a = 0.0
    m = vals.shape[0]
    if m > 0 and nx >= bp[0] and nx < bp[m]:
        for i in range(m):
            if nx < bp[i + 1]:
                a = vals[i]
                break
    b = n * a
    if nx > 1.0:
        b += c_plus / x
    elif nx < -1.0:
        b += c_minus / x
    return b


@njit(cache=True, inline="always")
def _tamed(x, h, sqh, n, bp, vals, c_minus, c_plus):
    bh = _drift(x, n, bp, vals, c_minus, c_plus) * h
    return x + bh / (1.0 + abs(bh)) + sqh * np.random.normal(0.0, 1.0)


@njit(cache=True, inline="always")
def _substep_size(x, h, rem, inv_n, band, layer, sub_floor, rc):
    """Locally adaptive substep: noise must resolve the local drift scale.

    The rescaled drift varies on scale 1/n near the origin and on scale |x|
    away from it, so the substep keeps sqrt(hh) below max(1/n, |x|/2) / rc,
    re-evaluated after every substep. The configured subdivision floor
    (h / sub_floor) also applies throughout |x| <= band, a buffer of a few
    macro-step deviations around the drift core: steps entering the core
    must already be subdivided, or the drift impulse accumulated while
    crossing the core edge is systematically missed. Substeps never go
    below h/4096.
    """
    ax = abs(x)
    if ax >= layer:
        return rem
    sig = max(inv_n, 0.5 * ax) / rc
    hh = sig * sig
    if ax <= band and hh > h / sub_floor:
        hh = h / sub_floor
    if hh < h / 4096.0:
        hh = h / 4096.0
    if hh > rem:
        hh = rem
    return hh


@njit(cache=True)
def prelimit_paths(seeds, x0, n, bp, vals, c_minus, c_plus,
                   steps_h, dt, sub_floor, band, layer, rc, mode, alpha, h_min,
                   max_steps, eps, record, out_x, out_side, out_time, out_occ,
                   path_out):
    n_paths = seeds.shape[0]
    n_eps = eps.shape[0]
    inv_n = 1.0 / n
    for p in range(n_paths):
        np.random.seed(seeds[p])
        x = x0
        if record:
            path_out[p, 0] = x
        t = 0.0
        done = False
        k = 0
        total = steps_h.shape[0] if mode == MODE_MARGINAL else max_steps
        while k < total and not done:
            h = steps_h[k] if mode == MODE_MARGINAL else dt
            rem = h
            while rem > 1e-18 * h and not done:
                hh = _substep_size(x, h, rem, inv_n, band, layer, sub_floor, rc)
                xp = x
                x = _tamed(x, hh, math.sqrt(hh), n, bp, vals, c_minus, c_plus)
                if mode == MODE_OCCUPATION:
                    for e in range(n_eps):
                        if abs(xp) <= eps[e]:
                            out_occ[p, e] += hh
                if mode != MODE_MARGINAL and abs(x) >= alpha:
                    w = hh
                    xs = xp
                    toff = 0.0
                    while w > h_min:
                        half = 0.5 * w
                        xm = _tamed(xs, half, math.sqrt(half), n, bp, vals,
                                    c_minus, c_plus)
                        if abs(xm) >= alpha:
                            w = half
                        else:
                            xs = xm
                            toff += half
                            w = half
                    xe = _tamed(xs, w, math.sqrt(w), n, bp, vals,
                                c_minus, c_plus)
                    if abs(xe) >= alpha:
                        x = xe
                        t_event = toff + w
                    else:
                        t_event = hh
                    out_side[p] = 1 if x > 0.0 else -1
                    out_time[p] = t + (h - rem) + t_event
                    if mode == MODE_OCCUPATION:
                        for e in range(n_eps):
                            if abs(xp) <= eps[e]:
                                out_occ[p, e] -= hh - t_event
                    done = True
                rem -= hh
            t += h
            k += 1
            if record and not done:
                path_out[p, k] = x
        out_x[p] = x
        if mode != MODE_MARGINAL and not done:
            out_side[p] = 0  # budget exceeded; surfaced by the caller


@njit(cache=True, inline="always")
def _besq(z, h, delta):
    """Exact BESQ(delta) transition over h: 2h Gamma(delta/2 + Poisson(z/2h))."""
    if h <= 0.0:
        return z
    lam = z / (2.0 * h)
    k = np.random.poisson(lam) if lam > 0.0 else 0
    return 2.0 * h * np.random.standard_gamma(0.5 * delta + k)


@njit(cache=True, inline="always")
def _no_hit_prob(nu_abs, w):
    """P(Bessel bridge avoids 0 | endpoints) = I_{+nu}(w) / I_{-nu}(w).

    w is the endpoint product a b / h; nu_abs = 1 - delta/2 in (0, 1) for
    dimensions delta in (0, 2). Power series of both orders; for w >= 40 the
    ratio is 1 to beyond double precision.
    """
    if w <= 0.0:
        return 0.0
    if w >= 40.0:
        return 1.0
    x2 = 0.25 * w * w
    num = 0.0
    term = 1.0 / math.exp(math.lgamma(1.0 + nu_abs))
    k = 0
    while True:
        num += term
        k += 1
        term *= x2 / (k * (k + nu_abs))
        if term < 1e-17 * num or k > 500:
            break
    den = 0.0
    term = 1.0 / math.exp(math.lgamma(1.0 - nu_abs))
    k = 0
    while True:
        den += term
        k += 1
        term *= x2 / (k * (k - nu_abs))
        if term < 1e-17 * den or k > 500:
            break
    ratio = (0.5 * w) ** (2.0 * nu_abs) * num / den
    return min(ratio, 1.0)


@njit(cache=True, inline="always")
def _refine_root_event(zp, h, delta, thresh, upward, h_min):
    """Step-halving localization of sqrt(z) crossing thresh inside a window.

    Returns (found, z_event, offset).
    """
    w = h
    zs = zp
    toff = 0.0
    while w > h_min:
        half = 0.5 * w
        zm = _besq(zs, half, delta)
        hitm = math.sqrt(zm) >= thresh if upward else math.sqrt(zm) <= thresh
        if hitm:
            w = half
        else:
            zs = zm
            toff += half
            w = half
    ze = _besq(zs, w, delta)
    hite = math.sqrt(ze) >= thresh if upward else math.sqrt(ze) <= thresh
    return hite, ze, toff + w


@njit(cache=True)
def limit_paths(seeds, kind, sign0, delta1, delta2, start_abs, pcoin,
                h_hit, steps_h, dt, mode, alpha, h_min, max_steps, record,
                out_val, out_side, out_time, out_hit, path_out):
    n_paths = seeds.shape[0]
    for p in range(n_paths):
        np.random.seed(seeds[p])
        z = start_abs * start_abs
        sgn = sign0
        delta = delta1
        phase = 0
        was_above = False
        if kind == KIND_SKEW:
            if sign0 == 0:
                sgn = 1 if np.random.random() < pcoin else -1
            was_above = start_abs > h_hit
        elif kind == KIND_MIXTURE:
            sgn = 1 if np.random.random() < pcoin else -1
            delta = delta1 if sgn > 0 else delta2
        if record:
            path_out[p, 0] = sgn * start_abs
        hit = np.nan
        done = False
        nu_abs1 = 1.0 - 0.5 * delta1
        t = 0.0
        k = 0
        total = steps_h.shape[0] if mode == MODE_MARGINAL else max_steps
        while k < total and not done:
            h = steps_h[k] if mode == MODE_MARGINAL else dt
            zp = z
            z = _besq(z, h, delta)
            root = math.sqrt(z)
            if kind == KIND_CONCAT and phase == 0 and h > 0.0:
                # exact bridge test for a zero hit inside this step
                w = math.sqrt(zp * z) / h
                if w < 40.0 and np.random.random() >= _no_hit_prob(nu_abs1, w):
                    tau = t + np.random.random() * h
                    hit = tau
                    phase = 1
                    delta = delta2
                    sgn = -sign0
                    z = _besq(0.0, (t + h) - tau, delta)
                    root = math.sqrt(z)
            if kind == KIND_SKEW:
                if root > h_hit:
                    if not was_above:
                        sgn = 1 if np.random.random() < pcoin else -1
                    was_above = True
                else:
                    was_above = False
            if mode == MODE_EXIT and root >= alpha:
                found, ze, toff = _refine_root_event(zp, h, delta, alpha,
                                                     True, h_min)
                if found:
                    z = ze
                out_side[p] = sgn
                out_time[p] = t + (toff if found else h)
                done = True
            t += h
            k += 1
            if record and not done:
                path_out[p, k] = sgn * math.sqrt(z)
        out_val[p] = sgn * math.sqrt(z)
        out_hit[p] = hit
        if mode == MODE_EXIT and not done:
            out_side[p] = 0
