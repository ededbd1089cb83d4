"""Hot numeric loops, each with a numba and a pure-numpy implementation.

The public names (``mc_score``, ``level_sums``, ``pair_sums``) dispatch to the
JIT versions unless ``ESQPT_DISABLE_JIT`` is set. Both versions consume the
same inputs in the same order and are expected to agree bit for bit on
integer tallies; floating accumulations agree to rounding.
"""
import numpy as np

from ._accel import USE_JIT, njit

# ---------------------------------------------------------------------------
# Monte Carlo scoring of sampled phase-space points
# ---------------------------------------------------------------------------
#
# ``u`` holds uniform deviates in [0, 1) of shape (n, d). Points are mapped
# into the box ``lo + width * u``; the polynomial ``sum_t coef[t] prod_j
# x_j**exps[t, j]`` is evaluated and binned on a uniform energy grid starting
# at ``e_lo`` with spacing ``1 / inv_h``. ``dcoef/dexps`` optionally give a
# second polynomial (dH/dlambda) whose values are summed per bin.
#
# tallies[0]: samples below e_lo, tallies[1]: samples at or above the top
# edge, tallies[2]: samples with H <= emax lying in a boundary stratum of
# relative thickness ``edge``.


@njit
def _mc_score_jit(u, lo, width, coef, exps, dcoef, dexps, e_lo, inv_h, emax,
                  edge, counts, slope_sum, under_slope, tallies):
    n, d = u.shape
    nb = counts.shape[0]
    maxdeg = 0
    for t in range(exps.shape[0]):
        for j in range(d):
            if exps[t, j] > maxdeg:
                maxdeg = exps[t, j]
    for t in range(dexps.shape[0]):
        for j in range(d):
            if dexps[t, j] > maxdeg:
                maxdeg = dexps[t, j]
    pw = np.empty((d, maxdeg + 1))
    with_slope = dcoef.shape[0] > 0
    for i in range(n):
        near_edge = False
        for j in range(d):
            uj = u[i, j]
            if uj < edge or uj > 1.0 - edge:
                near_edge = True
            xj = lo[j] + width[j] * uj
            pw[j, 0] = 1.0
            for k in range(1, maxdeg + 1):
                pw[j, k] = pw[j, k - 1] * xj
        H = 0.0
        for t in range(coef.shape[0]):
            term = coef[t]
            for j in range(d):
                e = exps[t, j]
                if e > 0:
                    term = term * pw[j, e]
            H += term
        S = 0.0
        if with_slope:
            for t in range(dcoef.shape[0]):
                term = dcoef[t]
                for j in range(d):
                    e = dexps[t, j]
                    if e > 0:
                        term = term * pw[j, e]
                S += term
        if near_edge and H <= emax:
            tallies[2] += 1
        if H < e_lo:
            tallies[0] += 1
            under_slope[0] += S
            continue
        k = int((H - e_lo) * inv_h)
        if k >= nb:
            tallies[1] += 1
            continue
        counts[k] += 1
        slope_sum[k] += S


def _powers(x, maxdeg):
    pw = [np.ones_like(x)]
    for _ in range(maxdeg):
        pw.append(pw[-1] * x)
    return pw


def _poly_values(pws, coef, exps):
    out = np.zeros(pws[0][0].shape[0])
    for t in range(coef.shape[0]):
        term = np.full(out.shape, coef[t])
        for j, e in enumerate(exps[t]):
            if e > 0:
                term = term * pws[j][e]
        out = out + term
    return out


def _mc_score_numpy(u, lo, width, coef, exps, dcoef, dexps, e_lo, inv_h, emax,
                    edge, counts, slope_sum, under_slope, tallies):
    n, d = u.shape
    nb = counts.shape[0]
    maxdeg = int(max(exps.max(initial=0), dexps.max(initial=0)))
    x = lo[None, :] + width[None, :] * u
    pws = [_powers(x[:, j], maxdeg) for j in range(d)]
    H = _poly_values(pws, coef, exps)
    S = _poly_values(pws, dcoef, dexps) if dcoef.shape[0] else np.zeros(n)
    near_edge = np.any((u < edge) | (u > 1.0 - edge), axis=1)
    tallies[2] += int(np.count_nonzero(near_edge & (H <= emax)))
    below = H < e_lo
    tallies[0] += int(np.count_nonzero(below))
    if np.any(below):
        under_slope[0] += np.sum(S[below])
    k = np.zeros(n, dtype=np.int64)
    k[~below] = ((H[~below] - e_lo) * inv_h).astype(np.int64)
    inside = (~below) & (k < nb)
    tallies[1] += int(np.count_nonzero((~below) & ~inside))
    counts += np.bincount(k[inside], minlength=nb)[:nb]
    if dcoef.shape[0]:
        slope_sum += np.bincount(k[inside], weights=S[inside], minlength=nb)[:nb]


def mc_score(u, lo, width, coef, exps, dcoef, dexps, e_lo, inv_h, nbins, emax,
             edge, jit=None):
    """Score one chunk of uniform deviates; returns fresh per-chunk tallies.

    Returns ``(counts, slope_sum, under_slope, tallies)``.
    """
    nb = int(nbins)
    counts = np.zeros(nb, dtype=np.int64)
    slope_sum = np.zeros(nb)
    under_slope = np.zeros(1)
    tallies = np.zeros(3, dtype=np.int64)
    use = USE_JIT if jit is None else (jit and USE_JIT)
    fn = _mc_score_jit if use else _mc_score_numpy
    fn(np.ascontiguousarray(u, dtype=np.float64), lo, width, coef, exps,
       dcoef, dexps, float(e_lo), float(inv_h), float(emax), float(edge),
       counts, slope_sum, under_slope, tallies)
    return counts, slope_sum, under_slope[0], tallies


# ---------------------------------------------------------------------------
# Gaussian-smoothed level sums: rho(E) = sum_l w_l F(E - E_l) and the
# slope-weighted companion sum_l w_l s_l F(E - E_l).
# ---------------------------------------------------------------------------


@njit(fastmath=True)
def _level_sums_jit(levels, weights, slopes, grid, sigma, reach):
    m = grid.shape[0]
    rho = np.zeros(m)
    cur = np.zeros(m)
    norm = 1.0 / (np.sqrt(2.0 * np.pi) * sigma)
    inv = 1.0 / sigma
    span = reach * sigma
    lo = np.searchsorted(levels, grid - span, side="left")
    hi = np.searchsorted(levels, grid + span, side="right")
    for g in range(m):
        E = grid[g]
        acc_r = 0.0
        acc_c = 0.0
        for k in range(lo[g], hi[g]):
            z = (E - levels[k]) * inv
            w = weights[k] * np.exp(-0.5 * z * z)
            acc_r += w
            acc_c += w * slopes[k]
        rho[g] = norm * acc_r
        cur[g] = norm * acc_c
    return rho, cur


def _level_sums_numpy(levels, weights, slopes, grid, sigma, reach):
    norm = 1.0 / (np.sqrt(2.0 * np.pi) * sigma)
    span = reach * sigma
    lo = np.searchsorted(levels, grid - span, side="left")
    hi = np.searchsorted(levels, grid + span, side="right")
    rho = np.zeros(grid.shape[0])
    cur = np.zeros(grid.shape[0])
    for g in range(grid.shape[0]):
        z = (grid[g] - levels[lo[g]:hi[g]]) / sigma
        w = weights[lo[g]:hi[g]] * norm * np.exp(-0.5 * z * z)
        rho[g] = w.sum()
        cur[g] = (w * slopes[lo[g]:hi[g]]).sum()
    return rho, cur


def level_sums(levels, weights, slopes, grid, sigma, reach=8.0, jit=None):
    """Gaussian kernel sums over sorted ``levels`` evaluated on ``grid``."""
    levels = np.ascontiguousarray(levels, dtype=np.float64)
    if np.any(np.diff(levels) < 0):
        order = np.argsort(levels, kind="stable")
        levels = levels[order]
        weights = np.asarray(weights, dtype=np.float64)[order]
        slopes = np.asarray(slopes, dtype=np.float64)[order]
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    slopes = np.ascontiguousarray(slopes, dtype=np.float64)
    grid = np.ascontiguousarray(grid, dtype=np.float64)
    use = USE_JIT if jit is None else (jit and USE_JIT)
    fn = _level_sums_jit if use else _level_sums_numpy
    return fn(levels, weights, slopes, grid, float(sigma), float(reach))


# ---------------------------------------------------------------------------
# Pairwise sums a_i + b_j <= cut of two ascending arrays, without forming the
# full outer sum.
# ---------------------------------------------------------------------------


@njit
def _pair_count_jit(a, b, cut):
    total = 0
    for i in range(a.shape[0]):
        if a[i] + b[0] > cut:
            break
        for j in range(b.shape[0]):
            if a[i] + b[j] > cut:
                break
            total += 1
    return total


@njit
def _pair_fill_jit(a, b, cut, out_e, out_i, out_j):
    pos = 0
    for i in range(a.shape[0]):
        if a[i] + b[0] > cut:
            break
        for j in range(b.shape[0]):
            s = a[i] + b[j]
            if s > cut:
                break
            out_e[pos] = s
            out_i[pos] = i
            out_j[pos] = j
            pos += 1


def _pair_sums_numpy(a, b, cut):
    nj = np.searchsorted(b, cut - a, side="right")
    # mirror the JIT loop: a_i + b_j <= cut evaluated with the same rounding
    for i in np.nonzero(nj > 0)[0]:
        while nj[i] > 0 and a[i] + b[nj[i] - 1] > cut:
            nj[i] -= 1
        while nj[i] < b.shape[0] and a[i] + b[nj[i]] <= cut:
            nj[i] += 1
    ii = np.repeat(np.arange(a.shape[0]), nj)
    starts = np.cumsum(nj) - nj
    jj = np.arange(ii.shape[0]) - np.repeat(starts, nj)
    return a[ii] + b[jj], ii, jj


def pair_sums(a, b, cut, jit=None):
    """All ``a[i] + b[j] <= cut`` for ascending ``a``, ``b``.

    Returns ``(sums, i, j)`` ordered by ``i`` then ``j``.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        empty = np.zeros(0, dtype=np.int64)
        return np.zeros(0), empty, empty
    use = USE_JIT if jit is None else (jit and USE_JIT)
    if not use:
        return _pair_sums_numpy(a, b, float(cut))
    n = _pair_count_jit(a, b, float(cut))
    out_e = np.empty(n)
    out_i = np.empty(n, dtype=np.int64)
    out_j = np.empty(n, dtype=np.int64)
    _pair_fill_jit(a, b, float(cut), out_e, out_i, out_j)
    return out_e, out_i, out_j
