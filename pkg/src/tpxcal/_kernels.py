"""Compiled inner loops.

Everything here is deterministic given its arguments; the only randomness
is the flash synthesizer, which seeds numba's RNG explicitly per call so
results do not depend on which thread runs the kernel. Arrival times are
int64 ticks throughout and window predicates are integer comparisons.
"""

import numpy as np
from numba import njit

TOA_TICK_NS = 1.5625
TOT_PEAK_TICKS = 64.0  # tot of a member sitting exactly on the flash center


@njit(cache=True)
def cluster_labels(x, y, toa, half_xy, box_t_ticks, lookahead):
    """Greedy seed-anchored box clustering over a toa-sorted stream.

    The earliest unassigned event seeds a cluster; events among the next
    `lookahead` stream entries join it when inside the (2*half_xy+1)^2 pixel
    box around the seed and within box_t_ticks at or after the seed. The box
    never grows with membership. Returns (labels, n_clusters) with cluster
    ids in seed-toa order.
    """
    n = toa.shape[0]
    labels = np.full(n, -1, dtype=np.int64)
    n_clusters = 0
    for i in range(n):
        if labels[i] >= 0:
            continue
        labels[i] = n_clusters
        sx = x[i]
        sy = y[i]
        st = toa[i]
        jmax = i + lookahead + 1
        if jmax > n:
            jmax = n
        for j in range(i + 1, jmax):
            # sorted stream: once past the time window nothing later can join
            if toa[j] - st > box_t_ticks:
                break
            if labels[j] >= 0:
                continue
            dx = x[j] - sx
            if dx < 0:
                dx = -dx
            dy = y[j] - sy
            if dy < 0:
                dy = -dy
            if dx <= half_xy and dy <= half_xy:
                labels[j] = n_clusters
        n_clusters += 1
    return labels, n_clusters


@njit(cache=True)
def csr_from_labels(labels, n_clusters):
    """Group event indices by cluster id, preserving stream order per cluster."""
    n = labels.shape[0]
    counts = np.zeros(n_clusters, dtype=np.int64)
    for i in range(n):
        counts[labels[i]] += 1
    indptr = np.zeros(n_clusters + 1, dtype=np.int64)
    for c in range(n_clusters):
        indptr[c + 1] = indptr[c] + counts[c]
    pos = indptr[:-1].copy()
    indices = np.empty(n, dtype=np.int64)
    for i in range(n):
        c = labels[i]
        indices[pos[c]] = i
        pos[c] += 1
    return indptr, indices


@njit(cache=True)
def centroid_reduce(x, y, toa, tot, indptr, indices, method):
    """Reduce each cluster to one centroid.

    Position: member pixel nearest the unweighted mean member position,
    ties broken by earliest toa then lowest (y, x). toa by `method`:
    0 = mean toa rounded half-up to the nearest tick, 1 = toa of the
    position-selected pixel, 2 = earliest member toa, 3 = toa of the
    max-tot member (tie -> earliest).
    """
    m = indptr.shape[0] - 1
    out_x = np.empty(m, dtype=np.int32)
    out_y = np.empty(m, dtype=np.int32)
    out_toa = np.empty(m, dtype=np.int64)
    out_size = np.empty(m, dtype=np.int32)
    out_tot = np.empty(m, dtype=np.int64)
    for c in range(m):
        lo = indptr[c]
        hi = indptr[c + 1]
        cnt = hi - lo
        sx = 0.0
        sy = 0.0
        s_toa = np.int64(0)
        s_tot = np.int64(0)
        for k in range(lo, hi):
            i = indices[k]
            sx += x[i]
            sy += y[i]
            s_toa += toa[i]
            s_tot += tot[i]
        mx = sx / cnt
        my = sy / cnt

        # position-selected member (members visited in toa order)
        best = indices[lo]
        best_d2 = (x[best] - mx) ** 2 + (y[best] - my) ** 2
        for k in range(lo + 1, hi):
            i = indices[k]
            d2 = (x[i] - mx) ** 2 + (y[i] - my) ** 2
            better = False
            if d2 < best_d2:
                better = True
            elif d2 == best_d2 and toa[i] == toa[best]:
                if y[i] < y[best] or (y[i] == y[best] and x[i] < x[best]):
                    better = True
            if better:
                best = i
                best_d2 = d2

        if method == 0:
            t = (2 * s_toa + cnt) // (2 * cnt)  # round half up, exact in ints
        elif method == 1:
            t = toa[best]
        elif method == 2:
            t = toa[indices[lo]]
        else:
            bt = indices[lo]
            for k in range(lo + 1, hi):
                i = indices[k]
                if tot[i] > tot[bt]:
                    bt = i
            t = toa[bt]

        out_x[c] = x[best]
        out_y[c] = y[best]
        out_toa[c] = t
        out_size[c] = cnt
        out_tot[c] = s_tot
    return out_x, out_y, out_toa, out_size, out_tot


@njit(cache=True)
def greedy_pairs(px, py, toa, dtoa_ticks, sigma_xy, bcx, bcy):
    """Exclusive chronological pair matching under the three windows.

    Scans toa-sorted centroids; each unmatched one searches forward within
    the time window for the unmatched partner with smallest dtoa (tie:
    smallest |x1+x2-2cx|) that also passes both spatial sum windows. Both
    get marked; nothing appears in two pairs.
    """
    n = toa.shape[0]
    matched = np.zeros(n, dtype=np.bool_)
    out_a = np.empty(n // 2 + 1, dtype=np.int64)
    out_b = np.empty(n // 2 + 1, dtype=np.int64)
    cnt = 0
    for i in range(n):
        if matched[i]:
            continue
        best = -1
        best_dt = dtoa_ticks + 1
        best_sx = 1e300
        j = i + 1
        while j < n:
            dt = toa[j] - toa[i]
            if dt > dtoa_ticks:
                break
            if not matched[j]:
                sxa = px[i] + px[j] - 2.0 * bcx
                if sxa < 0:
                    sxa = -sxa
                sya = py[i] + py[j] - 2.0 * bcy
                if sya < 0:
                    sya = -sya
                if sxa <= sigma_xy and sya <= sigma_xy:
                    if dt < best_dt or (dt == best_dt and sxa < best_sx):
                        best = j
                        best_dt = dt
                        best_sx = sxa
            j += 1
        if best >= 0:
            matched[i] = True
            matched[best] = True
            out_a[cnt] = i
            out_b[cnt] = best
            cnt += 1
    return out_a[:cnt], out_b[:cnt]


@njit(cache=True)
def split_dtoa_hist(toa_t, toa_b, n_half, bin_width_ns, counts):
    """Accumulate toa_T - toa_B over all (T, B) pairings inside the range.

    Both inputs are sorted int64 ticks; bins are contiguous, edge-aligned
    at zero, n_half on each side. Returns the number of counted pairings.
    """
    nt = toa_t.shape[0]
    nb = toa_b.shape[0]
    # widest tick distance that could land in a bin
    reach = np.int64(np.ceil(n_half * bin_width_ns / TOA_TICK_NS)) + 1
    total = 0
    lo = 0
    for it in range(nt):
        t = toa_t[it]
        while lo < nb and toa_b[lo] < t - reach:
            lo += 1
        j = lo
        while j < nb and toa_b[j] <= t + reach:
            dt_ns = (t - toa_b[j]) * TOA_TICK_NS
            idx = int(np.floor(dt_ns / bin_width_ns)) + n_half
            if 0 <= idx < 2 * n_half:
                counts[idx] += 1
                total += 1
            j += 1
    return total


@njit(cache=True)
def corr_hist2d(coord, toa, dtoa_ticks, hist, sigma_xy, bc):
    """256x256 (coord_early, coord_late) histogram over temporally close pairs.

    No spatial cut and no exclusivity: every ordered pair with
    0 <= toa_j - toa_i <= dtoa_ticks contributes once. Returns
    (total, diagonal band count, anti-diagonal band count) where the bands
    are |c_j - c_i| <= sigma_xy and |c_i + c_j - 2*bc| <= sigma_xy.
    """
    n = toa.shape[0]
    total = 0
    diag = 0
    anti = 0
    for i in range(n):
        j = i + 1
        while j < n:
            if toa[j] - toa[i] > dtoa_ticks:
                break
            c1 = coord[i]
            c2 = coord[j]
            hist[c1, c2] += 1
            total += 1
            d = c2 - c1
            if d < 0:
                d = -d
            if d <= sigma_xy:
                diag += 1
            s = c1 + c2 - 2.0 * bc
            if s < 0:
                s = -s
            if s <= sigma_xy:
                anti += 1
            j += 1
    return total, diag, anti


@njit(cache=True)
def synth_flashes(
    seed,
    tx,
    ty,
    t_ns,
    flash_label,
    psf_sigma,
    mean_cluster_size,
    jitter_sigma_ns,
    timewalk_coeff_ns,
    ex,
    ey,
    etoa,
    etot,
    elabel,
):
    """Turn flashes (true position + time) into pixel events.

    Per flash: member count n >= 1 (Poisson with the configured mean,
    zeros rejected), member offsets 2-D Gaussian with psf_sigma, one shared
    jitter draw, per-member time-walk delay coeff/tot. Members rounding to
    the same pixel are merged with their Gaussian-density intensities
    accumulated; tot is TOT_PEAK_TICKS * density (>= 1 tick). Returns the
    number of events written, or -1 if the output buffers are too small.
    """
    np.random.seed(seed)
    cap = ex.shape[0]
    n_out = 0
    mpx = np.empty(64, dtype=np.int64)
    mpy = np.empty(64, dtype=np.int64)
    mdens = np.empty(64, dtype=np.float64)
    for f in range(tx.shape[0]):
        n = np.random.poisson(mean_cluster_size)
        while n < 1:
            n = np.random.poisson(mean_cluster_size)
        if jitter_sigma_ns > 0.0:
            jitter = np.random.normal(0.0, jitter_sigma_ns)
        else:
            jitter = 0.0
        if n > mpx.shape[0]:
            mpx = np.empty(n, dtype=np.int64)
            mpy = np.empty(n, dtype=np.int64)
            mdens = np.empty(n, dtype=np.float64)
        n_unique = 0
        for _ in range(n):
            if psf_sigma > 0.0:
                dx = np.random.normal(0.0, psf_sigma)
                dy = np.random.normal(0.0, psf_sigma)
            else:
                dx = 0.0
                dy = 0.0
            p = int(np.floor(tx[f] + dx + 0.5))
            q = int(np.floor(ty[f] + dy + 0.5))
            if p < 0:
                p = 0
            elif p > 255:
                p = 255
            if q < 0:
                q = 0
            elif q > 255:
                q = 255
            if psf_sigma > 0.0:
                ddx = p - tx[f]
                ddy = q - ty[f]
                dens = np.exp(-(ddx * ddx + ddy * ddy) / (2.0 * psf_sigma * psf_sigma))
            else:
                dens = 1.0
            merged = False
            for u in range(n_unique):
                if mpx[u] == p and mpy[u] == q:
                    mdens[u] += dens
                    merged = True
                    break
            if not merged:
                mpx[n_unique] = p
                mpy[n_unique] = q
                mdens[n_unique] = dens
                n_unique += 1
        if n_out + n_unique > cap:
            return -1
        for u in range(n_unique):
            tot = int(np.floor(TOT_PEAK_TICKS * mdens[u] + 0.5))
            if tot < 1:
                tot = 1
            elif tot > 65535:
                tot = 65535
            delay = timewalk_coeff_ns / tot
            toa_ns = t_ns[f] + jitter + delay
            ticks = np.int64(np.floor(toa_ns / TOA_TICK_NS + 0.5))
            if ticks < 0:
                ticks = 0
            ex[n_out] = mpx[u]
            ey[n_out] = mpy[u]
            etoa[n_out] = ticks
            etot[n_out] = tot
            elabel[n_out] = flash_label[f]
            n_out += 1
    return n_out
