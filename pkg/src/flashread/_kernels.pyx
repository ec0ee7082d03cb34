# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.  ``flashread._fallback`` mirrors every function here."""
import numpy as np
cimport numpy as cnp
from libc.math cimport tanh, atanh, fabs, round as cround
from libc.stdint cimport uint64_t, int32_t, int64_t

cnp.import_array()

cdef double TANH_CLIP = 1.0 - 2.0 ** -50


def bp_decode_layered(const int32_t[::1] chk_ptr, const int32_t[::1] chk_var,
                      const double[::1] llr, int max_iter,
                      double[::1] posterior, double[::1] edge_msg, bint early_stop=True):
    """Check-serial sum-product.  Returns (converged, iterations)."""
    cdef Py_ssize_t m = chk_ptr.shape[0] - 1
    cdef Py_ssize_t n = llr.shape[0]
    cdef Py_ssize_t c, e, lo, hi, d, i, it
    cdef double prod, x
    cdef int parity, ok
    cdef Py_ssize_t max_deg = 0
    for c in range(m):
        if chk_ptr[c + 1] - chk_ptr[c] > max_deg:
            max_deg = chk_ptr[c + 1] - chk_ptr[c]
    cdef double[::1] t = np.empty(max_deg, dtype=np.float64)
    cdef double[::1] th = np.empty(max_deg, dtype=np.float64)
    cdef double[::1] fwd = np.empty(max_deg + 1, dtype=np.float64)

    for i in range(n):
        posterior[i] = llr[i]
    for e in range(chk_var.shape[0]):
        edge_msg[e] = 0.0

    for it in range(1, max_iter + 1):
        for c in range(m):
            lo = chk_ptr[c]
            hi = chk_ptr[c + 1]
            d = hi - lo
            fwd[0] = 1.0
            for i in range(d):
                t[i] = posterior[chk_var[lo + i]] - edge_msg[lo + i]
                th[i] = tanh(0.5 * t[i])
                fwd[i + 1] = fwd[i] * th[i]
            prod = 1.0  # running product from the right
            for i in range(d - 1, -1, -1):
                x = fwd[i] * prod
                if x > TANH_CLIP:
                    x = TANH_CLIP
                elif x < -TANH_CLIP:
                    x = -TANH_CLIP
                x = 2.0 * atanh(x)
                edge_msg[lo + i] = x
                posterior[chk_var[lo + i]] = t[i] + x
                prod = prod * th[i]
        ok = 1
        for c in range(m):
            parity = 0
            for e in range(chk_ptr[c], chk_ptr[c + 1]):
                x = posterior[chk_var[e]]
                if x < 0.0:
                    parity ^= 1
                elif x == 0.0:
                    parity = 2  # undecided bit: check cannot count as satisfied
                    break
            if parity:
                ok = 0
                break
        if ok and early_stop:
            return True, it
    return bool(ok), max_iter


cdef inline uint64_t splitmix_next(uint64_t* state) nogil:
    cdef uint64_t z
    state[0] += <uint64_t>0x9E3779B97F4A7C15
    z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


def peg_construct(const int32_t[::1] var_deg, const int32_t[::1] chk_target,
                  uint64_t seed, int d_ace, int eta_ace, bint soft=False):
    """Progressive edge growth with ACE tie-breaking.

    Variables are connected in index order.  Returns (edge_chk, hist, viol,
    overflow):
    edge_chk[var_ptr[v] + k] is the k-th check of variable v, hist[L] counts
    edges that closed a shortest cycle of length L, viol counts edges closing a
    cycle of length <= 2*d_ace with ACE < eta_ace, overflow counts edges that
    had to go to a check already at its target degree.
    """
    cdef Py_ssize_t n = var_deg.shape[0]
    cdef Py_ssize_t m = chk_target.shape[0]
    cdef Py_ssize_t v, k, c, u, j, i, e
    cdef int max_vd = 0, max_cd = 0
    for v in range(n):
        if var_deg[v] > max_vd:
            max_vd = var_deg[v]
    for c in range(m):
        if chk_target[c] > max_cd:
            max_cd = chk_target[c]
    cdef int32_t[:, ::1] vadj = np.full((n, max(max_vd, 1)), -1, dtype=np.int32)
    cdef int32_t[::1] vcnt = np.zeros(n, dtype=np.int32)
    cdef int32_t[:, ::1] cadj = np.full((m, max(max_cd, 1)), -1, dtype=np.int32)
    cdef int32_t[::1] ccnt = np.zeros(m, dtype=np.int32)
    cdef int64_t[::1] cstamp = np.zeros(m, dtype=np.int64)
    cdef int64_t[::1] vstamp = np.zeros(n, dtype=np.int64)
    cdef int32_t[::1] cdepth = np.zeros(m, dtype=np.int32)
    cdef int32_t[::1] cace = np.zeros(m, dtype=np.int32)
    cdef int32_t[::1] vace = np.zeros(n, dtype=np.int32)
    cdef int32_t[::1] vdepth = np.zeros(n, dtype=np.int32)
    cdef int32_t[::1] frontier = np.empty(n, dtype=np.int32)
    cdef int32_t[::1] nxt = np.empty(n, dtype=np.int32)
    cdef int32_t[::1] cfront = np.empty(m, dtype=np.int32)
    cdef int32_t[::1] cand = np.empty(m, dtype=np.int32)
    hist_np = np.zeros(4 * (m + 2) + 4, dtype=np.int64)
    cdef int64_t[::1] hist = hist_np
    cdef int64_t stamp = 0
    cdef uint64_t state = seed
    cdef int nf, nn, ncf, level, ncand, best_depth, best_deg, best_ace, dep, a, viol = 0
    cdef int relax, overflow = 0, is_open, best_open
    cdef int INF = 1 << 30

    for v in range(n):
        for k in range(var_deg[v]):
            stamp += 1
            # level-synchronous BFS over the partial graph
            vstamp[v] = stamp
            vdepth[v] = 0
            vace[v] = var_deg[v] - 2
            frontier[0] = v
            nf = 1
            level = 0
            while nf > 0:
                ncf = 0
                for i in range(nf):
                    u = frontier[i]
                    for j in range(vcnt[u]):
                        c = vadj[u, j]
                        if cstamp[c] != stamp:
                            cstamp[c] = stamp
                            cdepth[c] = level
                            cace[c] = vace[u]
                            cfront[ncf] = c
                            ncf += 1
                        elif cdepth[c] == level and vace[u] < cace[c]:
                            cace[c] = vace[u]
                nn = 0
                for i in range(ncf):
                    c = cfront[i]
                    for j in range(ccnt[c]):
                        u = cadj[c, j]
                        a = cace[c] + var_deg[u] - 2
                        if vstamp[u] != stamp:
                            vstamp[u] = stamp
                            vdepth[u] = level + 1
                            vace[u] = a
                            nxt[nn] = u
                            nn += 1
                        elif vdepth[u] == level + 1 and a < vace[u]:
                            vace[u] = a
                for i in range(nn):
                    frontier[i] = nxt[i]
                nf = nn
                level += 1
            # candidate selection: farthest, then (soft mode) below target, then
            # least loaded, then largest ACE.  In hard mode a full check is only
            # taken when no open one is left; either way such edges are counted.
            for relax in range(2):
                ncand = 0
                best_depth = -1
                best_open = -1
                best_deg = INF
                best_ace = -INF
                for c in range(m):
                    is_open = 1 if ccnt[c] < chk_target[c] else 0
                    if relax == 0 and not soft and not is_open:
                        continue
                    if cstamp[c] == stamp:
                        if cdepth[c] == 0:
                            continue
                        dep = cdepth[c]
                        a = cace[c]
                    else:
                        dep = INF
                        a = INF
                    if not soft:
                        is_open = 1
                    if (dep > best_depth
                            or (dep == best_depth and is_open > best_open)
                            or (dep == best_depth and is_open == best_open and ccnt[c] < best_deg)
                            or (dep == best_depth and is_open == best_open and ccnt[c] == best_deg
                                and a > best_ace)):
                        best_depth = dep
                        best_open = is_open
                        best_deg = ccnt[c]
                        best_ace = a
                        ncand = 0
                    if (dep == best_depth and is_open == best_open and ccnt[c] == best_deg
                            and a == best_ace):
                        cand[ncand] = c
                        ncand += 1
                if ncand > 0:
                    if relax or (soft and best_open == 0):
                        overflow += 1
                    break
            if ncand == 0:
                raise ValueError("infeasible degree sequence: no check can accept an edge")
            c = cand[splitmix_next(&state) % <uint64_t>ncand]
            if best_depth != INF:
                hist[2 * best_depth + 2] += 1
                if 2 * best_depth + 2 <= 2 * d_ace and best_ace < eta_ace:
                    viol += 1
            vadj[v, vcnt[v]] = c
            vcnt[v] += 1
            cadj[c, ccnt[c]] = v
            ccnt[c] += 1

    total = 0
    for v in range(n):
        total += vcnt[v]
    edge_np = np.empty(total, dtype=np.int32)
    cdef int32_t[::1] edge_chk = edge_np
    e = 0
    for v in range(n):
        for k in range(vcnt[v]):
            edge_chk[e] = vadj[v, k]
            e += 1
    return edge_np, hist_np, viol, overflow


def boxplus_pmf(const double[::1] ap, const double[::1] am,
                const double[::1] bp, const double[::1] bm,
                const int32_t[:, ::1] table, const int32_t[::1] jcut):
    """Density of a [+] b for magnitude/sign pmfs on a common grid.

    table[i, j] is the output bin of magnitudes (i, j) and is symmetric;
    table[i, j] == i for every j >= jcut[i] >= i, so those pairs are folded in
    with suffix sums instead of one by one.
    """
    cdef Py_ssize_t g = ap.shape[0]
    cdef Py_ssize_t r, s, cut, cut2
    cdef int32_t idx
    outp_np = np.zeros(g, dtype=np.float64)
    outm_np = np.zeros(g, dtype=np.float64)
    cdef double[::1] outp = outp_np
    cdef double[::1] outm = outm_np
    sap_np = np.zeros(g + 1, dtype=np.float64)
    sam_np = np.zeros(g + 1, dtype=np.float64)
    sbp_np = np.zeros(g + 1, dtype=np.float64)
    sbm_np = np.zeros(g + 1, dtype=np.float64)
    cdef double[::1] sap = sap_np
    cdef double[::1] sam = sam_np
    cdef double[::1] sbp = sbp_np
    cdef double[::1] sbm = sbm_np
    for r in range(g - 1, -1, -1):
        sap[r] = sap[r + 1] + ap[r]
        sam[r] = sam[r + 1] + am[r]
        sbp[r] = sbp[r + 1] + bp[r]
        sbm[r] = sbm[r + 1] + bm[r]
    for r in range(g):
        cut = jcut[r]
        # pairs (a at r, b at s) and (a at s, b at r) with s >= r
        for s in range(r, cut):
            idx = table[r, s]
            outp[idx] += ap[r] * bp[s] + am[r] * bm[s]
            outm[idx] += ap[r] * bm[s] + am[r] * bp[s]
            if s != r:
                outp[idx] += ap[s] * bp[r] + am[s] * bm[r]
                outm[idx] += ap[s] * bm[r] + am[s] * bp[r]
        outp[r] += ap[r] * sbp[cut] + am[r] * sbm[cut]
        outm[r] += ap[r] * sbm[cut] + am[r] * sbp[cut]
        cut2 = cut if cut > r else r + 1
        outp[r] += bp[r] * sap[cut2] + bm[r] * sam[cut2]
        outm[r] += bm[r] * sap[cut2] + bp[r] * sam[cut2]
    return outp_np, outm_np
