"""Pure-Python versions of the compiled kernels (same signatures, same results).

Used when the extension is not built or ``FLASHREAD_PURE=1`` is set.  They are
orders of magnitude slower; fine for toy codes and for cross-checking.
"""
import numpy as np

TANH_CLIP = 1.0 - 2.0 ** -50
_MASK = (1 << 64) - 1


def bp_decode_layered(chk_ptr, chk_var, llr, max_iter, posterior, edge_msg, early_stop=True):
    chk_ptr = np.asarray(chk_ptr)
    chk_var = np.asarray(chk_var)
    m = chk_ptr.size - 1
    posterior[:] = llr
    edge_msg[:] = 0.0
    rows = [chk_var[chk_ptr[c]:chk_ptr[c + 1]] for c in range(m)]
    row_of_edge = np.repeat(np.arange(m), np.diff(chk_ptr))
    ok = False
    for it in range(1, max_iter + 1):
        for c in range(m):
            lo, hi = chk_ptr[c], chk_ptr[c + 1]
            if hi == lo:
                continue
            idx = rows[c]
            t = posterior[idx] - edge_msg[lo:hi]
            th = np.tanh(0.5 * t)
            fwd = np.concatenate(([1.0], np.cumprod(th)[:-1]))
            bwd = np.concatenate((np.cumprod(th[::-1])[:-1][::-1], [1.0]))
            x = 2.0 * np.arctanh(np.clip(fwd * bwd, -TANH_CLIP, TANH_CLIP))
            edge_msg[lo:hi] = x
            posterior[idx] = t + x
        hard = (posterior < 0.0).astype(np.int64)
        syn = np.bincount(row_of_edge, weights=hard[chk_var], minlength=m).astype(np.int64) & 1
        ok = not np.any(syn) and not np.any(posterior[chk_var] == 0.0)
        if ok and early_stop:
            return True, it
    return bool(ok), max_iter


def _splitmix(state):
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


def peg_construct(var_deg, chk_target, seed, d_ace, eta_ace, soft=False):
    var_deg = [int(d) for d in var_deg]
    chk_target = [int(d) for d in chk_target]
    n, m = len(var_deg), len(chk_target)
    vadj = [[] for _ in range(n)]
    cadj = [[] for _ in range(m)]
    hist = np.zeros(4 * (m + 2) + 4, dtype=np.int64)
    state = int(seed) & _MASK
    viol = overflow = 0
    inf = 1 << 30
    for v in range(n):
        for _ in range(var_deg[v]):
            cdepth, cace = {}, {}
            vdepth, vace = {v: 0}, {v: var_deg[v] - 2}
            frontier = [v]
            level = 0
            while frontier:
                cfront = []
                for u in frontier:
                    for c in vadj[u]:
                        if c not in cdepth:
                            cdepth[c] = level
                            cace[c] = vace[u]
                            cfront.append(c)
                        elif cdepth[c] == level and vace[u] < cace[c]:
                            cace[c] = vace[u]
                nxt = []
                for c in cfront:
                    for u in cadj[c]:
                        a = cace[c] + var_deg[u] - 2
                        if u not in vdepth:
                            vdepth[u] = level + 1
                            vace[u] = a
                            nxt.append(u)
                        elif vdepth[u] == level + 1 and a < vace[u]:
                            vace[u] = a
                frontier = nxt
                level += 1
            for relax in (0, 1):
                best = None
                cand = []
                for c in range(m):
                    is_open = len(cadj[c]) < chk_target[c]
                    if not relax and not soft and not is_open:
                        continue
                    if c in cdepth:
                        if cdepth[c] == 0:
                            continue
                        dep, a = cdepth[c], cace[c]
                    else:
                        dep, a = inf, inf
                    key = (dep, int(is_open or not soft), -len(cadj[c]), a)
                    if best is None or key > best:
                        best, cand = key, [c]
                    elif key == best:
                        cand.append(c)
                if cand:
                    if relax or best[1] == 0:
                        overflow += 1
                    break
            if not cand:
                raise ValueError("infeasible degree sequence: no check can accept an edge")
            state, r = _splitmix(state)
            c = cand[r % len(cand)]
            if best[0] != inf:
                hist[2 * best[0] + 2] += 1
                if 2 * best[0] + 2 <= 2 * d_ace and best[3] < eta_ace:
                    viol += 1
            vadj[v].append(c)
            cadj[c].append(v)
    edge_chk = np.array([c for v in range(n) for c in vadj[v]], dtype=np.int32)
    return edge_chk, hist, viol, overflow


def boxplus_pmf(ap, am, bp, bm, table, jcut=None):
    # jcut only accelerates the compiled version; the full table gives the same sums
    w_plus = np.outer(ap, bp) + np.outer(am, bm)
    w_minus = np.outer(ap, bm) + np.outer(am, bp)
    g = ap.size
    idx = table.ravel()
    outp = np.bincount(idx, weights=w_plus.ravel(), minlength=g)
    outm = np.bincount(idx, weights=w_minus.ravel(), minlength=g)
    return outp, outm
