"""Compiled inner loops for the mode-coupling sum of the field equation.

Each active coupling mode contributes coef * phase(k, eta) * W(k - l,
eta - l t) to the increment.  The k shift is an exact index offset, the
eta shift a 4-tap cubic resample with per-mode constant weights, and the
phase is assembled from per-axis sine/cosine tables so the innermost
loop stays free of transcendental calls on the quantum branch.
"""

import numpy as np

try:
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap

    prange = range


@njit(cache=True, parallel=True, fastmath=True)
def couple_1d(out, w, rowmax, li, coef, jsh, wts, se, ce, vk, lo, hi,
              quantum, row_floor):
    nk, ne = w.shape
    na = li.shape[0]
    for i in prange(nk):
        for a in range(na):
            s = i - li[a]
            if s < 0 or s >= nk:
                continue
            ca = coef[a]
            if rowmax[s] * abs(ca) <= row_floor:
                continue
            ck = vk[a, i]
            sk = 0.0
            ckc = 0.0
            if quantum == 1:
                sk = np.sin(ck)
                ckc = np.cos(ck)
            w0 = wts[a, 0]
            w1 = wts[a, 1]
            w2 = wts[a, 2]
            w3 = wts[a, 3]
            j = jsh[a]
            for e in range(lo[a], hi[a]):
                b = e + j - 1
                acc = w[s, b] * w0 + w[s, b + 1] * w1 + w[s, b + 2] * w2 + w[s, b + 3] * w3
                if quantum == 1:
                    ph = se[a, e] * ckc - ce[a, e] * sk
                else:
                    ph = se[a, e] - ck
                out[i, e] += ca * (ph * acc)


@njit(cache=True, parallel=True, fastmath=True)
def couple_2d(out, w, rowmax, li1, li2, coef, jsh1, jsh2, wts1, wts2,
              se1, ce1, se2, ce2, vk1, vk2, lo1, hi1, lo2, hi2,
              quantum, row_floor):
    nk1, nk2, ne1, ne2 = w.shape
    na = li1.shape[0]
    for i1 in prange(nk1):
        for i2 in range(nk2):
            for a in range(na):
                s1 = i1 - li1[a]
                if s1 < 0 or s1 >= nk1:
                    continue
                s2 = i2 - li2[a]
                if s2 < 0 or s2 >= nk2:
                    continue
                ca = coef[a]
                if rowmax[s1, s2] * abs(ca) <= row_floor:
                    continue
                ck = vk1[a, i1] + vk2[a, i2]
                sk = 0.0
                ckc = 0.0
                if quantum == 1:
                    sk = np.sin(ck)
                    ckc = np.cos(ck)
                wa0 = wts1[a, 0]
                wa1 = wts1[a, 1]
                wa2 = wts1[a, 2]
                wa3 = wts1[a, 3]
                wb0 = wts2[a, 0]
                wb1 = wts2[a, 1]
                wb2 = wts2[a, 2]
                wb3 = wts2[a, 3]
                j1 = jsh1[a]
                j2 = jsh2[a]
                for e1 in range(lo1[a], hi1[a]):
                    b1 = e1 + j1 - 1
                    sA = se1[a, e1]
                    cA = ce1[a, e1]
                    for e2 in range(lo2[a], hi2[a]):
                        b2 = e2 + j2 - 1
                        r0 = (w[s1, s2, b1, b2] * wb0 + w[s1, s2, b1, b2 + 1] * wb1
                              + w[s1, s2, b1, b2 + 2] * wb2 + w[s1, s2, b1, b2 + 3] * wb3)
                        r1 = (w[s1, s2, b1 + 1, b2] * wb0 + w[s1, s2, b1 + 1, b2 + 1] * wb1
                              + w[s1, s2, b1 + 1, b2 + 2] * wb2 + w[s1, s2, b1 + 1, b2 + 3] * wb3)
                        r2 = (w[s1, s2, b1 + 2, b2] * wb0 + w[s1, s2, b1 + 2, b2 + 1] * wb1
                              + w[s1, s2, b1 + 2, b2 + 2] * wb2 + w[s1, s2, b1 + 2, b2 + 3] * wb3)
                        r3 = (w[s1, s2, b1 + 3, b2] * wb0 + w[s1, s2, b1 + 3, b2 + 1] * wb1
                              + w[s1, s2, b1 + 3, b2 + 2] * wb2 + w[s1, s2, b1 + 3, b2 + 3] * wb3)
                        acc = wa0 * r0 + wa1 * r1 + wa2 * r2 + wa3 * r3
                        if quantum == 1:
                            sB = se2[a, e2]
                            cB = ce2[a, e2]
                            ph = (sA * cB + cA * sB) * ckc - (cA * cB - sA * sB) * sk
                        else:
                            ph = sA + se2[a, e2] - ck
                        out[i1, i2, e1, e2] += ca * (ph * acc)
