# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled selective-scan and neighborhood-attention kernels.

All arrays are C-contiguous; outputs are caller-allocated and overwritten.
"""

import numpy as np

from libc.math cimport exp, INFINITY

ctypedef fused real:
    float
    double


cdef inline Py_ssize_t _start(Py_ssize_t i, Py_ssize_t k, Py_ssize_t keff, Py_ssize_t n) nogil:
    cdef Py_ssize_t s = i - k // 2
    if s < 0:
        s = 0
    if s + keff > n:
        s = n - keff
    return s


def scan_forward(real[:, :, ::1] u, real[:, :, ::1] delta, real[:, ::1] A,
                 real[:, :, :, ::1] Bm, real[:, :, :, ::1] Cm, real[::1] Dskip,
                 real[:, :, ::1] y):
    cdef Py_ssize_t nb = u.shape[0], nd = u.shape[1], nl = u.shape[2]
    cdef Py_ssize_t nn = A.shape[1], ng = Bm.shape[1]
    cdef Py_ssize_t dpg = nd // ng
    cdef Py_ssize_t b, d, n, t, g
    cdef real a, h, dt
    with nogil:
        for b in range(nb):
            for d in range(nd):
                g = d // dpg
                for t in range(nl):
                    y[b, d, t] = Dskip[d] * u[b, d, t]
                for n in range(nn):
                    a = A[d, n]
                    h = 0
                    for t in range(nl):
                        dt = delta[b, d, t]
                        h = exp(dt * a) * h + dt * Bm[b, g, n, t] * u[b, d, t]
                        y[b, d, t] += Cm[b, g, n, t] * h


def scan_backward(real[:, :, ::1] u, real[:, :, ::1] delta, real[:, ::1] A,
                  real[:, :, :, ::1] Bm, real[:, :, :, ::1] Cm, real[::1] Dskip,
                  real[:, :, ::1] dy, real[:, :, ::1] du, real[:, :, ::1] ddelta,
                  real[:, ::1] dA, real[:, :, :, ::1] dB, real[:, :, :, ::1] dC,
                  real[::1] dD):
    cdef Py_ssize_t nb = u.shape[0], nd = u.shape[1], nl = u.shape[2]
    cdef Py_ssize_t nn = A.shape[1], ng = Bm.shape[1]
    cdef Py_ssize_t dpg = nd // ng
    cdef Py_ssize_t b, d, n, t, g
    cdef real a, h, dt, decay, dh, carry, hprev, acc_a, acc_d
    hbuf_arr = np.empty(nl, dtype=np.float64 if real is double else np.float32)
    cdef real[::1] hbuf = hbuf_arr
    du[...] = 0
    ddelta[...] = 0
    dA[...] = 0
    dB[...] = 0
    dC[...] = 0
    dD[...] = 0
    with nogil:
        for b in range(nb):
            for d in range(nd):
                g = d // dpg
                acc_d = 0
                for t in range(nl):
                    acc_d = acc_d + dy[b, d, t] * u[b, d, t]
                    du[b, d, t] = Dskip[d] * dy[b, d, t]
                dD[d] += acc_d
                for n in range(nn):
                    a = A[d, n]
                    h = 0
                    for t in range(nl):
                        dt = delta[b, d, t]
                        h = exp(dt * a) * h + dt * Bm[b, g, n, t] * u[b, d, t]
                        hbuf[t] = h
                    carry = 0
                    acc_a = 0
                    for t in range(nl - 1, -1, -1):
                        dt = delta[b, d, t]
                        decay = exp(dt * a)
                        dh = carry + dy[b, d, t] * Cm[b, g, n, t]
                        hprev = hbuf[t - 1] if t > 0 else 0
                        dC[b, g, n, t] += dy[b, d, t] * hbuf[t]
                        ddelta[b, d, t] += dh * (a * decay * hprev + Bm[b, g, n, t] * u[b, d, t])
                        acc_a = acc_a + dh * dt * decay * hprev
                        dB[b, g, n, t] += dh * dt * u[b, d, t]
                        du[b, d, t] += dh * dt * Bm[b, g, n, t]
                        carry = decay * dh
                    dA[d, n] += acc_a


def natten_forward(real[:, :, :, ::1] q, real[:, :, :, ::1] k, real[:, :, :, ::1] v,
                   real[:, :, ::1] rpb, Py_ssize_t height, Py_ssize_t width,
                   Py_ssize_t ksize, double scale,
                   real[:, :, :, ::1] out, real[:, :, :, ::1] attn):
    cdef Py_ssize_t nb = q.shape[0], nh = q.shape[1], hd = q.shape[3]
    cdef Py_ssize_t kh = min(ksize, height), kw = min(ksize, width)
    cdef Py_ssize_t b, hh, i, j, si, sj, r, c, e, qi, kl, idx
    cdef real s, m, tot, w
    with nogil:
        for b in range(nb):
            for hh in range(nh):
                for i in range(height):
                    si = _start(i, ksize, kh, height)
                    for j in range(width):
                        sj = _start(j, ksize, kw, width)
                        qi = i * width + j
                        m = -INFINITY
                        idx = 0
                        for r in range(kh):
                            for c in range(kw):
                                kl = (si + r) * width + sj + c
                                s = 0
                                for e in range(hd):
                                    s = s + q[b, hh, qi, e] * k[b, hh, kl, e]
                                s = s * <real>scale + rpb[hh, si + r - i + ksize - 1, sj + c - j + ksize - 1]
                                attn[b, hh, qi, idx] = s
                                if s > m:
                                    m = s
                                idx = idx + 1
                        tot = 0
                        for idx in range(kh * kw):
                            w = exp(attn[b, hh, qi, idx] - m)
                            attn[b, hh, qi, idx] = w
                            tot = tot + w
                        for e in range(hd):
                            out[b, hh, qi, e] = 0
                        idx = 0
                        for r in range(kh):
                            for c in range(kw):
                                kl = (si + r) * width + sj + c
                                w = attn[b, hh, qi, idx] / tot
                                attn[b, hh, qi, idx] = w
                                for e in range(hd):
                                    out[b, hh, qi, e] += w * v[b, hh, kl, e]
                                idx = idx + 1


def natten_backward(real[:, :, :, ::1] q, real[:, :, :, ::1] k, real[:, :, :, ::1] v,
                    real[:, :, ::1] rpb, real[:, :, :, ::1] attn, real[:, :, :, ::1] dout,
                    Py_ssize_t height, Py_ssize_t width, Py_ssize_t ksize, double scale,
                    real[:, :, :, ::1] dq, real[:, :, :, ::1] dk, real[:, :, :, ::1] dv,
                    real[:, :, ::1] drpb):
    cdef Py_ssize_t nb = q.shape[0], nh = q.shape[1], hd = q.shape[3]
    cdef Py_ssize_t kh = min(ksize, height), kw = min(ksize, width)
    cdef Py_ssize_t b, hh, i, j, si, sj, r, c, e, qi, kl, idx
    cdef real s, w, dot, dl
    cdef real sc = <real>scale
    buf_arr = np.empty(kh * kw, dtype=np.float64 if real is double else np.float32)
    cdef real[::1] dat = buf_arr
    dq[...] = 0
    dk[...] = 0
    dv[...] = 0
    drpb[...] = 0
    with nogil:
        for b in range(nb):
            for hh in range(nh):
                for i in range(height):
                    si = _start(i, ksize, kh, height)
                    for j in range(width):
                        sj = _start(j, ksize, kw, width)
                        qi = i * width + j
                        dot = 0
                        idx = 0
                        for r in range(kh):
                            for c in range(kw):
                                kl = (si + r) * width + sj + c
                                s = 0
                                w = attn[b, hh, qi, idx]
                                for e in range(hd):
                                    s = s + dout[b, hh, qi, e] * v[b, hh, kl, e]
                                    dv[b, hh, kl, e] += w * dout[b, hh, qi, e]
                                dat[idx] = s
                                dot = dot + w * s
                                idx = idx + 1
                        idx = 0
                        for r in range(kh):
                            for c in range(kw):
                                kl = (si + r) * width + sj + c
                                dl = attn[b, hh, qi, idx] * (dat[idx] - dot)
                                drpb[hh, si + r - i + ksize - 1, sj + c - j + ksize - 1] += dl
                                dl = dl * sc
                                for e in range(hd):
                                    dq[b, hh, qi, e] += dl * k[b, hh, kl, e]
                                    dk[b, hh, kl, e] += dl * q[b, hh, qi, e]
                                idx = idx + 1
