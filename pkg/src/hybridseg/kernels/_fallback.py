"""Pure numpy implementations of the hot kernels.

Signatures mirror the compiled module exactly; outputs are written into
caller-allocated arrays.
"""

from functools import lru_cache

import numpy as np
from scipy import sparse


# -- selective scan ---------------------------------------------------------
def _expand_groups(m, nd):
    # [B, G, N, L] -> [L, B, D, N] with channel d reading group d // (D / G)
    nb, ng, nn, nl = m.shape
    rep = np.repeat(m, nd // ng, axis=1)
    return rep.transpose(3, 0, 1, 2)


def _states(u, delta, A, Bm):
    nb, nd, nl = u.shape
    dA = np.exp(delta.transpose(2, 0, 1)[..., None] * A)          # [L, B, D, N]
    dBu = (delta * u).transpose(2, 0, 1)[..., None] * _expand_groups(Bm, nd)
    hs = np.empty_like(dA)
    h = np.zeros(dA.shape[1:], dtype=u.dtype)
    for t in range(nl):
        h = dA[t] * h + dBu[t]
        hs[t] = h
    return dA, hs


def scan_forward(u, delta, A, Bm, Cm, Dskip, y):
    nd = u.shape[1]
    _, hs = _states(u, delta, A, Bm)
    Ce = _expand_groups(Cm, nd)
    y[...] = (hs * Ce).sum(-1).transpose(1, 2, 0) + Dskip[None, :, None] * u


def scan_backward(u, delta, A, Bm, Cm, Dskip, dy, du, ddelta, dA_out, dB, dC, dD):
    nb, nd, nl = u.shape
    ng = Bm.shape[1]
    dA, hs = _states(u, delta, A, Bm)
    Be = _expand_groups(Bm, nd)
    Ce = _expand_groups(Cm, nd)
    dyt = dy.transpose(2, 0, 1)[..., None]                        # [L, B, D, 1]
    dh_all = np.empty_like(hs)
    carry = np.zeros(hs.shape[1:], dtype=u.dtype)
    for t in range(nl - 1, -1, -1):
        carry = carry + dyt[t] * Ce[t]
        dh_all[t] = carry
        carry = dA[t] * carry
    hprev = np.concatenate([np.zeros_like(hs[:1]), hs[:-1]], axis=0)
    ut = u.transpose(2, 0, 1)[..., None]
    dt = delta.transpose(2, 0, 1)[..., None]
    dC_e = dyt * hs                                               # [L, B, D, N]
    dB_e = dh_all * dt * ut
    ddelta[...] = (dh_all * (A * dA * hprev + Be * ut)).sum(-1).transpose(1, 2, 0)
    du[...] = ((dh_all * dt * Be).sum(-1)).transpose(1, 2, 0) + Dskip[None, :, None] * dy
    dA_out[...] = (dh_all * dt * dA * hprev).sum(axis=(0, 1))
    dD[...] = (dy * u).sum(axis=(0, 2))
    # fold channels back into their groups: [L, B, D, N] -> [B, G, N, L]
    dB[...] = dB_e.reshape(nl, nb, ng, nd // ng, -1).sum(3).transpose(1, 2, 3, 0)
    dC[...] = dC_e.reshape(nl, nb, ng, nd // ng, -1).sum(3).transpose(1, 2, 3, 0)


# -- neighborhood attention -------------------------------------------------
def window_starts(n, k):
    """Clamped window start per position along one axis, plus the window length."""
    keff = min(k, n)
    starts = np.clip(np.arange(n) - k // 2, 0, n - keff)
    return starts, keff


@lru_cache(maxsize=64)
def neighborhood_index(height, width, k):
    """Key indices [L, Kh*Kw] and flat bias-table indices for every query."""
    sh, kh = window_starts(height, k)
    sw, kw = window_starts(width, k)
    rows = sh[:, None] + np.arange(kh)                           # [H, Kh]
    cols = sw[:, None] + np.arange(kw)                           # [W, Kw]
    qi = np.arange(height)
    qj = np.arange(width)
    key = rows[:, None, :, None] * width + cols[None, :, None, :]    # [H, W, Kh, Kw]
    rel_r = rows - qi[:, None] + k - 1
    rel_c = cols - qj[:, None] + k - 1
    bias = rel_r[:, None, :, None] * (2 * k - 1) + rel_c[None, :, None, :]
    L = height * width
    key = key.reshape(L, kh * kw)
    bias = bias.reshape(L, kh * kw)
    scatter = sparse.csr_matrix(
        (np.ones(key.size), (key.ravel(), np.arange(key.size))), shape=(L, key.size)
    )
    return key, bias, scatter


_CHUNK = 1 << 22


def natten_forward(q, k, v, rpb, height, width, ksize, scale, out, attn):
    nb, nh, L, hd = q.shape
    key, bias, _ = neighborhood_index(height, width, ksize)
    nk = key.shape[1]
    table = rpb.reshape(nh, -1)
    step = max(1, _CHUNK // max(1, nb * nh * nk * hd))
    for s in range(0, L, step):
        e = min(L, s + step)
        kg = k[:, :, key[s:e]]                                   # [B, h, l, K2, hd]
        vg = v[:, :, key[s:e]]
        logits = np.einsum("bhld,bhlkd->bhlk", q[:, :, s:e], kg) * scale
        logits += table[:, bias[s:e]][None]
        logits -= logits.max(-1, keepdims=True)
        w = np.exp(logits)
        w /= w.sum(-1, keepdims=True)
        attn[:, :, s:e] = w
        out[:, :, s:e] = np.einsum("bhlk,bhlkd->bhld", w, vg)


def natten_backward(q, k, v, rpb, attn, dout, height, width, ksize, scale, dq, dk, dv, drpb):
    nb, nh, L, hd = q.shape
    key, bias, scatter = neighborhood_index(height, width, ksize)
    nk = key.shape[1]
    kg = k[:, :, key]
    vg = v[:, :, key]
    dattn = np.einsum("bhld,bhlkd->bhlk", dout, vg)
    dlog = attn * (dattn - (attn * dattn).sum(-1, keepdims=True))
    dq[...] = np.einsum("bhlk,bhlkd->bhld", dlog, kg) * scale

    def scatter_keys(vals):
        # vals [B, h, L, K2, hd] -> [B, h, L, hd] summed onto key positions
        flat = vals.reshape(nb * nh, L * nk, hd).transpose(1, 0, 2).reshape(L * nk, -1)
        res = scatter @ flat
        return np.asarray(res).reshape(L, nb * nh, hd).transpose(1, 0, 2).reshape(nb, nh, L, hd)

    dk[...] = scatter_keys(dlog[..., None] * q[:, :, :, None, :] * scale)
    dv[...] = scatter_keys(attn[..., None] * dout[:, :, :, None, :])
    size = (2 * ksize - 1) ** 2
    per_head = dlog.sum(0).reshape(nh, L * nk)
    drpb[...] = np.stack(
        [np.bincount(bias.ravel(), weights=per_head[h], minlength=size) for h in range(nh)]
    ).reshape(drpb.shape)
