"""Pure-numpy convolution kernels (fallback backend).

Same contract as the compiled extension `_convkernels`: inputs are already
padded, arrays are float64, `x` is (N, H, W, Cin) and `k` is (kh, kw, Cin,
Cout). Orientation is cross-correlation,

    out[n, y, x, co] = sum_{i,j,ci} k[i, j, ci, co] * x[n, y*sh + i, x*sw + j, ci]

and the caller flips the kernel when true convolution is wanted.
"""
import numpy as np


def conv2d_forward(x, k, sh, sw):
    n, h, w, _ = x.shape
    kh, kw, _, cout = k.shape
    ho = (h - kh) // sh + 1
    wo = (w - kw) // sw + 1
    out = np.zeros((n, ho, wo, cout))
    for i in range(kh):
        for j in range(kw):
            patch = x[:, i : i + ho * sh : sh, j : j + wo * sw : sw, :]
            out += patch @ k[i, j]
    return out


def conv2d_grad_input(gout, k, sh, sw, h, w):
    n = gout.shape[0]
    ho, wo = gout.shape[1], gout.shape[2]
    kh, kw, cin, _ = k.shape
    gx = np.zeros((n, h, w, cin))
    for i in range(kh):
        for j in range(kw):
            gx[:, i : i + ho * sh : sh, j : j + wo * sw : sw, :] += gout @ k[i, j].T
    return gx


def conv2d_grad_kernel(x, gout, kh, kw, sh, sw):
    ho, wo, cout = gout.shape[1], gout.shape[2], gout.shape[3]
    cin = x.shape[3]
    gk = np.zeros((kh, kw, cin, cout))
    gflat = gout.reshape(-1, cout)
    for i in range(kh):
        for j in range(kw):
            patch = x[:, i : i + ho * sh : sh, j : j + wo * sw : sw, :]
            gk[i, j] = np.ascontiguousarray(patch).reshape(-1, cin).T @ gflat
    return gk
