"""Slow reference implementations used as independent test oracles."""
import numpy as np


def naive_conv2d(x, w, b, stride, pad):
    n, h, wd, c = x.shape
    kh, kw, _, co = w.shape
    xp = np.zeros((n, h + 2 * pad, wd + 2 * pad, c), dtype=np.float64)
    xp[:, pad:pad + h, pad:pad + wd, :] = x
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    out = np.zeros((n, oh, ow, co))
    for s in range(n):
        for i in range(oh):
            for j in range(ow):
                for o in range(co):
                    acc = b[o]
                    for di in range(kh):
                        for dj in range(kw):
                            for ci in range(c):
                                acc += xp[s, i * stride + di, j * stride + dj, ci] * w[di, dj, ci, o]
                    out[s, i, j, o] = acc
    return out


def naive_maxpool(x, k, stride):
    n, h, w, c = x.shape
    oh = (h - k) // stride + 1
    ow = (w - k) // stride + 1
    out = np.zeros((n, oh, ow, c), dtype=x.dtype)
    for s in range(n):
        for i in range(oh):
            for j in range(ow):
                for ch in range(c):
                    out[s, i, j, ch] = max(x[s, i * stride + a, j * stride + bb, ch]
                                           for a in range(k) for bb in range(k))
    return out


def central_difference(f, x, h=1e-4):
    """Numerical gradient of scalar ``f`` with respect to every entry of ``x``."""
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    g = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        g[i] = (fp - fm) / (2 * h)
    return grad


def max_rel_error(a, b, floor=1e-8):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def hand_bilinear(image, out_h, out_w):
    """Corner-aligned bilinear resize written out pixel by pixel."""
    h, w = image.shape
    out = np.zeros((out_h, out_w))
    for i in range(out_h):
        for j in range(out_w):
            y = i * (h - 1) / (out_h - 1)
            x = j * (w - 1) / (out_w - 1)
            y0, x0 = int(np.floor(y)), int(np.floor(x))
            y1, x1 = min(y0 + 1, h - 1), min(x0 + 1, w - 1)
            fy, fx = y - y0, x - x0
            out[i, j] = (image[y0, x0] * (1 - fy) * (1 - fx) + image[y0, x1] * (1 - fy) * fx
                         + image[y1, x0] * fy * (1 - fx) + image[y1, x1] * fy * fx)
    return np.floor(out + 0.5).astype(np.uint8)
