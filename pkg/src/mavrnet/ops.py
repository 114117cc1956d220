"""Differentiable operations for the Tensor engine.

Every op builds a forward value plus a closure returning per-parent gradient
arrays. Convolution uses per-sample im2col feeding one BLAS gemm in the
tall-skinny orientation (patches x kernel) and recomputes the column matrix in
backward instead of caching it, which bounds transient memory to one sample.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, as_tensor, make_node

LOG_EPS = 1e-8


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the parent's shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b, like=a)
    out = a.data + b.data

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_node(out, (a, b), backward)


def subtract(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b, like=a)
    out = a.data - b.data

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return make_node(out, (a, b), backward)


def multiply(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b, like=a)
    ad, bd = a.data, b.data
    out = ad * bd

    def backward(g):
        return _unbroadcast(g * bd, a.shape), _unbroadcast(g * ad, b.shape)

    return make_node(out, (a, b), backward)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul operands must have rank >= 2")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul inner extents disagree: {a.shape[-1]} vs {b.shape[-2]}")
    ad, bd = a.data, b.data
    out = np.matmul(ad, bd)

    def backward(g):
        ga = np.matmul(g, bd.swapaxes(-1, -2))
        gb = np.matmul(ad.swapaxes(-1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return make_node(out, (a, b), backward)


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    out = np.where(mask, a.data, 0)

    def backward(g):
        return (g * mask,)

    return make_node(out, (a,), backward)


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)

    def backward(g):
        return (g * out,)

    return make_node(out, (a,), backward)


def log(a, eps: float = LOG_EPS) -> Tensor:
    """Natural log clamped below at eps; subgradient 0 in the clamped region."""
    a = as_tensor(a)
    clamped = np.maximum(a.data, eps)
    out = np.log(clamped)
    live = a.data > eps

    def backward(g):
        return (np.where(live, g / clamped, 0),)

    return make_node(out, (a,), backward)


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - inner),)

    return make_node(out, (a,), backward)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    out = a.data.reshape(shape)
    src_shape = a.shape

    def backward(g):
        return (g.reshape(src_shape),)

    return make_node(out, (a,), backward)


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    axes = tuple(axes)
    out = a.data.transpose(axes)
    inverse = tuple(np.argsort(axes))

    def backward(g):
        return (g.transpose(inverse),)

    return make_node(out, (a,), backward)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ValueError("concat of an empty list")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.ascontiguousarray(piece) for piece in np.split(g, splits, axis=axis))

    return make_node(out, tuple(tensors), backward)


def _normalize_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def tensor_sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _normalize_axes(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)
    src_shape = a.shape

    def backward(g):
        if not keepdims:
            expand = list(src_shape)
            for ax in axes:
                expand[ax] = 1
            g = g.reshape(expand)
        return (np.broadcast_to(g, src_shape).copy(),)

    return make_node(out, (a,), backward)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _normalize_axes(axis, a.ndim)
    count = 1
    for ax in axes:
        count *= a.shape[ax]
    out = a.data.mean(axis=axes, keepdims=keepdims)
    src_shape = a.shape

    def backward(g):
        if not keepdims:
            expand = list(src_shape)
            for ax in axes:
                expand[ax] = 1
            g = g.reshape(expand)
        return (np.broadcast_to(g / count, src_shape).copy(),)

    return make_node(out, (a,), backward)


def l2_normalize(a, axis: int = -1, eps: float = 1e-12, zero_fallback: bool = False) -> Tensor:
    """Unit vectors along axis. With zero_fallback, rows of norm <= eps map to
    the first basis vector instead of staying zero, so the result is always
    unit-norm; the function is constant there, hence zero gradient."""
    a = as_tensor(a)
    norm = np.sqrt((a.data * a.data).sum(axis=axis, keepdims=True))
    denom = np.maximum(norm, eps)
    out = a.data / denom
    dead = None
    if zero_fallback:
        dead = norm <= eps
        if dead.any():
            basis = np.zeros_like(out)
            index = [slice(None)] * out.ndim
            index[axis] = slice(0, 1)
            basis[tuple(index)] = 1.0
            out = np.where(dead, basis, out)

    def backward(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        grad = (g - out * inner) / denom
        if dead is not None and dead.any():
            grad = np.where(dead, 0.0, grad)
        return (grad,)

    return make_node(out, (a,), backward)


def linear(x, weight, bias=None) -> Tensor:
    """y = x @ W + b with W laid out [d_in, d_out]; x may carry leading axes."""
    x, weight = as_tensor(x), as_tensor(weight)
    d_in, d_out = weight.shape
    if x.shape[-1] != d_in:
        raise ValueError(f"linear input width {x.shape[-1]} != weight d_in {d_in}")
    flat = reshape(x, (-1, d_in))
    out = matmul(flat, weight)
    if bias is not None:
        out = add(out, bias)
    return reshape(out, x.shape[:-1] + (d_out,))


# ---------------------------------------------------------------------------
# Convolution / pooling / upsampling
# ---------------------------------------------------------------------------


def _out_extent(n, k, s, p):
    return (n + 2 * p - k) // s + 1


def _batched_im2col(xpad: np.ndarray, kernel, stride) -> np.ndarray:
    """[B,C,Tp,Hp,Wp] padded input -> [B*P, C*kt*kh*kw] patch matrix."""
    kt, kh, kw = kernel
    st, sh, sw = stride
    win = sliding_window_view(xpad, (kt, kh, kw), axis=(2, 3, 4))
    win = win[:, :, ::st, ::sh, ::sw]
    b, c, to, ho, wo = win.shape[:5]
    return np.ascontiguousarray(win.transpose(0, 2, 3, 4, 1, 5, 6, 7)).reshape(b * to * ho * wo, -1)


def _conv_forward_im2col(xpad, wmat, shape_info):
    bsz, cout, to, ho, wo, kernel, strides = shape_info
    cols = _batched_im2col(xpad, kernel, strides)
    out = cols @ wmat.T  # [B*P, Cout]
    return out.reshape(bsz, to * ho * wo, cout).transpose(0, 2, 1).reshape(bsz, cout, to, ho, wo)


def _conv_backward_im2col(g, xpad, wmat, shape_info, need_x):
    bsz, cout, to, ho, wo, kernel, strides = shape_info
    kt, kh, kw = kernel
    st, sh, sw = strides
    cin = xpad.shape[1]
    cols = _batched_im2col(xpad, kernel, strides)
    gm = g.reshape(bsz, cout, -1).transpose(0, 2, 1).reshape(bsz * to * ho * wo, cout)  # [B*P, Cout]
    gw = gm.T @ cols
    if not need_x:
        return None, gw
    gcols = gm @ wmat  # [B*P, K]
    blocks = gcols.reshape(bsz, to, ho, wo, cin, kt, kh, kw)
    gxpad = np.zeros(xpad.shape, dtype=g.dtype)
    for a in range(kt):
        for b2 in range(kh):
            for c2 in range(kw):
                gxpad[:, :, a : a + st * to : st, b2 : b2 + sh * ho : sh, c2 : c2 + sw * wo : sw] += (
                    blocks[:, :, :, :, :, a, b2, c2].transpose(0, 4, 1, 2, 3)
                )
    return gxpad, gw


def _padded_flat_grid(xd: np.ndarray, padding) -> tuple:
    """[B,C,T,H,W] -> ([C, B*Tp*Hp*Wp] zero-padded flat grid, padded dims)."""
    b, c, t, h, w = xd.shape
    pt, ph, pw = padding
    tp, hp, wp = t + 2 * pt, h + 2 * ph, w + 2 * pw
    buf = np.zeros((c, b, tp, hp, wp), dtype=xd.dtype)
    buf[:, :, pt : pt + t, ph : ph + h, pw : pw + w] = xd.transpose(1, 0, 2, 3, 4)
    return buf.reshape(c, -1), (tp, hp, wp)


def _conv_forward_shifted(xflat, padded_dims, wd, shape_info):
    """Stride-1 conv as a sum of kernel-offset-shifted flat gemms.

    Output is computed on the padded grid so every offset is one linear shift
    of a contiguous slice; rows beyond the valid extents are junk and cropped.
    Valid output positions never index across sample boundaries because
    t+a <= Tp-1 there (same for h, w), so batch flattening is safe.
    """
    bsz, cout, to, ho, wo, kernel, _ = shape_info
    kt, kh, kw = kernel
    tp, hp, wp = padded_dims
    total = bsz * tp * hp * wp
    dmax = ((kt - 1) * hp + (kh - 1)) * wp + (kw - 1)
    n = total - dmax
    out_dtype = np.result_type(xflat.dtype, wd.dtype)
    # contiguous per-offset kernel matrices so matmul dispatches to gemm
    wker = np.ascontiguousarray(wd.transpose(2, 3, 4, 0, 1)).astype(out_dtype, copy=False)
    acc = np.zeros((cout, total), dtype=out_dtype)
    tmp = np.empty((cout, n), dtype=out_dtype)
    for a in range(kt):
        for b2 in range(kh):
            for c2 in range(kw):
                delta = (a * hp + b2) * wp + c2
                np.matmul(wker[a, b2, c2], xflat[:, delta : delta + n], out=tmp)
                acc[:, :n] += tmp
    grid_view = acc.reshape(cout, bsz, tp, hp, wp)
    return np.ascontiguousarray(grid_view[:, :, :to, :ho, :wo].transpose(1, 0, 2, 3, 4))


def _conv_backward_shifted(g, xflat, padded_dims, wd, shape_info, need_x):
    bsz, cout, to, ho, wo, kernel, _ = shape_info
    kt, kh, kw = kernel
    cin = xflat.shape[0]
    tp, hp, wp = padded_dims
    total = bsz * tp * hp * wp

    gpad = np.zeros((cout, bsz, tp, hp, wp), dtype=g.dtype)
    gpad[:, :, :to, :ho, :wo] = g.transpose(1, 0, 2, 3, 4)
    gflat = gpad.reshape(cout, -1)  # zeros outside the valid region

    dmax = ((kt - 1) * hp + (kh - 1)) * wp + (kw - 1)
    n = total - dmax
    gsrc = gflat[:, :n]
    wkert = np.ascontiguousarray(wd.transpose(2, 3, 4, 1, 0)).astype(g.dtype, copy=False)
    gxflat = np.zeros((cin, total), dtype=g.dtype) if need_x else None
    gw = np.empty((cout, cin, kt, kh, kw), dtype=g.dtype)
    tmp = np.empty((cin, n), dtype=g.dtype) if need_x else None
    for a in range(kt):
        for b2 in range(kh):
            for c2 in range(kw):
                delta = (a * hp + b2) * wp + c2
                xslice = xflat[:, delta : delta + n]
                gw[:, :, a, b2, c2] = gsrc @ xslice.T
                if need_x:
                    np.matmul(wkert[a, b2, c2], gsrc, out=tmp)
                    gxflat[:, delta : delta + n] += tmp
    if not need_x:
        return None, gw.reshape(cout, -1)
    gxpad = gxflat.reshape(cin, bsz, tp, hp, wp).transpose(1, 0, 2, 3, 4)
    return gxpad, gw.reshape(cout, -1)


def _conv_forward_pointwise(xd, wd, strides):
    """1x1x1 kernel: channel matmul on (optionally stride-sliced) positions."""
    st, sh, sw = strides
    src = xd[:, :, ::st, ::sh, ::sw]
    b, c = src.shape[:2]
    spatial = src.shape[2:]
    flat = src.reshape(b, c, -1)
    out = np.matmul(wd.reshape(wd.shape[0], c), flat)
    return out.reshape(b, wd.shape[0], *spatial)


def _conv_backward_pointwise(g, xd, wd, strides, need_x):
    st, sh, sw = strides
    src = xd[:, :, ::st, ::sh, ::sw]
    b, c = src.shape[:2]
    cout = wd.shape[0]
    gflat = g.reshape(b, cout, -1)
    xmat = src.reshape(b, c, -1)
    gw = np.einsum("bop,bcp->oc", gflat, xmat, optimize=True)
    if not need_x:
        return None, gw.reshape(cout, -1)
    gsrc = np.matmul(wd.reshape(cout, c).T, gflat)
    gx = np.zeros(xd.shape, dtype=g.dtype)
    gx[:, :, ::st, ::sh, ::sw] = gsrc.reshape(src.shape)
    return gx, gw.reshape(cout, -1)


def conv3d(x, weight, bias=None, stride=(1, 1, 1), padding=(0, 0, 0)) -> Tensor:
    """3D convolution over [C,T,H,W] or batched [B,C,T,H,W] input."""
    x, weight = as_tensor(x), as_tensor(weight)
    if weight.ndim != 5:
        raise ValueError(f"conv3d weight must be rank 5, got {weight.ndim}")
    squeeze = x.ndim == 4
    if x.ndim not in (4, 5):
        raise ValueError(f"conv3d input must be rank 4 or 5, got {x.ndim}")
    xd = x.data[None] if squeeze else x.data

    bsz, cin, t, h, w = xd.shape
    cout, cin_w, kt, kh, kw = weight.shape
    if cin != cin_w:
        raise ValueError(f"conv3d channel mismatch: input C={cin}, weight C_in={cin_w}")
    st, sh, sw = stride
    pt, ph, pw = padding
    if min(st, sh, sw) < 1:
        raise ValueError(f"conv3d strides must be >= 1, got {stride}")
    for name, n, k, p in (("T", t, kt, pt), ("H", h, kh, ph), ("W", w, kw, pw)):
        if n + 2 * p < k:
            raise ValueError(f"conv3d kernel exceeds padded input on axis {name}: {k} > {n + 2 * p}")

    to, ho, wo = _out_extent(t, kt, st, pt), _out_extent(h, kh, sh, ph), _out_extent(w, kw, sw, pw)
    kernel, strides = (kt, kh, kw), (st, sh, sw)
    wd = weight.data
    wmat = wd.reshape(cout, -1)
    shape_info = (bsz, cout, to, ho, wo, kernel, strides)

    pointwise = kernel == (1, 1, 1) and not any((pt, ph, pw))
    # shifted flat gemms win on larger planes; padded-grid waste dominates tiny ones
    shifted = not pointwise and strides == (1, 1, 1) and ho * wo >= 16
    xpad = xflat = padded_dims = None
    if shifted:
        xflat, padded_dims = _padded_flat_grid(xd, padding)
        out = _conv_forward_shifted(xflat, padded_dims, wd, shape_info)
    elif pointwise:
        out = _conv_forward_pointwise(xd, wd, strides)
    else:
        pad_spec = ((0, 0), (0, 0), (pt, pt), (ph, ph), (pw, pw))
        xpad = np.pad(xd, pad_spec) if any((pt, ph, pw)) else xd
        out = _conv_forward_im2col(xpad, wmat, shape_info)

    has_bias = bias is not None
    if has_bias:
        bias = as_tensor(bias)
        if bias.shape != (cout,):
            raise ValueError(f"conv3d bias shape {bias.shape} != ({cout},)")
        out += bias.data.reshape(1, -1, 1, 1, 1)

    def backward(g):
        need_x = x.requires_grad or x._backward is not None
        if pointwise:
            gx, gw = _conv_backward_pointwise(g, xd, wd, strides, need_x)
        elif shifted:
            gxpad, gw = _conv_backward_shifted(g, xflat, padded_dims, wd, shape_info, need_x)
            gx = gxpad[:, :, pt : pt + t, ph : ph + h, pw : pw + w] if gxpad is not None and any((pt, ph, pw)) else gxpad
        else:
            gxpad, gw = _conv_backward_im2col(g, xpad, wmat, shape_info, need_x)
            gx = gxpad[:, :, pt : pt + t, ph : ph + h, pw : pw + w] if gxpad is not None and any((pt, ph, pw)) else gxpad
        if gx is not None:
            if squeeze:
                gx = gx[0]
            gx = np.ascontiguousarray(gx).astype(x.dtype, copy=False)
        grads = [gx, gw.reshape(weight.shape).astype(weight.dtype, copy=False)]
        if has_bias:
            grads.append(g.sum(axis=(0, 2, 3, 4)))
        return tuple(grads)

    parents = (x, weight, bias) if has_bias else (x, weight)
    result = out[0] if squeeze else out
    return make_node(result, parents, backward)


def pool3d(x, kind: str, kernel, stride=None) -> Tensor:
    """Windowed max/avg pooling (no padding) over the trailing T,H,W axes."""
    if kind not in ("max", "avg"):
        raise ValueError(f"pool3d kind must be 'max' or 'avg', got {kind!r}")
    x = as_tensor(x)
    squeeze = x.ndim == 4
    if x.ndim not in (4, 5):
        raise ValueError(f"pool3d input must be rank 4 or 5, got {x.ndim}")
    xd = x.data[None] if squeeze else x.data
    kt, kh, kw = kernel
    st, sh, sw = stride if stride is not None else kernel
    bsz, c, t, h, w = xd.shape
    for name, n, k in (("T", t, kt), ("H", h, kh), ("W", w, kw)):
        if k > n:
            raise ValueError(f"pool3d kernel exceeds input on axis {name}: {k} > {n}")
    to, ho, wo = _out_extent(t, kt, st, 0), _out_extent(h, kh, sh, 0), _out_extent(w, kw, sw, 0)

    win = sliding_window_view(xd, (kt, kh, kw), axis=(2, 3, 4))[:, :, ::st, ::sh, ::sw]
    flatwin = win.reshape(bsz, c, to, ho, wo, kt * kh * kw)

    if kind == "avg":
        out = flatwin.mean(axis=-1)
        count = kt * kh * kw

        def backward(g):
            gx = np.zeros(xd.shape, dtype=g.dtype)
            share = g / count
            for a in range(kt):
                for b2 in range(kh):
                    for c2 in range(kw):
                        gx[:, :, a : a + st * to : st, b2 : b2 + sh * ho : sh, c2 : c2 + sw * wo : sw] += share
            return (gx[0] if squeeze else gx,)

    else:
        idx = flatwin.argmax(axis=-1)
        out = np.take_along_axis(flatwin, idx[..., None], axis=-1)[..., 0]

        def backward(g):
            gx = np.zeros(xd.shape, dtype=g.dtype)
            ot, oh, ow = np.meshgrid(np.arange(to), np.arange(ho), np.arange(wo), indexing="ij")
            dt, rem = np.divmod(idx, kh * kw)
            dh, dw = np.divmod(rem, kw)
            ti = ot[None, None] * st + dt
            hi = oh[None, None] * sh + dh
            wi = ow[None, None] * sw + dw
            bi = np.arange(bsz).reshape(-1, 1, 1, 1, 1)
            ci = np.arange(c).reshape(1, -1, 1, 1, 1)
            flat = (((bi * c + ci) * t + ti) * h + hi) * w + wi
            np.add.at(gx.reshape(-1), flat.ravel(), g.ravel())
            return (gx[0] if squeeze else gx,)

    return make_node(out[0] if squeeze else out, (x,), backward)


def upsample_nearest2d(x, factor: int) -> Tensor:
    """Replicate each element of the trailing H,W axes into a factor x factor block."""
    if factor < 1:
        raise ValueError(f"upsample factor must be >= 1, got {factor}")
    x = as_tensor(x)
    if factor == 1:
        return reshape(x, x.shape)
    out = np.repeat(np.repeat(x.data, factor, axis=-2), factor, axis=-1)
    lead = x.shape[:-2]
    h, w = x.shape[-2:]

    def backward(g):
        return (g.reshape(lead + (h, factor, w, factor)).sum(axis=(-3, -1)),)

    return make_node(out, (x,), backward)


def group_norm(x, gamma, beta, groups: int, eps: float = 1e-5) -> Tensor:
    """Normalize [B,C,*spatial] per (sample, channel group); affine per channel."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if x.ndim < 2:
        raise ValueError("group_norm expects [B,C,...] input")
    bsz, chan = x.shape[:2]
    if chan % groups:
        raise ValueError(f"channels {chan} not divisible by groups {groups}")
    affine_shape = (1, chan) + (1,) * (x.ndim - 2)

    xr = x.data.reshape(bsz, groups, -1)
    mu = xr.mean(axis=-1, keepdims=True)
    var = np.square(xr - mu).mean(axis=-1, keepdims=True)
    sigma = np.sqrt(var + eps)
    xhat = (xr - mu) / sigma
    xhat_full = xhat.reshape(x.shape)
    out = xhat_full * gamma.data.reshape(affine_shape) + beta.data.reshape(affine_shape)

    reduce_axes = (0,) + tuple(range(2, x.ndim))

    def backward(g):
        ggamma = (g * xhat_full).sum(axis=reduce_axes).reshape(gamma.shape)
        gbeta = g.sum(axis=reduce_axes).reshape(beta.shape)
        dxhat = (g * gamma.data.reshape(affine_shape)).reshape(bsz, groups, -1)
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        gx = ((dxhat - m1 - xhat * m2) / sigma).reshape(x.shape)
        return gx, ggamma, gbeta

    return make_node(out, (x, gamma, beta), backward)


# ---------------------------------------------------------------------------
# Operator sugar on Tensor
# ---------------------------------------------------------------------------


def _coerce(value, like: Tensor) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=like.data.dtype))


def _t_add(self, other):
    return add(self, _coerce(other, self))


def _t_radd(self, other):
    return add(_coerce(other, self), self)


def _t_sub(self, other):
    return subtract(self, _coerce(other, self))


def _t_rsub(self, other):
    return subtract(_coerce(other, self), self)


def _t_mul(self, other):
    return multiply(self, _coerce(other, self))


def _t_neg(self):
    return multiply(self, _coerce(-1.0, self))


def _t_div(self, other):
    if isinstance(other, Tensor):
        raise TypeError("tensor/tensor division is not provided; multiply by a reciprocal")
    return multiply(self, _coerce(1.0 / float(other), self))


def _t_matmul(self, other):
    return matmul(self, other)


Tensor.__add__ = _t_add
Tensor.__radd__ = _t_radd
Tensor.__sub__ = _t_sub
Tensor.__rsub__ = _t_rsub
Tensor.__mul__ = _t_mul
Tensor.__rmul__ = _t_mul
Tensor.__neg__ = _t_neg
Tensor.__truediv__ = _t_div
Tensor.__matmul__ = _t_matmul
Tensor.reshape = lambda self, shape: reshape(self, shape)
Tensor.transpose = lambda self, axes: transpose(self, axes)
Tensor.mean = lambda self, axis=None, keepdims=False: mean(self, axis, keepdims)
Tensor.sum = lambda self, axis=None, keepdims=False: tensor_sum(self, axis, keepdims)
