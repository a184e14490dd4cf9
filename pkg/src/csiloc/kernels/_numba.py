"""Numba-compiled kernels for the supervised autoencoder hot paths.

Same contract as kernels._numpy.  The jitted functions take the 8 layer
parameter pairs unpacked (numba cannot index a tuple with a loop
variable); thin wrappers restore the tuple-based API.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _dense_sigmoid(x, w, b):
    n, d_in = x.shape
    d_out = w.shape[0]
    y = np.empty((n, d_out))
    for s in range(n):
        for o in range(d_out):
            acc = b[o]
            for i in range(d_in):
                acc += w[o, i] * x[s, i]
            y[s, o] = 1.0 / (1.0 + np.exp(-acc))
    return y


@njit(cache=True)
def _grad_pair(delta, inp):
    n, d_out = delta.shape
    d_in = inp.shape[1]
    gw = np.zeros((d_out, d_in))
    gb = np.zeros(d_out)
    for s in range(n):
        for o in range(d_out):
            d = delta[s, o]
            gb[o] += d
            for i in range(d_in):
                gw[o, i] += d * inp[s, i]
    return gw, gb


@njit(cache=True)
def _backprop_delta(delta, w, inp_act):
    n, d_out = delta.shape
    d_in = w.shape[1]
    out = np.empty((n, d_in))
    for s in range(n):
        for i in range(d_in):
            acc = 0.0
            for o in range(d_out):
                acc += delta[s, o] * w[o, i]
            a = inp_act[s, i]
            out[s, i] = acc * a * (1.0 - a)
    return out


@njit(cache=True)
def _encode4(ew1, eb1, ew2, eb2, ew3, eb3, ew4, eb4, x):
    u1 = _dense_sigmoid(x, ew1, eb1)
    u2 = _dense_sigmoid(u1, ew2, eb2)
    u3 = _dense_sigmoid(u2, ew3, eb3)
    u4 = _dense_sigmoid(u3, ew4, eb4)
    return u1, u2, u3, u4


@njit(cache=True)
def _decode4(dw1, db1, dw2, db2, dw3, db3, dw4, db4, latent):
    v3 = _dense_sigmoid(latent, dw1, db1)
    v2 = _dense_sigmoid(v3, dw2, db2)
    v1 = _dense_sigmoid(v2, dw3, db3)
    v0 = _dense_sigmoid(v1, dw4, db4)
    return v3, v2, v1, v0


@njit(cache=True)
def _concat_onehot(u4, onehot):
    n, k4 = u4.shape
    nn = onehot.shape[1]
    latent = np.empty((n, k4 + nn))
    for s in range(n):
        for i in range(k4):
            latent[s, i] = u4[s, i]
        for j in range(nn):
            latent[s, k4 + j] = onehot[s, j]
    return latent


@njit(cache=True)
def _loss_and_grads(ew1, eb1, ew2, eb2, ew3, eb3, ew4, eb4,
                    dw1, db1, dw2, db2, dw3, db3, dw4, db4, x, onehot):
    u1, u2, u3, u4 = _encode4(ew1, eb1, ew2, eb2, ew3, eb3, ew4, eb4, x)
    latent = _concat_onehot(u4, onehot)
    v3, v2, v1, v0 = _decode4(dw1, db1, dw2, db2, dw3, db3, dw4, db4, latent)

    n = x.shape[0]
    k4 = u4.shape[1]
    loss = 0.0
    delta = np.empty_like(v0)
    for s in range(n):
        for i in range(v0.shape[1]):
            r = v0[s, i] - x[s, i]
            loss += r * r
            delta[s, i] = 2.0 * r * v0[s, i] * (1.0 - v0[s, i])

    gdw4, gdb4 = _grad_pair(delta, v1)
    delta = _backprop_delta(delta, dw4, v1)
    gdw3, gdb3 = _grad_pair(delta, v2)
    delta = _backprop_delta(delta, dw3, v2)
    gdw2, gdb2 = _grad_pair(delta, v3)
    delta = _backprop_delta(delta, dw2, v3)
    gdw1, gdb1 = _grad_pair(delta, latent)
    # one-hot block carries no gradient: keep only the bottleneck columns
    delta = _backprop_delta(delta, dw1[:, :k4], u4)

    gew4, geb4 = _grad_pair(delta, u3)
    delta = _backprop_delta(delta, ew4, u3)
    gew3, geb3 = _grad_pair(delta, u2)
    delta = _backprop_delta(delta, ew3, u2)
    gew2, geb2 = _grad_pair(delta, u1)
    delta = _backprop_delta(delta, ew2, u1)
    gew1, geb1 = _grad_pair(delta, x)

    return (loss,
            gew1, gew2, gew3, gew4, geb1, geb2, geb3, geb4,
            gdw1, gdw2, gdw3, gdw4, gdb1, gdb2, gdb3, gdb4)


def encode_batch(enc_w, enc_b, x):
    return _encode4(enc_w[0], enc_b[0], enc_w[1], enc_b[1],
                    enc_w[2], enc_b[2], enc_w[3], enc_b[3],
                    np.ascontiguousarray(x))[3]


def decode_batch(dec_w, dec_b, latent):
    return _decode4(dec_w[0], dec_b[0], dec_w[1], dec_b[1],
                    dec_w[2], dec_b[2], dec_w[3], dec_b[3],
                    np.ascontiguousarray(latent))[3]


def forward_batch(enc_w, enc_b, dec_w, dec_b, x, onehot):
    u4 = encode_batch(enc_w, enc_b, x)
    latent = _concat_onehot(u4, np.ascontiguousarray(onehot))
    return decode_batch(dec_w, dec_b, latent)


def batch_loss(enc_w, enc_b, dec_w, dec_b, x, onehot):
    v0 = forward_batch(enc_w, enc_b, dec_w, dec_b, x, onehot)
    r = v0 - x
    return float(np.sum(r * r))


def loss_and_grads(enc_w, enc_b, dec_w, dec_b, x, onehot):
    out = _loss_and_grads(enc_w[0], enc_b[0], enc_w[1], enc_b[1],
                          enc_w[2], enc_b[2], enc_w[3], enc_b[3],
                          dec_w[0], dec_b[0], dec_w[1], dec_b[1],
                          dec_w[2], dec_b[2], dec_w[3], dec_b[3],
                          np.ascontiguousarray(x), np.ascontiguousarray(onehot))
    return float(out[0]), out[1:]
