"""Pure-numpy kernels for the supervised autoencoder hot paths.

All functions take the network parameters as two 4-tuples per half
(weights, biases), batches as (B, dim) float64 arrays, and return plain
numpy arrays.  This backend is the fallback when numba is unavailable or
disabled via CSILOC_KERNELS=numpy.
"""

import numpy as np


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def encode_batch(enc_w, enc_b, x):
    """Run the 4 encoding layers on a batch; returns the bottleneck (B, K4)."""
    a = x
    for w, b in zip(enc_w, enc_b):
        a = _sigmoid(a @ w.T + b)
    return a


def decode_batch(dec_w, dec_b, latent):
    """Run the 4 decoding layers on assembled latents; returns (B, 90)."""
    a = latent
    for w, b in zip(dec_w, dec_b):
        a = _sigmoid(a @ w.T + b)
    return a


def forward_batch(enc_w, enc_b, dec_w, dec_b, x, onehot):
    u4 = encode_batch(enc_w, enc_b, x)
    latent = np.concatenate([u4, onehot], axis=1)
    return decode_batch(dec_w, dec_b, latent)


def batch_loss(enc_w, enc_b, dec_w, dec_b, x, onehot):
    v0 = forward_batch(enc_w, enc_b, dec_w, dec_b, x, onehot)
    r = v0 - x
    return float(np.sum(r * r))


def loss_and_grads(enc_w, enc_b, dec_w, dec_b, x, onehot):
    """Summed squared reconstruction error and its parameter gradients.

    Returns (loss, grads) with grads ordered as
    (enc_w1..4, enc_b1..4, dec_w1..4, dec_b1..4), each gradient summed
    over the batch.  The one-hot block is an input, not a parameter: no
    gradient flows to it, and the bottleneck gradient passes only
    through the first K4 columns of the first decoding layer.
    """
    enc_acts = []
    a = x
    for w, b in zip(enc_w, enc_b):
        a = _sigmoid(a @ w.T + b)
        enc_acts.append(a)
    u4 = enc_acts[-1]
    latent = np.concatenate([u4, onehot], axis=1)

    dec_acts = []
    a = latent
    for w, b in zip(dec_w, dec_b):
        a = _sigmoid(a @ w.T + b)
        dec_acts.append(a)
    v0 = dec_acts[-1]

    r = v0 - x
    loss = float(np.sum(r * r))

    k4 = u4.shape[1]
    dec_inputs = [latent] + dec_acts[:-1]
    g_dec_w = [None] * 4
    g_dec_b = [None] * 4
    delta = 2.0 * r * v0 * (1.0 - v0)
    for li in range(3, -1, -1):
        inp = dec_inputs[li]
        g_dec_w[li] = delta.T @ inp
        g_dec_b[li] = delta.sum(axis=0)
        if li > 0:
            delta = (delta @ dec_w[li]) * inp * (1.0 - inp)
        else:
            delta = (delta @ dec_w[0])[:, :k4] * u4 * (1.0 - u4)

    enc_inputs = [x] + enc_acts[:-1]
    g_enc_w = [None] * 4
    g_enc_b = [None] * 4
    for li in range(3, -1, -1):
        inp = enc_inputs[li]
        g_enc_w[li] = delta.T @ inp
        g_enc_b[li] = delta.sum(axis=0)
        if li > 0:
            delta = (delta @ enc_w[li]) * inp * (1.0 - inp)

    return loss, tuple(g_enc_w) + tuple(g_enc_b) + tuple(g_dec_w) + tuple(g_dec_b)
