"""Supervised autoencoder core.

Four sigmoid encoding layers compress a 90-value packet to a bottleneck;
a one-hot location label is appended there; four sigmoid decoding layers
reconstruct the packet.  The loss is the squared reconstruction error.
Hot paths (batched forward/backward) live in csiloc.kernels; the
single-packet ops here additionally expose a ForwardTrace with all
pre-activations and activations.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .data import PACKET_LEN, NormalizationRecord

MODEL_FORMAT_VERSION = 1


@dataclass
class LayerParams:
    weights: np.ndarray  # (out_dim, in_dim)
    biases: np.ndarray   # (out_dim,)


@dataclass
class ForwardTrace:
    pre_activations: list[np.ndarray]
    activations: list[np.ndarray]
    latent: np.ndarray | None = None  # bottleneck with the one-hot appended


@dataclass
class SaeModel:
    encoder: list[LayerParams]  # 90 -> K1 -> K2 -> K3 -> K4
    decoder: list[LayerParams]  # (K4+N) -> K3 -> K2 -> K1 -> 90
    label_count: int
    sp_coordinates: list[tuple[int, float, float]] = field(default_factory=list)
    normalization: NormalizationRecord | None = None
    rng_seed: int = 0
    optimizer_name: str = "rmsprop"

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return tuple(lp.weights.shape[0] for lp in self.encoder)

    @property
    def bottleneck_dim(self) -> int:
        return self.encoder[-1].weights.shape[0]

    def enc_arrays(self):
        return (tuple(lp.weights for lp in self.encoder),
                tuple(lp.biases for lp in self.encoder))

    def dec_arrays(self):
        return (tuple(lp.weights for lp in self.decoder),
                tuple(lp.biases for lp in self.decoder))

    def param_list(self) -> list[np.ndarray]:
        """Flat parameter view in the gradient ordering of the kernels:
        enc weights 1..4, enc biases 1..4, dec weights 1..4, dec biases 1..4."""
        return ([lp.weights for lp in self.encoder]
                + [lp.biases for lp in self.encoder]
                + [lp.weights for lp in self.decoder]
                + [lp.biases for lp in self.decoder])


INIT_WEIGHT_STD = 0.1


def init_model(dims: tuple[int, int, int, int], label_count: int, seed: int,
               sp_coordinates=None, normalization=None,
               optimizer_name: str = "rmsprop") -> SaeModel:
    """Gaussian(0, 0.1^2) weights, zero biases; deterministic per seed."""
    k1, k2, k3, k4 = dims
    if not (k1 > k2 > k3 > k4 > 0):
        raise ValueError(f"layer sizes must be strictly decreasing, got {dims}")
    if label_count < 2:
        raise ValueError("need at least two location labels")
    rng = np.random.default_rng(seed)

    def layer(out_dim, in_dim):
        w = rng.normal(0.0, INIT_WEIGHT_STD, size=(out_dim, in_dim))
        return LayerParams(w, np.zeros(out_dim))

    enc_dims = [PACKET_LEN, k1, k2, k3, k4]
    encoder = [layer(enc_dims[i + 1], enc_dims[i]) for i in range(4)]
    dec_dims = [k4 + label_count, k3, k2, k1, PACKET_LEN]
    decoder = [layer(dec_dims[i + 1], dec_dims[i]) for i in range(4)]
    return SaeModel(encoder, decoder, label_count,
                    sp_coordinates=list(sp_coordinates or []),
                    normalization=normalization, rng_seed=seed,
                    optimizer_name=optimizer_name)


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _run_layers(layers: list[LayerParams], x: np.ndarray) -> ForwardTrace:
    pre, act = [], []
    a = x
    for lp in layers:
        z = lp.weights @ a + lp.biases
        a = _sigmoid(z)
        pre.append(z)
        act.append(a)
    return ForwardTrace(pre, act)


def encode(model: SaeModel, packet: np.ndarray
           ) -> tuple[np.ndarray, ForwardTrace]:
    """Bottleneck vector u4 for one normalized packet."""
    packet = np.asarray(packet, dtype=np.float64)
    if packet.shape != (PACKET_LEN,):
        raise ValueError(f"packet must have shape ({PACKET_LEN},), "
                         f"got {packet.shape}")
    trace = _run_layers(model.encoder, packet)
    return trace.activations[-1], trace


def assemble_latent(u4: np.ndarray, label_index: int,
                    label_count: int) -> np.ndarray:
    """Append one-hot(label_index, label_count) to the bottleneck."""
    if not 0 <= label_index < label_count:
        raise ValueError(
            f"label_index {label_index} out of range [0, {label_count})")
    onehot = np.zeros(label_count)
    onehot[label_index] = 1.0
    return np.concatenate([np.asarray(u4, dtype=np.float64), onehot])


def decode(model: SaeModel, latent: np.ndarray
           ) -> tuple[np.ndarray, ForwardTrace]:
    """Reconstruction v0 (length 90) from an assembled latent."""
    latent = np.asarray(latent, dtype=np.float64)
    expected = model.bottleneck_dim + model.label_count
    if latent.shape != (expected,):
        raise ValueError(f"latent must have shape ({expected},), "
                         f"got {latent.shape}")
    trace = _run_layers(model.decoder, latent)
    trace.latent = latent
    return trace.activations[-1], trace


def forward(model: SaeModel, packet: np.ndarray, label_index: int
            ) -> tuple[np.ndarray, ForwardTrace]:
    u4, enc_trace = encode(model, packet)
    latent = assemble_latent(u4, label_index, model.label_count)
    v0, dec_trace = decode(model, latent)
    trace = ForwardTrace(enc_trace.pre_activations + dec_trace.pre_activations,
                         enc_trace.activations + dec_trace.activations,
                         latent)
    return v0, trace


def reconstruction_loss(v0: np.ndarray, packet: np.ndarray) -> float:
    v0 = np.asarray(v0, dtype=np.float64)
    packet = np.asarray(packet, dtype=np.float64)
    if v0.shape != packet.shape:
        raise ValueError(f"shape mismatch {v0.shape} vs {packet.shape}")
    r = v0 - packet
    return float(r @ r)


def gradients(model: SaeModel, packet: np.ndarray,
              label_index: int) -> list[np.ndarray]:
    """Exact backpropagated gradients of the reconstruction loss, ordered
    like SaeModel.param_list()."""
    packet = np.asarray(packet, dtype=np.float64)
    onehot = np.zeros((1, model.label_count))
    onehot[0, label_index] = 1.0
    enc_w, enc_b = model.enc_arrays()
    dec_w, dec_b = model.dec_arrays()
    _, grads = kernels.loss_and_grads(enc_w, enc_b, dec_w, dec_b,
                                      packet[None, :], onehot)
    return list(grads)


# --- optimizers ---------------------------------------------------------


def rmsprop_step(params: list[np.ndarray], grads: list[np.ndarray],
                 state: list[np.ndarray] | None, lr: float,
                 decay: float = 0.9, eps_stab: float = 1e-8):
    """cache <- rho*cache + (1-rho)*g^2 ; p <- p - lr*g/(sqrt(cache)+eps).

    Returns (new_params, new_state); inputs are not mutated.
    """
    if not 0.0 < decay < 1.0:
        raise ValueError("decay must lie in (0, 1)")
    if state is None:
        state = [np.zeros_like(p) for p in params]
    new_params, new_state = [], []
    for p, g, c in zip(params, grads, state):
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(
                f"non-finite gradient (shape {g.shape})")
        c2 = decay * c + (1.0 - decay) * g * g
        new_params.append(p - lr * g / (np.sqrt(c2) + eps_stab))
        new_state.append(c2)
    return new_params, new_state


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999,
              eps_stab=1e-8):
    """Adam with bias correction; state is (t, m, v)."""
    if state is None:
        state = (0, [np.zeros_like(p) for p in params],
                 [np.zeros_like(p) for p in params])
    t, ms, vs = state
    t += 1
    new_params, new_ms, new_vs = [], [], []
    for p, g, m, v in zip(params, grads, ms, vs):
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient")
        m2 = beta1 * m + (1.0 - beta1) * g
        v2 = beta2 * v + (1.0 - beta2) * g * g
        mhat = m2 / (1.0 - beta1 ** t)
        vhat = v2 / (1.0 - beta2 ** t)
        new_params.append(p - lr * mhat / (np.sqrt(vhat) + eps_stab))
        new_ms.append(m2)
        new_vs.append(v2)
    return new_params, (t, new_ms, new_vs)


# --- persistence --------------------------------------------------------


def save_model(model: SaeModel, path: str | os.PathLike) -> None:
    """JSON model file; floats serialized with full round-trip precision."""
    doc = {
        "format": "csiloc-model",
        "format_version": MODEL_FORMAT_VERSION,
        "dims": list(model.dims),
        "label_count": model.label_count,
        "optimizer": model.optimizer_name,
        "rng_seed": model.rng_seed,
        "sp_coordinates": [[i, x, y] for i, x, y in model.sp_coordinates],
        "normalization": (None if model.normalization is None else
                          [model.normalization.vmin, model.normalization.vmax]),
        "encoder": [{"weights": lp.weights.tolist(),
                     "biases": lp.biases.tolist()} for lp in model.encoder],
        "decoder": [{"weights": lp.weights.tolist(),
                     "biases": lp.biases.tolist()} for lp in model.decoder],
    }
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")
    os.replace(tmp, path)


def load_model(path: str | os.PathLike) -> SaeModel:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "csiloc-model":
        raise ValueError(f"{path}: not a model file")
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(
            f"{path}: unsupported model format version "
            f"{doc.get('format_version')}")

    def layers(key):
        return [LayerParams(np.array(d["weights"], dtype=np.float64),
                            np.array(d["biases"], dtype=np.float64))
                for d in doc[key]]

    norm = doc.get("normalization")
    return SaeModel(
        encoder=layers("encoder"),
        decoder=layers("decoder"),
        label_count=doc["label_count"],
        sp_coordinates=[(int(i), float(x), float(y))
                        for i, x, y in doc["sp_coordinates"]],
        normalization=None if norm is None else NormalizationRecord(*norm),
        rng_seed=doc.get("rng_seed", 0),
        optimizer_name=doc.get("optimizer", "rmsprop"),
    )
