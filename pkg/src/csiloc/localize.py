"""On-line location estimation.

Each test packet is encoded once; every candidate label is then decoded
against the shared bottleneck and scored by mean squared reconstruction
error.  The position estimate is the inverse-error-weighted mean of the
R best candidates' coordinates.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .data import PACKET_LEN
from .model import SaeModel

DEFAULT_R = 2
DEFAULT_PACKETS = 5
ERROR_FLOOR = 1e-9


@dataclass
class LocalizationResult:
    per_label_errors: np.ndarray  # (N,)
    candidates: list[tuple[int, float]]  # R (label, error), ascending
    estimate: tuple[float, float]
    packets_used: int
    elapsed_seconds: float


def _encode_packets(model: SaeModel, packets: np.ndarray) -> np.ndarray:
    enc_w, enc_b = model.enc_arrays()
    return kernels.encode_batch(enc_w, enc_b, packets)


def label_reconstruction_errors(model: SaeModel,
                                packets: np.ndarray) -> np.ndarray:
    """Mean squared reconstruction error per candidate label.

    packets: (p, 90), already normalized with the model's record.
    The bottleneck is computed once per packet; only the decoder runs
    per label (p*N decodes total).
    """
    packets = np.ascontiguousarray(packets, dtype=np.float64)
    if packets.ndim != 2 or packets.shape[1] != PACKET_LEN:
        raise ValueError(f"packets must be (p, {PACKET_LEN}), "
                         f"got {packets.shape}")
    p = packets.shape[0]
    if p < 1:
        raise ValueError("need at least one packet")
    n = model.label_count
    u4 = _encode_packets(model, packets)
    dec_w, dec_b = model.dec_arrays()
    errors = np.empty(n)
    for j in range(n):
        onehot = np.zeros((p, n))
        onehot[:, j] = 1.0
        latent = np.concatenate([u4, onehot], axis=1)
        v0 = kernels.decode_batch(dec_w, dec_b, latent)
        r = v0 - packets
        errors[j] = float(np.sum(r * r)) / p
    return errors


def select_candidates(errors: np.ndarray, r: int) -> list[tuple[int, float]]:
    """The r smallest errors ascending; ties broken by lower label index."""
    errors = np.asarray(errors, dtype=np.float64)
    if not 1 <= r <= errors.shape[0]:
        raise ValueError(f"R={r} out of range [1, {errors.shape[0]}]")
    order = np.argsort(errors, kind="stable")[:r]
    return [(int(j), float(errors[j])) for j in order]


def estimate_position(candidates: list[tuple[int, float]],
                      sp_coordinates, floor_eps: float = ERROR_FLOOR
                      ) -> tuple[float, float]:
    """Normalized inverse-error-weighted mean of candidate coordinates.

    Errors are floored at floor_eps so a perfect reconstruction
    dominates without dividing by zero.
    """
    if not candidates:
        raise ValueError("no candidates")
    coords = {int(i): (float(x), float(y)) for i, x, y in sp_coordinates}
    wx = wy = wsum = 0.0
    for label, err in candidates:
        if label not in coords:
            raise ValueError(f"no coordinates for label {label}")
        w = 1.0 / max(err, floor_eps)
        x, y = coords[label]
        wx += w * x
        wy += w * y
        wsum += w
    return (wx / wsum, wy / wsum)


def localize(model: SaeModel, packets: np.ndarray, r: int = DEFAULT_R,
             floor_eps: float = ERROR_FLOOR) -> LocalizationResult:
    start = time.perf_counter()
    errors = label_reconstruction_errors(model, packets)
    candidates = select_candidates(errors, r)
    estimate = estimate_position(candidates, model.sp_coordinates, floor_eps)
    elapsed = time.perf_counter() - start
    return LocalizationResult(errors, candidates, estimate,
                              int(np.asarray(packets).shape[0]), elapsed)
