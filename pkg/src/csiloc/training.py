"""Off-line training: sweep every (sample point, measurement) pair with
its true label and update the autoencoder by RMSprop (or Adam).

Default is seeded mini-batch updates; `update_per_epoch=True` reproduces
the literal full-sweep update (one parameter update per epoch after
accumulating gradients over all measurements in SP-major order).
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .data import PACKET_LEN, FingerprintDataset
from .model import SaeModel, adam_step, init_model, rmsprop_step


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite; `.report` holds the last finite state."""

    def __init__(self, msg, report):
        super().__init__(msg)
        self.report = report


@dataclass
class TrainConfig:
    dims: tuple[int, int, int, int] = (50, 30, 20, 5)
    max_epoch: int = 500
    learning_rate: float = 1e-3
    optimizer: str = "rmsprop"  # or "adam"
    batch_size: int = 16
    seed: int = 0
    rho: float = 0.9
    eps_stab: float = 1e-8
    update_per_epoch: bool = False
    # early stop when relative loss improvement stays below this for
    # `patience` epochs; None disables early stopping entirely
    early_stop_tol: float | None = None
    patience: int = 20

    def __post_init__(self):
        if self.max_epoch < 1:
            raise ValueError("max_epoch must be >= 1")
        k1, k2, k3, k4 = self.dims
        if not (k1 > k2 > k3 > k4 > 0):
            raise ValueError(f"dims must be strictly decreasing: {self.dims}")
        if self.optimizer not in ("rmsprop", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "dims" in d:
            d["dims"] = tuple(d["dims"])
        return cls(**d)


@dataclass
class TrainReport:
    epoch_losses: list[float] = field(default_factory=list)
    wall_seconds: float = 0.0
    peak_memory_bytes: int = 0
    epochs_run: int = 0


def _estimate_peak_memory(cfg: TrainConfig, n_labels: int,
                          n_samples: int) -> int:
    """Allocation accounting (bytes): dataset, parameters, optimizer
    state, and the widest batch of activations/gradients."""
    k1, k2, k3, k4 = cfg.dims
    n_params = (k1 * PACKET_LEN + k1 + k2 * k1 + k2 + k3 * k2 + k3
                + k4 * k3 + k4)
    n_params += ((k3 * (k4 + n_labels) + k3) + (k2 * k3 + k2)
                 + (k1 * k2 + k1) + (PACKET_LEN * k1 + PACKET_LEN))
    opt_copies = 2 if cfg.optimizer == "rmsprop" else 3
    batch = n_samples if cfg.update_per_epoch else min(cfg.batch_size,
                                                       n_samples)
    act_width = (k1 + k2 + k3 + k4 + (k4 + n_labels)
                 + k3 + k2 + k1 + PACKET_LEN)
    data_bytes = n_samples * (PACKET_LEN + n_labels) * 8
    return int(8 * (n_params * (1 + opt_copies) + batch * 2 * act_width)
               + data_bytes)


def train(dataset: FingerprintDataset, cfg: TrainConfig
          ) -> tuple[SaeModel, TrainReport]:
    """Train one model for the whole environment.

    The reported loss per epoch is the full summed squared
    reconstruction error over every (SP, measurement) pair, evaluated
    after the epoch's updates.
    """
    n = dataset.n_points
    if n < 2:
        raise ValueError("need at least two sample points")
    x, labels = dataset.stacked()
    onehot = np.zeros((x.shape[0], n))
    onehot[np.arange(x.shape[0]), labels] = 1.0

    model = init_model(cfg.dims, n, cfg.seed,
                       sp_coordinates=dataset.coordinates(),
                       normalization=dataset.normalization,
                       optimizer_name=cfg.optimizer)
    params = [p.copy() for p in model.param_list()]
    opt_state = None
    step = rmsprop_step if cfg.optimizer == "rmsprop" else adam_step

    def split(plist):
        enc_w, enc_b = tuple(plist[0:4]), tuple(plist[4:8])
        dec_w, dec_b = tuple(plist[8:12]), tuple(plist[12:16])
        return enc_w, enc_b, dec_w, dec_b

    rng = np.random.default_rng(cfg.seed)
    report = TrainReport()
    start = time.perf_counter()
    stalled = 0
    for epoch in range(cfg.max_epoch):
        if cfg.update_per_epoch:
            # literal sweep: SP-major order, one update from the summed
            # gradient of the whole epoch
            _, grads = kernels.loss_and_grads(*split(params), x, onehot)
            try:
                if cfg.optimizer == "rmsprop":
                    params, opt_state = step(params, list(grads), opt_state,
                                             cfg.learning_rate, cfg.rho,
                                             cfg.eps_stab)
                else:
                    params, opt_state = step(params, list(grads), opt_state,
                                             cfg.learning_rate,
                                             eps_stab=cfg.eps_stab)
            except FloatingPointError as exc:
                raise TrainingDivergedError(str(exc), report) from exc
        else:
            order = rng.permutation(x.shape[0])
            for lo in range(0, x.shape[0], cfg.batch_size):
                idx = order[lo:lo + cfg.batch_size]
                _, grads = kernels.loss_and_grads(
                    *split(params), np.ascontiguousarray(x[idx]),
                    np.ascontiguousarray(onehot[idx]))
                try:
                    if cfg.optimizer == "rmsprop":
                        params, opt_state = step(params, list(grads),
                                                 opt_state, cfg.learning_rate,
                                                 cfg.rho, cfg.eps_stab)
                    else:
                        params, opt_state = step(params, list(grads),
                                                 opt_state, cfg.learning_rate,
                                                 eps_stab=cfg.eps_stab)
                except FloatingPointError as exc:
                    raise TrainingDivergedError(str(exc), report) from exc

        loss = kernels.batch_loss(*split(params), x, onehot)
        if not math.isfinite(loss):
            raise TrainingDivergedError(
                f"loss became non-finite at epoch {epoch + 1}", report)
        report.epoch_losses.append(loss)
        report.epochs_run = epoch + 1
        if cfg.early_stop_tol is not None and epoch > 0:
            prev = report.epoch_losses[-2]
            rel = (prev - loss) / prev if prev > 0 else 0.0
            stalled = stalled + 1 if rel < cfg.early_stop_tol else 0
            if stalled >= cfg.patience:
                break

    report.wall_seconds = time.perf_counter() - start
    report.peak_memory_bytes = _estimate_peak_memory(cfg, n, x.shape[0])

    for dst, src in zip(model.param_list(), params):
        dst[...] = src
    return model, report


def subset_dataset(dataset: FingerprintDataset,
                   sp_ids: tuple[int, ...]) -> FingerprintDataset:
    """Restrict to the given SPs, re-labelled contiguously from 0 in
    ascending original-id order.  Normalization record is kept."""
    keep = sorted(sp_ids)
    points = []
    by_id = {sp.sp_id: sp for sp in dataset.sample_points}
    for new_id, old_id in enumerate(keep):
        sp = by_id[old_id]
        points.append(type(sp)(new_id, sp.position, sp.packets))
    return FingerprintDataset(points, dataset.normalization,
                              dict(dataset.provenance))


def _sampled_combinations(n: int, k: int, cap: int, seed: int):
    """All k-subsets of range(n) when there are at most `cap`, otherwise
    a seeded sample of `cap` distinct subsets."""
    total = math.comb(n, k)
    if total <= cap:
        return list(itertools.combinations(range(n), k))
    rng = np.random.default_rng(seed)
    seen: set[tuple[int, ...]] = set()
    while len(seen) < cap:
        combo = tuple(sorted(rng.choice(n, size=k, replace=False).tolist()))
        seen.add(combo)
    return sorted(seen)


def measure_training_overhead(dataset: FingerprintDataset, cfg: TrainConfig,
                              sp_subset_sizes, cap: int = 20,
                              seed: int = 0) -> list[dict]:
    """Mean training wall time and peak memory per SP-subset size,
    averaged over (a capped sample of) all subset combinations."""
    if cap < 1:
        raise ValueError("combination cap must be >= 1")
    n = dataset.n_points
    rows = []
    for k in sp_subset_sizes:
        if not 2 <= k <= n:
            raise ValueError(f"subset size {k} out of range [2, {n}]")
        combos = _sampled_combinations(n, k, cap, seed)
        times, mems = [], []
        for combo in combos:
            sub = subset_dataset(dataset, combo)
            _, rep = train(sub, cfg)
            times.append(rep.wall_seconds)
            mems.append(rep.peak_memory_bytes)
        rows.append({"n_sps": k, "runs": len(combos),
                     "mean_train_seconds": float(np.mean(times)),
                     "mean_peak_memory_bytes": float(np.mean(mems))})
    return rows
