"""Leave-one-out cross-validation, error metrics, CDF tables and
overhead measurements.

Each fold retrains the autoencoder on the remaining sample points
(labels re-indexed fold-locally), localizes seeded random packets from
the held-out point, and records the Euclidean error.  A location-blind
centroid predictor serves as the property-test baseline.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field

import numpy as np

from .data import FingerprintDataset
from .localize import localize
from .training import TrainConfig, _sampled_combinations, subset_dataset, train

# published headline numbers from physical-testbed experiments; shown in
# reports for context only, never comparable to synthetic runs
REFERENCE_RESULTS = [
    ("classroom", "DeepPos", 1.872, 1.331, 1.1449),
    ("classroom", "DeepFi", 1.915, 1.295, 3.7072),
    ("hall+corridor", "DeepPos", 1.824, 1.240, 1.053),
    ("hall+corridor", "DeepFi", 1.815, 1.287, 3.457),
]

DEFAULT_CDF_THRESHOLDS = tuple(0.25 * k for k in range(1, 41))


def localization_error(estimate, truth) -> float:
    """Euclidean distance in meters."""
    return math.dist(estimate, truth)


@dataclass
class FoldResult:
    sp_id: int
    true_position: tuple[float, float]
    estimate: tuple[float, float]
    error_m: float
    baseline_error_m: float
    online_seconds: float
    train_seconds: float
    failed: bool = False
    failure: str = ""


@dataclass
class EvalSummary:
    mean_error: float
    median_error: float
    std_error: float
    cdf: list[tuple[float, float]]
    mean_online_seconds: float
    mean_train_seconds: float
    baseline_mean_error: float
    folds: int = 0
    failed_folds: int = 0


def naive_baseline(dataset: FingerprintDataset,
                   held_out: int) -> tuple[float, float]:
    """Unweighted centroid of the training SP coordinates: a predictor
    that ignores the CSI entirely."""
    xs = [sp.position for sp in dataset.sample_points
          if sp.sp_id != held_out]
    if not xs:
        raise ValueError("no training sample points left")
    return (sum(p[0] for p in xs) / len(xs), sum(p[1] for p in xs) / len(xs))


def error_cdf(errors, thresholds) -> list[tuple[float, float]]:
    """Fraction of errors at or below each threshold."""
    errors = list(errors)
    if not errors:
        raise ValueError("no errors to summarize")
    thresholds = list(thresholds)
    if thresholds != sorted(thresholds):
        raise ValueError("thresholds must be sorted ascending")
    n = len(errors)
    return [(float(t), sum(1 for e in errors if e <= t) / n)
            for t in thresholds]


def draw_test_packets(sp, p: int, rng: np.random.Generator) -> np.ndarray:
    """p seeded-random packets from a held-out SP (without replacement
    when it has enough)."""
    m = sp.packet_count
    if p <= m:
        idx = rng.choice(m, size=p, replace=False)
    else:
        idx = rng.choice(m, size=p, replace=True)
    return sp.packets[np.sort(idx)]


def loocv(dataset: FingerprintDataset, train_cfg: TrainConfig, r: int = 2,
          p: int = 5, seed: int = 0,
          cdf_thresholds=DEFAULT_CDF_THRESHOLDS
          ) -> tuple[list[FoldResult], EvalSummary]:
    n = dataset.n_points
    if n < 3:
        raise ValueError("LOOCV needs at least 3 sample points")
    folds: list[FoldResult] = []
    for held in range(n):
        sp = dataset.sample_points[held]
        train_ids = tuple(i for i in range(n) if i != held)
        sub = subset_dataset(dataset, train_ids)
        baseline = naive_baseline(dataset, held)
        base_err = localization_error(baseline, sp.position)
        try:
            model, rep = train(sub, train_cfg)
        except Exception as exc:  # record the failure, keep going
            folds.append(FoldResult(held, sp.position, (math.nan, math.nan),
                                    math.nan, base_err, 0.0, 0.0,
                                    failed=True, failure=str(exc)))
            continue
        rng = np.random.default_rng([seed, held])
        packets = draw_test_packets(sp, p, rng)
        result = localize(model, packets, r)
        folds.append(FoldResult(
            held, sp.position, result.estimate,
            localization_error(result.estimate, sp.position),
            base_err, result.elapsed_seconds, rep.wall_seconds))
    return folds, summarize(folds, cdf_thresholds)


def summarize(folds: list[FoldResult],
              cdf_thresholds=DEFAULT_CDF_THRESHOLDS) -> EvalSummary:
    ok = [f for f in folds if not f.failed]
    if not ok:
        raise ValueError("every fold failed")
    errors = [f.error_m for f in ok]
    return EvalSummary(
        mean_error=float(np.mean(errors)),
        median_error=float(statistics.median(errors)),
        std_error=float(np.std(errors)),
        cdf=error_cdf(errors, cdf_thresholds),
        mean_online_seconds=float(np.mean([f.online_seconds for f in ok])),
        mean_train_seconds=float(np.mean([f.train_seconds for f in ok])),
        baseline_mean_error=float(np.mean([f.baseline_error_m for f in ok])),
        folds=len(folds),
        failed_folds=len(folds) - len(ok),
    )


def percentile_at(cdf: list[tuple[float, float]], fraction: float) -> float:
    """Smallest tabulated threshold whose CDF value reaches `fraction`."""
    for t, frac in cdf:
        if frac >= fraction:
            return t
    return math.inf


def measure_online_overhead(dataset: FingerprintDataset,
                            train_cfg: TrainConfig, sp_subset_sizes,
                            r: int = 2, p: int = 5, cap: int = 5,
                            seed: int = 0) -> list[dict]:
    """Mean LOOCV error and per-localization wall time as the number of
    SPs grows, averaged over sampled SP combinations."""
    if cap < 1:
        raise ValueError("combination cap must be >= 1")
    n = dataset.n_points
    rows = []
    for k in sp_subset_sizes:
        if not 3 <= k <= n:
            raise ValueError(f"subset size {k} out of range [3, {n}]")
        combos = _sampled_combinations(n, k, cap, seed)
        errs, times = [], []
        for combo in combos:
            sub = subset_dataset(dataset, combo)
            _, summary = loocv(sub, train_cfg, r=r, p=p, seed=seed)
            errs.append(summary.mean_error)
            times.append(summary.mean_online_seconds)
        rows.append({"n_sps": k, "runs": len(combos),
                     "mean_error_m": float(np.mean(errs)),
                     "mean_online_seconds": float(np.mean(times))})
    return rows


def reference_report_lines() -> list[str]:
    lines = [
        "Published testbed reference values (physical CSI measurements;",
        "NOT comparable to synthetic-data results above):",
    ]
    for scen, method, mean, std, t in REFERENCE_RESULTS:
        lines.append(f"  [{scen}] {method}: mean error {mean:.3f} m, "
                     f"std {std:.3f} m, avg execution time {t} s")
    return lines
