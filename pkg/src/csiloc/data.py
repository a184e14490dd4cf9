"""CSI measurement data model, normalization and CSV ingestion.

A packet is 90 subcarrier amplitudes (30 subcarriers x 3 antennas);
phase is discarded at ingestion.  Datasets are stored as CSV, one packet
per row (`sp_id,x,y,packet_idx,a0..a89`), with a JSON sidecar recording
the min/max used for normalization and generation provenance.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

ANTENNA_COUNT = 3
SUBCARRIER_COUNT = 30
PACKET_LEN = ANTENNA_COUNT * SUBCARRIER_COUNT  # 90


class DatasetFormatError(ValueError):
    """Malformed dataset file; message names the offending line."""


class DegenerateScaleError(ValueError):
    """All amplitudes equal: min-max normalization is undefined."""


@dataclass(frozen=True)
class NormalizationRecord:
    vmin: float
    vmax: float


@dataclass
class SamplePoint:
    sp_id: int
    position: tuple[float, float]
    packets: np.ndarray  # (m, 90) float64

    @property
    def packet_count(self) -> int:
        return self.packets.shape[0]


@dataclass
class FingerprintDataset:
    sample_points: list[SamplePoint]
    normalization: NormalizationRecord | None = None
    provenance: dict = field(default_factory=dict)

    @property
    def n_points(self) -> int:
        return len(self.sample_points)

    def coordinates(self) -> list[tuple[int, float, float]]:
        return [(sp.sp_id, sp.position[0], sp.position[1])
                for sp in self.sample_points]

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        """All packets as (total, 90) plus the matching label vector."""
        xs = [sp.packets for sp in self.sample_points]
        labels = np.concatenate([
            np.full(sp.packet_count, sp.sp_id, dtype=np.int64)
            for sp in self.sample_points])
        return np.concatenate(xs, axis=0), labels


def normalize_dataset(raw: FingerprintDataset) -> FingerprintDataset:
    """Global min-max scaling of every amplitude into [0, 1].

    The (min, max) pair is recorded so test-time packets can be scaled
    identically.  Raises DegenerateScaleError when max == min.
    """
    allvals = np.concatenate([sp.packets.ravel() for sp in raw.sample_points])
    vmin = float(allvals.min())
    vmax = float(allvals.max())
    if not np.isfinite(vmin) or not np.isfinite(vmax):
        raise ValueError("dataset contains non-finite amplitudes")
    if vmax <= vmin:
        raise DegenerateScaleError(
            f"cannot normalize: all amplitudes equal ({vmin})")
    scale = vmax - vmin
    points = [replace(sp, packets=(sp.packets - vmin) / scale)
              for sp in raw.sample_points]
    return FingerprintDataset(points, NormalizationRecord(vmin, vmax),
                              dict(raw.provenance))


def apply_normalization(amplitudes: np.ndarray,
                        record: NormalizationRecord) -> np.ndarray:
    """Scale raw test-time amplitudes with a recorded (min, max), clamped
    to [0, 1] so values outside the training range stay reconstructable."""
    scaled = (np.asarray(amplitudes, dtype=np.float64) - record.vmin) \
        / (record.vmax - record.vmin)
    return np.clip(scaled, 0.0, 1.0)


def validate_dataset(ds: FingerprintDataset) -> list[str]:
    """Invariant check; returns a list of violation messages (empty = valid)."""
    report: list[str] = []
    if ds.n_points < 2:
        report.append(f"dataset has {ds.n_points} sample points, need >= 2")
    ids = [sp.sp_id for sp in ds.sample_points]
    if sorted(ids) != list(range(len(ids))):
        report.append(f"sample point ids not contiguous from 0: {sorted(ids)}")
    for sp in ds.sample_points:
        if sp.packets.ndim != 2 or sp.packets.shape[1] != PACKET_LEN:
            report.append(
                f"SP {sp.sp_id}: packets have shape {sp.packets.shape}, "
                f"expected (m, {PACKET_LEN})")
            continue
        if sp.packet_count < 1:
            report.append(f"SP {sp.sp_id}: no packets")
        if not np.all(np.isfinite(sp.packets)):
            report.append(f"SP {sp.sp_id}: non-finite amplitude")
        if ds.normalization is not None:
            for pidx in range(sp.packet_count):
                row = sp.packets[pidx]
                if row.min() < 0.0 or row.max() > 1.0:
                    report.append(
                        f"SP {sp.sp_id} packet {pidx}: amplitude outside "
                        f"[0,1] after normalization "
                        f"(range [{row.min()}, {row.max()}])")
    return report


_HEADER = ["sp_id", "x", "y", "packet_idx"] + [f"a{i}" for i in range(PACKET_LEN)]


def write_dataset(ds: FingerprintDataset, path: str | os.PathLike) -> None:
    """Write the CSV plus its `.meta.json` sidecar, atomically."""
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_HEADER)
        for sp in ds.sample_points:
            for pidx in range(sp.packet_count):
                w.writerow(
                    [sp.sp_id,
                     repr(float(sp.position[0])), repr(float(sp.position[1])),
                     pidx] + [repr(float(v)) for v in sp.packets[pidx]])
    os.replace(tmp, path)

    meta: dict = {"format": "csiloc-dataset-v1", "provenance": ds.provenance}
    if ds.normalization is not None:
        meta["normalization"] = {"min": ds.normalization.vmin,
                                 "max": ds.normalization.vmax}
    mtmp = _sidecar_path(path) + ".tmp"
    with open(mtmp, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(mtmp, _sidecar_path(path))


def _sidecar_path(path: str) -> str:
    return path + ".meta.json"


def load_dataset(path: str | os.PathLike) -> FingerprintDataset:
    """Load a dataset CSV (and its sidecar, when present).

    Rows are grouped by sp_id; packet order follows file order.  Raises
    DatasetFormatError naming the first bad line.
    """
    path = os.fspath(path)
    groups: dict[int, dict] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError(f"{path}: empty file") from None
        if header != _HEADER:
            raise DatasetFormatError(
                f"{path} line 1: bad header (expected "
                f"'{','.join(_HEADER[:5])},...')")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(_HEADER):
                raise DatasetFormatError(
                    f"{path} line {lineno}: expected {len(_HEADER)} columns, "
                    f"got {len(row)}")
            try:
                sp_id = int(row[0])
                x, y = float(row[1]), float(row[2])
                pidx = int(row[3])
                amps = np.array([float(v) for v in row[4:]], dtype=np.float64)
            except ValueError as exc:
                raise DatasetFormatError(
                    f"{path} line {lineno}: {exc}") from None
            if sp_id < 0:
                raise DatasetFormatError(
                    f"{path} line {lineno}: negative sp_id {sp_id}")
            g = groups.setdefault(sp_id, {"pos": (x, y), "packets": {}})
            if g["pos"] != (x, y):
                raise DatasetFormatError(
                    f"{path} line {lineno}: sp_id {sp_id} has inconsistent "
                    f"coordinates {(x, y)} vs {g['pos']}")
            if pidx in g["packets"]:
                raise DatasetFormatError(
                    f"{path} line {lineno}: duplicate (sp_id, packet_idx) "
                    f"({sp_id}, {pidx})")
            g["packets"][pidx] = amps

    ids = sorted(groups)
    if ids != list(range(len(ids))):
        raise DatasetFormatError(
            f"{path}: sp_id values not contiguous from 0: {ids}")

    points = []
    for sp_id in ids:
        g = groups[sp_id]
        packets = np.stack([g["packets"][k] for k in sorted(g["packets"])])
        points.append(SamplePoint(sp_id, g["pos"], packets))

    norm = None
    prov: dict = {}
    sidecar = _sidecar_path(path)
    if os.path.exists(sidecar):
        with open(sidecar) as fh:
            meta = json.load(fh)
        prov = meta.get("provenance", {})
        if "normalization" in meta:
            norm = NormalizationRecord(meta["normalization"]["min"],
                                       meta["normalization"]["max"])
    return FingerprintDataset(points, norm, prov)
