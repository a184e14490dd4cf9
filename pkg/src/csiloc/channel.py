"""Synthetic multi-antenna, multi-subcarrier CSI generation.

A geometric L-path narrowband model: one line-of-sight path plus one
path per configured scatterer, each with log-distance amplitude decay
d^(-gamma/2) and a propagation-delay phase per subcarrier.  Per-antenna
diversity is a small fixed gain/phase offset.  An optional wall segment
blocks the LoS term for positions it shadows, giving an NLoS region.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from .data import (ANTENNA_COUNT, SUBCARRIER_COUNT, FingerprintDataset,
                   SamplePoint, normalize_dataset)

SPEED_OF_LIGHT = 299_792_458.0

# grid points closer than this to the AP are skipped during generation
AP_EXCLUSION_RADIUS = 0.5

# fixed |reflection| for non-LoS paths; phase is seeded per scatterer
REFLECTION_MAGNITUDE = 0.6


class SingularGeometryError(ValueError):
    """Position coincides with the AP or a scatterer."""


@dataclass(frozen=True)
class EnvironmentSpec:
    width: float
    height: float
    ap_position: tuple[float, float]
    carrier_frequency: float = 2.4e9
    subcarrier_spacing: float = 312.5e3
    path_loss_exponent: float = 2.0
    scatterer_positions: tuple[tuple[float, float], ...] = ()
    noise_std: float = 0.02
    antenna_gain_offsets: tuple[float, ...] = (1.0, 0.95, 1.05)
    antenna_phase_offsets: tuple[float, ...] = (0.0, 0.4, -0.3)
    walls: tuple[tuple[tuple[float, float], tuple[float, float]], ...] = ()
    rng_seed: int = 0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("floor plan dimensions must be positive")
        if not self.contains(self.ap_position):
            raise ValueError("AP must lie inside the floor plan")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if len(self.antenna_gain_offsets) != ANTENNA_COUNT \
                or len(self.antenna_phase_offsets) != ANTENNA_COUNT:
            raise ValueError(f"need {ANTENNA_COUNT} antenna offsets")

    @property
    def path_count(self) -> int:
        return 1 + len(self.scatterer_positions)

    def contains(self, pos: tuple[float, float]) -> bool:
        return 0.0 <= pos[0] <= self.width and 0.0 <= pos[1] <= self.height

    def to_json(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> "EnvironmentSpec":
        with open(path) as fh:
            raw = json.load(fh)
        raw["ap_position"] = tuple(raw["ap_position"])
        raw["scatterer_positions"] = tuple(
            tuple(p) for p in raw.get("scatterer_positions", ()))
        raw["antenna_gain_offsets"] = tuple(raw.get(
            "antenna_gain_offsets", cls.antenna_gain_offsets))
        raw["antenna_phase_offsets"] = tuple(raw.get(
            "antenna_phase_offsets", cls.antenna_phase_offsets))
        raw["walls"] = tuple(
            (tuple(a), tuple(b)) for a, b in raw.get("walls", ()))
        return cls(**raw)


def subcarrier_frequencies(env: EnvironmentSpec) -> np.ndarray:
    """f_i = carrier + (i - 15) * spacing for the 30 reported subcarriers."""
    idx = np.arange(SUBCARRIER_COUNT) - SUBCARRIER_COUNT // 2
    return env.carrier_frequency + idx * env.subcarrier_spacing


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) < 1e-12 else (1 if v > 0 else -1)

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return False


def _los_blocked(env: EnvironmentSpec, position) -> bool:
    return any(_segments_intersect(env.ap_position, position, a, b)
               for a, b in env.walls)


def _scatterer_phases(env: EnvironmentSpec) -> np.ndarray:
    # fixed per-environment reflection phases, independent of packet noise
    rng = np.random.default_rng([env.rng_seed, 0x5CA7])
    return rng.uniform(0.0, 2.0 * math.pi, size=len(env.scatterer_positions))


def channel_response(env: EnvironmentSpec,
                     position: tuple[float, float]) -> np.ndarray:
    """Complex per-antenna, per-subcarrier gains, shape (3, 30).

    H = sum over paths of alpha_k(antenna) * d_k^(-gamma/2)
        * exp(-j 2 pi f_i d_k / c).
    """
    if not env.contains(position):
        raise ValueError(f"position {position} outside floor plan")
    paths: list[tuple[float, complex]] = []  # (length, base coefficient)

    d_los = math.dist(env.ap_position, position)
    if d_los < 1e-9:
        raise SingularGeometryError("position coincides with the AP")
    if not _los_blocked(env, position):
        paths.append((d_los, 1.0 + 0.0j))

    phases = _scatterer_phases(env)
    for k, sc in enumerate(env.scatterer_positions):
        d1 = math.dist(env.ap_position, sc)
        d2 = math.dist(sc, position)
        if d2 < 1e-9:
            raise SingularGeometryError(
                f"position coincides with scatterer {k}")
        coeff = REFLECTION_MAGNITUDE * complex(math.cos(phases[k]),
                                               math.sin(phases[k]))
        paths.append((d1 + d2, coeff))

    freqs = subcarrier_frequencies(env)
    h = np.zeros((ANTENNA_COUNT, SUBCARRIER_COUNT), dtype=np.complex128)
    gamma = env.path_loss_exponent
    for a in range(ANTENNA_COUNT):
        ant = env.antenna_gain_offsets[a] * np.exp(
            1j * env.antenna_phase_offsets[a])
        for d, coeff in paths:
            tau = d / SPEED_OF_LIGHT
            h[a] += ant * coeff * d ** (-gamma / 2.0) \
                * np.exp(-2j * math.pi * freqs * tau)
    return h


def sample_packet(env: EnvironmentSpec, position: tuple[float, float],
                  rng: np.random.Generator) -> np.ndarray:
    """One raw packet: |H| plus Gaussian amplitude noise, floored at 0,
    flattened antenna-major into 90 values."""
    amps = np.abs(channel_response(env, position)).ravel()
    if env.noise_std > 0:
        amps = amps + rng.normal(0.0, env.noise_std, size=amps.shape)
    return np.maximum(amps, 0.0)


def grid_positions(env: EnvironmentSpec, grid_spacing: float
                   ) -> list[tuple[float, float]]:
    """Uniform grid offset half a spacing from the walls, minus points
    inside the AP exclusion radius."""
    if grid_spacing <= 0:
        raise ValueError("grid_spacing must be positive")
    half = grid_spacing / 2.0
    xs = np.arange(half, env.width, grid_spacing)
    ys = np.arange(half, env.height, grid_spacing)
    out = []
    for y in ys:
        for x in xs:
            if math.dist((x, y), env.ap_position) <= AP_EXCLUSION_RADIUS:
                continue
            # avoid singular geometry at scatterer locations
            if any(math.dist((x, y), sc) < 0.05
                   for sc in env.scatterer_positions):
                continue
            out.append((float(x), float(y)))
    return out


def generate_dataset(env: EnvironmentSpec, grid_spacing: float,
                     packets_per_sp: int) -> FingerprintDataset:
    """Grid of sample points, `packets_per_sp` noisy packets each,
    globally normalized.  Deterministic: every packet's noise stream is
    seeded by (rng_seed, sp_id, packet_idx)."""
    if packets_per_sp < 1:
        raise ValueError("packets_per_sp must be >= 1")
    positions = grid_positions(env, grid_spacing)
    if len(positions) < 2:
        raise ValueError(
            f"grid spacing {grid_spacing} yields {len(positions)} sample "
            f"points, need >= 2")
    points = []
    for sp_id, pos in enumerate(positions):
        packets = np.stack([
            sample_packet(env, pos,
                          np.random.default_rng([env.rng_seed, sp_id, pidx]))
            for pidx in range(packets_per_sp)])
        points.append(SamplePoint(sp_id, pos, packets))
    raw = FingerprintDataset(points, provenance={
        "generator": "csiloc.channel",
        "rng_seed": env.rng_seed,
        "grid_spacing": grid_spacing,
        "packets_per_sp": packets_per_sp,
        "ap_position": list(env.ap_position),
        "floor": [env.width, env.height],
    })
    return normalize_dataset(raw)
