"""Spatial ambiguity function over a 2-D candidate grid.

The SAF is the squared magnitude of the matched-filter correlation between an
observed (N, K) snapshot and the hypothesized steering response at every grid
point. Sidelobe structure is summarized by the PMSR: peak power over the
median power outside the mainlobe disc.

Two evaluation paths exist: a general per-subcarrier summation (numba kernel,
handles arbitrary snapshots) and a Dirichlet-kernel fast path that collapses
the subcarrier sum in closed form whenever no phase term varies with k
(ideal or spatial-offset-only cases).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numba
import numpy as np

from .errors import CoincidentLocationError, EmptySidelobeError, ShapeMismatchError
from .model import (
    ArrayGeometry,
    OffsetRealization,
    OffsetSpec,
    SystemConfig,
    UeLocation,
    amplitudes,
    distances,
    ideal_snapshot,
    sample_offsets,
)

DEFAULT_MAINLOBE_RADIUS = 0.5


@dataclass(frozen=True)
class SpatialGrid:
    """Rectangular evaluation grid; axes are x_min + i*step, y_min + j*step."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    step: float

    def __post_init__(self) -> None:
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise ValueError("grid extents must be non-empty")

    @classmethod
    def default(cls) -> "SpatialGrid":
        """Default map grid; chosen so PMSR figures land in the reported bands."""
        return cls(-3.0, 3.0, 0.5, 16.0, 0.02)

    @classmethod
    def sweep_default(cls) -> "SpatialGrid":
        """Coarser, shallower grid used by the PMSR sweep runner."""
        return cls(-5.0, 5.0, 0.5, 8.0, 0.05)

    @property
    def num_x(self) -> int:
        return int(np.floor((self.x_max - self.x_min) / self.step + 1e-9)) + 1

    @property
    def num_y(self) -> int:
        return int(np.floor((self.y_max - self.y_min) / self.step + 1e-9)) + 1

    @property
    def x_axis(self) -> np.ndarray:
        return self.x_min + self.step * np.arange(self.num_x)

    @property
    def y_axis(self) -> np.ndarray:
        return self.y_min + self.step * np.arange(self.num_y)

    def points(self) -> np.ndarray:
        """All grid points as an (num_x * num_y, 2) array, x-major."""
        gx, gy = np.meshgrid(self.x_axis, self.y_axis, indexing="ij")
        return np.stack([gx.ravel(), gy.ravel()], axis=1)


@dataclass(frozen=True)
class SafMap:
    """Evaluated ambiguity map. ``power`` is linear, shape (num_x, num_y)."""

    grid: SpatialGrid
    power: np.ndarray
    peak_indices: tuple[int, int]
    peak_location: tuple[float, float]
    peak_power: float
    pmsr_db: float


def dirichlet_kernel(theta: np.ndarray, num_terms: int) -> np.ndarray:
    """sum_{k=1..K} exp(j k theta) magnitude factor sin(K t/2)/sin(t/2).

    The accompanying phase exp(j theta (K+1)/2) is applied by callers. Near
    theta = 0 mod 2 pi the ratio is evaluated by its limit.
    """
    theta = np.asarray(theta, dtype=float)
    num = np.sin(num_terms * theta / 2.0)
    den = np.sin(theta / 2.0)
    out = np.empty_like(theta)
    small = np.abs(den) < 1e-12
    np.divide(num, den, out=out, where=~small)
    if np.any(small):
        t = theta[small]
        out[small] = num_terms * np.cos(num_terms * t / 2.0) / np.cos(t / 2.0)
    return out


def _grid_distances(grid: SpatialGrid, geometry: ArrayGeometry) -> np.ndarray:
    """Distances from every grid point to every antenna, shape (P, N)."""
    pts = grid.points()
    d = np.hypot(pts[:, 0:1] - geometry.positions[None, :, 0],
                 pts[:, 1:2] - geometry.positions[None, :, 1])
    if np.any(d == 0.0):
        raise CoincidentLocationError("grid contains a point coincident with an antenna")
    return d


@numba.njit(cache=True)
def _saf_accumulate(dist, carrier_rate, subcarrier_rate, snapshot):  # pragma: no cover
    """|sum_nk snapshot[n,k] * exp(j (carrier_rate + k*subcarrier_rate) * dist[p,n])|^2.

    Subcarrier phasors are chained by complex multiplication so the inner
    loop is trig-free.
    """
    num_points, num_ant = dist.shape
    num_sub = snapshot.shape[1]
    out = np.empty(num_points)
    for p in range(num_points):
        tot_r = 0.0
        tot_i = 0.0
        for n in range(num_ant):
            th = subcarrier_rate * dist[p, n]
            first = carrier_rate * dist[p, n] + th
            acc_r = np.cos(first)
            acc_i = np.sin(first)
            w_r = np.cos(th)
            w_i = np.sin(th)
            for k in range(num_sub):
                g_r = snapshot[n, k].real
                g_i = snapshot[n, k].imag
                tot_r += g_r * acc_r - g_i * acc_i
                tot_i += g_r * acc_i + g_i * acc_r
                nxt_r = acc_r * w_r - acc_i * w_i
                acc_i = acc_r * w_i + acc_i * w_r
                acc_r = nxt_r
        out[p] = tot_r * tot_r + tot_i * tot_i
    return out


def _finish_map(grid: SpatialGrid, power: np.ndarray,
                mainlobe_radius: float) -> SafMap:
    power = power.reshape(grid.num_x, grid.num_y)
    flat_idx = int(np.argmax(power))  # first occurrence = lexicographic tie-break
    ix, iy = np.unravel_index(flat_idx, power.shape)
    peak_loc = (float(grid.x_axis[ix]), float(grid.y_axis[iy]))
    peak_power = float(power[ix, iy])
    try:
        pmsr_val = _pmsr_of(grid, power, peak_loc, peak_power, mainlobe_radius)
    except EmptySidelobeError:
        pmsr_val = float("nan")
    return SafMap(grid=grid, power=power, peak_indices=(int(ix), int(iy)),
                  peak_location=peak_loc, peak_power=peak_power, pmsr_db=pmsr_val)


def lower_median(values: np.ndarray) -> float:
    """Median with the lower-middle element for even counts (deterministic)."""
    values = np.asarray(values)
    idx = (values.size - 1) // 2
    return float(np.partition(values, idx)[idx])


def _pmsr_of(grid: SpatialGrid, power: np.ndarray, peak_loc: tuple[float, float],
             peak_power: float, mainlobe_radius: float) -> float:
    gx, gy = np.meshgrid(grid.x_axis, grid.y_axis, indexing="ij")
    outside = (gx - peak_loc[0]) ** 2 + (gy - peak_loc[1]) ** 2 > mainlobe_radius**2
    side = power[outside]
    if side.size < 2:
        raise EmptySidelobeError("fewer than 2 grid points outside the mainlobe region")
    return float(10.0 * np.log10(peak_power / lower_median(side)))


def pmsr(saf_map: SafMap, mainlobe_radius: float = DEFAULT_MAINLOBE_RADIUS) -> float:
    """Peak-to-median-sidelobe ratio in dB for a given mainlobe disc radius."""
    return _pmsr_of(saf_map.grid, saf_map.power, saf_map.peak_location,
                    saf_map.peak_power, mainlobe_radius)


def saf_from_csi(snapshot: np.ndarray, config: SystemConfig, geometry: ArrayGeometry,
                 grid: SpatialGrid,
                 mainlobe_radius: float = DEFAULT_MAINLOBE_RADIUS) -> SafMap:
    """Generalized matched filter of an (N, K) snapshot against the grid.

    Each cell is |sum_nk snapshot_nk * exp(+j 2 pi f_k d_n(x, y) / c)|^2.
    """
    snapshot = np.asarray(snapshot, dtype=complex)
    if snapshot.shape != (geometry.num_antennas, config.num_subcarriers):
        raise ShapeMismatchError(
            f"snapshot shape {snapshot.shape} does not match "
            f"({geometry.num_antennas}, {config.num_subcarriers})")
    dist = _grid_distances(grid, geometry)
    carrier_rate = 2.0 * np.pi * config.carrier_frequency / config.speed_of_light
    subcarrier_rate = 2.0 * np.pi * config.subcarrier_spacing / config.speed_of_light
    power = _saf_accumulate(dist, carrier_rate, subcarrier_rate, snapshot)
    return _finish_map(grid, power, mainlobe_radius)


def saf_model(config: SystemConfig, geometry: ArrayGeometry, true_loc: UeLocation,
              offsets: Optional[OffsetRealization], grid: SpatialGrid,
              mainlobe_radius: float = DEFAULT_MAINLOBE_RADIUS) -> SafMap:
    """SAF of the noiseless model snapshot, optionally phase-impaired."""
    snapshot = ideal_snapshot(config, geometry, true_loc)
    if offsets is not None:
        snapshot = snapshot * np.exp(1j * offsets.total_phase())
    return saf_from_csi(snapshot, config, geometry, grid, mainlobe_radius)


def saf_fast_path(config: SystemConfig, geometry: ArrayGeometry, true_loc: UeLocation,
                  spatial_offsets: Optional[Union[np.ndarray, OffsetRealization]],
                  grid: SpatialGrid,
                  mainlobe_radius: float = DEFAULT_MAINLOBE_RADIUS) -> SafMap:
    """Dirichlet-kernel SAF for offset phases that do not vary with k.

    The subcarrier sum collapses to exp(j t (K+1)/2) sin(K t/2)/sin(t/2) with
    t = 2 pi df (d_n(x,y) - d_n) / c. Raises if per-subcarrier-varying
    offsets are supplied.
    """
    phi = None
    if isinstance(spatial_offsets, OffsetRealization):
        if np.ptp(spatial_offsets.phi_f, axis=1).max(initial=0.0) != 0.0:
            raise ValueError("fast path requires offsets constant across subcarriers")
        phi = spatial_offsets.phi_a + spatial_offsets.phi_f[:, 0]
    elif spatial_offsets is not None:
        phi = np.asarray(spatial_offsets, dtype=float)
        if phi.shape != (geometry.num_antennas,):
            raise ShapeMismatchError("spatial offsets must be a length-N vector")

    d_true = distances(geometry, true_loc)
    alpha = amplitudes(config, d_true)
    dist = _grid_distances(grid, geometry)
    delta = dist - d_true[None, :]
    k_count = config.num_subcarriers
    theta = 2.0 * np.pi * config.subcarrier_spacing / config.speed_of_light * delta
    phase = (2.0 * np.pi * config.carrier_frequency / config.speed_of_light * delta
             + theta * (k_count + 1) / 2.0)
    if phi is not None:
        phase = phase + phi[None, :]
    terms = alpha[None, :] * dirichlet_kernel(theta, k_count) * np.exp(1j * phase)
    total = terms.sum(axis=1)
    power = total.real**2 + total.imag**2
    return _finish_map(grid, power, mainlobe_radius)


@dataclass(frozen=True)
class SafCuts:
    """Peak-row/column profiles, normalized so the peak sits at 0 dB."""

    x_coords: np.ndarray
    x_cut_db: np.ndarray
    y_coords: np.ndarray
    y_cut_db: np.ndarray


def cuts(saf_map: SafMap) -> SafCuts:
    """1-D x/y profiles of the power map through the peak cell."""
    ix, iy = saf_map.peak_indices
    with np.errstate(divide="ignore"):
        x_cut = 10.0 * np.log10(saf_map.power[:, iy] / saf_map.peak_power)
        y_cut = 10.0 * np.log10(saf_map.power[ix, :] / saf_map.peak_power)
    return SafCuts(x_coords=saf_map.grid.x_axis, x_cut_db=x_cut,
                   y_coords=saf_map.grid.y_axis, y_cut_db=y_cut)


@dataclass(frozen=True)
class PmsrRow:
    kind: str
    sigma: float
    seed: int
    pmsr_db: float


def pmsr_sweep(config: SystemConfig, geometry: ArrayGeometry, true_loc: UeLocation,
               kind: str, sigma_list: Sequence[float], seeds: Sequence[int],
               grid: Optional[SpatialGrid] = None,
               mainlobe_radius: float = DEFAULT_MAINLOBE_RADIUS,
               ) -> tuple[list[PmsrRow], dict[float, float]]:
    """Per-seed PMSR over offset levels plus the per-sigma lower median.

    ``kind`` is "frequency" (Gaussian per-subcarrier offsets, general path)
    or "spatial" (uniform per-antenna offsets, fast path).
    """
    if kind not in ("frequency", "spatial"):
        raise ValueError(f"unknown sweep kind {kind!r}")
    if len(sigma_list) == 0 or len(seeds) == 0:
        raise ValueError("sigma_list and seeds must be non-empty")
    if grid is None:
        grid = SpatialGrid.sweep_default()

    rows: list[PmsrRow] = []
    medians: dict[float, float] = {}
    for sigma in sigma_list:
        sigma = float(sigma)
        values = []
        for seed in seeds:
            if kind == "frequency":
                spec = OffsetSpec(freq_std=sigma, seed=int(seed))
                offsets = sample_offsets(spec, geometry.num_antennas, config.num_subcarriers)
                saf_map = saf_model(config, geometry, true_loc, offsets, grid, mainlobe_radius)
            else:
                spec = OffsetSpec.from_spatial_std(sigma, seed=int(seed))
                offsets = sample_offsets(spec, geometry.num_antennas, config.num_subcarriers)
                saf_map = saf_fast_path(config, geometry, true_loc, offsets.phi_a,
                                        grid, mainlobe_radius)
            rows.append(PmsrRow(kind=kind, sigma=sigma, seed=int(seed),
                                pmsr_db=saf_map.pmsr_db))
            values.append(saf_map.pmsr_db)
        medians[sigma] = lower_median(np.array(values))
    return rows, medians
