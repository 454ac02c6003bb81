"""Carrier-only localization from the per-antenna LoS vector.

The localization image correlates the N calibrated LoS values against the
carrier steering vector at every grid point; the peak cell is refined to
sub-grid accuracy with independent 1-D quadratic fits in log power.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ShapeMismatchError
from .model import ArrayGeometry, SystemConfig, UeLocation
from .saf import DEFAULT_MAINLOBE_RADIUS, SafMap, SpatialGrid, _finish_map, _grid_distances

_CHUNK = 32768  # grid points per evaluation block; bounds peak memory


class ImagingOperator:
    """Reusable carrier matched filter for a fixed (config, geometry, grid).

    Caches the grid-to-antenna distance matrix so repeated images (e.g. over
    seeds or calibration stages) skip the geometry work.
    """

    def __init__(self, config: SystemConfig, geometry: ArrayGeometry,
                 grid: SpatialGrid) -> None:
        self.config = config
        self.geometry = geometry
        self.grid = grid
        self._phase = (2.0 * np.pi * config.carrier_frequency / config.speed_of_light
                       * _grid_distances(grid, geometry))  # (P, N)

    def image(self, los_vector: np.ndarray,
              mainlobe_radius: float = DEFAULT_MAINLOBE_RADIUS) -> SafMap:
        los_vector = np.asarray(los_vector, dtype=complex)
        if los_vector.shape != (self.geometry.num_antennas,):
            raise ShapeMismatchError("los_vector must be a length-N vector")
        num_points = self._phase.shape[0]
        power = np.empty(num_points)
        for start in range(0, num_points, _CHUNK):
            block = self._phase[start:start + _CHUNK]
            total = np.exp(1j * block) @ los_vector
            power[start:start + _CHUNK] = total.real**2 + total.imag**2
        return _finish_map(self.grid, power, mainlobe_radius)


def localization_image(los_vector: np.ndarray, config: SystemConfig,
                       geometry: ArrayGeometry, grid: SpatialGrid,
                       mainlobe_radius: float = DEFAULT_MAINLOBE_RADIUS) -> SafMap:
    """|sum_n los_n exp(+j 2 pi f_c d_n(x, y) / c)|^2 over the grid."""
    return ImagingOperator(config, geometry, grid).image(los_vector, mainlobe_radius)


def _parabolic_offset(p_lo: float, p_mid: float, p_hi: float, step: float) -> float:
    """Vertex offset of a 3-point parabola through log powers, clamped to +-step/2."""
    with np.errstate(divide="ignore"):
        y = np.log(np.array([p_lo, p_mid, p_hi]))
    if not np.all(np.isfinite(y)):
        return 0.0
    denom = y[0] - 2.0 * y[1] + y[2]
    if denom >= 0.0:  # not a local maximum in log power
        return 0.0
    offset = 0.5 * (y[0] - y[2]) / denom * step
    return float(np.clip(offset, -step / 2.0, step / 2.0))


def refine_peak(image: SafMap) -> tuple[float, float]:
    """Sub-grid peak estimate; falls back to the raw cell on the grid boundary."""
    ix, iy = image.peak_indices
    x, y = image.peak_location
    step = image.grid.step
    if 0 < ix < image.grid.num_x - 1:
        x += _parabolic_offset(image.power[ix - 1, iy], image.power[ix, iy],
                               image.power[ix + 1, iy], step)
    if 0 < iy < image.grid.num_y - 1:
        y += _parabolic_offset(image.power[ix, iy - 1], image.power[ix, iy],
                               image.power[ix, iy + 1], step)
    return (x, y)


@dataclass(frozen=True)
class LocalizationResult:
    image: SafMap
    estimate: tuple[float, float]
    ground_truth: tuple[float, float]
    error: float       # meters, Euclidean
    pmsr_db: float


def locate(los_vector: np.ndarray, config: SystemConfig, geometry: ArrayGeometry,
           grid: SpatialGrid, truth: UeLocation,
           operator: Optional[ImagingOperator] = None,
           mainlobe_radius: float = DEFAULT_MAINLOBE_RADIUS) -> LocalizationResult:
    """Image, refine and score one LoS vector against the known location."""
    if operator is None:
        operator = ImagingOperator(config, geometry, grid)
    image = operator.image(los_vector, mainlobe_radius)
    est = refine_peak(image)
    err = float(np.hypot(est[0] - truth.x, est[1] - truth.y))
    return LocalizationResult(image=image, estimate=est,
                              ground_truth=(truth.x, truth.y),
                              error=err, pmsr_db=image.pmsr_db)


def score(errors: Sequence[float]) -> float:
    """Root-mean-square of per-capture localization errors, meters."""
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise ValueError("need at least one localization error to score")
    return float(np.sqrt(np.mean(errors**2)))
