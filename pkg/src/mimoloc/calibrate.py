"""Phase-offset estimation and compensation from CSI with known geometry.

Calibration runs in two stages. First, per-(antenna, subcarrier) phase
offsets are read off as the argument of the least-squares ratio between the
measured samples and the noiseless model template. Second, a range matched
filter across the subcarriers isolates the line-of-sight component per
antenna, and the residual per-antenna phase against the carrier steering
vector is estimated and removed.
"""

from __future__ import annotations

from dataclasses import dataclass
import csv

import numpy as np

from .errors import ShapeMismatchError
from .model import (
    ArrayGeometry,
    CsiTensor,
    SystemConfig,
    UeLocation,
    distances,
    ideal_snapshot,
)

DEFAULT_OVERSAMPLING = 64


def wrap_phase(phi: np.ndarray) -> np.ndarray:
    """Wrap angles into (-pi, pi]."""
    out = np.angle(np.exp(1j * np.asarray(phi, dtype=float)))
    return np.where(out <= -np.pi, out + 2.0 * np.pi, out)


@dataclass(frozen=True)
class CalibrationTables:
    """Estimated offsets: phi_f_hat is (N, K), phi_a_hat is (N,).

    residual_power holds the magnitude of the per-entry LSE ratio as a
    diagnostic; it is exactly 1 for a pure phase rotation.
    """

    phi_f_hat: np.ndarray
    phi_a_hat: np.ndarray
    residual_power: np.ndarray

    def __post_init__(self) -> None:
        phi_f = np.asarray(self.phi_f_hat, dtype=float)
        phi_a = np.asarray(self.phi_a_hat, dtype=float)
        res = np.asarray(self.residual_power, dtype=float)
        if phi_f.ndim != 2 or phi_a.ndim != 1 or phi_f.shape[0] != phi_a.shape[0]:
            raise ShapeMismatchError("phi_f_hat must be (N, K) and phi_a_hat (N,)")
        if res.shape != phi_f.shape:
            raise ShapeMismatchError("residual_power must match phi_f_hat")
        for name, tab in (("phi_f_hat", phi_f), ("phi_a_hat", phi_a)):
            if not np.all(np.isfinite(tab)):
                raise ValueError(f"{name} contains non-finite entries")
            if np.any(tab <= -np.pi) or np.any(tab > np.pi):
                raise ValueError(f"{name} has entries outside (-pi, pi]")
        object.__setattr__(self, "phi_f_hat", phi_f)
        object.__setattr__(self, "phi_a_hat", phi_a)
        object.__setattr__(self, "residual_power", res)


@dataclass(frozen=True)
class RangeProfile:
    """Per-antenna matched-filter output over range bins.

    ``values`` is (N, num_bins); bin b corresponds to range b * bin_spacing,
    covering one unambiguous interval [0, c / subcarrier_spacing).
    """

    values: np.ndarray
    bin_spacing: float
    peak_bins: np.ndarray   # (N,) int
    los_values: np.ndarray  # (N,) complex, profile at each antenna's peak

    @property
    def ranges(self) -> np.ndarray:
        return self.bin_spacing * np.arange(self.values.shape[1])


def _template(config: SystemConfig, geometry: ArrayGeometry,
              true_loc: UeLocation) -> np.ndarray:
    tpl = ideal_snapshot(config, geometry, true_loc)
    if np.any(np.abs(tpl) == 0.0):
        raise ValueError("model template vanishes for some (antenna, subcarrier)")
    return tpl


def estimate_frequency_offsets_from_sum(symbol_sum: np.ndarray, num_symbols: int,
                                        config: SystemConfig, geometry: ArrayGeometry,
                                        true_loc: UeLocation) -> CalibrationTables:
    """Frequency-offset estimate from the symbol-summed CSI, shape (N, K).

    Because the template is constant across symbols, the L-symbol LSE ratio
    only needs sum_l r_nk(l); this is the streaming-friendly entry point.
    """
    symbol_sum = np.asarray(symbol_sum, dtype=complex)
    tpl = _template(config, geometry, true_loc)
    if symbol_sum.shape != tpl.shape:
        raise ShapeMismatchError(
            f"symbol sum shape {symbol_sum.shape} does not match {tpl.shape}")
    if num_symbols < 1:
        raise ValueError("num_symbols must be >= 1")
    ratio = np.conj(tpl) * symbol_sum / (num_symbols * np.abs(tpl) ** 2)
    phi_f = wrap_phase(np.angle(ratio))
    return CalibrationTables(phi_f_hat=phi_f,
                             phi_a_hat=np.zeros(tpl.shape[0]),
                             residual_power=np.abs(ratio))


def estimate_frequency_offsets(measured: CsiTensor, config: SystemConfig,
                               geometry: ArrayGeometry,
                               true_loc: UeLocation) -> CalibrationTables:
    """Per-(n, k) LSE phase estimate against the noiseless model template."""
    return estimate_frequency_offsets_from_sum(
        measured.data.sum(axis=2), measured.num_symbols, config, geometry, true_loc)


def compensate_frequency(measured: CsiTensor, tables: CalibrationTables) -> CsiTensor:
    """Rotate every symbol by exp(-j phi_f_hat)."""
    if tables.phi_f_hat.shape != (measured.num_antennas, measured.num_subcarriers):
        raise ShapeMismatchError(
            f"tables {tables.phi_f_hat.shape} do not match CSI "
            f"({measured.num_antennas}, {measured.num_subcarriers})")
    rot = np.exp(-1j * tables.phi_f_hat)
    return CsiTensor(measured.data * rot[:, :, None],
                     measured.carrier_frequency, measured.subcarrier_spacing)


def range_matched_filter(snapshot: np.ndarray, config: SystemConfig,
                         oversampling: int = DEFAULT_OVERSAMPLING) -> RangeProfile:
    """Matched filter across subcarriers: r_n(d) = sum_k s_nk exp(+j 2 pi df k d / c).

    Evaluated on a zero-padded inverse DFT grid of K * oversampling bins over
    one unambiguous range interval. Native resolution is c / (K df); the
    oversampling only refines the peak-bin phase readout.
    """
    snapshot = np.asarray(snapshot, dtype=complex)
    if snapshot.ndim != 2 or snapshot.shape[1] != config.num_subcarriers:
        raise ShapeMismatchError("snapshot must be (N, K)")
    if oversampling < 1:
        raise ValueError("oversampling must be >= 1")
    if config.subcarrier_spacing <= 0:
        raise ValueError("range filtering requires a positive subcarrier spacing")
    k_count = config.num_subcarriers
    n_bins = k_count * int(oversampling)
    padded = np.zeros((snapshot.shape[0], n_bins), dtype=complex)
    padded[:, np.arange(1, k_count + 1) % n_bins] = snapshot
    values = n_bins * np.fft.ifft(padded, axis=1)
    peak_bins = np.argmax(np.abs(values), axis=1)
    los = values[np.arange(values.shape[0]), peak_bins]
    bin_spacing = config.speed_of_light / (config.subcarrier_spacing * n_bins)
    return RangeProfile(values=values, bin_spacing=bin_spacing,
                        peak_bins=peak_bins, los_values=los)


def ideal_los(config: SystemConfig, geometry: ArrayGeometry,
              true_loc: UeLocation) -> np.ndarray:
    """Carrier-only steering vector exp(-j 2 pi f_c d_n / c), shape (N,)."""
    d = distances(geometry, true_loc)
    return np.exp(-2j * np.pi * config.carrier_frequency * d / config.speed_of_light)


def estimate_spatial_offsets(los_values: np.ndarray, config: SystemConfig,
                             geometry: ArrayGeometry,
                             true_loc: UeLocation) -> np.ndarray:
    """Per-antenna phase of the LoS values against the carrier steering vector."""
    los_values = np.asarray(los_values, dtype=complex)
    if los_values.shape != (geometry.num_antennas,):
        raise ShapeMismatchError("los_values must be a length-N vector")
    if np.any(los_values == 0.0):
        raise ValueError("LoS values contain zeros; spatial phase is undefined")
    return wrap_phase(np.angle(los_values * np.conj(ideal_los(config, geometry, true_loc))))


def compensate_spatial(los_values: np.ndarray, phi_a_hat: np.ndarray) -> np.ndarray:
    """Rotate the per-antenna LoS values by exp(-j phi_a_hat)."""
    los_values = np.asarray(los_values, dtype=complex)
    phi_a_hat = np.asarray(phi_a_hat, dtype=float)
    if los_values.shape != phi_a_hat.shape:
        raise ShapeMismatchError("los_values and phi_a_hat must have the same length")
    return los_values * np.exp(-1j * phi_a_hat)


def subcarrier_varying_part(phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split per-(n, k) phases into a per-antenna constant and the k-varying rest.

    A phase component that is constant across subcarriers is indistinguishable
    from a per-antenna offset, so only the varying part is attributable to the
    per-subcarrier stage; the constant (circular mean over k) is returned
    separately for the per-antenna stage to absorb.
    """
    const = np.angle(np.exp(1j * np.asarray(phi, dtype=float)).sum(axis=1))
    return const, wrap_phase(phi - const[:, None])


@dataclass(frozen=True)
class CalibrationResult:
    """All pipeline intermediates, exposed for stage-by-stage inspection."""

    tables: CalibrationTables
    snapshot_raw: np.ndarray          # (N, K) symbol mean of the input
    snapshot_compensated: np.ndarray  # after frequency compensation
    profile_raw: RangeProfile
    profile_compensated: RangeProfile
    los_raw: np.ndarray               # LoS values without any compensation
    los_frequency: np.ndarray         # after frequency compensation only
    los_calibrated: np.ndarray        # after frequency + spatial compensation


def calibrate_pipeline_from_sum(symbol_sum: np.ndarray, num_symbols: int,
                                config: SystemConfig, geometry: ArrayGeometry,
                                true_loc: UeLocation,
                                oversampling: int = DEFAULT_OVERSAMPLING,
                                ) -> CalibrationResult:
    """Full calibration chain driven by the symbol-summed CSI.

    Order: frequency LSE -> compensation -> (already-averaged snapshot) ->
    range matched filter -> spatial estimation -> compensation.

    The frequency stage only compensates the subcarrier-varying part of the
    LSE estimate; the per-antenna constant is left for the spatial stage,
    which is the only stage that can attribute it (see
    :func:`subcarrier_varying_part`).
    """
    raw_tables = estimate_frequency_offsets_from_sum(
        symbol_sum, num_symbols, config, geometry, true_loc)
    _, phi_f_varying = subcarrier_varying_part(raw_tables.phi_f_hat)
    snapshot_raw = np.asarray(symbol_sum, dtype=complex) / num_symbols
    snapshot_comp = snapshot_raw * np.exp(-1j * phi_f_varying)

    profile_raw = range_matched_filter(snapshot_raw, config, oversampling)
    profile_comp = range_matched_filter(snapshot_comp, config, oversampling)

    phi_a = estimate_spatial_offsets(profile_comp.los_values, config, geometry, true_loc)
    los_cal = compensate_spatial(profile_comp.los_values, phi_a)

    tables = CalibrationTables(phi_f_hat=phi_f_varying, phi_a_hat=phi_a,
                               residual_power=raw_tables.residual_power)
    return CalibrationResult(
        tables=tables,
        snapshot_raw=snapshot_raw,
        snapshot_compensated=snapshot_comp,
        profile_raw=profile_raw,
        profile_compensated=profile_comp,
        los_raw=profile_raw.los_values,
        los_frequency=profile_comp.los_values,
        los_calibrated=los_cal,
    )


def calibrate_pipeline(measured: CsiTensor, config: SystemConfig,
                       geometry: ArrayGeometry, true_loc: UeLocation,
                       oversampling: int = DEFAULT_OVERSAMPLING) -> CalibrationResult:
    """Full calibration chain from an in-memory CSI tensor."""
    return calibrate_pipeline_from_sum(measured.data.sum(axis=2), measured.num_symbols,
                                       config, geometry, true_loc, oversampling)


def write_tables(tables: CalibrationTables, freq_path: str, spatial_path: str) -> None:
    """Persist calibration tables as (n, k, phi_f_hat) and (n, phi_a_hat) CSVs."""
    with open(freq_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "k", "phi_f_hat"])
        num_ant, num_sub = tables.phi_f_hat.shape
        for n in range(num_ant):
            for k in range(num_sub):
                writer.writerow([n, k, repr(float(tables.phi_f_hat[n, k]))])
    with open(spatial_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "phi_a_hat"])
        for n in range(tables.phi_a_hat.shape[0]):
            writer.writerow([n, repr(float(tables.phi_a_hat[n]))])


def read_tables(freq_path: str, spatial_path: str) -> CalibrationTables:
    """Load calibration tables written by :func:`write_tables`."""
    rows_f: dict[tuple[int, int], float] = {}
    with open(freq_path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows_f[(int(row["n"]), int(row["k"]))] = float(row["phi_f_hat"])
    rows_a: dict[int, float] = {}
    with open(spatial_path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows_a[int(row["n"])] = float(row["phi_a_hat"])
    if not rows_f or not rows_a:
        raise ValueError("calibration table files are empty")
    num_ant = max(n for n, _ in rows_f) + 1
    num_sub = max(k for _, k in rows_f) + 1
    phi_f = np.zeros((num_ant, num_sub))
    for (n, k), v in rows_f.items():
        phi_f[n, k] = v
    phi_a = np.zeros(num_ant)
    for n, v in rows_a.items():
        phi_a[n] = v
    return CalibrationTables(phi_f_hat=phi_f, phi_a_hat=phi_a,
                             residual_power=np.ones_like(phi_f))
