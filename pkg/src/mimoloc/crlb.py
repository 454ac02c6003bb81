"""Location estimation bounds under nuisance phase offsets.

The Fisher information over (x, y, phi) is assembled blockwise; the nuisance
phases are marginalized through the Schur complement, which stays O(P)
because the phi-phi block is diagonal (each offset touches exactly one
antenna/subcarrier group). The bound is reported as the RMSE
sqrt(tr(J_eff^-1)).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal, Optional, Sequence

import numpy as np

from .errors import SingularEfimError
from .model import (
    ArrayGeometry,
    OffsetSpec,
    SystemConfig,
    UeLocation,
    amplitudes,
    distances,
    ideal_snapshot,
    subcarrier_frequencies,
)

NuisanceKind = Literal["frequency", "spatial"]

# Condition-number guard for the closed-form 2x2 inversion.
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class FimBlocks:
    """FIM blocks for (x, y) plus P nuisance phases (diagonal phi-phi block)."""

    j_xy: np.ndarray          # (2, 2)
    j_xy_phi: np.ndarray      # (2, P)
    j_phi_diag: np.ndarray    # (P,)
    nuisance_kind: NuisanceKind


@dataclass(frozen=True)
class CrlbResult:
    j_eff: np.ndarray     # (2, 2) effective FIM
    crlb_xy: np.ndarray   # (2, 2) = inverse of j_eff, m^2
    rmse: float           # sqrt(trace(crlb_xy)), meters


def mean_signal(config: SystemConfig, geometry: ArrayGeometry, loc: UeLocation) -> np.ndarray:
    """Expected received signal mu_nk, shape (N, K).

    Offset phases are deliberately not included: every FIM block depends on
    mu only through |mu|^2 and real cross terms that cancel any common phase
    rotation (see the offset-invariance test).
    """
    return ideal_snapshot(config, geometry, loc)


def mean_gradients(config: SystemConfig, geometry: ArrayGeometry,
                   loc: UeLocation, mu: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
    """Analytic (d mu / dx, d mu / dy), each shape (N, K)."""
    if mu is None:
        mu = mean_signal(config, geometry, loc)
    d = distances(geometry, loc)
    fk = subcarrier_frequencies(config)
    rate = 2.0 * np.pi * fk[None, :] / config.speed_of_light  # (1, K)
    ux = ((loc.x - geometry.positions[:, 0]) / d)[:, None]
    uy = ((loc.y - geometry.positions[:, 1]) / d)[:, None]
    return -1j * rate * ux * mu, -1j * rate * uy * mu


def fim_blocks(config: SystemConfig, geometry: ArrayGeometry, loc: UeLocation,
               spec: OffsetSpec, kind: NuisanceKind,
               mu: Optional[np.ndarray] = None) -> FimBlocks:
    """Assemble the location/nuisance FIM blocks.

    ``mu`` may be supplied to override the expected signal (used by the
    offset-invariance tests); by default the ideal mean is used.
    """
    if config.snr_db is None:
        raise ValueError("CRLB requires a finite SNR (noiseless config has no FIM)")
    if kind not in ("frequency", "spatial"):
        raise ValueError(f"unknown nuisance kind {kind!r}")
    if mu is None:
        mu = mean_signal(config, geometry, loc)
    gx, gy = mean_gradients(config, geometry, loc, mu=mu)
    s = 2.0 / config.noise_variance

    j_xy = s * np.array([
        [np.sum(np.real(gx * np.conj(gx))), np.sum(np.real(gx * np.conj(gy)))],
        [np.sum(np.real(gy * np.conj(gx))), np.sum(np.real(gy * np.conj(gy)))],
    ])

    # d mu / d phi = j * mu for either offset kind.
    dphi = 1j * mu
    bx = np.real(gx * np.conj(dphi))
    by = np.real(gy * np.conj(dphi))
    power = np.abs(mu) ** 2

    if kind == "frequency":
        sigma = spec.freq_std
        prior_precision = np.inf if sigma == 0.0 else 1.0 / sigma**2
        j_xy_phi = s * np.stack([bx.ravel(), by.ravel()])
        j_phi_diag = s * power.ravel() + prior_precision
    else:
        half_width = spec.spatial_half_width
        prior_precision = np.inf if half_width == 0.0 else 3.0 / half_width**2
        j_xy_phi = s * np.stack([bx.sum(axis=1), by.sum(axis=1)])
        j_phi_diag = s * power.sum(axis=1) + prior_precision

    return FimBlocks(j_xy=j_xy, j_xy_phi=j_xy_phi, j_phi_diag=j_phi_diag, nuisance_kind=kind)


def _invert_2x2(m: np.ndarray) -> np.ndarray:
    a, b = m[0, 0], m[0, 1]
    c, d = m[1, 0], m[1, 1]
    det = a * d - b * c
    eigs = np.linalg.eigvalsh(m)
    if det <= 0 or eigs[0] <= 0 or eigs[1] / eigs[0] > CONDITION_LIMIT:
        raise SingularEfimError(f"effective FIM is numerically singular (eigs {eigs})")
    return np.array([[d, -b], [-c, a]]) / det


def effective_fim(blocks: FimBlocks) -> CrlbResult:
    """Schur complement J_xy - J_xy,phi diag^-1 J_xy,phi^T and the implied bound.

    An infinite prior precision (sigma = 0) zeroes the correction, matching
    the analytic limit of perfectly known offsets.
    """
    if np.any(blocks.j_phi_diag <= 0):
        raise ValueError("j_phi_diag must be strictly positive")
    scaled = blocks.j_xy_phi / blocks.j_phi_diag  # (2, P); finite/inf -> 0
    correction = scaled @ blocks.j_xy_phi.T
    j_eff = blocks.j_xy - correction
    j_eff = 0.5 * (j_eff + j_eff.T)
    crlb = _invert_2x2(j_eff)
    return CrlbResult(j_eff=j_eff, crlb_xy=crlb, rmse=float(np.sqrt(np.trace(crlb))))


def crlb_rmse(config: SystemConfig, geometry: ArrayGeometry, loc: UeLocation,
              kind: NuisanceKind, sigma: float) -> float:
    """Bound RMSE for one nuisance std; sigma is the offset standard deviation."""
    if kind == "frequency":
        spec = OffsetSpec(freq_std=sigma)
    else:
        spec = OffsetSpec(spatial_half_width=np.sqrt(3.0) * sigma)
    return effective_fim(fim_blocks(config, geometry, loc, spec, kind)).rmse


@dataclass(frozen=True)
class SweepRow:
    kind: NuisanceKind
    num_antennas: int
    sigma: float
    rmse: float


def crlb_sweep(config: SystemConfig, geometry: Optional[ArrayGeometry], loc: UeLocation,
               kind: NuisanceKind, sigma_list: Sequence[float],
               antenna_counts: Optional[Iterable[int]] = None) -> list[SweepRow]:
    """Bound RMSE over a (N antennas, sigma) product grid.

    With ``antenna_counts`` given, a centered ULA with the configured spacing
    is built per count; otherwise the supplied geometry is used as-is.
    """
    if len(list(sigma_list)) == 0:
        raise ValueError("sigma_list must be non-empty")
    if antenna_counts is None:
        if geometry is None:
            geometry = ArrayGeometry.ula(config.num_antennas, config.antenna_spacing)
        cases = [(geometry.num_antennas, geometry)]
    else:
        counts = list(antenna_counts)
        if not counts:
            raise ValueError("antenna_counts must be non-empty")
        cases = [(n, ArrayGeometry.ula(n, config.antenna_spacing)) for n in counts]

    rows = []
    for n, geom in cases:
        cfg = SystemConfig(
            carrier_frequency=config.carrier_frequency,
            subcarrier_spacing=config.subcarrier_spacing,
            num_subcarriers=config.num_subcarriers,
            num_antennas=n,
            antenna_spacing=config.antenna_spacing,
            num_symbols=config.num_symbols,
            snr_db=config.snr_db,
            amplitude_model=config.amplitude_model,
        )
        for sigma in sigma_list:
            rows.append(SweepRow(kind=kind, num_antennas=n, sigma=float(sigma),
                                 rmse=crlb_rmse(cfg, geom, loc, kind, float(sigma))))
    return rows
