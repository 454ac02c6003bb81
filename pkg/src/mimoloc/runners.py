"""Deterministic experiment runners behind the CLI subcommands.

Every runner resolves an ExperimentConfig, writes plot-ready CSV/JSON into
the output directory, and embeds the full resolved config as ``# key=value``
comment lines so any output can be reproduced from its own header.
"""

from __future__ import annotations

import csv
import json
import os
from typing import Any, Iterable, Sequence

import numpy as np

from .calibrate import calibrate_pipeline_from_sum, write_tables
from .config import ExperimentConfig, config_header_lines
from .crlb import crlb_sweep
from .csifile import CsiFileHeader, CsiStreamReader, CsiStreamWriter, GEOMETRY_ULA
from .locate import ImagingOperator, locate
from .model import (
    OffsetSpec,
    SystemConfig,
    UeLocation,
    complex_noise,
    ideal_snapshot,
    rng_stream,
    sample_offsets,
)
from .saf import SafMap, cuts, pmsr_sweep, saf_fast_path, saf_model

CSV_SCHEMA_VERSION = 1


def _open_csv(path: str, config: ExperimentConfig, columns: Sequence[str]):
    fh = open(path, "w", newline="")
    fh.write(f"# csv_schema_version={CSV_SCHEMA_VERSION}\n")
    for line in config_header_lines(config):
        fh.write(line + "\n")
    writer = csv.writer(fh)
    writer.writerow(columns)
    return fh, writer


def _fmt(value: Any) -> Any:
    return repr(float(value)) if isinstance(value, (float, np.floating)) else value


def _write_rows(path: str, config: ExperimentConfig, columns: Sequence[str],
                rows: Iterable[Sequence[Any]]) -> None:
    fh, writer = _open_csv(path, config, columns)
    with fh:
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_map_csv(path: str, config: ExperimentConfig, saf_map: SafMap) -> None:
    grid = saf_map.grid
    xs, ys = grid.x_axis, grid.y_axis

    def rows():
        for i in range(grid.num_x):
            for j in range(grid.num_y):
                yield (xs[i], ys[j], saf_map.power[i, j])

    _write_rows(path, config, ["x_m", "y_m", "power"], rows())


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_simulate(config: ExperimentConfig) -> dict[str, str]:
    """Synthesize one capture to <out>/capture.csib plus a truth sidecar.

    The capture streams to disk antenna by antenna, so arbitrarily long
    symbol counts never require the full tensor in memory.
    """
    system = config.system()
    geometry = config.geometry()
    loc = config.ue_location()
    spec = config.offsets()
    offsets = sample_offsets(spec, system.num_antennas, system.num_subcarriers)

    snapshot = ideal_snapshot(system, geometry, loc) * np.exp(1j * offsets.total_phase())
    noise_rng = rng_stream(spec.seed, "noise")
    shape_l = (system.num_subcarriers, system.num_symbols)

    os.makedirs(config.out_dir, exist_ok=True)
    csi_path = os.path.join(config.out_dir, "capture.csib")
    truth_path = os.path.join(config.out_dir, "truth.json")

    header = CsiFileHeader(system.num_antennas, system.num_subcarriers,
                           system.num_symbols, system.carrier_frequency,
                           system.subcarrier_spacing, GEOMETRY_ULA,
                           system.antenna_spacing)
    with CsiStreamWriter(csi_path, header) as writer:
        for n in range(system.num_antennas):
            block = np.broadcast_to(snapshot[n][:, None], shape_l).astype(complex)
            block = block + complex_noise(noise_rng, shape_l, system.noise_variance)
            writer.write_block(block[None, :, :])

    _write_json(truth_path, {
        "ue_x": loc.x,
        "ue_y": loc.y,
        "seed": spec.seed,
        "freq_std": spec.freq_std,
        "spatial_half_width": spec.spatial_half_width,
        "freq_mean": spec.freq_mean,
        "phi_f": offsets.phi_f.tolist(),
        "phi_a": offsets.phi_a.tolist(),
        "config": config.as_dict(),
    })
    return {"csi": csi_path, "truth": truth_path}


def run_crlb_sweep(config: ExperimentConfig) -> str:
    """Bound RMSE for both offset kinds over (antenna count, sigma)."""
    system = config.system()
    loc = config.ue_location()
    os.makedirs(config.out_dir, exist_ok=True)
    path = os.path.join(config.out_dir, "crlb_sweep.csv")

    def rows():
        for kind in ("frequency", "spatial"):
            for row in crlb_sweep(system, None, loc, kind, config.sweep_sigmas,
                                  config.sweep_antenna_counts):
                yield (row.kind, row.num_antennas, row.sigma, row.rmse)

    _write_rows(path, config, ["kind", "num_antennas", "sigma_rad", "rmse_m"], rows())
    return path


def _saf_scenarios(config: ExperimentConfig):
    yield ("ideal", "ideal", 0.0)
    for sigma in config.saf_sigmas:
        yield (f"frequency_{sigma:.6g}", "frequency", float(sigma))
        yield (f"spatial_{sigma:.6g}", "spatial", float(sigma))


def run_saf(config: ExperimentConfig) -> dict[str, str]:
    """Ambiguity maps, peak cuts and PMSR for each configured scenario."""
    system = config.system()
    geometry = config.geometry()
    loc = config.ue_location()
    grid = config.grid()
    os.makedirs(config.out_dir, exist_ok=True)

    outputs: dict[str, str] = {}
    report_rows = []
    for name, kind, sigma in _saf_scenarios(config):
        if kind == "ideal":
            saf_map = saf_fast_path(system, geometry, loc, None, grid,
                                    config.mainlobe_radius)
        elif kind == "frequency":
            spec = OffsetSpec(freq_std=sigma, freq_mean=config.freq_mean,
                              seed=config.seed)
            offsets = sample_offsets(spec, system.num_antennas, system.num_subcarriers)
            saf_map = saf_model(system, geometry, loc, offsets, grid,
                                config.mainlobe_radius)
        else:
            spec = OffsetSpec.from_spatial_std(sigma, seed=config.seed)
            offsets = sample_offsets(spec, system.num_antennas, system.num_subcarriers)
            saf_map = saf_fast_path(system, geometry, loc, offsets.phi_a, grid,
                                    config.mainlobe_radius)

        map_path = os.path.join(config.out_dir, f"saf_map_{name}.csv")
        _write_map_csv(map_path, config, saf_map)
        outputs[f"map_{name}"] = map_path

        profile = cuts(saf_map)
        cuts_path = os.path.join(config.out_dir, f"saf_cuts_{name}.csv")
        cut_rows = ([("x", x, v) for x, v in zip(profile.x_coords, profile.x_cut_db)]
                    + [("y", y, v) for y, v in zip(profile.y_coords, profile.y_cut_db)])
        _write_rows(cuts_path, config, ["axis", "coordinate_m", "power_db"], cut_rows)
        outputs[f"cuts_{name}"] = cuts_path

        report_rows.append((name, kind, sigma, saf_map.pmsr_db,
                            saf_map.peak_location[0], saf_map.peak_location[1]))

    report_path = os.path.join(config.out_dir, "saf_pmsr.csv")
    _write_rows(report_path, config,
                ["scenario", "kind", "sigma_rad", "pmsr_db", "peak_x_m", "peak_y_m"],
                report_rows)
    outputs["pmsr"] = report_path
    return outputs


def run_pmsr_sweep(config: ExperimentConfig) -> str:
    """Seed-resolved PMSR degradation versus offset level for both kinds."""
    system = config.system()
    geometry = config.geometry()
    loc = config.ue_location()
    grid = config.grid()
    os.makedirs(config.out_dir, exist_ok=True)
    path = os.path.join(config.out_dir, "pmsr_sweep.csv")

    all_rows = []
    for kind in ("frequency", "spatial"):
        rows, medians = pmsr_sweep(system, geometry, loc, kind, config.sweep_sigmas,
                                   config.seeds, grid, config.mainlobe_radius)
        for row in rows:
            all_rows.append((row.kind, row.sigma, row.seed, row.pmsr_db,
                             medians[row.sigma]))
    _write_rows(path, config, ["kind", "sigma_rad", "seed", "pmsr_db", "median_db"],
                all_rows)
    return path


def run_calibrate_localize(config: ExperimentConfig, csi_path: str,
                           truth_path: str) -> dict[str, str]:
    """Three-stage comparison: raw, frequency-compensated, fully calibrated.

    Requires the ground-truth sidecar; calibration is extrinsic and needs the
    known transmitter location.
    """
    with open(truth_path) as fh:
        truth_doc = json.load(fh)
    truth = UeLocation(float(truth_doc["ue_x"]), float(truth_doc["ue_y"]))

    with CsiStreamReader(csi_path) as reader:
        header = reader.header
        geometry = reader.geometry
        symbol_sum = reader.symbol_sum()

    system = SystemConfig(
        carrier_frequency=header.carrier_frequency,
        subcarrier_spacing=header.subcarrier_spacing,
        num_subcarriers=header.num_subcarriers,
        num_antennas=header.num_antennas,
        antenna_spacing=header.antenna_spacing or config.antenna_spacing,
        num_symbols=header.num_symbols,
        snr_db=config.snr_db,
        amplitude_model=config.amplitude_model,
    )
    result = calibrate_pipeline_from_sum(symbol_sum, header.num_symbols, system,
                                         geometry, truth, config.oversampling)

    grid = config.grid()
    operator = ImagingOperator(system, geometry, grid)
    stages = {
        "uncalibrated": result.los_raw,
        "frequency": result.los_frequency,
        "calibrated": result.los_calibrated,
    }

    os.makedirs(config.out_dir, exist_ok=True)
    outputs: dict[str, str] = {}
    stage_report: dict[str, dict] = {}
    for stage, los in stages.items():
        loc_result = locate(los, system, geometry, grid, truth, operator=operator,
                            mainlobe_radius=config.mainlobe_radius)
        map_path = os.path.join(config.out_dir, f"image_{stage}.csv")
        _write_map_csv(map_path, config, loc_result.image)
        outputs[f"image_{stage}"] = map_path
        stage_report[stage] = {
            "estimate_x": loc_result.estimate[0],
            "estimate_y": loc_result.estimate[1],
            "error_m": loc_result.error,
            "pmsr_db": loc_result.pmsr_db,
        }

    freq_csv = os.path.join(config.out_dir, "tables_frequency.csv")
    spatial_csv = os.path.join(config.out_dir, "tables_spatial.csv")
    write_tables(result.tables, freq_csv, spatial_csv)
    outputs["tables_frequency"] = freq_csv
    outputs["tables_spatial"] = spatial_csv

    report_path = os.path.join(config.out_dir, "localization.json")
    _write_json(report_path, {
        "truth": {"x": truth.x, "y": truth.y},
        "stages": stage_report,
        "config": config.as_dict(),
    })
    outputs["report"] = report_path
    return outputs


def run_inspect(csi_path: str) -> dict:
    """Header dump plus first-antenna modulus statistics."""
    with CsiStreamReader(csi_path) as reader:
        h = reader.header
        first = next(reader.antennas())
    moduli = np.abs(first)
    return {
        "num_antennas": h.num_antennas,
        "num_subcarriers": h.num_subcarriers,
        "num_symbols": h.num_symbols,
        "carrier_frequency_hz": h.carrier_frequency,
        "subcarrier_spacing_hz": h.subcarrier_spacing,
        "geometry_kind": h.geometry_kind,
        "antenna_spacing_m": h.antenna_spacing,
        "payload_bytes": h.payload_bytes,
        "first_antenna_modulus_mean": float(moduli.mean()),
        "first_antenna_modulus_max": float(moduli.max()),
    }
