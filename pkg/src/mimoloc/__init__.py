"""Localization in OFDM massive MIMO under per-antenna/subcarrier phase offsets.

Submodules:
  model      signal synthesis, offsets, noise
  crlb       Fisher-information bounds with nuisance phases
  saf        spatial ambiguity maps and PMSR
  calibrate  offset estimation/compensation from CSI
  locate     carrier matched-filter localization
  csifile    CSIB binary capture format
  config     flat experiment configuration
  runners    deterministic experiment drivers
  cli        command-line interface
"""

from .model import (
    ArrayGeometry,
    CsiTensor,
    OffsetRealization,
    OffsetSpec,
    SystemConfig,
    UeLocation,
)

__all__ = [
    "ArrayGeometry",
    "CsiTensor",
    "OffsetRealization",
    "OffsetSpec",
    "SystemConfig",
    "UeLocation",
]

__version__ = "0.1.0"
