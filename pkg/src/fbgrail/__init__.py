"""Shape sensing of a soft ultrasound-probe rail with a multicore fibre Bragg grating fibre."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DataError,
    DomainError,
    FbgRailError,
    FrameMismatchError,
    InsufficientDataError,
    NoValidDataError,
    NotFoundError,
    NumericalError,
    PlanarityError,
    RankDeficiencyError,
)
from .fiber import CurvatureSample, FiberSpec, NoiseModel, WavelengthFrame  # noqa: E402
from .reconstruction import CurvatureProfile, profile_from_sequence, set_reference  # noqa: E402

__all__ = [
    "ConfigError",
    "CurvatureProfile",
    "CurvatureSample",
    "DataError",
    "DomainError",
    "FbgRailError",
    "FiberSpec",
    "FrameMismatchError",
    "InsufficientDataError",
    "NoValidDataError",
    "NoiseModel",
    "NotFoundError",
    "NumericalError",
    "PlanarityError",
    "RankDeficiencyError",
    "WavelengthFrame",
    "profile_from_sequence",
    "set_reference",
]
